pub mod align;
pub mod annotation;
pub mod bundle;
pub mod category;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod scene_graph;
pub mod synth;

pub use error::{Error, IngestCode, Result};

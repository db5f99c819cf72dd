use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use replica_core::bundle::{discover_bundles, to_sorted_json, write_atomic, SceneBundle};
use replica_core::category::CategoryMap;
use replica_core::pipeline::{
    align_matches, augment_scene, eval_bundles, export_scene, extract_microscenes, failures, match_objects,
    placed_layout, run_pipeline, PipelineConfig, PipelineOutput,
};
use replica_core::scene_graph::{build_scene_graph_with, validate_graph};
use replica_core::synth::{write_synthetic_bundle, SynthConfig};

#[derive(Parser)]
#[command(
    name = "replica",
    version,
    about = "Turn scanned scenes into clean, simulation-ready replicas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct BundleArgs {
    /// Scene bundle directory.
    #[arg(env = "S2S_DATA_ROOT")]
    bundle: PathBuf,
    /// Pipeline config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optimizer seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a bundle and print a summary.
    Ingest {
        #[arg(env = "S2S_DATA_ROOT")]
        bundle: PathBuf,
    },
    /// Rank every object's candidates.
    Match(BundleArgs),
    /// Rank, then fit each top-1 asset onto its scan.
    Align(BundleArgs),
    /// Build the scene graph of the placed layout.
    Scenegraph(BundleArgs),
    /// Run the full pipeline and print the optimized layout.
    Optimize(BundleArgs),
    /// Run the full pipeline and write a self-contained scene directory.
    Export {
        #[command(flatten)]
        args: BundleArgs,
        /// Output directory.
        #[arg(long = "to")]
        to: PathBuf,
    },
    /// Swap assets for top-k alternatives and write the augmented scene.
    Augment {
        #[command(flatten)]
        args: BundleArgs,
        /// Draw among this many alternatives (1 to 5).
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Output directory.
        #[arg(long = "to")]
        to: PathBuf,
    },
    /// List micro-scenes: large furniture with what it supports.
    Microscene {
        #[command(flatten)]
        args: BundleArgs,
        /// Category map JSON; the built-in map when absent.
        #[arg(long)]
        categories: Option<PathBuf>,
    },
    /// Score predicted scenes against ground truth.
    Eval {
        /// Predicted bundle, or a directory of bundles.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth bundle, or a directory of bundles.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        categories: Option<PathBuf>,
        /// Directory for metrics.json and metrics.csv.
        #[arg(long = "to")]
        to: Option<PathBuf>,
    },
    /// Serve the review API over the bundles under a root.
    Serve {
        #[arg(long, env = "S2S_DATA_ROOT")]
        root: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Write a seeded synthetic bundle with known ground truth.
    Synth {
        /// Output directory.
        dir: PathBuf,
        /// Generator settings (JSON); defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scene_id: Option<String>,
        #[arg(long)]
        objects: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Make each scan one of its own candidates.
        #[arg(long)]
        oracle: bool,
    },
}

fn load_config(args: &BundleArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.optimizer.seed = s;
    }
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_sorted_json(value)?;
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn ingest(path: &Path) -> Result<SceneBundle> {
    Ok(SceneBundle::ingest(path)?)
}

fn bundles_under(path: &Path) -> Result<Vec<SceneBundle>> {
    let dirs = discover_bundles(path)?;
    if dirs.is_empty() {
        bail!("no scene bundles under {}", path.display());
    }
    dirs.iter().map(|d| ingest(d)).collect()
}

fn categories(path: Option<&Path>) -> Result<CategoryMap> {
    Ok(match path {
        Some(p) => CategoryMap::load(p)?,
        None => CategoryMap::default_map(),
    })
}

/// Pipeline output for a bundle; an exported bundle keeps its stored layout.
fn layout_and_graph(
    bundle: &SceneBundle,
    cfg: &PipelineConfig,
) -> Result<(replica_core::scene::SceneLayout, replica_core::scene_graph::SceneGraph)> {
    match (&bundle.manifest.layout, &bundle.manifest.scene_graph) {
        (Some(l), Some(g)) => Ok((l.clone(), g.clone())),
        (Some(l), None) => Ok((l.clone(), build_scene_graph_with(l, &cfg.thresholds))),
        _ => {
            let o = run_pipeline(bundle, cfg)?;
            Ok((o.layout, o.graph))
        }
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    v: u32,
    scene_id: &'a str,
    objects: usize,
    candidates: usize,
    dim: Option<usize>,
    annotations: usize,
    scorer: bool,
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    v: u32,
    layout: &'a replica_core::scene::SceneLayout,
    trace: &'a [f64],
    final_loss: f64,
    violations: &'a [replica_core::scene_graph::Violation],
    failures: std::collections::BTreeMap<String, String>,
}

fn optimize_summary(o: &PipelineOutput) -> OptimizeSummary<'_> {
    let (trace, final_loss) = match &o.optimize {
        Some(r) => (r.trace.as_slice(), r.final_loss),
        None => (&[][..], 0.0),
    };
    OptimizeSummary {
        v: 1,
        layout: &o.layout,
        trace,
        final_loss,
        violations: &o.violations,
        failures: failures(&o.layout),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { bundle } => {
            let b = ingest(&bundle)?;
            emit(
                &IngestSummary {
                    v: 1,
                    scene_id: b.scene_id(),
                    objects: b.manifest.objects.len(),
                    candidates: b.candidate_sets.iter().map(|s| s.len()).sum(),
                    dim: b.candidate_sets.first().map(|s| s.dim()),
                    annotations: b.annotations.records.len(),
                    scorer: b.scorer.is_some(),
                },
                None,
            )
        }
        Command::Match(args) => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            emit(&match_objects(&b, &cfg)?, args.out.as_deref())
        }
        Command::Align(args) => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let matches = match_objects(&b, &cfg)?;
            let aligned = align_matches(&b, &matches, &cfg);
            let mut ok = Vec::new();
            let mut failed = std::collections::BTreeMap::new();
            for (m, r) in matches.iter().zip(aligned) {
                match r {
                    Ok((a, _)) => ok.push(a),
                    Err(e) => {
                        failed.insert(m.object_id.clone(), e.to_string());
                    }
                }
            }
            emit(
                &serde_json::json!({"v": 1, "alignments": ok, "failures": failed}),
                args.out.as_deref(),
            )
        }
        Command::Scenegraph(args) => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let matches = match_objects(&b, &cfg)?;
            let aligned = align_matches(&b, &matches, &cfg);
            let layout = placed_layout(&b, &matches, &aligned, &cfg)?;
            let graph = build_scene_graph_with(&layout, &cfg.thresholds);
            let violations = validate_graph(&graph, &layout)?;
            emit(
                &serde_json::json!({"v": 1, "scene_graph": graph, "violations": violations}),
                args.out.as_deref(),
            )
        }
        Command::Optimize(args) => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let o = run_pipeline(&b, &cfg)?;
            emit(&optimize_summary(&o), args.out.as_deref())
        }
        Command::Export { args, to } => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let o = run_pipeline(&b, &cfg)?;
            export_scene(&b, &o.layout, &o.graph, Some(&o), &to)?;
            emit(&o.metrics, args.out.as_deref())
        }
        Command::Augment { args, k, to } => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let (layout, _) = layout_and_graph(&b, &cfg)?;
            let seed = args.seed.unwrap_or(0);
            let aug = augment_scene(&layout, Some(&b.annotations), k, seed, &b, &cfg.alignment)?;
            let graph = build_scene_graph_with(&aug, &cfg.thresholds);
            export_scene(&b, &aug, &graph, None, &to)?;
            emit(&aug, args.out.as_deref())
        }
        Command::Microscene { args, categories: map } => {
            let cfg = load_config(&args)?;
            let b = ingest(&args.bundle)?;
            let map = categories(map.as_deref())?;
            let (layout, graph) = layout_and_graph(&b, &cfg)?;
            emit(&extract_microscenes(&layout, &graph, &map), args.out.as_deref())
        }
        Command::Eval {
            pred,
            gt,
            categories: map,
            to,
        } => {
            let map = categories(map.as_deref())?;
            let report = eval_bundles(&bundles_under(&pred)?, &bundles_under(&gt)?, &map)?;
            if let Some(dir) = to {
                write_atomic(&dir.join("metrics.json"), to_sorted_json(&report)?.as_bytes())?;
                write_atomic(&dir.join("metrics.csv"), report.to_csv().as_bytes())?;
            }
            emit(&report, None)
        }
        Command::Serve { root, host, port } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host or port")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(replica_service::serve(&root, addr))?;
            Ok(())
        }
        Command::Synth {
            dir,
            config,
            scene_id,
            objects,
            seed,
            oracle,
        } => {
            let mut cfg: SynthConfig = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = scene_id {
                cfg.scene_id = s;
            }
            if let Some(n) = objects {
                cfg.objects = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.oracle |= oracle;
            if oracle {
                cfg.query_noise = 0.0;
            }
            let out = write_synthetic_bundle(&dir, &cfg)?;
            emit(&out.truths, None)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e
                .downcast_ref::<replica_core::Error>()
                .and_then(|e| e.ingest_code())
                .or_else(|| match e.downcast_ref::<replica_service::ServiceError>() {
                    Some(replica_service::ServiceError::Core(c)) => c.ingest_code(),
                    _ => None,
                });
            eprintln!("error: {e:#}");
            // Bundle validation failures get their own exit status.
            if code.is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

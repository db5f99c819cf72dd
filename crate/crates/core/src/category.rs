//! Open-vocabulary object names merged into a fixed category universe.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FALLBACK_CATEGORY: &str = "object";
pub const CATEGORY_COUNT: usize = 60;

const DEFAULT_MAP: &str = include_str!("../data/categories.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMap {
    pub v: u32,
    pub large: BTreeSet<String>,
    pub small: BTreeSet<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

/// Lowercase, trimmed, with spaces and hyphens turned into underscores.
pub fn normalize_name(raw: &str) -> String {
    raw.trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

impl CategoryMap {
    pub fn default_map() -> Self {
        Self::from_json(DEFAULT_MAP).expect("bundled category map is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: CategoryMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.universe().len();
        if n != CATEGORY_COUNT {
            return Err(Error::InvalidInput(format!(
                "category map defines {n} merged categories, expected {CATEGORY_COUNT}"
            )));
        }
        if !self.universe().contains(FALLBACK_CATEGORY) {
            return Err(Error::InvalidInput(format!("category map lacks '{FALLBACK_CATEGORY}'")));
        }
        for (raw, target) in &self.aliases {
            if !self.universe().contains(target.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "alias '{raw}' points at unknown category '{target}'"
                )));
            }
        }
        Ok(())
    }

    pub fn universe(&self) -> BTreeSet<&str> {
        self.large.iter().chain(&self.small).map(String::as_str).collect()
    }

    pub fn shared(&self) -> BTreeSet<&str> {
        self.large.intersection(&self.small).map(String::as_str).collect()
    }

    pub fn merge(&self, raw: &str) -> String {
        let name = normalize_name(raw);
        if self.large.contains(&name) || self.small.contains(&name) {
            return name;
        }
        self.aliases
            .get(&name)
            .cloned()
            .unwrap_or_else(|| FALLBACK_CATEGORY.to_string())
    }

    pub fn is_large(&self, raw: &str) -> bool {
        self.large.contains(&self.merge(raw))
    }
}

impl Default for CategoryMap {
    fn default() -> Self {
        Self::default_map()
    }
}

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

/// Queries from earlier participants, shown to others for rating.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct Pool {
    #[serde(default)]
    pub problems: HashMap<String, PoolEntry>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct PoolEntry {
    #[serde(default)]
    pub correct: Vec<String>,
    #[serde(default)]
    pub repaired: Vec<String>,
}

impl Pool {
    pub fn load(path: &Path) -> std::io::Result<Pool> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn entry(&self, problem: &str) -> Option<&PoolEntry> {
        self.problems.get(problem)
    }
}

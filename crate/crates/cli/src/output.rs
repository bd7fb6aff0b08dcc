//! Buffered artifacts, flushed to the output directory in one pass.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Artifacts {
    items: Vec<Artifact>,
}

/// Shortest round-trip representation; empty for missing values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{:e}", x)
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[Artifact] {
        &self.items
    }

    pub fn get(&self, name: &str) -> Option<&Artifact> {
        self.items.iter().find(|a| a.name == name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {}", e))?;
        self.items.push(Artifact { name: name.to_string(), bytes });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.items.push(Artifact { name: name.to_string(), bytes });
        Ok(())
    }

    /// Whitespace-separated `x y` lines for plotting tools.
    pub fn plot(&mut self, name: &str, points: &[(f64, f64)]) {
        let mut s = String::new();
        for (x, y) in points {
            s.push_str(&format!("{} {}\n", fmt_f64(*x), fmt_f64(*y)));
        }
        self.items.push(Artifact { name: name.to_string(), bytes: s.into_bytes() });
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let mut written = Vec::new();
        for a in &self.items {
            let path = dir.join(&a.name);
            fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

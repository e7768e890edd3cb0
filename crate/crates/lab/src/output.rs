//! CSV tables with a provenance comment line and a JSON metadata sidecar.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::Result;

/// Version tag in the style of `git describe`.
pub fn version_tag() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            seed: config.seed,
            version: version_tag(),
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# config_hash={}, seed={}, version={}",
            self.config_hash, self.seed, self.version
        )
    }
}

/// Shortest representation that parses back to the same `f64`, in exponent
/// form for very small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A header plus rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{}", provenance.comment_line())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `<stem>.csv` (and any extra tables as `<stem>.<name>.csv`) plus `<stem>.meta.json`.
pub fn write_outputs(
    dir: &Path,
    stem: &str,
    config: &ExperimentConfig,
    main: &Table,
    extra: &[(&str, &Table)],
    summary: Value,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let provenance = Provenance::of(config);
    let mut written = Vec::new();
    let path = dir.join(format!("{stem}.csv"));
    main.write(&path, &provenance)?;
    written.push(path);
    for (name, table) in extra {
        let path = dir.join(format!("{stem}.{name}.csv"));
        table.write(&path, &provenance)?;
        written.push(path);
    }
    // the output directory is left out so that reruns elsewhere stay identical
    let mut recorded = config.clone();
    recorded.out = PathBuf::new();
    let config_json = serde_json::to_value(&recorded).map_err(|e| crate::LabError::Io(e.to_string()))?;
    let meta = json!({
        "command": stem,
        "config_hash": provenance.config_hash,
        "seed": provenance.seed,
        "version": provenance.version,
        "libraries": {
            "skwave": skwave::VERSION,
            "skwave-lab": env!("CARGO_PKG_VERSION"),
        },
        "config": config_json,
        "summary": summary,
    });
    let path = dir.join(format!("{stem}.meta.json"));
    let text = serde_json::to_string_pretty(&meta).map_err(|e| crate::LabError::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    written.push(path);
    Ok(written)
}

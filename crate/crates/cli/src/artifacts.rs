//! Artifact plumbing: tables, field dumps, and the run manifest.
//!
//! Tables are written whole from already-aggregated rows (workers never
//! touch the files), with `\n` line endings and every floating-point
//! value printed with 17 significant digits so a rerun of the same plan
//! is byte-identical and parsing the table back recovers the exact
//! doubles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::plan::ExperimentPlan;

/// 17 significant digits: enough to round-trip any f64.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Exponents may be infinite; label those `inf`, round-trip the rest.
pub fn fmt_exponent(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        sig17(x)
    }
}

/// Write a CSV table: header line, then one line per row.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Write a pretty-printed JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serialize {}", path.display()))?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

/// Collects the artifact file names a command produced, for the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    names: Vec<String>,
}

impl Outputs {
    pub fn add(&mut self, path: &Path) {
        if let Some(name) = path.file_name() {
            self.names.push(name.to_string_lossy().into_owned());
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    started_unix: u64,
    wall_seconds: f64,
    params: &'a ExperimentPlan,
    outputs: &'a [String],
}

/// Every artifact directory carries a manifest sufficient to re-run the
/// plan: the full resolved parameter set, plus provenance (version, start
/// time, wall time) and the artifact list.
pub fn write_manifest(
    plan: &ExperimentPlan,
    started: SystemTime,
    wall_seconds: f64,
    outputs: &Outputs,
) -> Result<PathBuf> {
    let path = plan.output_dir.join("manifest.json");
    let manifest = Manifest {
        command: &plan.command,
        version: env!("CARGO_PKG_VERSION"),
        started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        wall_seconds,
        params: plan,
        outputs: outputs.names(),
    };
    write_json(&path, &manifest)?;
    Ok(path)
}

//! Executes experiments into content-addressed output directories
//! `<out>/<kind>/<config hash>/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiments::{execute, Outcome};
use crate::io::{write_bytes, write_field, write_json};
use crate::plot::render;

/// Environment variable that forces single-threaded execution so every
/// reduction runs in a fixed order.
pub const DETERMINISTIC_ENV: &str = "MA_DETERMINISTIC";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_root: PathBuf,
    pub threads: usize,
    pub deterministic: bool,
}

impl RunOptions {
    /// Reads the deterministic switch from the environment.
    pub fn new(out_root: impl Into<PathBuf>, threads: usize) -> Self {
        let deterministic = std::env::var(DETERMINISTIC_ENV).is_ok_and(|v| v == "1");
        RunOptions {
            out_root: out_root.into(),
            threads: threads.max(1),
            deterministic,
        }
    }

    fn effective_threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.threads
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub tool_version: String,
    pub kind: String,
    pub seed: u64,
    pub ladder: Vec<usize>,
    pub deterministic: bool,
    pub threads: usize,
    /// Seconds per stage, plus `total`.
    pub wall_times: BTreeMap<String, f64>,
    /// Every file in the output directory, `record.json` included.
    pub artifacts: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl RunRecord {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }
}

fn output_dir(config: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_root.join(config.kind.name()).join(config.hash())
}

fn prepare(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn persist(dir: &Path, config: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<String>> {
    let mut artifacts = Vec::new();
    let mut add = |name: String| artifacts.push(name);
    write_json(&dir.join("config.json"), config)?;
    add("config.json".into());
    for (stem, table, plot) in &outcome.tables {
        let csv = format!("{stem}.csv");
        table.write(&dir.join(&csv))?;
        add(csv);
        if let Some(kind) = plot {
            let svg = format!("{stem}.svg");
            write_bytes(&dir.join(&svg), render(table, *kind)?.as_bytes())?;
            add(svg);
        }
    }
    for (stem, field) in &outcome.fields {
        let name = format!("{stem}.field");
        write_field(&dir.join(&name), field)?;
        add(name);
    }
    add("record.json".into());
    artifacts.sort();
    Ok(artifacts)
}

pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let dir = output_dir(config, opts);
    log::info!(
        "{} run {} -> {}",
        config.kind.name(),
        config.hash(),
        dir.display()
    );
    let clock = Instant::now();
    let threads = opts.effective_threads();
    let mut outcome = execute(config, threads)?;
    outcome
        .wall_times
        .insert("total".into(), clock.elapsed().as_secs_f64());
    prepare(&dir)?;
    let artifacts = persist(&dir, config, &outcome)?;
    let record = RunRecord {
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        kind: config.kind.name().into(),
        seed: config.seed,
        ladder: config.ladder.clone(),
        deterministic: opts.deterministic,
        threads,
        wall_times: outcome.wall_times,
        artifacts,
        summary: outcome.summary,
        dir: dir.clone(),
    };
    write_json(&dir.join("record.json"), &record)?;
    Ok(record)
}

/// True when two records carry bitwise identical summary metrics.
pub fn same_summary(a: &RunRecord, b: &RunRecord) -> bool {
    a.summary.len() == b.summary.len()
        && a.summary
            .iter()
            .zip(&b.summary)
            .all(|((ka, va), (kb, vb))| ka == kb && va.to_bits() == vb.to_bits())
}

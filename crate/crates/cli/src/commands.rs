//! Subcommand implementations. Each returns whether the result is partial.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use demand_frontier::data::{read_readings, write_panel_csv};
use demand_frontier::portfolio::{build_frontier, read_frontier_csv, ApproachSummary, CellFailure};
use demand_frontier::score::EvaluationReport;
use demand_frontier::study::{aggregation_study, read_aggregation_csv, write_aggregation_csv};
use serde::Serialize;

use crate::config::{DataSource, RunConfig};

pub const PANEL_FILE: &str = "panel.csv";
pub const FRONTIER_CSV: &str = "frontier.csv";
pub const FRONTIER_JSON: &str = "frontier.json";
pub const REPORT_CSV: &str = "report.csv";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";
pub const AGGSTUDY_CSV: &str = "aggstudy.csv";
pub const CONFIG_JSON: &str = "config.json";

/// How a command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some cells failed; their coordinates are in the diagnostics.
    Partial,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<Outcome> {
    let DataSource::Synthetic(s) = &cfg.data else {
        bail!("synth needs a synthetic data source");
    };
    s.validate()?;
    let raw = cfg.raw_panel()?;
    let mut w = create(&cfg.output_dir, PANEL_FILE)?;
    write_panel_csv(&raw, &mut w)?;
    w.flush()?;
    log::info!(
        "wrote {} readings to {}",
        raw.len() * raw.n_households(),
        cfg.output_dir.join(PANEL_FILE).display()
    );
    Ok(Outcome::Complete)
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    summary: Vec<ApproachSummary>,
    thresholds: &'a std::collections::BTreeMap<usize, f64>,
    threshold_table: &'a [(usize, f64, f64)],
    ss_weights: &'a std::collections::BTreeMap<usize, f64>,
    ss_table: &'a [(usize, f64, f64)],
    windows: usize,
    failures: &'a [CellFailure],
    skipped: &'a [CellFailure],
    point_fallbacks: &'a [demand_frontier::portfolio::PointFallback],
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let panel = cfg.panel()?;
    let frontier = build_frontier(&panel, &cfg.frontier)?;
    let dir = &cfg.output_dir;
    let leads = &cfg.frontier.lead_times;

    let mut w = create(dir, FRONTIER_CSV)?;
    frontier.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(dir, FRONTIER_JSON)?;
    frontier.write_json(&mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut w = create(dir, REPORT_CSV)?;
    frontier.report(leads).write_csv(&mut w)?;
    w.flush()?;
    let summary = frontier.summary(leads);
    for s in &summary {
        log::info!(
            "{:>10} lead {:>3} h: CRPS {:.4} kW, MAE {:.4} kW over {} partitions{}",
            s.approach.name(),
            s.lead_time,
            s.mean_crps,
            s.mean_mae,
            s.partitions,
            s.crps_improvement_vs_random
                .map(|i| format!(", {:.1}% below random", 100.0 * i))
                .unwrap_or_default()
        );
    }
    write_json(
        dir,
        DIAGNOSTICS_JSON,
        &Diagnostics {
            summary,
            thresholds: &frontier.thresholds.thresholds,
            threshold_table: &frontier.threshold_table,
            ss_weights: &frontier.ss.weights,
            ss_table: &frontier.ss_table,
            windows: frontier.windows,
            failures: &frontier.failures,
            skipped: &frontier.skipped,
            point_fallbacks: &frontier.point_fallbacks,
        },
    )?;
    write_json(dir, CONFIG_JSON, cfg)?;
    for f in &frontier.failures {
        log::error!(
            "cell failed: approach {} lead {} h partition {}: {}",
            f.approach,
            f.lead_time,
            f.partition,
            f.message
        );
    }
    Ok(if frontier.failures.is_empty() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}

pub fn aggstudy(cfg: &RunConfig) -> Result<Outcome> {
    cfg.aggstudy.validate()?;
    let panel = cfg.panel()?;
    let rows = aggregation_study(&panel, &cfg.aggstudy)?;
    for r in &rows {
        log::info!(
            "group size {:>4} lead {:>3} h: CRPS {:.4} kW, MAE {:.4} kW",
            r.group_size,
            r.lead_time_h,
            r.crps_kw,
            r.mae_kw
        );
    }
    let mut w = create(&cfg.output_dir, AGGSTUDY_CSV)?;
    write_aggregation_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(Outcome::Complete)
}

pub fn validate_config(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    println!("config ok (schema_version {})", cfg.schema_version);
    Ok(Outcome::Complete)
}

/// Parses every known output file present in `dir` against its schema.
pub fn check_outputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut checked = Vec::new();
    let open = |name: &str| -> Result<Option<(PathBuf, File)>> {
        let path = dir.join(name);
        if !path.exists() {
            return Ok(None);
        }
        let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Some((path, f)))
    };
    if let Some((p, f)) = open(FRONTIER_CSV)? {
        let rows = read_frontier_csv(f).with_context(|| p.display().to_string())?;
        log::info!("{}: {} rows", p.display(), rows.len());
        checked.push(p);
    }
    if let Some((p, f)) = open(REPORT_CSV)? {
        let r = EvaluationReport::read_csv(f).with_context(|| p.display().to_string())?;
        log::info!("{}: {} cells", p.display(), r.cells.len());
        checked.push(p);
    }
    if let Some((p, f)) = open(AGGSTUDY_CSV)? {
        let rows = read_aggregation_csv(f).with_context(|| p.display().to_string())?;
        log::info!("{}: {} rows", p.display(), rows.len());
        checked.push(p);
    }
    if let Some((p, f)) = open(PANEL_FILE)? {
        let readings =
            read_readings(std::io::BufReader::new(f)).with_context(|| p.display().to_string())?;
        log::info!("{}: {} readings", p.display(), readings.len());
        checked.push(p);
    }
    for name in [FRONTIER_JSON, DIAGNOSTICS_JSON] {
        if let Some((p, f)) = open(name)? {
            let _: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(f))
                .with_context(|| p.display().to_string())?;
            checked.push(p);
        }
    }
    if let Some((p, _)) = open(CONFIG_JSON)? {
        RunConfig::load(&p)?;
        checked.push(p);
    }
    if checked.is_empty() {
        bail!("no known output files in {}", dir.display());
    }
    Ok(checked)
}

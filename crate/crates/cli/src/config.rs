//! The run configuration: one JSON document with a schema version.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use demand_frontier::data::{
    impute_missing, ingest, read_readings, synthesize_population, Resolution,
    SyntheticPopulationConfig,
};
use demand_frontier::portfolio::FrontierConfig;
use demand_frontier::study::AggregationStudyConfig;
use demand_frontier::{Panel, RawPanel};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticPopulationConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        resolution: Resolution,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticPopulationConfig::default())
    }
}

/// Everything a command needs. The top-level `seed` replaces the seeds of
/// the nested sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub frontier: FrontierConfig,
    #[serde(default)]
    pub aggstudy: AggregationStudyConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    42
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data: DataSource::default(),
            frontier: FrontierConfig::default(),
            aggstudy: AggregationStudyConfig::default(),
            output_dir: default_output_dir(),
            seed: default_seed(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    /// Applies command-line overrides and pushes the seed into every section.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        if let DataSource::Synthetic(s) = &mut self.data {
            s.seed = self.seed;
        }
        self.frontier.seed = self.seed;
        self.aggstudy.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        match &self.data {
            DataSource::Synthetic(s) => {
                s.validate().context("data.synthetic")?;
                if s.n_hours < self.frontier.required_hours() {
                    bail!(
                        "data.synthetic.n_hours {} is shorter than the {} hours the frontier needs",
                        s.n_hours,
                        self.frontier.required_hours()
                    );
                }
            }
            DataSource::Csv { path, .. } => {
                ensure!(
                    path.is_file(),
                    "data.csv.path {} does not exist",
                    path.display()
                );
            }
        }
        self.frontier.validate().context("frontier")?;
        self.aggstudy.validate().context("aggstudy")?;
        Ok(())
    }

    pub fn raw_panel(&self) -> Result<RawPanel> {
        match &self.data {
            DataSource::Synthetic(s) => Ok(synthesize_population(s)?),
            DataSource::Csv { path, resolution } => {
                let file =
                    fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let readings = read_readings(std::io::BufReader::new(file))?;
                Ok(ingest(readings, *resolution)?)
            }
        }
    }

    pub fn panel(&self) -> Result<Panel> {
        let raw = self.raw_panel()?;
        log::info!(
            "panel: {} households x {} hours, {:.2}% missing",
            raw.n_households(),
            raw.len(),
            100.0 * raw.missing_fraction()
        );
        Ok(impute_missing(&raw)?)
    }
}

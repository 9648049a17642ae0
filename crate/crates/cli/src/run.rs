//! Shared run state: configuration file, master seed, output directory,
//! and the data-loading path every command uses.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::Duration;
use demandcast_core::config::KeyValueFile;
use demandcast_core::experiments::{prepare_series, ExperimentPlan, SeriesBundle};
use demandcast_core::ingest::{load_holiday_csv, load_metadata_csv, load_sales_csv};
use demandcast_core::nn::ModelConfig;
use demandcast_core::seed::{derive_seed, stable_hash};
use demandcast_core::StoreCalendar;

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 42;

pub struct RunContext {
    pub kv: KeyValueFile,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn new(config: Option<&Path>, seed_flag: Option<u64>, out: &Path) -> Result<Self> {
        let kv = match config {
            Some(path) => {
                if !path.exists() {
                    return Err(UsageError(format!(
                        "config file `{}` does not exist",
                        path.display()
                    ))
                    .into());
                }
                KeyValueFile::load(path).context("loading config file")?
            }
            None => KeyValueFile::default(),
        };
        let master_seed = match seed_flag {
            Some(s) => s,
            None => kv.get_or("seed", DEFAULT_SEED)?,
        };
        Ok(RunContext {
            kv,
            master_seed,
            out_dir: out.to_path_buf(),
        })
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))?;
        Ok(())
    }

    fn data_path(&self, key: &str) -> Result<PathBuf> {
        let raw = self
            .kv
            .get(key)
            .ok_or_else(|| UsageError(format!("config key `{key}` is required")))?;
        let path = PathBuf::from(raw);
        if !path.exists() {
            return Err(UsageError(format!("`{key}` file `{raw}` does not exist")).into());
        }
        Ok(path)
    }

    /// Load sales, holidays and metadata; derive features and splits.
    pub fn load_series(&self) -> Result<Vec<SeriesBundle>> {
        let sales = load_sales_csv(self.data_path("sales")?)?;
        let holidays = load_holiday_csv(self.data_path("holidays")?)?;
        let meta = match self.kv.get("metadata") {
            Some(_) => load_metadata_csv(self.data_path("metadata")?)?,
            None => Default::default(),
        };
        let (start, end) = sales
            .date_range()
            .ok_or_else(|| UsageError("sales file contains no records".into()))?;
        // Cover the further-future lookups past the last observed day.
        let cal = StoreCalendar::new(start, end + Duration::days(14), holidays)?;
        let series = prepare_series(&sales, &cal, &meta)?;
        Ok(series)
    }

    /// Experiment plan from the config file, seeded by the master seed.
    pub fn plan(&self) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::from_kv(&self.kv)?;
        plan.seed = self.master_seed;
        Ok(plan)
    }

    /// Series filtered down to the plan's product list (empty = all).
    pub fn select_series<'a>(
        &self,
        series: &'a [SeriesBundle],
        plan: &ExperimentPlan,
    ) -> Result<Vec<&'a SeriesBundle>> {
        let selected: Vec<&SeriesBundle> = if plan.products.is_empty() {
            series.iter().collect()
        } else {
            series
                .iter()
                .filter(|s| plan.products.contains(s.product()))
                .collect()
        };
        if selected.is_empty() {
            return Err(UsageError("no series match the product selection".into()).into());
        }
        Ok(selected)
    }

    /// Model configuration: the fixed reference architecture overridden by
    /// config-file keys, validated against the tuning grid.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::reference(self.master_seed);
        cfg.lstm_units = self.kv.get_or("lstm_units", cfg.lstm_units)?;
        let dense = self.kv.get_list("dense_units");
        if !dense.is_empty() {
            cfg.dense_units = dense
                .iter()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| UsageError(format!("bad dense_units entry `{s}`")))
                })
                .collect::<std::result::Result<_, _>>()?;
        }
        let dropout = self.kv.get_list("dropout");
        cfg.dropout_enabled = if dropout.is_empty() {
            vec![false; cfg.dense_units.len()]
        } else {
            dropout
                .iter()
                .map(|s| match s.as_str() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(UsageError(format!("dropout entries must be 0 or 1, got `{other}`"))),
                })
                .collect::<std::result::Result<_, _>>()?
        };
        cfg.dropout_rate = self.kv.get_or("dropout_rate", cfg.dropout_rate)?;
        cfg.learning_rate = self.kv.get_or("learning_rate", cfg.learning_rate)?;
        cfg.validate_on_grid()?;
        Ok(cfg)
    }

    /// Stable per-series seed, independent of list order and filtering.
    pub fn series_seed(&self, series: &SeriesBundle) -> u64 {
        let key = format!("{}@{}", series.product(), series.warehouse());
        derive_seed(self.master_seed, stable_hash(key.as_bytes()))
    }
}

/// File-name-safe label of one series.
pub fn series_slug(series: &SeriesBundle) -> String {
    format!("{}_{}", series.product(), series.warehouse())
}

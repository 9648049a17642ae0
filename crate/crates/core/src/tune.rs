//! Random-search hyperparameter optimization over the product-level grid.
//!
//! Grid per dimension: LSTM units 10..100 step 10; 1..3 dense layers of
//! 10..100 step 10 units each; dropout on/off per layer with rate 0.1..0.9
//! step 0.1; learning rate one of 1e-2, 1e-3, 1e-4 (the decade grid).
//! Everything else is fixed at the assortment level.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::lookahead_errors;
use crate::nn::{train, ModelConfig, BATCH_SIZE, MAX_EPOCHS, PATIENCE};
use crate::pipeline::{MinMaxScaler, WindowedSample, HORIZON, INPUT_WINDOW};
use crate::seed::{derive_seed, rng_from_seed};

/// The sampled dimensions. Defaults reproduce the product-level grid.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub lstm_units: Vec<usize>,
    pub n_dense_layers: Vec<usize>,
    pub dense_units: Vec<usize>,
    pub dropout_rates: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lstm_units: (1..=10).map(|k| k * 10).collect(),
            n_dense_layers: vec![1, 2, 3],
            dense_units: (1..=10).map(|k| k * 10).collect(),
            dropout_rates: (1..=9).map(|k| k as f64 / 10.0).collect(),
            learning_rates: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

/// Default number of trials per product.
pub const DEFAULT_N_TRIALS: usize = 20;

/// Draw one configuration uniformly and independently per dimension.
/// Layer count, per-layer width and per-layer dropout inclusion are all
/// sampled; fixed fields take the assortment-level constants. The caller
/// assigns `rng_seed`.
pub fn sample_trial<R: Rng>(space: &SearchSpace, rng: &mut R) -> ModelConfig {
    let pick = |rng: &mut R, xs: &[usize]| xs[rng.gen_range(0..xs.len())];
    let lstm_units = pick(rng, &space.lstm_units);
    let n_layers = pick(rng, &space.n_dense_layers);
    let dense_units: Vec<usize> = (0..n_layers).map(|_| pick(rng, &space.dense_units)).collect();
    let dropout_enabled: Vec<bool> = (0..n_layers).map(|_| rng.gen_range(0..2) == 1).collect();
    let dropout_rate = space.dropout_rates[rng.gen_range(0..space.dropout_rates.len())];
    let learning_rate = space.learning_rates[rng.gen_range(0..space.learning_rates.len())];
    ModelConfig {
        lstm_units,
        dense_units,
        dropout_enabled,
        dropout_rate,
        learning_rate,
        batch_size: BATCH_SIZE,
        max_epochs: MAX_EPOCHS,
        patience: PATIENCE,
        input_window: INPUT_WINDOW,
        horizon: HORIZON,
        rng_seed: 0,
    }
}

/// One search trial and its validation score.
#[derive(Debug, Clone)]
pub struct Trial {
    pub trial_id: usize,
    pub seed: u64,
    pub config: ModelConfig,
    /// Validation mean mMAPE on inverse-scaled forecasts; NaN if diverged.
    pub validation_score: f64,
    pub best_epoch: usize,
    pub rank: Option<usize>,
}

/// Search results: ranked trials (ascending score) and diverged ones.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub ranked: Vec<Trial>,
    pub diverged: Vec<Trial>,
}

impl SearchOutcome {
    pub fn best(&self) -> &Trial {
        &self.ranked[0]
    }

    /// All trials in trial-id order, for reporting.
    pub fn all_trials(&self) -> Vec<&Trial> {
        let mut out: Vec<&Trial> = self.ranked.iter().chain(self.diverged.iter()).collect();
        out.sort_by_key(|t| t.trial_id);
        out
    }
}

/// Windowed data of one product plus the scaler needed to score forecasts
/// in original demand units.
pub struct TuneData<'a> {
    pub train: &'a [WindowedSample],
    pub validation: &'a [WindowedSample],
    pub scaler: &'a MinMaxScaler,
}

/// Validation mean mMAPE of a trained network, in original units with
/// forecasts clamped at zero.
pub fn validation_mmape(
    params: &crate::nn::NetworkParams,
    validation: &[WindowedSample],
    scaler: &MinMaxScaler,
) -> Result<f64> {
    let mut forecasts = Vec::with_capacity(validation.len());
    let mut actuals = Vec::with_capacity(validation.len());
    for sample in validation {
        let scaled = params.predict(&sample.input)?;
        forecasts.push(
            scaled
                .iter()
                .map(|&v| scaler.inverse_demand(v).max(0.0))
                .collect::<Vec<f64>>(),
        );
        actuals.push(
            sample
                .target
                .iter()
                .map(|&v| scaler.inverse_demand(v))
                .collect::<Vec<f64>>(),
        );
    }
    Ok(lookahead_errors(&forecasts, &actuals)?.mean_mmape())
}

/// Run one trial to completion. Divergence is reported as a trial with a
/// NaN score, not an error.
pub fn run_trial(
    data: &TuneData<'_>,
    space: &SearchSpace,
    trial_id: usize,
    master_seed: u64,
) -> Result<Trial> {
    let trial_seed = derive_seed(master_seed, trial_id as u64);
    let mut sample_rng = rng_from_seed(derive_seed(trial_seed, 0));
    let mut config = sample_trial(space, &mut sample_rng);
    config.rng_seed = derive_seed(trial_seed, 1);
    match train(&config, data.train, data.validation) {
        Ok(fitted) => {
            let score = validation_mmape(&fitted.params, data.validation, data.scaler)?;
            Ok(Trial {
                trial_id,
                seed: config.rng_seed,
                config,
                validation_score: score,
                best_epoch: fitted.best_epoch,
                rank: None,
            })
        }
        Err(Error::TrainingDiverged { .. }) => Ok(Trial {
            trial_id,
            seed: config.rng_seed,
            config,
            validation_score: f64::NAN,
            best_epoch: 0,
            rank: None,
        }),
        Err(e) => Err(e),
    }
}

/// Random search: trials run independently (in parallel) with seeds
/// derived from `(master_seed, trial index)`, then ranked by ascending
/// validation score. Ties resolve by trial id.
pub fn random_search(
    data: &TuneData<'_>,
    space: &SearchSpace,
    n_trials: usize,
    master_seed: u64,
) -> Result<SearchOutcome> {
    if n_trials == 0 {
        return Err(Error::config("n_trials must be at least 1"));
    }
    let trials: Vec<Trial> = (0..n_trials)
        .into_par_iter()
        .map(|i| run_trial(data, space, i, master_seed))
        .collect::<Result<_>>()?;

    let (mut ranked, diverged): (Vec<Trial>, Vec<Trial>) = trials
        .into_iter()
        .partition(|t| t.validation_score.is_finite());
    if ranked.is_empty() {
        return Err(Error::SearchFailed { n_trials });
    }
    ranked.sort_by(|a, b| {
        a.validation_score
            .partial_cmp(&b.validation_score)
            .expect("finite scores")
            .then(a.trial_id.cmp(&b.trial_id))
    });
    for (i, t) in ranked.iter_mut().enumerate() {
        t.rank = Some(i + 1);
    }
    Ok(SearchOutcome { ranked, diverged })
}

/// Tuning results CSV:
/// `trial_id,seed,lstm_units,n_dense_layers,dense_units,dropout_flags,dropout_rate,learning_rate,val_mmape,best_epoch`.
/// List-valued columns are `|`-joined.
pub fn write_tuning_csv(
    path: impl AsRef<Path>,
    master_seed: u64,
    outcome: &SearchOutcome,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("# master_seed={master_seed}\n");
    out.push_str(
        "trial_id,seed,lstm_units,n_dense_layers,dense_units,dropout_flags,dropout_rate,learning_rate,val_mmape,best_epoch\n",
    );
    for trial in outcome.all_trials() {
        let units = trial
            .config
            .dense_units
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("|");
        let flags = trial
            .config
            .dropout_enabled
            .iter()
            .map(|&e| if e { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join("|");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            trial.trial_id,
            trial.seed,
            trial.config.lstm_units,
            trial.config.n_dense_layers(),
            units,
            flags,
            trial.config.dropout_rate,
            trial.config.learning_rate,
            trial.validation_score,
            trial.best_epoch,
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

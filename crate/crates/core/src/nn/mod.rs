//! From-scratch neural engine: vanilla LSTM, dense head, inverted dropout,
//! MSE loss, BPTT gradients, Adam, and the early-stopping training loop.

pub mod adam;
pub mod dense;
pub mod lstm;
pub mod network;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calendar::{ProductId, WarehouseId};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::pipeline::{MinMaxScaler, HORIZON, INPUT_WINDOW};

pub use adam::{adam_step, AdamState};
pub use dense::{dropout_apply, Activation, DenseParams};
pub use lstm::{lstm_forward, LstmParams};
pub use network::{backward_batch, mse_loss, BatchItem, DropoutPlan, NetworkParams};
pub use train::{train, train_from_params, train_with_val_override, EpochStats, FittedNetwork};

/// Fixed assortment-level hyperparameters.
pub const BATCH_SIZE: usize = 32;
pub const MAX_EPOCHS: usize = 70;
pub const PATIENCE: usize = 5;

/// Hyperparameters of one model.
///
/// The tuned fields (`lstm_units`, `dense_units`, `dropout_enabled`,
/// `dropout_rate`, `learning_rate`) live on the random-search grid; the
/// rest are assortment-level constants. [`ModelConfig::validate`] checks
/// structure only; grid membership is enforced where configs enter from
/// the outside (tuning and the CLI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lstm_units: usize,
    /// Width of each hidden dense layer.
    pub dense_units: Vec<usize>,
    /// Whether a dropout layer follows the corresponding dense layer.
    pub dropout_enabled: Vec<bool>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub input_window: usize,
    pub horizon: usize,
    pub rng_seed: u64,
}

impl ModelConfig {
    /// The fixed reference configuration: 50 LSTM units, one dense layer
    /// of 50, learning rate 1e-3, no dropout.
    pub fn reference(rng_seed: u64) -> Self {
        ModelConfig {
            lstm_units: 50,
            dense_units: vec![50],
            dropout_enabled: vec![false],
            dropout_rate: 0.0,
            learning_rate: 1e-3,
            batch_size: BATCH_SIZE,
            max_epochs: MAX_EPOCHS,
            patience: PATIENCE,
            input_window: INPUT_WINDOW,
            horizon: HORIZON,
            rng_seed,
        }
    }

    pub fn n_dense_layers(&self) -> usize {
        self.dense_units.len()
    }

    /// Structural validity: matching layer lists, sane rates and sizes.
    pub fn validate(&self) -> Result<()> {
        if self.dense_units.len() != self.dropout_enabled.len() {
            return Err(Error::config(format!(
                "dense_units has {} layers but dropout_enabled has {}",
                self.dense_units.len(),
                self.dropout_enabled.len()
            )));
        }
        if self.dense_units.iter().any(|&u| u == 0) {
            return Err(Error::config("dense layer width must be positive"));
        }
        if self.lstm_units == 0 {
            return Err(Error::config("lstm_units must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::config(
                "batch_size, max_epochs and patience must be positive",
            ));
        }
        if self.input_window == 0 || self.horizon == 0 {
            return Err(Error::config("input_window and horizon must be positive"));
        }
        Ok(())
    }

    /// Grid membership per the tuning search space, plus the fixed
    /// assortment-level values.
    pub fn validate_on_grid(&self) -> Result<()> {
        self.validate()?;
        let on_units_grid = |u: usize| u >= 10 && u <= 100 && u % 10 == 0;
        if !on_units_grid(self.lstm_units) {
            return Err(Error::config(format!(
                "lstm_units {} is off the 10..100 step-10 grid",
                self.lstm_units
            )));
        }
        if !(1..=3).contains(&self.dense_units.len()) {
            return Err(Error::config(format!(
                "{} dense layers; the grid allows 1..3",
                self.dense_units.len()
            )));
        }
        for &u in &self.dense_units {
            if !on_units_grid(u) {
                return Err(Error::config(format!(
                    "dense width {u} is off the 10..100 step-10 grid"
                )));
            }
        }
        if self.dropout_enabled.iter().any(|&e| e) {
            let scaled = (self.dropout_rate * 10.0).round();
            if (self.dropout_rate * 10.0 - scaled).abs() > 1e-9
                || !(1.0..=9.0).contains(&scaled)
            {
                return Err(Error::config(format!(
                    "dropout rate {} is off the 0.1..0.9 step-0.1 grid",
                    self.dropout_rate
                )));
            }
        }
        let lr_ok = [1e-2, 1e-3, 1e-4]
            .iter()
            .any(|&lr| (self.learning_rate - lr).abs() < 1e-12);
        if !lr_ok {
            return Err(Error::config(format!(
                "learning rate {} is not one of 1e-2, 1e-3, 1e-4",
                self.learning_rate
            )));
        }
        if self.batch_size != BATCH_SIZE
            || self.max_epochs != MAX_EPOCHS
            || self.patience != PATIENCE
            || self.input_window != INPUT_WINDOW
            || self.horizon != HORIZON
        {
            return Err(Error::config(
                "batch size, epochs, patience, window and horizon are fixed assortment-level values",
            ));
        }
        Ok(())
    }
}

/// A fitted model with everything needed to forecast: configuration,
/// parameters at the best epoch, per-series scaler state and the feature
/// schema. Serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub master_seed: u64,
    pub config: ModelConfig,
    pub feature_columns: Vec<String>,
    /// One key per forecast series; parallel multi-product models carry
    /// several, plain models exactly one.
    pub series_keys: Vec<(ProductId, WarehouseId)>,
    /// Scaler per series, aligned with `series_keys`.
    pub scalers: Vec<MinMaxScaler>,
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

impl TrainedModel {
    pub fn n_series(&self) -> usize {
        self.series_keys.len()
    }

    /// Scaled multi-step forecast for one scaled input window.
    pub fn predict(&self, x_seq: &[Vec<f64>]) -> Result<Vec<f64>> {
        if x_seq.len() != self.config.input_window {
            return Err(Error::LengthMismatch {
                left: x_seq.len(),
                right: self.config.input_window,
                context: "forecast input window",
            });
        }
        self.params.predict(x_seq)
    }

    /// Forecast in original demand units for each series, clamped to >= 0.
    ///
    /// `matrices` are the full-feature matrices of the model's series, in
    /// `series_keys` order; `end_row` indexes the forecast-origin row.
    pub fn forecast_units(
        &self,
        matrices: &[&FeatureMatrix],
        end_row: usize,
    ) -> Result<Vec<Vec<f64>>> {
        if matrices.len() != self.n_series() {
            return Err(Error::LengthMismatch {
                left: matrices.len(),
                right: self.n_series(),
                context: "series count",
            });
        }
        let w = self.config.input_window;
        if end_row + 1 < w {
            return Err(Error::config(format!(
                "origin row {end_row} leaves fewer than {w} input rows"
            )));
        }
        let start = end_row + 1 - w;
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); w];
        for (scaler, matrix) in self.scalers.iter().zip(matrices) {
            let selected = matrix.select_columns(&self.feature_columns)?;
            if end_row >= selected.n_rows() {
                return Err(Error::config(format!(
                    "origin row {end_row} beyond series length {}",
                    selected.n_rows()
                )));
            }
            for (t, row) in rows.iter_mut().enumerate() {
                row.extend(scaler.transform_row(&selected.values[start + t])?);
            }
        }
        let scaled = self.predict(&rows)?;
        let h = self.config.horizon;
        let mut out = Vec::with_capacity(self.n_series());
        for (s, scaler) in self.scalers.iter().enumerate() {
            let series_fc = scaled[s * h..(s + 1) * h]
                .iter()
                .map(|&v| scaler.inverse_demand(v).max(0.0))
                .collect();
            out.push(series_fc);
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::ModelFormat {
                message: e.to_string(),
            })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: TrainedModel = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::ModelFormat {
                message: format!("{}: {e}", path.display()),
            })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat {
                message: format!(
                    "unsupported model format version {} (expected {})",
                    model.format_version, MODEL_FORMAT_VERSION
                ),
            });
        }
        Ok(model)
    }
}

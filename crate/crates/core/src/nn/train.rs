//! Mini-batch Adam training with early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::network::{backward_batch, mse_loss, BatchItem, DropoutPlan, NetworkParams};
use crate::nn::ModelConfig;
use crate::pipeline::WindowedSample;
use crate::seed::{derive_seed, rng_from_seed};

/// Per-epoch loss record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Result of a training run: best-epoch parameters and the loss history.
#[derive(Debug, Clone)]
pub struct FittedNetwork {
    pub params: NetworkParams,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

/// Train on `train_samples`, validating after each epoch; stops when the
/// validation loss has not improved for `patience` consecutive epochs or
/// at `max_epochs`, and returns the parameters of the best epoch.
///
/// Batches are shuffled per epoch by an RNG derived from
/// `(config.rng_seed, epoch)`, so a run is bitwise reproducible and any
/// epoch prefix matches a shorter run with the same seed.
pub fn train(
    config: &ModelConfig,
    train_samples: &[WindowedSample],
    val_samples: &[WindowedSample],
) -> Result<FittedNetwork> {
    train_with_val_override(config, train_samples, val_samples, None)
}

/// Training entry point with an injectable validation score, used by tests
/// to drive the early-stopping rule with a prescribed loss sequence. The
/// override receives `(epoch, computed validation MSE)` and returns the
/// value the stopping rule should see.
pub fn train_with_val_override(
    config: &ModelConfig,
    train_samples: &[WindowedSample],
    val_samples: &[WindowedSample],
    val_override: Option<&mut dyn FnMut(usize, f64) -> f64>,
) -> Result<FittedNetwork> {
    train_engine(config, None, train_samples, val_samples, val_override)
}

/// Fine-tuning: continue from existing parameters with a fresh optimizer
/// state, same batching and stopping rules.
pub fn train_from_params(
    config: &ModelConfig,
    initial: NetworkParams,
    train_samples: &[WindowedSample],
    val_samples: &[WindowedSample],
) -> Result<FittedNetwork> {
    train_engine(config, Some(initial), train_samples, val_samples, None)
}

fn train_engine(
    config: &ModelConfig,
    initial: Option<NetworkParams>,
    train_samples: &[WindowedSample],
    val_samples: &[WindowedSample],
    mut val_override: Option<&mut dyn FnMut(usize, f64) -> f64>,
) -> Result<FittedNetwork> {
    config.validate()?;
    if train_samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "training samples",
        });
    }
    if val_samples.is_empty() {
        return Err(Error::EmptyInput {
            context: "validation samples",
        });
    }
    let input_dim = train_samples[0].input[0].len();
    let output_dim = train_samples[0].target.len();

    let mut init_rng = rng_from_seed(derive_seed(config.rng_seed, 0));
    let mut params = match initial {
        Some(p) => {
            if p.input_dim() != input_dim || p.output_dim() != output_dim {
                return Err(Error::Schema {
                    message: format!(
                        "initial parameters expect {}->{} but data is {}->{}",
                        p.input_dim(),
                        p.output_dim(),
                        input_dim,
                        output_dim
                    ),
                });
            }
            p
        }
        None => NetworkParams::init(
            input_dim,
            config.lstm_units,
            &config.dense_units,
            output_dim,
            &mut init_rng,
        ),
    };
    let dropout = DropoutPlan {
        enabled: config.dropout_enabled.clone(),
        rate: config.dropout_rate,
    };
    let mut adam = AdamState::new(params.n_params());
    let mut flat = params.flatten();

    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut epochs_since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut epoch_rng = rng_from_seed(derive_seed(config.rng_seed, epoch as u64));
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut epoch_rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|&i| BatchItem {
                    input: &train_samples[i].input,
                    target: &train_samples[i].target,
                })
                .collect();
            let (grads, batch_loss) =
                backward_batch(&params, &batch, &dropout, true, &mut epoch_rng)?;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            loss_sum += batch_loss * chunk.len() as f64;
            let gflat = grads.flatten();
            adam_step(&mut flat, &gflat, &mut adam, config.learning_rate);
            params.assign_flat(&flat);
        }
        let train_loss = loss_sum / train_samples.len() as f64;

        let mut val_sum = 0.0;
        for sample in val_samples {
            let pred = params.predict(&sample.input)?;
            val_sum += mse_loss(&pred, &sample.target)?;
        }
        let computed = val_sum / val_samples.len() as f64;
        if !computed.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        let val_loss = match val_override.as_mut() {
            Some(f) => f(epoch, computed),
            None => computed,
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });

        let improved = best.as_ref().map(|(b, _, _)| val_loss < *b).unwrap_or(true);
        if improved {
            best = Some((val_loss, flat.clone(), epoch));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    let (_, best_flat, best_epoch) = best.expect("at least one epoch ran");
    params.assign_flat(&best_flat);
    Ok(FittedNetwork {
        params,
        best_epoch,
        history,
    })
}

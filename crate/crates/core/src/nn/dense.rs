//! Fully connected layers and inverted dropout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

/// One dense layer, `out_dim x in_dim` row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseParams {
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        DenseParams {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Pre-activation `W x + b`.
    pub fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim)
            .map(|u| {
                let row = &self.weights[u * self.in_dim..(u + 1) * self.in_dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[u]
            })
            .collect()
    }

    pub fn activate(&self, z: &[f64]) -> Vec<f64> {
        match self.activation {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Linear => z.to_vec(),
        }
    }
}

/// Inverted dropout: in training mode each unit is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`, so inference is
/// exactly the identity.
pub fn dropout_apply<R: Rng>(
    activations: &[f64],
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (out, _) = dropout_with_mask(activations, rate, training, rng)?;
    Ok(out)
}

/// Dropout plus the multiplier mask the backward pass must reuse.
/// The mask entry is `1/(1-rate)` for survivors and `0` for dropped units;
/// `None` when no units were dropped (inference, or rate 0).
pub fn dropout_with_mask<R: Rng>(
    activations: &[f64],
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((activations.to_vec(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = activations
        .iter()
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
        .collect();
    let out = activations.iter().zip(&mask).map(|(a, m)| a * m).collect();
    Ok((out, Some(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_mode_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(dropout_apply(&x, 0.7, false, &mut rng).unwrap(), x);
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(dropout_apply(&x, 0.0, true, &mut rng).unwrap(), x);
    }

    #[test]
    fn rate_of_one_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(dropout_apply(&[1.0], 1.0, true, &mut rng).is_err());
        assert!(dropout_apply(&[1.0], -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        // Monte Carlo check: sample mean of a dropped unit activation
        // stays within 1% of its value at rate 0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000;
        let mut sum = 0.0;
        for _ in 0..trials {
            sum += dropout_apply(&[1.0], 0.5, true, &mut rng).unwrap()[0];
        }
        let mean = sum / trials as f64;
        assert!((mean - 1.0).abs() < 0.01, "sample mean {mean}");
    }

    #[test]
    fn relu_kills_negative_preactivations() {
        let layer = DenseParams {
            in_dim: 2,
            out_dim: 2,
            weights: vec![-1.0, -1.0, 1.0, 1.0],
            bias: vec![0.0, 0.0],
            activation: Activation::Relu,
        };
        let z = layer.preactivation(&[1.0, 2.0]);
        assert_eq!(layer.activate(&z), vec![0.0, 3.0]);
    }
}

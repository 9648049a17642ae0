//! Vanilla LSTM layer: forward recursion and backpropagation through time.
//!
//! Gate equations, per time step with zero initial states:
//!
//! ```text
//! i_t = sigmoid(W_i x_t + R_i h_{t-1} + b_i)
//! f_t = sigmoid(W_f x_t + R_f h_{t-1} + b_f)
//! g_t = tanh   (W_g x_t + R_g h_{t-1} + b_g)
//! o_t = sigmoid(W_o x_t + R_o h_{t-1} + b_o)
//! c_t = f_t * c_{t-1} + i_t * g_t
//! h_t = o_t * tanh(c_t)
//! ```
//!
//! No peephole connections: closed days are absent from the series, so the
//! cell must not count time steps on its own but rely on the calendar
//! features instead.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_GATES: usize = 4;
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_CANDIDATE: usize = 2;
pub const GATE_OUTPUT: usize = 3;

/// Weights of one LSTM layer. Each gate has input weights `w` (H x F,
/// row-major), recurrent weights `r` (H x H) and a bias (H).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w: [Vec<f64>; N_GATES],
    pub r: [Vec<f64>; N_GATES],
    pub b: [Vec<f64>; N_GATES],
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LstmParams {
    /// Glorot-uniform weights; forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let w_limit = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let r_limit = (6.0 / (2 * hidden_dim) as f64).sqrt();
        let sample = |rng: &mut R, n: usize, limit: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
        };
        let w = std::array::from_fn(|_| sample(rng, hidden_dim * input_dim, w_limit));
        let r = std::array::from_fn(|_| sample(rng, hidden_dim * hidden_dim, r_limit));
        let b = std::array::from_fn(|gate| {
            vec![if gate == GATE_FORGET { 1.0 } else { 0.0 }; hidden_dim]
        });
        LstmParams {
            input_dim,
            hidden_dim,
            w,
            r,
            b,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| vec![0.0; hidden_dim * input_dim]),
            r: std::array::from_fn(|_| vec![0.0; hidden_dim * hidden_dim]),
            b: std::array::from_fn(|_| vec![0.0; hidden_dim]),
        }
    }

    pub fn n_params(&self) -> usize {
        N_GATES * (self.hidden_dim * self.input_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }

    /// Pre-activation of one gate: `W_g x + R_g h + b_g`.
    fn gate_preact(&self, gate: usize, x: &[f64], h_prev: &[f64], out: &mut [f64]) {
        let hd = self.hidden_dim;
        let fd = self.input_dim;
        for u in 0..hd {
            let wx = dot(&self.w[gate][u * fd..(u + 1) * fd], x);
            let rh = dot(&self.r[gate][u * hd..(u + 1) * hd], h_prev);
            out[u] = wx + rh + self.b[gate][u];
        }
    }
}

/// Cached activations of one time step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
}

impl LstmStep {
    pub fn h(&self) -> Vec<f64> {
        self.o
            .iter()
            .zip(&self.tanh_c)
            .map(|(o, tc)| o * tc)
            .collect()
    }
}

/// Full forward trace over a sequence.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub steps: Vec<LstmStep>,
}

impl LstmTrace {
    pub fn final_h(&self) -> Vec<f64> {
        self.steps.last().map(|s| s.h()).unwrap_or_default()
    }

    pub fn final_c(&self) -> Vec<f64> {
        self.steps.last().map(|s| s.c.clone()).unwrap_or_default()
    }
}

/// Run the recursion and keep per-step activations.
pub fn forward_trace(params: &LstmParams, x_seq: &[Vec<f64>]) -> Result<LstmTrace> {
    let hd = params.hidden_dim;
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut steps = Vec::with_capacity(x_seq.len());
    let mut pre = vec![vec![0.0; hd]; N_GATES];
    for x in x_seq {
        if x.len() != params.input_dim {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: params.input_dim,
                context: "lstm input row",
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "lstm input",
            });
        }
        for (gate, buf) in pre.iter_mut().enumerate() {
            params.gate_preact(gate, x, &h, buf);
        }
        let i: Vec<f64> = pre[GATE_INPUT].iter().map(|&z| sigmoid(z)).collect();
        let f: Vec<f64> = pre[GATE_FORGET].iter().map(|&z| sigmoid(z)).collect();
        let g: Vec<f64> = pre[GATE_CANDIDATE].iter().map(|&z| z.tanh()).collect();
        let o: Vec<f64> = pre[GATE_OUTPUT].iter().map(|&z| sigmoid(z)).collect();
        let c_new: Vec<f64> = (0..hd).map(|u| f[u] * c[u] + i[u] * g[u]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|&v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..hd).map(|u| o[u] * tanh_c[u]).collect();
        steps.push(LstmStep {
            i,
            f,
            g,
            o,
            c: c_new.clone(),
            tanh_c,
            c_prev: c,
            h_prev: h,
        });
        h = h_new;
        c = c_new;
    }
    Ok(LstmTrace { steps })
}

/// Hidden-state sequence and final (hidden, cell) state.
pub fn lstm_forward(
    x_seq: &[Vec<f64>],
    params: &LstmParams,
) -> Result<(Vec<Vec<f64>>, (Vec<f64>, Vec<f64>))> {
    let trace = forward_trace(params, x_seq)?;
    let h_seq: Vec<Vec<f64>> = trace.steps.iter().map(|s| s.h()).collect();
    let final_state = (trace.final_h(), trace.final_c());
    Ok((h_seq, final_state))
}

/// BPTT over all time steps, accumulating parameter gradients into `grads`.
///
/// `dh_final` is the loss gradient w.r.t. the last hidden state; earlier
/// steps receive gradient only through the recurrence (the head reads
/// `h_T` alone).
pub fn backward_into(
    params: &LstmParams,
    x_seq: &[Vec<f64>],
    trace: &LstmTrace,
    dh_final: &[f64],
    grads: &mut LstmParams,
) {
    let hd = params.hidden_dim;
    let fd = params.input_dim;
    let mut dh_next = dh_final.to_vec();
    let mut dc_next = vec![0.0; hd];
    let mut d_pre = vec![vec![0.0; hd]; N_GATES];

    for (t, step) in trace.steps.iter().enumerate().rev() {
        let dh = &dh_next;
        let mut dc = vec![0.0; hd];
        for u in 0..hd {
            let d_tanh_c = dh[u] * step.o[u];
            dc[u] = d_tanh_c * (1.0 - step.tanh_c[u] * step.tanh_c[u]) + dc_next[u];
        }
        for u in 0..hd {
            d_pre[GATE_INPUT][u] = dc[u] * step.g[u] * step.i[u] * (1.0 - step.i[u]);
            d_pre[GATE_FORGET][u] = dc[u] * step.c_prev[u] * step.f[u] * (1.0 - step.f[u]);
            d_pre[GATE_CANDIDATE][u] = dc[u] * step.i[u] * (1.0 - step.g[u] * step.g[u]);
            d_pre[GATE_OUTPUT][u] = dh[u] * step.tanh_c[u] * step.o[u] * (1.0 - step.o[u]);
        }

        let x = &x_seq[t];
        for gate in 0..N_GATES {
            let dg = &d_pre[gate];
            let gw = &mut grads.w[gate];
            let gr = &mut grads.r[gate];
            for u in 0..hd {
                let d = dg[u];
                if d == 0.0 {
                    continue;
                }
                let wrow = &mut gw[u * fd..(u + 1) * fd];
                for (wv, xv) in wrow.iter_mut().zip(x) {
                    *wv += d * xv;
                }
                let rrow = &mut gr[u * hd..(u + 1) * hd];
                for (rv, hv) in rrow.iter_mut().zip(&step.h_prev) {
                    *rv += d * hv;
                }
                grads.b[gate][u] += d;
            }
        }

        // dh_{t-1} = sum over gates of R_g^T d_pre_g; dc_{t-1} = dc * f_t.
        let mut dh_prev = vec![0.0; hd];
        for gate in 0..N_GATES {
            let dg = &d_pre[gate];
            let r = &params.r[gate];
            for u in 0..hd {
                let d = dg[u];
                if d == 0.0 {
                    continue;
                }
                let rrow = &r[u * hd..(u + 1) * hd];
                for (k, dst) in dh_prev.iter_mut().enumerate() {
                    *dst += rrow[k] * d;
                }
            }
        }
        for u in 0..hd {
            dc_next[u] = dc[u] * step.f[u];
        }
        dh_next = dh_prev;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn all_zero_params_give_zero_hidden_states() {
        // tanh(0) = 0 forces c_t = 0 and hence h_t = 0 despite sigma(0) = 0.5.
        let params = LstmParams::zeros(2, 3);
        let (h_seq, (h, c)) =
            lstm_forward(&seq(&[&[1.0, -1.0], &[0.5, 2.0]]), &params).unwrap();
        for step in &h_seq {
            assert!(step.iter().all(|&v| v == 0.0));
        }
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_hand_evaluation() {
        // H = 1, F = 1, weights zero; open input/output gates via large
        // biases, candidate bias set so tanh(b_g) = 0.5.
        let mut params = LstmParams::zeros(1, 1);
        params.b[GATE_INPUT][0] = 30.0;
        params.b[GATE_OUTPUT][0] = 30.0;
        params.b[GATE_CANDIDATE][0] = 0.5f64.atanh();
        let (h_seq, (h, c)) = lstm_forward(&seq(&[&[0.0]]), &params).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-9);
        let expected_h = 0.5f64.tanh(); // o ~= 1
        assert!((h[0] - expected_h).abs() < 1e-9);
        assert_eq!(h_seq.len(), 1);
    }

    #[test]
    fn hidden_states_are_bounded_by_one() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let params = LstmParams::init(3, 5, &mut rng);
        let x: Vec<Vec<f64>> = (0..20)
            .map(|t| (0..3).map(|j| ((t * 3 + j) as f64).sin() * 4.0).collect())
            .collect();
        let (h_seq, _) = lstm_forward(&x, &params).unwrap();
        for h in &h_seq {
            assert!(h.iter().all(|&v| v.abs() < 1.0));
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let params = LstmParams::zeros(1, 1);
        assert!(matches!(
            lstm_forward(&seq(&[&[f64::NAN]]), &params),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn forget_bias_starts_at_one() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let params = LstmParams::init(4, 6, &mut rng);
        assert!(params.b[GATE_FORGET].iter().all(|&v| v == 1.0));
        assert!(params.b[GATE_INPUT].iter().all(|&v| v == 0.0));
    }
}

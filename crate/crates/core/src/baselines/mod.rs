//! The retailer's five benchmark models: exponential smoothing, quarter
//! medians (overall and per weekday), lasso regression and random forest.
//!
//! ETS and the medians consume raw demand history up to the forecast
//! origin; lasso and the forest consume the same feature table as the
//! network, one direct model per lookahead.

pub mod forest;
pub mod lasso;

pub use forest::{find_best_split, rf_fit, rf_predict, RandomForest, RfParams};
pub use lasso::{lasso_fit, lasso_fit_select, LassoModel};

use crate::calendar::weekday_slot;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::pipeline::{origin_rows_in_range, DataSplit};
use crate::seed::derive_seed;

/// Previous quarter: 13 weeks of 6 working days.
pub const QUARTER_WINDOW: usize = 78;

/// ETS smoothing-constant grid, 0.05 .. 0.95 step 0.05.
pub fn alpha_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Benchmark model tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Ets,
    Mpq,
    Mdpq,
    LassoRegression,
    RandomForest,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Ets,
        BaselineKind::Mpq,
        BaselineKind::Mdpq,
        BaselineKind::LassoRegression,
        BaselineKind::RandomForest,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            BaselineKind::Ets => "ets",
            BaselineKind::Mpq => "mpq",
            BaselineKind::Mdpq => "mdpq",
            BaselineKind::LassoRegression => "lr",
            BaselineKind::RandomForest => "rf",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.tag() == tag)
    }
}

/// Simple exponential smoothing: level `l_t = alpha y_t + (1 - alpha) l_{t-1}`
/// with `l_0 = y_0`; every lookahead equals the final level.
pub fn ets_forecast(history: &[f64], alpha: f64, h: usize) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::EmptyInput { context: "ets history" });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config(format!("ets alpha must lie in (0, 1], got {alpha}")));
    }
    let mut level = history[0];
    for &y in &history[1..] {
        level = alpha * y + (1.0 - alpha) * level;
    }
    Ok(vec![level; h])
}

/// Smoothed level at every index (level after consuming `history[..=t]`).
fn ets_levels(history: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(history.len());
    let mut level = history[0];
    out.push(level);
    for &y in &history[1..] {
        level = alpha * y + (1.0 - alpha) * level;
        out.push(level);
    }
    out
}

/// Grid-search alpha minimizing summed squared forecast error over the
/// validation origins. Ties resolve to the smaller alpha.
pub fn ets_select_alpha(demand: &[f64], val_origins: &[usize], h: usize) -> Result<f64> {
    if demand.is_empty() {
        return Err(Error::EmptyInput { context: "ets history" });
    }
    let mut best = (f64::INFINITY, alpha_grid()[0]);
    for alpha in alpha_grid() {
        let levels = ets_levels(demand, alpha);
        let mut sse = 0.0;
        for &origin in val_origins {
            let level = levels[origin];
            for k in 1..=h {
                let e = demand[origin + k] - level;
                sse += e * e;
            }
        }
        if sse < best.0 {
            best = (sse, alpha);
        }
    }
    Ok(best.1)
}

/// Median; even-length inputs take the mean of the two middle values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput { context: "median" });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite demand"));
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

fn quarter_slice(history: &[f64]) -> &[f64] {
    let start = history.len().saturating_sub(QUARTER_WINDOW);
    &history[start..]
}

/// Median previous quarter: all lookaheads equal the median of the last
/// 78 working days of `history` (which ends at the forecast origin).
pub fn mpq_forecast(history: &[f64], h: usize) -> Result<Vec<f64>> {
    let m = median(quarter_slice(history))?;
    Ok(vec![m; h])
}

/// Weekday-resolved median previous quarter. `weekdays[t]` is the working
/// weekday slot (0 = Monday .. 5 = Saturday) of `history[t]`;
/// `target_weekdays[k]` that of lookahead `k + 1`. A weekday absent from
/// the window falls back to the overall quarter median.
pub fn mdpq_forecast(
    history: &[f64],
    weekdays: &[usize],
    target_weekdays: &[usize],
    h: usize,
) -> Result<Vec<f64>> {
    if history.len() != weekdays.len() {
        return Err(Error::LengthMismatch {
            left: history.len(),
            right: weekdays.len(),
            context: "mdpq weekday labels",
        });
    }
    if target_weekdays.len() != h {
        return Err(Error::LengthMismatch {
            left: target_weekdays.len(),
            right: h,
            context: "mdpq target weekdays",
        });
    }
    let start = history.len().saturating_sub(QUARTER_WINDOW);
    let window = &history[start..];
    let window_days = &weekdays[start..];
    let overall = median(window)?;
    let mut out = Vec::with_capacity(h);
    for &wd in target_weekdays {
        let same_day: Vec<f64> = window
            .iter()
            .zip(window_days)
            .filter(|(_, &d)| d == wd)
            .map(|(&v, _)| v)
            .collect();
        out.push(if same_day.is_empty() {
            overall
        } else {
            median(&same_day)?
        });
    }
    Ok(out)
}

/// Forecasts of one benchmark model at the shared test origins.
#[derive(Debug, Clone)]
pub struct BaselineForecasts {
    pub kind: BaselineKind,
    /// Forecast-origin row indices into the feature matrix.
    pub origin_rows: Vec<usize>,
    /// Per origin: `h` forecasts in original demand units, clamped >= 0.
    pub forecasts: Vec<Vec<f64>>,
    /// Smoothing constant chosen on the validation split (ETS only).
    pub alpha: Option<f64>,
    /// Per-lookahead penalty chosen on the validation split (lasso only).
    pub lambdas: Option<Vec<f64>>,
}

/// Run one benchmark over a series, forecasting at exactly the test
/// origins the network uses. `matrix` carries the same feature columns the
/// network consumes; demand history is its target column.
pub fn run_baseline(
    kind: BaselineKind,
    matrix: &FeatureMatrix,
    split: &DataSplit,
    w: usize,
    h: usize,
    seed: u64,
) -> Result<BaselineForecasts> {
    let n = matrix.n_rows();
    let test_origins = origin_rows_in_range(n, split.test.clone(), w, h);
    if test_origins.is_empty() {
        return Err(Error::EmptyInput {
            context: "no test origins for baseline",
        });
    }
    let demand = &matrix.targets;
    let mut alpha = None;
    let mut lambdas = None;

    let forecasts: Vec<Vec<f64>> = match kind {
        BaselineKind::Ets => {
            let val_origins = origin_rows_in_range(n, split.validation.clone(), w, h);
            let a = ets_select_alpha(demand, &val_origins, h)?;
            alpha = Some(a);
            test_origins
                .iter()
                .map(|&r| ets_forecast(&demand[..=r], a, h))
                .collect::<Result<_>>()?
        }
        BaselineKind::Mpq => test_origins
            .iter()
            .map(|&r| mpq_forecast(&demand[..=r], h))
            .collect::<Result<_>>()?,
        BaselineKind::Mdpq => {
            let weekdays: Vec<usize> = matrix
                .dates
                .iter()
                .map(|&d| weekday_slot(d))
                .collect::<Result<_>>()?;
            test_origins
                .iter()
                .map(|&r| {
                    let targets: Vec<usize> = weekdays[r + 1..=r + h].to_vec();
                    mdpq_forecast(&demand[..=r], &weekdays[..=r], &targets, h)
                })
                .collect::<Result<_>>()?
        }
        BaselineKind::LassoRegression => {
            let mut per_lookahead_lambdas = Vec::with_capacity(h);
            let mut models = Vec::with_capacity(h);
            for k in 1..=h {
                let (xt, yt) = supervised_pairs(matrix, split.train.clone(), k);
                let (xv, yv) = supervised_pairs(matrix, split.validation.clone(), k);
                if xt.is_empty() {
                    return Err(Error::EmptyInput {
                        context: "lasso training pairs",
                    });
                }
                let model = lasso_fit_select(&xt, &yt, &xv, &yv)?;
                per_lookahead_lambdas.push(model.lambda);
                models.push(model);
            }
            lambdas = Some(per_lookahead_lambdas);
            test_origins
                .iter()
                .map(|&r| {
                    models
                        .iter()
                        .map(|m| m.predict(&matrix.values[r]))
                        .collect()
                })
                .collect()
        }
        BaselineKind::RandomForest => {
            let params = RfParams::default();
            let mut forests = Vec::with_capacity(h);
            for k in 1..=h {
                let (xt, yt) = supervised_pairs(matrix, split.train.clone(), k);
                if xt.len() < 2 {
                    return Err(Error::EmptyInput {
                        context: "random forest training pairs",
                    });
                }
                let forest = rf_fit(&xt, &yt, &params, derive_seed(seed, k as u64))?;
                forests.push(forest);
            }
            test_origins
                .iter()
                .map(|&r| {
                    forests
                        .iter()
                        .map(|f| rf_predict(f, &matrix.values[r]))
                        .collect()
                })
                .collect()
        }
    };

    let forecasts = forecasts
        .into_iter()
        .map(|fc| fc.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    Ok(BaselineForecasts {
        kind,
        origin_rows: test_origins,
        forecasts,
        alpha,
        lambdas,
    })
}

/// Direct multi-step supervision: `(features of row r, demand at r + k)`
/// for every row whose target lands inside `target_rows`.
fn supervised_pairs(
    matrix: &FeatureMatrix,
    target_rows: std::ops::Range<usize>,
    k: usize,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in 0..matrix.n_rows() {
        let target = r + k;
        if target >= target_rows.start && target < target_rows.end {
            x.push(matrix.values[r].clone());
            y.push(matrix.targets[target]);
        }
    }
    (x, y)
}

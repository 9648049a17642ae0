//! The experiment ladder: univariate baseline, known-orders model,
//! feature-space search, cross-warehouse pretraining with a rank-correlation
//! gate, and parallel multi-product forecasting.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::calendar::{ProductId, StoreCalendar, WarehouseId};
use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::eval::{lookahead_errors, LookaheadErrors};
use crate::ingest::{
    self, derive_features, impute_prices, FeatureMatrix, ProductMeta, SalesTable,
};
use crate::nn::{train, train_from_params, ModelConfig, TrainedModel, MODEL_FORMAT_VERSION};
use crate::pipeline::{
    chronological_split, windows_in_range, DataSplit, MinMaxScaler, ScaledMatrix, WindowedSample,
    TRAIN_MONTHS,
};
use crate::seed::derive_seed;
use crate::tune::validation_mmape;

/// Default rank-correlation gate for pretraining: at least weak
/// correlation in the Cohen convention.
pub const DEFAULT_SPEARMAN_THRESHOLD: f64 = 0.2;

/// A named subset of feature columns; always contains previous demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub name: String,
    pub columns: Vec<String>,
}

impl FeatureSet {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Result<Self> {
        let set = FeatureSet {
            name: name.into(),
            columns,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::config("feature set must not be empty"));
        }
        if !self.columns.iter().any(|c| c == ingest::COL_PREV_DEMAND) {
            return Err(Error::config(format!(
                "feature set `{}` must contain {}",
                self.name,
                ingest::COL_PREV_DEMAND
            )));
        }
        Ok(())
    }

    /// Past demand only.
    pub fn univariate() -> Self {
        FeatureSet {
            name: "univariate".into(),
            columns: vec![ingest::COL_PREV_DEMAND.into()],
        }
    }

    /// Past demand plus orders known at prediction time.
    pub fn known_orders() -> Self {
        FeatureSet {
            name: "known_orders".into(),
            columns: vec![ingest::COL_PREV_DEMAND.into(), ingest::COL_KNOWN_ORDERS.into()],
        }
    }

    /// The winning feature space: previous demand, known orders, day of
    /// the week, and the four further-future flags.
    pub fn optimal() -> Self {
        let mut columns = vec![ingest::COL_PREV_DEMAND.into(), ingest::COL_KNOWN_ORDERS.into()];
        columns.extend(ingest::COL_DOW.iter().map(|s| s.to_string()));
        columns.push(ingest::COL_OPEN_TOMORROW.into());
        columns.push(ingest::COL_OPEN_DAY_AFTER.into());
        columns.push(ingest::COL_HOLIDAY_TOMORROW.into());
        columns.push(ingest::COL_HOLIDAY_DAY_AFTER.into());
        FeatureSet {
            name: "optimal".into(),
            columns,
        }
    }

    /// Every engineered column, including price and promotion.
    pub fn full() -> Self {
        FeatureSet {
            name: "full".into(),
            columns: ingest::all_feature_columns(),
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "univariate" => Some(Self::univariate()),
            "known_orders" => Some(Self::known_orders()),
            "optimal" => Some(Self::optimal()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }

    /// The candidate list searched by default.
    pub fn default_candidates() -> Vec<FeatureSet> {
        vec![
            Self::univariate(),
            Self::known_orders(),
            Self::optimal(),
            Self::full(),
        ]
    }
}

/// One prepared series: engineered features, chronological split and
/// reporting category.
#[derive(Debug, Clone)]
pub struct SeriesBundle {
    pub matrix: FeatureMatrix,
    pub split: DataSplit,
    pub category: String,
}

impl SeriesBundle {
    pub fn product(&self) -> &ProductId {
        &self.matrix.product
    }

    pub fn warehouse(&self) -> &WarehouseId {
        &self.matrix.warehouse
    }
}

/// Impute prices over the training interval, derive features and split
/// every series. Categories come from the metadata table; series without
/// an entry fall into `uncategorized`.
pub fn prepare_series(
    table: &SalesTable,
    cal: &StoreCalendar,
    meta: &HashMap<ProductId, ProductMeta>,
) -> Result<Vec<SeriesBundle>> {
    let (start, _) = table.date_range().ok_or(Error::EmptyInput {
        context: "sales table",
    })?;
    let fit_end = start
        .checked_add_months(chrono::Months::new(TRAIN_MONTHS))
        .ok_or_else(|| Error::config("training range out of calendar bounds"))?
        .pred_opt()
        .expect("valid date");
    let imputed = impute_prices(table, (start, fit_end))?;
    let matrices = derive_features(&imputed, cal)?;
    matrices
        .into_iter()
        .map(|matrix| {
            let split = chronological_split(&matrix, cal)?;
            let category = meta
                .get(&matrix.product)
                .map(|m| m.category.clone())
                .unwrap_or_else(|| "uncategorized".to_string());
            Ok(SeriesBundle {
                matrix,
                split,
                category,
            })
        })
        .collect()
}

/// Per-origin test forecasts of one series, in original demand units.
#[derive(Debug, Clone)]
pub struct SeriesForecasts {
    pub origin_rows: Vec<usize>,
    pub forecasts: Vec<Vec<f64>>,
    pub actuals: Vec<Vec<f64>>,
}

impl SeriesForecasts {
    pub fn errors(&self) -> Result<LookaheadErrors> {
        lookahead_errors(&self.forecasts, &self.actuals)
    }
}

/// Result of one standard train-and-evaluate run.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub model: TrainedModel,
    pub val_mmape: f64,
    pub test: SeriesForecasts,
    pub errors: LookaheadErrors,
}

fn scale_series(
    series: &SeriesBundle,
    features: &FeatureSet,
) -> Result<(MinMaxScaler, ScaledMatrix)> {
    let selected = series.matrix.select_columns(&features.columns)?;
    let scaler = MinMaxScaler::fit(&selected, series.split.train.clone())?;
    let scaled = scaler.transform_matrix(&selected)?;
    Ok((scaler, scaled))
}

fn actuals_at(matrix: &FeatureMatrix, origin_rows: &[usize], h: usize) -> Vec<Vec<f64>> {
    origin_rows
        .iter()
        .map(|&r| matrix.targets[r + 1..=r + h].to_vec())
        .collect()
}

/// Forecast a model's series at the shared test origins, inverse-scaled
/// and clamped at zero.
pub fn forecast_with_model(
    model: &TrainedModel,
    series: &[&SeriesBundle],
) -> Result<Vec<SeriesForecasts>> {
    if series.len() != model.n_series() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: model.n_series(),
            context: "model series count",
        });
    }
    let w = model.config.input_window;
    let h = model.config.horizon;
    let split = &series[0].split;
    for s in series {
        if s.split != *split || s.matrix.dates != series[0].matrix.dates {
            return Err(Error::Alignment {
                message: "parallel series must share dates and split".to_string(),
            });
        }
    }
    let scaled: Vec<ScaledMatrix> = series
        .iter()
        .zip(&model.scalers)
        .map(|(s, scaler)| {
            let selected = s.matrix.select_columns(&model.feature_columns)?;
            scaler.transform_matrix(&selected)
        })
        .collect::<Result<_>>()?;

    let n = scaled[0].n_rows();
    let origin_rows = crate::pipeline::origin_rows_in_range(n, split.test.clone(), w, h);
    if origin_rows.is_empty() {
        return Err(Error::EmptyInput {
            context: "test windows",
        });
    }

    let mut per_series_forecasts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); series.len()];
    for &origin in &origin_rows {
        let start = origin + 1 - w;
        let mut input: Vec<Vec<f64>> = vec![Vec::new(); w];
        for m in &scaled {
            for (t, row) in input.iter_mut().enumerate() {
                row.extend_from_slice(&m.values[start + t]);
            }
        }
        let out = model.predict(&input)?;
        for (i, scaler) in model.scalers.iter().enumerate() {
            per_series_forecasts[i].push(
                out[i * h..(i + 1) * h]
                    .iter()
                    .map(|&v| scaler.inverse_demand(v).max(0.0))
                    .collect(),
            );
        }
    }

    Ok(series
        .iter()
        .enumerate()
        .map(|(i, s)| SeriesForecasts {
            origin_rows: origin_rows.clone(),
            forecasts: per_series_forecasts[i].clone(),
            actuals: actuals_at(&s.matrix, &origin_rows, h),
        })
        .collect())
}

/// The standard pipeline for one series and one feature set: scale on the
/// training interval, frame windows, train with early stopping, forecast
/// the test origins.
pub fn run_single(
    series: &SeriesBundle,
    features: &FeatureSet,
    config: &ModelConfig,
    master_seed: u64,
) -> Result<SingleRun> {
    features.validate()?;
    let (scaler, scaled) = scale_series(series, features)?;
    let (train_w, val_w, _) = crate::pipeline::split_windows(
        &scaled,
        &series.split,
        config.input_window,
        config.horizon,
    );
    let fitted = train(config, &train_w, &val_w)?;
    let val_mmape = validation_mmape(&fitted.params, &val_w, &scaler)?;
    let model = TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        master_seed,
        config: config.clone(),
        feature_columns: features.columns.clone(),
        series_keys: vec![(series.matrix.product.clone(), series.matrix.warehouse.clone())],
        scalers: vec![scaler],
        params: fitted.params,
        best_epoch: fitted.best_epoch,
        history: fitted.history,
    };
    let test = forecast_with_model(&model, &[series])?.remove(0);
    let errors = test.errors()?;
    Ok(SingleRun {
        model,
        val_mmape,
        test,
        errors,
    })
}

/// The univariate reference model: past demand is the only feature.
pub fn run_univariate(
    series: &SeriesBundle,
    config: &ModelConfig,
    master_seed: u64,
) -> Result<SingleRun> {
    run_single(series, &FeatureSet::univariate(), config, master_seed)
}

/// One scored candidate of the feature search.
#[derive(Debug, Clone)]
pub struct FeatureSearchRow {
    pub category: String,
    pub feature_set: String,
    /// Mean over the category's series of validation mean mMAPE.
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct FeatureSearchResult {
    pub table: Vec<FeatureSearchRow>,
    /// Winning feature set per category.
    pub best: BTreeMap<String, FeatureSet>,
}

/// Train every candidate on every series and pick the per-category argmin
/// of the validation score. Ties resolve to the earlier candidate.
pub fn run_feature_search(
    series: &[SeriesBundle],
    candidates: &[FeatureSet],
    config: &ModelConfig,
    master_seed: u64,
) -> Result<FeatureSearchResult> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput {
            context: "feature-search candidates",
        });
    }
    if series.is_empty() {
        return Err(Error::EmptyInput {
            context: "feature-search series",
        });
    }
    for c in candidates {
        c.validate()?;
    }

    // Score every (candidate, series) pair; order-independent seeds.
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..series.len()).map(move |s| (c, s)))
        .collect();
    let scores: Vec<(usize, usize, f64)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let mut cfg = config.clone();
            cfg.rng_seed = derive_seed(derive_seed(master_seed, c as u64), s as u64);
            let run = run_single(&series[s], &candidates[c], &cfg, master_seed)?;
            Ok((c, s, run.val_mmape))
        })
        .collect::<Result<_>>()?;

    let mut by_candidate_category: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for &(c, s, score) in &scores {
        by_candidate_category
            .entry((c, series[s].category.clone()))
            .or_default()
            .push(score);
    }

    let mut table = Vec::new();
    let mut best: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for ((c, category), vals) in by_candidate_category {
        let score = vals.iter().sum::<f64>() / vals.len() as f64;
        table.push(FeatureSearchRow {
            category: category.clone(),
            feature_set: candidates[c].name.clone(),
            score,
        });
        let entry = best.entry(category).or_insert((c, f64::INFINITY));
        if score < entry.1 {
            *entry = (c, score);
        }
    }
    let best = best
        .into_iter()
        .map(|(cat, (c, _))| (cat, candidates[c].clone()))
        .collect();
    Ok(FeatureSearchResult { table, best })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
            context: "spearman inputs",
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput {
            context: "spearman needs at least 2 points",
        });
    }
    let ra = fractional_ranks(a);
    let rb = fractional_ranks(b);
    pearson(&ra, &rb)
}

/// Average ranks: ties share the mean of the positions they occupy.
fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation {
            context: "constant series",
        });
    }
    Ok(cov / (va * vb).sqrt())
}

/// Outcome of the pretraining experiment.
#[derive(Debug)]
pub struct PretrainRun {
    pub run: SingleRun,
    /// Related series that passed the correlation gate.
    pub related_used: usize,
    /// True when no related series passed and plain training ran instead.
    pub fallback: bool,
}

/// Pretrain on pooled related series (same product, other warehouses)
/// whose demand rank-correlates with the target at `|rho| >= threshold`
/// over the shared training interval, then fine-tune all parameters on
/// the target. Falls back to plain training when nothing passes the gate.
pub fn run_pretrain(
    target: &SeriesBundle,
    related: &[&SeriesBundle],
    features: &FeatureSet,
    config: &ModelConfig,
    threshold: f64,
    master_seed: u64,
) -> Result<PretrainRun> {
    features.validate()?;
    let gate: Vec<&SeriesBundle> = related
        .iter()
        .copied()
        .filter(|r| {
            match aligned_train_demand(target, r) {
                Some((a, b)) if a.len() >= 2 => match spearman(&a, &b) {
                    Ok(rho) => rho.abs() >= threshold,
                    Err(_) => false,
                },
                _ => false,
            }
        })
        .collect();

    if gate.is_empty() {
        let run = run_single(target, features, config, master_seed)?;
        return Ok(PretrainRun {
            run,
            related_used: 0,
            fallback: true,
        });
    }

    // Phase 1: pooled training windows of the related series, each scaled
    // by its own training interval; early stopping on the target's
    // validation windows so both phases optimize the same objective.
    let (target_scaler, target_scaled) = scale_series(target, features)?;
    let (_, target_val, _) = crate::pipeline::split_windows(
        &target_scaled,
        &target.split,
        config.input_window,
        config.horizon,
    );
    let mut pooled: Vec<WindowedSample> = Vec::new();
    for r in &gate {
        let (_, scaled) = scale_series(r, features)?;
        pooled.extend(windows_in_range(
            &scaled,
            config.input_window,
            config.horizon,
            r.split.train.clone(),
        ));
    }
    let mut phase1_cfg = config.clone();
    phase1_cfg.rng_seed = derive_seed(config.rng_seed, 1);
    let phase1 = train(&phase1_cfg, &pooled, &target_val)?;

    // Phase 2: fine-tune every parameter on the target series.
    let (target_train, target_val2, _) = crate::pipeline::split_windows(
        &target_scaled,
        &target.split,
        config.input_window,
        config.horizon,
    );
    let fitted = train_from_params(config, phase1.params, &target_train, &target_val2)?;
    let val_mmape = validation_mmape(&fitted.params, &target_val2, &target_scaler)?;
    let model = TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        master_seed,
        config: config.clone(),
        feature_columns: features.columns.clone(),
        series_keys: vec![(target.matrix.product.clone(), target.matrix.warehouse.clone())],
        scalers: vec![target_scaler],
        params: fitted.params,
        best_epoch: fitted.best_epoch,
        history: fitted.history,
    };
    let test = forecast_with_model(&model, &[target])?.remove(0);
    let errors = test.errors()?;
    Ok(PretrainRun {
        run: SingleRun {
            model,
            val_mmape,
            test,
            errors,
        },
        related_used: gate.len(),
        fallback: false,
    })
}

/// Demand values of the shared training-interval dates, aligned by date.
fn aligned_train_demand(a: &SeriesBundle, b: &SeriesBundle) -> Option<(Vec<f64>, Vec<f64>)> {
    let b_index: HashMap<chrono::NaiveDate, usize> = b
        .matrix
        .dates
        .iter()
        .enumerate()
        .take(b.split.train.end)
        .map(|(i, &d)| (d, i))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in a.split.train.clone() {
        if let Some(&rb) = b_index.get(&a.matrix.dates[r]) {
            xs.push(a.matrix.targets[r]);
            ys.push(b.matrix.targets[rb]);
        }
    }
    if xs.is_empty() {
        None
    } else {
        Some((xs, ys))
    }
}

/// Result of the parallel multi-product run: one model, per-product
/// forecasts and errors.
#[derive(Debug)]
pub struct ParallelRun {
    pub model: TrainedModel,
    pub per_series: Vec<SeriesForecasts>,
    pub errors: Vec<LookaheadErrors>,
}

/// One model forecasting several products at once: inputs are the
/// concatenated per-product feature vectors, the output layer has
/// `horizon x products` units, and evaluation splits the output back per
/// product.
pub fn run_parallel(
    series: &[&SeriesBundle],
    features: &FeatureSet,
    config: &ModelConfig,
    master_seed: u64,
) -> Result<ParallelRun> {
    features.validate()?;
    if series.is_empty() {
        return Err(Error::EmptyInput {
            context: "parallel series",
        });
    }
    let first = series[0];
    for s in series.iter().skip(1) {
        if s.matrix.dates != first.matrix.dates || s.split != first.split {
            return Err(Error::Alignment {
                message: format!(
                    "series ({}, {}) is not aligned with ({}, {})",
                    s.matrix.product, s.matrix.warehouse, first.matrix.product, first.matrix.warehouse
                ),
            });
        }
    }

    let mut scalers = Vec::with_capacity(series.len());
    let mut scaled = Vec::with_capacity(series.len());
    for s in series {
        let (scaler, m) = scale_series(s, features)?;
        scalers.push(scaler);
        scaled.push(m);
    }

    let w = config.input_window;
    let h = config.horizon;
    let stitch = |range: std::ops::Range<usize>| -> Vec<WindowedSample> {
        let per_series: Vec<Vec<WindowedSample>> = scaled
            .iter()
            .map(|m| windows_in_range(m, w, h, range.clone()))
            .collect();
        let n_windows = per_series[0].len();
        (0..n_windows)
            .map(|i| {
                let mut input = vec![Vec::new(); w];
                let mut target = Vec::with_capacity(h * series.len());
                for windows in &per_series {
                    for (t, row) in input.iter_mut().enumerate() {
                        row.extend_from_slice(&windows[i].input[t]);
                    }
                    target.extend_from_slice(&windows[i].target);
                }
                WindowedSample {
                    input,
                    target,
                    origin: per_series[0][i].origin,
                    origin_date: per_series[0][i].origin_date,
                }
            })
            .collect()
    };
    let train_w = stitch(first.split.train.clone());
    let val_w = stitch(first.split.validation.clone());

    let fitted = train(config, &train_w, &val_w)?;
    let model = TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        master_seed,
        config: config.clone(),
        feature_columns: features.columns.clone(),
        series_keys: series
            .iter()
            .map(|s| (s.matrix.product.clone(), s.matrix.warehouse.clone()))
            .collect(),
        scalers,
        params: fitted.params,
        best_epoch: fitted.best_epoch,
        history: fitted.history,
    };
    let per_series = forecast_with_model(&model, series)?;
    let errors = per_series
        .iter()
        .map(SeriesForecasts::errors)
        .collect::<Result<_>>()?;
    Ok(ParallelRun {
        model,
        per_series,
        errors,
    })
}

/// Experiment variants, matching the design ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentVariant {
    Univariate,
    KnownOrders,
    FeatureSearch,
    Pretrain,
    Parallel,
    /// A plain run with an explicitly named feature set.
    Single,
}

impl ExperimentVariant {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "univariate" => Self::Univariate,
            "known_orders" => Self::KnownOrders,
            "feature_search" => Self::FeatureSearch,
            "pretrain" => Self::Pretrain,
            "parallel" => Self::Parallel,
            "single" => Self::Single,
            _ => return None,
        })
    }
}

/// A declarative experiment description, loadable from a key-value file.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub variant: ExperimentVariant,
    /// Products to run on; empty means every product in the data.
    pub products: Vec<ProductId>,
    pub feature_set: FeatureSet,
    pub candidates: Vec<FeatureSet>,
    pub spearman_threshold: f64,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn from_kv(kv: &KeyValueFile) -> Result<Self> {
        let variant_name = kv.get("variant").unwrap_or("known_orders");
        let variant = ExperimentVariant::from_name(variant_name)
            .ok_or_else(|| Error::config(format!("unknown experiment variant `{variant_name}`")))?;
        let feature_name = kv.get("feature_set").unwrap_or(match variant {
            ExperimentVariant::Univariate => "univariate",
            _ => "known_orders",
        });
        let feature_set = FeatureSet::by_name(feature_name)
            .ok_or_else(|| Error::config(format!("unknown feature set `{feature_name}`")))?;
        let candidates = {
            let names = kv.get_list("candidates");
            if names.is_empty() {
                FeatureSet::default_candidates()
            } else {
                names
                    .iter()
                    .map(|n| {
                        FeatureSet::by_name(n)
                            .ok_or_else(|| Error::config(format!("unknown feature set `{n}`")))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let products = kv
            .get_list("products")
            .into_iter()
            .map(ProductId::new)
            .collect::<Result<_>>()?;
        Ok(ExperimentPlan {
            variant,
            products,
            feature_set,
            candidates,
            spearman_threshold: kv.get_or("spearman_threshold", DEFAULT_SPEARMAN_THRESHOLD)?,
            seed: kv.get_or("seed", 42u64)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_of_monotone_series_is_one() {
        let a = vec![1.0, 2.0, 5.0, 9.0];
        assert_eq!(spearman(&a, &a).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|v| v.exp()).collect();
        assert_eq!(spearman(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn spearman_of_reversed_series_is_minus_one() {
        let a = vec![1.0, 2.0, 5.0, 9.0];
        let b: Vec<f64> = a.iter().rev().copied().collect();
        assert_eq!(spearman(&a, &b).unwrap(), -1.0);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        // Hand-ranked: a = (1, 2, 2, 3) -> ranks (1, 2.5, 2.5, 4).
        let a = vec![1.0, 2.0, 2.0, 3.0];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let ra = [1.0, 2.5, 2.5, 4.0];
        let rb = [1.0, 2.0, 3.0, 4.0];
        let expected = pearson(&ra, &rb).unwrap();
        assert!((spearman(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transforms() {
        let a = vec![3.0, 1.0, 4.0, 1.5, 9.0, 2.6];
        let b = vec![2.0, 7.0, 1.0, 8.0, 2.0, 8.0];
        let base = spearman(&a, &b).unwrap();
        let ta: Vec<f64> = a.iter().map(|v| v * 3.0 + 1.0).collect();
        let tb: Vec<f64> = b.iter().map(|v| v.powi(3)).collect();
        assert!((spearman(&ta, &tb).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn spearman_of_constant_series_is_undefined() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation { .. })
        ));
    }

    #[test]
    fn fractional_ranks_average_tied_positions() {
        assert_eq!(
            fractional_ranks(&[10.0, 20.0, 20.0, 30.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(fractional_ranks(&[5.0, 5.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn named_feature_sets_validate_and_resolve() {
        for name in ["univariate", "known_orders", "optimal", "full"] {
            let set = FeatureSet::by_name(name).unwrap();
            assert!(set.validate().is_ok());
            assert_eq!(set.name, name);
        }
        assert!(FeatureSet::by_name("bogus").is_none());
        assert_eq!(FeatureSet::univariate().columns.len(), 1);
        // The winning space has the four further-future flags and weekdays.
        assert_eq!(FeatureSet::optimal().columns.len(), 12);
    }

    #[test]
    fn feature_set_without_prev_demand_is_invalid() {
        assert!(FeatureSet::new("bad", vec!["known_orders".into()]).is_err());
        assert!(FeatureSet::new("empty", vec![]).is_err());
    }

    #[test]
    fn experiment_plan_defaults() {
        let kv = KeyValueFile::parse("variant = univariate\n").unwrap();
        let plan = ExperimentPlan::from_kv(&kv).unwrap();
        assert_eq!(plan.variant, ExperimentVariant::Univariate);
        assert_eq!(plan.feature_set.name, "univariate");
        assert_eq!(plan.spearman_threshold, DEFAULT_SPEARMAN_THRESHOLD);
        assert_eq!(plan.candidates.len(), 4);
    }

    #[test]
    fn experiment_plan_rejects_unknown_variant() {
        let kv = KeyValueFile::parse("variant = mystery\n").unwrap();
        assert!(ExperimentPlan::from_kv(&kv).is_err());
    }
}

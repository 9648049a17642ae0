//! Error metrics, lookahead-resolved evaluation, aggregation, and
//! box-plot statistics.
//!
//! The percentage metric is the modified MAPE with denominator
//! `1 + |actual|`, finite on zero-demand days:
//!
//! ```text
//! mMAPE = (1/m) * sum_t |F_t - A_t| / (1 + |A_t|)
//! ```
//!
//! Per product, MAE and mMAPE are first averaged over forecast origins for
//! each lookahead, then over the six lookaheads, then over products; the
//! last two aggregates are the overall mean MAE and mean mMAPE.

use std::collections::BTreeMap;
use std::path::Path;

use crate::calendar::{ProductId, WarehouseId};
use crate::error::{Error, Result};

/// Mean absolute error.
pub fn mae(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(forecast, actual, "mae")?;
    let n = forecast.len() as f64;
    Ok(forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| (f - a).abs())
        .sum::<f64>()
        / n)
}

/// Modified MAPE, denominator `1 + |A_t|`.
pub fn mmape(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    check_pair(forecast, actual, "mmape")?;
    let n = forecast.len() as f64;
    Ok(forecast
        .iter()
        .zip(actual)
        .map(|(f, a)| (f - a).abs() / (1.0 + a.abs()))
        .sum::<f64>()
        / n)
}

fn check_pair(forecast: &[f64], actual: &[f64], context: &'static str) -> Result<()> {
    if forecast.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: forecast.len(),
            right: actual.len(),
            context,
        });
    }
    if forecast.is_empty() {
        return Err(Error::EmptyInput { context });
    }
    Ok(())
}

/// Per-lookahead errors of one (product, model) pair, averaged over all
/// forecast origins.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadErrors {
    pub mae: Vec<f64>,
    pub mmape: Vec<f64>,
    /// Number of forecast origins behind each entry.
    pub n_origins: usize,
}

impl LookaheadErrors {
    pub fn horizon(&self) -> usize {
        self.mae.len()
    }

    /// Unweighted mean over lookaheads.
    pub fn mean_mae(&self) -> f64 {
        self.mae.iter().sum::<f64>() / self.mae.len() as f64
    }

    pub fn mean_mmape(&self) -> f64 {
        self.mmape.iter().sum::<f64>() / self.mmape.len() as f64
    }
}

/// Metrics per lookahead over aligned per-origin forecast/actual vectors.
/// Values must already be in original demand units.
pub fn lookahead_errors(
    forecasts: &[Vec<f64>],
    actuals: &[Vec<f64>],
) -> Result<LookaheadErrors> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Alignment {
            message: format!(
                "{} forecast origins vs {} actual origins",
                forecasts.len(),
                actuals.len()
            ),
        });
    }
    if forecasts.is_empty() {
        return Err(Error::EmptyInput {
            context: "lookahead errors",
        });
    }
    let h = forecasts[0].len();
    for (f, a) in forecasts.iter().zip(actuals) {
        if f.len() != h || a.len() != h {
            return Err(Error::Alignment {
                message: "ragged forecast horizon".to_string(),
            });
        }
    }
    let m = forecasts.len();
    let mut mae_out = Vec::with_capacity(h);
    let mut mmape_out = Vec::with_capacity(h);
    for k in 0..h {
        let f_k: Vec<f64> = forecasts.iter().map(|f| f[k]).collect();
        let a_k: Vec<f64> = actuals.iter().map(|a| a[k]).collect();
        mae_out.push(mae(&f_k, &a_k)?);
        mmape_out.push(mmape(&f_k, &a_k)?);
    }
    Ok(LookaheadErrors {
        mae: mae_out,
        mmape: mmape_out,
        n_origins: m,
    })
}

/// Errors of one model on one series, with reporting metadata.
#[derive(Debug, Clone)]
pub struct ProductEval {
    pub product: ProductId,
    pub warehouse: WarehouseId,
    pub category: String,
    pub model: String,
    pub errors: LookaheadErrors,
}

/// Overall mean MAE and mean mMAPE: per product, errors are pooled over
/// lookaheads, then averaged over products.
pub fn overall_means(products: &[&LookaheadErrors]) -> Result<(f64, f64)> {
    if products.is_empty() {
        return Err(Error::EmptyInput {
            context: "overall means",
        });
    }
    let n = products.len() as f64;
    let mae = products.iter().map(|e| e.mean_mae()).sum::<f64>() / n;
    let mmape = products.iter().map(|e| e.mean_mmape()).sum::<f64>() / n;
    Ok((mae, mmape))
}

/// Box-plot statistics with Tukey 1.5 IQR whiskers clipped to the data.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPlotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Labeled points beyond the whisker fences.
    pub outliers: Vec<(String, f64)>,
}

/// Quantile by linear interpolation between order statistics (type 7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn boxplot_stats(values: &[(String, f64)]) -> Result<BoxPlotStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            context: "boxplot stats",
        });
    }
    let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let low_fence = q1 - 1.5 * iqr;
    let high_fence = q3 + 1.5 * iqr;
    let whisker_low = sorted
        .iter()
        .copied()
        .filter(|&v| v >= low_fence)
        .fold(f64::INFINITY, f64::min);
    let whisker_high = sorted
        .iter()
        .copied()
        .filter(|&v| v <= high_fence)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut outliers: Vec<(String, f64)> = values
        .iter()
        .filter(|(_, v)| *v < low_fence || *v > high_fence)
        .cloned()
        .collect();
    outliers.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(BoxPlotStats {
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// One line of the summary CSV.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub model: String,
    pub category: String,
    pub overall_mean_mae: f64,
    pub mean_mmape: f64,
}

/// Category label used for the assortment-wide aggregate rows.
pub const ALL_CATEGORY: &str = "all";

/// Aggregate per (model, category), plus an `all` category per model.
pub fn summarize(rows: &[ProductEval]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, String), Vec<&LookaheadErrors>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.model.clone(), row.category.clone()))
            .or_default()
            .push(&row.errors);
        groups
            .entry((row.model.clone(), ALL_CATEGORY.to_string()))
            .or_default()
            .push(&row.errors);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((model, category), errs) in groups {
        let (overall_mean_mae, mean_mmape) = overall_means(&errs)?;
        out.push(SummaryRow {
            model,
            category,
            overall_mean_mae,
            mean_mmape,
        });
    }
    Ok(out)
}

/// Box-plot statistics of per-product mean mMAPE, per (model, category)
/// and per model over the whole assortment.
pub fn boxplots_by_model(rows: &[ProductEval]) -> Result<Vec<(String, String, BoxPlotStats)>> {
    let mut groups: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
    for row in rows {
        let label = format!("{}@{}", row.product, row.warehouse);
        let value = row.errors.mean_mmape();
        groups
            .entry((row.model.clone(), row.category.clone()))
            .or_default()
            .push((label.clone(), value));
        groups
            .entry((row.model.clone(), ALL_CATEGORY.to_string()))
            .or_default()
            .push((label, value));
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((model, category), values) in groups {
        out.push((model, category, boxplot_stats(&values)?));
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn finish(path: &Path, out: String) -> Result<()> {
    use std::io::Write;
    let mut file = create(path)?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// `product_id,category,model,lookahead,mae,mmape`, one row per lookahead.
pub fn write_evaluation_csv(path: impl AsRef<Path>, seed: u64, rows: &[ProductEval]) -> Result<()> {
    let mut sorted: Vec<&ProductEval> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.model, &a.category, &a.product, &a.warehouse)
            .cmp(&(&b.model, &b.category, &b.product, &b.warehouse))
    });
    let mut out = format!("# master_seed={seed}\n");
    out.push_str("product_id,category,model,lookahead,mae,mmape\n");
    for row in sorted {
        for k in 0..row.errors.horizon() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.product,
                row.category,
                row.model,
                k + 1,
                row.errors.mae[k],
                row.errors.mmape[k]
            ));
        }
    }
    finish(path.as_ref(), out)
}

/// `model,category,overall_mean_mae,mean_mmape`.
pub fn write_summary_csv(path: impl AsRef<Path>, seed: u64, rows: &[SummaryRow]) -> Result<()> {
    let mut out = format!("# master_seed={seed}\n");
    out.push_str("model,category,overall_mean_mae,mean_mmape\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.model, row.category, row.overall_mean_mae, row.mean_mmape
        ));
    }
    finish(path.as_ref(), out)
}

/// `model,category,q1,median,q3,whisker_low,whisker_high,outliers`; the
/// outlier list is `|`-joined `label:value`.
pub fn write_boxplot_csv(
    path: impl AsRef<Path>,
    seed: u64,
    rows: &[(String, String, BoxPlotStats)],
) -> Result<()> {
    let mut out = format!("# master_seed={seed}\n");
    out.push_str("model,category,q1,median,q3,whisker_low,whisker_high,outliers\n");
    for (model, category, stats) in rows {
        let outliers = stats
            .outliers
            .iter()
            .map(|(label, v)| format!("{label}:{v}"))
            .collect::<Vec<_>>()
            .join("|");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            model,
            category,
            stats.q1,
            stats.median,
            stats.q3,
            stats.whisker_low,
            stats.whisker_high,
            outliers
        ));
    }
    finish(path.as_ref(), out)
}

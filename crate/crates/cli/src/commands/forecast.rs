use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;

use demandcast_core::calendar::{ProductId, WarehouseId};
use demandcast_core::ingest::FeatureMatrix;
use demandcast_core::nn::TrainedModel;

use crate::run::RunContext;
use crate::UsageError;

fn model_paths(root: &Path) -> Result<Vec<PathBuf>> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    if root.is_dir() {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(root)
            .with_context(|| format!("reading {}", root.display()))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(UsageError(format!(
                "no model files (*.json) in {}",
                root.display()
            ))
            .into());
        }
        return Ok(paths);
    }
    Err(UsageError(format!("model path `{}` does not exist", root.display())).into())
}

/// Feature matrices without a chronological split, for forecasting from
/// arbitrary-length history.
fn load_matrices(ctx: &RunContext) -> Result<Vec<FeatureMatrix>> {
    use demandcast_core::ingest::{
        derive_features, impute_prices, load_holiday_csv, load_sales_csv,
    };
    let sales_path = ctx
        .kv
        .get("sales")
        .ok_or_else(|| UsageError("config key `sales` is required".into()))?;
    let holidays_path = ctx
        .kv
        .get("holidays")
        .ok_or_else(|| UsageError("config key `holidays` is required".into()))?;
    for path in [sales_path, holidays_path] {
        if !Path::new(path).exists() {
            return Err(UsageError(format!("file `{path}` does not exist")).into());
        }
    }
    let sales = load_sales_csv(sales_path)?;
    let holidays = load_holiday_csv(holidays_path)?;
    let (start, end) = sales
        .date_range()
        .ok_or_else(|| UsageError("sales file contains no records".into()))?;
    let cal =
        demandcast_core::StoreCalendar::new(start, end + chrono::Duration::days(14), holidays)?;
    // At forecast time every observed price is usable for imputation.
    let imputed = impute_prices(&sales, (start, end))?;
    Ok(derive_features(&imputed, &cal)?)
}

pub fn forecast(
    ctx: &RunContext,
    model_flag: Option<&Path>,
    origin_flag: Option<&str>,
) -> Result<()> {
    let model_root = match model_flag {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            ctx.kv
                .get("model")
                .ok_or_else(|| UsageError("pass --model or set `model` in the config".into()))?,
        ),
    };
    let origin: Option<NaiveDate> = match origin_flag.or_else(|| ctx.kv.get("origin")) {
        Some(raw) => Some(
            raw.parse()
                .map_err(|_| UsageError(format!("bad origin date `{raw}`")))?,
        ),
        None => None,
    };

    let matrices = load_matrices(ctx)?;
    let by_key: BTreeMap<(&ProductId, &WarehouseId), &FeatureMatrix> = matrices
        .iter()
        .map(|m| ((&m.product, &m.warehouse), m))
        .collect();

    ctx.ensure_out_dir()?;
    let mut lines: Vec<String> = Vec::new();
    for path in model_paths(&model_root)? {
        let model = TrainedModel::load(&path)?;
        let series: Vec<&FeatureMatrix> = model
            .series_keys
            .iter()
            .map(|(p, w)| {
                by_key.get(&(p, w)).copied().ok_or_else(|| {
                    UsageError(format!("sales data has no series for ({p}, {w})"))
                })
            })
            .collect::<std::result::Result<_, _>>()?;

        // All of a model's series share dates; resolve the origin row once.
        let dates = &series[0].dates;
        let end_row = match origin {
            Some(day) => dates.binary_search(&day).map_err(|_| {
                UsageError(format!(
                    "origin {day} is not a working day covered by the series"
                ))
            })?,
            None => dates.len() - 1,
        };
        let origin_date = dates[end_row];
        let forecasts = model.forecast_units(&series, end_row)?;
        for ((product, warehouse), fc) in model.series_keys.iter().zip(&forecasts) {
            for (k, value) in fc.iter().enumerate() {
                lines.push(format!(
                    "{product},{warehouse},{origin_date},{},{value}",
                    k + 1
                ));
            }
        }
    }
    lines.sort();

    let mut out = format!("# master_seed={}\n", ctx.master_seed);
    out.push_str("product_id,warehouse_id,origin_date,lookahead,forecast\n");
    for line in &lines {
        out.push_str(line);
        out.push('\n');
    }
    let path = ctx.out_dir.join("forecast.csv");
    std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {} forecast rows to {}", lines.len(), path.display());
    Ok(())
}

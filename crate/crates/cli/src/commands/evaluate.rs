use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;

use demandcast_core::baselines::{run_baseline, BaselineKind};
use demandcast_core::eval::{
    boxplots_by_model, summarize, write_boxplot_csv, write_evaluation_csv, write_summary_csv,
    lookahead_errors, ProductEval,
};
use demandcast_core::experiments::{forecast_with_model, SeriesBundle};
use demandcast_core::nn::TrainedModel;
use demandcast_core::plot;
use demandcast_core::{HORIZON, INPUT_WINDOW};

use crate::run::RunContext;
use crate::UsageError;

#[derive(Debug, Clone)]
enum ModelSpec {
    Baseline(BaselineKind),
    /// Perfect-forecast reference: forecast := actual. Testing aid.
    Oracle,
    File(PathBuf),
}

fn parse_specs(raw: &str) -> Result<Vec<ModelSpec>> {
    let mut specs = Vec::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(kind) = BaselineKind::from_tag(item) {
            specs.push(ModelSpec::Baseline(kind));
        } else if item == "oracle" {
            specs.push(ModelSpec::Oracle);
        } else {
            let path = PathBuf::from(item);
            if !path.exists() {
                return Err(UsageError(format!(
                    "`{item}` is neither a baseline tag (ets, mpq, mdpq, lr, rf, oracle) nor a model file"
                ))
                .into());
            }
            specs.push(ModelSpec::File(path));
        }
    }
    if specs.is_empty() {
        return Err(UsageError("no models to evaluate".into()).into());
    }
    Ok(specs)
}

fn actuals_at(series: &SeriesBundle, origin_rows: &[usize]) -> Vec<Vec<f64>> {
    origin_rows
        .iter()
        .map(|&r| series.matrix.targets[r + 1..=r + HORIZON].to_vec())
        .collect()
}

pub fn evaluate(ctx: &RunContext, models_flag: Option<&str>) -> Result<()> {
    let plan = ctx.plan()?;
    let raw_specs = models_flag
        .map(str::to_string)
        .or_else(|| ctx.kv.get("models").map(str::to_string))
        .unwrap_or_else(|| "ets,mpq,mdpq,lr,rf".to_string());
    let specs = parse_specs(&raw_specs)?;
    let series = ctx.load_series()?;
    let selected = ctx.select_series(&series, &plan)?;
    ctx.ensure_out_dir()?;

    let mut rows: Vec<ProductEval> = Vec::new();

    // Benchmarks and the oracle run per series at the shared test origins.
    let per_series_specs: Vec<(usize, ModelSpec)> = specs
        .iter()
        .filter(|s| !matches!(s, ModelSpec::File(_)))
        .flat_map(|spec| (0..selected.len()).map(move |i| (i, spec.clone())))
        .collect();
    let baseline_rows: Vec<ProductEval> = per_series_specs
        .par_iter()
        .map(|(i, spec)| -> demandcast_core::Result<ProductEval> {
            let bundle = selected[*i];
            match spec {
                ModelSpec::Baseline(kind) => {
                    let matrix = bundle.matrix.select_columns(&plan.feature_set.columns)?;
                    let out = run_baseline(
                        *kind,
                        &matrix,
                        &bundle.split,
                        INPUT_WINDOW,
                        HORIZON,
                        ctx.series_seed(bundle),
                    )?;
                    let actuals = actuals_at(bundle, &out.origin_rows);
                    Ok(ProductEval {
                        product: bundle.product().clone(),
                        warehouse: bundle.warehouse().clone(),
                        category: bundle.category.clone(),
                        model: kind.tag().to_string(),
                        errors: lookahead_errors(&out.forecasts, &actuals)?,
                    })
                }
                ModelSpec::Oracle => {
                    let origin_rows = demandcast_core::pipeline::origin_rows_in_range(
                        bundle.matrix.n_rows(),
                        bundle.split.test.clone(),
                        INPUT_WINDOW,
                        HORIZON,
                    );
                    let actuals = actuals_at(bundle, &origin_rows);
                    Ok(ProductEval {
                        product: bundle.product().clone(),
                        warehouse: bundle.warehouse().clone(),
                        category: bundle.category.clone(),
                        model: "oracle".to_string(),
                        errors: lookahead_errors(&actuals, &actuals)?,
                    })
                }
                ModelSpec::File(_) => unreachable!(),
            }
        })
        .collect::<demandcast_core::Result<_>>()?;
    rows.extend(baseline_rows);

    // Trained models forecast their own series.
    for spec in &specs {
        let ModelSpec::File(path) = spec else { continue };
        let model = TrainedModel::load(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "model".to_string());
        let bundles: Vec<&SeriesBundle> = model
            .series_keys
            .iter()
            .map(|(p, w)| {
                selected
                    .iter()
                    .copied()
                    .find(|s| s.product() == p && s.warehouse() == w)
                    .ok_or_else(|| demandcast_core::Error::Alignment {
                        message: format!(
                            "model {label} forecasts ({p}, {w}) which is not in the evaluation data"
                        ),
                    })
            })
            .collect::<demandcast_core::Result<_>>()?;
        let forecasts = forecast_with_model(&model, &bundles)?;
        for (bundle, fc) in bundles.iter().zip(&forecasts) {
            rows.push(ProductEval {
                product: bundle.product().clone(),
                warehouse: bundle.warehouse().clone(),
                category: bundle.category.clone(),
                model: label.clone(),
                errors: lookahead_errors(&fc.forecasts, &fc.actuals)?,
            });
        }
    }

    write_evaluation_csv(ctx.out_dir.join("evaluation.csv"), ctx.master_seed, &rows)?;
    let summary = summarize(&rows)?;
    write_summary_csv(ctx.out_dir.join("summary.csv"), ctx.master_seed, &summary)?;
    let boxes = boxplots_by_model(&rows)?;
    write_boxplot_csv(ctx.out_dir.join("boxplot.csv"), ctx.master_seed, &boxes)?;

    // One comparison figure per category and metric, plus the box plots.
    let categories: BTreeSet<String> = summary.iter().map(|r| r.category.clone()).collect();
    for category in &categories {
        let rows_of = |f: &dyn Fn(&demandcast_core::eval::SummaryRow) -> f64| {
            summary
                .iter()
                .filter(|r| &r.category == category)
                .map(|r| (r.model.clone(), f(r)))
                .collect::<Vec<_>>()
        };
        let mae_items = rows_of(&|r| r.overall_mean_mae);
        let mmape_items = rows_of(&|r| r.mean_mmape);
        std::fs::write(
            ctx.out_dir.join(format!("comparison_mae_{category}.svg")),
            plot::bar_chart(
                ctx.master_seed,
                &format!("Overall mean MAE ({category})"),
                "overall mean MAE",
                &mae_items,
            ),
        )
        .context("writing MAE figure")?;
        std::fs::write(
            ctx.out_dir.join(format!("comparison_mmape_{category}.svg")),
            plot::bar_chart(
                ctx.master_seed,
                &format!("Mean mMAPE ({category})"),
                "mean mMAPE",
                &mmape_items,
            ),
        )
        .context("writing mMAPE figure")?;
        let box_items: Vec<(String, demandcast_core::eval::BoxPlotStats)> = boxes
            .iter()
            .filter(|(_, cat, _)| cat == category)
            .map(|(model, _, stats)| (model.clone(), stats.clone()))
            .collect();
        std::fs::write(
            ctx.out_dir.join(format!("boxplot_{category}.svg")),
            plot::box_plot(
                ctx.master_seed,
                &format!("Per-product mean mMAPE ({category})"),
                &box_items,
            ),
        )
        .context("writing box-plot figure")?;
    }

    for row in summary.iter().filter(|r| r.category == "all") {
        eprintln!(
            "{}: overall mean MAE {:.4}, mean mMAPE {:.4}",
            row.model, row.overall_mean_mae, row.mean_mmape
        );
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use demandcast_core::experiments::{
    run_feature_search, run_parallel, run_pretrain, run_single, ExperimentVariant, FeatureSet,
    SeriesBundle, SingleRun,
};
use demandcast_core::nn::{EpochStats, TrainedModel};

use crate::run::{series_slug, RunContext};
use crate::UsageError;

fn write_history(path: &Path, seed: u64, history: &[EpochStats]) -> Result<()> {
    let mut out = format!("# master_seed={seed}\n");
    out.push_str("epoch,train_loss,val_loss\n");
    for e in history {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn save_outputs(ctx: &RunContext, slug: &str, model: &TrainedModel) -> Result<()> {
    let models_dir = ctx.out_dir.join("models");
    std::fs::create_dir_all(&models_dir)
        .with_context(|| format!("creating {}", models_dir.display()))?;
    model.save(models_dir.join(format!("{slug}.json")))?;
    // Scaler state as a standalone key-value file for forecast-time reuse.
    for (i, scaler) in model.scalers.iter().enumerate() {
        let name = if model.scalers.len() == 1 {
            format!("{slug}.scaler.txt")
        } else {
            format!("{slug}.{i}.scaler.txt")
        };
        scaler.save(models_dir.join(name))?;
    }
    write_history(
        &ctx.out_dir.join(format!("history_{slug}.csv")),
        ctx.master_seed,
        &model.history,
    )
}

fn report_run(slug: &str, run: &SingleRun) {
    eprintln!(
        "trained {slug}: best epoch {}, validation mMAPE {:.4}, test mean mMAPE {:.4}",
        run.model.best_epoch,
        run.val_mmape,
        run.errors.mean_mmape()
    );
}

pub fn train(ctx: &RunContext) -> Result<()> {
    let plan = ctx.plan()?;
    let base_config = ctx.model_config()?;
    let series = ctx.load_series()?;
    let selected = ctx.select_series(&series, &plan)?;
    ctx.ensure_out_dir()?;

    match plan.variant {
        ExperimentVariant::Univariate
        | ExperimentVariant::KnownOrders
        | ExperimentVariant::Single => {
            let features = match plan.variant {
                ExperimentVariant::Univariate => FeatureSet::univariate(),
                ExperimentVariant::KnownOrders => FeatureSet::known_orders(),
                ExperimentVariant::Single => plan.feature_set.clone(),
                _ => unreachable!(),
            };
            let runs: Vec<(String, SingleRun)> = selected
                .par_iter()
                .map(|s| {
                    let mut cfg = base_config.clone();
                    cfg.rng_seed = ctx.series_seed(s);
                    let run = run_single(s, &features, &cfg, ctx.master_seed)?;
                    Ok((series_slug(s), run))
                })
                .collect::<demandcast_core::Result<_>>()?;
            for (slug, run) in &runs {
                save_outputs(ctx, slug, &run.model)?;
                report_run(slug, run);
            }
        }
        ExperimentVariant::FeatureSearch => {
            let owned: Vec<SeriesBundle> = selected.iter().map(|s| (*s).clone()).collect();
            let result =
                run_feature_search(&owned, &plan.candidates, &base_config, ctx.master_seed)?;
            let mut out = format!("# master_seed={}\n", ctx.master_seed);
            out.push_str("category,feature_set,val_mmape,best\n");
            for row in &result.table {
                let is_best = result.best[&row.category].name == row.feature_set;
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.category,
                    row.feature_set,
                    row.score,
                    if is_best { 1 } else { 0 }
                ));
            }
            let path = ctx.out_dir.join("feature_search.csv");
            std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
            for (category, set) in &result.best {
                eprintln!("best feature space for {category}: {}", set.name);
            }
            // Train and persist the per-category winners.
            let runs: Vec<(String, SingleRun)> = selected
                .par_iter()
                .map(|s| {
                    let features = result.best.get(&s.category).cloned().unwrap_or_else(|| {
                        result.best.values().next().expect("non-empty").clone()
                    });
                    let mut cfg = base_config.clone();
                    cfg.rng_seed = ctx.series_seed(s);
                    let run = run_single(s, &features, &cfg, ctx.master_seed)?;
                    Ok((series_slug(s), run))
                })
                .collect::<demandcast_core::Result<_>>()?;
            for (slug, run) in &runs {
                save_outputs(ctx, slug, &run.model)?;
                report_run(slug, run);
            }
        }
        ExperimentVariant::Pretrain => {
            // Related series: same product, other warehouses.
            let mut by_product: BTreeMap<&demandcast_core::ProductId, Vec<&SeriesBundle>> =
                BTreeMap::new();
            for s in &selected {
                by_product.entry(s.product()).or_default().push(s);
            }
            for (product, group) in by_product {
                if group.len() < 2 {
                    eprintln!(
                        "warning: {product} has a single warehouse; pretraining degenerates to plain training"
                    );
                }
                for (i, target) in group.iter().enumerate() {
                    let related: Vec<&SeriesBundle> = group
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, s)| *s)
                        .collect();
                    let mut cfg = base_config.clone();
                    cfg.rng_seed = ctx.series_seed(target);
                    let pre = run_pretrain(
                        target,
                        &related,
                        &plan.feature_set,
                        &cfg,
                        plan.spearman_threshold,
                        ctx.master_seed,
                    )?;
                    let slug = series_slug(target);
                    if pre.fallback {
                        eprintln!(
                            "warning: no related series passed the correlation gate for {slug}; trained plainly"
                        );
                    } else {
                        eprintln!("pretrained {slug} on {} related series", pre.related_used);
                    }
                    save_outputs(ctx, &slug, &pre.run.model)?;
                    report_run(&slug, &pre.run);
                }
            }
        }
        ExperimentVariant::Parallel => {
            if selected.len() < 2 {
                return Err(UsageError(
                    "parallel forecasting needs at least 2 products".into(),
                )
                .into());
            }
            let mut cfg = base_config.clone();
            cfg.rng_seed = ctx.master_seed;
            let run = run_parallel(&selected, &plan.feature_set, &cfg, ctx.master_seed)?;
            save_outputs(ctx, "parallel", &run.model)?;
            for (s, errors) in selected.iter().zip(&run.errors) {
                eprintln!(
                    "parallel {}: test mean mMAPE {:.4}",
                    series_slug(s),
                    errors.mean_mmape()
                );
            }
        }
    }
    Ok(())
}

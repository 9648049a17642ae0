use anyhow::{Context, Result};

use demandcast_core::pipeline::{split_windows, MinMaxScaler};
use demandcast_core::tune::{
    random_search, write_tuning_csv, SearchSpace, TuneData, DEFAULT_N_TRIALS,
};

use crate::run::{series_slug, RunContext};
use crate::UsageError;

/// The full grid, optionally narrowed by `space_*` config keys.
fn search_space(ctx: &RunContext) -> Result<SearchSpace> {
    let mut space = SearchSpace::default();
    let usize_list = |key: &str| -> Result<Option<Vec<usize>>> {
        let raw = ctx.kv.get_list(key);
        if raw.is_empty() {
            return Ok(None);
        }
        raw.iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| UsageError(format!("bad `{key}` entry `{s}`")).into())
            })
            .collect::<Result<Vec<usize>>>()
            .map(Some)
    };
    if let Some(v) = usize_list("space_lstm_units")? {
        space.lstm_units = v;
    }
    if let Some(v) = usize_list("space_dense_layers")? {
        space.n_dense_layers = v;
    }
    if let Some(v) = usize_list("space_dense_units")? {
        space.dense_units = v;
    }
    let rates = ctx.kv.get_f64_list("space_dropout_rates")?;
    if !rates.is_empty() {
        space.dropout_rates = rates;
    }
    let lrs = ctx.kv.get_f64_list("space_learning_rates")?;
    if !lrs.is_empty() {
        space.learning_rates = lrs;
    }
    Ok(space)
}

pub fn tune(ctx: &RunContext) -> Result<()> {
    let plan = ctx.plan()?;
    let n_trials: usize = ctx.kv.get_or("n_trials", DEFAULT_N_TRIALS)?;
    let series = ctx.load_series()?;
    let selected = ctx.select_series(&series, &plan)?;
    ctx.ensure_out_dir()?;
    let space = search_space(ctx)?;

    for bundle in selected {
        let slug = series_slug(bundle);
        let selected_matrix = bundle.matrix.select_columns(&plan.feature_set.columns)?;
        let scaler = MinMaxScaler::fit(&selected_matrix, bundle.split.train.clone())?;
        let scaled = scaler.transform_matrix(&selected_matrix)?;
        let (train_w, val_w, _) = split_windows(
            &scaled,
            &bundle.split,
            demandcast_core::INPUT_WINDOW,
            demandcast_core::HORIZON,
        );
        let data = TuneData {
            train: &train_w,
            validation: &val_w,
            scaler: &scaler,
        };
        let series_seed = ctx.series_seed(bundle);
        let outcome = random_search(&data, &space, n_trials, series_seed)?;
        write_tuning_csv(
            ctx.out_dir.join(format!("tuning_{slug}.csv")),
            ctx.master_seed,
            &outcome,
        )?;

        let best = outcome.best();
        let mut cfg_out = format!(
            "# best of {n_trials} trials for {slug}: trial {} with validation mMAPE {}\n",
            best.trial_id, best.validation_score
        );
        cfg_out.push_str(&format!("lstm_units = {}\n", best.config.lstm_units));
        cfg_out.push_str(&format!(
            "dense_units = {}\n",
            best.config
                .dense_units
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ));
        cfg_out.push_str(&format!(
            "dropout = {}\n",
            best.config
                .dropout_enabled
                .iter()
                .map(|&e| if e { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
        ));
        cfg_out.push_str(&format!("dropout_rate = {}\n", best.config.dropout_rate));
        cfg_out.push_str(&format!("learning_rate = {}\n", best.config.learning_rate));
        cfg_out.push_str(&format!("seed = {}\n", ctx.master_seed));
        let path = ctx.out_dir.join(format!("best_config_{slug}.cfg"));
        std::fs::write(&path, cfg_out)
            .with_context(|| format!("writing {}", path.display()))?;

        eprintln!(
            "tuned {slug}: {} ranked trials, {} diverged, best validation mMAPE {:.4}",
            outcome.ranked.len(),
            outcome.diverged.len(),
            best.validation_score,
        );
    }
    Ok(())
}

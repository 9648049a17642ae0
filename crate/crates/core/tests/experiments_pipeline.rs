//! End-to-end pipeline tests on generated data: ingest, preparation,
//! the experiment ladder, and the benchmark glue.

use demandcast_core::baselines::{run_baseline, BaselineKind};
use demandcast_core::experiments::{
    forecast_with_model, prepare_series, run_feature_search, run_parallel, run_pretrain,
    run_single, run_univariate, FeatureSet, SeriesBundle,
};
use demandcast_core::ingest::{load_holiday_csv, load_metadata_csv, load_sales_csv};
use demandcast_core::nn::ModelConfig;
use demandcast_core::synthgen::{generate, SynthConfig};
use demandcast_core::{StoreCalendar, TrainedModel};

fn fast_config(seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::reference(seed);
    cfg.lstm_units = 10;
    cfg.dense_units = vec![10];
    cfg.dropout_enabled = vec![false];
    cfg.learning_rate = 1e-2;
    cfg.max_epochs = 12;
    cfg
}

fn prepare(cfg: &SynthConfig) -> Vec<SeriesBundle> {
    let dir = tempfile::tempdir().unwrap();
    let files = generate(cfg, dir.path()).unwrap();
    let table = load_sales_csv(&files.sales).unwrap();
    let holidays = load_holiday_csv(&files.holidays).unwrap();
    let meta = load_metadata_csv(&files.metadata).unwrap();
    let (start, end) = table.date_range().unwrap();
    let cal = StoreCalendar::new(start, end + chrono::Duration::days(14), holidays).unwrap();
    prepare_series(&table, &cal, &meta).unwrap()
}

fn noise_free_config(n_products: usize, seed: u64) -> SynthConfig {
    let mut cfg = SynthConfig::default_for(n_products, 1, seed);
    cfg.noise_dispersion = 0.0;
    cfg.yearly_amplitude = 0.0;
    cfg.promo_probability = 0.0;
    cfg.missing_price_probability = 0.0;
    cfg.n_beverages = 0;
    cfg
}

#[test]
fn prepared_series_have_24_3_2_splits_and_categories() {
    let mut cfg = SynthConfig::default_for(2, 1, 3);
    cfg.n_beverages = 1;
    let series = prepare(&cfg);
    assert_eq!(series.len(), 2);
    let categories: Vec<&str> = series.iter().map(|s| s.category.as_str()).collect();
    assert!(categories.contains(&"food"));
    assert!(categories.contains(&"beverages"));
    for s in &series {
        assert_eq!(s.split.train.start, 0);
        assert!(s.split.train.len() > s.split.validation.len());
        assert!(s.split.validation.len() > s.split.test.len());
        assert_eq!(s.split.test.end, s.matrix.n_rows());
        // 24 months of six-day weeks is roughly 620 open days.
        assert!(s.split.train.len() > 550 && s.split.train.len() < 640);
    }
}

#[test]
fn univariate_run_beats_mpq_on_noise_free_weekly_data() {
    let series = prepare(&noise_free_config(1, 5));
    let run = run_univariate(&series[0], &fast_config(17), 17).unwrap();

    // Univariate means exactly one input feature.
    assert_eq!(run.model.feature_columns.len(), 1);
    assert_eq!(run.model.params.input_dim(), 1);
    // The report resolves all six lookaheads.
    assert_eq!(run.errors.mae.len(), 6);
    assert_eq!(run.errors.mmape.len(), 6);

    let mpq = run_baseline(
        BaselineKind::Mpq,
        &series[0].matrix,
        &series[0].split,
        36,
        6,
        17,
    )
    .unwrap();
    assert_eq!(mpq.origin_rows, run.test.origin_rows);
    let mpq_errors = demandcast_core::eval::lookahead_errors(
        &mpq.forecasts,
        &run.test.actuals,
    )
    .unwrap();
    // Weekly seasonality is learnable from 36-day windows; a flat median
    // forecast cannot track it.
    assert!(
        run.errors.mean_mmape() < mpq_errors.mean_mmape(),
        "lstm {} vs mpq {}",
        run.errors.mean_mmape(),
        mpq_errors.mean_mmape()
    );
}

#[test]
fn trained_model_round_trips_through_its_file() {
    let series = prepare(&noise_free_config(1, 7));
    let run = run_single(&series[0], &FeatureSet::known_orders(), &fast_config(7), 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    run.model.save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    assert_eq!(loaded, run.model);

    // The loaded model forecasts identically.
    let again = forecast_with_model(&loaded, &[&series[0]]).unwrap();
    assert_eq!(again[0].forecasts, run.test.forecasts);
}

#[test]
fn model_file_version_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"format_version\": 99}").unwrap();
    assert!(TrainedModel::load(&path).is_err());
}

#[test]
fn parallel_run_on_substitutes_reports_both_products_from_one_model() {
    // Promotion on one partner shifts demand away from the other; the
    // parallel model forecasts both from a single parameter set.
    let mut cfg = noise_free_config(2, 9);
    cfg.promo_probability = 0.15;
    cfg.substitution_pairs = vec![(0, 1, 0.4)];
    let series = prepare(&cfg);
    let refs: Vec<&SeriesBundle> = series.iter().collect();
    let run = run_parallel(&refs, &FeatureSet::full(), &fast_config(9), 9).unwrap();
    assert_eq!(run.model.params.output_dim(), 12);
    assert_eq!(run.model.n_series(), 2);
    assert_eq!(run.per_series.len(), 2);
    assert_eq!(run.errors.len(), 2);
    for errors in &run.errors {
        assert_eq!(errors.mae.len(), 6);
    }
}

#[test]
fn parallel_run_targets_match_the_standard_pipeline() {
    let cfg = noise_free_config(2, 9);
    let series = prepare(&cfg);
    let refs: Vec<&SeriesBundle> = series.iter().collect();
    let run = run_parallel(&refs, &FeatureSet::univariate(), &fast_config(9), 9).unwrap();
    assert_eq!(run.model.params.output_dim(), 12);
    // Each product's actual targets equal the standard pipeline's.
    let single = run_single(&series[0], &FeatureSet::univariate(), &fast_config(9), 9).unwrap();
    assert_eq!(run.per_series[0].actuals, single.test.actuals);
    assert_eq!(run.per_series[0].origin_rows, single.test.origin_rows);
}

#[test]
fn parallel_run_with_one_product_reduces_to_the_standard_model() {
    let series = prepare(&noise_free_config(1, 11));
    let refs: Vec<&SeriesBundle> = series.iter().collect();
    let cfg = fast_config(11);
    let parallel = run_parallel(&refs, &FeatureSet::univariate(), &cfg, 11).unwrap();
    let single = run_univariate(&series[0], &cfg, 11).unwrap();
    assert_eq!(parallel.model.params, single.model.params);
    assert_eq!(parallel.per_series[0].forecasts, single.test.forecasts);
}

#[test]
fn pretrain_with_impossible_threshold_falls_back_to_plain_training() {
    let mut cfg = SynthConfig::default_for(1, 2, 13);
    cfg.missing_price_probability = 0.0;
    let series = prepare(&cfg);
    assert_eq!(series.len(), 2);
    let (target, related) = (&series[0], &series[1]);
    let model_cfg = fast_config(13);

    let pre = run_pretrain(
        target,
        &[related],
        &FeatureSet::univariate(),
        &model_cfg,
        1.01,
        13,
    )
    .unwrap();
    assert!(pre.fallback);
    assert_eq!(pre.related_used, 0);

    // Fallback output is identical to a plain run with the same seed.
    let plain = run_univariate(target, &model_cfg, 13).unwrap();
    assert_eq!(pre.run.model.params, plain.model.params);
    assert_eq!(pre.run.test.forecasts, plain.test.forecasts);
}

#[test]
fn pretrain_uses_correlated_warehouses_and_respects_epoch_caps() {
    // Two warehouses of the same product share profile and promo days, so
    // the rank correlation passes the default gate.
    let mut cfg = SynthConfig::default_for(1, 2, 15);
    cfg.missing_price_probability = 0.0;
    let series = prepare(&cfg);
    let (target, related) = (&series[0], &series[1]);
    let model_cfg = fast_config(15);
    let pre = run_pretrain(
        target,
        &[related],
        &FeatureSet::univariate(),
        &model_cfg,
        0.2,
        15,
    )
    .unwrap();
    assert!(!pre.fallback);
    assert_eq!(pre.related_used, 1);
    // Phase-2 history obeys the configured epoch cap.
    assert!(pre.run.model.history.len() <= model_cfg.max_epochs);
    assert!(pre.run.model.best_epoch >= 1);
}

#[test]
fn feature_search_single_candidate_is_returned_as_best() {
    let series = prepare(&noise_free_config(1, 19));
    let result = run_feature_search(
        &series,
        &[FeatureSet::univariate()],
        &fast_config(19),
        19,
    )
    .unwrap();
    assert_eq!(result.table.len(), 1);
    assert_eq!(result.best.len(), 1);
    assert_eq!(result.best["food"].name, "univariate");
}

#[test]
fn feature_search_prefers_known_orders_when_they_carry_signal() {
    // Known orders reveal the current day's demand; with autocorrelated
    // noise that is genuine predictive signal the univariate set lacks.
    let mut cfg = SynthConfig::default_for(1, 1, 23);
    cfg.n_beverages = 0;
    cfg.missing_price_probability = 0.0;
    cfg.known_orders_fraction = 1.0;
    cfg.noise_dispersion = 0.2;
    cfg.noise_autocorr = 0.7;
    let series = prepare(&cfg);
    let candidates = vec![FeatureSet::univariate(), FeatureSet::known_orders()];
    let mut model_cfg = fast_config(23);
    model_cfg.max_epochs = 20;
    let result = run_feature_search(&series, &candidates, &model_cfg, 23).unwrap();
    assert_eq!(result.table.len(), 2);
    let score = |name: &str| {
        result
            .table
            .iter()
            .find(|r| r.feature_set == name)
            .unwrap()
            .score
    };
    assert!(
        score("known_orders") < score("univariate"),
        "known_orders {} vs univariate {}",
        score("known_orders"),
        score("univariate")
    );
    assert_eq!(result.best["food"].name, "known_orders");
}

#[test]
fn baselines_run_at_the_shared_test_origins() {
    let series = prepare(&noise_free_config(1, 29));
    let bundle = &series[0];
    let selected = bundle
        .matrix
        .select_columns(&FeatureSet::known_orders().columns)
        .unwrap();
    for kind in BaselineKind::ALL {
        let out = run_baseline(kind, &selected, &bundle.split, 36, 6, 29).unwrap();
        assert_eq!(out.kind, kind);
        assert!(!out.origin_rows.is_empty());
        assert_eq!(out.forecasts.len(), out.origin_rows.len());
        for fc in &out.forecasts {
            assert_eq!(fc.len(), 6);
            assert!(fc.iter().all(|&v| v >= 0.0));
        }
        match kind {
            BaselineKind::Ets => assert!(out.alpha.is_some()),
            BaselineKind::LassoRegression => {
                assert_eq!(out.lambdas.as_ref().unwrap().len(), 6)
            }
            _ => {}
        }
    }
}

#[test]
fn lasso_and_forest_track_noise_free_weekly_demand_closely() {
    let series = prepare(&noise_free_config(1, 31));
    let bundle = &series[0];
    let selected = bundle
        .matrix
        .select_columns(&FeatureSet::full().columns)
        .unwrap();
    for kind in [BaselineKind::LassoRegression, BaselineKind::RandomForest] {
        let out = run_baseline(kind, &selected, &bundle.split, 36, 6, 31).unwrap();
        let actuals: Vec<Vec<f64>> = out
            .origin_rows
            .iter()
            .map(|&r| bundle.matrix.targets[r + 1..=r + 6].to_vec())
            .collect();
        let errors = demandcast_core::eval::lookahead_errors(&out.forecasts, &actuals).unwrap();
        // Day-of-week one-hots fully determine noise-free demand.
        assert!(
            errors.mean_mmape() < 0.05,
            "{:?} mean mMAPE {}",
            kind,
            errors.mean_mmape()
        );
    }
}

//! End-to-end tests of the `demandcast` binary: every subcommand, the
//! exit-code contract, output schemas, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_demandcast")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Workspace { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn path_str(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn write_config(&self, name: &str, content: &str) -> String {
        let path = self.path(name);
        std::fs::write(&path, content).unwrap();
        path.display().to_string()
    }

    /// Generate a small 2-product dataset and return a run config that
    /// points at it with a fast on-grid model.
    fn synth_small(&self) -> String {
        let synth_cfg = self.write_config(
            "synth.cfg",
            "n_products = 2\nn_warehouses = 1\nmonths = 29\nn_beverages = 1\nseed = 11\nmissing_price_probability = 0\n",
        );
        let data = self.path_str("data");
        assert_ok(&run(&["synth", "--config", &synth_cfg, "--out", &data]));
        self.write_config(
            "run.cfg",
            &format!(
                concat!(
                    "sales = {data}/sales.csv\n",
                    "holidays = {data}/holidays.csv\n",
                    "metadata = {data}/products.csv\n",
                    "variant = known_orders\n",
                    "lstm_units = 10\n",
                    "dense_units = 10\n",
                    "learning_rate = 0.01\n",
                    "seed = 11\n",
                ),
                data = data
            ),
        )
    }
}

#[test]
fn synth_writes_three_files_and_is_deterministic() {
    let ws = Workspace::new();
    let cfg = ws.write_config("synth.cfg", "n_products = 1\nmonths = 28\nseed = 5\n");
    let out_a = ws.path_str("a");
    let out_b = ws.path_str("b");
    assert_ok(&run(&["synth", "--config", &cfg, "--out", &out_a]));
    assert_ok(&run(&["synth", "--config", &cfg, "--out", &out_b]));
    for name in ["sales.csv", "holidays.csv", "products.csv"] {
        let a = read(&ws.path("a").join(name));
        let b = read(&ws.path("b").join(name));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let sales = read(&ws.path("a").join("sales.csv"));
    assert!(sales.starts_with("# master_seed=5\n"));
    assert!(sales
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("date,product_id,warehouse_id,demand,price,promotion,known_orders"));
}

#[test]
fn missing_config_file_exits_with_usage_code() {
    let out = run(&["synth", "--config", "/nonexistent/path.cfg"]);
    assert_eq!(exit_code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn invalid_synth_config_exits_with_usage_code() {
    let ws = Workspace::new();
    let cfg = ws.write_config("synth.cfg", "n_products = 0\n");
    let out = run(&["synth", "--config", &cfg, "--out", &ws.path_str("x")]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn train_writes_model_and_history_with_bounded_epochs() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let out_dir = ws.path_str("run");
    assert_ok(&run(&["train", "--config", &cfg, "--out", &out_dir]));

    for slug in ["P001_W1", "P002_W1"] {
        let model_path = ws.path("run").join("models").join(format!("{slug}.json"));
        assert!(model_path.exists(), "missing {}", model_path.display());
        let scaler_path = ws.path("run").join("models").join(format!("{slug}.scaler.txt"));
        assert!(scaler_path.exists());

        let history = read(&ws.path("run").join(format!("history_{slug}.csv")));
        let mut lines = history.lines();
        assert_eq!(lines.next().unwrap(), "# master_seed=11");
        assert_eq!(lines.next().unwrap(), "epoch,train_loss,val_loss");
        let rows = data_rows(&history);
        assert!(!rows.is_empty() && rows.len() <= 70, "{} epochs", rows.len());
    }
}

#[test]
fn unknown_feature_set_exits_with_usage_code() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let bad = ws.write_config("bad.cfg", &format!("{}\nvariant = single\nfeature_set = bogus\n", read(Path::new(&cfg))));
    let out = run(&["train", "--config", &bad, "--out", &ws.path_str("run")]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn tune_writes_requested_trials_and_is_deterministic() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let tune_cfg = ws.write_config(
        "tune.cfg",
        &format!(
            concat!(
                "{base}\n",
                "products = P001\n",
                "n_trials = 3\n",
                "space_lstm_units = 10\n",
                "space_dense_layers = 1\n",
                "space_dense_units = 10\n",
                "space_learning_rates = 0.01\n",
            ),
            base = read(Path::new(&cfg))
        ),
    );
    let out_a = ws.path_str("tune_a");
    let out_b = ws.path_str("tune_b");
    assert_ok(&run(&["tune", "--config", &tune_cfg, "--out", &out_a]));
    assert_ok(&run(&["tune", "--config", &tune_cfg, "--out", &out_b]));

    let csv_a = read(&ws.path("tune_a").join("tuning_P001_W1.csv"));
    let csv_b = read(&ws.path("tune_b").join("tuning_P001_W1.csv"));
    assert_eq!(csv_a, csv_b, "tuning runs with one seed must match");
    let rows = data_rows(&csv_a);
    assert_eq!(rows.len(), 3);
    assert!(csv_a.contains(
        "trial_id,seed,lstm_units,n_dense_layers,dense_units,dropout_flags,dropout_rate,learning_rate,val_mmape,best_epoch"
    ));

    // The best-config file holds on-grid values usable as a train config.
    let best = read(&ws.path("tune_a").join("best_config_P001_W1.cfg"));
    let lstm_units: usize = best
        .lines()
        .find_map(|l| l.strip_prefix("lstm_units = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(lstm_units % 10 == 0 && (10..=100).contains(&lstm_units));
    let lr: f64 = best
        .lines()
        .find_map(|l| l.strip_prefix("learning_rate = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!([1e-2, 1e-3, 1e-4].iter().any(|&g| (lr - g).abs() < 1e-12));
}

#[test]
fn evaluate_baselines_and_model_summarizes_six_models_per_category() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let run_dir = ws.path_str("run");
    assert_ok(&run(&["train", "--config", &cfg, "--out", &run_dir]));

    let models = format!(
        "ets,mpq,mdpq,lr,rf,{}",
        ws.path("run").join("models").join("P001_W1.json").display()
    );
    let eval_dir = ws.path_str("eval");
    assert_ok(&run(&[
        "evaluate", "--config", &cfg, "--out", &eval_dir, "--models", &models,
    ]));

    let summary = read(&ws.path("eval").join("summary.csv"));
    let rows = data_rows(&summary);
    // The trained model covers P001 (beverages); baselines cover both
    // categories. Every category block lists each model that ran on it.
    let count = |category: &str| {
        rows.iter()
            .filter(|r| r.split(',').nth(1) == Some(category))
            .count()
    };
    assert_eq!(count("all"), 6);
    assert_eq!(count("beverages"), 6);
    assert_eq!(count("food"), 5);

    let evaluation = read(&ws.path("eval").join("evaluation.csv"));
    assert!(evaluation
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("product_id,category,model,lookahead,mae,mmape"));
    // 6 lookahead rows per (series, model): 2 series x 5 baselines + 1 LSTM.
    assert_eq!(data_rows(&evaluation).len(), 6 * (2 * 5 + 1));

    for name in [
        "boxplot.csv",
        "comparison_mae_all.svg",
        "comparison_mmape_all.svg",
        "boxplot_all.svg",
    ] {
        assert!(ws.path("eval").join(name).exists(), "missing {name}");
    }
}

#[test]
fn evaluate_oracle_model_has_zero_errors() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let eval_dir = ws.path_str("eval");
    assert_ok(&run(&[
        "evaluate", "--config", &cfg, "--out", &eval_dir, "--models", "oracle",
    ]));
    let evaluation = read(&ws.path("eval").join("evaluation.csv"));
    for row in data_rows(&evaluation) {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[5].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn forecast_emits_six_nonnegative_rows_per_series() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let run_dir = ws.path_str("run");
    assert_ok(&run(&["train", "--config", &cfg, "--out", &run_dir]));

    let models_dir = ws.path("run").join("models").display().to_string();
    let fc_dir = ws.path_str("fc");
    assert_ok(&run(&[
        "forecast", "--config", &cfg, "--out", &fc_dir, "--model", &models_dir,
    ]));

    let forecast = read(&ws.path("fc").join("forecast.csv"));
    assert!(forecast
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("product_id,warehouse_id,origin_date,lookahead,forecast"));
    let rows = data_rows(&forecast);
    assert_eq!(rows.len(), 2 * 6);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        let lookahead: usize = fields[3].parse().unwrap();
        assert!((1..=6).contains(&lookahead));
        assert!(fields[4].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn forecast_with_bad_origin_exits_with_usage_code() {
    let ws = Workspace::new();
    let cfg = ws.synth_small();
    let run_dir = ws.path_str("run");
    assert_ok(&run(&["train", "--config", &cfg, "--out", &run_dir]));
    let models_dir = ws.path("run").join("models").display().to_string();
    // A Sunday is never a working day.
    let out = run(&[
        "forecast",
        "--config",
        &cfg,
        "--out",
        &ws.path_str("fc"),
        "--model",
        &models_dir,
        "--origin",
        "2021-01-10",
    ]);
    assert_eq!(exit_code(&out), 2);
}

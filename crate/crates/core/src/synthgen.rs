//! Seeded synthetic retail-demand generator.
//!
//! Stands in for the proprietary warehouse data: it emits the exact CSV
//! schemas the ingest stage consumes, with the statistical structure the
//! forecasting models exploit. Demand for one series on open day `d` is
//!
//! ```text
//! demand(d) = round(base * weekly[weekday] * (1 + A sin(2 pi doy / 365))
//!                   * promo_lift(d) * noise(d))
//! ```
//!
//! where `noise` is a unit-mean gamma-innovation AR(1) process whose
//! stationary dispersion is `noise_dispersion` and whose autocorrelation
//! `noise_autocorr` makes recent demand genuinely informative about the
//! next days, the way real demand series persist. Substitution pairs
//! shift demand between partners while exactly one of them is promoted.
//! Store closures follow a German-style public-holiday list; closed days
//! produce no rows at all.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, Months, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::calendar::WORKING_WEEK;
use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// Generator configuration. `base_demand` has one entry per product; the
/// first `n_beverages` products form the high-volume `beverages` category,
/// the rest are `food`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_products: usize,
    pub n_warehouses: usize,
    pub months: u32,
    pub start_date: NaiveDate,
    pub base_demand: Vec<f64>,
    pub n_beverages: usize,
    /// Monday..Saturday demand multipliers.
    pub weekly_profile: [f64; WORKING_WEEK],
    pub yearly_amplitude: f64,
    pub promo_probability: f64,
    /// Fractional price cut while promoted.
    pub promo_price_drop: f64,
    /// Demand multiplier while promoted.
    pub promo_demand_lift: f64,
    /// Share of demand already ordered and visible at prediction time.
    pub known_orders_fraction: f64,
    pub noise_dispersion: f64,
    /// AR(1) coefficient of the demand noise, in [0, 1).
    pub noise_autocorr: f64,
    /// Dispersion of the multiplicative noise on known orders; 0 makes
    /// them an exact fraction of demand.
    pub order_noise_dispersion: f64,
    pub missing_price_probability: f64,
    /// `(product index, product index, strength)` substitution pairs.
    pub substitution_pairs: Vec<(usize, usize, f64)>,
    pub seed: u64,
}

pub const DEFAULT_WEEKLY_PROFILE: [f64; WORKING_WEEK] = [0.80, 0.90, 0.95, 1.00, 1.20, 1.15];

impl SynthConfig {
    /// Sensible defaults for `n` products in `w` warehouses: a quarter of
    /// the assortment beverage-like with larger base volumes.
    pub fn default_for(n_products: usize, n_warehouses: usize, seed: u64) -> Self {
        let n_beverages = n_products / 4;
        let base_demand = (0..n_products)
            .map(|p| {
                if p < n_beverages {
                    180.0 + 55.0 * (p % 7) as f64
                } else {
                    60.0 + 25.0 * (p % 7) as f64
                }
            })
            .collect();
        SynthConfig {
            n_products,
            n_warehouses,
            months: 29,
            start_date: NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date"),
            base_demand,
            n_beverages,
            weekly_profile: DEFAULT_WEEKLY_PROFILE,
            yearly_amplitude: 0.10,
            promo_probability: 0.03,
            promo_price_drop: 0.25,
            promo_demand_lift: 1.8,
            known_orders_fraction: 0.8,
            noise_dispersion: 0.15,
            noise_autocorr: 0.9,
            order_noise_dispersion: 0.0,
            missing_price_probability: 0.01,
            substitution_pairs: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_products == 0 || self.n_warehouses == 0 {
            return Err(Error::config("need at least one product and warehouse"));
        }
        if self.months < 28 {
            return Err(Error::config(format!(
                "months must be at least 28 for a 24/3/2 split, got {}",
                self.months
            )));
        }
        if self.base_demand.len() != self.n_products {
            return Err(Error::config(format!(
                "base_demand has {} entries for {} products",
                self.base_demand.len(),
                self.n_products
            )));
        }
        if self.base_demand.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::config("base demand must be positive"));
        }
        if self.weekly_profile.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::config("weekly profile entries must be positive"));
        }
        for (name, p) in [
            ("promo_probability", self.promo_probability),
            ("known_orders_fraction", self.known_orders_fraction),
            ("promo_price_drop", self.promo_price_drop),
            ("missing_price_probability", self.missing_price_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.noise_dispersion < 0.0 || self.order_noise_dispersion < 0.0 {
            return Err(Error::config("noise dispersions must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.noise_autocorr) {
            return Err(Error::config("noise_autocorr must lie in [0, 1)"));
        }
        if self.n_beverages > self.n_products {
            return Err(Error::config("n_beverages exceeds n_products"));
        }
        for &(a, b, strength) in &self.substitution_pairs {
            if a >= self.n_products || b >= self.n_products || a == b {
                return Err(Error::config(format!(
                    "substitution pair ({a}, {b}) references invalid products"
                )));
            }
            if !(0.0..=1.0).contains(&strength) {
                return Err(Error::config("substitution strength must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn from_kv(kv: &KeyValueFile) -> Result<Self> {
        let n_products = kv.get_or("n_products", 10usize)?;
        let n_warehouses = kv.get_or("n_warehouses", 1usize)?;
        let seed = kv.get_or("seed", 42u64)?;
        let mut cfg = SynthConfig::default_for(n_products, n_warehouses, seed);
        cfg.months = kv.get_or("months", cfg.months)?;
        if let Some(raw) = kv.get("start_date") {
            cfg.start_date = raw
                .parse()
                .map_err(|_| Error::config(format!("bad start_date `{raw}`")))?;
        }
        let base = kv.get_f64_list("base_demand")?;
        if !base.is_empty() {
            cfg.base_demand = base;
        }
        cfg.n_beverages = kv.get_or("n_beverages", cfg.n_beverages)?;
        let profile = kv.get_f64_list("weekly_profile")?;
        if !profile.is_empty() {
            if profile.len() != WORKING_WEEK {
                return Err(Error::config(format!(
                    "weekly_profile needs {WORKING_WEEK} entries, got {}",
                    profile.len()
                )));
            }
            cfg.weekly_profile.copy_from_slice(&profile);
        }
        cfg.yearly_amplitude = kv.get_or("yearly_amplitude", cfg.yearly_amplitude)?;
        cfg.promo_probability = kv.get_or("promo_probability", cfg.promo_probability)?;
        cfg.promo_price_drop = kv.get_or("promo_price_drop", cfg.promo_price_drop)?;
        cfg.promo_demand_lift = kv.get_or("promo_demand_lift", cfg.promo_demand_lift)?;
        cfg.known_orders_fraction =
            kv.get_or("known_orders_fraction", cfg.known_orders_fraction)?;
        cfg.noise_dispersion = kv.get_or("noise_dispersion", cfg.noise_dispersion)?;
        cfg.noise_autocorr = kv.get_or("noise_autocorr", cfg.noise_autocorr)?;
        cfg.order_noise_dispersion =
            kv.get_or("order_noise_dispersion", cfg.order_noise_dispersion)?;
        cfg.missing_price_probability =
            kv.get_or("missing_price_probability", cfg.missing_price_probability)?;
        for spec in kv.get_list("substitution_pairs") {
            let parts: Vec<&str> = spec.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::config(format!(
                    "substitution pair `{spec}` must be `a:b:strength`"
                )));
            }
            let a: usize = parts[0]
                .parse()
                .map_err(|_| Error::config(format!("bad product index `{}`", parts[0])))?;
            let b: usize = parts[1]
                .parse()
                .map_err(|_| Error::config(format!("bad product index `{}`", parts[1])))?;
            let s: f64 = parts[2]
                .parse()
                .map_err(|_| Error::config(format!("bad strength `{}`", parts[2])))?;
            cfg.substitution_pairs.push((a, b, s));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn end_date(&self) -> NaiveDate {
        self.start_date
            .checked_add_months(Months::new(self.months))
            .expect("valid date range")
            .pred_opt()
            .expect("valid date")
    }

    pub fn product_id(&self, p: usize) -> String {
        format!("P{:03}", p + 1)
    }

    pub fn warehouse_id(&self, w: usize) -> String {
        format!("W{}", w + 1)
    }

    pub fn category(&self, p: usize) -> &'static str {
        if p < self.n_beverages {
            "beverages"
        } else {
            "food"
        }
    }
}

/// Gregorian Easter Sunday (anonymous Gauss algorithm).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("valid easter date")
}

/// German-style public holidays of one year (nationwide set).
pub fn german_holidays(year: i32) -> Vec<NaiveDate> {
    let easter = easter_sunday(year);
    let fixed = [
        (1, 1),   // New Year
        (5, 1),   // Labour Day
        (10, 3),  // German Unity
        (12, 25), // Christmas Day
        (12, 26), // Boxing Day
    ];
    let mut days: Vec<NaiveDate> = fixed
        .iter()
        .map(|&(m, d)| NaiveDate::from_ymd_opt(year, m, d).expect("valid date"))
        .collect();
    days.push(easter - Duration::days(2)); // Good Friday
    days.push(easter + Duration::days(1)); // Easter Monday
    days.push(easter + Duration::days(39)); // Ascension
    days.push(easter + Duration::days(50)); // Whit Monday
    days.sort();
    days
}

/// Holidays covering `[start, end]` plus a margin for the further-future
/// feature lookups past the series end.
pub fn holidays_for_span(start: NaiveDate, end: NaiveDate) -> BTreeSet<NaiveDate> {
    let margin_end = end + Duration::days(14);
    let mut out = BTreeSet::new();
    for year in start.year()..=margin_end.year() {
        for day in german_holidays(year) {
            if day >= start && day <= margin_end {
                out.insert(day);
            }
        }
    }
    out
}

/// Unit-mean gamma sampler; `None` when dispersion is zero.
fn gamma_noise(dispersion: f64) -> Option<Gamma<f64>> {
    if dispersion <= 0.0 {
        return None;
    }
    let var = dispersion * dispersion;
    Some(Gamma::new(1.0 / var, var).expect("valid gamma parameters"))
}

/// Files emitted by one generator run.
#[derive(Debug, Clone)]
pub struct GeneratedFiles {
    pub sales: PathBuf,
    pub holidays: PathBuf,
    pub metadata: PathBuf,
}

/// Generate the three CSVs into `dir`. Byte-identical for identical
/// configurations.
pub fn generate(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<GeneratedFiles> {
    config.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let start = config.start_date;
    let end = config.end_date();
    let holidays = holidays_for_span(start, end);

    // Open days of the span.
    let mut open_days: Vec<NaiveDate> = Vec::new();
    let mut day = start;
    while day <= end {
        if day.weekday() != Weekday::Sun && !holidays.contains(&day) {
            open_days.push(day);
        }
        day += Duration::days(1);
    }
    let n_days = open_days.len();
    let np = config.n_products;
    let nw = config.n_warehouses;

    // Promotion calendar per product, shared across warehouses.
    let promos: Vec<Vec<bool>> = (0..np)
        .map(|p| {
            let mut rng = rng_from_seed(derive_seed(config.seed, 1_000 + p as u64));
            (0..n_days)
                .map(|_| rng.gen::<f64>() < config.promo_probability)
                .collect()
        })
        .collect();

    // Raw (pre-substitution) demand per series. The noise is a unit-mean
    // gamma process: a Gaussian AR(1) driver pushed through the
    // Wilson-Hilferty cube transform, which realizes a gamma marginal
    // with the configured dispersion at any autocorrelation, so demand
    // shocks persist across days the way real series drift.
    let rho = config.noise_autocorr;
    let innovation_sd = (1.0 - rho * rho).sqrt();
    let cube = config.noise_dispersion * config.noise_dispersion / 9.0;
    let wh_gamma = |z: f64| -> f64 {
        let root = 1.0 - cube + z * cube.sqrt();
        (root * root * root).max(0.0)
    };
    let warehouse_factor = |w: usize| [1.0, 0.7, 1.3, 0.85, 1.15][w % 5];

    let mut raw = vec![vec![0.0f64; n_days]; np * nw];
    for p in 0..np {
        for w in 0..nw {
            let series = &mut raw[p * nw + w];
            let mut rng =
                rng_from_seed(derive_seed(config.seed, 2_000 + (p * nw + w) as u64));
            // Stationary start for the Gaussian driver.
            let mut z: f64 = rng.sample(rand_distr::StandardNormal);
            let base = config.base_demand[p] * warehouse_factor(w);
            for (t, &date) in open_days.iter().enumerate() {
                let noise = if config.noise_dispersion > 0.0 {
                    let eps: f64 = rng.sample(rand_distr::StandardNormal);
                    z = rho * z + innovation_sd * eps;
                    wh_gamma(z)
                } else {
                    1.0
                };
                let weekday = date.weekday().num_days_from_monday() as usize;
                let doy = date.ordinal() as f64;
                let seasonal =
                    1.0 + config.yearly_amplitude * (2.0 * std::f64::consts::PI * doy / 365.0).sin();
                let lift = if promos[p][t] {
                    config.promo_demand_lift
                } else {
                    1.0
                };
                series[t] = base * config.weekly_profile[weekday] * seasonal * lift * noise;
            }
        }
    }

    // Substitution: while exactly one partner is promoted, part of the
    // other partner's demand moves to it.
    for w in 0..nw {
        for t in 0..n_days {
            for &(a, b, strength) in &config.substitution_pairs {
                let (ia, ib) = (a * nw + w, b * nw + w);
                if promos[a][t] && !promos[b][t] {
                    let shift = strength * raw[ib][t];
                    raw[ia][t] += shift;
                    raw[ib][t] -= shift;
                } else if promos[b][t] && !promos[a][t] {
                    let shift = strength * raw[ia][t];
                    raw[ib][t] += shift;
                    raw[ia][t] -= shift;
                }
            }
        }
    }

    let order_noise = gamma_noise(config.order_noise_dispersion);
    let base_price = |p: usize| 1.5 + 0.25 * (p % 12) as f64;
    let round3 = |x: f64| (x * 1000.0).round() / 1000.0;

    let mut sales = format!("# master_seed={}\n", config.seed);
    sales.push_str("date,product_id,warehouse_id,demand,price,promotion,known_orders\n");
    for p in 0..np {
        for w in 0..nw {
            let mut rng =
                rng_from_seed(derive_seed(config.seed, 3_000 + (p * nw + w) as u64));
            for (t, &date) in open_days.iter().enumerate() {
                let demand = raw[p * nw + w][t].max(0.0).round();
                let order_factor = match &order_noise {
                    Some(g) => g.sample(&mut rng),
                    None => 1.0,
                };
                let known = round3(config.known_orders_fraction * demand * order_factor);
                let promoted = promos[p][t];
                let price_missing = rng.gen::<f64>() < config.missing_price_probability;
                let price = if price_missing {
                    String::new()
                } else if promoted {
                    format!("{}", round3(base_price(p) * (1.0 - config.promo_price_drop)))
                } else {
                    format!("{}", base_price(p))
                };
                sales.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    date,
                    config.product_id(p),
                    config.warehouse_id(w),
                    demand,
                    price,
                    if promoted { 1 } else { 0 },
                    known,
                ));
            }
        }
    }

    let mut holiday_csv = format!("# master_seed={}\n", config.seed);
    holiday_csv.push_str("date\n");
    for day in &holidays {
        holiday_csv.push_str(&format!("{day}\n"));
    }

    let mut metadata = format!("# master_seed={}\n", config.seed);
    metadata.push_str("product_id,category,base_demand\n");
    for p in 0..np {
        metadata.push_str(&format!(
            "{},{},{}\n",
            config.product_id(p),
            config.category(p),
            config.base_demand[p],
        ));
    }

    let files = GeneratedFiles {
        sales: dir.join("sales.csv"),
        holidays: dir.join("holidays.csv"),
        metadata: dir.join("products.csv"),
    };
    std::fs::write(&files.sales, sales)
        .map_err(|e| Error::io(files.sales.display().to_string(), e))?;
    std::fs::write(&files.holidays, holiday_csv)
        .map_err(|e| Error::io(files.holidays.display().to_string(), e))?;
    std::fs::write(&files.metadata, metadata)
        .map_err(|e| Error::io(files.metadata.display().to_string(), e))?;
    Ok(files)
}

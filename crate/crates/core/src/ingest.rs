//! CSV loading, price imputation, and feature derivation.
//!
//! Sales CSV schema: `date,product_id,warehouse_id,demand,price,promotion,known_orders`
//! with ISO-8601 dates, `promotion` in {0,1} and an empty price cell marking
//! a missing value. Holiday CSV: header `date`, one date per row. Lines
//! beginning with `#` are ignored in both, so generated files may carry a
//! seed annotation in their header.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};

use crate::calendar::{day_of_week_onehot, ProductId, SalesRecord, StoreCalendar, WarehouseId};
use crate::error::{Error, Result};

/// Key of one demand series.
pub type SeriesKey = (ProductId, WarehouseId);

/// Sales records grouped by (product, warehouse) and sorted by date.
#[derive(Debug, Clone, Default)]
pub struct SalesTable {
    groups: BTreeMap<SeriesKey, Vec<SalesRecord>>,
}

impl SalesTable {
    pub fn from_records(records: Vec<SalesRecord>) -> Result<Self> {
        let mut seen: HashSet<(NaiveDate, SeriesKey)> = HashSet::new();
        let mut groups: BTreeMap<SeriesKey, Vec<SalesRecord>> = BTreeMap::new();
        for rec in records {
            let key = (rec.product.clone(), rec.warehouse.clone());
            if !seen.insert((rec.date, key.clone())) {
                return Err(Error::DuplicateRecord {
                    date: rec.date,
                    product: rec.product.to_string(),
                    warehouse: rec.warehouse.to_string(),
                    line: 0,
                });
            }
            groups.entry(key).or_default().push(rec);
        }
        for recs in groups.values_mut() {
            recs.sort_by_key(|r| r.date);
        }
        Ok(SalesTable { groups })
    }

    pub fn groups(&self) -> impl Iterator<Item = (&SeriesKey, &[SalesRecord])> {
        self.groups.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn get(&self, key: &SeriesKey) -> Option<&[SalesRecord]> {
        self.groups.get(key).map(|v| v.as_slice())
    }

    pub fn keys(&self) -> impl Iterator<Item = &SeriesKey> {
        self.groups.keys()
    }

    pub fn n_series(&self) -> usize {
        self.groups.len()
    }

    pub fn n_records(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    /// Earliest and latest record date over all groups.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let mut range: Option<(NaiveDate, NaiveDate)> = None;
        for recs in self.groups.values() {
            let (first, last) = (recs.first()?.date, recs.last()?.date);
            range = Some(match range {
                None => (first, last),
                Some((lo, hi)) => (lo.min(first), hi.max(last)),
            });
        }
        range
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load and validate the sales CSV.
pub fn load_sales_csv(path: impl AsRef<Path>) -> Result<SalesTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;

    let expected = [
        "date",
        "product_id",
        "warehouse_id",
        "demand",
        "price",
        "promotion",
        "known_orders",
    ];
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::schema(format!(
            "sales CSV header must be `{}`, got `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut seen: HashSet<(NaiveDate, SeriesKey)> = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != expected.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, got {}", expected.len(), row.len()),
            ));
        }

        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|_| parse_err(path, line, format!("bad date `{}`", &row[0])))?;
        let product = ProductId::new(&row[1])
            .map_err(|_| parse_err(path, line, "empty product_id"))?;
        let warehouse = WarehouseId::new(&row[2])
            .map_err(|_| parse_err(path, line, "empty warehouse_id"))?;
        let demand: f64 = row[3]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad demand `{}`", &row[3])))?;
        if !demand.is_finite() || demand < 0.0 {
            return Err(parse_err(path, line, format!("negative demand `{}`", &row[3])));
        }
        let price = if row[4].is_empty() {
            None
        } else {
            let p: f64 = row[4]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad price `{}`", &row[4])))?;
            if !p.is_finite() || p <= 0.0 {
                return Err(parse_err(path, line, format!("non-positive price `{}`", &row[4])));
            }
            Some(p)
        };
        let promotion = match &row[5] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(path, line, format!("promotion must be 0 or 1, got `{other}`"))),
        };
        let known_orders: f64 = row[6]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad known_orders `{}`", &row[6])))?;
        if !known_orders.is_finite() || known_orders < 0.0 {
            return Err(parse_err(path, line, format!("negative known_orders `{}`", &row[6])));
        }

        let key = (product.clone(), warehouse.clone());
        if !seen.insert((date, key)) {
            return Err(Error::DuplicateRecord {
                date,
                product: product.to_string(),
                warehouse: warehouse.to_string(),
                line,
            });
        }
        records.push(SalesRecord {
            date,
            product,
            warehouse,
            demand,
            price,
            promotion,
            known_orders,
        });
    }
    SalesTable::from_records(records)
}

/// Load the holiday CSV (header `date`, one ISO date per row).
pub fn load_holiday_csv(path: impl AsRef<Path>) -> Result<BTreeSet<NaiveDate>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["date"] {
        return Err(Error::schema("holiday CSV header must be `date`".to_string()));
    }
    let mut days = BTreeSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|_| parse_err(path, line, format!("bad date `{}`", &row[0])))?;
        days.insert(date);
    }
    Ok(days)
}

/// Product metadata: `product_id,category,base_demand`.
#[derive(Debug, Clone)]
pub struct ProductMeta {
    pub product: ProductId,
    pub category: String,
    pub base_demand: f64,
}

pub fn load_metadata_csv(path: impl AsRef<Path>) -> Result<HashMap<ProductId, ProductMeta>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["product_id", "category", "base_demand"] {
        return Err(Error::schema(
            "metadata CSV header must be `product_id,category,base_demand`".to_string(),
        ));
    }
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let product =
            ProductId::new(&row[0]).map_err(|_| parse_err(path, line, "empty product_id"))?;
        let base_demand: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad base_demand `{}`", &row[2])))?;
        out.insert(
            product.clone(),
            ProductMeta {
                product,
                category: row[1].to_string(),
                base_demand,
            },
        );
    }
    Ok(out)
}

/// Replace missing prices by the per-group mean of prices observed inside
/// `fit_range` (inclusive). Fitting on the training interval only keeps
/// validation and test information out of the imputed values.
pub fn impute_prices(
    table: &SalesTable,
    fit_range: (NaiveDate, NaiveDate),
) -> Result<SalesTable> {
    let mut groups = BTreeMap::new();
    for (key, recs) in table.groups() {
        let observed: Vec<f64> = recs
            .iter()
            .filter(|r| r.date >= fit_range.0 && r.date <= fit_range.1)
            .filter_map(|r| r.price)
            .collect();
        let has_missing = recs.iter().any(|r| r.price.is_none());
        if has_missing && observed.is_empty() {
            return Err(Error::ImputationImpossible {
                product: key.0.to_string(),
                warehouse: key.1.to_string(),
            });
        }
        let mean = if observed.is_empty() {
            0.0
        } else {
            observed.iter().sum::<f64>() / observed.len() as f64
        };
        let recs = recs
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if r.price.is_none() {
                    r.price = Some(mean);
                }
                r
            })
            .collect();
        groups.insert(key.clone(), recs);
    }
    Ok(SalesTable { groups })
}

// Feature column names, in matrix order.
pub const COL_PREV_DEMAND: &str = "prev_demand";
pub const COL_KNOWN_ORDERS: &str = "known_orders";
pub const COL_PRICE: &str = "price";
pub const COL_PROMOTION: &str = "promotion";
pub const COL_DOW: [&str; 6] = [
    "dow_mon", "dow_tue", "dow_wed", "dow_thu", "dow_fri", "dow_sat",
];
pub const COL_OPEN_TOMORROW: &str = "store_open_tomorrow";
pub const COL_OPEN_DAY_AFTER: &str = "store_open_day_after";
pub const COL_HOLIDAY_TOMORROW: &str = "holiday_tomorrow";
pub const COL_HOLIDAY_DAY_AFTER: &str = "holiday_day_after";

/// All engineered columns in canonical order.
pub fn all_feature_columns() -> Vec<String> {
    let mut cols = vec![COL_PREV_DEMAND.to_string(), COL_KNOWN_ORDERS.to_string()];
    cols.push(COL_PRICE.to_string());
    cols.push(COL_PROMOTION.to_string());
    cols.extend(COL_DOW.iter().map(|s| s.to_string()));
    cols.push(COL_OPEN_TOMORROW.to_string());
    cols.push(COL_OPEN_DAY_AFTER.to_string());
    cols.push(COL_HOLIDAY_TOMORROW.to_string());
    cols.push(COL_HOLIDAY_DAY_AFTER.to_string());
    cols
}

/// Engineered per-working-day feature table for one series.
///
/// Row `t` describes working day `dates[t]`; its target is that day's
/// demand. The first day of the raw series is dropped because it has no
/// previous-demand value.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub product: ProductId,
    pub warehouse: WarehouseId,
    /// Working day of each row.
    pub dates: Vec<NaiveDate>,
    /// Working-day index (within the calendar) of the first row.
    pub start_day_index: usize,
    pub columns: Vec<String>,
    /// Row-major feature values, `rows x columns`.
    pub values: Vec<Vec<f64>>,
    /// Demand of each row's working day, original units.
    pub targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Working-day index of row `row`.
    pub fn day_index(&self, row: usize) -> usize {
        self.start_day_index + row
    }

    /// New matrix restricted to the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let mut idx = Vec::with_capacity(names.len());
        for name in names {
            idx.push(self.column_index(name).ok_or_else(|| {
                Error::schema(format!("unknown feature column `{name}`"))
            })?);
        }
        let values = self
            .values
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect();
        Ok(FeatureMatrix {
            product: self.product.clone(),
            warehouse: self.warehouse.clone(),
            dates: self.dates.clone(),
            start_day_index: self.start_day_index,
            columns: names.to_vec(),
            values,
            targets: self.targets.clone(),
        })
    }
}

/// Derive one feature matrix per (product, warehouse) group.
///
/// The tomorrow / day-after flags use calendar-day offsets (+1, +2 days):
/// their purpose is to capture demand shifts ahead of closures, and a
/// closure is precisely a non-working day.
pub fn derive_features(table: &SalesTable, cal: &StoreCalendar) -> Result<Vec<FeatureMatrix>> {
    let columns = all_feature_columns();
    let mut out = Vec::new();
    for (key, recs) in table.groups() {
        if recs.len() < 2 {
            return Err(Error::TooShortSeries {
                product: key.0.to_string(),
                warehouse: key.1.to_string(),
                len: recs.len(),
                min: 2,
            });
        }
        let first_idx = cal.working_day_index(recs[0].date).ok_or_else(|| {
            Error::Alignment {
                message: format!(
                    "record date {} for ({}, {}) is not an open day",
                    recs[0].date, key.0, key.1
                ),
            }
        })?;
        // Records must cover consecutive open days for windowing to hold.
        for (offset, rec) in recs.iter().enumerate() {
            match cal.working_day_index(rec.date) {
                Some(idx) if idx == first_idx + offset => {}
                _ => {
                    let expected = cal
                        .open_days()
                        .get(first_idx + offset)
                        .copied()
                        .unwrap_or(rec.date);
                    return Err(Error::NonConsecutiveSeries {
                        product: key.0.to_string(),
                        warehouse: key.1.to_string(),
                        date: expected,
                    });
                }
            }
        }

        let mut dates = Vec::with_capacity(recs.len() - 1);
        let mut values = Vec::with_capacity(recs.len() - 1);
        let mut targets = Vec::with_capacity(recs.len() - 1);
        for t in 1..recs.len() {
            let rec = &recs[t];
            let prev = &recs[t - 1];
            let onehot = day_of_week_onehot(rec.date)?;
            let tomorrow = rec.date + Duration::days(1);
            let day_after = rec.date + Duration::days(2);
            let mut row = Vec::with_capacity(columns.len());
            row.push(prev.demand);
            row.push(rec.known_orders);
            row.push(rec.price.ok_or_else(|| {
                Error::schema(format!(
                    "missing price on {} for ({}, {}); run imputation first",
                    rec.date, key.0, key.1
                ))
            })?);
            row.push(if rec.promotion { 1.0 } else { 0.0 });
            row.extend_from_slice(&onehot);
            row.push(if cal.is_open(tomorrow) { 1.0 } else { 0.0 });
            row.push(if cal.is_open(day_after) { 1.0 } else { 0.0 });
            row.push(if cal.is_holiday(tomorrow) { 1.0 } else { 0.0 });
            row.push(if cal.is_holiday(day_after) { 1.0 } else { 0.0 });
            dates.push(rec.date);
            values.push(row);
            targets.push(rec.demand);
        }
        out.push(FeatureMatrix {
            product: key.0.clone(),
            warehouse: key.1.clone(),
            dates,
            start_day_index: first_idx + 1,
            columns: columns.clone(),
            values,
            targets,
        });
    }
    Ok(out)
}

//! Min-max scaling, moving-window framing, and chronological splitting.

use std::ops::Range;
use std::path::Path;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::config::KeyValueFile;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

/// Input window width used throughout (time steps).
pub const INPUT_WINDOW: usize = 36;
/// Forecast horizon: one working week.
pub const HORIZON: usize = 6;
/// Months allocated to the training interval.
pub const TRAIN_MONTHS: u32 = 24;
/// Months allocated to the validation interval.
pub const VAL_MONTHS: u32 = 3;

/// Per-column min-max scaler, with demand (the target) as its own column.
///
/// Fitted on the training interval only: the paper's "one shot" phrasing
/// contrasts with moving-window normalization, not with leakage-safe
/// fitting. Constant columns transform to 0 and invert back to the
/// constant. Transforms are not clipped, so out-of-range values map
/// linearly beyond [0, 1] and stay invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub feature_columns: Vec<String>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
    pub fitted_from: NaiveDate,
    pub fitted_to: NaiveDate,
}

fn scale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

fn unscale(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        x * (max - min) + min
    } else {
        min
    }
}

impl MinMaxScaler {
    /// Fit column-wise min/max on the given row range of `matrix`.
    pub fn fit(matrix: &FeatureMatrix, rows: Range<usize>) -> Result<Self> {
        if rows.is_empty() || rows.end > matrix.n_rows() {
            return Err(Error::EmptyFit);
        }
        let n_cols = matrix.n_features();
        let mut min = vec![f64::INFINITY; n_cols];
        let mut max = vec![f64::NEG_INFINITY; n_cols];
        let mut tmin = f64::INFINITY;
        let mut tmax = f64::NEG_INFINITY;
        for r in rows.clone() {
            for (c, &v) in matrix.values[r].iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: "scaler fit input",
                    });
                }
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
            let t = matrix.targets[r];
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
        Ok(MinMaxScaler {
            feature_columns: matrix.columns.clone(),
            feature_min: min,
            feature_max: max,
            target_min: tmin,
            target_max: tmax,
            fitted_from: matrix.dates[rows.start],
            fitted_to: matrix.dates[rows.end - 1],
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.feature_columns.len() {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: self.feature_columns.len(),
                context: "scaler transform row",
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(c, &v)| scale(v, self.feature_min[c], self.feature_max[c]))
            .collect())
    }

    pub fn inverse_transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.feature_columns.len() {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: self.feature_columns.len(),
                context: "scaler inverse row",
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(c, &v)| unscale(v, self.feature_min[c], self.feature_max[c]))
            .collect())
    }

    pub fn scale_demand(&self, demand: f64) -> f64 {
        scale(demand, self.target_min, self.target_max)
    }

    pub fn inverse_demand(&self, scaled: f64) -> f64 {
        unscale(scaled, self.target_min, self.target_max)
    }

    /// Scale a full matrix; columns must match the fitted schema.
    pub fn transform_matrix(&self, matrix: &FeatureMatrix) -> Result<ScaledMatrix> {
        if matrix.columns != self.feature_columns {
            return Err(Error::schema(format!(
                "matrix columns {:?} do not match scaler columns {:?}",
                matrix.columns, self.feature_columns
            )));
        }
        let values = matrix
            .values
            .iter()
            .map(|row| self.transform_row(row))
            .collect::<Result<Vec<_>>>()?;
        let targets = matrix.targets.iter().map(|&t| self.scale_demand(t)).collect();
        Ok(ScaledMatrix {
            columns: matrix.columns.clone(),
            dates: matrix.dates.clone(),
            start_day_index: matrix.start_day_index,
            values,
            targets,
        })
    }

    /// Persist as a key-value text file (column name -> min, max).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        out.push_str("# min-max scaler state v1\n");
        out.push_str(&format!("fitted_from = {}\n", self.fitted_from));
        out.push_str(&format!("fitted_to = {}\n", self.fitted_to));
        out.push_str(&format!("columns = {}\n", self.feature_columns.join(",")));
        for (c, name) in self.feature_columns.iter().enumerate() {
            out.push_str(&format!(
                "{name} = {},{}\n",
                self.feature_min[c], self.feature_max[c]
            ));
        }
        out.push_str(&format!("demand = {},{}\n", self.target_min, self.target_max));
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let kv = KeyValueFile::load(&path)?;
        let parse_pair = |key: &str| -> Result<(f64, f64)> {
            let raw = kv.require(key)?;
            let (lo, hi) = raw
                .split_once(',')
                .ok_or_else(|| Error::config(format!("scaler key `{key}`: expected `min,max`")))?;
            let lo: f64 = lo.trim().parse().map_err(|_| {
                Error::config(format!("scaler key `{key}`: bad min `{lo}`"))
            })?;
            let hi: f64 = hi.trim().parse().map_err(|_| {
                Error::config(format!("scaler key `{key}`: bad max `{hi}`"))
            })?;
            Ok((lo, hi))
        };
        let columns = kv.get_list("columns");
        if columns.is_empty() {
            return Err(Error::config("scaler file missing `columns`"));
        }
        let mut fmin = Vec::with_capacity(columns.len());
        let mut fmax = Vec::with_capacity(columns.len());
        for name in &columns {
            let (lo, hi) = parse_pair(name)?;
            fmin.push(lo);
            fmax.push(hi);
        }
        let (tmin, tmax) = parse_pair("demand")?;
        let fitted_from: NaiveDate = kv
            .require("fitted_from")?
            .parse()
            .map_err(|_| Error::config("bad fitted_from date"))?;
        let fitted_to: NaiveDate = kv
            .require("fitted_to")?
            .parse()
            .map_err(|_| Error::config("bad fitted_to date"))?;
        Ok(MinMaxScaler {
            feature_columns: columns,
            feature_min: fmin,
            feature_max: fmax,
            target_min: tmin,
            target_max: tmax,
            fitted_from,
            fitted_to,
        })
    }
}

/// A feature matrix after scaling; same row geometry as its source.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub columns: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub start_day_index: usize,
    pub values: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl ScaledMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.len()
    }
}

/// One fixed-size input-output pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// `window x features`, scaled.
    pub input: Vec<Vec<f64>>,
    /// Scaled demand of the next `horizon` working days.
    pub target: Vec<f64>,
    /// Working-day index of the last input row.
    pub origin: usize,
    /// Date of the last input row.
    pub origin_date: NaiveDate,
}

/// All admissible moving windows, in chronological order.
/// A series of `L` rows yields `max(0, L - w - h + 1)` samples.
pub fn make_windows(matrix: &ScaledMatrix, w: usize, h: usize) -> Vec<WindowedSample> {
    windows_in_range(matrix, w, h, 0..matrix.n_rows())
}

/// Moving windows whose target rows all fall inside `target_rows`.
///
/// Inputs may reach back before the range start: validation and test
/// windows would otherwise lose their first `w` evaluable targets.
pub fn windows_in_range(
    matrix: &ScaledMatrix,
    w: usize,
    h: usize,
    target_rows: Range<usize>,
) -> Vec<WindowedSample> {
    assert!(w >= 1 && h >= 1, "window and horizon must be at least 1");
    let len = matrix.n_rows();
    let end = target_rows.end.min(len);
    if end < w + h {
        return Vec::new();
    }
    let s_min = target_rows.start.saturating_sub(w);
    let s_max = end - w - h;
    let mut out = Vec::with_capacity(s_max.saturating_sub(s_min) + 1);
    for s in s_min..=s_max {
        // Target rows are s+w .. s+w+h; the lower bound holds by s >= s_min.
        if s + w < target_rows.start {
            continue;
        }
        let input = matrix.values[s..s + w].to_vec();
        let target = matrix.targets[s + w..s + w + h].to_vec();
        out.push(WindowedSample {
            input,
            target,
            origin: matrix.start_day_index + s + w - 1,
            origin_date: matrix.dates[s + w - 1],
        });
    }
    out
}

/// Chronologically ordered row ranges: first 24 months train, next 3
/// months validation, remainder test.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
    /// First validation date (snapped to an open day).
    pub train_boundary: NaiveDate,
    /// First test date (snapped to an open day).
    pub val_boundary: NaiveDate,
}

fn whole_months_between(start: NaiveDate, end: NaiveDate) -> u32 {
    let mut months = 0u32;
    while start
        .checked_add_months(Months::new(months + 1))
        .map(|d| d <= end)
        .unwrap_or(false)
    {
        months += 1;
    }
    months
}

/// Split a series by calendar months counted from its start date.
/// Boundary dates landing on closed days snap forward to the next open day.
pub fn chronological_split(
    matrix: &FeatureMatrix,
    cal: &crate::calendar::StoreCalendar,
) -> Result<DataSplit> {
    chronological_split_with(matrix, cal, TRAIN_MONTHS, VAL_MONTHS)
}

pub fn chronological_split_with(
    matrix: &FeatureMatrix,
    cal: &crate::calendar::StoreCalendar,
    train_months: u32,
    val_months: u32,
) -> Result<DataSplit> {
    let required = train_months + val_months;
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyInput {
            context: "chronological split",
        });
    }
    let start = matrix.dates[0];
    let last = *matrix.dates.last().unwrap();
    let spanned = whole_months_between(start, last);
    if spanned < required {
        return Err(Error::SplitTooShort {
            months: spanned,
            required,
        });
    }
    let raw_train_boundary = start
        .checked_add_months(Months::new(train_months))
        .ok_or_else(|| Error::config("train boundary out of calendar range"))?;
    let raw_val_boundary = start
        .checked_add_months(Months::new(required))
        .ok_or_else(|| Error::config("validation boundary out of calendar range"))?;
    let train_boundary = cal
        .snap_to_open_day(raw_train_boundary)
        .ok_or(Error::EmptySplit { which: "validation" })?;
    let val_boundary = cal
        .snap_to_open_day(raw_val_boundary)
        .ok_or(Error::EmptySplit { which: "test" })?;

    let val_start = matrix.dates.partition_point(|d| *d < train_boundary);
    let test_start = matrix.dates.partition_point(|d| *d < val_boundary);
    let n = matrix.n_rows();
    if val_start == 0 {
        return Err(Error::EmptySplit { which: "train" });
    }
    if test_start == val_start {
        return Err(Error::EmptySplit { which: "validation" });
    }
    if test_start == n {
        return Err(Error::EmptySplit { which: "test" });
    }
    Ok(DataSplit {
        train: 0..val_start,
        validation: val_start..test_start,
        test: test_start..n,
        train_boundary,
        val_boundary,
    })
}

/// Row indices of forecast origins (last input row of each admissible
/// window) whose targets fall inside `target_rows`. Mirrors
/// [`windows_in_range`] so benchmark models evaluate at exactly the
/// network's origins.
pub fn origin_rows_in_range(
    n_rows: usize,
    target_rows: Range<usize>,
    w: usize,
    h: usize,
) -> Vec<usize> {
    let end = target_rows.end.min(n_rows);
    if end < w + h {
        return Vec::new();
    }
    let s_min = target_rows.start.saturating_sub(w);
    let s_max = end - w - h;
    (s_min..=s_max)
        .filter(|s| s + w >= target_rows.start)
        .map(|s| s + w - 1)
        .collect()
}

/// Frame the three splits' windows in one call.
pub fn split_windows(
    matrix: &ScaledMatrix,
    split: &DataSplit,
    w: usize,
    h: usize,
) -> (Vec<WindowedSample>, Vec<WindowedSample>, Vec<WindowedSample>) {
    let train = windows_in_range(matrix, w, h, split.train.clone());
    let val = windows_in_range(matrix, w, h, split.validation.clone());
    let test = windows_in_range(matrix, w, h, split.test.clone());
    (train, val, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::{ProductId, StoreCalendar, WarehouseId};
    use chrono::Duration;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    /// Matrix over consecutive open days with the given column values.
    fn toy_matrix(columns: Vec<&str>, values: Vec<Vec<f64>>, targets: Vec<f64>) -> FeatureMatrix {
        let cal = open_calendar(values.len().max(targets.len()) + 10);
        let dates = cal.open_days()[..values.len()].to_vec();
        FeatureMatrix {
            product: ProductId::new("P1").unwrap(),
            warehouse: WarehouseId::new("W1").unwrap(),
            dates,
            start_day_index: 0,
            columns: columns.into_iter().map(str::to_string).collect(),
            values,
            targets,
        }
    }

    fn open_calendar(days: usize) -> StoreCalendar {
        let start = d(2021, 1, 4);
        let end = start + Duration::days(days as i64 * 2 + 14);
        StoreCalendar::new(start, end, Default::default()).unwrap()
    }

    #[test]
    fn midpoint_scales_to_half() {
        let m = toy_matrix(vec!["x"], vec![vec![0.0], vec![10.0]], vec![0.0, 10.0]);
        let s = MinMaxScaler::fit(&m, 0..2).unwrap();
        assert_eq!(s.transform_row(&[5.0]).unwrap(), vec![0.5]);
        assert_eq!(s.transform_row(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(s.transform_row(&[10.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero_and_inverts_to_constant() {
        let m = toy_matrix(vec!["x"], vec![vec![3.0], vec![3.0]], vec![1.0, 2.0]);
        let s = MinMaxScaler::fit(&m, 0..2).unwrap();
        assert_eq!(s.transform_row(&[3.0]).unwrap(), vec![0.0]);
        assert_eq!(s.inverse_transform_row(&[0.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn transform_is_not_clipped() {
        let m = toy_matrix(vec!["x"], vec![vec![1.0], vec![3.0]], vec![0.0, 1.0]);
        let s = MinMaxScaler::fit(&m, 0..2).unwrap();
        // x = max + (max - min) = 5 -> 2.0
        assert_eq!(s.transform_row(&[5.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn empty_fit_is_an_error() {
        let m = toy_matrix(vec!["x"], vec![vec![1.0]], vec![1.0]);
        assert!(matches!(MinMaxScaler::fit(&m, 0..0), Err(Error::EmptyFit)));
    }

    #[test]
    fn refitting_gives_identical_parameters() {
        let m = toy_matrix(
            vec!["x", "y"],
            vec![vec![1.0, -2.0], vec![3.0, 4.0], vec![2.0, 0.5]],
            vec![5.0, 6.0, 7.0],
        );
        assert_eq!(
            MinMaxScaler::fit(&m, 0..3).unwrap(),
            MinMaxScaler::fit(&m, 0..3).unwrap()
        );
    }

    #[test]
    fn scaler_file_round_trip() {
        let m = toy_matrix(
            vec!["x", "y"],
            vec![vec![1.0, -2.0], vec![3.0, 4.0]],
            vec![5.0, 6.0],
        );
        let s = MinMaxScaler::fit(&m, 0..2).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        s.save(f.path()).unwrap();
        assert_eq!(MinMaxScaler::load(f.path()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn round_trip_inverts_for_nonconstant_columns(
            vals in proptest::collection::vec(-1e3f64..1e3, 8..40),
            probe in -2e3f64..2e3,
        ) {
            let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
            let targets = vec![0.0; rows.len()];
            let m = toy_matrix(vec!["x"], rows, targets);
            let n = m.n_rows();
            let s = MinMaxScaler::fit(&m, 0..n).unwrap();
            if s.feature_max[0] > s.feature_min[0] {
                let t = s.transform_row(&[probe]).unwrap();
                let back = s.inverse_transform_row(&t).unwrap();
                prop_assert!((back[0] - probe).abs() < 1e-9);
            }
        }
    }

    fn scaled_series(len: usize) -> ScaledMatrix {
        let cal = open_calendar(len + 10);
        ScaledMatrix {
            columns: vec!["x".to_string()],
            dates: cal.open_days()[..len].to_vec(),
            start_day_index: 0,
            values: (0..len).map(|i| vec![i as f64]).collect(),
            targets: (0..len).map(|i| i as f64).collect(),
        }
    }

    #[test]
    fn window_counts_match_formula() {
        assert_eq!(make_windows(&scaled_series(50), 36, 6).len(), 9);
        assert_eq!(make_windows(&scaled_series(42), 36, 6).len(), 1);
        assert_eq!(make_windows(&scaled_series(41), 36, 6).len(), 0);
    }

    #[test]
    fn windows_are_consecutive_and_aligned() {
        let m = scaled_series(50);
        for (i, wnd) in make_windows(&m, 36, 6).iter().enumerate() {
            assert_eq!(wnd.input.len(), 36);
            assert_eq!(wnd.target.len(), 6);
            assert_eq!(wnd.origin, i + 35);
            // Target k is the demand k working days after the origin.
            for (k, &t) in wnd.target.iter().enumerate() {
                assert_eq!(t, (wnd.origin + k + 1) as f64);
            }
            // Input rows are consecutive working days.
            for (j, row) in wnd.input.iter().enumerate() {
                assert_eq!(row[0], (i + j) as f64);
            }
        }
    }

    #[test]
    fn ranged_windows_keep_targets_inside_but_inputs_reach_back() {
        let m = scaled_series(100);
        let windows = windows_in_range(&m, 36, 6, 60..100);
        // First admissible origin has its first target exactly at row 60.
        assert_eq!(windows.first().unwrap().origin, 59);
        assert_eq!(windows.first().unwrap().target[0], 60.0);
        assert_eq!(windows.last().unwrap().target[5], 99.0);
        for wnd in &windows {
            assert!(wnd.target[0] >= 60.0);
        }
    }

    fn month_series(months: u32) -> (FeatureMatrix, StoreCalendar) {
        let start = d(2021, 1, 4);
        let end = start
            .checked_add_months(Months::new(months))
            .unwrap();
        let cal = StoreCalendar::new(start, end, Default::default()).unwrap();
        let days: Vec<NaiveDate> = cal.open_days().to_vec();
        let m = FeatureMatrix {
            product: ProductId::new("P1").unwrap(),
            warehouse: WarehouseId::new("W1").unwrap(),
            dates: days.clone(),
            start_day_index: 0,
            columns: vec!["x".to_string()],
            values: days.iter().map(|_| vec![0.0]).collect(),
            targets: days.iter().map(|_| 0.0).collect(),
        };
        (m, cal)
    }

    #[test]
    fn twenty_nine_month_series_splits_24_3_2() {
        let (m, cal) = month_series(29);
        let split = chronological_split(&m, &cal).unwrap();
        assert_eq!(split.train.start, 0);
        assert!(split.train.end < split.validation.end);
        assert!(split.validation.end < split.test.end);
        assert_eq!(split.test.end, m.n_rows());
        // Boundary dates are 24 and 27 months from the series start.
        assert_eq!(split.train_boundary, d(2023, 1, 4).max(d(2023, 1, 4)));
        assert_eq!(split.val_boundary, d(2023, 4, 4));
        // Union covers the series with no gaps.
        assert_eq!(split.train.end, split.validation.start);
        assert_eq!(split.validation.end, split.test.start);
    }

    #[test]
    fn twenty_month_series_is_too_short() {
        let (m, cal) = month_series(20);
        assert!(matches!(
            chronological_split(&m, &cal),
            Err(Error::SplitTooShort { .. })
        ));
    }

    #[test]
    fn boundary_snaps_to_next_open_day() {
        // Start on Saturday 2021-01-02: +24 months lands on 2023-01-02,
        // a Monday; make it a holiday so the boundary must snap.
        let start = d(2021, 1, 2);
        let end = d(2023, 7, 1);
        let holidays = [d(2023, 1, 2)].into_iter().collect();
        let cal = StoreCalendar::new(start, end, holidays).unwrap();
        let days: Vec<NaiveDate> = cal.open_days().to_vec();
        let m = FeatureMatrix {
            product: ProductId::new("P1").unwrap(),
            warehouse: WarehouseId::new("W1").unwrap(),
            dates: days.clone(),
            start_day_index: 0,
            columns: vec!["x".to_string()],
            values: days.iter().map(|_| vec![0.0]).collect(),
            targets: days.iter().map(|_| 0.0).collect(),
        };
        let split = chronological_split(&m, &cal).unwrap();
        assert_eq!(split.train_boundary, d(2023, 1, 3));
    }

    proptest! {
        /// Window-count law against exhaustive enumeration of admissible origins.
        #[test]
        fn window_count_law(len in 0usize..120) {
            let m = scaled_series(len);
            let expected = (0..len)
                .filter(|s| s + 36 + 6 <= len)
                .count();
            let formula = (len as i64 - 36 - 6 + 1).max(0) as usize;
            prop_assert_eq!(expected, formula);
            prop_assert_eq!(make_windows(&m, 36, 6).len(), formula);
        }
    }
}

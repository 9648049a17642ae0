//! Domain types and working-day calendar arithmetic.
//!
//! The store operates Monday through Saturday and is closed on Sundays and
//! public holidays. Series are indexed by open days only, so "working day
//! index" arithmetic lives here and is shared by every other module.

use std::collections::{BTreeSet, HashMap};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of working days per week (Monday-Saturday).
pub const WORKING_WEEK: usize = 6;

/// Opaque product identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProductId(String);

/// Opaque warehouse identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WarehouseId(String);

impl ProductId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::config("product id must be non-empty"));
        }
        Ok(ProductId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl WarehouseId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::config("warehouse id must be non-empty"));
        }
        Ok(WarehouseId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for ProductId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for WarehouseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One product x warehouse x working-day observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesRecord {
    pub date: NaiveDate,
    pub product: ProductId,
    pub warehouse: WarehouseId,
    /// Units sold. Non-negative; kept real so scaled and imputed values
    /// share one numeric domain with model outputs.
    pub demand: f64,
    /// Unit price; `None` marks a missing cell to be imputed.
    pub price: Option<f64>,
    pub promotion: bool,
    /// Units already ordered for this day and visible at prediction time.
    pub known_orders: f64,
}

/// Open-day calendar over a covered date range.
///
/// Open days are all Mondays through Saturdays in `[start, end]` that are
/// not public holidays. Dates outside the covered range can still be
/// classified by rule via [`StoreCalendar::is_open`], which the feature
/// derivation uses for its tomorrow / day-after lookups.
#[derive(Debug, Clone)]
pub struct StoreCalendar {
    start: NaiveDate,
    end: NaiveDate,
    open_days: Vec<NaiveDate>,
    index: HashMap<NaiveDate, usize>,
    holidays: BTreeSet<NaiveDate>,
}

impl StoreCalendar {
    /// Build the calendar for `[start, end]` given the public-holiday set.
    pub fn new(start: NaiveDate, end: NaiveDate, holidays: BTreeSet<NaiveDate>) -> Result<Self> {
        if end < start {
            return Err(Error::config(format!(
                "calendar range end {end} precedes start {start}"
            )));
        }
        let mut open_days = Vec::new();
        let mut index = HashMap::new();
        let mut day = start;
        while day <= end {
            if day.weekday() != Weekday::Sun && !holidays.contains(&day) {
                index.insert(day, open_days.len());
                open_days.push(day);
            }
            day += Duration::days(1);
        }
        Ok(StoreCalendar {
            start,
            end,
            open_days,
            index,
            holidays,
        })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Ordered open days of the covered range.
    pub fn open_days(&self) -> &[NaiveDate] {
        &self.open_days
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    /// Position of `date` within the open-day sequence, if it is one.
    /// Absence is a value (closed day), not an error.
    pub fn working_day_index(&self, date: NaiveDate) -> Option<usize> {
        self.index.get(&date).copied()
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.holidays.contains(&date)
    }

    /// Rule-based openness check, valid for any date: Monday-Saturday and
    /// not a public holiday. Holidays are only known inside the loaded set,
    /// so callers should cover their lookup horizon when building it.
    pub fn is_open(&self, date: NaiveDate) -> bool {
        date.weekday() != Weekday::Sun && !self.holidays.contains(&date)
    }

    /// First open day on or after `date`, within the covered range.
    pub fn snap_to_open_day(&self, date: NaiveDate) -> Option<NaiveDate> {
        let mut day = date.max(self.start);
        while day <= self.end {
            if self.index.contains_key(&day) {
                return Some(day);
            }
            day += Duration::days(1);
        }
        None
    }
}

/// One-hot encoding of the working weekday (Monday = component 0,
/// Saturday = component 5). Sundays are outside the working week.
pub fn day_of_week_onehot(date: NaiveDate) -> Result<[f64; WORKING_WEEK]> {
    let slot = match date.weekday() {
        Weekday::Mon => 0,
        Weekday::Tue => 1,
        Weekday::Wed => 2,
        Weekday::Thu => 3,
        Weekday::Fri => 4,
        Weekday::Sat => 5,
        Weekday::Sun => return Err(Error::InvalidWeekday { date }),
    };
    let mut v = [0.0; WORKING_WEEK];
    v[slot] = 1.0;
    Ok(v)
}

/// Working-weekday slot (0 = Monday .. 5 = Saturday) of a date.
pub fn weekday_slot(date: NaiveDate) -> Result<usize> {
    let idx = date.weekday().num_days_from_monday() as usize;
    if idx >= WORKING_WEEK {
        return Err(Error::InvalidWeekday { date });
    }
    Ok(idx)
}

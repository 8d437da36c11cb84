//! Calendar-free time handling. All dates are integer day offsets from the
//! valuation date; nominal months map to days through a single rounding rule
//! so coupon schedules and valuation grids land on identical offsets.

pub const DAYS_PER_YEAR: f64 = 365.0;

/// Day offset of a date `m` nominal months after the valuation date.
pub fn months_to_days(m: u32) -> i64 {
    ((m as i64) * 365 * 2 + 12) / 24
}

pub fn years_from_days(days: i64) -> f64 {
    days as f64 / DAYS_PER_YEAR
}

/// Year-fraction conventions. `Thirty360U` assumes unadjusted synthetic
/// schedules, where a nominal year is exactly 365 day offsets, so a full
/// annual period counts as 1.0 like 30/360 on real unadjusted dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayCount {
    Act365f,
    Act360,
    Thirty360U,
}

impl DayCount {
    pub fn year_fraction(self, from_days: i64, to_days: i64) -> f64 {
        let d = (to_days - from_days) as f64;
        match self {
            DayCount::Act365f | DayCount::Thirty360U => d / 365.0,
            DayCount::Act360 => d / 360.0,
        }
    }
}

/// Time-grid granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridStep {
    Daily,
    Months(u32),
}

impl GridStep {
    pub fn label(self) -> String {
        match self {
            GridStep::Daily => "1D".into(),
            GridStep::Months(m) => format!("{m}M"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "1D" | "D" | "DAILY" => Some(GridStep::Daily),
            other => other
                .strip_suffix('M')
                .and_then(|m| m.parse::<u32>().ok())
                .filter(|&m| m > 0)
                .map(GridStep::Months),
        }
    }
}

/// Coupon dates of a leg paying `freq_months` apart, as day offsets.
/// Includes the start date as element 0.
pub fn schedule_days(start_months: u32, tenor_months: u32, freq_months: u32) -> Vec<i64> {
    assert!(freq_months > 0 && tenor_months.is_multiple_of(freq_months));
    (0..=tenor_months / freq_months)
        .map(|k| months_to_days(start_months + k * freq_months))
        .collect()
}

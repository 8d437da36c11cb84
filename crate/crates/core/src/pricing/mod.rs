//! Instrument definitions, schedules and valuation: multi-curve swaps
//! (curve-based and state-based), the G2++ swaption quadrature and
//! shifted-Black pricing with implied-volatility inversion.

pub mod black;
pub mod swap;
pub mod swaption;

pub use swap::{par_swap_rate, swap_annuity, swap_price_curves, swap_price_state, SwapStateKernel};
pub use swaption::{swaption_price_g2pp, QuadratureCfg, SwaptionKernel};

use crate::time::{schedule_days, DayCount};

pub const FLOAT_FREQ_MONTHS: u32 = 6;
pub const FIXED_FREQ_MONTHS: u32 = 12;

/// Year-fraction conventions for the three legs of the pricing formulas.
#[derive(Debug, Clone, Copy)]
pub struct Conventions {
    pub fixed_dc: DayCount,
    pub float_dc: DayCount,
    pub fra_dc: DayCount,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            fixed_dc: DayCount::Thirty360U,
            float_dc: DayCount::Act360,
            fra_dc: DayCount::Act360,
        }
    }
}

/// A fixed-vs-EURIBOR-6M swap: annual fixed leg, semi-annual floating leg,
/// shared start and end dates.
#[derive(Debug, Clone)]
pub struct SwapSpec {
    pub notional: f64,
    /// +1.0 payer / -1.0 receiver, referred to the fixed leg.
    pub omega: f64,
    pub fixed_rate: f64,
    pub start_months: u32,
    pub tenor_months: u32,
    pub conv: Conventions,
}

impl SwapSpec {
    pub fn new(notional: f64, omega: f64, fixed_rate: f64, start_months: u32, tenor_months: u32) -> Self {
        SwapSpec {
            notional,
            omega,
            fixed_rate,
            start_months,
            tenor_months,
            conv: Conventions::default(),
        }
    }

    pub fn cashflows(&self) -> SwapCashflows {
        SwapCashflows {
            notional: self.notional,
            omega: self.omega,
            fixed_rate: self.fixed_rate,
            float_days: schedule_days(self.start_months, self.tenor_months, FLOAT_FREQ_MONTHS),
            fixed_days: schedule_days(self.start_months, self.tenor_months, FIXED_FREQ_MONTHS),
            conv: self.conv,
        }
    }

    pub fn maturity_days(&self) -> i64 {
        crate::time::months_to_days(self.start_months + self.tenor_months)
    }
}

/// Explicit leg dates; produced from a [`SwapSpec`] or built directly for
/// the residual (stub-start) swaps of the analytical CVA strip.
#[derive(Debug, Clone)]
pub struct SwapCashflows {
    pub notional: f64,
    pub omega: f64,
    pub fixed_rate: f64,
    /// T_0 < T_1 < ... < T_n (period boundaries; coupon j spans [T_{j-1}, T_j]).
    pub float_days: Vec<i64>,
    /// S_0 < S_1 < ... < S_m with S_0 = T_0 and S_m = T_n.
    pub fixed_days: Vec<i64>,
    pub conv: Conventions,
}

impl SwapCashflows {
    pub fn maturity_days(&self) -> i64 {
        *self.float_days.last().unwrap()
    }

    pub fn start_days(&self) -> i64 {
        self.float_days[0]
    }

    /// Residual swap seen from `from_days`: original payment dates strictly
    /// after the valuation date. The floating leg restarts with a stub
    /// accruing from the valuation date (its true rate fixed in the past is
    /// not representable in a forward-starting strip), while the fixed leg
    /// keeps its full running coupon, which the actual exposure carries.
    pub fn residual_from(&self, from_days: i64) -> Option<SwapCashflows> {
        if from_days >= self.maturity_days() {
            return None;
        }
        let from = from_days.max(self.start_days());
        let mut float_days = vec![from];
        float_days.extend(self.float_days.iter().copied().filter(|&d| d > from));
        let fixed_start = self
            .fixed_days
            .iter()
            .copied().rfind(|&d| d <= from)
            .unwrap_or(from);
        let mut fixed_days = vec![fixed_start];
        fixed_days.extend(self.fixed_days.iter().copied().filter(|&d| d > from));
        Some(SwapCashflows {
            notional: self.notional,
            omega: self.omega,
            fixed_rate: self.fixed_rate,
            float_days,
            fixed_days,
            conv: self.conv,
        })
    }

    /// Index j of the coupon spanning the valuation date (T_{j-1} < v <= T_j),
    /// whose rate has already fixed.
    pub fn running_coupon(&self, v_days: i64) -> Option<usize> {
        (1..self.float_days.len())
            .find(|&j| self.float_days[j - 1] < v_days && v_days <= self.float_days[j])
    }
}

/// A physically settled European swaption on a [`SwapSpec`] underlying.
#[derive(Debug, Clone)]
pub struct SwaptionSpec {
    pub swap: SwapSpec,
    pub expiry_months: u32,
    /// Constant log-normal shift for Black quotations of this underlying.
    pub black_shift: f64,
}

impl SwaptionSpec {
    pub fn expiry_days(&self) -> i64 {
        crate::time::months_to_days(self.expiry_months)
    }
}

/// A trade the engine can simulate.
#[derive(Debug, Clone)]
pub enum Instrument {
    Swap(SwapSpec),
    Swaption(SwaptionSpec),
}

impl Instrument {
    pub fn underlying_swap(&self) -> &SwapSpec {
        match self {
            Instrument::Swap(s) => s,
            Instrument::Swaption(s) => &s.swap,
        }
    }

    pub fn maturity_days(&self) -> i64 {
        self.underlying_swap().maturity_days()
    }

    pub fn label_kind(&self) -> &'static str {
        match self {
            Instrument::Swap(_) => "swap",
            Instrument::Swaption(_) => "swaption",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_share_endpoints() {
        let spec = SwapSpec::new(1e8, 1.0, 0.0117, 0, 180);
        let cf = spec.cashflows();
        assert_eq!(cf.float_days.len(), 31);
        assert_eq!(cf.fixed_days.len(), 16);
        assert_eq!(cf.float_days[0], cf.fixed_days[0]);
        assert_eq!(cf.float_days.last(), cf.fixed_days.last());
        for d in &cf.fixed_days {
            assert!(cf.float_days.contains(d));
        }
    }

    #[test]
    fn running_coupon_detection() {
        let cf = SwapSpec::new(1.0, 1.0, 0.01, 0, 24).cashflows();
        assert_eq!(cf.float_days, vec![0, 183, 365, 548, 730]);
        assert_eq!(cf.running_coupon(0), None);
        assert_eq!(cf.running_coupon(1), Some(1));
        assert_eq!(cf.running_coupon(183), Some(1));
        assert_eq!(cf.running_coupon(184), Some(2));
        assert_eq!(cf.running_coupon(731), None);
    }

    #[test]
    fn residual_swap_truncates_with_stub() {
        let cf = SwapSpec::new(1.0, 1.0, 0.01, 0, 24).cashflows();
        let r = cf.residual_from(200).unwrap();
        assert_eq!(r.float_days, vec![200, 365, 548, 730]);
        // The fixed leg keeps its full running coupon.
        assert_eq!(r.fixed_days, vec![0, 365, 730]);
        assert!(cf.residual_from(730).is_none());
        // Before the start the original schedules are untouched.
        let fwd = SwapSpec::new(1.0, 1.0, 0.01, 60, 24).cashflows();
        let r = fwd.residual_from(100).unwrap();
        assert_eq!(r.float_days, fwd.float_days);
    }
}

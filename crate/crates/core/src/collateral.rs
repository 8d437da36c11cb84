//! Collateralized-exposure building blocks: the valuation grid with its
//! margin-period-of-risk look-back companion, the variation-margin
//! recursion and the clipped exposure.

use crate::time::{months_to_days, GridStep};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    Standard,
    /// Standard grid plus a point one day after every floating coupon date,
    /// so the exposure spike inside each (T_j, T_j + l] window is sampled.
    Joint,
    Daily,
}

impl GridKind {
    pub fn label(self) -> &'static str {
        match self {
            GridKind::Standard => "standard",
            GridKind::Joint => "joint",
            GridKind::Daily => "daily",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Some(GridKind::Standard),
            "joint" => Some(GridKind::Joint),
            "daily" => Some(GridKind::Daily),
            _ => None,
        }
    }
}

/// CSA terms: thresholds and minimum transfer amounts per margin type plus
/// the margin-period-of-risk lag in calendar days.
#[derive(Debug, Clone, Copy)]
pub struct CsaTerms {
    pub k_vm: f64,
    pub mta_vm: f64,
    pub k_im: f64,
    pub mta_im: f64,
    pub mpor_lag_days: i64,
}

impl CsaTerms {
    pub fn frictionless(mpor_lag_days: i64) -> Self {
        CsaTerms {
            k_vm: 0.0,
            mta_vm: 0.0,
            k_im: 0.0,
            mta_im: 0.0,
            mpor_lag_days,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_vm < 0.0
            || self.mta_vm < 0.0
            || self.k_im < 0.0
            || self.mta_im < 0.0
            || self.mpor_lag_days < 0
        {
            return Err(Error::InvalidInput(
                "CSA amounts and MPoR lag must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Valuation grid plus, for each point after the first, the look-back point
/// at which collateral is determined.
#[derive(Debug, Clone)]
pub struct TimeGridPair {
    pub primary_days: Vec<i64>,
    /// `lookback_days[i]` pairs with `primary_days[i]`; index 0 is unused and
    /// set to 0.
    pub lookback_days: Vec<i64>,
    pub step: GridStep,
    pub kind: GridKind,
}

/// Builds the primary and look-back grids to `maturity_days`. Joint grids
/// add T_j + 1d for every floating coupon date inside the horizon; a
/// maturity that is not a step multiple shortens the last interval.
pub fn build_grids(
    maturity_days: i64,
    step: GridStep,
    kind: GridKind,
    float_coupon_days: &[i64],
    mpor_lag_days: i64,
) -> Result<TimeGridPair> {
    if maturity_days <= 0 {
        return Err(Error::InvalidInput("maturity must be positive".into()));
    }
    if mpor_lag_days < 0 {
        return Err(Error::InvalidInput("MPoR lag must be >= 0".into()));
    }
    let mut days: Vec<i64> = match step {
        GridStep::Daily => (0..=maturity_days).collect(),
        GridStep::Months(m) => {
            let mut v = Vec::new();
            let mut k = 0u32;
            loop {
                let d = months_to_days(k * m);
                if d >= maturity_days {
                    break;
                }
                v.push(d);
                k += 1;
            }
            v.push(maturity_days);
            v
        }
    };
    if kind == GridKind::Joint {
        for &t in float_coupon_days {
            let spike = t + 1;
            if t > 0 && spike <= maturity_days {
                days.push(spike);
            }
        }
    }
    days.sort_unstable();
    days.dedup();
    let lookback_days = days
        .iter()
        .map(|&d| (d - mpor_lag_days).max(0))
        .collect();
    Ok(TimeGridPair {
        primary_days: days,
        lookback_days,
        step,
        kind,
    })
}

/// One update of the variation-margin account. `prev_vm` is the margin
/// after the previous look-back date, `accrual_df` the discount factor
/// P(prev look-back, this look-back) growing it to today, `v0_lookback` the
/// mark at the current look-back date. Threshold and MTA gate the two
/// one-sided top-ups.
pub fn vm_update(prev_vm: f64, accrual_df: f64, v0_lookback: f64, terms: &CsaTerms) -> f64 {
    let vm_hat = prev_vm / accrual_df;
    let pos_target = (v0_lookback - terms.k_vm).max(0.0);
    let neg_target = (v0_lookback + terms.k_vm).min(0.0);
    let pos_gap = pos_target - vm_hat.max(0.0);
    let neg_gap = neg_target - vm_hat.min(0.0);
    let mut vm = vm_hat;
    if pos_gap.abs() > terms.mta_vm {
        vm += pos_gap;
    }
    if neg_gap.abs() > terms.mta_vm {
        vm += neg_gap;
    }
    vm
}

/// Threshold/MTA gate for the initial margin amount actually posted.
pub fn im_posted(im_raw: f64, terms: &CsaTerms) -> f64 {
    let excess = (im_raw - terms.k_im).max(0.0);
    if excess > terms.mta_im {
        excess
    } else {
        0.0
    }
}

/// Collateralized exposure: the mark net of VM and of IM on whichever side
/// the mark lies, clipped so collateral never flips the sign.
pub fn assemble_exposure(v0: f64, vm: f64, im: f64) -> Result<f64> {
    if im < 0.0 {
        return Err(Error::InvalidInput(format!("negative IM: {im}")));
    }
    Ok(if v0 > 0.0 {
        (v0 - vm - im).max(0.0)
    } else if v0 < 0.0 {
        (v0 - vm + im).min(0.0)
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::schedule_days;
    use proptest::prelude::*;

    #[test]
    fn standard_15y_annual_grid_has_16_points() {
        let g = build_grids(5475, GridStep::Months(12), GridKind::Standard, &[], 2).unwrap();
        assert_eq!(g.primary_days.len(), 16);
        assert_eq!(g.primary_days[0], 0);
        assert_eq!(*g.primary_days.last().unwrap(), 5475);
        assert_eq!(g.lookback_days[1], g.primary_days[1] - 2);
    }

    #[test]
    fn joint_grid_adds_post_coupon_points() {
        let coupons = schedule_days(0, 180, 6);
        let std = build_grids(5475, GridStep::Months(1), GridKind::Standard, &coupons, 2).unwrap();
        let joint = build_grids(5475, GridStep::Months(1), GridKind::Joint, &coupons, 2).unwrap();
        assert_eq!(std.primary_days.len(), 181);
        // 29 spike points: the final coupon's T+1 falls beyond maturity.
        assert_eq!(joint.primary_days.len(), 210);
        // Joint contains every standard point, and a point in (T_j, T_j+l]
        // for every coupon date inside the horizon.
        for d in &std.primary_days {
            assert!(joint.primary_days.contains(d));
        }
        for &t in coupons.iter().filter(|&&t| t > 0 && t < 5475) {
            assert!(joint
                .primary_days
                .iter()
                .any(|&d| d > t && d <= t + 2));
        }
        // Spike points look back to the day before the coupon.
        let spike_pos = joint.primary_days.iter().position(|&d| d == 184).unwrap();
        assert_eq!(joint.lookback_days[spike_pos], 182);
    }

    #[test]
    fn daily_joint_equals_daily_standard() {
        let coupons = schedule_days(0, 24, 6);
        let std = build_grids(730, GridStep::Daily, GridKind::Standard, &coupons, 2).unwrap();
        let joint = build_grids(730, GridStep::Daily, GridKind::Joint, &coupons, 2).unwrap();
        assert_eq!(std.primary_days, joint.primary_days);
        // Look-back points clip at the anchor.
        assert_eq!(joint.lookback_days[1], 0);
        assert_eq!(joint.lookback_days[3], 1);
    }

    #[test]
    fn short_maturity_truncates_last_interval() {
        let g = build_grids(100, GridStep::Months(1), GridKind::Standard, &[], 0).unwrap();
        assert_eq!(*g.primary_days.last().unwrap(), 100);
        assert_eq!(g.primary_days[g.primary_days.len() - 2], 91);
    }

    #[test]
    fn vm_recursion_hand_cases() {
        let free = CsaTerms::frictionless(2);
        // Frictionless full tracking: VM lands exactly on the mark.
        assert_eq!(vm_update(7.0, 1.0, 3.0, &free), 3.0);
        assert_eq!(vm_update(-4.0, 1.0, 2.5, &free), 2.5);
        // Threshold: (7 - 5)+ - 0 = 2.
        let k5 = CsaTerms {
            k_vm: 5e6,
            ..CsaTerms::frictionless(2)
        };
        assert_eq!(vm_update(0.0, 1.0, 7e6, &k5), 2e6);
        // Inside the MTA nothing moves: both indicator gates are shut.
        let mta = CsaTerms {
            mta_vm: 1.0,
            ..CsaTerms::frictionless(2)
        };
        let vm = vm_update(10.0, 1.0, 10.5, &mta);
        assert_eq!(vm, 10.0);
        // Accrual grows the carried balance before comparison.
        let vm = vm_update(10.0, 0.5, 30.0, &free);
        assert_eq!(vm, 30.0);
        let vm = vm_update(10.0, 0.5, 20.0, &mta);
        assert_eq!(vm, 20.0);
    }

    #[test]
    fn infinite_mta_freezes_vm_at_zero() {
        let terms = CsaTerms {
            mta_vm: f64::INFINITY,
            ..CsaTerms::frictionless(2)
        };
        let mut vm = 0.0;
        for v0 in [5.0, -3.0, 100.0, -250.0] {
            vm = vm_update(vm, 1.0, v0, &terms);
            assert_eq!(vm, 0.0);
        }
    }

    #[test]
    fn exposure_assembly_cases() {
        assert_eq!(assemble_exposure(10.0, 0.0, 0.0).unwrap(), 10.0);
        assert_eq!(assemble_exposure(-10.0, 0.0, 0.0).unwrap(), -10.0);
        assert_eq!(assemble_exposure(10.0, 10.0, 3.0).unwrap(), 0.0);
        assert_eq!(assemble_exposure(10.0, 9.0, 0.5).unwrap(), 0.5);
        assert_eq!(assemble_exposure(10.0, 9.0, 2.0).unwrap(), 0.0);
        assert_eq!(assemble_exposure(-10.0, -9.0, 0.5).unwrap(), -0.5);
        assert_eq!(assemble_exposure(0.0, 4.0, 1.0).unwrap(), 0.0);
        assert!(assemble_exposure(1.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn im_posting_gate() {
        let t = CsaTerms {
            k_im: 5e6,
            mta_im: 0.0,
            ..CsaTerms::frictionless(2)
        };
        assert_eq!(im_posted(3e6, &t), 0.0);
        assert_eq!(im_posted(8e6, &t), 3e6);
        let t = CsaTerms {
            mta_im: 1e6,
            ..CsaTerms::frictionless(2)
        };
        assert_eq!(im_posted(0.9e6, &t), 0.0);
        assert_eq!(im_posted(1.1e6, &t), 1.1e6);
    }

    proptest! {
        /// IM never increases the exposure magnitude, pointwise.
        #[test]
        fn im_never_increases_exposure(v0 in -1e8f64..1e8, vm in -1e8f64..1e8, im in 0f64..1e8) {
            let with_im = assemble_exposure(v0, vm, im).unwrap();
            let without = assemble_exposure(v0, vm, 0.0).unwrap();
            prop_assert!(with_im.abs() <= without.abs() + 1e-9);
            prop_assert!(with_im == 0.0 || with_im.signum() == v0.signum());
        }

        /// Frictionless VM tracks the look-back mark exactly, so a zero-lag
        /// CSA suppresses the exposure completely.
        #[test]
        fn perfect_collateral_limit(v0s in proptest::collection::vec(-1e7f64..1e7, 1..40)) {
            let terms = CsaTerms::frictionless(0);
            let mut vm = 0.0;
            for v0 in v0s {
                vm = vm_update(vm, 1.0, v0, &terms);
                prop_assert!((assemble_exposure(v0, vm, 0.0).unwrap()).abs() < 1e-9 * (1.0 + v0.abs()));
            }
        }
    }
}

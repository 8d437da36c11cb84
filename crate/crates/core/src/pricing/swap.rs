//! Multi-curve swap valuation, both directly off discount/forwarding curves
//! and from a simulated factor state through the deterministic-shift
//! reconstruction.

use super::SwapCashflows;
use crate::g2pp::{a_factor, b_factor, G2ppParams};
use crate::marketdata::{CurveView, ZeroCurve};
use crate::time::years_from_days;
use crate::Result;

/// Swap price at `v_days` off a curve pair. The coupon spanning the
/// valuation date uses `fixing` (its rate is no longer a curve read);
/// coupons paying on the valuation date itself are still included.
pub fn swap_price_curves(
    cf: &SwapCashflows,
    view: &CurveView,
    v_days: i64,
    fixing: Option<f64>,
) -> Result<f64> {
    let running = cf.running_coupon(v_days);
    let mut float_leg = 0.0;
    for j in 1..cf.float_days.len() {
        let (d0, d1) = (cf.float_days[j - 1], cf.float_days[j]);
        if d1 < v_days {
            continue;
        }
        let tau_r = cf.conv.float_dc.year_fraction(d0, d1);
        let df_pay = view.df_discount(d1)?;
        let rate = if running == Some(j) {
            fixing.ok_or_else(|| {
                crate::Error::InvalidInput(format!(
                    "coupon spanning {v_days}d needs a fixing for the period starting {d0}d"
                ))
            })?
        } else {
            let tau_f = cf.conv.fra_dc.year_fraction(d0, d1);
            (view.df_forward(d0)? / view.df_forward(d1)? - 1.0) / tau_f
        };
        float_leg += rate * tau_r * df_pay;
    }
    let mut annuity = 0.0;
    for i in 1..cf.fixed_days.len() {
        let (d0, d1) = (cf.fixed_days[i - 1], cf.fixed_days[i]);
        if d1 < v_days {
            continue;
        }
        annuity += cf.conv.fixed_dc.year_fraction(d0, d1) * view.df_discount(d1)?;
    }
    Ok(cf.notional * cf.omega * (float_leg - cf.fixed_rate * annuity))
}

/// Fixed-leg annuity A(v; S) off the discount curve.
pub fn swap_annuity(cf: &SwapCashflows, view: &CurveView, v_days: i64) -> Result<f64> {
    let mut annuity = 0.0;
    for i in 1..cf.fixed_days.len() {
        let (d0, d1) = (cf.fixed_days[i - 1], cf.fixed_days[i]);
        if d1 < v_days {
            continue;
        }
        annuity += cf.conv.fixed_dc.year_fraction(d0, d1) * view.df_discount(d1)?;
    }
    Ok(annuity)
}

/// Forward par rate of the swap as seen from `v_days` (no running coupon).
pub fn par_swap_rate(cf: &SwapCashflows, view: &CurveView, v_days: i64) -> Result<f64> {
    let mut float_leg = 0.0;
    for j in 1..cf.float_days.len() {
        let (d0, d1) = (cf.float_days[j - 1], cf.float_days[j]);
        if d1 < v_days {
            continue;
        }
        let tau_r = cf.conv.float_dc.year_fraction(d0, d1);
        let tau_f = cf.conv.fra_dc.year_fraction(d0, d1);
        let fwd = (view.df_forward(d0)? / view.df_forward(d1)? - 1.0) / tau_f;
        float_leg += fwd * tau_r * view.df_discount(d1)?;
    }
    Ok(float_leg / swap_annuity(cf, view, v_days)?)
}

/// The deterministic multi-curve basis factor of coupon j:
/// psi_j = [P_d(t;T_j) P_x(t;T_{j-1})] / [P_d(t;T_{j-1}) P_x(t;T_j)].
/// Model-independent given the fitted shifts, so it is read off the curves
/// observed at the view's anchor and reused at every future state.
pub fn psi_factors(cf: &SwapCashflows, view: &CurveView) -> Result<Vec<f64>> {
    let mut psi = Vec::with_capacity(cf.float_days.len());
    psi.push(f64::NAN); // index 0 unused
    for j in 1..cf.float_days.len() {
        let (d0, d1) = (cf.float_days[j - 1], cf.float_days[j]);
        let p = view.df_discount(d1)? / view.df_discount(d0)? * view.df_forward(d0)?
            / view.df_forward(d1)?;
        psi.push(p);
    }
    Ok(psi)
}

/// Precomputed state-pricing kernel for one valuation time: the swap price
/// is an explicit function of (x, y) through state-dependent discount bonds.
#[derive(Debug, Clone)]
pub struct SwapStateKernel {
    pub v_days: i64,
    notional: f64,
    omega: f64,
    /// Future full coupons: (ratio tau_R/tau_F, psi_j, A/B at start date, A/B at pay date).
    float_terms: Vec<FloatTerm>,
    /// Running coupon: (tau_R, A/B at pay date); rate supplied at call time.
    running: Option<RunningTerm>,
    running_coupon_idx: Option<usize>,
    /// Fixed coupons: K tau_K with A/B at pay date.
    fixed_terms: Vec<(f64, Bond)>,
}

#[derive(Debug, Clone, Copy)]
struct Bond {
    a: f64,
    ba: f64,
    bb: f64,
}

impl Bond {
    #[inline]
    fn price(&self, x: f64, y: f64) -> f64 {
        self.a * (-self.ba * x - self.bb * y).exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct FloatTerm {
    ratio: f64,
    psi: f64,
    start: Bond,
    pay: Bond,
}

#[derive(Debug, Clone, Copy)]
struct RunningTerm {
    tau_r: f64,
    pay: Bond,
}

impl SwapStateKernel {
    pub fn build(
        cf: &SwapCashflows,
        params: &G2ppParams,
        discount: &ZeroCurve,
        forward: &ZeroCurve,
        v_days: i64,
    ) -> Result<Self> {
        let v = years_from_days(v_days);
        let bond = |pay_days: i64| -> Result<Bond> {
            let t = years_from_days(pay_days);
            Ok(Bond {
                a: a_factor(params, discount, v, t)?,
                ba: b_factor(params.a, v, t),
                bb: b_factor(params.b, v, t),
            })
        };
        let psi = psi_factors(
            cf,
            &CurveView {
                anchor_days: 0,
                discount,
                forward,
            },
        )?;
        let running_idx = cf.running_coupon(v_days);
        let mut float_terms = Vec::new();
        let mut running = None;
        for j in 1..cf.float_days.len() {
            let (d0, d1) = (cf.float_days[j - 1], cf.float_days[j]);
            if d1 < v_days {
                continue;
            }
            let tau_r = cf.conv.float_dc.year_fraction(d0, d1);
            if running_idx == Some(j) {
                running = Some(RunningTerm {
                    tau_r,
                    pay: bond(d1)?,
                });
            } else {
                let tau_f = cf.conv.fra_dc.year_fraction(d0, d1);
                float_terms.push(FloatTerm {
                    ratio: tau_r / tau_f,
                    psi: psi[j],
                    start: bond(d0)?,
                    pay: bond(d1)?,
                });
            }
        }
        let mut fixed_terms = Vec::new();
        for i in 1..cf.fixed_days.len() {
            let (d0, d1) = (cf.fixed_days[i - 1], cf.fixed_days[i]);
            if d1 < v_days {
                continue;
            }
            let tau_k = cf.conv.fixed_dc.year_fraction(d0, d1);
            fixed_terms.push((cf.fixed_rate * tau_k, bond(d1)?));
        }
        Ok(SwapStateKernel {
            v_days,
            notional: cf.notional,
            omega: cf.omega,
            float_terms,
            running,
            running_coupon_idx: running_idx,
            fixed_terms,
        })
    }

    pub fn running_coupon_idx(&self) -> Option<usize> {
        self.running_coupon_idx
    }

    /// Price given the factor state; `fixing` is the rate of the running
    /// coupon when one exists.
    pub fn price(&self, x: f64, y: f64, fixing: Option<f64>) -> Result<f64> {
        let mut value = 0.0;
        for t in &self.float_terms {
            value += t.ratio * (t.psi * t.start.price(x, y) - t.pay.price(x, y));
        }
        if let Some(r) = &self.running {
            let rate = fixing.ok_or_else(|| {
                crate::Error::InvalidInput(format!(
                    "state price at {}d needs the running-coupon fixing",
                    self.v_days
                ))
            })?;
            value += rate * r.tau_r * r.pay.price(x, y);
        }
        for (amount, bond) in &self.fixed_terms {
            value -= amount * bond.price(x, y);
        }
        Ok(self.notional * self.omega * value)
    }
}

/// Swap mark-to-future at `v_days` in state (x, y); see [`SwapStateKernel`]
/// for the reusable form.
pub fn swap_price_state(
    cf: &SwapCashflows,
    params: &G2ppParams,
    discount: &ZeroCurve,
    forward: &ZeroCurve,
    v_days: i64,
    x: f64,
    y: f64,
    fixing: Option<f64>,
) -> Result<f64> {
    SwapStateKernel::build(cf, params, discount, forward, v_days)?.price(x, y, fixing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g2pp::PiecewiseGamma;
    use crate::marketdata::{workspace_data_dir, MarketSnapshot};
    use crate::pricing::SwapSpec;

    fn market() -> MarketSnapshot {
        MarketSnapshot::load(&workspace_data_dir(), 0.4).unwrap()
    }

    fn params() -> G2ppParams {
        let gamma = PiecewiseGamma::new(
            crate::g2pp::quoted_expiry_gamma_breaks(),
            vec![
                0.9530, 0.9781, 1.0895, 1.0709, 1.0032, 1.0776, 1.0488, 1.0186, 1.1000, 0.9608,
                1.0114, 0.9553, 0.9629, 0.9340,
            ],
        )
        .unwrap();
        G2ppParams::new(1.1664, 0.0304, 0.0501, 0.0084, -1.0, gamma).unwrap()
    }

    #[test]
    fn par_rate_prices_to_zero_and_payer_receiver_cancel() {
        let m = market();
        let view = m.curves();
        let cf15 = SwapSpec::new(1e8, 1.0, 0.0, 0, 180).cashflows();
        let par = par_swap_rate(&cf15, &view, 0).unwrap();
        let payer = SwapSpec::new(1e8, 1.0, par, 0, 180).cashflows();
        let v = swap_price_curves(&payer, &view, 0, None).unwrap();
        assert!(v.abs() < 1e-6, "par swap should be worth ~0, got {v}");
        let recv = SwapSpec::new(1e8, -1.0, 0.0117, 0, 180).cashflows();
        let pay = SwapSpec::new(1e8, 1.0, 0.0117, 0, 180).cashflows();
        let s = swap_price_curves(&recv, &view, 0, None).unwrap()
            + swap_price_curves(&pay, &view, 0, None).unwrap();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn paper_atm_strikes_are_near_par() {
        // The published strike grid is ATM: |price| < 0.1% of notional.
        let m = market();
        let view = m.curves();
        for (strike, start, tenor) in [
            (0.0117, 0u32, 180u32),
            (0.0138, 0, 360),
            (0.0170, 60, 120),
        ] {
            let cf = SwapSpec::new(1e8, 1.0, strike, start, tenor).cashflows();
            let v = swap_price_curves(&cf, &view, 0, None).unwrap();
            assert!(
                v.abs() < 1e5,
                "ATM strike {strike} start {start}m: price {v} >= 0.1% notional"
            );
        }
    }

    #[test]
    fn state_price_matches_curve_price_at_anchor() {
        let m = market();
        let view = m.curves();
        let p = params();
        for (omega, strike, start, tenor) in [
            (1.0, 0.0167, 0u32, 180u32),
            (1.0, 0.0117, 0, 180),
            (-1.0, 0.0120, 60, 120),
            (1.0, 0.0220, 60, 120),
            (1.0, 0.0088, 0, 360),
        ] {
            let cf = SwapSpec::new(1e8, omega, strike, start, tenor).cashflows();
            let curve_v = swap_price_curves(&cf, &view, 0, None).unwrap();
            let state_v =
                swap_price_state(&cf, &p, &m.discount, &m.forward, 0, 0.0, 0.0, None).unwrap();
            let denom = curve_v.abs().max(1.0);
            assert!(
                ((state_v - curve_v) / denom).abs() < 1e-9,
                "omega {omega} K {strike}: curve {curve_v} vs state {state_v}"
            );
        }
    }

    #[test]
    fn value_after_last_coupon_is_zero() {
        let m = market();
        let p = params();
        let cf = SwapSpec::new(1e8, 1.0, 0.0117, 0, 24).cashflows();
        let v = swap_price_state(&cf, &p, &m.discount, &m.forward, 731, 0.01, -0.02, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn running_coupon_requires_fixing() {
        let m = market();
        let p = params();
        let cf = SwapSpec::new(1e8, 1.0, 0.0117, 0, 180).cashflows();
        assert!(swap_price_state(&cf, &p, &m.discount, &m.forward, 200, 0.0, 0.0, None).is_err());
        let v = swap_price_state(&cf, &p, &m.discount, &m.forward, 200, 0.0, 0.0, Some(-0.002))
            .unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn multi_curve_coefficient_structure_of_two_year_example() {
        // Grouping the state-price terms by discount bond reproduces the
        // even/odd coefficient pattern: c0 = psi_1 and
        //   c_j = [1 - psi_{j+1} + K tau 1{fixed date}] / c0, c_n = [1 + K tau]/c0
        // for the 2y semi-annual/annual swap.
        let m = market();
        let cf = SwapSpec::new(1.0, 1.0, 0.02, 0, 24).cashflows();
        let psi = psi_factors(&cf, &m.curves()).unwrap();
        let chat = super::super::swaption::chat_coefficients(&cf, &psi).unwrap();
        assert_eq!(chat.c.len(), 4);
        let c0 = psi[1];
        assert!((chat.c0 - c0).abs() < 1e-15);
        let tau1 = cf.conv.fixed_dc.year_fraction(0, 365);
        let tau2 = cf.conv.fixed_dc.year_fraction(365, 730);
        assert!((chat.c[0] - (1.0 - psi[2]) / c0).abs() < 1e-15);
        assert!((chat.c[1] - (1.0 - psi[3] + 0.02 * tau1) / c0).abs() < 1e-15);
        assert!((chat.c[2] - (1.0 - psi[4]) / c0).abs() < 1e-15);
        assert!((chat.c[3] - (1.0 + 0.02 * tau2) / c0).abs() < 1e-15);
    }
}

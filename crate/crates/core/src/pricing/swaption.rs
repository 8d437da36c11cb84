//! European swaption valuation under the multi-curve G2++ model: the swap
//! is rewritten as a single-curve bond basket through the psi factors, and
//! the price reduces to a one-dimensional Gaussian integral with an inner
//! root solve for the exercise boundary in the second factor.

use super::swap::psi_factors;
use super::{SwapCashflows, SwaptionSpec};
use crate::g2pp::{a_factor_from, b_factor, conditional_law, forward_drift, G2ppParams};
use crate::marketdata::{CurveView, MarketSnapshot};
use crate::math::{gauss_legendre, norm_cdf, norm_pdf};
use crate::time::years_from_days;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadratureCfg {
    /// Starting Gauss-Legendre order.
    pub order: usize,
    /// Relative doubling tolerance; <= 0 runs a single fixed-order pass.
    pub tol: f64,
    pub max_order: usize,
    /// Half-width of the integration window in conditional standard deviations.
    pub width_sd: f64,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        QuadratureCfg {
            order: 256,
            tol: 1e-10,
            max_order: 4096,
            width_sd: 10.0,
        }
    }
}

impl QuadratureCfg {
    /// Fixed-order variant for bump sensitivities, where the quadrature
    /// error cancels in the finite difference.
    pub fn fixed(order: usize) -> Self {
        QuadratureCfg {
            order,
            tol: 0.0,
            max_order: order,
            width_sd: 10.0,
        }
    }
}

/// Coefficients of the single-curve reformulation: the swap price equals
/// c0 * omega * [P_d(t;T_0) - sum_j c[j-1] P_d(t;T_j)].
#[derive(Debug, Clone)]
pub struct ChatCoefficients {
    pub c0: f64,
    pub c: Vec<f64>,
}

pub fn chat_coefficients(cf: &SwapCashflows, psi: &[f64]) -> Result<ChatCoefficients> {
    let n = cf.float_days.len() - 1;
    if n == 0 {
        return Err(Error::InvalidInput("swap has no coupons".into()));
    }
    // K tau_K keyed by fixed pay date; fixed dates must sit on float dates.
    let mut fixed_amount = vec![0.0; n + 1];
    for i in 1..cf.fixed_days.len() {
        let d = cf.fixed_days[i];
        let j = cf
            .float_days
            .iter()
            .position(|&f| f == d)
            .ok_or_else(|| {
                Error::InvalidInput(format!("fixed date {d}d is not a floating date"))
            })?;
        fixed_amount[j] =
            cf.fixed_rate * cf.conv.fixed_dc.year_fraction(cf.fixed_days[i - 1], d);
    }
    let ratio = |j: usize| {
        let (d0, d1) = (cf.float_days[j - 1], cf.float_days[j]);
        cf.conv.float_dc.year_fraction(d0, d1) / cf.conv.fra_dc.year_fraction(d0, d1)
    };
    let c0 = ratio(1) * psi[1];
    let mut c = Vec::with_capacity(n);
    for j in 1..=n {
        let mut v = ratio(j) + fixed_amount[j];
        if j != n {
            v -= ratio(j + 1) * psi[j + 1];
        }
        c.push(v / c0);
    }
    Ok(ChatCoefficients { c0, c })
}

/// Everything the one-dimensional integral needs for one valuation time.
/// Built once, then priced per factor state: the conditional mean of
/// (x, y) at expiry is the only state-dependent input.
#[derive(Debug, Clone)]
pub struct SwaptionKernel {
    pub notional: f64,
    pub omega: f64,
    c0: f64,
    chat: Vec<f64>,
    /// A_d(T_e;T_j) and the two B factors per coupon date.
    a_j: Vec<f64>,
    ba_j: Vec<f64>,
    bb_j: Vec<f64>,
    /// Conditional law of (x, y) at expiry given the valuation time.
    drift_x: f64,
    drift_y: f64,
    decay_x: f64,
    decay_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    rho_xy: f64,
    /// Discount bond to expiry: A and B factors at the valuation time.
    a_e: f64,
    ba_e: f64,
    bb_e: f64,
}

impl SwaptionKernel {
    /// `view` holds the curves observed at the valuation time (anchor), and
    /// `shift_anchor_years` is the time at which the deterministic shift was
    /// fitted to them: 0 for the t0 market curves, the valuation time itself
    /// for simulated curves.
    pub fn build(
        cf: &SwapCashflows,
        params: &G2ppParams,
        view: &CurveView,
        shift_anchor_years: f64,
        expiry_days: i64,
    ) -> Result<Self> {
        Self::build_inner(cf, params, view, shift_anchor_years, view.anchor_days, expiry_days)
    }

    /// Market-anchored kernel for a future valuation date: the t0 curves
    /// supply the deterministic factors while the factor state enters only
    /// through `price(x, y, ..)`.
    pub fn build_at(
        cf: &SwapCashflows,
        params: &G2ppParams,
        market: &crate::marketdata::MarketSnapshot,
        valuation_days: i64,
        expiry_days: i64,
    ) -> Result<Self> {
        Self::build_inner(cf, params, &market.curves(), 0.0, valuation_days, expiry_days)
    }

    fn build_inner(
        cf: &SwapCashflows,
        params: &G2ppParams,
        view: &CurveView,
        shift_anchor_years: f64,
        valuation_days: i64,
        expiry_days: i64,
    ) -> Result<Self> {
        if cf.start_days() != expiry_days {
            return Err(Error::Unsupported(format!(
                "swaption quadrature requires expiry = underlying start ({}d != {}d)",
                expiry_days,
                cf.start_days()
            )));
        }
        let t_v = years_from_days(valuation_days);
        let t_e = years_from_days(expiry_days);
        if t_e < t_v {
            return Err(Error::InvalidInput(format!(
                "expiry {t_e}y before valuation {t_v}y"
            )));
        }
        let psi = psi_factors(cf, view)?;
        let chat = chat_coefficients(cf, &psi)?;
        let df_e = view.df_discount(expiry_days)?;
        let n = cf.float_days.len() - 1;
        let mut a_j = Vec::with_capacity(n);
        let mut ba_j = Vec::with_capacity(n);
        let mut bb_j = Vec::with_capacity(n);
        for j in 1..=n {
            let d = cf.float_days[j];
            let t_j = years_from_days(d);
            let ratio = view.df_discount(d)? / df_e;
            a_j.push(a_factor_from(params, ratio, shift_anchor_years, t_e, t_j)?);
            ba_j.push(b_factor(params.a, t_e, t_j));
            bb_j.push(b_factor(params.b, t_e, t_j));
        }
        let (sigma_x, sigma_y, rho_xy) = conditional_law(params, t_v, t_e);
        let (drift_x, drift_y) = forward_drift(params, t_v, t_e, t_e);
        let df_v = view.df_discount(valuation_days)?;
        let a_e = a_factor_from(params, df_e / df_v, shift_anchor_years, t_v, t_e)?;
        Ok(SwaptionKernel {
            notional: cf.notional,
            omega: cf.omega,
            c0: chat.c0,
            chat: chat.c,
            a_j,
            ba_j,
            bb_j,
            drift_x,
            drift_y,
            decay_x: (-params.a * (t_e - t_v)).exp(),
            decay_y: (-params.b * (t_e - t_v)).exp(),
            sigma_x,
            sigma_y,
            rho_xy,
            a_e,
            ba_e: b_factor(params.a, t_v, t_e),
            bb_e: b_factor(params.b, t_v, t_e),
        })
    }

    /// Price in factor state (x, y) at the kernel's valuation time.
    pub fn price(&self, x: f64, y: f64, quad: &QuadratureCfg) -> Result<f64> {
        if self.sigma_x <= 0.0 || self.sigma_y <= 0.0 {
            return Err(Error::InvalidInput(
                "degenerate conditional law: expiry at valuation time".into(),
            ));
        }
        let mu_x = x * self.decay_x - self.drift_x;
        let mu_y = y * self.decay_y - self.drift_y;
        let discount = self.a_e * (-self.ba_e * x - self.bb_e * y).exp();
        let mut order = quad.order;
        let mut prev: Option<f64> = None;
        loop {
            let integral = self.integral(mu_x, mu_y, order, quad.width_sd)?;
            if quad.tol <= 0.0 {
                return Ok(self.assemble(discount, integral));
            }
            if let Some(p) = prev {
                if (integral - p).abs() <= quad.tol * integral.abs().max(1e-300) + 1e-18 {
                    return Ok(self.assemble(discount, integral));
                }
            }
            prev = Some(integral);
            if order >= quad.max_order {
                return Err(Error::Quadrature(format!(
                    "no convergence at order {order} (tol {})",
                    quad.tol
                )));
            }
            order *= 2;
        }
    }

    fn assemble(&self, discount: f64, integral: f64) -> f64 {
        (self.notional * self.c0 * self.omega * discount * integral).max(0.0)
    }

    fn integral(&self, mu_x: f64, mu_y: f64, order: usize, width_sd: f64) -> Result<f64> {
        let (nodes, weights) = gauss_legendre(order);
        let width = self.sigma_x * width_sd;
        let lo = mu_x - width;
        let scale = width; // (hi - lo) / 2
        let one_m_r2 = (1.0 - self.rho_xy * self.rho_xy).max(1e-16);
        let s = one_m_r2.sqrt();
        let mut total = 0.0;
        let mut y_guess = mu_y;
        for (node, w) in nodes.iter().zip(weights) {
            let xq = lo + scale * (node + 1.0);
            let ybar = self.solve_ybar(xq, y_guess)?;
            y_guess = ybar;
            let std_x = (xq - mu_x) / self.sigma_x;
            let h1 = (ybar - mu_y) / (self.sigma_y * s) - self.rho_xy * std_x / s;
            let mut sum = 0.0;
            for j in 0..self.chat.len() {
                let lambda = self.chat[j] * self.a_j[j] * (-self.ba_j[j] * xq).exp();
                let kappa = -self.bb_j[j]
                    * (mu_y - 0.5 * one_m_r2 * self.sigma_y * self.sigma_y * self.bb_j[j]
                        + self.rho_xy * self.sigma_y * std_x);
                let h2 = h1 + self.bb_j[j] * self.sigma_y * s;
                sum += lambda * kappa.exp() * norm_cdf(-self.omega * h2);
            }
            let payoff = norm_cdf(-self.omega * h1) - sum;
            total += w * scale * norm_pdf(std_x) / self.sigma_x * payoff;
        }
        Ok(total)
    }

    /// Exercise boundary: the y solving sum_j chat_j A_j e^{-Ba_j x - Bb_j y} = 1.
    /// Newton seeded from the previous node's root, bisection fallback.
    fn solve_ybar(&self, x: f64, guess: f64) -> Result<f64> {
        let g = |y: f64| -> (f64, f64) {
            let mut v = -1.0;
            let mut dv = 0.0;
            for j in 0..self.chat.len() {
                let e = (-self.ba_j[j] * x - self.bb_j[j] * y).min(700.0).exp();
                let term = self.chat[j] * self.a_j[j] * e;
                v += term;
                dv -= self.bb_j[j] * term;
            }
            (v, dv)
        };
        let mut y = guess.clamp(-5.0, 5.0);
        for _ in 0..50 {
            let (v, dv) = g(y);
            if v.abs() < 1e-14 {
                return Ok(y);
            }
            if dv == 0.0 {
                break;
            }
            let step = v / dv;
            let y_next = y - step;
            if !y_next.is_finite() || y_next.abs() > 50.0 {
                break;
            }
            if (y_next - y).abs() < 1e-16 * (1.0 + y.abs()) {
                return Ok(y_next);
            }
            y = y_next;
        }
        // Bisection on an expanding bracket.
        let mut lo = -5.0;
        let mut hi = 5.0;
        loop {
            let (glo, _) = g(lo);
            let (ghi, _) = g(hi);
            if glo * ghi <= 0.0 {
                break;
            }
            lo *= 2.0;
            hi *= 2.0;
            if lo < -50.0 {
                return Err(Error::RootSolve(format!(
                    "exercise boundary not bracketed in [-50, 50] at x = {x}"
                )));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (v, _) = g(mid);
            if v.abs() < 1e-14 || (hi - lo) < 1e-15 {
                return Ok(mid);
            }
            let (vlo, _) = g(lo);
            if (v > 0.0) == (vlo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Swaption price at t0 on the market curves.
pub fn swaption_price_g2pp(
    spec: &SwaptionSpec,
    params: &G2ppParams,
    market: &MarketSnapshot,
    quad: &QuadratureCfg,
) -> Result<f64> {
    let cf = spec.swap.cashflows();
    let kernel = SwaptionKernel::build(&cf, params, &market.curves(), 0.0, spec.expiry_days())?;
    kernel.price(0.0, 0.0, quad)
}

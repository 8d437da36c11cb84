//! Multi-curve two-factor Gaussian short-rate model with piecewise-constant
//! volatility scaling.
//!
//! The short rate of curve c is r_c(t) = x(t) + y(t) + phi_c(t) with
//!   dx = -a x dt + sigma Gamma(t) dW1,   dy = -b y dt + eta Gamma(t) dW2,
//! d<W1,W2> = rho dt, and Gamma piecewise constant. The deterministic shift
//! phi_c never appears explicitly: every formula consumes it through the
//! observed t0 curve, so bonds and swaps reprice the market exactly at the
//! anchor date.
//!
//! All exponentials are arranged as exp of non-positive arguments so the
//! segment sums stay finite for any admissible parameters and horizons.

pub mod calibrate;

use crate::marketdata::ZeroCurve;
use crate::rng::PathRng;
use crate::{Error, Result};

/// Piecewise-constant volatility multiplier. `values[i]` applies on
/// `(breaks[i-1], breaks[i]]`; the first value extends to t = 0 and the last
/// beyond the final breakpoint.
#[derive(Debug, Clone)]
pub struct PiecewiseGamma {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseGamma {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() || breaks.is_empty() {
            return Err(Error::InvalidInput(
                "gamma needs equally many breakpoints and values".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks[0] <= 0.0 {
            return Err(Error::InvalidInput(
                "gamma breakpoints must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput("gamma values must be > 0".into()));
        }
        Ok(PiecewiseGamma { breaks, values })
    }

    pub fn constant(value: f64) -> Self {
        PiecewiseGamma {
            breaks: vec![1.0],
            values: vec![value],
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b < t);
        self.values[idx.min(self.values.len() - 1)]
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Splits [t1, t2] at interior breakpoints: (start, end, gamma) triples.
    fn segments(&self, t1: f64, t2: f64) -> Vec<(f64, f64, f64)> {
        debug_assert!(t2 >= t1);
        let mut out = Vec::new();
        let mut lo = t1;
        for &b in &self.breaks {
            if b <= t1 {
                continue;
            }
            if b >= t2 {
                break;
            }
            out.push((lo, b, self.value_at(b)));
            lo = b;
        }
        if t2 > lo {
            // value_at of the segment's right end (continuity from the left).
            let mid = self.value_at(t2);
            out.push((lo, t2, mid));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct G2ppParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub eta: f64,
    pub rho: f64,
    pub gamma: PiecewiseGamma,
}

impl G2ppParams {
    pub fn new(a: f64, b: f64, sigma: f64, eta: f64, rho: f64, gamma: PiecewiseGamma) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && sigma > 0.0 && eta > 0.0) {
            return Err(Error::InvalidInput(
                "mean reversions and volatilities must be > 0".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidInput(format!("rho = {rho} outside [-1, 1]")));
        }
        Ok(G2ppParams {
            a,
            b,
            sigma,
            eta,
            rho,
            gamma,
        })
    }

    pub fn with_constant_gamma(a: f64, b: f64, sigma: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(a, b, sigma, eta, rho, PiecewiseGamma::constant(1.0))
    }
}

/// (1 - exp(-z (T - t))) / z
pub fn b_factor(z: f64, t: f64, cap_t: f64) -> f64 {
    -(-z * (cap_t - t)).exp_m1() / z
}

/// exp(-z (T - e)) - exp(-z (T - s)) for s <= e <= T: both exponents <= 0.
#[inline]
fn ed(z: f64, cap_t: f64, s: f64, e: f64) -> f64 {
    (-z * (cap_t - e)).exp() - (-z * (cap_t - s)).exp()
}

/// exp(-z1 (t - e) - z2 (T - e)) - exp(-z1 (t - s) - z2 (T - s)),
/// for s <= e <= t <= T: both exponents <= 0.
#[inline]
fn edd(z1: f64, t: f64, z2: f64, cap_t: f64, s: f64, e: f64) -> f64 {
    (-z1 * (t - e) - z2 * (cap_t - e)).exp() - (-z1 * (t - s) - z2 * (cap_t - s)).exp()
}

/// Variance of the integrated factor sum I(t;T) = int_t^T (x + y) ds.
/// Reduces to the classic constant-volatility closed form when Gamma = 1.
pub fn variance_v(p: &G2ppParams, t: f64, cap_t: f64) -> Result<f64> {
    if cap_t < t {
        return Err(Error::InvalidInput(format!(
            "variance_v needs t <= T, got {t} > {cap_t}"
        )));
    }
    if cap_t == t {
        return Ok(0.0);
    }
    let (a, b, s2, e2) = (p.a, p.b, p.sigma * p.sigma, p.eta * p.eta);
    let rse = p.rho * p.sigma * p.eta;
    let mut va = 0.0;
    let mut vb = 0.0;
    let mut vab = 0.0;
    for (lo, hi, g) in p.gamma.segments(t, cap_t) {
        let g2 = g * g;
        let dt = hi - lo;
        va += g2
            * (dt - 2.0 / a * ed(a, cap_t, lo, hi) + 0.5 / a * ed(2.0 * a, cap_t, lo, hi));
        vb += g2
            * (dt - 2.0 / b * ed(b, cap_t, lo, hi) + 0.5 / b * ed(2.0 * b, cap_t, lo, hi));
        vab += g2
            * (dt - ed(a, cap_t, lo, hi) / a - ed(b, cap_t, lo, hi) / b
                + ed(a + b, cap_t, lo, hi) / (a + b));
    }
    Ok(s2 / (a * a) * va + e2 / (b * b) * vb + 2.0 * rse / (a * b) * vab)
}

/// exp(-int_t^T phi_c(u) du) recovered from the observed t0 curve:
/// (P(0;T)/P(0;t)) exp(-0.5 [V(0;T) - V(0;t)]). Never integrated
/// numerically; telescopes exactly across intermediate dates.
pub fn shift_integral_phi(p: &G2ppParams, curve: &ZeroCurve, t: f64, cap_t: f64) -> Result<f64> {
    let p_t = curve.df_t(t)?;
    let p_big = curve.df_t(cap_t)?;
    let v_t = variance_v(p, 0.0, t)?;
    let v_big = variance_v(p, 0.0, cap_t)?;
    Ok(p_big / p_t * (-0.5 * (v_big - v_t)).exp())
}

/// The deterministic bond-reconstruction factor: with `df_ratio` =
/// P(T)/P(t) observed on the curve whose shift was fitted at `shift_anchor`,
/// returns the A(t;T) such that P(t;T) = A exp(-B(a) x - B(b) y).
pub fn a_factor_from(p: &G2ppParams, df_ratio: f64, shift_anchor: f64, t: f64, cap_t: f64) -> Result<f64> {
    let v = variance_v(p, t, cap_t)? - variance_v(p, shift_anchor, cap_t)?
        + variance_v(p, shift_anchor, t)?;
    Ok(df_ratio * (0.5 * v).exp())
}

/// A(t;T) against the t0 market curve.
pub fn a_factor(p: &G2ppParams, curve: &ZeroCurve, t: f64, cap_t: f64) -> Result<f64> {
    let ratio = curve.df_t(cap_t)? / curve.df_t(t)?;
    a_factor_from(p, ratio, 0.0, t, cap_t)
}

/// Zero-coupon bond price at time t in state (x, y) for the given curve.
pub fn zcb_price(
    p: &G2ppParams,
    curve: &ZeroCurve,
    t: f64,
    cap_t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    let a = a_factor(p, curve, t, cap_t)?;
    Ok(a * (-b_factor(p.a, t, cap_t) * x - b_factor(p.b, t, cap_t) * y).exp())
}

/// Conditional covariance of (x(t), y(t)) given time s < t. Measure-free.
pub fn factor_covariance(p: &G2ppParams, s: f64, t: f64) -> [f64; 3] {
    let (a, b) = (p.a, p.b);
    let mut cxx = 0.0;
    let mut cyy = 0.0;
    let mut cxy = 0.0;
    for (lo, hi, g) in p.gamma.segments(s, t) {
        let g2 = g * g;
        cxx += g2 * ed(2.0 * a, t, lo, hi);
        cyy += g2 * ed(2.0 * b, t, lo, hi);
        cxy += g2 * ed(a + b, t, lo, hi);
    }
    [
        p.sigma * p.sigma / (2.0 * a) * cxx,
        p.rho * p.sigma * p.eta / (a + b) * cxy,
        p.eta * p.eta / (2.0 * b) * cyy,
    ]
}

/// Drift corrections M^T_x(s;t), M^T_y(s;t) under the T-forward measure:
/// x(t) = x(s) e^{-a(t-s)} - M^T_x(s;t) + noise.
pub fn forward_drift(p: &G2ppParams, s: f64, t: f64, t_measure: f64) -> (f64, f64) {
    let (a, b) = (p.a, p.b);
    let (s2, e2) = (p.sigma * p.sigma, p.eta * p.eta);
    let rse = p.rho * p.sigma * p.eta;
    let mut mx = 0.0;
    let mut my = 0.0;
    for (lo, hi, g) in p.gamma.segments(s, t) {
        let g2 = g * g;
        let eda = ed(a, t, lo, hi);
        let edb = ed(b, t, lo, hi);
        mx += g2
            * (s2 / a * (eda / a - edd(a, t, a, t_measure, lo, hi) / (2.0 * a))
                + rse / b * (eda / a - edd(a, t, b, t_measure, lo, hi) / (a + b)));
        my += g2
            * (e2 / b * (edb / b - edd(b, t, b, t_measure, lo, hi) / (2.0 * b))
                + rse / a * (edb / b - edd(b, t, a, t_measure, lo, hi) / (a + b)));
    }
    (mx, my)
}

/// Lower-triangular factor of a 2x2 covariance, with clipping of the tiny
/// negative residuals that arise when |rho| = 1 makes the matrix singular.
#[derive(Debug, Clone, Copy)]
pub struct CholFactor {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

pub fn cholesky_2x2(cov: [f64; 3], tol: f64) -> Result<CholFactor> {
    let [cxx, cxy, cyy] = cov;
    if cxx < -tol || cyy < -tol {
        return Err(Error::InvalidInput(format!(
            "covariance has negative diagonal: {cxx}, {cyy}"
        )));
    }
    let l11 = cxx.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { cxy / l11 } else { 0.0 };
    let resid = cyy - l21 * l21;
    if resid < -tol * cyy.abs().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "covariance not PSD: residual {resid}"
        )));
    }
    Ok(CholFactor {
        l11,
        l21,
        l22: resid.max(0.0).sqrt(),
    })
}

/// Transition law of (x, y) from s to t under the T-forward measure.
#[derive(Debug, Clone, Copy)]
pub struct TransitionMoments {
    pub decay_x: f64,
    pub decay_y: f64,
    pub drift_x: f64,
    pub drift_y: f64,
    pub cov: [f64; 3],
}

pub fn transition_moments(
    p: &G2ppParams,
    s: f64,
    t: f64,
    t_measure: f64,
) -> Result<TransitionMoments> {
    if !(s <= t && t <= t_measure) {
        return Err(Error::InvalidInput(format!(
            "transition needs s <= t <= T, got {s}, {t}, {t_measure}"
        )));
    }
    let (mx, my) = forward_drift(p, s, t, t_measure);
    Ok(TransitionMoments {
        decay_x: (-p.a * (t - s)).exp(),
        decay_y: (-p.b * (t - s)).exp(),
        drift_x: mx,
        drift_y: my,
        cov: factor_covariance(p, s, t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub path_id: u64,
}

impl ModelState {
    pub fn initial(path_id: u64) -> Self {
        ModelState {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            path_id,
        }
    }
}

/// Draws the next state; deterministic given (seed, path_id, step index).
pub fn sample_transition(
    p: &G2ppParams,
    state: &ModelState,
    t_next: f64,
    t_measure: f64,
    rng: &mut PathRng,
    step: u64,
) -> Result<ModelState> {
    let tm = transition_moments(p, state.t, t_next, t_measure)?;
    let chol = cholesky_2x2(tm.cov, 1e-12)?;
    let (z1, z2) = rng.normals(step);
    Ok(apply_transition(state, &tm, &chol, z1, z2, t_next))
}

#[inline]
pub fn apply_transition(
    state: &ModelState,
    tm: &TransitionMoments,
    chol: &CholFactor,
    z1: f64,
    z2: f64,
    t_next: f64,
) -> ModelState {
    ModelState {
        t: t_next,
        x: state.x * tm.decay_x - tm.drift_x + chol.l11 * z1,
        y: state.y * tm.decay_y - tm.drift_y + chol.l21 * z1 + chol.l22 * z2,
        path_id: state.path_id,
    }
}

/// Conditional standard deviations and correlation of (x(T_e), y(T_e)) seen
/// from t, as used by the swaption quadrature.
pub fn conditional_law(p: &G2ppParams, t: f64, t_e: f64) -> (f64, f64, f64) {
    let [cxx, cxy, cyy] = factor_covariance(p, t, t_e);
    let sx = cxx.sqrt();
    let sy = cyy.sqrt();
    let rho_xy = if sx > 0.0 && sy > 0.0 {
        (cxy / (sx * sy)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (sx, sy, rho_xy)
}

/// The quoted swaption expiry grid that the volatility steps attach to.
pub fn quoted_expiry_gamma_breaks() -> Vec<f64> {
    vec![
        2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_params(rho: f64) -> G2ppParams {
        G2ppParams::with_constant_gamma(1.1664, 0.0304, 0.0501, 0.0084, rho).unwrap()
    }

    fn published_params() -> G2ppParams {
        let gamma = PiecewiseGamma::new(
            quoted_expiry_gamma_breaks(),
            vec![
                0.9530, 0.9781, 1.0895, 1.0709, 1.0032, 1.0776, 1.0488, 1.0186, 1.1000, 0.9608,
                1.0114, 0.9553, 0.9629, 0.9340,
            ],
        )
        .unwrap();
        G2ppParams::new(1.1664, 0.0304, 0.0501, 0.0084, -1.0, gamma).unwrap()
    }

    /// Adaptive Simpson quadrature of the integrand behind V(t;T), the
    /// independent oracle for the piecewise-Gamma closed form.
    fn variance_by_quadrature(p: &G2ppParams, t: f64, cap_t: f64) -> f64 {
        let f = |u: f64| {
            let g = p.gamma.value_at(u);
            let ba = b_factor(p.a, u, cap_t);
            let bb = b_factor(p.b, u, cap_t);
            g * g
                * (p.sigma * p.sigma * ba * ba
                    + p.eta * p.eta * bb * bb
                    + 2.0 * p.rho * p.sigma * p.eta * ba * bb)
        };
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, eps: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, fa, flm, fm, eps / 2.0, depth - 1)
                    + simpson(f, m, b, fm, frm, fb, eps / 2.0, depth - 1)
            }
        }
        // Split at gamma breakpoints so the integrand is smooth per piece.
        let mut total = 0.0;
        let mut lo = t;
        let mut cuts: Vec<f64> = p
            .gamma
            .breaks()
            .iter()
            .copied()
            .filter(|&b| b > t && b < cap_t)
            .collect();
        cuts.push(cap_t);
        for hi in cuts {
            let m = 0.5 * (lo + hi);
            total += simpson(&f, lo, hi, f(lo), f(m), f(hi), 1e-13, 40);
            lo = hi;
        }
        total
    }

    #[test]
    fn variance_zero_at_equal_times() {
        let p = published_params();
        assert_eq!(variance_v(&p, 3.0, 3.0).unwrap(), 0.0);
        assert!(variance_v(&p, 3.0, 2.0).is_err());
    }

    #[test]
    fn variance_matches_constant_vol_closed_form() {
        // Gamma = 1: classic two-factor expression.
        let p = flat_params(-0.7);
        let (a, b, s, e, r) = (p.a, p.b, p.sigma, p.eta, p.rho);
        for &(t, cap_t) in &[(0.0, 5.0), (0.0, 30.0), (2.5, 17.0)] {
            let tau = cap_t - t;
            let classic = s * s / (a * a)
                * (tau + 2.0 / a * (-a * tau).exp() - 0.5 / a * (-2.0 * a * tau).exp()
                    - 1.5 / a)
                + e * e / (b * b)
                    * (tau + 2.0 / b * (-b * tau).exp() - 0.5 / b * (-2.0 * b * tau).exp()
                        - 1.5 / b)
                + 2.0 * r * s * e / (a * b)
                    * (tau + ((-a * tau).exp() - 1.0) / a + ((-b * tau).exp() - 1.0) / b
                        - ((-(a + b) * tau).exp() - 1.0) / (a + b));
            let v = variance_v(&p, t, cap_t).unwrap();
            assert!(
                (v - classic).abs() <= 1e-9 * classic.abs().max(1e-12),
                "t={t} T={cap_t}: {v} vs {classic}"
            );
        }
    }

    #[test]
    fn variance_matches_quadrature_oracle() {
        // Two-segment Gamma = (1, 2) against adaptive quadrature.
        let gamma = PiecewiseGamma::new(vec![3.0, 6.0], vec![1.0, 2.0]).unwrap();
        let p = G2ppParams::new(1.1664, 0.0304, 0.0501, 0.0084, -0.5, gamma).unwrap();
        for &(t, cap_t) in &[(0.0, 5.0), (1.0, 8.0), (3.5, 4.5), (0.0, 12.0)] {
            let v = variance_v(&p, t, cap_t).unwrap();
            let q = variance_by_quadrature(&p, t, cap_t);
            assert!(
                (v - q).abs() <= 1e-9 * q.abs().max(1e-12),
                "t={t} T={cap_t}: closed {v} vs quadrature {q}"
            );
        }
        // Published 14-step Gamma too.
        let p = published_params();
        for &(t, cap_t) in &[(0.0, 15.0), (4.9, 21.3)] {
            let v = variance_v(&p, t, cap_t).unwrap();
            let q = variance_by_quadrature(&p, t, cap_t);
            assert!((v - q).abs() <= 1e-9 * q.abs().max(1e-12));
        }
    }

    #[test]
    fn variance_segment_splitting_is_exact() {
        // Inserting artificial breakpoints with unchanged values does not
        // change V: the segment accumulation is self-consistent.
        let p1 = flat_params(-1.0);
        let gamma = PiecewiseGamma::new(vec![1.0, 2.0, 7.0, 11.0], vec![1.0; 4]).unwrap();
        let p2 = G2ppParams::new(p1.a, p1.b, p1.sigma, p1.eta, p1.rho, gamma).unwrap();
        for &(t, cap_t) in &[(0.0, 10.0), (0.5, 25.0), (3.0, 9.0)] {
            let v1 = variance_v(&p1, t, cap_t).unwrap();
            let v2 = variance_v(&p2, t, cap_t).unwrap();
            assert!((v1 - v2).abs() < 1e-12 * v1.abs() + 1e-18);
        }
    }

    #[test]
    fn gamma_scaling_scales_variance_quadratically() {
        let p = published_params();
        let scaled_gamma = PiecewiseGamma::new(
            p.gamma.breaks().to_vec(),
            p.gamma.values().iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let ps = G2ppParams::new(p.a, p.b, p.sigma, p.eta, p.rho, scaled_gamma).unwrap();
        let v = variance_v(&p, 1.0, 14.0).unwrap();
        let vs = variance_v(&ps, 1.0, 14.0).unwrap();
        assert!((vs - 9.0 * v).abs() < 1e-12 * vs);
    }

    #[test]
    fn phi_identity_telescopes() {
        let dir = crate::marketdata::workspace_data_dir();
        let c = ZeroCurve::load(crate::marketdata::CurveId::Discount, &dir.join("curves/d.csv"))
            .unwrap();
        let p = published_params();
        assert_eq!(shift_integral_phi(&p, &c, 4.0, 4.0).unwrap(), 1.0);
        let a = shift_integral_phi(&p, &c, 0.0, 3.0).unwrap();
        let b = shift_integral_phi(&p, &c, 3.0, 7.0).unwrap();
        let full = shift_integral_phi(&p, &c, 0.0, 7.0).unwrap();
        assert!((a * b - full).abs() < 1e-14);
        // Flat curve with zero variance: ratio 1.
        let flat = ZeroCurve::new(crate::marketdata::CurveId::Discount, &[(0, 1.0), (7300, 1.0)])
            .unwrap();
        let tiny = G2ppParams::new(1.0, 0.5, 1e-12, 1e-12, 0.0, PiecewiseGamma::constant(1.0))
            .unwrap();
        assert!((shift_integral_phi(&tiny, &flat, 0.0, 10.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_transition_moments() {
        let p = published_params();
        // s = t: identity transition.
        let tm = transition_moments(&p, 2.0, 2.0, 10.0).unwrap();
        assert_eq!(tm.decay_x, 1.0);
        assert_eq!(tm.drift_x, 0.0);
        assert_eq!(tm.cov, [0.0, 0.0, 0.0]);
        // rho = 0: no cross covariance.
        let p0 = flat_params(0.0);
        let tm = transition_moments(&p0, 0.0, 3.0, 10.0).unwrap();
        assert_eq!(tm.cov[1], 0.0);
        assert!(tm.cov[0] > 0.0 && tm.cov[2] > 0.0);
    }

    #[test]
    fn moments_match_fine_euler_oracle() {
        // Fine-grid Euler simulation of the exact SDE under the T-forward
        // measure, published parameters (rho = -1 boundary included).
        let p = published_params();
        let (s, t, t_measure) = (0.0, 2.0, 5.0);
        let n_steps = 100_000usize;
        let n_paths = 4000usize;
        let dt = (t - s) / n_steps as f64;
        let sqdt = dt.sqrt();
        let mut sum = [0.0f64; 2];
        let mut sum2 = [0.0f64; 3];
        for path in 0..n_paths {
            let mut rng = PathRng::new(777, path as u64);
            let (mut x, mut y) = (0.0f64, 0.0f64);
            for k in 0..n_steps {
                let u = s + k as f64 * dt;
                let g = p.gamma.value_at(u + 0.5 * dt);
                let ba = b_factor(p.a, u, t_measure);
                let bb = b_factor(p.b, u, t_measure);
                let (z1, z2) = rng.normals(k as u64);
                let z2 = p.rho * z1 + (1.0 - p.rho * p.rho).max(0.0).sqrt() * z2;
                x += -(p.a * x + g * g * (p.sigma * p.sigma * ba + p.rho * p.sigma * p.eta * bb))
                    * dt
                    + p.sigma * g * sqdt * z1;
                y += -(p.b * y + g * g * (p.eta * p.eta * bb + p.rho * p.sigma * p.eta * ba))
                    * dt
                    + p.eta * g * sqdt * z2;
            }
            sum[0] += x;
            sum[1] += y;
            sum2[0] += x * x;
            sum2[1] += x * y;
            sum2[2] += y * y;
        }
        let n = n_paths as f64;
        let mean = [sum[0] / n, sum[1] / n];
        let cov = [
            sum2[0] / n - mean[0] * mean[0],
            sum2[1] / n - mean[0] * mean[1],
            sum2[2] / n - mean[1] * mean[1],
        ];
        let tm = transition_moments(&p, s, t, t_measure).unwrap();
        // Means within 3 standard errors of the MC estimator.
        let se_x = (tm.cov[0] / n).sqrt();
        let se_y = (tm.cov[2] / n).sqrt();
        assert!(
            (mean[0] + tm.drift_x).abs() < 3.0 * se_x,
            "x mean {} vs {}",
            mean[0],
            -tm.drift_x
        );
        assert!(
            (mean[1] + tm.drift_y).abs() < 3.0 * se_y,
            "y mean {} vs {}",
            mean[1],
            -tm.drift_y
        );
        // Covariances within ~4 standard errors of the covariance estimator.
        let se_cxx = tm.cov[0] * (2.0 / n).sqrt();
        let se_cyy = tm.cov[2] * (2.0 / n).sqrt();
        let se_cxy = ((tm.cov[0] * tm.cov[2] + tm.cov[1] * tm.cov[1]) / n).sqrt();
        assert!((cov[0] - tm.cov[0]).abs() < 4.0 * se_cxx);
        assert!((cov[2] - tm.cov[2]).abs() < 4.0 * se_cyy);
        assert!((cov[1] - tm.cov[1]).abs() < 4.0 * se_cxy);
    }

    #[test]
    fn sampling_respects_the_law() {
        let p = published_params();
        let tm = transition_moments(&p, 0.0, 1.0, 5.0).unwrap();
        let chol = cholesky_2x2(tm.cov, 1e-12).unwrap();
        let n = 1_000_000usize;
        let mut sum = [0.0f64; 2];
        let mut sum2 = [0.0f64; 3];
        let state = ModelState::initial(0);
        for i in 0..n {
            let mut rng = PathRng::new(5, i as u64);
            let (z1, z2) = rng.normals(0);
            let s = apply_transition(&state, &tm, &chol, z1, z2, 1.0);
            sum[0] += s.x;
            sum[1] += s.y;
            sum2[0] += s.x * s.x;
            sum2[1] += s.x * s.y;
            sum2[2] += s.y * s.y;
        }
        let nf = n as f64;
        let mean = [sum[0] / nf, sum[1] / nf];
        let cov = [
            sum2[0] / nf - mean[0] * mean[0],
            sum2[1] / nf - mean[0] * mean[1],
            sum2[2] / nf - mean[1] * mean[1],
        ];
        assert!((mean[0] + tm.drift_x).abs() < 4.0 * (tm.cov[0] / nf).sqrt());
        assert!((mean[1] + tm.drift_y).abs() < 4.0 * (tm.cov[2] / nf).sqrt());
        assert!((cov[0] - tm.cov[0]).abs() < 4.0 * tm.cov[0] * (2.0 / nf).sqrt());
        assert!((cov[2] - tm.cov[2]).abs() < 4.0 * tm.cov[2] * (2.0 / nf).sqrt());
        // The sampled correlation reproduces the transition correlation,
        // which sits strictly inside (-1, 1) for a != b even at rho = -1 ...
        let model_corr = tm.cov[1] / (tm.cov[0] * tm.cov[2]).sqrt();
        let corr = cov[1] / (cov[0] * cov[2]).sqrt();
        assert!((corr - model_corr).abs() < 5e-3, "corr {corr} vs {model_corr}");
        // ... and tends to the instantaneous -1 as the step shrinks.
        let short = factor_covariance(&p, 0.0, 1.0 / 365.0);
        let short_corr = short[1] / (short[0] * short[2]).sqrt();
        assert!(short_corr < -0.999, "one-day corr {short_corr}");
        // Zero covariance: deterministic mean propagation.
        let det = apply_transition(
            &ModelState {
                t: 0.0,
                x: 0.3,
                y: -0.1,
                path_id: 0,
            },
            &TransitionMoments {
                decay_x: 0.9,
                decay_y: 0.8,
                drift_x: 0.01,
                drift_y: -0.02,
                cov: [0.0; 3],
            },
            &cholesky_2x2([0.0; 3], 1e-12).unwrap(),
            1.3,
            -0.4,
            1.0,
        );
        assert!((det.x - (0.3 * 0.9 - 0.01)).abs() < 1e-15);
        assert!((det.y - (-0.1 * 0.8 + 0.02)).abs() < 1e-15);
    }

    #[test]
    fn determinism_under_any_worker_count() {
        // Identical (seed, path, step) triples give bit-identical states no
        // matter in which order paths are visited.
        let p = published_params();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let run_path = |path_id: u64| -> Vec<(f64, f64)> {
            let mut rng = PathRng::new(11, path_id);
            let mut st = ModelState::initial(path_id);
            let mut out = Vec::new();
            for (k, &t) in grid.iter().enumerate().skip(1) {
                st = sample_transition(&p, &st, t, 5.0, &mut rng, k as u64).unwrap();
                out.push((st.x, st.y));
            }
            out
        };
        let forward: Vec<_> = (0..16).map(run_path).collect();
        let mut reversed: Vec<_> = (0..16).rev().map(run_path).collect();
        reversed.reverse();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn cholesky_handles_degenerate_covariance() {
        let c = cholesky_2x2([1.0, -1.0, 1.0], 1e-12).unwrap();
        assert_eq!(c.l22, 0.0);
        assert!(cholesky_2x2([1.0, 0.5, -1.0], 1e-12).is_err());
        // Slightly negative residual from rounding is repaired.
        let c = cholesky_2x2([1.0, 1.0 + 1e-16, 1.0], 1e-12).unwrap();
        assert_eq!(c.l22, 0.0);
    }

    #[test]
    fn gamma_lookup_and_segments() {
        let g = PiecewiseGamma::new(vec![2.0, 3.0], vec![10.0, 20.0]).unwrap();
        assert_eq!(g.value_at(0.5), 10.0);
        assert_eq!(g.value_at(2.0), 10.0);
        assert_eq!(g.value_at(2.5), 20.0);
        assert_eq!(g.value_at(99.0), 20.0);
        assert_eq!(
            g.segments(1.0, 4.0),
            vec![(1.0, 2.0, 10.0), (2.0, 3.0, 20.0), (3.0, 4.0, 20.0)]
        );
        assert!(PiecewiseGamma::new(vec![2.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseGamma::new(vec![1.0], vec![-1.0]).is_err());
    }
}

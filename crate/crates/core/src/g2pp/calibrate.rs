//! Two-step calibration to ATM swaption prices: a global derivative-free
//! search over (a, b, sigma, eta, rho) with Gamma = 1, then a sweep over
//! expiries solving one-dimensional problems for the Gamma steps, earlier
//! steps held fixed. A swaption expiring at xi_i only sees Gamma on
//! [0, xi_i], so the sweep is well posed.

use crate::marketdata::MarketSnapshot;
use crate::math::{brent_min, nelder_mead, MinimizeOutcome};
use crate::pricing::swap::par_swap_rate;
use crate::pricing::swaption::{QuadratureCfg, SwaptionKernel};
use crate::pricing::{SwapCashflows, SwapSpec};
use crate::time::months_to_days;
use crate::{Error, Result};
use rayon::prelude::*;

use super::{G2ppParams, PiecewiseGamma};

/// One calibration instrument: an ATM payer swaption with its market price
/// (half the quoted straddle, per 10 000 notional).
#[derive(Debug, Clone)]
pub struct CalibrationQuote {
    pub expiry_y: u32,
    pub tenor_y: u32,
    pub market_price: f64,
    pub cashflows: SwapCashflows,
    pub expiry_days: i64,
}

/// Builds the ATM instrument set from the quote matrix; strikes are the
/// forward par rates off the t0 curves.
pub fn calibration_quotes(market: &MarketSnapshot) -> Result<Vec<CalibrationQuote>> {
    let view = market.curves();
    let mut quotes = Vec::new();
    for &e in &market.swaptions.expiries_y {
        for &t in &market.swaptions.tenors_y {
            let mut spec = SwapSpec::new(10_000.0, 1.0, 0.0, e * 12, t * 12);
            let atm = par_swap_rate(&spec.cashflows(), &view, 0)?;
            spec.fixed_rate = atm;
            quotes.push(CalibrationQuote {
                expiry_y: e,
                tenor_y: t,
                market_price: market.swaptions.straddle(e, t).unwrap() / 2.0,
                cashflows: spec.cashflows(),
                expiry_days: months_to_days(e * 12),
            });
        }
    }
    Ok(quotes)
}

/// Synthetic quotes priced from known parameters, for round-trip tests.
pub fn synthetic_quotes(
    market: &MarketSnapshot,
    params: &G2ppParams,
    expiries_y: &[u32],
    tenors_y: &[u32],
    quad: &QuadratureCfg,
) -> Result<Vec<CalibrationQuote>> {
    let view = market.curves();
    let mut quotes = Vec::new();
    for &e in expiries_y {
        for &t in tenors_y {
            let mut spec = SwapSpec::new(10_000.0, 1.0, 0.0, e * 12, t * 12);
            let atm = par_swap_rate(&spec.cashflows(), &view, 0)?;
            spec.fixed_rate = atm;
            let cf = spec.cashflows();
            let expiry_days = months_to_days(e * 12);
            let kernel = SwaptionKernel::build(&cf, params, &view, 0.0, expiry_days)?;
            quotes.push(CalibrationQuote {
                expiry_y: e,
                tenor_y: t,
                market_price: kernel.price(0.0, 0.0, quad)?,
                cashflows: cf,
                expiry_days,
            });
        }
    }
    Ok(quotes)
}

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub starts: Vec<[f64; 5]>,
    pub lo: [f64; 5],
    pub hi: [f64; 5],
    pub obj_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub quad: QuadratureCfg,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            // (a, b, sigma, eta, rho)
            starts: vec![
                [1.0, 0.05, 0.05, 0.01, -0.8],
                [0.5, 0.02, 0.02, 0.005, -0.5],
                [2.0, 0.10, 0.08, 0.02, -0.95],
                [0.1, 0.30, 0.01, 0.01, 0.0],
                [1.5, 0.01, 0.10, 0.003, -1.0],
            ],
            lo: [1e-3, 1e-3, 1e-4, 1e-4, -1.0],
            hi: [5.0, 5.0, 0.5, 0.5, 1.0],
            obj_tol: 1e-10,
            max_iter: 500,
            restarts: 4,
            gamma_lo: 0.2,
            gamma_hi: 3.0,
            quad: QuadratureCfg::fixed(128),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    pub params: G2ppParams,
    pub objective: f64,
    pub mean_abs_rel_error: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Relative price errors V_model/V_mkt - 1 per quote, calibration order.
    pub rel_errors: Vec<f64>,
}

/// Relative price errors of a parameter set against the quotes.
pub fn relative_errors(
    params: &G2ppParams,
    quotes: &[CalibrationQuote],
    market: &MarketSnapshot,
    quad: &QuadratureCfg,
) -> Result<Vec<f64>> {
    let view = market.curves();
    quotes
        .par_iter()
        .map(|q| {
            let kernel = SwaptionKernel::build(&q.cashflows, params, &view, 0.0, q.expiry_days)?;
            Ok(kernel.price(0.0, 0.0, quad)? / q.market_price - 1.0)
        })
        .collect()
}

pub fn objective(
    params: &G2ppParams,
    quotes: &[CalibrationQuote],
    market: &MarketSnapshot,
    quad: &QuadratureCfg,
) -> f64 {
    match relative_errors(params, quotes, market, quad) {
        Ok(errs) => errs.iter().map(|e| e * e).sum(),
        Err(_) => 1e10,
    }
}

fn params_from_vec(v: &[f64], gamma: PiecewiseGamma) -> Result<G2ppParams> {
    G2ppParams::new(v[0], v[1], v[2], v[3], v[4], gamma)
}

/// Step 1: constant-volatility calibration of (a, b, sigma, eta, rho).
pub fn calibrate_constant_vol(
    quotes: &[CalibrationQuote],
    market: &MarketSnapshot,
    cfg: &CalibrationConfig,
) -> Result<MinimizeOutcome> {
    let f = |v: &[f64]| -> f64 {
        match params_from_vec(v, PiecewiseGamma::constant(1.0)) {
            Ok(p) => objective(&p, quotes, market, &cfg.quad),
            Err(_) => 1e10,
        }
    };
    let mut best: Option<MinimizeOutcome> = None;
    for start in &cfg.starts {
        let mut out = nelder_mead(f, start, &cfg.lo, &cfg.hi, cfg.obj_tol, cfg.max_iter);
        // Polish: restart the simplex from the incumbent.
        for _ in 0..cfg.restarts {
            if out.objective <= cfg.obj_tol {
                break;
            }
            let again = nelder_mead(f, &out.x, &cfg.lo, &cfg.hi, cfg.obj_tol, cfg.max_iter);
            if again.objective < out.objective {
                out = again;
            } else {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| out.objective < b.objective) {
            best = Some(out);
        }
        if best.as_ref().unwrap().objective <= cfg.obj_tol {
            break;
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no calibration starts configured".into()))
}

/// Step 2: iterative Gamma calibration, one expiry at a time in increasing
/// order; the step for expiry i also extends beyond the last breakpoint
/// while later steps are still unknown.
pub fn calibrate_gamma_steps(
    base: &[f64; 5],
    quotes: &[CalibrationQuote],
    market: &MarketSnapshot,
    cfg: &CalibrationConfig,
) -> Result<Vec<f64>> {
    let mut expiries: Vec<u32> = quotes.iter().map(|q| q.expiry_y).collect();
    expiries.sort_unstable();
    expiries.dedup();
    let breaks: Vec<f64> = expiries.iter().map(|&e| e as f64).collect();
    let mut values: Vec<f64> = vec![1.0; breaks.len()];
    for (i, &e) in expiries.iter().enumerate() {
        let row: Vec<&CalibrationQuote> =
            quotes.iter().filter(|q| q.expiry_y == e).collect();
        if row.is_empty() {
            continue;
        }
        let view = market.curves();
        let row_obj = |g: f64| -> f64 {
            let mut vals = values.clone();
            for v in vals.iter_mut().skip(i) {
                *v = g;
            }
            let gamma = match PiecewiseGamma::new(breaks.clone(), vals) {
                Ok(g) => g,
                Err(_) => return 1e10,
            };
            let p = match params_from_vec(base, gamma) {
                Ok(p) => p,
                Err(_) => return 1e10,
            };
            row.par_iter()
                .map(|q| {
                    let kernel =
                        match SwaptionKernel::build(&q.cashflows, &p, &view, 0.0, q.expiry_days) {
                            Ok(k) => k,
                            Err(_) => return 1e10,
                        };
                    match kernel.price(0.0, 0.0, &cfg.quad) {
                        Ok(v) => {
                            let e = v / q.market_price - 1.0;
                            e * e
                        }
                        Err(_) => 1e10,
                    }
                })
                .sum()
        };
        let (g, _) = brent_min(row_obj, cfg.gamma_lo, cfg.gamma_hi, 1e-10, 300);
        for v in values.iter_mut().skip(i) {
            *v = g;
        }
    }
    Ok(values)
}

/// The full two-step procedure.
pub fn calibrate(
    market: &MarketSnapshot,
    cfg: &CalibrationConfig,
) -> Result<CalibrationOutcome> {
    let quotes = calibration_quotes(market)?;
    calibrate_to_quotes(&quotes, market, cfg)
}

pub fn calibrate_to_quotes(
    quotes: &[CalibrationQuote],
    market: &MarketSnapshot,
    cfg: &CalibrationConfig,
) -> Result<CalibrationOutcome> {
    let step1 = calibrate_constant_vol(quotes, market, cfg)?;
    let base = [step1.x[0], step1.x[1], step1.x[2], step1.x[3], step1.x[4]];
    let gammas = calibrate_gamma_steps(&base, quotes, market, cfg)?;
    let mut expiries: Vec<f64> = quotes.iter().map(|q| q.expiry_y as f64).collect();
    expiries.sort_by(f64::total_cmp);
    expiries.dedup();
    let gamma = PiecewiseGamma::new(expiries, gammas)?;
    let params = params_from_vec(&base, gamma)?;
    let rel_errors = relative_errors(&params, quotes, market, &cfg.quad)?;
    let objective = rel_errors.iter().map(|e| e * e).sum();
    let mean_abs_rel_error =
        rel_errors.iter().map(|e| e.abs()).sum::<f64>() / rel_errors.len() as f64;
    Ok(CalibrationOutcome {
        params,
        objective,
        mean_abs_rel_error,
        converged: step1.converged,
        iterations: step1.iterations,
        rel_errors,
    })
}

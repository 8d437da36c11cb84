//! Shifted log-normal Black pricing of swaptions, implied-volatility
//! inversion and the ATM volatility surface implied by the quote matrix.

use super::swap::{par_swap_rate, swap_annuity};
use super::SwapSpec;
use crate::marketdata::MarketSnapshot;
use crate::math::{brent_root, norm_cdf};
use crate::{Error, Result};

/// Shifted Black swaption value: N A Black(F, K, shift, v, omega) with total
/// variance v (= sigma^2 * expiry).
pub fn black_swaption_price(
    fwd: f64,
    strike: f64,
    annuity: f64,
    shift: f64,
    variance: f64,
    omega: f64,
    notional: f64,
) -> Result<f64> {
    let f = fwd + shift;
    let k = strike + shift;
    if f <= 0.0 || k <= 0.0 {
        return Err(Error::ImpliedVol(format!(
            "shifted forward {f} or strike {k} not positive (shift {shift} too small)"
        )));
    }
    if variance < 0.0 {
        return Err(Error::InvalidInput("negative variance".into()));
    }
    let value = if variance == 0.0 {
        (omega * (f - k)).max(0.0)
    } else {
        let sq = variance.sqrt();
        let d1 = ((f / k).ln() + 0.5 * variance) / sq;
        let d2 = d1 - sq;
        omega * (f * norm_cdf(omega * d1) - k * norm_cdf(omega * d2))
    };
    Ok(notional * annuity * value)
}

/// Inverts the shifted Black formula for the implied volatility; the
/// round-trip reprice must agree to 1e-10 of notional.
#[allow(clippy::too_many_arguments)]
pub fn implied_vol(
    price: f64,
    fwd: f64,
    strike: f64,
    annuity: f64,
    shift: f64,
    omega: f64,
    notional: f64,
    expiry_years: f64,
) -> Result<f64> {
    let f = fwd + shift;
    let k = strike + shift;
    if f <= 0.0 || k <= 0.0 {
        return Err(Error::ImpliedVol(format!(
            "shifted forward {f} or strike {k} not positive (shift {shift} too small)"
        )));
    }
    if expiry_years <= 0.0 {
        return Err(Error::ImpliedVol("non-positive expiry".into()));
    }
    let scale = notional * annuity;
    let intrinsic = scale * (omega * (f - k)).max(0.0);
    let upper = scale * if omega > 0.0 { f } else { k };
    if price < intrinsic - 1e-10 * notional || price > upper {
        return Err(Error::ImpliedVol(format!(
            "price {price} outside no-arbitrage bounds [{intrinsic}, {upper}]"
        )));
    }
    if price <= intrinsic + 1e-14 * notional.abs() {
        return Ok(0.0);
    }
    let objective = |sigma: f64| {
        black_swaption_price(fwd, strike, annuity, shift, sigma * sigma * expiry_years, omega, notional)
            .unwrap()
            - price
    };
    let vol = brent_root(objective, 1e-9, 10.0, 1e-14, 300)
        .map_err(|e| Error::ImpliedVol(e.to_string()))?;
    let reprice = black_swaption_price(fwd, strike, annuity, shift, vol * vol * expiry_years, omega, notional)?;
    if (reprice - price).abs() > 1e-10 * notional.abs() {
        return Err(Error::ImpliedVol(format!(
            "round-trip error {} too large",
            (reprice - price).abs()
        )));
    }
    Ok(vol)
}

/// ATM shifted-Black volatilities implied from the straddle quote matrix
/// (ATM payer = straddle / 2), bilinearly interpolated with flat
/// extrapolation at the quoted edges.
#[derive(Debug, Clone)]
pub struct AtmVolSurface {
    pub shift: f64,
    expiries_y: Vec<f64>,
    tenors_y: Vec<f64>,
    vols: Vec<Vec<f64>>,
}

impl AtmVolSurface {
    pub fn from_market(market: &MarketSnapshot, shift: f64) -> Result<Self> {
        let view = market.curves();
        let q = &market.swaptions;
        let mut vols = vec![vec![0.0; q.tenors_y.len()]; q.expiries_y.len()];
        for (i, &e) in q.expiries_y.iter().enumerate() {
            for (j, &t) in q.tenors_y.iter().enumerate() {
                let cf = SwapSpec::new(10_000.0, 1.0, 0.0, e * 12, t * 12).cashflows();
                let fwd = par_swap_rate(&cf, &view, 0)?;
                let annuity = swap_annuity(&cf, &view, 0)?;
                let payer_price = q.straddles[i][j] / 2.0;
                vols[i][j] = implied_vol(
                    payer_price,
                    fwd,
                    fwd,
                    annuity,
                    shift,
                    1.0,
                    10_000.0,
                    e as f64,
                )?;
            }
        }
        Ok(AtmVolSurface {
            shift,
            expiries_y: q.expiries_y.iter().map(|&e| e as f64).collect(),
            tenors_y: q.tenors_y.iter().map(|&t| t as f64).collect(),
            vols,
        })
    }

    pub fn vol(&self, expiry_y: f64, tenor_y: f64) -> f64 {
        let (i0, i1, we) = bracket(&self.expiries_y, expiry_y);
        let (j0, j1, wt) = bracket(&self.tenors_y, tenor_y);
        let v00 = self.vols[i0][j0];
        let v01 = self.vols[i0][j1];
        let v10 = self.vols[i1][j0];
        let v11 = self.vols[i1][j1];
        (1.0 - we) * ((1.0 - wt) * v00 + wt * v01) + we * ((1.0 - wt) * v10 + wt * v11)
    }
}

fn bracket(axis: &[f64], v: f64) -> (usize, usize, f64) {
    if v <= axis[0] {
        return (0, 0, 0.0);
    }
    if v >= *axis.last().unwrap() {
        let last = axis.len() - 1;
        return (last, last, 0.0);
    }
    let i1 = axis.partition_point(|&a| a < v);
    let i0 = i1 - 1;
    let w = (v - axis[i0]) / (axis[i1] - axis[i0]);
    (i0, i1, w)
}

//! ISDA-SIMM v2.1, Interest Rate risk class only: risk-weight and
//! correlation tables, tenor re-allocation, and the Delta, Vega and
//! Curvature margin aggregations.

pub mod sensitivities;

use crate::math::norm_inv_cdf;
use crate::{Error, Result};
use std::path::Path;

pub const N_TENORS: usize = 12;
pub const TENOR_LABELS: [&str; N_TENORS] = [
    "2w", "1m", "3m", "6m", "1y", "2y", "3y", "5y", "10y", "15y", "20y", "30y",
];
/// SIMM tenors in years (ACT/365F with 1m = 365/12 days).
pub const TENOR_YEARS: [f64; N_TENORS] = [
    14.0 / 365.0,
    1.0 / 12.0,
    0.25,
    0.5,
    1.0,
    2.0,
    3.0,
    5.0,
    10.0,
    15.0,
    20.0,
    30.0,
];
/// SIMM expiries in calendar days, 12m = 365 with pro-rata scaling.
pub const TENOR_DAYS: [f64; N_TENORS] = [
    14.0,
    365.0 / 12.0,
    365.0 / 4.0,
    365.0 / 2.0,
    365.0,
    730.0,
    1095.0,
    1825.0,
    3650.0,
    5475.0,
    7300.0,
    10950.0,
];

/// v2.1 parameters for Regular Volatility currencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SimmParamsV21 {
    pub risk_weights: [f64; N_TENORS],
    pub corr: [[f64; N_TENORS]; N_TENORS],
    pub scaling_function: [f64; N_TENORS],
    /// Correlation between sub-curves of the same currency.
    pub phi_curves: f64,
    pub vega_risk_weight: f64,
    pub hvr_ir: f64,
    /// Delta concentration threshold, USD per bp.
    pub conc_threshold_delta: f64,
    /// Vega concentration threshold, USD.
    pub conc_threshold_vega: f64,
    /// Fixed USD value of one EUR for concentration-ratio purposes.
    pub usd_per_eur: f64,
}

impl SimmParamsV21 {
    pub fn v21() -> Self {
        let rw = [
            114.0, 115.0, 102.0, 71.0, 61.0, 52.0, 50.0, 51.0, 51.0, 51.0, 54.0, 62.0,
        ];
        let corr_rows: [[f64; N_TENORS]; N_TENORS] = [
            [1.00, 0.63, 0.59, 0.47, 0.31, 0.22, 0.18, 0.14, 0.09, 0.06, 0.04, 0.05],
            [0.63, 1.00, 0.79, 0.67, 0.52, 0.42, 0.37, 0.30, 0.23, 0.18, 0.15, 0.13],
            [0.59, 0.79, 1.00, 0.84, 0.68, 0.56, 0.50, 0.42, 0.32, 0.26, 0.24, 0.21],
            [0.47, 0.67, 0.84, 1.00, 0.86, 0.76, 0.69, 0.60, 0.48, 0.42, 0.38, 0.33],
            [0.31, 0.52, 0.68, 0.86, 1.00, 0.94, 0.89, 0.80, 0.67, 0.60, 0.57, 0.53],
            [0.22, 0.42, 0.56, 0.76, 0.94, 1.00, 0.98, 0.91, 0.79, 0.73, 0.70, 0.66],
            [0.18, 0.37, 0.50, 0.69, 0.89, 0.98, 1.00, 0.96, 0.87, 0.81, 0.78, 0.74],
            [0.14, 0.30, 0.42, 0.60, 0.80, 0.91, 0.96, 1.00, 0.95, 0.91, 0.88, 0.84],
            [0.09, 0.23, 0.32, 0.48, 0.67, 0.79, 0.87, 0.95, 1.00, 0.98, 0.97, 0.94],
            [0.06, 0.18, 0.26, 0.42, 0.60, 0.73, 0.81, 0.91, 0.98, 1.00, 0.99, 0.97],
            [0.04, 0.15, 0.24, 0.38, 0.57, 0.70, 0.78, 0.88, 0.97, 0.99, 1.00, 0.99],
            [0.05, 0.13, 0.21, 0.33, 0.53, 0.66, 0.74, 0.84, 0.94, 0.97, 0.99, 1.00],
        ];
        let sf = [
            0.500, 0.230, 0.077, 0.038, 0.019, 0.010, 0.006, 0.004, 0.002, 0.001, 0.001, 0.001,
        ];
        SimmParamsV21 {
            risk_weights: rw,
            corr: corr_rows,
            scaling_function: sf,
            phi_curves: 0.98,
            vega_risk_weight: 0.16,
            hvr_ir: 0.62,
            conc_threshold_delta: 210e6,
            conc_threshold_vega: 2200e6,
            usd_per_eur: 1.0,
        }
    }

    /// Loads the fixture bundle (`record,tenor,...` rows).
    pub fn load(path: &Path) -> Result<Self> {
        let lines = crate::marketdata::read_lines(path)?;
        let mut p = SimmParamsV21::v21();
        let mut seen_rw = false;
        let mut seen_sf = false;
        let mut corr_rows = 0usize;
        for (k, line) in lines.iter().enumerate().skip(1) {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: k + 1,
                    msg: e.to_string(),
                })
            };
            match fields[0] {
                "risk_weight" => {
                    for i in 0..N_TENORS {
                        p.risk_weights[i] = parse(fields[2 + i])?;
                    }
                    seen_rw = true;
                }
                "scaling_function" => {
                    for i in 0..N_TENORS {
                        p.scaling_function[i] = parse(fields[2 + i])?;
                    }
                    seen_sf = true;
                }
                "correlation" => {
                    let row = TENOR_LABELS
                        .iter()
                        .position(|&l| l == fields[1])
                        .ok_or_else(|| Error::Parse {
                            path: path.display().to_string(),
                            line: k + 1,
                            msg: format!("unknown tenor {}", fields[1]),
                        })?;
                    for i in 0..N_TENORS {
                        p.corr[row][i] = parse(fields[2 + i])?;
                    }
                    corr_rows += 1;
                }
                "constant" => {
                    let v = parse(fields[2])?;
                    match fields[1] {
                        "phi_curves" => p.phi_curves = v,
                        "vrw_ir" => p.vega_risk_weight = v,
                        "hvr_ir" => p.hvr_ir = v,
                        "conc_threshold_delta_usd_bp" => p.conc_threshold_delta = v,
                        "conc_threshold_vega_usd" => p.conc_threshold_vega = v,
                        other => {
                            return Err(Error::Parse {
                                path: path.display().to_string(),
                                line: k + 1,
                                msg: format!("unknown constant {other}"),
                            })
                        }
                    }
                }
                other => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: k + 1,
                        msg: format!("unknown record {other}"),
                    })
                }
            }
        }
        if !seen_rw || !seen_sf || corr_rows != N_TENORS {
            return Err(Error::InvalidInput(format!(
                "incomplete SIMM bundle in {}",
                path.display()
            )));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..N_TENORS {
            if self.corr[i][i] != 1.0 {
                return Err(Error::InvalidInput("correlation diagonal must be 1".into()));
            }
            for j in 0..N_TENORS {
                let c = self.corr[i][j];
                if c != self.corr[j][i] || !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidInput(format!(
                        "correlation [{i}][{j}] = {c} invalid"
                    )));
                }
            }
        }
        if self.risk_weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidInput("risk weights must be > 0".into()));
        }
        Ok(())
    }
}

/// The curvature scaling function 0.5 min(1, 14d / t).
pub fn scaling_function(expiry_days: f64) -> f64 {
    0.5 * (14.0 / expiry_days).min(1.0)
}

/// Linearly re-allocates an amount at `tenor_years` onto the two adjacent
/// SIMM tenors (all to the edge tenor outside the ladder).
pub fn allocate(tenor_years: f64, amount: f64, out: &mut [f64; N_TENORS]) {
    if tenor_years <= TENOR_YEARS[0] {
        out[0] += amount;
        return;
    }
    if tenor_years >= TENOR_YEARS[N_TENORS - 1] {
        out[N_TENORS - 1] += amount;
        return;
    }
    let hi = TENOR_YEARS.partition_point(|&t| t < tenor_years);
    let lo = hi - 1;
    if TENOR_YEARS[hi] == tenor_years {
        out[hi] += amount;
        return;
    }
    let w = (tenor_years - TENOR_YEARS[lo]) / (TENOR_YEARS[hi] - TENOR_YEARS[lo]);
    out[lo] += (1.0 - w) * amount;
    out[hi] += w * amount;
}

/// Delta and Vega/Curvature risk vectors on the SIMM ladder.
#[derive(Debug, Clone, Default)]
pub struct RiskVectors {
    pub delta_discount: [f64; N_TENORS],
    pub delta_forward: [f64; N_TENORS],
    pub vega_risk: [f64; N_TENORS],
    pub curvature_risk: [f64; N_TENORS],
}

/// Delta concentration risk factor CR_b = max(1, sqrt(|sum delta| / T_b)).
pub fn delta_concentration(p: &SimmParamsV21, delta_d: &[f64; N_TENORS], delta_x: &[f64; N_TENORS]) -> f64 {
    let total: f64 = delta_d.iter().sum::<f64>() + delta_x.iter().sum::<f64>();
    (total.abs() * p.usd_per_eur / p.conc_threshold_delta)
        .sqrt()
        .max(1.0)
}

/// DeltaMargin: weighted sensitivities aggregated with the tenor
/// correlations and the cross-curve factor phi.
pub fn delta_margin(p: &SimmParamsV21, delta_d: &[f64; N_TENORS], delta_x: &[f64; N_TENORS]) -> f64 {
    let cr = delta_concentration(p, delta_d, delta_x);
    let ws = |deltas: &[f64; N_TENORS]| -> [f64; N_TENORS] {
        std::array::from_fn(|j| p.risk_weights[j] * deltas[j] * cr)
    };
    let ws_d = ws(delta_d);
    let ws_x = ws(delta_x);
    let mut total = 0.0;
    for (ci, wsi) in [(0usize, &ws_d), (1usize, &ws_x)] {
        for (ck, wsk) in [(0usize, &ws_d), (1usize, &ws_x)] {
            let phi = if ci == ck { 1.0 } else { p.phi_curves };
            for j in 0..N_TENORS {
                for l in 0..N_TENORS {
                    let rho = if j == l { 1.0 } else { p.corr[j][l] };
                    total += phi * rho * wsi[j] * wsk[l];
                }
            }
        }
    }
    total.max(0.0).sqrt()
}

/// VegaMargin over the Vega Risk vector.
pub fn vega_margin(p: &SimmParamsV21, vr: &[f64; N_TENORS]) -> f64 {
    let total: f64 = vr.iter().sum();
    let vcr = (total.abs() * p.usd_per_eur / p.conc_threshold_vega)
        .sqrt()
        .max(1.0);
    let vre: [f64; N_TENORS] = std::array::from_fn(|j| p.vega_risk_weight * vr[j] * vcr);
    let mut sum = 0.0;
    for j in 0..N_TENORS {
        for l in 0..N_TENORS {
            let rho = if j == l { 1.0 } else { p.corr[j][l] };
            sum += rho * vre[j] * vre[l];
        }
    }
    sum.max(0.0).sqrt()
}

/// Curvature Risk vector: scaling function at the standard expiries applied
/// to the Vega Risk vector.
pub fn curvature_vector(p: &SimmParamsV21, vr: &[f64; N_TENORS]) -> [f64; N_TENORS] {
    std::array::from_fn(|j| p.scaling_function[j] * vr[j])
}

/// CurvatureMargin: squared-correlation aggregation, theta/lambda tail
/// adjustment, scaled by HVR^-2.
pub fn curvature_margin(p: &SimmParamsV21, cvr: &[f64; N_TENORS]) -> f64 {
    let sum: f64 = cvr.iter().sum();
    let abs_sum: f64 = cvr.iter().map(|v| v.abs()).sum();
    if abs_sum == 0.0 {
        return 0.0;
    }
    let mut k2 = 0.0;
    for j in 0..N_TENORS {
        for l in 0..N_TENORS {
            let rho = if j == l { 1.0 } else { p.corr[j][l] };
            k2 += rho * rho * cvr[j] * cvr[l];
        }
    }
    let k = k2.max(0.0).sqrt();
    let theta = (sum / abs_sum).min(0.0);
    let z995 = norm_inv_cdf(0.995);
    let lambda = (z995 * z995 - 1.0) * (1.0 + theta) - theta;
    (sum + lambda * k).max(0.0) / (p.hvr_ir * p.hvr_ir)
}

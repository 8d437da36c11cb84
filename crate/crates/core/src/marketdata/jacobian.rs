//! Zero-to-market-rate Jacobian `J[j][k]` = dZ_k / dR_j, frozen at the
//! valuation date and used to re-express forward zero-rate deltas as
//! market-quote deltas.
//!
//! Identity mode declares the zero pillars themselves as the quote set.
//! Synthetic mode derives a par instrument per pillar (deposit up to 1y,
//! par swap beyond), bumps each quote by +-0.5bp and re-bootstraps both
//! curves, the forwarding one against the re-bootstrapped discount curve so
//! the cross block J^{x,d} is populated.

use super::{CurveId, ZeroCurve};
use crate::math::brent_root;
use crate::time::months_to_days;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    Identity,
    Synthetic,
}

impl JacobianMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Some(JacobianMode::Identity),
            "synthetic" => Some(JacobianMode::Synthetic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveJacobian {
    pub mode: JacobianMode,
    /// Quote maturities (pillar day offsets, k >= 1) per curve.
    pub quote_days_discount: Vec<i64>,
    pub quote_days_forward: Vec<i64>,
    /// Blocks indexed [quote j][zero pillar k].
    jdd: Vec<Vec<f64>>,
    jxx: Vec<Vec<f64>>,
    /// dZ^x_k / dR^d_j : the forwarding curve's dependence on discount quotes.
    jxd: Vec<Vec<f64>>,
}

impl CurveJacobian {
    pub fn identity(discount: &ZeroCurve, forward: &ZeroCurve) -> Self {
        let nd = discount.pillar_count() - 1;
        let nx = forward.pillar_count() - 1;
        let eye = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|j| (0..n).map(|k| if j == k { 1.0 } else { 0.0 }).collect())
                .collect()
        };
        CurveJacobian {
            mode: JacobianMode::Identity,
            quote_days_discount: discount.pillar_days()[1..].to_vec(),
            quote_days_forward: forward.pillar_days()[1..].to_vec(),
            jdd: eye(nd),
            jxx: eye(nx),
            jxd: vec![vec![0.0; nx]; nd],
        }
    }

    /// Chains zero-pillar deltas (index k-1 for pillar k) into market-quote
    /// deltas per curve.
    pub fn market_deltas(&self, dv_dz_d: &[f64], dv_dz_x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.mode {
            JacobianMode::Identity => (dv_dz_d.to_vec(), dv_dz_x.to_vec()),
            JacobianMode::Synthetic => {
                let delta_d: Vec<f64> = self
                    .jdd
                    .iter()
                    .zip(&self.jxd)
                    .map(|(row_d, row_x)| {
                        row_d.iter().zip(dv_dz_d).map(|(j, d)| j * d).sum::<f64>()
                            + row_x.iter().zip(dv_dz_x).map(|(j, d)| j * d).sum::<f64>()
                    })
                    .collect();
                let delta_x: Vec<f64> = self
                    .jxx
                    .iter()
                    .map(|row| row.iter().zip(dv_dz_x).map(|(j, d)| j * d).sum::<f64>())
                    .collect();
                (delta_d, delta_x)
            }
        }
    }

    pub fn synthetic(discount: &ZeroCurve, forward: &ZeroCurve) -> Result<Self> {
        let quotes_d = synthesize_quotes(discount, None)?;
        let quotes_x = synthesize_quotes(forward, Some(discount))?;
        let bump = 0.5e-4;
        let nd = quotes_d.len();
        let nx = quotes_x.len();
        let mut jdd = vec![vec![0.0; nd]; nd];
        let mut jxd = vec![vec![0.0; nx]; nd];
        let mut jxx = vec![vec![0.0; nx]; nx];
        for j in 0..nd {
            let mut up = quotes_d.clone();
            up[j].rate += bump;
            let mut dn = quotes_d.clone();
            dn[j].rate -= bump;
            let disc_up = bootstrap(CurveId::Discount, &up, None)?;
            let disc_dn = bootstrap(CurveId::Discount, &dn, None)?;
            let fwd_up = bootstrap(CurveId::Forward, &quotes_x, Some(&disc_up))?;
            let fwd_dn = bootstrap(CurveId::Forward, &quotes_x, Some(&disc_dn))?;
            for k in 0..nd {
                jdd[j][k] = (disc_up.zero_rate(k + 1) - disc_dn.zero_rate(k + 1)) / (2.0 * bump);
            }
            for k in 0..nx {
                jxd[j][k] = (fwd_up.zero_rate(k + 1) - fwd_dn.zero_rate(k + 1)) / (2.0 * bump);
            }
        }
        for j in 0..nx {
            let mut up = quotes_x.clone();
            up[j].rate += bump;
            let mut dn = quotes_x.clone();
            dn[j].rate -= bump;
            let fwd_up = bootstrap(CurveId::Forward, &up, Some(discount))?;
            let fwd_dn = bootstrap(CurveId::Forward, &dn, Some(discount))?;
            for k in 0..nx {
                jxx[j][k] = (fwd_up.zero_rate(k + 1) - fwd_dn.zero_rate(k + 1)) / (2.0 * bump);
            }
        }
        Ok(CurveJacobian {
            mode: JacobianMode::Synthetic,
            quote_days_discount: quotes_d.iter().map(|q| q.maturity_days).collect(),
            quote_days_forward: quotes_x.iter().map(|q| q.maturity_days).collect(),
            jdd,
            jxx,
            jxd,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum QuoteKind {
    /// Zero-coupon deposit: R = (1/P(T) - 1) / tau, ACT/360.
    Depo,
    /// Par rate of an annual-fixed swap against the curve's own floating
    /// side (OIS-style for the discount curve, 6M IBOR for the forwarding
    /// curve discounted on OIS).
    ParSwap,
}

#[derive(Debug, Clone, Copy)]
pub struct SyntheticQuote {
    pub maturity_days: i64,
    pub rate: f64,
    kind: QuoteKind,
}

fn annual_fixed_days(maturity_days: i64) -> Vec<i64> {
    let mut days = vec![0i64];
    let mut k = 1u32;
    loop {
        let d = months_to_days(12 * k);
        if d >= maturity_days {
            break;
        }
        days.push(d);
        k += 1;
    }
    days.push(maturity_days);
    days
}

fn semiannual_float_days(maturity_days: i64) -> Vec<i64> {
    let mut days = vec![0i64];
    let mut k = 1u32;
    loop {
        let d = months_to_days(6 * k);
        if d >= maturity_days {
            break;
        }
        days.push(d);
        k += 1;
    }
    days.push(maturity_days);
    days
}

/// Par rate of the synthetic instrument maturing at `maturity_days`, priced
/// on `curve` (and `discount` for forwarding-curve swaps).
fn par_quote_rate(
    kind: QuoteKind,
    maturity_days: i64,
    curve: &ZeroCurve,
    discount: Option<&ZeroCurve>,
) -> Result<f64> {
    match kind {
        QuoteKind::Depo => {
            let tau = maturity_days as f64 / 360.0;
            Ok((1.0 / curve.df_days(maturity_days as f64)? - 1.0) / tau)
        }
        QuoteKind::ParSwap => {
            let disc = discount.unwrap_or(curve);
            let fixed = annual_fixed_days(maturity_days);
            let mut annuity = 0.0;
            for w in fixed.windows(2) {
                annuity += (w[1] - w[0]) as f64 / 365.0 * disc.df_days(w[1] as f64)?;
            }
            let float_value = if discount.is_none() {
                // Own-curve floating leg telescopes: 1 - P(T).
                1.0 - curve.df_days(maturity_days as f64)?
            } else {
                let float = semiannual_float_days(maturity_days);
                let mut v = 0.0;
                for w in float.windows(2) {
                    let fwd_accrual =
                        curve.df_days(w[0] as f64)? / curve.df_days(w[1] as f64)? - 1.0;
                    v += fwd_accrual * disc.df_days(w[1] as f64)?;
                }
                v
            };
            Ok(float_value / annuity)
        }
    }
}

/// One quote per pillar: deposits below one year, par swaps from there.
pub fn synthesize_quotes(
    curve: &ZeroCurve,
    discount: Option<&ZeroCurve>,
) -> Result<Vec<SyntheticQuote>> {
    curve.pillar_days()[1..]
        .iter()
        .map(|&d| {
            let kind = if d < 365 {
                QuoteKind::Depo
            } else {
                QuoteKind::ParSwap
            };
            Ok(SyntheticQuote {
                maturity_days: d,
                rate: par_quote_rate(kind, d, curve, discount)?,
                kind,
            })
        })
        .collect()
}

/// Sequential bootstrap: solves one pillar zero rate per quote so the
/// instrument reprices exactly; intermediate dates interpolate on the
/// partially built curve.
pub fn bootstrap(
    id: CurveId,
    quotes: &[SyntheticQuote],
    discount: Option<&ZeroCurve>,
) -> Result<ZeroCurve> {
    let mut pillars: Vec<(i64, f64)> = vec![(0, 1.0)];
    for q in quotes {
        let d = q.maturity_days;
        let t = d as f64 / 365.0;
        let objective = |z: f64| -> f64 {
            let mut cand = pillars.clone();
            cand.push((d, (-z * t).exp()));
            let curve = match ZeroCurve::new(id, &cand) {
                Ok(c) => c,
                Err(_) => return f64::NAN,
            };
            match par_quote_rate(q.kind, d, &curve, discount) {
                Ok(r) => r - q.rate,
                Err(_) => f64::NAN,
            }
        };
        let z = brent_root(objective, -0.2, 0.5, 1e-15, 200).map_err(|e| Error::Bootstrap {
            pillar_days: d,
            msg: e.to_string(),
        })?;
        pillars.push((d, (-z * t).exp()));
    }
    ZeroCurve::new(id, &pillars)
}

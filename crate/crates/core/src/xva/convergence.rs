//! Convergence harnesses: CVA/DVA across path-count and grid ladders with a
//! shared seed, reported against the largest-ladder proxy.

use crate::collateral::GridKind;
use crate::g2pp::G2ppParams;
use crate::marketdata::{jacobian::CurveJacobian, MarketSnapshot};
use crate::pricing::Instrument;
use crate::simm::SimmParamsV21;
use crate::time::GridStep;
use crate::xva::engine::{simulate_xva, EngineConfig};
use crate::xva::XvaResult;
use crate::Result;

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub label: String,
    pub xva: XvaResult,
    /// |CVA / CVA_proxy - 1|, proxy = last ladder entry.
    pub cva_abs_pct_diff: f64,
    pub dva_abs_pct_diff: f64,
}

/// Runs the path-count ladder (shared seed, nested paths by construction).
#[allow(clippy::too_many_arguments)]
pub fn convergence_in_paths(
    market: &MarketSnapshot,
    params: &G2ppParams,
    simm: &SimmParamsV21,
    jacobian: &CurveJacobian,
    instrument: &Instrument,
    base: &EngineConfig,
    ladder: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    let mut results = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let cfg = EngineConfig {
            n_paths: n,
            ..base.clone()
        };
        let out = simulate_xva(market, params, simm, jacobian, instrument, &cfg)?;
        results.push((format!("N={n}"), out.xva));
    }
    Ok(tag_vs_proxy(results))
}

/// Runs a (grid kind, step) ladder at fixed path count.
#[allow(clippy::too_many_arguments)]
pub fn convergence_in_grid(
    market: &MarketSnapshot,
    params: &G2ppParams,
    simm: &SimmParamsV21,
    jacobian: &CurveJacobian,
    instrument: &Instrument,
    base: &EngineConfig,
    ladder: &[(GridKind, GridStep)],
) -> Result<Vec<ConvergenceRow>> {
    let mut results = Vec::with_capacity(ladder.len());
    for &(kind, step) in ladder {
        let cfg = EngineConfig {
            grid_kind: kind,
            grid_step: step,
            ..base.clone()
        };
        let out = simulate_xva(market, params, simm, jacobian, instrument, &cfg)?;
        results.push((format!("{} {}", kind.label(), step.label()), out.xva));
    }
    Ok(tag_vs_proxy(results))
}

fn tag_vs_proxy(results: Vec<(String, XvaResult)>) -> Vec<ConvergenceRow> {
    let (proxy_cva, proxy_dva) = results
        .last()
        .map(|(_, x)| (x.cva, x.dva))
        .unwrap_or((f64::NAN, f64::NAN));
    results
        .into_iter()
        .map(|(label, xva)| {
            let cva_abs_pct_diff = if proxy_cva != 0.0 {
                (xva.cva / proxy_cva - 1.0).abs()
            } else {
                xva.cva.abs()
            };
            let dva_abs_pct_diff = if proxy_dva != 0.0 {
                (xva.dva / proxy_dva - 1.0).abs()
            } else {
                xva.dva.abs()
            };
            ConvergenceRow {
                label,
                xva,
                cva_abs_pct_diff,
                dva_abs_pct_diff,
            }
        })
        .collect()
}

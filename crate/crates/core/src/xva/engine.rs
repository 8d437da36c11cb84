//! The Monte Carlo exposure engine: simulates the factor pair over the
//! merged event timeline under the maturity-forward measure, marks the
//! instrument to future, runs the VM recursion and dynamic IM on the
//! look-back grid, and reduces per-path clipped exposures to EPE/ENE and
//! CVA/DVA.
//!
//! Determinism: every (seed, path, step) random draw is addressable, each
//! path writes its own output row, and the reduction sweeps paths in index
//! order, so results are bit-identical for any worker count and extending
//! N_MC reuses the existing paths unchanged.

use crate::collateral::{
    assemble_exposure, build_grids, im_posted, vm_update, CsaTerms, GridKind,
};
use crate::g2pp::{
    a_factor, b_factor, cholesky_2x2, transition_moments, CholFactor, G2ppParams,
    TransitionMoments,
};
use crate::marketdata::{jacobian::CurveJacobian, MarketSnapshot};
use crate::pricing::swaption::{QuadratureCfg, SwaptionKernel};
use crate::pricing::{Instrument, SwapCashflows, SwapStateKernel};
use crate::rng::PathRng;
use crate::simm::sensitivities::{simulated_curves, swap_im_breakdown, swaption_im_breakdown};
use crate::simm::SimmParamsV21;
use crate::time::{years_from_days, GridStep};
use crate::xva::{cva_dva, epe_ene, FrameworkDescriptor, Profiles, XvaResult};
use crate::{Error, Result};
use rayon::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollateralScheme {
    None,
    VmOnly,
    VmIm,
}

impl CollateralScheme {
    pub fn label(self) -> &'static str {
        match self {
            CollateralScheme::None => "none",
            CollateralScheme::VmOnly => "vm",
            CollateralScheme::VmIm => "vm_im",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(CollateralScheme::None),
            "vm" => Some(CollateralScheme::VmOnly),
            "vm_im" | "vmim" | "vm+im" => Some(CollateralScheme::VmIm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub scheme: CollateralScheme,
    pub csa: CsaTerms,
    pub grid_kind: GridKind,
    pub grid_step: GridStep,
    pub n_paths: usize,
    pub seed: u64,
    pub lgd_bank: f64,
    pub lgd_cpty: f64,
    pub eps_sigma: f64,
    pub eps_eta: f64,
    pub black_shift: f64,
    pub black_shift_max: f64,
    pub quad_marks: QuadratureCfg,
    pub quad_sens: QuadratureCfg,
    pub keep_cube: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            scheme: CollateralScheme::None,
            csa: CsaTerms::frictionless(2),
            grid_kind: GridKind::Joint,
            grid_step: GridStep::Months(1),
            n_paths: 5000,
            seed: 42,
            lgd_bank: 0.6,
            lgd_cpty: 0.6,
            eps_sigma: 0.01,
            eps_eta: 0.04,
            black_shift: 0.06,
            black_shift_max: 0.64,
            // Mark-to-future quadrature error is negligible against the MC
            // noise, and the self-refining rule cannot certify 1e-10 on the
            // near-digital payoffs inside the last margin period before
            // expiry. Fixed high order is the right tool here.
            quad_marks: QuadratureCfg::fixed(256),
            quad_sens: QuadratureCfg::fixed(128),
            keep_cube: false,
        }
    }
}

/// Per-path, per-primary-step simulation output, row-major `[path][step]`.
#[derive(Debug, Clone, Default)]
pub struct ExposureCube {
    pub n_paths: usize,
    pub t_days: Vec<i64>,
    pub v0: Vec<f64>,
    pub vm: Vec<f64>,
    pub im: Vec<f64>,
    pub h: Vec<f64>,
}

pub struct EngineOutput {
    pub profiles: Profiles,
    pub xva: XvaResult,
    pub cube: Option<ExposureCube>,
    pub vega_escalations: usize,
}

struct PathRow {
    v0: Vec<f64>,
    vm: Vec<f64>,
    im: Vec<f64>,
    h: Vec<f64>,
    hd_pos: Vec<f64>,
    hd_neg: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct BondCoefs {
    a: f64,
    ba: f64,
    bb: f64,
}

impl BondCoefs {
    #[inline]
    fn price(&self, x: f64, y: f64) -> f64 {
        self.a * (-self.ba * x - self.bb * y).exp()
    }
}

struct Timeline {
    days: Vec<i64>,
    primary_pos: Vec<usize>,
    lookback_pos: Vec<usize>,
    /// (timeline index of the accrual start T_{j-1}, coupon j).
    fixing_events: Vec<(usize, usize)>,
    expiry_pos: Option<usize>,
}

fn build_timeline(
    primary_days: &[i64],
    lookback_days: &[i64],
    float_days: &[i64],
    expiry_days: Option<i64>,
) -> Timeline {
    let maturity = *primary_days.last().unwrap();
    let mut days: Vec<i64> = primary_days.to_vec();
    days.extend(lookback_days.iter().skip(1).copied());
    days.extend(float_days.iter().copied().filter(|&d| d <= maturity));
    if let Some(e) = expiry_days {
        days.push(e);
    }
    days.push(0);
    days.sort_unstable();
    days.dedup();
    let pos = |d: i64| days.binary_search(&d).expect("timeline contains day");
    let primary_pos: Vec<usize> = primary_days.iter().map(|&d| pos(d)).collect();
    let lookback_pos: Vec<usize> = lookback_days.iter().map(|&d| pos(d)).collect();
    let fixing_events: Vec<(usize, usize)> = (1..float_days.len())
        .filter(|&j| float_days[j - 1] <= maturity)
        .map(|j| (pos(float_days[j - 1]), j))
        .collect();
    let expiry_pos = expiry_days.map(pos);
    Timeline {
        days,
        primary_pos,
        lookback_pos,
        fixing_events,
        expiry_pos,
    }
}

/// Shared per-run preparation: event timeline and deterministic caches.
pub(crate) struct EngineSetup<'a> {
    market: &'a MarketSnapshot,
    params: &'a G2ppParams,
    instrument: &'a Instrument,
    cfg: &'a EngineConfig,
    swap_cf: SwapCashflows,
    maturity: i64,
    expiry_days: Option<i64>,
    tl: Timeline,
    transitions: Vec<(TransitionMoments, CholFactor)>,
    swap_kernels: Vec<SwapStateKernel>,
    swaption_kernels: Vec<Option<SwaptionKernel>>,
    numeraire: Vec<BondCoefs>,
    accrual: Vec<Option<BondCoefs>>,
    fixing_coefs: Vec<BondCoefs>,
    tau_f: Vec<f64>,
    p0_maturity: f64,
}

impl<'a> EngineSetup<'a> {
    fn build(
        market: &'a MarketSnapshot,
        params: &'a G2ppParams,
        instrument: &'a Instrument,
        cfg: &'a EngineConfig,
    ) -> Result<Self> {
        cfg.csa.validate()?;
        if cfg.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be positive".into()));
        }
        let swap_cf = instrument.underlying_swap().cashflows();
        let maturity = swap_cf.maturity_days();
        let expiry_days = match instrument {
            Instrument::Swap(_) => None,
            Instrument::Swaption(s) => Some(s.expiry_days()),
        };
        let grids = build_grids(
            maturity,
            cfg.grid_step,
            cfg.grid_kind,
            &swap_cf.float_days,
            cfg.csa.mpor_lag_days,
        )?;
        let tl = build_timeline(
            &grids.primary_days,
            &grids.lookback_days,
            &swap_cf.float_days,
            expiry_days,
        );
        let t_measure = years_from_days(maturity);
        let n_steps = tl.days.len();
        let n_primary = tl.primary_pos.len();

        let transitions: Vec<(TransitionMoments, CholFactor)> = (1..n_steps)
            .map(|k| {
                let tm = transition_moments(
                    params,
                    years_from_days(tl.days[k - 1]),
                    years_from_days(tl.days[k]),
                    t_measure,
                )?;
                let chol = cholesky_2x2(tm.cov, 1e-12)?;
                Ok((tm, chol))
            })
            .collect::<Result<_>>()?;

        let swap_kernels: Vec<SwapStateKernel> = tl
            .days
            .iter()
            .map(|&d| {
                SwapStateKernel::build(&swap_cf, params, &market.discount, &market.forward, d)
            })
            .collect::<Result<_>>()?;

        let swaption_kernels: Vec<Option<SwaptionKernel>> = match (instrument, tl.expiry_pos) {
            (Instrument::Swaption(_), Some(epos)) => tl
                .days
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    if k < epos {
                        SwaptionKernel::build_at(&swap_cf, params, market, d, expiry_days.unwrap())
                            .map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<_>>()?,
            _ => (0..n_steps).map(|_| None).collect(),
        };

        let p0_maturity = market.discount.df_days(maturity as f64)?;
        let numeraire: Vec<BondCoefs> = tl
            .primary_pos
            .iter()
            .map(|&k| bond_coefs(params, market, tl.days[k], maturity))
            .collect::<Result<_>>()?;
        let accrual: Vec<Option<BondCoefs>> = (0..n_primary)
            .map(|i| {
                if i < 2 {
                    Ok(None)
                } else {
                    let d0 = tl.days[tl.lookback_pos[i - 1]];
                    let d1 = tl.days[tl.lookback_pos[i]];
                    if d1 <= d0 {
                        Ok(None)
                    } else {
                        bond_coefs(params, market, d0, d1).map(Some)
                    }
                }
            })
            .collect::<Result<_>>()?;
        let fixing_coefs: Vec<BondCoefs> = tl
            .fixing_events
            .iter()
            .map(|&(_, j)| {
                let t0 = years_from_days(swap_cf.float_days[j - 1]);
                let t1 = years_from_days(swap_cf.float_days[j]);
                Ok(BondCoefs {
                    a: a_factor(params, &market.forward, t0, t1)?,
                    ba: b_factor(params.a, t0, t1),
                    bb: b_factor(params.b, t0, t1),
                })
            })
            .collect::<Result<_>>()?;
        let tau_f: Vec<f64> = (0..swap_cf.float_days.len())
            .map(|j| {
                if j == 0 {
                    0.0
                } else {
                    swap_cf
                        .conv
                        .fra_dc
                        .year_fraction(swap_cf.float_days[j - 1], swap_cf.float_days[j])
                }
            })
            .collect();
        Ok(EngineSetup {
            market,
            params,
            instrument,
            cfg,
            swap_cf,
            maturity,
            expiry_days,
            tl,
            transitions,
            swap_kernels,
            swaption_kernels,
            numeraire,
            accrual,
            fixing_coefs,
            tau_f,
            p0_maturity,
        })
    }

    /// Factor states at every timeline point plus coupon fixings and the
    /// swaption exercise decision for one path.
    fn simulate_path(&self, path_id: u64) -> Result<(Vec<(f64, f64)>, Vec<f64>, bool)> {
        let tl = &self.tl;
        let n_steps = tl.days.len();
        let mut rng = PathRng::new(self.cfg.seed, path_id);
        let mut states = Vec::with_capacity(n_steps);
        states.push((0.0f64, 0.0f64));
        for k in 1..n_steps {
            let (tm, chol) = &self.transitions[k - 1];
            let (x_prev, y_prev) = states[k - 1];
            let (z1, z2) = rng.normals(k as u64);
            states.push((
                x_prev * tm.decay_x - tm.drift_x + chol.l11 * z1,
                y_prev * tm.decay_y - tm.drift_y + chol.l21 * z1 + chol.l22 * z2,
            ));
        }
        let mut fixings = vec![f64::NAN; self.swap_cf.float_days.len()];
        for (e, &(k, j)) in tl.fixing_events.iter().enumerate() {
            let (x, y) = states[k];
            let p_x = self.fixing_coefs[e].price(x, y);
            fixings[j] = (1.0 / p_x - 1.0) / self.tau_f[j];
        }
        let exercised = match (self.instrument, tl.expiry_pos) {
            (Instrument::Swaption(_), Some(epos)) => {
                let (x, y) = states[epos];
                self.swap_mark(epos, x, y, &fixings)? > 0.0
            }
            _ => false,
        };
        Ok((states, fixings, exercised))
    }

    fn swap_mark(&self, k: usize, x: f64, y: f64, fixings: &[f64]) -> Result<f64> {
        let kernel = &self.swap_kernels[k];
        let fixing = kernel.running_coupon_idx().map(|j| fixings[j]);
        kernel.price(x, y, fixing)
    }

    fn mark(
        &self,
        k: usize,
        states: &[(f64, f64)],
        fixings: &[f64],
        exercised: bool,
    ) -> Result<f64> {
        let (x, y) = states[k];
        match self.instrument {
            Instrument::Swap(_) => self.swap_mark(k, x, y, fixings),
            Instrument::Swaption(_) => {
                let epos = self.tl.expiry_pos.unwrap();
                if k < epos {
                    self.swaption_kernels[k]
                        .as_ref()
                        .unwrap()
                        .price(x, y, &self.cfg.quad_marks)
                } else if exercised {
                    self.swap_mark(k, x, y, fixings)
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    /// Raw SIMM IM from sensitivities at look-back index k: Delta margin
    /// for swaps and exercised swaptions, all three components for a live
    /// swaption.
    fn dynamic_im(
        &self,
        k: usize,
        x: f64,
        y: f64,
        exercised: bool,
        fixings: &[f64],
        jacobian: &CurveJacobian,
        simm: &SimmParamsV21,
    ) -> Result<crate::simm::sensitivities::ImBreakdown> {
        use crate::simm::sensitivities::ImBreakdown;
        let t_days = self.tl.days[k];
        let horizon = self.maturity - t_days;
        if horizon <= 0 {
            return Ok(ImBreakdown::default());
        }
        let live_option = matches!(self.instrument, Instrument::Swaption(_))
            && self.tl.expiry_pos.is_some_and(|e| k < e);
        if matches!(self.instrument, Instrument::Swaption(_)) && !live_option && !exercised {
            return Ok(ImBreakdown::default());
        }
        let mut sim = simulated_curves(
            &self.market.discount,
            &self.market.forward,
            self.params,
            t_days,
            x,
            y,
            horizon,
        )?;
        if live_option {
            swaption_im_breakdown(
                simm,
                &self.swap_cf,
                self.expiry_days.unwrap(),
                self.params,
                &mut sim,
                jacobian,
                self.cfg.eps_sigma,
                self.cfg.eps_eta,
                self.cfg.black_shift,
                self.cfg.black_shift_max,
                &self.cfg.quad_sens,
            )
        } else {
            let fixing = self.swap_cf.running_coupon(t_days).map(|j| fixings[j]);
            swap_im_breakdown(simm, &self.swap_cf, fixing, self.params, &mut sim, jacobian)
        }
    }
}

/// Simulates the collateralized exposure cube and reduces it to XVA.
pub fn simulate_xva(
    market: &MarketSnapshot,
    params: &G2ppParams,
    simm: &SimmParamsV21,
    jacobian: &CurveJacobian,
    instrument: &Instrument,
    cfg: &EngineConfig,
) -> Result<EngineOutput> {
    let started = std::time::Instant::now();
    let setup = EngineSetup::build(market, params, instrument, cfg)?;
    let n_primary = setup.tl.primary_pos.len();
    let vega_escalations = AtomicUsize::new(0);

    let rows: Vec<PathRow> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|m| run_path(m as u64, &setup, simm, jacobian, &vega_escalations))
        .collect::<Result<_>>()?;

    let primary_days: Vec<i64> = setup.tl.primary_pos.iter().map(|&k| setup.tl.days[k]).collect();
    let mut profiles = epe_ene(
        &primary_days,
        cfg.n_paths,
        |m, i| rows[m].hd_pos[i],
        |m, i| rows[m].hd_neg[i],
    );
    for i in 0..n_primary {
        let mut sum_vm = 0.0;
        let mut sum_im = 0.0;
        for row in &rows {
            sum_vm += row.vm[i];
            sum_im += row.im[i];
        }
        profiles.mean_vm[i] = sum_vm / cfg.n_paths as f64;
        profiles.mean_im[i] = sum_im / cfg.n_paths as f64;
    }
    let framework = FrameworkDescriptor {
        model: "mc-g2pp".into(),
        grid: cfg.grid_kind.label().into(),
        dt: cfg.grid_step.label(),
        n_mc: Some(cfg.n_paths),
    };
    let xva = cva_dva(
        &profiles,
        &market.cds_bank,
        &market.cds_counterparty,
        cfg.lgd_bank,
        cfg.lgd_cpty,
        framework,
        started.elapsed().as_secs_f64(),
    );
    let cube = cfg.keep_cube.then(|| {
        let mut cube = ExposureCube {
            n_paths: cfg.n_paths,
            t_days: primary_days.clone(),
            v0: Vec::with_capacity(cfg.n_paths * n_primary),
            vm: Vec::with_capacity(cfg.n_paths * n_primary),
            im: Vec::with_capacity(cfg.n_paths * n_primary),
            h: Vec::with_capacity(cfg.n_paths * n_primary),
        };
        for row in &rows {
            cube.v0.extend_from_slice(&row.v0);
            cube.vm.extend_from_slice(&row.vm);
            cube.im.extend_from_slice(&row.im);
            cube.h.extend_from_slice(&row.h);
        }
        cube
    });
    Ok(EngineOutput {
        profiles,
        xva,
        cube,
        vega_escalations: vega_escalations.load(Ordering::Relaxed),
    })
}

fn run_path(
    path_id: u64,
    setup: &EngineSetup,
    simm: &SimmParamsV21,
    jacobian: &CurveJacobian,
    vega_escalations: &AtomicUsize,
) -> Result<PathRow> {
    let tl = &setup.tl;
    let cfg = setup.cfg;
    let n_primary = tl.primary_pos.len();
    let (states, fixings, exercised) = setup
        .simulate_path(path_id)
        .map_err(|e| path_err(path_id, 0, e))?;

    let mut row = PathRow {
        v0: vec![0.0; n_primary],
        vm: vec![0.0; n_primary],
        im: vec![0.0; n_primary],
        h: vec![0.0; n_primary],
        hd_pos: vec![0.0; n_primary],
        hd_neg: vec![0.0; n_primary],
    };
    let mut vm_state = 0.0f64;
    for i in 0..n_primary {
        let k = tl.primary_pos[i];
        // At maturity the remaining flows settle at close-out, so the mark
        // is zero and collateral is pinned to zero, like at inception.
        let v0 = if i == n_primary - 1 {
            0.0
        } else {
            setup
                .mark(k, &states, &fixings, exercised)
                .map_err(|e| path_err(path_id, tl.days[k], e))?
        };
        let pinned = i == 0 || i == n_primary - 1;
        let (vm, im) = if pinned || cfg.scheme == CollateralScheme::None {
            (0.0, 0.0)
        } else {
            let lb = tl.lookback_pos[i];
            let v_lb = setup
                .mark(lb, &states, &fixings, exercised)
                .map_err(|e| path_err(path_id, tl.days[lb], e))?;
            let accrual_df = match &setup.accrual[i] {
                Some(b) => {
                    let (x, y) = states[tl.lookback_pos[i - 1]];
                    b.price(x, y)
                }
                None => 1.0,
            };
            vm_state = vm_update(vm_state, accrual_df, v_lb, &cfg.csa);
            let im = if cfg.scheme == CollateralScheme::VmIm {
                let (x, y) = states[lb];
                let breakdown = setup
                    .dynamic_im(lb, x, y, exercised, &fixings, jacobian, simm)
                    .map_err(|e| path_err(path_id, tl.days[lb], e))?;
                if breakdown.vega_escalations > 0 {
                    vega_escalations.fetch_add(breakdown.vega_escalations, Ordering::Relaxed);
                }
                im_posted(breakdown.total(), &cfg.csa)
            } else {
                0.0
            };
            (vm_state, im)
        };
        let h = if cfg.scheme == CollateralScheme::None {
            v0
        } else {
            assemble_exposure(v0, vm, im)?
        };
        let (x, y) = states[k];
        let numer = setup.numeraire[i].price(x, y);
        row.v0[i] = v0;
        row.vm[i] = vm;
        row.im[i] = im;
        row.h[i] = h;
        row.hd_pos[i] = setup.p0_maturity * h.max(0.0) / numer;
        row.hd_neg[i] = setup.p0_maturity * h.min(0.0) / numer;
    }
    Ok(row)
}

/// One audit record: the SIMM sensitivity vectors behind the IM at a
/// (path, look-back step).
#[derive(Debug, Clone)]
pub struct ImAuditRow {
    pub path_id: u64,
    pub step_days: i64,
    pub vectors: crate::simm::RiskVectors,
    pub delta_margin: f64,
    pub vega_margin: f64,
    pub curvature_margin: f64,
    pub im_posted: f64,
}

/// Recomputes the dynamic-IM sensitivities for the first `n_paths` paths
/// and returns them per look-back step, for the audit dump.
pub fn audit_im_vectors(
    market: &MarketSnapshot,
    params: &G2ppParams,
    simm: &SimmParamsV21,
    jacobian: &CurveJacobian,
    instrument: &Instrument,
    cfg: &EngineConfig,
) -> Result<Vec<ImAuditRow>> {
    let setup = EngineSetup::build(market, params, instrument, cfg)?;
    let n_primary = setup.tl.primary_pos.len();
    let mut out = Vec::new();
    for path_id in 0..cfg.n_paths as u64 {
        let (states, fixings, exercised) = setup.simulate_path(path_id)?;
        for i in 1..n_primary.saturating_sub(1) {
            let lb = setup.tl.lookback_pos[i];
            let (x, y) = states[lb];
            let breakdown = setup
                .dynamic_im(lb, x, y, exercised, &fixings, jacobian, simm)
                .map_err(|e| path_err(path_id, setup.tl.days[lb], e))?;
            out.push(ImAuditRow {
                path_id,
                step_days: setup.tl.days[lb],
                im_posted: im_posted(breakdown.total(), &cfg.csa),
                delta_margin: breakdown.delta_margin,
                vega_margin: breakdown.vega_margin,
                curvature_margin: breakdown.curvature_margin,
                vectors: breakdown.vectors,
            });
        }
    }
    Ok(out)
}

fn bond_coefs(
    params: &G2ppParams,
    market: &MarketSnapshot,
    t_days: i64,
    maturity_days: i64,
) -> Result<BondCoefs> {
    let t = years_from_days(t_days);
    let cap_t = years_from_days(maturity_days);
    Ok(BondCoefs {
        a: a_factor(params, &market.discount, t, cap_t)?,
        ba: b_factor(params.a, t, cap_t),
        bb: b_factor(params.b, t, cap_t),
    })
}

fn path_err(path_id: u64, step_days: i64, e: Error) -> Error {
    match e {
        Error::PathStep { .. } => e,
        other => Error::PathStep {
            path_id,
            step_days,
            msg: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g2pp::PiecewiseGamma;
    use crate::marketdata::workspace_data_dir;
    use crate::pricing::{SwapSpec, SwaptionSpec};

    fn market() -> MarketSnapshot {
        MarketSnapshot::load(&workspace_data_dir(), 0.4).unwrap()
    }

    fn published_params() -> G2ppParams {
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

    fn swap_15y_atm() -> Instrument {
        Instrument::Swap(SwapSpec::new(1e8, 1.0, 0.0117, 0, 180))
    }

    #[test]
    fn timeline_contains_all_events_once() {
        let cf = SwapSpec::new(1e8, 1.0, 0.0117, 0, 180).cashflows();
        let grids = build_grids(5475, GridStep::Months(1), GridKind::Joint, &cf.float_days, 2)
            .unwrap();
        let tl = build_timeline(&grids.primary_days, &grids.lookback_days, &cf.float_days, None);
        for w in tl.days.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert_eq!(tl.days[0], 0);
        assert_eq!(tl.primary_pos.len(), grids.primary_days.len());
        assert_eq!(tl.fixing_events.len(), 30);
        // Lookback of a spike point T_j + 1 precedes the coupon date.
        let spike_i = grids.primary_days.iter().position(|&d| d == 184).unwrap();
        assert_eq!(tl.days[tl.lookback_pos[spike_i]], 182);
    }

    #[test]
    fn first_paths_are_shared_across_ladder_sizes() {
        // Counter-based draws: the N = 40 run reproduces the first 10 paths
        // of the N = 10 run bit for bit.
        let m = market();
        let p = published_params();
        let simm = SimmParamsV21::v21();
        let jac = CurveJacobian::identity(&m.discount, &m.forward);
        let inst = swap_15y_atm();
        let mut cfg = EngineConfig {
            n_paths: 10,
            grid_step: GridStep::Months(6),
            scheme: CollateralScheme::VmOnly,
            keep_cube: true,
            ..EngineConfig::default()
        };
        let small = simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap();
        cfg.n_paths = 40;
        let large = simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap();
        let (cs, cl) = (small.cube.unwrap(), large.cube.unwrap());
        let steps = cs.t_days.len();
        for idx in 0..10 * steps {
            assert_eq!(cs.h[idx].to_bits(), cl.h[idx].to_bits());
            assert_eq!(cs.vm[idx].to_bits(), cl.vm[idx].to_bits());
        }
    }

    #[test]
    fn swaption_mc_price_agrees_with_quadrature() {
        // Independent route check: the t0 quadrature price against the
        // numeraire-rebased Monte Carlo payoff at expiry.
        let m = market();
        let p = published_params();
        let spec = SwaptionSpec {
            swap: SwapSpec::new(1e8, 1.0, 0.0170, 60, 120),
            expiry_months: 60,
            black_shift: 0.06,
        };
        let quad_price =
            crate::pricing::swaption::swaption_price_g2pp(&spec, &p, &m, &QuadratureCfg::default())
                .unwrap();
        let cf = spec.swap.cashflows();
        let maturity = cf.maturity_days();
        let t_measure = years_from_days(maturity);
        let expiry = spec.expiry_days();
        let tm = transition_moments(&p, 0.0, years_from_days(expiry), t_measure).unwrap();
        let chol = cholesky_2x2(tm.cov, 1e-12).unwrap();
        let kernel = SwapStateKernel::build(&cf, &p, &m.discount, &m.forward, expiry).unwrap();
        let numer = bond_coefs(&p, &m, expiry, maturity).unwrap();
        let p0t = m.discount.df_days(maturity as f64).unwrap();
        let n = 200_000usize;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for path in 0..n {
            let mut rng = PathRng::new(4242, path as u64);
            let (z1, z2) = rng.normals(1);
            let x = -tm.drift_x + chol.l11 * z1;
            let y = -tm.drift_y + chol.l21 * z1 + chol.l22 * z2;
            let payoff = kernel.price(x, y, None).unwrap().max(0.0);
            let v = p0t * payoff / numer.price(x, y);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - quad_price).abs() < 3.0 * se,
            "MC {mean} +- {se} vs quadrature {quad_price}"
        );
    }

    #[test]
    fn perfect_collateral_suppresses_exposure() {
        // l = 0, K = MTA = 0: H = 0 at every step except the pinned ends.
        let m = market();
        let p = published_params();
        let simm = SimmParamsV21::v21();
        let jac = CurveJacobian::identity(&m.discount, &m.forward);
        let inst = swap_15y_atm();
        let cfg = EngineConfig {
            n_paths: 8,
            grid_step: GridStep::Months(3),
            scheme: CollateralScheme::VmOnly,
            csa: CsaTerms::frictionless(0),
            keep_cube: true,
            ..EngineConfig::default()
        };
        let out = simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap();
        let cube = out.cube.unwrap();
        let steps = cube.t_days.len();
        for m_idx in 0..cfg.n_paths {
            for i in 1..steps - 1 {
                let h = cube.h[m_idx * steps + i];
                assert!(h.abs() < 1e-6, "path {m_idx} step {i}: H = {h}");
            }
        }
    }

    #[test]
    fn uncollateralized_swap_epe_is_positive_and_jagged() {
        let m = market();
        let p = published_params();
        let simm = SimmParamsV21::v21();
        let jac = CurveJacobian::identity(&m.discount, &m.forward);
        let inst = swap_15y_atm();
        let cfg = EngineConfig {
            n_paths: 400,
            grid_step: GridStep::Months(1),
            grid_kind: GridKind::Standard,
            scheme: CollateralScheme::None,
            ..EngineConfig::default()
        };
        let out = simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap();
        assert!(out.xva.cva < 0.0);
        assert!(out.xva.dva > 0.0);
        assert!(out.xva.cva_lb <= out.xva.cva && out.xva.cva <= out.xva.cva_ub);
        let peak = out.profiles.epe.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 1e6, "peak EPE {peak}");
        // EPE at t0 is the deterministic clipped mark.
        assert!((out.profiles.epe[0] - out.profiles.epe_ub[0]).abs() < 1e-9);
        // Coupon-frequency sawtooth: the mismatch between semi-annual float
        // receipts and annual fixed payments makes the profile jagged, with
        // many local direction changes rather than a smooth hump.
        let epe = &out.profiles.epe;
        let mut turns = 0;
        for i in 1..epe.len() - 1 {
            if (epe[i] - epe[i - 1]) * (epe[i + 1] - epe[i]) < 0.0 {
                turns += 1;
            }
        }
        assert!(turns >= 20, "EPE profile has only {turns} direction changes");
    }

    #[test]
    fn daily_grid_engine_runs_with_clamped_lookbacks() {
        // Short swap on the daily grid: the first look-back points clamp to
        // the anchor and the joint grid degenerates to the standard one.
        let m = market();
        let p = published_params();
        let simm = SimmParamsV21::v21();
        let jac = CurveJacobian::identity(&m.discount, &m.forward);
        let inst = Instrument::Swap(SwapSpec::new(1e8, 1.0, 0.005, 0, 24));
        let run = |kind: GridKind| {
            let cfg = EngineConfig {
                n_paths: 20,
                grid_step: GridStep::Daily,
                grid_kind: kind,
                scheme: CollateralScheme::VmOnly,
                ..EngineConfig::default()
            };
            simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap()
        };
        let std_run = run(GridKind::Standard);
        let joint_run = run(GridKind::Joint);
        assert_eq!(std_run.profiles.t_days.len(), 731);
        assert_eq!(std_run.xva.cva.to_bits(), joint_run.xva.cva.to_bits());
        assert!(std_run.xva.cva <= 0.0 && std_run.xva.dva >= 0.0);
    }

    #[test]
    fn swaption_vm_im_small_run() {
        // Exercises the full dynamic-IM path for a live option: delta, the
        // vega workaround and curvature, then delta-only after exercise.
        let m = market();
        let p = published_params();
        let simm = SimmParamsV21::v21();
        let jac = CurveJacobian::identity(&m.discount, &m.forward);
        let inst = Instrument::Swaption(crate::pricing::SwaptionSpec {
            swap: SwapSpec::new(1e8, 1.0, 0.0170, 60, 120),
            expiry_months: 60,
            black_shift: 0.06,
        });
        let cfg = EngineConfig {
            scheme: CollateralScheme::VmIm,
            n_paths: 6,
            grid_step: GridStep::Months(6),
            keep_cube: true,
            ..EngineConfig::default()
        };
        let out = simulate_xva(&m, &p, &simm, &jac, &inst, &cfg).unwrap();
        let cube = out.cube.unwrap();
        // IM is positive while the option lives and the exposure is tiny
        // relative to the uncollateralized option value.
        let steps = cube.t_days.len();
        let pre_expiry_i = cube.t_days.iter().position(|&d| d >= 913).unwrap();
        for m_idx in 0..cfg.n_paths {
            assert!(cube.im[m_idx * steps + pre_expiry_i] > 0.0);
        }
        assert!(out.xva.cva.abs() < 1e4);
        assert!(out.xva.dva.abs() < 1e4);
    }
}

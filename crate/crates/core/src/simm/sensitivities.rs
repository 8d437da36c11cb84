//! Forward sensitivities for dynamic IM: zero-rate Delta by one-sided 1bp
//! bumps of the simulated curves re-anchored at the look-back date, the
//! G2++ parameter-shock Vega approximation, and the margin composition per
//! instrument type.

use super::{
    allocate, curvature_margin, curvature_vector, delta_margin, vega_margin, RiskVectors,
    SimmParamsV21, N_TENORS,
};
use crate::g2pp::{zcb_price, G2ppParams};
use crate::marketdata::{jacobian::CurveJacobian, CurveId, CurveView, ZeroCurve};
use crate::pricing::swap::{par_swap_rate, swap_annuity};
use crate::pricing::swaption::{QuadratureCfg, SwaptionKernel};
use crate::pricing::black::implied_vol;
use crate::pricing::SwapCashflows;
use crate::time::years_from_days;
use crate::{Error, Result};

/// The zero curves implied by the factor state at a future date, re-anchored
/// so that day offsets count from that date. The pillar ladder reuses the
/// market term-structure offsets up to the needed horizon.
#[derive(Debug, Clone)]
pub struct SimulatedCurves {
    pub anchor_days: i64,
    pub discount: ZeroCurve,
    pub forward: ZeroCurve,
}

impl SimulatedCurves {
    pub fn view(&self) -> CurveView<'_> {
        CurveView {
            anchor_days: self.anchor_days,
            discount: &self.discount,
            forward: &self.forward,
        }
    }
}

fn pillar_offsets(curve: &ZeroCurve, horizon_days: i64) -> Vec<i64> {
    let mut offs = Vec::new();
    for &d in curve.pillar_days().iter().skip(1) {
        offs.push(d);
        if d >= horizon_days {
            break;
        }
    }
    offs
}

/// Builds the simulated pillar curves at `t_days` in state (x, y).
pub fn simulated_curves(
    market_discount: &ZeroCurve,
    market_forward: &ZeroCurve,
    params: &G2ppParams,
    t_days: i64,
    x: f64,
    y: f64,
    horizon_days: i64,
) -> Result<SimulatedCurves> {
    let t = years_from_days(t_days);
    let build = |curve: &ZeroCurve, id: CurveId| -> Result<ZeroCurve> {
        let mut pillars = vec![(0i64, 1.0f64)];
        for off in pillar_offsets(curve, horizon_days) {
            let cap_t = years_from_days(t_days + off);
            pillars.push((off, zcb_price(params, curve, t, cap_t, x, y)?));
        }
        ZeroCurve::new(id, &pillars)
    };
    Ok(SimulatedCurves {
        anchor_days: t_days,
        discount: build(market_discount, CurveId::Discount)?,
        forward: build(market_forward, CurveId::Forward)?,
    })
}

const DELTA_BUMP: f64 = 1e-4;

/// Incremental repricer: caches per-coupon contributions so a single-pillar
/// bump only recomputes the coupons inside that pillar's interpolation
/// support.
struct SwapRepricer<'a> {
    cf: &'a SwapCashflows,
    v_days: i64,
    fixing: Option<f64>,
    scale: f64,
    float_contrib: Vec<f64>,
    fixed_contrib: Vec<f64>,
    base: f64,
}

impl<'a> SwapRepricer<'a> {
    fn new(cf: &'a SwapCashflows, view: &CurveView, fixing: Option<f64>) -> Result<Self> {
        let v_days = view.anchor_days;
        let scale = cf.notional * cf.omega;
        let mut r = SwapRepricer {
            cf,
            v_days,
            fixing,
            scale,
            float_contrib: vec![0.0; cf.float_days.len()],
            fixed_contrib: vec![0.0; cf.fixed_days.len()],
            base: 0.0,
        };
        for j in 1..cf.float_days.len() {
            r.float_contrib[j] = r.float_value(j, view)?;
        }
        for i in 1..cf.fixed_days.len() {
            r.fixed_contrib[i] = r.fixed_value(i, view)?;
        }
        r.base = r.float_contrib.iter().sum::<f64>() + r.fixed_contrib.iter().sum::<f64>();
        Ok(r)
    }

    fn float_value(&self, j: usize, view: &CurveView) -> Result<f64> {
        let (d0, d1) = (self.cf.float_days[j - 1], self.cf.float_days[j]);
        if d1 < self.v_days {
            return Ok(0.0);
        }
        let tau_r = self.cf.conv.float_dc.year_fraction(d0, d1);
        let rate = if self.cf.running_coupon(self.v_days) == Some(j) {
            self.fixing.ok_or_else(|| {
                Error::InvalidInput("running coupon needs a fixing for delta repricing".into())
            })?
        } else {
            let tau_f = self.cf.conv.fra_dc.year_fraction(d0, d1);
            (view.df_forward(d0)? / view.df_forward(d1)? - 1.0) / tau_f
        };
        Ok(self.scale * rate * tau_r * view.df_discount(d1)?)
    }

    fn fixed_value(&self, i: usize, view: &CurveView) -> Result<f64> {
        let (d0, d1) = (self.cf.fixed_days[i - 1], self.cf.fixed_days[i]);
        if d1 < self.v_days {
            return Ok(0.0);
        }
        let tau_k = self.cf.conv.fixed_dc.year_fraction(d0, d1);
        Ok(-self.scale * self.cf.fixed_rate * tau_k * view.df_discount(d1)?)
    }

    /// Price change under a bump of pillar `k` of `curve_id`, whose support
    /// is the open day interval (lo_abs, hi_abs).
    fn bump_delta(
        &self,
        view: &CurveView,
        curve_id: CurveId,
        lo_abs: i64,
        hi_abs: i64,
    ) -> Result<f64> {
        let inside = |d: i64| d > lo_abs && d < hi_abs;
        let running = self.cf.running_coupon(self.v_days);
        let mut delta = 0.0;
        for j in 1..self.cf.float_days.len() {
            let (d0, d1) = (self.cf.float_days[j - 1], self.cf.float_days[j]);
            if d1 < self.v_days {
                continue;
            }
            let affected = match curve_id {
                CurveId::Discount => inside(d1),
                CurveId::Forward => running != Some(j) && (inside(d0) || inside(d1)),
            };
            if affected {
                delta += self.float_value(j, view)? - self.float_contrib[j];
            }
        }
        if curve_id == CurveId::Discount {
            for i in 1..self.cf.fixed_days.len() {
                let d1 = self.cf.fixed_days[i];
                if d1 >= self.v_days && inside(d1) {
                    delta += self.fixed_value(i, view)? - self.fixed_contrib[i];
                }
            }
        }
        Ok(delta)
    }
}

/// What a delta bump has to reprice.
pub enum DeltaTarget<'a> {
    Swap {
        cf: &'a SwapCashflows,
        fixing: Option<f64>,
    },
    Swaption {
        cf: &'a SwapCashflows,
        expiry_days: i64,
        quad: QuadratureCfg,
    },
}

impl<'a> DeltaTarget<'a> {
    fn last_cashflow(&self) -> i64 {
        match self {
            DeltaTarget::Swap { cf, .. } | DeltaTarget::Swaption { cf, .. } => cf.maturity_days(),
        }
    }
}

/// Forward Delta: one-sided +1bp zero-pillar bumps on the simulated curves,
/// chained through the t0 Jacobian and allocated onto the SIMM tenors.
/// Returned vectors are EUR per 1bp move.
pub fn forward_delta(
    target: &DeltaTarget,
    params: &G2ppParams,
    sim: &mut SimulatedCurves,
    jacobian: &CurveJacobian,
) -> Result<([f64; N_TENORS], [f64; N_TENORS])> {
    let anchor = sim.anchor_days;
    let last_cash = target.last_cashflow();
    let swap_repricer = match target {
        DeltaTarget::Swap { cf, fixing } => Some(SwapRepricer::new(cf, &sim.view(), *fixing)?),
        DeltaTarget::Swaption { .. } => None,
    };
    let swaption_base = match target {
        DeltaTarget::Swaption {
            cf,
            expiry_days,
            quad,
        } => {
            let kernel = SwaptionKernel::build(
                cf,
                params,
                &sim.view(),
                years_from_days(anchor),
                *expiry_days,
            )?;
            Some(kernel.price(0.0, 0.0, quad)?)
        }
        DeltaTarget::Swap { .. } => None,
    };

    let mut dv_d = vec![0.0; sim.discount.pillar_count().max(1) - 1];
    let mut dv_x = vec![0.0; sim.forward.pillar_count().max(1) - 1];
    // Full-length vectors on the market pillar ladder for the Jacobian.
    let n_d_quotes = jacobian.quote_days_discount.len();
    let n_x_quotes = jacobian.quote_days_forward.len();
    let mut full_d = vec![0.0; n_d_quotes];
    let mut full_x = vec![0.0; n_x_quotes];

    for curve_id in [CurveId::Discount, CurveId::Forward] {
        let n = match curve_id {
            CurveId::Discount => dv_d.len(),
            CurveId::Forward => dv_x.len(),
        };
        for k in 1..=n {
            let (off_lo, off_hi) = {
                let c = match curve_id {
                    CurveId::Discount => &sim.discount,
                    CurveId::Forward => &sim.forward,
                };
                let days = c.pillar_days();
                let hi = if k + 1 < days.len() {
                    days[k + 1]
                } else {
                    i64::MAX / 2
                };
                (days[k - 1], hi)
            };
            // Pillars entirely beyond the last cashflow cannot move the price.
            if anchor + off_lo >= last_cash {
                break;
            }
            let saved = {
                let c = match curve_id {
                    CurveId::Discount => &mut sim.discount,
                    CurveId::Forward => &mut sim.forward,
                };
                let s = c.pillar_state(k);
                c.bump_zero_rate(k, DELTA_BUMP);
                s
            };
            let dv = match (&swap_repricer, &swaption_base, target) {
                (Some(rep), _, _) => rep.bump_delta(
                    &sim.view(),
                    curve_id,
                    anchor + off_lo,
                    anchor.saturating_add(off_hi),
                )?,
                (
                    None,
                    Some(base),
                    DeltaTarget::Swaption {
                        cf,
                        expiry_days,
                        quad,
                    },
                ) => {
                    let kernel = SwaptionKernel::build(
                        cf,
                        params,
                        &sim.view(),
                        years_from_days(anchor),
                        *expiry_days,
                    )?;
                    kernel.price(0.0, 0.0, quad)? - base
                }
                _ => unreachable!(),
            };
            {
                let c = match curve_id {
                    CurveId::Discount => &mut sim.discount,
                    CurveId::Forward => &mut sim.forward,
                };
                c.restore_pillar(k, saved);
            }
            match curve_id {
                CurveId::Discount => dv_d[k - 1] = dv,
                CurveId::Forward => dv_x[k - 1] = dv,
            }
        }
    }
    full_d[..dv_d.len().min(n_d_quotes)]
        .copy_from_slice(&dv_d[..dv_d.len().min(n_d_quotes)]);
    full_x[..dv_x.len().min(n_x_quotes)]
        .copy_from_slice(&dv_x[..dv_x.len().min(n_x_quotes)]);

    let (market_d, market_x) = jacobian.market_deltas(&full_d, &full_x);
    let mut out_d = [0.0; N_TENORS];
    let mut out_x = [0.0; N_TENORS];
    for (j, amount) in market_d.iter().enumerate() {
        if *amount != 0.0 {
            allocate(
                jacobian.quote_days_discount[j] as f64 / 365.0,
                *amount,
                &mut out_d,
            );
        }
    }
    for (j, amount) in market_x.iter().enumerate() {
        if *amount != 0.0 {
            allocate(
                jacobian.quote_days_forward[j] as f64 / 365.0,
                *amount,
                &mut out_x,
            );
        }
    }
    Ok((out_d, out_x))
}

#[derive(Debug, Clone)]
pub struct VegaOutcome {
    pub vega: f64,
    pub vega_risk_total: f64,
    pub vega_risk: [f64; N_TENORS],
    pub base_implied_vol: f64,
    pub shift_used: f64,
    pub escalations: usize,
}

/// Forward Vega by the G2++ parameter-shock approximation: the swaption is
/// repriced under relatively shocked volatility parameters
/// (sigma (1 + eps_sigma), eta (1 + eps_eta)) on the same simulated curves,
/// and both prices are mapped to Black implied volatilities. The shocks are
/// the percentage moves recovered from re-calibrating the model to a
/// 1%-shifted quote surface. When the configured shift cannot invert a deep
/// path, it is doubled up to `shift_max`.
#[allow(clippy::too_many_arguments)]
pub fn forward_vega(
    cf: &SwapCashflows,
    params: &G2ppParams,
    sim: &SimulatedCurves,
    expiry_days: i64,
    eps_sigma: f64,
    eps_eta: f64,
    shift: f64,
    shift_max: f64,
    quad: &QuadratureCfg,
) -> Result<VegaOutcome> {
    if eps_sigma == 0.0 && eps_eta == 0.0 {
        return Err(Error::InvalidInput(
            "vega shocks eps_sigma and eps_eta cannot both be zero".into(),
        ));
    }
    let anchor_y = years_from_days(sim.anchor_days);
    let view = sim.view();
    let base_kernel = SwaptionKernel::build(cf, params, &view, anchor_y, expiry_days)?;
    let v_base = base_kernel.price(0.0, 0.0, quad)?;
    let bumped = G2ppParams::new(
        params.a,
        params.b,
        params.sigma * (1.0 + eps_sigma),
        params.eta * (1.0 + eps_eta),
        params.rho,
        params.gamma.clone(),
    )?;
    let bump_kernel = SwaptionKernel::build(cf, &bumped, &view, anchor_y, expiry_days)?;
    let v_bump = bump_kernel.price(0.0, 0.0, quad)?;

    let fwd = par_swap_rate(cf, &view, sim.anchor_days)?;
    let annuity = swap_annuity(cf, &view, sim.anchor_days)?;
    let tau_e = years_from_days(expiry_days - sim.anchor_days);
    let mut lambda = shift;
    let mut escalations = 0usize;
    let (vol_base, vol_bump) = loop {
        let res = implied_vol(v_base, fwd, cf.fixed_rate, annuity, lambda, cf.omega, cf.notional, tau_e)
            .and_then(|v0| {
                implied_vol(
                    v_bump,
                    fwd,
                    cf.fixed_rate,
                    annuity,
                    lambda,
                    cf.omega,
                    cf.notional,
                    tau_e,
                )
                .map(|v1| (v0, v1))
            });
        match res {
            Ok(pair) => break pair,
            Err(e) => {
                lambda *= 2.0;
                escalations += 1;
                if lambda > shift_max {
                    return Err(Error::ImpliedVol(format!(
                        "no shift up to {shift_max} inverts the Black formula: {e}"
                    )));
                }
            }
        }
    };
    let denom = vol_bump - vol_base;
    if denom.abs() < 1e-12 {
        // No measurable volatility left (e.g. inside the last margin period
        // before expiry, where the value is pure intrinsic): zero Vega Risk.
        if (v_bump - v_base).abs() <= (1e-8 * cf.notional.abs()).max(1.0) {
            return Ok(VegaOutcome {
                vega: 0.0,
                vega_risk_total: 0.0,
                vega_risk: [0.0; N_TENORS],
                base_implied_vol: vol_base,
                shift_used: lambda,
                escalations,
            });
        }
        return Err(Error::ImpliedVol(
            "parameter shock produced no implied-volatility move".into(),
        ));
    }
    let vega = (v_bump - v_base) / denom;
    let vega_risk_total = vega * vol_base;
    let mut vega_risk = [0.0; N_TENORS];
    allocate(tau_e, vega_risk_total, &mut vega_risk);
    Ok(VegaOutcome {
        vega,
        vega_risk_total,
        vega_risk,
        base_implied_vol: vol_base,
        shift_used: lambda,
        escalations,
    })
}

/// Margin components with the risk vectors behind them.
#[derive(Debug, Clone, Default)]
pub struct ImBreakdown {
    pub delta_margin: f64,
    pub vega_margin: f64,
    pub curvature_margin: f64,
    pub vectors: RiskVectors,
    pub vega_escalations: usize,
}

impl ImBreakdown {
    pub fn total(&self) -> f64 {
        self.delta_margin + self.vega_margin + self.curvature_margin
    }
}

/// IM of a swap: Delta margin only.
pub fn swap_im_breakdown(
    simm: &SimmParamsV21,
    cf: &SwapCashflows,
    fixing: Option<f64>,
    params: &G2ppParams,
    sim: &mut SimulatedCurves,
    jacobian: &CurveJacobian,
) -> Result<ImBreakdown> {
    let (d, x) = forward_delta(&DeltaTarget::Swap { cf, fixing }, params, sim, jacobian)?;
    Ok(ImBreakdown {
        delta_margin: delta_margin(simm, &d, &x),
        vectors: RiskVectors {
            delta_discount: d,
            delta_forward: x,
            ..RiskVectors::default()
        },
        ..ImBreakdown::default()
    })
}

/// IM of a live swaption: Delta + Vega + Curvature margins.
#[allow(clippy::too_many_arguments)]
pub fn swaption_im_breakdown(
    simm: &SimmParamsV21,
    cf: &SwapCashflows,
    expiry_days: i64,
    params: &G2ppParams,
    sim: &mut SimulatedCurves,
    jacobian: &CurveJacobian,
    eps_sigma: f64,
    eps_eta: f64,
    shift: f64,
    shift_max: f64,
    quad: &QuadratureCfg,
) -> Result<ImBreakdown> {
    let (d, x) = forward_delta(
        &DeltaTarget::Swaption {
            cf,
            expiry_days,
            quad: *quad,
        },
        params,
        sim,
        jacobian,
    )?;
    let vega = forward_vega(
        cf, params, sim, expiry_days, eps_sigma, eps_eta, shift, shift_max, quad,
    )?;
    let cvr = curvature_vector(simm, &vega.vega_risk);
    Ok(ImBreakdown {
        delta_margin: delta_margin(simm, &d, &x),
        vega_margin: vega_margin(simm, &vega.vega_risk),
        curvature_margin: curvature_margin(simm, &cvr),
        vectors: RiskVectors {
            delta_discount: d,
            delta_forward: x,
            vega_risk: vega.vega_risk,
            curvature_risk: cvr,
        },
        vega_escalations: vega.escalations,
    })
}

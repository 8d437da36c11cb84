//! Exposure profiles, CVA/DVA discretized sums with Monte Carlo confidence
//! bounds, the analytical swaption-strip alternative, convergence ladders
//! and the model-risk AVA.

pub mod analytical;
pub mod ava;
pub mod convergence;
pub mod engine;

use crate::marketdata::CreditCurve;

/// Per-step exposure statistics, discounted to the valuation date.
#[derive(Debug, Clone, Default)]
pub struct Profiles {
    pub t_days: Vec<i64>,
    pub epe: Vec<f64>,
    pub ene: Vec<f64>,
    pub epe_lb: Vec<f64>,
    pub epe_ub: Vec<f64>,
    pub ene_lb: Vec<f64>,
    pub ene_ub: Vec<f64>,
    pub mean_vm: Vec<f64>,
    pub mean_im: Vec<f64>,
}

/// Identification of the calculation setup that produced an XVA figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkDescriptor {
    pub model: String,
    pub grid: String,
    pub dt: String,
    pub n_mc: Option<usize>,
}

impl FrameworkDescriptor {
    pub fn label(&self) -> String {
        match self.n_mc {
            Some(n) => format!("{} {} {} N={}", self.model, self.grid, self.dt, n),
            None => format!("{} {} {}", self.model, self.grid, self.dt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct XvaResult {
    pub cva: f64,
    pub cva_lb: f64,
    pub cva_ub: f64,
    pub dva: f64,
    pub dva_lb: f64,
    pub dva_ub: f64,
    pub profiles: Profiles,
    pub framework: FrameworkDescriptor,
    pub seconds: f64,
}

impl XvaResult {
    pub fn xva(&self) -> f64 {
        self.cva + self.dva
    }
}

/// Survival-weighted discretized CVA/DVA over the primary grid:
///   CVA = -LGD_C sum_i EPE(t_i) S_B(t_i) dQ_C(t_{i-1}, t_i]
///   DVA = -LGD_B sum_i ENE(t_i) S_C(t_i) dQ_B(t_{i-1}, t_i]
/// with ENE <= 0, so CVA <= 0 <= DVA. Bounds come from the 3-sigma EPE/ENE
/// envelopes and are normalized to lb <= point <= ub.
pub fn cva_dva(
    profiles: &Profiles,
    cds_bank: &CreditCurve,
    cds_cpty: &CreditCurve,
    lgd_bank: f64,
    lgd_cpty: f64,
    framework: FrameworkDescriptor,
    seconds: f64,
) -> XvaResult {
    let weighted = |exposure: &[f64], survivor: &CreditCurve, defaulter: &CreditCurve, lgd: f64| {
        let mut total = 0.0;
        for i in 1..profiles.t_days.len() {
            let (d0, d1) = (profiles.t_days[i - 1], profiles.t_days[i]);
            let dq = defaulter.survival_days(d0) - defaulter.survival_days(d1);
            total += exposure[i] * survivor.survival_days(d1) * dq;
        }
        -lgd * total
    };
    let cva = weighted(&profiles.epe, cds_bank, cds_cpty, lgd_cpty);
    let cva_a = weighted(&profiles.epe_lb, cds_bank, cds_cpty, lgd_cpty);
    let cva_b = weighted(&profiles.epe_ub, cds_bank, cds_cpty, lgd_cpty);
    let dva = weighted(&profiles.ene, cds_cpty, cds_bank, lgd_bank);
    let dva_a = weighted(&profiles.ene_lb, cds_cpty, cds_bank, lgd_bank);
    let dva_b = weighted(&profiles.ene_ub, cds_cpty, cds_bank, lgd_bank);
    XvaResult {
        cva,
        cva_lb: cva_a.min(cva_b),
        cva_ub: cva_a.max(cva_b),
        dva,
        dva_lb: dva_a.min(dva_b),
        dva_ub: dva_a.max(dva_b),
        profiles: profiles.clone(),
        framework,
        seconds,
    }
}

/// EPE/ENE from per-path discounted exposures: `rows[m][i]` holds the
/// discounted clipped exposure of path m at step i (positive part and
/// negative part separately supplied by the caller through the closure).
pub fn epe_ene(
    t_days: &[i64],
    n_paths: usize,
    discounted_pos: impl Fn(usize, usize) -> f64,
    discounted_neg: impl Fn(usize, usize) -> f64,
) -> Profiles {
    let n_steps = t_days.len();
    let mut p = Profiles {
        t_days: t_days.to_vec(),
        epe: vec![0.0; n_steps],
        ene: vec![0.0; n_steps],
        epe_lb: vec![0.0; n_steps],
        epe_ub: vec![0.0; n_steps],
        ene_lb: vec![0.0; n_steps],
        ene_ub: vec![0.0; n_steps],
        mean_vm: vec![0.0; n_steps],
        mean_im: vec![0.0; n_steps],
    };
    let nf = n_paths as f64;
    for i in 0..n_steps {
        let mut sum_p = 0.0;
        let mut sum_n = 0.0;
        for m in 0..n_paths {
            sum_p += discounted_pos(m, i);
            sum_n += discounted_neg(m, i);
        }
        let mean_p = sum_p / nf;
        let mean_n = sum_n / nf;
        let mut var_p = 0.0;
        let mut var_n = 0.0;
        if n_paths > 1 {
            for m in 0..n_paths {
                var_p += (discounted_pos(m, i) - mean_p).powi(2);
                var_n += (discounted_neg(m, i) - mean_n).powi(2);
            }
            var_p /= nf - 1.0;
            var_n /= nf - 1.0;
        }
        let half_p = 3.0 * (var_p / nf).sqrt();
        let half_n = 3.0 * (var_n / nf).sqrt();
        p.epe[i] = mean_p;
        p.ene[i] = mean_n;
        p.epe_lb[i] = mean_p - half_p;
        p.epe_ub[i] = mean_p + half_p;
        p.ene_lb[i] = mean_n - half_n;
        p.ene_ub[i] = mean_n + half_n;
    }
    p
}

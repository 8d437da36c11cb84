//! Subcommand implementations and CSV emission.

use crate::config::RunConfig;
use std::fmt::Write as _;
use std::path::Path;
use xva_core::collateral::GridKind;
use xva_core::g2pp::calibrate::{calibrate as run_calibration, CalibrationConfig};
use xva_core::g2pp::G2ppParams;
use xva_core::marketdata::jacobian::{CurveJacobian, JacobianMode};
use xva_core::marketdata::MarketSnapshot;
use xva_core::pricing::swaption::{swaption_price_g2pp, QuadratureCfg};
use xva_core::pricing::{swap_price_curves, Instrument};
use xva_core::simm::{SimmParamsV21, N_TENORS, TENOR_LABELS};
use xva_core::time::GridStep;
use xva_core::xva::analytical::{analytical_swap_xva, AnalyticalConfig, StripPricer};
use xva_core::xva::ava::{mori_ava, FrameworkFamily};
use xva_core::xva::engine::{
    audit_im_vectors, simulate_xva, CollateralScheme, EngineConfig, EngineOutput,
};
use xva_core::xva::{FrameworkDescriptor, XvaResult};
use xva_core::{Error, Result};

struct Setup {
    market: MarketSnapshot,
    simm: SimmParamsV21,
    jacobian: CurveJacobian,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let market = MarketSnapshot::load(&cfg.data_dir, cfg.recovery)?;
    let simm_path = cfg.data_dir.join("simm_v21.csv");
    let simm = if simm_path.exists() {
        SimmParamsV21::load(&simm_path)?
    } else {
        SimmParamsV21::v21()
    };
    let jacobian = match cfg.jacobian {
        JacobianMode::Identity => CurveJacobian::identity(&market.discount, &market.forward),
        JacobianMode::Synthetic => CurveJacobian::synthetic(&market.discount, &market.forward)?,
    };
    Ok(Setup {
        market,
        simm,
        jacobian,
    })
}

fn require_params(cfg: &RunConfig) -> Result<G2ppParams> {
    cfg.params.clone().ok_or_else(|| Error::Config {
        field: "calc.a".into(),
        msg: "model parameters missing; run `xva-engine calibrate` and copy them into [calc]"
            .into(),
    })
}

fn engine_config(cfg: &RunConfig) -> EngineConfig {
    EngineConfig {
        scheme: cfg.scheme,
        csa: cfg.csa,
        grid_kind: cfg.grid,
        grid_step: cfg.dt,
        n_paths: cfg.n_mc,
        seed: cfg.seed,
        lgd_bank: cfg.lgd_bank,
        lgd_cpty: cfg.lgd_cpty,
        eps_sigma: cfg.eps_sigma,
        eps_eta: cfg.eps_eta,
        black_shift: cfg.lambda_shift,
        ..EngineConfig::default()
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    println!("calibrating to {} quotes ...", 14 * 13);
    let out = run_calibration(&s.market, &CalibrationConfig::default())?;
    let p = &out.params;
    let mut params_txt = String::new();
    let _ = writeln!(params_txt, "# paste into [calc]");
    let _ = writeln!(params_txt, "a = {}", p.a);
    let _ = writeln!(params_txt, "b = {}", p.b);
    let _ = writeln!(params_txt, "sigma = {}", p.sigma);
    let _ = writeln!(params_txt, "eta = {}", p.eta);
    let _ = writeln!(params_txt, "rho = {}", p.rho);
    let times: Vec<String> = p.gamma.breaks().iter().map(|v| format!("{v}")).collect();
    let vals: Vec<String> = p.gamma.values().iter().map(|v| format!("{v:.6}")).collect();
    let _ = writeln!(params_txt, "gamma_times_y = {}", times.join(","));
    let _ = writeln!(params_txt, "gamma_values = {}", vals.join(","));
    write_file(&cfg.out_dir.join("calib_params.conf"), &params_txt)?;
    let quotes = xva_core::g2pp::calibrate::calibration_quotes(&s.market)?;
    let mut err_csv = String::from("expiry_y,tenor_y,rel_error\n");
    for (q, e) in quotes.iter().zip(&out.rel_errors) {
        let _ = writeln!(err_csv, "{},{},{e}", q.expiry_y, q.tenor_y);
    }
    write_file(&cfg.out_dir.join("calib_errors.csv"), &err_csv)?;
    println!(
        "a={:.4} b={:.4} sigma={:.4} eta={:.4} rho={:.4}  objective={:.3e}  mean|err|={:.2}%  converged={}",
        p.a,
        p.b,
        p.sigma,
        p.eta,
        p.rho,
        out.objective,
        100.0 * out.mean_abs_rel_error,
        out.converged
    );
    println!("wrote {}", cfg.out_dir.join("calib_params.conf").display());
    Ok(())
}

pub fn price(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let mut csv = String::from("instrument,kind,price_eur\n");
    for (label, inst) in &cfg.instruments {
        let value = match inst {
            Instrument::Swap(swap) => {
                swap_price_curves(&swap.cashflows(), &s.market.curves(), 0, None)?
            }
            Instrument::Swaption(spec) => {
                swaption_price_g2pp(spec, &params, &s.market, &QuadratureCfg::default())?
            }
        };
        println!("{label:24} {:9} {value:18.2}", inst.label_kind());
        let _ = writeln!(csv, "{label},{},{value:.2}", inst.label_kind());
    }
    write_file(&cfg.out_dir.join("prices.csv"), &csv)?;
    Ok(())
}

fn exposure_csv(out: &EngineOutput) -> String {
    let p = &out.profiles;
    let mut csv =
        String::from("t_days,epe,ene,epe_lb,epe_ub,ene_lb,ene_ub,mean_vm,mean_im\n");
    for i in 0..p.t_days.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            p.t_days[i],
            p.epe[i],
            p.ene[i],
            p.epe_lb[i],
            p.epe_ub[i],
            p.ene_lb[i],
            p.ene_ub[i],
            p.mean_vm[i],
            p.mean_im[i]
        );
    }
    csv
}

pub fn exposure(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let ecfg = engine_config(cfg);
    for (label, inst) in &cfg.instruments {
        let out = simulate_xva(&s.market, &params, &s.simm, &s.jacobian, inst, &ecfg)?;
        let name = format!("exposure_{label}_{}.csv", cfg.scheme.label());
        write_file(&cfg.out_dir.join(&name), &exposure_csv(&out))?;
        let peak = out.profiles.epe.iter().cloned().fold(0.0, f64::max);
        println!(
            "{label:24} scheme {:6} peak EPE {peak:15.2}  wrote {name}",
            cfg.scheme.label()
        );
    }
    Ok(())
}

fn xva_row(label: &str, scheme: CollateralScheme, x: &XvaResult) -> String {
    format!(
        "{label},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{},{:.2}\n",
        scheme.label(),
        x.cva,
        x.cva_lb,
        x.cva_ub,
        x.dva,
        x.dva_lb,
        x.dva_ub,
        x.framework.n_mc.map(|n| n.to_string()).unwrap_or_default(),
        x.framework.dt,
        x.framework.grid,
        x.seconds
    )
}

pub fn xva(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let ecfg = engine_config(cfg);
    let mut csv = String::from(
        "instrument,scheme,cva,cva_lb,cva_ub,dva,dva_lb,dva_ub,n_mc,dt,grid,seconds\n",
    );
    for (label, inst) in &cfg.instruments {
        let out = simulate_xva(&s.market, &params, &s.simm, &s.jacobian, inst, &ecfg)?;
        println!(
            "{label:24} {:6} CVA {:14.2} [{:.2}, {:.2}]  DVA {:13.2} [{:.2}, {:.2}]  ({:.1}s)",
            cfg.scheme.label(),
            out.xva.cva,
            out.xva.cva_lb,
            out.xva.cva_ub,
            out.xva.dva,
            out.xva.dva_lb,
            out.xva.dva_ub,
            out.xva.seconds
        );
        csv.push_str(&xva_row(label, cfg.scheme, &out.xva));
    }
    write_file(&cfg.out_dir.join("xva_summary.csv"), &csv)?;
    Ok(())
}

pub fn ava(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let (label, inst) = cfg
        .instruments
        .first()
        .ok_or_else(|| Error::InvalidInput("ava needs at least one instrument".into()))?;
    let base = engine_config(cfg);
    let mut entries: Vec<(FrameworkDescriptor, f64)> = Vec::new();
    let mut rows = String::from("model,grid,dt,n_mc,cva,dva,xva\n");
    let mut target_idx = None;

    let mut push = |fw: FrameworkDescriptor, cva: f64, dva: f64, rows: &mut String| {
        let _ = writeln!(
            rows,
            "{},{},{},{},{cva:.2},{dva:.2},{:.2}",
            fw.model,
            fw.grid,
            fw.dt,
            fw.n_mc.map(|n| n.to_string()).unwrap_or_default(),
            cva + dva
        );
        entries.push((fw, cva + dva));
        entries.len() - 1
    };

    // Path-count ladder on the target grid (nested paths, shared seed).
    let ladder: Vec<usize> = [1000usize, 2000, 3000, 4000, 6000, 8000]
        .into_iter()
        .filter(|&n| n != cfg.n_mc)
        .collect();
    for n in ladder {
        let ecfg = EngineConfig {
            n_paths: n,
            ..base.clone()
        };
        let out = simulate_xva(&s.market, &params, &s.simm, &s.jacobian, inst, &ecfg)?;
        push(out.xva.framework.clone(), out.xva.cva, out.xva.dva, &mut rows);
    }
    // Grid family at the configured path count.
    for kind in [GridKind::Joint, GridKind::Standard] {
        for months in [1u32, 3, 6, 12] {
            let ecfg = EngineConfig {
                grid_kind: kind,
                grid_step: GridStep::Months(months),
                ..base.clone()
            };
            let out = simulate_xva(&s.market, &params, &s.simm, &s.jacobian, inst, &ecfg)?;
            let idx = push(out.xva.framework.clone(), out.xva.cva, out.xva.dva, &mut rows);
            if kind == cfg.grid && GridStep::Months(months) == cfg.dt {
                target_idx = Some(idx);
            }
        }
    }
    // Analytical frameworks, uncollateralized swaps only.
    if matches!(inst, Instrument::Swap(_)) && cfg.scheme == CollateralScheme::None {
        for pricer in [StripPricer::G2pp, StripPricer::Black] {
            for months in [1u32, 3, 6, 12] {
                let acfg = AnalyticalConfig {
                    dt: GridStep::Months(months),
                    pricer,
                    black_shift: cfg.lambda_shift,
                    lgd_bank: cfg.lgd_bank,
                    lgd_cpty: cfg.lgd_cpty,
                    ..AnalyticalConfig::default()
                };
                let r = analytical_swap_xva(&s.market, &params, inst, cfg.scheme, &acfg)?;
                push(r.framework.clone(), r.cva, r.dva, &mut rows);
            }
        }
    }
    let target_idx = match target_idx {
        Some(idx) => idx,
        None => {
            // The configured combination is outside the canned family (for
            // example a daily grid); run it explicitly as the target.
            let out = simulate_xva(&s.market, &params, &s.simm, &s.jacobian, inst, &base)?;
            push(out.xva.framework.clone(), out.xva.cva, out.xva.dva, &mut rows)
        }
    };
    let family = FrameworkFamily::new(entries, target_idx)?;
    let outcome = mori_ava(&family)?;
    write_file(&cfg.out_dir.join("ava_family.csv"), &rows)?;
    println!(
        "{label}: XVA(M) = {:.2}  prudent XVA = {:.2} ({})  AVA = {:.2}",
        outcome.target_xva,
        outcome.prudent_xva,
        outcome.prudent.label(),
        outcome.ava
    );
    Ok(())
}

pub fn convergence(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let (label, inst) = cfg
        .instruments
        .first()
        .ok_or_else(|| Error::InvalidInput("convergence needs at least one instrument".into()))?;
    let base = engine_config(cfg);
    let mut csv = String::from(
        "ladder,label,cva,cva_lb,cva_ub,dva,dva_lb,dva_ub,cva_abs_pct_diff,dva_abs_pct_diff,seconds\n",
    );
    let paths = xva_core::xva::convergence::convergence_in_paths(
        &s.market,
        &params,
        &s.simm,
        &s.jacobian,
        inst,
        &base,
        &[1000, 2000, 4000, 8000, 16000],
    )?;
    for r in &paths {
        let _ = writeln!(
            csv,
            "n_mc,{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.6},{:.6},{:.2}",
            r.label,
            r.xva.cva,
            r.xva.cva_lb,
            r.xva.cva_ub,
            r.xva.dva,
            r.xva.dva_lb,
            r.xva.dva_ub,
            r.cva_abs_pct_diff,
            r.dva_abs_pct_diff,
            r.xva.seconds
        );
        println!(
            "{label} {:10} CVA {:14.2}  |d| {:6.3}%  ({:.1}s)",
            r.label,
            r.xva.cva,
            100.0 * r.cva_abs_pct_diff,
            r.xva.seconds
        );
    }
    let grid_ladder = [
        (GridKind::Joint, GridStep::Months(12)),
        (GridKind::Joint, GridStep::Months(6)),
        (GridKind::Joint, GridStep::Months(3)),
        (GridKind::Joint, GridStep::Months(1)),
        (GridKind::Standard, GridStep::Months(1)),
    ];
    let grids = xva_core::xva::convergence::convergence_in_grid(
        &s.market,
        &params,
        &s.simm,
        &s.jacobian,
        inst,
        &base,
        &grid_ladder,
    )?;
    for r in &grids {
        let _ = writeln!(
            csv,
            "grid,{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.6},{:.6},{:.2}",
            r.label,
            r.xva.cva,
            r.xva.cva_lb,
            r.xva.cva_ub,
            r.xva.dva,
            r.xva.dva_lb,
            r.xva.dva_ub,
            r.cva_abs_pct_diff,
            r.dva_abs_pct_diff,
            r.xva.seconds
        );
        println!(
            "{label} {:14} CVA {:14.2}  DVA {:13.2}  ({:.1}s)",
            r.label, r.xva.cva, r.xva.dva, r.xva.seconds
        );
    }
    write_file(&cfg.out_dir.join("convergence.csv"), &csv)?;
    Ok(())
}

pub fn simm_audit(cfg: &RunConfig) -> Result<()> {
    let s = setup(cfg)?;
    let params = require_params(cfg)?;
    let (label, inst) = cfg
        .instruments
        .first()
        .ok_or_else(|| Error::InvalidInput("simm-audit needs at least one instrument".into()))?;
    let ecfg = EngineConfig {
        scheme: CollateralScheme::VmIm,
        ..engine_config(cfg)
    };
    let rows = audit_im_vectors(&s.market, &params, &s.simm, &s.jacobian, inst, &ecfg)?;
    // Vega and curvature risk are per-tenor volatility quantities; they are
    // reported on the discount-curve row of each tenor.
    let mut csv = String::from("path,step,tenor,curve,delta_eur_bp,vr_eur,cvr_eur\n");
    for r in &rows {
        for j in 0..N_TENORS {
            let d = r.vectors.delta_discount[j];
            let x = r.vectors.delta_forward[j];
            let vr = r.vectors.vega_risk[j];
            let cvr = r.vectors.curvature_risk[j];
            if d != 0.0 || vr != 0.0 || cvr != 0.0 {
                let _ = writeln!(
                    csv,
                    "{},{},{},d,{d},{vr},{cvr}",
                    r.path_id, r.step_days, TENOR_LABELS[j]
                );
            }
            if x != 0.0 {
                let _ = writeln!(
                    csv,
                    "{},{},{},x,{x},0,0",
                    r.path_id, r.step_days, TENOR_LABELS[j]
                );
            }
        }
    }
    write_file(&cfg.out_dir.join("simm_audit.csv"), &csv)?;
    println!(
        "{label}: wrote {} sensitivity records for {} paths to simm_audit.csv",
        rows.len(),
        ecfg.n_paths
    );
    Ok(())
}

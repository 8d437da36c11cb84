//! Sectioned key-value run configuration:
//! `[market]`, `[instrument.N]`, `[csa]`, `[calc]`, `[output]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use xva_core::collateral::{CsaTerms, GridKind};
use xva_core::g2pp::{G2ppParams, PiecewiseGamma};
use xva_core::marketdata::jacobian::JacobianMode;
use xva_core::pricing::{Instrument, SwapSpec, SwaptionSpec};
use xva_core::time::GridStep;
use xva_core::xva::engine::CollateralScheme;
use xva_core::{Error, Result};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub recovery: f64,
    pub jacobian: JacobianMode,
    pub lgd_bank: f64,
    pub lgd_cpty: f64,
    pub instruments: Vec<(String, Instrument)>,
    pub scheme: CollateralScheme,
    pub csa: CsaTerms,
    pub dt: GridStep,
    pub grid: GridKind,
    pub n_mc: usize,
    pub seed: u64,
    pub eps_sigma: f64,
    pub eps_eta: f64,
    pub lambda_shift: f64,
    pub threads: usize,
    pub params: Option<G2ppParams>,
    pub out_dir: PathBuf,
}

fn cfg_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

struct Section {
    name: String,
    values: BTreeMap<String, (String, bool)>, // key -> (value, consumed)
}

impl Section {
    fn take(&mut self, key: &str) -> Option<String> {
        self.values.get_mut(key).map(|(v, used)| {
            *used = true;
            v.clone()
        })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let field = format!("{}.{}", self.name, key);
        match self.take(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|e| cfg_err(&field, format!("cannot parse `{raw}`: {e}"))),
            None => default.ok_or_else(|| cfg_err(&field, "missing required key")),
        }
    }

    fn unused_keys(&self) -> Vec<String> {
        self.values
            .iter()
            .filter(|(_, (_, used))| !used)
            .map(|(k, _)| format!("{}.{}", self.name, k))
            .collect()
    }
}

fn parse_sections(text: &str, path: &Path) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.iter().any(|s| s.name == name) {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("duplicate section [{name}]"),
                });
            }
            sections.push(Section {
                name,
                values: BTreeMap::new(),
            });
        } else if let Some((k, v)) = line.split_once('=') {
            let section = sections.last_mut().ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: "key before any [section]".into(),
            })?;
            section
                .values
                .insert(k.trim().to_string(), (v.trim().to_string(), false));
        } else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("expected `key = value` or `[section]`, got `{line}`"),
            });
        }
    }
    Ok(sections)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut sections = parse_sections(&text, path)?;

    fn find<'a>(sections: &'a mut [Section], name: &str) -> Option<&'a mut Section> {
        sections.iter_mut().find(|s| s.name == name)
    }

    let (data_dir, recovery, jacobian, lgd_bank, lgd_cpty) = {
        let market = find(&mut sections, "market")
            .ok_or_else(|| cfg_err("market", "missing [market] section"))?;
        let data_dir = match market.take("data_dir") {
            Some(d) => base_dir.join(d),
            None => std::env::var("XVA_ENGINE_DATA")
                .map(PathBuf::from)
                .map_err(|_| {
                    cfg_err(
                        "market.data_dir",
                        "missing and XVA_ENGINE_DATA is not set",
                    )
                })?,
        };
        let recovery: f64 = market.parse("recovery", Some(0.4))?;
        let jacobian = match market.take("jacobian") {
            None => JacobianMode::Identity,
            Some(raw) => JacobianMode::parse(&raw)
                .ok_or_else(|| cfg_err("market.jacobian", format!("unknown mode `{raw}`")))?,
        };
        let lgd_bank: f64 = market.parse("lgd_b", Some(0.6))?;
        let lgd_cpty: f64 = market.parse("lgd_c", Some(0.6))?;
        (data_dir, recovery, jacobian, lgd_bank, lgd_cpty)
    };
    for f in ["curves/d.csv", "curves/x.csv", "cds/B.csv", "cds/C.csv", "swaptions_atm.csv"] {
        let p = data_dir.join(f);
        if !p.exists() {
            return Err(cfg_err(
                "market.data_dir",
                format!("required file {} does not exist", p.display()),
            ));
        }
    }

    let mut instruments = Vec::new();
    let instrument_sections: Vec<String> = sections
        .iter()
        .filter(|s| s.name.starts_with("instrument"))
        .map(|s| s.name.clone())
        .collect();
    for name in instrument_sections {
        let sec = sections.iter_mut().find(|s| s.name == name).unwrap();
        let field = |k: &str| format!("{name}.{k}");
        let kind = sec.parse::<String>("kind", None)?;
        let label = sec
            .take("label")
            .unwrap_or_else(|| name.replace('.', "_"));
        let notional: f64 = sec.parse("notional", Some(1e8))?;
        let omega: f64 = sec.parse("omega", None)?;
        if omega != 1.0 && omega != -1.0 {
            return Err(cfg_err(&field("omega"), "omega must be +1 or -1"));
        }
        let strike: f64 = sec.parse("strike", None)?;
        let start_months: u32 = sec.parse("start_months", Some(0))?;
        let tenor_months: u32 = sec.parse("tenor_months", None)?;
        if tenor_months == 0 || !tenor_months.is_multiple_of(12) {
            return Err(cfg_err(
                &field("tenor_months"),
                "tenor must be a positive whole number of years",
            ));
        }
        let swap = SwapSpec::new(notional, omega, strike, start_months, tenor_months);
        let inst = match kind.as_str() {
            "swap" => {
                if sec.take("expiry_months").is_some() {
                    return Err(cfg_err(&field("expiry_months"), "not valid for a swap"));
                }
                Instrument::Swap(swap)
            }
            "swaption" => {
                let expiry_months: u32 = sec.parse("expiry_months", None)?;
                if expiry_months != start_months {
                    return Err(cfg_err(
                        &field("expiry_months"),
                        "physically settled swaption requires expiry = underlying start",
                    ));
                }
                Instrument::Swaption(SwaptionSpec {
                    swap,
                    expiry_months,
                    black_shift: 0.06,
                })
            }
            other => return Err(cfg_err(&field("kind"), format!("unknown kind `{other}`"))),
        };
        instruments.push((label, inst));
    }

    let (scheme, csa) = match find(&mut sections, "csa") {
        None => (CollateralScheme::None, CsaTerms::frictionless(2)),
        Some(sec) => {
            let scheme = match sec.take("scheme") {
                None => CollateralScheme::None,
                Some(raw) => CollateralScheme::parse(&raw)
                    .ok_or_else(|| cfg_err("csa.scheme", format!("unknown scheme `{raw}`")))?,
            };
            let csa = CsaTerms {
                k_vm: sec.parse("k_vm", Some(0.0))?,
                mta_vm: sec.parse("mta_vm", Some(0.0))?,
                k_im: sec.parse("k_im", Some(0.0))?,
                mta_im: sec.parse("mta_im", Some(0.0))?,
                mpor_lag_days: sec.parse("mpor_days", Some(2))?,
            };
            csa.validate()
                .map_err(|e| cfg_err("csa", e.to_string()))?;
            (scheme, csa)
        }
    };

    let calc =
        find(&mut sections, "calc").ok_or_else(|| cfg_err("calc", "missing [calc] section"))?;
    let dt_raw: String = calc.parse("dt", Some("1M".into()))?;
    let dt = GridStep::parse(&dt_raw)
        .ok_or_else(|| cfg_err("calc.dt", format!("unknown granularity `{dt_raw}`")))?;
    let grid_raw: String = calc.parse("grid", Some("joint".into()))?;
    let grid = GridKind::parse(&grid_raw)
        .ok_or_else(|| cfg_err("calc.grid", format!("unknown grid kind `{grid_raw}`")))?;
    let n_mc: usize = calc.parse("n_mc", Some(5000))?;
    let seed: u64 = calc.parse("seed", Some(42))?;
    let eps_sigma: f64 = calc.parse("eps_sigma", Some(0.01))?;
    let eps_eta: f64 = calc.parse("eps_eta", Some(0.04))?;
    let lambda_shift: f64 = calc.parse("lambda_shift", Some(0.06))?;
    let threads: usize = calc.parse("threads", Some(0))?;
    let params = match (
        calc.take("a"),
        calc.take("b"),
        calc.take("sigma"),
        calc.take("eta"),
        calc.take("rho"),
    ) {
        (None, None, None, None, None) => None,
        (Some(a), Some(b), Some(sigma), Some(eta), Some(rho)) => {
            let num = |field: &str, raw: &str| -> Result<f64> {
                raw.parse()
                    .map_err(|e| cfg_err(&format!("calc.{field}"), format!("{e}")))
            };
            let list = |field: &str, raw: Option<String>| -> Result<Vec<f64>> {
                let raw = raw.ok_or_else(|| cfg_err(&format!("calc.{field}"), "missing"))?;
                raw.split(',')
                    .map(|v| num(field, v.trim()))
                    .collect::<Result<Vec<f64>>>()
            };
            let gamma_times = list("gamma_times_y", calc.take("gamma_times_y"))?;
            let gamma_values = list("gamma_values", calc.take("gamma_values"))?;
            let gamma = PiecewiseGamma::new(gamma_times, gamma_values)
                .map_err(|e| cfg_err("calc.gamma_values", e.to_string()))?;
            Some(
                G2ppParams::new(
                    num("a", &a)?,
                    num("b", &b)?,
                    num("sigma", &sigma)?,
                    num("eta", &eta)?,
                    num("rho", &rho)?,
                    gamma,
                )
                .map_err(|e| cfg_err("calc.a", e.to_string()))?,
            )
        }
        _ => {
            return Err(cfg_err(
                "calc.a",
                "model parameters must be given completely (a, b, sigma, eta, rho, gamma_*) or not at all",
            ))
        }
    };

    let out_dir = match find(&mut sections, "output").and_then(|s| s.take("dir")) {
        Some(d) => base_dir.join(d),
        None => base_dir.join("out"),
    };

    for sec in &sections {
        let known = sec.name == "market"
            || sec.name == "csa"
            || sec.name == "calc"
            || sec.name == "output"
            || sec.name.starts_with("instrument");
        if !known {
            return Err(cfg_err(&sec.name, "unknown section"));
        }
        let unused = sec.unused_keys();
        if let Some(k) = unused.first() {
            return Err(cfg_err(k, "unknown key"));
        }
    }

    Ok(RunConfig {
        data_dir,
        recovery,
        jacobian,
        lgd_bank,
        lgd_cpty,
        instruments,
        scheme,
        csa,
        dt,
        grid,
        n_mc,
        seed,
        eps_sigma,
        eps_eta,
        lambda_shift,
        threads,
        params,
        out_dir,
    })
}

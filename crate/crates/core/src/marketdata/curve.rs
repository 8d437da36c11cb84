//! Discount-factor term structures with log-linear interpolation in ln P
//! over day offsets, exact at pillars, no extrapolation beyond the last
//! pillar. Log-linear in ln P makes instantaneous forwards piecewise
//! constant between pillars.

use crate::time::DAYS_PER_YEAR;
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveId {
    /// OIS discounting curve (`d`).
    Discount,
    /// IBOR forwarding curve (`x`).
    Forward,
}

impl CurveId {
    pub fn tag(self) -> &'static str {
        match self {
            CurveId::Discount => "d",
            CurveId::Forward => "x",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZeroCurve {
    pub id: CurveId,
    days: Vec<i64>,
    dfs: Vec<f64>,
    ln_dfs: Vec<f64>,
}

impl ZeroCurve {
    pub fn new(id: CurveId, pillars: &[(i64, f64)]) -> Result<Self> {
        if pillars.is_empty() {
            return Err(Error::InvalidInput("curve needs at least one pillar".into()));
        }
        if pillars[0].0 != 0 || pillars[0].1 != 1.0 {
            return Err(Error::InvalidInput(
                "first pillar must be (0, 1.0) exactly".into(),
            ));
        }
        for w in pillars.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(format!(
                    "day offsets not strictly increasing at {}d",
                    w[1].0
                )));
            }
        }
        if pillars.iter().any(|&(_, p)| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("discount factors must be > 0".into()));
        }
        let days: Vec<i64> = pillars.iter().map(|p| p.0).collect();
        let dfs: Vec<f64> = pillars.iter().map(|p| p.1).collect();
        let ln_dfs = dfs.iter().map(|p| p.ln()).collect();
        Ok(ZeroCurve {
            id,
            days,
            dfs,
            ln_dfs,
        })
    }

    /// Builds a curve from continuously compounded zero rates at day offsets
    /// (implicit (0, 1.0) first pillar).
    pub fn from_zero_rates(id: CurveId, rates: &[(i64, f64)]) -> Result<Self> {
        let mut pillars = vec![(0i64, 1.0f64)];
        for &(d, z) in rates {
            pillars.push((d, (-z * d as f64 / DAYS_PER_YEAR).exp()));
        }
        ZeroCurve::new(id, &pillars)
    }

    pub fn pillar_count(&self) -> usize {
        self.days.len()
    }

    pub fn pillar_days(&self) -> &[i64] {
        &self.days
    }

    pub fn pillar_dfs(&self) -> &[f64] {
        &self.dfs
    }

    pub fn last_day(&self) -> i64 {
        *self.days.last().unwrap()
    }

    /// Discount factor at a (possibly fractional) day offset.
    pub fn df_days(&self, t_days: f64) -> Result<f64> {
        if t_days < 0.0 {
            return Err(Error::InvalidInput(format!(
                "discount factor requested at negative offset {t_days}"
            )));
        }
        let last = self.last_day();
        if t_days > last as f64 {
            return Err(Error::Extrapolation {
                t_days,
                last_days: last,
            });
        }
        // Exact at pillars, log-linear between them.
        let idx = self.days.partition_point(|&d| (d as f64) < t_days);
        if idx < self.days.len() && self.days[idx] as f64 == t_days {
            return Ok(self.dfs[idx]);
        }
        let (i0, i1) = (idx - 1, idx);
        let (d0, d1) = (self.days[i0] as f64, self.days[i1] as f64);
        let w = (t_days - d0) / (d1 - d0);
        Ok((self.ln_dfs[i0] + w * (self.ln_dfs[i1] - self.ln_dfs[i0])).exp())
    }

    /// Discount factor at a year fraction (ACT/365F).
    pub fn df_t(&self, t_years: f64) -> Result<f64> {
        self.df_days(t_years * DAYS_PER_YEAR)
    }

    /// Continuously compounded zero rate of pillar `k` (k >= 1).
    pub fn zero_rate(&self, k: usize) -> f64 {
        assert!(k >= 1 && k < self.days.len());
        -self.ln_dfs[k] / (self.days[k] as f64 / DAYS_PER_YEAR)
    }

    /// Shifts pillar `k`'s zero rate by `dz` in place (k >= 1).
    pub fn bump_zero_rate(&mut self, k: usize, dz: f64) {
        assert!(k >= 1 && k < self.days.len());
        let t = self.days[k] as f64 / DAYS_PER_YEAR;
        self.ln_dfs[k] -= dz * t;
        self.dfs[k] = self.ln_dfs[k].exp();
    }

    /// Exact save/restore of a pillar around a temporary bump.
    pub(crate) fn pillar_state(&self, k: usize) -> (f64, f64) {
        (self.dfs[k], self.ln_dfs[k])
    }

    pub(crate) fn restore_pillar(&mut self, k: usize, state: (f64, f64)) {
        self.dfs[k] = state.0;
        self.ln_dfs[k] = state.1;
    }

    /// Simply compounded forward rate over [t1, t2] (day offsets) with
    /// year fraction `tau`.
    pub fn simple_forward_days(&self, t1: f64, t2: f64, tau: f64) -> Result<f64> {
        if t2 <= t1 {
            return Err(Error::InvalidInput(format!(
                "simple forward needs t1 < t2, got {t1} >= {t2}"
            )));
        }
        let p1 = self.df_days(t1)?;
        let p2 = self.df_days(t2)?;
        Ok((p1 / p2 - 1.0) / tau)
    }

    pub fn load(id: CurveId, path: &Path) -> Result<Self> {
        let lines = super::read_lines(path)?;
        let mut pillars = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            if k == 0 {
                if line != "day_offset,discount_factor" {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: 1,
                        msg: "expected header `day_offset,discount_factor`".into(),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            match (it.next(), it.next(), it.next()) {
                (Some(d), Some(p), None) => {
                    let parse = |s: &str, what: &str| -> Result<f64> {
                        s.parse::<f64>().map_err(|e| Error::Parse {
                            path: path.display().to_string(),
                            line: k + 1,
                            msg: format!("{what}: {e}"),
                        })
                    };
                    pillars.push((parse(d, "day_offset")? as i64, parse(p, "discount_factor")?));
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: k + 1,
                        msg: "expected two fields".into(),
                    })
                }
            }
        }
        ZeroCurve::new(id, &pillars)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("day_offset,discount_factor\n");
        for (d, p) in self.days.iter().zip(&self.dfs) {
            out.push_str(&format!("{d},{p}\n"));
        }
        std::fs::write(path, out).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// A discount/forward curve pair seen from an anchor date. `df_*` take
/// absolute day offsets and discount back to the anchor.
#[derive(Clone, Copy)]
pub struct CurveView<'a> {
    pub anchor_days: i64,
    pub discount: &'a ZeroCurve,
    pub forward: &'a ZeroCurve,
}

impl<'a> CurveView<'a> {
    pub fn df_discount(&self, abs_days: i64) -> Result<f64> {
        self.discount.df_days((abs_days - self.anchor_days) as f64)
    }

    pub fn df_forward(&self, abs_days: i64) -> Result<f64> {
        self.forward.df_days((abs_days - self.anchor_days) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::workspace_data_dir;

    fn ois() -> ZeroCurve {
        ZeroCurve::load(CurveId::Discount, &workspace_data_dir().join("curves/d.csv")).unwrap()
    }

    #[test]
    fn pillar_values_are_exact() {
        let c = ois();
        assert_eq!(c.df_days(0.0).unwrap(), 1.0);
        assert_eq!(c.df_days(21920.0).unwrap(), 0.4655);
        assert_eq!(c.df_days(1831.0).unwrap(), 0.9975);
        assert_eq!(c.df_days(2197.0).unwrap(), 0.9888);
    }

    #[test]
    fn midpoint_is_distance_weighted_geometric_mean() {
        // Between the 1831d and 2197d pillars (0.9975, 0.9888): log-linear in
        // ln P means the midpoint equals the geometric mean weighted by day
        // distance.
        let c = ois();
        let mid = (1831.0 + 2197.0) / 2.0;
        let expect = (0.5 * (0.9975f64.ln() + 0.9888f64.ln())).exp();
        assert!((c.df_days(mid).unwrap() - expect).abs() < 1e-15);
        // An off-centre point interpolates with day-distance weights.
        let t = 1831.0 + 0.25 * (2197.0 - 1831.0);
        let expect = (0.75 * 0.9975f64.ln() + 0.25 * 0.9888f64.ln()).exp();
        assert!((c.df_days(t).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn extrapolation_is_refused() {
        let c = ois();
        match c.df_days(21921.0) {
            Err(Error::Extrapolation { last_days, .. }) => assert_eq!(last_days, 21920),
            other => panic!("expected extrapolation error, got {other:?}"),
        }
        assert!(c.df_days(-1.0).is_err());
    }

    #[test]
    fn forwards_between_pillars_are_constant() {
        // ln P linear in days => the instantaneous forward is constant inside
        // a pillar interval; check via equal-width simple forwards.
        let c = ois();
        let f1 = c.simple_forward_days(1900.0, 1950.0, 50.0 / 360.0).unwrap();
        let f2 = c.simple_forward_days(2050.0, 2100.0, 50.0 / 360.0).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
    }

    #[test]
    fn simple_forward_examples() {
        let c = ois();
        // Flat segment => zero forward (build a toy flat curve).
        let flat = ZeroCurve::new(CurveId::Forward, &[(0, 1.0), (400, 1.0)]).unwrap();
        assert_eq!(flat.simple_forward_days(10.0, 200.0, 0.5).unwrap(), 0.0);
        // Doubling tau halves the rate for fixed pillar ratio.
        let f1 = c.simple_forward_days(365.0, 730.0, 1.0).unwrap();
        let f2 = c.simple_forward_days(365.0, 730.0, 2.0).unwrap();
        assert!((f1 - 2.0 * f2).abs() < 1e-15);
        // First semi-annual period of the 15Y schedule on the EURIBOR curve
        // is negative (negative short rates in the data).
        let x = ZeroCurve::load(CurveId::Forward, &workspace_data_dir().join("curves/x.csv"))
            .unwrap();
        let f = x.simple_forward_days(0.0, 183.0, 183.0 / 360.0).unwrap();
        assert!(f < 0.0, "first EURIBOR forward should be negative, got {f}");
        assert!(f.abs() < 0.01);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(ZeroCurve::new(CurveId::Discount, &[(0, 0.99)]).is_err());
        assert!(ZeroCurve::new(CurveId::Discount, &[(1, 1.0)]).is_err());
        assert!(ZeroCurve::new(CurveId::Discount, &[(0, 1.0), (5, -0.1)]).is_err());
        assert!(ZeroCurve::new(CurveId::Discount, &[(0, 1.0), (5, 0.9), (5, 0.8)]).is_err());
    }

    #[test]
    fn zero_rate_bump_round_trip() {
        let mut c = ois();
        let z = c.zero_rate(10);
        c.bump_zero_rate(10, 1e-4);
        assert!((c.zero_rate(10) - z - 1e-4).abs() < 1e-12);
        c.bump_zero_rate(10, -1e-4);
        assert!((c.zero_rate(10) - z).abs() < 1e-12);
    }
}

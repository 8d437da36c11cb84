//! Piecewise-constant hazard rates bootstrapped from CDS par spreads.
//!
//! Each quoted CDS reprices to zero under the OIS discount curve with a
//! quarterly premium leg (ACT/365F accruals, half-period accrual on
//! default) and protection paid at quarter end.

use super::ZeroCurve;
use crate::math::brent_root;
use crate::time::{months_to_days, DAYS_PER_YEAR};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CreditCurve {
    pub party: String,
    pub recovery: f64,
    pillar_days: Vec<i64>,
    spreads_bps: Vec<f64>,
    /// Hazard rate per (pillar_{i-1}, pillar_i]; flat beyond the last pillar.
    hazards: Vec<f64>,
    /// Cumulative hazard integral up to each pillar.
    cum_hazard: Vec<f64>,
}

impl CreditCurve {
    pub fn bootstrap(
        party: &str,
        spreads: &[(i64, f64)],
        recovery: f64,
        discount: &ZeroCurve,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&recovery) {
            return Err(Error::InvalidInput(format!(
                "recovery must be in [0,1), got {recovery}"
            )));
        }
        if spreads.is_empty() {
            return Err(Error::InvalidInput("no CDS pillars".into()));
        }
        for w in spreads.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(
                    "CDS day offsets must be strictly increasing".into(),
                ));
            }
        }
        if spreads.iter().any(|&(d, s)| d <= 0 || s < 0.0) {
            return Err(Error::InvalidInput(
                "CDS pillars need positive day offsets and non-negative spreads".into(),
            ));
        }
        let lgd = 1.0 - recovery;
        let mut curve = CreditCurve {
            party: party.to_string(),
            recovery,
            pillar_days: spreads.iter().map(|p| p.0).collect(),
            spreads_bps: spreads.iter().map(|p| p.1).collect(),
            hazards: Vec::new(),
            cum_hazard: Vec::new(),
        };
        for i in 0..spreads.len() {
            let (maturity, spread_bps) = spreads[i];
            let spread = spread_bps * 1e-4;
            let value = |cand: &CreditCurve| -> f64 {
                // Protection minus premium leg per unit notional.
                let mut premium = 0.0;
                let mut protection = 0.0;
                let mut prev_day = 0i64;
                let mut prev_s = 1.0;
                let mut q = 1u32;
                loop {
                    let day = months_to_days(3 * q).min(maturity);
                    let tau = (day - prev_day) as f64 / DAYS_PER_YEAR;
                    let df = cand
                        .survival_free_df(discount, day)
                        .expect("cds grid inside curve");
                    let s = cand.survival_days(day);
                    let dq = prev_s - s;
                    premium += spread * tau * df * (s + 0.5 * dq);
                    protection += lgd * df * dq;
                    if day == maturity {
                        break;
                    }
                    prev_day = day;
                    prev_s = s;
                    q += 1;
                }
                protection - premium
            };
            let f = |lambda: f64| {
                let mut cand = curve.clone();
                cand.push_segment(lambda);
                value(&cand)
            };
            if spread == 0.0 {
                curve.push_segment(0.0);
                continue;
            }
            let (lo, hi) = (0.0, 10.0);
            if f(lo) * f(hi) > 0.0 {
                return Err(Error::Bootstrap {
                    pillar_days: maturity,
                    msg: format!("no hazard in [{lo},{hi}] reprices the {spread_bps}bp quote"),
                });
            }
            let lambda = brent_root(f, lo, hi, 1e-14, 200).map_err(|e| Error::Bootstrap {
                pillar_days: maturity,
                msg: e.to_string(),
            })?;
            curve.push_segment(lambda);
        }
        Ok(curve)
    }

    fn push_segment(&mut self, lambda: f64) {
        let i = self.hazards.len();
        let prev_day = if i == 0 { 0 } else { self.pillar_days[i - 1] };
        let prev_cum = if i == 0 { 0.0 } else { self.cum_hazard[i - 1] };
        let dt = (self.pillar_days[i] - prev_day) as f64 / DAYS_PER_YEAR;
        self.hazards.push(lambda);
        self.cum_hazard.push(prev_cum + lambda * dt);
    }

    fn survival_free_df(&self, discount: &ZeroCurve, day: i64) -> Result<f64> {
        discount.df_days(day as f64)
    }

    /// Survival probability S(0, t) at a day offset; hazard is flat beyond
    /// the last pillar.
    pub fn survival_days(&self, day: i64) -> f64 {
        if day <= 0 {
            return 1.0;
        }
        let idx = self.pillar_days.partition_point(|&d| d < day);
        let (base_day, base_cum, lambda) = if idx == 0 {
            (0, 0.0, self.hazards[0])
        } else if idx < self.pillar_days.len() {
            (
                self.pillar_days[idx - 1],
                self.cum_hazard[idx - 1],
                self.hazards[idx],
            )
        } else {
            (
                self.pillar_days[idx - 1],
                self.cum_hazard[idx - 1],
                *self.hazards.last().unwrap(),
            )
        };
        let cum = base_cum + lambda * (day - base_day) as f64 / DAYS_PER_YEAR;
        (-cum).exp()
    }

    pub fn survival_t(&self, t_years: f64) -> f64 {
        self.survival_days((t_years * DAYS_PER_YEAR).round() as i64)
    }

    pub fn default_prob_days(&self, day: i64) -> f64 {
        1.0 - self.survival_days(day)
    }

    pub fn hazards(&self) -> &[f64] {
        &self.hazards
    }

    pub fn pillar_days(&self) -> &[i64] {
        &self.pillar_days
    }

    pub fn spreads_bps(&self) -> &[f64] {
        &self.spreads_bps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marketdata::{load_cds_pillars, workspace_data_dir, CurveId};

    fn ois() -> ZeroCurve {
        ZeroCurve::load(CurveId::Discount, &workspace_data_dir().join("curves/d.csv")).unwrap()
    }

    #[test]
    fn zero_spreads_mean_certain_survival() {
        let c = CreditCurve::bootstrap("Z", &[(365, 0.0), (730, 0.0)], 0.4, &ois()).unwrap();
        for d in [1, 100, 365, 730, 3000] {
            assert_eq!(c.survival_days(d), 1.0);
        }
    }

    #[test]
    fn first_segment_matches_credit_triangle() {
        // Independent oracle: for a short CDS, lambda ~ spread / (1 - R).
        let pillars = load_cds_pillars(&workspace_data_dir().join("cds/B.csv")).unwrap();
        assert_eq!(pillars[0], (180, 91.0));
        let c = CreditCurve::bootstrap("B", &pillars, 0.4, &ois()).unwrap();
        let triangle = 0.0091 / 0.6;
        let rel = (c.hazards()[0] - triangle).abs() / triangle;
        assert!(
            rel < 0.02,
            "first hazard {} vs credit triangle {triangle} (rel {rel})",
            c.hazards()[0]
        );
    }

    #[test]
    fn survival_is_monotone_and_in_unit_interval() {
        let dir = workspace_data_dir();
        for party in ["B", "C"] {
            let pillars = load_cds_pillars(&dir.join(format!("cds/{party}.csv"))).unwrap();
            let c = CreditCurve::bootstrap(party, &pillars, 0.4, &ois()).unwrap();
            let mut prev = 1.0;
            assert_eq!(c.survival_days(0), 1.0);
            for d in (0..=11000).step_by(30) {
                let s = c.survival_days(d);
                assert!(s > 0.0 && s <= prev + 1e-15, "day {d}: s = {s}, prev = {prev}");
                prev = s;
            }
            assert!(c.hazards().iter().all(|&h| h >= 0.0));
            // Increasing spread term structure gives strictly decreasing
            // survival at the pillars.
            for w in c.pillar_days().windows(2) {
                assert!(c.survival_days(w[1]) < c.survival_days(w[0]));
            }
        }
    }

    #[test]
    fn quoted_cds_reprice_to_zero() {
        // Re-evaluate each quoted CDS on the bootstrapped curve.
        let dir = workspace_data_dir();
        let disc = ois();
        let pillars = load_cds_pillars(&dir.join("cds/C.csv")).unwrap();
        let c = CreditCurve::bootstrap("C", &pillars, 0.4, &disc).unwrap();
        for &(maturity, spread_bps) in &pillars {
            let spread = spread_bps * 1e-4;
            let mut premium = 0.0;
            let mut protection = 0.0;
            let mut prev_day = 0i64;
            let mut prev_s = 1.0;
            let mut q = 1u32;
            loop {
                let day = months_to_days(3 * q).min(maturity);
                let tau = (day - prev_day) as f64 / DAYS_PER_YEAR;
                let df = disc.df_days(day as f64).unwrap();
                let s = c.survival_days(day);
                let dq = prev_s - s;
                premium += spread * tau * df * (s + 0.5 * dq);
                protection += 0.6 * df * dq;
                if day == maturity {
                    break;
                }
                prev_day = day;
                prev_s = s;
                q += 1;
            }
            assert!(
                (protection - premium).abs() < 1e-12,
                "CDS {maturity}d misprices by {}",
                protection - premium
            );
        }
    }

    #[test]
    fn arbitrageable_spreads_name_the_pillar() {
        // A collapsing spread term structure that no non-negative hazard can
        // fit: huge 1y spread then almost zero 2y spread.
        let res = CreditCurve::bootstrap("X", &[(365, 5000.0), (730, 1.0)], 0.4, &ois());
        match res {
            Err(Error::Bootstrap { pillar_days, .. }) => assert_eq!(pillar_days, 730),
            other => panic!("expected bootstrap failure, got {other:?}"),
        }
    }
}

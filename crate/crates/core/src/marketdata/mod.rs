//! Market snapshot: zero curves, CDS-implied credit curves and the ATM
//! swaption quote matrix, with the file formats used by the fixtures.

mod cds;
mod curve;
pub mod jacobian;

pub use cds::CreditCurve;
pub use curve::{CurveId, CurveView, ZeroCurve};

use crate::{Error, Result};
use std::path::Path;

/// ATM swaption straddle quotes, EUR per 10 000 notional.
#[derive(Debug, Clone)]
pub struct SwaptionQuoteMatrix {
    pub expiries_y: Vec<u32>,
    pub tenors_y: Vec<u32>,
    /// `straddles[i][j]` for expiry i, tenor j.
    pub straddles: Vec<Vec<f64>>,
}

impl SwaptionQuoteMatrix {
    pub fn straddle(&self, expiry_y: u32, tenor_y: u32) -> Option<f64> {
        let i = self.expiries_y.iter().position(|&e| e == expiry_y)?;
        let j = self.tenors_y.iter().position(|&t| t == tenor_y)?;
        Some(self.straddles[i][j])
    }

    fn validate(&self) -> Result<()> {
        if self.straddles.len() != self.expiries_y.len()
            || self.straddles.iter().any(|r| r.len() != self.tenors_y.len())
        {
            return Err(Error::InvalidInput(
                "swaption matrix dimensions do not match axes".into(),
            ));
        }
        if self
            .straddles
            .iter()
            .flatten()
            .any(|&v| !(v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "swaption straddle prices must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the engine needs about the market at the valuation date.
#[derive(Debug, Clone)]
pub struct MarketSnapshot {
    pub discount: ZeroCurve,
    pub forward: ZeroCurve,
    pub cds_bank: CreditCurve,
    pub cds_counterparty: CreditCurve,
    pub swaptions: SwaptionQuoteMatrix,
}

impl MarketSnapshot {
    /// Loads `curves/d.csv`, `curves/x.csv`, `cds/B.csv`, `cds/C.csv` and
    /// `swaptions_atm.csv` from a data directory.
    pub fn load(dir: &Path, recovery: f64) -> Result<Self> {
        let discount = ZeroCurve::load(CurveId::Discount, &dir.join("curves/d.csv"))?;
        let forward = ZeroCurve::load(CurveId::Forward, &dir.join("curves/x.csv"))?;
        let spreads_b = load_cds_pillars(&dir.join("cds/B.csv"))?;
        let spreads_c = load_cds_pillars(&dir.join("cds/C.csv"))?;
        let cds_bank = CreditCurve::bootstrap("B", &spreads_b, recovery, &discount)?;
        let cds_counterparty = CreditCurve::bootstrap("C", &spreads_c, recovery, &discount)?;
        let swaptions = load_swaption_quotes(&dir.join("swaptions_atm.csv"))?;
        Ok(MarketSnapshot {
            discount,
            forward,
            cds_bank,
            cds_counterparty,
            swaptions,
        })
    }

    pub fn curves(&self) -> CurveView<'_> {
        CurveView {
            anchor_days: 0,
            discount: &self.discount,
            forward: &self.forward,
        }
    }
}

pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(|l| l.trim().to_string()).collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// `day_offset,spread_bps` pillars.
pub fn load_cds_pillars(path: &Path) -> Result<Vec<(i64, f64)>> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        if k == 0 {
            if line != "day_offset,spread_bps" {
                return Err(parse_err(path, 1, "expected header `day_offset,spread_bps`"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let (d, s) = (it.next(), it.next());
        match (d, s, it.next()) {
            (Some(d), Some(s), None) => {
                let day = d
                    .parse::<i64>()
                    .map_err(|e| parse_err(path, k + 1, format!("day_offset: {e}")))?;
                let bps = s
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, k + 1, format!("spread_bps: {e}")))?;
                out.push((day, bps));
            }
            _ => return Err(parse_err(path, k + 1, "expected two fields")),
        }
    }
    Ok(out)
}

pub fn load_swaption_quotes(path: &Path) -> Result<SwaptionQuoteMatrix> {
    let lines = read_lines(path)?;
    let mut rows: Vec<(u32, u32, f64)> = Vec::new();
    for (k, line) in lines.iter().enumerate() {
        if k == 0 {
            if line != "expiry_y,tenor_y,straddle_per_10k" {
                return Err(parse_err(
                    path,
                    1,
                    "expected header `expiry_y,tenor_y,straddle_per_10k`",
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(path, k + 1, "expected three fields"));
        }
        let e = fields[0]
            .parse::<u32>()
            .map_err(|e| parse_err(path, k + 1, format!("expiry_y: {e}")))?;
        let t = fields[1]
            .parse::<u32>()
            .map_err(|e| parse_err(path, k + 1, format!("tenor_y: {e}")))?;
        let v = fields[2]
            .parse::<f64>()
            .map_err(|e| parse_err(path, k + 1, format!("straddle: {e}")))?;
        rows.push((e, t, v));
    }
    let mut expiries: Vec<u32> = rows.iter().map(|r| r.0).collect();
    expiries.sort_unstable();
    expiries.dedup();
    let mut tenors: Vec<u32> = rows.iter().map(|r| r.1).collect();
    tenors.sort_unstable();
    tenors.dedup();
    let mut straddles = vec![vec![f64::NAN; tenors.len()]; expiries.len()];
    for (e, t, v) in rows {
        let i = expiries.iter().position(|&x| x == e).unwrap();
        let j = tenors.iter().position(|&x| x == t).unwrap();
        straddles[i][j] = v;
    }
    if straddles.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput(format!(
            "incomplete swaption matrix in {}",
            path.display()
        )));
    }
    let m = SwaptionQuoteMatrix {
        expiries_y: expiries,
        tenors_y: tenors,
        straddles,
    };
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
pub(crate) fn workspace_data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_full_snapshot() {
        let m = MarketSnapshot::load(&workspace_data_dir(), 0.4).unwrap();
        assert_eq!(m.discount.pillar_count(), 63);
        assert_eq!(m.forward.pillar_count(), 70);
        assert_eq!(m.swaptions.expiries_y.len(), 14);
        assert_eq!(m.swaptions.tenors_y.len(), 13);
        assert_eq!(m.swaptions.straddle(5, 10), Some(996.0));
        assert_eq!(m.swaptions.straddle(2, 2), Some(95.0));
        assert_eq!(m.swaptions.straddle(30, 30), Some(4164.0));
    }

    #[test]
    fn snapshot_round_trip_is_bit_identical() {
        let dir = workspace_data_dir();
        let m = MarketSnapshot::load(&dir, 0.4).unwrap();
        let tmp = std::env::temp_dir().join(format!("xva_rt_{}", std::process::id()));
        std::fs::create_dir_all(tmp.join("curves")).unwrap();
        m.discount.save(&tmp.join("curves/d.csv")).unwrap();
        let reread = ZeroCurve::load(CurveId::Discount, &tmp.join("curves/d.csv")).unwrap();
        assert_eq!(m.discount.pillar_days(), reread.pillar_days());
        for (a, b) in m
            .discount
            .pillar_dfs()
            .iter()
            .zip(reread.pillar_dfs().iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(&tmp).ok();
    }
}

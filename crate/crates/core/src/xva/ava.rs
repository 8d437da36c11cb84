//! Model-risk AVA: the gap between the target framework's XVA and the 10th
//! percentile of the XVA distribution across plausible calculation
//! frameworks.

use crate::xva::FrameworkDescriptor;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FrameworkFamily {
    /// (descriptor, total XVA) per framework, target included.
    pub entries: Vec<(FrameworkDescriptor, f64)>,
    pub target_idx: usize,
    pub confidence: f64,
}

impl FrameworkFamily {
    pub fn new(entries: Vec<(FrameworkDescriptor, f64)>, target_idx: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("framework family is empty".into()));
        }
        if target_idx >= entries.len() {
            return Err(Error::InvalidInput("target framework not in family".into()));
        }
        Ok(FrameworkFamily {
            entries,
            target_idx,
            confidence: 0.90,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AvaOutcome {
    pub ava: f64,
    pub target_xva: f64,
    pub prudent_xva: f64,
    pub prudent: FrameworkDescriptor,
}

/// AVA = XVA(M) - XVA(M*), where M* is the family member at the lower
/// percentile order statistic: index max(1, floor((1 - confidence) * size))
/// on the ascending sort, so the prudent value is an actual framework.
pub fn mori_ava(family: &FrameworkFamily) -> Result<AvaOutcome> {
    let n = family.entries.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| family.entries[i].1.total_cmp(&family.entries[j].1));
    let k = (((1.0 - family.confidence) * n as f64).floor() as usize).max(1);
    let prudent_idx = order[k - 1];
    let target_xva = family.entries[family.target_idx].1;
    let prudent_xva = family.entries[prudent_idx].1;
    Ok(AvaOutcome {
        ava: target_xva - prudent_xva,
        target_xva,
        prudent_xva,
        prudent: family.entries[prudent_idx].0.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fw(tag: &str) -> FrameworkDescriptor {
        FrameworkDescriptor {
            model: tag.into(),
            grid: "joint".into(),
            dt: "1M".into(),
            n_mc: None,
        }
    }

    #[test]
    fn singleton_family_has_zero_ava() {
        let fam = FrameworkFamily::new(vec![(fw("M"), -697_614.0)], 0).unwrap();
        let out = mori_ava(&fam).unwrap();
        assert_eq!(out.ava, 0.0);
        assert_eq!(out.prudent_xva, -697_614.0);
    }

    #[test]
    fn prudent_is_a_listed_member_below_the_target() {
        let xs = [-5.0, -3.0, -9.0, -1.0, -7.0, -2.0, -8.0, -4.0, -6.0, 0.0];
        let entries: Vec<_> = xs.iter().map(|&x| (fw("m"), x)).collect();
        let fam = FrameworkFamily::new(entries, 3).unwrap();
        let out = mori_ava(&fam).unwrap();
        // n = 10: k = max(1, floor(1.0)) = 1 -> the smallest value.
        assert_eq!(out.prudent_xva, -9.0);
        assert_eq!(out.ava, -1.0 + 9.0);
        assert!(out.ava >= 0.0);
    }

    #[test]
    fn empty_family_is_an_error() {
        assert!(FrameworkFamily::new(vec![], 0).is_err());
        assert!(FrameworkFamily::new(vec![(fw("m"), 1.0)], 3).is_err());
    }
}

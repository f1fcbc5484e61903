//! Maximum subset sum below a target for dense sets of distinct integers.
//!
//! Queries are answered from the exact subset sums of `Z`, computed once per structure.

use std::sync::Arc;

use serde::Serialize;

use crate::core::{Error, MultiSet, Result};
use crate::sumset::{subset_sums_exact, SumsetResult};

/// Built structure for a set `Z` of distinct positive integers bounded by `l`.
#[derive(Clone, Debug)]
pub struct DenseStructure {
    items: Vec<u64>,
    l: u64,
    sum: u64,
    threshold: f64,
    dense: bool,
    sums: Arc<SumsetResult>,
}

/// Summary used in traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenseInfo {
    pub m: usize,
    pub l: u64,
    pub sum: u64,
    pub threshold: f64,
    pub dense: bool,
}

fn sqrt_log(l: u64) -> f64 {
    let l = l.max(2) as f64;
    l.sqrt() * l.log2()
}

/// `L = 100 Σ(Z) √l log l / |Z|`.
pub fn dense_threshold(m: usize, sum: u64, l: u64) -> f64 {
    100.0 * sum as f64 * sqrt_log(l) / m as f64
}

/// Whether `m > 1000 √l log l`.
pub fn density_gate(m: usize, l: u64) -> bool {
    m as f64 > 1000.0 * sqrt_log(l)
}

/// Builds the structure; `l` defaults to `max(Z)`.
pub fn build_dense_structure(z: &[u64], l: Option<u64>) -> Result<DenseStructure> {
    if z.is_empty() {
        return Err(Error::InvalidInput(
            "dense structure needs a nonempty set".into(),
        ));
    }
    let mut items = z.to_vec();
    items.sort_unstable();
    if items.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(
            "dense structure needs distinct items".into(),
        ));
    }
    let max = *items.last().unwrap();
    let l = l.unwrap_or(max);
    if items[0] == 0 || max > l {
        return Err(Error::InvalidInput(format!("items must lie in (0, {l}]")));
    }
    let ms = MultiSet::from_items(&items)?;
    let sum = ms.total();
    let sums = Arc::new(subset_sums_exact(&ms)?);
    let m = items.len();
    Ok(DenseStructure {
        items,
        l,
        sum,
        threshold: dense_threshold(m, sum, l),
        dense: density_gate(m, l),
        sums,
    })
}

impl DenseStructure {
    pub fn info(&self) -> DenseInfo {
        DenseInfo {
            m: self.items.len(),
            l: self.l,
            sum: self.sum,
            threshold: self.threshold,
            dense: self.dense,
        }
    }

    pub fn items(&self) -> &[u64] {
        &self.items
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    /// The threshold `L`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_dense(&self) -> bool {
        self.dense
    }

    /// Whether `t` lies in `(L, Σ(Z) - L)`.
    pub fn in_range(&self, t: u64) -> bool {
        t as f64 > self.threshold && (t as f64) < self.sum as f64 - self.threshold
    }

    /// Exact subset sums of `Z`; picks are labelled by item value.
    pub fn sums(&self) -> &Arc<SumsetResult> {
        &self.sums
    }

    /// Subset with the largest sum `<= t`, for targets in `(L, Σ(Z) - L)`.
    pub fn query_max_below(&self, t: u64) -> Result<Vec<u64>> {
        if !self.in_range(t) {
            return Err(Error::InvalidInput(format!(
                "query {t} outside ({}, {})",
                self.threshold,
                self.sum as f64 - self.threshold
            )));
        }
        self.max_below(t)
    }

    /// Same query without the range restriction.
    pub fn max_below(&self, t: u64) -> Result<Vec<u64>> {
        let best = self.sums.largest_at_most(t).unwrap_or(0);
        let mut out: Vec<u64> = self
            .sums
            .backtrack(best)?
            .into_iter()
            .flat_map(|p| std::iter::repeat(p.value).take(p.count as usize))
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Largest subset sum `<= t`.
    pub fn max_sum_below(&self, t: u64) -> u64 {
        self.sums.largest_at_most(t).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dp(z: &[u64], t: u64) -> u64 {
        let mut reach = vec![false; t as usize + 1];
        reach[0] = true;
        for &x in z {
            for s in (x as usize..=t as usize).rev() {
                reach[s] |= reach[s - x as usize];
            }
        }
        reach.iter().rposition(|&b| b).unwrap() as u64
    }

    #[test]
    fn threshold_formula() {
        let z: Vec<u64> = (1..=64).collect();
        let s = build_dense_structure(&z, Some(64)).unwrap();
        let want = 100.0 * 2080.0 * 8.0 * 6.0 / 64.0;
        assert!((s.threshold() - want).abs() < 1e-6);
        assert!(!s.is_dense());
        assert!(s.query_max_below(1000).is_err());
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(build_dense_structure(&[], None).is_err());
        assert!(build_dense_structure(&[1, 2, 2], None).is_err());
        assert!(build_dense_structure(&[0, 2], None).is_err());
        assert!(build_dense_structure(&[5], Some(4)).is_err());
    }

    #[test]
    fn small_queries() {
        let s = build_dense_structure(&[1, 2, 3], None).unwrap();
        let b = s.max_below(4).unwrap();
        assert_eq!(b.iter().sum::<u64>(), 4);
        let s = build_dense_structure(&[5, 9, 14], None).unwrap();
        assert_eq!(s.max_below(13).unwrap().iter().sum::<u64>(), 9);
        assert_eq!(s.max_below(14).unwrap().iter().sum::<u64>(), 14);
        assert_eq!(s.max_below(4).unwrap(), Vec::<u64>::new());
        assert_eq!(s.max_below(13).unwrap(), s.max_below(13).unwrap());
    }

    proptest! {
        #[test]
        fn matches_dp(z in proptest::collection::btree_set(1u64..200, 1..20), frac in 0.0f64..1.0) {
            let z: Vec<u64> = z.into_iter().collect();
            let s = build_dense_structure(&z, None).unwrap();
            let t = (s.sum() as f64 * frac) as u64;
            let b = s.max_below(t).unwrap();
            prop_assert_eq!(b.iter().sum::<u64>(), dp(&z, t));
            let mut seen = b.clone();
            seen.dedup();
            prop_assert_eq!(seen.len(), b.len());
            prop_assert!(b.iter().all(|x| z.contains(x)));
        }
    }
}

//! Top-level solvers for PARTITION, SUBSET SUM and UNBOUNDED SUBSET SUM.
//!
//! Group results live in a fixed-point domain with [`FIXED_POINT`] units per scaled
//! unit, so groups with different `beta` can be merged by integer sumsets.

mod exact;
mod partition;
mod subset;
mod unbounded;

pub use exact::{exact_subset_sum, exact_unbounded, EXACT_CELLS};
pub use partition::{
    partition_approx, partition_approx_with, partition_group_apx, partition_group_apx_in,
};
pub use subset::{
    subset_group_apx, subset_group_apx_in, subset_sum_weak_approx, subset_sum_weak_approx_with,
};
pub use unbounded::{unbounded_group_apx, unbounded_subset_sum_weak_approx};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::core::{ApproxSet, Eps, Error, Oracle, Pick, Result, SolveResult, EPS_MAX};
use crate::preprocess::{GroupedInstance, ItemGroup};
use crate::sumset::oracles::{normalize_picks, MappedLeaf};
use crate::sumset::{merge_leaves, LeafSpec, SumsetResult};

/// Fixed-point units per scaled unit.
pub const FIXED_POINT: f64 = 4.0;

/// Which branch produced a group's subset sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Regime {
    /// `lambda >= 1/2`: few items, smooth tree only.
    LargeValue,
    /// Few distinct quotients.
    Sparse,
    /// Many distinct quotients: dense structure plus both sides.
    Dense,
    /// Unbounded group with `floor(omega / min) <=` the copies threshold.
    FewCopies,
    /// Unbounded group needing the doubling leaves.
    ManyCopies,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::LargeValue => "large-value",
            Regime::Sparse => "sparse",
            Regime::Dense => "dense",
            Regime::FewCopies => "few-copies",
            Regime::ManyCopies => "many-copies",
        }
    }
}

/// How groups pick a regime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum RegimePolicy {
    #[default]
    Auto,
    /// Dense for every group with `lambda < 1/2` and at least two items.
    PreferDense,
}

impl RegimePolicy {
    pub(crate) fn pick(self, g: &ItemGroup, eps: Eps) -> Regime {
        if self == RegimePolicy::PreferDense && g.lambda < 0.5 && g.items.len() >= 2 {
            return Regime::Dense;
        }
        if g.lambda >= 0.5 {
            Regime::LargeValue
        } else if g.items.len() <= sparse_limit(eps) {
            Regime::Sparse
        } else {
            Regime::Dense
        }
    }
}

/// Approximate subset sums of one group, in fixed-point units.
#[derive(Clone, Debug)]
pub struct GroupApproxOutput {
    pub result: Arc<SumsetResult>,
    pub regime: Regime,
}

impl GroupApproxOutput {
    pub fn apx(&self) -> ApproxSet {
        self.result.approx_set()
    }

    pub fn oracle(&self) -> Arc<dyn Oracle> {
        self.result.clone()
    }
}

/// `ceil(eps^(-1/2) log2(1/eps))`: groups with at most this many items are sparse.
pub fn sparse_limit(eps: Eps) -> usize {
    (eps.inv().sqrt() * eps.log_inv()).ceil() as usize
}

/// Wraps `values` (ascending) as a leaf scaled by `factor`, rounding to integers.
/// Values that round together keep the smallest preimage.
pub(crate) fn to_fixed(
    values: &[u64],
    err: f64,
    oracle: Arc<dyn Oracle>,
    factor: f64,
    cap: Option<u64>,
) -> Result<SumsetResult> {
    let mut pairs: Vec<(u64, u64)> = Vec::with_capacity(values.len());
    for &v in values {
        let o = (factor * v as f64).round();
        if !o.is_finite() || o >= u64::MAX as f64 {
            return Err(Error::Overflow("fixed-point scaling"));
        }
        let o = o as u64;
        if pairs.last().map_or(true, |p| p.0 != o) {
            pairs.push((o, v));
        }
    }
    let outer = pairs.iter().map(|p| p.0).collect();
    let err = (factor * err).ceil() as u64 + 1;
    let leaf = MappedLeaf::new(pairs, oracle)?;
    Ok(SumsetResult::from_leaf(
        LeafSpec {
            values: outer,
            err,
            oracle: Arc::new(leaf),
        },
        cap,
    ))
}

/// `eps / 2^ceil(log2 n)`: keeps the merge error of `n` leaves near `eps` times the total.
pub(crate) fn merge_eps(eps: Eps, leaves: usize) -> Result<Eps> {
    let levels = leaves.max(2).next_power_of_two().trailing_zeros();
    let den = eps
        .den
        .checked_mul(1u64 << levels)
        .ok_or(Error::Overflow("merge width"))?;
    Eps::from_ratio(eps.num, den)
}

/// Merges group outputs; uncapped when `cap` is `None`.
pub(crate) fn merge_groups(
    outputs: &[GroupApproxOutput],
    eps: Eps,
    cap: Option<u64>,
) -> Result<SumsetResult> {
    let leaves: Vec<LeafSpec> = outputs
        .iter()
        .map(|o| LeafSpec::nested(o.result.clone()))
        .collect();
    let fine = merge_eps(eps, leaves.len())?;
    merge_leaves(leaves, Some(fine), cap)
}

/// Backtracks `value` to (label, copies), checking every label against `limit`.
pub(crate) fn label_counts(
    root: &SumsetResult,
    value: u64,
    limit: impl Fn(u64) -> u64,
) -> Result<Vec<(u64, u64)>> {
    let picks: Vec<Pick> = normalize_picks(root.backtrack(value)?);
    let mut by_label: BTreeMap<u64, u64> = BTreeMap::new();
    for p in picks {
        *by_label.entry(p.label).or_insert(0) += p.count;
    }
    for (&l, &k) in &by_label {
        if k > limit(l) {
            return Err(Error::Internal(format!("label {l} picked {k} times")));
        }
    }
    Ok(by_label.into_iter().collect())
}

/// Stored values tried by [`best_witness`].
const CANDIDATES: usize = 32;

/// Evaluates up to [`CANDIDATES`] stored values in `[limit - 3E, limit]`, largest first, and
/// keeps the witness with the smallest certified `delta`. The upper bound on the optimum
/// comes from the largest candidate, so every candidate's certificate is valid.
pub(crate) fn best_witness(
    root: &SumsetResult,
    limit: u64,
    eval: impl Fn(u64) -> Result<SolveResult>,
) -> Result<(u64, SolveResult)> {
    let hi = root.values.partition_point(|&v| v <= limit);
    let lo = root
        .values
        .partition_point(|&v| v < limit.saturating_sub(3 * root.err));
    let window = &root.values[lo.min(hi.saturating_sub(1))..hi];
    let step = window.len().div_ceil(CANDIDATES).max(1);
    let mut best: Option<(u64, SolveResult)> = None;
    for &v in window.iter().rev().step_by(step) {
        let r = eval(v)?;
        if best
            .as_ref()
            .map_or(true, |b| r.certificate.delta < b.1.certificate.delta)
        {
            best = Some((v, r));
        }
    }
    match best {
        Some(b) => Ok(b),
        None => Ok((0, eval(0)?)),
    }
}

/// Label -> group multiplicity.
pub(crate) fn multiplicities(inst: &GroupedInstance) -> Vec<u64> {
    let mut m = vec![0; inst.labels.len()];
    for g in &inst.groups {
        for it in &g.items {
            m[it.label as usize] = g.multiplicity;
        }
    }
    m
}

/// Runs at `min(eps, 1/16)` unless the caller can afford an exact answer.
pub(crate) fn effective_eps(eps: Eps) -> Result<Eps> {
    if eps.value() <= EPS_MAX {
        Ok(eps)
    } else {
        Eps::from_ratio(1, 16)
    }
}

pub(crate) fn check_d(d: u32) -> Result<()> {
    if d < 2 || d % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "d = {d} must be even and at least 2"
        )));
    }
    Ok(())
}

/// Wall-clock stopwatch for the `timings` field.
pub(crate) struct Clock {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Clock {
    pub(crate) fn new() -> Self {
        Self {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    pub(crate) fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.laps
            .push((name.to_string(), (now - self.start).as_secs_f64() * 1e3));
        self.start = now;
    }

    pub(crate) fn finish(self) -> Vec<(String, f64)> {
        self.laps
    }
}

/// Regime counts as `name=count` pairs.
pub(crate) fn regime_summary(outputs: &[GroupApproxOutput]) -> String {
    let mut counts: BTreeMap<Regime, usize> = BTreeMap::new();
    for o in outputs {
        *counts.entry(o.regime).or_insert(0) += 1;
    }
    counts
        .iter()
        .map(|(r, c)| format!("{}={c}", r.name()))
        .collect::<Vec<_>>()
        .join(",")
}

/// Items of a group as (label, quotient, 1) picks.
pub(crate) fn group_picks(g: &ItemGroup) -> Vec<Pick> {
    g.items
        .iter()
        .map(|it| Pick {
            label: it.label,
            value: it.product.value,
            count: 1,
        })
        .collect()
}

/// Relabel table from quotient value to group label.
pub(crate) fn value_labels(g: &ItemGroup) -> Vec<u64> {
    let max = g.items.iter().map(|i| i.product.value).max().unwrap_or(0);
    let mut table = vec![u64::MAX; max as usize + 1];
    for it in &g.items {
        table[it.product.value as usize] = it.label;
    }
    table
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// All subset sums of `values` (small inputs only).
    pub fn brute_sums(values: &[u64]) -> Vec<u64> {
        let mut s = vec![0u64];
        for &v in values {
            let mut next: Vec<u64> = s.iter().map(|x| x + v).collect();
            next.extend_from_slice(&s);
            next.sort_unstable();
            next.dedup();
            s = next;
        }
        s
    }

    /// Checks soundness and completeness of a fixed-point group output against the truth.
    pub fn check_group(out: &GroupApproxOutput, g: &ItemGroup, cap: Option<f64>, copies: u64) {
        let f = FIXED_POINT * g.beta;
        let r = &out.result;
        let e = r.err as f64;
        let mut qs = Vec::new();
        for h in g.quotients() {
            qs.extend(std::iter::repeat(h).take(copies as usize));
        }
        for s in brute_sums(&qs) {
            let target = f * s as f64;
            if cap.map_or(false, |c| target > c) {
                continue;
            }
            let near = r
                .values
                .iter()
                .any(|&v| (v as f64 - target).abs() <= e + 1e-6);
            assert!(
                near,
                "true sum {s} (fixed {target}) has no stored value within {e}"
            );
        }
        for &v in &r.values {
            let picks = normalize_picks(r.backtrack(v).unwrap());
            let mut per: BTreeMap<u64, u64> = BTreeMap::new();
            let mut sum = 0.0;
            for p in &picks {
                *per.entry(p.label).or_insert(0) += p.count;
                sum += p.value as f64 * p.count as f64;
            }
            assert!(per.values().all(|&k| k <= g.multiplicity.max(copies)));
            for p in &picks {
                let it = g
                    .items
                    .iter()
                    .find(|i| i.label == p.label)
                    .expect("label outside group");
                assert_eq!(it.product.value, p.value);
            }
            assert!(
                (f * sum - v as f64).abs() <= e + 1e-6,
                "stored {v} backtracks to {} (err {e})",
                f * sum
            );
        }
    }
}

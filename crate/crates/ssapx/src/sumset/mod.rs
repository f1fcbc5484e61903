//! Exact, capped, approximate and capped-approximate sumsets with backtracking.
//!
//! Every result is the root of a merge DAG. A merge node buckets both children with a
//! common width `w` (one representative per bucket, the smallest value), convolves the
//! bucket indicators and stores `w * (L~ ⊕ R~)`. Width 1 is an exact merge. Each node
//! records the realized absolute error `E = E_L + E_R + 2w - 2`, which bounds both the
//! distance from a stored value to the sum of its backtracked items and the distance
//! from any true sum (below the cap) to the nearest stored value.

pub mod oracles;

use std::sync::Arc;

use crate::convolution::{bool_convolve, IndicatorArray};
use crate::core::{ApproxSet, Eps, Error, MultiSet, Oracle, Pick, Result};
use crate::par;
use oracles::{CopiesLeaf, SetLeaf};

/// Input to a merge tree.
#[derive(Clone)]
pub struct LeafSpec {
    /// Stored values; `0` is added if missing.
    pub values: Vec<u64>,
    /// Absolute error of the leaf against its own true set.
    pub err: u64,
    pub oracle: Arc<dyn Oracle>,
}

impl LeafSpec {
    pub fn exact(values: Vec<u64>, oracle: Arc<dyn Oracle>) -> Self {
        Self {
            values,
            err: 0,
            oracle,
        }
    }

    /// Wraps a finished result as a leaf of a larger tree.
    pub fn nested(result: Arc<SumsetResult>) -> Self {
        Self {
            values: result.values.clone(),
            err: result.err,
            oracle: result,
        }
    }

    fn zero() -> Self {
        Self {
            values: vec![0],
            err: 0,
            oracle: Arc::new(SetLeaf { label: u64::MAX }),
        }
    }
}

enum Kind {
    Leaf(Arc<dyn Oracle>),
    Merge {
        left: usize,
        right: usize,
        width: u64,
    },
}

struct Node {
    values: Vec<u64>,
    err: u64,
    leaf_err: u64,
    kind: Kind,
}

/// How a merge picks its bucket width.
#[derive(Clone, Copy, Debug)]
pub enum Width {
    Exact,
    /// `max(1, floor(eps * sigma / 2))` with `sigma` the sum of child maxima.
    Approx(Eps),
}

impl Width {
    fn of(self, sigma: u64) -> u64 {
        match self {
            Width::Exact => 1,
            Width::Approx(e) => {
                let w = sigma as u128 * e.num as u128 / (2 * e.den as u128);
                (w as u64).max(1)
            }
        }
    }
}

/// Arena of merge nodes.
#[derive(Default)]
pub struct DagBuilder {
    nodes: Vec<Node>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a leaf; with a cap its values are clipped to `cap + err`.
    pub fn leaf(&mut self, spec: LeafSpec, cap: Option<u64>) -> usize {
        let mut values = spec.values;
        values.push(0);
        values.sort_unstable();
        values.dedup();
        if let Some(c) = cap {
            let lim = c.saturating_add(spec.err);
            values.retain(|&v| v <= lim);
        }
        self.nodes.push(Node {
            values,
            err: spec.err,
            leaf_err: spec.err,
            kind: Kind::Leaf(spec.oracle),
        });
        self.nodes.len() - 1
    }

    pub fn values(&self, node: usize) -> &[u64] {
        &self.nodes[node].values
    }

    pub fn err(&self, node: usize) -> u64 {
        self.nodes[node].err
    }

    /// Merges each pair; independent merges may run concurrently.
    pub fn merge_layer(
        &mut self,
        pairs: &[(usize, usize)],
        width: Width,
        cap: Option<u64>,
    ) -> Result<Vec<usize>> {
        let jobs: Vec<_> = pairs
            .iter()
            .map(|&(l, r)| {
                let (nl, nr) = (&self.nodes[l], &self.nodes[r]);
                let sigma = nl.values.last().unwrap() + nr.values.last().unwrap();
                let w = width.of(sigma);
                let err = nl.err + nr.err + if w > 1 { 2 * w - 2 } else { 0 };
                let out_cap = cap.map(|c| c.saturating_add(err));
                (l, r, w, err, nl.leaf_err + nr.leaf_err, out_cap)
            })
            .collect();
        let nodes = &self.nodes;
        let computed = par::try_map(jobs, |(l, r, w, err, leaf_err, out_cap)| {
            merge_values(&nodes[l].values, &nodes[r].values, w, out_cap).map(|values| Node {
                values,
                err,
                leaf_err,
                kind: Kind::Merge {
                    left: l,
                    right: r,
                    width: w,
                },
            })
        })?;
        let start = self.nodes.len();
        self.nodes.extend(computed);
        Ok((start..self.nodes.len()).collect())
    }

    /// Balanced tree over the leaves, padded with `{0}` leaves to a power of two (at least two).
    pub fn balanced(
        &mut self,
        leaves: Vec<LeafSpec>,
        width: Width,
        cap: Option<u64>,
    ) -> Result<(usize, u32)> {
        let n = leaves.len().max(2).next_power_of_two();
        let mut layer: Vec<usize> = leaves.into_iter().map(|s| self.leaf(s, cap)).collect();
        while layer.len() < n {
            layer.push(self.leaf(LeafSpec::zero(), cap));
        }
        let mut depth = 0;
        while layer.len() > 1 {
            let pairs: Vec<_> = layer.chunks(2).map(|c| (c[0], c[1])).collect();
            layer = self.merge_layer(&pairs, width, cap)?;
            depth += 1;
        }
        Ok((layer[0], depth))
    }

    pub fn finish(self, root: usize, cap: Option<u64>, lemma_err: f64) -> SumsetResult {
        let node = &self.nodes[root];
        SumsetResult {
            values: node.values.clone(),
            err: node.err,
            leaf_err: node.leaf_err,
            cap,
            lemma_err,
            dag: Arc::new(Dag { nodes: self.nodes }),
            root,
        }
    }
}

fn merge_values(l: &[u64], r: &[u64], w: u64, out_cap: Option<u64>) -> Result<Vec<u64>> {
    let cap_idx = out_cap.map_or(u64::MAX, |c| c / w);
    let buckets = |v: &[u64]| {
        let mut b: Vec<u64> = v
            .iter()
            .map(|x| x / w)
            .take_while(|&i| i <= cap_idx)
            .collect();
        b.dedup();
        b
    };
    let (bl, br) = (buckets(l), buckets(r));
    if bl.is_empty() || br.is_empty() {
        return Ok(vec![0]);
    }
    let mut prod = bool_convolve(
        &IndicatorArray::from_values(&bl),
        &IndicatorArray::from_values(&br),
    )?;
    if cap_idx < u64::MAX {
        prod.truncate(cap_idx as usize);
    }
    Ok(prod.ones().into_iter().map(|i| i * w).collect())
}

struct Dag {
    nodes: Vec<Node>,
}

impl Dag {
    fn split(&self, node: usize, value: u64) -> Result<(usize, u64, usize, u64)> {
        let Kind::Merge {
            left,
            right,
            width: w,
        } = self.nodes[node].kind
        else {
            unreachable!("split called on a leaf")
        };
        if value % w != 0 {
            return Err(Error::NotStored(value));
        }
        let k = value / w;
        let lv = &self.nodes[left].values;
        let rv = &self.nodes[right].values;
        let mut last = u64::MAX;
        for &a in lv {
            let i = a / w;
            if i > k {
                break;
            }
            if i == last {
                continue;
            }
            last = i;
            let lo = (k - i) * w;
            let idx = rv.partition_point(|&x| x < lo);
            if idx < rv.len() && rv[idx] < lo + w {
                return Ok((left, a, right, rv[idx]));
            }
        }
        Err(Error::NotStored(value))
    }

    fn backtrack(&self, node: usize, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        match &self.nodes[node].kind {
            Kind::Leaf(o) => {
                if self.nodes[node].values.binary_search(&value).is_err() {
                    return Err(Error::NotStored(value));
                }
                o.backtrack(value, out)
            }
            Kind::Merge { .. } => {
                let (l, a, r, b) = self.split(node, value)?;
                self.backtrack(l, a, out)?;
                self.backtrack(r, b, out)
            }
        }
    }

    fn leaf_choices(&self, node: usize, value: u64, out: &mut Vec<(usize, u64)>) -> Result<()> {
        match &self.nodes[node].kind {
            Kind::Leaf(_) => {
                out.push((node, value));
                Ok(())
            }
            Kind::Merge { .. } => {
                let (l, a, r, b) = self.split(node, value)?;
                self.leaf_choices(l, a, out)?;
                self.leaf_choices(r, b, out)
            }
        }
    }
}

/// Value set, realized error budget and backtracking oracle.
#[derive(Clone)]
pub struct SumsetResult {
    pub values: Vec<u64>,
    /// Realized absolute error: soundness of witnesses and completeness below the cap.
    pub err: u64,
    /// Portion of `err` inherited from leaf errors.
    pub leaf_err: u64,
    /// Completeness cap ω, if any.
    pub cap: Option<u64>,
    /// Closed-form bound from the merge recurrences, for exact leaves.
    pub lemma_err: f64,
    dag: Arc<Dag>,
    root: usize,
}

impl std::fmt::Debug for SumsetResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SumsetResult")
            .field("len", &self.values.len())
            .field("err", &self.err)
            .field("leaf_err", &self.leaf_err)
            .field("cap", &self.cap)
            .finish()
    }
}

impl SumsetResult {
    pub fn is_exact(&self) -> bool {
        self.err == 0
    }

    pub fn max(&self) -> u64 {
        *self.values.last().unwrap()
    }

    /// Metadata as an (r,u)-approximate set: `r*u` is the merge error, ERR the leaf error.
    pub fn approx_set(&self) -> ApproxSet {
        let u = match self.cap {
            Some(c) => c,
            None => self.max() + self.err,
        };
        let r = if u == 0 {
            0.0
        } else {
            self.err as f64 / u as f64
        };
        ApproxSet {
            values: self.values.clone(),
            r,
            u,
            err_add: self.leaf_err,
        }
    }

    pub fn backtrack(&self, value: u64) -> Result<Vec<Pick>> {
        let mut out = Vec::new();
        self.dag.backtrack(self.root, value, &mut out)?;
        Ok(out)
    }

    /// Per-set chosen values for a family built from `SetLeaf`s (label = set index).
    pub fn choices(&self, value: u64, n_sets: usize) -> Result<Vec<u64>> {
        let mut out = vec![0; n_sets];
        for p in self.backtrack(value)? {
            if (p.label as usize) < n_sets {
                out[p.label as usize] = p.value;
            }
        }
        Ok(out)
    }

    /// Raw leaf-level decomposition: (leaf node id, leaf value).
    pub fn leaf_values(&self, value: u64) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::new();
        self.dag.leaf_choices(self.root, value, &mut out)?;
        Ok(out)
    }

    /// A result consisting of one leaf, without merges.
    pub fn from_leaf(spec: LeafSpec, cap: Option<u64>) -> Self {
        let err = spec.err;
        let mut b = DagBuilder::new();
        let root = b.leaf(spec, cap);
        b.finish(root, cap, err as f64)
    }

    /// Largest stored value `<= limit`.
    pub fn largest_at_most(&self, limit: u64) -> Option<u64> {
        let i = self.values.partition_point(|&v| v <= limit);
        (i > 0).then(|| self.values[i - 1])
    }
}

impl Oracle for SumsetResult {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        self.dag.backtrack(self.root, value, out)
    }
}

/// `f^h` for the uncapped tree: `f^1 = eps`, `f^h = eps + (1+eps) f^{h-1}`.
pub fn f_uncapped(eps: f64, h: u32) -> f64 {
    (0..h).fold(0.0, |f, _| eps + (1.0 + eps) * f)
}

/// `f^h` for the capped tree: `f^0 = 0`, `f^h = eps + 2(1+eps) f^{h-1}`.
pub fn f_capped(eps: f64, h: u32) -> f64 {
    (0..h).fold(0.0, |f, _| eps + 2.0 * (1.0 + eps) * f)
}

fn set_leaves(sets: &[Vec<u64>]) -> Vec<LeafSpec> {
    sets.iter()
        .enumerate()
        .map(|(i, s)| LeafSpec::exact(s.clone(), Arc::new(SetLeaf { label: i as u64 })))
        .collect()
}

fn build(leaves: Vec<LeafSpec>, width: Width, cap: Option<u64>) -> Result<SumsetResult> {
    let sigma: u64 = leaves
        .iter()
        .map(|l| l.values.iter().copied().max().unwrap_or(0))
        .sum();
    let mut b = DagBuilder::new();
    let (root, depth) = b.balanced(leaves, width, cap)?;
    let lemma = match (width, cap) {
        (Width::Exact, _) => 0.0,
        (Width::Approx(e), None) => f_uncapped(e.value(), depth) * sigma as f64,
        (Width::Approx(e), Some(c)) => 2.0 * f_capped(e.value(), depth) * c as f64,
    };
    Ok(b.finish(root, cap, lemma))
}

/// `B1 ⊕ B2` with an exact pair oracle.
pub fn sumset_pair_exact(b1: &[u64], b2: &[u64]) -> Result<SumsetResult> {
    sumset_many_exact(&[b1.to_vec(), b2.to_vec()])
}

/// `⊕ X_i` through the balanced merge tree.
pub fn sumset_many_exact(sets: &[Vec<u64>]) -> Result<SumsetResult> {
    build(set_leaves(sets), Width::Exact, None)
}

/// `(⊕ X_i) ∩ [0, ω]`, clipping after every merge.
pub fn capped_sumset_many(sets: &[Vec<u64>], omega: u64) -> Result<SumsetResult> {
    build(set_leaves(sets), Width::Exact, Some(omega))
}

/// Leaves `{0, x, ..., m x}` labelled by the value `x`.
pub fn multiplicity_leaves(x: &MultiSet) -> Result<Vec<LeafSpec>> {
    x.iter()
        .filter(|&(v, _)| v > 0)
        .map(|(v, m)| {
            let top = v
                .checked_mul(m)
                .ok_or(Error::Overflow("multiplicity leaf"))?;
            let values = (0..=m).map(|k| k * v).collect();
            debug_assert!(top == v * m);
            Ok(LeafSpec::exact(values, Arc::new(CopiesLeaf::new(v, v))))
        })
        .collect()
}

/// `S(X)`; witnesses are picks labelled by value.
pub fn subset_sums_exact(x: &MultiSet) -> Result<SumsetResult> {
    build(multiplicity_leaves(x)?, Width::Exact, None)
}

/// `S(X) ∩ [0, ω]`.
pub fn capped_subset_sums_exact(x: &MultiSet, omega: u64) -> Result<SumsetResult> {
    build(multiplicity_leaves(x)?, Width::Exact, Some(omega))
}

pub fn sumset_pair_approx(b1: &[u64], b2: &[u64], eps: Eps) -> Result<SumsetResult> {
    sumset_many_approx(&[b1.to_vec(), b2.to_vec()], eps)
}

pub fn sumset_many_approx(sets: &[Vec<u64>], eps: Eps) -> Result<SumsetResult> {
    build(set_leaves(sets), Width::Approx(eps), None)
}

pub fn capped_sumset_pair_approx(
    b1: &[u64],
    b2: &[u64],
    eps: Eps,
    omega: u64,
) -> Result<SumsetResult> {
    capped_sumset_many_approx(&[b1.to_vec(), b2.to_vec()], eps, omega)
}

pub fn capped_sumset_many_approx(sets: &[Vec<u64>], eps: Eps, omega: u64) -> Result<SumsetResult> {
    build(set_leaves(sets), Width::Approx(eps), Some(omega))
}

/// Approximates `S(∪ X_i)` from per-part results, chaining their oracles.
pub fn merge_apx_subset_sums(parts: Vec<Arc<SumsetResult>>, eps: Eps) -> Result<SumsetResult> {
    build(
        parts.into_iter().map(LeafSpec::nested).collect(),
        Width::Approx(eps),
        None,
    )
}

/// Capped version of `merge_apx_subset_sums`.
pub fn merge_capped_apx_subset_sums(
    parts: Vec<Arc<SumsetResult>>,
    eps: Eps,
    omega: u64,
) -> Result<SumsetResult> {
    build(
        parts.into_iter().map(LeafSpec::nested).collect(),
        Width::Approx(eps),
        Some(omega),
    )
}

/// Merges arbitrary leaves.
pub fn merge_leaves(
    leaves: Vec<LeafSpec>,
    eps: Option<Eps>,
    cap: Option<u64>,
) -> Result<SumsetResult> {
    let width = eps.map_or(Width::Exact, Width::Approx);
    build(leaves, width, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{picks_sum, verify_apx_set};
    use proptest::prelude::*;

    fn brute(sets: &[Vec<u64>]) -> Vec<u64> {
        let mut acc = vec![0u64];
        for s in sets {
            let mut next = acc.clone();
            for &a in &acc {
                for &x in s {
                    next.push(a + x);
                }
            }
            next.sort_unstable();
            next.dedup();
            acc = next;
        }
        acc
    }

    fn eps(x: f64) -> Eps {
        Eps::new(x).unwrap()
    }

    #[test]
    fn pair_exact_examples() {
        let r = sumset_pair_exact(&[1, 2], &[2, 3]).unwrap();
        assert_eq!(r.values, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(r.choices(5, 2).unwrap(), vec![2, 3]);
        let r = sumset_pair_exact(&[4, 7], &[]).unwrap();
        assert_eq!(r.values, vec![0, 4, 7]);
    }

    #[test]
    fn many_exact_examples() {
        let r = sumset_many_exact(&[vec![1], vec![2], vec![4]]).unwrap();
        assert_eq!(r.values, (0..8).collect::<Vec<_>>());
        assert_eq!(
            sumset_many_exact(&[vec![3, 5]]).unwrap().values,
            vec![0, 3, 5]
        );
        assert_eq!(
            sumset_many_exact(&[vec![1], vec![1]]).unwrap().values,
            vec![0, 1, 2]
        );
    }

    #[test]
    fn subset_sums_examples() {
        let m = MultiSet::from_items(&[1, 2, 3]).unwrap();
        assert_eq!(
            subset_sums_exact(&m).unwrap().values,
            (0..7).collect::<Vec<_>>()
        );
        assert_eq!(subset_sums_exact(&MultiSet::new()).unwrap().values, vec![0]);
        let r = subset_sums_exact(&MultiSet::from_items(&[2, 2]).unwrap()).unwrap();
        assert_eq!(r.values, vec![0, 2, 4]);
        assert_eq!(
            r.backtrack(4).unwrap(),
            vec![Pick {
                label: 2,
                value: 2,
                count: 2
            }]
        );
    }

    #[test]
    fn capped_examples() {
        assert_eq!(
            capped_sumset_many(&[vec![3], vec![4]], 5).unwrap().values,
            vec![0, 3, 4]
        );
        assert_eq!(
            capped_sumset_many(&[vec![3], vec![4]], 0).unwrap().values,
            vec![0]
        );
        assert_eq!(
            capped_sumset_many(&[vec![1], vec![1], vec![1]], 2)
                .unwrap()
                .values,
            vec![0, 1, 2]
        );
    }

    #[test]
    fn pair_approx_examples() {
        assert_eq!(
            sumset_pair_approx(&[0], &[0], eps(0.05)).unwrap().values,
            vec![0]
        );
        let r = sumset_pair_approx(&[10], &[10], eps(0.5)).unwrap();
        assert!(r.values.iter().all(|v| [0, 10, 20].contains(v)));
        assert!(verify_apx_set(&r.approx_set(), &[0, 10, 20], 0.5, 20, 0));
        let c = capped_sumset_pair_approx(&[6], &[6], eps(0.05), 5).unwrap();
        assert_eq!(c.values, vec![0]);
    }

    #[test]
    fn many_approx_powers() {
        let r = sumset_many_approx(&[vec![1], vec![2], vec![4], vec![8]], eps(0.05)).unwrap();
        let truth: Vec<u64> = (0..16).collect();
        let a = r.approx_set();
        assert!(verify_apx_set(&a, &truth, a.r, a.u, a.err_add));
        assert_eq!(
            sumset_many_approx(&[vec![0], vec![0]], eps(0.05))
                .unwrap()
                .values,
            vec![0]
        );
        assert_eq!(
            capped_sumset_many_approx(&[vec![3], vec![9]], eps(0.05), 0)
                .unwrap()
                .values,
            vec![0]
        );
    }

    #[test]
    fn nested_additive_budget() {
        let p1 = Arc::new(sumset_many_approx(&[vec![100, 250], vec![70]], eps(0.1)).unwrap());
        let p2 = Arc::new(sumset_many_approx(&[vec![33, 41], vec![900]], eps(0.1)).unwrap());
        let sum_err = p1.err + p2.err;
        let m = merge_apx_subset_sums(vec![p1, p2], eps(0.1)).unwrap();
        assert_eq!(m.leaf_err, sum_err);
        let a = m.approx_set();
        assert!(a.err_add as f64 <= (1.0 + a.r) * sum_err as f64);
    }

    fn check_approx(r: &SumsetResult, truth: &[u64]) -> std::result::Result<(), TestCaseError> {
        let a = r.approx_set();
        prop_assert!(verify_apx_set(&a, truth, a.r, a.u, a.err_add));
        for &v in &r.values {
            let s = picks_sum(&r.backtrack(v).unwrap()) as i128;
            prop_assert!((s - v as i128).unsigned_abs() <= r.err as u128);
            prop_assert!(truth.binary_search(&(s as u64)).is_ok());
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn exact_matches_brute(sets in proptest::collection::vec(proptest::collection::vec(0u64..300, 0..5), 1..8)) {
            let truth = brute(&sets);
            let r = sumset_many_exact(&sets).unwrap();
            prop_assert_eq!(&r.values, &truth);
            for &v in &r.values {
                let ch = r.choices(v, sets.len()).unwrap();
                prop_assert_eq!(ch.iter().sum::<u64>(), v);
                for (c, s) in ch.iter().zip(&sets) {
                    prop_assert!(*c == 0 || s.contains(c));
                }
            }
        }

        #[test]
        fn capped_matches_brute(sets in proptest::collection::vec(proptest::collection::vec(0u64..300, 0..5), 1..8),
                                omega in 0u64..1000) {
            let truth: Vec<u64> = brute(&sets).into_iter().filter(|&v| v <= omega).collect();
            let r = capped_sumset_many(&sets, omega).unwrap();
            prop_assert_eq!(&r.values, &truth);
            for &v in &r.values {
                prop_assert_eq!(r.choices(v, sets.len()).unwrap().iter().sum::<u64>(), v);
            }
        }

        #[test]
        fn approx_sound_and_complete(sets in proptest::collection::vec(proptest::collection::vec(1u64..1000, 1..6), 1..8),
                                     e in prop_oneof![Just(0.1), Just(0.05), Just(0.2)]) {
            let truth = brute(&sets);
            let r = sumset_many_approx(&sets, eps(e)).unwrap();
            check_approx(&r, &truth)?;
            prop_assert!(r.err as f64 <= r.lemma_err + 1e-9);
            prop_assert!(r.values.len() as f64 <= 3.0 / e + 3.0);
        }

        #[test]
        fn capped_approx_sound_and_complete(sets in proptest::collection::vec(proptest::collection::vec(1u64..1000, 1..6), 1..8),
                                            e in prop_oneof![Just(0.1), Just(0.05)],
                                            frac in 0.0f64..1.0) {
            let full = brute(&sets);
            let omega = full[(frac * (full.len() - 1) as f64) as usize];
            let r = capped_sumset_many_approx(&sets, eps(e), omega).unwrap();
            check_approx(&r, &full)?;
            prop_assert!(r.err as f64 <= r.lemma_err + 1e-9);
        }
    }
}

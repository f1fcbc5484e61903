//! Instance reductions: trivial gates, small-item packing, the multiset reduction and the
//! bounded and unbounded pipelines that produce grouped semi-smooth instances.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::core::{Certificate, Eps, Error, MultiSet, Result, SolveResult};
use crate::smooth::{enumerate_smooth_products, round_with_products, SmoothParams, SmoothProduct};

/// Outcome of a gate: either the instance is solved or the main pipeline must run.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    Solved(SolveResult),
    /// Bounded: `OPT >= t/2`. Unbounded: every item lies in `(eps t, t)`.
    Assured,
}

/// Indices of items `<= t`.
pub fn items_at_most(x: &[u64], t: u64) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] <= t).collect()
}

/// If `Σ(X_t) < t/2`, `X_t` is optimal.
pub fn trivial_gate(x: &[u64], t: u64) -> Result<Gate> {
    let idx = items_at_most(x, t);
    let sum: u128 = idx.iter().map(|&i| x[i] as u128).sum();
    if 2 * sum < t as u128 {
        let items = idx.into_iter().map(|i| (i, 1)).collect();
        return Ok(Gate::Solved(SolveResult::from_items(
            x,
            items,
            Certificate::exact(),
        )?));
    }
    Ok(Gate::Assured)
}

/// Upper slack allowed by the unbounded gate, `x in [t, (1+eps)t]`.
pub fn unbounded_gate(x: &[u64], t: u64, eps: Eps) -> Result<Gate> {
    let (num, den) = (eps.num as u128, eps.den as u128);
    let t128 = t as u128;
    if let Some(i) =
        (0..x.len()).find(|&i| x[i] as u128 >= t128 && x[i] as u128 * den <= t128 * (den + num))
    {
        let r = SolveResult::from_items(
            x,
            vec![(i, 1)],
            Certificate::new(0.0, x[i] as f64 / t as f64 - 1.0),
        )?;
        return Ok(Gate::Solved(r));
    }
    if let Some(i) = (0..x.len())
        .filter(|&i| x[i] > 0 && x[i] as u128 * den <= num * t128)
        .min_by_key(|&i| x[i])
    {
        let copies = t / x[i] + 1;
        let r = SolveResult::from_items(x, vec![(i, copies)], Certificate::new(0.0, 0.0))?;
        let over = r.value as f64 / t as f64 - 1.0;
        return Ok(Gate::Solved(SolveResult {
            certificate: Certificate::new(0.0, over),
            ..r
        }));
    }
    Ok(Gate::Assured)
}

/// Large items and bundles of small ones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Packing {
    pub z: Vec<u64>,
    /// Original indices forming each `z` entry.
    pub parts: Vec<Vec<usize>>,
    pub bundles: usize,
}

/// Packs items `< eps t / 4` greedily into bundles of sum `>= eps t / 4`; an undersized
/// final bundle is kept.
pub fn pack_small_items(x: &[u64], t: u64, eps: Eps) -> Packing {
    let small = |v: u64| v > 0 && 4 * v as u128 * (eps.den as u128) < eps.num as u128 * t as u128;
    let mut z = Vec::new();
    let mut parts = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if !small(v) {
            z.push(v);
            parts.push(vec![i]);
        }
    }
    let mut bundles = 0;
    let (mut acc, mut cur) = (0u64, Vec::new());
    for (i, &v) in x.iter().enumerate() {
        if v == 0 || !small(v) {
            continue;
        }
        acc += v;
        cur.push(i);
        if !small(acc) {
            z.push(acc);
            parts.push(std::mem::take(&mut cur));
            acc = 0;
            bundles += 1;
        }
    }
    if !cur.is_empty() {
        z.push(acc);
        parts.push(cur);
        bundles += 1;
    }
    Packing { z, parts, bundles }
}

/// One element of the reduced multiset and the input positions it stands for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reduced {
    pub value: u64,
    pub members: Vec<usize>,
}

impl Reduced {
    /// `p` with `value = 2^p * max member`.
    pub fn level(&self, values: &[u64]) -> u32 {
        let top = self.members.iter().map(|&m| values[m]).max().unwrap_or(1);
        (self.value / top).trailing_zeros()
    }
}

/// Carries pairs of equal values upward until no value occurs more than twice.
pub fn reduce_items(values: &[u64]) -> Result<Vec<Reduced>> {
    if values.iter().any(|&v| v == 0) {
        return Err(Error::InvalidInput(
            "reduction needs positive values".into(),
        ));
    }
    let mut heap: BTreeMap<u64, Vec<Vec<usize>>> = BTreeMap::new();
    for (i, &v) in values.iter().enumerate() {
        heap.entry(v).or_default().push(vec![i]);
    }
    let mut out = Vec::new();
    while let Some((v, tokens)) = heap.pop_first() {
        let keep = if tokens.len() <= 2 {
            tokens.len()
        } else {
            2 - tokens.len() % 2
        };
        let mut it = tokens.into_iter();
        for members in it.by_ref().take(keep) {
            out.push(Reduced { value: v, members });
        }
        let rest: Vec<Vec<usize>> = it.collect();
        if !rest.is_empty() {
            let up = v
                .checked_mul(2)
                .ok_or(Error::Overflow("multiset reduction"))?;
            let slot = heap.entry(up).or_default();
            for pair in rest.chunks(2) {
                slot.push([pair[0].as_slice(), pair[1].as_slice()].concat());
            }
        }
    }
    Ok(out)
}

/// `B` together with the sub-multiset `A_ι` behind each element.
#[derive(Clone, Debug, PartialEq)]
pub struct MultisetReduction {
    pub b: MultiSet,
    pub parts: Vec<(u64, MultiSet)>,
}

impl MultisetReduction {
    /// Expands a choice of `B` elements (indices into `parts`) into a sub-multiset of `A`.
    pub fn expand(&self, chosen: &[usize]) -> Result<MultiSet> {
        let mut out = MultiSet::new();
        for &c in chosen {
            for (v, k) in self.parts[c].1.iter() {
                out.insert(v, k)?;
            }
        }
        Ok(out)
    }
}

pub fn reduce_multiset(a: &MultiSet) -> Result<MultisetReduction> {
    let values = a.to_vec();
    let red = reduce_items(&values)?;
    let mut b = MultiSet::new();
    let mut parts = Vec::with_capacity(red.len());
    for r in red {
        b.insert(r.value, 1)?;
        let members: Vec<u64> = r.members.iter().map(|&m| values[m]).collect();
        parts.push((r.value, MultiSet::from_items(&members)?));
    }
    Ok(MultisetReduction { b, parts })
}

/// A group item: `beta * product.value` in the scaled domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupItem {
    pub product: SmoothProduct,
    pub label: u64,
}

/// Items sharing the common divisor `beta = 2^p (1+eps)^c`, with distinct quotients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ItemGroup {
    pub j: i64,
    pub rho_exponent: i64,
    /// Occurrence class of the reduced multiset (1 or 2); 0 for unbounded groups.
    pub split: u8,
    pub p: u32,
    pub beta: f64,
    /// `2^(p+j-1) / eps^2 = eps^-(2+lambda)`.
    pub lambda: f64,
    /// Copies of every item (1 for bounded groups).
    pub multiplicity: u64,
    /// Sorted by quotient, distinct.
    pub items: Vec<GroupItem>,
}

impl ItemGroup {
    pub fn quotients(&self) -> Vec<u64> {
        self.items.iter().map(|i| i.product.value).collect()
    }

    pub fn quotient_sum(&self) -> u64 {
        self.items.iter().map(|i| i.product.value).sum()
    }

    /// Values in the scaled domain.
    pub fn real_values(&self) -> Vec<f64> {
        self.items
            .iter()
            .map(|i| self.beta * i.product.value as f64)
            .collect()
    }
}

/// Summary for traces.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PreprocessStats {
    pub n_input: usize,
    pub n_used: usize,
    pub bundles: usize,
    pub windows: usize,
    pub delta_sizes: Vec<usize>,
    pub groups: usize,
    pub group_items: usize,
}

/// The modified instance `(F, t̂)` or `(Y, t̂)` with its mapping back to the input.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupedInstance {
    pub eps: Eps,
    pub d: u32,
    pub t: u64,
    pub t_hat: f64,
    /// Original value of one scaled unit.
    pub scale: f64,
    pub groups: Vec<ItemGroup>,
    /// Label -> original (index, count) per copy of the item.
    pub labels: Vec<Vec<(usize, u64)>>,
    /// Label -> value in the scaled domain.
    pub label_values: Vec<f64>,
    pub sum_scaled: f64,
    /// `4(1+eps) Σ(X) / (eps^3 t)` for bounded instances.
    pub sum_bound: f64,
    pub stats: PreprocessStats,
}

impl GroupedInstance {
    /// Maps (label, copies) picks to original (index, count) pairs.
    pub fn back_map(&self, picks: &[(u64, u64)]) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::with_capacity(picks.len());
        for &(l, k) in picks {
            let row = self
                .labels
                .get(l as usize)
                .ok_or_else(|| Error::Internal(format!("unknown label {l}")))?;
            out.extend(row.iter().map(|&(i, c)| (i, c * k)));
        }
        Ok(out)
    }

    /// Scaled value of a selection.
    pub fn scaled_sum(&self, picks: &[(u64, u64)]) -> f64 {
        picks
            .iter()
            .map(|&(l, k)| self.label_values[l as usize] * k as f64)
            .sum()
    }
}

/// `floor(log2(a/b))` for positive integers.
fn floor_log2_ratio(a: u128, b: u128) -> i64 {
    if a >= b {
        let mut k = 0;
        while k < 127 && (b << (k + 1)) <= a {
            k += 1;
        }
        k
    } else {
        let mut k = 1;
        while (a << k) < b {
            k += 1;
        }
        -k
    }
}

fn eps_cubed(eps: Eps) -> f64 {
    eps.value().powi(3)
}

fn window_lambda(eps: Eps, shift: i64) -> f64 {
    shift as f64 / eps.log_inv()
}

/// Steps 1-4 of the bounded pipeline. Items larger than `t` are ignored.
pub fn preprocess_bounded(x: &[u64], t: u64, eps: Eps, d: u32) -> Result<GroupedInstance> {
    if t == 0 {
        return Err(Error::InvalidInput("target must be positive".into()));
    }
    let kept = items_at_most(x, t);
    let sub: Vec<u64> = kept.iter().map(|&i| x[i]).collect();
    let mut packing = pack_small_items(&sub, t, eps);
    for p in &mut packing.parts {
        for i in p.iter_mut() {
            *i = kept[*i];
        }
    }
    let (num, den) = (eps.num as u128, eps.den as u128);
    let e3 = eps_cubed(eps);
    let scale = e3 * t as f64 / 4.0;
    let t_hat = 4.0 * (1.0 + eps.value()) / e3;

    // Step 1: windows by the exact scaled value 4z/(eps^3 t) against 2^(j-1)/eps^2.
    let mut windows: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (zi, &z) in packing.z.iter().enumerate() {
        if z == 0 {
            continue;
        }
        let j = floor_log2_ratio(4 * z as u128 * den, num * t as u128) + 1;
        windows.entry(j).or_default().push(zi);
    }

    // Step 2: semi-smooth rounding with exponent 1, so gamma = eps in every window.
    let base = SmoothParams::new(eps, d, 0.0, 1.0)?;
    let products = enumerate_smooth_products(&base)?;
    let mut stats = PreprocessStats {
        n_input: x.len(),
        n_used: kept.len(),
        bundles: packing.bundles,
        windows: windows.len(),
        ..Default::default()
    };
    let mut labels: Vec<Vec<(usize, u64)>> = Vec::new();
    let mut label_values = Vec::new();
    let mut groups = Vec::new();
    for (&j, zs) in &windows {
        let lambda = window_lambda(eps, j - 1);
        let params = SmoothParams::new(eps, d, lambda, 1.0 + lambda)?;
        let vals: Vec<f64> = zs.iter().map(|&zi| packing.z[zi] as f64 / scale).collect();
        let rounding = round_with_products(&vals, &params, &products)?;
        stats.delta_sizes.push(rounding.delta.len());
        let mut by_c: BTreeMap<i64, Vec<(usize, SmoothProduct)>> = BTreeMap::new();
        for (&zi, item) in zs.iter().zip(&rounding.items) {
            by_c.entry(item.rho_exponent)
                .or_default()
                .push((zi, item.product.clone()));
        }
        // Steps 3-4: reduce each (j, c) group and split into distinct-quotient subgroups.
        for (c, members) in by_c {
            let rho = (1.0 + eps.value()).powi(c as i32);
            let hs: Vec<u64> = members.iter().map(|m| m.1.value).collect();
            let reduced = reduce_items(&hs)?;
            let mut seen: BTreeMap<u64, u8> = BTreeMap::new();
            let mut sub: BTreeMap<(u8, u32), Vec<GroupItem>> = BTreeMap::new();
            for r in reduced {
                let split = seen.entry(r.value).and_modify(|s| *s += 1).or_insert(1);
                let top = r
                    .members
                    .iter()
                    .copied()
                    .max_by_key(|&m| (hs[m], m))
                    .unwrap();
                let p = (r.value / hs[top]).trailing_zeros();
                let label = labels.len() as u64;
                let mut orig: Vec<(usize, u64)> = Vec::new();
                for &m in &r.members {
                    orig.extend(packing.parts[members[m].0].iter().map(|&i| (i, 1)));
                }
                labels.push(orig);
                label_values.push(rho * r.value as f64);
                sub.entry((*split, p)).or_default().push(GroupItem {
                    product: members[top].1.clone(),
                    label,
                });
            }
            for ((split, p), mut items) in sub {
                items.sort_by_key(|i| i.product.value);
                groups.push(ItemGroup {
                    j,
                    rho_exponent: c,
                    split,
                    p,
                    beta: rho * (1u64 << p) as f64,
                    lambda: window_lambda(eps, p as i64 + j - 1),
                    multiplicity: 1,
                    items,
                });
            }
        }
    }
    stats.groups = groups.len();
    stats.group_items = groups.iter().map(|g| g.items.len()).sum();
    let sum_x: u128 = kept.iter().map(|&i| x[i] as u128).sum();
    Ok(GroupedInstance {
        eps,
        d,
        t,
        t_hat,
        scale,
        sum_scaled: label_values.iter().sum(),
        sum_bound: 4.0 * (1.0 + eps.value()) * sum_x as f64 / (e3 * t as f64),
        groups,
        labels,
        label_values,
        stats,
    })
}

/// `2^(1 + pow(log2(1/eps) + 1))`.
pub fn copies_threshold(eps: Eps) -> u64 {
    let p = (eps.log_inv() + 1.0 + 1e-12).log2().floor() as u32;
    1u64 << (1 + p)
}

/// `l` from `n = floor(t̂ / min)`: the threshold if `n` is at most it, else `2 n` times it.
pub fn copies_for(n: u64, eps: Eps) -> u64 {
    let th = copies_threshold(eps);
    if n <= th {
        th
    } else {
        2 * n * th
    }
}

/// Steps 1-3 of the unbounded pipeline; needs `eps t < x < t` for every item.
pub fn preprocess_unbounded(x: &[u64], t: u64, eps: Eps) -> Result<GroupedInstance> {
    let (num, den) = (eps.num as u128, eps.den as u128);
    let t128 = t as u128;
    if x.iter().any(|&v| v as u128 * den <= num * t128 || v >= t) {
        return Err(Error::InvalidInput(
            "unbounded pipeline needs eps*t < x < t".into(),
        ));
    }
    let e3 = eps_cubed(eps);
    let scale = e3 * t as f64;
    let t_hat = (1.0 + eps.value()) / e3;
    let mut windows: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &v) in x.iter().enumerate() {
        let j = floor_log2_ratio(v as u128 * den, num * t128) + 1;
        windows.entry(j).or_default().push(i);
    }
    let base = SmoothParams::new(eps, 1, 0.0, 1.0)?;
    let products = enumerate_smooth_products(&base)?;
    let mut stats = PreprocessStats {
        n_input: x.len(),
        n_used: x.len(),
        windows: windows.len(),
        ..Default::default()
    };
    let mut labels = Vec::new();
    let mut label_values = Vec::new();
    let mut groups = Vec::new();
    for (&j, idx) in &windows {
        let lambda = window_lambda(eps, j - 1);
        let params = SmoothParams::new(eps, 1, lambda, 1.0 + lambda)?;
        let vals: Vec<f64> = idx.iter().map(|&i| x[i] as f64 / scale).collect();
        let rounding = round_with_products(&vals, &params, &products)?;
        stats.delta_sizes.push(rounding.delta.len());
        let mut by_c: BTreeMap<i64, BTreeMap<u64, (usize, SmoothProduct)>> = BTreeMap::new();
        for (&i, item) in idx.iter().zip(&rounding.items) {
            by_c.entry(item.rho_exponent)
                .or_default()
                .entry(item.product.value)
                .or_insert((i, item.product.clone()));
        }
        for (c, set) in by_c {
            let rho = (1.0 + eps.value()).powi(c as i32);
            let min = rho * *set.keys().next().unwrap() as f64;
            let n = (t_hat / min).floor() as u64;
            let items = set
                .into_values()
                .map(|(i, product)| {
                    let label = labels.len() as u64;
                    labels.push(vec![(i, 1)]);
                    label_values.push(rho * product.value as f64);
                    GroupItem { product, label }
                })
                .collect();
            groups.push(ItemGroup {
                j,
                rho_exponent: c,
                split: 0,
                p: 0,
                beta: rho,
                lambda,
                multiplicity: copies_for(n, eps),
                items,
            });
        }
    }
    stats.groups = groups.len();
    stats.group_items = groups.iter().map(|g| g.items.len()).sum();
    let sum_scaled = groups
        .iter()
        .map(|g| g.multiplicity as f64 * g.real_values().iter().sum::<f64>())
        .sum();
    Ok(GroupedInstance {
        eps,
        d: 1,
        t,
        t_hat,
        scale,
        groups,
        labels,
        label_values,
        sum_scaled,
        sum_bound: sum_scaled,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn subset_sums(x: &[u64]) -> std::collections::BTreeSet<u64> {
        let mut s = std::collections::BTreeSet::from([0u64]);
        for &v in x {
            let add: Vec<u64> = s.iter().map(|a| a + v).collect();
            s.extend(add);
        }
        s
    }

    fn sixteenth() -> Eps {
        Eps::from_ratio(1, 16).unwrap()
    }

    #[test]
    fn gate_examples() {
        match trivial_gate(&[5, 6], 4).unwrap() {
            Gate::Solved(r) => {
                assert_eq!(r.value, 0);
                assert!(r.certificate.exact);
            }
            Gate::Assured => panic!("expected a solved gate"),
        }
        match trivial_gate(&[1, 1], 10).unwrap() {
            Gate::Solved(r) => assert_eq!((r.value, r.items.len()), (2, 2)),
            Gate::Assured => panic!("expected a solved gate"),
        }
        assert_eq!(trivial_gate(&[6, 6], 10).unwrap(), Gate::Assured);
    }

    #[test]
    fn unbounded_gate_examples() {
        let e = Eps::new(0.1).unwrap();
        match unbounded_gate(&[3, 100], 100, e).unwrap() {
            Gate::Solved(r) => assert_eq!((r.value, r.items.clone()), (100, vec![(1, 1)])),
            Gate::Assured => panic!(),
        }
        match unbounded_gate(&[1], 100, e).unwrap() {
            Gate::Solved(r) => {
                assert_eq!((r.value, r.items.clone()), (101, vec![(0, 101)]));
                assert!((r.certificate.delta_upper - 0.01).abs() < 1e-12);
            }
            Gate::Assured => panic!(),
        }
        assert_eq!(unbounded_gate(&[50], 100, e).unwrap(), Gate::Assured);
    }

    #[test]
    fn packing_examples() {
        let e = sixteenth();
        let p = pack_small_items(&[100, 200], 320, e);
        assert_eq!(p.z, vec![100, 200]);
        assert_eq!(p.bundles, 0);
        // eps t / 8 = 8 with t = 1024.
        let p = pack_small_items(&[8; 10], 1024, e);
        assert_eq!(p.z, vec![16; 5]);
        assert_eq!(p.parts[0], vec![0, 1]);
        let p = pack_small_items(&[8; 11], 1024, e);
        assert_eq!(p.z.last(), Some(&8));
        assert_eq!(p.z.iter().sum::<u64>(), 88);
    }

    #[test]
    fn reduction_examples() {
        let r = reduce_multiset(&MultiSet::from_items(&[3, 3, 3]).unwrap()).unwrap();
        assert_eq!(r.b, MultiSet::from_items(&[3, 6]).unwrap());
        let r = reduce_multiset(&MultiSet::from_items(&[1, 5, 9]).unwrap()).unwrap();
        assert_eq!(r.b, MultiSet::from_items(&[1, 5, 9]).unwrap());
        assert!(r.parts.iter().all(|(v, a)| a.len() == 1 && a.total() == *v));
        let a = MultiSet::from_counts([(2, 5)]).unwrap();
        let r = reduce_multiset(&a).unwrap();
        assert_eq!(subset_sums(&r.b.to_vec()), subset_sums(&a.to_vec()));
    }

    #[test]
    fn floor_log2_cases() {
        assert_eq!(floor_log2_ratio(8, 1), 3);
        assert_eq!(floor_log2_ratio(7, 1), 2);
        assert_eq!(floor_log2_ratio(1, 1), 0);
        assert_eq!(floor_log2_ratio(1, 2), -1);
        assert_eq!(floor_log2_ratio(1, 3), -2);
    }

    #[test]
    fn copies_formula() {
        let e = sixteenth();
        assert_eq!(copies_threshold(e), 8);
        assert_eq!(copies_for(8, e), 8);
        assert_eq!(copies_for(9, e), 144);
        assert_eq!(copies_threshold(Eps::from_ratio(1, 32).unwrap()), 8);
        assert_eq!(copies_threshold(Eps::from_ratio(1, 128).unwrap()), 16);
    }

    fn audit_bounded(x: &[u64], t: u64, eps: Eps, d: u32, rng: &mut ChaCha8Rng) {
        let g = preprocess_bounded(x, t, eps, d).unwrap();
        let (lo, hi) = SmoothParams::new(eps, d, 0.0, 1.0).unwrap().window();
        for grp in &g.groups {
            assert!(!grp.items.is_empty());
            let q = grp.quotients();
            assert!(
                q.windows(2).all(|w| w[0] < w[1]),
                "quotients must be distinct"
            );
            assert!(q.iter().all(|h| (lo..=hi).contains(h)));
            for it in &grp.items {
                let v = g.label_values[it.label as usize];
                assert!((v - grp.beta * it.product.value as f64).abs() <= 1e-9 * v);
            }
        }
        assert!(g.sum_scaled <= g.sum_bound * (1.0 + 1e-9));
        // Every used original item appears in exactly one label.
        let mut seen = vec![0u64; x.len()];
        for row in &g.labels {
            for &(i, c) in row {
                seen[i] += c;
            }
        }
        for (i, &v) in x.iter().enumerate() {
            assert_eq!(seen[i], (v <= t) as u64);
        }
        let e = eps.value();
        for _ in 0..200 {
            let picks: Vec<(u64, u64)> = (0..g.labels.len() as u64)
                .filter(|_| rng.gen_bool(0.5))
                .map(|l| (l, 1))
                .collect();
            let orig: u64 = g
                .back_map(&picks)
                .unwrap()
                .iter()
                .map(|&(i, c)| x[i] * c)
                .sum();
            let scaled = g.scale * g.scaled_sum(&picks);
            assert!((scaled - orig as f64).abs() <= e * orig as f64 * (1.0 + 1e-9) + 1e-6);
        }
    }

    #[test]
    fn bounded_audit_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, d) in &[(100usize, 12u32), (100, 6), (40, 6)] {
            let x: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=1_000_000)).collect();
            let t = x.iter().sum::<u64>() / 3;
            audit_bounded(&x, t, sixteenth(), d, &mut rng);
        }
        let x: Vec<u64> = (0..60).map(|_| rng.gen_range(1..=50)).collect();
        audit_bounded(&x, 900, Eps::from_ratio(1, 20).unwrap(), 6, &mut rng);
    }

    #[test]
    fn large_items_map_to_themselves() {
        // No packing happens, so every label stands for exactly one original item.
        let eps = sixteenth();
        let x = [40u64, 50, 60, 64];
        let g = preprocess_bounded(&x, 64, eps, 12).unwrap();
        assert_eq!(g.labels.len(), 4);
        let mut hit: Vec<usize> = g
            .labels
            .iter()
            .map(|r| {
                assert_eq!(r.len(), 1);
                r[0].0
            })
            .collect();
        hit.sort_unstable();
        assert_eq!(hit, vec![0, 1, 2, 3]);
        for (l, row) in g.labels.iter().enumerate() {
            let v = x[row[0].0] as f64;
            assert!((g.label_values[l] * g.scale - v).abs() <= eps.value() * v);
        }
    }

    #[test]
    fn unbounded_audit() {
        let eps = sixteenth();
        let t = 1_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x: Vec<u64> = (0..50).map(|_| rng.gen_range(62_501..t)).collect();
        x.sort_unstable();
        x.dedup();
        let g = preprocess_unbounded(&x, t, eps).unwrap();
        let th = copies_threshold(eps);
        for grp in &g.groups {
            let q = grp.quotients();
            assert!(q.iter().all(|&h| (8..=16).contains(&h)));
            let lo = 2f64.powi(grp.j as i32 - 1) * (1.0 - eps.value()) * 256.0;
            let hi = 2f64.powi(grp.j as i32) * (1.0 + eps.value()) * 256.0;
            for v in grp.real_values() {
                assert!(v >= lo * (1.0 - 1e-9) && v <= hi * (1.0 + 1e-9));
            }
            let n = (g.t_hat / grp.real_values()[0]).floor() as u64;
            assert_eq!(grp.multiplicity, if n <= th { th } else { 2 * n * th });
            for it in &grp.items {
                let (i, _) = g.labels[it.label as usize][0];
                let y = g.label_values[it.label as usize];
                assert!(
                    (x[i] as f64 - g.scale * y).abs() <= eps.value() * x[i] as f64 * (1.0 + 1e-9)
                );
            }
        }
        let single = preprocess_unbounded(&[500_000], t, eps).unwrap();
        assert_eq!(single.groups.len(), 1);
        assert_eq!(single.groups[0].items.len(), 1);
        assert!(preprocess_unbounded(&[10], t, eps).is_err());
    }

    proptest! {
        #[test]
        fn reduction_preserves_subset_sums(a in proptest::collection::vec(1u64..40, 0..50)) {
            prop_assume!(a.iter().sum::<u64>() <= 2048);
            let ms = MultiSet::from_items(&a).unwrap();
            let r = reduce_multiset(&ms).unwrap();
            prop_assert_eq!(subset_sums(&r.b.to_vec()), subset_sums(&a));
            prop_assert!(r.b.iter().all(|(_, c)| c <= 2));
            prop_assert!(r.b.len() <= ms.len());
            for (i, (v, part)) in r.parts.iter().enumerate() {
                prop_assert_eq!(part.total(), *v);
                prop_assert!(part.is_submultiset_of(&ms));
                prop_assert!(r.expand(&[i]).unwrap() == *part);
            }
            let all: Vec<usize> = (0..r.parts.len()).collect();
            prop_assert_eq!(r.expand(&all).unwrap(), ms);
        }

        #[test]
        fn packing_containment(x in proptest::collection::vec(1u64..40, 1..13), t in 50u64..400) {
            let eps = Eps::from_ratio(1, 2).unwrap();
            let p = pack_small_items(&x, t, eps);
            prop_assert_eq!(p.z.iter().sum::<u64>(), x.iter().sum::<u64>());
            prop_assert!(p.z.len() <= x.len());
            let zs = subset_sums(&p.z);
            let slack = t as f64 * eps.value() / 2.0;
            for a in subset_sums(&x) {
                let ok = zs.iter().any(|&b| b <= a && b as f64 >= a as f64 - slack);
                prop_assert!(ok, "no B for A-sum {}", a);
            }
        }
    }
}

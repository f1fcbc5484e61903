//! Factor-prefix trees over smooth items.
//!
//! A node at depth `j` holds the items sharing their first `j` factors; its values live
//! in the domain divided by the product `pi` of that prefix. Nodes at the cut depth `k`
//! compute their subset sums directly; every node above merges its children after
//! multiplying them by their branching factor.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{SmoothParams, SmoothProduct};
use crate::core::{Eps, Error, Result};
use crate::par;
use crate::sumset::oracles::{CopiesLeaf, MappedLeaf};
use crate::sumset::{f_uncapped, merge_leaves, LeafSpec, SumsetResult};

/// A smooth product with multiplicity; picks carry `label` and the product value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothItem {
    pub product: SmoothProduct,
    pub count: u64,
    pub label: u64,
}

impl SmoothItem {
    pub fn new(product: SmoothProduct, count: u64, label: u64) -> Self {
        Self {
            product,
            count,
            label,
        }
    }
}

fn validate(items: &[SmoothItem], k: u32) -> Result<usize> {
    let Some(first) = items.first() else {
        return Ok(0);
    };
    let len = first.product.factors.len();
    if k as usize >= len.max(1) {
        return Err(Error::InvalidInput(format!(
            "cut layer {k} exceeds dbar = {}",
            len as i64 - 1
        )));
    }
    for it in items {
        let f = &it.product.factors;
        if f.len() != len {
            return Err(Error::InvalidInput(
                "items have different factor counts".into(),
            ));
        }
        if f.iter().any(|&h| h == 0)
            || f.iter().try_fold(1u64, |a, &h| a.checked_mul(h)) != Some(it.product.value)
        {
            return Err(Error::InvalidInput(format!(
                "factors of {} do not multiply back",
                it.product.value
            )));
        }
    }
    Ok(len)
}

/// Exact leaves `{0, a, ..., m a}` of the items below a cut node, with `a = value / pi`.
fn copies_leaves(items: &[&SmoothItem], pi: u64) -> Result<Vec<LeafSpec>> {
    items
        .iter()
        .filter(|it| it.count > 0)
        .map(|it| {
            let unit = it.product.value / pi;
            unit.checked_mul(it.count)
                .ok_or(Error::Overflow("smooth leaf"))?;
            let values = (0..=it.count).map(|c| c * unit).collect();
            let oracle = CopiesLeaf {
                label: it.label,
                unit,
                item_value: it.product.value,
            };
            Ok(LeafSpec::exact(values, Arc::new(oracle)))
        })
        .collect()
}

/// Minimum and maximum of every bucket `[(tau-1) eps s, tau eps s)`; error is half the widest gap.
fn bucket_extremes(values: &[u64], eps: Eps, sum: u64) -> (Vec<u64>, u64) {
    if sum == 0 {
        return (vec![0], 0);
    }
    let idx = |v: u64| v as u128 * eps.den as u128 / (eps.num as u128 * sum as u128);
    let mut out = Vec::new();
    let mut err = 0;
    let mut i = 0;
    while i < values.len() {
        let b = idx(values[i]);
        let mut j = i;
        while j + 1 < values.len() && idx(values[j + 1]) == b {
            j += 1;
        }
        out.push(values[i]);
        if j > i {
            out.push(values[j]);
            err = err.max((values[j] - values[i]).div_ceil(2));
        }
        i = j + 1;
    }
    (out, err)
}

/// Children keyed by their branching factor, in increasing order.
fn children<'a>(items: &[&'a SmoothItem], depth: usize) -> Vec<(u64, Vec<&'a SmoothItem>)> {
    let mut groups: BTreeMap<u64, Vec<&SmoothItem>> = BTreeMap::new();
    for it in items {
        groups
            .entry(it.product.factors[depth])
            .or_default()
            .push(it);
    }
    groups.into_iter().collect()
}

/// A child result seen from its parent: values `p * c`, error `p * err`.
fn scaled(child: Arc<SumsetResult>, p: u64) -> Result<LeafSpec> {
    let pairs = child
        .values
        .iter()
        .map(|&c| {
            c.checked_mul(p)
                .map(|v| (v, c))
                .ok_or(Error::Overflow("smooth tree scaling"))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = pairs.iter().map(|p| p.0).collect();
    let err = child
        .err
        .checked_mul(p)
        .ok_or(Error::Overflow("smooth tree error"))?;
    Ok(LeafSpec {
        values,
        err,
        oracle: Arc::new(MappedLeaf::new(pairs, child)?),
    })
}

fn approx_node(
    items: &[&SmoothItem],
    depth: usize,
    k: usize,
    pi: u64,
    eps: Eps,
) -> Result<Arc<SumsetResult>> {
    if depth == k {
        let exact = Arc::new(merge_leaves(copies_leaves(items, pi)?, None, None)?);
        let sum = exact.max();
        let (values, err) = bucket_extremes(&exact.values, eps, sum);
        let leaf = LeafSpec {
            values,
            err,
            oracle: exact,
        };
        return Ok(Arc::new(merge_leaves(vec![leaf], None, None)?));
    }
    let groups = children(items, depth);
    let kids = par::try_map(groups, |(p, sub)| {
        approx_node(&sub, depth + 1, k, pi * p, eps).and_then(|r| scaled(r, p))
    })?;
    let width = if kids.len() > 1 { Some(eps) } else { None };
    Ok(Arc::new(merge_leaves(kids, width, None)?))
}

fn capped_node(
    items: &[&SmoothItem],
    depth: usize,
    k: usize,
    pi: u64,
    omega: u64,
) -> Result<Arc<SumsetResult>> {
    let cap = omega / pi;
    if depth == k {
        return Ok(Arc::new(merge_leaves(
            copies_leaves(items, pi)?,
            None,
            Some(cap),
        )?));
    }
    let groups = children(items, depth);
    let kids = par::try_map(groups, |(p, sub)| {
        capped_node(&sub, depth + 1, k, pi * p, omega).and_then(|r| scaled(r, p))
    })?;
    Ok(Arc::new(merge_leaves(kids, None, Some(cap))?))
}

fn total(items: &[SmoothItem]) -> Result<u64> {
    items.iter().try_fold(0u64, |acc, it| {
        it.product
            .value
            .checked_mul(it.count)
            .and_then(|v| acc.checked_add(v))
            .ok_or(Error::Overflow("smooth sum"))
    })
}

/// Closed-form budget: cut nodes contribute `eps/2` plus one rounding unit `pi`,
/// each merge level `(1+eps)^h` growth plus `f^h`.
fn tree_budget(items: &[SmoothItem], eps: f64, k: usize, sum: u64) -> f64 {
    let fanout = items
        .iter()
        .flat_map(|it| it.product.factors.iter().copied())
        .max()
        .unwrap_or(1);
    let h = fanout.max(2).next_power_of_two().trailing_zeros();
    let f = f_uncapped(eps, h);
    let grow = (1.0 + eps).powi(h as i32);
    let rel = (0..k).fold(eps / 2.0, |b, _| grow * b + f);
    let prefixes: std::collections::BTreeSet<&[u64]> =
        items.iter().map(|it| &it.product.factors[..k]).collect();
    let units: f64 = prefixes
        .iter()
        .map(|p| p.iter().product::<u64>() as f64)
        .sum();
    rel * sum as f64 + grow.powi(k as i32) * units
}

/// Approximate subset sums of smooth items; the realized error is `result.err`.
pub fn smooth_subset_sums_approx(
    items: &[SmoothItem],
    p: &SmoothParams,
    k: u32,
) -> Result<SumsetResult> {
    let len = validate(items, k)?;
    let sum = total(items)?;
    let refs: Vec<&SmoothItem> = items.iter().collect();
    let root = if len == 0 {
        Arc::new(merge_leaves(Vec::new(), None, None)?)
    } else {
        approx_node(&refs, 0, k as usize, 1, p.eps)?
    };
    let mut out = Arc::try_unwrap(root).unwrap_or_else(|a| (*a).clone());
    out.lemma_err = tree_budget(items, p.eps.value(), k as usize, sum);
    Ok(out)
}

/// Exact `S(A) ∩ [0, ω]` through the same tree.
pub fn smooth_capped_subset_sums_exact(
    items: &[SmoothItem],
    omega: u64,
    k: u32,
) -> Result<SumsetResult> {
    let len = validate(items, k)?;
    let refs: Vec<&SmoothItem> = items.iter().collect();
    let root = if len == 0 {
        Arc::new(merge_leaves(Vec::new(), None, Some(omega))?)
    } else {
        capped_node(&refs, 0, k as usize, 1, omega)?
    };
    Ok(Arc::try_unwrap(root).unwrap_or_else(|a| (*a).clone()))
}

//! PARTITION: largest subset sum not exceeding half the total.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    best_witness, check_d, effective_eps, group_picks, label_counts, merge_groups, regime_summary,
    to_fixed, value_labels, Clock, GroupApproxOutput, Regime, RegimePolicy, FIXED_POINT,
};
use crate::core::{Certificate, Eps, Error, Oracle, Pick, Result, SolveResult};
use crate::dense::{build_dense_structure, dense_threshold};
use crate::preprocess::{preprocess_bounded, trivial_gate, Gate, ItemGroup};
use crate::smooth::{
    enumerate_smooth_products, round_with_products, smooth_subset_sums_approx, SmoothItem,
    SmoothParams,
};
use crate::sumset::oracles::{ComplementLeaf, ExpandLeaf, RelabelLeaf, UnionLeaf};
use crate::sumset::{merge_leaves, LeafSpec, SumsetResult};

use super::exact::{exact_subset_sum, EXACT_CELLS};

/// Approximate `S(M)` of one group, uncapped, in fixed-point units.
pub fn partition_group_apx(g: &ItemGroup, eps: Eps, d: u32) -> Result<GroupApproxOutput> {
    partition_group_apx_in(g, eps, d, RegimePolicy::Auto.pick(g, eps))
}

/// [`partition_group_apx`] with the regime chosen by the caller.
pub fn partition_group_apx_in(
    g: &ItemGroup,
    eps: Eps,
    d: u32,
    regime: Regime,
) -> Result<GroupApproxOutput> {
    check_d(d)?;
    if g.items.is_empty() {
        return Err(Error::InvalidInput("empty group".into()));
    }
    let result = match regime {
        Regime::LargeValue | Regime::Sparse => tree_only(g, eps, d)?,
        Regime::Dense => dense(g, eps, d)?,
        _ => {
            return Err(Error::InvalidInput(format!(
                "regime {} does not apply to partition",
                regime.name()
            )))
        }
    };
    Ok(GroupApproxOutput {
        result: Arc::new(result),
        regime,
    })
}

fn tree_only(g: &ItemGroup, eps: Eps, d: u32) -> Result<SumsetResult> {
    let params = SmoothParams::new(eps, d, 0.0, 1.0)?;
    let items: Vec<SmoothItem> = g
        .items
        .iter()
        .map(|it| SmoothItem::new(it.product.clone(), 1, it.label))
        .collect();
    let r = Arc::new(smooth_subset_sums_approx(&items, &params, d / 4)?);
    to_fixed(
        &r.values,
        r.err as f64,
        r.clone(),
        FIXED_POINT * g.beta,
        None,
    )
}

/// Subset sums in `(L, Σ - L)` from a grid of dense queries.
fn middle(g: &ItemGroup, eps: Eps, threshold: f64) -> Result<Option<SumsetResult>> {
    let q = g.quotients();
    let sum = g.quotient_sum();
    let top = sum as f64 - threshold;
    if top <= threshold {
        return Ok(None);
    }
    let l = (eps.inv().floor() as u64).max(*q.iter().max().unwrap());
    let ds = build_dense_structure(&q, Some(l))?;
    let step = eps.value() * sum as f64;
    let mut grid = Vec::new();
    let mut k = 1u64;
    loop {
        let p = (k as f64 * step).floor();
        if p >= top {
            break;
        }
        if p > threshold {
            grid.push(p as u64);
        }
        k += 1;
    }
    let last = top.ceil() as u64 - 1;
    if last as f64 > threshold {
        grid.push(last);
    }
    let mut values: Vec<u64> = grid.into_iter().map(|p| ds.max_sum_below(p)).collect();
    values.sort_unstable();
    values.dedup();
    let oracle: Arc<dyn Oracle> = Arc::new(RelabelLeaf {
        labels: value_labels(g),
        oracle: ds.sums().clone(),
    });
    let r = to_fixed(&values, step + 1.0, oracle, FIXED_POINT * g.beta, None)?;
    Ok(Some(r))
}

/// Subset sums `<= L` of the group, from coarser rounding of the real values.
fn lower_side(g: &ItemGroup, eps: Eps, d: u32, limit: f64) -> Result<SumsetResult> {
    let inv = eps.value().powf(-(2.0 + g.lambda));
    let coarse = SmoothParams::new(eps, d, g.lambda, 1.5)?;
    let gamma = coarse.gamma();
    let products = enumerate_smooth_products(&coarse)?;
    let reals = g.real_values();
    let mut scaled = Vec::with_capacity(reals.len());
    let mut shrink = Vec::with_capacity(reals.len());
    for &m in &reals {
        let s = if m < inv {
            2.0
        } else if m < 2.0 * inv {
            1.0
        } else {
            0.5
        };
        scaled.push(m * s);
        shrink.push(s);
    }
    let rounding = round_with_products(&scaled, &coarse, &products)?;
    // (part scale, rho exponent) -> product value -> group picks
    let mut parts: BTreeMap<(u64, i64), BTreeMap<u64, (crate::smooth::SmoothProduct, Vec<Pick>)>> =
        BTreeMap::new();
    for ((it, item), &s) in g.items.iter().zip(&rounding.items).zip(&shrink) {
        let key = ((s * 2.0) as u64, item.rho_exponent);
        let entry = parts
            .entry(key)
            .or_default()
            .entry(item.product.value)
            .or_insert((item.product.clone(), Vec::new()));
        entry.1.push(Pick {
            label: it.label,
            value: it.product.value,
            count: 1,
        });
    }
    let tau = (d / 4).min(coarse.dbar);
    let mut leaves = Vec::new();
    for ((s2, c), set) in parts {
        let mut table = Vec::new();
        let mut items = Vec::new();
        for (_, (product, picks)) in set {
            items.push(SmoothItem::new(
                product,
                picks.len() as u64,
                table.len() as u64,
            ));
            table.push(picks);
        }
        let r = Arc::new(smooth_subset_sums_approx(&items, &coarse, tau)?);
        let rho = (1.0 + gamma).powi(c as i32);
        let factor = FIXED_POINT * rho * 2.0 / s2 as f64;
        let oracle: Arc<dyn Oracle> = Arc::new(ExpandLeaf {
            table,
            oracle: r.clone(),
        });
        leaves.push(LeafSpec::nested(Arc::new(to_fixed(
            &r.values,
            r.err as f64,
            oracle,
            factor,
            None,
        )?)));
    }
    let cap = (FIXED_POINT * (1.0 + gamma) * limit).ceil() as u64;
    let fine = super::merge_eps(eps, leaves.len())?;
    let merged = Arc::new(merge_leaves(leaves, Some(fine), Some(cap))?);
    let e_cv = merged.err as f64;
    let err = e_cv + (gamma * (cap as f64 + 2.0 * e_cv) / (1.0 - gamma)).ceil() + 1.0;
    let spec = LeafSpec {
        values: merged.values.clone(),
        err: err as u64,
        oracle: merged,
    };
    Ok(SumsetResult::from_leaf(spec, None))
}

fn dense(g: &ItemGroup, eps: Eps, d: u32) -> Result<SumsetResult> {
    if g.lambda >= 0.5 {
        return Err(Error::InvalidInput(
            "dense regime needs lambda < 1/2".into(),
        ));
    }
    let q = g.quotients();
    let sum = g.quotient_sum();
    let l = (eps.inv().floor() as u64).max(*q.iter().max().unwrap());
    let threshold = dense_threshold(q.len(), sum, l);
    let mid = middle(g, eps, threshold)?;
    // The mirror covers sums above half the total, so the low side never needs more.
    let low = Arc::new(lower_side(
        g,
        eps,
        d,
        g.beta * threshold.min(sum as f64 / 2.0),
    )?);
    let total = (FIXED_POINT * g.beta * sum as f64).round() as u64;
    let high_values: Vec<u64> = low
        .values
        .iter()
        .filter(|&&v| v <= total)
        .map(|&v| total - v)
        .collect();
    let high: Arc<dyn Oracle> = Arc::new(ComplementLeaf {
        total,
        all: group_picks(g),
        oracle: low.clone(),
    });
    let mut err = low.err + 1;
    let mut sources: Vec<(Vec<u64>, Arc<dyn Oracle>)> = Vec::new();
    if let Some(m) = mid {
        err = err.max(m.err);
        sources.push((m.values.clone(), Arc::new(m)));
    }
    sources.push((low.values.clone(), low.clone()));
    sources.push((high_values, high));
    let union = UnionLeaf::new(sources);
    let values = union.values().to_vec();
    Ok(SumsetResult::from_leaf(
        LeafSpec {
            values,
            err,
            oracle: Arc::new(union),
        },
        None,
    ))
}

/// [`partition_approx_with`] at `d = 12` with automatic regimes.
pub fn partition_approx(x: &[u64], eps: Eps) -> Result<SolveResult> {
    partition_approx_with(x, eps, 12, RegimePolicy::Auto)
}

/// A subset `Y` with `Σ(Y) <= Σ(X)/2`, certified against the optimum.
pub fn partition_approx_with(
    x: &[u64],
    eps: Eps,
    d: u32,
    policy: RegimePolicy,
) -> Result<SolveResult> {
    check_d(d)?;
    let total: u128 = x.iter().map(|&v| v as u128).sum();
    let t = u64::try_from(total / 2).map_err(|_| Error::Overflow("partition total"))?;
    let mut clock = Clock::new();
    if t == 0 {
        let mut r = SolveResult::empty_exact();
        r.trace.push(("path".into(), "empty".into()));
        return Ok(r);
    }
    if let Gate::Solved(mut r) = trivial_gate(x, t)? {
        r.trace.push(("path".into(), "gate".into()));
        return Ok(r);
    }
    let run = effective_eps(eps)?;
    if run != eps {
        if let Ok(mut r) = exact_subset_sum(x, t, EXACT_CELLS) {
            clock.lap("exact");
            r.trace.push(("path".into(), "exact-dp".into()));
            r.timings = clock.finish();
            return Ok(r);
        }
    }
    let inst = preprocess_bounded(x, t, run, d)?;
    clock.lap("preprocess");
    let outputs = crate::par::try_map(inst.groups.iter().collect(), |g| {
        partition_group_apx_in(g, run, d, policy.pick(g, run))
    })?;
    clock.lap("group");
    let root = merge_groups(&outputs, run, None)?;
    clock.lap("merge");
    let limit = (FIXED_POINT * inst.t_hat).floor() as u64 + root.err;
    let top = root.largest_at_most(limit).unwrap_or(0);
    let e = inst.eps.value();
    let ub = (inst.scale * (top + root.err + 1) as f64 / (FIXED_POINT * (1.0 - e))
        + e * t as f64 / 2.0)
        .min(t as f64);
    let (v, mut result) = best_witness(&root, limit, |v| {
        let picks = label_counts(&root, v, |_| 1)?;
        let y = SolveResult::from_items(x, inst.back_map(&picks)?, Certificate::default())?;
        let mut r = if 2 * y.value as u128 > total {
            let mut used = vec![false; x.len()];
            for &(i, _) in &y.items {
                used[i] = true;
            }
            let rest = (0..x.len()).filter(|&i| !used[i]).map(|i| (i, 1)).collect();
            SolveResult::from_items(x, rest, Certificate::default())?
        } else {
            y
        };
        r.certificate = Certificate::new(1.0 - r.value as f64 / ub, 0.0);
        Ok(r)
    })?;
    clock.lap("backtrack");
    result.timings = clock.finish();
    result.trace = vec![
        ("path".into(), "approx".into()),
        ("eps".into(), run.to_string()),
        ("groups".into(), outputs.len().to_string()),
        ("regimes".into(), regime_summary(&outputs)),
        ("t_hat".into(), format!("{:.3}", inst.t_hat)),
        ("root_size".into(), root.values.len().to_string()),
        ("root_err".into(), root.err.to_string()),
        ("selected".into(), v.to_string()),
        ("upper_bound".into(), format!("{ub:.3}")),
    ];
    Ok(result)
}

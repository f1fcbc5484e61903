//! UNBOUNDED SUBSET SUM with a weak upper slack on the target.

use std::sync::Arc;

use super::exact::{exact_unbounded, EXACT_CELLS};
use super::{
    best_witness, effective_eps, label_counts, merge_eps, merge_groups, multiplicities,
    regime_summary, to_fixed, Clock, GroupApproxOutput, Regime, FIXED_POINT,
};
use crate::core::{pow2_floor_u64, Certificate, Eps, Error, Pick, Result, SolveResult};
use crate::preprocess::{copies_threshold, preprocess_unbounded, unbounded_gate, Gate, ItemGroup};
use crate::sumset::oracles::{MultiplyLeaf, TableLeaf};
use crate::sumset::{f_capped, merge_leaves, DagBuilder, LeafSpec, Width};

/// Approximate sums of multisets of the group with at most its multiplicity of each item,
/// capped at `omega`, in fixed-point units.
pub fn unbounded_group_apx(g: &ItemGroup, eps: Eps, omega: f64) -> Result<GroupApproxOutput> {
    if g.items.is_empty() {
        return Err(Error::InvalidInput("empty group".into()));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cap {omega} must be finite and nonnegative"
        )));
    }
    let upsilon = omega / g.beta;
    let cap = upsilon.floor() as u64;
    let q = g.quotients();
    let (gmin, gmax) = (*q.iter().min().unwrap(), *q.iter().max().unwrap());
    let th = copies_threshold(eps);
    let levels = th.trailing_zeros();
    let fine = merge_eps(eps, th as usize)?;

    let table = g.items.iter().map(|it| {
        (
            it.product.value,
            vec![Pick {
                label: it.label,
                value: it.product.value,
                count: 1,
            }],
        )
    });
    let table = TableLeaf::new(std::iter::once((0, Vec::new())).chain(table).collect());
    let mut b = DagBuilder::new();
    let mut u = b.leaf(LeafSpec::exact(q.clone(), Arc::new(table)), Some(cap));
    for h in 1..=levels {
        let level_cap = gmax.saturating_mul(1 << h).min(cap);
        u = b.merge_layer(&[(u, u)], Width::Approx(fine), Some(level_cap))?[0];
    }
    let lemma = f_capped(fine.value(), levels) * gmax.saturating_mul(th).min(cap) as f64;
    let base = Arc::new(b.finish(u, Some(cap), lemma));

    let m = cap / gmin;
    let (result, regime) = if m <= th {
        (base, Regime::FewCopies)
    } else {
        let top = pow2_floor_u64(m);
        let leaves: Vec<LeafSpec> = (0..=top)
            .map(|k| {
                let f = 1u64 << k;
                let values = base.values.iter().map(|&v| v * f).collect();
                LeafSpec {
                    values,
                    err: base.err * f,
                    oracle: Arc::new(MultiplyLeaf {
                        factor: f,
                        oracle: base.clone(),
                    }),
                }
            })
            .collect();
        let n = leaves.len();
        (
            Arc::new(merge_leaves(leaves, Some(merge_eps(eps, n)?), Some(cap))?),
            Regime::ManyCopies,
        )
    };
    let fixed = to_fixed(
        &result.values,
        result.err as f64,
        result.clone(),
        FIXED_POINT * g.beta,
        Some((FIXED_POINT * omega).floor() as u64),
    )?;
    Ok(GroupApproxOutput {
        result: Arc::new(fixed),
        regime,
    })
}

/// A multiset with `(1 - delta) OPT <= Σ <= (1 + delta) t`; items must be positive.
pub fn unbounded_subset_sum_weak_approx(x: &[u64], t: u64, eps: Eps) -> Result<SolveResult> {
    if x.iter().any(|&v| v == 0) {
        return Err(Error::InvalidInput("items must be positive".into()));
    }
    let mut clock = Clock::new();
    if t == 0 || x.is_empty() {
        let mut r = SolveResult::empty_exact();
        r.trace.push(("path".into(), "empty".into()));
        return Ok(r);
    }
    let run = effective_eps(eps)?;
    if run != eps {
        if let Ok(mut r) = exact_unbounded(x, t, EXACT_CELLS) {
            clock.lap("exact");
            r.trace.push(("path".into(), "exact-dp".into()));
            r.timings = clock.finish();
            return Ok(r);
        }
    }
    if let Gate::Solved(mut r) = unbounded_gate(x, t, run)? {
        r.trace.push(("path".into(), "gate".into()));
        return Ok(r);
    }
    let kept: Vec<usize> = (0..x.len()).filter(|&i| x[i] < t).collect();
    if kept.is_empty() {
        let mut r = SolveResult::empty_exact();
        r.trace.push(("path".into(), "nothing-fits".into()));
        return Ok(r);
    }
    let sub: Vec<u64> = kept.iter().map(|&i| x[i]).collect();
    let inst = preprocess_unbounded(&sub, t, run)?;
    clock.lap("preprocess");
    let omega = inst.t_hat;
    if inst.sum_scaled < omega / 2.0 {
        let all: Vec<(u64, u64)> = inst
            .groups
            .iter()
            .flat_map(|g| g.items.iter().map(|it| (it.label, g.multiplicity)))
            .collect();
        let chosen = inst
            .back_map(&all)?
            .into_iter()
            .map(|(i, c)| (kept[i], c))
            .collect();
        let mut r = SolveResult::from_items(x, chosen, Certificate::default())?;
        r.certificate = Certificate::new(0.0, r.value as f64 / t as f64 - 1.0);
        r.trace.push(("path".into(), "all-copies".into()));
        return Ok(r);
    }
    let outputs = crate::par::try_map(inst.groups.iter().collect(), |g| {
        unbounded_group_apx(g, run, omega)
    })?;
    clock.lap("group");
    let cap = (FIXED_POINT * omega).floor() as u64;
    let root = merge_groups(&outputs, run, Some(cap))?;
    clock.lap("merge");
    let top = root.largest_at_most(cap + root.err).unwrap_or(0);
    let e = run.value();
    let ub = (inst.scale * (top + root.err + 1) as f64 / (FIXED_POINT * (1.0 - e))).min(t as f64);
    let mult = multiplicities(&inst);
    let (v, mut result) = best_witness(&root, cap + root.err, |v| {
        let picks = label_counts(&root, v, |l| mult[l as usize])?;
        let chosen = inst
            .back_map(&picks)?
            .into_iter()
            .map(|(i, c)| (kept[i], c))
            .collect();
        let mut r = SolveResult::from_items(x, chosen, Certificate::default())?;
        r.certificate =
            Certificate::new(1.0 - r.value as f64 / ub, r.value as f64 / t as f64 - 1.0);
        Ok(r)
    })?;
    clock.lap("backtrack");
    result.timings = clock.finish();
    result.trace = vec![
        ("path".into(), "approx".into()),
        ("eps".into(), run.to_string()),
        ("groups".into(), outputs.len().to_string()),
        ("regimes".into(), regime_summary(&outputs)),
        ("t_hat".into(), format!("{omega:.3}")),
        ("root_size".into(), root.values.len().to_string()),
        ("root_err".into(), root.err.to_string()),
        ("selected".into(), v.to_string()),
        ("upper_bound".into(), format!("{ub:.3}")),
    ];
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::check_group;
    use super::*;
    use crate::preprocess::GroupItem;
    use crate::smooth::{enumerate_smooth_products, SmoothParams};

    fn eps16() -> Eps {
        Eps::from_ratio(1, 16).unwrap()
    }

    /// Group of the window products at the given positions.
    fn group(positions: &[usize], beta: f64, multiplicity: u64) -> ItemGroup {
        let p = SmoothParams::new(eps16(), 1, 0.0, 1.0).unwrap();
        let all = enumerate_smooth_products(&p).unwrap();
        let items = positions
            .iter()
            .enumerate()
            .map(|(i, &k)| GroupItem {
                product: all[k].clone(),
                label: i as u64,
            })
            .collect();
        ItemGroup {
            j: 1,
            rho_exponent: 0,
            split: 0,
            p: 0,
            beta,
            lambda: 0.0,
            multiplicity,
            items,
        }
    }

    #[test]
    fn spec_examples() {
        let r = unbounded_subset_sum_weak_approx(&[7], 100, eps16()).unwrap();
        assert_eq!(r.value % 7, 0);
        assert!(r.value as f64 >= (1.0 - r.certificate.delta_lower) * 98.0);
        assert!(r.value as f64 <= (1.0 + r.certificate.delta_upper) * 100.0);
        assert!(r.value <= 106);
        let r = unbounded_subset_sum_weak_approx(&[7], 100, Eps::new(0.2).unwrap()).unwrap();
        assert_eq!(r.items, vec![(0, 14)]);
        let r = unbounded_subset_sum_weak_approx(&[50], 100, Eps::new(0.1).unwrap()).unwrap();
        assert_eq!(r.value, 100);
        let r = unbounded_subset_sum_weak_approx(&[101], 100, eps16()).unwrap();
        assert_eq!(r.value, 101);
        let r = unbounded_subset_sum_weak_approx(&[300], 100, eps16()).unwrap();
        assert_eq!(r.value, 0);
        assert!(unbounded_subset_sum_weak_approx(&[0, 3], 10, eps16()).is_err());
    }

    #[test]
    fn assured_branch() {
        let x = [37, 45, 61];
        let t = 400;
        let r = unbounded_subset_sum_weak_approx(&x, t, eps16()).unwrap();
        let opt = super::super::exact_unbounded(&x, t, EXACT_CELLS)
            .unwrap()
            .value;
        assert_eq!(r.trace[0].1, "approx");
        assert!(r.value as f64 >= (1.0 - r.certificate.delta_lower) * opt as f64 - 1e-9);
        assert!(r.value as f64 <= (1.0 + r.certificate.delta_upper) * t as f64 + 1e-9);
        assert!(r.certificate.delta < 0.5);
    }

    #[test]
    fn single_value_group() {
        let g = group(&[0], 1.0, 64);
        let h = g.quotients()[0] as f64;
        for omega in [0.0, 2.5 * h, 7.5 * h, 60.0 * h] {
            let out = unbounded_group_apx(&g, eps16(), omega).unwrap();
            let copies = ((omega / h).floor() as u64).min(64);
            check_group(&out, &g, Some(FIXED_POINT * omega), copies);
        }
    }

    #[test]
    fn few_and_many_copies() {
        let g = group(&[0, 1, 2], 1.5, 8);
        let omega = 1.5 * 5.0 * g.quotients()[0] as f64;
        let out = unbounded_group_apx(&g, eps16(), omega).unwrap();
        assert_eq!(out.regime, Regime::FewCopies);
        check_group(&out, &g, Some(FIXED_POINT * omega), 5);
        let g = group(&[0, 1], 1.0, 2 * 12 * 8);
        let omega = 12.0 * g.quotients()[0] as f64;
        let out = unbounded_group_apx(&g, eps16(), omega).unwrap();
        assert_eq!(out.regime, Regime::ManyCopies);
        check_group(&out, &g, Some(FIXED_POINT * omega), 12);
    }
}

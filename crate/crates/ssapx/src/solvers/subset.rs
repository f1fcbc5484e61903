//! SUBSET SUM with a weak upper slack on the target.

use std::sync::Arc;

use super::exact::{exact_subset_sum, EXACT_CELLS};
use super::{
    best_witness, check_d, effective_eps, group_picks, label_counts, merge_groups, regime_summary,
    to_fixed, value_labels, Clock, GroupApproxOutput, Regime, RegimePolicy, FIXED_POINT,
};
use crate::core::{Certificate, Eps, Error, MultiSet, Oracle, Result, SolveResult};
use crate::dense::build_dense_structure;
use crate::preprocess::{items_at_most, preprocess_bounded, trivial_gate, Gate, ItemGroup};
use crate::smooth::{smooth_capped_subset_sums_exact, SmoothItem};
use crate::sumset::capped_subset_sums_exact;
use crate::sumset::oracles::{ComplementLeaf, RelabelLeaf, UnionLeaf};

/// Approximate `S(M) ∩ [0, omega]` of one group, in fixed-point units capped at `Q omega`.
pub fn subset_group_apx(g: &ItemGroup, eps: Eps, d: u32, omega: f64) -> Result<GroupApproxOutput> {
    subset_group_apx_in(g, eps, d, omega, RegimePolicy::Auto.pick(g, eps))
}

/// [`subset_group_apx`] with the regime chosen by the caller.
pub fn subset_group_apx_in(
    g: &ItemGroup,
    eps: Eps,
    d: u32,
    omega: f64,
    regime: Regime,
) -> Result<GroupApproxOutput> {
    check_d(d)?;
    if g.items.is_empty() {
        return Err(Error::InvalidInput("empty group".into()));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "cap {omega} must be finite and nonnegative"
        )));
    }
    let upsilon = omega / g.beta;
    let cap_fixed = Some((FIXED_POINT * omega).floor() as u64);
    let factor = FIXED_POINT * g.beta;
    let result = match regime {
        Regime::LargeValue | Regime::Sparse => {
            let ms = MultiSet::from_items(&g.quotients())?;
            let r = capped_subset_sums_exact(&ms, upsilon.floor() as u64)?;
            let oracle: Arc<dyn Oracle> = Arc::new(RelabelLeaf {
                labels: value_labels(g),
                oracle: Arc::new(r.clone()),
            });
            to_fixed(&r.values, 0.0, oracle, factor, cap_fixed)?
        }
        Regime::Dense => {
            let (values, err, oracle) = dense(g, eps, d, upsilon)?;
            to_fixed(&values, err, oracle, factor, cap_fixed)?
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "regime {} does not apply to subset sum",
                regime.name()
            )))
        }
    };
    Ok(GroupApproxOutput {
        result: Arc::new(result),
        regime,
    })
}

/// Union of the exact low side, its mirror and the dense middle, in quotient units.
fn dense(
    g: &ItemGroup,
    eps: Eps,
    d: u32,
    upsilon: f64,
) -> Result<(Vec<u64>, f64, Arc<dyn Oracle>)> {
    let q = g.quotients();
    let sum = g.quotient_sum();
    let cap = upsilon.floor() as u64;
    let low_cap = 100.0 * sum as f64 * eps.inv().sqrt() * eps.log_inv() / q.len() as f64;
    let items: Vec<SmoothItem> = g
        .items
        .iter()
        .map(|it| SmoothItem::new(it.product.clone(), 1, it.label))
        .collect();
    let low = Arc::new(smooth_capped_subset_sums_exact(
        &items,
        low_cap.floor().min(sum as f64) as u64,
        d / 2,
    )?);
    let low_values: Vec<u64> = low.values.iter().copied().filter(|&v| v <= cap).collect();
    let high_values: Vec<u64> = low
        .values
        .iter()
        .filter(|&&v| v <= sum && sum - v <= cap)
        .map(|&v| sum - v)
        .collect();
    let high: Arc<dyn Oracle> = Arc::new(ComplementLeaf {
        total: sum,
        all: group_picks(g),
        oracle: low.clone(),
    });
    let mut sources: Vec<(Vec<u64>, Arc<dyn Oracle>)> =
        vec![(low_values, low.clone()), (high_values, high)];

    let mut err = 0.0;
    let top = upsilon.min(sum as f64 - low_cap);
    if top > low_cap {
        let l = (eps.inv().floor() as u64).max(*q.iter().max().unwrap());
        let ds = build_dense_structure(&q, Some(l))?;
        let step = eps.value() * upsilon;
        let mut grid = Vec::new();
        let mut k = 1u64;
        loop {
            let p = (k as f64 * step).floor();
            if p >= top {
                break;
            }
            if p > low_cap {
                grid.push(p as u64);
            }
            k += 1;
        }
        let last = if top == upsilon {
            cap
        } else {
            top.ceil() as u64 - 1
        };
        if last as f64 > low_cap {
            grid.push(last);
        }
        let mut mid: Vec<u64> = grid.into_iter().map(|p| ds.max_sum_below(p)).collect();
        mid.sort_unstable();
        mid.dedup();
        err = step + 1.0;
        let oracle: Arc<dyn Oracle> = Arc::new(RelabelLeaf {
            labels: value_labels(g),
            oracle: ds.sums().clone(),
        });
        sources.insert(0, (mid, oracle));
    }
    let union = UnionLeaf::new(sources);
    Ok((union.values().to_vec(), err, Arc::new(union)))
}

/// A subset with `(1 - delta) OPT <= Σ(Y) <= (1 + delta) t`; `d` must be even.
pub fn subset_sum_weak_approx(x: &[u64], t: u64, eps: Eps, d: u32) -> Result<SolveResult> {
    subset_sum_weak_approx_with(x, t, eps, d, RegimePolicy::Auto)
}

/// [`subset_sum_weak_approx`] with an explicit regime policy.
pub fn subset_sum_weak_approx_with(
    x: &[u64],
    t: u64,
    eps: Eps,
    d: u32,
    policy: RegimePolicy,
) -> Result<SolveResult> {
    check_d(d)?;
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
    let fitting = items_at_most(x, t);
    let sum_fit: u128 = fitting.iter().map(|&i| x[i] as u128).sum();
    if sum_fit <= t as u128 {
        let mut r = SolveResult::from_items(
            x,
            fitting.into_iter().map(|i| (i, 1)).collect(),
            Certificate::exact(),
        )?;
        r.trace.push(("path".into(), "all-fit".into()));
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
    let omega = inst.t_hat;
    let outputs = crate::par::try_map(inst.groups.iter().collect(), |g| {
        subset_group_apx_in(g, run, d, omega, policy.pick(g, run))
    })?;
    clock.lap("group");
    let cap = (FIXED_POINT * omega).floor() as u64;
    let root = merge_groups(&outputs, run, Some(cap))?;
    clock.lap("merge");
    let top = root.largest_at_most(cap + root.err).unwrap_or(0);
    let e = run.value();
    let ub = (inst.scale * (top + root.err + 1) as f64 / (FIXED_POINT * (1.0 - e))
        + e * t as f64 / 2.0)
        .min(t as f64)
        .min(sum_fit as f64);
    let (v, result) = best_witness(&root, cap + root.err, |v| {
        let picks = label_counts(&root, v, |_| 1)?;
        let mut r = SolveResult::from_items(x, inst.back_map(&picks)?, Certificate::default())?;
        r.certificate =
            Certificate::new(1.0 - r.value as f64 / ub, r.value as f64 / t as f64 - 1.0);
        Ok(r)
    })?;
    let mut result = result;
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
    use crate::smooth::{enumerate_smooth_products, SmoothParams, SmoothProduct};

    fn eps16() -> Eps {
        Eps::from_ratio(1, 16).unwrap()
    }

    fn group(d: u32, take: usize, beta: f64) -> ItemGroup {
        let p = SmoothParams::new(eps16(), d, 0.0, 1.0).unwrap();
        let products: Vec<SmoothProduct> = enumerate_smooth_products(&p)
            .unwrap()
            .into_iter()
            .take(take)
            .collect();
        let items = products
            .into_iter()
            .enumerate()
            .map(|(i, product)| GroupItem {
                product,
                label: 10 + i as u64,
            })
            .collect();
        ItemGroup {
            j: 1,
            rho_exponent: 0,
            split: 1,
            p: 0,
            beta,
            lambda: 0.0,
            multiplicity: 1,
            items,
        }
    }

    #[test]
    fn spec_example() {
        let r = subset_sum_weak_approx(&[3, 34, 4, 12, 5, 2], 9, eps16(), 12).unwrap();
        assert!(r.value <= 9 + 9 / 16 + 1);
        assert!(r.value as f64 >= (1.0 - r.certificate.delta_lower) * 9.0);
        assert!(r.certificate.delta < 1.0);
    }

    #[test]
    fn shortcuts() {
        let r = subset_sum_weak_approx(&[5, 6], 0, eps16(), 12).unwrap();
        assert_eq!(r.value, 0);
        let r = subset_sum_weak_approx(&[1, 2, 3], 100, eps16(), 12).unwrap();
        assert_eq!(r.value, 6);
        assert!(r.certificate.exact);
        let r = subset_sum_weak_approx(&[30, 40, 200], 100, eps16(), 12).unwrap();
        assert_eq!(r.value, 70);
        assert!(subset_sum_weak_approx(&[1], 5, eps16(), 5).is_err());
    }

    #[test]
    fn coarse_eps_is_exact() {
        let r =
            subset_sum_weak_approx(&[3, 34, 4, 12, 5, 2], 9, Eps::new(0.25).unwrap(), 12).unwrap();
        assert_eq!(r.value, 9);
        assert!(r.certificate.exact);
    }

    #[test]
    fn forced_dense_end_to_end() {
        let x: Vec<u64> = (0..80).map(|i| 5000 + 31 * i).collect();
        let t = x.iter().sum::<u64>() / 3;
        let r = subset_sum_weak_approx_with(&x, t, eps16(), 4, RegimePolicy::PreferDense).unwrap();
        let regimes = &r.trace.iter().find(|e| e.0 == "regimes").unwrap().1;
        assert!(regimes.contains("dense"), "{regimes}");
        let opt = super::super::exact_subset_sum(&x, t, EXACT_CELLS)
            .unwrap()
            .value;
        assert!(r.value as f64 >= (1.0 - r.certificate.delta_lower) * opt as f64 - 1e-9);
        assert!(r.value as f64 <= (1.0 + r.certificate.delta_upper) * t as f64 + 1e-9);
    }

    #[test]
    fn random_instances_meet_certificate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..6 {
            let n = rng.gen_range(5..40);
            let x: Vec<u64> = (0..n).map(|_| rng.gen_range(1..5000)).collect();
            let t = rng.gen_range(1000..20000);
            let r = subset_sum_weak_approx(&x, t, eps16(), 12).unwrap();
            let opt = super::super::exact_subset_sum(&x, t, EXACT_CELLS)
                .unwrap()
                .value;
            assert!(r.value as f64 >= (1.0 - r.certificate.delta_lower) * opt as f64 - 1e-9);
            assert!(r.value as f64 <= (1.0 + r.certificate.delta_upper) * t as f64 + 1e-9);
        }
    }

    #[test]
    fn groups_against_brute_force() {
        let g = group(4, 12, 2.0);
        let total = g.beta * g.quotient_sum() as f64;
        for frac in [0.0, 0.2, 0.5, 1.0] {
            let omega = total * frac;
            for regime in [Regime::Sparse, Regime::Dense] {
                let out = subset_group_apx_in(&g, eps16(), 4, omega, regime).unwrap();
                check_group(&out, &g, Some(FIXED_POINT * omega), 1);
                assert!(out
                    .result
                    .values
                    .iter()
                    .all(|&v| v <= (FIXED_POINT * omega) as u64 + out.result.err));
            }
        }
    }

    #[test]
    fn zero_cap_gives_zero() {
        let g = group(2, 3, 1.0);
        let out = subset_group_apx(&g, eps16(), 2, 0.0).unwrap();
        assert_eq!(out.result.values, vec![0]);
    }
}

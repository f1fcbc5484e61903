//! Reference answers: exact dynamic programs, brute force and a scaled upper bound.

use ssapx::solvers::{exact_subset_sum, exact_unbounded};
use ssapx::{Error, Result, SolveResult};

/// Table cells the exact oracles may use.
pub const ORACLE_CELLS: u64 = 1 << 30;
/// Largest input for [`brute_force_subset_sums`].
pub const BRUTE_MAX: usize = 24;
/// Resolution of the scaled bound: values are divided so the target is about this large.
const SCALED_TARGET: u64 = 1 << 20;

/// Exact optimum of SUBSET SUM with a witness.
pub fn exact_subset_sum_dp(x: &[u64], t: u64) -> Result<SolveResult> {
    exact_subset_sum(x, t, ORACLE_CELLS)
}

/// Exact optimum of UNBOUNDED SUBSET SUM with a multiplicity witness.
pub fn exact_unbounded_dp(x: &[u64], t: u64) -> Result<SolveResult> {
    exact_unbounded(x, t, ORACLE_CELLS)
}

/// `S(X)` by enumeration.
pub fn brute_force_subset_sums(x: &[u64]) -> Result<Vec<u64>> {
    if x.len() > BRUTE_MAX {
        return Err(Error::Budget(format!("brute force limited to {BRUTE_MAX} items")));
    }
    let mut out: Vec<u64> = (0u32..1 << x.len())
        .map(|m| (0..x.len()).filter(|&i| m >> i & 1 == 1).map(|i| x[i]).sum())
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Bound on the SUBSET SUM optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OptBound {
    pub value: u64,
    /// `value` is the optimum itself.
    pub exact: bool,
}

/// Exact optimum when the DP fits, else `s (OPT' + n)` where `OPT'` is the optimum of
/// the instance with values `floor(x/s)` and target `floor(t/s)`.
pub fn subset_sum_bound(x: &[u64], t: u64) -> Result<OptBound> {
    match exact_subset_sum_dp(x, t) {
        Ok(r) => return Ok(OptBound { value: r.value, exact: true }),
        Err(Error::Budget(_)) => {}
        Err(e) => return Err(e),
    }
    let s = t.div_ceil(SCALED_TARGET).max(1);
    let fit: Vec<u64> = x.iter().copied().filter(|&v| v <= t).collect();
    let fit_sum = fit.iter().fold(0u64, |a, &v| a.saturating_add(v));
    let coarse: Vec<u64> = fit.iter().map(|&v| v / s).collect();
    let c = exact_subset_sum(&coarse, t / s, ORACLE_CELLS)?;
    let n = fit.len() as u64;
    let value = t.min(fit_sum).min(s.saturating_mul(c.value + n));
    Ok(OptBound { value, exact: fit_sum <= t })
}

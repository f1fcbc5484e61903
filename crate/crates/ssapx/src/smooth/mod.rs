//! Smooth products, semi-smooth rounding and subset sums of smooth numbers.

mod tree;

pub use tree::{smooth_capped_subset_sums_exact, smooth_subset_sums_approx, SmoothItem};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::convolution::poly_multiply_counts;
use crate::core::{Eps, Error, MultiSet, Result};

/// Slack used when turning real range endpoints into integer ranges.
const RANGE_SLACK: f64 = 1e-9;
/// Relative tolerance of the float evaluation of `rho * H`.
pub const ROUNDING_TOL: f64 = 1.0 / (1u64 << 40) as f64;

/// Rounding parameters; `gamma = eps^(2+lambda-alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothParams {
    pub eps: Eps,
    pub d: u32,
    pub dbar: u32,
    pub lambda: f64,
    pub alpha: f64,
}

impl SmoothParams {
    pub fn new(eps: Eps, d: u32, lambda: f64, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("d must be positive".into()));
        }
        let e = 2.0 + lambda - alpha;
        if !(e > 0.0 && e <= 1.0 + RANGE_SLACK) {
            return Err(Error::InvalidInput(format!(
                "2+lambda-alpha = {e} must lie in (0,1]"
            )));
        }
        let dbar = ((e * d as f64 - RANGE_SLACK).ceil() as i64 - 1).clamp(0, d as i64 - 1) as u32;
        let p = Self {
            eps,
            d,
            dbar,
            lambda,
            alpha,
        };
        let ed = p.exponent() * d as f64;
        if !(ed > dbar as f64 - RANGE_SLACK && ed <= (dbar + 1) as f64 + RANGE_SLACK) {
            return Err(Error::Internal(format!(
                "dbar={dbar} does not bracket {ed}"
            )));
        }
        Ok(p)
    }

    /// Parameters with `2+lambda-alpha = e` and `lambda = 0`.
    pub fn with_exponent(eps: Eps, d: u32, e: f64) -> Result<Self> {
        Self::new(eps, d, 0.0, 2.0 - e)
    }

    /// `2 + lambda - alpha`.
    pub fn exponent(&self) -> f64 {
        2.0 + self.lambda - self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.eps.value().powf(self.exponent())
    }

    /// Integer range of the first `dbar` factors.
    pub fn inner_range(&self) -> (u64, u64) {
        let root = self.eps.inv().powf(1.0 / self.d as f64);
        let lo = ((root / 2.0 - RANGE_SLACK).ceil() as u64).max(1);
        let hi = (2.0 * root + RANGE_SLACK).floor() as u64;
        (lo, hi)
    }

    /// Integer range of the last factor when enumerating the product window.
    pub fn last_range(&self) -> (u64, u64) {
        let g = self.exponent() - self.dbar as f64 / self.d as f64;
        let root = self.eps.inv().powf(g);
        let lo = ((root / 2.0 - RANGE_SLACK).ceil() as u64).max(1);
        let hi = (2.0 * root + RANGE_SLACK).floor() as u64;
        (lo, hi)
    }

    /// Generic last-factor range `[1, 2 eps^(-1/d)]` of a smooth number.
    pub fn generic_last_range(&self) -> (u64, u64) {
        (1, self.inner_range().1)
    }

    /// Integer window `[1/(4 gamma), 1/gamma]`.
    pub fn window(&self) -> (u64, u64) {
        let g = self.gamma();
        let lo = ((1.0 / (4.0 * g) - RANGE_SLACK).ceil() as u64).max(1);
        let hi = (1.0 / g + RANGE_SLACK).floor() as u64;
        (lo, hi)
    }

    /// Whether `eps^(-1/d) >= 2`.
    pub fn remark1_holds(&self) -> bool {
        (self.eps.num as u128) << self.d.min(100) <= self.eps.den as u128
    }
}

/// Integer with a stored factorization `h_1 ... h_{dbar+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SmoothProduct {
    pub value: u64,
    pub factors: Vec<u64>,
}

impl SmoothProduct {
    pub fn check_ranges(&self, p: &SmoothParams, window_last: bool) -> bool {
        let (ilo, ihi) = p.inner_range();
        let (llo, lhi) = if window_last {
            p.last_range()
        } else {
            p.generic_last_range()
        };
        let n = self.factors.len();
        n == p.dbar as usize + 1
            && self.factors.iter().product::<u64>() == self.value
            && self.factors[..n - 1]
                .iter()
                .all(|&h| (ilo..=ihi).contains(&h))
            && (llo..=lhi).contains(&self.factors[n - 1])
    }
}

/// All distinct products in the window, each with its lexicographically smallest factor list.
pub fn enumerate_smooth_products(p: &SmoothParams) -> Result<Vec<SmoothProduct>> {
    let (wlo, whi) = p.window();
    let (ilo, ihi) = p.inner_range();
    let (llo, lhi) = p.last_range();
    let mut found: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut prefix = Vec::with_capacity(p.dbar as usize + 1);
    fn dfs(
        depth: u32,
        dbar: u32,
        prod: u64,
        prefix: &mut Vec<u64>,
        ranges: ((u64, u64), (u64, u64), (u64, u64)),
        found: &mut BTreeMap<u64, Vec<u64>>,
    ) {
        let ((ilo, ihi), (llo, lhi), (wlo, whi)) = ranges;
        if depth == dbar {
            for h in llo..=lhi {
                let v = prod.saturating_mul(h);
                if v > whi {
                    break;
                }
                if v >= wlo && !found.contains_key(&v) {
                    let mut f = prefix.clone();
                    f.push(h);
                    found.insert(v, f);
                }
            }
            return;
        }
        let start = prefix.last().copied().unwrap_or(ilo).max(ilo);
        for h in start..=ihi {
            let v = prod.saturating_mul(h);
            if v > whi {
                break;
            }
            prefix.push(h);
            dfs(depth + 1, dbar, v, prefix, ranges, found);
            prefix.pop();
        }
    }
    dfs(
        0,
        p.dbar,
        1,
        &mut prefix,
        ((ilo, ihi), (llo, lhi), (wlo, whi)),
        &mut found,
    );
    if found.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no smooth products in [{wlo}, {whi}] for {p:?}"
        )));
    }
    Ok(found
        .into_iter()
        .map(|(value, factors)| SmoothProduct { value, factors })
        .collect())
}

/// Rounded input `x' = (1+gamma)^c * H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiSmoothItem {
    pub original: f64,
    pub rho_exponent: i64,
    pub product: SmoothProduct,
    /// Index of `rho_exponent` in the sorted `delta`.
    pub group_id: usize,
}

impl SemiSmoothItem {
    pub fn rounded(&self, gamma: f64) -> f64 {
        (1.0 + gamma).powi(self.rho_exponent as i32) * self.product.value as f64
    }
}

/// Output of the rounding algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rounding {
    /// Sorted distinct rho exponents.
    pub delta: Vec<i64>,
    /// One item per input value, in input order.
    pub items: Vec<SemiSmoothItem>,
    pub iterations: usize,
    pub gamma: f64,
}

/// `k` with `(1+gamma)^k <= x < (1+gamma)^(k+1)`, evaluated in binary64.
pub fn grid_exponent(x: f64, gamma: f64) -> i64 {
    let base = 1.0 + gamma;
    let mut k = (x.ln() / base.ln()).floor() as i64;
    while base.powi(k as i32) > x {
        k -= 1;
    }
    while base.powi(k as i32 + 1) <= x {
        k += 1;
    }
    k
}

/// Most frequent difference `k_i - s_v`; ties go to the smallest.
pub fn most_frequent_table_entry(x_exponents: &[i64], h_exponents: &[i64]) -> Result<(i64, u64)> {
    if x_exponents.is_empty() || h_exponents.is_empty() {
        return Err(Error::InvalidInput("empty table".into()));
    }
    let kmin = *x_exponents.iter().min().unwrap();
    let kmax = *x_exponents.iter().max().unwrap();
    let smin = *h_exponents.iter().min().unwrap();
    let smax = *h_exponents.iter().max().unwrap();
    let mut f = vec![0u64; (smax - smin) as usize + 1];
    for &s in h_exponents {
        f[(smax - s) as usize] += 1;
    }
    let mut g = vec![0u64; (kmax - kmin) as usize + 1];
    for &k in x_exponents {
        g[(k - kmin) as usize] += 1;
    }
    let prod = poly_multiply_counts(&f, &g)?;
    let (mut best, mut count) = (0usize, 0u64);
    for (e, &c) in prod.iter().enumerate() {
        if c > count {
            best = e;
            count = c;
        }
    }
    Ok((best as i64 + kmin - smax, count))
}

/// Rounds every value to `(1+gamma)^c * H` with `H` from the product window.
pub fn round_to_semismooth(x: &[f64], p: &SmoothParams) -> Result<Rounding> {
    let products = enumerate_smooth_products(p)?;
    round_with_products(x, p, &products)
}

/// `round_to_semismooth` with a precomputed product list.
pub fn round_with_products(
    x: &[f64],
    p: &SmoothParams,
    products: &[SmoothProduct],
) -> Result<Rounding> {
    let gamma = p.gamma();
    if x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(
            "rounding needs positive finite values".into(),
        ));
    }
    // One product per grid exponent; the smallest wins.
    let mut by_s: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, h) in products.iter().enumerate() {
        by_s.entry(grid_exponent(h.value as f64, gamma))
            .or_insert(i);
    }
    let s_list: Vec<i64> = by_s.keys().copied().collect();
    let mut ks: Vec<i64> = x
        .iter()
        .map(|&v| grid_exponent(v, gamma))
        .collect::<Vec<_>>();
    let k_of_input = ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut assigned: BTreeMap<i64, (i64, usize)> = BTreeMap::new();
    let mut remaining = ks;
    let mut iterations = 0;
    while !remaining.is_empty() {
        if iterations >= x.len() {
            return Err(Error::Internal(
                "rounding table not covered within |X| iterations".into(),
            ));
        }
        iterations += 1;
        let (c, _) = most_frequent_table_entry(&remaining, &s_list)?;
        remaining.retain(|&k| match by_s.get(&(k - c)) {
            Some(&hi) => {
                assigned.insert(k, (c, hi));
                false
            }
            None => true,
        });
    }
    let mut delta: Vec<i64> = assigned.values().map(|&(c, _)| c).collect();
    delta.sort_unstable();
    delta.dedup();
    let mut items = Vec::with_capacity(x.len());
    for (&v, k) in x.iter().zip(&k_of_input) {
        let (c, hi) = assigned[k];
        let item = SemiSmoothItem {
            original: v,
            rho_exponent: c,
            product: products[hi].clone(),
            group_id: delta.binary_search(&c).unwrap(),
        };
        if (v - item.rounded(gamma)).abs() > gamma * v * (1.0 + ROUNDING_TOL) {
            return Err(Error::Internal(format!(
                "rounding of {v} misses the gamma bound"
            )));
        }
        items.push(item);
    }
    Ok(Rounding {
        delta,
        items,
        iterations,
        gamma,
    })
}

/// `round_to_semismooth` over the support of an integer multiset.
pub fn round_multiset(x: &MultiSet, p: &SmoothParams) -> Result<Rounding> {
    let vals: Vec<f64> = x.support().into_iter().map(|v| v as f64).collect();
    round_to_semismooth(&vals, p)
}

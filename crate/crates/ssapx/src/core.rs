//! Shared domain types: multisets, approximate sets, witnesses, parameters and results.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("convolution length {len} exceeds limit {max}")]
    ConvolutionLimit { len: usize, max: usize },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("value {0} is not stored in this result")]
    NotStored(u64),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Nonnegative integer multiset.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSet {
    counts: BTreeMap<u64, u64>,
    total: u64,
    len: u64,
}

impl MultiSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_items(items: &[u64]) -> Result<Self> {
        let mut m = Self::new();
        for &x in items {
            m.insert(x, 1)?;
        }
        Ok(m)
    }

    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut m = Self::new();
        for (v, c) in pairs {
            m.insert(v, c)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, value: u64, count: u64) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        let add = value
            .checked_mul(count)
            .ok_or(Error::Overflow("multiset total"))?;
        self.total = self
            .total
            .checked_add(add)
            .ok_or(Error::Overflow("multiset total"))?;
        self.len += count;
        *self.counts.entry(value).or_insert(0) += count;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Cardinality counting multiplicities.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max(&self) -> Option<u64> {
        self.counts.keys().next_back().copied()
    }

    pub fn min(&self) -> Option<u64> {
        self.counts.keys().next().copied()
    }

    pub fn count(&self, value: u64) -> u64 {
        self.counts.get(&value).copied().unwrap_or(0)
    }

    /// Distinct values with multiplicities, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }

    pub fn support(&self) -> Vec<u64> {
        self.counts.keys().copied().collect()
    }

    pub fn to_vec(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len as usize);
        for (v, c) in self.iter() {
            out.extend(std::iter::repeat(v).take(c as usize));
        }
        out
    }

    pub fn is_submultiset_of(&self, other: &MultiSet) -> bool {
        self.iter().all(|(v, c)| other.count(v) >= c)
    }
}

pub fn multiset_from_items(items: &[u64]) -> Result<MultiSet> {
    MultiSet::from_items(items)
}

/// `p` with `2^p <= x < 2^(p+1)`.
pub fn pow2_floor(x: f64) -> Result<u32> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pow2_floor needs x >= 1, got {x}"
        )));
    }
    let mut p = x.log2().floor() as i64;
    while p > 0 && 2f64.powi(p as i32) > x {
        p -= 1;
    }
    while 2f64.powi(p as i32 + 1) <= x {
        p += 1;
    }
    Ok(p as u32)
}

/// `pow2_floor` for integers.
pub fn pow2_floor_u64(x: u64) -> u32 {
    debug_assert!(x >= 1);
    63 - x.leading_zeros()
}

/// Accuracy parameter held as an exact fraction `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eps {
    pub num: u64,
    pub den: u64,
}

impl Eps {
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0,1), got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    /// Exact fraction for decimal or dyadic inputs; otherwise the nearest multiple of 2^-40.
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps must lie in (0,1), got {eps}"
            )));
        }
        for k in 0..=9 {
            let den = 10u64.pow(k);
            let n = eps * den as f64;
            if (n - n.round()).abs() < 1e-9 && n.round() >= 1.0 {
                return Self::from_ratio(n.round() as u64, den);
            }
        }
        for k in 0..=40 {
            let den = 1u64 << k;
            let n = eps * den as f64;
            if (n - n.round()).abs() < 1e-12 && n.round() >= 1.0 {
                return Self::from_ratio(n.round() as u64, den);
            }
        }
        Self::from_ratio(
            (eps * (1u64 << 40) as f64).round().max(1.0) as u64,
            1u64 << 40,
        )
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn inv(&self) -> f64 {
        self.den as f64 / self.num as f64
    }

    /// `log2(1/eps)`.
    pub fn log_inv(&self) -> f64 {
        self.inv().log2()
    }
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Finite value set with the metadata of an (r,u)-approximate set with additive error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxSet {
    pub values: Vec<u64>,
    pub r: f64,
    pub u: u64,
    pub err_add: u64,
}

impl ApproxSet {
    pub fn exact(values: Vec<u64>) -> Self {
        let u = values.last().copied().unwrap_or(0);
        Self {
            values,
            r: 0.0,
            u,
            err_add: 0,
        }
    }

    /// Absolute tolerance `r*u + ERR` used by conditions (ii) and (iii).
    pub fn tolerance(&self) -> f64 {
        self.r * self.u as f64 + self.err_add as f64
    }
}

/// Checks the three conditions of an (r,u)-approximate set with additive error against `s`.
pub fn verify_apx_set(c: &ApproxSet, s: &[u64], r: f64, u: u64, err_add: u64) -> bool {
    let slack = 1e-9 * (1.0 + u as f64);
    let cap = (1.0 + r) * u as f64 + slack;
    if c.values.iter().any(|&v| v as f64 > cap) {
        return false;
    }
    let tol = r * u as f64 + err_add as f64 + slack;
    let mut truth: Vec<u64> = s.to_vec();
    truth.sort_unstable();
    truth.dedup();
    let mut vals = c.values.clone();
    vals.sort_unstable();
    vals.dedup();
    let near = |sorted: &[u64], x: u64| -> Option<u64> {
        let i = sorted.partition_point(|&y| y < x);
        let mut best = None;
        if i < sorted.len() {
            best = Some(sorted[i] - x);
        }
        if i > 0 {
            let d = x - sorted[i - 1];
            best = Some(best.map_or(d, |b: u64| b.min(d)));
        }
        best
    };
    for &v in &vals {
        match near(&truth, v) {
            Some(dist) if dist as f64 <= tol => {}
            _ => return false,
        }
    }
    for &a in truth.iter().take_while(|&&a| a <= u) {
        match near(&vals, a) {
            Some(dist) if dist as f64 <= tol => {}
            _ => return false,
        }
    }
    true
}

/// One entry of a witness: `count` copies of the item identified by `label`, each worth `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pick {
    pub label: u64,
    pub value: u64,
    pub count: u64,
}

/// Sum of `value * count` over picks.
pub fn picks_sum(picks: &[Pick]) -> u128 {
    picks
        .iter()
        .map(|p| p.value as u128 * p.count as u128)
        .sum()
}

/// Backtracking oracle: maps a stored value to a concrete item selection.
pub trait Oracle: Send + Sync {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()>;
}

/// Parameter bundle for the solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub eps: Eps,
    pub d: u32,
    pub k: u32,
}

/// Largest eps handled by the approximation pipeline.
pub const EPS_MAX: f64 = 1.0 / 16.0;

/// Path-specific constraints on `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DepthRule {
    Any,
    Even,
    MultipleOfFour,
}

impl ApproxParams {
    pub fn new(eps: Eps, d: u32, k: u32, rule: DepthRule) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("d must be positive".into()));
        }
        if k >= d {
            return Err(Error::InvalidInput(format!(
                "cut layer k={k} must be below d={d}"
            )));
        }
        match rule {
            DepthRule::Even if d % 2 != 0 => {
                return Err(Error::InvalidInput(format!("d={d} must be even")))
            }
            DepthRule::MultipleOfFour if d % 4 != 0 => {
                return Err(Error::InvalidInput(format!("d={d} must be divisible by 4")))
            }
            _ => {}
        }
        Ok(Self { eps, d, k })
    }

    /// Whether `eps <= 2^-d`, i.e. every factor range contains an integer >= 2.
    pub fn remark1_holds(&self) -> bool {
        (self.eps.num as u128) << self.d.min(100) <= self.eps.den as u128
    }
}

/// Claimed guarantees attached to a solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `value >= (1 - delta_lower) * OPT`.
    pub delta_lower: f64,
    /// `value <= (1 + delta_upper) * t`.
    pub delta_upper: f64,
    /// `max(delta_lower, delta_upper)`.
    pub delta: f64,
    /// The value is provably optimal.
    pub exact: bool,
}

impl Certificate {
    pub fn exact() -> Self {
        Self {
            exact: true,
            ..Self::default()
        }
    }

    pub fn new(delta_lower: f64, delta_upper: f64) -> Self {
        let lo = delta_lower.max(0.0);
        let hi = delta_upper.max(0.0);
        Self {
            delta_lower: lo,
            delta_upper: hi,
            delta: lo.max(hi),
            exact: false,
        }
    }
}

/// Result of a top-level solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub value: u64,
    /// Original item indices with multiplicities, ascending by index.
    pub items: Vec<(usize, u64)>,
    pub witness: MultiSet,
    pub certificate: Certificate,
    pub timings: Vec<(String, f64)>,
    pub trace: Vec<(String, String)>,
}

impl SolveResult {
    /// Builds a result from item indices into `input`.
    pub fn from_items(
        input: &[u64],
        items: Vec<(usize, u64)>,
        certificate: Certificate,
    ) -> Result<Self> {
        let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
        for (i, c) in items {
            if i >= input.len() {
                return Err(Error::Internal(format!("item index {i} out of range")));
            }
            if c > 0 {
                *merged.entry(i).or_insert(0) += c;
            }
        }
        let items: Vec<(usize, u64)> = merged.into_iter().collect();
        let witness = MultiSet::from_counts(items.iter().map(|&(i, c)| (input[i], c)))?;
        Ok(Self {
            value: witness.total(),
            items,
            witness,
            certificate,
            timings: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn empty_exact() -> Self {
        Self {
            certificate: Certificate::exact(),
            ..Self::default()
        }
    }
}

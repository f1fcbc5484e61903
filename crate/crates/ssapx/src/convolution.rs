//! Exact boolean and counting convolution over number-theoretic transforms.

use crate::core::{Error, Result};

/// Default upper bound on `len(a) + len(b)`.
pub const MAX_LEN: usize = 1 << 27;

const P1: u64 = 998_244_353;
const P2: u64 = 167_772_161;
const G: u64 = 3;
/// Largest transform length both primes support.
const NTT_MAX: usize = 1 << 23;

/// Dense 0/1 array over `[0, len)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorArray {
    words: Vec<u64>,
    len: usize,
}

impl IndicatorArray {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Indicator of `values`; length is `max + 1`.
    pub fn from_values(values: &[u64]) -> Self {
        let len = values.iter().max().map_or(0, |&m| m as usize + 1);
        let mut a = Self::zeros(len);
        for &v in values {
            a.set(v as usize);
        }
        a
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn set(&mut self, i: usize) {
        assert!(
            i < self.len,
            "index {i} outside indicator of length {}",
            self.len
        );
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set positions, ascending.
    pub fn ones(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.count_ones());
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                out.push((wi * 64 + b) as u64);
                w &= w - 1;
            }
        }
        out
    }

    /// Clears every position `> cap`.
    pub fn truncate(&mut self, cap: usize) {
        if cap + 1 >= self.len {
            return;
        }
        let new_len = cap + 1;
        self.words.truncate(new_len.div_ceil(64));
        let rem = new_len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        self.len = new_len;
    }

    fn or_shifted(&mut self, src: &IndicatorArray, shift: usize) {
        let ws = shift / 64;
        let bs = shift % 64;
        for (i, &w) in src.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let lo = i + ws;
            if lo >= self.words.len() {
                break;
            }
            self.words[lo] |= w << bs;
            if bs != 0 && lo + 1 < self.words.len() {
                self.words[lo + 1] |= w >> (64 - bs);
            }
        }
    }
}

/// Support of the sumset: bit `s` is set iff `a[i] = b[j] = 1` for some `i + j = s`.
pub fn bool_convolve(a: &IndicatorArray, b: &IndicatorArray) -> Result<IndicatorArray> {
    bool_convolve_limited(a, b, MAX_LEN)
}

pub fn bool_convolve_limited(
    a: &IndicatorArray,
    b: &IndicatorArray,
    max_len: usize,
) -> Result<IndicatorArray> {
    if a.len + b.len > max_len {
        return Err(Error::ConvolutionLimit {
            len: a.len + b.len,
            max: max_len,
        });
    }
    if a.is_empty() || b.is_empty() {
        return Ok(IndicatorArray::zeros(0));
    }
    let out_len = a.len + b.len - 1;
    let (small, big) = if a.count_ones() <= b.count_ones() {
        (a, b)
    } else {
        (b, a)
    };
    let k = small.count_ones();
    let n = out_len.next_power_of_two();
    let shift_cost = k.saturating_mul(big.words.len());
    let ntt_cost = 3 * n * (n.trailing_zeros() as usize + 1);
    let mut out = IndicatorArray::zeros(out_len);
    if shift_cost <= ntt_cost || n > NTT_MAX {
        for s in small.ones() {
            out.or_shifted(big, s as usize);
        }
        return Ok(out);
    }
    let fa: Vec<u64> = (0..a.len).map(|i| a.get(i) as u64).collect();
    let fb: Vec<u64> = (0..b.len).map(|i| b.get(i) as u64).collect();
    // Pair counts are at most min(len) < P1, so a nonzero residue is a nonzero count.
    let prod = ntt_multiply(&fa, &fb, P1);
    for (i, &c) in prod.iter().enumerate().take(out_len) {
        if c != 0 {
            out.set(i);
        }
    }
    Ok(out)
}

/// Exact integer coefficients of `f * g`.
pub fn poly_multiply_counts(f: &[u64], g: &[u64]) -> Result<Vec<u64>> {
    if f.is_empty() || g.is_empty() {
        return Ok(Vec::new());
    }
    if f.len() + g.len() > MAX_LEN {
        return Err(Error::ConvolutionLimit {
            len: f.len() + g.len(),
            max: MAX_LEN,
        });
    }
    let sum = |v: &[u64]| v.iter().try_fold(0u64, |acc, &x| acc.checked_add(x));
    let (sf, sg) = match (sum(f), sum(g)) {
        (Some(a), Some(b)) => (a as u128, b as u128),
        _ => return Err(Error::Overflow("counting convolution")),
    };
    let mf = *f.iter().max().unwrap() as u128;
    let mg = *g.iter().max().unwrap() as u128;
    let bound = (sf * mg).min(sg * mf);
    if f.len().min(g.len()) <= 32 {
        let mut out = vec![0u64; f.len() + g.len() - 1];
        for (i, &x) in f.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in g.iter().enumerate() {
                out[i + j] = x
                    .checked_mul(y)
                    .and_then(|p| out[i + j].checked_add(p))
                    .ok_or(Error::Overflow("counting convolution"))?;
            }
        }
        return Ok(out);
    }
    if (f.len() + g.len()).next_power_of_two() > NTT_MAX {
        return Err(Error::ConvolutionLimit {
            len: f.len() + g.len(),
            max: NTT_MAX,
        });
    }
    if bound < P1 as u128 {
        let mut r = ntt_multiply(f, g, P1);
        r.truncate(f.len() + g.len() - 1);
        return Ok(r);
    }
    if bound >= P1 as u128 * P2 as u128 {
        return Err(Error::Overflow("counting convolution"));
    }
    let r1 = ntt_multiply(f, g, P1);
    let r2 = ntt_multiply(f, g, P2);
    let inv = pow_mod(P1 % P2, P2 - 2, P2);
    let out = r1
        .iter()
        .zip(&r2)
        .take(f.len() + g.len() - 1)
        .map(|(&a, &b)| {
            let k = (b + P2 - a % P2) % P2 * inv % P2;
            a + P1 * k
        })
        .collect();
    Ok(out)
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn ntt(a: &mut [u64], invert: bool, p: u64) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let mut w = pow_mod(G, (p - 1) / len as u64, p);
        if invert {
            w = pow_mod(w, p - 2, p);
        }
        let half = len / 2;
        let mut tw = Vec::with_capacity(half);
        let mut cur = 1u64;
        for _ in 0..half {
            tw.push(cur);
            cur = cur * w % p;
        }
        for chunk in a.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for k in 0..half {
                let u = lo[k];
                let v = hi[k] * tw[k] % p;
                lo[k] = if u + v >= p { u + v - p } else { u + v };
                hi[k] = if u >= v { u - v } else { u + p - v };
            }
        }
        len <<= 1;
    }
    if invert {
        let ninv = pow_mod(n as u64, p - 2, p);
        for x in a.iter_mut() {
            *x = *x * ninv % p;
        }
    }
}

fn ntt_multiply(f: &[u64], g: &[u64], p: u64) -> Vec<u64> {
    let n = (f.len() + g.len() - 1).next_power_of_two();
    let mut fa = vec![0u64; n];
    let mut fb = vec![0u64; n];
    for (d, &s) in fa.iter_mut().zip(f) {
        *d = s % p;
    }
    for (d, &s) in fb.iter_mut().zip(g) {
        *d = s % p;
    }
    ntt(&mut fa, false, p);
    ntt(&mut fb, false, p);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * y % p;
    }
    ntt(&mut fa, true, p);
    fa
}

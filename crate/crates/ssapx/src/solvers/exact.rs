//! Exact dynamic programs used for coarse `eps` and as reference oracles.

use crate::core::{Certificate, Error, Result, SolveResult};

/// Default limit on `items * (t + 1)` table cells.
pub const EXACT_CELLS: u64 = 1 << 28;

fn bit(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

/// `dst = src | (src << shift)`, truncated to the row length.
fn shift_or(src: &[u64], shift: usize, dst: &mut [u64]) {
    dst.copy_from_slice(src);
    let (ws, bs) = (shift / 64, shift % 64);
    for i in (ws..dst.len()).rev() {
        let lo = src[i - ws] << bs;
        let hi = if bs != 0 && i > ws {
            src[i - ws - 1] >> (64 - bs)
        } else {
            0
        };
        dst[i] |= lo | hi;
    }
}

/// Best subset of `x` with sum `<= t`, by a bitset DP with one row per item.
pub fn exact_subset_sum(x: &[u64], t: u64, max_cells: u64) -> Result<SolveResult> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0 && x[i] <= t).collect();
    let cells = (idx.len() as u128 + 1) * (t as u128 + 1);
    if cells > max_cells as u128 {
        return Err(Error::Budget(format!("exact DP needs {cells} cells")));
    }
    let len = t as usize + 1;
    let words = len.div_ceil(64);
    let tail = if len % 64 == 0 {
        u64::MAX
    } else {
        (1u64 << (len % 64)) - 1
    };
    let mut rows = vec![vec![0u64; words]];
    rows[0][0] = 1;
    for &i in &idx {
        let mut next = vec![0u64; words];
        shift_or(rows.last().unwrap(), x[i] as usize, &mut next);
        *next.last_mut().unwrap() &= tail;
        rows.push(next);
    }
    let last = rows.last().unwrap();
    let mut s = (0..len).rev().find(|&s| bit(last, s)).unwrap_or(0);
    let mut items = Vec::new();
    for k in (0..idx.len()).rev() {
        if !bit(&rows[k], s) {
            items.push((idx[k], 1));
            s -= x[idx[k]] as usize;
        }
    }
    SolveResult::from_items(x, items, Certificate::exact())
}

/// Best multiset of `x` with sum `<= t`.
pub fn exact_unbounded(x: &[u64], t: u64, max_cells: u64) -> Result<SolveResult> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0 && x[i] <= t).collect();
    let cells = (idx.len() as u128 + 1) * (t as u128 + 1);
    if cells > max_cells as u128 {
        return Err(Error::Budget(format!("exact DP needs {cells} cells")));
    }
    let len = t as usize + 1;
    let mut from = vec![u32::MAX; len];
    let mut reach = vec![false; len];
    reach[0] = true;
    for (k, &i) in idx.iter().enumerate() {
        let v = x[i] as usize;
        for s in v..len {
            if !reach[s] && reach[s - v] {
                reach[s] = true;
                from[s] = k as u32;
            }
        }
    }
    let mut s = (0..len).rev().find(|&s| reach[s]).unwrap_or(0);
    let mut items = Vec::new();
    while s > 0 {
        let i = idx[from[s] as usize];
        items.push((i, 1));
        s -= x[i] as usize;
    }
    SolveResult::from_items(x, items, Certificate::exact())
}

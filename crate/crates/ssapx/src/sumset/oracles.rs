//! Leaf oracles that translate stored values into item picks.

use std::sync::Arc;

use crate::core::{Error, Oracle, Pick, Result};

/// Returns the chosen value itself as one pick labelled with the set index.
pub struct SetLeaf {
    pub label: u64,
}

impl Oracle for SetLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        if value != 0 {
            out.push(Pick {
                label: self.label,
                value,
                count: 1,
            });
        }
        Ok(())
    }
}

/// Leaf `{0, unit, 2*unit, ...}`: the value `k*unit` means `k` copies of one item.
pub struct CopiesLeaf {
    pub label: u64,
    pub unit: u64,
    /// Value reported in picks (the item's value in its own domain).
    pub item_value: u64,
}

impl CopiesLeaf {
    pub fn new(label: u64, unit: u64) -> Self {
        Self {
            label,
            unit,
            item_value: unit,
        }
    }
}

impl Oracle for CopiesLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        if value == 0 {
            return Ok(());
        }
        if self.unit == 0 || value % self.unit != 0 {
            return Err(Error::NotStored(value));
        }
        out.push(Pick {
            label: self.label,
            value: self.item_value,
            count: value / self.unit,
        });
        Ok(())
    }
}

/// Explicit value → picks dictionary.
pub struct TableLeaf {
    values: Vec<u64>,
    picks: Vec<Vec<Pick>>,
}

impl TableLeaf {
    pub fn new(mut entries: Vec<(u64, Vec<Pick>)>) -> Self {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by_key(|e| e.0);
        let (values, picks) = entries.into_iter().unzip();
        Self { values, picks }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

impl Oracle for TableLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let i = self
            .values
            .binary_search(&value)
            .map_err(|_| Error::NotStored(value))?;
        out.extend_from_slice(&self.picks[i]);
        Ok(())
    }
}

/// Maps each outer value to an inner value and delegates.
pub struct MappedLeaf {
    outer: Vec<u64>,
    inner: Vec<u64>,
    oracle: Arc<dyn Oracle>,
}

impl MappedLeaf {
    /// `pairs` holds (outer, inner); outer values must be distinct.
    pub fn new(mut pairs: Vec<(u64, u64)>, oracle: Arc<dyn Oracle>) -> Result<Self> {
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Internal(
                "mapped leaf has colliding outer values".into(),
            ));
        }
        let (outer, inner) = pairs.into_iter().unzip();
        Ok(Self {
            outer,
            inner,
            oracle,
        })
    }

    pub fn outer_values(&self) -> &[u64] {
        &self.outer
    }
}

impl Oracle for MappedLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let i = self
            .outer
            .binary_search(&value)
            .map_err(|_| Error::NotStored(value))?;
        self.oracle.backtrack(self.inner[i], out)
    }
}

/// Value `factor * x` for an inner value `x`; pick counts scale by `factor`.
pub struct MultiplyLeaf {
    pub factor: u64,
    pub oracle: Arc<dyn Oracle>,
}

impl Oracle for MultiplyLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        if self.factor == 0 || value % self.factor != 0 {
            return Err(Error::NotStored(value));
        }
        let start = out.len();
        self.oracle.backtrack(value / self.factor, out)?;
        for p in &mut out[start..] {
            p.count *= self.factor;
        }
        Ok(())
    }
}

/// Value `total - x`; returns the complement of the inner selection within `all`.
pub struct ComplementLeaf {
    pub total: u64,
    pub all: Vec<Pick>,
    pub oracle: Arc<dyn Oracle>,
}

impl Oracle for ComplementLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let inner_value = self
            .total
            .checked_sub(value)
            .ok_or(Error::NotStored(value))?;
        let mut inner = Vec::new();
        self.oracle.backtrack(inner_value, &mut inner)?;
        for p in &self.all {
            let used: u64 = inner
                .iter()
                .filter(|q| q.label == p.label)
                .map(|q| q.count)
                .sum();
            if used > p.count {
                return Err(Error::Internal(
                    "complement of a non-subset selection".into(),
                ));
            }
            if used < p.count {
                out.push(Pick {
                    count: p.count - used,
                    ..*p
                });
            }
        }
        Ok(())
    }
}

/// Dispatches each value to the first source that stores it.
pub struct UnionLeaf {
    values: Vec<u64>,
    source: Vec<usize>,
    oracles: Vec<Arc<dyn Oracle>>,
}

impl UnionLeaf {
    /// Earlier sources win on shared values.
    pub fn new(sources: Vec<(Vec<u64>, Arc<dyn Oracle>)>) -> Self {
        let mut tagged: Vec<(u64, usize)> = Vec::new();
        let mut oracles = Vec::new();
        for (i, (vals, o)) in sources.into_iter().enumerate() {
            tagged.extend(vals.into_iter().map(|v| (v, i)));
            oracles.push(o);
        }
        tagged.sort_unstable();
        tagged.dedup_by_key(|t| t.0);
        let (values, source) = tagged.into_iter().unzip();
        Self {
            values,
            source,
            oracles,
        }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

impl Oracle for UnionLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let i = self
            .values
            .binary_search(&value)
            .map_err(|_| Error::NotStored(value))?;
        self.oracles[self.source[i]].backtrack(value, out)
    }
}

/// Relabels picks through a table.
pub struct RelabelLeaf {
    pub labels: Vec<u64>,
    pub oracle: Arc<dyn Oracle>,
}

impl Oracle for RelabelLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let start = out.len();
        self.oracle.backtrack(value, out)?;
        for p in &mut out[start..] {
            p.label = *self
                .labels
                .get(p.label as usize)
                .ok_or_else(|| Error::Internal(format!("label {} has no mapping", p.label)))?;
        }
        Ok(())
    }
}

/// Expands a pick of `k` copies of label `l` into one copy each of `table[l][..k]`.
pub struct ExpandLeaf {
    pub table: Vec<Vec<Pick>>,
    pub oracle: Arc<dyn Oracle>,
}

impl Oracle for ExpandLeaf {
    fn backtrack(&self, value: u64, out: &mut Vec<Pick>) -> Result<()> {
        let mut inner = Vec::new();
        self.oracle.backtrack(value, &mut inner)?;
        for p in inner {
            let row = self
                .table
                .get(p.label as usize)
                .filter(|r| r.len() as u64 >= p.count)
                .ok_or_else(|| {
                    Error::Internal(format!(
                        "label {} cannot expand {} copies",
                        p.label, p.count
                    ))
                })?;
            out.extend_from_slice(&row[..p.count as usize]);
        }
        Ok(())
    }
}

/// Sums the counts of equal (label, value) picks, sorted by label.
pub fn normalize_picks(mut picks: Vec<Pick>) -> Vec<Pick> {
    picks.sort_by_key(|p| (p.label, p.value));
    let mut out: Vec<Pick> = Vec::with_capacity(picks.len());
    for p in picks {
        match out.last_mut() {
            Some(q) if q.label == p.label && q.value == p.value => q.count += p.count,
            _ => out.push(p),
        }
    }
    out
}

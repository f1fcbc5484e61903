//! Weak approximation schemes for SUBSET SUM, PARTITION and UNBOUNDED SUBSET SUM.
//!
//! The pipeline scales and rounds the input to semi-smooth numbers, approximates the
//! subset sums of each item group, merges the groups with approximate sumsets and
//! backtracks a witness through the merge trees to the original items.

pub mod convolution;
pub mod core;
pub mod dense;
mod par;
pub mod preprocess;
pub mod smooth;
pub mod solvers;
pub mod sumset;

pub use crate::core::{ApproxSet, Eps, Error, MultiSet, Oracle, Pick, Result, SolveResult};
pub use crate::solvers::{
    partition_approx, subset_sum_weak_approx, unbounded_subset_sum_weak_approx,
};

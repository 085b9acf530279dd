// `!(a > b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod features;
pub mod formats;
pub mod geometry;
pub mod kdtree;
pub mod matcher;
pub mod refindex;
pub mod skeleton;
pub mod synth;

#[cfg(test)]
mod testutil;

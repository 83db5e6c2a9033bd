//! A computational laboratory for a derived-from-Anosov diffeomorphism of the
//! 3-torus: construction and verification of the map, its semiconjugacy to
//! the linear automorphism, combinatorial box dynamics, and orbit statistics.

// Index loops mirror the matrix formulas; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod boxdyn;
pub mod da_family;
pub mod invariant_analysis;
pub mod rng;
pub mod semiconj;
pub mod torus_core;

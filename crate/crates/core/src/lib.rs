#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod direct_search;
pub mod error;
pub mod experiment;
pub mod gda;
pub mod minmax;
pub mod objective;
pub mod point;
pub mod problems;
pub mod rng;
pub mod spanning;
pub mod stochastic;
pub mod theory;
pub mod trace;
pub mod validate;

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod sketch;
pub mod dpp;
pub mod leverage;
pub mod surrogate;
pub mod loss;
pub mod distributed;
pub mod experiments;

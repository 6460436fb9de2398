//! Stochastic solvers for nonconvex–PL minimax problems
//!
//! `min_x max_y J(x, y) = (1/K) Σ_k J_k(x, y)` where `J(x, ·)` satisfies a
//! Polyak-Łojasiewicz condition. The crate provides
//!
//! * [`problems`]: stochastic gradient / Hessian-vector-product oracles
//!   (an analytic quadratic and a distributionally robust logistic
//!   regression) plus LIBSVM ingestion,
//! * [`topology`]: communication graphs and doubly stochastic mixing matrices,
//! * [`momentum`]: normalization, Hessian-corrected momentum and adaptive
//!   scaling primitives,
//! * [`solvers`]: AdaHMM (single agent, adaptive), Fed-MiMA (server based),
//!   Local-DiMA (fully decentralized) and a plain stochastic GDA baseline,
//! * [`schedule`]: rate-optimal step-size schedules,
//! * [`metrics`]: stationarity, consensus and envelope diagnostics.

// `!(v > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod momentum;
pub mod problems;
pub mod schedule;
pub mod solvers;
pub mod topology;

pub use error::{Error, Result};
pub use problems::{PointPair, ProblemOracle};

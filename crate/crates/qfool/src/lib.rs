//! Query-efficient decision-based adversarial attacks.
//!
//! Everything here works against a hard-label black box: the attacker sees
//! only `point → top-1 label` and tries to find the smallest ℓ₂ perturbation
//! that changes (or hits) a label within a query budget. The toolkit
//! provides the boundary-walk attacks (non-targeted and targeted, full-space
//! or low-frequency DCT subspace), two weaker baselines for comparison,
//! analytic oracles with closed-form geometry for validation, and a
//! reproducible benchmark harness.
//!
//! Start with the runnable programs in `examples/` — each one demonstrates a
//! single capability end to end — or the `qfool` binary for the `attack`,
//! `bench`, and `gen` subcommands.

pub mod attack;
pub mod baseline;
mod binio;
pub mod config;
pub mod dataset;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod ledger;
pub mod metrics;
pub mod oracle;
pub mod point;
pub mod subspace;
pub mod trace;
pub mod vecmath;

pub mod cli;

pub use config::{AttackConfig, ResolvedConfig};
pub use ledger::{Phase, QueryLedger};
pub use oracle::{DecisionOracle, OracleError};
pub use point::{Bounds, Domain, Label, Point, Shape};
pub use trace::AttackTrace;

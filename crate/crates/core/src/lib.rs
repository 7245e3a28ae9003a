//! Multistage linear programming by cutting planes with inexact cuts.
//!
//! The crate provides deterministic (IDDP) and stochastic (ISDDP) nested
//! decomposition engines in which every stage subproblem may be solved only
//! approximately, together with brute-force oracles used to check them and a
//! portfolio benchmark generator.

pub mod lp;
pub mod cuts;
pub mod engine;
pub mod model;
pub mod oracle;
pub mod schedules;
pub mod toys;
pub mod portfolio;
pub mod experiment;

//! Exact solvers for the single-depot multiple traveling salesman problem
//! (MTSP) and its fairness-constrained variants.
//!
//! The crate is layered bottom-up:
//!
//! - [`instance`]: TSPLIB / JSON ingestion and validated cost matrices.
//! - [`metrics`]: Gini, Jain and ε-fair indices plus derived quantities.
//! - [`lp`]: a self-contained bounded-variable simplex used for relaxations.
//! - [`formulation`]: the edge/visit/length model and its variants.
//! - [`separation`]: subtour-elimination cut separation.
//! - [`oa`]: tangent cuts for the power cones and the second-order cone.
//! - [`bnc`]: the branch-and-cut driver.
//! - [`oracle`]: brute-force ground truth for small instances.
//! - [`pareto`]: parameter sweeps and feasibility-boundary search.

pub mod bnc;
pub mod formulation;
pub mod instance;
pub mod lp;
pub mod metrics;
pub mod oa;
pub mod oracle;
pub mod pareto;
pub mod separation;

mod error;

pub use bnc::{solve, SolveOutcome, SolveParams, SolveStats, Termination};
pub use error::Error;
pub use formulation::{ModelSpec, Solution, Variant};
pub use instance::{Instance, Metric};

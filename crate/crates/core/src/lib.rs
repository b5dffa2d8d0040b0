//! Nash equilibria of discrete-time, finite-horizon mean-field games through
//! occupation-measure optimization.
//!
//! A mean-field game is solved by minimizing a single smooth objective over a
//! product of simple convex sets (per-time simplices for the mean-field flow, a
//! capped nonnegative orthant for the advantage variables, a Euclidean ball for
//! the value variables). Zero-objective points are exactly the Nash equilibria,
//! and small objective values certify small exploitability.
//!
//! The crate is organized bottom-up:
//!
//! - [`mdp`]: finite-horizon tabular MDPs (dynamic programming, occupation
//!   measures, the occupation-measure LP).
//! - [`game`]: the mean-field game interface, flow propagation, exploitability.
//! - [`formulation`]: the optimization problem itself (system matrices,
//!   objective, gradient, warm start).
//! - [`projection`]: Euclidean projections onto the feasible set.
//! - [`optim`]: projected gradient, stochastic, Adam/NAdam and reparametrized
//!   solvers.
//! - [`lcp`]: dense simplex LP and the support-enumeration solver for
//!   linear-reward games.
//! - [`zoo`]: built-in games.
//! - [`baselines`]: fictitious play and online mirror descent.
//! - [`bench`]: config-driven experiment runner.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod formulation;
pub mod game;
pub mod io;
pub mod lcp;
pub mod mdp;
pub mod optim;
pub mod projection;
pub mod types;
pub mod zoo;

pub use error::{Error, Result};
pub use formulation::{ObjectiveBreakdown, ThetaPoint};
pub use game::MeanFieldGame;
pub use types::{Dims, MeanFieldFlow, PolicySequence};

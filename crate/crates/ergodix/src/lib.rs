//! Ergodicity certification and ergodic eigenproblem solving for zero-sum
//! stochastic games with finite state space.
//!
//! The library answers two questions about the dynamic programming operator
//! `T` of such a game (or any monotone, additively homogeneous map given in
//! closed form):
//!
//! - **Is the game ergodic?** [`ergodicity`] builds a pair of directed
//!   hypergraphs from the growth of `T` at infinity and scans for nontrivial
//!   conjugate subset pairs. If none exist, the ergodic equation
//!   `g + T(u) = lambda * 1 + u` is solvable for *every* payment perturbation
//!   `g`, so the mean payoff never depends on the initial state.
//! - **What are the mean payoff and optimal strategies?** [`solver`] computes
//!   eigenpairs by damped fixed-point iteration, bounds the mean payoff via
//!   slice certificates, extracts epsilon-optimal stationary strategies and
//!   validates them by seeded Monte Carlo rollouts.
//!
//! Operators enter as finite game tables ([`GameModel`]), log-sum-exp rows
//! ([`RiskSensitiveModel`]), per-coordinate expressions
//! ([`expr::OperatorSpec`]) or the builtin reference instance
//! ([`BuiltinExample`]).
//!
//! Subset enumeration, hypergraph probing and Monte Carlo trials are
//! data-parallel via rayon under the default `parallel` feature; disabling it
//! yields an equivalent sequential build with identical outputs.

pub mod ergodicity;
pub mod error;
pub mod expr;
pub mod hypergraph;
pub mod model;
pub mod operator;
pub mod solver;
pub mod state_set;

mod par;

#[doc(hidden)]
pub mod testing;

pub use ergodicity::{
    build_pair_finite, build_pair_probed, certify, find_nontrivial_conjugate,
    recession_fixed_point_check, ConjugatePair, ErgodicityCertificate, HypergraphPair,
    ProbeSchedule, Provenance, RecessionCheck, Verdict,
};
pub use error::{Error, Result};
pub use expr::{parse_expr, Expr, OperatorSpec};
pub use hypergraph::{Hyperarc, Hypergraph, HypergraphBuilder, ReachStats};
pub use model::{
    GameModel, MaxAction, MinAction, RiskSensitiveModel, StationaryStrategyPair, STOCHASTIC_TOL,
};
pub use operator::{
    h, hilbert_seminorm, recession_probe, validate_axioms, AxiomKind, AxiomReport, AxiomViolation,
    BuiltinExample, Opaque, RecessionOfGame, ShapleyOperator, Shifted, Sign,
};
pub use solver::{
    extract_policies, simulate_stationary, slice_check, solve_ergodic, value_iteration, Eigenpair,
    MeanPayoffEstimate, SimulationSummary, SliceCertificate, StateEstimate,
};
pub use state_set::StateSet;

//! Finite game tables and the operators they induce.
//!
//! A [`GameModel`] stores, per state, the minimizer's actions, and per
//! minimizer action the maximizer's replies, each with a payment and a
//! row-stochastic transition vector. The one-step dynamic programming map
//! (min over the first player's actions of the max over the second player's
//! replies of payment plus expected continuation) is exposed through
//! [`GameModel::apply`], its payment-free counterpart through
//! [`GameModel::recession_apply`].

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(transition) - 1` accepted at construction.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// One reply of the maximizing player: payment received plus the transition
/// law to the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAction {
    pub name: String,
    pub payment: f64,
    pub transition: Vec<f64>,
}

impl MaxAction {
    pub fn new(name: impl Into<String>, payment: f64, transition: Vec<f64>) -> Self {
        MaxAction {
            name: name.into(),
            payment,
            transition,
        }
    }
}

/// One action of the minimizing player together with every available reply.
#[derive(Debug, Clone, PartialEq)]
pub struct MinAction {
    pub name: String,
    pub max_actions: Vec<MaxAction>,
}

impl MinAction {
    pub fn new(name: impl Into<String>, max_actions: Vec<MaxAction>) -> Self {
        MinAction {
            name: name.into(),
            max_actions,
        }
    }
}

/// A zero-sum stochastic game with finite state space and finite action sets.
///
/// Immutable after construction; all invariants (nonempty action sets,
/// row-stochastic transitions of the right length) are checked in
/// [`GameModel::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct GameModel {
    states: Vec<Vec<MinAction>>,
}

impl GameModel {
    /// Validates and freezes the game tables. Transition rows must sum to 1
    /// within [`STOCHASTIC_TOL`]; use [`GameModel::new_renormalized`] to accept
    /// and rescale inexact rows instead.
    pub fn new(states: Vec<Vec<MinAction>>) -> Result<Self> {
        Self::build(states, false)
    }

    /// Like [`GameModel::new`] but rescales each transition row by its sum.
    /// Rows must still be nonnegative with positive sum.
    pub fn new_renormalized(states: Vec<Vec<MinAction>>) -> Result<Self> {
        Self::build(states, true)
    }

    fn build(mut states: Vec<Vec<MinAction>>, renormalize: bool) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidModel("state count must be at least 1".into()));
        }
        for (i, actions) in states.iter_mut().enumerate() {
            if actions.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "state {} has no minimizer actions",
                    i + 1
                )));
            }
            for a in actions.iter_mut() {
                if a.max_actions.is_empty() {
                    return Err(Error::InvalidModel(format!(
                        "state {} action '{}' has no maximizer replies",
                        i + 1,
                        a.name
                    )));
                }
                for b in a.max_actions.iter_mut() {
                    if !b.payment.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "state {} action '{}/{}' has non-finite payment",
                            i + 1,
                            a.name,
                            b.name
                        )));
                    }
                    if b.transition.len() != n {
                        return Err(Error::InvalidModel(format!(
                            "state {} action '{}/{}': transition has length {}, expected {}",
                            i + 1,
                            a.name,
                            b.name,
                            b.transition.len(),
                            n
                        )));
                    }
                    let mut sum = 0.0;
                    for &p in &b.transition {
                        if !p.is_finite() || p < 0.0 {
                            return Err(Error::InvalidModel(format!(
                                "state {} action '{}/{}': transition entry {} is not a probability",
                                i + 1,
                                a.name,
                                b.name,
                                p
                            )));
                        }
                        sum += p;
                    }
                    if renormalize {
                        if sum <= 0.0 {
                            return Err(Error::InvalidModel(format!(
                                "state {} action '{}/{}': transition row sums to 0",
                                i + 1,
                                a.name,
                                b.name
                            )));
                        }
                        for p in b.transition.iter_mut() {
                            *p /= sum;
                        }
                    } else if (sum - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidModel(format!(
                            "state {} action '{}/{}': transition row sums to {}, not 1",
                            i + 1,
                            a.name,
                            b.name,
                            sum
                        )));
                    }
                }
            }
        }
        Ok(GameModel { states })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Minimizer actions available in 0-based state `i`.
    pub fn actions(&self, i: usize) -> &[MinAction] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<MinAction>] {
        &self.states
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// One dynamic programming step: coordinate `i` is
    /// `min_a max_b (payment + transition . x)`. Ties never affect the value;
    /// action selection with deterministic tie-breaking lives in
    /// [`crate::solver::extract_policies`].
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self
            .states
            .iter()
            .map(|actions| {
                actions
                    .iter()
                    .map(|a| {
                        a.max_actions
                            .iter()
                            .map(|b| b.payment + dot(&b.transition, x))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// The payment-free map `min_a max_b (transition . x)`, the exact limit of
    /// `apply(alpha * x) / alpha` for bounded payments.
    pub fn recession_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self
            .states
            .iter()
            .map(|actions| {
                actions
                    .iter()
                    .map(|a| {
                        a.max_actions
                            .iter()
                            .map(|b| dot(&b.transition, x))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// Probability mass that action pair `(a, b)` in 0-based state `i` sends
    /// into the 0-based member set `members`.
    pub(crate) fn mass_on(&self, i: usize, a: usize, b: usize, members: &[usize]) -> f64 {
        let t = &self.states[i][a].max_actions[b].transition;
        members.iter().map(|&j| t[j]).sum()
    }
}

pub(crate) fn dot(p: &[f64], x: &[f64]) -> f64 {
    p.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// A nonnegative square matrix without zero rows, inducing the coordinate map
/// `x -> log(sum_j M[i][j] * exp(x[j]))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSensitiveModel {
    matrix: Vec<Vec<f64>>,
    // Per row, the column indices with a strictly positive entry.
    support: Vec<Vec<usize>>,
}

impl RiskSensitiveModel {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidModel("matrix must be at least 1x1".into()));
        }
        let mut support = Vec::with_capacity(n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "row {} has length {}, expected {}",
                    i + 1,
                    row.len(),
                    n
                )));
            }
            let mut supp = Vec::new();
            for (j, &m) in row.iter().enumerate() {
                if !m.is_finite() || m < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "entry ({}, {}) = {} is not a nonnegative real",
                        i + 1,
                        j + 1,
                        m
                    )));
                }
                if m > 0.0 {
                    supp.push(j);
                }
            }
            if supp.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "row {} is identically zero",
                    i + 1
                )));
            }
            support.push(supp);
        }
        Ok(RiskSensitiveModel { matrix, support })
    }

    pub fn n(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub(crate) fn support(&self, i: usize) -> &[usize] {
        &self.support[i]
    }

    /// Log-sum-exp over each row, shifted by the row's max exponent so large
    /// arguments never overflow. Zero entries are skipped entirely.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(self
            .support
            .iter()
            .enumerate()
            .map(|(i, supp)| {
                let m = supp.iter().map(|&j| x[j]).fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = supp
                    .iter()
                    .map(|&j| self.matrix[i][j] * (x[j] - m).exp())
                    .sum();
                m + s.ln()
            })
            .collect())
    }
}

/// A stationary strategy for each player: the minimizer commits to one action
/// per state, the maximizer to one reply per (state, minimizer action).
/// `epsilon` records the optimality slack the pair was extracted with.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStrategyPair {
    min_choice: Vec<usize>,
    max_response: Vec<Vec<usize>>,
    epsilon: f64,
}

impl StationaryStrategyPair {
    pub fn new(
        game: &GameModel,
        min_choice: Vec<usize>,
        max_response: Vec<Vec<usize>>,
        epsilon: f64,
    ) -> Result<Self> {
        let n = game.n();
        if min_choice.len() != n || max_response.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: min_choice.len(),
            });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidArgument("epsilon must be nonnegative".into()));
        }
        for i in 0..n {
            let actions = game.actions(i);
            if min_choice[i] >= actions.len() || max_response[i].len() != actions.len() {
                return Err(Error::InvalidArgument(format!(
                    "strategy indices out of range in state {}",
                    i + 1
                )));
            }
            for (a, &b) in max_response[i].iter().enumerate() {
                if b >= actions[a].max_actions.len() {
                    return Err(Error::InvalidArgument(format!(
                        "maximizer response out of range in state {} action {}",
                        i + 1,
                        a
                    )));
                }
            }
        }
        Ok(StationaryStrategyPair {
            min_choice,
            max_response,
            epsilon,
        })
    }

    /// 0-based minimizer action chosen in 0-based state `i`.
    pub fn min_action(&self, i: usize) -> usize {
        self.min_choice[i]
    }

    /// 0-based maximizer reply to minimizer action `a` in state `i`.
    pub fn max_reply(&self, i: usize, a: usize) -> usize {
        self.max_response[i][a]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

//! Value iteration, the ergodic eigenproblem, slice certificates, policy
//! extraction and Monte Carlo validation.
//!
//! The eigensolver runs a damped, normalized fixed-point iteration
//! (`x <- x/2 + (T(x) - mean(T(x)))/2`): damping suppresses the period-two
//! oscillation min/max operators are prone to, and the mean-zero gauge pins
//! the direction of `1` along which eigenvectors are only defined up to a
//! shift. Non-convergence is a first-class outcome, not an error: it is how
//! the absence of an eigenpair shows up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{GameModel, StationaryStrategyPair};
use crate::operator::{mean, ShapleyOperator};
use crate::par;

/// Value-iteration entries beyond this magnitude make `v_k / k` meaningless
/// in double precision.
pub const VALUE_OVERFLOW_GUARD: f64 = 1e15;

const DAMPING: f64 = 0.5;

/// Per-state average payoff after `horizon` steps of value iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPayoffEstimate {
    /// `v_k / k` per state.
    pub per_state: Vec<f64>,
    pub horizon: usize,
    /// The raw value vector `v_k`.
    pub value: Vec<f64>,
}

/// Iterates `v <- T(v)` from zero for `k` steps and reports `v_k / k`.
pub fn value_iteration(op: &dyn ShapleyOperator, k: usize) -> Result<MeanPayoffEstimate> {
    if k < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut v = vec![0.0; op.dim()];
    for step in 1..=k {
        v = op.apply(&v)?;
        for &entry in &v {
            if !entry.is_finite() || entry.abs() > VALUE_OVERFLOW_GUARD {
                return Err(Error::Numeric(format!(
                    "value iteration left the trusted range at step {step}: entry {entry}"
                )));
            }
        }
    }
    let per_state = v.iter().map(|&x| x / k as f64).collect();
    Ok(MeanPayoffEstimate {
        per_state,
        horizon: k,
        value: v,
    })
}

/// A solution candidate for `T(u) = lambda * 1 + u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    /// Mean payoff per stage.
    pub lambda: f64,
    /// Bias vector in the mean-zero gauge.
    pub u: Vec<f64>,
    /// `max_i |T(u)_i - u_i - lambda|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped normalized fixed-point iteration for the ergodic eigenproblem.
///
/// Returns `converged = false` (with the best residual seen) after
/// `max_iter` evaluations; persistent non-convergence signals that no
/// eigenpair exists, i.e. that the orbit is unbounded in the Hilbert
/// seminorm.
pub fn solve_ergodic(op: &dyn ShapleyOperator, tol: f64, max_iter: usize) -> Result<Eigenpair> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if max_iter < 1 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let n = op.dim();
    let mut x = vec![0.0; n];
    let mut best_res = f64::INFINITY;
    let mut best_lambda = 0.0;
    let mut best_x = x.clone();

    for it in 1..=max_iter {
        let y = op.apply(&x)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "iterate became non-finite at step {it}"
            )));
        }
        let lambda = mean(&y) - mean(&x);
        let res = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - xi - lambda).abs())
            .fold(0.0, f64::max);
        if res < best_res {
            best_res = res;
            best_lambda = lambda;
            best_x.copy_from_slice(&x);
        }
        if res <= tol {
            let mu = mean(&x);
            let u = x.iter().map(|v| v - mu).collect();
            return Ok(Eigenpair {
                lambda,
                u,
                residual: res,
                iterations: it,
                converged: true,
            });
        }
        let my = mean(&y);
        for i in 0..n {
            x[i] = (1.0 - DAMPING) * x[i] + DAMPING * (y[i] - my);
        }
    }

    let mu = mean(&best_x);
    let u = best_x.iter().map(|v| v - mu).collect();
    Ok(Eigenpair {
        lambda: best_lambda,
        u,
        residual: best_res,
        iterations: max_iter,
        converged: false,
    })
}

/// Membership of `x` in the sub-eigenspace (`T(x) >= alpha * 1 + x`) and the
/// super-eigenspace (`T(x) <= beta * 1 + x`). Comparisons are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCertificate {
    pub x: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `x` certifies a per-state mean payoff of at least `alpha`.
    pub in_sub: bool,
    /// `x` certifies a per-state mean payoff of at most `beta`.
    pub in_super: bool,
    /// `T(x)`, for reporting.
    pub image: Vec<f64>,
}

impl std::fmt::Display for SliceCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.in_sub, self.in_super) {
            (true, true) => write!(
                f,
                "x certifies mean payoff bounds {} <= chi_i <= {} for every state",
                self.alpha, self.beta
            ),
            (true, false) => {
                write!(
                    f,
                    "x certifies mean payoff >= {} for every state",
                    self.alpha
                )
            }
            (false, true) => {
                write!(
                    f,
                    "x certifies mean payoff <= {} for every state",
                    self.beta
                )
            }
            (false, false) => write!(f, "x certifies no mean payoff bound"),
        }
    }
}

/// Evaluates `T(x)` once and reports slice membership.
pub fn slice_check(
    op: &dyn ShapleyOperator,
    x: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<SliceCertificate> {
    let image = op.apply(x)?;
    let in_sub = image.iter().zip(x).all(|(ti, xi)| *ti >= alpha + xi);
    let in_super = image.iter().zip(x).all(|(ti, xi)| *ti <= beta + xi);
    Ok(SliceCertificate {
        x: x.to_vec(),
        alpha,
        beta,
        in_sub,
        in_super,
        image,
    })
}

/// Greedy stationary strategies at a bias vector `u`: per state the lowest
/// minimizer action within `epsilon` of `min_a max_b (payment + P u)`, and
/// per (state, action) the lowest maximizer reply within `epsilon` of the
/// inner max. Ties break deterministically towards lower indices.
pub fn extract_policies(
    game: &GameModel,
    u: &[f64],
    epsilon: f64,
) -> Result<StationaryStrategyPair> {
    if u.len() != game.n() {
        return Err(Error::DimensionMismatch {
            expected: game.n(),
            got: u.len(),
        });
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidArgument("epsilon must be nonnegative".into()));
    }
    let n = game.n();
    let mut min_choice = Vec::with_capacity(n);
    let mut max_response = Vec::with_capacity(n);
    for i in 0..n {
        let actions = game.actions(i);
        let mut replies = Vec::with_capacity(actions.len());
        let mut values = Vec::with_capacity(actions.len());
        for a in actions {
            let branch: Vec<f64> = a
                .max_actions
                .iter()
                .map(|b| b.payment + crate::model::dot(&b.transition, u))
                .collect();
            let best = branch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let reply = branch
                .iter()
                .position(|&v| v >= best - epsilon)
                .expect("max is attained");
            replies.push(reply);
            values.push(best);
        }
        let outer = values.iter().copied().fold(f64::INFINITY, f64::min);
        let choice = values
            .iter()
            .position(|&v| v <= outer + epsilon)
            .expect("min is attained");
        min_choice.push(choice);
        max_response.push(replies);
    }
    StationaryStrategyPair::new(game, min_choice, max_response, epsilon)
}

/// Empirical mean payoff from one starting state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEstimate {
    /// Average of total payoff / horizon over the trials.
    pub mean: f64,
    /// Sample standard error of that average (0 for a single trial).
    pub std_error: f64,
}

/// Monte Carlo estimates per starting state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub per_state: Vec<StateEstimate>,
}

/// Rolls out the fixed stationary pair for `horizon` steps, `trials` times
/// per starting state. Each (state, trial) cell draws from its own stream of
/// a counter-based generator, so results are reproducible and independent of
/// how trials are scheduled across threads.
pub fn simulate_stationary(
    game: &GameModel,
    strategies: &StationaryStrategyPair,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if horizon < 1 || trials < 1 {
        return Err(Error::InvalidArgument(
            "horizon and trials must be at least 1".into(),
        ));
    }
    if trials as u64 > u32::MAX as u64 {
        return Err(Error::InvalidArgument(
            "trial count does not fit the stream layout".into(),
        ));
    }
    let n = game.n();
    let values: Vec<f64> = par::map_indexed(n * trials, |cell| {
        let start = cell / trials;
        let trial = (cell % trials) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((start as u64) << 32) | trial);
        let mut state = start;
        let mut total = 0.0;
        for _ in 0..horizon {
            let a = strategies.min_action(state);
            let b = strategies.max_reply(state, a);
            let entry = &game.actions(state)[a].max_actions[b];
            total += entry.payment;
            state = sample_transition(&entry.transition, &mut rng);
        }
        total / horizon as f64
    });

    let per_state = (0..n)
        .map(|i| {
            let slice = &values[i * trials..(i + 1) * trials];
            let m = slice.iter().sum::<f64>() / trials as f64;
            let std_error = if trials < 2 {
                0.0
            } else {
                let var =
                    slice.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (trials - 1) as f64;
                (var / trials as f64).sqrt()
            };
            StateEstimate { mean: m, std_error }
        })
        .collect();

    Ok(SimulationSummary {
        horizon,
        trials,
        seed,
        per_state,
    })
}

fn sample_transition(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = j;
        }
        cum += p;
        if u < cum {
            return j;
        }
    }
    last_positive
}

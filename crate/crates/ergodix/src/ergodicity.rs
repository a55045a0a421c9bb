//! Divergence hypergraphs, conjugate subset pairs, and the ergodicity
//! certificate.
//!
//! For an operator `T` over states `{1..n}`, the pair of hypergraphs
//! `(H+, H-)` records its growth at infinity: `(J, {i})` is an arc of `H+`
//! when `T_i(alpha * 1_J) -> +inf` as `alpha -> +inf`, and of `H-` when the
//! coordinate drops to `-inf` as `alpha -> -inf`. Two disjoint nonempty sets
//! `(I, J)` are conjugate when `reach(J, H+)` is the complement of `I` and
//! `reach(I, H-)` is the complement of `J`. If only trivial conjugate pairs
//! exist, the ergodic equation `g + T(u) = lambda * 1 + u` is solvable for
//! every payment perturbation `g`; a nontrivial pair is a witness that some
//! perturbation makes the mean payoff depend on the initial state.
//!
//! Both divergence directions are monotone in the tail, so only
//! inclusion-minimal tails are stored, which changes no reachability closure.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::hypergraph::{Hyperarc, Hypergraph, HypergraphBuilder};
use crate::model::GameModel;
use crate::operator::{recession_probe, ShapleyOperator, Sign};
use crate::par;
use crate::state_set::StateSet;

/// Subset enumeration is driven by 64-bit masks; certification beyond this
/// many states is computationally out of reach anyway.
pub const MAX_ENUMERATION_STATES: usize = 62;

/// How a hypergraph of the pair was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form divergence tests; the certificate is proof-grade.
    Exact,
    /// Numeric limit probing; the certificate is numerical evidence.
    Probed,
    /// At least one user-declared arc was taken on trust.
    Declared,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Exact => f.write_str("exact"),
            Provenance::Probed => f.write_str("probed"),
            Provenance::Declared => f.write_str("declared"),
        }
    }
}

/// The two divergence hypergraphs of one operator, over the same node set and
/// with singleton heads.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergraphPair {
    hplus: Hypergraph,
    hminus: Hypergraph,
    plus_provenance: Provenance,
    minus_provenance: Provenance,
}

impl HypergraphPair {
    pub fn new(
        hplus: Hypergraph,
        hminus: Hypergraph,
        plus_provenance: Provenance,
        minus_provenance: Provenance,
    ) -> Result<Self> {
        if hplus.n() != hminus.n() {
            return Err(Error::InvalidArgument(format!(
                "hypergraphs disagree on the node count: {} vs {}",
                hplus.n(),
                hminus.n()
            )));
        }
        for arc in hplus.arcs().iter().chain(hminus.arcs()) {
            if arc.head().len() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "divergence hyperarc {arc} must have a singleton head"
                )));
            }
        }
        Ok(HypergraphPair {
            hplus,
            hminus,
            plus_provenance,
            minus_provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.hplus.n()
    }

    pub fn hplus(&self) -> &Hypergraph {
        &self.hplus
    }

    pub fn hminus(&self) -> &Hypergraph {
        &self.hminus
    }

    pub fn provenance(&self) -> (Provenance, Provenance) {
        (self.plus_provenance, self.minus_provenance)
    }
}

/// Disjoint sets `(I, J)` with `reach(J, H+) = complement(I)` and
/// `reach(I, H-) = complement(J)`; both conditions are re-checked at
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugatePair {
    iset: StateSet,
    jset: StateSet,
}

impl ConjugatePair {
    pub fn new(pair: &HypergraphPair, iset: StateSet, jset: StateSet) -> Result<Self> {
        let n = pair.n();
        if !iset.is_disjoint_from(&jset) {
            return Err(Error::InvalidArgument(format!(
                "conjugate sets must be disjoint: {iset} and {jset}"
            )));
        }
        if pair.hplus.reach(&jset)? != iset.complement(n) {
            return Err(Error::InvalidArgument(format!(
                "reach({jset}, H+) is not the complement of {iset}"
            )));
        }
        if pair.hminus.reach(&iset)? != jset.complement(n) {
            return Err(Error::InvalidArgument(format!(
                "reach({iset}, H-) is not the complement of {jset}"
            )));
        }
        Ok(ConjugatePair { iset, jset })
    }

    pub fn iset(&self) -> &StateSet {
        &self.iset
    }

    pub fn jset(&self) -> &StateSet {
        &self.jset
    }

    /// Trivial pairs have an empty side; only nontrivial ones witness
    /// non-ergodicity.
    pub fn is_trivial(&self) -> bool {
        self.iset.is_empty() || self.jset.is_empty()
    }
}

/// Doubling probe grid used to classify `lim T_i(alpha * 1_J)` numerically.
///
/// A coordinate is declared divergent when the gap between its values at the
/// two largest grid points exceeds `delta` (or the final value passes
/// `finite_cap`). Affine divergence grows the final gap like `alpha`;
/// log-speed divergence keeps it near `ln 2` per doubling; a finite limit
/// drives it to zero geometrically.
#[derive(Debug, Clone)]
pub struct ProbeSchedule {
    alphas: Vec<f64>,
    delta: f64,
    finite_cap: f64,
}

impl ProbeSchedule {
    /// Powers of two from `2^4` to `2^60`, `delta = 1e-6`, cap `1e30`.
    pub fn new(alphas: Vec<f64>, delta: f64, finite_cap: f64) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::InvalidArgument(
                "probe schedule needs at least two points".into(),
            ));
        }
        if !alphas.iter().all(|a| a.is_finite() && *a > 0.0)
            || !alphas.windows(2).all(|w| w[1] > w[0])
        {
            return Err(Error::InvalidArgument(
                "probe points must be finite, positive and strictly increasing".into(),
            ));
        }
        if !delta.is_finite() || delta <= 0.0 || finite_cap.is_nan() || finite_cap <= 0.0 {
            return Err(Error::InvalidArgument(
                "delta and finite_cap must be positive".into(),
            ));
        }
        Ok(ProbeSchedule {
            alphas,
            delta,
            finite_cap,
        })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn finite_cap(&self) -> f64 {
        self.finite_cap
    }
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        ProbeSchedule {
            alphas: (4..=60).map(|m| f64::powi(2.0, m)).collect(),
            delta: 1e-6,
            finite_cap: 1e30,
        }
    }
}

fn check_enumeration_size(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_STATES {
        return Err(Error::InvalidArgument(format!(
            "subset enumeration supports at most {MAX_ENUMERATION_STATES} states, got {n}"
        )));
    }
    Ok(())
}

/// Iterator over all `n`-bit masks with a fixed popcount, ascending.
struct MasksWithPopcount {
    next: Option<u64>,
    limit: u64,
}

fn masks_with_popcount(n: usize, k: usize) -> MasksWithPopcount {
    debug_assert!(k >= 1 && k <= n && n <= 62);
    MasksWithPopcount {
        next: Some((1u64 << k) - 1),
        limit: 1u64 << n,
    }
}

impl Iterator for MasksWithPopcount {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let v = self.next?;
        if v >= self.limit {
            self.next = None;
            return None;
        }
        // Gosper's hack: next integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        self.next = if r == 0 {
            None
        } else {
            Some(r | (((v ^ r) >> 2) / c))
        };
        Some(v)
    }
}

/// Builds `(H+, H-)` for a finite game by the exact positivity tests: for
/// each state `i` and tail `J`, `(J, {i})` enters `H+` iff
/// `min_a max_b P_i^{ab} 1_J > 0` and `H-` iff `max_a min_b P_i^{ab} 1_J > 0`
/// (strict comparisons on the stored probabilities). Tails are enumerated by
/// increasing cardinality and only inclusion-minimal ones are kept, which is
/// valid because both predicates are monotone in `J`. States are processed in
/// parallel.
pub fn build_pair_finite(game: &GameModel) -> Result<HypergraphPair> {
    let n = game.n();
    check_enumeration_size(n)?;
    let per_state: Vec<(Vec<u64>, Vec<u64>)> = par::map_indexed(n, |i| finite_state_tails(game, i));

    let mut plus = HypergraphBuilder::new(n);
    let mut minus = HypergraphBuilder::new(n);
    for (i, (plus_tails, minus_tails)) in per_state.iter().enumerate() {
        let head = StateSet::singleton(i as u32 + 1);
        for &t in plus_tails {
            plus.push_minimal(Hyperarc::new(StateSet::from_mask(t), head.clone())?);
        }
        for &t in minus_tails {
            minus.push_minimal(Hyperarc::new(StateSet::from_mask(t), head.clone())?);
        }
    }
    HypergraphPair::new(
        plus.build(),
        minus.build(),
        Provenance::Exact,
        Provenance::Exact,
    )
}

/// Minimal divergent tails for one head state, as masks.
fn finite_state_tails(game: &GameModel, i: usize) -> (Vec<u64>, Vec<u64>) {
    let n = game.n();
    // Support masks per (minimizer action, maximizer reply).
    let supports: Vec<Vec<u64>> = game
        .actions(i)
        .iter()
        .map(|a| {
            a.max_actions
                .iter()
                .map(|b| {
                    let mut m = 0u64;
                    for (j, &p) in b.transition.iter().enumerate() {
                        if p > 0.0 {
                            m |= 1 << j;
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();

    let mut plus_tails: Vec<u64> = Vec::new();
    let mut minus_tails: Vec<u64> = Vec::new();
    for card in 1..=n {
        for mask in masks_with_popcount(n, card) {
            let need_plus = !plus_tails.iter().any(|t| t & mask == *t);
            let need_minus = !minus_tails.iter().any(|t| t & mask == *t);
            if !need_plus && !need_minus {
                continue;
            }
            if need_plus && supports.iter().all(|bs| bs.iter().any(|s| s & mask != 0)) {
                plus_tails.push(mask);
            }
            if need_minus && supports.iter().any(|bs| bs.iter().all(|s| s & mask != 0)) {
                minus_tails.push(mask);
            }
        }
    }
    (plus_tails, minus_tails)
}

/// Divergence decisions for one tail mask.
struct TailOutcome {
    plus_heads: Vec<u32>,
    minus_heads: Vec<u32>,
    oracle_plus: bool,
    oracle_minus: bool,
    probed_plus: bool,
    probed_minus: bool,
}

/// Builds `(H+, H-)` for an arbitrary operator by probing
/// `T(alpha * 1_J)` along the schedule in both directions, falling back to
/// the operator's exact or declared hyperarc oracle wherever it answers.
/// Tails are enumerated by increasing cardinality with minimal-tail pruning
/// (sound for genuine operators, whose divergence is monotone in the tail);
/// within a cardinality layer, tails are probed in parallel.
pub fn build_pair_probed(
    op: &dyn ShapleyOperator,
    schedule: &ProbeSchedule,
) -> Result<HypergraphPair> {
    let n = op.dim();
    check_enumeration_size(n)?;

    let mut plus = HypergraphBuilder::new(n);
    let mut minus = HypergraphBuilder::new(n);
    // Minimal tails found so far, per 0-based head.
    let mut plus_tails: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut minus_tails: Vec<Vec<u64>> = vec![Vec::new(); n];
    let (mut oracle_plus, mut probed_plus) = (false, false);
    let (mut oracle_minus, mut probed_minus) = (false, false);

    for card in 1..=n {
        let layer: Vec<u64> = masks_with_popcount(n, card).collect();
        let outcomes: Vec<Result<TailOutcome>> = par::map_indexed(layer.len(), |k| {
            classify_tail(op, schedule, n, layer[k], &plus_tails, &minus_tails)
        });
        for (k, outcome) in outcomes.into_iter().enumerate() {
            let out = outcome?;
            let mask = layer[k];
            let tail = StateSet::from_mask(mask);
            oracle_plus |= out.oracle_plus;
            probed_plus |= out.probed_plus;
            oracle_minus |= out.oracle_minus;
            probed_minus |= out.probed_minus;
            for &head in &out.plus_heads {
                plus_tails[(head - 1) as usize].push(mask);
                plus.push_minimal(Hyperarc::new(tail.clone(), StateSet::singleton(head))?);
            }
            for &head in &out.minus_heads {
                minus_tails[(head - 1) as usize].push(mask);
                minus.push_minimal(Hyperarc::new(tail.clone(), StateSet::singleton(head))?);
            }
        }
    }

    let prov = |oracle: bool, probed: bool| match (oracle, probed) {
        (true, false) => Provenance::Exact,
        (true, true) => Provenance::Declared,
        _ => Provenance::Probed,
    };
    // A fully exact oracle yields Exact; a partially answering oracle (the
    // declared-arc case) mixes with probing and is reported as Declared.
    HypergraphPair::new(
        plus.build(),
        minus.build(),
        prov(oracle_plus, probed_plus),
        prov(oracle_minus, probed_minus),
    )
}

fn classify_tail(
    op: &dyn ShapleyOperator,
    schedule: &ProbeSchedule,
    n: usize,
    mask: u64,
    plus_tails: &[Vec<u64>],
    minus_tails: &[Vec<u64>],
) -> Result<TailOutcome> {
    let tail = StateSet::from_mask(mask);
    let mut out = TailOutcome {
        plus_heads: Vec::new(),
        minus_heads: Vec::new(),
        oracle_plus: false,
        oracle_minus: false,
        probed_plus: false,
        probed_minus: false,
    };

    for sign in [Sign::Plus, Sign::Minus] {
        let (tails, heads, oracle_used, probe_used) = match sign {
            Sign::Plus => (
                plus_tails,
                &mut out.plus_heads,
                &mut out.oracle_plus,
                &mut out.probed_plus,
            ),
            Sign::Minus => (
                minus_tails,
                &mut out.minus_heads,
                &mut out.oracle_minus,
                &mut out.probed_minus,
            ),
        };
        // Heads whose minimal tails do not already cover this mask.
        let mut undecided: Vec<u32> = Vec::new();
        for head in 1..=n as u32 {
            if tails[(head - 1) as usize].iter().any(|t| t & mask == *t) {
                continue;
            }
            match op.hyperarc_oracle(&tail, head, sign) {
                Some(true) => {
                    *oracle_used = true;
                    heads.push(head);
                }
                Some(false) => *oracle_used = true,
                None => undecided.push(head),
            }
        }
        if undecided.is_empty() {
            continue;
        }
        *probe_used = true;
        let divergent = probe_divergence(op, schedule, &tail, sign)?;
        for head in undecided {
            if divergent[(head - 1) as usize] {
                heads.push(head);
            }
        }
    }
    Ok(out)
}

/// Evaluates `T(alpha * 1_tail)` along the (signed) schedule and flags each
/// coordinate whose final doubling gap exceeds `delta`. The map is monotone
/// in `alpha`, so a persisting gap at the largest grid points indicates
/// divergence.
fn probe_divergence(
    op: &dyn ShapleyOperator,
    schedule: &ProbeSchedule,
    tail: &StateSet,
    sign: Sign,
) -> Result<Vec<bool>> {
    let n = op.dim();
    let mut prev: Option<Vec<f64>> = None;
    let mut last: Option<Vec<f64>> = None;
    for &alpha in schedule.alphas() {
        let a = match sign {
            Sign::Plus => alpha,
            Sign::Minus => -alpha,
        };
        let x = tail.scaled_indicator(n, a);
        let y = op.apply(&x).map_err(|e| Error::Probe {
            tail: tail.to_string(),
            alpha: a,
            source: Box::new(e),
        })?;
        prev = last.take();
        last = Some(y);
    }
    let last = last.expect("schedule has at least two points");
    let prev = prev.expect("schedule has at least two points");
    Ok((0..n)
        .map(|i| {
            let gap = (last[i] - prev[i]).abs();
            gap > schedule.delta() || last[i].abs() > schedule.finite_cap()
        })
        .collect())
}

/// Scans nonempty `I` in ascending bitmask order. For each `I` the only
/// candidate partner is `J = complement(reach(I, H-))`; the pair is conjugate
/// iff additionally `J` is nonempty and `reach(J, H+) = complement(I)`. The
/// scan is partitioned across workers, and the reported witness is the one
/// with the smallest mask regardless of partitioning.
pub fn find_nontrivial_conjugate(pair: &HypergraphPair) -> Result<Option<ConjugatePair>> {
    let n = pair.n();
    check_enumeration_size(n)?;
    let full = (1u64 << n) - 1;
    let hit = par::find_first_map(1..full + 1, |imask| {
        let iset = StateSet::from_mask(imask);
        let reach_minus = pair
            .hminus
            .reach(&iset)
            .expect("mask-derived sets are in range");
        let jmask = full & !reach_minus.to_mask();
        if jmask == 0 {
            return None;
        }
        let jset = StateSet::from_mask(jmask);
        let reach_plus = pair
            .hplus
            .reach(&jset)
            .expect("mask-derived sets are in range");
        if reach_plus.to_mask() == full & !imask {
            Some((imask, jset))
        } else {
            None
        }
    });
    match hit {
        Some((imask, jset)) => {
            let witness = ConjugatePair::new(pair, StateSet::from_mask(imask), jset)?;
            Ok(Some(witness))
        }
        None => Ok(None),
    }
}

/// Certification outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Only trivial conjugate pairs exist: the ergodic equation is solvable
    /// for every payment perturbation.
    Ergodic,
    /// A nontrivial conjugate pair witnesses the failure of that property.
    NonErgodic(ConjugatePair),
}

/// Result of [`certify`], carrying enough context to reproduce the verdict.
#[derive(Debug, Clone)]
pub struct ErgodicityCertificate {
    pub verdict: Verdict,
    pub n: usize,
    /// Canonical enumeration depth: all `2^n - 1` nonempty subsets for an
    /// ergodic verdict, or the witness mask for a non-ergodic one.
    pub subsets_examined: u64,
    pub plus_provenance: Provenance,
    pub minus_provenance: Provenance,
    pub plus_arcs: usize,
    pub minus_arcs: usize,
    pub wall: Duration,
}

impl ErgodicityCertificate {
    pub fn is_ergodic(&self) -> bool {
        matches!(self.verdict, Verdict::Ergodic)
    }

    /// Whether both hypergraphs were built from closed-form tests.
    pub fn is_exact(&self) -> bool {
        self.plus_provenance == Provenance::Exact && self.minus_provenance == Provenance::Exact
    }
}

impl ErgodicityCertificate {
    /// "probed" when both sides agree, otherwise "hplus=..., hminus=...".
    pub fn provenance_label(&self) -> String {
        if self.plus_provenance == self.minus_provenance {
            self.plus_provenance.to_string()
        } else {
            format!(
                "hplus={}, hminus={}",
                self.plus_provenance, self.minus_provenance
            )
        }
    }
}

impl std::fmt::Display for ErgodicityCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.verdict {
            Verdict::Ergodic => writeln!(f, "ERGODIC (provenance: {})", self.provenance_label())?,
            Verdict::NonErgodic(w) => {
                writeln!(f, "NON-ERGODIC (provenance: {})", self.provenance_label())?;
                writeln!(f, "witness: I = {}, J = {}", w.iset(), w.jset())?;
            }
        }
        writeln!(
            f,
            "hypergraphs: H+ {} arcs, H- {} arcs",
            self.plus_arcs, self.minus_arcs
        )?;
        writeln!(
            f,
            "subsets examined: {} of {}",
            self.subsets_examined,
            (1u64 << self.n) - 1
        )?;
        match (&self.verdict, self.is_exact()) {
            (Verdict::Ergodic, true) => writeln!(
                f,
                "claim: every slice space is bounded in the Hilbert seminorm; \
                 the ergodic equation is solvable for every payment vector"
            )?,
            (Verdict::Ergodic, false) => writeln!(
                f,
                "claim: numeric evidence only; hypergraphs come from probed or \
                 declared limits, not closed-form tests"
            )?,
            (Verdict::NonErgodic(_), _) => writeln!(
                f,
                "claim: some payment perturbation makes the mean payoff depend \
                 on the initial state"
            )?,
        }
        write!(f, "wall time: {:.3} ms", self.wall.as_secs_f64() * 1e3)
    }
}

/// Runs the conjugate-pair scan over a built pair and packages the verdict.
pub fn certify(pair: &HypergraphPair) -> Result<ErgodicityCertificate> {
    let start = Instant::now();
    let witness = find_nontrivial_conjugate(pair)?;
    let n = pair.n();
    let full = (1u64 << n) - 1;
    let (verdict, examined) = match witness {
        Some(w) => {
            let mask = w.iset().to_mask();
            (Verdict::NonErgodic(w), mask)
        }
        None => (Verdict::Ergodic, full),
    };
    Ok(ErgodicityCertificate {
        verdict,
        n,
        subsets_examined: examined,
        plus_provenance: pair.plus_provenance,
        minus_provenance: pair.minus_provenance,
        plus_arcs: pair.hplus.arcs().len(),
        minus_arcs: pair.hminus.arcs().len(),
        wall: start.elapsed(),
    })
}

/// Outcome of a numeric recession fixed-point probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecessionCheck {
    /// The probe sequence settled within `tol` of `x`.
    FixedPoint,
    /// The probe sequence settled, but away from `x`.
    NotFixedPoint,
    /// The sequence had not stabilized at `alpha_max`; no conclusion.
    Inconclusive { last_gap: f64 },
}

/// Probes `T(alpha * x) / alpha` along doubling `alpha` up to `alpha_max` and
/// reports whether `x` looks like a fixed point of the recession map. The
/// sequence must be stable (final doubling gap at most `tol`) for either
/// definite answer; otherwise the result is [`RecessionCheck::Inconclusive`].
pub fn recession_fixed_point_check(
    op: &dyn ShapleyOperator,
    x: &[f64],
    alpha_max: f64,
    tol: f64,
) -> Result<RecessionCheck> {
    if x.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: x.len(),
        });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if !alpha_max.is_finite() || alpha_max < 32.0 {
        return Err(Error::InvalidArgument(
            "alpha_max must be at least 32 to fit two doubling probes".into(),
        ));
    }
    let mut prev: Option<Vec<f64>> = None;
    let mut last: Option<Vec<f64>> = None;
    let mut alpha = 16.0;
    while alpha <= alpha_max {
        let y = recession_probe(op, x, alpha)?;
        prev = last.take();
        last = Some(y);
        alpha *= 2.0;
    }
    let last = last.expect("alpha_max admits at least two probes");
    let prev = prev.expect("alpha_max admits at least two probes");
    let last_gap = last
        .iter()
        .zip(&prev)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if last_gap > tol {
        return Ok(RecessionCheck::Inconclusive { last_gap });
    }
    let dist = last
        .iter()
        .zip(x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(if dist <= tol {
        RecessionCheck::FixedPoint
    } else {
        RecessionCheck::NotFixedPoint
    })
}

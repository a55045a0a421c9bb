//! User-defined operators given as one closed-form expression per coordinate.
//!
//! This is how operators that are not finite-action tables (log-penalized
//! action spaces, log-sum-exp rows, hand-written min/max forms) enter the
//! library. Parsed coordinates are vetted against the operator axioms by
//! sampling before any analysis trusts them; see
//! [`crate::operator::validate_axioms`].

mod parser;

pub use parser::parse_expr;

use crate::error::{Error, Result};
use crate::operator::{h, ShapleyOperator, Sign};
use crate::state_set::StateSet;

/// Abstract syntax of one coordinate function.
///
/// Variables are 1-based (`Var(1)` is `x1`). `Dot` holds a full stochastic
/// row against the variable vector; it has no surface syntax and exists for
/// programmatic construction of table-shaped coordinates. `LogSumExp` is
/// produced only by [`OperatorSpec`] compilation, which rewrites
/// `log(c1*exp(e1) + ... + d)` into a max-shifted form so probes at huge
/// arguments do not overflow.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Scale(f64, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Log(Box<Expr>),
    Exp(Box<Expr>),
    /// Stochastic row dotted with the full variable vector.
    Dot(Vec<f64>),
    /// Closed form of `sup over p in (0,1] of (log p + p * z)`.
    Hfun(Box<Expr>),
    /// `log(sum_k c_k * exp(e_k))` with all `c_k > 0`, evaluated stably.
    LogSumExp(Vec<(f64, Expr)>),
}

impl Expr {
    fn validate(&self, n: usize) -> std::result::Result<(), String> {
        match self {
            Expr::Const(c) => {
                if !c.is_finite() {
                    return Err(format!("non-finite constant {c}"));
                }
            }
            Expr::Var(i) => {
                if *i < 1 || *i > n {
                    return Err(format!("variable x{i} out of range 1..={n}"));
                }
            }
            Expr::Sum(items) => {
                if items.is_empty() {
                    return Err("empty sum".into());
                }
                for e in items {
                    e.validate(n)?;
                }
            }
            Expr::Scale(c, e) => {
                if !c.is_finite() {
                    return Err(format!("non-finite coefficient {c}"));
                }
                e.validate(n)?;
            }
            Expr::Min(items) | Expr::Max(items) => {
                if items.is_empty() {
                    return Err("empty min/max list".into());
                }
                for e in items {
                    e.validate(n)?;
                }
            }
            Expr::Log(e) | Expr::Exp(e) | Expr::Hfun(e) => e.validate(n)?,
            Expr::Dot(row) => {
                if row.len() != n {
                    return Err(format!("dot row has length {}, expected {n}", row.len()));
                }
                let mut sum = 0.0;
                for &p in row {
                    if !p.is_finite() || p < 0.0 {
                        return Err(format!("dot row entry {p} is not a probability"));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(format!("dot row sums to {sum}, not 1"));
                }
            }
            Expr::LogSumExp(terms) => {
                if terms.is_empty() {
                    return Err("empty log-sum-exp".into());
                }
                for (c, e) in terms {
                    if !c.is_finite() || *c <= 0.0 {
                        return Err(format!("log-sum-exp weight {c} must be positive"));
                    }
                    e.validate(n)?;
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: &[f64]) -> std::result::Result<f64, String> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => Ok(x[*i - 1]),
            Expr::Sum(items) => {
                let mut s = 0.0;
                for e in items {
                    s += e.eval(x)?;
                }
                Ok(s)
            }
            Expr::Scale(c, e) => Ok(c * e.eval(x)?),
            Expr::Min(items) => {
                let mut m = f64::INFINITY;
                for e in items {
                    m = m.min(e.eval(x)?);
                }
                Ok(m)
            }
            Expr::Max(items) => {
                let mut m = f64::NEG_INFINITY;
                for e in items {
                    m = m.max(e.eval(x)?);
                }
                Ok(m)
            }
            Expr::Log(e) => {
                let v = e.eval(x)?;
                if v <= 0.0 {
                    return Err(format!("log of non-positive value {v}"));
                }
                Ok(v.ln())
            }
            Expr::Exp(e) => Ok(e.eval(x)?.exp()),
            Expr::Dot(row) => Ok(row.iter().zip(x).map(|(p, v)| p * v).sum()),
            Expr::Hfun(e) => Ok(h(e.eval(x)?)),
            Expr::LogSumExp(terms) => {
                let mut vals = Vec::with_capacity(terms.len());
                let mut m = f64::NEG_INFINITY;
                for (c, e) in terms {
                    let v = e.eval(x)?;
                    m = m.max(v);
                    vals.push((*c, v));
                }
                let s: f64 = vals.iter().map(|(c, v)| c * (v - m).exp()).sum();
                Ok(m + s.ln())
            }
        }
    }

    /// Rewrites `log` of a positively weighted sum of exponentials (and
    /// positive constants) into [`Expr::LogSumExp`]; recurses elsewhere.
    fn compile(&self) -> Expr {
        match self {
            Expr::Log(inner) => {
                let ic = inner.compile();
                match lse_terms(&ic) {
                    Some(terms) => Expr::LogSumExp(terms),
                    None => Expr::Log(Box::new(ic)),
                }
            }
            Expr::Sum(items) => Expr::Sum(items.iter().map(Expr::compile).collect()),
            Expr::Scale(c, e) => Expr::Scale(*c, Box::new(e.compile())),
            Expr::Min(items) => Expr::Min(items.iter().map(Expr::compile).collect()),
            Expr::Max(items) => Expr::Max(items.iter().map(Expr::compile).collect()),
            Expr::Exp(e) => Expr::Exp(Box::new(e.compile())),
            Expr::Hfun(e) => Expr::Hfun(Box::new(e.compile())),
            other => other.clone(),
        }
    }
}

fn lse_terms(e: &Expr) -> Option<Vec<(f64, Expr)>> {
    let mut out = Vec::new();
    collect_lse(e, 1.0, &mut out)?;
    if out.is_empty() {
        return None;
    }
    Some(out)
}

fn collect_lse(e: &Expr, coeff: f64, out: &mut Vec<(f64, Expr)>) -> Option<()> {
    match e {
        Expr::Sum(items) => {
            for item in items {
                collect_lse(item, coeff, out)?;
            }
            Some(())
        }
        Expr::Scale(c, inner) => collect_lse(inner, coeff * c, out),
        Expr::Exp(arg) => {
            if coeff > 0.0 {
                out.push((coeff, (**arg).clone()));
                Some(())
            } else {
                None
            }
        }
        Expr::Const(d) => {
            let v = coeff * d;
            if v > 0.0 {
                out.push((v, Expr::Const(0.0)));
                Some(())
            } else {
                None
            }
        }
        _ => None,
    }
}

// Printing precedence levels: sums bind loosest, scaled terms next, atoms
// (numbers, variables, calls, parenthesized groups) tightest.
const PREC_SUM: u8 = 0;
const PREC_TERM: u8 = 1;
const PREC_ATOM: u8 = 2;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Sum(_) | Expr::Dot(_) => PREC_SUM,
        Expr::Scale(..) => PREC_TERM,
        _ => PREC_ATOM,
    }
}

fn fmt_prec(e: &Expr, min: u8, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    if prec(e) < min {
        write!(f, "(")?;
        write!(f, "{e}")?;
        write!(f, ")")
    } else {
        write!(f, "{e}")
    }
}

/// Writes `coeff * e` for a nonnegative coefficient in a form that, after
/// sum-level negation during parsing, reproduces `Scale(-coeff, e)`. A unit
/// coefficient is elided unless the operand is itself a scale (eliding there
/// would merge the two layers on re-parse).
fn fmt_scaled(coeff: f64, e: &Expr, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    if coeff == 1.0 && !matches!(e, Expr::Scale(..)) {
        fmt_prec(e, PREC_ATOM, f)
    } else {
        write!(f, "{coeff} * ")?;
        fmt_prec(e, PREC_ATOM, f)
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Sum(items) => {
                fmt_prec(&items[0], PREC_TERM, f)?;
                for item in &items[1..] {
                    match item {
                        Expr::Const(c) if *c < 0.0 => write!(f, " - {}", -c)?,
                        Expr::Scale(c, e) if *c < 0.0 => {
                            write!(f, " - ")?;
                            fmt_scaled(-c, e, f)?;
                        }
                        _ => {
                            write!(f, " + ")?;
                            fmt_prec(item, PREC_TERM, f)?;
                        }
                    }
                }
                Ok(())
            }
            Expr::Scale(c, e) => {
                // "-x1" re-parses as Scale(-1, x1); a scale operand must keep
                // the explicit "-1 *" so the layers survive re-parsing.
                if *c == -1.0 && !matches!(**e, Expr::Scale(..)) {
                    write!(f, "-")?;
                    fmt_prec(e, PREC_ATOM, f)
                } else {
                    write!(f, "{c} * ")?;
                    fmt_prec(e, PREC_ATOM, f)
                }
            }
            Expr::Min(items) | Expr::Max(items) => {
                write!(
                    f,
                    "{}(",
                    if matches!(self, Expr::Min(_)) {
                        "min"
                    } else {
                        "max"
                    }
                )?;
                for (k, e) in items.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Log(e) => write!(f, "log({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Hfun(e) => write!(f, "h({e})"),
            Expr::Dot(row) => {
                let mut first = true;
                for (j, &p) in row.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    if !first {
                        write!(f, " + ")?;
                    }
                    write!(f, "{p} * x{}", j + 1)?;
                    first = false;
                }
                if first {
                    write!(f, "0")?;
                }
                Ok(())
            }
            Expr::LogSumExp(terms) => {
                write!(f, "log(")?;
                for (k, (c, e)) in terms.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{c} * exp({e})")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A complete operator: one expression per coordinate, plus optionally
/// declared divergence hyperarcs `(tail, head)` for either direction.
///
/// Declared arcs answer [`ShapleyOperator::hyperarc_oracle`] queries
/// positively (a declared tail, or any superset, diverges); everything else
/// is left to numeric probing. Evaluation uses compiled coordinate forms in
/// which log-sum-exp patterns are max-shifted.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    coords: Vec<Expr>,
    compiled: Vec<Expr>,
    declared_plus: Vec<(StateSet, u32)>,
    declared_minus: Vec<(StateSet, u32)>,
}

impl OperatorSpec {
    /// Builds an `n`-coordinate operator from programmatic ASTs
    /// (`n = coords.len()`).
    pub fn new(coords: Vec<Expr>) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidModel(
                "operator needs at least one coordinate".into(),
            ));
        }
        for (k, e) in coords.iter().enumerate() {
            e.validate(n)
                .map_err(|msg| Error::InvalidModel(format!("coordinate {}: {msg}", k + 1)))?;
        }
        let compiled = coords.iter().map(Expr::compile).collect();
        Ok(OperatorSpec {
            coords,
            compiled,
            declared_plus: Vec::new(),
            declared_minus: Vec::new(),
        })
    }

    /// Parses one expression string per coordinate; variable indices are
    /// checked against the coordinate count.
    pub fn parse<S: AsRef<str>>(coord_texts: &[S]) -> Result<Self> {
        let n = coord_texts.len();
        let mut coords = Vec::with_capacity(n);
        for (k, text) in coord_texts.iter().enumerate() {
            let e = parse_expr(text.as_ref(), Some(n)).map_err(|err| match err {
                Error::Parse { line, col, msg } => Error::Parse {
                    line,
                    col,
                    msg: format!("coordinate {}: {msg}", k + 1),
                },
                other => other,
            })?;
            coords.push(e);
        }
        OperatorSpec::new(coords)
    }

    /// Attaches declared divergence arcs (1-based heads).
    pub fn with_declared_arcs(
        mut self,
        plus: Vec<(StateSet, u32)>,
        minus: Vec<(StateSet, u32)>,
    ) -> Result<Self> {
        let n = self.n();
        for (tail, head) in plus.iter().chain(minus.iter()) {
            if tail.is_empty() {
                return Err(Error::InvalidModel(
                    "declared hyperarc tail is empty".into(),
                ));
            }
            if !tail.in_range(n) || *head < 1 || *head as usize > n {
                return Err(Error::InvalidModel(format!(
                    "declared hyperarc {tail} -> {head} is out of range for n = {n}"
                )));
            }
        }
        self.declared_plus = plus;
        self.declared_minus = minus;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Expr] {
        &self.coords
    }

    pub fn declared_plus(&self) -> &[(StateSet, u32)] {
        &self.declared_plus
    }

    pub fn declared_minus(&self) -> &[(StateSet, u32)] {
        &self.declared_minus
    }

    pub fn has_declared_arcs(&self) -> bool {
        !self.declared_plus.is_empty() || !self.declared_minus.is_empty()
    }

    /// Evaluates every coordinate at `x`. Domain failures and non-finite
    /// results are reported with the offending 1-based coordinate.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n());
        for (k, e) in self.compiled.iter().enumerate() {
            let v = e.eval(x).map_err(|msg| Error::Eval { coord: k + 1, msg })?;
            if !v.is_finite() {
                return Err(Error::Eval {
                    coord: k + 1,
                    msg: format!("non-finite result {v}"),
                });
            }
            out.push(v);
        }
        Ok(out)
    }
}

impl ShapleyOperator for OperatorSpec {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }

    fn kind(&self) -> String {
        "expression".into()
    }

    fn hyperarc_oracle(&self, tail: &StateSet, head: u32, sign: Sign) -> Option<bool> {
        let declared = match sign {
            Sign::Plus => &self.declared_plus,
            Sign::Minus => &self.declared_minus,
        };
        // Divergence is monotone in the tail, so any declared subset settles
        // the query; undeclared arcs stay unknown.
        if declared
            .iter()
            .any(|(t, hd)| *hd == head && t.is_subset_of(tail))
        {
            Some(true)
        } else {
            None
        }
    }
}

/// Expression coordinates of the builtin three-state reference operator.
pub fn reference_spec() -> OperatorSpec {
    OperatorSpec::parse(&["x1 + h(min(x2, x3) - x1)", "x1 - h(x1 - x3)", "x3"])
        .expect("reference coordinates parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{validate_axioms, BuiltinExample};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_identity_coordinate() {
        let spec = OperatorSpec::parse(&["x1"]).unwrap();
        assert_eq!(spec.eval(&[5.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn reference_spec_matches_native_operator() {
        let spec = reference_spec();
        assert_eq!(spec.eval(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(spec.eval(&[0.0, 7.0, 7.0]).unwrap()[0], 7.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-20.0..20.0)).collect();
            assert_eq!(spec.eval(&x).unwrap(), BuiltinExample::apply(&x).unwrap());
        }
    }

    #[test]
    fn eval_names_failing_coordinate() {
        let spec = OperatorSpec::parse(&["x1", "log(x2)"]).unwrap();
        let err = spec.eval(&[1.0, -3.0]).unwrap_err();
        assert!(matches!(err, Error::Eval { coord: 2, .. }), "{err:?}");
    }

    #[test]
    fn log_sum_exp_is_overflow_safe() {
        let spec = OperatorSpec::parse(&["log(1*exp(x1) + 2*exp(x2))", "x2"]).unwrap();
        let big = (1u64 << 60) as f64;
        let y = spec.eval(&[big, 0.0]).unwrap();
        assert!((y[0] - big).abs() < 1e-3);
        // Constants inside the log fold in as exp(0) terms.
        let spec = OperatorSpec::parse(&["log(exp(x1) + 0.5)"]).unwrap();
        let y = spec.eval(&[big]).unwrap();
        assert!((y[0] - big).abs() < 1e-3);
        let y = spec.eval(&[-big]).unwrap();
        assert!((y[0] - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn raw_log_still_reports_domain_errors() {
        // log of a non-exp-shaped argument stays a raw log and can fail.
        let spec = OperatorSpec::parse(&["log(x1)"]).unwrap();
        assert!(spec.eval(&[2.0]).is_ok());
        assert!(spec.eval(&[0.0]).is_err());
    }

    #[test]
    fn axiom_vetting_accepts_and_rejects() {
        let bad = OperatorSpec::parse(&["x1 - x2", "x2"]).unwrap();
        let report = validate_axioms(&bad, 1000, 5);
        assert!(!report.passed());

        let good = OperatorSpec::parse(&["max(x1, x2)", "max(x1, x2)"]).unwrap();
        assert!(validate_axioms(&good, 1000, 6).passed());

        assert!(validate_axioms(&reference_spec(), 2000, 7).passed());
    }

    #[test]
    fn declared_arcs_answer_oracle_queries() {
        let spec = OperatorSpec::parse(&["x1", "x2"])
            .unwrap()
            .with_declared_arcs(vec![(StateSet::singleton(1), 1)], vec![])
            .unwrap();
        use crate::operator::Sign;
        assert_eq!(
            spec.hyperarc_oracle(&StateSet::singleton(1), 1, Sign::Plus),
            Some(true)
        );
        // Supersets of a declared tail diverge too.
        assert_eq!(
            spec.hyperarc_oracle(&StateSet::new([1, 2]), 1, Sign::Plus),
            Some(true)
        );
        assert_eq!(
            spec.hyperarc_oracle(&StateSet::singleton(2), 1, Sign::Plus),
            None
        );
        assert_eq!(
            spec.hyperarc_oracle(&StateSet::singleton(1), 1, Sign::Minus),
            None
        );
    }

    #[test]
    fn rejects_invalid_programmatic_trees() {
        assert!(OperatorSpec::new(vec![Expr::Var(2)]).is_err());
        assert!(OperatorSpec::new(vec![Expr::Dot(vec![0.5, 0.4])]).is_err());
        assert!(OperatorSpec::new(vec![Expr::Min(vec![])]).is_err());
        assert!(OperatorSpec::parse(&["x1"])
            .unwrap()
            .with_declared_arcs(vec![(StateSet::singleton(2), 1)], vec![])
            .is_err());
    }

    #[test]
    fn table_shaped_expression_matches_game_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.gen_range(1..=4);
            let game = crate::testing::random_game(n, 2, 2, rng.gen());
            // Same tables as min over max over (payment + stochastic dot).
            let coords: Vec<Expr> = (0..n)
                .map(|i| {
                    let maxes: Vec<Expr> = game
                        .actions(i)
                        .iter()
                        .map(|a| {
                            let branches: Vec<Expr> = a
                                .max_actions
                                .iter()
                                .map(|b| {
                                    Expr::Sum(vec![
                                        Expr::Const(b.payment),
                                        Expr::Dot(b.transition.clone()),
                                    ])
                                })
                                .collect();
                            if branches.len() == 1 {
                                branches.into_iter().next().unwrap()
                            } else {
                                Expr::Max(branches)
                            }
                        })
                        .collect();
                    if maxes.len() == 1 {
                        maxes.into_iter().next().unwrap()
                    } else {
                        Expr::Min(maxes)
                    }
                })
                .collect();
            let spec = OperatorSpec::new(coords).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
                let a = spec.eval(&x).unwrap();
                let b = game.apply(&x).unwrap();
                for i in 0..n {
                    assert!((a[i] - b[i]).abs() <= 1e-12, "{} vs {}", a[i], b[i]);
                }
            }
        }
    }

    // Strategy over ASTs the parser itself can produce, so printing followed
    // by parsing must reproduce the tree exactly.
    fn parser_canonical_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1000i32..1000).prop_map(|v| Expr::Const(v as f64 / 8.0)),
            (1usize..=4).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 64, 4, |inner| {
            let non_const_operand = inner
                .clone()
                .prop_filter("scale operand is never a constant", |e| {
                    !matches!(e, Expr::Const(_))
                });
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Sum),
                ((-64i32..64).prop_map(|v| v as f64 / 4.0), non_const_operand)
                    .prop_map(|(c, e)| Expr::Scale(c, Box::new(e))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Min),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Max),
                inner.clone().prop_map(|e| Expr::Log(Box::new(e))),
                inner.clone().prop_map(|e| Expr::Exp(Box::new(e))),
                inner.prop_map(|e| Expr::Hfun(Box::new(e))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn print_parse_round_trip(e in parser_canonical_expr()) {
            let text = e.to_string();
            let parsed = parse_expr(&text, None)
                .unwrap_or_else(|err| panic!("failed to re-parse '{text}': {err}"));
            prop_assert_eq!(parsed, e);
        }
    }
}

//! JSON model files and their conversion into library types.
//!
//! Schema (states are 1-based everywhere):
//!
//! ```json
//! { "kind": "finite_game", "n": 2, "states": [ { "min_actions": [
//!     { "name": "stay", "max_actions": [
//!         { "name": "b1", "payment": 0.0, "transition": [1.0, 0.0] } ] } ] }, ... ] }
//! { "kind": "risk_sensitive", "matrix": [[1, 2], [3, 4]] }
//! { "kind": "expression", "n": 3, "coords": ["x1 + h(min(x2, x3) - x1)", ...],
//!   "hyperarcs_plus": [ { "tail": [2, 3], "head": 1 } ], "g": [0, 0, 1] }
//! { "kind": "builtin_example" }
//! ```

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;

use ergodix::{
    BuiltinExample, GameModel, MaxAction, MinAction, OperatorSpec, RiskSensitiveModel,
    ShapleyOperator, Sign, StateSet,
};

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelFile {
    FiniteGame {
        n: usize,
        states: Vec<StateDef>,
    },
    RiskSensitive {
        matrix: Vec<Vec<f64>>,
    },
    Expression {
        n: usize,
        coords: Vec<String>,
        #[serde(default)]
        hyperarcs_plus: Vec<ArcDef>,
        #[serde(default)]
        hyperarcs_minus: Vec<ArcDef>,
        #[serde(default)]
        g: Option<Vec<f64>>,
    },
    BuiltinExample,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDef {
    pub min_actions: Vec<MinActionDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinActionDef {
    #[serde(default)]
    pub name: Option<String>,
    pub max_actions: Vec<MaxActionDef>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxActionDef {
    #[serde(default)]
    pub name: Option<String>,
    pub payment: f64,
    pub transition: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcDef {
    pub tail: Vec<u32>,
    pub head: u32,
}

/// A validated model ready for analysis.
pub enum LoadedModel {
    Finite(GameModel),
    Risk(RiskSensitiveModel),
    Expression {
        spec: OperatorSpec,
        g: Option<Vec<f64>>,
    },
    Builtin,
}

impl LoadedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedModel::Finite(_) => "finite_game",
            LoadedModel::Risk(_) => "risk_sensitive",
            LoadedModel::Expression { .. } => "expression",
            LoadedModel::Builtin => "builtin_example",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            LoadedModel::Finite(g) => g.n(),
            LoadedModel::Risk(m) => m.n(),
            LoadedModel::Expression { spec, .. } => spec.n(),
            LoadedModel::Builtin => 3,
        }
    }

    pub fn as_finite(&self) -> Option<&GameModel> {
        match self {
            LoadedModel::Finite(g) => Some(g),
            _ => None,
        }
    }

    /// Payment perturbation carried by the file, if any.
    pub fn file_g(&self) -> Option<&[f64]> {
        match self {
            LoadedModel::Expression { g, .. } => g.as_deref(),
            _ => None,
        }
    }
}

impl ShapleyOperator for LoadedModel {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> ergodix::Result<Vec<f64>> {
        match self {
            LoadedModel::Finite(g) => g.apply(x),
            LoadedModel::Risk(m) => m.apply(x),
            LoadedModel::Expression { spec, .. } => spec.eval(x),
            LoadedModel::Builtin => BuiltinExample::apply(x),
        }
    }

    fn kind(&self) -> String {
        LoadedModel::kind(self).into()
    }

    fn hyperarc_oracle(&self, tail: &StateSet, head: u32, sign: Sign) -> Option<bool> {
        match self {
            LoadedModel::Finite(g) => g.hyperarc_oracle(tail, head, sign),
            LoadedModel::Risk(m) => m.hyperarc_oracle(tail, head, sign),
            LoadedModel::Expression { spec, .. } => spec.hyperarc_oracle(tail, head, sign),
            LoadedModel::Builtin => None,
        }
    }
}

/// Reads, parses and structurally validates a model file. Axiom vetting of
/// expression coordinates is a separate step ([`vet_axioms`]) so `validate`
/// can report it explicitly.
pub fn load(path: &Path, renormalize: bool) -> anyhow::Result<LoadedModel> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| {
        anyhow!(
            "{}: schema error at line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        )
    })?;
    convert(file, renormalize)
}

fn convert(file: ModelFile, renormalize: bool) -> anyhow::Result<LoadedModel> {
    match file {
        ModelFile::FiniteGame { n, states } => {
            if states.len() != n {
                bail!("\"n\" is {n} but {} states are given", states.len());
            }
            let states = states
                .into_iter()
                .map(|s| {
                    s.min_actions
                        .into_iter()
                        .enumerate()
                        .map(|(ai, a)| {
                            let replies = a
                                .max_actions
                                .into_iter()
                                .enumerate()
                                .map(|(bi, b)| {
                                    MaxAction::new(
                                        b.name.unwrap_or_else(|| format!("b{}", bi + 1)),
                                        b.payment,
                                        b.transition,
                                    )
                                })
                                .collect();
                            MinAction::new(
                                a.name.unwrap_or_else(|| format!("a{}", ai + 1)),
                                replies,
                            )
                        })
                        .collect()
                })
                .collect();
            let game = if renormalize {
                GameModel::new_renormalized(states)?
            } else {
                GameModel::new(states)?
            };
            Ok(LoadedModel::Finite(game))
        }
        ModelFile::RiskSensitive { matrix } => {
            Ok(LoadedModel::Risk(RiskSensitiveModel::new(matrix)?))
        }
        ModelFile::Expression {
            n,
            coords,
            hyperarcs_plus,
            hyperarcs_minus,
            g,
        } => {
            if coords.len() != n {
                bail!(
                    "\"n\" is {n} but {} coordinate expressions are given",
                    coords.len()
                );
            }
            if let Some(g) = &g {
                if g.len() != n {
                    bail!("\"g\" has length {}, expected {n}", g.len());
                }
            }
            let to_arcs = |defs: Vec<ArcDef>| {
                defs.into_iter()
                    .map(|a| (StateSet::new(a.tail), a.head))
                    .collect::<Vec<_>>()
            };
            let spec = OperatorSpec::parse(&coords)?
                .with_declared_arcs(to_arcs(hyperarcs_plus), to_arcs(hyperarcs_minus))?;
            Ok(LoadedModel::Expression { spec, g })
        }
        ModelFile::BuiltinExample => Ok(LoadedModel::Builtin),
    }
}

/// Randomized axiom vetting. Table-backed kinds satisfy the axioms by
/// construction; user-supplied expressions genuinely need the check, and a
/// failure must block every analysis command.
pub fn vet_axioms(model: &LoadedModel, samples: usize, seed: u64) -> ergodix::AxiomReport {
    ergodix::validate_axioms(model, samples, seed)
}

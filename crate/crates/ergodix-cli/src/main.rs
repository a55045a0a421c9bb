//! Command-line front end: validate model files, certify ergodicity, solve
//! the ergodic eigenproblem, estimate mean payoffs and simulate strategies.
//!
//! Exit codes: 0 for a positive result (valid / ergodic / converged), 1 for a
//! negative one (non-ergodic / not converged), 2 for any error.

mod model_file;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use ergodix::{
    build_pair_finite, build_pair_probed, certify, extract_policies, simulate_stationary,
    solve_ergodic, value_iteration, Eigenpair, HypergraphPair, ProbeSchedule, ShapleyOperator,
    Shifted, StationaryStrategyPair, Verdict,
};
use model_file::{load, vet_axioms, LoadedModel};

#[derive(Parser)]
#[command(
    name = "ergodix",
    version,
    about = "Ergodicity certification and mean-payoff solving for zero-sum stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Accept transition rows that do not sum to 1 and rescale them.
    #[arg(long, global = true)]
    renormalize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file: schema, stochasticity and operator axioms.
    Validate {
        file: PathBuf,
        /// Samples for the randomized axiom check.
        #[arg(long, default_value_t = 1000)]
        axiom_samples: usize,
        /// Seed for the randomized axiom check.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit a single JSON line instead of the human report.
        #[arg(long)]
        machine: bool,
    },
    /// Build the divergence hypergraphs and certify ergodicity.
    Certify {
        file: PathBuf,
        #[arg(long)]
        machine: bool,
        /// Write hplus.dot and hminus.dot into this directory.
        #[arg(long, value_name = "DIR")]
        dot: Option<PathBuf>,
    },
    /// Solve the ergodic equation g + T(u) = lambda*1 + u.
    Solve {
        file: PathBuf,
        /// Payment perturbation, e.g. --g 0,0,1 (overrides the file's "g").
        #[arg(long, value_name = "v1,v2,...")]
        g: Option<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// Also print epsilon-optimal stationary strategies (finite games).
        #[arg(long)]
        policies: bool,
        /// Optimality slack used when extracting policies.
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        machine: bool,
    },
    /// Estimate the mean payoff by value iteration.
    Meanpayoff {
        file: PathBuf,
        /// Number of value-iteration steps.
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, value_name = "v1,v2,...")]
        g: Option<String>,
        #[arg(long)]
        machine: bool,
    },
    /// Solve a finite game, fix greedy stationary strategies, and check the
    /// mean payoff by Monte Carlo rollouts.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Optimality slack used when extracting policies.
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        machine: bool,
    },
    /// Print the divergence hypergraph pair.
    Hypergraphs {
        file: PathBuf,
        #[arg(long)]
        machine: bool,
        /// Write hplus.dot and hminus.dot into this directory.
        #[arg(long, value_name = "DIR")]
        dot: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("ERGODIX_THREADS") {
        let threads: usize = raw
            .parse()
            .with_context(|| format!("ERGODIX_THREADS must be a positive integer, got '{raw}'"))?;
        if threads == 0 {
            bail!("ERGODIX_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("failed to configure the worker pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads() -> anyhow::Result<()> {
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Validate {
            file,
            axiom_samples,
            seed,
            machine,
        } => cmd_validate(&file, cli.renormalize, axiom_samples, seed, machine),
        Command::Certify { file, machine, dot } => {
            cmd_certify(&file, cli.renormalize, machine, dot.as_deref())
        }
        Command::Solve {
            file,
            g,
            tol,
            max_iter,
            policies,
            epsilon,
            machine,
        } => cmd_solve(
            &file,
            cli.renormalize,
            g.as_deref(),
            tol,
            max_iter,
            policies,
            epsilon,
            machine,
        ),
        Command::Meanpayoff {
            file,
            iters,
            g,
            machine,
        } => cmd_meanpayoff(&file, cli.renormalize, iters, g.as_deref(), machine),
        Command::Simulate {
            file,
            horizon,
            trials,
            seed,
            tol,
            epsilon,
            machine,
        } => cmd_simulate(
            &file,
            cli.renormalize,
            horizon,
            trials,
            seed,
            tol,
            epsilon,
            machine,
        ),
        Command::Hypergraphs { file, machine, dot } => {
            cmd_hypergraphs(&file, cli.renormalize, machine, dot.as_deref())
        }
    }
}

/// Expression operators are user-supplied and must pass the axiom check
/// before any analysis; table-backed kinds hold by construction.
fn load_vetted(path: &Path, renormalize: bool) -> anyhow::Result<LoadedModel> {
    let model = load(path, renormalize)?;
    if matches!(model, LoadedModel::Expression { .. }) {
        let report = vet_axioms(&model, 1000, 0);
        if !report.passed() {
            bail!("expression operator rejected: {report}");
        }
    }
    Ok(model)
}

fn parse_g(raw: Option<&str>, model: &LoadedModel) -> anyhow::Result<Option<Vec<f64>>> {
    let parsed = match raw {
        Some(text) => {
            let entries: Result<Vec<f64>, _> =
                text.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let g = entries.with_context(|| format!("cannot parse --g '{text}'"))?;
            Some(g)
        }
        None => model.file_g().map(<[f64]>::to_vec),
    };
    if let Some(g) = &parsed {
        if g.len() != model.n() {
            bail!("g has length {}, expected {}", g.len(), model.n());
        }
    }
    Ok(parsed)
}

fn build_pair(model: &LoadedModel) -> anyhow::Result<HypergraphPair> {
    let pair = match model {
        LoadedModel::Finite(game) => build_pair_finite(game)?,
        other => build_pair_probed(other, &ProbeSchedule::default())?,
    };
    Ok(pair)
}

fn write_dot(pair: &HypergraphPair, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, graph) in [("hplus", pair.hplus()), ("hminus", pair.hminus())] {
        let path = dir.join(format!("{name}.dot"));
        std::fs::write(&path, graph.to_dot(name))
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_validate(
    path: &Path,
    renormalize: bool,
    samples: usize,
    seed: u64,
    machine: bool,
) -> anyhow::Result<i32> {
    let model = match load(path, renormalize) {
        Ok(m) => m,
        Err(e) => {
            if machine {
                println!(
                    "{}",
                    json!({
                        "command": "validate",
                        "valid": false,
                        "error": format!("{e:#}"),
                    })
                );
            } else {
                eprintln!("structure: {e:#}");
                println!("INVALID");
            }
            return Ok(2);
        }
    };
    let report = vet_axioms(&model, samples, seed);
    if machine {
        let violation = report.violation.as_ref().map(|v| {
            json!({
                "kind": v.kind.to_string(),
                "sample": v.sample,
                "detail": v.detail,
            })
        });
        println!(
            "{}",
            json!({
                "command": "validate",
                "kind": model.kind(),
                "n": model.n(),
                "valid": report.passed(),
                "axioms": { "samples": report.samples, "seed": report.seed, "violation": violation },
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        println!("structure: ok");
        println!("axioms: {report}");
        println!("{}", if report.passed() { "VALID" } else { "INVALID" });
    }
    Ok(if report.passed() { 0 } else { 2 })
}

fn arcs_json(graph: &ergodix::Hypergraph) -> serde_json::Value {
    let arcs: Vec<_> = graph
        .arcs()
        .iter()
        .map(|a| {
            json!({
                "tail": a.tail().iter().collect::<Vec<u32>>(),
                "head": a.head().iter().next().unwrap(),
            })
        })
        .collect();
    json!(arcs)
}

fn cmd_certify(
    path: &Path,
    renormalize: bool,
    machine: bool,
    dot: Option<&Path>,
) -> anyhow::Result<i32> {
    let model = load_vetted(path, renormalize)?;
    let pair = build_pair(&model)?;
    let cert = certify(&pair)?;
    if let Some(dir) = dot {
        write_dot(&pair, dir)?;
    }
    if machine {
        let (witness, verdict) = match &cert.verdict {
            Verdict::Ergodic => (serde_json::Value::Null, "ergodic"),
            Verdict::NonErgodic(w) => (
                json!({
                    "i": w.iset().iter().collect::<Vec<u32>>(),
                    "j": w.jset().iter().collect::<Vec<u32>>(),
                }),
                "non_ergodic",
            ),
        };
        println!(
            "{}",
            json!({
                "command": "certify",
                "kind": model.kind(),
                "n": cert.n,
                "verdict": verdict,
                "witness": witness,
                "provenance": {
                    "hplus": cert.plus_provenance.to_string(),
                    "hminus": cert.minus_provenance.to_string(),
                },
                "arcs": { "hplus": cert.plus_arcs, "hminus": cert.minus_arcs },
                "subsets_examined": cert.subsets_examined,
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        println!("{cert}");
    }
    Ok(if cert.is_ergodic() { 0 } else { 1 })
}

struct SolvedOperator {
    eigen: Eigenpair,
    policies: Option<StationaryStrategyPair>,
}

fn solve_model(
    model: &LoadedModel,
    g: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    want_policies: bool,
    epsilon: f64,
) -> anyhow::Result<SolvedOperator> {
    let shifted;
    let op: &dyn ShapleyOperator = match g {
        Some(g) => {
            shifted = Shifted::new(model, g.to_vec())?;
            &shifted
        }
        None => model,
    };
    let eigen = solve_ergodic(op, tol, max_iter)?;
    let policies = if want_policies {
        let game = model
            .as_finite()
            .ok_or_else(|| anyhow::anyhow!("policies are defined for finite games only"))?;
        // Greedy selection sees the payment perturbation only as a constant
        // shift per state, which never changes the argmin/argmax on u.
        Some(extract_policies(game, &eigen.u, epsilon)?)
    } else {
        None
    };
    Ok(SolvedOperator { eigen, policies })
}

fn policies_json(game: &ergodix::GameModel, pol: &StationaryStrategyPair) -> serde_json::Value {
    let per_state: Vec<_> = (0..game.n())
        .map(|i| {
            let actions = game.actions(i);
            let a = pol.min_action(i);
            let replies: Vec<_> = (0..actions.len())
                .map(|ai| {
                    json!({
                        "min_action": actions[ai].name,
                        "max_reply": actions[ai].max_actions[pol.max_reply(i, ai)].name,
                    })
                })
                .collect();
            json!({
                "state": i + 1,
                "min_plays": actions[a].name,
                "max_replies": replies,
            })
        })
        .collect();
    json!({ "epsilon": pol.epsilon(), "per_state": per_state })
}

fn print_policies(game: &ergodix::GameModel, pol: &StationaryStrategyPair) {
    println!(
        "epsilon-optimal stationary strategies (epsilon = {:e}):",
        pol.epsilon()
    );
    for i in 0..game.n() {
        let actions = game.actions(i);
        let a = pol.min_action(i);
        let replies: Vec<String> = (0..actions.len())
            .map(|ai| {
                format!(
                    "{} -> {}",
                    actions[ai].name,
                    actions[ai].max_actions[pol.max_reply(i, ai)].name
                )
            })
            .collect();
        println!(
            "  state {}: min plays '{}'; max replies: {}",
            i + 1,
            actions[a].name,
            replies.join(", ")
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    renormalize: bool,
    g_raw: Option<&str>,
    tol: f64,
    max_iter: usize,
    want_policies: bool,
    epsilon: f64,
    machine: bool,
) -> anyhow::Result<i32> {
    let model = load_vetted(path, renormalize)?;
    let g = parse_g(g_raw, &model)?;
    let solved = solve_model(&model, g.as_deref(), tol, max_iter, want_policies, epsilon)?;
    let eigen = &solved.eigen;
    if machine {
        let policies = match (&solved.policies, model.as_finite()) {
            (Some(p), Some(game)) => policies_json(game, p),
            _ => serde_json::Value::Null,
        };
        println!(
            "{}",
            json!({
                "command": "solve",
                "kind": model.kind(),
                "n": model.n(),
                "g": g,
                "converged": eigen.converged,
                "lambda": eigen.lambda,
                "u": eigen.u,
                "residual": eigen.residual,
                "iterations": eigen.iterations,
                "policies": policies,
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        if let Some(g) = &g {
            println!("g: {g:?}");
        }
        println!("lambda = {:.6}", eigen.lambda);
        println!("u (mean-zero gauge):");
        for (i, v) in eigen.u.iter().enumerate() {
            println!("  state {}: {v:.9}", i + 1);
        }
        println!(
            "residual = {:.3e} after {} iterations",
            eigen.residual, eigen.iterations
        );
        if let (Some(p), Some(game)) = (&solved.policies, model.as_finite()) {
            print_policies(game, p);
        }
        println!(
            "{}",
            if eigen.converged {
                "CONVERGED"
            } else {
                "NOT CONVERGED"
            }
        );
    }
    Ok(if eigen.converged { 0 } else { 1 })
}

fn cmd_meanpayoff(
    path: &Path,
    renormalize: bool,
    iters: usize,
    g_raw: Option<&str>,
    machine: bool,
) -> anyhow::Result<i32> {
    let model = load_vetted(path, renormalize)?;
    let g = parse_g(g_raw, &model)?;
    let shifted;
    let op: &dyn ShapleyOperator = match &g {
        Some(g) => {
            shifted = Shifted::new(&model, g.clone())?;
            &shifted
        }
        None => &model,
    };
    let est = value_iteration(op, iters)?;
    if machine {
        println!(
            "{}",
            json!({
                "command": "meanpayoff",
                "kind": model.kind(),
                "n": model.n(),
                "g": g,
                "horizon": est.horizon,
                "per_state": est.per_state,
                "value": est.value,
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        println!("mean payoff estimate after {} iterations:", est.horizon);
        for (i, v) in est.per_state.iter().enumerate() {
            println!("  state {}: {v:.9}", i + 1);
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    renormalize: bool,
    horizon: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    epsilon: f64,
    machine: bool,
) -> anyhow::Result<i32> {
    let model = load_vetted(path, renormalize)?;
    let game = match model.as_finite() {
        Some(g) => g,
        None => bail!(
            "simulate requires a finite_game model, got {}",
            model.kind()
        ),
    };
    let eigen = solve_ergodic(game, tol, 1_000_000)?;
    if !eigen.converged {
        if machine {
            println!(
                "{}",
                json!({
                    "command": "simulate",
                    "kind": model.kind(),
                    "converged": false,
                    "residual": eigen.residual,
                })
            );
        } else {
            println!(
                "solver did not converge (best residual {:.3e}); no stationary optimal pair to fix",
                eigen.residual
            );
        }
        return Ok(1);
    }
    let policies = extract_policies(game, &eigen.u, epsilon)?;
    let sim = simulate_stationary(game, &policies, horizon, trials, seed)?;
    if machine {
        let per_state: Vec<_> = sim
            .per_state
            .iter()
            .map(|e| json!({ "mean": e.mean, "std_error": e.std_error }))
            .collect();
        println!(
            "{}",
            json!({
                "command": "simulate",
                "kind": model.kind(),
                "n": model.n(),
                "converged": true,
                "lambda": eigen.lambda,
                "horizon": sim.horizon,
                "trials": sim.trials,
                "seed": sim.seed,
                "per_state": per_state,
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        println!(
            "solved: lambda = {:.6} (residual {:.3e})",
            eigen.lambda, eigen.residual
        );
        println!(
            "empirical mean payoff ({} trials, horizon {}, seed {}):",
            sim.trials, sim.horizon, sim.seed
        );
        for (i, e) in sim.per_state.iter().enumerate() {
            println!("  state {}: {:.6} +/- {:.6}", i + 1, e.mean, e.std_error);
        }
    }
    Ok(0)
}

fn cmd_hypergraphs(
    path: &Path,
    renormalize: bool,
    machine: bool,
    dot: Option<&Path>,
) -> anyhow::Result<i32> {
    let model = load_vetted(path, renormalize)?;
    let pair = build_pair(&model)?;
    if let Some(dir) = dot {
        write_dot(&pair, dir)?;
    }
    let (plus_prov, minus_prov) = pair.provenance();
    if machine {
        println!(
            "{}",
            json!({
                "command": "hypergraphs",
                "kind": model.kind(),
                "n": pair.n(),
                "hplus": {
                    "provenance": plus_prov.to_string(),
                    "size": pair.hplus().size(),
                    "arcs": arcs_json(pair.hplus()),
                },
                "hminus": {
                    "provenance": minus_prov.to_string(),
                    "size": pair.hminus().size(),
                    "arcs": arcs_json(pair.hminus()),
                },
            })
        );
    } else {
        println!("kind: {} (n = {})", model.kind(), model.n());
        for (name, graph, prov) in [
            ("H+", pair.hplus(), plus_prov),
            ("H-", pair.hminus(), minus_prov),
        ] {
            println!(
                "{name} ({prov}, {} arcs, size {}):",
                graph.arcs().len(),
                graph.size()
            );
            for arc in graph.arcs() {
                println!("  {arc}");
            }
        }
    }
    Ok(0)
}

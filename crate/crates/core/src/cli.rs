//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{run_experiment, ExperimentSpec};
use crate::games::{
    constants, in_between_game, orthogonal_bilinear_game, random_bilinear_game, random_monotone_game, seeded_rng,
    GameConstants, GameProblem,
};
use crate::lower_bounds::{verify_lower_bound, InstanceKind};
use crate::rates::{
    bilinear_corollary_bound, certify_with, global_rate, gd_spectral_bounds, keg_rate_bound, keg_step_cap, predict,
    predict_simplified, CertificateMode, GdSpectralBounds, Monitored, RateCertificate, DEFAULT_WINDOW,
};
use crate::solvers::{co_parameters, gd_default_eta, quarter_lipschitz_eta, run, MethodKind, SolverConfig, Trajectory};
use crate::spectral::ComplexSpectrum;

#[derive(Parser, Debug)]
#[command(name = "game-rates", version, about = "Convergence rates of first-order methods on affine games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a problem as JSON.
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a method and certify its observed rate.
    Solve(SolveArgs),
    /// Spectral rate prediction for a problem and method.
    Analyze {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "eg")]
        method: MethodKind,
        #[arg(long, default_value = "auto")]
        eta: Eta,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Use the simplified extrapolation bound.
        #[arg(long)]
        simplified: bool,
    },
    /// Lower-bound pipeline on a Chebyshev instance.
    Lowerbound {
        #[arg(long)]
        k: usize,
        /// `μ` for the convex kind, `γ` for the bilinear kind.
        #[arg(long, alias = "gamma")]
        mu: f64,
        #[arg(long = "L", alias = "lipschitz", default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value = "convex")]
        kind: InstanceKind,
    },
    /// Improvement-ratio study on random monotone games.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    Bilinear,
    OrthogonalBilinear,
    Monotone,
    InBetween,
    File,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "bilinear")]
    problem: ProblemKind,
    /// Problem JSON; implies `--problem file`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Player dimension of square bilinear games.
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gaussian offsets for random bilinear games.
    #[arg(long)]
    with_offset: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Eta {
    Auto,
    Value(f64),
}

impl FromStr for Eta {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Eta::Auto);
        }
        s.parse().map(Eta::Value).map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "eg")]
    method: MethodKind,
    #[arg(long, default_value = "auto")]
    eta: Eta,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Trajectory CSV destination.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Certificate JSON destination; stdout when absent.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Study {
    Balance,
    Growth,
    Custom,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "balance")]
    study: Study,
    /// `d1 + d2` for the balance study.
    #[arg(long, default_value_t = 500)]
    total: usize,
    /// Fixed `d1` for the growth study.
    #[arg(long, default_value_t = 100)]
    d1: usize,
    /// Comma-separated `d2` values for the growth study.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
    d2: Vec<usize>,
    /// Comma-separated `d1xd2` pairs for the custom study.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    name: Option<String>,
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("pair {s:?} is not of the form <d1>x<d2>"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn build_problem(a: &ProblemArgs) -> Result<GameProblem> {
    if let Some(path) = &a.input {
        return GameProblem::from_json(&fs::read_to_string(path)?);
    }
    match a.problem {
        ProblemKind::Bilinear => {
            random_bilinear_game(a.d1.unwrap_or(a.dim), a.d2.unwrap_or(a.dim), a.seed, a.with_offset)
        }
        ProblemKind::OrthogonalBilinear => orthogonal_bilinear_game(a.dim, a.seed),
        ProblemKind::Monotone => random_monotone_game(a.d1.unwrap_or(a.dim), a.d2.unwrap_or(a.dim), a.seed),
        ProblemKind::InBetween => in_between_game(a.epsilon),
        ProblemKind::File => Err(Error::Config("--problem file requires --input".into())),
    }
}

/// Zero symmetric part: the field is a bilinear game.
fn is_skew(p: &GameProblem) -> bool {
    let j = p.field().jacobian();
    j.add(&j.transpose()).map(|s| s.max_abs() == 0.0).unwrap_or(false)
}

/// Smallest singular value above `1e-12 σ_max`.
fn smallest_nonzero(s: &ComplexSpectrum) -> f64 {
    let max = s.max_abs();
    s.without_near_zero(1e-12).min_abs().min(max)
}

fn resolve_eta(eta: Eta, method: MethodKind, k: usize, s: &ComplexSpectrum, c: &GameConstants) -> Result<f64> {
    if let Eta::Value(x) = eta {
        return Ok(x);
    }
    Ok(match method {
        MethodKind::Gradient => gd_default_eta(s, c),
        MethodKind::KExtrapolation if k >= 3 => quarter_lipschitz_eta(c).min(keg_step_cap(s, k)?),
        MethodKind::KExtrapolation | MethodKind::Optimistic => quarter_lipschitz_eta(c),
        MethodKind::Proximal => 1.0 / c.lipschitz,
        MethodKind::Consensus => 0.0,
    })
}

struct Plan {
    predicted: f64,
    monitored: Monitored,
    mode: CertificateMode,
    tail_only: bool,
    label: &'static str,
}

fn certificate_plan(method: MethodKind, p: &GameProblem, cfg: &SolverConfig, s: &ComplexSpectrum) -> Result<Plan> {
    let c = constants(p)?;
    let per_step = |predicted, monitored, label| Plan {
        predicted,
        monitored,
        mode: CertificateMode::PerStep,
        tail_only: false,
        label,
    };
    Ok(match method {
        MethodKind::Gradient => {
            let predicted = match gd_spectral_bounds(s)? {
                GdSpectralBounds::Convergent { upper, eta, .. } if (cfg.eta - eta).abs() <= 1e-12 * eta => upper,
                // No contraction is claimed off the certified step.
                _ => 1.0,
            };
            Plan { tail_only: true, ..per_step(predicted, Monitored::Distance, "gradient_spectral") }
        }
        MethodKind::KExtrapolation if cfg.k == 2 && is_skew(p) && cfg.eta <= quarter_lipschitz_eta(&c) * (1.0 + 1e-12) => {
            let smin = smallest_nonzero(s);
            let bound = bilinear_corollary_bound(smin, s.max_abs())?;
            // On a skew field every quantity commutes with J; the field norm
            // contracts even when the solution set is not a point.
            let monitored = if s.min_abs() > 1e-12 * s.max_abs() { Monitored::Distance } else { Monitored::Hamiltonian };
            per_step(bound, monitored, "bilinear_extragradient")
        }
        MethodKind::KExtrapolation if cfg.k == 2 => {
            per_step(global_rate(&c, method, cfg.eta)?, Monitored::Distance, "extragradient_global")
        }
        MethodKind::KExtrapolation => Plan {
            tail_only: true,
            ..per_step(keg_rate_bound(s, cfg.eta, cfg.k)?, Monitored::Distance, "k_extrapolation_spectral")
        },
        MethodKind::Optimistic => Plan {
            mode: CertificateMode::Envelope,
            ..per_step(global_rate(&c, method, cfg.eta)?, Monitored::Distance, "optimistic_envelope")
        },
        MethodKind::Consensus => per_step(global_rate(&c, method, 0.0)?, Monitored::Hamiltonian, "consensus_hamiltonian"),
        MethodKind::Proximal => per_step(global_rate(&c, method, cfg.eta)?, Monitored::Distance, "proximal_global"),
    })
}

fn initial_point(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed, 1);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Runs `solve` and returns the trajectory with its certificate.
fn solve(a: &SolveArgs) -> Result<(Trajectory, RateCertificate)> {
    let p = build_problem(&a.problem)?;
    let s = p.spectrum()?;
    let c = constants(&p)?;
    let method = a.method;
    let mut cfg = SolverConfig { k: a.k, max_steps: a.steps, stop_tol: a.tol, ..SolverConfig::default() };
    cfg.eta = resolve_eta(a.eta, method, a.k, &s, &c)?;
    if method == MethodKind::Consensus {
        let (al, be) = co_parameters(&c)?;
        cfg.alpha = a.alpha.unwrap_or(al);
        cfg.beta = a.beta.unwrap_or(be);
    }
    let plan = certificate_plan(method, &p, &cfg, &s)?;
    let traj = run(method, &p, &cfg, &initial_point(p.dim(), a.problem.seed))?;
    let steps = traj.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::InsufficientData("no steps were taken".into()));
    }
    let window = if plan.tail_only { DEFAULT_WINDOW.min(steps) } else { steps };
    let inputs = json!({
        "method": method.name(),
        "eta": cfg.eta,
        "k": cfg.k,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "steps": steps,
        "constants": c,
        "diverged": traj.diverged,
        "problem": p.provenance(),
    });
    let mut cert = certify_with(&traj, plan.predicted, window, plan.monitored, plan.mode, plan.label, inputs)?;
    if traj.diverged {
        cert.satisfied = false;
    }
    Ok((traj, cert))
}

fn analyze(problem: &ProblemArgs, method: MethodKind, eta: Eta, k: usize, simplified: bool) -> Result<Value> {
    let p = build_problem(problem)?;
    let s = p.spectrum()?;
    let pred = if simplified {
        predict_simplified(&s)?
    } else {
        let c = constants(&p)?;
        predict(method, &s, resolve_eta(eta, method, k, &s, &c)?, k)?
    };
    Ok(serde_json::to_value(pred)?)
}

fn experiment(a: &ExperimentArgs) -> Result<Value> {
    let mut spec = match a.study {
        Study::Balance => ExperimentSpec::balance_study(a.total, a.trials, a.seed, &a.out),
        Study::Growth => ExperimentSpec::growth_study(a.d1, &a.d2, a.trials, a.seed, &a.out),
        Study::Custom => ExperimentSpec {
            name: "custom".into(),
            pairs: a.pairs.iter().map(|s| parse_pair(s)).collect::<Result<_>>()?,
            trials: a.trials,
            seed: a.seed,
            output: a.out.clone(),
        },
    };
    if let Some(n) = &a.name {
        spec.name = n.clone();
    }
    let r = run_experiment(&spec)?;
    Ok(json!({
        "csv": r.csv_path,
        "manifest": r.manifest_path,
        "summaries": r.summaries,
        "balance": r.balance,
    }))
}

fn write_json(v: &Value, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate { problem, output } => {
            let p = build_problem(&problem)?;
            let mut text = p.to_json()?;
            text.push('\n');
            match output {
                Some(path) => fs::write(path, text)?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Solve(a) => {
            let (traj, cert) = solve(&a)?;
            if let Some(path) = &a.csv {
                fs::write(path, traj.to_csv())?;
            }
            write_json(&serde_json::to_value(cert)?, a.certificate.as_ref(), out)?;
        }
        Command::Analyze { problem, method, eta, k, simplified } => {
            write_json(&analyze(&problem, method, eta, k, simplified)?, None, out)?;
        }
        Command::Lowerbound { k, mu, l, kind } => {
            write_json(&serde_json::to_value(verify_lower_bound(mu, l, k, kind)?)?, None, out)?;
        }
        Command::Experiment(a) => write_json(&experiment(&a)?, None, out)?,
    }
    Ok(())
}

/// Appends `--key value` for each config entry whose flag is not already given.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let path = argv.get(pos + 1).ok_or_else(|| Error::Config("--config needs a path".into()))?.clone();
    argv.drain(pos..pos + 2);
    let cfg: Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
    let obj = cfg.as_object().ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    for (key, val) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if argv.iter().any(|a| a.to_str().is_some_and(|s| s == flag || s.starts_with(&format!("{flag}=")))) {
            continue;
        }
        match val {
            Value::Bool(true) => argv.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => argv.extend([flag.into(), s.into()]),
            Value::Array(items) => {
                let joined: Vec<String> =
                    items.iter().map(|x| x.as_str().map_or_else(|| x.to_string(), str::to_string)).collect();
                argv.extend([flag.into(), joined.join(",").into()]);
            }
            other => argv.extend([flag.into(), other.to_string().into()]),
        }
    }
    Ok(argv)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
///
/// Returns 0 on success, 1 on domain or numerical errors, 2 on usage errors.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = match merge_config(argv.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

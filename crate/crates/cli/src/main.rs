//! `mcstab` command-line driver.
//!
//! Exit codes: 0 success, 1 tolerance failure, 2 usage error, 3 model error,
//! 4 certificate failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcstab::average_cost::stationary_average;
use mcstab::embedded::reconstruct_invariant;
use mcstab::ergodicity::invariant_distribution;
use mcstab::experiments::{
    certify, default_signed_alphas, monte_carlo_average, render_csv, render_json, run_suite_with_model,
    small_risk_sweep, to_csv, ExperimentConfig, SequenceChoice, SweepConfig,
};
use mcstab::risk::{solve_risk_poisson, SolverOptions};
use mcstab::{closed_loop, BallPair, Error, MarkovControl, Model, RiskFactor, SearchBudget};

const EXIT_TOLERANCE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_CERTIFICATE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "mcstab", version, about = "Stability checks for finite controlled Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ergodicity, minorization and embedded-chain certificates.
    Certify(Common),
    /// Invariant distribution by direct solve and by return-time reconstruction.
    Invariant {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        control: ControlArg,
        #[command(flatten)]
        balls: BallArgs,
    },
    /// Average cost, risk-sensitive rate and functional for a control.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        control: ControlArg,
    },
    /// Convergence experiments along a control sequence.
    Suite {
        #[command(flatten)]
        common: Common,
        /// Problems to run: `1..6`, `2`, or `1,3,5`.
        #[arg(long, default_value = "1..6")]
        problem: String,
        /// `grid` for dyadic rounding of the target, or a JSON file with a list of controls.
        #[arg(long, default_value = "grid")]
        seq: String,
        /// Largest index for dyadic rounding.
        #[arg(long, default_value_t = 12)]
        max_index: usize,
        /// Horizon of the log-moment proximity bound.
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
    },
    /// Small-risk gaps over a grid of risk factors.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Take the supremum over every grid control, not only the target.
        #[arg(long)]
        over_controls: bool,
    },
    /// Monte Carlo estimate of the long-run average cost next to its exact value.
    McCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        control: ControlArg,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// `canonical` or a model file (`.json`, otherwise TOML).
    #[arg(long)]
    model: String,
    /// Comma-separated risk factors.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha_grid: Option<Vec<f64>>,
    /// Largest number of controls enumerated before sampling.
    #[arg(long, default_value_t = mcstab::search::DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
    /// Seed for sampled suprema and simulation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn search_budget(&self) -> SearchBudget {
        SearchBudget { max_enumeration: self.budget, seed: self.seed, ..SearchBudget::default() }
    }
}

#[derive(Args, Debug)]
struct ControlArg {
    /// Comma-separated control values; the model's target when absent.
    #[arg(long, value_delimiter = ',')]
    control: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct BallArgs {
    /// Comma-separated states of `R`; overrides the model's balls.
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    /// Comma-separated states of `R1`.
    #[arg(long, value_delimiter = ',')]
    r1: Option<Vec<usize>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn model(e: Error) -> Self {
        Self { code: EXIT_MODEL, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::CertificateFailure(_) => EXIT_CERTIFICATE,
            Error::InvalidArgument(_) | Error::InvalidBalls(_) => EXIT_USAGE,
            Error::Model(_) | Error::MalformedFamily(_) => EXIT_MODEL,
            _ => EXIT_TOLERANCE,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Certify(common) => cmd_certify(&common),
        Command::Invariant { common, control, balls } => cmd_invariant(&common, &control, &balls),
        Command::Evaluate { common, control } => cmd_evaluate(&common, &control),
        Command::Suite { common, problem, seq, max_index, horizon } => {
            cmd_suite(&common, &problem, &seq, max_index, horizon)
        }
        Command::Sweep { common, over_controls } => cmd_sweep(&common, over_controls),
        Command::McCheck { common, control, steps, replications, start } => {
            cmd_mc_check(&common, &control, steps, replications, start)
        }
    }
}

fn load(common: &Common) -> std::result::Result<Model, Failure> {
    Model::resolve(&common.model).map_err(Failure::model)
}

fn control_for(model: &Model, arg: &ControlArg) -> std::result::Result<MarkovControl, Failure> {
    let u = arg.control.clone().map(MarkovControl::new).unwrap_or_else(|| model.target.clone());
    model.family.check_control(&u).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(u)
}

fn alphas(common: &Common, default: impl FnOnce() -> Vec<f64>) -> std::result::Result<Vec<RiskFactor>, Failure> {
    let grid = common.alpha_grid.clone().unwrap_or_else(default);
    if grid.is_empty() {
        return Err(Failure::usage("empty --alpha-grid"));
    }
    grid.into_iter().map(|a| RiskFactor::new(a).map_err(|e| Failure::usage(e.to_string()))).collect()
}

fn emit(common: &Common, text: &str) -> std::result::Result<(), Failure> {
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> std::result::Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure { code: EXIT_TOLERANCE, message: e.to_string() })
}

fn none_if_infinite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct CertificateLine {
    quantity: &'static str,
    value: Option<f64>,
    holds: bool,
    exact: bool,
}

fn cmd_certify(common: &Common) -> CliResult {
    let model = load(common)?;
    let report = certify(&model, &common.search_budget())?;
    let text = match common.format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut lines = vec![
                CertificateLine {
                    quantity: "delta",
                    value: Some(report.ue.delta),
                    holds: report.ue_holds(),
                    exact: report.ue.exact,
                },
                CertificateLine {
                    quantity: "K",
                    value: none_if_infinite(report.me.k),
                    holds: report.me_holds(),
                    exact: report.me.exact,
                },
            ];
            if let Some(emb) = &report.embedded {
                lines.push(CertificateLine {
                    quantity: "delta_R",
                    value: Some(emb.er.value),
                    holds: emb.er.value < 1.0,
                    exact: emb.er.exact,
                });
                lines.push(CertificateLine {
                    quantity: "EC",
                    value: none_if_infinite(emb.ec.value),
                    holds: emb.ec.value.is_finite(),
                    exact: emb.ec.exact,
                });
                lines.push(CertificateLine {
                    quantity: "PR",
                    value: none_if_infinite(emb.pr.value),
                    holds: emb.pr.value.is_finite(),
                    exact: emb.pr.exact,
                });
            }
            to_csv(&lines)?
        }
    };
    emit(common, &text)?;
    if report.stability_holds() {
        Ok(0)
    } else {
        eprintln!("neither uniform ergodicity nor the embedded-chain conditions hold");
        Ok(EXIT_CERTIFICATE)
    }
}

#[derive(Serialize)]
struct InvariantLine {
    state: usize,
    label: String,
    direct: f64,
    embedded: Option<f64>,
}

fn cmd_invariant(common: &Common, control: &ControlArg, balls: &BallArgs) -> CliResult {
    let model = load(common)?;
    let u = control_for(&model, control)?;
    let balls = match (&balls.r, &balls.r1) {
        (Some(r), Some(r1)) => Some(BallPair::new(r.clone(), r1.clone(), model.family.n())?),
        (None, None) => model.balls.clone(),
        _ => return Err(Failure::usage("--r and --r1 must be given together")),
    };
    let direct = invariant_distribution(&closed_loop(&model.family, &u)?)?;
    let embedded = balls.map(|b| reconstruct_invariant(&model.family, &u, &b)).transpose()?;
    let text = match common.format {
        Format::Json => json(&serde_json::json!({ "direct": direct, "embedded": embedded }))?,
        Format::Csv => {
            let lines: Vec<InvariantLine> = (0..model.family.n())
                .map(|x| InvariantLine {
                    state: x,
                    label: model.family.states().label(x),
                    direct: direct.probs()[x],
                    embedded: embedded.as_ref().map(|e| e.pi.probs()[x]),
                })
                .collect();
            to_csv(&lines)?
        }
    };
    emit(common, &text)?;
    Ok(0)
}

#[derive(Serialize)]
struct EvaluateLine {
    alpha: f64,
    average_cost: f64,
    lambda: f64,
    risk_functional: f64,
    span_w: f64,
    iterations: usize,
}

fn cmd_evaluate(common: &Common, control: &ControlArg) -> CliResult {
    let model = load(common)?;
    let u = control_for(&model, control)?;
    let alphas = alphas(common, || vec![1.0, 0.1, -0.1, -1.0])?;
    let j = stationary_average(&model.family, &u, &model.cost)?.value;
    let p = closed_loop(&model.family, &u)?;
    let cu = model.cost.closed_loop(&u)?;
    let lines = alphas
        .iter()
        .map(|&alpha| {
            let sol = solve_risk_poisson(&p, &cu, alpha, &SolverOptions::default())?;
            Ok(EvaluateLine {
                alpha: alpha.value(),
                average_cost: j,
                lambda: sol.lambda,
                risk_functional: alpha.value() * sol.lambda,
                span_w: sol.span(),
                iterations: sol.iterations,
            })
        })
        .collect::<mcstab::Result<Vec<_>>>()?;
    let text = match common.format {
        Format::Json => json(&lines)?,
        Format::Csv => to_csv(&lines)?,
    };
    emit(common, &text)?;
    Ok(0)
}

fn parse_problems(spec: &str) -> std::result::Result<Vec<u8>, Failure> {
    let bad = || Failure::usage(format!("invalid --problem {spec:?}; expected e.g. 1..6, 2 or 1,3"));
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u8 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u8 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn parse_sequence(seq: &str) -> std::result::Result<SequenceChoice, Failure> {
    if seq == "grid" {
        return Ok(SequenceChoice::GridRound);
    }
    let text = std::fs::read_to_string(seq).map_err(|e| Failure::usage(format!("cannot read --seq {seq}: {e}")))?;
    let list: Vec<Vec<f64>> =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("--seq {seq}: {e}")))?;
    Ok(SequenceChoice::Explicit(list.into_iter().map(MarkovControl::new).collect()))
}

fn cmd_suite(common: &Common, problem: &str, seq: &str, max_index: usize, horizon: usize) -> CliResult {
    let problems = parse_problems(problem)?;
    let sequence = parse_sequence(seq)?;
    let model = load(common)?;
    let config = ExperimentConfig {
        model: common.model.clone(),
        problems,
        sequence,
        max_index,
        alpha_grid: common.alpha_grid.clone(),
        horizon_k: horizon,
        budget: common.search_budget(),
        ..ExperimentConfig::default()
    };
    let report = run_suite_with_model(&model, &config)?;
    let text = match common.format {
        Format::Csv => render_csv(&report.rows)?,
        Format::Json => render_json(&report)? + "\n",
    };
    emit(common, &text)?;
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    if failed == 0 {
        Ok(0)
    } else {
        eprintln!("{failed} of {} rows failed", report.rows.len());
        Ok(EXIT_TOLERANCE)
    }
}

fn cmd_sweep(common: &Common, over_controls: bool) -> CliResult {
    let model = load(common)?;
    let budget = common.search_budget();
    let report = certify(&model, &budget)?;
    for p in [5, 6] {
        report.require(p)?;
    }
    let alphas = alphas(common, default_signed_alphas)?;
    let config = SweepConfig { alphas: alphas.iter().map(|a| a.value()).collect(), over_controls, budget };
    let rows = small_risk_sweep(&model, report.ue.delta, &config)?;
    let text = match common.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => json(&rows)?,
    };
    emit(common, &text)?;
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { EXIT_TOLERANCE })
}

fn cmd_mc_check(common: &Common, control: &ControlArg, steps: usize, replications: usize, start: usize) -> CliResult {
    let model = load(common)?;
    let u = control_for(&model, control)?;
    let report = monte_carlo_average(&model.family, &u, &model.cost, start, steps, replications, common.seed)?;
    let text = match common.format {
        Format::Csv => to_csv(&[report])?,
        Format::Json => json(&report)?,
    };
    emit(common, &text)?;
    Ok(0)
}

//! Command-line front end: run a mechanism on a JSON instance, verify its
//! guarantees over seeded campaigns, generate instances, and benchmark.
//!
//! Exit codes: 0 when all checked bounds hold, 2 when a bound or guarantee
//! was violated, 1 on usage or input errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mechsched::core::{makespan, prediction_error, Instance, Prediction};
use mechsched::instances::{Family, GeneratorSpec};
use mechsched::makespan::{opt_oracle, ExactSolver, GreedySolver, Solver};
use mechsched::mechanisms::{assign_scaled_min, run_mechanism, MechanismKind, Params};
use mechsched::payments::{critical_payments_with, MonopolistPolicy};
use mechsched::verify::{
    broken_max_reporter, check_monotone, error_bound, evaluate_consistency, evaluate_error_curve,
    evaluate_robustness, fuzz_broken_first_price, fuzz_strategyproofness, robustness_bound,
    CampaignCfg, FuzzReport, MonotonicityReport, RatioReport, BOUND_SLACK,
};
use mechsched::{Error, Result};

#[derive(Parser)]
#[command(
    name = "mechsched",
    version,
    about = "Strategyproof scheduling with predictions"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one mechanism on an instance and report ratio, bound, payments.
    Run(RunArgs),
    /// Seeded verification campaigns for the mechanism guarantees.
    Verify(VerifyArgs),
    /// Generate instances (and predictions where the family defines one).
    Gen(GenArgs),
    /// Time mechanism runs over random instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// greedy | follow-prediction | simple-scaled-greedy | scaled-greedy | error-tolerant
    #[arg(long)]
    mechanism: String,
    /// Instance JSON file ({"n":..,"m":..,"p":[[..]]}, "inf" for infinity).
    #[arg(long)]
    instance: PathBuf,
    /// Prediction JSON file (same schema, entries must be positive).
    #[arg(long)]
    prediction: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_bar: Option<f64>,
    /// exact | greedy
    #[arg(long, default_value = "exact")]
    solver: String,
    /// Also compute critical-value payments.
    #[arg(long)]
    payments: bool,
    /// Per-job payment ceiling for monopolist jobs (default: refuse).
    #[arg(long)]
    monopolist_cap: Option<f64>,
    /// Write the full JSON record here as well as to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// monotonicity | strategyproof | consistency | robustness | error-curve | all
    #[arg(long)]
    suite: String,
    /// Mechanism id, or broken-max-reporter / broken-first-price for the
    /// detector sanity fixtures.
    #[arg(long)]
    mechanism: String,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_bar: Option<f64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Largest machine count sampled.
    #[arg(long, default_value_t = 4)]
    nmax: usize,
    /// Largest job count sampled.
    #[arg(long, default_value_t = 6)]
    mmax: usize,
    /// exact | greedy
    #[arg(long, default_value = "exact")]
    solver: String,
    /// Write the detailed JSON report here; the CSV summary goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// uniform | correlated | figure1 | figure2 | perturbed
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 1.0)]
    lo: f64,
    #[arg(long, default_value_t = 10.0)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// figure1 large entry.
    #[arg(long, default_value_t = 100.0)]
    k: f64,
    /// figure1/figure2 epsilon.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// perturbed target prediction error.
    #[arg(long, default_value_t = 2.0)]
    eta: f64,
    /// Instance destination (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Prediction destination, for families that define one.
    #[arg(long)]
    prediction_output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    mechanism: String,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta_bar: Option<f64>,
}

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// MECHSCHED_THREADS caps the rayon pool used by verification campaigns.
fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MECHSCHED_THREADS") {
        let threads: usize = v.parse().map_err(|_| {
            Error::Parse(format!(
                "MECHSCHED_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if threads == 0 {
            return Err(Error::Parse("MECHSCHED_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Parse(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn parse_solver(name: &str) -> Result<Box<dyn Solver>> {
    match name {
        "exact" => Ok(Box::new(ExactSolver)),
        "greedy" => Ok(Box::new(GreedySolver)),
        other => Err(Error::Parse(format!(
            "unknown solver {other:?}; accepted: exact, greedy"
        ))),
    }
}

fn ext_value(v: f64) -> Value {
    if v.is_infinite() {
        Value::String("inf".into())
    } else {
        json!(v)
    }
}

fn read_instance(path: &PathBuf) -> Result<(Instance, String)> {
    let raw = fs::read_to_string(path)?;
    let digest = format!("{:x}", Sha256::digest(raw.as_bytes()));
    Ok((Instance::from_json(&raw)?, digest))
}

fn read_prediction(path: &PathBuf) -> Result<(Prediction, String)> {
    let raw = fs::read_to_string(path)?;
    let digest = format!("{:x}", Sha256::digest(raw.as_bytes()));
    Ok((Prediction::from_json(&raw)?, digest))
}

/// The guarantee active for one concrete run, given the realized error.
fn run_bound(kind: MechanismKind, params: Params, alpha: f64, n: usize, eta: Option<f64>) -> f64 {
    let exact_pred = eta.map(|e| e <= 1.0 + BOUND_SLACK).unwrap_or(false);
    match kind {
        MechanismKind::Greedy => n as f64,
        // Follow-prediction promises alpha and nothing else; a wrong
        // prediction is reported as a violation.
        MechanismKind::FollowPrediction => alpha,
        MechanismKind::Simple => {
            if exact_pred {
                2.0 * alpha
            } else {
                (n * n) as f64
            }
        }
        MechanismKind::Scaled => {
            if exact_pred {
                (2.0 + params.gamma.unwrap_or(1.0)) * alpha
            } else {
                robustness_bound(kind, params, n)
            }
        }
        MechanismKind::ErrorTolerant => error_bound(
            params.gamma.unwrap_or(1.0),
            params.eta_bar.unwrap_or(1.0),
            alpha,
            n,
            eta.unwrap_or(f64::INFINITY),
        ),
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let kind: MechanismKind = args.mechanism.parse()?;
    let solver = parse_solver(&args.solver)?;
    let (inst, inst_digest) = read_instance(&args.instance)?;
    let pred = match (&args.prediction, kind.needs_prediction()) {
        (Some(path), _) => Some(read_prediction(path)?),
        (None, true) => return Err(Error::MissingParam("prediction")),
        (None, false) => None,
    };
    let params = Params {
        gamma: args.gamma,
        eta_bar: args.eta_bar,
    };
    let outcome = run_mechanism(kind, &inst, pred.as_ref().map(|(p, _)| p), params, &*solver)?;
    let ms = makespan(&inst, &outcome.alloc)?;
    let (opt, ratio) = match opt_oracle(&inst) {
        Ok(opt) => {
            let ratio = if opt == 0.0 {
                if ms == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                (ms / opt).max(1.0)
            };
            (Some(opt), Some(ratio))
        }
        Err(Error::SearchCap { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let eta = pred
        .as_ref()
        .map(|(p, _)| prediction_error(&inst, p).map(|r| r.value()))
        .transpose()?;
    let bound = run_bound(kind, params, outcome.solver_alpha, inst.n(), eta);
    let violated = ratio
        .map(|r| r > bound * (1.0 + BOUND_SLACK))
        .unwrap_or(false);

    let mut warnings = outcome.warnings.clone();
    let payments = if args.payments {
        let policy = match args.monopolist_cap {
            Some(c) => MonopolistPolicy::Cap(c),
            None => MonopolistPolicy::Error,
        };
        match critical_payments_with(&inst, &outcome.plan, &outcome.alloc, policy) {
            Ok(p) => Some(p.pay),
            Err(Error::MonopolistJob { job }) => {
                warnings.push(format!(
                    "job {job} has no competing machine; payments undefined \
                     (set --monopolist-cap to cap them)"
                ));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let record = json!({
        "mechanism": kind.id(),
        "n": inst.n(),
        "m": inst.m(),
        "gamma": params.gamma,
        "eta_bar": params.eta_bar,
        "solver": solver.name(),
        "alpha": outcome.solver_alpha,
        "eta": eta.map(ext_value),
        "makespan": ext_value(ms),
        "opt": opt.map(ext_value),
        "ratio": ratio.map(ext_value),
        "bound": ext_value(bound),
        "violated": violated,
        "allocation": outcome.alloc.as_slice(),
        "payments": payments.map(|p| p.into_iter().map(ext_value).collect::<Vec<_>>()),
        "warnings": warnings,
        "digests": {
            "instance": inst_digest,
            "prediction": pred.as_ref().map(|(_, d)| d.clone()),
        },
    });
    let pretty = serde_json::to_string_pretty(&record).expect("serializable record");
    println!("{pretty}");
    if let Some(path) = args.output {
        fs::write(path, pretty)?;
    }
    Ok(if violated { 2 } else { 0 })
}

fn require_params(kind: MechanismKind, args: &VerifyArgs) -> Result<Params> {
    let params = Params {
        gamma: args.gamma,
        eta_bar: args.eta_bar,
    };
    if kind.needs_gamma() && params.gamma.is_none() {
        return Err(Error::MissingParam("gamma"));
    }
    if kind.needs_eta_bar() && params.eta_bar.is_none() {
        return Err(Error::MissingParam("eta_bar"));
    }
    Ok(params)
}

fn monotonicity_json(report: &MonotonicityReport) -> Value {
    json!({
        "holds": report.holds,
        "checked": report.checked,
        "violations": report.violations,
        "witness": report.witness.as_ref().map(|w| json!({
            "machine": w.machine,
            "sum": w.sum,
            "base": serde_json::from_str::<Value>(&w.base.to_json()).unwrap(),
            "deviated": serde_json::from_str::<Value>(&w.deviated.to_json()).unwrap(),
        })),
    })
}

fn campaign_csv_row(
    report: &RatioReport,
    mechanism: &str,
    cfg: &CampaignCfg,
    params: Params,
    eta: Option<f64>,
) -> String {
    report.csv_row(mechanism, cfg.nmax, cfg.mmax, params, eta)
}

fn simple_csv_row(mechanism: &str, cfg: &CampaignCfg, checked: usize, violations: usize) -> String {
    format!(
        "{mechanism},{},{},,,,{checked},,,{violations}",
        cfg.nmax, cfg.mmax
    )
}

/// Monotonicity campaign for a mechanism: for each base, fix the plan built
/// from a prediction, then probe the report-to-allocation map.
fn mechanism_monotonicity(
    kind: MechanismKind,
    params: Params,
    solver: &dyn Solver,
    cfg: &CampaignCfg,
) -> Result<MonotonicityReport> {
    let bases = (cfg.trials / 10).max(1);
    let mut total = MonotonicityReport {
        holds: true,
        checked: 0,
        violations: 0,
        witness: None,
    };
    for t in 0..bases {
        let spec = GeneratorSpec {
            family: Family::Perturbed,
            n: 2 + (t % (cfg.nmax.max(2) - 1)),
            m: 2 + (t % (cfg.mmax.max(2) - 1)),
            seed: cfg.seed.wrapping_add(t as u64),
            eta: 2.0,
            ..GeneratorSpec::default()
        };
        let (base, pred) = spec.generate()?;
        let pred = pred.expect("perturbed family defines a prediction");
        let outcome = run_mechanism(kind, &base, Some(&pred), params, solver)?;
        let plan = outcome.plan;
        let rule = move |i: &Instance| assign_scaled_min(i, &plan).expect("same shape");
        let r = check_monotone(&rule, &base, 10, cfg.seed.wrapping_add(t as u64))?;
        total.checked += r.checked;
        total.violations += r.violations;
        total.holds &= r.holds;
        if total.witness.is_none() {
            total.witness = r.witness;
        }
    }
    Ok(total)
}

fn broken_monotonicity(cfg: &CampaignCfg) -> Result<MonotonicityReport> {
    let bases = (cfg.trials / 10).max(1);
    let mut total = MonotonicityReport {
        holds: true,
        checked: 0,
        violations: 0,
        witness: None,
    };
    for t in 0..bases {
        let spec = GeneratorSpec {
            n: 2 + (t % 2),
            m: 3,
            seed: cfg.seed.wrapping_add(t as u64),
            ..GeneratorSpec::default()
        };
        let (base, _) = spec.generate()?;
        let r = check_monotone(
            &broken_max_reporter,
            &base,
            10,
            cfg.seed.wrapping_add(t as u64),
        )?;
        total.checked += r.checked;
        total.violations += r.violations;
        total.holds &= r.holds;
        if total.witness.is_none() {
            total.witness = r.witness;
        }
    }
    Ok(total)
}

fn fuzz_json(report: &FuzzReport) -> Value {
    serde_json::to_value(report).expect("serializable report")
}

fn cmd_verify(args: VerifyArgs) -> Result<u8> {
    if args.trials == 0 {
        return Err(Error::Precondition("--trials must be positive".into()));
    }
    let cfg = CampaignCfg {
        trials: args.trials,
        nmax: args.nmax,
        mmax: args.mmax,
        seed: args.seed,
    };
    let solver = parse_solver(&args.solver)?;
    let mut csv = vec![RatioReport::CSV_HEADER.to_string()];
    let mut sections = serde_json::Map::new();
    let mut any_violation = false;

    // Broken fixtures take a dedicated path: they exercise the detectors.
    if args.mechanism == "broken-max-reporter" {
        if !matches!(args.suite.as_str(), "monotonicity" | "all") {
            return Err(Error::Precondition(
                "broken-max-reporter only supports the monotonicity suite".into(),
            ));
        }
        let report = broken_monotonicity(&cfg)?;
        any_violation |= !report.holds;
        csv.push(simple_csv_row(
            "broken-max-reporter",
            &cfg,
            report.checked,
            report.violations,
        ));
        sections.insert("monotonicity".into(), monotonicity_json(&report));
        return finish_verify(args.output, csv, sections, any_violation);
    }
    if args.mechanism == "broken-first-price" {
        if !matches!(args.suite.as_str(), "strategyproof" | "all") {
            return Err(Error::Precondition(
                "broken-first-price only supports the strategyproof suite".into(),
            ));
        }
        let report = fuzz_broken_first_price(args.trials.min(100), 5, &cfg)?;
        any_violation |= !report.holds();
        csv.push(simple_csv_row(
            "broken-first-price",
            &cfg,
            report.checked,
            report.violations.len(),
        ));
        sections.insert("strategyproof".into(), fuzz_json(&report));
        return finish_verify(args.output, csv, sections, any_violation);
    }

    let kind: MechanismKind = args.mechanism.parse()?;
    let params = require_params(kind, &args)?;
    let suites: Vec<&str> = match args.suite.as_str() {
        "all" => {
            let mut s = vec!["monotonicity", "strategyproof", "consistency", "robustness"];
            if kind == MechanismKind::ErrorTolerant {
                s.push("error-curve");
            }
            s
        }
        one @ ("monotonicity" | "strategyproof" | "consistency" | "robustness" | "error-curve") => {
            vec![one]
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown suite {other:?}; accepted: monotonicity, strategyproof, consistency, \
                 robustness, error-curve, all"
            )))
        }
    };

    for suite in suites {
        match suite {
            "monotonicity" => {
                let report = mechanism_monotonicity(kind, params, &*solver, &cfg)?;
                any_violation |= !report.holds;
                csv.push(simple_csv_row(
                    kind.id(),
                    &cfg,
                    report.checked,
                    report.violations,
                ));
                sections.insert("monotonicity".into(), monotonicity_json(&report));
            }
            "strategyproof" => {
                let report =
                    fuzz_strategyproofness(kind, params, &*solver, args.trials.min(100), 5, &cfg)?;
                any_violation |= !report.holds();
                csv.push(simple_csv_row(
                    kind.id(),
                    &cfg,
                    report.checked,
                    report.violations.len(),
                ));
                sections.insert("strategyproof".into(), fuzz_json(&report));
            }
            "consistency" => {
                let report = evaluate_consistency(kind, params, &*solver, &cfg)?;
                any_violation |= report.violations > 0 || report.scalar_sum_violations > 0;
                csv.push(campaign_csv_row(
                    &report,
                    kind.id(),
                    &cfg,
                    params,
                    Some(1.0),
                ));
                sections.insert("consistency".into(), serde_json::to_value(&report).unwrap());
            }
            "robustness" => {
                let report = evaluate_robustness(kind, params, &*solver, &cfg)?;
                any_violation |= report.violations > 0 || report.scalar_sum_violations > 0;
                csv.push(campaign_csv_row(&report, kind.id(), &cfg, params, None));
                sections.insert("robustness".into(), serde_json::to_value(&report).unwrap());
            }
            "error-curve" => {
                if kind != MechanismKind::ErrorTolerant {
                    return Err(Error::Precondition(
                        "error-curve requires --mechanism error-tolerant".into(),
                    ));
                }
                let gamma = params.gamma.unwrap();
                let eta_bar = params.eta_bar.unwrap();
                let levels = [1.0, 1.5, eta_bar, 2.0 * eta_bar, 10.0 * eta_bar];
                let curve = evaluate_error_curve(gamma, eta_bar, &*solver, &levels, &cfg)?;
                let mut points = Vec::new();
                for (eta, report) in &curve {
                    any_violation |= report.violations > 0
                        || report.scalar_sum_violations > 0
                        || report.identity_violations > 0;
                    csv.push(campaign_csv_row(
                        report,
                        kind.id(),
                        &cfg,
                        params,
                        Some(*eta),
                    ));
                    points.push(json!({
                        "eta": eta,
                        "report": serde_json::to_value(report).unwrap(),
                    }));
                }
                sections.insert("error-curve".into(), Value::Array(points));
            }
            _ => unreachable!(),
        }
    }
    finish_verify(args.output, csv, sections, any_violation)
}

fn finish_verify(
    output: Option<PathBuf>,
    csv: Vec<String>,
    sections: serde_json::Map<String, Value>,
    any_violation: bool,
) -> Result<u8> {
    println!("{}", csv.join("\n"));
    if let Some(path) = output {
        fs::write(
            path,
            serde_json::to_string_pretty(&Value::Object(sections)).unwrap(),
        )?;
    }
    Ok(if any_violation { 2 } else { 0 })
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let family: Family = args.family.parse()?;
    let spec = GeneratorSpec {
        family,
        n: args.n,
        m: args.m,
        lo: args.lo,
        hi: args.hi,
        seed: args.seed,
        k: args.k,
        eps: args.eps,
        eta: args.eta,
    };
    let (inst, pred) = spec.generate()?;
    match &args.output {
        Some(path) => fs::write(path, inst.to_json())?,
        None => println!("{}", inst.to_json()),
    }
    if let Some(path) = &args.prediction_output {
        match pred {
            Some(p) => fs::write(path, p.to_json())?,
            None => {
                return Err(Error::Precondition(format!(
                    "family {} does not define a prediction",
                    args.family
                )))
            }
        }
    }
    Ok(0)
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    if args.trials == 0 {
        return Err(Error::Precondition("--trials must be positive".into()));
    }
    let kind: MechanismKind = args.mechanism.parse()?;
    let params = Params {
        gamma: args.gamma,
        eta_bar: args.eta_bar,
    };
    if kind.needs_gamma() && params.gamma.is_none() {
        return Err(Error::MissingParam("gamma"));
    }
    if kind.needs_eta_bar() && params.eta_bar.is_none() {
        return Err(Error::MissingParam("eta_bar"));
    }
    let solver = ExactSolver;
    let mut total = std::time::Duration::ZERO;
    for t in 0..args.trials {
        let spec = GeneratorSpec {
            family: Family::Perturbed,
            n: args.n,
            m: args.m,
            seed: args.seed.wrapping_add(t as u64),
            eta: 2.0,
            ..GeneratorSpec::default()
        };
        let (inst, pred) = spec.generate()?;
        let start = std::time::Instant::now();
        run_mechanism(kind, &inst, pred.as_ref(), params, &solver)?;
        total += start.elapsed();
    }
    println!("mechanism,n,m,trials,total_ms,mean_ms");
    println!(
        "{},{},{},{},{:.3},{:.6}",
        kind.id(),
        args.n,
        args.m,
        args.trials,
        total.as_secs_f64() * 1e3,
        total.as_secs_f64() * 1e3 / args.trials as f64
    );
    Ok(0)
}

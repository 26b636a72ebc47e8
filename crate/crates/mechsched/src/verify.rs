//! Executable checks for the guarantees the mechanisms claim: monotonicity
//! of the allocation rule, strategyproofness under critical-value payments,
//! and the consistency / robustness / error-dependent approximation bounds.
//!
//! The bounds are defined as maxima over all instances; the evaluators here
//! report empirical maxima over seeded random campaigns plus the structural
//! worst-case families as mandatory fixtures. Bounds are always computed
//! from the alpha declared by the solver actually used, never hard-coded.
//!
//! Every evaluator derives each trial's randomness from `(seed, trial)`,
//! so results are independent of execution order and thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::core::{
    load_profile, makespan, prediction_error, serialize_ext, Allocation, Instance, Prediction,
};
use crate::instances::{gen_figure1, gen_figure2, gen_perturbed_rng, gen_uniform};
use crate::makespan::{opt_oracle, Solver};
use crate::mechanisms::{assign_scaled_min, run_mechanism, MechanismKind, Params, ScalarPlan};
use crate::payments::critical_payments;
use crate::{Error, Result};

/// Relative slack applied to every bound comparison, absorbing float noise.
pub const BOUND_SLACK: f64 = 1e-9;

fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + BOUND_SLACK)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Log-uniform misreport factor on [1/10, 10].
fn misreport_row(row: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    row.iter()
        .map(|&p| {
            let f = (rng.gen_range(-1.0..1.0) * 10f64.ln()).exp();
            if p.is_finite() {
                p * f
            } else {
                p
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// Approximation guarantee at prediction error `eta` for the error-tolerant
/// mechanism: `(2+gamma) * alpha * eta^2` inside the tolerance and
/// `(1+1/gamma) * eta_bar^2 * n` beyond it.
pub fn error_bound(gamma: f64, eta_bar: f64, alpha: f64, n: usize, eta: f64) -> f64 {
    if eta <= eta_bar {
        (2.0 + gamma) * alpha * eta * eta
    } else {
        (1.0 + 1.0 / gamma) * eta_bar * eta_bar * n as f64
    }
}

/// Worst-case ratio claimed when the prediction is exact.
pub fn consistency_bound(kind: MechanismKind, params: Params, alpha: f64, n: usize) -> f64 {
    match kind {
        MechanismKind::Greedy => n as f64,
        MechanismKind::FollowPrediction => alpha,
        MechanismKind::Simple => 2.0 * alpha,
        MechanismKind::Scaled => (2.0 + params.gamma.unwrap_or(1.0)) * alpha,
        MechanismKind::ErrorTolerant => error_bound(
            params.gamma.unwrap_or(1.0),
            params.eta_bar.unwrap_or(1.0),
            alpha,
            n,
            1.0,
        ),
    }
}

/// Worst-case ratio claimed under arbitrary predictions.
pub fn robustness_bound(kind: MechanismKind, params: Params, n: usize) -> f64 {
    match kind {
        MechanismKind::Greedy => n as f64,
        MechanismKind::FollowPrediction => f64::INFINITY,
        MechanismKind::Simple => (n * n) as f64,
        MechanismKind::Scaled => (1.0 + 1.0 / params.gamma.unwrap_or(1.0)) * n as f64,
        MechanismKind::ErrorTolerant => {
            let eta_bar = params.eta_bar.unwrap_or(1.0);
            (1.0 + 1.0 / params.gamma.unwrap_or(1.0)) * eta_bar * eta_bar * n as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Monotonicity
// ---------------------------------------------------------------------------

/// A counterexample to monotonicity: a single-row deviation whose
/// allocation change correlates positively with the report change.
#[derive(Debug, Clone)]
pub struct MonotonicityWitness {
    pub base: Instance,
    pub deviated: Instance,
    pub machine: usize,
    pub sum: f64,
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub holds: bool,
    pub checked: usize,
    pub violations: usize,
    pub witness: Option<MonotonicityWitness>,
}

/// The monotonicity sum `sum_j (x(i,j) - x'(i,j)) * (p(i,j) - p'(i,j))` for
/// the deviating machine. Nonpositive for every monotone rule.
pub fn monotonicity_sum(
    p: &Instance,
    p_alt: &Instance,
    machine: usize,
    alloc: &Allocation,
    alloc_alt: &Allocation,
) -> Result<f64> {
    if !p.same_shape(p_alt) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", p.n(), p.m()),
            got: format!("{}x{}", p_alt.n(), p_alt.m()),
        });
    }
    if machine >= p.n() {
        return Err(Error::MachineOutOfRange { machine, n: p.n() });
    }
    for i in 0..p.n() {
        if i != machine && p.row(i) != p_alt.row(i) {
            return Err(Error::Precondition(format!(
                "instances differ on machine {i}, expected only machine {machine}"
            )));
        }
    }
    let mut sum = 0.0;
    for j in 0..p.m() {
        let x = (alloc.machine_of(j) == machine) as i32;
        let x_alt = (alloc_alt.machine_of(j) == machine) as i32;
        let a = p.at(machine, j);
        let b = p_alt.at(machine, j);
        if x == x_alt || a == b {
            continue;
        }
        sum += (x - x_alt) as f64 * (a - b);
    }
    Ok(sum)
}

/// Drive `rule` through `deviations` random single-row perturbations of
/// `base` and check every monotonicity sum is nonpositive (exact
/// comparison: each term is sign-definite for a per-job rule).
pub fn check_monotone(
    rule: &dyn Fn(&Instance) -> Allocation,
    base: &Instance,
    deviations: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let base_alloc = rule(base);
    let mut violations = 0;
    let mut witness = None;
    for d in 0..deviations {
        let mut rng = trial_rng(seed, d as u64);
        let machine = rng.gen_range(0..base.n());
        let deviated = base.with_row(machine, misreport_row(base.row(machine), &mut rng))?;
        let dev_alloc = rule(&deviated);
        let sum = monotonicity_sum(base, &deviated, machine, &base_alloc, &dev_alloc)?;
        if sum > 0.0 {
            violations += 1;
            if witness.is_none() {
                witness = Some(MonotonicityWitness {
                    base: base.clone(),
                    deviated,
                    machine,
                    sum,
                });
            }
        }
    }
    Ok(MonotonicityReport {
        holds: violations == 0,
        checked: deviations,
        violations,
        witness,
    })
}

/// The targeted deviation of a strategyproofness lower-bound argument:
/// raise the deviating machine's unassigned entries and lower its assigned
/// ones. A strategyproof mechanism must keep the allocation unchanged on
/// the result.
pub fn lemma16_transform(
    p: &Instance,
    alloc: &Allocation,
    machine: usize,
    delta: f64,
) -> Result<Instance> {
    if delta < 0.0 || !delta.is_finite() {
        return Err(Error::Precondition(format!(
            "delta must be finite and >= 0, got {delta}"
        )));
    }
    if machine >= p.n() {
        return Err(Error::MachineOutOfRange { machine, n: p.n() });
    }
    let mut row = Vec::with_capacity(p.m());
    for j in 0..p.m() {
        let v = p.at(machine, j);
        if alloc.machine_of(j) == machine {
            if delta > 0.0 && v.is_finite() && delta >= v {
                return Err(Error::Precondition(format!(
                    "delta {delta} >= assigned entry p({machine},{j}) = {v}"
                )));
            }
            row.push(if v.is_finite() { v - delta } else { v });
        } else {
            row.push(if v.is_finite() { v + delta } else { v });
        }
    }
    p.with_row(machine, row)
}

// ---------------------------------------------------------------------------
// Ratio campaigns
// ---------------------------------------------------------------------------

/// Shared campaign knobs: trial count, instance size caps, master seed.
#[derive(Debug, Clone, Copy)]
pub struct CampaignCfg {
    pub trials: usize,
    pub nmax: usize,
    pub mmax: usize,
    pub seed: u64,
}

impl Default for CampaignCfg {
    fn default() -> Self {
        CampaignCfg {
            trials: 1000,
            nmax: 4,
            mmax: 6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub m: usize,
    #[serde(serialize_with = "serialize_ext")]
    pub eta: f64,
    #[serde(serialize_with = "serialize_ext")]
    pub makespan: f64,
    #[serde(serialize_with = "serialize_ext")]
    pub opt: f64,
    #[serde(serialize_with = "serialize_ext")]
    pub ratio: f64,
    #[serde(serialize_with = "serialize_ext")]
    pub bound: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub trials: usize,
    #[serde(serialize_with = "serialize_ext")]
    pub max_ratio: f64,
    /// Largest per-trial bound (bounds depend on the sampled n).
    #[serde(serialize_with = "serialize_ext")]
    pub bound: f64,
    pub violations: usize,
    /// Trials whose scalar plan broke the scalar-sum cap `n/gamma`.
    pub scalar_sum_violations: usize,
    /// Trials whose allocation broke the bounded-error identity
    /// (error-tolerant runs with realized error within tolerance only).
    pub identity_violations: usize,
    pub records: Vec<TrialRecord>,
}

impl RatioReport {
    fn from_records(records: Vec<TrialRecord>, extra: &[TrialFlags]) -> Self {
        RatioReport {
            trials: records.len(),
            max_ratio: records.iter().map(|r| r.ratio).fold(1.0, f64::max),
            bound: records.iter().map(|r| r.bound).fold(0.0, f64::max),
            violations: records.iter().filter(|r| r.violated).count(),
            scalar_sum_violations: extra.iter().filter(|f| !f.scalar_sum_ok).count(),
            identity_violations: extra.iter().filter(|f| !f.identity_ok).count(),
            records,
        }
    }

    pub const CSV_HEADER: &'static str =
        "mechanism,n,m,gamma,eta_bar,eta,trials,max_ratio,bound,violations";

    pub fn csv_row(
        &self,
        mechanism: &str,
        nmax: usize,
        mmax: usize,
        params: Params,
        eta: Option<f64>,
    ) -> String {
        let opt_num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{mechanism},{nmax},{mmax},{},{},{},{},{},{},{}",
            opt_num(params.gamma),
            opt_num(params.eta_bar),
            opt_num(eta),
            self.trials,
            self.max_ratio,
            self.bound,
            self.violations
        )
    }
}

struct TrialFlags {
    scalar_sum_ok: bool,
    identity_ok: bool,
}

/// Scalar-sum cap from the robustness analysis: the largest scalars of the
/// machines that kept one above 1 sum to at most `n/gamma`.
pub fn scalar_sum_ok(plan: &ScalarPlan, gamma: f64) -> bool {
    let n = plan.scalars.n();
    let sum: f64 = (0..n)
        .map(|i| plan.scalars.row_max(i))
        .filter(|&r| r > 1.0)
        .sum();
    !exceeds(sum, n as f64 / gamma)
}

/// Bounded-error identity: every job of a J-set on its machine, every other
/// job on its predicted machine.
pub fn allocation_identity_holds(alloc: &Allocation, plan: &ScalarPlan) -> bool {
    for j in 0..alloc.jobs() {
        let expect = plan
            .j_set_machine(j)
            .unwrap_or_else(|| plan.predicted_alloc.machine_of(j));
        if alloc.machine_of(j) != expect {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn measure(
    kind: MechanismKind,
    inst: &Instance,
    pred: &Prediction,
    params: Params,
    solver: &dyn Solver,
    bound_of: &dyn Fn(f64, usize, f64) -> f64,
    check_identity: bool,
    trial: usize,
) -> Result<(TrialRecord, TrialFlags)> {
    let outcome = run_mechanism(kind, inst, Some(pred), params, solver)?;
    let ms = makespan(inst, &outcome.alloc)?;
    let opt = opt_oracle(inst)?;
    let eta = prediction_error(inst, pred)?.value();
    let ratio = if opt == 0.0 {
        if ms == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (ms / opt).max(1.0)
    };
    let bound = bound_of(outcome.solver_alpha, inst.n(), eta);
    let scalar_sum = match (kind, params.gamma) {
        (MechanismKind::Scaled | MechanismKind::ErrorTolerant, Some(g)) => {
            scalar_sum_ok(&outcome.plan, g)
        }
        _ => true,
    };
    let identity = if check_identity {
        allocation_identity_holds(&outcome.alloc, &outcome.plan)
    } else {
        true
    };
    Ok((
        TrialRecord {
            trial,
            n: inst.n(),
            m: inst.m(),
            eta,
            makespan: ms,
            opt,
            ratio,
            bound,
            violated: exceeds(ratio, bound),
        },
        TrialFlags {
            scalar_sum_ok: scalar_sum,
            identity_ok: identity,
        },
    ))
}

fn random_dims(rng: &mut ChaCha8Rng, cfg: &CampaignCfg) -> (usize, usize) {
    (
        rng.gen_range(2..=cfg.nmax.max(2)),
        rng.gen_range(2..=cfg.mmax.max(2)),
    )
}

/// Ratio campaign with the prediction equal to the reported instance.
pub fn evaluate_consistency(
    kind: MechanismKind,
    params: Params,
    solver: &dyn Solver,
    cfg: &CampaignCfg,
) -> Result<RatioReport> {
    let results: Vec<(TrialRecord, TrialFlags)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t as u64);
            let (n, m) = random_dims(&mut rng, cfg);
            let inst = gen_uniform(n, m, 1.0, 10.0, &mut rng)?;
            let pred = Prediction::new(inst.clone())?;
            measure(
                kind,
                &inst,
                &pred,
                params,
                solver,
                &|alpha, n, _| consistency_bound(kind, params, alpha, n),
                false,
                t,
            )
        })
        .collect::<Result<_>>()?;
    let (records, flags): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(RatioReport::from_records(records, &flags))
}

/// Ratio campaign over adversarial pairs: independent uniform predictions
/// mixed with controlled perturbations at errors 2, 10, and 100, plus the
/// structural worst-case fixtures.
pub fn evaluate_robustness(
    kind: MechanismKind,
    params: Params,
    solver: &dyn Solver,
    cfg: &CampaignCfg,
) -> Result<RatioReport> {
    let bound_of = |alpha: f64, n: usize, _eta: f64| {
        let _ = alpha;
        robustness_bound(kind, params, n)
    };
    let mut results: Vec<(TrialRecord, TrialFlags)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, t as u64);
            let (n, m) = random_dims(&mut rng, cfg);
            let inst = gen_uniform(n, m, 1.0, 10.0, &mut rng)?;
            let pred = match t % 4 {
                0 => Prediction::new(gen_uniform(n, m, 1.0, 10.0, &mut rng)?)?,
                1 => gen_perturbed_rng(&inst, 2.0, &mut rng)?,
                2 => gen_perturbed_rng(&inst, 10.0, &mut rng)?,
                _ => gen_perturbed_rng(&inst, 100.0, &mut rng)?,
            };
            measure(kind, &inst, &pred, params, solver, &bound_of, false, t)
        })
        .collect::<Result<_>>()?;

    // Structural worst cases as mandatory fixtures.
    let mut trial = cfg.trials;
    if kind == MechanismKind::FollowPrediction {
        let (pred, inst) = gen_figure1(100.0, 0.01)?;
        results.push(measure(
            kind, &inst, &pred, params, solver, &bound_of, false, trial,
        )?);
    } else {
        for n in [3usize, 4, 5] {
            let (pred, inst) = gen_figure2(n, 0.01)?;
            results.push(measure(
                kind, &inst, &pred, params, solver, &bound_of, false, trial,
            )?);
            trial += 1;
        }
    }
    let (records, flags): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(RatioReport::from_records(records, &flags))
}

/// Error-tolerant campaign: one report per requested error level, with the
/// bounded-error allocation identity checked structurally inside tolerance.
pub fn evaluate_error_curve(
    gamma: f64,
    eta_bar: f64,
    solver: &dyn Solver,
    eta_levels: &[f64],
    cfg: &CampaignCfg,
) -> Result<Vec<(f64, RatioReport)>> {
    let kind = MechanismKind::ErrorTolerant;
    let params = Params::gamma_eta(gamma, eta_bar);
    let mut out = Vec::new();
    for (level_idx, &eta) in eta_levels.iter().enumerate() {
        let results: Vec<(TrialRecord, TrialFlags)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(cfg.seed, (level_idx * cfg.trials + t) as u64);
                let (n, m) = random_dims(&mut rng, cfg);
                let inst = gen_uniform(n, m, 1.0, 10.0, &mut rng)?;
                let pred = gen_perturbed_rng(&inst, eta, &mut rng)?;
                measure(
                    kind,
                    &inst,
                    &pred,
                    params,
                    solver,
                    &|alpha, n, _| error_bound(gamma, eta_bar, alpha, n, eta),
                    eta <= eta_bar,
                    t,
                )
            })
            .collect::<Result<_>>()?;
        let (records, flags): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        out.push((eta, RatioReport::from_records(records, &flags)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Strategyproofness fuzzing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FuzzViolation {
    pub instance: String,
    pub prediction: String,
    pub machine: usize,
    pub lie_row: Vec<f64>,
    pub utility_truth: f64,
    pub utility_lie: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub instances: usize,
    pub misreports_per_instance: usize,
    pub checked: usize,
    pub skipped: usize,
    pub violations: Vec<FuzzViolation>,
}

impl FuzzReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn utility(pay: &[f64], inst_true: &Instance, alloc: &Allocation, machine: usize) -> f64 {
    let load: f64 = alloc
        .jobs_on(machine)
        .map(|j| inst_true.at(machine, j))
        .sum();
    pay[machine] - load
}

/// For random instances and random single-machine misreports, check that
/// truthful utility under critical-value payments dominates. Monopolist
/// jobs (no finite competitor) make the payment undefined and are recorded
/// as skipped, not as violations.
pub fn fuzz_strategyproofness(
    kind: MechanismKind,
    params: Params,
    solver: &dyn Solver,
    instances: usize,
    misreports: usize,
    cfg: &CampaignCfg,
) -> Result<FuzzReport> {
    let mut checked = 0;
    let mut skipped = 0;
    let mut violations = Vec::new();
    for t in 0..instances {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let (n, m) = random_dims(&mut rng, cfg);
        let inst = gen_uniform(n, m, 1.0, 10.0, &mut rng)?;
        let pred = if t % 2 == 0 {
            Prediction::new(inst.clone())?
        } else {
            Prediction::new(gen_uniform(n, m, 1.0, 10.0, &mut rng)?)?
        };
        let outcome = run_mechanism(kind, &inst, Some(&pred), params, solver)?;
        let pay_truth = match critical_payments(&inst, &outcome.plan, &outcome.alloc) {
            Ok(p) => p,
            Err(Error::MonopolistJob { .. }) => {
                skipped += misreports * n;
                continue;
            }
            Err(e) => return Err(e),
        };
        for machine in 0..n {
            let u_truth = utility(&pay_truth.pay, &inst, &outcome.alloc, machine);
            for _ in 0..misreports {
                let lie = misreport_row(inst.row(machine), &mut rng);
                let inst_lie = inst.with_row(machine, lie.clone())?;
                let alloc_lie = assign_scaled_min(&inst_lie, &outcome.plan)?;
                let pay_lie = match critical_payments(&inst_lie, &outcome.plan, &alloc_lie) {
                    Ok(p) => p,
                    Err(Error::MonopolistJob { .. }) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let u_lie = utility(&pay_lie.pay, &inst, &alloc_lie, machine);
                checked += 1;
                if u_lie > u_truth + BOUND_SLACK * u_truth.abs().max(1.0) {
                    violations.push(FuzzViolation {
                        instance: inst.to_json(),
                        prediction: pred.to_json(),
                        machine,
                        lie_row: lie,
                        utility_truth: u_truth,
                        utility_lie: u_lie,
                    });
                }
            }
        }
    }
    Ok(FuzzReport {
        instances,
        misreports_per_instance: misreports,
        checked,
        skipped,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Broken fixtures (detector sanity)
// ---------------------------------------------------------------------------

/// Deliberately anti-monotone rule: each job to the machine with the
/// largest finite reported time.
pub fn broken_max_reporter(inst: &Instance) -> Allocation {
    let assign = (0..inst.m())
        .map(|j| {
            (0..inst.n())
                .filter(|&i| inst.at(i, j).is_finite())
                .max_by(|&a, &b| inst.at(a, j).partial_cmp(&inst.at(b, j)).unwrap())
                .expect("every job has a finite machine")
        })
        .collect();
    Allocation::new(assign, inst.n()).expect("indices in range")
}

/// Deliberately broken payment rule: greedy allocation paid first-price
/// (each winner is paid its own report). Overstating is profitable, so the
/// fuzzer must find violations here.
pub fn fuzz_broken_first_price(
    instances: usize,
    misreports: usize,
    cfg: &CampaignCfg,
) -> Result<FuzzReport> {
    let mut checked = 0;
    let mut violations = Vec::new();
    for t in 0..instances {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let (n, m) = random_dims(&mut rng, cfg);
        let inst = gen_uniform(n, m, 1.0, 10.0, &mut rng)?;
        let alloc_truth = crate::makespan::solve_greedy(&inst).alloc;
        let first_price = |reported: &Instance, alloc: &Allocation| -> Vec<f64> {
            load_profile(reported, alloc).expect("total allocation")
        };
        let pay_truth = first_price(&inst, &alloc_truth);
        for machine in 0..n {
            let u_truth = utility(&pay_truth, &inst, &alloc_truth, machine);
            for k in 0..misreports {
                // One targeted moderate overstatement per machine, then
                // random misreports.
                let lie: Vec<f64> = if k == 0 {
                    inst.row(machine).iter().map(|&p| p * 1.5).collect()
                } else {
                    misreport_row(inst.row(machine), &mut rng)
                };
                let inst_lie = inst.with_row(machine, lie.clone())?;
                let alloc_lie = crate::makespan::solve_greedy(&inst_lie).alloc;
                let pay_lie = first_price(&inst_lie, &alloc_lie);
                let u_lie = utility(&pay_lie, &inst, &alloc_lie, machine);
                checked += 1;
                if u_lie > u_truth + BOUND_SLACK * u_truth.abs().max(1.0) {
                    violations.push(FuzzViolation {
                        instance: inst.to_json(),
                        prediction: String::new(),
                        machine,
                        lie_row: lie,
                        utility_truth: u_truth,
                        utility_lie: u_lie,
                    });
                }
            }
        }
    }
    Ok(FuzzReport {
        instances,
        misreports_per_instance: misreports,
        checked,
        skipped: 0,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::makespan::ExactSolver;

    fn inst(rows: Vec<Vec<f64>>) -> Instance {
        let n = rows.len();
        let m = rows[0].len();
        Instance::new(n, m, rows).unwrap()
    }

    #[test]
    fn monotonicity_sum_basics() {
        let p = inst(vec![vec![1.0], vec![2.0]]);
        let a = Allocation::new(vec![0], 2).unwrap();
        // Identical instances: sum 0.
        assert_eq!(monotonicity_sum(&p, &p, 0, &a, &a).unwrap(), 0.0);
        // Allocation unchanged under any report change: sum 0.
        let p_alt = inst(vec![vec![1.5], vec![2.0]]);
        assert_eq!(monotonicity_sum(&p, &p_alt, 0, &a, &a).unwrap(), 0.0);
        // Differing on a non-deviating row is a precondition error.
        let bad = inst(vec![vec![1.0], vec![3.0]]);
        assert!(monotonicity_sum(&p, &bad, 0, &a, &a).is_err());
    }

    #[test]
    fn anti_monotone_toy_rule_is_caught() {
        // Max-reporter on a 2x1 instance: raising machine 1's report from 1
        // to 3 moves the job onto it: (0-1)(1-3) = +2 > 0.
        let p = inst(vec![vec![1.0], vec![2.0]]);
        let p_alt = inst(vec![vec![3.0], vec![2.0]]);
        let x = broken_max_reporter(&p);
        let x_alt = broken_max_reporter(&p_alt);
        assert_eq!(x.machine_of(0), 1);
        assert_eq!(x_alt.machine_of(0), 0);
        let sum = monotonicity_sum(&p, &p_alt, 0, &x, &x_alt).unwrap();
        assert_eq!(sum, 2.0);

        let report = check_monotone(&|i| broken_max_reporter(i), &p, 200, 3).unwrap();
        assert!(!report.holds);
        assert!(report.witness.is_some());
    }

    #[test]
    fn greedy_is_monotone() {
        let mut rng = trial_rng(11, 0);
        let base = gen_uniform(3, 4, 1.0, 10.0, &mut rng).unwrap();
        let report =
            check_monotone(&|i| crate::makespan::solve_greedy(i).alloc, &base, 500, 11).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn lemma16_transform_cases() {
        let p = inst(vec![vec![2.0, 5.0], vec![3.0, 1.0]]);
        let a = Allocation::new(vec![0, 1], 2).unwrap();
        assert_eq!(lemma16_transform(&p, &a, 0, 0.0).unwrap(), p);
        let t = lemma16_transform(&p, &a, 0, 0.5).unwrap();
        assert_eq!(t.at(0, 0), 1.5);
        assert_eq!(t.at(0, 1), 5.5);
        assert_eq!(t.row(1), p.row(1));
        // delta at least an assigned entry is rejected.
        assert!(lemma16_transform(&p, &a, 0, 2.0).is_err());
    }

    #[test]
    fn lemma16_on_figure1_forces_the_bad_allocation() {
        // The predicted-accurate instance allocates job 0 to machine 0 and
        // job 1 to machine 1; moving toward the actual instance lowers the
        // assigned entry and raises the unassigned one, so a strategyproof
        // mechanism must keep job 0 on machine 0.
        let (pred, actual) = gen_figure1(100.0, 0.01).unwrap();
        let truthful = pred.as_instance().clone();
        let out = run_mechanism(
            MechanismKind::FollowPrediction,
            &truthful,
            Some(&pred),
            Params::default(),
            &ExactSolver,
        )
        .unwrap();
        assert_eq!(out.alloc.as_slice(), &[0, 1]);
        // actual(0,0) = 0 < 100 (assigned), actual(0,1) = 1.01 > 1 (unassigned).
        assert!(actual.at(0, 0) < truthful.at(0, 0));
        assert!(actual.at(0, 1) > truthful.at(0, 1));
        let out_alt = run_mechanism(
            MechanismKind::FollowPrediction,
            &actual,
            Some(&pred),
            Params::default(),
            &ExactSolver,
        )
        .unwrap();
        assert_eq!(out_alt.alloc.machine_of(0), 0);
    }

    #[test]
    fn consistency_smoke_scaled() {
        let cfg = CampaignCfg {
            trials: 50,
            nmax: 3,
            mmax: 4,
            seed: 1,
        };
        let report = evaluate_consistency(
            MechanismKind::Scaled,
            Params::gamma(1.0),
            &ExactSolver,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.max_ratio <= 3.0 * (1.0 + BOUND_SLACK));
        assert_eq!(report.scalar_sum_violations, 0);
    }

    #[test]
    fn follow_prediction_consistency_is_exact() {
        let cfg = CampaignCfg {
            trials: 30,
            nmax: 3,
            mmax: 4,
            seed: 2,
        };
        let report = evaluate_consistency(
            MechanismKind::FollowPrediction,
            Params::default(),
            &ExactSolver,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.max_ratio, 1.0);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn determinism_across_runs() {
        let cfg = CampaignCfg {
            trials: 20,
            nmax: 3,
            mmax: 4,
            seed: 5,
        };
        let a = evaluate_robustness(
            MechanismKind::Scaled,
            Params::gamma(1.0),
            &ExactSolver,
            &cfg,
        )
        .unwrap();
        let b = evaluate_robustness(
            MechanismKind::Scaled,
            Params::gamma(1.0),
            &ExactSolver,
            &cfg,
        )
        .unwrap();
        assert_eq!(a.max_ratio, b.max_ratio);
        assert_eq!(a.violations, b.violations);
    }

    #[test]
    fn broken_first_price_detected() {
        let cfg = CampaignCfg {
            trials: 0,
            nmax: 3,
            mmax: 4,
            seed: 9,
        };
        let report = fuzz_broken_first_price(20, 5, &cfg).unwrap();
        assert!(!report.holds());
    }
}

//! The allocation mechanisms. Every mechanism decomposes into a
//! report-independent scalar-construction phase (a [`ScalarPlan`] built from
//! the prediction alone) and a shared per-job scaled-min assignment phase.
//! That decomposition is what makes each of them monotone, and therefore
//! payment-implementable.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::core::{makespan, Allocation, Instance, Prediction, ScalarMatrix};
use crate::makespan::Solver;
use crate::{Error, Result};

/// Tie rule applied when several machines share the minimum scaled time.
/// Ties are detected at exact equality; after the listed preferences the
/// minimum machine index wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    MinIndex,
    /// Prefer the predicted machine of the job.
    PredictedFirst,
    /// Prefer the predicted machine, then the machine whose J-set holds the job.
    PredictedThenJSet,
}

/// Report-independent assignment plan: scalars, the predicted allocation
/// defining each job's predicted machine, the J-sets of jobs pre-committed
/// to be stolen from their predicted machine, and the tie rule.
#[derive(Debug, Clone)]
pub struct ScalarPlan {
    pub scalars: ScalarMatrix,
    pub predicted_alloc: Allocation,
    pub j_sets: Vec<BTreeSet<usize>>,
    pub tie_policy: TiePolicy,
}

impl ScalarPlan {
    /// Machine whose J-set contains `job`, if any. The sets are disjoint.
    pub fn j_set_machine(&self, job: usize) -> Option<usize> {
        self.j_sets.iter().position(|s| s.contains(&job))
    }
}

/// The five allocation rules exposed by the library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Greedy,
    FollowPrediction,
    Simple,
    Scaled,
    ErrorTolerant,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::Greedy,
        MechanismKind::FollowPrediction,
        MechanismKind::Simple,
        MechanismKind::Scaled,
        MechanismKind::ErrorTolerant,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            MechanismKind::Greedy => "greedy",
            MechanismKind::FollowPrediction => "follow-prediction",
            MechanismKind::Simple => "simple-scaled-greedy",
            MechanismKind::Scaled => "scaled-greedy",
            MechanismKind::ErrorTolerant => "error-tolerant",
        }
    }

    pub fn needs_prediction(&self) -> bool {
        !matches!(self, MechanismKind::Greedy)
    }

    pub fn needs_gamma(&self) -> bool {
        matches!(self, MechanismKind::Scaled | MechanismKind::ErrorTolerant)
    }

    pub fn needs_eta_bar(&self) -> bool {
        matches!(self, MechanismKind::ErrorTolerant)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<_> = MechanismKind::ALL.iter().map(|k| k.id()).collect();
                Error::Parse(format!(
                    "unknown mechanism {s:?}; accepted: {}",
                    ids.join(", ")
                ))
            })
    }
}

/// Mechanism parameters; which are required depends on the kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct Params {
    pub gamma: Option<f64>,
    pub eta_bar: Option<f64>,
}

impl Params {
    pub fn gamma(gamma: f64) -> Self {
        Params {
            gamma: Some(gamma),
            eta_bar: None,
        }
    }

    pub fn gamma_eta(gamma: f64, eta_bar: f64) -> Self {
        Params {
            gamma: Some(gamma),
            eta_bar: Some(eta_bar),
        }
    }
}

/// Everything a verifier or the CLI needs about one mechanism run.
#[derive(Debug, Clone)]
pub struct MechanismOutcome {
    pub kind: MechanismKind,
    pub alloc: Allocation,
    pub plan: ScalarPlan,
    pub solver_alpha: f64,
    pub gamma: Option<f64>,
    pub eta_bar: Option<f64>,
    pub warnings: Vec<String>,
}

/// Ratio of two positive predicted times under the extended-real
/// conventions: `inf/inf = 1`, `finite/inf = 0`, `inf/finite = inf`.
fn pred_ratio(num: f64, den: f64) -> f64 {
    if num.is_infinite() && den.is_infinite() {
        1.0
    } else {
        num / den
    }
}

/// Scaled time of one (scalar, report) pair. A zero job costs zero under
/// any finite scalar; an infinite report or infinite scalar is infinite.
pub fn scaled_time(r: f64, p: f64) -> f64 {
    if p == 0.0 {
        if r.is_finite() {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        r * p
    }
}

/// Scalars of the warm-up mechanism: the predicted-time ratio capped into
/// `[1, n]`. No J-sets; ties favor the predicted machine.
pub fn scalars_simple(pred: &Prediction, predicted_alloc: &Allocation) -> Result<ScalarPlan> {
    check_pred_alloc(pred, predicted_alloc)?;
    let n = pred.n();
    let m = pred.m();
    let mut scalars = ScalarMatrix::filled(n, m, 1.0);
    for j in 0..m {
        let ihat = predicted_alloc.machine_of(j);
        for i in 0..n {
            let ratio = pred_ratio(pred.at(ihat, j), pred.at(i, j));
            scalars.set(i, j, ratio.min(n as f64).max(1.0));
        }
    }
    Ok(ScalarPlan {
        scalars,
        predicted_alloc: predicted_alloc.clone(),
        j_sets: vec![BTreeSet::new(); n],
        tie_policy: TiePolicy::PredictedFirst,
    })
}

/// Scalars of the main mechanism: uncapped ratios floored at 1, then the
/// J/I/T loop that resets to 1 the scalars of jobs pre-committed to be
/// stolen, with per-machine predicted J-load capped by `gamma * MS`.
pub fn scalars_scaled(
    pred: &Prediction,
    predicted_alloc: &Allocation,
    gamma: f64,
) -> Result<ScalarPlan> {
    let (scalars, j_sets) = scaled_loop(
        pred,
        predicted_alloc,
        gamma,
        1.0,
        OverrideScope::SlowerMachines,
    )?;
    Ok(ScalarPlan {
        scalars,
        predicted_alloc: predicted_alloc.clone(),
        j_sets,
        tie_policy: TiePolicy::PredictedThenJSet,
    })
}

/// Scalars of the error-tolerant mechanism: the same loop with override
/// value `1/eta_bar^2` applied to the J-set machine only (see
/// [`OverrideScope::JSetMachineOnly`]), plus a post-loop pass pinning every
/// job outside the J-sets to its predicted machine at `1/eta_bar^2`.
pub fn scalars_error_tolerant(
    pred: &Prediction,
    predicted_alloc: &Allocation,
    gamma: f64,
    eta_bar: f64,
) -> Result<ScalarPlan> {
    if eta_bar <= 0.0 || !eta_bar.is_finite() {
        return Err(Error::Precondition(format!(
            "eta_bar must be positive, got {eta_bar}"
        )));
    }
    let override_value = 1.0 / (eta_bar * eta_bar);
    let (mut scalars, j_sets) = scaled_loop(
        pred,
        predicted_alloc,
        gamma,
        override_value,
        OverrideScope::JSetMachineOnly,
    )?;
    let assigned: BTreeSet<usize> = j_sets.iter().flatten().copied().collect();
    for j in 0..pred.m() {
        if !assigned.contains(&j) {
            scalars.set(predicted_alloc.machine_of(j), j, override_value);
        }
    }
    Ok(ScalarPlan {
        scalars,
        predicted_alloc: predicted_alloc.clone(),
        j_sets,
        tie_policy: TiePolicy::PredictedThenJSet,
    })
}

fn check_pred_alloc(pred: &Prediction, predicted_alloc: &Allocation) -> Result<()> {
    if predicted_alloc.jobs() != pred.m() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} jobs", pred.m()),
            got: format!("{} assignments", predicted_alloc.jobs()),
        });
    }
    if let Some(&bad) = predicted_alloc.as_slice().iter().find(|&&i| i >= pred.n()) {
        return Err(Error::MachineOutOfRange {
            machine: bad,
            n: pred.n(),
        });
    }
    Ok(())
}

/// Which scalars the J/I/T loop resets when it commits `j*` to `J_{i*}`.
#[derive(Clone, Copy, PartialEq)]
enum OverrideScope {
    /// Every machine predicted at least as slow as `i*` on `j*`.
    SlowerMachines,
    /// Only `i*` itself. The error-tolerant variant needs this: resetting
    /// slower machines below 1 would let any of them outbid `i*` once the
    /// actual times deviate from the prediction, losing the guarantee that
    /// J-set jobs land on their J-set machine whenever the error is within
    /// tolerance.
    JSetMachineOnly,
}

fn scaled_loop(
    pred: &Prediction,
    predicted_alloc: &Allocation,
    gamma: f64,
    override_value: f64,
    scope: OverrideScope,
) -> Result<(ScalarMatrix, Vec<BTreeSet<usize>>)> {
    if gamma <= 0.0 {
        return Err(Error::Precondition(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    check_pred_alloc(pred, predicted_alloc)?;
    let n = pred.n();
    let m = pred.m();
    let ihat = |j: usize| predicted_alloc.machine_of(j);

    let mut scalars = ScalarMatrix::filled(n, m, 1.0);
    for j in 0..m {
        for i in 0..n {
            scalars.set(
                i,
                j,
                pred_ratio(pred.at(ihat(j), j), pred.at(i, j)).max(1.0),
            );
        }
    }

    let ms = makespan(pred.as_instance(), predicted_alloc)?;
    let budget = gamma * ms;
    let mut j_sets = vec![BTreeSet::new(); n];
    let mut in_j = vec![false; m];
    let mut j_load = vec![0.0f64; n];
    let mut in_i = vec![true; n];

    // One candidate pair per unassigned job: the cheapest still-open machine
    // strictly below the job's predicted machine.
    let candidates = |in_j: &[bool], in_i: &[bool]| -> Vec<(usize, usize)> {
        let mut t = Vec::new();
        for (j, _) in in_j.iter().enumerate().filter(|(_, &done)| !done) {
            let mut best: Option<usize> = None;
            for (i, _) in in_i.iter().enumerate().filter(|(_, &open)| open) {
                if pred.at(i, j) < pred.at(ihat(j), j)
                    && best.is_none_or(|b| pred.at(i, j) < pred.at(b, j))
                {
                    best = Some(i);
                }
            }
            if let Some(i) = best {
                t.push((i, j));
            }
        }
        t
    };

    loop {
        let t = candidates(&in_j, &in_i);
        // Argmax of the predicted-time ratio; ties by smaller job index then
        // smaller machine index (one candidate per job, so the job decides).
        let Some(&(i_star, j_star)) = t.iter().max_by(|&&(ia, ja), &&(ib, jb)| {
            let ra = pred_ratio(pred.at(ihat(ja), ja), pred.at(ia, ja));
            let rb = pred_ratio(pred.at(ihat(jb), jb), pred.at(ib, jb));
            ra.partial_cmp(&rb)
                .unwrap()
                .then(ja.cmp(&jb).reverse())
                .then(ia.cmp(&ib).reverse())
        }) else {
            break;
        };
        j_sets[i_star].insert(j_star);
        in_j[j_star] = true;
        j_load[i_star] += pred.at(i_star, j_star);
        match scope {
            OverrideScope::SlowerMachines => {
                for i in 0..n {
                    if pred.at(i_star, j_star) <= pred.at(i, j_star) {
                        scalars.set(i, j_star, override_value);
                    }
                }
            }
            OverrideScope::JSetMachineOnly => scalars.set(i_star, j_star, override_value),
        }
        for i in 0..n {
            in_i[i] = j_load[i] < budget;
        }
    }

    Ok((scalars, j_sets))
}

/// Relative tolerance for tie detection on scaled times. The tie rules are
/// defined at exact equality, but scalars are stored as rounded quotients of
/// predicted entries, so an algebraically exact tie `r(i,j) * p(i,j) =
/// p_hat(i_hat,j)` lands a couple of ulps (~4e-16 relative) away from it.
/// 1e-12 recovers those ties while staying far below any gap a generator
/// produces between genuinely distinct scaled times.
pub const TIE_REL_TOL: f64 = 1e-12;

/// Assign each job independently to the machine minimizing `r(i,j) * p(i,j)`,
/// resolving ties (at [`TIE_REL_TOL`] relative) per the plan's policy.
pub fn assign_scaled_min(inst: &Instance, plan: &ScalarPlan) -> Result<Allocation> {
    if inst.n() != plan.scalars.n() || inst.m() != plan.scalars.m() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", plan.scalars.n(), plan.scalars.m()),
            got: format!("{}x{}", inst.n(), inst.m()),
        });
    }
    let n = inst.n();
    let mut assign = Vec::with_capacity(inst.m());
    for j in 0..inst.m() {
        let scaled: Vec<f64> = (0..n)
            .map(|i| scaled_time(plan.scalars.at(i, j), inst.at(i, j)))
            .collect();
        let best = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        if best.is_infinite() {
            return Err(Error::InfeasibleJob { job: j });
        }
        let tied = |i: usize| {
            scaled[i] == best || (best.is_finite() && scaled[i] <= best * (1.0 + TIE_REL_TOL))
        };
        let winner = match plan.tie_policy {
            TiePolicy::MinIndex => (0..n).find(|&i| tied(i)).unwrap(),
            TiePolicy::PredictedFirst | TiePolicy::PredictedThenJSet => {
                let ihat = plan.predicted_alloc.machine_of(j);
                if tied(ihat) {
                    ihat
                } else if plan.tie_policy == TiePolicy::PredictedThenJSet
                    && plan.j_set_machine(j).is_some_and(&tied)
                {
                    plan.j_set_machine(j).unwrap()
                } else {
                    (0..n).find(|&i| tied(i)).unwrap()
                }
            }
        };
        assign.push(winner);
    }
    Allocation::new(assign, n)
}

/// Run one mechanism end to end: predicted schedule, scalar plan, scaled-min
/// assignment.
pub fn run_mechanism(
    kind: MechanismKind,
    inst: &Instance,
    pred: Option<&Prediction>,
    params: Params,
    solver: &dyn Solver,
) -> Result<MechanismOutcome> {
    let mut warnings = Vec::new();
    let n = inst.n();
    if kind.needs_gamma() {
        let gamma = params.gamma.ok_or(Error::MissingParam("gamma"))?;
        if gamma <= 0.0 {
            return Err(Error::Precondition(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if gamma >= n as f64 / 2.0 - 1.0 {
            warnings.push(format!(
                "gamma = {gamma} outside the theorem range (0, n/2 - 1) for n = {n}; \
                 per-lemma bounds still hold"
            ));
        }
    }
    if kind.needs_eta_bar() && params.eta_bar.is_none() {
        return Err(Error::MissingParam("eta_bar"));
    }

    let (plan, alloc, alpha) = match kind {
        MechanismKind::Greedy => {
            let plan = ScalarPlan {
                scalars: ScalarMatrix::filled(n, inst.m(), 1.0),
                predicted_alloc: Allocation::new(vec![0; inst.m()], n)?,
                j_sets: vec![BTreeSet::new(); n],
                tie_policy: TiePolicy::MinIndex,
            };
            let alloc = assign_scaled_min(inst, &plan)?;
            (plan, alloc, 1.0)
        }
        MechanismKind::FollowPrediction => {
            let pred = pred.ok_or(Error::MissingParam("prediction"))?;
            check_shapes(inst, pred)?;
            let predicted = solver.solve(pred.as_instance())?;
            // Equivalent scalar encoding: 1 on the predicted machine,
            // infinity elsewhere. Reports never change the allocation.
            let mut scalars = ScalarMatrix::filled(n, inst.m(), f64::INFINITY);
            for j in 0..inst.m() {
                scalars.set(predicted.alloc.machine_of(j), j, 1.0);
            }
            let plan = ScalarPlan {
                scalars,
                predicted_alloc: predicted.alloc.clone(),
                j_sets: vec![BTreeSet::new(); n],
                tie_policy: TiePolicy::PredictedFirst,
            };
            (plan, predicted.alloc, predicted.alpha)
        }
        MechanismKind::Simple => {
            let pred = pred.ok_or(Error::MissingParam("prediction"))?;
            check_shapes(inst, pred)?;
            let predicted = solver.solve(pred.as_instance())?;
            let plan = scalars_simple(pred, &predicted.alloc)?;
            let alloc = assign_scaled_min(inst, &plan)?;
            (plan, alloc, predicted.alpha)
        }
        MechanismKind::Scaled => {
            let pred = pred.ok_or(Error::MissingParam("prediction"))?;
            check_shapes(inst, pred)?;
            let predicted = solver.solve(pred.as_instance())?;
            let plan = scalars_scaled(pred, &predicted.alloc, params.gamma.unwrap())?;
            let alloc = assign_scaled_min(inst, &plan)?;
            (plan, alloc, predicted.alpha)
        }
        MechanismKind::ErrorTolerant => {
            let pred = pred.ok_or(Error::MissingParam("prediction"))?;
            check_shapes(inst, pred)?;
            let predicted = solver.solve(pred.as_instance())?;
            let plan = scalars_error_tolerant(
                pred,
                &predicted.alloc,
                params.gamma.unwrap(),
                params.eta_bar.unwrap(),
            )?;
            let alloc = assign_scaled_min(inst, &plan)?;
            (plan, alloc, predicted.alpha)
        }
    };

    Ok(MechanismOutcome {
        kind,
        alloc,
        plan,
        solver_alpha: alpha,
        gamma: params.gamma,
        eta_bar: params.eta_bar,
        warnings,
    })
}

fn check_shapes(inst: &Instance, pred: &Prediction) -> Result<()> {
    if !inst.same_shape(pred.as_instance()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", inst.n(), inst.m()),
            got: format!("{}x{}", pred.n(), pred.m()),
        });
    }
    Ok(())
}

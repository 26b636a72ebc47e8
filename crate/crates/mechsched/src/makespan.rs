//! Makespan-minimization solvers: an exact branch-and-bound search and the
//! per-job greedy rule. Solvers are pluggable; a mechanism checks its
//! consistency bound against the `alpha` declared by the solver it was
//! actually given, so third-party solvers (e.g. an LP-rounding
//! 2-approximation) can be dropped in behind [`Solver`].

use crate::core::{makespan, Allocation, Instance};
use crate::{Error, Result};

/// Allocation plus its makespan and the approximation factor declared by
/// the solver that produced it.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub alloc: Allocation,
    pub value: f64,
    pub alpha: f64,
}

/// Any makespan-minimization algorithm with a truthful declared alpha.
pub trait Solver: Sync {
    fn solve(&self, inst: &Instance) -> Result<SolverResult>;
    fn name(&self) -> &'static str;
}

/// Exact solver, `alpha = 1`.
pub struct ExactSolver;

impl Solver for ExactSolver {
    fn solve(&self, inst: &Instance) -> Result<SolverResult> {
        solve_exact(inst)
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

/// Per-job greedy, `alpha = n`.
pub struct GreedySolver;

impl Solver for GreedySolver {
    fn solve(&self, inst: &Instance) -> Result<SolverResult> {
        Ok(solve_greedy(inst))
    }

    fn name(&self) -> &'static str {
        "greedy"
    }
}

/// Job count beyond which exact search is refused outright.
const HARD_JOB_CAP: usize = 24;
/// State-count threshold below which plain lexicographic enumeration is used
/// instead of the sorted-order branch-and-bound.
const ENUM_STATE_CAP: f64 = 1e7;
/// Relative guard on pruning so that near-tie branches are still explored
/// and leaf values stay exactly comparable across search orders.
const PRUNE_SLACK: f64 = 1e-9;

/// Minimum-makespan allocation. Deterministic: among all optima the
/// lexicographically smallest assignment vector is returned.
pub fn solve_exact(inst: &Instance) -> Result<SolverResult> {
    if inst.m() > HARD_JOB_CAP {
        return Err(Error::SearchCap {
            detail: format!("m = {} exceeds exact-search cap {HARD_JOB_CAP}", inst.m()),
        });
    }
    let states = (inst.n() as f64).powi(inst.m() as i32);
    let (value, alloc) = if states <= ENUM_STATE_CAP {
        lex_search(inst, f64::INFINITY)
    } else {
        let value = branch_and_bound_value(inst);
        lex_search(inst, value)
    };
    let alloc = Allocation::new(alloc, inst.n())?;
    debug_assert_eq!(makespan(inst, &alloc)?, value);
    Ok(SolverResult {
        alloc,
        value,
        alpha: 1.0,
    })
}

/// Each job independently to its minimum-time machine, ties to the minimum
/// machine index.
pub fn solve_greedy(inst: &Instance) -> SolverResult {
    let assign: Vec<usize> = (0..inst.m())
        .map(|j| {
            (0..inst.n())
                .min_by(|&a, &b| inst.at(a, j).partial_cmp(&inst.at(b, j)).unwrap())
                .unwrap()
        })
        .collect();
    let alloc = Allocation::new(assign, inst.n()).expect("indices in range");
    let value = makespan(inst, &alloc).expect("total allocation");
    SolverResult {
        alloc,
        value,
        alpha: inst.n() as f64,
    }
}

/// Optimal makespan value.
pub fn opt_oracle(inst: &Instance) -> Result<f64> {
    Ok(solve_exact(inst)?.value)
}

/// Canonical makespan of a complete assignment: loads accumulated in
/// increasing job order, so the value is bit-identical across search orders.
fn canonical_value(inst: &Instance, assign: &[usize]) -> f64 {
    let mut loads = vec![0.0f64; inst.n()];
    for (j, &i) in assign.iter().enumerate() {
        loads[i] += inst.at(i, j);
    }
    loads.into_iter().fold(0.0, f64::max)
}

/// DFS over assignment vectors in lexicographic order. With `bound`
/// infinite this is a strict-improvement search that returns the
/// lexicographically smallest optimum directly; with a finite optimal
/// `bound` it returns the first (hence lex-smallest) allocation matching it.
fn lex_search(inst: &Instance, bound: f64) -> (f64, Vec<usize>) {
    struct S<'a> {
        inst: &'a Instance,
        best: f64,
        best_assign: Vec<usize>,
        cur: Vec<usize>,
        loads: Vec<f64>,
        done: bool,
        exact_target: bool,
    }
    impl S<'_> {
        fn rec(&mut self, j: usize, partial_max: f64) {
            if self.done {
                return;
            }
            if j == self.inst.m() {
                let value = canonical_value(self.inst, &self.cur);
                if value < self.best {
                    self.best = value;
                    self.best_assign = self.cur.clone();
                } else if self.exact_target && value == self.best {
                    self.best_assign = self.cur.clone();
                    self.done = true;
                }
                return;
            }
            for i in 0..self.inst.n() {
                let p = self.inst.at(i, j);
                let new_load = self.loads[i] + p;
                let new_max = partial_max.max(new_load);
                if new_max > self.best * (1.0 + PRUNE_SLACK) {
                    continue;
                }
                self.cur[j] = i;
                self.loads[i] = new_load;
                self.rec(j + 1, new_max);
                self.loads[i] -= p;
                if self.done {
                    return;
                }
            }
        }
    }
    let exact_target = bound.is_finite();
    let mut s = S {
        inst,
        best: bound,
        best_assign: vec![0; inst.m()],
        cur: vec![0; inst.m()],
        loads: vec![0.0; inst.n()],
        done: false,
        exact_target,
    };
    s.rec(0, 0.0);
    (s.best, s.best_assign)
}

/// Optimal value via branch-and-bound: jobs ordered by decreasing
/// minimum-row time, greedy incumbent, pruning on the partial max load and
/// on lower bounds from the unassigned jobs.
pub fn branch_and_bound_value(inst: &Instance) -> f64 {
    let n = inst.n();
    let m = inst.m();
    let min_row: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| inst.at(i, j)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| min_row[b].partial_cmp(&min_row[a]).unwrap().then(a.cmp(&b)));

    // Suffix bounds over the job order: the largest single remaining job and
    // the total remaining work spread over all machines.
    let mut suffix_max = vec![0.0f64; m + 1];
    let mut suffix_sum = vec![0.0f64; m + 1];
    for k in (0..m).rev() {
        suffix_max[k] = suffix_max[k + 1].max(min_row[order[k]]);
        suffix_sum[k] = suffix_sum[k + 1] + min_row[order[k]];
    }

    struct S<'a> {
        inst: &'a Instance,
        order: &'a [usize],
        suffix_max: &'a [f64],
        suffix_sum: &'a [f64],
        best: f64,
        cur: Vec<usize>,
        loads: Vec<f64>,
    }
    impl S<'_> {
        fn rec(&mut self, k: usize, partial_max: f64, partial_sum: f64) {
            let n = self.inst.n();
            if k == self.order.len() {
                let value = canonical_value(self.inst, &self.cur);
                if value < self.best {
                    self.best = value;
                }
                return;
            }
            let lb = partial_max
                .max(self.suffix_max[k])
                .max((partial_sum + self.suffix_sum[k]) / n as f64);
            if lb > self.best * (1.0 + PRUNE_SLACK) {
                return;
            }
            let j = self.order[k];
            for i in 0..n {
                let p = self.inst.at(i, j);
                let new_load = self.loads[i] + p;
                let new_max = partial_max.max(new_load);
                if new_max > self.best * (1.0 + PRUNE_SLACK) {
                    continue;
                }
                self.cur[j] = i;
                self.loads[i] = new_load;
                self.rec(k + 1, new_max, partial_sum + p);
                self.loads[i] -= p;
            }
        }
    }
    let incumbent = solve_greedy(inst).value;
    let mut s = S {
        inst,
        order: &order,
        suffix_max: &suffix_max,
        suffix_sum: &suffix_sum,
        best: incumbent,
        cur: vec![0; m],
        loads: vec![0.0; n],
    };
    s.rec(0, 0.0, 0.0);
    s.best
}

//! Critical-value payments for scaled-min allocations.
//!
//! Every allocation rule in this crate decides each job independently given
//! a fixed report-independent [`ScalarPlan`]; that per-job structure is what
//! the payments rely on. For a job won by machine `i` the payment is the
//! threshold report at which the allocation would flip: `t_j / r(i,j)`,
//! where `t_j` is the best competing scaled time. Paying the threshold makes
//! truthful reporting dominant and individually rational.

use crate::core::{Allocation, Instance};
use crate::mechanisms::{scaled_time, ScalarPlan};
use crate::{Error, Result};

/// What to do with a job that has no competing machine at finite scaled
/// time. The default refuses to invent an unbounded transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonopolistPolicy {
    Error,
    /// Pay the configured per-job ceiling instead.
    Cap(f64),
}

/// Per-machine payments, in the same units as processing times.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentVector {
    pub pay: Vec<f64>,
}

/// Best competing scaled time for `job` against `winner`: the supremum of
/// winning reports (scaled). Infinite when no competitor is finite.
pub fn job_threshold(inst: &Instance, plan: &ScalarPlan, job: usize, winner: usize) -> f64 {
    (0..inst.n())
        .filter(|&i| i != winner)
        .map(|i| scaled_time(plan.scalars.at(i, job), inst.at(i, job)))
        .fold(f64::INFINITY, f64::min)
}

/// Critical-value payments for `alloc = assign_scaled_min(inst, plan)`,
/// refusing monopolist jobs.
pub fn critical_payments(
    inst: &Instance,
    plan: &ScalarPlan,
    alloc: &Allocation,
) -> Result<PaymentVector> {
    critical_payments_with(inst, plan, alloc, MonopolistPolicy::Error)
}

pub fn critical_payments_with(
    inst: &Instance,
    plan: &ScalarPlan,
    alloc: &Allocation,
    policy: MonopolistPolicy,
) -> Result<PaymentVector> {
    if alloc.jobs() != inst.m() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} jobs", inst.m()),
            got: format!("{} assignments", alloc.jobs()),
        });
    }
    let mut pay = vec![0.0f64; inst.n()];
    for j in 0..inst.m() {
        let winner = alloc.machine_of(j);
        let t = job_threshold(inst, plan, j, winner);
        let per_job = if t.is_infinite() {
            match policy {
                MonopolistPolicy::Error => return Err(Error::MonopolistJob { job: j }),
                MonopolistPolicy::Cap(ceiling) => ceiling,
            }
        } else {
            t / plan.scalars.at(winner, j)
        };
        pay[winner] += per_job;
    }
    Ok(PaymentVector { pay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{load_profile, Prediction, ScalarMatrix};
    use crate::mechanisms::{assign_scaled_min, scalars_simple, TiePolicy};
    use std::collections::BTreeSet;

    fn inst(rows: Vec<Vec<f64>>) -> Instance {
        let n = rows.len();
        let m = rows[0].len();
        Instance::new(n, m, rows).unwrap()
    }

    fn unit_plan(n: usize, m: usize) -> ScalarPlan {
        ScalarPlan {
            scalars: ScalarMatrix::filled(n, m, 1.0),
            predicted_alloc: Allocation::new(vec![0; m], n).unwrap(),
            j_sets: vec![BTreeSet::new(); n],
            tie_policy: TiePolicy::MinIndex,
        }
    }

    #[test]
    fn second_price_with_unit_scalars() {
        let p = inst(vec![vec![1.0], vec![3.0]]);
        let plan = unit_plan(2, 1);
        let alloc = assign_scaled_min(&p, &plan).unwrap();
        assert_eq!(alloc.as_slice(), &[0]);
        let pay = critical_payments(&p, &plan, &alloc).unwrap();
        assert_eq!(pay.pay, vec![3.0, 0.0]);
    }

    #[test]
    fn scaled_threshold_divides_by_winner_scalar() {
        // r = [[1],[2]], p = [[1],[3]]: m1 wins at scaled 1 < 6.
        // Flip point of m1's report: r(0,0) * p' = 6, so p' = 6.
        let p = inst(vec![vec![1.0], vec![3.0]]);
        let mut plan = unit_plan(2, 1);
        plan.scalars.set(1, 0, 2.0);
        let alloc = assign_scaled_min(&p, &plan).unwrap();
        assert_eq!(alloc.as_slice(), &[0]);
        let pay = critical_payments(&p, &plan, &alloc).unwrap();
        assert_eq!(pay.pay[0], 6.0);
        // Replay the bisection logic: just below keeps the job, just above
        // loses it.
        let below = inst(vec![vec![5.99], vec![3.0]]);
        let above = inst(vec![vec![6.01], vec![3.0]]);
        assert_eq!(assign_scaled_min(&below, &plan).unwrap().as_slice(), &[0]);
        assert_eq!(assign_scaled_min(&above, &plan).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn losers_receive_zero() {
        let p = inst(vec![vec![1.0, 1.0], vec![5.0, 5.0]]);
        let plan = unit_plan(2, 2);
        let alloc = assign_scaled_min(&p, &plan).unwrap();
        let pay = critical_payments(&p, &plan, &alloc).unwrap();
        assert_eq!(pay.pay[1], 0.0);
    }

    #[test]
    fn monopolist_policies() {
        let p = inst(vec![vec![1.0], vec![f64::INFINITY]]);
        let plan = unit_plan(2, 1);
        let alloc = assign_scaled_min(&p, &plan).unwrap();
        assert!(matches!(
            critical_payments(&p, &plan, &alloc),
            Err(Error::MonopolistJob { job: 0 })
        ));
        let pay = critical_payments_with(&p, &plan, &alloc, MonopolistPolicy::Cap(100.0)).unwrap();
        assert_eq!(pay.pay[0], 100.0);
    }

    #[test]
    fn individually_rational_on_truthful_run() {
        let rows = vec![vec![2.0, 1.0, 4.0], vec![3.0, 2.0, 1.0]];
        let p = inst(rows.clone());
        let pred = Prediction::new(inst(rows)).unwrap();
        let predicted = crate::makespan::solve_exact(pred.as_instance()).unwrap();
        let plan = scalars_simple(&pred, &predicted.alloc).unwrap();
        let alloc = assign_scaled_min(&p, &plan).unwrap();
        let pay = critical_payments(&p, &plan, &alloc).unwrap();
        let loads = load_profile(&p, &alloc).unwrap();
        for (i, (p, l)) in pay.pay.iter().zip(&loads).enumerate() {
            assert!(p >= l, "machine {i}: {p} < {l}");
        }
    }
}

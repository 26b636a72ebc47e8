//! Property-based invariants over random instances: solver relations,
//! scalar-plan structure, payment individual rationality, and the
//! allocation's stability under the targeted truthfulness deviation.

use proptest::collection::vec;
use proptest::prelude::*;

use mechsched::core::{load_profile, makespan, prediction_error, Instance, Prediction};
use mechsched::makespan::ExactSolver;
use mechsched::makespan::{branch_and_bound_value, solve_exact, solve_greedy};
use mechsched::mechanisms::{assign_scaled_min, run_mechanism, scaled_time, MechanismKind, Params};
use mechsched::payments::{critical_payments, job_threshold};
use mechsched::verify::{lemma16_transform, scalar_sum_ok};

/// Strategy: a random instance with n in [2,3], m in [2,4], entries in
/// [0.5, 10], plus a same-shape positive matrix usable as a prediction.
fn inst_and_pred() -> impl Strategy<Value = (Instance, Prediction)> {
    (2usize..=3, 2usize..=4).prop_flat_map(|(n, m)| {
        (
            vec(0.5f64..10.0, n * m),
            vec(0.5f64..10.0, n * m),
            Just(n),
            Just(m),
        )
            .prop_map(|(p, q, n, m)| {
                (
                    Instance::from_flat(n, m, p).unwrap(),
                    Prediction::new(Instance::from_flat(n, m, q).unwrap()).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn makespan_is_max_load((inst, _) in inst_and_pred()) {
        let alloc = solve_greedy(&inst).alloc;
        let loads = load_profile(&inst, &alloc).unwrap();
        let max = loads.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(makespan(&inst, &alloc).unwrap(), max);
    }

    #[test]
    fn prediction_error_at_least_one((inst, pred) in inst_and_pred()) {
        let eta = prediction_error(&inst, &pred).unwrap().value();
        prop_assert!(eta >= 1.0);
        // An exact prediction has error exactly 1.
        let exact = Prediction::new(inst.clone()).unwrap();
        prop_assert_eq!(prediction_error(&inst, &exact).unwrap().value(), 1.0);
    }

    #[test]
    fn greedy_within_n_of_exact((inst, _) in inst_and_pred()) {
        let exact = solve_exact(&inst).unwrap();
        let greedy = solve_greedy(&inst);
        prop_assert!(exact.value <= greedy.value * (1.0 + 1e-12));
        prop_assert!(greedy.value <= inst.n() as f64 * exact.value * (1.0 + 1e-12));
    }

    #[test]
    fn branch_and_bound_matches_exact((inst, _) in inst_and_pred()) {
        prop_assert_eq!(branch_and_bound_value(&inst), solve_exact(&inst).unwrap().value);
    }

    #[test]
    fn simple_scalars_capped((inst, pred) in inst_and_pred()) {
        let out = run_mechanism(
            MechanismKind::Simple, &inst, Some(&pred), Params::default(), &ExactSolver,
        ).unwrap();
        for i in 0..inst.n() {
            for j in 0..inst.m() {
                let r = out.plan.scalars.at(i, j);
                prop_assert!((1.0..=inst.n() as f64).contains(&r));
            }
        }
    }

    #[test]
    fn scaled_plan_structure((inst, pred) in inst_and_pred()) {
        let out = run_mechanism(
            MechanismKind::Scaled, &inst, Some(&pred), Params::gamma(1.0), &ExactSolver,
        ).unwrap();
        // Scalars never drop below 1 for this variant.
        for i in 0..inst.n() {
            for j in 0..inst.m() {
                prop_assert!(out.plan.scalars.at(i, j) >= 1.0);
            }
        }
        // J-sets are pairwise disjoint.
        let total: usize = out.plan.j_sets.iter().map(|s| s.len()).sum();
        let distinct: std::collections::BTreeSet<usize> =
            out.plan.j_sets.iter().flatten().copied().collect();
        prop_assert_eq!(total, distinct.len());
        // Sum of above-1 row maxima is capped by n/gamma.
        prop_assert!(scalar_sum_ok(&out.plan, 1.0));
    }

    #[test]
    fn exact_prediction_steals_exactly_the_j_sets((inst, _) in inst_and_pred()) {
        // With the prediction equal to the instance, the jobs a machine
        // gains over its predicted set are exactly its J-set.
        let pred = Prediction::new(inst.clone()).unwrap();
        let out = run_mechanism(
            MechanismKind::Scaled, &inst, Some(&pred), Params::gamma(1.0), &ExactSolver,
        ).unwrap();
        for i in 0..inst.n() {
            let gained: std::collections::BTreeSet<usize> = (0..inst.m())
                .filter(|&j| {
                    out.alloc.machine_of(j) == i && out.plan.predicted_alloc.machine_of(j) != i
                })
                .collect();
            prop_assert_eq!(&gained, &out.plan.j_sets[i]);
        }
    }

    #[test]
    fn error_tolerant_scalars_floored((inst, pred) in inst_and_pred()) {
        let out = run_mechanism(
            MechanismKind::ErrorTolerant, &inst, Some(&pred),
            Params::gamma_eta(1.0, 2.0), &ExactSolver,
        ).unwrap();
        for i in 0..inst.n() {
            for j in 0..inst.m() {
                prop_assert!(out.plan.scalars.at(i, j) >= 0.25);
            }
        }
    }

    #[test]
    fn payments_individually_rational((inst, pred) in inst_and_pred()) {
        for kind in [MechanismKind::Greedy, MechanismKind::Simple, MechanismKind::Scaled] {
            let params = if kind == MechanismKind::Scaled {
                Params::gamma(1.0)
            } else {
                Params::default()
            };
            let out = run_mechanism(kind, &inst, Some(&pred), params, &ExactSolver).unwrap();
            let pay = critical_payments(&inst, &out.plan, &out.alloc).unwrap();
            let loads = load_profile(&inst, &out.alloc).unwrap();
            for (p, l) in pay.pay.iter().zip(&loads) {
                prop_assert!(p >= &(l * (1.0 - 1e-9)));
            }
            // The winner's scaled time never exceeds the job threshold.
            for j in 0..inst.m() {
                let w = out.alloc.machine_of(j);
                let own = scaled_time(out.plan.scalars.at(w, j), inst.at(w, j));
                let t = job_threshold(&inst, &out.plan, j, w);
                prop_assert!(own <= t * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn allocation_stable_under_targeted_deviation((inst, pred) in inst_and_pred()) {
        // Lowering a machine's assigned entries and raising the rest must
        // not change a scaled-min allocation.
        let out = run_mechanism(
            MechanismKind::Scaled, &inst, Some(&pred), Params::gamma(1.0), &ExactSolver,
        ).unwrap();
        for machine in 0..inst.n() {
            let smallest_assigned = out
                .alloc
                .jobs_on(machine)
                .map(|j| inst.at(machine, j))
                .fold(f64::INFINITY, f64::min);
            let delta = if smallest_assigned.is_finite() {
                smallest_assigned / 2.0
            } else {
                1.0
            };
            let shifted = lemma16_transform(&inst, &out.alloc, machine, delta).unwrap();
            let replay = assign_scaled_min(&shifted, &out.plan).unwrap();
            prop_assert_eq!(replay.as_slice(), out.alloc.as_slice());
        }
    }
}

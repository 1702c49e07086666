use bipolar_core::distgeo::{
    alexandrov_angle_sum, alexandrov_quadruple_oracle, build_instance, euclidean_distances, residual, solve_gram_projection,
    solve_lowrank, solve_lowrank_in_dim, sub_instance, ComparisonInstance, LowRankOptions, VerdictStatus, FEAS_TOL_REL,
};
use bipolar_core::seed;
use proptest::prelude::*;
use rand::Rng;

fn points(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, dim), n)
}

/// Distances of a symmetric 4-point star with centre `a0` and legs of
/// length one; the three legs are pairwise `c` apart.
fn symmetric_quadruple(c: f64) -> ComparisonInstance<f64> {
    let mut d = vec![vec![0.0; 4]; 4];
    for i in 1..4 {
        d[0][i] = 1.0;
        d[i][0] = 1.0;
        for j in 1..4 {
            if i != j {
                d[i][j] = c;
            }
        }
    }
    build_instance(2, 0, d).unwrap()
}

/// (2,0) instance with legs `|a0 ai|` and outer distances
/// `|a1 a2|, |a1 a3|, |a2 a3|`; `None` when the data are not metric.
fn quadruple(legs: [f64; 3], outer: [f64; 3]) -> Option<ComparisonInstance<f64>> {
    let mut d = vec![vec![0.0; 4]; 4];
    for i in 0..3 {
        d[0][i + 1] = legs[i];
        d[i + 1][0] = legs[i];
    }
    let pairs = [(1, 2), (1, 3), (2, 3)];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        d[i][j] = outer[k];
        d[j][i] = outer[k];
    }
    build_instance(2, 0, d).ok()
}

#[test]
fn symmetric_threshold_is_root_three() {
    for (c, feasible) in [(1.6, true), (1.73, true), (1.7325, false), (1.9, false)] {
        assert_eq!(alexandrov_quadruple_oracle(&symmetric_quadruple(c)).unwrap(), feasible, "c = {c}");
        let v = solve_lowrank(&symmetric_quadruple(c), 50, 9);
        assert_eq!(v.is_feasible(), feasible, "c = {c}");
    }
}

#[test]
fn cross_solver_agreement_on_decidable_quadruples() {
    let mut rng = seed::rng_for(31, 0, 0);
    let mut decided = 0;
    while decided < 60 {
        let legs = [0, 1, 2].map(|_| rng.gen_range(0.3..1.5));
        let outer = [0, 1, 2].map(|_| rng.gen_range(0.2..2.8));
        let Some(inst) = quadruple(legs, outer) else { continue };
        let sum = alexandrov_angle_sum(&inst).unwrap();
        if sum.map_or(false, |s| (s - std::f64::consts::TAU).abs() < 1e-3) {
            continue;
        }
        let a = solve_lowrank(&inst, 100, decided);
        let b = solve_gram_projection(&inst, 10_000);
        assert_eq!(a.status, b.status, "{:?}", inst.dist);
        decided += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn feasible_witnesses_pass_independent_check(pts in points(8, 3)) {
        let inst = build_instance(3, 3, euclidean_distances(&pts)).unwrap();
        for v in [solve_lowrank(&inst, 20, 1), solve_gram_projection(&inst, 10_000)] {
            if v.is_feasible() {
                let w = v.witness.as_ref().unwrap();
                prop_assert!(residual(w, &inst) <= inst.feas_tol(FEAS_TOL_REL));
            }
        }
    }

    #[test]
    fn verdicts_are_deterministic(pts in points(6, 2), seed in any::<u64>()) {
        let mut d = euclidean_distances(&pts);
        // Stretch a lower-bound pair so some instances are not realizable.
        d[1][3] *= 1.3;
        d[3][1] = d[1][3];
        let Ok(inst) = build_instance(2, 2, d) else { return Ok(()) };
        let a = solve_lowrank(&inst, 5, seed);
        let b = solve_lowrank(&inst, 5, seed);
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        prop_assert_eq!(a.best_penalty.to_bits(), b.best_penalty.to_bits());
    }

    #[test]
    fn extra_dimension_does_not_help(pts in points(7, 2)) {
        let inst = build_instance(3, 2, euclidean_distances(&pts)).unwrap();
        let opts = LowRankOptions::default();
        let low = solve_lowrank_in_dim(&inst, inst.n() - 1, 20, 4, &opts);
        prop_assume!(low.status == VerdictStatus::Feasible);
        let high = solve_lowrank_in_dim(&inst, inst.n(), 20, 4, &opts);
        prop_assert!((high.best_penalty - low.best_penalty).abs() <= 1e-9);
    }

    #[test]
    fn sub_instances_of_feasible_are_feasible(pts in points(8, 3), mask_a in 0u8..8, mask_b in 0u8..8) {
        let inst = build_instance(3, 3, euclidean_distances(&pts)).unwrap();
        let v = solve_lowrank(&inst, 20, 2);
        prop_assume!(v.is_feasible());
        let keep = |mask: u8| -> Vec<usize> { std::iter::once(0).chain((1..=3).filter(|i| mask & (1 << (i - 1)) != 0)).collect() };
        let (child, map) = sub_instance(&inst, &keep(mask_a), &keep(mask_b)).unwrap();
        let w = v.witness.unwrap().restrict(&map);
        prop_assert!(residual(&w, &child) <= child.feas_tol(FEAS_TOL_REL));
        prop_assert!(solve_lowrank(&child, 20, 2).is_feasible());
    }

    #[test]
    fn oracle_agreement_away_from_the_threshold(legs in prop::array::uniform3(0.3..1.5f64), outer in prop::array::uniform3(0.2..2.8f64), seed in any::<u64>()) {
        let Some(inst) = quadruple(legs, outer) else { return Ok(()) };
        let sum = alexandrov_angle_sum(&inst).unwrap();
        prop_assume!(sum.map_or(true, |s| (s - std::f64::consts::TAU).abs() >= 1e-3));
        let truth = alexandrov_quadruple_oracle(&inst).unwrap();
        prop_assert_eq!(solve_lowrank(&inst, 100, seed).is_feasible(), truth);
    }
}

use bipolar_core::comparison::check_instance;
use bipolar_core::distgeo::{residual, VerdictStatus, FEAS_TOL_REL};
use bipolar_core::io::{read_instance, write_instance};
use bipolar_core::manifold::{ChartPoint, ManifoldSpec};
use bipolar_core::rigidity::{
    build_flat_band_profile, collinearity_defect, flat_filling_check, key_lemma_configuration, rigidity_experiment, trial_request,
    ExperimentSettings, KeyLemmaRequest, DEFAULT_FRACTIONS,
};

fn band() -> ManifoldSpec<f64> {
    build_flat_band_profile(1.0, 1.0, 0.5).unwrap().manifold()
}

fn in_band_settings(trials: usize) -> ExperimentSettings<f64> {
    let mut s = ExperimentSettings::new(trials, 20, 8);
    s.apex_t = (0.3, 0.9);
    s.mtw_trials = 0;
    s.gram_iters = 2_000;
    s
}

#[test]
fn reference_surface_verifies() {
    let spec = build_flat_band_profile(1.0, 1.0, 0.5).unwrap();
    spec.verify().unwrap();
    assert!(spec.in_band(&ChartPoint::new(vec![0.99, 2.0])));
    assert!(!spec.in_band(&ChartPoint::new(vec![1.01, 2.0])));
}

#[test]
fn in_band_instances_are_feasible() {
    let m = band();
    let report = rigidity_experiment(&m, &in_band_settings(12)).unwrap();
    assert!(report.in_band_instances >= 10, "{}", report.in_band_instances);
    assert_eq!(report.positive_control_failures, 0);
    for t in report.trials.iter().filter(|t| t.apex_in_band) {
        let lowrank_ok = t.lowrank_status == Some(VerdictStatus::Feasible) && t.lowrank_residual <= 1e-7 * t.scale;
        assert!(lowrank_ok || t.gram_status == Some(VerdictStatus::Feasible), "{t:?}");
        assert!(!t.violation);
    }
    assert!(!report.comparison_violation_evidence);
}

#[test]
fn flat_triangles_fill_flatly() {
    let m = band();
    let s = in_band_settings(6);
    for trial in 0..6 {
        let (req, _) = trial_request(&m, &s, trial).unwrap();
        let cfg = key_lemma_configuration(&m, &req).unwrap();
        let defect = flat_filling_check(&m, &req.p, &req.q, &cfg.x_p, 4).unwrap();
        assert!(defect <= 1e-6, "trial {trial}: {defect:e}");
    }
}

#[test]
fn euclidean_witnesses_are_collinear() {
    let m = ManifoldSpec::<f64>::euclidean(2).unwrap();
    for (i, (ap, aq)) in [(1.0, 0.9), (0.9, 1.2), (1.2, 1.1)].into_iter().enumerate() {
        let req = KeyLemmaRequest {
            p: ChartPoint::new(vec![0.0, 0.0]),
            q: ChartPoint::new(vec![1.7, 0.0]),
            angle_p: ap,
            angle_q: aq,
            side: 1.0,
            fractions: DEFAULT_FRACTIONS,
        };
        let cfg = key_lemma_configuration(&m, &req).unwrap();
        let inst = cfg.instance(&m).unwrap();
        let check = check_instance(inst.clone(), 50, i as u64).unwrap();
        let v = check.verdict();
        assert!(v.is_feasible());
        let w = v.witness.as_ref().unwrap();
        assert!(residual(w, &inst) <= inst.feas_tol(FEAS_TOL_REL));
        // Sideways slack of a straight chain grows like the square root of
        // the constraint tolerance.
        let defect = collinearity_defect(w, &inst);
        assert!(defect <= FEAS_TOL_REL.sqrt(), "{defect:e}");
    }
}

#[test]
fn dumped_instances_recheck_identically() {
    let m = band();
    let s = in_band_settings(4);
    let (req, _) = trial_request(&m, &s, 1).unwrap();
    let inst = key_lemma_configuration(&m, &req).unwrap().instance(&m).unwrap();
    let back = read_instance::<f64>(&write_instance(&inst)).unwrap();
    assert_eq!(back, inst);
    let a = check_instance(inst, 20, 5).unwrap();
    let b = check_instance(back, 20, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cap_apexes_separate() {
    let m = band();
    let mut s = ExperimentSettings::new(1, 1, 3);
    s.apex_t = (1.45, 1.5);
    let (req, apex_t) = trial_request(&m, &s, 0).unwrap();
    assert!(apex_t > 1.0);
    let cfg = key_lemma_configuration(&m, &req).unwrap();
    assert!(m.distance_value(&cfg.x_p, &cfg.x_q).unwrap() > 1e-3);
}

mod common;

use bipolar_core::comparison::{default_radius, sample_point};
use bipolar_core::manifold::{ChartPoint, ManifoldSpec, ProfileSpec};
use bipolar_core::seed;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn manifolds() -> Vec<ManifoldSpec<f64>> {
    vec![
        ManifoldSpec::euclidean(3).unwrap(),
        ManifoldSpec::sphere(1.0).unwrap(),
        ManifoldSpec::revolution(ProfileSpec::cosh(3.0).unwrap()).unwrap(),
        ManifoldSpec::flat_band(1.0, 1.0, 0.5).unwrap(),
    ]
}

fn points(m: &ManifoldSpec<f64>, count: usize, stream: u64) -> Vec<ChartPoint<f64>> {
    let center = m.default_base_point();
    let radius = default_radius(m);
    (0..count)
        .map(|i| {
            let mut rng: ChaCha8Rng = seed::rng_for(17, stream, i as u64);
            sample_point(m, &center, radius, &mut rng).unwrap()
        })
        .collect()
}

#[test]
fn distance_is_symmetric() {
    for m in manifolds() {
        let a = points(&m, 500, 100);
        let b = points(&m, 500, 101);
        let worst = a
            .par_iter()
            .zip(&b)
            .map(|(p, q)| {
                let d = m.distance_value(p, q).unwrap();
                (d - m.distance_value(q, p).unwrap()).abs() / (1.0 + d)
            })
            .reduce(|| 0.0, f64::max);
        assert!(worst <= 1e-8, "{m}: {worst:e}");
    }
}

#[test]
fn distance_satisfies_triangle_inequality() {
    for m in manifolds() {
        let p = points(&m, 500, 200);
        let q = points(&m, 500, 201);
        let x = points(&m, 500, 202);
        let worst = (0..500)
            .into_par_iter()
            .map(|i| {
                let d = |a: &ChartPoint<f64>, b: &ChartPoint<f64>| m.distance_value(a, b).unwrap();
                d(&p[i], &q[i]) - d(&p[i], &x[i]) - d(&x[i], &q[i])
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-7, "{m}: {worst:e}");
    }
}

#[test]
fn exp_is_a_local_isometry_along_rays() {
    for m in manifolds() {
        let bases = points(&m, 40, 300);
        bases.par_iter().enumerate().for_each(|(i, p)| {
            let til = m.til_inner_radius(p);
            let reach = if til.is_finite() { 0.5 * til } else { 2.0 };
            let angle = 0.7 * i as f64;
            let comps = match m.dim() {
                2 => {
                    let fr = m.orthonormal_frame(p).unwrap();
                    vec![fr[0][0] * angle.cos(), fr[1][1] * angle.sin()]
                }
                n => (0..n).map(|k| if k == i % n { 1.0 } else { 0.0 }).collect(),
            };
            for t in [0.1, 0.5, 1.0].map(|f| f * reach) {
                let v = m.tangent(p, comps.iter().map(|c| c * t).collect()).unwrap();
                let q = m.exp_map(&v).unwrap();
                let d = m.distance_value(p, &q).unwrap();
                assert!((d - t).abs() <= 1e-7, "{m}: t = {t}, d = {d}");
            }
        });
    }
}

#[test]
fn numeric_sphere_matches_arccos() {
    // The sine profile is the unit sphere through the generic geodesic
    // solver.
    let m = ManifoldSpec::revolution(ProfileSpec::<f64>::sine(1.0, 0.05).unwrap()).unwrap();
    let center = ChartPoint::new(vec![std::f64::consts::FRAC_PI_2, 0.0]);
    let pts: Vec<ChartPoint<f64>> = (0..200)
        .map(|i| {
            let mut rng: ChaCha8Rng = seed::rng_for(5, 400, i);
            sample_point(&m, &center, 0.9, &mut rng).unwrap()
        })
        .collect();
    let embed = |p: &ChartPoint<f64>| {
        let (t, th) = (p.coords[0], p.coords[1]);
        [t.sin() * th.cos(), t.sin() * th.sin(), -t.cos()]
    };
    (0..100).into_par_iter().for_each(|i| {
        let (p, q) = (&pts[2 * i], &pts[2 * i + 1]);
        let (a, b) = (embed(p), embed(q));
        let exact = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos();
        let d = m.distance_value(p, q).unwrap();
        assert!((d - exact).abs() <= 1e-8, "{d} vs {exact}");
    });
}

#[test]
fn curvature_matches_brioschi_formula() {
    let surfaces = [
        ManifoldSpec::revolution(ProfileSpec::cosh(3.0).unwrap()).unwrap(),
        ManifoldSpec::revolution(ProfileSpec::sine(1.0, 0.05).unwrap()).unwrap(),
        ManifoldSpec::flat_band(1.0, 1.0, 0.5).unwrap(),
    ];
    for m in surfaces {
        let prof = m.profile().unwrap();
        let (lo, hi) = (prof.t_min + 0.01, prof.t_max - 0.01);
        for i in 0..=60 {
            let t = lo + (hi - lo) * i as f64 / 60.0;
            let k = m.gauss_curvature(&ChartPoint::new(vec![t, 0.0])).unwrap();
            let b = common::brioschi_curvature(&m, t, 1e-3);
            assert!((k - b).abs() <= 1e-4 * k.abs().max(1.0), "{m} t = {t}: {k} vs {b}");
        }
    }
}

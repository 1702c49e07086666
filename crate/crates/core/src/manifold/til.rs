//! Conservative inner radius of the tangent injectivity locus.
//!
//! For each of 64 directions the largest radius at which the geodesic is
//! still verified minimizing (`d(p, exp_p(ρu)) ≥ ρ − 1e-7`) is located by a
//! coarse radial scan followed by bisection. The minimum over directions is
//! then re-verified on a radial grid in every direction and lowered to the
//! largest fully verified grid radius if any check fails.

use super::{ChartPoint, ManifoldSpec};
use crate::scalar::Scalar;

pub(crate) const TIL_DIRECTIONS: usize = 64;
const VERIFY_TOL: f64 = 1e-7;
const COARSE: usize = 8;
const BISECTIONS: usize = 10;
const SPHERE_CAP: f64 = 0.95;

fn search_limit<T: Scalar>(m: &ManifoldSpec<T>) -> T {
    match m {
        ManifoldSpec::Euclidean { .. } => T::infinity(),
        ManifoldSpec::Sphere { radius } => T::lit(1.2) * T::PI() * *radius,
        ManifoldSpec::Revolution { profile } => (profile.t_max - profile.t_min) + T::PI() * profile.f_max(),
    }
}

fn verified<T: Scalar>(m: &ManifoldSpec<T>, p: &ChartPoint<T>, u: &[T], rho: T) -> bool {
    let Ok(v) = m.tangent(p, u.iter().map(|&c| c * rho).collect()) else { return false };
    let Ok(q) = m.exp_map(&v) else { return false };
    match m.distance_value(p, &q) {
        Ok(d) => d >= rho - T::lit(VERIFY_TOL),
        Err(_) => false,
    }
}

fn unit_directions<T: Scalar>(m: &ManifoldSpec<T>, p: &ChartPoint<T>) -> Option<Vec<Vec<T>>> {
    let frame = m.orthonormal_frame(p).ok()?;
    Some(
        (0..TIL_DIRECTIONS)
            .map(|i| {
                let a = T::TAU() * T::of(i) / T::of(TIL_DIRECTIONS);
                vec![frame[0][0] * a.cos() + frame[1][0] * a.sin(), frame[0][1] * a.cos() + frame[1][1] * a.sin()]
            })
            .collect(),
    )
}

pub(super) fn inner_radius<T: Scalar>(m: &ManifoldSpec<T>, p: &ChartPoint<T>) -> T {
    let limit = search_limit(m);
    if limit.is_infinite() {
        return T::infinity();
    }
    if m.check_point(p).is_err() {
        return T::zero();
    }
    let Some(dirs) = unit_directions(m, p) else { return T::zero() };

    let mut rho = limit;
    for u in &dirs {
        // Coarse scan up to the current bound, then bisection.
        let mut lo = T::zero();
        let mut hi = None;
        for j in 1..=COARSE {
            let r = rho * T::of(j) / T::of(COARSE);
            if verified(m, p, u, r) {
                lo = r;
            } else {
                hi = Some(r);
                break;
            }
        }
        let Some(mut hi) = hi else { continue };
        for _ in 0..BISECTIONS {
            let mid = (lo + hi) * T::lit(0.5);
            if verified(m, p, u, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rho = rho.min(lo);
        if rho == T::zero() {
            return T::zero();
        }
    }

    // Re-verify every direction on a radial grid up to rho.
    let mut ok_up_to = COARSE;
    for u in &dirs {
        for j in 1..=ok_up_to {
            if !verified(m, p, u, rho * T::of(j) / T::of(COARSE)) {
                ok_up_to = j - 1;
                break;
            }
        }
    }
    let rho = rho * T::of(ok_up_to) / T::of(COARSE);
    match m {
        ManifoldSpec::Sphere { radius } => rho.min(T::lit(SPHERE_CAP) * T::PI() * *radius),
        _ => rho,
    }
}

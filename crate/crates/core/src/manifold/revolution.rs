//! Geodesics on surfaces of revolution `dt² + f(t)² dθ²`.
//!
//! The exponential map integrates the geodesic equations
//! `t'' = f f' θ'²`, `θ'' = −2 (f'/f) t' θ'` on `s ∈ [0, 1]` with the tangent
//! vector as initial velocity, so the arclength of the result is `|v|`.
//! Distances come from a shooting method: a 32-direction ray scan locates
//! candidate geodesics (including ones winding around the axis), each
//! candidate is refined by Newton's method on the initial velocity with the
//! Jacobian from the variational equations, and the shortest converged
//! geodesic wins.

use super::{ChartPoint, GeodesicSolution, ProfileSpec, PATH_SAMPLES};
use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, integrate_fixed, OdeSystem, Tolerance};
use crate::scalar::{wrap_angle, Scalar};

/// How a single geodesic is integrated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integration<T> {
    Adaptive(Tolerance<T>),
    /// Fixed number of steps on `s ∈ [0, 1]`. Results are smooth in the
    /// initial data.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicSettings<T> {
    /// Exponential map and Newton refinement.
    pub integration: Integration<T>,
    /// Looser tolerance for the candidate ray scan.
    pub scan_tolerance: Tolerance<T>,
    pub scan_directions: usize,
    pub max_candidates: usize,
    pub newton_iterations: usize,
    /// Two distinct geodesics whose lengths differ by less than this
    /// (relative to `max(1, length)`) flag a cut-locus suspicion.
    pub tie_tolerance: T,
    /// Allowed relative drift of Clairaut's constant `f² θ'`.
    pub clairaut_drift: T,
}

impl<T: Scalar> Default for GeodesicSettings<T> {
    fn default() -> Self {
        GeodesicSettings {
            integration: Integration::Adaptive(Tolerance::new(1e-12, 1e-12)),
            scan_tolerance: Tolerance::new(1e-8, 1e-8),
            scan_directions: 32,
            max_candidates: 6,
            newton_iterations: 40,
            tie_tolerance: T::lit(1e-9),
            clairaut_drift: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> GeodesicSettings<T> {
    pub fn fixed(steps: usize) -> Self {
        GeodesicSettings { integration: Integration::Fixed(steps), ..Default::default() }
    }
}

/// State `[t, θ, t', θ']`.
pub(crate) struct GeodesicFlow<'a, T> {
    pub profile: &'a ProfileSpec<T>,
}

impl<T: Scalar> OdeSystem<T, 4> for GeodesicFlow<'_, T> {
    fn rhs(&self, _s: T, y: &[T; 4]) -> Result<[T; 4]> {
        let v = self.profile.eval(y[0])?;
        Ok([y[2], y[3], v.f * v.df * y[3] * y[3], -T::lit(2.0) * v.df / v.f * y[2] * y[3]])
    }
}

/// Geodesic state plus the two columns of `∂(state)/∂(initial velocity)`.
struct VariationalFlow<'a, T> {
    profile: &'a ProfileSpec<T>,
}

impl<T: Scalar> OdeSystem<T, 12> for VariationalFlow<'_, T> {
    fn rhs(&self, _s: T, y: &[T; 12]) -> Result<[T; 12]> {
        let v = self.profile.eval(y[0])?;
        let (f, df, ddf) = (v.f, v.df, v.ddf);
        let (vt, vth) = (y[2], y[3]);
        let two = T::lit(2.0);
        let ratio = df / f;
        let mut out = [T::zero(); 12];
        out[0] = vt;
        out[1] = vth;
        out[2] = f * df * vth * vth;
        out[3] = -two * ratio * vt * vth;
        // Linearization of the flow.
        let a20 = (df * df + f * ddf) * vth * vth;
        let a23 = two * f * df * vth;
        let a30 = -two * (ddf / f - ratio * ratio) * vt * vth;
        let a32 = -two * ratio * vth;
        let a33 = -two * ratio * vt;
        for c in 0..2 {
            let j = &y[4 + 4 * c..8 + 4 * c];
            let o = 4 + 4 * c;
            out[o] = j[2];
            out[o + 1] = j[3];
            out[o + 2] = a20 * j[0] + a23 * j[3];
            out[o + 3] = a30 * j[0] + a32 * j[2] + a33 * j[3];
        }
        Ok(out)
    }
}

fn clairaut<T: Scalar>(profile: &ProfileSpec<T>, y: &[T]) -> Result<T> {
    let f = profile.eval(y[0])?.f;
    Ok(f * f * y[3])
}

fn check_clairaut<T: Scalar>(profile: &ProfileSpec<T>, y0: &[T], y1: &[T], settings: &GeodesicSettings<T>) -> Result<()> {
    let (c0, c1) = (clairaut(profile, y0)?, clairaut(profile, y1)?);
    let speed = (y0[2] * y0[2] + profile.eval(y0[0])?.f.powi(2) * y0[3] * y0[3]).sqrt();
    if (c1 - c0).abs() > settings.clairaut_drift * (T::one() + speed) {
        return Err(Error::IntegrationQuality(format!("Clairaut constant drifted from {c0} to {c1}")));
    }
    Ok(())
}

/// Integrates the geodesic with initial velocity `v` for unit time.
/// Returns the end state with `θ` unwrapped.
pub(crate) fn flow<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &[T],
    v: &[T],
    settings: &GeodesicSettings<T>,
) -> Result<[T; 4]> {
    let y0 = [p[0], p[1], v[0], v[1]];
    let sys = GeodesicFlow { profile };
    let y = match settings.integration {
        Integration::Adaptive(tol) => integrate_adaptive(&sys, y0, T::zero(), T::one(), tol, |_, _| true)?.0,
        Integration::Fixed(n) => integrate_fixed(&sys, y0, T::zero(), T::one(), n)?,
    };
    check_clairaut(profile, &y0, &y, settings)?;
    Ok(y)
}

pub(crate) fn exp<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &ChartPoint<T>,
    v: &[T],
    settings: &GeodesicSettings<T>,
) -> Result<ChartPoint<T>> {
    if v.iter().all(|c| *c == T::zero()) {
        return Ok(p.clone());
    }
    let y = flow(profile, &p.coords, v, settings)?;
    Ok(ChartPoint::new(vec![y[0], wrap_angle(y[1])]))
}

/// Endpoint and its Jacobian with respect to the initial velocity.
fn shoot<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &[T],
    v: [T; 2],
    settings: &GeodesicSettings<T>,
) -> Result<([T; 2], [[T; 2]; 2])> {
    let mut y0 = [T::zero(); 12];
    y0[0] = p[0];
    y0[1] = p[1];
    y0[2] = v[0];
    y0[3] = v[1];
    y0[6] = T::one();
    y0[11] = T::one();
    let sys = VariationalFlow { profile };
    let y = match settings.integration {
        Integration::Adaptive(tol) => integrate_adaptive(&sys, y0, T::zero(), T::one(), tol, |_, _| true)?.0,
        Integration::Fixed(n) => integrate_fixed(&sys, y0, T::zero(), T::one(), n)?,
    };
    Ok(([y[0], y[1]], [[y[4], y[8]], [y[5], y[9]]]))
}

/// Result of the boundary-value solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpSolution<T> {
    /// Initial velocity (time-one parametrization), i.e. the logarithm.
    pub velocity: [T; 2],
    pub length: T,
    /// Length of a distinct competitor within the tie tolerance, if any.
    pub tie: Option<T>,
}

fn speed<T: Scalar>(profile: &ProfileSpec<T>, p: &[T], v: &[T; 2]) -> Result<T> {
    let f = profile.eval(p[0])?.f;
    Ok((v[0] * v[0] + f * f * v[1] * v[1]).sqrt())
}

/// Newton's method for `exp_p(v) = target` (`target` has `θ` unwrapped).
pub fn newton<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &[T],
    target: [T; 2],
    v0: [T; 2],
    settings: &GeodesicSettings<T>,
) -> Result<[T; 2]> {
    let f1 = profile.eval(target[0])?.f;
    let resid = |e: [T; 2]| -> ([T; 2], T) {
        let r = [e[0] - target[0], e[1] - target[1]];
        (r, (r[0] * r[0] + f1 * f1 * r[1] * r[1]).sqrt())
    };
    let mut v = v0;
    let (mut e, mut jac) = shoot(profile, p, v, settings)?;
    let (mut r, mut rn) = resid(e);
    for _ in 0..settings.newton_iterations {
        let scale = T::one() + speed(profile, p, &v)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == T::zero() || !det.is_finite() {
            return Err(Error::BvpNonConvergence("singular shooting Jacobian (conjugate point)".into()));
        }
        let dv = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        if rn <= T::lit(1e-13) * scale {
            // With fixed steps the endpoint map is smooth, so one more step
            // takes the residual to rounding level.
            if let Integration::Fixed(_) = settings.integration {
                let trial = [v[0] + dv[0], v[1] + dv[1]];
                if let Ok((e2, _)) = shoot(profile, p, trial, settings) {
                    if resid(e2).1 <= rn {
                        return Ok(trial);
                    }
                }
            }
            return Ok(v);
        }
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..12 {
            let trial = [v[0] + lambda * dv[0], v[1] + lambda * dv[1]];
            if let Ok((e2, j2)) = shoot(profile, p, trial, settings) {
                let (r2, rn2) = resid(e2);
                if rn2 < rn || rn2 <= T::lit(1e-13) * scale {
                    v = trial;
                    e = e2;
                    jac = j2;
                    r = r2;
                    rn = rn2;
                    accepted = true;
                    break;
                }
            }
            lambda *= T::lit(0.5);
        }
        if !accepted {
            // Stalled at the noise floor of the integrator.
            let step = (dv[0] * dv[0] + dv[1] * dv[1]).sqrt();
            if rn <= T::lit(1e-9) * scale && step <= T::lit(1e-9) * scale {
                return Ok(v);
            }
            return Err(Error::BvpNonConvergence(format!("Newton stalled with residual {rn}")));
        }
        let _ = e;
    }
    if rn <= T::lit(1e-10) * (T::one() + speed(profile, p, &v)?) {
        return Ok(v);
    }
    Err(Error::BvpNonConvergence(format!("Newton iteration budget exhausted, residual {rn}")))
}

#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    miss: T,
    s: T,
    dir: [T; 2],
    winding: T,
}

/// Upper bound on the distance: along a parallel at the narrower end, then
/// along a meridian.
fn path_bound<T: Scalar>(profile: &ProfileSpec<T>, p: &[T], q: &[T]) -> Result<T> {
    let (fp, fq) = (profile.eval(p[0])?.f, profile.eval(q[0])?.f);
    Ok((q[0] - p[0]).abs() + fp.min(fq) * wrap_angle(q[1] - p[1]).abs())
}

/// Minimizing geodesic from `p` to `q`.
pub fn solve_bvp<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &ChartPoint<T>,
    q: &ChartPoint<T>,
    settings: &GeodesicSettings<T>,
) -> Result<BvpSolution<T>> {
    let (pc, qc) = (&p.coords, &q.coords);
    let dtheta = wrap_angle(qc[1] - pc[1]);
    let fq = profile.eval(qc[0])?.f;
    let fp = profile.eval(pc[0])?.f;
    if (qc[0] - pc[0]).abs() + fq * dtheta.abs() <= T::lit(1e-15) {
        return Ok(BvpSolution { velocity: [T::zero(), T::zero()], length: T::zero(), tie: None });
    }
    let bound = path_bound(profile, pc, qc)?;
    let reach = bound * T::lit(1.05) + T::lit(1e-3);

    // Ray scan.
    let n = settings.scan_directions;
    let sys = GeodesicFlow { profile };
    let mut rays: Vec<Candidate<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let psi = T::TAU() * T::of(i) / T::of(n);
        let dir = [psi.cos(), psi.sin() / fp];
        let mut best = Candidate { miss: T::infinity(), s: T::zero(), dir, winding: T::zero() };
        let y0 = [pc[0], pc[1], dir[0], dir[1]];
        let _ = integrate_adaptive(&sys, y0, T::zero(), reach, settings.scan_tolerance, |s, y| {
            let k = ((y[1] - qc[1]) / T::TAU()).round();
            let dth = y[1] - qc[1] - k * T::TAU();
            let miss = ((y[0] - qc[0]).powi(2) + (fq * dth).powi(2)).sqrt();
            if miss < best.miss {
                best = Candidate { miss, s, dir, winding: k };
            }
            true
        });
        rays.push(best);
    }
    let mut candidates: Vec<Candidate<T>> = (0..n)
        .filter(|&i| {
            let (a, b, c) = (rays[(i + n - 1) % n].miss, rays[i].miss, rays[(i + 1) % n].miss);
            b.is_finite() && b <= a && b <= c
        })
        .map(|i| rays[i])
        .collect();
    candidates.sort_by(|a, b| a.miss.partial_cmp(&b.miss).unwrap_or(std::cmp::Ordering::Equal));
    candidates.truncate(settings.max_candidates);

    // Straight chart guess on the nearest winding.
    let mut starts: Vec<([T; 2], T)> = vec![([qc[0] - pc[0], dtheta], (pc[1] + dtheta - qc[1]) / T::TAU())];
    for c in &candidates {
        starts.push(([c.dir[0] * c.s, c.dir[1] * c.s], c.winding));
    }

    let mut found: Vec<([T; 2], T, T)> = Vec::new();
    let mut last_err = None;
    for (v0, winding) in starts {
        let target = [qc[0], qc[1] + winding.round() * T::TAU()];
        match newton(profile, pc, target, v0, settings) {
            Ok(v) => {
                let len = speed(profile, pc, &v)?;
                let dup = found.iter().any(|(w, k, _)| {
                    *k == winding.round()
                        && ((w[0] - v[0]).abs() + fp * (w[1] - v[1]).abs()) <= T::lit(1e-7) * (T::one() + len)
                });
                if !dup {
                    found.push((v, winding.round(), len));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::BvpNonConvergence("no candidate geodesic".into())));
    }
    found.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal));
    let (velocity, _, length) = found[0];
    let tie = found
        .get(1)
        .map(|x| x.2)
        .filter(|&l2| (l2 - length).abs() <= settings.tie_tolerance * length.max(T::one()));
    Ok(BvpSolution { velocity, length, tie })
}

/// Samples the geodesic of a solved BVP.
pub(crate) fn solution_with_path<T: Scalar>(
    profile: &ProfileSpec<T>,
    p: &ChartPoint<T>,
    sol: &BvpSolution<T>,
    settings: &GeodesicSettings<T>,
) -> Result<GeodesicSolution<T>> {
    let len = sol.length;
    let direction = if len > T::zero() {
        vec![sol.velocity[0] / len, sol.velocity[1] / len]
    } else {
        vec![T::one(), T::zero()]
    };
    let mut path = Vec::with_capacity(PATH_SAMPLES + 1);
    path.push((T::zero(), p.clone()));
    for i in 1..=PATH_SAMPLES {
        let frac = T::of(i) / T::of(PATH_SAMPLES);
        let v = [sol.velocity[0] * frac, sol.velocity[1] * frac];
        path.push((len * frac, exp(profile, p, &v, settings)?));
    }
    Ok(GeodesicSolution {
        start: p.clone(),
        direction,
        length: len,
        path,
        minimizing: true,
        ambiguous: sol.tie.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::FlatBandParams;

    fn band() -> ProfileSpec<f64> {
        ProfileSpec::flat_band(FlatBandParams { radius: 1.0, band: 1.0, blend: 0.5, cap: 1.0 }).unwrap()
    }

    #[test]
    fn flat_band_distance_matches_unrolled_cylinder() {
        let s = GeodesicSettings::default();
        let p = ChartPoint::new(vec![0.0, 0.0]);
        let q = ChartPoint::new(vec![0.5, 0.8]);
        let sol = solve_bvp(&band(), &p, &q, &s).unwrap();
        assert!((sol.length - (0.25f64 + 0.64).sqrt()).abs() < 1e-10, "{}", sol.length);
        assert!(sol.tie.is_none());
    }

    #[test]
    fn winding_is_found_across_the_seam_of_theta() {
        let s = GeodesicSettings::default();
        let p = ChartPoint::new(vec![0.0, 3.0]);
        let q = ChartPoint::new(vec![0.2, -3.0]);
        let sol = solve_bvp(&band(), &p, &q, &s).unwrap();
        let dth = std::f64::consts::TAU - 6.0;
        assert!((sol.length - (0.04 + dth * dth).sqrt()).abs() < 1e-10, "{}", sol.length);
    }

    #[test]
    fn sine_profile_reproduces_great_circle_distance() {
        let prof = ProfileSpec::sine(1.0, 0.05).unwrap();
        let s = GeodesicSettings::default();
        let p = ChartPoint::new(vec![1.2, 0.1]);
        let q = ChartPoint::new(vec![1.9, 1.4]);
        let sol = solve_bvp(&prof, &p, &q, &s).unwrap();
        let unit = |c: &[f64]| [c[0].sin() * c[1].cos(), c[0].sin() * c[1].sin(), c[0].cos()];
        let (a, b) = (unit(&p.coords), unit(&q.coords));
        let exact = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).acos();
        assert!((sol.length - exact).abs() < 1e-9, "{} vs {exact}", sol.length);
    }

    #[test]
    fn opposite_points_on_the_band_are_flagged_as_ties() {
        let s = GeodesicSettings::default();
        let p = ChartPoint::new(vec![0.0, 0.0]);
        let q = ChartPoint::new(vec![0.0, std::f64::consts::PI]);
        let sol = solve_bvp(&band(), &p, &q, &s).unwrap();
        assert!((sol.length - std::f64::consts::PI).abs() < 1e-10);
        assert!(sol.tie.is_some());
    }

    #[test]
    fn wrapped_cap_geodesic_satisfies_triangle_inequality() {
        let s = GeodesicSettings::default();
        let p = ChartPoint::new(vec![-0.7068150788064587, 1.7649907213842724]);
        let mid = ChartPoint::new(vec![-0.03266715217892356, 2.31916590388837]);
        let q = ChartPoint::new(vec![1.3132151425281386, -2.8629282491505776]);
        let d = |a: &ChartPoint<f64>, b: &ChartPoint<f64>| solve_bvp(&band(), a, b, &s).unwrap().length;
        assert!(d(&p, &q) <= d(&p, &mid) + d(&mid, &q) + 1e-9);
    }
}

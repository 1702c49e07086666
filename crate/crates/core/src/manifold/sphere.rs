//! Round sphere of radius `r` through two polar charts.
//!
//! Chart 0: colatitude from +z and longitude. Chart 1: colatitude from +x,
//! longitude in the (y, z) plane. Chart 1's poles lie on chart 0's equator,
//! so every point has a chart in which it is at least 0.5 rad from a pole.

use super::{ChartPoint, GeodesicSolution, PATH_SAMPLES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Points within this colatitude band around chart 0's equator stay in
/// chart 0; the rest hand off to chart 1.
pub(super) const HANDOFF: f64 = 0.5;

type V3<T> = [T; 3];

fn dot3<T: Scalar>(a: &V3<T>, b: &V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3<T: Scalar>(a: &V3<T>, b: &V3<T>) -> V3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn norm3<T: Scalar>(a: &V3<T>) -> T {
    dot3(a, a).sqrt()
}

// Chart 1 frame: ambient = (s.z, s.x, s.y) for standard-frame s.
fn to_ambient<T: Scalar>(chart: u8, s: V3<T>) -> V3<T> {
    if chart == 0 {
        s
    } else {
        [s[2], s[0], s[1]]
    }
}

fn from_ambient<T: Scalar>(chart: u8, e: V3<T>) -> V3<T> {
    if chart == 0 {
        e
    } else {
        [e[1], e[2], e[0]]
    }
}

pub(super) fn check_point<T: Scalar>(p: &ChartPoint<T>) -> Result<()> {
    if p.chart > 1 {
        return Err(Error::OutsideChart(format!("unknown sphere chart {}", p.chart)));
    }
    let phi = p.coords[0];
    if !(phi > T::zero() && phi < T::PI()) || phi.sin() < T::lit(1e-9) {
        return Err(Error::OutsideChart(format!("colatitude {phi} at a chart pole")));
    }
    Ok(())
}

pub(super) fn unit_vector<T: Scalar>(p: &ChartPoint<T>) -> V3<T> {
    let (phi, lam) = (p.coords[0], p.coords[1]);
    to_ambient(p.chart, [phi.sin() * lam.cos(), phi.sin() * lam.sin(), phi.cos()])
}

fn coords_in<T: Scalar>(chart: u8, e: &V3<T>) -> [T; 2] {
    let s = from_ambient(chart, *e);
    let rho = (s[0] * s[0] + s[1] * s[1]).sqrt();
    [rho.atan2(s[2]), s[1].atan2(s[0])]
}

/// Chart handoff: stay in chart 0 inside its equatorial band.
pub(super) fn canonical<T: Scalar>(e: &V3<T>) -> ChartPoint<T> {
    let c0 = coords_in(0, e);
    if (c0[0] - T::FRAC_PI_2()).abs() <= T::lit(HANDOFF) {
        ChartPoint::in_chart(0, c0.to_vec())
    } else {
        ChartPoint::in_chart(1, coords_in(1, e).to_vec())
    }
}

/// Coordinate basis vectors `∂φ`, `∂λ` at `p` in ambient coordinates (for the
/// unit sphere; scale by `r` for radius `r`).
fn basis<T: Scalar>(p: &ChartPoint<T>) -> (V3<T>, V3<T>) {
    let (phi, lam) = (p.coords[0], p.coords[1]);
    let dphi = [phi.cos() * lam.cos(), phi.cos() * lam.sin(), -phi.sin()];
    let dlam = [-phi.sin() * lam.sin(), phi.sin() * lam.cos(), T::zero()];
    (to_ambient(p.chart, dphi), to_ambient(p.chart, dlam))
}

fn ambient_tangent<T: Scalar>(r: T, p: &ChartPoint<T>, v: &[T]) -> V3<T> {
    let (a, b) = basis(p);
    [
        r * (v[0] * a[0] + v[1] * b[0]),
        r * (v[0] * a[1] + v[1] * b[1]),
        r * (v[0] * a[2] + v[1] * b[2]),
    ]
}

fn chart_components<T: Scalar>(r: T, p: &ChartPoint<T>, w: &V3<T>) -> Vec<T> {
    let (a, b) = basis(p);
    let (na, nb) = (dot3(&a, &a) * r, dot3(&b, &b) * r);
    vec![dot3(w, &a) / na, dot3(w, &b) / nb]
}

pub(super) fn exp<T: Scalar>(r: T, p: &ChartPoint<T>, v: &[T]) -> Result<ChartPoint<T>> {
    let x = unit_vector(p);
    let w = ambient_tangent(r, p, v);
    let len = norm3(&w);
    if len == T::zero() {
        return Ok(canonical(&x));
    }
    let a = len / r;
    let (c, s) = (a.cos(), a.sin());
    let y = [
        c * x[0] + s * w[0] / len,
        c * x[1] + s * w[1] / len,
        c * x[2] + s * w[2] / len,
    ];
    let n = norm3(&y);
    Ok(canonical(&[y[0] / n, y[1] / n, y[2] / n]))
}

/// `r · ∠(x, y)`, evaluated with `atan2` for accuracy at small and near-π
/// separations (equal to `r·arccos⟨x, y⟩`).
pub(super) fn arc<T: Scalar>(r: T, p: &ChartPoint<T>, q: &ChartPoint<T>) -> T {
    let (x, y) = (unit_vector(p), unit_vector(q));
    r * norm3(&cross3(&x, &y)).atan2(dot3(&x, &y))
}

pub(super) fn log<T: Scalar>(r: T, p: &ChartPoint<T>, q: &ChartPoint<T>) -> Result<Vec<T>> {
    let (x, y) = (unit_vector(p), unit_vector(q));
    let d = arc(r, p, q);
    if d == T::zero() {
        return Ok(vec![T::zero(), T::zero()]);
    }
    let c = dot3(&x, &y);
    let u = [y[0] - c * x[0], y[1] - c * x[1], y[2] - c * x[2]];
    let nu = norm3(&u);
    if nu < T::lit(1e-12) {
        return Err(Error::AmbiguousGeodesic(d.to_f64_lossy(), d.to_f64_lossy()));
    }
    let w = [u[0] * d / nu, u[1] * d / nu, u[2] * d / nu];
    Ok(chart_components(r, p, &w))
}

pub(super) fn distance<T: Scalar>(r: T, p: &ChartPoint<T>, q: &ChartPoint<T>) -> Result<(T, GeodesicSolution<T>)> {
    let d = arc(r, p, q);
    let (x, y) = (unit_vector(p), unit_vector(q));
    let ambiguous = norm3(&cross3(&x, &y)) < T::lit(1e-12) && dot3(&x, &y) < T::zero();
    let direction = if d == T::zero() || ambiguous {
        // Any direction is minimizing; pick the coordinate direction.
        let g00 = r;
        vec![g00.recip(), T::zero()]
    } else {
        let v = log(r, p, q)?;
        vec![v[0] / d, v[1] / d]
    };
    let mut path = Vec::with_capacity(PATH_SAMPLES + 1);
    for i in 0..=PATH_SAMPLES {
        let s = d * T::of(i) / T::of(PATH_SAMPLES);
        path.push((s, exp(r, p, &[direction[0] * s, direction[1] * s])?));
    }
    Ok((
        d,
        GeodesicSolution { start: p.clone(), direction, length: d, path, minimizing: true, ambiguous },
    ))
}

//! Fourth mixed derivative `∂⁴/∂s²∂t²` of
//! `F(s, t) = d(exp_p(sX), exp_p(W + tY))²` at `s = t = 0`, and scans for
//! positive values.
//!
//! The derivative uses the product stencil `[1, −2, 1] ⊗ [1, −2, 1] / h⁴` at
//! steps `h` and `h/2`, combined by Richardson extrapolation (the stencil
//! error is even in `h`). On surfaces of revolution every evaluation of `F`
//! goes through fixed-step integration and Newton shooting warm-started from
//! the central geodesic, so `F` is a smooth function of `(s, t)` down to
//! rounding and the differences are not polluted by adaptive step changes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::revolution::{self, GeodesicSettings};
use crate::manifold::{ChartPoint, ManifoldSpec, TangentVec};
use crate::scalar::Scalar;
use crate::seed;

/// Fixed RK steps per unit of geodesic time for stencil evaluations.
pub const STENCIL_STEPS: usize = 256;
/// Positive values above this count as MTW violations.
pub const POS_TOL: f64 = 1e-3;
/// `|⟨X, Y⟩| ≤ PERP_TOL · |X||Y|` for perpendicular probes.
pub const PERP_TOL: f64 = 1e-10;
/// `|W|` must stay below this fraction of the TIL radius.
pub const TIL_FRACTION: f64 = 0.9;
/// Minimizing check for the central geodesic `p → exp_p(W)`.
pub const TIL_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtwProbe<T> {
    pub p: ChartPoint<T>,
    pub w: TangentVec<T>,
    pub x: TangentVec<T>,
    pub y: TangentVec<T>,
    pub perpendicular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtwValue<T> {
    pub value: T,
    pub stencil_error_estimate: T,
    pub h_used: T,
}

impl<T: Scalar> MtwProbe<T> {
    /// Builds a probe from chart components. When `perpendicular` is set, `Y`
    /// is orthogonalized against `X` in `g_p` (keeping its norm).
    pub fn new(m: &ManifoldSpec<T>, p: ChartPoint<T>, w: Vec<T>, x: Vec<T>, y: Vec<T>, perpendicular: bool) -> Result<Self> {
        let x = m.tangent(&p, x)?;
        let mut y = m.tangent(&p, y)?;
        if perpendicular {
            let xx = x.norm * x.norm;
            if xx == T::zero() {
                return Err(Error::InvalidInstance("X must be nonzero for a perpendicular probe".into()));
            }
            let c = m.inner(&p, &x.components, &y.components)? / xx;
            let comps: Vec<T> = y.components.iter().zip(&x.components).map(|(&a, &b)| a - c * b).collect();
            let orth = m.tangent(&p, comps)?;
            let scale = if orth.norm > T::zero() { y.norm / orth.norm } else { T::zero() };
            y = m.tangent(&p, orth.components.iter().map(|&a| a * scale).collect())?;
        }
        let w = m.tangent(&p, w)?;
        let probe = MtwProbe { p, w, x, y, perpendicular };
        probe.check_perpendicular(m)?;
        Ok(probe)
    }

    pub fn check_perpendicular(&self, m: &ManifoldSpec<T>) -> Result<()> {
        if self.perpendicular {
            let ip = m.inner(&self.p, &self.x.components, &self.y.components)?;
            if ip.abs() > T::lit(PERP_TOL) * self.x.norm * self.y.norm {
                return Err(Error::InvalidInstance(format!("X and Y not perpendicular: g(X,Y) = {ip}")));
            }
        }
        Ok(())
    }

    /// `W` lies in the tangent injectivity locus: the geodesic
    /// `s ↦ exp_p(sW)`, `s ∈ [0, 1]`, is minimizing.
    pub fn check_til(&self, m: &ManifoldSpec<T>) -> Result<()> {
        let q = m.exp_map(&self.w)?;
        let d = m.distance_value(&self.p, &q)?;
        if d < self.w.norm - T::lit(TIL_CHECK_TOL) {
            return Err(Error::TilGuard(format!("d(p, exp_p W) = {d} < |W| = {}", self.w.norm)));
        }
        Ok(())
    }
}

fn add<T: Scalar>(a: &[T], b: &[T], c: T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + c * y).collect()
}

/// Evaluator for `F(s, t)` of one probe.
pub struct CostSurface<'a, T: Scalar> {
    m: &'a ManifoldSpec<T>,
    probe: &'a MtwProbe<T>,
    settings: GeodesicSettings<T>,
}

impl<'a, T: Scalar> CostSurface<'a, T> {
    pub fn new(m: &'a ManifoldSpec<T>, probe: &'a MtwProbe<T>) -> Self {
        CostSurface { m, probe, settings: GeodesicSettings::fixed(STENCIL_STEPS) }
    }

    fn x_point(&self, s: T) -> Result<ChartPoint<T>> {
        let v = add(&vec![T::zero(); self.probe.x.components.len()], &self.probe.x.components, s);
        self.exp_unwrapped(&v)
    }

    fn y_point(&self, t: T) -> Result<ChartPoint<T>> {
        let v = add(&self.probe.w.components, &self.probe.y.components, t);
        self.exp_unwrapped(&v)
    }

    fn exp_unwrapped(&self, v: &[T]) -> Result<ChartPoint<T>> {
        match self.m {
            ManifoldSpec::Revolution { profile } => {
                if v.iter().all(|c| *c == T::zero()) {
                    return Ok(self.probe.p.clone());
                }
                let y = revolution::flow(profile, &self.probe.p.coords, v, &self.settings)?;
                Ok(ChartPoint::new(vec![y[0], y[1]]))
            }
            _ => {
                let tv = self.m.tangent(&self.probe.p, v.to_vec())?;
                self.m.exp_map(&tv)
            }
        }
    }

    /// Squared distance between the two images, with the revolution BVP
    /// warm-started at `W + tY − sX`.
    fn squared_distance(&self, xs: &ChartPoint<T>, yt: &ChartPoint<T>, s: T, t: T) -> Result<T> {
        match self.m {
            ManifoldSpec::Revolution { profile } => {
                let guess = add(&add(&self.probe.w.components, &self.probe.y.components, t), &self.probe.x.components, -s);
                let v = revolution::newton(profile, &xs.coords, [yt.coords[0], yt.coords[1]], [guess[0], guess[1]], &self.settings)?;
                let f = profile.eval(xs.coords[0])?.f;
                Ok(v[0] * v[0] + f * f * v[1] * v[1])
            }
            _ => {
                let d = self.m.distance_value(xs, yt)?;
                Ok(d * d)
            }
        }
    }

    pub fn eval(&self, s: T, t: T) -> Result<T> {
        let xs = self.x_point(s)?;
        let yt = self.y_point(t)?;
        self.squared_distance(&xs, &yt, s, t)
    }

    /// `F` on the tensor grid `ss × ts`, reusing the exponential images.
    pub fn grid(&self, ss: &[T], ts: &[T]) -> Result<Vec<Vec<T>>> {
        let xs = ss.iter().map(|&s| self.x_point(s)).collect::<Result<Vec<_>>>()?;
        let ys = ts.iter().map(|&t| self.y_point(t)).collect::<Result<Vec<_>>>()?;
        let mut out = vec![vec![T::zero(); ts.len()]; ss.len()];
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                out[i][j] = self.squared_distance(x, y, ss[i], ts[j])?;
            }
        }
        Ok(out)
    }
}

/// `F(s, t)` with the TIL guard applied.
pub fn cost_surface<T: Scalar>(m: &ManifoldSpec<T>, probe: &MtwProbe<T>, s: T, t: T) -> Result<T> {
    probe.check_til(m)?;
    CostSurface::new(m, probe).eval(s, t)
}

fn product_stencil<T: Scalar>(g: &[Vec<T>], h: T) -> T {
    let w = [T::one(), -T::lit(2.0), T::one()];
    let mut acc = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            acc += w[i] * w[j] * g[i][j];
        }
    }
    acc / (h * h * h * h)
}

fn richardson<T: Scalar>(coarse: T, fine: T, h: T) -> Result<MtwValue<T>> {
    let value = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
    let err = (fine - coarse).abs();
    if !value.is_finite() {
        return Err(Error::Unresolved { value: value.to_f64_lossy(), error: err.to_f64_lossy() });
    }
    if err > T::lit(0.1) * value.abs() && err > T::lit(1e-3) {
        return Err(Error::Unresolved { value: value.to_f64_lossy(), error: err.to_f64_lossy() });
    }
    Ok(MtwValue { value, stencil_error_estimate: err, h_used: h })
}

/// Mixed fourth derivative of an arbitrary smooth `F(s, t)` at the origin.
pub fn mixed_fourth_derivative<T: Scalar, F>(mut f: F, h: T) -> Result<MtwValue<T>>
where
    F: FnMut(T, T) -> Result<T>,
{
    let mut eval_grid = |step: T| -> Result<Vec<Vec<T>>> {
        let pts = [-step, T::zero(), step];
        let mut g = vec![vec![T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = f(pts[i], pts[j])?;
            }
        }
        Ok(g)
    };
    let half = h * T::lit(0.5);
    let coarse = product_stencil(&eval_grid(h)?, h);
    let fine = product_stencil(&eval_grid(half)?, half);
    richardson(coarse, fine, h)
}

/// Default step: the eighth root of the distance engine's accuracy. On
/// Euclidean space `F` is quadratic, there is no truncation error to balance
/// and a unit step keeps rounding noise smallest.
pub fn default_step<T: Scalar>(m: &ManifoldSpec<T>) -> T {
    match m {
        ManifoldSpec::Euclidean { .. } => T::one(),
        _ => m.engine_tolerance().powf(T::lit(0.125)),
    }
}

pub fn fourth_mixed_derivative<T: Scalar>(m: &ManifoldSpec<T>, probe: &MtwProbe<T>, h: Option<T>) -> Result<MtwValue<T>> {
    probe.check_perpendicular(m)?;
    probe.check_til(m)?;
    let h = h.unwrap_or_else(|| default_step(m));
    let surface = CostSurface::new(m, probe);
    let half = h * T::lit(0.5);
    // Five distinct offsets per axis; the centre is shared.
    let offs = [-h, -half, T::zero(), half, h];
    let g = surface.grid(&offs, &offs)?;
    let pick = |idx: [usize; 3]| -> Vec<Vec<T>> { idx.iter().map(|&i| idx.iter().map(|&j| g[i][j]).collect()).collect() };
    let coarse = product_stencil(&pick([0, 2, 4]), h);
    let fine = product_stencil(&pick([1, 2, 3]), half);
    richardson(coarse, fine, h)
}

/// Where probes are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRegion<T> {
    /// Box in chart coordinates for the base point `p`.
    pub p_lo: Vec<T>,
    pub p_hi: Vec<T>,
    /// Range of `|W|`; the direction of `W` is uniform unless `w_heading`
    /// restricts it to a cone (chart-frame angle, half-width).
    pub w_min: T,
    pub w_max: T,
    pub w_heading: Option<(T, T)>,
}

impl<T: Scalar> ProbeRegion<T> {
    /// A ball of chart radius `radius` around the manifold's default base
    /// point, with `|W|` up to `0.9 ·` its TIL radius.
    pub fn around_base(m: &ManifoldSpec<T>, radius: T) -> Self {
        let c = m.default_base_point();
        let til = m.til_inner_radius(&c);
        let w_max = if til.is_finite() { til * T::lit(TIL_FRACTION) * T::lit(0.5) } else { T::one() };
        ProbeRegion {
            p_lo: c.coords.iter().map(|&x| x - radius).collect(),
            p_hi: c.coords.iter().map(|&x| x + radius).collect(),
            w_min: T::zero(),
            w_max,
            w_heading: None,
        }
    }

    /// Probes straddling the seam of a flat-band surface: `p` in the band
    /// within `reach` of the seam at `t = band`, `W` heading towards the cap.
    pub fn flat_band_seam(m: &ManifoldSpec<T>, reach: T, w_max: T) -> Result<Self> {
        let band = m
            .profile()
            .and_then(|p| p.flat_band_params())
            .ok_or_else(|| Error::InvalidManifold("seam region requires a flat-band surface".into()))?
            .band;
        Ok(ProbeRegion {
            p_lo: vec![band - reach, -T::PI()],
            p_hi: vec![band, T::PI()],
            w_min: T::lit(0.2) * w_max,
            w_max,
            w_heading: Some((T::zero(), T::FRAC_PI_2() * T::lit(0.9))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome<T> {
    pub index: usize,
    pub probe: MtwProbe<T>,
    pub value: Option<MtwValue<T>>,
    /// Reason when the probe was rejected (TIL guard) or unresolved.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtwScanReport<T> {
    pub manifold: String,
    pub trials: usize,
    pub perpendicular_only: bool,
    pub seed: u64,
    pub pos_tol: T,
    pub evaluated: usize,
    pub rejected: usize,
    pub unresolved: usize,
    pub positives: usize,
    /// Positives whose error estimate is below a tenth of the value.
    pub resolved_positives: usize,
    pub max_value: Option<T>,
    pub argmax: Option<MtwProbe<T>>,
    pub argmax_error: Option<T>,
    pub outcomes: Vec<ProbeOutcome<T>>,
}

impl<T: Scalar> MtwScanReport<T> {
    /// At least one positive value resolved beyond its error estimate.
    pub fn violation_evidence(&self) -> bool {
        self.resolved_positives > 0
    }
}

fn uniform<T: Scalar, R: rand::Rng>(rng: &mut R, lo: T, hi: T) -> T {
    lo + (hi - lo) * T::lit(rng.gen::<f64>())
}

/// Draws probe `index` of a scan deterministically.
pub fn sample_probe<T: Scalar>(
    m: &ManifoldSpec<T>,
    region: &ProbeRegion<T>,
    perpendicular_only: bool,
    master: u64,
    index: usize,
) -> Result<MtwProbe<T>> {
    let mut rng = seed::rng_for(master, seed::stream::MTW_PROBE, index as u64);
    let coords: Vec<T> = region.p_lo.iter().zip(&region.p_hi).map(|(&a, &b)| uniform(&mut rng, a, b)).collect();
    let p = m.normalize(&ChartPoint::in_chart(0, coords))?;
    let n = m.dim();
    let unit = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<T> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r > 1e-3 && r <= 1.0 {
                return v.iter().map(|x| T::lit(x / r)).collect();
            }
        }
    };
    // Orthonormal components → chart components.
    let to_chart = |u: Vec<T>| -> Result<Vec<T>> {
        if n == 2 {
            let fr = m.orthonormal_frame(&p)?;
            Ok(vec![fr[0][0] * u[0] + fr[1][0] * u[1], fr[0][1] * u[0] + fr[1][1] * u[1]])
        } else {
            Ok(u)
        }
    };
    let w_dir = match (region.w_heading, n) {
        (Some((heading, half)), 2) => {
            let a = heading + uniform(&mut rng, -half, half);
            vec![a.cos(), a.sin()]
        }
        _ => unit(&mut rng),
    };
    // Uniform in the annulus by area (2D) or by radius otherwise.
    let r = if n == 2 {
        let (a, b) = (region.w_min * region.w_min, region.w_max * region.w_max);
        uniform(&mut rng, a, b).sqrt()
    } else {
        uniform(&mut rng, region.w_min, region.w_max)
    };
    let w = to_chart(w_dir.iter().map(|&c| c * r).collect())?;
    let x = to_chart(unit(&mut rng))?;
    let y = to_chart(unit(&mut rng))?;
    MtwProbe::new(m, p, w, x, y, perpendicular_only)
}

/// Evaluates `trials` random probes in `region`.
pub fn mtw_scan<T: Scalar>(
    m: &ManifoldSpec<T>,
    region: &ProbeRegion<T>,
    trials: usize,
    perpendicular_only: bool,
    master: u64,
) -> Result<MtwScanReport<T>> {
    if trials == 0 {
        return Err(Error::Validation { key: "trials".into(), msg: "must be at least 1".into() });
    }
    let outcomes: Vec<ProbeOutcome<T>> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<ProbeOutcome<T>> {
            let probe = sample_probe(m, region, perpendicular_only, master, i)?;
            let (value, failure) = match fourth_mixed_derivative(m, &probe, None) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(ProbeOutcome { index: i, probe, value, failure })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(m, trials, perpendicular_only, master, outcomes))
}

pub(crate) fn summarize<T: Scalar>(
    m: &ManifoldSpec<T>,
    trials: usize,
    perpendicular_only: bool,
    master: u64,
    outcomes: Vec<ProbeOutcome<T>>,
) -> MtwScanReport<T> {
    let pos_tol = T::lit(POS_TOL);
    let mut report = MtwScanReport {
        manifold: m.to_string(),
        trials,
        perpendicular_only,
        seed: master,
        pos_tol,
        evaluated: 0,
        rejected: 0,
        unresolved: 0,
        positives: 0,
        resolved_positives: 0,
        max_value: None,
        argmax: None,
        argmax_error: None,
        outcomes: Vec::new(),
    };
    for o in &outcomes {
        match (&o.value, &o.failure) {
            (Some(v), _) => {
                report.evaluated += 1;
                if v.value > pos_tol {
                    report.positives += 1;
                    if v.stencil_error_estimate < v.value / T::lit(10.0) {
                        report.resolved_positives += 1;
                    }
                }
                if report.max_value.map_or(true, |mx| v.value > mx) {
                    report.max_value = Some(v.value);
                    report.argmax = Some(o.probe.clone());
                    report.argmax_error = Some(v.stencil_error_estimate);
                }
            }
            (None, Some(f)) if f.contains("unresolved") => report.unresolved += 1,
            _ => report.rejected += 1,
        }
    }
    report.outcomes = outcomes;
    report
}

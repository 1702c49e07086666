//! Flat-band surfaces, key-lemma configurations built on them, and the
//! rigidity experiments: a surface with an open flat band and positively
//! curved caps must violate both the `(3, 3)`-bipolar comparison and
//! MTW-without-perpendicularity somewhere.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::sample_instance;
use crate::distgeo::{
    self, solve_gram_projection, solve_lowrank, symmetric_eigen, ComparisonInstance, FeasibilityVerdict,
    ModelConfiguration, VerdictStatus,
};
use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, FlatBandParams, GeodesicSolution, ManifoldSpec, ProfileKind, ProfileSpec};
use crate::mtw::{self, MtwScanReport, ProbeRegion};
use crate::scalar::Scalar;
use crate::seed;

/// Persistence threshold: violation evidence needs
/// `best_penalty ≥ EVIDENCE_FACTOR · feas_tol · scale` in both solvers.
pub const EVIDENCE_FACTOR: f64 = 10.0;
/// Relative tolerance for "this geodesic is minimizing".
pub const MINIMIZING_TOL: f64 = 1e-6;
/// Default segment fractions for `(p_−, p_0, p_+, x_p)`.
pub const DEFAULT_FRACTIONS: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatBandSurfaceSpec<T> {
    pub params: FlatBandParams<T>,
    pub profile: ProfileSpec<T>,
}

/// Number of curvature samples taken in the blend region.
const BLEND_SAMPLES: usize = 16;

/// Flat band of radius `r` on `|t| ≤ w` with caps blended over `β`; the
/// invariants (exact flatness on the band, positive curvature in the blend,
/// consistency of `f''` across the seams) are checked before returning.
pub fn build_flat_band_profile<T: Scalar>(r: T, w: T, beta: T) -> Result<FlatBandSurfaceSpec<T>> {
    let m = ManifoldSpec::flat_band(r, w, beta)?;
    let profile = *m.profile().expect("flat band is a surface of revolution");
    let params = *profile.flat_band_params().expect("flat band parameters");
    let spec = FlatBandSurfaceSpec { params, profile };
    spec.verify()?;
    Ok(spec)
}

impl<T: Scalar> FlatBandSurfaceSpec<T> {
    pub fn manifold(&self) -> ManifoldSpec<T> {
        ManifoldSpec::Revolution { profile: self.profile }
    }

    pub fn in_band(&self, p: &ChartPoint<T>) -> bool {
        p.coords[0].abs() <= self.params.band
    }

    pub fn verify(&self) -> Result<()> {
        let FlatBandParams { band: w, blend: beta, .. } = self.params;
        for i in 0..=64 {
            let t = -w + T::lit(2.0) * w * T::of(i) / T::lit(64.0);
            if self.profile.eval(t)?.ddf != T::zero() {
                return Err(Error::InvariantViolation(format!("f'' is not zero at t = {t} inside the band")));
            }
        }
        let reach = beta.min(self.profile.t_max - w);
        let positive = (1..=BLEND_SAMPLES)
            .map(|i| self.profile.curvature(w + reach * T::of(i) / T::of(BLEND_SAMPLES + 1)))
            .collect::<Result<Vec<_>>>()?;
        if !positive.iter().any(|&k| k > T::zero()) {
            return Err(Error::InvariantViolation("no positive curvature in the blend region".into()));
        }
        // f'' against a central difference of f' across each seam.
        let h = T::lit(1e-4);
        for i in 0..=20 {
            let off = reach * (T::of(i) / T::lit(20.0) - T::lit(0.25));
            for t in [w + off, -(w + off)] {
                if !self.profile.contains(t - h) || !self.profile.contains(t + h) {
                    continue;
                }
                let fd = (self.profile.eval(t + h)?.df - self.profile.eval(t - h)?.df) / (T::lit(2.0) * h);
                let ddf = self.profile.eval(t)?.ddf;
                if (fd - ddf).abs() > T::lit(1e-5) * (T::one() + ddf.abs()) {
                    return Err(Error::InvariantViolation(format!("f'' inconsistent with f' at t = {t}")));
                }
            }
        }
        Ok(())
    }
}

/// The plane triangle `[p̃ q̃ x̃]` with `p̃ = (0, 0)`, `q̃ = (|pq|, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelTriangle<T> {
    pub base: T,
    pub side_p: T,
    pub side_q: T,
    pub angle_p: T,
    pub angle_q: T,
    pub apex: [T; 2],
}

impl<T: Scalar> ModelTriangle<T> {
    /// From the base length and the two base angles.
    pub fn from_angles(base: T, angle_p: T, angle_q: T) -> Result<Self> {
        let s = (angle_p + angle_q).sin();
        if !(angle_p > T::zero() && angle_q > T::zero() && angle_p + angle_q < T::PI()) || !(base > T::zero()) {
            return Err(Error::InvalidInstance(format!("no plane triangle with base {base} and angles {angle_p}, {angle_q}")));
        }
        let side_p = base * angle_q.sin() / s;
        let side_q = base * angle_p.sin() / s;
        Ok(ModelTriangle { base, side_p, side_q, angle_p, angle_q, apex: [side_p * angle_p.cos(), side_p * angle_p.sin()] })
    }

    /// From three side lengths.
    pub fn from_sides(base: T, side_p: T, side_q: T) -> Result<Self> {
        let angle_p = distgeo::model_angle(base, side_p, side_q)?;
        let angle_q = distgeo::model_angle(base, side_q, side_p)?;
        Ok(ModelTriangle { base, side_p, side_q, angle_p, angle_q, apex: [side_p * angle_p.cos(), side_p * angle_p.sin()] })
    }

    /// Plane point at fraction `u` of side `[p̃ x̃]`, `[q̃ x̃]` or `[p̃ q̃]`.
    pub fn on_side(&self, side: Side, u: T) -> [T; 2] {
        let (a, b) = match side {
            Side::P => ([T::zero(), T::zero()], self.apex),
            Side::Q => ([self.base, T::zero()], self.apex),
            Side::Base => ([T::zero(), T::zero()], [self.base, T::zero()]),
        };
        [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    P,
    Q,
    Base,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaConfiguration<T> {
    pub p_minus: ChartPoint<T>,
    pub p_0: ChartPoint<T>,
    pub p_plus: ChartPoint<T>,
    pub x_p: ChartPoint<T>,
    pub q_minus: ChartPoint<T>,
    pub q_0: ChartPoint<T>,
    pub q_plus: ChartPoint<T>,
    pub x_q: ChartPoint<T>,
    pub triangle: ModelTriangle<T>,
    pub fractions: [T; 4],
    pub geodesic_p: GeodesicSolution<T>,
    pub geodesic_q: GeodesicSolution<T>,
}

/// Request for [`key_lemma_configuration`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaRequest<T> {
    pub p: ChartPoint<T>,
    pub q: ChartPoint<T>,
    pub angle_p: T,
    pub angle_q: T,
    /// `+1` or `−1`: which side of `[pq]` the apex lies on, as the sign of
    /// the rotation from `pq` towards the apex in the orthonormal frame at
    /// `p`.
    pub side: T,
    pub fractions: [T; 4],
}

/// Where the band is: the whole surface for Euclidean space, `|t| ≤ w` on a
/// flat-band surface.
fn band_check<T: Scalar>(m: &ManifoldSpec<T>) -> Result<Box<dyn Fn(&ChartPoint<T>) -> bool + Send + Sync + '_>> {
    match m {
        ManifoldSpec::Euclidean { .. } => Ok(Box::new(|_| true)),
        ManifoldSpec::Revolution { profile } => match profile.kind {
            ProfileKind::FlatBand(params) => Ok(Box::new(move |p: &ChartPoint<T>| p.coords[0].abs() <= params.band)),
            ProfileKind::Cylinder { .. } => Ok(Box::new(|_| true)),
            _ => Err(Error::InvalidManifold("key-lemma configurations need a flat region".into())),
        },
        ManifoldSpec::Sphere { .. } => Err(Error::InvalidManifold("key-lemma configurations need a flat region".into())),
    }
}

fn rotate<T: Scalar>(m: &ManifoldSpec<T>, p: &ChartPoint<T>, v: &[T], angle: T) -> Result<Vec<T>> {
    let fr = m.orthonormal_frame(p)?;
    // Chart → orthonormal components.
    let (a, b) = (v[0] / fr[0][0], v[1] / fr[1][1]);
    let (c, s) = (angle.cos(), angle.sin());
    let (ra, rb) = (c * a - s * b, s * a + c * b);
    Ok(vec![ra * fr[0][0], rb * fr[1][1]])
}

fn unit_dir<T: Scalar>(m: &ManifoldSpec<T>, from: &ChartPoint<T>, to: &ChartPoint<T>) -> Result<Vec<T>> {
    let v = m.log_map(from, to)?;
    if v.norm == T::zero() {
        return Err(Error::InvalidInstance("p and q coincide".into()));
    }
    Ok(v.components.iter().map(|&c| c / v.norm).collect())
}

/// Builds the eight points: geodesics leave `p` and `q` at the model
/// triangle's base angles, `p_0, p_+` (`q_0, q_+`) sit at the given
/// fractions of the side lengths and `x_p`, `x_q` at the full lengths.
pub fn key_lemma_configuration<T: Scalar>(m: &ManifoldSpec<T>, req: &KeyLemmaRequest<T>) -> Result<KeyLemmaConfiguration<T>> {
    if m.dim() != 2 {
        return Err(Error::InvalidManifold("key-lemma configurations live on surfaces".into()));
    }
    let in_band = band_check(m)?;
    let f = req.fractions;
    if !(f[0] == T::zero() && f[0] < f[1] && f[1] < f[2] && f[2] < f[3] && f[3] == T::one()) {
        return Err(Error::Validation { key: "fractions".into(), msg: "must be 0 < f0 < f1 < 1 with ends 0 and 1".into() });
    }
    if !in_band(&req.p) || !in_band(&req.q) {
        return Err(Error::LeavesBand("p and q must lie in the flat band".into()));
    }
    let base = m.distance_value(&req.p, &req.q)?;
    let triangle = ModelTriangle::from_angles(base, req.angle_p, req.angle_q)?;
    let dir_p = rotate(m, &req.p, &unit_dir(m, &req.p, &req.q)?, req.side * req.angle_p)?;
    let dir_q = rotate(m, &req.q, &unit_dir(m, &req.q, &req.p)?, -req.side * req.angle_q)?;

    let along = |start: &ChartPoint<T>, dir: &[T], len: T| -> Result<[ChartPoint<T>; 4]> {
        let pt = |u: T| -> Result<ChartPoint<T>> {
            if u == T::zero() {
                Ok(start.clone())
            } else {
                m.normalize(&m.geodesic_point(start, dir, u * len)?)
            }
        };
        Ok([pt(f[0])?, pt(f[1])?, pt(f[2])?, pt(f[3])?])
    };
    let [p_minus, p_0, p_plus, x_p] = along(&req.p, &dir_p, triangle.side_p)?;
    let [q_minus, q_0, q_plus, x_q] = along(&req.q, &dir_q, triangle.side_q)?;
    for (name, pt) in [("p_0", &p_0), ("p_+", &p_plus), ("q_0", &q_0), ("q_+", &q_plus)] {
        if !in_band(pt) {
            return Err(Error::LeavesBand(format!("{name} is outside the flat band")));
        }
    }
    let verify = |start: &ChartPoint<T>, end: &ChartPoint<T>, len: T| -> Result<GeodesicSolution<T>> {
        let (d, sol) = m.distance(start, end)?;
        if d < len * (T::one() - T::lit(MINIMIZING_TOL)) {
            return Err(Error::NotMinimizing(format!("geodesic of length {len} is beaten by one of length {d}")));
        }
        Ok(sol)
    };
    let geodesic_p = verify(&p_minus, &x_p, triangle.side_p)?;
    let geodesic_q = verify(&q_minus, &x_q, triangle.side_q)?;
    Ok(KeyLemmaConfiguration { p_minus, p_0, p_plus, x_p, q_minus, q_0, q_plus, x_q, triangle, fractions: f, geodesic_p, geodesic_q })
}

impl<T: Scalar> KeyLemmaConfiguration<T> {
    /// Poles `a_0 = p_0`, `b_0 = q_0`; members `p_−, p_+, x_p` and
    /// `q_−, q_+, x_q`.
    pub fn a_points(&self) -> Vec<ChartPoint<T>> {
        vec![self.p_0.clone(), self.p_minus.clone(), self.p_plus.clone(), self.x_p.clone()]
    }

    pub fn b_points(&self) -> Vec<ChartPoint<T>> {
        vec![self.q_0.clone(), self.q_minus.clone(), self.q_plus.clone(), self.x_q.clone()]
    }

    pub fn instance(&self, m: &ManifoldSpec<T>) -> Result<ComparisonInstance<T>> {
        sample_instance(m, &self.a_points(), &self.b_points())
    }

    /// Plane positions of the eight points in instance order (`x̃` twice).
    pub fn model_positions(&self) -> Vec<Vec<T>> {
        let t = &self.triangle;
        let f = self.fractions;
        let p = |u: T| t.on_side(Side::P, u).to_vec();
        let q = |u: T| t.on_side(Side::Q, u).to_vec();
        vec![p(f[1]), p(f[0]), p(f[2]), p(f[3]), q(f[1]), q(f[0]), q(f[2]), q(f[3])]
    }
}

/// Spread of a point chain about its best-fit line: the largest distance
/// from the principal axis through the centroid, divided by the chain's
/// diameter.
fn chain_defect<T: Scalar>(pts: &[Vec<T>]) -> T {
    if pts.len() <= 2 {
        return T::zero();
    }
    let dim = pts[0].len();
    let k = T::of(pts.len());
    let c: Vec<T> = (0..dim).map(|d| pts.iter().fold(T::zero(), |s, p| s + p[d]) / k).collect();
    let cov: Vec<Vec<T>> =
        (0..dim).map(|i| (0..dim).map(|j| pts.iter().fold(T::zero(), |s, p| s + (p[i] - c[i]) * (p[j] - c[j]))).collect()).collect();
    let (_, vecs) = symmetric_eigen(&cov);
    let axis: Vec<T> = (0..dim).map(|i| vecs[i][0]).collect();
    let mut diam = T::zero();
    for a in pts {
        for b in pts {
            diam = diam.max(crate::scalar::dist(a, b));
        }
    }
    if diam == T::zero() {
        return T::zero();
    }
    let worst = pts
        .iter()
        .map(|p| {
            let d: Vec<T> = (0..dim).map(|i| p[i] - c[i]).collect();
            let along = d.iter().zip(&axis).fold(T::zero(), |s, (&x, &y)| s + x * y);
            (d.iter().fold(T::zero(), |s, &x| s + x * x) - along * along).max(T::zero()).sqrt()
        })
        .fold(T::zero(), |a, b| a.max(b));
    worst / diam
}

/// Collinearity defect of the `a`-chain and the `b`-chain of a witness
/// (the larger of the two).
pub fn collinearity_defect<T: Scalar>(witness: &ModelConfiguration<T>, inst: &ComparisonInstance<T>) -> T {
    let a: Vec<Vec<T>> = (0..=inst.k).map(|i| witness.positions[inst.a(i)].clone()).collect();
    let b: Vec<Vec<T>> = (0..=inst.l).map(|j| witness.positions[inst.b(j)].clone()).collect();
    chain_defect(&a).max(chain_defect(&b))
}

/// Compares manifold distances between points sampled along the sides of
/// `[pqx]` with the distances of the corresponding points on the plane
/// triangle with the same side lengths; returns the largest deviation.
pub fn flat_filling_check<T: Scalar>(m: &ManifoldSpec<T>, p: &ChartPoint<T>, q: &ChartPoint<T>, x: &ChartPoint<T>, grid: usize) -> Result<T> {
    if grid < 2 {
        return Err(Error::Validation { key: "grid".into(), msg: "must be at least 2".into() });
    }
    let tri = ModelTriangle::from_sides(m.distance_value(p, q)?, m.distance_value(p, x)?, m.distance_value(q, x)?)?;
    let logs = [(p, q, Side::Base), (p, x, Side::P), (q, x, Side::Q)];
    let mut samples: Vec<(ChartPoint<T>, [T; 2])> = Vec::new();
    for (from, to, side) in logs {
        let v = m.log_map(from, to)?;
        for i in 0..=grid {
            let u = T::of(i) / T::of(grid);
            let pt = if i == 0 { from.clone() } else { m.normalize(&m.exp_map(&m.tangent(from, v.components.iter().map(|&c| c * u).collect())?)?)? };
            samples.push((pt, tri.on_side(side, u)));
        }
    }
    let mut worst = T::zero();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = m.distance_value(&samples[i].0, &samples[j].0)?;
            let e = crate::scalar::dist(&samples[i].1, &samples[j].1);
            worst = worst.max((d - e).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings<T> {
    pub trials: usize,
    pub budget: usize,
    pub seed: u64,
    pub feas_tol_rel: T,
    pub evidence_factor: T,
    pub fractions: [T; 4],
    /// Apex heights (plane) are drawn uniformly from this range of `t`.
    pub apex_t: (T, T),
    /// Base angles are drawn uniformly from this range.
    pub angle_range: (T, T),
    pub gram_iters: usize,
    pub mtw_trials: usize,
    pub mtw_reach: T,
    pub mtw_w_max: T,
    /// Restrict seam probes to `X ⊥ Y`.
    pub mtw_perpendicular: bool,
}

impl<T: Scalar> ExperimentSettings<T> {
    pub fn new(trials: usize, budget: usize, seed: u64) -> Self {
        ExperimentSettings {
            trials,
            budget,
            seed,
            feas_tol_rel: T::lit(distgeo::FEAS_TOL_REL),
            evidence_factor: T::lit(EVIDENCE_FACTOR),
            fractions: DEFAULT_FRACTIONS.map(T::lit),
            apex_t: (T::lit(0.3), T::lit(1.5)),
            angle_range: (T::lit(50f64.to_radians()), T::lit(75f64.to_radians())),
            gram_iters: 10_000,
            mtw_trials: trials,
            mtw_reach: T::lit(0.3),
            mtw_w_max: T::lit(0.8),
            mtw_perpendicular: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary<T> {
    pub trial: usize,
    /// Why the trial produced no instance.
    pub skipped: Option<String>,
    pub apex_in_band: bool,
    pub apex_t: T,
    pub base_length: T,
    pub angles: [T; 2],
    /// `|x_p − x_q|` on the surface.
    pub apex_gap: T,
    pub scale: T,
    pub lowrank_status: Option<VerdictStatus>,
    pub lowrank_penalty: T,
    pub lowrank_residual: T,
    pub gram_status: Option<VerdictStatus>,
    pub gram_penalty: T,
    pub collinearity_defect: Option<T>,
    /// Both solvers failed with penalty above the evidence threshold.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<T> {
    pub manifold: String,
    pub settings: ExperimentSettings<T>,
    pub trials: Vec<TrialSummary<T>>,
    pub instances_built: usize,
    pub in_band_instances: usize,
    /// In-band instances not Feasible within `feas_tol`.
    pub positive_control_failures: usize,
    pub violating_trials: Vec<usize>,
    /// The violating instances, for independent re-checking.
    pub violating_instances: Vec<ComparisonInstance<T>>,
    pub max_violation_penalty: T,
    pub max_apex_gap: T,
    /// Largest `min(lowrank_penalty, gram_penalty)` over instances with an
    /// apex outside the band.
    pub max_cap_penalty: T,
    pub mtw: MtwScanReport<T>,
    pub comparison_violation_evidence: bool,
    pub mtw_violation_evidence: bool,
}

struct TrialOutcome<T> {
    summary: TrialSummary<T>,
    instance: Option<ComparisonInstance<T>>,
}

fn empty_summary<T: Scalar>(trial: usize, reason: String) -> TrialSummary<T> {
    TrialSummary {
        trial,
        skipped: Some(reason),
        apex_in_band: false,
        apex_t: T::zero(),
        base_length: T::zero(),
        angles: [T::zero(); 2],
        apex_gap: T::zero(),
        scale: T::zero(),
        lowrank_status: None,
        lowrank_penalty: T::zero(),
        lowrank_residual: T::zero(),
        gram_status: None,
        gram_penalty: T::zero(),
        collinearity_defect: None,
        violation: false,
    }
}

fn uniform<T: Scalar, R: Rng>(rng: &mut R, (lo, hi): (T, T)) -> T {
    lo + (hi - lo) * T::lit(rng.gen::<f64>())
}

/// Key-lemma request for one trial. On a flat-band surface the base runs
/// along a parallel inside `|t| ≤ w − β/2` and the apex height is drawn from
/// `settings.apex_t`; on Euclidean space the same shapes are used with the
/// base on the first axis.
pub fn trial_request<T: Scalar>(m: &ManifoldSpec<T>, settings: &ExperimentSettings<T>, trial: usize) -> Result<(KeyLemmaRequest<T>, T)> {
    let mut rng = seed::rng_for(settings.seed, seed::stream::RIGIDITY_TRIAL, trial as u64);
    let (w, margin) = match m.profile().and_then(|p| p.flat_band_params()) {
        Some(fb) => (fb.band, fb.blend * T::lit(0.5)),
        None => (T::one(), T::lit(0.25)),
    };
    let base_t = uniform(&mut rng, (-(w - margin), -(w - margin) + margin * T::lit(2.0)));
    let apex_t = uniform(&mut rng, settings.apex_t);
    let angle_p = uniform(&mut rng, settings.angle_range);
    let angle_q = uniform(&mut rng, settings.angle_range);
    let theta = uniform(&mut rng, (-T::PI(), T::PI()));
    let height = apex_t - base_t;
    let len = height * (angle_p + angle_q).sin() / (angle_p.sin() * angle_q.sin());
    let (p, q, side) = match m {
        ManifoldSpec::Revolution { profile } => {
            let r = profile.eval(base_t)?.f;
            let dtheta = len / r;
            // Base along +θ; rotating +θ towards +t is a negative turn in
            // the (e_t, e_θ) frame.
            (ChartPoint::new(vec![base_t, theta]), ChartPoint::new(vec![base_t, crate::scalar::wrap_angle(theta + dtheta)]), -T::one())
        }
        _ => {
            let mut p = vec![T::zero(); m.dim()];
            let mut q = vec![T::zero(); m.dim()];
            p[1] = base_t;
            q[1] = base_t;
            q[0] = len;
            (ChartPoint::new(p), ChartPoint::new(q), T::one())
        }
    };
    Ok((KeyLemmaRequest { p, q, angle_p, angle_q, side, fractions: settings.fractions }, apex_t))
}

fn run_trial<T: Scalar>(m: &ManifoldSpec<T>, settings: &ExperimentSettings<T>, trial: usize) -> Result<TrialOutcome<T>> {
    let (req, apex_t) = trial_request(m, settings, trial)?;
    let cfg = match key_lemma_configuration(m, &req) {
        Ok(c) => c,
        Err(e @ (Error::InvalidManifold(_) | Error::Validation { .. })) => return Err(e),
        Err(e) => return Ok(TrialOutcome { summary: empty_summary(trial, e.to_string()), instance: None }),
    };
    let inst = match cfg.instance(m) {
        Ok(i) => i,
        Err(e) => return Ok(TrialOutcome { summary: empty_summary(trial, e.to_string()), instance: None }),
    };
    let band = band_check(m)?;
    let apex_in_band = band(&cfg.x_p) && band(&cfg.x_q);
    let solver_seed = seed::mix(settings.seed, trial as u64);
    let lowrank = solve_lowrank(&inst, settings.budget, solver_seed);
    let gram = solve_gram_projection(&inst, settings.gram_iters);
    let scale = inst.scale();
    let feas_tol = settings.feas_tol_rel * scale;
    let threshold = settings.evidence_factor * feas_tol * scale;
    let fails = |v: &FeasibilityVerdict<T>| v.status == VerdictStatus::NotFoundAfterBudget && v.best_penalty >= threshold;
    let violation = fails(&lowrank) && fails(&gram);
    let best_feasible = [&lowrank, &gram].into_iter().filter(|v| v.is_feasible()).min_by(|a, b| a.residual.partial_cmp(&b.residual).unwrap_or(std::cmp::Ordering::Equal));
    let collinearity_defect = best_feasible.and_then(|v| v.witness.as_ref()).map(|w| collinearity_defect(w, &inst));
    let summary = TrialSummary {
        trial,
        skipped: None,
        apex_in_band,
        apex_t,
        base_length: cfg.triangle.base,
        angles: [cfg.triangle.angle_p, cfg.triangle.angle_q],
        apex_gap: m.distance_value(&cfg.x_p, &cfg.x_q)?,
        scale,
        lowrank_status: Some(lowrank.status),
        lowrank_penalty: lowrank.best_penalty,
        lowrank_residual: lowrank.residual,
        gram_status: Some(gram.status),
        gram_penalty: gram.best_penalty,
        collinearity_defect,
        violation,
    };
    Ok(TrialOutcome { summary, instance: Some(inst) })
}

/// Key-lemma trials with apexes swept from the band into the caps, each
/// solved by both feasibility solvers, plus an MTW scan straddling the
/// seam.
pub fn rigidity_experiment<T: Scalar>(m: &ManifoldSpec<T>, settings: &ExperimentSettings<T>) -> Result<ExperimentReport<T>> {
    if settings.trials == 0 {
        return Err(Error::Validation { key: "trials".into(), msg: "must be at least 1".into() });
    }
    if settings.budget == 0 {
        return Err(Error::Validation { key: "budget".into(), msg: "must be at least 1".into() });
    }
    let outcomes = (0..settings.trials).into_par_iter().map(|i| run_trial(m, settings, i)).collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport {
        manifold: m.to_string(),
        settings: settings.clone(),
        trials: Vec::with_capacity(outcomes.len()),
        instances_built: 0,
        in_band_instances: 0,
        positive_control_failures: 0,
        violating_trials: Vec::new(),
        violating_instances: Vec::new(),
        max_violation_penalty: T::zero(),
        max_apex_gap: T::zero(),
        max_cap_penalty: T::zero(),
        mtw: empty_mtw(m, settings),
        comparison_violation_evidence: false,
        mtw_violation_evidence: false,
    };
    for o in outcomes {
        let s = &o.summary;
        if let Some(inst) = o.instance {
            report.instances_built += 1;
            report.max_apex_gap = report.max_apex_gap.max(s.apex_gap);
            if !s.apex_in_band {
                report.max_cap_penalty = report.max_cap_penalty.max(s.lowrank_penalty.min(s.gram_penalty));
            }
            if s.apex_in_band {
                report.in_band_instances += 1;
                let feasible = s.lowrank_status == Some(VerdictStatus::Feasible) || s.gram_status == Some(VerdictStatus::Feasible);
                if !feasible {
                    report.positive_control_failures += 1;
                }
            }
            if s.violation {
                report.violating_trials.push(s.trial);
                report.max_violation_penalty = report.max_violation_penalty.max(s.lowrank_penalty.min(s.gram_penalty));
                report.violating_instances.push(inst);
            }
        }
        report.trials.push(o.summary);
    }
    report.comparison_violation_evidence = !report.violating_trials.is_empty();
    if settings.mtw_trials > 0 {
        let region = match m.profile().and_then(|p| p.flat_band_params()) {
            Some(_) => Some(ProbeRegion::flat_band_seam(m, settings.mtw_reach, settings.mtw_w_max)?),
            None if m.is_flat() => Some(ProbeRegion::around_base(m, T::one())),
            None => None,
        };
        if let Some(region) = region {
            report.mtw = mtw::mtw_scan(m, &region, settings.mtw_trials, settings.mtw_perpendicular, settings.seed)?;
        }
    }
    report.mtw_violation_evidence = report.mtw.violation_evidence();
    Ok(report)
}

fn empty_mtw<T: Scalar>(m: &ManifoldSpec<T>, settings: &ExperimentSettings<T>) -> MtwScanReport<T> {
    mtw::summarize(m, 0, false, settings.seed, Vec::new())
}

/// Largest in-band filling defect tolerated by [`filling_experiment`].
pub const FILLING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillingRecord<T> {
    pub trial: usize,
    pub skipped: Option<String>,
    pub apex_in_band: bool,
    pub apex_t: T,
    /// Defects of `[p q x_p]` and `[p q x_q]`.
    pub defects: Option<[T; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillingReport<T> {
    pub manifold: String,
    pub trials: usize,
    pub seed: u64,
    pub grid: usize,
    pub tolerance: T,
    pub in_band: usize,
    pub max_in_band_defect: T,
    /// In-band triangles whose filling defect exceeds the tolerance.
    pub failures: Vec<usize>,
    pub records: Vec<FillingRecord<T>>,
}

impl<T: Scalar> FillingReport<T> {
    pub fn violation_evidence(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs [`flat_filling_check`] on the key-lemma triangles of
/// [`trial_request`]. Triangles with both apexes in the flat region must
/// fill flatly.
pub fn filling_experiment<T: Scalar>(m: &ManifoldSpec<T>, settings: &ExperimentSettings<T>, grid: usize) -> Result<FillingReport<T>> {
    if settings.trials == 0 {
        return Err(Error::Validation { key: "trials".into(), msg: "must be at least 1".into() });
    }
    let band = band_check(m)?;
    let records = (0..settings.trials)
        .into_par_iter()
        .map(|trial| -> Result<FillingRecord<T>> {
            let (req, apex_t) = trial_request(m, settings, trial)?;
            let skipped = |e: Error| FillingRecord { trial, skipped: Some(e.to_string()), apex_in_band: false, apex_t, defects: None };
            let cfg = match key_lemma_configuration(m, &req) {
                Ok(c) => c,
                Err(e @ (Error::InvalidManifold(_) | Error::Validation { .. })) => return Err(e),
                Err(e) => return Ok(skipped(e)),
            };
            let defects = flat_filling_check(m, &req.p, &req.q, &cfg.x_p, grid)
                .and_then(|a| Ok([a, flat_filling_check(m, &req.p, &req.q, &cfg.x_q, grid)?]));
            match defects {
                Ok(d) => Ok(FillingRecord { trial, skipped: None, apex_in_band: band(&cfg.x_p) && band(&cfg.x_q), apex_t, defects: Some(d) }),
                Err(e) => Ok(skipped(e)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let tolerance = T::lit(FILLING_TOL);
    let mut report = FillingReport {
        manifold: m.to_string(),
        trials: settings.trials,
        seed: settings.seed,
        grid,
        tolerance,
        in_band: 0,
        max_in_band_defect: T::zero(),
        failures: Vec::new(),
        records: Vec::new(),
    };
    for r in &records {
        if let (true, Some([a, b])) = (r.apex_in_band, r.defects) {
            report.in_band += 1;
            let worst = a.max(b);
            report.max_in_band_defect = report.max_in_band_defect.max(worst);
            if !(worst <= tolerance) {
                report.failures.push(r.trial);
            }
        }
    }
    report.records = records;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_surface_invariants() {
        let s = build_flat_band_profile(1.0, 1.0, 0.5).unwrap();
        let m = s.manifold();
        assert_eq!(m.gauss_curvature(&ChartPoint::new(vec![0.0, 0.0])).unwrap(), 0.0);
        let k = (1..10).map(|i| m.gauss_curvature(&ChartPoint::new(vec![1.0 + 0.05 * i as f64, 0.0])).unwrap());
        assert!(k.clone().any(|k| k > 0.0));
        assert!(build_flat_band_profile(1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn model_triangle_from_angles_and_sides_agree() {
        let t = ModelTriangle::<f64>::from_angles(2.0, 1.0, 0.8).unwrap();
        let u = ModelTriangle::from_sides(t.base, t.side_p, t.side_q).unwrap();
        assert!((u.angle_p - 1.0).abs() < 1e-12 && (u.angle_q - 0.8).abs() < 1e-12);
        let d = crate::scalar::dist(&t.apex, &[2.0, 0.0]);
        assert!((d - t.side_q).abs() < 1e-12);
    }

    #[test]
    fn euclidean_configuration_closes() {
        let m = ManifoldSpec::<f64>::euclidean(2).unwrap();
        let req = KeyLemmaRequest {
            p: ChartPoint::new(vec![0.0, 0.0]),
            q: ChartPoint::new(vec![1.5, 0.0]),
            angle_p: 1.1,
            angle_q: 0.9,
            side: 1.0,
            fractions: DEFAULT_FRACTIONS,
        };
        let c = key_lemma_configuration(&m, &req).unwrap();
        assert!(crate::scalar::dist(&c.x_p.coords, &c.x_q.coords) < 1e-12);
        assert!(crate::scalar::dist(&c.x_p.coords, &c.triangle.apex) < 1e-12);
    }

    #[test]
    fn chain_defect_of_collinear_points_is_zero() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![2.5, 2.5, 2.5]];
        assert!(chain_defect(&pts) < 1e-12);
        assert_eq!(chain_defect(&pts[..2]), 0.0);
        let bent = vec![vec![0.0, 0.0], vec![1.0, 0.1], vec![2.0, 0.0]];
        assert!(chain_defect(&bent) > 0.01);
    }
}

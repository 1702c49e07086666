//! Sampling point configurations on a manifold and checking the
//! `(k, l)`-bipolar comparison on them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distgeo::{
    self, alexandrov_quadruple_oracle, solve_gram_projection_with, solve_lowrank_in_dim, ComparisonInstance, FeasibilityVerdict,
    GramOptions, LowRankOptions, VerdictStatus,
};
use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldSpec};
use crate::scalar::Scalar;
use crate::seed;

/// Triangle-inequality slack for manifold-sampled data, matching the
/// accuracy of numerically computed distances.
pub const SAMPLED_TRIANGLE_SLACK: f64 = 1e-7;
/// Entries kept in [`ScanReport::worst`].
pub const WORST_KEPT: usize = 10;
/// Draw attempts per trial before a trial is abandoned.
pub const ATTEMPTS_PER_TRIAL: usize = 10;
/// Witnesses with residual above this fraction of `feas_tol` trigger the
/// Gram projection re-check as well.
pub const POLISH_REL: f64 = 1e-2;
/// Iteration cap of the Gram projection re-check.
pub const GRAM_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledConfiguration<T> {
    pub manifold: String,
    pub a_points: Vec<ChartPoint<T>>,
    pub b_points: Vec<ChartPoint<T>>,
    pub dist: Vec<Vec<T>>,
    /// Per-entry convergence of the distance computation.
    pub converged: Vec<Vec<bool>>,
}

/// Distances between all points of `a ∪ b`; fails on the first pair whose
/// distance cannot be computed.
pub fn sample_configuration<T: Scalar>(
    m: &ManifoldSpec<T>,
    a: &[ChartPoint<T>],
    b: &[ChartPoint<T>],
) -> Result<SampledConfiguration<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInstance("both point groups need their pole".into()));
    }
    let pts: Vec<&ChartPoint<T>> = a.iter().chain(b).collect();
    let n = pts.len();
    let mut dist = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = m.distance_value(pts[i], pts[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok(SampledConfiguration {
        manifold: m.to_string(),
        a_points: a.to_vec(),
        b_points: b.to_vec(),
        dist,
        converged: vec![vec![true; n]; n],
    })
}

impl<T: Scalar> SampledConfiguration<T> {
    pub fn instance(&self) -> Result<ComparisonInstance<T>> {
        let (k, l) = (self.a_points.len() - 1, self.b_points.len() - 1);
        let inst = distgeo::build_instance_waived(k, l, self.dist.clone())?;
        let (excess, i, j, mm) = if inst.n() >= 3 { inst.triangle_excess() } else { (T::zero(), 0, 0, 0) };
        if excess > T::lit(SAMPLED_TRIANGLE_SLACK) * inst.scale().max(T::one()) {
            return Err(Error::TriangleInequality { i, j, m: mm, excess: excess.to_f64_lossy() });
        }
        Ok(ComparisonInstance { waiver: false, ..inst })
    }
}

/// Instance whose distance data are the manifold distances of `a ∪ b`.
pub fn sample_instance<T: Scalar>(m: &ManifoldSpec<T>, a: &[ChartPoint<T>], b: &[ChartPoint<T>]) -> Result<ComparisonInstance<T>> {
    sample_configuration(m, a, b)?.instance()
}

/// Both solver passes and, for `(2, 0)`, the closed-form decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipolarCheck<T> {
    pub instance: ComparisonInstance<T>,
    pub lowrank: FeasibilityVerdict<T>,
    /// Run whenever the low-rank search found no witness.
    pub gram: Option<FeasibilityVerdict<T>>,
    /// Exact feasibility for the `(2, 0)` pattern.
    pub oracle: Option<bool>,
}

impl<T: Scalar> BipolarCheck<T> {
    /// Final verdict: the feasible pass with the smaller residual, else the
    /// low-rank evidence.
    pub fn verdict(&self) -> &FeasibilityVerdict<T> {
        match &self.gram {
            Some(g) if g.is_feasible() && (!self.lowrank.is_feasible() || g.residual < self.lowrank.residual) => g,
            _ => &self.lowrank,
        }
    }

    pub fn status(&self) -> VerdictStatus {
        self.verdict().status
    }

    /// Undecided and confirmed infeasible by the exact oracle.
    pub fn oracle_confirmed(&self) -> bool {
        self.status() == VerdictStatus::NotFoundAfterBudget && self.oracle == Some(false)
    }

    /// Smallest penalty seen by either pass.
    pub fn best_penalty(&self) -> T {
        match &self.gram {
            Some(g) => g.best_penalty.min(self.lowrank.best_penalty),
            None => self.lowrank.best_penalty,
        }
    }
}

/// Solves an instance: low-rank search first, Gram projection re-check when
/// it finds nothing or only a witness short of the polish level
/// (`POLISH_REL · feas_tol`, reached except on rigid, boundary-feasible data).
pub fn check_instance<T: Scalar>(inst: ComparisonInstance<T>, budget: usize, master: u64) -> Result<BipolarCheck<T>> {
    check_instance_with(inst, budget, master, T::lit(distgeo::FEAS_TOL_REL))
}

/// [`check_instance`] with `feas_tol = feas_tol_rel · scale`.
pub fn check_instance_with<T: Scalar>(inst: ComparisonInstance<T>, budget: usize, master: u64, feas_tol_rel: T) -> Result<BipolarCheck<T>> {
    if !(feas_tol_rel > T::zero()) || !feas_tol_rel.is_finite() {
        return Err(Error::Validation { key: "tol_feas".into(), msg: format!("must be positive and finite, got {feas_tol_rel}") });
    }
    let lr_opts = LowRankOptions { feas_tol_rel, ..LowRankOptions::default() };
    let lowrank = solve_lowrank_in_dim(&inst, inst.n() - 1, budget, master, &lr_opts);
    let polished = lowrank.residual <= T::lit(POLISH_REL) * lowrank.feas_tol;
    let gram_opts = GramOptions { feas_tol_rel, max_iters: GRAM_ITERS, ..GramOptions::default() };
    let gram = (!lowrank.is_feasible() || !polished).then(|| solve_gram_projection_with(&inst, &gram_opts));
    let oracle = if inst.k == 2 && inst.l == 0 { Some(alexandrov_quadruple_oracle(&inst)?) } else { None };
    Ok(BipolarCheck { instance: inst, lowrank, gram, oracle })
}

pub fn check_bipolar<T: Scalar>(
    m: &ManifoldSpec<T>,
    a: &[ChartPoint<T>],
    b: &[ChartPoint<T>],
    budget: usize,
    master: u64,
) -> Result<BipolarCheck<T>> {
    check_instance(sample_instance(m, a, b)?, budget, master)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstEntry<T> {
    pub trial: usize,
    pub configuration: SampledConfiguration<T>,
    pub best_penalty: T,
    pub oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<T> {
    pub trial: usize,
    pub attempts: usize,
    pub status: Option<VerdictStatus>,
    pub best_penalty: Option<T>,
    pub residual: Option<T>,
    /// Largest distance in the instance.
    pub scale: Option<T>,
    pub oracle: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport<T> {
    pub manifold: String,
    pub k: usize,
    pub l: usize,
    pub trials: usize,
    pub radius: T,
    pub budget: usize,
    pub seed: u64,
    pub feas_tol_rel: T,
    pub feasible: usize,
    pub undecided: usize,
    /// Trials whose every draw was rejected by the distance engine.
    pub abandoned: usize,
    /// Rejected draws over all trials.
    pub rejected_draws: usize,
    /// Undecided trials confirmed infeasible by the `(2, 0)` oracle.
    pub oracle_confirmed: usize,
    /// Undecided trials the oracle declares feasible.
    pub oracle_disputed: usize,
    pub max_residual_feasible: T,
    pub worst: Vec<WorstEntry<T>>,
    pub records: Vec<TrialRecord<T>>,
}

impl<T: Scalar> ScanReport<T> {
    pub fn violation_evidence(&self) -> bool {
        self.undecided > 0
    }
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// A point `exp_c(v)` with `v` uniform in the ball of radius `radius`.
pub fn sample_point<T: Scalar, R: Rng>(m: &ManifoldSpec<T>, center: &ChartPoint<T>, radius: T, rng: &mut R) -> Result<ChartPoint<T>> {
    let n = m.dim();
    let u = random_unit(rng, n);
    let r = radius * T::lit(rng.gen::<f64>().powf(1.0 / n as f64));
    let comps: Vec<T> = match m {
        ManifoldSpec::Euclidean { .. } => u.iter().map(|&x| T::lit(x) * r).collect(),
        _ => {
            let fr = m.orthonormal_frame(center)?;
            let (x, y) = (T::lit(u[0]) * r, T::lit(u[1]) * r);
            vec![fr[0][0] * x + fr[1][0] * y, fr[0][1] * x + fr[1][1] * y]
        }
    };
    let v = m.tangent(center, comps)?;
    m.normalize(&m.exp_map(&v)?)
}

/// Largest admissible sampling radius at the base point: half the inner TIL
/// radius (one unit on Euclidean space).
pub fn default_radius<T: Scalar>(m: &ManifoldSpec<T>) -> T {
    let til = m.til_inner_radius(&m.default_base_point());
    if til.is_finite() {
        til * T::lit(0.5)
    } else {
        T::one()
    }
}

fn run_trial<T: Scalar>(
    m: &ManifoldSpec<T>,
    (k, l): (usize, usize),
    radius: T,
    opts: &ScanOptions<T>,
    master: u64,
    trial: usize,
) -> Result<(TrialRecord<T>, Option<(SampledConfiguration<T>, BipolarCheck<T>)>)> {
    let center = m.default_base_point();
    let mut rng = seed::rng_for(master, seed::stream::SCAN_TRIAL, trial as u64);
    for attempt in 1..=ATTEMPTS_PER_TRIAL {
        let draw = (|| -> Result<(SampledConfiguration<T>, ComparisonInstance<T>)> {
            let a = (0..=k).map(|_| sample_point(m, &center, radius, &mut rng)).collect::<Result<Vec<_>>>()?;
            let b = (0..=l).map(|_| sample_point(m, &center, radius, &mut rng)).collect::<Result<Vec<_>>>()?;
            let cfg = sample_configuration(m, &a, &b)?;
            let inst = cfg.instance()?;
            Ok((cfg, inst))
        })();
        let (cfg, inst) = match draw {
            Ok(x) => x,
            Err(Error::InvalidInstance(e)) | Err(Error::InvalidManifold(e)) => return Err(Error::InvalidInstance(e)),
            Err(_) => continue,
        };
        let check = check_instance_with(inst, opts.budget, seed::mix(master, trial as u64), opts.feas_tol_rel)?;
        let v = check.verdict();
        let record = TrialRecord {
            trial,
            attempts: attempt,
            status: Some(v.status),
            best_penalty: Some(check.best_penalty()),
            residual: Some(v.residual),
            scale: Some(check.instance.scale()),
            oracle: check.oracle,
        };
        return Ok((record, Some((cfg, check))));
    }
    Ok((TrialRecord { trial, attempts: ATTEMPTS_PER_TRIAL, status: None, best_penalty: None, residual: None, scale: None, oracle: None }, None))
}

/// Sampling radius, multistart budget and tolerance of a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions<T> {
    /// Defaults to (and is capped at) [`default_radius`].
    pub radius: Option<T>,
    pub budget: usize,
    pub feas_tol_rel: T,
}

impl<T: Scalar> ScanOptions<T> {
    pub fn new(budget: usize) -> Self {
        ScanOptions { radius: None, budget, feas_tol_rel: T::lit(distgeo::FEAS_TOL_REL) }
    }
}

/// Samples `trials` configurations of `k + l + 2` points in the ball of
/// radius `radius` (capped at half the inner TIL radius) about the base
/// point and checks each.
pub fn random_scan<T: Scalar>(
    m: &ManifoldSpec<T>,
    k: usize,
    l: usize,
    trials: usize,
    radius: Option<T>,
    budget: usize,
    master: u64,
) -> Result<ScanReport<T>> {
    random_scan_with(m, k, l, trials, master, &ScanOptions { radius, ..ScanOptions::new(budget) })
}

pub fn random_scan_with<T: Scalar>(m: &ManifoldSpec<T>, k: usize, l: usize, trials: usize, master: u64, opts: &ScanOptions<T>) -> Result<ScanReport<T>> {
    if trials == 0 {
        return Err(Error::Validation { key: "trials".into(), msg: "must be at least 1".into() });
    }
    if opts.budget == 0 {
        return Err(Error::Validation { key: "budget".into(), msg: "must be at least 1".into() });
    }
    if !(opts.feas_tol_rel > T::zero()) || !opts.feas_tol_rel.is_finite() {
        return Err(Error::Validation { key: "tol_feas".into(), msg: format!("must be positive and finite, got {}", opts.feas_tol_rel) });
    }
    let cap = default_radius(m);
    let radius = opts.radius.map_or(cap, |r| r.min(cap));
    if !(radius > T::zero()) {
        return Err(Error::Validation { key: "radius".into(), msg: format!("must be positive, got {radius}") });
    }
    let results = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(m, (k, l), radius, opts, master, i))
        .collect::<Result<Vec<_>>>()?;

    let mut report = ScanReport {
        manifold: m.to_string(),
        k,
        l,
        trials,
        radius,
        budget: opts.budget,
        seed: master,
        feas_tol_rel: opts.feas_tol_rel,
        feasible: 0,
        undecided: 0,
        abandoned: 0,
        rejected_draws: 0,
        oracle_confirmed: 0,
        oracle_disputed: 0,
        max_residual_feasible: T::zero(),
        worst: Vec::new(),
        records: Vec::with_capacity(trials),
    };
    let mut worst: Vec<WorstEntry<T>> = Vec::new();
    for (record, outcome) in results {
        match &outcome {
            Some((cfg, check)) => {
                report.rejected_draws += record.attempts - 1;
                if check.status() == VerdictStatus::Feasible {
                    report.feasible += 1;
                    report.max_residual_feasible = report.max_residual_feasible.max(check.verdict().residual);
                } else {
                    report.undecided += 1;
                    match check.oracle {
                        Some(false) => report.oracle_confirmed += 1,
                        Some(true) => report.oracle_disputed += 1,
                        None => {}
                    }
                }
                worst.push(WorstEntry { trial: record.trial, configuration: cfg.clone(), best_penalty: check.best_penalty(), oracle: check.oracle });
            }
            None => {
                report.abandoned += 1;
                report.rejected_draws += record.attempts;
            }
        }
        report.records.push(record);
    }
    worst.sort_by(|x, y| y.best_penalty.partial_cmp(&x.best_penalty).unwrap_or(std::cmp::Ordering::Equal).then(x.trial.cmp(&y.trial)));
    worst.truncate(WORST_KEPT);
    report.worst = worst;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_poles_at_quarter_turn() {
        let m = ManifoldSpec::<f64>::sphere(1.0).unwrap();
        let h = std::f64::consts::FRAC_PI_2;
        let a = vec![ChartPoint::new(vec![h, 0.0]), ChartPoint::new(vec![h, 0.3]), ChartPoint::new(vec![1.2, -0.2])];
        let b = vec![ChartPoint::new(vec![h, h]), ChartPoint::new(vec![1.0, 1.4]), ChartPoint::new(vec![h + 0.4, 1.7])];
        let inst = sample_instance(&m, &a, &b).unwrap();
        assert_eq!((inst.k, inst.l, inst.n()), (2, 2, 6));
        assert!((inst.dist[0][3] - h).abs() < 1e-12);
        assert!((inst.dist[0][1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn coincident_member_is_accepted() {
        let m = ManifoldSpec::<f64>::euclidean(3).unwrap();
        let p = ChartPoint::new(vec![0.1, 0.2, 0.3]);
        let a = vec![p.clone(), p.clone()];
        let b = vec![ChartPoint::new(vec![1.0, 0.0, 0.0])];
        let inst = sample_instance(&m, &a, &b).unwrap();
        assert_eq!(inst.dist[0][1], 0.0);
        assert!(check_instance(inst, 5, 0).unwrap().verdict().is_feasible());
    }

    #[test]
    fn euclidean_scan_is_all_feasible() {
        let m = ManifoldSpec::<f64>::euclidean(2).unwrap();
        let r = random_scan(&m, 3, 3, 20, None, 20, 9).unwrap();
        assert_eq!(r.feasible, 20, "{:?}", r.records.iter().filter(|t| t.status != Some(VerdictStatus::Feasible)).collect::<Vec<_>>());
        assert_eq!(r.feasible + r.undecided + r.abandoned, r.trials);
        assert!(r.max_residual_feasible <= 1e-8 * 2.0);
        assert!(r.worst.windows(2).all(|w| w[0].best_penalty >= w[1].best_penalty));
    }
}

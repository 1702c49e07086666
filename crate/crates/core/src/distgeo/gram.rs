use crate::scalar::Scalar;

use super::eigen::symmetric_eigen;
use super::lowrank::levenberg_marquardt;
use super::{penalty, residual, ComparisonInstance, Constraint, FeasibilityVerdict, ModelConfiguration, SolverKind, VerdictStatus, FEAS_TOL_REL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramOptions<T> {
    pub feas_tol_rel: T,
    pub max_iters: usize,
    /// Stop when both iterates move less than `stall_rel · scale²`.
    pub stall_rel: T,
    /// Feasibility of the extracted configuration is checked every
    /// `check_every` iterations.
    pub check_every: usize,
    /// Every `polish_every` iterations (and on exit) an extracted
    /// configuration with residual below `polish_from · scale` is refined
    /// by Levenberg–Marquardt on the positions; 0 disables this.
    pub polish_every: usize,
    pub polish_from: T,
}

impl<T: Scalar> Default for GramOptions<T> {
    fn default() -> Self {
        GramOptions {
            feas_tol_rel: T::lit(FEAS_TOL_REL),
            max_iters: 10_000,
            stall_rel: T::lit(1e-15),
            check_every: 1,
            polish_every: 100,
            polish_from: T::lit(1e-2),
        }
    }
}

/// Alternating projections with Dykstra's correction in squared-distance
/// space, between the constraint box and the cone of matrices whose
/// double-centred negative is positive semidefinite.
pub fn solve_gram_projection<T: Scalar>(inst: &ComparisonInstance<T>, max_iters: usize) -> FeasibilityVerdict<T> {
    solve_gram_projection_with(inst, &GramOptions { max_iters, ..GramOptions::default() })
}

type Mat<T> = Vec<Vec<T>>;

pub fn solve_gram_projection_with<T: Scalar>(inst: &ComparisonInstance<T>, opts: &GramOptions<T>) -> FeasibilityVerdict<T> {
    let n = inst.n();
    let scale = inst.scale();
    let feas_tol = opts.feas_tol_rel * scale;
    let sq: Mat<T> = inst.dist.iter().map(|r| r.iter().map(|&d| d * d).collect()).collect();
    let householder = Householder::new(n);

    let mut best: Option<(T, ModelConfiguration<T>)> = None;
    let consider = |d: &Mat<T>, polish: bool, best: &mut Option<(T, ModelConfiguration<T>)>| -> Option<ModelConfiguration<T>> {
        let cfg = positions_from_squared(d, n);
        let p = penalty(&cfg, inst);
        let r = residual(&cfg, inst);
        let (cfg, p, r) = if polish && r > feas_tol && r <= opts.polish_from * scale {
            let flat: Vec<T> = cfg.positions.concat();
            let (x, _) = levenberg_marquardt(inst, flat, p, cfg.dim, T::lit(1e-3) * feas_tol);
            let refined = ModelConfiguration::from_flat(&x, n, cfg.dim);
            let (rp, rr) = (penalty(&refined, inst), residual(&refined, inst));
            if rp < p {
                (refined, rp, rr)
            } else {
                (cfg, p, r)
            }
        } else {
            (cfg, p, r)
        };
        if best.as_ref().map_or(true, |(bp, _)| p < *bp) {
            *best = Some((p, cfg.clone()));
        }
        (r <= feas_tol).then_some(cfg)
    };

    let mut x = sq.clone();
    let mut y_prev: Option<Mat<T>> = None;
    let mut p_corr = zeros(n);
    let mut q_corr = zeros(n);
    let mut iters = 0;
    let mut witness = None;
    let last = opts.max_iters.max(1);
    for it in 0..last {
        iters = it + 1;
        let y = householder.project_cone(&add(&x, &p_corr));
        p_corr = sub(&add(&x, &p_corr), &y);
        let x_new = project_box(&add(&y, &q_corr), &sq, inst);
        q_corr = sub(&add(&y, &q_corr), &x_new);
        let moved = frob(&sub(&x_new, &x)) + y_prev.as_ref().map_or(T::infinity(), |yp| frob(&sub(&y, yp)));
        x = x_new;
        y_prev = Some(y);
        let stalled = moved <= opts.stall_rel * scale * scale;
        let polish = opts.polish_every > 0 && (stalled || iters == last || iters % opts.polish_every == 0);
        if polish || it % opts.check_every.max(1) == 0 || iters == last {
            if let Some(w) = consider(&x, polish, &mut best) {
                witness = Some(w);
                break;
            }
        }
        if stalled {
            consider(&x, false, &mut best);
            break;
        }
    }
    let (best_penalty, best_cfg) = best.expect("at least one configuration is considered");
    match witness {
        Some(w) => {
            let res = residual(&w, inst);
            FeasibilityVerdict {
                status: VerdictStatus::Feasible,
                solver: SolverKind::GramProjection,
                witness: Some(w),
                residual: res,
                best_penalty,
                budget_used: iters,
                feas_tol,
            }
        }
        None => FeasibilityVerdict {
            status: VerdictStatus::NotFoundAfterBudget,
            solver: SolverKind::GramProjection,
            residual: residual(&best_cfg, inst),
            witness: Some(best_cfg),
            best_penalty,
            budget_used: iters,
            feas_tol,
        },
    }
}

fn zeros<T: Scalar>(n: usize) -> Mat<T> {
    vec![vec![T::zero(); n]; n]
}

fn add<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(&x, &y)| x + y).collect()).collect()
}

fn sub<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(&x, &y)| x - y).collect()).collect()
}

fn frob<T: Scalar>(a: &Mat<T>) -> T {
    a.iter().flatten().fold(T::zero(), |s, &x| s + x * x).sqrt()
}

/// Hollow, equality entries pinned, lower-bound entries clamped from below.
fn project_box<T: Scalar>(d: &Mat<T>, sq: &Mat<T>, inst: &ComparisonInstance<T>) -> Mat<T> {
    let n = d.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let avg = (d[i][j] + d[j][i]) * T::lit(0.5);
            let v = match inst.constraint(i, j) {
                Constraint::Equality => sq[i][j],
                Constraint::LowerBound => avg.max(sq[i][j]),
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Reflection `Q = I − 2vvᵀ/vᵀv` with `v = (1, …, 1, 1 + √n)`, which maps
/// the all-ones direction onto the last axis.
struct Householder<T> {
    v: Vec<T>,
    vv: T,
}

impl<T: Scalar> Householder<T> {
    fn new(n: usize) -> Self {
        let mut v = vec![T::one(); n];
        v[n - 1] = T::one() + T::of(n).sqrt();
        let vv = v.iter().fold(T::zero(), |s, &x| s + x * x);
        Householder { v, vv }
    }

    /// `Q A Q` for symmetric `A`.
    fn conjugate(&self, a: &Mat<T>) -> Mat<T> {
        let n = a.len();
        let two = T::lit(2.0);
        // A Q = A − 2 (A v) vᵀ / vv
        let av: Vec<T> = a.iter().map(|r| r.iter().zip(&self.v).fold(T::zero(), |s, (&x, &y)| s + x * y)).collect();
        let aq: Mat<T> = (0..n).map(|i| (0..n).map(|j| a[i][j] - two * av[i] * self.v[j] / self.vv).collect()).collect();
        // Q (AQ) = AQ − 2 v (vᵀ AQ) / vv
        let vaq: Vec<T> = (0..n).map(|j| (0..n).fold(T::zero(), |s, i| s + self.v[i] * aq[i][j])).collect();
        (0..n).map(|i| (0..n).map(|j| aq[i][j] - two * self.v[i] * vaq[j] / self.vv).collect()).collect()
    }

    /// Frobenius projection onto `{D : −JDJ ⪰ 0}`: in the reflected basis
    /// the leading `(n−1)` block must be negative semidefinite.
    fn project_cone(&self, d: &Mat<T>) -> Mat<T> {
        let n = d.len();
        if n < 2 {
            return d.clone();
        }
        let mut m = self.conjugate(d);
        let block: Mat<T> = (0..n - 1).map(|i| m[i][..n - 1].to_vec()).collect();
        let (vals, vecs) = symmetric_eigen(&block);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                m[i][j] = (0..n - 1).fold(T::zero(), |s, k| s + vecs[i][k] * vals[k].min(T::zero()) * vecs[j][k]);
            }
        }
        let out = self.conjugate(&m);
        (0..n).map(|i| (0..n).map(|j| (out[i][j] + out[j][i]) * T::lit(0.5)).collect()).collect()
    }
}

/// Positions in `R^{n−1}` from squared distances: Gram matrix anchored at
/// point 0, `G_ij = (D_i0 + D_j0 − D_ij)/2`, with negative eigenvalues
/// clipped.
fn positions_from_squared<T: Scalar>(d: &Mat<T>, n: usize) -> ModelConfiguration<T> {
    let dim = (n - 1).max(1);
    let mut positions = vec![vec![T::zero(); dim]; n];
    if n < 2 {
        return ModelConfiguration { dim, positions };
    }
    let g: Mat<T> = (1..n).map(|i| (1..n).map(|j| (d[i][0] + d[j][0] - d[i][j]) * T::lit(0.5)).collect()).collect();
    let (vals, vecs) = symmetric_eigen(&g);
    for i in 1..n {
        for c in 0..n - 1 {
            positions[i][c] = vecs[i - 1][c] * vals[c].max(T::zero()).sqrt();
        }
    }
    ModelConfiguration { dim, positions }
}

#[cfg(test)]
mod tests {
    use super::super::{build_instance, euclidean_distances};
    use super::*;

    #[test]
    fn householder_is_an_involution() {
        let h = Householder::<f64>::new(4);
        let a: Mat<f64> = (0..4).map(|i| (0..4).map(|j| ((i * 7 + j * 7) % 5) as f64).collect()).collect();
        let back = h.conjugate(&h.conjugate(&a));
        for i in 0..4 {
            for j in 0..4 {
                assert!((back[i][j] - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euclidean_squared_distances_are_fixed_by_the_cone_projection() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.3, 0.8], vec![0.4, -0.9]];
        let d = euclidean_distances(&p);
        let sq: Mat<f64> = d.iter().map(|r| r.iter().map(|x| x * x).collect()).collect();
        let proj = Householder::new(4).project_cone(&sq);
        assert!(frob(&sub(&proj, &sq)) < 1e-12);
        let cfg = positions_from_squared(&sq, 4);
        for i in 0..4 {
            for j in 0..4 {
                assert!((cfg.distance(i, j) - d[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_points_in_one_iteration() {
        let inst = build_instance(0, 0, vec![vec![0.0, 2.5], vec![2.5, 0.0]]).unwrap();
        let v = solve_gram_projection(&inst, 10_000);
        assert!(v.is_feasible());
        assert_eq!(v.budget_used, 1);
    }
}

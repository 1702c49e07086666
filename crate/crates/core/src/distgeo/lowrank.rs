use std::collections::VecDeque;

use rand::Rng;

use crate::scalar::Scalar;
use crate::seed;

use super::{penalty_and_gradient, residual, ComparisonInstance, FeasibilityVerdict, ModelConfiguration, SolverKind, VerdictStatus, FEAS_TOL_REL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowRankOptions<T> {
    pub feas_tol_rel: T,
    /// Iterations per start.
    pub max_iters: usize,
    /// Stop a start once `|∇P| ≤ grad_tol_rel · scale²`.
    pub grad_tol_rel: T,
    /// A start stops early once its residual is below
    /// `polish · feas_tol`.
    pub polish: T,
    /// L-BFGS history length.
    pub memory: usize,
    /// A start also stops when the penalty drops by less than
    /// `stall_rel` (relative) over `stall_window` iterations.
    pub stall_rel: T,
    pub stall_window: usize,
    /// Starts ending with residual below `polish_from · scale` are finished
    /// by Levenberg–Marquardt on the active constraints.
    pub polish_from: T,
}

impl<T: Scalar> Default for LowRankOptions<T> {
    fn default() -> Self {
        LowRankOptions { feas_tol_rel: T::lit(FEAS_TOL_REL), max_iters: 5000, grad_tol_rel: T::lit(1e-12), polish: T::lit(1e-3), memory: 8, stall_rel: T::lit(1e-9), stall_window: 50, polish_from: T::lit(1e-2) }
    }
}

/// Multistart penalty minimization in `R^{n−1}`.
pub fn solve_lowrank<T: Scalar>(inst: &ComparisonInstance<T>, budget: usize, master: u64) -> FeasibilityVerdict<T> {
    solve_lowrank_in_dim(inst, inst.n() - 1, budget, master, &LowRankOptions::default())
}

/// Multistart minimization in `R^dim`. Start `i` draws coordinates i.i.d.
/// uniform in `[−scale, scale]` from its own stream, so verdicts do not
/// depend on how many starts ran before. Stops at the first feasible start.
pub fn solve_lowrank_in_dim<T: Scalar>(
    inst: &ComparisonInstance<T>,
    dim: usize,
    budget: usize,
    master: u64,
    opts: &LowRankOptions<T>,
) -> FeasibilityVerdict<T> {
    let n = inst.n();
    let dim = dim.max(1);
    let scale = inst.scale();
    let feas_tol = opts.feas_tol_rel * scale;
    let budget = budget.max(1);
    if scale == T::zero() {
        let w = ModelConfiguration { dim, positions: vec![vec![T::zero(); dim]; n] };
        return FeasibilityVerdict {
            status: VerdictStatus::Feasible,
            solver: SolverKind::LowRank,
            witness: Some(w),
            residual: T::zero(),
            best_penalty: T::zero(),
            budget_used: 1,
            feas_tol,
        };
    }
    let mut best: Option<(T, T, Vec<T>)> = None;
    let mut used = 0;
    for start in 0..budget {
        used = start + 1;
        let mut rng = seed::rng_for(master, seed::stream::SOLVER_START, start as u64);
        let x0: Vec<T> = (0..n * dim).map(|_| scale * T::lit(rng.gen::<f64>() * 2.0 - 1.0)).collect();
        let (mut x, mut p) = lbfgs(inst, x0, dim, feas_tol, opts);
        let r0 = residual(&ModelConfiguration::from_flat(&x, n, dim), inst);
        if r0 <= opts.polish_from * scale {
            (x, p) = levenberg_marquardt(inst, x, p, dim, opts.polish * feas_tol);
        }
        let cfg = ModelConfiguration::from_flat(&x, n, dim);
        let r = residual(&cfg, inst);
        if r <= feas_tol {
            let best_penalty = best.as_ref().map_or(p, |b| b.0.min(p));
            return FeasibilityVerdict {
                status: VerdictStatus::Feasible,
                solver: SolverKind::LowRank,
                witness: Some(cfg),
                residual: r,
                best_penalty,
                budget_used: used,
                feas_tol,
            };
        }
        if best.as_ref().map_or(true, |b| p < b.0) {
            best = Some((p, r, x));
        }
    }
    let (p, r, x) = best.expect("budget is at least one");
    FeasibilityVerdict {
        status: VerdictStatus::NotFoundAfterBudget,
        solver: SolverKind::LowRank,
        witness: Some(ModelConfiguration::from_flat(&x, n, dim)),
        residual: r,
        best_penalty: p,
        budget_used: used,
        feas_tol,
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// L-BFGS with Armijo backtracking. Returns the final point and penalty.
fn lbfgs<T: Scalar>(inst: &ComparisonInstance<T>, mut x: Vec<T>, dim: usize, feas_tol: T, opts: &LowRankOptions<T>) -> (Vec<T>, T) {
    let n = inst.n();
    let len = x.len();
    let scale = inst.scale();
    let grad_tol = opts.grad_tol_rel * scale * scale;
    let target = opts.polish * feas_tol;
    let mut g = vec![T::zero(); len];
    let mut f = penalty_and_gradient(&x, &mut g, inst, dim);
    let mut hist: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(opts.memory);
    let mut xn = vec![T::zero(); len];
    let mut gn = vec![T::zero(); len];
    let mut f_mark = f;
    for it in 0..opts.max_iters {
        if it > 0 && it % opts.stall_window.max(1) == 0 {
            if f_mark - f <= opts.stall_rel * f_mark {
                break;
            }
            f_mark = f;
        }
        if f == T::zero() || dot(&g, &g).sqrt() <= grad_tol {
            break;
        }
        // Residual checks are cheap relative to a line search but not free.
        if it % 8 == 0 && residual(&ModelConfiguration::from_flat(&x, n, dim), inst) <= target {
            break;
        }
        // Two-loop recursion.
        let mut q: Vec<T> = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = *rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, &yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = *rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, &si)| *qi += (*a - b) * si);
        }
        let mut dir: Vec<T> = q.iter().map(|&v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < T::zero()) {
            hist.clear();
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = if hist.is_empty() { (scale / dot(&dir, &dir).sqrt()).min(T::one()) } else { T::one() };
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..len {
                xn[i] = x[i] + step * dir[i];
            }
            let fnew = penalty_and_gradient(&xn, &mut gn, inst, dim);
            if fnew <= f + T::lit(1e-4) * step * slope {
                let s: Vec<T> = (0..len).map(|i| xn[i] - x[i]).collect();
                let y: Vec<T> = (0..len).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if hist.len() == opts.memory {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, T::one() / sy));
                }
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                f = fnew;
                accepted = true;
                break;
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            if hist.is_empty() {
                break;
            }
            hist.clear();
        }
    }
    (x, f)
}

/// Active residuals with their unit directions: equalities, plus lower
/// bounds violated or satisfied with less than `margin` to spare (those are
/// driven to equality).
fn active<T: Scalar>(inst: &ComparisonInstance<T>, x: &[T], dim: usize, margin: T) -> Vec<(usize, usize, T, Vec<T>)> {
    let mut out = Vec::new();
    let mut push = |i: usize, j: usize, lower: bool| {
        let diff: Vec<T> = (0..dim).map(|c| x[i * dim + c] - x[j * dim + c]).collect();
        let r = dot(&diff, &diff).sqrt();
        let e = r - inst.dist[i][j];
        if lower && e >= margin {
            return;
        }
        let u = if r > T::zero() { diff.iter().map(|&v| v / r).collect() } else { vec![T::zero(); dim] };
        out.push((i, j, e, u));
    };
    for &(i, j) in &inst.equality_pairs {
        push(i, j, false);
    }
    for &(i, j) in &inst.lowerbound_pairs {
        push(i, j, true);
    }
    out
}

/// In-place Cholesky solve of `A z = b` for symmetric positive definite `A`.
fn cholesky_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let m = b.len();
    for j in 0..m {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..m {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    for i in 0..m {
        for k in 0..i {
            b[i] = b[i] - a[i][k] * b[k];
        }
        b[i] = b[i] / a[i][i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            b[i] = b[i] - a[k][i] * b[k];
        }
        b[i] = b[i] / a[i][i];
    }
    Some(b)
}

/// Minimum-norm Levenberg–Marquardt steps `δ = −Jᵀ (J Jᵀ + μ I)⁻¹ r`.
///
/// The first pass works on the violated constraints. When the solution is
/// rigid (lower bounds tight at the only feasible configuration, as for
/// planar data) that pass crawls, so a second pass also drives nearly tight
/// lower bounds to equality. The configuration with the smaller residual
/// wins.
pub(super) fn levenberg_marquardt<T: Scalar>(inst: &ComparisonInstance<T>, x: Vec<T>, f: T, dim: usize, target: T) -> (Vec<T>, T) {
    let n = inst.n();
    let res = |x: &[T]| residual(&ModelConfiguration::from_flat(x, n, dim), inst);
    let (x1, f1) = lm_pass(inst, x, f, dim, target, None);
    let r1 = res(&x1);
    if r1 <= target {
        return (x1, f1);
    }
    // Near a rigid solution the residual is quadratic in the distance to
    // it, so bounds tight there may still have slack of order `√r`.
    let mut best = (x1, f1, r1);
    for factor in [0.1, 1.0, 10.0, 100.0] {
        let margin = (r1 * inst.scale()).sqrt() * T::lit(factor);
        let (x2, f2) = lm_pass(inst, best.0.clone(), best.1, dim, target, Some(margin));
        let r2 = res(&x2);
        if r2 < best.2 {
            best = (x2, f2, r2);
        }
        if best.2 <= target {
            break;
        }
    }
    (best.0, best.1)
}

fn lm_pass<T: Scalar>(inst: &ComparisonInstance<T>, mut x: Vec<T>, mut f: T, dim: usize, target: T, margin: Option<T>) -> (Vec<T>, T) {
    let n = inst.n();
    let scale = inst.scale();
    let mut mu = T::lit(1e-8) * scale * scale;
    let mut g = vec![T::zero(); x.len()];
    // Objective of the pass: the true penalty, or the sum of squares of the
    // active set when nearly tight bounds are held at equality.
    let objective = |x: &[T], g: &mut [T]| -> T {
        match margin {
            None => penalty_and_gradient(x, g, inst, dim),
            Some(mg) => active(inst, x, dim, mg).iter().fold(T::zero(), |s, a| s + a.2 * a.2),
        }
    };
    let mut obj = objective(&x, &mut g);
    for _ in 0..50 {
        if residual(&ModelConfiguration::from_flat(&x, n, dim), inst) <= target {
            break;
        }
        let act = active(inst, &x, dim, margin.unwrap_or(T::zero()));
        let m = act.len();
        if m == 0 {
            break;
        }
        let mut jj = vec![vec![T::zero(); m]; m];
        for a in 0..m {
            for b in 0..m {
                let (ia, ja, _, ref ua) = act[a];
                let (ib, jb, _, ref ub) = act[b];
                // Row a has +u_a at point ia and −u_a at point ja.
                let mut coef = T::zero();
                if ia == ib {
                    coef += T::one();
                }
                if ia == jb {
                    coef -= T::one();
                }
                if ja == ib {
                    coef -= T::one();
                }
                if ja == jb {
                    coef += T::one();
                }
                jj[a][b] = coef * dot(ua, ub);
            }
        }
        let r: Vec<T> = act.iter().map(|a| a.2).collect();
        let mut improved = false;
        for _ in 0..12 {
            let mut sys = jj.clone();
            for (a, row) in sys.iter_mut().enumerate() {
                row[a] += mu;
            }
            let Some(z) = cholesky_solve(sys, r.clone()) else {
                mu *= T::lit(10.0);
                continue;
            };
            let mut xn = x.clone();
            for (a, (i, j, _, u)) in act.iter().enumerate() {
                for c in 0..dim {
                    xn[i * dim + c] -= z[a] * u[c];
                    xn[j * dim + c] += z[a] * u[c];
                }
            }
            let on = objective(&xn, &mut g);
            if on < obj {
                x = xn;
                obj = on;
                mu = (mu * T::lit(0.1)).max(T::min_positive_value());
                improved = true;
                break;
            }
            mu *= T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    f = f.min(penalty_and_gradient(&x, &mut g, inst, dim));
    (x, f)
}

#[cfg(test)]
mod tests {
    use super::super::{build_instance, euclidean_distances};
    use super::*;

    #[test]
    fn euclidean_instance_is_feasible() {
        let p = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.2, 0.0],
            vec![0.3, 1.1, -0.4],
            vec![-0.5, 0.4, 0.9],
            vec![0.7, -0.6, 0.5],
            vec![0.1, 0.9, 0.3],
        ];
        let inst = build_instance(3, 1, euclidean_distances(&p)).unwrap();
        let v = solve_lowrank(&inst, 20, 1);
        assert!(v.is_feasible());
        assert!(v.residual <= 1e-8 * inst.scale(), "{}", v.residual);
        assert_eq!(v.witness.unwrap().dim, 5);
    }

    #[test]
    fn zero_data_is_trivially_feasible() {
        let inst = build_instance(0, 0, vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(solve_lowrank(&inst, 1, 0).is_feasible());
    }
}

//! Feasibility of the model-configuration question behind the
//! `(k, l)`-bipolar comparison, posed on pure distance data.
//!
//! Points are labelled `a_0..a_k, b_0..b_l` (indices `0..=k` and
//! `k+1..=k+l+1`). The model space is `R^{n−1}`: `n` points of a Hilbert space
//! span an affine subspace of dimension at most `n − 1`.

mod eigen;
mod gram;
mod lowrank;
mod oracle;

pub use eigen::symmetric_eigen;
pub use gram::{solve_gram_projection, solve_gram_projection_with, GramOptions};
pub use lowrank::{solve_lowrank, solve_lowrank_in_dim, LowRankOptions};
pub use oracle::{alexandrov_angle_sum, alexandrov_quadruple_oracle, model_angle, ORACLE_SLACK};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative feasibility tolerance: `feas_tol = FEAS_TOL_REL · scale`.
pub const FEAS_TOL_REL: f64 = 1e-7;
/// Relative slack for the triangle inequality on instance data.
pub const TRIANGLE_SLACK: f64 = 1e-9;
/// Largest supported instance.
pub const MAX_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    Equality,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonInstance<T> {
    pub k: usize,
    pub l: usize,
    pub dist: Vec<Vec<T>>,
    pub equality_pairs: Vec<(usize, usize)>,
    pub lowerbound_pairs: Vec<(usize, usize)>,
    /// Set for synthetic data exempt from the triangle inequality check.
    pub waiver: bool,
}

/// Equality and lower-bound pairs of the `(k, l)` pattern, each `(i, j)`
/// with `i < j`, in lexicographic order.
pub fn constraint_pattern(k: usize, l: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let n = k + l + 2;
    let b0 = k + 1;
    let mut eq = Vec::new();
    let mut lb = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let equality = (i == 0 && j == b0) || (i == 0 && j <= k) || (i == b0 && j > b0);
            if equality {
                eq.push((i, j));
            } else {
                lb.push((i, j));
            }
        }
    }
    (eq, lb)
}

/// Builds and validates an instance. Distances must be finite,
/// nonnegative and symmetric with a zero diagonal, and must satisfy the
/// triangle inequality up to `1e-9 · max(1, scale)`.
pub fn build_instance<T: Scalar>(k: usize, l: usize, dist: Vec<Vec<T>>) -> Result<ComparisonInstance<T>> {
    build(k, l, dist, false)
}

/// As [`build_instance`] but without the triangle inequality check; the
/// instance carries the waiver flag.
pub fn build_instance_waived<T: Scalar>(k: usize, l: usize, dist: Vec<Vec<T>>) -> Result<ComparisonInstance<T>> {
    build(k, l, dist, true)
}

fn build<T: Scalar>(k: usize, l: usize, dist: Vec<Vec<T>>, waiver: bool) -> Result<ComparisonInstance<T>> {
    let n = k + l + 2;
    if n > MAX_POINTS {
        return Err(Error::InvalidInstance(format!("{n} points exceed the supported maximum {MAX_POINTS}")));
    }
    if dist.len() != n || dist.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInstance(format!("distance matrix must be {n}x{n} for k={k}, l={l}")));
    }
    for i in 0..n {
        for j in 0..n {
            let d = dist[i][j];
            if !d.is_finite() || d < T::zero() {
                return Err(Error::InvalidInstance(format!("entry ({i},{j}) = {d} is negative or not finite")));
            }
            if i == j && d != T::zero() {
                return Err(Error::InvalidInstance(format!("diagonal entry ({i},{i}) = {d} is not zero")));
            }
            if d != dist[j][i] {
                return Err(Error::InvalidInstance(format!("entries ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    let (equality_pairs, lowerbound_pairs) = constraint_pattern(k, l);
    let inst = ComparisonInstance { k, l, dist, equality_pairs, lowerbound_pairs, waiver };
    if !waiver {
        inst.check_triangle_inequality()?;
    }
    Ok(inst)
}

impl<T: Scalar> ComparisonInstance<T> {
    pub fn n(&self) -> usize {
        self.k + self.l + 2
    }

    /// Index of `a_i`.
    pub fn a(&self, i: usize) -> usize {
        i
    }

    /// Index of `b_j`.
    pub fn b(&self, j: usize) -> usize {
        self.k + 1 + j
    }

    /// Largest distance entry.
    pub fn scale(&self) -> T {
        self.dist.iter().flatten().fold(T::zero(), |m, &d| m.max(d))
    }

    pub fn feas_tol(&self, rel: T) -> T {
        rel * self.scale()
    }

    pub fn constraint(&self, i: usize, j: usize) -> Constraint {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if self.equality_pairs.binary_search(&(i, j)).is_ok() {
            Constraint::Equality
        } else {
            Constraint::LowerBound
        }
    }

    /// Largest violation `d_ij − d_im − d_mj` over all triples.
    pub fn triangle_excess(&self) -> (T, usize, usize, usize) {
        let n = self.n();
        let mut worst = (T::neg_infinity(), 0, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                for m in 0..n {
                    if m == i || m == j {
                        continue;
                    }
                    let e = self.dist[i][j] - self.dist[i][m] - self.dist[m][j];
                    if e > worst.0 {
                        worst = (e, i, j, m);
                    }
                }
            }
        }
        worst
    }

    pub fn check_triangle_inequality(&self) -> Result<()> {
        if self.n() < 3 {
            return Ok(());
        }
        let (e, i, j, m) = self.triangle_excess();
        let slack = T::lit(TRIANGLE_SLACK) * self.scale().max(T::one());
        if e > slack {
            return Err(Error::TriangleInequality { i, j, m, excess: e.to_f64_lossy() });
        }
        Ok(())
    }
}

/// Point positions in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfiguration<T> {
    pub dim: usize,
    pub positions: Vec<Vec<T>>,
}

impl<T: Scalar> ModelConfiguration<T> {
    pub fn new(positions: Vec<Vec<T>>) -> Result<Self> {
        let dim = positions.first().map_or(0, |p| p.len());
        if positions.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInstance("positions have mixed dimensions".into()));
        }
        Ok(ModelConfiguration { dim, positions })
    }

    pub(crate) fn from_flat(x: &[T], n: usize, dim: usize) -> Self {
        ModelConfiguration { dim, positions: (0..n).map(|i| x[i * dim..(i + 1) * dim].to_vec()).collect() }
    }

    /// Copy padded with zero coordinates (or truncated) to `dim`.
    pub fn with_dim(&self, dim: usize) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| (0..dim).map(|c| p.get(c).copied().unwrap_or(T::zero())).collect())
            .collect();
        ModelConfiguration { dim, positions }
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        crate::scalar::dist(&self.positions[i], &self.positions[j])
    }

    /// Positions of the selected points, in the given order.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        ModelConfiguration { dim: self.dim, positions: keep.iter().map(|&i| self.positions[i].clone()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Feasible,
    NotFoundAfterBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    LowRank,
    GramProjection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict<T> {
    pub status: VerdictStatus,
    pub solver: SolverKind,
    /// Best configuration found (the witness when feasible).
    pub witness: Option<ModelConfiguration<T>>,
    /// Maximum constraint violation of `witness`.
    pub residual: T,
    pub best_penalty: T,
    /// Multistarts (low-rank) or iterations (Gram projection) used.
    pub budget_used: usize,
    pub feas_tol: T,
}

impl<T: Scalar> FeasibilityVerdict<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == VerdictStatus::Feasible
    }
}

/// Least-squares surrogate: squared equality errors plus squared
/// lower-bound shortfalls. Zero exactly on feasible configurations.
pub fn penalty<T: Scalar>(config: &ModelConfiguration<T>, inst: &ComparisonInstance<T>) -> T {
    let mut p = T::zero();
    for &(i, j) in &inst.equality_pairs {
        let e = config.distance(i, j) - inst.dist[i][j];
        p += e * e;
    }
    for &(i, j) in &inst.lowerbound_pairs {
        let e = inst.dist[i][j] - config.distance(i, j);
        if e > T::zero() {
            p += e * e;
        }
    }
    p
}

/// Penalty and its gradient with respect to the flattened positions.
pub(crate) fn penalty_and_gradient<T: Scalar>(x: &[T], grad: &mut [T], inst: &ComparisonInstance<T>, dim: usize) -> T {
    grad.iter_mut().for_each(|g| *g = T::zero());
    let mut p = T::zero();
    let mut term = |i: usize, j: usize, lower: bool, grad: &mut [T]| {
        let (xi, xj) = (&x[i * dim..(i + 1) * dim], &x[j * dim..(j + 1) * dim]);
        let r = crate::scalar::dist(xi, xj);
        let d = inst.dist[i][j];
        let e = r - d;
        if lower && e >= T::zero() {
            return;
        }
        p += e * e;
        if r > T::zero() {
            let c = T::lit(2.0) * e / r;
            for c_ in 0..dim {
                let g = c * (x[i * dim + c_] - x[j * dim + c_]);
                grad[i * dim + c_] += g;
                grad[j * dim + c_] -= g;
            }
        }
    };
    for &(i, j) in &inst.equality_pairs {
        term(i, j, false, grad);
    }
    for &(i, j) in &inst.lowerbound_pairs {
        term(i, j, true, grad);
    }
    p
}

/// Gradient of [`penalty`], one vector per point.
pub fn penalty_gradient<T: Scalar>(config: &ModelConfiguration<T>, inst: &ComparisonInstance<T>) -> Vec<Vec<T>> {
    let dim = config.dim;
    let x: Vec<T> = config.positions.iter().flatten().copied().collect();
    let mut g = vec![T::zero(); x.len()];
    penalty_and_gradient(&x, &mut g, inst, dim);
    g.chunks(dim.max(1)).map(|c| c.to_vec()).collect()
}

/// Maximum violation over all constraints, recomputed pair by pair from the
/// pattern definition (independent of the penalty code path).
pub fn residual<T: Scalar>(config: &ModelConfiguration<T>, inst: &ComparisonInstance<T>) -> T {
    let n = inst.n();
    let b0 = inst.k + 1;
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let model: T = config.positions[i]
                .iter()
                .zip(&config.positions[j])
                .map(|(&u, &v)| (u - v) * (u - v))
                .fold(T::zero(), |s, t| s + t)
                .sqrt();
            let d = inst.dist[i][j];
            let pole_pair = (i == 0 && j == b0) || (j == 0 && i == b0);
            let a_member = (i == 0 && j <= inst.k) || (j == 0 && i <= inst.k);
            let b_member = (i == b0 && j > b0) || (j == b0 && i > b0);
            let violation = if pole_pair || a_member || b_member { (model - d).abs() } else { (d - model).max(T::zero()) };
            worst = worst.max(violation);
        }
    }
    worst
}

/// Restriction to the kept labels. `keep_a` indexes `a_0..a_k` and must
/// contain 0; `keep_b` indexes `b_0..b_l` and must contain 0. Returns the
/// child instance and, for each child point, its parent index.
pub fn sub_instance<T: Scalar>(
    inst: &ComparisonInstance<T>,
    keep_a: &[usize],
    keep_b: &[usize],
) -> Result<(ComparisonInstance<T>, Vec<usize>)> {
    if !keep_a.contains(&0) || !keep_b.contains(&0) {
        return Err(Error::PoleDropped);
    }
    let norm = |v: &[usize], max: usize| -> Result<Vec<usize>> {
        let mut v: Vec<usize> = v.to_vec();
        v.sort_unstable();
        v.dedup();
        if v.iter().any(|&i| i > max) {
            return Err(Error::InvalidInstance(format!("kept index exceeds {max}")));
        }
        Ok(v)
    };
    let ka = norm(keep_a, inst.k)?;
    let kb = norm(keep_b, inst.l)?;
    let map: Vec<usize> = ka.iter().map(|&i| inst.a(i)).chain(kb.iter().map(|&j| inst.b(j))).collect();
    let dist = map.iter().map(|&i| map.iter().map(|&j| inst.dist[i][j]).collect()).collect();
    let child = build(ka.len() - 1, kb.len() - 1, dist, inst.waiver)?;
    Ok((child, map))
}

/// Model configuration realizing a Euclidean point set exactly (the
/// identity witness), padded to `n − 1` dimensions.
pub fn identity_witness<T: Scalar>(points: &[Vec<T>]) -> Result<ModelConfiguration<T>> {
    let n = points.len();
    let cfg = ModelConfiguration::new(points.to_vec())?;
    Ok(cfg.with_dim(cfg.dim.max(n.saturating_sub(1))))
}

/// Pairwise Euclidean distances of a point set.
pub fn euclidean_distances<T: Scalar>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    points.iter().map(|p| points.iter().map(|q| crate::scalar::dist(p, q)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.2, 0.0], vec![0.3, 1.1, -0.4], vec![-0.5, 0.4, 0.9], vec![0.7, -0.6, 0.5]]
    }

    #[test]
    fn pattern_counts() {
        for (k, l, eq, lb) in [(2, 0, 3, 3), (3, 3, 7, 21), (0, 0, 1, 0), (3, 1, 5, 10)] {
            let (e, b) = constraint_pattern(k, l);
            assert_eq!((e.len(), b.len()), (eq, lb), "k={k} l={l}");
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        let d = euclidean_distances(&pts());
        assert!(build_instance(2, 0, d.clone()).is_err());
        let mut asym = d.clone();
        asym[1][2] += 0.1;
        assert!(matches!(build_instance(2, 1, asym), Err(Error::InvalidInstance(_))));
        let mut neg = d.clone();
        neg[1][2] = -1.0;
        neg[2][1] = -1.0;
        assert!(build_instance(2, 1, neg).is_err());
        let mut tri = d;
        tri[1][2] = 10.0;
        tri[2][1] = 10.0;
        assert!(matches!(build_instance(2, 1, tri.clone()), Err(Error::TriangleInequality { .. })));
        assert!(build_instance_waived(2, 1, tri).unwrap().waiver);
    }

    #[test]
    fn identity_has_zero_penalty_and_residual() {
        let p = pts();
        let inst = build_instance(2, 1, euclidean_distances(&p)).unwrap();
        let w = identity_witness(&p).unwrap();
        assert_eq!(w.dim, 4);
        assert!(penalty(&w, &inst) < 1e-28);
        assert!(residual(&w, &inst) < 1e-14);
    }

    #[test]
    fn collapsed_configuration_penalty_is_sum_of_squares() {
        let p = pts();
        let inst = build_instance(2, 1, euclidean_distances(&p)).unwrap();
        let zero = ModelConfiguration::new(vec![vec![0.0; 4]; 5]).unwrap();
        let mut expect = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                expect += inst.dist[i][j] * inst.dist[i][j];
            }
        }
        assert!((penalty(&zero, &inst) - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = pts();
        let inst = build_instance(2, 1, euclidean_distances(&p)).unwrap();
        let cfg = ModelConfiguration::new(vec![
            vec![0.1, -0.3, 0.2, 0.05],
            vec![0.9, 0.1, 0.4, -0.2],
            vec![-0.2, 0.5, 0.1, 0.3],
            vec![0.4, 0.4, -0.6, 0.1],
            vec![0.2, -0.1, 0.3, 0.7],
        ])
        .unwrap();
        let g = penalty_gradient(&cfg, &inst);
        let h = 1e-6;
        for i in 0..5 {
            for c in 0..4 {
                let mut plus = cfg.clone();
                plus.positions[i][c] += h;
                let mut minus = cfg.clone();
                minus.positions[i][c] -= h;
                let fd = (penalty(&plus, &inst) - penalty(&minus, &inst)) / (2.0 * h);
                assert!((fd - g[i][c]).abs() < 1e-7, "({i},{c}): {fd} vs {}", g[i][c]);
            }
        }
    }

    #[test]
    fn sub_instance_restricts_pattern_and_distances() {
        let mut p = pts();
        p.extend([vec![0.2, 0.2, 0.2], vec![-0.3, 0.8, 0.1], vec![1.0, 1.0, -1.0]]);
        let inst = build_instance(3, 3, euclidean_distances(&p)).unwrap();
        let (child, map) = sub_instance(&inst, &[0, 1, 2, 3], &[0]).unwrap();
        assert_eq!((child.k, child.l), (3, 0));
        assert_eq!(map, vec![0, 1, 2, 3, 4]);
        let (poles, _) = sub_instance(&inst, &[0], &[0]).unwrap();
        assert_eq!((poles.k, poles.l, poles.n()), (0, 0, 2));
        assert_eq!(poles.dist[0][1], inst.dist[0][4]);
        assert!(matches!(sub_instance(&inst, &[1, 2], &[0]), Err(Error::PoleDropped)));
        assert!(matches!(sub_instance(&inst, &[0], &[2]), Err(Error::PoleDropped)));
    }
}

//! Model manifolds: flat space, round spheres and surfaces of revolution.
//!
//! Every manifold exposes the same chart-level operations (metric, curvature,
//! exponential and logarithm maps, global distance with a minimizing geodesic)
//! and a conservative estimate of the tangent injectivity radius used to
//! keep later constructions away from cut loci.

mod euclid;
mod parse;
pub mod profile;
pub mod revolution;
mod sphere;
mod til;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

pub use profile::{FlatBandParams, ProfileKind, ProfileSpec, ProfileValue};
pub use revolution::{GeodesicSettings, Integration};
pub use parse::parse_manifold;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ManifoldSpec<T> {
    Euclidean { dim: usize },
    Sphere { radius: T },
    Revolution { profile: ProfileSpec<T> },
}

/// Coordinates in one chart. Spheres carry two polar charts (`chart` 0 has
/// its poles on the z-axis, chart 1 on the x-axis); every other manifold has
/// a single chart 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint<T> {
    pub chart: u8,
    pub coords: Vec<T>,
}

impl<T: Scalar> ChartPoint<T> {
    pub fn new(coords: Vec<T>) -> Self {
        ChartPoint { chart: 0, coords }
    }

    pub fn in_chart(chart: u8, coords: Vec<T>) -> Self {
        ChartPoint { chart, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Tangent vector with its Riemannian norm cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVec<T> {
    pub base: ChartPoint<T>,
    pub components: Vec<T>,
    pub norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSolution<T> {
    pub start: ChartPoint<T>,
    /// Unit initial velocity in the chart of `start`.
    pub direction: Vec<T>,
    pub length: T,
    /// `(arclength, point)` samples from start to end.
    pub path: Vec<(T, ChartPoint<T>)>,
    pub minimizing: bool,
    /// Another geodesic of (numerically) equal length exists.
    pub ambiguous: bool,
}

pub(crate) const PATH_SAMPLES: usize = 8;

impl<T: Scalar> ManifoldSpec<T> {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Validation { key: "dim".into(), msg: "must be at least 2".into() });
        }
        Ok(ManifoldSpec::Euclidean { dim })
    }

    pub fn sphere(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::Validation { key: "r".into(), msg: "must be positive".into() });
        }
        Ok(ManifoldSpec::Sphere { radius })
    }

    pub fn revolution(profile: ProfileSpec<T>) -> Result<Self> {
        profile.validate()?;
        Ok(ManifoldSpec::Revolution { profile })
    }

    pub fn flat_band(radius: T, band: T, blend: T) -> Result<Self> {
        Self::revolution(ProfileSpec::flat_band(FlatBandParams { radius, band, blend, cap: radius })?)
    }

    /// Re-checks the constructor invariants (useful after deserialization).
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Euclidean { dim } => Self::euclidean(*dim).map(|_| ()),
            ManifoldSpec::Sphere { radius } => Self::sphere(*radius).map(|_| ()),
            ManifoldSpec::Revolution { profile } => profile.validate(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Euclidean { dim } => *dim,
            _ => 2,
        }
    }

    pub fn profile(&self) -> Option<&ProfileSpec<T>> {
        match self {
            ManifoldSpec::Revolution { profile } => Some(profile),
            _ => None,
        }
    }

    /// Flat metrics: Euclidean space and flat cylinders.
    pub fn is_flat(&self) -> bool {
        match self {
            ManifoldSpec::Euclidean { .. } => true,
            ManifoldSpec::Revolution { profile } => matches!(profile.kind, ProfileKind::Cylinder { .. }),
            ManifoldSpec::Sphere { .. } => false,
        }
    }

    /// A reference point used by scans when none is given.
    pub fn default_base_point(&self) -> ChartPoint<T> {
        match self {
            ManifoldSpec::Euclidean { dim } => ChartPoint::new(vec![T::zero(); *dim]),
            ManifoldSpec::Sphere { .. } => ChartPoint::new(vec![T::FRAC_PI_2(), T::zero()]),
            ManifoldSpec::Revolution { profile } => {
                let mid = if profile.contains(T::zero()) {
                    T::zero()
                } else {
                    (profile.t_min + profile.t_max) * T::lit(0.5)
                };
                ChartPoint::new(vec![mid, T::zero()])
            }
        }
    }

    pub fn check_point(&self, p: &ChartPoint<T>) -> Result<()> {
        if p.coords.len() != self.dim() || p.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::OutsideChart(format!("{:?} has wrong dimension or non-finite coordinates", p.coords)));
        }
        match self {
            ManifoldSpec::Euclidean { .. } => {
                if p.chart != 0 {
                    return Err(Error::OutsideChart(format!("unknown chart {}", p.chart)));
                }
                Ok(())
            }
            ManifoldSpec::Sphere { .. } => sphere::check_point(p),
            ManifoldSpec::Revolution { profile } => {
                if p.chart != 0 || !profile.contains(p.coords[0]) {
                    return Err(Error::OutsideChart(format!(
                        "t = {} not in [{}, {}]",
                        p.coords[0], profile.t_min, profile.t_max
                    )));
                }
                Ok(())
            }
        }
    }

    /// Metric tensor `g_p` in the chart of `p`.
    pub fn metric_tensor(&self, p: &ChartPoint<T>) -> Result<Vec<Vec<T>>> {
        self.check_point(p)?;
        let n = self.dim();
        let mut g = vec![vec![T::zero(); n]; n];
        match self {
            ManifoldSpec::Euclidean { .. } => {
                for (i, row) in g.iter_mut().enumerate() {
                    row[i] = T::one();
                }
            }
            ManifoldSpec::Sphere { radius } => {
                let s = p.coords[0].sin();
                g[0][0] = *radius * *radius;
                g[1][1] = *radius * *radius * s * s;
            }
            ManifoldSpec::Revolution { profile } => {
                let f = profile.eval(p.coords[0])?.f;
                g[0][0] = T::one();
                g[1][1] = f * f;
            }
        }
        Ok(g)
    }

    pub fn inner(&self, p: &ChartPoint<T>, a: &[T], b: &[T]) -> Result<T> {
        let g = self.metric_tensor(p)?;
        let mut acc = T::zero();
        for i in 0..a.len() {
            for j in 0..b.len() {
                acc += g[i][j] * a[i] * b[j];
            }
        }
        Ok(acc)
    }

    /// Builds a tangent vector at `p`, computing its norm from the metric.
    pub fn tangent(&self, p: &ChartPoint<T>, components: Vec<T>) -> Result<TangentVec<T>> {
        if components.len() != self.dim() {
            return Err(Error::OutsideChart("tangent vector has wrong dimension".into()));
        }
        let n2 = self.inner(p, &components, &components)?;
        Ok(TangentVec { base: p.clone(), components, norm: n2.max(T::zero()).sqrt() })
    }

    /// Gauss curvature (sectional curvature of the unique 2-plane for
    /// surfaces; zero for every plane in Euclidean space).
    pub fn gauss_curvature(&self, p: &ChartPoint<T>) -> Result<T> {
        self.check_point(p)?;
        Ok(match self {
            ManifoldSpec::Euclidean { .. } => T::zero(),
            ManifoldSpec::Sphere { radius } => (*radius * *radius).recip(),
            ManifoldSpec::Revolution { profile } => profile.curvature(p.coords[0])?,
        })
    }

    pub fn exp_map(&self, v: &TangentVec<T>) -> Result<ChartPoint<T>> {
        self.check_point(&v.base)?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(euclid::exp(&v.base, &v.components)),
            ManifoldSpec::Sphere { radius } => sphere::exp(*radius, &v.base, &v.components),
            ManifoldSpec::Revolution { profile } => {
                revolution::exp(profile, &v.base, &v.components, &GeodesicSettings::default())
            }
        }
    }

    /// Global distance together with one minimizing geodesic.
    pub fn distance(&self, p: &ChartPoint<T>, q: &ChartPoint<T>) -> Result<(T, GeodesicSolution<T>)> {
        self.check_point(p)?;
        self.check_point(q)?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(euclid::distance(p, q)),
            ManifoldSpec::Sphere { radius } => sphere::distance(*radius, p, q),
            ManifoldSpec::Revolution { profile } => {
                let settings = GeodesicSettings::default();
                let sol = revolution::solve_bvp(profile, p, q, &settings)?;
                let g = revolution::solution_with_path(profile, p, &sol, &settings)?;
                Ok((g.length, g))
            }
        }
    }

    /// Distance only; skips sampling the geodesic path.
    pub fn distance_value(&self, p: &ChartPoint<T>, q: &ChartPoint<T>) -> Result<T> {
        self.check_point(p)?;
        self.check_point(q)?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(scalar::dist(&p.coords, &q.coords)),
            ManifoldSpec::Sphere { radius } => Ok(sphere::arc(*radius, p, q)),
            ManifoldSpec::Revolution { profile } => {
                Ok(revolution::solve_bvp(profile, p, q, &GeodesicSettings::default())?.length)
            }
        }
    }

    /// Initial velocity of a minimizing geodesic from `p` to `q`, with norm
    /// equal to the distance. Fails when the minimizer is ambiguous.
    pub fn log_map(&self, p: &ChartPoint<T>, q: &ChartPoint<T>) -> Result<TangentVec<T>> {
        self.check_point(p)?;
        self.check_point(q)?;
        let comps = match self {
            ManifoldSpec::Euclidean { .. } => euclid::log(p, q),
            ManifoldSpec::Sphere { radius } => sphere::log(*radius, p, q)?,
            ManifoldSpec::Revolution { profile } => {
                let sol = revolution::solve_bvp(profile, p, q, &GeodesicSettings::default())?;
                if let Some(other) = sol.tie {
                    return Err(Error::AmbiguousGeodesic(sol.length.to_f64_lossy(), other.to_f64_lossy()));
                }
                sol.velocity.to_vec()
            }
        };
        self.tangent(p, comps)
    }

    /// Point at arclength `s` along the unit-speed geodesic from `start` in
    /// direction `dir`.
    pub fn geodesic_point(&self, start: &ChartPoint<T>, dir: &[T], s: T) -> Result<ChartPoint<T>> {
        let v = self.tangent(start, dir.iter().map(|&c| c * s).collect())?;
        self.exp_map(&v)
    }

    /// Conservative inner radius of the tangent injectivity locus at `p`.
    pub fn til_inner_radius(&self, p: &ChartPoint<T>) -> T {
        til::inner_radius(self, p)
    }

    /// Distance-engine accuracy used to pick finite-difference steps.
    pub fn engine_tolerance(&self) -> T {
        match self {
            ManifoldSpec::Euclidean { .. } => T::lit(1e-16),
            ManifoldSpec::Sphere { .. } => T::lit(1e-15),
            ManifoldSpec::Revolution { .. } => T::lit(1e-12),
        }
    }

    /// Canonical chart representation of `p` (sphere chart handoff, angle
    /// wrapping).
    pub fn normalize(&self, p: &ChartPoint<T>) -> Result<ChartPoint<T>> {
        self.check_point(p)?;
        Ok(match self {
            ManifoldSpec::Euclidean { .. } => p.clone(),
            ManifoldSpec::Sphere { .. } => sphere::canonical(&sphere::unit_vector(p)),
            ManifoldSpec::Revolution { .. } => {
                ChartPoint::new(vec![p.coords[0], scalar::wrap_angle(p.coords[1])])
            }
        })
    }

    /// Orthonormal frame at `p` in chart components (surfaces only).
    pub fn orthonormal_frame(&self, p: &ChartPoint<T>) -> Result<[[T; 2]; 2]> {
        let g = self.metric_tensor(p)?;
        if self.dim() != 2 {
            return Err(Error::InvalidManifold("frame requires a surface".into()));
        }
        // Both charts are orthogonal coordinate systems.
        Ok([[g[0][0].sqrt().recip(), T::zero()], [T::zero(), g[1][1].sqrt().recip()]])
    }
}

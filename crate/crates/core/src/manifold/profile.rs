//! Meridian profiles `f(t)` for surfaces of revolution `dt² + f(t)² dθ²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameters of the flat-band profile: `f ≡ radius` on `|t| ≤ band`, then a
/// strictly concave cap `f = radius − cap · G((|t| − band)/blend)` with
/// `G(x) = x² e^{−1/x}`. `G` vanishes to infinite order at `x = 0`, so the
/// profile is C^∞ across the seam and `f'' < 0` everywhere off the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatBandParams<T> {
    pub radius: T,
    pub band: T,
    pub blend: T,
    pub cap: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ProfileKind<T> {
    /// `f = cosh t`, Gauss curvature −1.
    Cosh,
    /// `f = r`, a flat cylinder.
    Cylinder { r: T },
    /// `f = r sin(t/r)`, the round sphere away from its poles.
    Sine { r: T },
    FlatBand(FlatBandParams<T>),
}

/// `f`, `f'` and `f''` at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue<T> {
    pub f: T,
    pub df: T,
    pub ddf: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec<T> {
    pub kind: ProfileKind<T>,
    pub t_min: T,
    pub t_max: T,
    pub smoothness_class: u32,
}

/// Cap floor: flat-band domains end where `f` has dropped to this fraction of
/// the band radius.
pub const FLAT_BAND_FLOOR: f64 = 0.25;

// Below this argument `e^{-1/x}` is zero in double precision; returning zeros
// avoids `0 · ∞` on the way there.
const G_CUTOFF: f64 = 1.0 / 700.0;

fn cap_g<T: Scalar>(x: T) -> (T, T, T) {
    if x <= T::lit(G_CUTOFF) {
        return (T::zero(), T::zero(), T::zero());
    }
    let inv = x.recip();
    let e = (-inv).exp();
    let g = x * x * e;
    let dg = e * (T::lit(2.0) * x + T::one());
    let ddg = e * (T::lit(2.0) + T::lit(2.0) * inv + inv * inv);
    (g, dg, ddg)
}

impl<T: Scalar> FlatBandParams<T> {
    fn eval(&self, t: T) -> ProfileValue<T> {
        let u = t.abs() - self.band;
        if u <= T::zero() {
            return ProfileValue { f: self.radius, df: T::zero(), ddf: T::zero() };
        }
        let (g, dg, ddg) = cap_g(u / self.blend);
        let sign = t.signum();
        ProfileValue {
            f: self.radius - self.cap * g,
            df: -sign * self.cap * dg / self.blend,
            ddf: -self.cap * ddg / (self.blend * self.blend),
        }
    }

    /// `t > band` where the profile reaches `floor · radius`.
    fn end_of_domain(&self, floor: T) -> T {
        let target = floor * self.radius;
        let mut lo = self.band;
        let mut hi = self.band + self.blend;
        while self.eval(hi).f > target {
            hi = self.band + (hi - self.band) * T::lit(2.0);
        }
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if self.eval(mid).f > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

impl<T: Scalar> ProfileSpec<T> {
    pub fn cosh(extent: T) -> Result<Self> {
        Self::validated(ProfileKind::Cosh, -extent, extent)
    }

    pub fn cylinder(r: T, extent: T) -> Result<Self> {
        Self::validated(ProfileKind::Cylinder { r }, -extent, extent)
    }

    /// Round sphere of radius `r` in arclength-from-pole coordinates, with
    /// `margin` cut off at each pole.
    pub fn sine(r: T, margin: T) -> Result<Self> {
        Self::validated(ProfileKind::Sine { r }, margin, T::PI() * r - margin)
    }

    pub fn flat_band(params: FlatBandParams<T>) -> Result<Self> {
        for (key, v) in [
            ("r", params.radius),
            ("band", params.band),
            ("blend", params.blend),
            ("cap", params.cap),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Validation { key: key.into(), msg: "must be positive".into() });
            }
        }
        let end = params.end_of_domain(T::lit(FLAT_BAND_FLOOR));
        Self::validated(ProfileKind::FlatBand(params), -end, end)
    }

    fn validated(kind: ProfileKind<T>, t_min: T, t_max: T) -> Result<Self> {
        let spec = ProfileSpec { kind, t_min, t_max, smoothness_class: 4 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.t_min && t <= self.t_max
    }

    /// Profile values without a domain check.
    pub fn eval_unchecked(&self, t: T) -> ProfileValue<T> {
        match self.kind {
            ProfileKind::Cosh => {
                let (c, s) = (t.cosh(), t.sinh());
                ProfileValue { f: c, df: s, ddf: c }
            }
            ProfileKind::Cylinder { r } => ProfileValue { f: r, df: T::zero(), ddf: T::zero() },
            ProfileKind::Sine { r } => {
                let a = t / r;
                ProfileValue { f: r * a.sin(), df: a.cos(), ddf: -a.sin() / r }
            }
            ProfileKind::FlatBand(p) => p.eval(t),
        }
    }

    pub fn eval(&self, t: T) -> Result<ProfileValue<T>> {
        if !self.contains(t) {
            return Err(Error::LeftDomain { t: t.to_f64_lossy() });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Gauss curvature `−f''/f`.
    pub fn curvature(&self, t: T) -> Result<T> {
        let v = self.eval(t)?;
        Ok(-v.ddf / v.f)
    }

    pub fn flat_band_params(&self) -> Option<&FlatBandParams<T>> {
        match &self.kind {
            ProfileKind::FlatBand(p) => Some(p),
            _ => None,
        }
    }

    /// Largest value of `f` on the domain, sampled.
    pub fn f_max(&self) -> T {
        (0..=256)
            .map(|i| self.eval_unchecked(self.t_min + (self.t_max - self.t_min) * T::of(i) / T::lit(256.0)).f)
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Positivity, finiteness and derivative consistency on a deterministic
    /// sample of the domain.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > self.t_min) {
            return Err(Error::InvalidManifold("empty profile domain".into()));
        }
        if self.smoothness_class < 4 {
            return Err(Error::InvalidManifold("profile smoothness class must be at least 4".into()));
        }
        match self.kind {
            ProfileKind::Cylinder { r } | ProfileKind::Sine { r } if !(r > T::zero()) => {
                return Err(Error::Validation { key: "r".into(), msg: "must be positive".into() });
            }
            _ => {}
        }
        let n = 97;
        let h = T::lit(1e-4);
        let tol = T::lit(1e-6);
        for i in 0..=n {
            let t = self.t_min + (self.t_max - self.t_min) * T::of(i) / T::of(n);
            let v = self.eval_unchecked(t);
            if !(v.f > T::zero()) || !v.f.is_finite() || !v.df.is_finite() || !v.ddf.is_finite() {
                return Err(Error::InvalidManifold(format!("profile not positive and finite at t = {t}")));
            }
            if !(v.ddf / v.f).is_finite() {
                return Err(Error::InvalidManifold(format!("curvature not finite at t = {t}")));
            }
            let (lo, hi) = ((t - h).max(self.t_min), (t + h).min(self.t_max));
            let (a, b) = (self.eval_unchecked(lo), self.eval_unchecked(hi));
            let fd1 = (b.f - a.f) / (hi - lo);
            let fd2 = (b.df - a.df) / (hi - lo);
            let scale1 = T::one() + v.df.abs() + v.ddf.abs() * h;
            let scale2 = T::one() + v.ddf.abs() + (a.ddf - b.ddf).abs();
            // Central differences on the interior; one-sided at the ends
            // carry an O(h) term.
            let slack = if lo == t - h && hi == t + h { T::one() } else { T::lit(1e3) };
            if (fd1 - v.df).abs() > tol * scale1 * slack * T::lit(10.0)
                || (fd2 - v.ddf).abs() > tol * scale2 * slack * T::lit(1e2)
            {
                return Err(Error::InvalidManifold(format!("profile derivatives inconsistent at t = {t}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_band() -> ProfileSpec<f64> {
        ProfileSpec::flat_band(FlatBandParams { radius: 1.0, band: 1.0, blend: 0.5, cap: 1.0 }).unwrap()
    }

    #[test]
    fn flat_band_is_flat_on_band_and_curved_beyond() {
        let p = reference_band();
        for t in [-0.99, -0.5, 0.0, 0.3, 0.999] {
            assert_eq!(p.curvature(t).unwrap(), 0.0);
        }
        let positive = (1..=10).filter(|i| p.curvature(1.0 + 0.05 * *i as f64).unwrap() > 0.0).count();
        assert_eq!(positive, 10);
        assert!(p.t_max > 1.5 && p.t_max < 2.0, "{}", p.t_max);
        assert!((p.eval(p.t_max).unwrap().f - 0.25).abs() < 1e-9);
    }

    #[test]
    fn flat_band_high_derivatives_are_continuous_at_seam() {
        // f'' is C^∞-flat at the seam; finite differences of f'' agree with
        // zero on both sides.
        let p = reference_band();
        for h in [1e-2, 1e-3] {
            let right = p.eval(1.0 + h).unwrap().ddf;
            assert!(right.abs() < 1e-5, "{right}");
        }
    }

    #[test]
    fn curvatures_of_standard_profiles() {
        let c = ProfileSpec::<f64>::cosh(3.0).unwrap();
        assert!((c.curvature(0.5).unwrap() + 1.0).abs() < 1e-14);
        let s = ProfileSpec::<f64>::sine(2.0, 0.1).unwrap();
        assert!((s.curvature(1.3).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProfileSpec::cylinder(-1.0, 1.0).is_err());
        let bad = FlatBandParams { radius: 1.0, band: 0.0, blend: 0.5, cap: 1.0 };
        assert!(ProfileSpec::flat_band(bad).is_err());
        assert!(matches!(reference_band().eval(5.0), Err(Error::LeftDomain { .. })));
    }
}

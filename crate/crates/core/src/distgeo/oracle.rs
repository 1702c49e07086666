use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ComparisonInstance;

/// Tolerance added to `2π` in the quadruple criterion.
pub const ORACLE_SLACK: f64 = 1e-12;

/// Angle at `a` of the plane triangle with sides `d_ab`, `d_ac`, `d_bc`.
pub fn model_angle<T: Scalar>(d_ab: T, d_ac: T, d_bc: T) -> Result<T> {
    if d_ab <= T::zero() || d_ac <= T::zero() || d_bc < T::zero() {
        return Err(Error::InvalidInstance(format!("model angle needs positive sides, got ({d_ab}, {d_ac}, {d_bc})")));
    }
    let slack = T::lit(1e-9) * d_ab.max(d_ac).max(d_bc).max(T::one());
    let excess = (d_bc - d_ab - d_ac).max(d_ab - d_ac - d_bc).max(d_ac - d_ab - d_bc);
    if excess > slack {
        return Err(Error::TriangleInequality { i: 0, j: 1, m: 2, excess: excess.to_f64_lossy() });
    }
    let c = (d_ab * d_ab + d_ac * d_ac - d_bc * d_bc) / (T::lit(2.0) * d_ab * d_ac);
    Ok(c.clamp_to(-T::one(), T::one()).acos())
}

/// Sum of the three model angles at `a_0` of a `(2, 0)` instance, or `None`
/// when some point coincides with `a_0` (then the instance is feasible).
pub fn alexandrov_angle_sum<T: Scalar>(inst: &ComparisonInstance<T>) -> Result<Option<T>> {
    if inst.k != 2 || inst.l != 0 {
        return Err(Error::WrongPattern { k: inst.k, l: inst.l });
    }
    let d = &inst.dist;
    let arms = [1usize, 2, 3];
    if arms.iter().any(|&i| d[0][i] == T::zero()) {
        return Ok(None);
    }
    let mut sum = T::zero();
    for (x, y) in [(1, 2), (1, 3), (2, 3)] {
        sum += model_angle(d[0][x], d[0][y], d[x][y])?;
    }
    Ok(Some(sum))
}

/// Closed-form decision for the `(2, 0)` pattern: three vectors from `â_0`
/// with prescribed lengths and pairwise angles at least the model angles
/// exist iff those angles sum to at most `2π`.
pub fn alexandrov_quadruple_oracle<T: Scalar>(inst: &ComparisonInstance<T>) -> Result<bool> {
    Ok(match alexandrov_angle_sum(inst)? {
        None => true,
        Some(s) => s <= T::TAU() + T::lit(ORACLE_SLACK),
    })
}

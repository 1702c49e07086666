//! Dormand–Prince 5(4) embedded Runge–Kutta integration on fixed-size states.
//!
//! Two drivers share one tableau: an adaptive one with mixed absolute and
//! relative error control, and a fixed-step one whose output is a smooth
//! function of the initial data (needed when results get finite-differenced).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Right-hand side `y' = F(s, y)`.
pub trait OdeSystem<T: Scalar, const N: usize> {
    fn rhs(&self, s: T, y: &[T; N]) -> Result<[T; N]>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub atol: T,
    pub rtol: T,
}

impl<T: Scalar> Tolerance<T> {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Tolerance { atol: T::lit(atol), rtol: T::lit(rtol) }
    }
}

impl<T: Scalar> Default for Tolerance<T> {
    fn default() -> Self {
        Tolerance::new(1e-10, 1e-9)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step. Returns the 5th-order solution and the embedded
/// error vector.
fn step<T: Scalar, const N: usize, S: OdeSystem<T, N>>(
    sys: &S,
    s: T,
    y: &[T; N],
    k1: &[T; N],
    h: T,
) -> Result<([T; N], [T; N], [T; N])> {
    let mut k = [[T::zero(); N]; 7];
    k[0] = *k1;
    for stage in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                let a = T::lit(a) * h;
                for i in 0..N {
                    ys[i] += a * kj[i];
                }
            }
        }
        k[stage] = sys.rhs(s + T::lit(C[stage]) * h, &ys)?;
    }
    // Stage 7 is evaluated at the 5th-order solution (FSAL).
    let mut y5 = *y;
    let mut err = [T::zero(); N];
    for (j, kj) in k.iter().enumerate() {
        let b = T::lit(B[j]) * h;
        let e = T::lit(B[j] - B_LOW[j]) * h;
        for i in 0..N {
            y5[i] += b * kj[i];
            err[i] += e * kj[i];
        }
    }
    Ok((y5, err, k[6]))
}

/// Integrates from `s0` to `s1` with adaptive steps. The observer sees every
/// accepted `(s, y)` and may stop the integration early by returning `false`.
pub fn integrate_adaptive<T, const N: usize, S, O>(
    sys: &S,
    y0: [T; N],
    s0: T,
    s1: T,
    tol: Tolerance<T>,
    mut observer: O,
) -> Result<([T; N], Stats)>
where
    T: Scalar,
    S: OdeSystem<T, N>,
    O: FnMut(T, &[T; N]) -> bool,
{
    let mut stats = Stats::default();
    let span = s1 - s0;
    if span == T::zero() {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let min_step = span.abs() * T::lit(1e-12);
    let mut s = s0;
    let mut y = y0;
    let mut k1 = sys.rhs(s, &y)?;
    stats.rhs_evals += 1;
    // Initial guess from the 5th-order scaling rule, refined by control.
    let mut h = dir * (span.abs() * T::lit(0.01)).min(tol.rtol.max(tol.atol).powf(T::lit(0.2)) * T::lit(0.1));
    let mut last_err: Option<Error> = None;
    while (s1 - s) * dir > T::zero() {
        if (s + h - s1) * dir > T::zero() {
            h = s1 - s;
        }
        if h.abs() < min_step {
            return Err(last_err.unwrap_or(Error::StepUnderflow { s: s.to_f64_lossy() }));
        }
        match step(sys, s, &y, &k1, h) {
            Err(e) => {
                // A stage left the domain: shrink and retry until the step
                // underflows, which means the trajectory itself left.
                stats.rejected += 1;
                last_err = Some(e);
                h *= T::lit(0.25);
                continue;
            }
            Ok((y5, err, k7)) => {
                stats.rhs_evals += 6;
                let mut acc = T::zero();
                for i in 0..N {
                    let sc = tol.atol + tol.rtol * y[i].abs().max(y5[i].abs());
                    let r = err[i] / sc;
                    acc += r * r;
                }
                let en = (acc / T::of(N)).sqrt();
                if en <= T::one() {
                    s += h;
                    y = y5;
                    k1 = k7;
                    stats.accepted += 1;
                    last_err = None;
                    if !observer(s, &y) {
                        return Ok((y, stats));
                    }
                    let fac = if en == T::zero() {
                        T::lit(5.0)
                    } else {
                        (T::lit(0.9) * en.powf(T::lit(-0.2))).clamp_to(T::lit(0.2), T::lit(5.0))
                    };
                    h *= fac;
                } else {
                    stats.rejected += 1;
                    let fac = (T::lit(0.9) * en.powf(T::lit(-0.2))).clamp_to(T::lit(0.1), T::one());
                    h *= fac;
                }
            }
        }
    }
    Ok((y, stats))
}

/// Integrates with `steps` equal steps. No error control; the result is a
/// smooth function of `y0`, `s0` and `s1`.
pub fn integrate_fixed<T, const N: usize, S>(sys: &S, y0: [T; N], s0: T, s1: T, steps: usize) -> Result<[T; N]>
where
    T: Scalar,
    S: OdeSystem<T, N>,
{
    let h = (s1 - s0) / T::of(steps.max(1));
    let mut y = y0;
    let mut s = s0;
    let mut k1 = sys.rhs(s, &y)?;
    for i in 0..steps.max(1) {
        let (y5, _, k7) = step(sys, s, &y, &k1, h)?;
        y = y5;
        k1 = k7;
        s = s0 + h * T::of(i + 1);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl OdeSystem<f64, 2> for Harmonic {
        fn rhs(&self, _s: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
            Ok([y[1], -y[0]])
        }
    }

    struct Walled;
    impl OdeSystem<f64, 1> for Walled {
        fn rhs(&self, _s: f64, y: &[f64; 1]) -> Result<[f64; 1]> {
            if y[0] > 1.0 {
                Err(Error::LeftDomain { t: y[0] })
            } else {
                Ok([1.0])
            }
        }
    }

    #[test]
    fn adaptive_harmonic_oscillator() {
        let tol = Tolerance::new(1e-12, 1e-12);
        let (y, stats) = integrate_adaptive(&Harmonic, [1.0, 0.0], 0.0, 10.0, tol, |_, _| true).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-10, "{}", y[0]);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn backwards_integration() {
        let (y, _) = integrate_adaptive(&Harmonic, [1.0, 0.0], 0.0, -2.0, Tolerance::default(), |_, _| true).unwrap();
        assert!((y[0] - 2f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn fixed_step_is_fifth_order() {
        let e = |n| (integrate_fixed(&Harmonic, [1.0, 0.0], 0.0, 1.0, n).unwrap()[0] - 1f64.cos()).abs();
        let ratio = e(10) / e(20);
        assert!(ratio > 25.0 && ratio < 45.0, "ratio {ratio}");
    }

    #[test]
    fn observer_stops_early() {
        let mut seen = 0;
        let (y, _) = integrate_adaptive(&Harmonic, [1.0, 0.0], 0.0, 10.0, Tolerance::default(), |s, _| {
            seen += 1;
            s < 1.0
        })
        .unwrap();
        assert!(seen >= 1);
        assert!(y[0] > 10f64.cos() - 1.0);
    }

    #[test]
    fn leaving_domain_is_an_error() {
        let r = integrate_adaptive(&Walled, [0.0], 0.0, 2.0, Tolerance::default(), |_, _| true);
        assert!(matches!(r, Err(Error::LeftDomain { .. })), "{r:?}");
    }
}

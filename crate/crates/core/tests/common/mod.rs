#![allow(dead_code)]

//! Independent oracles shared by the integration tests.

use bipolar_core::manifold::{ChartPoint, ManifoldSpec};
use bipolar_core::mtw::MtwProbe;

/// Truncated bivariate Taylor polynomial: `c[i][j]` multiplies `s^i t^j`,
/// `i, j ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [[f64; 3]; 3],
}

impl Jet {
    pub fn constant(a: f64) -> Self {
        let mut c = [[0.0; 3]; 3];
        c[0][0] = a;
        Jet { c }
    }

    /// `a + b·s`.
    pub fn in_s(a: f64, b: f64) -> Self {
        let mut j = Jet::constant(a);
        j.c[1][0] = b;
        j
    }

    /// `a + b·t`.
    pub fn in_t(a: f64, b: f64) -> Self {
        let mut j = Jet::constant(a);
        j.c[0][1] = b;
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let mut c = self.c;
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += o.c[i][j];
            }
        }
        Jet { c }
    }

    pub fn scale(&self, k: f64) -> Jet {
        let mut c = self.c;
        c.iter_mut().flatten().for_each(|x| *x *= k);
        Jet { c }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for a in 0..=i {
                    for b in 0..=j {
                        c[i][j] += self.c[a][b] * o.c[i - a][j - b];
                    }
                }
            }
        }
        Jet { c }
    }

    /// `f ∘ self` given `f^(m)(value)` for `m = 0..=4`. Every monomial of
    /// the truncated algebra has total degree at most 4, so four powers of
    /// the nilpotent part suffice.
    pub fn compose(&self, derivs: [f64; 5]) -> Jet {
        let mut delta = *self;
        delta.c[0][0] = 0.0;
        let mut out = Jet::constant(derivs[0]);
        let mut power = Jet::constant(1.0);
        let mut fact = 1.0;
        for (m, d) in derivs.iter().enumerate().skip(1) {
            power = power.mul(&delta);
            fact *= m as f64;
            out = out.add(&power.scale(d / fact));
        }
        out
    }

    /// `∂⁴/∂s²∂t²` at the origin.
    pub fn mixed_fourth(&self) -> f64 {
        4.0 * self.c[2][2]
    }
}

fn dot(a: &[Jet; 3], b: &[Jet; 3]) -> Jet {
    a[0].mul(&b[0]).add(&a[1].mul(&b[1])).add(&a[2].mul(&b[2]))
}

/// `m`-th derivative of a power series `Σ a_k u^k` at `u`.
fn series_derivative(coeff: impl Fn(usize) -> f64, m: usize, u: f64) -> f64 {
    let mut sum = 0.0;
    for k in m..80 {
        let mut falling = 1.0;
        for r in 0..m {
            falling *= (k - r) as f64;
        }
        sum += coeff(k) * falling * u.powi((k - m) as i32);
    }
    sum
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, b| a * b as f64)
}

/// `cos √u` and `sin √u / √u` as jets in `u`.
fn cos_sqrt(u: &Jet) -> Jet {
    let c = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 } / factorial(2 * k);
    let u0 = u.value();
    u.compose([0, 1, 2, 3, 4].map(|m| series_derivative(c, m, u0)))
}

fn sinc_sqrt(u: &Jet) -> Jet {
    let c = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 } / factorial(2 * k + 1);
    let u0 = u.value();
    u.compose([0, 1, 2, 3, 4].map(|m| series_derivative(c, m, u0)))
}

fn acos_jet(x: &Jet) -> Jet {
    let v = x.value();
    let w = 1.0 - v * v;
    let g0 = w.powf(-0.5);
    let g1 = v * w.powf(-1.5);
    let g2 = (1.0 + 2.0 * v * v) * w.powf(-2.5);
    let g3 = (9.0 * v + 6.0 * v * v * v) * w.powf(-3.5);
    x.compose([v.acos(), -g0, -g1, -g2, -g3])
}

/// Embedding of a sphere point and its coordinate basis, read in the
/// point's own chart. Both charts are rotations of one another, so the
/// distances seen by the oracle do not depend on the chart.
pub fn sphere_frame(r: f64, p: &ChartPoint<f64>) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let (phi, lam) = (p.coords[0], p.coords[1]);
    let pos = [r * phi.sin() * lam.cos(), r * phi.sin() * lam.sin(), r * phi.cos()];
    let d_phi = [r * phi.cos() * lam.cos(), r * phi.cos() * lam.sin(), -r * phi.sin()];
    let d_lam = [-r * phi.sin() * lam.sin(), r * phi.sin() * lam.cos(), 0.0];
    (pos, d_phi, d_lam)
}

fn embed(frame: &([f64; 3], [f64; 3], [f64; 3]), v: &[f64]) -> [f64; 3] {
    [0, 1, 2].map(|k| frame.1[k] * v[0] + frame.2[k] * v[1])
}

/// Exponential map of the round sphere on jets of tangent vectors.
fn sphere_exp(r: f64, pos: [f64; 3], v: [Jet; 3]) -> [Jet; 3] {
    let u = dot(&v, &v).scale(1.0 / (r * r));
    let c = cos_sqrt(&u);
    let s = sinc_sqrt(&u);
    [0, 1, 2].map(|k| c.scale(pos[k]).add(&s.mul(&v[k])))
}

/// Closed-form sphere geometry differentiated exactly:
/// `∂⁴/∂s²∂t² d²(exp_p(sX), exp_p(W + tY))` at the origin.
pub fn sphere_mtw_oracle(r: f64, probe: &MtwProbe<f64>) -> f64 {
    let frame = sphere_frame(r, &probe.p);
    let x = embed(&frame, &probe.x.components);
    let w = embed(&frame, &probe.w.components);
    let y = embed(&frame, &probe.y.components);
    let xs = sphere_exp(r, frame.0, [0, 1, 2].map(|k| Jet::in_s(0.0, x[k])));
    let yt = sphere_exp(r, frame.0, [0, 1, 2].map(|k| Jet::in_t(w[k], y[k])));
    let cosine = dot(&xs, &yt).scale(1.0 / (r * r));
    let angle = acos_jet(&cosine);
    angle.mul(&angle).scale(r * r).mixed_fourth()
}

/// Brioschi formula for `dt² + G dθ²` with `E = 1`: `K = −(√G)_tt / √G`,
/// the second derivative taken by central differences of the metric.
pub fn brioschi_curvature(m: &ManifoldSpec<f64>, t: f64, h: f64) -> f64 {
    let root_g = |t: f64| m.metric_tensor(&ChartPoint::new(vec![t, 0.0])).unwrap()[1][1].sqrt();
    let (a, b, c) = (root_g(t - h), root_g(t), root_g(t + h));
    -(a - 2.0 * b + c) / (h * h) / b
}

use super::{ChartPoint, GeodesicSolution, PATH_SAMPLES};
use crate::scalar::{self, Scalar};

pub(super) fn exp<T: Scalar>(p: &ChartPoint<T>, v: &[T]) -> ChartPoint<T> {
    ChartPoint::new(p.coords.iter().zip(v).map(|(&a, &b)| a + b).collect())
}

pub(super) fn log<T: Scalar>(p: &ChartPoint<T>, q: &ChartPoint<T>) -> Vec<T> {
    q.coords.iter().zip(&p.coords).map(|(&a, &b)| a - b).collect()
}

pub(super) fn distance<T: Scalar>(p: &ChartPoint<T>, q: &ChartPoint<T>) -> (T, GeodesicSolution<T>) {
    let delta = log(p, q);
    let d = scalar::norm(&delta);
    let direction: Vec<T> = if d > T::zero() {
        delta.iter().map(|&x| x / d).collect()
    } else {
        let mut e = vec![T::zero(); delta.len()];
        e[0] = T::one();
        e
    };
    let path = (0..=PATH_SAMPLES)
        .map(|i| {
            let s = d * T::of(i) / T::of(PATH_SAMPLES);
            let pt = p.coords.iter().zip(&direction).map(|(&a, &u)| a + u * s).collect();
            (s, ChartPoint::new(pt))
        })
        .collect();
    let sol = GeodesicSolution {
        start: p.clone(),
        direction,
        length: d,
        path,
        minimizing: true,
        ambiguous: false,
    };
    (d, sol)
}

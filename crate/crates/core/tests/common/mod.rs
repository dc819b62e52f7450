//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use fockdens::{Point, PointSequence};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Minimal-norm interpolant in the Fock space of φ = |z|² at `nodes`, by dense
/// collocation with the reproducing kernel e^{2zw̄}. Takes and returns scaled
/// values v·e^{−|λ|²} and gives back a closure for f(z)e^{−|z|²}.
pub fn collocation_oracle(nodes: &[Point], scaled_values: &[Point]) -> impl Fn(Point) -> Point {
    let n = nodes.len();
    // normalised Gram matrix e^{2λ_i λ̄_j − |λ_i|² − |λ_j|²}
    let g = DMatrix::from_fn(n, n, |i, j| (2.0 * nodes[i] * nodes[j].conj() - nodes[i].norm_sqr() - nodes[j].norm_sqr()).exp());
    let b = DVector::from_iterator(n, scaled_values.iter().copied());
    let c = g.svd(true, true).solve(&b, 1e-14).expect("oracle solve");
    let nodes = nodes.to_vec();
    move |z: Point| (0..n).map(|j| c[j] * (2.0 * z * nodes[j].conj() - z.norm_sqr() - nodes[j].norm_sqr()).exp()).sum()
}

/// Standard complex normal draws.
pub fn complex_normals<R: Rng>(rng: &mut R, n: usize) -> Vec<Point> {
    (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

/// Indices of the `k` points nearest to the origin (ties by index).
pub fn central(seq: &PointSequence, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..seq.len()).collect();
    idx.sort_by(|&a, &b| seq.points[a].norm().total_cmp(&seq.points[b].norm()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

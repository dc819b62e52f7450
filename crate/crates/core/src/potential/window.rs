//! Complex values of a multiplier on a disk, recovered from its log-modulus.
//!
//! Zeros inside a slightly larger disk are factored out; what is left is a
//! harmonic function whose boundary Fourier series gives its holomorphic
//! completion F. Then f = exp(F)·Π(z − λ).

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::MultiplierEval;
use crate::error::{Error, Result};
use crate::types::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOptions {
    /// Zeros within `outer` of the centre are factored out before sampling.
    pub outer: f64,
    /// Accept once the top quarter of the Fourier coefficients is below tol·scale.
    pub tol: f64,
    pub min_samples: usize,
    pub max_samples: usize,
}

impl WindowOptions {
    pub fn new(outer: f64) -> Self {
        WindowOptions { outer, tol: 1e-13, min_samples: 256, max_samples: 1 << 17 }
    }
}

/// Sample-grid offset, in units of the angular step; keeps samples off symmetric zeros.
const PHASE_OFFSET: f64 = 0.318_309_886;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyticWindow {
    pub center: Point,
    pub radius: f64,
    /// Zeros carried as explicit factors.
    pub zeros: Vec<Point>,
    /// F(z) = Σ c_n ((z − centre)/radius)^n.
    pub coeffs: Vec<Point>,
    pub samples: usize,
    /// Largest coefficient in the top quarter, relative to the sample scale.
    pub tail: f64,
}

impl AnalyticWindow {
    /// Reconstruct from a log-modulus field `log_abs` with the given zeros.
    pub fn build<F>(log_abs: F, zeros: &[Point], center: Point, radius: f64, opts: WindowOptions) -> Result<Self>
    where
        F: Fn(Point) -> Result<f64> + Sync,
    {
        if !(radius > 0.0) || !(opts.outer >= radius) {
            return Err(Error::domain("window needs 0 < radius ≤ outer"));
        }
        let zs: Vec<Point> = zeros.iter().copied().filter(|z| (z - center).norm() < opts.outer).collect();
        let mut n = opts.min_samples.next_power_of_two().max(8);
        let mut planner = FftPlanner::<f64>::new();
        loop {
            let step = 2.0 * PI / n as f64;
            let u: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let z = center + Point::from_polar(radius, (k as f64 + PHASE_OFFSET) * step);
                    let mut v = log_abs(z)?;
                    for l in &zs {
                        v -= (z - l).norm().ln();
                    }
                    Ok(v)
                })
                .collect::<Result<_>>()?;
            let scale = u.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical("window boundary samples", f64::NAN));
            }
            let mut buf: Vec<Point> = u.iter().map(|&v| Point::new(v, 0.0)).collect();
            planner.plan_fft_forward(n).process(&mut buf);
            let half = n / 2;
            let coeffs: Vec<Point> = (0..half)
                .map(|j| {
                    let c = buf[j] * Point::from_polar(1.0 / n as f64, -(j as f64) * PHASE_OFFSET * step);
                    if j == 0 {
                        Point::new(c.re, 0.0)
                    } else {
                        2.0 * c
                    }
                })
                .collect();
            let tail = coeffs[3 * half / 4..].iter().map(|c| c.norm()).fold(0.0, f64::max) / scale;
            if tail <= opts.tol {
                // drop trailing coefficients that cannot matter on the closed disk
                let keep = coeffs.iter().rposition(|c| c.norm() > 1e-18 * scale).map(|i| i + 1).unwrap_or(1);
                let mut coeffs = coeffs;
                coeffs.truncate(keep);
                return Ok(AnalyticWindow { center, radius, zeros: zs, coeffs, samples: n, tail });
            }
            if n >= opts.max_samples {
                return Err(Error::numerical("window Fourier tail", tail));
            }
            n *= 2;
        }
    }

    /// Window for the multiplier `ev`; factors out zeros within three local ρ of the circle.
    pub fn from_multiplier(ev: &MultiplierEval, center: Point, radius: f64) -> Result<Self> {
        let region = ev.region();
        if !region.contains_disk(center, radius) {
            return Err(Error::domain(format!("window disk ({}, {}; {radius}) leaves the source region", center.re, center.im)));
        }
        let mut rho_max = ev.model().rho(center)?;
        for k in 0..8 {
            let z = center + Point::from_polar(radius, PI * k as f64 / 4.0);
            rho_max = rho_max.max(ev.model().rho(z)?);
        }
        let opts = WindowOptions::new(radius + 3.0 * rho_max);
        Self::build(|z| ev.log_multiplier(z), &ev.zeros().points, center, radius, opts)
    }

    pub fn contains(&self, z: Point) -> bool {
        (z - self.center).norm() <= self.radius * (1.0 + 1e-12)
    }

    fn check(&self, z: Point) -> Result<Point> {
        let w = (z - self.center) / self.radius;
        if w.norm() > 1.0 + 1e-9 {
            return Err(Error::domain(format!("point ({}, {}) outside analytic window", z.re, z.im)));
        }
        Ok(w)
    }

    /// The holomorphic part F(z).
    pub fn exponent(&self, z: Point) -> Result<Point> {
        let w = self.check(z)?;
        Ok(self.coeffs.iter().rev().fold(Point::new(0.0, 0.0), |acc, c| acc * w + c))
    }

    /// A logarithm of f(z); real part −∞ on a zero.
    pub fn log_eval(&self, z: Point) -> Result<Point> {
        self.log_eval_skip(z, &[])
    }

    /// A logarithm of f(z)/Π_{i∈skip}(z − zeros[i]).
    pub fn log_eval_skip(&self, z: Point, skip: &[usize]) -> Result<Point> {
        let mut s = self.exponent(z)?;
        for (i, l) in self.zeros.iter().enumerate() {
            if !skip.contains(&i) {
                s += (z - l).ln();
            }
        }
        Ok(s)
    }

    pub fn eval(&self, z: Point) -> Result<Point> {
        Ok(self.log_eval(z)?.exp())
    }

    /// Index of the zero at λ.
    pub fn zero_index(&self, lambda: Point) -> Option<usize> {
        self.zeros.iter().position(|z| (z - lambda).norm() <= 1e-12 * self.radius)
    }

    /// A logarithm of f′(λ) by the Cauchy integral of f/(z − λ)² on a circle of
    /// radius min(`radius`, half the gap to the next zero).
    pub fn log_derivative_at_zero(&self, lambda: Point, radius: f64) -> Result<Point> {
        let i = self.zero_index(lambda).ok_or_else(|| Error::domain(format!("({}, {}) is not a zero of the window", lambda.re, lambda.im)))?;
        let gap = self.zeros.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, z)| (z - lambda).norm()).fold(f64::INFINITY, f64::min);
        if gap <= 1e-9 * radius {
            return Err(Error::domain("non-simple zero: two zeros inside the derivative circle"));
        }
        let r = radius.min(0.5 * gap);
        const K: usize = 64;
        let logs: Vec<(Point, Point)> = (0..K)
            .map(|k| {
                let e = Point::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / K as f64);
                self.log_eval(lambda + r * e).map(|l| (l, e))
            })
            .collect::<Result<_>>()?;
        let top = logs.iter().map(|(l, _)| l.re).fold(f64::NEG_INFINITY, f64::max);
        let s: Point = logs.iter().map(|(l, e)| (l - top).exp() / (r * e)).sum::<Point>() / K as f64;
        Ok(s.ln() + top)
    }

    pub fn derivative_at_zero(&self, lambda: Point, radius: f64) -> Result<Point> {
        Ok(self.log_derivative_at_zero(lambda, radius)?.exp())
    }

    /// log f′(λ) = F(λ) + Σ_{λ′≠λ} log(λ − λ′), from the product form.
    pub fn log_derivative_closed(&self, lambda: Point) -> Result<Point> {
        let i = self.zero_index(lambda).ok_or_else(|| Error::domain("not a zero of the window"))?;
        self.log_eval_skip(lambda, &[i])
    }

    /// Largest |∂̄ log f| / |∂ log f| by central differences of step h over `probes`.
    pub fn cauchy_riemann_residual(&self, probes: &[Point], h: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &z in probes {
            // differences of f(z + d)/f(z) avoid the branch cuts of the logarithm
            let l0 = self.log_eval(z)?;
            let f = |d: Point| self.log_eval(z + d).map(|l| (l - l0).exp());
            let fx = (f(Point::new(h, 0.0))? - f(Point::new(-h, 0.0))?) / (2.0 * h);
            let fy = (f(Point::new(0.0, h))? - f(Point::new(0.0, -h))?) / (2.0 * h);
            let dbar = 0.5 * (fx + Point::i() * fy);
            let d = 0.5 * (fx - Point::i() * fy);
            worst = worst.max(dbar.norm() / d.norm().max(1e-300));
        }
        Ok(worst)
    }
}

//! Two-sided bounds for sup{|f(z)| : ‖f‖_{F^p} ≤ 1}, as multiples of e^{φ(z)}/ω(z).
//!
//! Upper: h = Poisson extension of φ from ∂D(z, rρ(z)) lies above φ inside,
//! so |f(z)|^p e^{−pφ(z)} ≤ e^{p(h(z) − φ(z))} avg_D |f|^p e^{−pφ}. Lower: the
//! normalized peak at z.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Exponent;
use crate::error::{Error, Result};
use crate::potential::{build_peak_with, PeakOptions};
use crate::types::{Point, Rect};
use crate::weights::{FlatWeight, WeightModel};

/// Radii of the mean-value disks, in units of ρ(z).
const RADII: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];
const PEAK_DECAY: usize = 4;
/// Peak norm quadrature reaches this many ρ(z).
const PEAK_REACH: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub z: Point,
    pub p: Exponent,
    pub lower: f64,
    pub upper: f64,
    /// Mean-value radius (units of ρ(z)) attaining the upper bound.
    pub radius: f64,
    /// φ(z) − log ω(z); absolute bounds are the multiples times its exp.
    pub log_scale: f64,
    /// ‖P_z‖ over the quadrature disk.
    pub peak_norm: f64,
    /// Largest weighted |P_z| on the outer tenth of that disk, relative to P_z(z).
    pub peak_tail: f64,
}

impl GrowthBounds {
    /// (lower, upper) for sup |f(z)| itself.
    pub fn absolute(&self) -> (f64, f64) {
        let s = self.log_scale.exp();
        (self.lower * s, self.upper * s)
    }
}

pub fn extremal_growth(model: &WeightModel, omega: &FlatWeight, p: Exponent, z: Point) -> Result<GrowthBounds> {
    let rho = model.rho(z)?;
    let w_z = omega.eval_with_rho(model, z, rho)?;
    let phi_z = model.phi(z);
    let (upper, radius) = if p.is_inf() {
        (1.0, 0.0)
    } else {
        let mut best = (f64::INFINITY, RADII[0]);
        for r in RADII {
            let u = mean_value_constant(model, omega, p.0, z, r * rho, rho, w_z)?;
            if u < best.0 {
                best = (u, r);
            }
        }
        best
    };

    let reach = PEAK_REACH * rho;
    let opts = PeakOptions { margin: 16.0, ..PeakOptions::new(reach) };
    let peak = build_peak_with(model, omega, z, 1.0, PEAK_DECAY, opts)?;
    let step = 0.25 * rho;
    let inner = 0.95 * reach;
    let k = (inner / step).ceil() as usize;
    let pts: Vec<Point> = Rect::centered(z, k as f64 * step, k as f64 * step)
        .grid(2 * k + 1, 2 * k + 1)
        .into_iter()
        .filter(|q| (q - z).norm() <= inner)
        .collect();
    // |P|e^{−φ}ω relative to its value at z, with the cell factor for finite p
    let vals: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&q| {
            let r = model.rho(q)?;
            let lp = match peak.log_abs(q) {
                Ok(v) => v,
                Err(Error::Pole { .. }) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            let v = (lp - model.phi(q) + phi_z).exp() * omega.eval_with_rho(model, q, r)? / w_z;
            let cell = if p.is_inf() { 1.0 } else { (step * step / (r * r)).powf(1.0 / p.0) };
            Ok((v * cell, v))
        })
        .collect::<Result<_>>()?;
    let rel_norm = p.norm(vals.iter().map(|v| v.0));
    let peak_tail = pts.iter().zip(&vals).filter(|(q, _)| (*q - z).norm() > 0.9 * inner).map(|(_, v)| v.1).fold(0.0, f64::max);
    if !(rel_norm > 0.0) || !rel_norm.is_finite() {
        return Err(Error::numerical("peak norm", rel_norm));
    }
    // f = P/‖P‖ has |f(z)|ω(z)e^{−φ(z)} = ω(z)e^{−φ(z)}/‖P‖ = 1/rel_norm
    let lower = 1.0 / rel_norm;
    Ok(GrowthBounds {
        z,
        p,
        lower,
        upper,
        radius,
        log_scale: phi_z - w_z.ln(),
        peak_norm: rel_norm * w_z * (-phi_z).exp(),
        peak_tail,
    })
}

/// [e^{pA}/(π r²) sup_D (ρ(ζ)/ρ(z))² (ω(z)/ω(ζ))^p]^{1/p} on D = D(z, r), where
/// A is the circle mean of φ − φ(z).
fn mean_value_constant(model: &WeightModel, omega: &FlatWeight, p: f64, z: Point, r: f64, rho_z: f64, w_z: f64) -> Result<f64> {
    const NC: usize = 128;
    let phi_z = model.phi(z);
    let a = (0..NC).map(|k| model.phi(z + Point::from_polar(r, std::f64::consts::TAU * k as f64 / NC as f64)) - phi_z).sum::<f64>() / NC as f64;
    let mut sup: f64 = 1.0;
    for i in 1..=6 {
        let rr = r * i as f64 / 6.0;
        for k in 0..24 {
            let q = z + Point::from_polar(rr, std::f64::consts::TAU * (k as f64 + 0.5 * (i % 2) as f64) / 24.0);
            let rq = model.rho(q)?;
            let wq = omega.eval_with_rho(model, q, rq)?;
            sup = sup.max((rq / rho_z).powi(2) * (w_z / wq).powf(p));
        }
    }
    let area = std::f64::consts::PI * (r / rho_z).powi(2);
    Ok(((p * a).exp() / area * sup).powf(1.0 / p))
}

//! Empirical fits of the existential constants of doubling-measure geometry.
//!
//! Every fit returns the constant that makes the inequality hold on the
//! probe set supplied, so "no probe violation" holds by construction and the
//! interesting output is the size of the constant.

use super::metric::MetricField;
use crate::error::Result;
use crate::types::Point;
use crate::weights::{FlatWeight, WeightModel};
use serde::Serialize;

/// Exponent with its multiplicative constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub lower: f64,
    pub upper: f64,
    pub constant: f64,
}

/// Smallest γ with r/r′ ≥ (μ(D)/μ(D′))^γ for concentric probe disks D′ ⊂ D.
pub fn fit_disc_exponent(model: &WeightModel, probes: &[(Point, f64)]) -> Result<f64> {
    let mut gamma = f64::INFINITY;
    for &(z, r) in probes {
        let m1 = model.mass_disk(z, r)?;
        for k in [1.5, 2.0, 4.0, 8.0] {
            let m2 = model.mass_disk(z, k * r)?;
            if m2 > m1 && m1 > 0.0 {
                gamma = gamma.min((k as f64).ln() / (m2 / m1).ln());
            }
        }
    }
    Ok(gamma)
}

/// Exponents ε ≤ k with r^ε ≲ μ(D^r(z)) ≲ r^k for r ∈ `radii` (all > 1).
pub fn fit_growth_exponents(model: &WeightModel, centers: &[Point], radii: &[f64]) -> Result<GrowthFit> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut c: f64 = 1.0;
    for &z in centers {
        let rho = model.rho(z)?;
        let mut prev: Option<(f64, f64)> = None;
        for &r in radii {
            let m = model.mass_disk(z, r * rho)?;
            if let Some((r0, m0)) = prev {
                let slope = (m / m0).ln() / (r / r0).ln();
                lo = lo.min(slope);
                hi = hi.max(slope);
            }
            prev = Some((r, m));
        }
    }
    // constant absorbing the offset at the smallest radius
    for &z in centers {
        let rho = model.rho(z)?;
        for &r in radii {
            let m = model.mass_disk(z, r * rho)?;
            c = c.max(r.powf(lo) / m).max(m / r.powf(hi));
        }
    }
    Ok(GrowthFit { lower: lo, upper: hi, constant: c })
}

/// ρ(ζ)/ρ(z) ≤ C (|z − ζ|/ρ(ζ))^{1−δ} for ζ ∉ D(z, ρ(z)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChristFit {
    pub c: f64,
    pub delta: f64,
}

pub fn fit_christ(model: &WeightModel, pairs: &[(Point, Point)], c_cap: f64) -> Result<ChristFit> {
    let mut data = Vec::new();
    for &(z, w) in pairs {
        let (rz, rw) = (model.rho(z)?, model.rho(w)?);
        let d = (z - w).norm();
        if d >= rz {
            data.push((rw / rz, d / rw));
        }
    }
    let c_of = |delta: f64| data.iter().map(|&(ratio, q)| ratio / q.powf(1.0 - delta)).fold(0.0, f64::max).max(1.0);
    let mut best = ChristFit { c: c_of(0.0), delta: 0.0 };
    for k in 1..100 {
        let delta = k as f64 / 100.0;
        let c = c_of(delta);
        if c <= c_cap {
            best = ChristFit { c, delta };
        }
    }
    Ok(best)
}

/// Constants of the two-sided distance sandwich.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceConstants {
    pub c_near: f64,
    pub c_far: f64,
    pub delta: f64,
    pub r: f64,
}

pub fn fit_distance_constants(metric: &MetricField, pairs: &[(Point, Point)], r: f64) -> Result<DistanceConstants> {
    let mut near: f64 = 1.0;
    let mut far = Vec::new();
    for &(z, w) in pairs {
        let q = (z - w).norm() / metric.rho(z);
        if q == 0.0 {
            continue;
        }
        let d = metric.d_phi(z, w)?;
        if q <= r {
            near = near.max(d / q).max(q / d);
        } else {
            far.push((q, d));
        }
    }
    let c_of = |delta: f64| far.iter().map(|&(q, d)| (q.powf(delta) / d).max(d / q.powf(2.0 - delta))).fold(1.0, f64::max);
    let (mut delta, mut c_far) = (0.5, c_of(0.5));
    for k in 1..100 {
        let dl = k as f64 / 100.0;
        let c = c_of(dl);
        if c < c_far {
            delta = dl;
            c_far = c;
        }
    }
    Ok(DistanceConstants { c_near: near, c_far, delta, r })
}

/// (C₁, C₂) with |log ω(z) − log ω(ζ)| ≤ C₁(1 + log⁺ d) on all pairs and
/// |1 − ω(z)/ω(ζ)| ≤ C₂ d on pairs with d ≤ 1.
pub fn fit_flat_weight(metric: &MetricField, omega: &FlatWeight, pairs: &[(Point, Point)]) -> Result<(f64, f64)> {
    let model = metric.model();
    let (mut c1, mut c2): (f64, f64) = (0.0, 0.0);
    for &(z, w) in pairs {
        let d = metric.d_phi(z, w)?;
        let (oz, ow) = (omega.eval(model, z)?, omega.eval(model, w)?);
        c1 = c1.max((oz.ln() - ow.ln()).abs() / (1.0 + d.ln().max(0.0)));
        if d <= 1.0 && d > 0.0 {
            c2 = c2.max((1.0 - oz / ow).abs() / d);
        }
    }
    Ok((c1, c2))
}

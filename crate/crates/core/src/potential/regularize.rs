//! Smooth replacement ψ of φ with Δψ comparable to Δφ at every point.
//!
//! Each cell's measure is traded for radial bumps centred at moment-matched
//! points; ψ − φ is then a sum of cell potentials with cancelling moments.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MultiplierEval, SourceCell};
use crate::discretize::build_net_with;
use crate::error::Result;
use crate::geometry::MetricField;
use crate::types::{Point, Rect};
use crate::weights::WeightModel;

/// Bump radius in units of the cell diameter.
const BUMP_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularizeCertificate {
    pub sup_psi_minus_phi: f64,
    /// min and max of Δψ/Δφ on the probes.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// min and max of Δψ·ρ_φ².
    pub scaled_min: f64,
    pub scaled_max: f64,
    /// Largest |∫ν̃_p − μ(R_p)| / μ(R_p).
    pub mass_error: f64,
    pub probes: usize,
}

#[derive(Debug, Clone)]
pub struct Regularized {
    pub ev: MultiplierEval,
    pub certificate: RegularizeCertificate,
}

impl Regularized {
    pub fn psi(&self, z: Point) -> Result<f64> {
        self.ev.log_multiplier(z)
    }

    /// Δψ(z) = Σ (bump mass)·(3/πs²)(1 − t²/s²)².
    pub fn laplacian(&self, z: Point) -> f64 {
        self.ev
            .cells()
            .iter()
            .map(|c| {
                let s = c.smoothing;
                let w = c.weight * 2.0 * PI;
                c.atoms
                    .iter()
                    .map(|a| {
                        let t = (z - a).norm();
                        if t >= s {
                            0.0
                        } else {
                            let u = 1.0 - t * t / (s * s);
                            w * 3.0 / (PI * s * s) * u * u
                        }
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Regularise φ on `region`: cells of mass 2πmn, n moment-matched points per
/// cell (each split in m), every point smeared into a bump.
pub fn smooth_regularize(model: &WeightModel, region: Rect, m: usize, n: usize, probes: &[Point]) -> Result<Regularized> {
    let metric = MetricField::build(model, region, 4.0)?;
    let net = build_net_with(model, &metric, region, m, n)?;
    let cells: Vec<SourceCell> = net
        .clusters
        .iter()
        .map(|c| SourceCell { cell: c.cell, atoms: c.final_points.clone(), weight: c.cell.mass / (2.0 * PI * c.final_points.len() as f64), smoothing: BUMP_FACTOR * c.cell.diam() })
        .collect();
    let mass_error = cells.iter().map(|c| (c.weight * 2.0 * PI * c.atoms.len() as f64 - c.cell.mass).abs() / c.cell.mass).fold(0.0, f64::max);
    let ev = MultiplierEval::new(model, cells)?;
    let mut reg = Regularized {
        ev,
        certificate: RegularizeCertificate {
            sup_psi_minus_phi: 0.0,
            ratio_min: f64::INFINITY,
            ratio_max: 0.0,
            scaled_min: f64::INFINITY,
            scaled_max: 0.0,
            mass_error,
            probes: probes.len(),
        },
    };
    let rows: Vec<(f64, f64, f64)> = probes
        .par_iter()
        .map(|&z| {
            let d = reg.psi(z)? - model.phi(z);
            let lap = reg.laplacian(z);
            let rho = model.rho(z)?;
            Ok((d.abs(), lap / model.density(z), lap * rho * rho))
        })
        .collect::<Result<_>>()?;
    let c = &mut reg.certificate;
    for (d, r, s) in rows {
        c.sup_psi_minus_phi = c.sup_psi_minus_phi.max(d);
        c.ratio_min = c.ratio_min.min(r);
        c.ratio_max = c.ratio_max.max(r);
        c.scaled_min = c.scaled_min.min(s);
        c.scaled_max = c.scaled_max.max(s);
    }
    Ok(reg)
}

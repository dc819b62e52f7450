//! Logarithmic potentials of cell-balanced charges.
//!
//! Every source cell carries a measure (its slice of μ/2π) and a handful of
//! atoms with matching low moments. The potential of each cell is evaluated
//! exactly near the query and by a multipole series far away; the sum plus φ
//! is log|g| for the multiplier g whose zeros are the atoms.

mod family;
mod peak;
mod regularize;
mod window;

pub use family::{FamilyPeak, PeakFamily};
pub use peak::{build_peak, build_peak_with, PeakEnvelope, PeakFunction, PeakOptions};
pub use regularize::{smooth_regularize, RegularizeCertificate, Regularized};
pub use window::{AnalyticWindow, WindowOptions};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::Net;
use crate::error::{Error, Result};
use crate::geometry::{MetricField, PointSequence, Provenance};
use crate::partition::QuasiSquare;
use crate::quad;
use crate::types::{Point, Rect};
use crate::weights::WeightModel;

/// Near/far switch in units of ρ at the cell centre.
pub const DEFAULT_CUTOFF: f64 = 8.0;
/// Multipole terms kept for far cells.
pub const DEFAULT_FAR_ORDER: usize = 16;
/// Far cells must sit at least this many support radii away.
const NEAR_SAFETY: f64 = 2.5;
/// Queries closer than this many ρ to a point charge are poles.
pub const POLE_TOL: f64 = 1e-9;
const NEAR_GAUSS: usize = 12;

/// One cell of sources: the measure on `cell` (with weight −1/2π) and atoms of charge `weight`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceCell {
    pub cell: QuasiSquare,
    pub atoms: Vec<Point>,
    pub weight: f64,
    /// Radius of the radial bump replacing each atom; 0 for point charges.
    #[serde(default)]
    pub smoothing: f64,
}

#[derive(Debug, Clone)]
struct Prepared {
    center: Point,
    rect: Rect,
    /// Support radius about `center`.
    radius: f64,
    reach: f64,
    /// Total variation of the net charge.
    tv: f64,
    /// ∫(ζ − c)^l dσ for the net charge σ, l = 0..=P.
    moments: Vec<Point>,
    /// Gauss nodes of μ/2π (empty for constant densities).
    nodes: Vec<(Point, f64)>,
    /// The density is not smooth on or next to the cell.
    singular: bool,
    mass: f64,
    rho: f64,
}

/// Value of log|g| together with the bound on the multipole truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub tail: f64,
}

/// Evaluator for φ + Σ_p U_p, the log-modulus of a multiplier built from cells.
#[derive(Debug, Clone)]
pub struct MultiplierEval {
    model: WeightModel,
    cells: Vec<SourceCell>,
    prepared: Vec<Prepared>,
    zeros: PointSequence,
    /// Atom index → cell index.
    owner: Vec<usize>,
    pub cutoff: f64,
    pub far_order: usize,
    constant_density: Option<f64>,
    point_charges: bool,
    region: Rect,
}

impl MultiplierEval {
    pub fn new(model: &WeightModel, cells: Vec<SourceCell>) -> Result<Self> {
        Self::with_options(model, cells, DEFAULT_CUTOFF, DEFAULT_FAR_ORDER)
    }

    pub fn with_options(model: &WeightModel, cells: Vec<SourceCell>, cutoff: f64, far_order: usize) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::domain("no source cells"));
        }
        if !(cutoff > 0.0) || far_order == 0 {
            return Err(Error::domain("cutoff and far-field order must be positive"));
        }
        let constant_density = model.constant_density();
        let singular_point = singular_point(model);
        let prepared: Vec<Prepared> = cells.par_iter().map(|c| prepare(model, c, far_order, cutoff, constant_density, singular_point)).collect::<Result<_>>()?;
        let mut pts = Vec::new();
        let mut owner = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            for &a in &c.atoms {
                pts.push(a);
                owner.push(i);
            }
        }
        let zeros = PointSequence::new(pts, Provenance::User);
        let region = cells.iter().skip(1).fold(cells[0].cell.rect(), |r, c| {
            let q = c.cell.rect();
            Rect::new(r.x0.min(q.x0), r.y0.min(q.y0), r.x1.max(q.x1), r.y1.max(q.y1))
        });
        let point_charges = cells.iter().all(|c| c.smoothing == 0.0);
        Ok(MultiplierEval { model: model.clone(), cells, prepared, zeros, owner, cutoff, far_order, constant_density, point_charges, region })
    }

    /// Multiplier whose zeros are the points of `net` (unit charges).
    pub fn from_net(model: &WeightModel, net: &Net) -> Result<Self> {
        let cells = net.clusters.iter().map(|c| SourceCell { cell: c.cell, atoms: c.final_points.clone(), weight: 1.0, smoothing: 0.0 }).collect();
        Self::new(model, cells)
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    pub fn cells(&self) -> &[SourceCell] {
        &self.cells
    }

    /// All atoms, in cell order.
    pub fn zeros(&self) -> &PointSequence {
        &self.zeros
    }

    /// Bounding rectangle of the source cells.
    pub fn region(&self) -> Rect {
        self.region
    }

    /// Same sources, different near/far cutoff.
    pub fn with_cutoff(&self, cutoff: f64) -> Result<Self> {
        Self::with_options(&self.model, self.cells.clone(), cutoff, self.far_order)
    }

    /// ρ at the centre of the cell owning the atom nearest to z.
    fn local_rho(&self, atom: usize) -> f64 {
        self.prepared[self.owner[atom]].rho
    }

    /// log|g(z)| with its truncation bound.
    pub fn eval(&self, z: Point) -> Result<PotentialValue> {
        if self.point_charges {
            if let Some((i, d)) = self.zeros.nearest(z) {
                if d < POLE_TOL * self.local_rho(i) {
                    let p = self.zeros.points[i];
                    return Err(Error::Pole { x: p.re, y: p.im, distance: d });
                }
            }
        }
        let mut value = self.model.phi(z);
        let mut tail = 0.0;
        for (p, c) in self.prepared.iter().zip(&self.cells) {
            let w = z - p.center;
            let d = w.norm();
            if d < p.reach {
                value += self.near(p, c, z)?;
            } else {
                value += multipole(&p.moments, w);
                let q = p.radius / d;
                tail += p.tv * q.powi(self.far_order as i32 + 1) / ((self.far_order + 1) as f64 * (1.0 - q));
            }
        }
        Ok(PotentialValue { value, tail })
    }

    /// log|g(z)|; a query on a zero returns [`Error::Pole`].
    pub fn log_multiplier(&self, z: Point) -> Result<f64> {
        self.eval(z).map(|v| v.value)
    }

    /// Exact contribution of one cell.
    fn near(&self, p: &Prepared, c: &SourceCell, z: Point) -> Result<f64> {
        let mut s = 0.0;
        for &a in &c.atoms {
            s += bump_log((z - a).norm(), c.smoothing);
        }
        s *= c.weight;
        Ok(s - self.cell_log_integral(p, z)? / (2.0 * PI))
    }

    /// ∫_cell log|z − ζ| dμ(ζ).
    fn cell_log_integral(&self, p: &Prepared, z: Point) -> Result<f64> {
        if let Some(d) = self.constant_density {
            return Ok(d * quad::log_integral_rect(&p.rect, z));
        }
        let diam = p.rect.diam();
        if !p.singular && p.rect.dist(z) > 0.5 * diam {
            // nodes carry μ/2π weights
            return Ok(2.0 * PI * p.nodes.iter().map(|(q, w)| w * (z - q).norm().ln()).sum::<f64>());
        }
        let mut total = 0.0;
        for piece in self.model.smooth_pieces(&p.rect) {
            for sub in crate::weights::split_at_point(&piece, z) {
                let scale = p.mass.max(1e-300);
                let est = quad::adaptive_rect(
                    |x, y| {
                        let zeta = Point::new(x, y);
                        let r = (z - zeta).norm();
                        if r == 0.0 {
                            0.0
                        } else {
                            r.ln() * self.model.density(zeta)
                        }
                    },
                    &sub,
                    1e-13 * scale,
                    1e-11,
                )?;
                total += est.value;
            }
        }
        Ok(total)
    }

    /// Cell-by-cell residuals |M_l| / (mass/2π · radius^l) of the net charge for l < m.
    pub fn moment_residuals(&self, m: usize) -> Vec<f64> {
        self.prepared
            .iter()
            .map(|p| {
                let scale = p.mass / (2.0 * PI);
                (0..m.min(p.moments.len())).map(|l| p.moments[l].norm() / (scale * p.radius.powi(l as i32))).fold(0.0, f64::max)
            })
            .collect()
    }

    /// Potential of cell `i` alone at z (exact, no multipole).
    pub fn cell_potential(&self, i: usize, z: Point) -> Result<f64> {
        self.near(&self.prepared[i], &self.cells[i], z)
    }

    /// Centre of cell `i`.
    pub fn cell_center(&self, i: usize) -> Point {
        self.prepared[i].center
    }

    /// Direct sum of every cell's exact potential; slow, used as an oracle.
    pub fn log_multiplier_direct(&self, z: Point) -> Result<f64> {
        let mut v = self.model.phi(z);
        for (p, c) in self.prepared.iter().zip(&self.cells) {
            v += self.near(p, c, z)?;
        }
        Ok(v)
    }
}

/// Re[M₀ log w − Σ_{l≥1} M_l/(l w^l)].
fn multipole(m: &[Point], w: Point) -> f64 {
    let inv = w.inv();
    let mut pw = inv;
    let mut s = Point::new(0.0, 0.0);
    for (l, ml) in m.iter().enumerate().skip(1) {
        s += ml * pw / l as f64;
        pw *= inv;
    }
    m[0].re * w.norm().ln() - s.re
}

/// Potential of a unit radial bump (3/πs²)(1 − r²/s²)² at distance t; log t outside.
pub fn bump_log(t: f64, s: f64) -> f64 {
    if t >= s {
        return t.ln();
    }
    let a = (t / s) * (t / s);
    s.ln() - 0.5 * (11.0 / 6.0 - 3.0 * a + 1.5 * a * a - a * a * a / 3.0)
}

fn singular_point(model: &WeightModel) -> Option<Point> {
    let (beta, _, center) = model.radial_params()?;
    let e = (beta - 2.0) / 2.0;
    if e >= 0.0 && (e - e.round()).abs() < 1e-12 {
        None
    } else {
        Some(center)
    }
}

fn prepare(model: &WeightModel, c: &SourceCell, order: usize, cutoff: f64, constant: Option<f64>, singular_point: Option<Point>) -> Result<Prepared> {
    let rect = c.cell.rect();
    let center = c.cell.center();
    let mu = model.moments_rect(&rect, center, order)?;
    let mass = mu[0].re;
    let mut moments: Vec<Point> = mu.iter().map(|m| -m / (2.0 * PI)).collect();
    for &a in &c.atoms {
        let w = a - center;
        let mut pw = Point::new(c.weight, 0.0);
        for m in moments.iter_mut() {
            *m += pw;
            pw *= w;
        }
    }
    let mut radius = 0.5 * rect.diam();
    for &a in &c.atoms {
        radius = radius.max((a - center).norm() + c.smoothing);
    }
    let tv = mass / (2.0 * PI) + c.weight.abs() * c.atoms.len() as f64;
    let rho = model.rho(center)?;
    let diam = rect.diam();
    let singular = singular_point.map(|s| rect.dist(s) < 0.25 * diam).unwrap_or(false);
    let nodes = if constant.is_some() || singular { Vec::new() } else { gauss_nodes(model, &rect) };
    Ok(Prepared { center, rect, radius, reach: (cutoff * rho).max(NEAR_SAFETY * radius), tv, moments, nodes, singular, mass, rho })
}

/// Tensor Gauss nodes of μ/2π, more nodes along the long side.
fn gauss_nodes(model: &WeightModel, rect: &Rect) -> Vec<(Point, f64)> {
    let (w, h) = (rect.width(), rect.height());
    let nx = ((NEAR_GAUSS as f64 * (w / h).max(1.0)).round() as usize).min(64);
    let ny = ((NEAR_GAUSS as f64 * (h / w).max(1.0)).round() as usize).min(64);
    let (gx, wx) = quad::gl_cached(nx);
    let (gy, wy) = quad::gl_cached(ny);
    let c = rect.center();
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let z = Point::new(c.re + 0.5 * w * gx[i], c.im + 0.5 * h * gy[j]);
            out.push((z, wx[i] * wy[j] * 0.25 * w * h * model.density(z) / (2.0 * PI)));
        }
    }
    out
}

/// Summary of the multiplier certificate over a probe set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectReport {
    /// sup |log|g| − φ − log d_φ(·, Z(g))|.
    pub sup: f64,
    pub worst: Point,
    /// Largest truncation bound seen.
    pub max_tail: f64,
    pub probes_used: usize,
    pub probes_skipped: usize,
}

/// |log|g| − φ − log d_φ(·, Λ)| and the truncation bound at each probe; `None` on a zero.
pub fn multiplier_defects(ev: &MultiplierEval, metric: &MetricField, probes: &[Point]) -> Result<Vec<Option<(f64, f64)>>> {
    let dist = metric.distance_to_set(ev.zeros(), probes)?;
    probes
        .par_iter()
        .zip(dist.par_iter())
        .map(|(&z, &d)| match ev.eval(z) {
            Ok(v) => Ok(Some(((v.value - ev.model.phi(z) - d.ln()).abs(), v.tail))),
            Err(Error::Pole { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Certificate that g is a multiplier: sup over probes of |log|g| − φ − log d_φ(·, Λ)|.
pub fn multiplier_sup_defect(ev: &MultiplierEval, metric: &MetricField, probes: &[Point]) -> Result<DefectReport> {
    let rows = multiplier_defects(ev, metric, probes)?;
    let mut rep = DefectReport { sup: 0.0, worst: Point::new(f64::NAN, f64::NAN), max_tail: 0.0, probes_used: 0, probes_skipped: 0 };
    for (r, &z) in rows.into_iter().zip(probes) {
        match r {
            Some((def, tail)) => {
                rep.probes_used += 1;
                rep.max_tail = rep.max_tail.max(tail);
                if def > rep.sup || !def.is_finite() {
                    rep.sup = def;
                    rep.worst = z;
                }
            }
            None => rep.probes_skipped += 1,
        }
    }
    Ok(rep)
}

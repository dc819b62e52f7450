//! Empirical two-sided sampling ratios ‖f|Λ‖_{ℓ^p} / ‖f‖_{F^p} over random
//! combinations of peak functions.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Exponent;
use crate::error::{Error, Result};
use crate::geometry::{MetricField, PointSequence};
use crate::potential::PeakFamily;
use crate::rng::{seeded, stream};
use crate::types::{Point, Rect};
use crate::weights::FlatWeight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub p: Exponent,
    pub trials: usize,
    pub seed: u64,
    /// Each test function has 1..=max_terms peaks.
    pub max_terms: usize,
    pub m_decay: usize,
    /// Quadrature disk radius; defaults to 0.45 of the shorter window side.
    pub radius: Option<f64>,
    /// Quadrature step in units of ρ at the centre.
    pub step: f64,
    /// Peak centres stay this many ρ inside the disk.
    pub margin: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { p: Exponent(2.0), trials: 50, seed: 0, max_terms: 3, m_decay: 3, radius: None, step: 0.25, margin: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingTrial {
    pub centres: Vec<Point>,
    pub coeffs: Vec<Point>,
    pub seq_norm: f64,
    pub fn_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub p: Exponent,
    pub center: Point,
    pub radius: f64,
    pub nodes_used: usize,
    pub trials: Vec<SamplingTrial>,
    pub min: f64,
    pub max: f64,
    /// Smallest C with every ratio in [1/C, C].
    pub constant: f64,
    pub family: String,
}

/// Quadrature grid, nodes and peak family shared by all trials on one disk.
pub struct RatioProbe {
    p: Exponent,
    center: Point,
    radius: f64,
    /// Peak centres are drawn from the disk of this radius.
    pub inner: f64,
    order: usize,
    family: PeakFamily,
    model_phi: Box<dyn Fn(Point) -> f64 + Send + Sync>,
    grid: Vec<Point>,
    grid_w: Vec<f64>,
    grid_base: Vec<Point>,
    nodes: Vec<Point>,
    node_w: Vec<f64>,
    node_base: Vec<Point>,
}

impl RatioProbe {
    pub fn new(metric: &MetricField, omega: &FlatWeight, lambda: &PointSequence, opts: &SamplingOptions) -> Result<Self> {
        let model = metric.model();
        let win = metric.window();
        let center = win.center();
        let radius = opts.radius.unwrap_or(0.45 * win.width().min(win.height()));
        if !win.contains_disk(center, radius) {
            return Err(Error::domain("quadrature disk leaves the window"));
        }
        let rho_c = metric.rho(center);
        let rho_max = win.grid(17, 17).into_iter().map(|z| metric.rho(z)).fold(0.0, f64::max);
        let inner = radius - opts.margin * rho_max;
        if !(inner > 0.0) {
            return Err(Error::domain(format!("disk of radius {radius} leaves no room for a margin of {} ρ", opts.margin)));
        }
        let order = opts.m_decay + omega.growth_exponent(model).ceil() as usize;
        let family = PeakFamily::new(model, 1.0, center, radius, order)?;

        let step = opts.step * rho_c;
        let k = (radius / step).ceil() as usize;
        let grid: Vec<Point> = Rect::centered(center, k as f64 * step, k as f64 * step)
            .grid(2 * k + 1, 2 * k + 1)
            .into_iter()
            .filter(|z| (z - center).norm() <= radius)
            .collect();
        let nodes: Vec<Point> = lambda.points.iter().copied().filter(|z| (z - center).norm() <= radius).collect();
        // log of ωe^{−φ}, with the area element ρ^{−2}dm folded in for finite p
        let grid_w: Vec<f64> = grid
            .par_iter()
            .map(|&z| {
                let r = metric.rho(z);
                let lw = omega.eval_with_rho(model, z, r)?.ln() - model.phi(z);
                Ok(if opts.p.is_inf() { lw } else { lw + (step * step / (r * r)).ln() / opts.p.0 })
            })
            .collect::<Result<_>>()?;
        let node_w: Vec<f64> = nodes.iter().map(|&z| Ok(omega.eval_with_rho(model, z, metric.rho(z))?.ln() - model.phi(z))).collect::<Result<_>>()?;
        let grid_base = family.log_base(&grid)?;
        let node_base = family.log_base(&nodes)?;
        let m = model.clone();
        Ok(RatioProbe {
            p: opts.p,
            center,
            radius,
            inner,
            order,
            family,
            model_phi: Box::new(move |z| m.phi(z)),
            grid,
            grid_w,
            grid_base,
            nodes,
            node_w,
            node_base,
        })
    }

    pub fn nodes_used(&self) -> usize {
        self.nodes.len()
    }

    /// The trial for f = Σ c_j e^{φ(η_j)}P_{η_j}.
    pub fn trial(&self, centres: Vec<Point>, coeffs: Vec<Point>) -> Result<SamplingTrial> {
        let mut on_grid = vec![Point::new(0.0, 0.0); self.grid.len()];
        let mut on_nodes = vec![Point::new(0.0, 0.0); self.nodes.len()];
        for (&eta, &c) in centres.iter().zip(&coeffs) {
            let peak = self.family.peak(eta)?;
            let shift = (self.model_phi)(eta);
            let lg = self.family.log_values_from(&peak, &self.grid, &self.grid_base)?;
            for ((acc, l), w) in on_grid.iter_mut().zip(&lg).zip(&self.grid_w) {
                *acc += c * (l + Point::new(shift + w, 0.0)).exp();
            }
            let ln = self.family.log_values_from(&peak, &self.nodes, &self.node_base)?;
            for ((acc, l), w) in on_nodes.iter_mut().zip(&ln).zip(&self.node_w) {
                *acc += c * (l + Point::new(shift + w, 0.0)).exp();
            }
        }
        let fn_norm = self.p.norm(on_grid.iter().map(|v| v.norm()));
        let seq_norm = self.p.norm(on_nodes.iter().map(|v| v.norm()));
        if !(fn_norm > 0.0) || !fn_norm.is_finite() || !seq_norm.is_finite() {
            return Err(Error::numerical("test function norm", fn_norm));
        }
        Ok(SamplingTrial { centres, coeffs, seq_norm, fn_norm, ratio: seq_norm / fn_norm })
    }
}

/// Ratios over `opts.trials` seeded test functions Σ c_j e^{φ(η_j)}P_{η_j}.
pub fn sampling_ratio(metric: &MetricField, omega: &FlatWeight, lambda: &PointSequence, opts: &SamplingOptions) -> Result<SamplingReport> {
    if opts.trials == 0 || opts.max_terms == 0 {
        return Err(Error::domain("need at least one trial and one term"));
    }
    let probe = RatioProbe::new(metric, omega, lambda, opts)?;
    let mut rng = seeded(opts.seed, stream::TRIALS);
    let mut trials = Vec::with_capacity(opts.trials);
    for _ in 0..opts.trials {
        let terms = rng.random_range(1..=opts.max_terms);
        let mut centres = Vec::with_capacity(terms);
        let mut coeffs = Vec::with_capacity(terms);
        for _ in 0..terms {
            // uniform in the inner disk
            let r = probe.inner * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            centres.push(probe.center + Point::from_polar(r, t));
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            coeffs.push(Point::new(a, b) * std::f64::consts::FRAC_1_SQRT_2);
        }
        trials.push(probe.trial(centres, coeffs)?);
    }
    let min = trials.iter().map(|t| t.ratio).fold(f64::INFINITY, f64::min);
    let max = trials.iter().map(|t| t.ratio).fold(0.0, f64::max);
    let constant = max.max(1.0 / min);
    Ok(SamplingReport {
        p: opts.p,
        center: probe.center,
        radius: probe.radius,
        nodes_used: probe.nodes_used(),
        trials,
        min,
        max,
        constant,
        family: format!("peaks of φ, order {}, 1..={} terms, complex normal coefficients", probe.order, opts.max_terms),
    })
}

//! Peak functions P_η: P_η(η) = 1 and fast decay away from η.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalyticWindow, MultiplierEval};
use crate::discretize::build_net_at;
use crate::error::{Error, Result};
use crate::geometry::{MetricField, PointSequence};
use crate::types::{Point, Rect};
use crate::weights::{FlatWeight, WeightModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Radius of the disk about η on which complex values are available.
    pub reach: f64,
    /// Override for the number M of removed zeros.
    pub order: Option<usize>,
    /// Net parameters for the multiplier of εφ.
    pub net_m: usize,
    pub net_n: usize,
    /// Extra source region beyond the reach, in units of ρ_{εφ}(η).
    pub margin: f64,
}

impl PeakOptions {
    pub fn new(reach: f64) -> Self {
        PeakOptions { reach, order: None, net_m: 1, net_n: 1, margin: 8.0 }
    }
}

#[derive(Debug, Clone)]
pub struct PeakFunction {
    pub eta: Point,
    pub eps: f64,
    pub m_decay: usize,
    /// Number M of zeros removed from h.
    pub order: usize,
    pub removed: Vec<Point>,
    /// c_η in P_η = c_η h/Π(z − σ_i)·ρ^M(η)e^{−εφ(η)}.
    pub c_eta: Point,
    pub rho_eta: f64,
    pub omega: FlatWeight,
    h: MultiplierEval,
    window: AnalyticWindow,
    removed_idx: Vec<usize>,
    /// log of everything multiplying h/Π(z − σ_i).
    log_const: Point,
}

/// Peak at η for weight εφ with decay order `m_decay` against ω.
pub fn build_peak(model: &WeightModel, omega: &FlatWeight, eta: Point, eps: f64, m_decay: usize, reach: f64) -> Result<PeakFunction> {
    build_peak_with(model, omega, eta, eps, m_decay, PeakOptions::new(reach))
}

pub fn build_peak_with(model: &WeightModel, omega: &FlatWeight, eta: Point, eps: f64, m_decay: usize, opts: PeakOptions) -> Result<PeakFunction> {
    if !(eps > 0.0) {
        return Err(Error::domain("peak sharpness ε must be positive"));
    }
    if !(opts.reach > 0.0) {
        return Err(Error::domain("peak reach must be positive"));
    }
    let scaled = model.scaled(eps);
    let rho_s = scaled.rho(eta)?;
    let half = opts.reach + opts.margin * rho_s;
    let region = Rect::centered(eta, half, half);
    let metric = MetricField::build(&scaled, region, 4.0)?;
    // anchored at η: η is a cell corner, so {η} ∪ Z(h) stays separated
    let net = build_net_at(&scaled, &metric, region, opts.net_m, opts.net_n, eta)?;
    let h = MultiplierEval::from_net(&scaled, &net)?;
    let gamma = omega.growth_exponent(model);
    let order = opts.order.unwrap_or(m_decay + gamma.ceil() as usize);
    let rho_eta = model.rho(eta)?;
    let mut by_dist: Vec<Point> = h.zeros().points.clone();
    by_dist.sort_by(|a, b| (a - eta).norm().total_cmp(&(b - eta).norm()));
    if by_dist.len() < order {
        return Err(Error::domain(format!("multiplier has {} zeros, {order} needed", by_dist.len())));
    }
    let removed: Vec<Point> = by_dist[..order].to_vec();
    if let Some(far) = removed.last() {
        let r = (far - eta).norm();
        if r > 4.0 * (order as f64).sqrt() * rho_s {
            warn!("peak at ({}, {}): the {order} nearest zeros reach {r:.3}, beyond the expected ball", eta.re, eta.im);
        }
    }
    let window = AnalyticWindow::from_multiplier(&h, eta, opts.reach)?;
    let removed_idx: Vec<usize> = removed
        .iter()
        .map(|s| window.zero_index(*s).ok_or_else(|| Error::domain("removed zero outside the analytic window")))
        .collect::<Result<_>>()?;
    let at_eta = window.log_eval_skip(eta, &removed_idx)?;
    let log_const = -at_eta;
    let log_c = log_const - Point::new(order as f64 * rho_eta.ln() - scaled.phi(eta), 0.0);
    Ok(PeakFunction { eta, eps, m_decay, order, removed, c_eta: log_c.exp(), rho_eta, omega: omega.clone(), h, window, removed_idx, log_const })
}

/// Decay certificate of a peak over a probe set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakEnvelope {
    /// max |P(z)|e^{−ε(φ(z)−φ(η))}(ω(z)/ω(η))(1 + d^m).
    pub constant: f64,
    /// Slope of log max|P|e^{−ε(φ(z)−φ(η))}ω(z)/ω(η) against log d over distance shells.
    pub decay_exponent: f64,
    /// (shell distance, shell maximum).
    pub shells: Vec<(f64, f64)>,
}

impl PeakFunction {
    pub fn multiplier(&self) -> &MultiplierEval {
        &self.h
    }

    pub fn window(&self) -> &AnalyticWindow {
        &self.window
    }

    /// A logarithm of P(z), for z in the analytic window.
    pub fn log_value(&self, z: Point) -> Result<Point> {
        Ok(self.window.log_eval_skip(z, &self.removed_idx)? + self.log_const)
    }

    pub fn value(&self, z: Point) -> Result<Point> {
        Ok(self.log_value(z)?.exp())
    }

    /// log|P(z)|; outside the window it comes from the log-modulus engine.
    pub fn log_abs(&self, z: Point) -> Result<f64> {
        if self.window.contains(z) {
            return Ok(self.log_value(z)?.re);
        }
        let mut v = self.h.log_multiplier(z)?;
        for s in &self.removed {
            v -= (z - s).norm().ln();
        }
        Ok(v + self.log_const.re)
    }

    /// Evaluate the decay certificate on `probes`, distances measured by `metric` (for φ).
    pub fn envelope(&self, model: &WeightModel, metric: &MetricField, probes: &[Point], shell_width: f64) -> Result<PeakEnvelope> {
        let eta_seq = PointSequence::user(vec![self.eta]);
        let dist = metric.distance_to_set(&eta_seq, probes)?;
        let phi_eta = model.phi(self.eta);
        let w_eta = self.omega.eval(model, self.eta)?;
        let m = self.m_decay as i32;
        let vals: Vec<(f64, f64)> = probes
            .par_iter()
            .zip(dist.par_iter())
            .map(|(&z, &d)| {
                let lp = match self.log_abs(z) {
                    Ok(v) => v,
                    Err(Error::Pole { .. }) => f64::NEG_INFINITY,
                    Err(e) => return Err(e),
                };
                let w = self.omega.eval(model, z)? / w_eta;
                Ok((d, (lp - self.eps * (model.phi(z) - phi_eta)).exp() * w))
            })
            .collect::<Result<_>>()?;
        let constant = vals.iter().map(|(d, v)| v * (1.0 + d.powi(m))).fold(0.0, f64::max);
        let dmax = vals.iter().map(|(d, _)| *d).fold(0.0, f64::max);
        let nshell = (dmax / shell_width).floor() as usize;
        let mut shells = vec![(0.0, 0.0); nshell + 1];
        for (k, s) in shells.iter_mut().enumerate() {
            s.0 = (k as f64 + 0.5) * shell_width;
        }
        for (d, v) in &vals {
            let k = ((d / shell_width).floor() as usize).min(nshell);
            shells[k].1 = f64::max(shells[k].1, *v);
        }
        // fit on the outer shells, where the decay is algebraic
        let fit: Vec<(f64, f64)> = shells.iter().filter(|(d, v)| *d >= 3.0 && *v > 0.0).map(|(d, v)| (d.ln(), v.ln())).collect();
        let decay_exponent = if fit.len() >= 2 { -slope(&fit) } else { f64::NAN };
        Ok(PeakEnvelope { constant, decay_exponent, shells })
    }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

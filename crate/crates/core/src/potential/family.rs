//! Many peaks from one multiplier: P_η = h/Π(z − σ) over the zeros σ of h
//! nearest to η, scaled so P_η(η) = 1. One net and one analytic window serve
//! every centre in the window.

use rayon::prelude::*;

use super::{AnalyticWindow, MultiplierEval};
use crate::discretize::build_net_with;
use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::types::{Point, Rect};
use crate::weights::WeightModel;

#[derive(Debug, Clone)]
pub struct PeakFamily {
    pub eps: f64,
    /// Zeros removed per peak.
    pub order: usize,
    /// Zeros within this many ρ_{εφ}(η) of η are removed as well.
    pub clear_radius: f64,
    scaled: WeightModel,
    h: MultiplierEval,
    window: AnalyticWindow,
}

/// A member P_η of a family.
#[derive(Debug, Clone)]
pub struct FamilyPeak {
    pub eta: Point,
    pub removed: Vec<usize>,
    pub log_const: Point,
}

impl PeakFamily {
    /// Family for εφ whose complex values are available on the disk (`center`, `radius`).
    pub fn new(model: &WeightModel, eps: f64, center: Point, radius: f64, order: usize) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::domain("peak sharpness ε must be positive"));
        }
        let scaled = model.scaled(eps);
        let mut rho_max = scaled.rho(center)?;
        for k in 0..8 {
            rho_max = rho_max.max(scaled.rho(center + Point::from_polar(radius, std::f64::consts::PI * k as f64 / 4.0))?);
        }
        let half = radius + 8.0 * rho_max;
        let region = Rect::centered(center, half, half);
        let metric = MetricField::build(&scaled, region, 4.0)?;
        let net = build_net_with(&scaled, &metric, region, 1, 1)?;
        let h = MultiplierEval::from_net(&scaled, &net)?;
        let window = AnalyticWindow::from_multiplier(&h, center, radius)?;
        Ok(PeakFamily { eps, order, clear_radius: 1.5, scaled, h, window })
    }

    pub fn window(&self) -> &AnalyticWindow {
        &self.window
    }

    pub fn multiplier(&self) -> &MultiplierEval {
        &self.h
    }

    pub fn peak(&self, eta: Point) -> Result<FamilyPeak> {
        if !self.window.contains(eta) {
            return Err(Error::domain(format!("peak centre ({}, {}) outside the family window", eta.re, eta.im)));
        }
        let zs = &self.window.zeros;
        let mut by_dist: Vec<usize> = (0..zs.len()).collect();
        by_dist.sort_by(|&a, &b| (zs[a] - eta).norm().total_cmp(&(zs[b] - eta).norm()).then(a.cmp(&b)));
        let clear = self.clear_radius * self.scaled.rho(eta)?;
        let k = by_dist.iter().take_while(|&&i| (zs[i] - eta).norm() <= clear).count().max(self.order);
        if k > by_dist.len() {
            return Err(Error::domain("family window holds too few zeros"));
        }
        let mut removed = by_dist[..k].to_vec();
        removed.sort_unstable();
        let log_const = -self.window.log_eval_skip(eta, &removed)?;
        Ok(FamilyPeak { eta, removed, log_const })
    }

    /// A logarithm of P(z).
    pub fn log_value(&self, p: &FamilyPeak, z: Point) -> Result<Point> {
        Ok(self.window.log_eval_skip(z, &p.removed)? + p.log_const)
    }

    /// log h at `points`, for reuse by [`PeakFamily::log_values_from`].
    pub fn log_base(&self, points: &[Point]) -> Result<Vec<Point>> {
        points.par_iter().map(|&z| self.window.log_eval(z)).collect()
    }

    /// log P at `points` from precomputed log h, falling back to the direct
    /// form next to removed zeros.
    pub fn log_values_from(&self, p: &FamilyPeak, points: &[Point], base: &[Point]) -> Result<Vec<Point>> {
        let zs: Vec<Point> = p.removed.iter().map(|&i| self.window.zeros[i]).collect();
        let tiny = 1e-6 * self.window.radius;
        points
            .par_iter()
            .zip(base.par_iter())
            .map(|(&z, &b)| {
                if zs.iter().any(|s| (z - s).norm() < tiny) {
                    return self.log_value(p, z);
                }
                let mut v = b + p.log_const;
                for s in &zs {
                    v -= (z - s).ln();
                }
                Ok(v)
            })
            .collect()
    }
}

//! Interpolation on a sequence by Lagrange series over a completed net.
//!
//! With F vanishing on Λ ∪ Σ, g_λ = F/((z − λ)F′(λ)) is 1 at λ and 0 on the
//! other nodes, and E(v) = Σ v_λ g_λ is the pseudo-extension. The values are
//! corrected by v ← v + (v − R E v) until the weighted nodal residual is below
//! tolerance. All node arithmetic is done on the scaled values v·ωe^{−φ}.

use log::debug;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{complete_to_net, CompletionParams, Exponent};
use crate::error::{Error, Result};
use crate::geometry::{MetricField, PointSequence};
use crate::potential::AnalyticWindow;
use crate::types::{Point, Rect};
use crate::weights::{FlatWeight, WeightModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolateOptions {
    pub p: Exponent,
    /// Target for max_λ |f(λ) − v_λ|ω(λ)e^{−φ(λ)}.
    pub tol: f64,
    pub max_iter: usize,
    pub completion: CompletionParams,
    /// Radius of the disk (about the window centre) on which f is evaluated;
    /// defaults to 0.4 of the shorter window side.
    pub radius: Option<f64>,
    /// Grid step of the norm quadrature in units of ρ at the centre.
    pub norm_step: f64,
}

impl Default for InterpolateOptions {
    fn default() -> Self {
        InterpolateOptions { p: Exponent::INF, tol: 1e-6, max_iter: 50, completion: CompletionParams::default(), radius: None, norm_step: 0.5 }
    }
}

/// f = Σ c_λ g_λ, evaluated on the analytic window.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub window: AnalyticWindow,
    /// Node positions and their zero index in the window.
    pub nodes: Vec<Point>,
    zero_idx: Vec<usize>,
    /// log F′(λ).
    log_dprime: Vec<Point>,
    /// Scaled coefficients c_λ e^{−φ(λ)}.
    scaled_coeffs: Vec<Point>,
    phi_nodes: Vec<f64>,
    model: WeightModel,
}

impl Interpolant {
    /// f(z)e^{−φ(z)}.
    pub fn eval_scaled(&self, z: Point) -> Result<Point> {
        let phi_z = self.model.phi(z);
        let tiny = 1e-12 * self.window.radius;
        if let Some(k) = self.window.zeros.iter().position(|s| (z - s).norm() <= tiny) {
            // on a zero only its own Lagrange term survives
            return Ok(match self.zero_idx.iter().position(|&i| i == k) {
                Some(j) => {
                    let lg = self.window.log_eval_skip(z, &[k])? - self.log_dprime[j];
                    self.scaled_coeffs[j] * (lg + Point::new(self.phi_nodes[j] - phi_z, 0.0)).exp()
                }
                None => Point::new(0.0, 0.0),
            });
        }
        let log_f = self.window.log_eval(z)?;
        let mut s = Point::new(0.0, 0.0);
        for j in 0..self.nodes.len() {
            let c = self.scaled_coeffs[j];
            if c == Point::new(0.0, 0.0) {
                continue;
            }
            let lg = log_f - (z - self.nodes[j]).ln() - self.log_dprime[j] + Point::new(self.phi_nodes[j] - phi_z, 0.0);
            s += c * lg.exp();
        }
        Ok(s)
    }

    pub fn eval(&self, z: Point) -> Result<Point> {
        Ok(self.eval_scaled(z)? * self.model.phi(z).exp())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationResult {
    #[serde(skip)]
    pub interpolant: Interpolant,
    /// Indices into Λ of the nodes carried by the interpolant.
    pub node_indices: Vec<usize>,
    /// Weighted residual |f(λ) − v_λ|ω(λ)e^{−φ(λ)} per node.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Max weighted residual before each correction.
    pub history: Vec<f64>,
    /// ‖RE − I‖ on ℓ^∞ from the assembled node matrix.
    pub op_norm: f64,
    pub norm_f: f64,
    pub norm_v: f64,
    /// ‖f‖ / ‖v‖, a lower bound for the interpolation constant.
    pub constant: f64,
    pub sigma_len: usize,
    pub separation: f64,
    pub multiplier_defect: f64,
}

/// Interpolate `values` (aligned with Λ) on the window of `metric`.
pub fn interpolate(metric: &MetricField, omega: &FlatWeight, lambda: &PointSequence, values: &[Point], opts: &InterpolateOptions) -> Result<InterpolationResult> {
    if values.len() != lambda.len() {
        return Err(Error::Input(format!("{} values for {} points", values.len(), lambda.len())));
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Input("non-finite interpolation value".into()));
    }
    let model = metric.model();
    let win = metric.window();
    let center = win.center();
    let radius = opts.radius.unwrap_or(0.4 * win.width().min(win.height()));
    let completion = complete_to_net(metric, lambda, &opts.completion)?;
    let window = AnalyticWindow::from_multiplier(&completion.multiplier, center, radius)?;
    debug!("interpolate: window radius {radius}, {} zeros, {} coefficients", window.zeros.len(), window.coeffs.len());

    let mut node_indices = Vec::new();
    for &i in &completion.lambda_used {
        let p = lambda.points[i];
        if (p - center).norm() <= radius * (1.0 - 1e-9) {
            node_indices.push(i);
        }
    }
    if let Some(i) = (0..lambda.len()).find(|i| values[*i] != Point::new(0.0, 0.0) && !node_indices.contains(i)) {
        return Err(Error::domain(format!(
            "value given at ({:.3}, {:.3}), outside the interpolation disk of radius {radius:.3}",
            lambda.points[i].re, lambda.points[i].im
        )));
    }
    let nodes: Vec<Point> = node_indices.iter().map(|&i| lambda.points[i]).collect();
    let zero_idx: Vec<usize> = nodes
        .iter()
        .map(|&p| window.zero_index(p).ok_or_else(|| Error::numerical("node missing from the multiplier window", p.norm())))
        .collect::<Result<_>>()?;
    let log_dprime: Vec<Point> = nodes.par_iter().map(|&p| window.log_derivative_closed(p)).collect::<Result<_>>()?;
    let phi_nodes: Vec<f64> = nodes.iter().map(|&p| model.phi(p)).collect();
    let log_w: Vec<f64> = nodes.iter().map(|&p| omega.eval_with_rho(model, p, metric.rho(p)).map(|w| w.ln() - model.phi(p))).collect::<Result<_>>()?;
    let target: Vec<Point> = node_indices.iter().zip(&log_w).map(|(&i, lw)| values[i] * lw.exp()).collect();

    // A[j][k] = g_k(λ_j)·ω(λ_j)e^{−φ(λ_j)} / (ω(λ_k)e^{−φ(λ_k)})
    let n = nodes.len();
    let rows: Vec<Vec<Point>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| {
                    let lg = window.log_eval_skip(nodes[j], &[zero_idx[k]])? - log_dprime[k] + Point::new(log_w[j] - log_w[k], 0.0);
                    Ok(if lg.re == f64::NEG_INFINITY { Point::new(0.0, 0.0) } else { lg.exp() })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(n, n, |j, k| rows[j][k]);
    let op_norm = (0..n)
        .map(|j| (0..n).map(|k| (a[(j, k)] - if j == k { Point::new(1.0, 0.0) } else { Point::new(0.0, 0.0) }).norm()).sum::<f64>())
        .fold(0.0, f64::max);

    let apply = |c: &[Point]| -> Vec<Point> { (0..n).map(|j| (0..n).map(|k| a[(j, k)] * c[k]).sum()).collect() };
    let mut coeffs = target.clone();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut growth = 0;
    let residual_of = |c: &[Point]| -> Vec<Point> { apply(c).iter().zip(&target).map(|(f, v)| v - f).collect() };
    let mut r = if target.iter().all(|v| *v == Point::new(0.0, 0.0)) { vec![Point::new(0.0, 0.0); n] } else { residual_of(&coeffs) };
    loop {
        let size = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if let Some(&last) = history.last() {
            growth = if size > last { growth + 1 } else { 0 };
        }
        history.push(size);
        if size <= opts.tol {
            break;
        }
        if growth >= 3 {
            return Err(Error::numerical("Neumann correction diverged (residual grew 3 times in a row); Λ may be too dense", size));
        }
        if iterations >= opts.max_iter {
            return Err(Error::numerical(format!("Neumann correction stalled after {iterations} iterations"), size));
        }
        for (c, d) in coeffs.iter_mut().zip(&r) {
            *c += d;
        }
        iterations += 1;
        r = residual_of(&coeffs);
    }
    let residuals: Vec<f64> = r.iter().map(|x| x.norm()).collect();

    // scaled coefficients c e^{−φ} = (c ωe^{−φ})/ω
    let scaled_coeffs: Vec<Point> = coeffs.iter().zip(&log_w).zip(&phi_nodes).map(|((c, lw), ph)| c * (-(lw + ph)).exp()).collect();
    let interpolant = Interpolant { window, nodes, zero_idx, log_dprime, scaled_coeffs, phi_nodes, model: model.clone() };

    let norm_v = opts.p.norm(target.iter().map(|v| v.norm()));
    let norm_f = function_norm(&interpolant, metric, omega, center, radius, opts)?;
    let constant = if norm_v > 0.0 { norm_f / norm_v } else { 0.0 };
    Ok(InterpolationResult {
        interpolant,
        node_indices,
        residuals,
        iterations,
        history,
        op_norm,
        norm_f,
        norm_v,
        constant,
        sigma_len: completion.sigma.len(),
        separation: completion.separation,
        multiplier_defect: completion.defect.sup,
    })
}

/// ‖fωe^{−φ}‖_p over the grid inside the disk, with area element ρ^{−2}dm for finite p.
fn function_norm(f: &Interpolant, metric: &MetricField, omega: &FlatWeight, center: Point, radius: f64, opts: &InterpolateOptions) -> Result<f64> {
    let model = metric.model();
    let step = opts.norm_step * metric.rho(center);
    let k = (radius / step).ceil() as usize;
    let pts: Vec<Point> = Rect::centered(center, k as f64 * step, k as f64 * step)
        .grid(2 * k + 1, 2 * k + 1)
        .into_iter()
        .filter(|z| (z - center).norm() <= radius * (1.0 - 1e-9))
        .collect();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&z| {
            let r = metric.rho(z);
            let w = omega.eval_with_rho(model, z, r)?;
            let cell = if opts.p.is_inf() { 1.0 } else { (step * step / (r * r)).powf(1.0 / opts.p.0) };
            Ok(f.eval_scaled(z)?.norm() * w * cell)
        })
        .collect::<Result<_>>()?;
    Ok(opts.p.norm(vals))
}

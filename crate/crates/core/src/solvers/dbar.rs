//! Weighted solutions of ∂̄u = f.
//!
//! The support of f is covered by disks of radius r·ρ, f is cut by a smooth
//! partition of unity χ_λ, and each piece is solved as
//! u_λ = m_λ·C[fχ_λ/m_λ] where C is the Cauchy transform and m_λ a peak
//! function that does not vanish on supp χ_λ. The transform is a discrete
//! convolution of the node samples with the exact integral of 1/(πw) over
//! each grid cell, done by FFT.

use std::collections::HashMap;
use std::f64::consts::PI;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Exponent, Fft2, GridFunction};
use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::potential::PeakFamily;
use crate::types::{Point, Rect};
use crate::weights::{FlatWeight, WeightModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbarOptions {
    /// Covering disks have radius `cover_radius`·ρ; bumps reach twice that.
    pub cover_radius: f64,
    /// Decay order of the peaks m_λ before the flat-weight correction.
    pub m_decay: usize,
    /// Required zero band around supp f, in units of sup ρ.
    pub margin: f64,
    /// Certificate threshold on the weighted relative L² residual.
    pub residual_tol: f64,
}

impl Default for DbarOptions {
    fn default() -> Self {
        DbarOptions { cover_radius: 1.0, m_decay: 3, margin: 3.0, residual_tol: 1e-3 }
    }
}

/// ‖ue^{−φ}ω‖_p ≤ C‖fe^{−φ}ωρ‖_p over the inner region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstant {
    pub p: Exponent,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarReport {
    pub centres: usize,
    /// Centres whose piece fχ_λ is not identically zero.
    pub active: usize,
    pub inner: Rect,
    /// ‖(∂̄u − f)e^{−φ}ω‖₂ / ‖fe^{−φ}ω‖₂ over nodes two steps from the edge.
    pub residual: f64,
    pub residual_tol: f64,
    pub certified: bool,
    pub norms: Vec<NormConstant>,
    /// sup of |u|e^{−φ}ω over the margin band relative to the inner region.
    pub tail_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DbarSolution {
    pub u: GridFunction,
    pub report: DbarReport,
}

/// (1/π)∫ dm(w)/w over the cell of side h centred at (dx, dy)·h.
pub fn cauchy_cell_kernel(dx: i64, dy: i64, h: f64) -> Point {
    if dx == 0 && dy == 0 {
        return Point::new(0.0, 0.0);
    }
    if dx < 0 || (dx == 0 && dy < 0) {
        return -cauchy_cell_kernel(-dx, -dy, h);
    }
    if dx.abs().max(dy.abs()) > 64 {
        // 1/w is harmonic, so the midpoint rule is off by O(h⁶/|w|⁵) only
        return h * h / (PI * Point::new(dx as f64 * h, dy as f64 * h));
    }
    // ∫∫ dx dy / w = −i[G(w)] over the corners, G(w) = w ln w − w
    let g = |x: f64, y: f64| {
        let w = Point::new(x, y);
        w * w.ln() - w
    };
    let (x0, x1) = ((dx as f64 - 0.5) * h, (dx as f64 + 0.5) * h);
    let (y0, y1) = ((dy as f64 - 0.5) * h, (dy as f64 + 0.5) * h);
    let s = g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0);
    -Point::i() * s / PI
}

/// Solve ∂̄u = f on the grid of `f`, with weighted norm constants for each p in `ps`.
pub fn dbar_solve(model: &WeightModel, omega: &FlatWeight, f: &GridFunction, ps: &[Exponent], opts: DbarOptions) -> Result<DbarSolution> {
    if f.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Input("datum has non-finite samples".into()));
    }
    if !(opts.cover_radius > 0.0) || !(opts.margin >= 2.0 * opts.cover_radius) {
        return Err(Error::domain("margin must hold the bumps: need margin ≥ 2·cover_radius > 0"));
    }
    let (nx, ny, h) = (f.nx, f.ny, f.h);
    let metric = MetricField::build(model, f.window, 4.0)?;
    let rho_max = f.window.grid(17, 17).into_iter().map(|z| metric.rho(z)).fold(0.0, f64::max);
    let band = opts.margin * rho_max;
    let w = f.window;
    if 2.0 * band >= w.width() || 2.0 * band >= w.height() {
        return Err(Error::domain(format!("window too small for a margin of {band:.3}")));
    }
    let inner = Rect::new(w.x0 + band, w.y0 + band, w.x1 - band, w.y1 - band);
    let points = f.points();
    if let Some(k) = (0..points.len()).find(|&k| f.values[k] != Point::new(0.0, 0.0) && !inner.contains(points[k])) {
        return Err(Error::domain(format!(
            "covering margin violated: datum is nonzero at ({:.4}, {:.4}) within {band:.3} of the window edge",
            points[k].re, points[k].im
        )));
    }

    let rho_nodes: Vec<f64> = points.iter().map(|&z| metric.rho(z)).collect();
    let weight: Vec<f64> = points
        .par_iter()
        .zip(rho_nodes.par_iter())
        .map(|(&z, &r)| Ok((-model.phi(z)).exp() * omega.eval_with_rho(model, z, r)?))
        .collect::<Result<_>>()?;

    let centres = cover(&points, &rho_nodes, &inner, opts.cover_radius, rho_max);
    let reach: Vec<f64> = centres.iter().map(|&c| 2.0 * opts.cover_radius * metric.rho(c)).collect();
    let mut psi_sum = vec![0.0; nx * ny];
    for (c, &r) in centres.iter().zip(&reach) {
        for_support(f, *c, r, |k, t| psi_sum[k] += bump(t));
    }
    let active: Vec<usize> = (0..centres.len())
        .filter(|&i| {
            let mut any = false;
            for_support(f, centres[i], reach[i], |k, t| any |= bump(t) > 0.0 && f.values[k] != Point::new(0.0, 0.0));
            any
        })
        .collect();
    debug!("dbar: {} covering centres, {} active", centres.len(), active.len());

    let mut u = GridFunction { values: vec![Point::new(0.0, 0.0); nx * ny], ..f.clone() };
    if !active.is_empty() {
        let order = opts.m_decay + omega.growth_exponent(model).ceil() as usize;
        let mut family = PeakFamily::new(model, 1.0, w.center(), w.max_dist(w.center()) * (1.0 + 1e-9), order)?;
        family.clear_radius = 2.0 * opts.cover_radius + 0.5;
        let base = family.log_base(&points)?;
        let (px, py) = ((2 * nx - 1).next_power_of_two(), (2 * ny - 1).next_power_of_two());
        let fft = Fft2::new(px, py);
        let mut kernel = vec![Point::new(0.0, 0.0); px * py];
        for dy in -(ny as i64 - 1)..(ny as i64) {
            for dx in -(nx as i64 - 1)..(nx as i64) {
                let i = dx.rem_euclid(px as i64) as usize;
                let j = dy.rem_euclid(py as i64) as usize;
                kernel[j * px + i] = cauchy_cell_kernel(dx, dy, h);
            }
        }
        fft.forward(&mut kernel);

        let solve_one = |ci: usize| -> Result<Vec<Point>> {
            let c = centres[ci];
            let peak = family.peak(c)?;
            let log_m = family.log_values_from(&peak, &points, &base)?;
            let mut buf = vec![Point::new(0.0, 0.0); px * py];
            for_support(f, c, reach[ci], |k, t| {
                let b = bump(t);
                if b > 0.0 && f.values[k] != Point::new(0.0, 0.0) {
                    buf[(k / nx) * px + k % nx] = f.values[k] * (b / psi_sum[k]) * (-log_m[k]).exp();
                }
            });
            fft.forward(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k;
            }
            fft.inverse(&mut buf);
            Ok((0..nx * ny).map(|k| log_m[k].exp() * buf[(k / nx) * px + k % nx]).collect())
        };
        // bounded batches keep memory flat; pieces are added in centre order
        let batch = rayon::current_num_threads().max(1) * 2;
        for chunk in active.chunks(batch) {
            let pieces: Vec<Vec<Point>> = chunk.par_iter().map(|&ci| solve_one(ci)).collect::<Result<_>>()?;
            for piece in pieces {
                for (a, b) in u.values.iter_mut().zip(piece) {
                    *a += b;
                }
            }
        }
        if u.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerical("Cauchy transform quadrature (non-finite solution)", f64::NAN));
        }
    }

    let (mut num, mut den) = (0.0, 0.0);
    for j in 2..ny.saturating_sub(2) {
        for i in 2..nx.saturating_sub(2) {
            let k = j * nx + i;
            let d = u.dbar_at(i, j).expect("interior node");
            num += ((d - f.values[k]).norm() * weight[k]).powi(2);
            den += (f.values[k].norm() * weight[k]).powi(2);
        }
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else if num > 0.0 { f64::INFINITY } else { 0.0 };

    let inside: Vec<usize> = (0..nx * ny).filter(|&k| inner.contains(points[k])).collect();
    let norms = ps
        .iter()
        .map(|&p| {
            let cell = if p.is_inf() { 1.0 } else { (h * h).powf(1.0 / p.0) };
            let lhs = cell * p.norm(inside.iter().map(|&k| u.values[k].norm() * weight[k]));
            let rhs = cell * p.norm(inside.iter().map(|&k| f.values[k].norm() * weight[k] * rho_nodes[k]));
            let constant = if rhs > 0.0 { lhs / rhs } else { 0.0 };
            NormConstant { p, lhs, rhs, constant }
        })
        .collect();
    let sup_in = inside.iter().map(|&k| u.values[k].norm() * weight[k]).fold(0.0, f64::max);
    let sup_band = (0..nx * ny).filter(|&k| !inner.contains(points[k])).map(|k| u.values[k].norm() * weight[k]).fold(0.0, f64::max);
    let tail_ratio = if sup_in > 0.0 { sup_band / sup_in } else { 0.0 };

    let report = DbarReport {
        centres: centres.len(),
        active: active.len(),
        inner,
        residual,
        residual_tol: opts.residual_tol,
        certified: residual <= opts.residual_tol,
        norms,
        tail_ratio,
    };
    Ok(DbarSolution { u, report })
}

/// exp(1 − 1/(1 − t²)) on |t| < 1.
fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Calls `visit(k, |z_k − c|/r)` for the nodes within distance r of c.
fn for_support(g: &GridFunction, c: Point, r: f64, mut visit: impl FnMut(usize, f64)) {
    let w = g.window;
    let lo = |a: f64, a0: f64| (((a - r - a0) / g.h).ceil().max(0.0)) as usize;
    let hi = |a: f64, a0: f64, n: usize| ((((a + r - a0) / g.h).floor()).max(-1.0) as i64).min(n as i64 - 1);
    let (i0, j0) = (lo(c.re, w.x0), lo(c.im, w.y0));
    let (i1, j1) = (hi(c.re, w.x0, g.nx), hi(c.im, w.y0, g.ny));
    for j in j0 as i64..=j1 {
        for i in i0 as i64..=i1 {
            let (i, j) = (i as usize, j as usize);
            let t = (g.node(i, j) - c).norm() / r;
            if t < 1.0 {
                visit(j * g.nx + i, t);
            }
        }
    }
}

/// Greedy covering of the grid nodes in `inner` by disks D(c, r·ρ(c)), scanning in row order.
fn cover(points: &[Point], rho: &[f64], inner: &Rect, r: f64, rho_max: f64) -> Vec<Point> {
    let cell = r * rho_max;
    let key = |z: Point| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<(Point, f64)>> = HashMap::new();
    let mut out = Vec::new();
    for (k, &z) in points.iter().enumerate() {
        if !inner.contains(z) {
            continue;
        }
        let (a, b) = key(z);
        let covered = (a - 1..=a + 1).any(|x| (b - 1..=b + 1).any(|y| buckets.get(&(x, y)).is_some_and(|v| v.iter().any(|(c, rc)| (z - c).norm() <= *rc))));
        if !covered {
            buckets.entry((a, b)).or_default().push((z, r * rho[k]));
            out.push(z);
        }
    }
    out
}

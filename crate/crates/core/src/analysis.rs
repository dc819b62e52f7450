//! Beurling densities of point sequences, the sampling/interpolation
//! classification by density, and the Jensen and rectangle-transfer
//! diagnostics.

use std::collections::HashMap;
use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{separation, MetricField, PointSequence};
use crate::quad::gl_cached;
use crate::rng::{seeded, stream};
use crate::roots::{bracket_positive, solve_increasing};
use crate::types::{Point, Rect};
use crate::weights::WeightModel;

/// The critical density 1/2π.
pub const CRITICAL: f64 = 1.0 / (2.0 * PI);

fn window_check(metric: &MetricField, z: Point, rad: f64) -> Result<()> {
    let w = metric.window();
    let slack = 1e-9 * (1.0 + w.width().max(w.height()));
    if !w.expand(slack).contains_disk(z, rad) {
        return Err(Error::domain(format!("disk D(({}, {}), {rad}) leaves the window", z.re, z.im)));
    }
    Ok(())
}

/// #(Λ ∩ D(z, rρ(z))) / μ(D(z, rρ(z))), closed disk.
pub fn local_density(metric: &MetricField, seq: &PointSequence, z: Point, r: f64) -> Result<f64> {
    let rho = metric.rho_exact(z)?;
    density_at(metric, seq, z, rho, r)
}

fn density_at(metric: &MetricField, seq: &PointSequence, z: Point, rho: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("density radius must be positive, got {r}")));
    }
    let rad = r * rho;
    window_check(metric, z, rad)?;
    Ok(seq.count_in_disk(z, rad) as f64 / metric.model().mass_disk(z, rad)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub count: usize,
    pub seed: u64,
    /// Region the probe centres were drawn from.
    pub region: Rect,
}

/// A coarse grid plus uniform random points, placed so every disk D^{r_max}
/// about a probe stays inside the window.
pub fn default_probes(metric: &MetricField, r_max: f64, count: usize, seed: u64) -> Result<(Vec<Point>, ProbeSpec)> {
    let w = metric.window();
    let rho_max = w.grid(17, 17).into_iter().map(|z| metric.rho(z)).chain(metric.nodes().map(|(_, r)| r)).fold(0.0, f64::max);
    let margin = r_max * rho_max * (1.0 + 1e-9);
    if 2.0 * margin > w.width() || 2.0 * margin > w.height() {
        return Err(Error::domain(format!("window too small for probe disks of radius {r_max}ρ")));
    }
    let region = Rect::new(w.x0 + margin, w.y0 + margin, w.x1 - margin, w.y1 - margin);
    let k = ((count / 2) as f64).sqrt().floor() as usize;
    let mut probes = if k >= 2 { region.grid(k, k) } else { Vec::new() };
    let mut rng = seeded(seed, stream::PROBES);
    while probes.len() < count {
        let x = region.x0 + region.width() * rng.random::<f64>();
        let y = region.y0 + region.height() * rng.random::<f64>();
        probes.push(Point::new(x, y));
    }
    probes.truncate(count);
    Ok((probes, ProbeSpec { count, seed, region }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub r_grid: Vec<f64>,
    pub sup: Vec<f64>,
    pub inf: Vec<f64>,
    pub d_plus: f64,
    pub d_minus: f64,
    pub uncertainty: f64,
    pub window: Rect,
    pub probes: Vec<Point>,
}

/// sup and inf of the local density over `probes` for each r; D± are the
/// averages over the top third of `r_grid`, the uncertainty their half-range.
pub fn density_report(metric: &MetricField, seq: &PointSequence, r_grid: &[f64], probes: &[Point]) -> Result<DensityReport> {
    if r_grid.is_empty() || probes.is_empty() {
        return Err(Error::domain("density report needs radii and probes"));
    }
    let rows: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|&z| {
            let rho = metric.rho_exact(z)?;
            r_grid.iter().map(|&r| density_at(metric, seq, z, rho, r)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let nr = r_grid.len();
    let mut sup = vec![f64::NEG_INFINITY; nr];
    let mut inf = vec![f64::INFINITY; nr];
    for row in &rows {
        for k in 0..nr {
            sup[k] = sup[k].max(row[k]);
            inf[k] = inf[k].min(row[k]);
        }
    }
    let tail = nr - nr.div_ceil(3);
    let (d_plus, up) = mean_and_half_range(&sup[tail..]);
    let (d_minus, un) = mean_and_half_range(&inf[tail..]);
    Ok(DensityReport { r_grid: r_grid.to_vec(), sup, inf, d_plus, d_minus, uncertainty: up.max(un), window: metric.window(), probes: probes.to_vec() })
}

fn mean_and_half_range(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, 0.5 * (hi - lo))
}

/// Evenly spaced radii from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyPolicy {
    pub r_grid: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
    /// Separation floor δ, in units of ρ; also the thinning gap.
    pub delta_floor: f64,
}

impl Default for ClassifyPolicy {
    fn default() -> Self {
        ClassifyPolicy { r_grid: linspace(10.0, 40.0, 16), probes: 64, seed: 0, delta_floor: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InterpolatingSide,
    SamplingSide,
    CriticalBand,
    Neither,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    #[serde(rename = "Dplus")]
    pub d_plus: f64,
    #[serde(rename = "Dminus")]
    pub d_minus: f64,
    pub uncertainty: f64,
    pub separation: f64,
    /// Size of the greedily thinned subsequence and its lower density.
    pub thinned: usize,
    pub thinned_d_minus: f64,
    pub thinned_uncertainty: f64,
    pub report: DensityReport,
}

impl Classification {
    /// (sampling-side test, interpolating-side test), evaluated independently.
    pub fn sides(&self, delta_floor: f64) -> (bool, bool) {
        let sampling = self.thinned_d_minus - self.thinned_uncertainty > CRITICAL;
        let interpolating = self.separation >= delta_floor && self.d_plus + self.uncertainty < CRITICAL;
        (sampling, interpolating)
    }
}

/// Keep a point iff its gap to every kept point is ≥ δ·max ρ; points are scanned by rows.
pub fn thin(seq: &PointSequence, metric: &MetricField, delta: f64) -> PointSequence {
    let mut order: Vec<usize> = (0..seq.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (seq.points[a], seq.points[b]);
        p.im.total_cmp(&q.im).then(p.re.total_cmp(&q.re))
    });
    let rho: Vec<f64> = seq.points.iter().map(|&p| metric.rho(p)).collect();
    let cell = (delta * rho.iter().cloned().fold(0.0, f64::max)).max(1e-300);
    let key = |p: Point| ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    for i in order {
        let p = seq.points[i];
        let (kx, ky) = key(p);
        let clash = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(kx + dx, ky + dy))
                    .is_some_and(|v| v.iter().any(|&j| (seq.points[j] - p).norm() < delta * rho[i].max(rho[j])))
            })
        });
        if !clash {
            grid.entry((kx, ky)).or_default().push(i);
            kept.push(i);
        }
    }
    kept.sort_unstable();
    PointSequence::new(kept.iter().map(|&i| seq.points[i]).collect(), seq.provenance.clone())
}

/// Empirical verdict from densities; not a proof of membership.
pub fn classify(metric: &MetricField, seq: &PointSequence, policy: &ClassifyPolicy) -> Result<Classification> {
    let r_max = policy.r_grid.iter().cloned().fold(0.0, f64::max);
    let (probes, _) = default_probes(metric, r_max, policy.probes, policy.seed)?;
    let report = density_report(metric, seq, &policy.r_grid, &probes)?;
    let sep = separation(seq, metric);
    let thinned = thin(seq, metric, policy.delta_floor);
    let (td, tu) = if thinned.len() == seq.len() {
        (report.d_minus, report.uncertainty)
    } else {
        let t = density_report(metric, &thinned, &policy.r_grid, &probes)?;
        (t.d_minus, t.uncertainty)
    };
    let mut c = Classification {
        verdict: Verdict::Neither,
        d_plus: report.d_plus,
        d_minus: report.d_minus,
        uncertainty: report.uncertainty,
        separation: sep,
        thinned: thinned.len(),
        thinned_d_minus: td,
        thinned_uncertainty: tu,
        report,
    };
    let (sampling, interpolating) = c.sides(policy.delta_floor);
    if sampling && interpolating {
        // D⁻ of a subsequence never exceeds D⁺ of the whole
        return Err(Error::numerical("classification reached both sides", c.d_plus - c.thinned_d_minus));
    }
    c.verdict = if sampling {
        Verdict::SamplingSide
    } else if interpolating {
        Verdict::InterpolatingSide
    } else if c.d_minus - c.uncertainty <= CRITICAL && CRITICAL <= c.d_plus + c.uncertainty {
        Verdict::CriticalBand
    } else {
        Verdict::Neither
    };
    Ok(c)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JensenResult {
    pub lhs: f64,
    pub rhs: f64,
    /// Radius T = Rρ(origin) of the counting disk.
    pub t: f64,
    pub origin: Point,
    pub slack: f64,
}

/// Both sides of the Jensen comparison at scale R about the origin:
/// lhs = ∫₀ᵀ n(t)/t dt, rhs = (1/2π)∫₀ᵀ μ(D(0,t))/t dt + c·log R.
///
/// The measure integral equals the circle mean of φ minus φ at the centre.
/// If 0 ∈ Λ the origin moves half a ρ away from Λ.
pub fn jensen_test(model: &WeightModel, seq: &PointSequence, r: f64, slack: f64) -> Result<JensenResult> {
    if !(r > 0.0) {
        return Err(Error::domain("Jensen radius must be positive"));
    }
    let rho0 = model.rho(Point::new(0.0, 0.0))?;
    let mut origin = Point::new(0.0, 0.0);
    if seq.points.iter().any(|p| p.norm() <= 1e-12 * rho0) {
        origin = (0..16)
            .map(|k| Point::from_polar(0.5 * rho0, PI * k as f64 / 8.0))
            .max_by(|a, b| {
                let d = |z: &Point| seq.nearest(*z).map(|(_, d)| d).unwrap_or(f64::INFINITY);
                d(a).total_cmp(&d(b))
            })
            .unwrap_or(origin);
        warn!("0 ∈ Λ: Jensen origin moved to ({}, {})", origin.re, origin.im);
    }
    let t = r * model.rho(origin)?;
    if let Some(b) = seq.bounding_rect() {
        if !b.expand(t * 0.05).contains_disk(origin, t) {
            warn!("Jensen disk of radius {t} is not covered by the sequence");
        }
    }
    let lhs: f64 = seq
        .in_disk(origin, t)
        .iter()
        .map(|&i| (seq.points[i] - origin).norm())
        .filter(|&d| d < t)
        .map(|d| (t / d).ln())
        .sum();
    const K: usize = 2048;
    let mean = (0..K).map(|k| model.phi(origin + Point::from_polar(t, 2.0 * PI * k as f64 / K as f64))).sum::<f64>() / K as f64;
    let rhs = mean - model.phi(origin) + slack * r.ln();
    Ok(JensenResult { lhs, rhs, t, origin, slack })
}

/// I_r(ζ) = ∫_{|z−ζ| < ρ_r(z)/r} r²/(πρ_r(z)²) dm(z), ρ_r the radius function of e^{−r}φ.
///
/// The domain is star-shaped about ζ when ρ_r is 1-Lipschitz and r > 1, so
/// polar coordinates with a root-found boundary t(θ) apply.
pub fn mean_coverage_integral(model: &WeightModel, zeta: Point, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::domain(format!("coverage integral needs r > 1, got {r}")));
    }
    let scaled = model.scaled((-r).exp());
    let start = scaled.rho(zeta)? / r;
    const ANGLES: usize = 96;
    let (nodes, weights) = gl_cached(20);
    let parts: Vec<f64> = (0..ANGLES)
        .into_par_iter()
        .map(|k| {
            let e = Point::from_polar(1.0, 2.0 * PI * k as f64 / ANGLES as f64);
            let mut failed = None;
            let mut g = |t: f64| match scaled.rho(zeta + t * e) {
                Ok(rho) => r * t - rho,
                Err(err) => {
                    failed = Some(err);
                    f64::NAN
                }
            };
            let (lo, hi) = bracket_positive(&mut g, start)?;
            let tb = solve_increasing(&mut g, lo, hi, 1e-14 * start)?;
            if let Some(err) = failed {
                return Err(err);
            }
            let mut s = 0.0;
            for (x, w) in nodes.iter().zip(weights) {
                let t = 0.5 * tb * (x + 1.0);
                let rho = scaled.rho(zeta + t * e)?;
                s += w * r * r / (PI * rho * rho) * t;
            }
            Ok(0.5 * tb * s)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>() * 2.0 * PI / ANGLES as f64)
}

/// The comparison measure ν of the rectangle transfer check.
#[derive(Debug, Clone)]
pub enum TransferMeasure {
    /// weight × counting measure of a sequence.
    Points { seq: PointSequence, weight: f64 },
    /// factor × μ.
    Scaled(f64),
}

impl TransferMeasure {
    fn disk(&self, model: &WeightModel, z: Point, rad: f64) -> Result<f64> {
        match self {
            TransferMeasure::Points { seq, weight } => Ok(weight * seq.count_in_disk(z, rad) as f64),
            TransferMeasure::Scaled(f) => Ok(f * model.mass_disk(z, rad)?),
        }
    }

    fn rect(&self, model: &WeightModel, r: &Rect) -> Result<f64> {
        match self {
            TransferMeasure::Points { seq, weight } => {
                let mut n = 0usize;
                let e = r.expand(1e-12 * (1.0 + r.diam()));
                seq.index().candidates(r.center(), 0.5 * e.diam(), |i| {
                    if e.contains(seq.points[i]) {
                        n += 1;
                    }
                });
                Ok(weight * n as f64)
            }
            TransferMeasure::Scaled(f) => Ok(f * model.mass_rect(r)?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferParams {
    pub eps: f64,
    /// Radii (all ≥ r₀) on which the disk hypothesis is checked.
    pub hypothesis_radii: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferViolation {
    pub z: Point,
    pub s: f64,
    pub alpha: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferReport {
    /// max ν(D^r)/μ(D^r) over probes and hypothesis radii.
    pub hypothesis_ratio: f64,
    pub hypothesis_holds: bool,
    /// False when the hypothesis failed and the rectangles were not examined.
    pub checked: bool,
    /// Per s: max over probes and α of ν(R)/μ(R).
    pub worst_by_s: Vec<(f64, f64)>,
    /// Smallest s of the grid from which every larger s passes.
    pub s0: Option<f64>,
    pub violations: Vec<TransferViolation>,
}

/// Checks ν(R^s_α(z)) ≤ (1 − ε/2)μ(R^s_α(z)) on rectangles with half-sides
/// sρ(z) and sαρ(z), given ν(D^r) ≤ (1 − ε)μ(D^r) on the probes.
pub fn rect_density_transfer_check(metric: &MetricField, nu: &TransferMeasure, params: &TransferParams, probes: &[Point]) -> Result<TransferReport> {
    let model = metric.model();
    let rhos: Vec<f64> = probes.iter().map(|&z| metric.rho_exact(z)).collect::<Result<_>>()?;
    let mut hyp: f64 = 0.0;
    for (&z, &rho) in probes.iter().zip(&rhos) {
        for &r in &params.hypothesis_radii {
            window_check(metric, z, r * rho)?;
            hyp = hyp.max(nu.disk(model, z, r * rho)? / model.mass_disk(z, r * rho)?);
        }
    }
    let holds = hyp <= 1.0 - params.eps;
    let mut report = TransferReport { hypothesis_ratio: hyp, hypothesis_holds: holds, checked: false, worst_by_s: Vec::new(), s0: None, violations: Vec::new() };
    if !holds {
        return Ok(report);
    }
    report.checked = true;
    let bound = 1.0 - 0.5 * params.eps;
    let w = metric.window().expand(1e-9 * (1.0 + metric.window().diam()));
    for &s in &params.s_grid {
        let mut worst: f64 = 0.0;
        for (&z, &rho) in probes.iter().zip(&rhos) {
            for &alpha in &params.alphas {
                let rect = Rect::centered(z, s * rho, s * alpha * rho);
                if !w.contains_rect(&rect) {
                    return Err(Error::domain(format!("rectangle R^{s}_{alpha} about ({}, {}) leaves the window", z.re, z.im)));
                }
                let ratio = nu.rect(model, &rect)? / model.mass_rect(&rect)?;
                worst = worst.max(ratio);
                if ratio > bound {
                    report.violations.push(TransferViolation { z, s, alpha, ratio });
                }
            }
        }
        report.worst_by_s.push((s, worst));
    }
    let mut sorted = report.worst_by_s.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s0 = None;
    for &(s, worst) in sorted.iter().rev() {
        if worst > bound {
            break;
        }
        s0 = Some(s);
    }
    report.s0 = s0;
    Ok(report)
}

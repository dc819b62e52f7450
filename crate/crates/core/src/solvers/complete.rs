//! Completion of a sparse sequence Λ to a net Λ ∪ Σ for (1 − ε)φ.
//!
//! The plane is cut into cells of (1 − ε)μ-mass 2πK. A cell already holding
//! k points of Λ receives K − k new points, placed far from everything
//! nearby and then nudged so that the cell's moments of degree < m match
//! those of (1 − ε)μ/2π. The multiplier with zeros Λ ∪ Σ follows.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::analysis::{classify, ClassifyPolicy, Verdict};
use crate::discretize::{match_low_moments, DynamicGrid, DEFAULT_DILATION};
use crate::error::{Error, Result};
use crate::geometry::{separation, MetricField, PointSequence, Provenance};
use crate::partition::{build_partition, QuasiSquare};
use crate::potential::{multiplier_sup_defect, DefectReport, MultiplierEval, SourceCell};
use crate::types::{Point, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    /// Density given up by the completed net.
    pub eps: f64,
    /// Moments of degree < m are matched per cell.
    pub m: usize,
    /// Each cell carries K = m·n points of Λ ∪ Σ.
    pub n: usize,
    /// When set, Λ must classify as interpolating-side first.
    pub precheck: Option<ClassifyPolicy>,
    /// Multiplier probes per side of the certificate grid.
    pub probes: usize,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams { eps: 0.1, m: 2, n: 4, precheck: None, probes: 24 }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    /// The added points Σ.
    pub sigma: PointSequence,
    /// Points of Λ that fell in complete cells, in input order.
    pub lambda_used: Vec<usize>,
    /// Λ ∪ Σ, cell by cell.
    pub combined: PointSequence,
    /// Multiplier for (1 − ε)φ vanishing exactly on Λ ∪ Σ.
    pub multiplier: MultiplierEval,
    pub cells: Vec<QuasiSquare>,
    pub separation: f64,
    pub defect: DefectReport,
    pub max_moment_residual: f64,
    pub params: CompletionParams,
}

/// Complete Λ to a net over the window of `metric`.
pub fn complete_to_net(metric: &MetricField, lambda: &PointSequence, params: &CompletionParams) -> Result<Completion> {
    let (eps, m, n) = (params.eps, params.m, params.n);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("ε = {eps} is not in (0, 1)")));
    }
    if m == 0 || n == 0 {
        return Err(Error::domain("m and n must be positive"));
    }
    if let Some(policy) = &params.precheck {
        let c = classify(metric, lambda, policy)?;
        if c.verdict != Verdict::InterpolatingSide {
            return Err(Error::domain(format!(
                "Λ is not interpolating-side (verdict {:?}, D⁺ = {:.4}); completion needs density below (1 − ε)/2π",
                c.verdict, c.d_plus
            )));
        }
    }
    let model = metric.model();
    let scaled = model.scaled(1.0 - eps);
    let k_total = m * n;
    let cell_mass = 2.0 * std::f64::consts::PI * k_total as f64;
    let region = metric.window();
    let partition = build_partition(&scaled, region, cell_mass)?;
    let cells: Vec<QuasiSquare> = partition.interior().copied().collect();
    if cells.is_empty() {
        return Err(Error::domain("window holds no complete cell"));
    }

    // assign each point of Λ to the first complete cell that contains it
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    let mut lambda_used = Vec::new();
    for (i, &p) in lambda.points.iter().enumerate() {
        if let Some(c) = cells.iter().position(|c| c.rect().contains(p)) {
            owned[c].push(i);
            lambda_used.push(i);
        }
    }
    for (c, o) in cells.iter().zip(&owned) {
        // m − 1 free points are needed to match the moments of degree 1..m−1
        if o.len() + m.saturating_sub(1) > k_total {
            return Err(Error::domain(format!(
                "cell at ({:.3}, {:.3}) already holds {} points of Λ, leaving fewer than m − 1 = {} free of K = {k_total}; \
                 use a smaller ε or a larger n",
                c.cx,
                c.cy,
                o.len(),
                m.saturating_sub(1)
            )));
        }
    }

    let rho_typ = metric.rho(region.center());
    let mut grid = DynamicGrid::new(rho_typ.max(1e-12));
    for &i in &lambda_used {
        let p = lambda.points[i];
        grid.insert(p, metric.rho(p));
    }
    let mut sigma = Vec::new();
    let mut source = Vec::with_capacity(cells.len());
    let mut worst_residual: f64 = 0.0;
    for (cell, own) in cells.iter().zip(&owned) {
        let need = k_total - own.len();
        let c = cell.center();
        let h = cell.hw.max(cell.hh);
        let rc = metric.rho(c);
        let placed = place_far(cell, need, &grid, rc);
        let fixed: Vec<Point> = own.iter().map(|&i| (lambda.points[i] - c) / h).collect();
        let moments = scaled.moments_rect(&cell.rect(), c, m)?;
        let mass = moments[0].re;
        let unit = mass / k_total as f64;
        // Σ_Σ w^l = (cell moment)/unit − Σ_Λ w^l, degrees 1..m−1
        let target: Vec<Point> = (1..m)
            .map(|l| moments[l] / (unit * h.powi(l as i32)) - fixed.iter().map(|w| w.powu(l as u32)).sum::<Point>())
            .collect();
        let start: Vec<Point> = placed.iter().map(|z| (z - c) / h).collect();
        let moved = match_low_moments(start, &target, 1e-12)
            .map_err(|e| Error::numerical(format!("completion moments in cell at ({:.3}, {:.3}): {e}", cell.cx, cell.cy), f64::NAN))?;
        let pts: Vec<Point> = moved.iter().map(|w| c + w * h).collect();
        let out = pts
            .iter()
            .map(|z| ((z.re - cell.cx).abs() / cell.hw).max((z.im - cell.cy).abs() / cell.hh))
            .fold(0.0, f64::max);
        if out > DEFAULT_DILATION {
            return Err(Error::numerical(format!("completion points left the dilated cell at ({:.3}, {:.3})", cell.cx, cell.cy), out));
        }
        let mut atoms: Vec<Point> = own.iter().map(|&i| lambda.points[i]).collect();
        atoms.extend(&pts);
        for l in 0..m {
            let s: Point = atoms.iter().map(|z| (z - c).powu(l as u32)).sum();
            let r = (unit * s - moments[l]).norm() / (mass * (2.0 * h).powi(l as i32));
            worst_residual = worst_residual.max(r);
        }
        for &p in &pts {
            grid.insert(p, metric.rho(p));
        }
        sigma.extend(pts);
        source.push(SourceCell { cell: *cell, atoms, weight: 1.0, smoothing: 0.0 });
    }
    let combined_pts: Vec<Point> = source.iter().flat_map(|s| s.atoms.iter().copied()).collect();
    let combined = PointSequence::new(combined_pts, Provenance::User);
    let sep = separation(&combined, metric);
    if sep < 0.05 {
        warn!("completed net has separation {sep:.4}");
    }
    let multiplier = MultiplierEval::new(&scaled, source)?;

    let scaled_metric = MetricField::build(&scaled, region, 4.0)?;
    let span = cells.iter().skip(1).fold(cells[0].rect(), |r, q| {
        let q = q.rect();
        Rect::new(r.x0.min(q.x0), r.y0.min(q.y0), r.x1.max(q.x1), r.y1.max(q.y1))
    });
    let inset = 2.0 * cells.iter().map(|c| c.hw.max(c.hh)).fold(0.0, f64::max);
    let probe_rect = if span.width() > 2.0 * inset && span.height() > 2.0 * inset { span.expand(-inset) } else { span };
    let probes = probe_rect.grid(params.probes.max(2), params.probes.max(2));
    let defect = multiplier_sup_defect(&multiplier, &scaled_metric, &probes)?;

    Ok(Completion {
        sigma: PointSequence::new(sigma, Provenance::User),
        lambda_used,
        combined,
        multiplier,
        cells,
        separation: sep,
        defect,
        max_moment_residual: worst_residual,
        params: params.clone(),
    })
}

/// `need` points of the cell, each the candidate farthest (in units of ρ) from
/// everything already placed.
fn place_far(cell: &QuasiSquare, need: usize, grid: &DynamicGrid, rho: f64) -> Vec<Point> {
    const G: usize = 12;
    let cands: Vec<Point> = (0..G * G)
        .map(|k| {
            let (i, j) = ((k % G) as f64, (k / G) as f64);
            Point::new(cell.cx - cell.hw + cell.hw * (2.0 * i + 1.0) / G as f64, cell.cy - cell.hh + cell.hh * (2.0 * j + 1.0) / G as f64)
        })
        .collect();
    let reach = 2.0 * cell.hw.max(cell.hh) + 2.0 * rho;
    let cap = reach / rho;
    let mut gaps: Vec<f64> = cands.iter().map(|&z| grid.gap(z, rho, reach, cap)).collect();
    let mut out: Vec<Point> = Vec::with_capacity(need);
    for _ in 0..need {
        let (best, _) = gaps.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &g)| if g > b.1 { (i, g) } else { b });
        let p = cands[best];
        out.push(p);
        for (g, z) in gaps.iter_mut().zip(&cands) {
            *g = g.min((z - p).norm() / rho);
        }
    }
    out
}

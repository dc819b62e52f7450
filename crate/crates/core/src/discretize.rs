//! Moment-matched point clusters and nets.
//!
//! A cell measure of mass m·k·unit is replaced by k base points of weight
//! m·unit sharing its first m moments; each base point is then spread over
//! m points on a small circle, which keeps every moment of degree < m.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{separation, MetricField, PointSequence, Provenance};
use crate::partition::{build_partition_at, Partition, QuasiSquare, DEFAULT_ASPECT_BOUND};
use crate::types::Point;
use crate::weights::WeightModel;

/// Base points must land in the cell dilated by this factor about its centre.
pub const DEFAULT_DILATION: f64 = 3.0;
/// Replication radii as fractions of ρ(σ), tried in order.
pub const RADIUS_LADDER: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
/// Cells whose M-dilations meet get different colours.
const COLOUR_DILATION: f64 = 3.0;

/// Roots of the monic polynomial whose roots have power sums `p[0..k]`
/// (p[i] = Σ z^{i+1}). Fails when the roots do not reproduce the sums.
pub fn power_sums_to_points(p: &[Point], k: usize) -> Result<Vec<Point>> {
    if k == 0 || p.len() < k {
        return Err(Error::domain(format!("need k ≥ 1 power sums, got k={k} with {} values", p.len())));
    }
    // Newton's identities: j·e_j = Σ_{i=1}^{j} (−1)^{i−1} e_{j−i} p_i
    let mut e = vec![Point::new(1.0, 0.0); k + 1];
    for j in 1..=k {
        let mut acc = Point::new(0.0, 0.0);
        for i in 1..=j {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[j - i] * p[i - 1];
        }
        e[j] = acc / j as f64;
    }
    // t^k + c[k−1] t^{k−1} + … + c[0], c[k−j] = (−1)^j e_j
    let c: Vec<Point> = (0..k).map(|i| if (k - i) % 2 == 0 { e[k - i] } else { -e[k - i] }).collect();
    let mut roots = if k == 1 {
        vec![-c[0]]
    } else {
        let mut comp = DMatrix::<Complex64>::zeros(k, k);
        for i in 1..k {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        for i in 0..k {
            comp[(i, k - 1)] = -c[i];
        }
        let schur = Schur::try_new(comp, 1e-15, 10_000).ok_or_else(|| Error::numerical("companion eigenvalues did not converge", k as f64))?;
        schur.eigenvalues().ok_or_else(|| Error::numerical("companion eigenvalues", k as f64))?.iter().copied().collect()
    };
    // a few Newton steps on the polynomial itself
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut v, mut d) = (Point::new(1.0, 0.0), Point::new(0.0, 0.0));
            for ci in c.iter().rev() {
                d = d * *r + v;
                v = v * *r + ci;
            }
            if d.norm() > 0.0 {
                let step = v / d;
                if step.is_finite() && step.norm() < 1e-3 * (1.0 + r.norm()) {
                    *r -= step;
                }
            }
        }
    }
    let radius = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    for l in 1..=k {
        let s: Point = roots.iter().map(|r| r.powu(l as u32)).sum();
        let scale = k as f64 * radius.powi(l as i32);
        if (s - p[l - 1]).norm() > 1e-8 * scale {
            return Err(Error::numerical(format!("ill-conditioned rooting at degree {l}"), (s - p[l - 1]).norm() / scale));
        }
    }
    Ok(roots)
}

/// σ + τ·e^{2πil/m}, l = 0..m−1.
pub fn replicate_on_circle(sigma: Point, m: usize, tau: f64) -> Vec<Point> {
    if m <= 1 {
        return vec![sigma];
    }
    (0..m).map(|l| sigma + Point::from_polar(tau, 2.0 * PI * l as f64 / m as f64)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCluster {
    pub cell: QuasiSquare,
    pub m: usize,
    pub base_points: Vec<Point>,
    /// τ_j per base point; zero until radii are chosen.
    pub radii: Vec<f64>,
    pub final_points: Vec<Point>,
    /// ∫(ζ − c)^l dμ_cell about the cell centre, l = 0..m−1.
    pub moments: Vec<Point>,
    /// |w·Σ(λ − c)^l − ∫(ζ − c)^l dμ| / (mass·diam^l) for l = 0..m−1, with w = mass/#points.
    pub moment_residuals: Vec<f64>,
    /// Smallest t with all final points inside the cell dilated by t.
    pub dilation: f64,
    pub used_fallback: bool,
}

impl MomentCluster {
    fn refresh(&mut self) {
        let c = self.cell.center();
        let mass = self.moments[0].re;
        let w = mass / self.final_points.len() as f64;
        let diam = self.cell.diam();
        self.moment_residuals = (0..self.m)
            .map(|l| {
                let s: Point = self.final_points.iter().map(|z| (z - c).powu(l as u32)).sum();
                (w * s - self.moments[l]).norm() / (mass * diam.powi(l as i32))
            })
            .collect();
        self.dilation = dilation_of(&self.cell, &self.final_points);
    }

    pub fn max_residual(&self) -> f64 {
        self.moment_residuals.iter().cloned().fold(0.0, f64::max)
    }
}

fn dilation_of(cell: &QuasiSquare, pts: &[Point]) -> f64 {
    pts.iter().map(|z| ((z.re - cell.cx).abs() / cell.hw).max((z.im - cell.cy).abs() / cell.hh)).fold(0.0, f64::max)
}

/// k base points of weight mass/k sharing the first m moments of μ on `cell`.
///
/// Power sums of degree < m are forced; degrees m..k are taken from the cell
/// measure too, which keeps the roots inside the cell for tame densities.
pub fn moment_match_cell(model: &WeightModel, cell: &QuasiSquare, m: usize, k: usize) -> Result<MomentCluster> {
    if m == 0 || k == 0 {
        return Err(Error::domain("moment order and point count must be positive"));
    }
    let c = cell.center();
    let h = cell.hw.max(cell.hh);
    let raw = model.moments_rect(&cell.rect(), c, k.max(m))?;
    let mass = raw[0].re;
    if !(mass > 0.0) {
        return Err(Error::domain("cell has no mass"));
    }
    // power sums of the normalised coordinates w = (ζ − c)/h
    let p: Vec<Point> = (1..=k).map(|l| raw[l] * (k as f64 / mass) / h.powi(l as i32)).collect();
    let inside = |w: &[Point]| w.iter().all(|z| (z.re * h).abs() <= DEFAULT_DILATION * cell.hw && (z.im * h).abs() <= DEFAULT_DILATION * cell.hh);
    let (w, used_fallback) = match power_sums_to_points(&p, k) {
        Ok(w) if inside(&w) => (w, false),
        _ => {
            let start = grid_start(cell, k, h);
            let w = match_low_moments(start, &p[..m - 1], 1e-12)
                .map_err(|e| Error::numerical(format!("moment fallback for cell at ({:.4}, {:.4}): {e}", cell.cx, cell.cy), f64::NAN))?;
            if !inside(&w) {
                return Err(Error::numerical(format!("moment points left the dilated cell at ({:.4}, {:.4})", cell.cx, cell.cy), dilation_of(cell, &w.iter().map(|z| c + z * h).collect::<Vec<_>>())));
            }
            (w, true)
        }
    };
    let base: Vec<Point> = w.iter().map(|z| c + z * h).collect();
    let finals: Vec<Point> = base.iter().flat_map(|&b| std::iter::repeat_n(b, m)).collect();
    let mut cl = MomentCluster {
        cell: *cell,
        m,
        radii: vec![0.0; base.len()],
        base_points: base,
        final_points: finals,
        moments: raw[..m].to_vec(),
        moment_residuals: vec![],
        dilation: 0.0,
        used_fallback,
    };
    cl.refresh();
    Ok(cl)
}

/// k points on a near-square grid inside the cell, in normalised coordinates.
fn grid_start(cell: &QuasiSquare, k: usize, h: f64) -> Vec<Point> {
    let aspect = cell.hw / cell.hh;
    let nx = ((k as f64 * aspect).sqrt().round() as usize).clamp(1, k);
    let ny = k.div_ceil(nx);
    let mut out = Vec::with_capacity(k);
    for j in 0..ny {
        for i in 0..nx {
            if out.len() == k {
                break;
            }
            let x = -cell.hw + cell.hw * (2 * i + 1) as f64 / nx as f64;
            let y = -cell.hh + cell.hh * (2 * j + 1) as f64 / ny as f64;
            out.push(Point::new(x / h, y / h));
        }
    }
    out
}

/// Move `pts` by minimum-norm Gauss–Newton steps until Σ z^l = target[l−1]
/// for l = 1..=target.len(). Used when rooting is ill-conditioned or lands
/// outside the dilated cell.
pub fn match_low_moments(mut pts: Vec<Point>, target: &[Point], tol: f64) -> Result<Vec<Point>> {
    let n = pts.len();
    let d = target.len();
    if d == 0 {
        return Ok(pts);
    }
    let resid = |pts: &[Point]| -> DVector<f64> {
        let mut r = DVector::zeros(2 * d);
        for l in 1..=d {
            let s: Point = pts.iter().map(|z| z.powu(l as u32)).sum();
            let e = s - target[l - 1];
            r[2 * (l - 1)] = e.re;
            r[2 * (l - 1) + 1] = e.im;
        }
        r
    };
    let mut r = resid(&pts);
    for _ in 0..100 {
        if r.amax() <= tol * n as f64 {
            return Ok(pts);
        }
        let mut jac = DMatrix::zeros(2 * d, 2 * n);
        for l in 1..=d {
            for (j, z) in pts.iter().enumerate() {
                // d(z^l) = l z^{l−1} dz as a real 2×2 block
                let g = l as f64 * z.powu(l as u32 - 1);
                jac[(2 * (l - 1), 2 * j)] = g.re;
                jac[(2 * (l - 1), 2 * j + 1)] = -g.im;
                jac[(2 * (l - 1) + 1, 2 * j)] = g.im;
                jac[(2 * (l - 1) + 1, 2 * j + 1)] = g.re;
            }
        }
        let step = jac.svd(true, true).solve(&r, 1e-12).map_err(|e| Error::numerical(format!("moment correction: {e}"), r.amax()))?;
        let base = r.norm();
        let mut t = 1.0;
        loop {
            let trial: Vec<Point> = pts.iter().enumerate().map(|(j, z)| z - t * Point::new(step[2 * j], step[2 * j + 1])).collect();
            let rt = resid(&trial);
            if rt.norm() < base || t < 1e-6 {
                pts = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    if r.amax() <= tol * n as f64 * 1e3 {
        return Ok(pts);
    }
    Err(Error::numerical("moment correction did not converge", r.amax()))
}

/// Insert-and-query bucket grid for points placed one at a time.
pub(crate) struct DynamicGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<(Point, f64)>>,
}

impl DynamicGrid {
    pub(crate) fn new(cell: f64) -> Self {
        DynamicGrid { cell, buckets: HashMap::new() }
    }

    fn key(&self, z: Point) -> (i64, i64) {
        ((z.re / self.cell).floor() as i64, (z.im / self.cell).floor() as i64)
    }

    pub(crate) fn insert(&mut self, z: Point, rho: f64) {
        let k = self.key(z);
        self.buckets.entry(k).or_default().push((z, rho));
    }

    /// min over stored q with |z − q| < reach of |z − q|/max(ρ(z), ρ(q)), capped at `cap`.
    pub(crate) fn gap(&self, z: Point, rho: f64, reach: f64, cap: f64) -> f64 {
        let (i0, j0) = self.key(z - Point::new(reach, reach));
        let (i1, j1) = self.key(z + Point::new(reach, reach));
        let mut best = cap;
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(b) = self.buckets.get(&(i, j)) {
                    for &(q, rq) in b {
                        best = best.min((z - q).norm() / rho.max(rq));
                    }
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiiReport {
    /// Number of colour classes used.
    pub colours: usize,
    pub separation: f64,
    pub floor: f64,
    /// The floor was not reached and a warning was issued.
    pub floor_missed: bool,
}

/// Greedy colour classes: cells whose dilations meet never share a colour.
fn colour_cells(cells: &[QuasiSquare]) -> Vec<usize> {
    let n = cells.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (cells[a].cx - cells[a].hw).total_cmp(&(cells[b].cx - cells[b].hw)));
    let max_hw = cells.iter().map(|c| c.hw).fold(0.0, f64::max);
    let mut colour = vec![usize::MAX; n];
    let conflict = |a: &QuasiSquare, b: &QuasiSquare| {
        (a.cx - b.cx).abs() < COLOUR_DILATION * (a.hw + b.hw) && (a.cy - b.cy).abs() < COLOUR_DILATION * (a.hh + b.hh)
    };
    for idx in 0..n {
        let i = order[idx];
        let mut used = Vec::new();
        // neighbours in x-sorted order within reach
        let reach = COLOUR_DILATION * (cells[i].hw + max_hw);
        for &j in order[..idx].iter().rev() {
            if cells[i].cx - cells[j].cx > reach + max_hw {
                break;
            }
            if colour[j] != usize::MAX && conflict(&cells[i], &cells[j]) {
                used.push(colour[j]);
            }
        }
        for &j in &order[idx + 1..] {
            if cells[j].cx - cells[i].cx > reach + max_hw {
                break;
            }
            if colour[j] != usize::MAX && conflict(&cells[i], &cells[j]) {
                used.push(colour[j]);
            }
        }
        let mut c = 0;
        while used.contains(&c) {
            c += 1;
        }
        colour[i] = c;
    }
    colour
}

/// Choose replication radii class by class so the union stays ρ-separated.
pub fn choose_separated_radii(clusters: &mut [MomentCluster], metric: &MetricField, floor: f64) -> RadiiReport {
    let cells: Vec<QuasiSquare> = clusters.iter().map(|c| c.cell).collect();
    let colour = colour_cells(&cells);
    let colours = colour.iter().copied().max().map_or(0, |c| c + 1);
    let typical = clusters.first().map_or(1.0, |c| metric.rho(c.cell.center()));
    let mut grid = DynamicGrid::new(typical.max(1e-12));
    for class in 0..colours {
        for (ci, cl) in clusters.iter_mut().enumerate() {
            if colour[ci] != class {
                continue;
            }
            let m = cl.m;
            let mut finals = Vec::with_capacity(cl.base_points.len() * m);
            for (j, &sigma) in cl.base_points.iter().enumerate() {
                let rs = metric.rho(sigma);
                if m == 1 {
                    finals.push(sigma);
                    grid.insert(sigma, rs);
                    continue;
                }
                let mut best: Option<(f64, f64, Vec<Point>)> = None;
                for frac in RADIUS_LADDER {
                    let tau = frac * rs;
                    let pts = replicate_on_circle(sigma, m, tau);
                    let own = 2.0 * tau * (PI / m as f64).sin() / rs;
                    let mut g = own;
                    for &p in &pts {
                        g = g.min(grid.gap(p, metric.rho(p), 2.0 * rs, 2.0));
                    }
                    if best.as_ref().is_none_or(|b| g > b.0) {
                        best = Some((g, tau, pts));
                    }
                }
                let (_, tau, pts) = best.expect("ladder is non-empty");
                cl.radii[j] = tau;
                for &p in &pts {
                    grid.insert(p, metric.rho(p));
                }
                finals.extend(pts);
            }
            cl.final_points = finals;
            cl.refresh();
        }
    }
    let all: Vec<Point> = clusters.iter().flat_map(|c| c.final_points.iter().copied()).collect();
    let sep = separation(&PointSequence::new(all, Provenance::User), metric);
    let floor_missed = sep < floor;
    if floor_missed {
        log::warn!("separation {sep:.4} is below the floor {floor}; continuing with the achieved value");
    }
    RadiiReport { colours, separation: sep, floor, floor_missed }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Net {
    pub sequence: PointSequence,
    pub m: usize,
    pub n: usize,
    /// μ-mass of each partition cell, 2π·m·n.
    pub cell_mass: f64,
    pub partition: Partition,
    pub clusters: Vec<MomentCluster>,
    /// Largest dilation of any cluster about its cell.
    pub dilation: f64,
    pub radii: RadiiReport,
    pub max_moment_residual: f64,
}

/// Default separation floor for replicated nets.
pub const SEPARATION_FLOOR: f64 = 0.05;

/// Net for φ on `region`: cells of mass 2πmN, n base points per cell, each
/// spread over m points.
pub fn build_net(model: &WeightModel, region: crate::types::Rect, m: usize, n: usize) -> Result<Net> {
    if region.is_empty() {
        return Err(Error::Input("empty region".into()));
    }
    let metric = MetricField::build(model, region, 4.0)?;
    build_net_with(model, &metric, region, m, n)
}

/// As [`build_net`] with a prebuilt metric covering `region`.
pub fn build_net_with(model: &WeightModel, metric: &MetricField, region: crate::types::Rect, m: usize, n: usize) -> Result<Net> {
    build_net_at(model, metric, region, m, n, region.center())
}

/// As [`build_net_with`], growing the partition from `anchor`. A net anchored
/// at η has η on a cell corner, away from every zero.
pub fn build_net_at(model: &WeightModel, metric: &MetricField, region: crate::types::Rect, m: usize, n: usize, anchor: Point) -> Result<Net> {
    if m == 0 || n == 0 {
        return Err(Error::domain("m and N must be positive"));
    }
    let cell_mass = 2.0 * PI * (m * n) as f64;
    let partition = build_partition_at(model, region, cell_mass, anchor, DEFAULT_ASPECT_BOUND)?;
    let interior: Vec<QuasiSquare> = partition.interior().copied().collect();
    if interior.is_empty() {
        return Err(Error::domain("region holds no interior cell"));
    }
    let mut clusters: Vec<MomentCluster> = interior.par_iter().map(|c| moment_match_cell(model, c, m, n)).collect::<Result<_>>()?;
    let radii = choose_separated_radii(&mut clusters, metric, SEPARATION_FLOOR);
    let points: Vec<Point> = clusters.iter().flat_map(|c| c.final_points.iter().copied()).collect();
    let dilation = clusters.iter().map(|c| c.dilation).fold(0.0, f64::max);
    let max_moment_residual = clusters.iter().map(|c| c.max_residual()).fold(0.0, f64::max);
    let mut sequence = PointSequence::new(points, Provenance::Net { m, n });
    sequence.separation = Some(radii.separation);
    Ok(Net { sequence, m, n, cell_mass, partition, clusters, dilation, radii, max_moment_residual })
}

/// Make `z0` a zero of the net: the nearest net point is moved onto `z0` and
/// the rest of its cluster is re-balanced so moments of degree < m still match.
pub fn prescribe_zero(net: &mut Net, metric: &MetricField, z0: Point) -> Result<()> {
    let (idx, _) = net.sequence.nearest(z0).ok_or_else(|| Error::domain("empty net"))?;
    let old = net.sequence.points[idx];
    let (ci, j) = net
        .clusters
        .iter()
        .enumerate()
        .find_map(|(ci, c)| c.final_points.iter().position(|p| *p == old).map(|j| (ci, j)))
        .ok_or_else(|| Error::domain("net point not found in any cluster"))?;
    let cl = &mut net.clusters[ci];
    let k = cl.final_points.len();
    if cl.m > 1 && k < 2 {
        return Err(Error::domain("cluster too small to re-balance"));
    }
    let c = cl.cell.center();
    let h = cl.cell.hw.max(cl.cell.hh);
    let mass = cl.moments[0].re;
    let w0 = (z0 - c) / h;
    let others: Vec<Point> = cl.final_points.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, z)| (z - c) / h).collect();
    let target: Vec<Point> = (1..cl.m).map(|l| cl.moments[l] * (k as f64 / mass) / h.powi(l as i32) - w0.powu(l as u32)).collect();
    let moved = match_low_moments(others, &target, 1e-12)?;
    let mut finals: Vec<Point> = moved.iter().map(|w| c + w * h).collect();
    finals.insert(j, z0);
    cl.final_points = finals;
    cl.refresh();
    let points: Vec<Point> = net.clusters.iter().flat_map(|c| c.final_points.iter().copied()).collect();
    let mut sequence = PointSequence::new(points, net.sequence.provenance.clone());
    sequence.separation = Some(separation(&sequence, metric));
    net.sequence = sequence;
    net.max_moment_residual = net.clusters.iter().map(|c| c.max_residual()).fold(0.0, f64::max);
    net.dilation = net.clusters.iter().map(|c| c.dilation).fold(0.0, f64::max);
    Ok(())
}

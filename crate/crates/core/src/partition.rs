//! Equal-mass partitions of a rectangle into quasi-squares.
//!
//! Construction grows a quasi-square around an anchor by ring extensions:
//! the current square Q gets blocks of integer mass glued on top and
//! bottom, then on the left and right of the resulting column, and the
//! union becomes the next Q. Every block is then cut into unit-mass cells
//! by repeated mass bisection. Pieces outside the region are discarded and
//! cells crossing its boundary are clipped and marked partial.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;
use crate::types::{Point, Rect};
use crate::weights::WeightModel;

/// Relative tolerance to which cell masses are integer multiples of `s`.
pub const ENTIRE_TOL: f64 = 1e-6;
/// Default bound on the side ratio of unit cells.
pub const DEFAULT_ASPECT_BOUND: f64 = 4.0;
const MAX_RINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiSquare {
    pub cx: f64,
    pub cy: f64,
    pub hw: f64,
    pub hh: f64,
    pub mass: f64,
    /// Clipped by the region boundary; excluded from net construction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

impl QuasiSquare {
    pub fn from_rect(r: &Rect, mass: f64) -> Self {
        let c = r.center();
        QuasiSquare { cx: c.re, cy: c.im, hw: 0.5 * r.width(), hh: 0.5 * r.height(), mass, partial: false }
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn rect(&self) -> Rect {
        Rect::centered(self.center(), self.hw, self.hh)
    }

    pub fn diam(&self) -> f64 {
        2.0 * self.hw.hypot(self.hh)
    }

    /// Long side over short side, ≥ 1.
    pub fn aspect(&self) -> f64 {
        self.hw.max(self.hh) / self.hw.min(self.hh)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Partition {
    pub cells: Vec<QuasiSquare>,
    pub target_mass: f64,
    pub region: Rect,
    /// Largest side ratio among interior cells.
    pub aspect_constant: f64,
    /// Smallest C with C⁻¹ρ(a) ≤ diam ≤ Cρ(a) over interior cells.
    pub diam_constant: f64,
    /// Bound used when cutting; cells above it are listed in `flagged`.
    pub aspect_bound: f64,
    /// Indices of cells whose aspect bound could not be met.
    #[serde(default)]
    pub flagged: Vec<usize>,
}

impl Partition {
    pub fn interior(&self) -> impl Iterator<Item = &QuasiSquare> {
        self.cells.iter().filter(|c| !c.partial)
    }

    pub fn interior_count(&self) -> usize {
        self.interior().count()
    }
}

/// Partition `region` into cells of mass `s`, growing from the region centre.
pub fn build_partition(model: &WeightModel, region: Rect, s: f64) -> Result<Partition> {
    build_partition_at(model, region, s, region.center(), DEFAULT_ASPECT_BOUND)
}

/// As [`build_partition`], with the first square centred at `anchor`.
pub fn build_partition_at(model: &WeightModel, region: Rect, s: f64, anchor: Point, aspect_bound: f64) -> Result<Partition> {
    if region.is_empty() {
        return Err(Error::Input("empty region".into()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!("target mass must be positive, got {s}")));
    }
    let total = model.mass_rect(&region)?;
    if total < s {
        return Err(Error::domain(format!("region mass {total} is below the target mass {s}")));
    }
    let blocks = ring_blocks(model, &region, s, anchor)?;
    let mut leaves = Vec::new();
    for (rect, n, mass) in blocks {
        split_rec(model, rect, n, mass, s, &region, aspect_bound, &mut leaves)?;
    }
    clip_to_region(model, region, s, aspect_bound, leaves)
}

/// Blocks of integer mass (rect, n, measured mass) whose union covers `region`.
fn ring_blocks(model: &WeightModel, region: &Rect, s: f64, anchor: Point) -> Result<Vec<(Rect, usize, f64)>> {
    // starting square of mass 4s
    let sq = |h: f64| model.mass_rect(&Rect::centered(anchor, h, h)).map(|m| m - 4.0 * s).unwrap_or(f64::NAN);
    let guess = model.rho_for_mass(anchor, s).unwrap_or(1.0);
    let (lo, hi) = roots::bracket_positive(sq, guess)?;
    let h = roots::solve_increasing(sq, lo, hi, 1e-14 * hi)?;
    let mut q = Rect::centered(anchor, h, h);
    let mut blocks = vec![(q, 4usize, model.mass_rect(&q)?)];
    let mut rings = 0;
    while !q.contains_rect(region) {
        rings += 1;
        if rings > MAX_RINGS {
            return Err(Error::numerical("ring extension did not cover the region", rings as f64));
        }
        let l = q.width().max(q.height());
        let t0 = 0.5 * (3.0 * l - q.height());
        let top = extend(model, s, t0, |t| Rect::new(q.x0, q.y1, q.x1, q.y1 + t), "top")?;
        let bottom = extend(model, s, t0, |t| Rect::new(q.x0, q.y0 - t, q.x1, q.y0), "bottom")?;
        let (y0, y1) = (bottom.0.y0, top.0.y1);
        let t0 = 0.5 * (3.0 * l - q.width());
        let right = extend(model, s, t0, |t| Rect::new(q.x1, y0, q.x1 + t, y1), "right")?;
        let left = extend(model, s, t0, |t| Rect::new(q.x0 - t, y0, q.x0, y1), "left")?;
        q = Rect::new(left.0.x0, y0, right.0.x1, y1);
        for b in [top, bottom, right, left] {
            if b.0.intersect(region).is_some_and(|r| !r.is_empty()) {
                blocks.push(b);
            }
        }
    }
    Ok(blocks)
}

/// Smallest strip of integer mass (in units of `s`) at least as thick as `t0`.
fn extend<F: Fn(f64) -> Rect>(model: &WeightModel, s: f64, t0: f64, strip: F, name: &str) -> Result<(Rect, usize, f64)> {
    let mass = |t: f64| model.mass_rect(&strip(t)).unwrap_or(f64::NAN);
    let m0 = mass(t0) / s;
    if !m0.is_finite() {
        return Err(Error::numerical(format!("mass of the {name} strip"), m0));
    }
    let k = ((m0 - ENTIRE_TOL).ceil() as usize).max(1);
    let target = k as f64 * s;
    let f = |t: f64| mass(t) - target;
    if f(t0) >= 0.0 {
        let r = strip(t0);
        return Ok((r, k, mass(t0)));
    }
    let mut hi = 2.0 * t0;
    let mut grow = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::numerical(format!("{name} strip: mass plateau, could not reach {k}·s"), hi));
        }
    }
    let t = roots::solve_increasing(f, t0, hi, 1e-14 * hi).map_err(|e| Error::numerical(format!("{name} strip root-find: {e}"), t0))?;
    let r = strip(t);
    Ok((r, k, model.mass_rect(&r)?))
}

/// Left (axis 0) or bottom (axis 1) part of `r` cut at coordinate `x`.
fn part(r: &Rect, axis: usize, x: f64) -> Rect {
    if axis == 0 {
        Rect::new(r.x0, r.y0, x, r.y1)
    } else {
        Rect::new(r.x0, r.y0, r.x1, x)
    }
}

fn rest(r: &Rect, axis: usize, x: f64) -> Rect {
    if axis == 0 {
        Rect::new(x, r.y0, r.x1, r.y1)
    } else {
        Rect::new(r.x0, x, r.x1, r.y1)
    }
}

/// Units in the first child. Cutting whole rows keeps cells of a uniform
/// measure square; otherwise this is ⌊n/2⌋.
fn cut_units(n: usize, aspect: f64) -> usize {
    let across = ((n as f64 / aspect).sqrt().round() as usize).max(1);
    if n % across == 0 && n / across >= 2 {
        across * (n / across / 2)
    } else {
        n / 2
    }
}

fn cut(model: &WeightModel, r: &Rect, axis: usize, target: f64) -> Result<f64> {
    let (a, b) = if axis == 0 { (r.x0, r.x1) } else { (r.y0, r.y1) };
    let f = |x: f64| model.mass_rect(&part(r, axis, x)).map(|m| m - target).unwrap_or(f64::NAN);
    roots::solve_increasing(f, a, b, 1e-13 * (b - a).max(a.abs().max(b.abs()) * 1e-3))
}

#[allow(clippy::too_many_arguments)]
fn split_rec(
    model: &WeightModel,
    r: Rect,
    n: usize,
    mass: f64,
    s: f64,
    region: &Rect,
    bound: f64,
    out: &mut Vec<(Rect, f64)>,
) -> Result<()> {
    match r.intersect(region) {
        Some(i) if !i.is_empty() => {}
        _ => return Ok(()),
    }
    if n <= 1 {
        out.push((r, mass));
        return Ok(());
    }
    let long = if r.width() >= r.height() { 0 } else { 1 };
    let aspect = r.width().max(r.height()) / r.width().min(r.height());
    let k = cut_units(n, aspect);
    let target = mass * k as f64 / n as f64;
    let try_axis = |axis: usize| -> Result<(f64, f64)> {
        let x = cut(model, &r, axis, target)?;
        // worst aspect among children that are already unit cells
        let mut worst: f64 = 1.0;
        for (child, units) in [(part(&r, axis, x), k), (rest(&r, axis, x), n - k)] {
            if units == 1 {
                worst = worst.max(child.width().max(child.height()) / child.width().min(child.height()));
            }
        }
        Ok((x, worst))
    };
    let (mut axis, (mut x, worst)) = (long, try_axis(long)?);
    if worst > bound {
        let other = try_axis(1 - long)?;
        // keep the better axis; cells still above the bound are flagged later
        if other.1 < worst {
            axis = 1 - long;
            x = other.0;
        }
    }
    let (c1, c2) = (part(&r, axis, x), rest(&r, axis, x));
    let m1 = model.mass_rect(&c1)?;
    // the second child's mass is the remainder, so masses add up exactly
    let m2 = mass - m1;
    split_rec(model, c1, k, m1, s, region, bound, out)?;
    split_rec(model, c2, n - k, m2, s, region, bound, out)
}

fn clip_to_region(model: &WeightModel, region: Rect, s: f64, bound: f64, leaves: Vec<(Rect, f64)>) -> Result<Partition> {
    let slack = 1e-10 * region.diam();
    let inner = region.expand(slack);
    let mut cells = Vec::with_capacity(leaves.len());
    for (r, mass) in leaves {
        if inner.contains_rect(&r) {
            // snap edges that agree with the region up to rounding
            let snapped = Rect::new(r.x0.max(region.x0), r.y0.max(region.y0), r.x1.min(region.x1), r.y1.min(region.y1));
            cells.push(QuasiSquare::from_rect(&snapped, mass));
        } else if let Some(c) = r.intersect(&region) {
            if c.width() > slack && c.height() > slack {
                let mut q = QuasiSquare::from_rect(&c, model.mass_rect(&c)?);
                q.partial = true;
                cells.push(q);
            }
        }
    }
    let stats: Vec<(f64, f64)> = cells
        .par_iter()
        .filter(|c| !c.partial)
        .map(|c| -> Result<(f64, f64)> {
            let rho = model.rho(c.center())?;
            let d = c.diam() / rho;
            Ok((c.aspect(), d.max(1.0 / d)))
        })
        .collect::<Result<_>>()?;
    let aspect_constant = stats.iter().map(|t| t.0).fold(1.0, f64::max);
    let diam_constant = stats.iter().map(|t| t.1).fold(1.0, f64::max);
    let flagged = cells.iter().enumerate().filter(|(_, c)| !c.partial && c.aspect() > bound).map(|(i, _)| i).collect();
    Ok(Partition { cells, target_mass: s, region, aspect_constant, diam_constant, aspect_bound: bound, flagged })
}

/// Split a cell of mass ≈ n·s into n cells of mass s by recursive bisection.
pub fn split_integer_mass(model: &WeightModel, cell: &QuasiSquare, s: f64) -> Result<Vec<QuasiSquare>> {
    let ratio = cell.mass / s;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > ENTIRE_TOL * n.max(1.0) {
        return Err(Error::domain(format!("cell mass {} is not an integer multiple of {s}", cell.mass)));
    }
    let n = n as usize;
    if n == 1 {
        return Ok(vec![*cell]);
    }
    let r = cell.rect();
    let mut out = Vec::new();
    split_rec(model, r, n, cell.mass, s, &r, DEFAULT_ASPECT_BOUND, &mut out)?;
    Ok(out.into_iter().map(|(r, m)| QuasiSquare::from_rect(&r, m)).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    pub pass: bool,
    /// Worst |mass − s|/s over interior cells, with the cell index.
    pub worst_mass_error: (f64, usize),
    pub worst_aspect: (f64, usize),
    /// Range of diam/ρ(centre) over interior cells.
    pub diam_over_rho: (f64, f64),
    /// Region area minus the area covered by cells, relative to the region area.
    pub coverage_gap: f64,
    /// Total pairwise overlap area, relative to the region area.
    pub overlap: f64,
    pub failures: Vec<String>,
}

/// Recompute masses, aspect ratios, diam/ρ and coverage of a partition.
pub fn verify_partition(p: &Partition, model: &WeightModel) -> PartitionReport {
    let s = p.target_mass;
    let per_cell: Vec<(f64, f64, f64)> = p
        .cells
        .par_iter()
        .map(|c| {
            if c.partial {
                return (0.0, 1.0, f64::NAN);
            }
            let m = model.mass_rect(&c.rect()).unwrap_or(f64::NAN);
            let rho = model.rho(c.center()).unwrap_or(f64::NAN);
            ((m - s).abs() / s, c.aspect(), c.diam() / rho)
        })
        .collect();
    let mut worst_mass = (0.0f64, 0usize);
    let mut worst_aspect = (1.0f64, 0usize);
    let mut dr = (f64::INFINITY, 0.0f64);
    for (i, &(e, a, d)) in per_cell.iter().enumerate() {
        if p.cells[i].partial {
            continue;
        }
        if !(e <= worst_mass.0) {
            worst_mass = (e, i);
        }
        if a > worst_aspect.0 {
            worst_aspect = (a, i);
        }
        dr = (dr.0.min(d), dr.1.max(d));
    }
    let area = p.region.area();
    let covered: f64 = p.cells.iter().map(|c| c.rect().intersect(&p.region).map_or(0.0, |r| r.area())).sum();
    let coverage_gap = (area - covered) / area;
    let overlap = overlap_area(&p.cells) / area;
    let mut failures = Vec::new();
    if !(worst_mass.0 <= 1e-3) {
        failures.push(format!("mass error {:.3e} at cell {}", worst_mass.0, worst_mass.1));
    }
    if worst_aspect.0 > p.aspect_bound {
        failures.push(format!("aspect {:.3} at cell {} exceeds {}", worst_aspect.0, worst_aspect.1, p.aspect_bound));
    }
    if coverage_gap.abs() > 1e-8 {
        failures.push(format!("coverage gap {coverage_gap:.3e} of the region area"));
    }
    if overlap > 1e-8 {
        failures.push(format!("cells overlap on {overlap:.3e} of the region area"));
    }
    if !dr.0.is_finite() && p.interior_count() > 0 {
        failures.push("ρ unavailable at some cell centre".into());
    }
    PartitionReport { pass: failures.is_empty(), worst_mass_error: worst_mass, worst_aspect, diam_over_rho: dr, coverage_gap, overlap, failures }
}

fn overlap_area(cells: &[QuasiSquare]) -> f64 {
    let mut rects: Vec<Rect> = cells.iter().map(|c| c.rect()).collect();
    rects.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    let mut total = 0.0;
    for i in 0..rects.len() {
        for j in i + 1..rects.len() {
            if rects[j].x0 >= rects[i].x1 {
                break;
            }
            if let Some(r) = rects[i].intersect(&rects[j]) {
                total += r.area();
            }
        }
    }
    total
}

/// Cell-union sandwich around D^R(z) = D(z, Rρ(z)): returns (ε_in, ε_out) with
/// D^{R−ε_in}(z) inside the union of cells contained in D^R(z), and the union
/// of cells meeting D^R(z) inside D^{R+ε_out}(z). Partial cells count as cells.
pub fn sandwich(p: &Partition, model: &WeightModel, z: Point, big_r: f64) -> Result<(f64, f64)> {
    let rho = model.rho(z)?;
    let rad = big_r * rho;
    let mut eps_out: f64 = 0.0;
    // radius of the largest disk about z covered by cells inside D^R(z)
    let mut covered = rad;
    for c in &p.cells {
        let r = c.rect();
        let near = r.dist(z);
        if near > rad {
            continue;
        }
        let far = r.max_dist(z);
        eps_out = eps_out.max(far / rho - big_r);
        if far > rad {
            // this cell meets the disk but is not inside it
            covered = covered.min(near);
        }
    }
    Ok(((rad - covered) / rho, eps_out))
}

/// μ(R_α^{r+ε}(z)) / μ(R_α^r(z)) where R_α^r(z) has half-sides rρ(z) and αrρ(z).
pub fn rect_annulus_ratio(model: &WeightModel, z: Point, r: f64, eps: f64, alpha: f64) -> Result<f64> {
    let rho = model.rho(z)?;
    let rect = |t: f64| Rect::centered(z, t * rho, alpha * t * rho);
    Ok(model.mass_rect(&rect(r + eps))? / model.mass_rect(&rect(r))?)
}

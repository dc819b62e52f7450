//! Point sequences with a uniform-bucket spatial index.

use crate::types::{Point, Rect};
use serde::{Deserialize, Serialize};

/// Where a sequence came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    User,
    Lattice { a: f64 },
    Net { m: usize, n: usize },
    Completion,
}

/// Uniform bucket grid over the bounding box of a point set.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    /// start offsets into `order`, length nx*ny + 1
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl SpatialIndex {
    pub fn build(points: &[Point], cell: f64) -> Self {
        let cell = if cell > 0.0 && cell.is_finite() { cell } else { 1.0 };
        if points.is_empty() {
            return SpatialIndex { x0: 0.0, y0: 0.0, cell, nx: 1, ny: 1, starts: vec![0, 0], order: vec![] };
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            x0 = x0.min(p.re);
            y0 = y0.min(p.im);
            x1 = x1.max(p.re);
            y1 = y1.max(p.im);
        }
        // keep the bucket count bounded
        let mut cell = cell;
        while ((x1 - x0) / cell + 1.0) * ((y1 - y0) / cell + 1.0) > 4.0e6 {
            cell *= 2.0;
        }
        let nx = ((x1 - x0) / cell).floor() as usize + 1;
        let ny = ((y1 - y0) / cell).floor() as usize + 1;
        let mut counts = vec![0usize; nx * ny + 1];
        let key = |p: &Point| {
            let i = (((p.re - x0) / cell).floor() as usize).min(nx - 1);
            let j = (((p.im - y0) / cell).floor() as usize).min(ny - 1);
            j * nx + i
        };
        for p in points {
            counts[key(p) + 1] += 1;
        }
        for k in 1..counts.len() {
            counts[k] += counts[k - 1];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (idx, p) in points.iter().enumerate() {
            let k = key(p);
            order[fill[k]] = idx;
            fill[k] += 1;
        }
        SpatialIndex { x0, y0, cell, nx, ny, starts: counts, order }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn bucket_range(&self, lo: f64, hi: f64, o: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - o) / self.cell).floor();
        let b = ((hi - o) / self.cell).floor();
        if b < 0.0 || a > (n - 1) as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Indices of points in buckets meeting the square of half-side `r` around `z` (a superset of the disk).
    pub fn candidates(&self, z: Point, r: f64, mut f: impl FnMut(usize)) {
        let Some((i0, i1)) = self.bucket_range(z.re - r, z.re + r, self.x0, self.nx) else { return };
        let Some((j0, j1)) = self.bucket_range(z.im - r, z.im + r, self.y0, self.ny) else { return };
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * self.nx + i;
                for &idx in &self.order[self.starts[k]..self.starts[k + 1]] {
                    f(idx);
                }
            }
        }
    }

    /// Points in ring `k` of buckets (Chebyshev distance k) around the bucket of `z`.
    fn ring(&self, z: Point, k: usize, mut f: impl FnMut(usize)) -> bool {
        let ci = ((z.re - self.x0) / self.cell).floor() as i64;
        let cj = ((z.im - self.y0) / self.cell).floor() as i64;
        let k = k as i64;
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let mut any_inside = false;
        let visit = |i: i64, j: i64, f: &mut dyn FnMut(usize)| {
            let b = j as usize * self.nx + i as usize;
            for &idx in &self.order[self.starts[b]..self.starts[b + 1]] {
                f(idx);
            }
        };
        // top and bottom rows, then the side columns without their corners
        let (ilo, ihi) = ((ci - k).max(0), (ci + k).min(nx - 1));
        for j in [cj - k, cj + k] {
            if (0..ny).contains(&j) && ilo <= ihi {
                any_inside = true;
                for i in ilo..=ihi {
                    visit(i, j, &mut f);
                }
            }
            if k == 0 {
                break;
            }
        }
        let (jlo, jhi) = ((cj - k + 1).max(0), (cj + k - 1).min(ny - 1));
        if k > 0 {
            for i in [ci - k, ci + k] {
                if (0..nx).contains(&i) && jlo <= jhi {
                    any_inside = true;
                    for j in jlo..=jhi {
                        visit(i, j, &mut f);
                    }
                }
            }
        }
        any_inside || k == 0
    }

    /// Expanding search: calls `visit(idx)` for candidates ring by ring until
    /// `stop(ring_min_distance)` is true or the grid is exhausted.
    pub fn expanding<S>(&self, z: Point, state: &mut S, visit: impl Fn(&mut S, usize), stop: impl Fn(&S, f64) -> bool) {
        let ci = ((z.re - self.x0) / self.cell).floor();
        let cj = ((z.im - self.y0) / self.cell).floor();
        // distance from z to the box of its (possibly virtual) bucket is 0;
        // ring k is at least (k−1)·cell away, measured from the bucket box
        let outside = {
            let dx = (self.x0 - z.re).max(0.0).max(z.re - (self.x0 + self.nx as f64 * self.cell));
            let dy = (self.y0 - z.im).max(0.0).max(z.im - (self.y0 + self.ny as f64 * self.cell));
            dx.max(dy)
        };
        let kmax = (self.nx.max(self.ny) as f64 + ci.abs().max(cj.abs())) as usize + 2;
        for k in 0..=kmax {
            let ring_min = ((k as f64 - 1.0) * self.cell).max(0.0).max(outside - self.cell);
            if k > 0 && stop(state, ring_min) {
                return;
            }
            self.ring(z, k, |i| visit(state, i));
        }
    }
}

/// A candidate sequence Λ.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "SequenceFile", from = "SequenceFile")]
pub struct PointSequence {
    pub points: Vec<Point>,
    pub provenance: Provenance,
    pub separation: Option<f64>,
    index: SpatialIndex,
}

impl PointSequence {
    pub fn new(points: Vec<Point>, provenance: Provenance) -> Self {
        let cell = default_cell(&points);
        let index = SpatialIndex::build(&points, cell);
        PointSequence { points, provenance, separation: None, index }
    }

    pub fn user(points: Vec<Point>) -> Self {
        Self::new(points, Provenance::User)
    }

    /// Square lattice aℤ² (shifted by `offset`) intersected with `window`.
    pub fn lattice(a: f64, window: &Rect, offset: Point) -> Self {
        let mut pts = Vec::new();
        let i0 = ((window.x0 - offset.re) / a).ceil() as i64;
        let i1 = ((window.x1 - offset.re) / a).floor() as i64;
        let j0 = ((window.y0 - offset.im) / a).ceil() as i64;
        let j1 = ((window.y1 - offset.im) / a).floor() as i64;
        for j in j0..=j1 {
            for i in i0..=i1 {
                pts.push(Point::new(offset.re + a * i as f64, offset.im + a * j as f64));
            }
        }
        Self::new(pts, Provenance::Lattice { a })
    }

    /// Rebuild the index with buckets of the given size.
    pub fn with_cell(mut self, cell: f64) -> Self {
        self.index = SpatialIndex::build(&self.points, cell);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// #(Λ ∩ closed D(z, r)), counting points within 1e-12 of the circle.
    pub fn count_in_disk(&self, z: Point, r: f64) -> usize {
        let rr = r * (1.0 + 1e-12) + 1e-12;
        let mut n = 0;
        self.index.candidates(z, rr, |i| {
            if (self.points[i] - z).norm() <= rr {
                n += 1;
            }
        });
        n
    }

    /// Indices of points in the closed disk.
    pub fn in_disk(&self, z: Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.index.candidates(z, r, |i| {
            if (self.points[i] - z).norm() <= r {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Index and distance of the Euclidean nearest point.
    pub fn nearest(&self, z: Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.index.expanding(
            z,
            &mut best,
            |best, i| {
                let d = (self.points[i] - z).norm();
                if d < best.1 || (d == best.1 && i < best.0) {
                    *best = (i, d);
                }
            },
            |best, ring_min| ring_min > best.1,
        );
        Some(best)
    }

    pub fn bounding_rect(&self) -> Option<Rect> {
        if self.points.is_empty() {
            return None;
        }
        let mut r = Rect { x0: f64::INFINITY, y0: f64::INFINITY, x1: f64::NEG_INFINITY, y1: f64::NEG_INFINITY };
        for p in &self.points {
            r.x0 = r.x0.min(p.re);
            r.y0 = r.y0.min(p.im);
            r.x1 = r.x1.max(p.re);
            r.y1 = r.y1.max(p.im);
        }
        Some(r)
    }

    /// Union with another sequence (provenance becomes `User`).
    pub fn union(&self, other: &PointSequence) -> PointSequence {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        PointSequence::new(pts, Provenance::User)
    }
}

fn default_cell(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut r = Rect { x0: f64::INFINITY, y0: f64::INFINITY, x1: f64::NEG_INFINITY, y1: f64::NEG_INFINITY };
    for p in points {
        r.x0 = r.x0.min(p.re);
        r.y0 = r.y0.min(p.im);
        r.x1 = r.x1.max(p.re);
        r.y1 = r.y1.max(p.im);
    }
    // about two points per bucket on average
    let side = r.width().max(r.height());
    let area = r.area().max(side * side / points.len() as f64).max(1e-12);
    (2.0 * area / points.len() as f64).sqrt().max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_and_nearest() {
        let s = PointSequence::lattice(1.0, &Rect::square(5.0), Point::new(0.0, 0.0));
        assert_eq!(s.len(), 121);
        assert_eq!(s.count_in_disk(Point::new(0.0, 0.0), 1.0), 5);
        let (i, d) = s.nearest(Point::new(2.2, -3.9)).unwrap();
        assert_eq!(s.points[i], Point::new(2.0, -4.0));
        assert!((d - (0.04f64 + 0.01).sqrt()).abs() < 1e-12);
        let (_, d) = s.nearest(Point::new(40.0, 0.0)).unwrap();
        assert!((d - 35.0).abs() < 1e-12);
    }
}

/// On-disk form: `{"points": [[x, y], ...]}` plus optional provenance and separation.
#[derive(Serialize, Deserialize)]
struct SequenceFile {
    points: Vec<[f64; 2]>,
    #[serde(default = "user_provenance")]
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    separation: Option<f64>,
}

fn user_provenance() -> Provenance {
    Provenance::User
}

impl From<PointSequence> for SequenceFile {
    fn from(s: PointSequence) -> Self {
        SequenceFile { points: s.points.iter().map(|p| [p.re, p.im]).collect(), provenance: s.provenance, separation: s.separation }
    }
}

impl From<SequenceFile> for PointSequence {
    fn from(f: SequenceFile) -> Self {
        let mut s = PointSequence::new(f.points.into_iter().map(|[x, y]| Point::new(x, y)).collect(), f.provenance);
        s.separation = f.separation;
        s
    }
}

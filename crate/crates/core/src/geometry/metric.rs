//! The radius field ρ on a window and the conformal distance d_φ with
//! length element |dz|/ρ(z).

use super::sequence::PointSequence;
use crate::error::{Error, Result};
use crate::quad;
use crate::types::{Point, Rect};
use crate::weights::WeightModel;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// How ρ is evaluated between exact root finds.
#[derive(Debug, Clone)]
enum RhoCache {
    Constant(f64),
    /// ρ as a function of |z − centre|, tabulated at spacing `step`.
    Radial { center: Point, step: f64, values: Vec<f64> },
    /// ρ on the graph nodes, bilinear in between.
    Grid,
}

/// Cached ρ on a window plus the king graph used for geodesic distances.
#[derive(Debug, Clone)]
pub struct MetricField {
    model: WeightModel,
    window: Rect,
    h: f64,
    nx: usize,
    ny: usize,
    rho_nodes: Vec<f64>,
    cache: RhoCache,
    tol: f64,
}

/// Default graph resolution: nodes per unit ρ at the window centre.
pub const DEFAULT_RESOLUTION: f64 = 8.0;
const MAX_NODES: usize = 2_000_000;

#[derive(Copy, Clone, PartialEq)]
struct State {
    d: f64,
    node: usize,
}
impl Eq for State {}
impl Ord for State {
    fn cmp(&self, o: &Self) -> Ordering {
        o.d.total_cmp(&self.d).then_with(|| o.node.cmp(&self.node))
    }
}
impl PartialOrd for State {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

const NEIGHBOURS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

impl MetricField {
    /// Build with `resolution` graph nodes per unit ρ(window centre).
    pub fn build(model: &WeightModel, window: Rect, resolution: f64) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::domain("empty metric window"));
        }
        if !(resolution > 0.0) {
            return Err(Error::domain("resolution must be positive"));
        }
        let rho_c = model.rho(window.center())?;
        let mut h = rho_c / resolution;
        let count = |h: f64| ((window.width() / h).ceil() as usize + 1) * ((window.height() / h).ceil() as usize + 1);
        while count(h) > MAX_NODES {
            h *= 1.25;
        }
        if h > rho_c / resolution {
            log::warn!("metric grid coarsened to h = {h:.4} to respect the node cap");
        }
        let nx = (window.width() / h).ceil() as usize + 1;
        let ny = (window.height() / h).ceil() as usize + 1;
        let hx = window.width() / (nx - 1) as f64;
        let hy = window.height() / (ny - 1) as f64;
        let h = hx.max(hy);
        let window = Rect { x1: window.x0 + hx * (nx - 1) as f64, y1: window.y0 + hy * (ny - 1) as f64, ..window };
        let cache = if let Some(d) = model.constant_density() {
            RhoCache::Constant((1.0 / (std::f64::consts::PI * d)).sqrt())
        } else if let Some((_, _, center)) = model.radial_params() {
            let dmax = window.max_dist(center) + h;
            let step = (h / 4.0).min(rho_c / 32.0);
            let n = (dmax / step).ceil() as usize + 3;
            let values: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|k| model.rho(center + Point::new(k as f64 * step, 0.0)))
                .collect::<Result<_>>()?;
            RhoCache::Radial { center, step, values }
        } else {
            RhoCache::Grid
        };
        let mut mf = MetricField { model: model.clone(), window, h, nx, ny, rho_nodes: vec![], cache, tol: 1e-10 };
        let nodes: Vec<Point> = (0..nx * ny).map(|k| mf.node_point(k)).collect();
        mf.rho_nodes = match &mf.cache {
            RhoCache::Grid => nodes.par_iter().map(|&z| model.rho(z)).collect::<Result<_>>()?,
            _ => nodes.iter().map(|&z| mf.rho(z)).collect(),
        };
        if matches!(mf.cache, RhoCache::Grid) {
            // bilinear interpolation error bound from the Lipschitz property
            mf.tol = h;
        }
        Ok(mf)
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Accuracy of [`MetricField::rho`] relative to the exact root.
    pub fn rho_tol(&self) -> f64 {
        self.tol
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    fn hx(&self) -> f64 {
        self.window.width() / (self.nx - 1) as f64
    }

    fn hy(&self) -> f64 {
        self.window.height() / (self.ny - 1) as f64
    }

    fn node_point(&self, k: usize) -> Point {
        let (i, j) = (k % self.nx, k / self.nx);
        Point::new(self.window.x0 + i as f64 * self.hx(), self.window.y0 + j as f64 * self.hy())
    }

    fn nearest_node(&self, z: Point) -> usize {
        let i = ((z.re - self.window.x0) / self.hx()).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((z.im - self.window.y0) / self.hy()).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        j * self.nx + i
    }

    /// ρ(z) from the cache (exact for constant densities).
    pub fn rho(&self, z: Point) -> f64 {
        match &self.cache {
            RhoCache::Constant(r) => *r,
            RhoCache::Radial { center, step, values } => {
                let t = (z - center).norm() / step;
                let k = (t.floor() as usize).min(values.len() - 3);
                let u = t - k as f64;
                // cubic through k−1..k+2 (one-sided at the start)
                let (km, k0, k1, k2) = if k == 0 { (0, 0, 1, 2) } else { (k - 1, k, k + 1, k + 2) };
                let (p0, p1, p2, p3) = (values[km], values[k0], values[k1], values[k2.min(values.len() - 1)]);
                if k == 0 {
                    // ρ is even in the radial distance: reflect
                    let p0 = values[1];
                    catmull(p0, p1, p2, p3, u)
                } else {
                    catmull(p0, p1, p2, p3, u)
                }
            }
            RhoCache::Grid => {
                let fx = ((z.re - self.window.x0) / self.hx()).clamp(0.0, (self.nx - 1) as f64);
                let fy = ((z.im - self.window.y0) / self.hy()).clamp(0.0, (self.ny - 1) as f64);
                let i = (fx.floor() as usize).min(self.nx - 2);
                let j = (fy.floor() as usize).min(self.ny - 2);
                let (u, v) = (fx - i as f64, fy - j as f64);
                let r = |i: usize, j: usize| self.rho_nodes[j * self.nx + i];
                r(i, j) * (1.0 - u) * (1.0 - v) + r(i + 1, j) * u * (1.0 - v) + r(i, j + 1) * (1.0 - u) * v + r(i + 1, j + 1) * u * v
            }
        }
    }

    /// ρ(z) by a fresh root find.
    pub fn rho_exact(&self, z: Point) -> Result<f64> {
        self.model.rho(z)
    }

    /// Cached node values (for invariant checks).
    pub fn nodes(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        (0..self.nx * self.ny).map(move |k| (self.node_point(k), self.rho_nodes[k]))
    }

    fn check(&self, z: Point) -> Result<()> {
        let slack = 1e-9 * (1.0 + self.window.width().max(self.window.height()));
        if !self.window.expand(slack).contains(z) {
            return Err(Error::domain(format!("point ({}, {}) outside metric window", z.re, z.im)));
        }
        Ok(())
    }

    /// ∫ |dz|/ρ along the straight segment [a, b].
    pub fn segment_length(&self, a: Point, b: Point) -> f64 {
        let len = (b - a).norm();
        if len == 0.0 {
            return 0.0;
        }
        if let RhoCache::Constant(r) = self.cache {
            return len / r;
        }
        // panels of about one ρ, 6-point Gauss in each
        let rho_min = self.rho(a).min(self.rho(b)).max(1e-300);
        let panels = ((len / rho_min).ceil() as usize).clamp(1, 4096);
        let (x, w) = quad::gl_cached(6);
        let mut s = 0.0;
        for p in 0..panels {
            let t0 = p as f64 / panels as f64;
            let t1 = (p + 1) as f64 / panels as f64;
            let (c, hw) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            for k in 0..x.len() {
                let t = c + hw * x[k];
                s += w[k] * hw / self.rho(a + (b - a) * t);
            }
        }
        s * len
    }

    fn edge_weight(&self, a: usize, b: usize) -> f64 {
        let pa = self.node_point(a);
        let pb = self.node_point(b);
        let len = (pb - pa).norm();
        if let RhoCache::Constant(r) = self.cache {
            return len / r;
        }
        // Simpson on the edge with node values at the ends
        let mid = self.rho(0.5 * (pa + pb));
        len * (1.0 / self.rho_nodes[a] + 4.0 / mid + 1.0 / self.rho_nodes[b]) / 6.0
    }

    /// Dijkstra from `sources` (node, initial distance); stops once `target` is settled.
    fn dijkstra(&self, sources: &[(usize, f64)], target: Option<usize>) -> (Vec<f64>, Vec<usize>) {
        let n = self.nx * self.ny;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for &(s, d0) in sources {
            if d0 < dist[s] {
                dist[s] = d0;
                heap.push(State { d: d0, node: s });
            }
        }
        while let Some(State { d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            if Some(node) == target {
                break;
            }
            let (i, j) = ((node % self.nx) as i64, (node / self.nx) as i64);
            for (di, dj) in NEIGHBOURS {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
                    continue;
                }
                let nb = jj as usize * self.nx + ii as usize;
                let nd = d + self.edge_weight(node, nb);
                if nd < dist[nb] {
                    dist[nb] = nd;
                    prev[nb] = node;
                    heap.push(State { d: nd, node: nb });
                }
            }
        }
        (dist, prev)
    }

    /// Greedy shortcutting of a polyline: replace sub-chains by straight
    /// segments whenever that is shorter in the metric. Returns the kept vertices.
    fn string_pull(&self, path: &[Point]) -> Vec<Point> {
        if path.len() < 2 {
            return path.to_vec();
        }
        let seg: Vec<f64> = path.windows(2).map(|w| self.segment_length(w[0], w[1])).collect();
        let mut prefix = vec![0.0; path.len()];
        for k in 1..path.len() {
            prefix[k] = prefix[k - 1] + seg[k - 1];
        }
        let mut kept = vec![path[0]];
        let mut i = 0;
        while i + 1 < path.len() {
            // farthest j whose chord beats the chain, scanning a bounded horizon
            let mut best_j = i + 1;
            let horizon = (path.len() - 1).min(i + 256);
            let mut step = 1;
            let mut j = i + 2;
            while j <= horizon {
                let chord = self.segment_length(path[i], path[j]);
                if chord <= prefix[j] - prefix[i] {
                    best_j = j;
                }
                j += step;
                if j - i > 16 {
                    step = 2;
                }
            }
            kept.push(path[best_j]);
            i = best_j;
        }
        kept
    }

    /// Shorten a polyline with fixed ends, coarse to fine: split it into
    /// pieces of metric length ≤ L and slide each interior vertex along the
    /// normal of its neighbours' chord to the minimum of the two adjacent
    /// lengths, for L = 8, 4, 2, 1.
    fn relax(&self, path: &[Point]) -> f64 {
        let total = |pts: &[Point]| pts.windows(2).map(|w| self.segment_length(w[0], w[1])).sum::<f64>();
        let mut pts = path.to_vec();
        let mut len = total(&pts);
        for piece in [8.0, 4.0, 2.0, 1.0] {
            let mut fine = vec![pts[0]];
            for w in pts.windows(2) {
                let n = ((self.segment_length(w[0], w[1]) / piece).ceil() as usize).clamp(1, 4096);
                for k in 1..=n {
                    fine.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
                }
            }
            pts = fine;
            for _ in 0..24 {
                for i in 1..pts.len().saturating_sub(1) {
                    let (p, q) = (pts[i - 1], pts[i + 1]);
                    let chord = q - p;
                    if chord.norm() == 0.0 {
                        continue;
                    }
                    let nrm = Point::new(-chord.im, chord.re) / chord.norm();
                    let v = pts[i];
                    let f = |t: f64| {
                        let x = v + nrm * t;
                        if self.window.contains(x) { self.segment_length(p, x) + self.segment_length(x, q) } else { f64::INFINITY }
                    };
                    let span = 0.5 * chord.norm();
                    let t = golden_min(&f, -span, span, 1e-6 * span);
                    if f(t) < f(0.0) {
                        pts[i] = v + nrm * t;
                    }
                }
                let next = total(&pts);
                let done = len - next <= 1e-10 * len;
                len = next.min(len);
                if done {
                    break;
                }
            }
        }
        len
    }

    /// Approximate geodesic distance d_φ(z, ζ).
    pub fn d_phi(&self, z: Point, zeta: Point) -> Result<f64> {
        self.check(z)?;
        self.check(zeta)?;
        if z == zeta {
            return Ok(0.0);
        }
        // canonical orientation makes the result exactly symmetric
        let (a, b) = if (z.re, z.im) <= (zeta.re, zeta.im) { (z, zeta) } else { (zeta, z) };
        let straight = self.segment_length(a, b);
        if let RhoCache::Constant(_) = self.cache {
            return Ok(straight);
        }
        let na = self.nearest_node(a);
        let nb = self.nearest_node(b);
        if na == nb {
            return Ok(straight);
        }
        let (_, prev) = self.dijkstra(&[(na, 0.0)], Some(nb));
        let mut path = vec![b];
        let mut cur = nb;
        while cur != usize::MAX {
            path.push(self.node_point(cur));
            if cur == na {
                break;
            }
            cur = prev[cur];
        }
        path.push(a);
        path.reverse();
        let pulled = self.string_pull(&path);
        // the graph route and the chord may settle in different local minima
        Ok(straight.min(self.relax(&pulled)).min(self.relax(&[a, b])))
    }

    /// d_φ(z, Λ) for many query points, via a multi-source Dijkstra field plus
    /// straight-segment refinement to nearby sequence points.
    pub fn distance_to_set(&self, seq: &PointSequence, queries: &[Point]) -> Result<Vec<f64>> {
        for q in queries {
            self.check(*q)?;
        }
        if seq.is_empty() {
            return Ok(vec![f64::INFINITY; queries.len()]);
        }
        if let RhoCache::Constant(r) = self.cache {
            return Ok(queries.iter().map(|&q| seq.nearest(q).map(|(_, d)| d / r).unwrap_or(f64::INFINITY)).collect());
        }
        let sources: Vec<(usize, f64)> = seq
            .points
            .iter()
            .filter(|p| self.window.contains(**p))
            .map(|&p| {
                let n = self.nearest_node(p);
                (n, self.segment_length(p, self.node_point(n)))
            })
            .collect();
        let (field, _) = self.dijkstra(&sources, None);
        Ok(queries
            .par_iter()
            .map(|&q| {
                let mut best = f64::INFINITY;
                // graph value through the surrounding nodes
                let fx = ((q.re - self.window.x0) / self.hx()).clamp(0.0, (self.nx - 1) as f64);
                let fy = ((q.im - self.window.y0) / self.hy()).clamp(0.0, (self.ny - 1) as f64);
                let i = (fx.floor() as usize).min(self.nx - 2);
                let j = (fy.floor() as usize).min(self.ny - 2);
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let k = (j + dj) * self.nx + i + di;
                    best = best.min(field[k] + self.segment_length(q, self.node_point(k)));
                }
                // direct segments to points near the Euclidean nearest one
                if let Some((_, d0)) = seq.nearest(q) {
                    let radius = 2.0 * d0 + 1e-12;
                    seq.index().candidates(q, radius, |idx| {
                        let p = seq.points[idx];
                        if (p - q).norm() <= radius {
                            best = best.min(self.segment_length(q, p));
                        }
                    });
                }
                best
            })
            .collect())
    }
}

fn catmull(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3)
}

/// Minimum of a unimodal-ish f on [a, b] by golden-section search.
fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

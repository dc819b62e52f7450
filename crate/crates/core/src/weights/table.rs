//! Laplacian density given on a rectangular grid, bilinearly interpolated
//! and clamped to the edge values outside the grid.

use crate::error::{Error, Result};
use crate::quad;
use crate::types::{Point, Rect};
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct DensityTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// values[j * nx + i] at (xs[i], ys[j])
    values: Vec<f64>,
}

impl DensityTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::Input("density table needs at least 2×2 nodes".into()));
        }
        if values.len() != xs.len() * ys.len() {
            return Err(Error::Input("density table is not a full grid".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("density table coordinates must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input("density table values must be finite and nonnegative".into()));
        }
        Ok(DensityTable { xs, ys, values })
    }

    /// Parse CSV rows `x,y,value` (header optional, any row order).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::Input(format!("line {}: expected x,y,value", k + 1)));
            }
            match (f[0].parse::<f64>(), f[1].parse::<f64>(), f[2].parse::<f64>()) {
                (Ok(x), Ok(y), Ok(v)) => rows.push((x, y, v)),
                _ if k == 0 => continue,
                _ => return Err(Error::Input(format!("line {}: not numeric", k + 1))),
            }
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let mut values = vec![f64::NAN; xs.len() * ys.len()];
        for (x, y, v) in rows {
            let i = xs.binary_search_by(|a| a.total_cmp(&x)).unwrap();
            let j = ys.binary_search_by(|a| a.total_cmp(&y)).unwrap();
            values[j * xs.len() + i] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("density table is missing grid nodes".into()));
        }
        Self::new(xs, ys, values)
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(self.xs[0], self.ys[0], *self.xs.last().unwrap(), *self.ys.last().unwrap())
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.xs.len() + i]
    }

    fn locate(v: &[f64], t: f64) -> (usize, f64) {
        let n = v.len();
        if t <= v[0] {
            return (0, 0.0);
        }
        if t >= v[n - 1] {
            return (n - 2, 1.0);
        }
        let i = v.partition_point(|a| *a <= t) - 1;
        let i = i.min(n - 2);
        (i, (t - v[i]) / (v[i + 1] - v[i]))
    }

    pub fn density(&self, z: Point) -> f64 {
        let (i, u) = Self::locate(&self.xs, z.re);
        let (j, v) = Self::locate(&self.ys, z.im);
        self.at(i, j) * (1.0 - u) * (1.0 - v) + self.at(i + 1, j) * u * (1.0 - v) + self.at(i, j + 1) * (1.0 - u) * v + self.at(i + 1, j + 1) * u * v
    }

    /// Breakpoints of [a, b] along one axis, with the interpolation cell of each piece.
    fn pieces(nodes: &[f64], a: f64, b: f64) -> Vec<(f64, f64, usize)> {
        let mut cuts = vec![a];
        cuts.extend(nodes.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        cuts.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                let (i, _) = Self::locate(nodes, m);
                (w[0], w[1], i)
            })
            .collect()
    }

    /// (∫(1−u), ∫u) over [p, q] with u the clamped local coordinate in cell i.
    fn weights(nodes: &[f64], p: f64, q: f64, i: usize) -> (f64, f64) {
        let (lo, hi) = (nodes[i], nodes[i + 1]);
        let len = q - p;
        if q <= lo {
            return (len, 0.0);
        }
        if p >= hi {
            return (0.0, len);
        }
        let h = hi - lo;
        let u1 = ((p - lo) + (q - lo)) / (2.0 * h) * len;
        (len - u1, u1)
    }

    /// Exact integral of the clamped bilinear interpolant over a rectangle.
    pub fn mass_rect(&self, r: &Rect) -> f64 {
        let mut total = 0.0;
        for (xp, xq, i) in Self::pieces(&self.xs, r.x0, r.x1) {
            let (a0, a1) = Self::weights(&self.xs, xp, xq, i);
            for (yp, yq, j) in Self::pieces(&self.ys, r.y0, r.y1) {
                let (b0, b1) = Self::weights(&self.ys, yp, yq, j);
                total += self.at(i, j) * a0 * b0 + self.at(i + 1, j) * a1 * b0 + self.at(i, j + 1) * a0 * b1 + self.at(i + 1, j + 1) * a1 * b1;
            }
        }
        total
    }

    /// φ as the logarithmic potential (1/2π)∫ log|z − ζ| dμ(ζ) of the tabulated
    /// region, normalised to vanish at the table centre.
    pub fn phi(&self, z: Point) -> f64 {
        self.raw_potential(z) - self.raw_potential(self.bounds().center())
    }

    fn raw_potential(&self, z: Point) -> f64 {
        let mut s = 0.0;
        for j in 0..self.ys.len() - 1 {
            for i in 0..self.xs.len() - 1 {
                let cell = Rect::new(self.xs[i], self.ys[j], self.xs[i + 1], self.ys[j + 1]);
                let mean = 0.25 * (self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1) + self.at(i + 1, j + 1));
                if cell.dist(z) < cell.diam() {
                    // singular: constant part in closed form, bilinear remainder by Gauss
                    let rem = quad::gauss_rect(|x, y| (self.density(Point::new(x, y)) - mean) * (Point::new(x, y) - z).norm().max(1e-300).ln(), &cell, 8);
                    s += mean * quad::log_integral_rect(&cell, z) + rem;
                } else {
                    s += quad::gauss_rect(|x, y| self.density(Point::new(x, y)) * (Point::new(x, y) - z).norm().ln(), &cell, 3);
                }
            }
        }
        s / (2.0 * PI)
    }
}

//! Uniform complex grids, fourth-order ∂̄ differences, and 2-D FFT plumbing.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Point, Rect};

/// Complex samples on the nodes x0 + ih, y0 + jh, stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub window: Rect,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Point>,
}

impl GridFunction {
    /// The zero function; the window is trimmed to a whole number of steps.
    pub fn zeros(window: Rect, h: f64) -> Result<Self> {
        if !(h > 0.0) || window.is_empty() {
            return Err(Error::domain("grid needs a nonempty window and h > 0"));
        }
        let nx = (window.width() / h + 1e-9).floor() as usize + 1;
        let ny = (window.height() / h + 1e-9).floor() as usize + 1;
        if nx < 5 || ny < 5 {
            return Err(Error::domain("grid needs at least 5 nodes per side"));
        }
        let window = Rect::new(window.x0, window.y0, window.x0 + (nx - 1) as f64 * h, window.y0 + (ny - 1) as f64 * h);
        Ok(GridFunction { window, h, nx, ny, values: vec![Point::new(0.0, 0.0); nx * ny] })
    }

    pub fn from_fn<F: Fn(Point) -> Point>(window: Rect, h: f64, f: F) -> Result<Self> {
        let mut g = Self::zeros(window, h)?;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = j * g.nx + i;
                g.values[k] = f(g.node(i, j));
            }
        }
        if g.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Input("grid function has non-finite samples".into()));
        }
        Ok(g)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.window.x0 + i as f64 * self.h, self.window.y0 + j as f64 * self.h)
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| (i, j))).map(|(i, j)| self.node(i, j)).collect()
    }

    pub fn same_shape(&self, o: &GridFunction) -> bool {
        self.nx == o.nx && self.ny == o.ny && self.h == o.h && self.window == o.window
    }

    /// Bilinear interpolation.
    pub fn eval(&self, z: Point) -> Result<Point> {
        let fx = (z.re - self.window.x0) / self.h;
        let fy = (z.im - self.window.y0) / self.h;
        if fx < -1e-9 || fy < -1e-9 || fx > (self.nx - 1) as f64 + 1e-9 || fy > (self.ny - 1) as f64 + 1e-9 {
            return Err(Error::domain(format!("({}, {}) outside the grid", z.re, z.im)));
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 2);
        let (u, v) = (fx - i as f64, fy - j as f64);
        let g = |i: usize, j: usize| self.values[j * self.nx + i];
        Ok(g(i, j) * (1.0 - u) * (1.0 - v) + g(i + 1, j) * u * (1.0 - v) + g(i, j + 1) * (1.0 - u) * v + g(i + 1, j + 1) * u * v)
    }

    /// ∂̄ = ½(∂x + i∂y) by fourth-order central differences; None within two nodes of the edge.
    pub fn dbar_at(&self, i: usize, j: usize) -> Option<Point> {
        if i < 2 || j < 2 || i + 2 >= self.nx || j + 2 >= self.ny {
            return None;
        }
        let g = |i: usize, j: usize| self.values[j * self.nx + i];
        let d = |a: Point, b: Point, c: Point, e: Point| (-a + 8.0 * b - 8.0 * c + e) / (12.0 * self.h);
        let dx = d(g(i + 2, j), g(i + 1, j), g(i - 1, j), g(i - 2, j));
        let dy = d(g(i, j + 2), g(i, j + 1), g(i, j - 1), g(i, j - 2));
        Some(0.5 * (dx + Point::i() * dy))
    }
}

/// In-place 2-D FFT on a row-major `px × py` buffer.
pub(crate) struct Fft2 {
    px: usize,
    py: usize,
    fx: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(px: usize, py: usize) -> Self {
        let mut p = FftPlanner::new();
        Fft2 { px, py, fx: p.plan_fft_forward(px), fy: p.plan_fft_forward(py), ix: p.plan_fft_inverse(px), iy: p.plan_fft_inverse(py) }
    }

    pub fn len(&self) -> usize {
        self.px * self.py
    }

    fn run(&self, buf: &mut [Point], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        fx.process(buf);
        let mut t = vec![Point::new(0.0, 0.0); buf.len()];
        transpose(buf, &mut t, self.px, self.py);
        fy.process(&mut t);
        transpose(&t, buf, self.py, self.px);
    }

    pub fn forward(&self, buf: &mut [Point]) {
        self.run(buf, &self.fx, &self.fy);
    }

    /// Inverse transform, normalised.
    pub fn inverse(&self, buf: &mut [Point]) {
        self.run(buf, &self.ix, &self.iy);
        let s = 1.0 / self.len() as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// `src` is rows × cols (row length `cols`); `dst` becomes cols × rows.
fn transpose(src: &[Point], dst: &mut [Point], cols: usize, rows: usize) {
    const B: usize = 32;
    for jb in (0..rows).step_by(B) {
        for ib in (0..cols).step_by(B) {
            for j in jb..(jb + B).min(rows) {
                for i in ib..(ib + B).min(cols) {
                    dst[i * rows + j] = src[j * cols + i];
                }
            }
        }
    }
}

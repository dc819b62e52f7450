//! Small geometric value types.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Points of the plane are complex numbers throughout.
pub type Point = Complex64;

#[inline]
pub fn pt(x: f64, y: f64) -> Point {
    Complex64::new(x, y)
}

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0: x0.min(x1), y0: y0.min(y1), x1: x0.max(x1), y1: y0.max(y1) }
    }

    pub fn centered(c: Point, hw: f64, hh: f64) -> Self {
        Rect { x0: c.re - hw, y0: c.im - hh, x1: c.re + hw, y1: c.im + hh }
    }

    /// Square `[-h, h]²`.
    pub fn square(h: f64) -> Self {
        Rect::centered(Point::new(0.0, 0.0), h, h)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn diam(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    pub fn contains(&self, z: Point) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    /// Whether the closed disk `D(c, r)` lies inside the rectangle.
    pub fn contains_disk(&self, c: Point, r: f64) -> bool {
        c.re - r >= self.x0 && c.re + r <= self.x1 && c.im - r >= self.y0 && c.im + r <= self.y1
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x0 >= self.x0 && o.x1 <= self.x1 && o.y0 >= self.y0 && o.y1 <= self.y1
    }

    pub fn intersect(&self, o: &Rect) -> Option<Rect> {
        let r = Rect {
            x0: self.x0.max(o.x0),
            y0: self.y0.max(o.y0),
            x1: self.x1.min(o.x1),
            y1: self.y1.min(o.y1),
        };
        if r.is_empty() {
            None
        } else {
            Some(r)
        }
    }

    /// Euclidean distance from `z` to the rectangle (0 inside).
    pub fn dist(&self, z: Point) -> f64 {
        let dx = (self.x0 - z.re).max(0.0).max(z.re - self.x1);
        let dy = (self.y0 - z.im).max(0.0).max(z.im - self.y1);
        dx.hypot(dy)
    }

    /// Largest distance from `z` to a point of the rectangle.
    pub fn max_dist(&self, z: Point) -> f64 {
        let dx = (z.re - self.x0).abs().max((z.re - self.x1).abs());
        let dy = (z.im - self.y0).abs().max((z.im - self.y1).abs());
        dx.hypot(dy)
    }

    pub fn expand(&self, m: f64) -> Rect {
        Rect { x0: self.x0 - m, y0: self.y0 - m, x1: self.x1 + m, y1: self.y1 + m }
    }

    /// Uniform grid of `n × n` node positions covering the rectangle (inclusive corners).
    pub fn grid(&self, nx: usize, ny: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = if ny == 1 { 0.5 * (self.y0 + self.y1) } else { self.y0 + self.height() * j as f64 / (ny - 1) as f64 };
            for i in 0..nx {
                let x = if nx == 1 { 0.5 * (self.x0 + self.x1) } else { self.x0 + self.width() * i as f64 / (nx - 1) as f64 };
                out.push(Point::new(x, y));
            }
        }
        out
    }
}

impl std::str::FromStr for Rect {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if v.len() != 4 {
            return Err(format!("expected x0,y0,x1,y1 but got {} values", v.len()));
        }
        let r = Rect::new(v[0], v[1], v[2], v[3]);
        if r.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err("window must have positive width and height".into());
        }
        Ok(r)
    }
}

//! The subharmonic weight φ, its Laplacian measure μ = Δφ, flat weights ω,
//! and mass integrals over disks and rectangles.

mod flat;
mod table;

pub use flat::FlatWeight;
pub use table::DensityTable;

use crate::error::{Error, Result};
use crate::quad;
use crate::roots;
use crate::types::{Point, Rect};
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

/// User-supplied weight: φ and its (nonnegative, continuous) Laplacian density.
pub trait CustomWeight: Send + Sync {
    fn phi(&self, z: Point) -> f64;
    fn laplacian(&self, z: Point) -> f64;
    /// Growth exponent hint η for the density (used only to seed brackets).
    fn growth_hint(&self) -> f64 {
        0.0
    }
}

struct ClosureWeight<F, G> {
    phi: F,
    lap: G,
}

impl<F, G> CustomWeight for ClosureWeight<F, G>
where
    F: Fn(Point) -> f64 + Send + Sync,
    G: Fn(Point) -> f64 + Send + Sync,
{
    fn phi(&self, z: Point) -> f64 {
        (self.phi)(z)
    }
    fn laplacian(&self, z: Point) -> f64 {
        (self.lap)(z)
    }
}

#[derive(Clone)]
enum Kind {
    /// φ(z) = coef·|z − center|^β (plus a harmonic term `lin` removed in translated frames).
    Radial { beta: f64, coef: f64, center: Point, lin: Point, offset: f64 },
    Table(Arc<DensityTable>),
    Custom(Arc<dyn CustomWeight>),
    /// φ_new(z) = factor·(φ(x + s·z) − φ(x)); density factor·s²·Δφ(x + s·z).
    Affine { base: Arc<WeightModel>, x: Point, s: f64, factor: f64 },
}

/// The weight φ together with its Laplacian measure.
#[derive(Clone)]
pub struct WeightModel {
    kind: Kind,
    tol: f64,
    doubling: OnceLock<f64>,
}

impl fmt::Debug for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightModel({})", self.describe())
    }
}

/// Default relative tolerance of mass integrals.
pub const MASS_TOL: f64 = 1e-8;

impl WeightModel {
    fn from_kind(kind: Kind) -> Self {
        WeightModel { kind, tol: MASS_TOL, doubling: OnceLock::new() }
    }

    /// φ(z) = |z|^β.
    pub fn radial_power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self::from_kind(Kind::Radial { beta, coef: 1.0, center: Point::new(0.0, 0.0), lin: Point::new(0.0, 0.0), offset: 0.0 }))
    }

    pub fn custom(w: Arc<dyn CustomWeight>) -> Self {
        Self::from_kind(Kind::Custom(w))
    }

    pub fn from_fns<F, G>(phi: F, laplacian: G) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
        G: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        Self::custom(Arc::new(ClosureWeight { phi, lap: laplacian }))
    }

    pub fn table(t: DensityTable) -> Self {
        Self::from_kind(Kind::Table(Arc::new(t)))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The weight ε·φ.
    pub fn scaled(&self, eps: f64) -> Self {
        match &self.kind {
            Kind::Radial { beta, coef, center, lin, offset } => Self::from_kind(Kind::Radial {
                beta: *beta,
                coef: coef * eps,
                center: *center,
                lin: lin * eps,
                offset: offset * eps,
            })
            .with_tol(self.tol),
            _ => Self::from_kind(Kind::Affine { base: Arc::new(self.clone()), x: Point::new(0.0, 0.0), s: 1.0, factor: eps })
                .with_tol(self.tol),
        }
    }

    /// Pull-back under z ↦ x + s·z with normalisation φ_new(0) = 0.
    ///
    /// Radial weights stay radial (about a moved centre) and their first-order
    /// harmonic Taylor term at `x` is removed, so the result is exactly the
    /// translated weight used by the scaled-translation frames.
    pub fn affine_pullback(&self, x: Point, s: f64) -> Self {
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => {
                // φ(x + s z) − φ(x) minus its real-linear Taylor part at z = 0.
                // The gradient of coef|w − c|^β at w = x, as a complex number:
                let w = x - center;
                let g = if w.norm() > 0.0 { w * (beta * coef * w.norm().powf(beta - 2.0)) } else { Point::new(0.0, 0.0) };
                Self::from_kind(Kind::Radial {
                    beta: *beta,
                    coef: coef * s.powf(*beta),
                    center: (center - x) / s,
                    lin: -g * s,
                    offset: -coef * w.norm().powf(*beta),
                })
                .with_tol(self.tol)
            }
            _ => Self::from_kind(Kind::Affine { base: Arc::new(self.clone()), x, s, factor: 1.0 }).with_tol(self.tol),
        }
    }

    /// Whether the Laplacian density is constant; returns the constant.
    pub fn constant_density(&self) -> Option<f64> {
        match &self.kind {
            Kind::Radial { beta, coef, .. } if (*beta - 2.0).abs() < 1e-15 => Some(4.0 * coef),
            Kind::Affine { base, s, factor, .. } => base.constant_density().map(|d| d * s * s * factor),
            _ => None,
        }
    }

    /// (β, coef, centre) when the density is coef·β²|z − centre|^{β−2}.
    pub fn radial_params(&self) -> Option<(f64, f64, Point)> {
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => Some((*beta, *coef, *center)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => {
                if *coef == 1.0 && center.norm() == 0.0 {
                    format!("radial_power(beta={beta})")
                } else {
                    format!("radial_power(beta={beta}, coef={coef}, center=({}, {}))", center.re, center.im)
                }
            }
            Kind::Table(t) => format!("table({}x{})", t.nx(), t.ny()),
            Kind::Custom(_) => "custom".into(),
            Kind::Affine { base, x, s, factor } => format!("affine({}, x=({}, {}), s={s}, factor={factor})", base.describe(), x.re, x.im),
        }
    }

    /// φ(z).
    pub fn phi(&self, z: Point) -> f64 {
        match &self.kind {
            Kind::Radial { beta, coef, center, lin, offset } => {
                coef * (z - center).norm().powf(*beta) + (lin.conj() * z).re + offset
            }
            Kind::Table(t) => t.phi(z),
            Kind::Custom(w) => w.phi(z),
            Kind::Affine { base, x, s, factor } => factor * (base.phi(x + z * s) - base.phi(*x)),
        }
    }

    /// Density of Δφ at z; errors at the singular point of a radial weight with β < 2.
    pub fn laplacian(&self, z: Point) -> Result<f64> {
        if let Kind::Radial { beta, center, .. } = &self.kind {
            if *beta < 2.0 && z == *center {
                return Err(Error::domain("Laplacian density is singular at the origin for beta < 2"));
            }
        }
        let v = self.density(z);
        if v.is_nan() {
            return Err(Error::numerical("laplacian evaluation", f64::NAN));
        }
        Ok(v)
    }

    /// Density of Δφ at z (infinite at a radial singular point).
    #[inline]
    pub fn density(&self, z: Point) -> f64 {
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => {
                if *beta == 2.0 {
                    4.0 * coef
                } else {
                    coef * beta * beta * (z - center).norm().powf(beta - 2.0)
                }
            }
            Kind::Table(t) => t.density(z),
            Kind::Custom(w) => w.laplacian(z),
            Kind::Affine { base, x, s, factor } => factor * s * s * base.density(x + z * s),
        }
    }

    /// μ(D(c, r)).
    pub fn mass_disk(&self, c: Point, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("radius must be nonnegative, got {r}")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => Ok(coef * radial_disk_mass(*beta, (c - center).norm(), r)?),
            Kind::Table(t) => polar_mass(|z| t.density(z), c, r, self.tol),
            Kind::Custom(w) => polar_mass(|z| w.laplacian(z), c, r, self.tol),
            Kind::Affine { base, x, s, factor } => Ok(factor * base.mass_disk(x + c * s, r * s)?),
        }
    }

    /// μ(R).
    pub fn mass_rect(&self, rect: &Rect) -> Result<f64> {
        if rect.x1 < rect.x0 || rect.y1 < rect.y0 {
            return Err(Error::domain("rectangle with negative extent"));
        }
        if rect.width() == 0.0 || rect.height() == 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => {
                let shifted = Rect { x0: rect.x0 - center.re, x1: rect.x1 - center.re, y0: rect.y0 - center.im, y1: rect.y1 - center.im };
                Ok(coef * radial_rect_mass(*beta, &shifted, self.tol)?)
            }
            Kind::Table(t) => Ok(t.mass_rect(rect)),
            Kind::Custom(w) => Ok(quad::adaptive_rect(|x, y| w.laplacian(Point::new(x, y)), rect, 0.0, self.tol)?.value),
            Kind::Affine { base, x, s, factor } => {
                let r = Rect { x0: x.re + s * rect.x0, x1: x.re + s * rect.x1, y0: x.im + s * rect.y0, y1: x.im + s * rect.y1 };
                Ok(factor * base.mass_rect(&r)?)
            }
        }
    }

    /// ∫_R (ζ − c)^l dμ(ζ) for l = 0..n (complex moments about `c`).
    pub fn moments_rect(&self, rect: &Rect, c: Point, n: usize) -> Result<Vec<Point>> {
        let mut out = vec![Point::new(0.0, 0.0); n + 1];
        if rect.width() <= 0.0 || rect.height() <= 0.0 {
            return Ok(out);
        }
        let pieces = self.smooth_pieces(rect);
        let order = (n + 12).min(64);
        for p in pieces {
            // subdivide until the density is resolved by the tensor rule
            let mut stack = vec![(p, 0usize)];
            while let Some((r, depth)) = stack.pop() {
                let coarse = moment_rule(self, &r, c, n, order / 2 + 2);
                let fine = moment_rule(self, &r, c, n, order);
                // degree l is judged against mass·R^l, R the reach of the piece from c
                let reach = r.max_dist(c).max(1e-300);
                let mass = fine[0].norm().max(1e-300);
                let err = coarse.iter().zip(&fine).enumerate().map(|(l, (a, b))| (a - b).norm() / (mass * reach.powi(l as i32))).fold(0.0, f64::max);
                if err <= 1e-12 || depth >= 8 {
                    for (o, v) in out.iter_mut().zip(fine) {
                        *o += v;
                    }
                } else {
                    for q in split4(&r) {
                        stack.push((q, depth + 1));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Split a rectangle along the singular lines of a radial density so each piece
    /// has the singular point at most at a corner.
    pub(crate) fn smooth_pieces(&self, rect: &Rect) -> Vec<Rect> {
        if let Kind::Radial { center, .. } = &self.kind {
            split_at_point(rect, *center)
        } else {
            vec![*rect]
        }
    }

    /// max μ(D(z,2r))/μ(D(z,r)) over the probe (cached on first call).
    pub fn doubling_constant(&self, probe: &[(Point, f64)]) -> Result<f64> {
        if let Some(v) = self.doubling.get() {
            return Ok(*v);
        }
        if probe.is_empty() {
            return Err(Error::domain("empty doubling probe"));
        }
        let mut worst: f64 = 1.0;
        for &(z, r) in probe {
            let a = self.mass_disk(z, r)?;
            let b = self.mass_disk(z, 2.0 * r)?;
            if a > 0.0 {
                worst = worst.max(b / a);
            }
        }
        let _ = self.doubling.set(worst);
        Ok(*self.doubling.get().unwrap())
    }

    /// ρ(z): the radius with μ(D(z, ρ)) = 1.
    pub fn rho(&self, z: Point) -> Result<f64> {
        self.rho_for_mass(z, 1.0)
    }

    /// Radius with μ(D(z, r)) = `mass`.
    pub fn rho_for_mass(&self, z: Point, mass: f64) -> Result<f64> {
        match &self.kind {
            Kind::Radial { beta, coef, center, .. } => {
                let d = (z - center).norm();
                let r_center = (mass / (2.0 * PI * beta * coef)).powf(1.0 / beta);
                if d == 0.0 {
                    return Ok(r_center);
                }
                if *beta == 2.0 {
                    return Ok((mass / (4.0 * PI * coef)).sqrt());
                }
                let f = |r: f64| coef * radial_disk_mass(*beta, d, r).unwrap_or(f64::NAN) - mass;
                // bracket: the local density gives a good first guess when d ≫ r_center
                let local = (mass / (PI * coef * beta * beta * d.powf(beta - 2.0))).sqrt();
                let guess = if local < d { local } else { r_center };
                let (lo, hi) = roots::bracket_positive(f, guess)?;
                roots::solve_increasing(f, lo, hi, 1e-15 * hi)
            }
            Kind::Affine { base, x, s, factor } => Ok(base.rho_for_mass(x + z * s, mass / factor)? / s),
            _ => {
                let f = |r: f64| self.mass_disk(z, r).unwrap_or(f64::NAN) - mass;
                let (lo, hi) = roots::bracket_positive(f, 1.0)?;
                roots::solve_increasing(f, lo, hi, 1e-13 * hi)
            }
        }
    }
}

fn moment_rule(m: &WeightModel, r: &Rect, c: Point, n: usize, order: usize) -> Vec<Point> {
    let (x, w) = quad::gl_cached(order);
    let (cx, hx) = (0.5 * (r.x0 + r.x1), 0.5 * r.width());
    let (cy, hy) = (0.5 * (r.y0 + r.y1), 0.5 * r.height());
    let mut out = vec![Point::new(0.0, 0.0); n + 1];
    for i in 0..x.len() {
        for j in 0..x.len() {
            let z = Point::new(cx + hx * x[i], cy + hy * x[j]);
            let wt = w[i] * w[j] * hx * hy * m.density(z);
            let d = z - c;
            let mut p = Point::new(wt, 0.0);
            for o in out.iter_mut() {
                *o += p;
                p *= d;
            }
        }
    }
    out
}

pub(crate) fn split4(r: &Rect) -> [Rect; 4] {
    let c = r.center();
    [
        Rect { x0: r.x0, y0: r.y0, x1: c.re, y1: c.im },
        Rect { x0: c.re, y0: r.y0, x1: r.x1, y1: c.im },
        Rect { x0: r.x0, y0: c.im, x1: c.re, y1: r.y1 },
        Rect { x0: c.re, y0: c.im, x1: r.x1, y1: r.y1 },
    ]
}

pub(crate) fn split_at_point(r: &Rect, p: Point) -> Vec<Rect> {
    let xs: Vec<f64> = if p.re > r.x0 && p.re < r.x1 { vec![r.x0, p.re, r.x1] } else { vec![r.x0, r.x1] };
    let ys: Vec<f64> = if p.im > r.y0 && p.im < r.y1 { vec![r.y0, p.im, r.y1] } else { vec![r.y0, r.y1] };
    let mut out = Vec::with_capacity(4);
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            out.push(Rect { x0: xs[i], x1: xs[i + 1], y0: ys[j], y1: ys[j + 1] });
        }
    }
    out
}

/// μ(D(c, R)) for density β²|z|^{β−2} with |c| = d, via the angular measure of
/// circles |z| = s inside the disk.
pub(crate) fn radial_disk_mass(beta: f64, d: f64, r: f64) -> Result<f64> {
    if d <= 1e-14 * r {
        return Ok(2.0 * PI * beta * r.powf(beta));
    }
    let inner = if r > d { 2.0 * PI * beta * (r - d).powf(beta) } else { 0.0 };
    let (a, b) = ((r - d).abs(), r + d);
    let half = 0.5 * (b - a);
    // Half-angle form of the arc of |ζ| = s inside D(d, r); the plain acos
    // loses half the digits where the circles are tangent.
    let g = |t: f64| {
        let u = half * 2.0 * (0.5 * t).sin().powi(2);
        let s = a + u;
        if s <= 0.0 {
            return 0.0;
        }
        // b − s = 2·half − u; s − a = u is whichever factor vanishes at s = a
        let far = 2.0 * half * (0.5 * t).cos().powi(2);
        let (p, q) = if r > d { (r + s - d, u) } else { (u, s + d - r) };
        let (sin2, cos2) = (far * p, q * (s + d + r));
        let theta = 2.0 * sin2.max(0.0).sqrt().atan2(cos2.max(0.0).sqrt());
        s.powf(beta - 1.0) * 2.0 * theta * half * t.sin()
    };
    let ring = quad::adaptive(g, 0.0, PI, 0.0, 1e-13)?;
    Ok(inner + beta * beta * ring.value)
}

/// Mass of the corner rectangle [0,a]×[0,b] for density β²|z|^{β−2}:
/// β ∫_0^{π/2} r_max(θ)^β dθ with r_max = min(a/cos θ, b/sin θ).
fn corner_mass(beta: f64, a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 {
        return Ok(0.0);
    }
    let t0 = b.atan2(a);
    let f1 = quad::adaptive(|t: f64| (a / t.cos()).powf(beta), 0.0, t0, 0.0, 1e-14)?;
    let f2 = quad::adaptive(|t: f64| (b / t.sin()).powf(beta), t0, 0.5 * PI, 0.0, 1e-14)?;
    Ok(beta * (f1.value + f2.value))
}

/// μ(R) for density β²|z|^{β−2} (singular point at the origin).
pub(crate) fn radial_rect_mass(beta: f64, r: &Rect, tol: f64) -> Result<f64> {
    if beta == 2.0 {
        return Ok(4.0 * r.area());
    }
    // Rectangles with the origin in their closure are split into corner pieces.
    let touches = r.x0 <= 0.0 && r.x1 >= 0.0 && r.y0 <= 0.0 && r.y1 >= 0.0;
    if touches {
        let mut total = 0.0;
        for (a, b) in [(r.x1, r.y1), (-r.x0, r.y1), (r.x1, -r.y0), (-r.x0, -r.y0)] {
            total += corner_mass(beta, a, b)?;
        }
        return Ok(total);
    }
    // Near the singular point use inclusion–exclusion of corner rectangles.
    let dist = r.dist(Point::new(0.0, 0.0));
    if dist < 0.5 * r.diam() && beta < 2.0 {
        // fold to the quadrant containing the rectangle: all corners in one closed quadrant pair
        let f = |x: f64, y: f64| -> Result<f64> {
            // signed corner mass of [0,x]×[0,y]
            let s = x.signum() * y.signum();
            Ok(s * corner_mass(beta, x.abs(), y.abs())?)
        };
        return Ok((f(r.x1, r.y1)? - f(r.x0, r.y1)? - f(r.x1, r.y0)? + f(r.x0, r.y0)?).abs());
    }
    let e = quad::adaptive_rect(
        |x, y| beta * beta * (x * x + y * y).powf(0.5 * beta - 1.0),
        r,
        0.0,
        (tol * 1e-3).max(1e-13),
    )?;
    Ok(e.value)
}

/// Polar nested quadrature for densities without closed forms.
fn polar_mass<F: Fn(Point) -> f64>(f: F, c: Point, r: f64, tol: f64) -> Result<f64> {
    let inner_tol = tol * 0.1;
    let mut failure = None;
    let e = quad::adaptive(
        |s| {
            if s == 0.0 {
                return 0.0;
            }
            match quad::adaptive(|t| f(c + Point::from_polar(s, t)), 0.0, 2.0 * PI, 0.0, inner_tol) {
                Ok(v) => v.value * s,
                Err(err) => {
                    failure = Some(err);
                    0.0
                }
            }
        },
        0.0,
        r,
        0.0,
        tol,
    )?;
    if let Some(err) = failure {
        return Err(err);
    }
    Ok(e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn phi_and_laplacian_examples() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        assert_eq!(m2.phi(p(0.0, 0.0)), 0.0);
        assert!((m2.phi(p(1.0, 1.0)) - 2.0).abs() < 1e-14);
        assert_eq!(m2.laplacian(p(3.0, -1.0)).unwrap(), 4.0);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        assert!((m4.phi(p(2.0, 0.0)) - 16.0).abs() < 1e-12);
        assert!((m4.laplacian(p(1.0, 0.0)).unwrap() - 16.0).abs() < 1e-12);
        let m1 = WeightModel::radial_power(1.0).unwrap();
        assert!((m1.laplacian(p(4.0, 0.0)).unwrap() - 0.25).abs() < 1e-15);
        assert!(m1.laplacian(p(0.0, 0.0)).is_err());
        assert!(WeightModel::radial_power(-1.0).is_err());
    }

    #[test]
    fn disk_masses() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        assert!((m2.mass_disk(p(0.0, 0.0), 1.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((m2.mass_disk(p(5.0, 5.0), 0.5).unwrap() - PI).abs() < 1e-12);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        assert!((m4.mass_disk(p(0.0, 0.0), 1.0).unwrap() - 8.0 * PI).abs() < 1e-12);
    }

    /// μ(D(c, r)) for β²|z|^{β−2} by rays from the origin: each ray carries
    /// β(ρ₂^β − ρ₁^β) between its entry and exit radii.
    fn ray_mass(beta: f64, c: Point, r: f64) -> f64 {
        let d = c.norm();
        let radial = |t: f64| {
            let ce = c.re * t.cos() + c.im * t.sin();
            let disc = (ce * ce - d * d + r * r).max(0.0).sqrt();
            let (lo, hi) = if d < r { (0.0, ce + disc) } else { ((ce - disc).max(0.0), ce + disc) };
            beta * (hi.powf(beta) - lo.powf(beta))
        };
        if d < r {
            return quad::adaptive(radial, 0.0, 2.0 * PI, 0.0, 1e-12).unwrap().value;
        }
        // θ = arg c + h·sin τ removes the square-root behaviour at the tangent rays
        let h = (r / d).asin();
        let g = |tau: f64| radial(c.arg() + h * tau.sin()) * h * tau.cos();
        quad::adaptive(g, -0.5 * PI, 0.5 * PI, 0.0, 1e-12).unwrap().value
    }

    #[test]
    fn off_center_disk_matches_ray_integral() {
        for &beta in &[0.7, 1.0, 3.0, 4.0] {
            let m = WeightModel::radial_power(beta).unwrap();
            for &(c, r) in &[(p(1.0, 0.5), 0.3), (p(0.2, 0.0), 1.0), (p(0.5, 0.0), 0.5), (p(-2.0, 1.0), 2.5), (p(3.0, -1.0), 0.01)] {
                let got = m.mass_disk(c, r).unwrap();
                let o = ray_mass(beta, c, r);
                assert!((got - o).abs() < 1e-9 * o, "beta={beta} c={c} r={r}: {got} vs {o}");
            }
        }
        // β = 4: ∫ 16|z|² over D(c, r) = 16π(r²|c|² + r⁴/2)
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let (c, r) = (p(0.8, -0.3), 1.7);
        let exact = 16.0 * PI * (r * r * c.norm_sqr() + 0.5 * r.powi(4));
        assert!((m4.mass_disk(c, r).unwrap() - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn polar_mass_agrees_for_smooth_density() {
        let f = |z: Point| 1.0 + z.re * z.re;
        // ∫ (1 + x²) over D(c, r) = πr² + π(r⁴/4 + r²c_x²)
        let (c, r) = (p(0.5, 1.0), 0.8);
        let exact = PI * r * r + PI * (0.25 * r.powi(4) + r * r * c.re * c.re);
        assert!((polar_mass(f, c, r, 1e-11).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn rect_masses() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        assert_eq!(m2.mass_rect(&Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap(), 4.0);
        assert_eq!(m2.mass_rect(&Rect::new(0.0, 0.0, 0.0, 1.0)).unwrap(), 0.0);
        // β=4 unit square: ∫∫ 16(x²+y²) = 32/3
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let v = m4.mass_rect(&Rect::new(0.0, 0.0, 1.0, 1.0)).unwrap();
        assert!((v - 32.0 / 3.0).abs() < 1e-9);
        // additivity across the singular point for β=1
        let m1 = WeightModel::radial_power(1.0).unwrap();
        let whole = m1.mass_rect(&Rect::new(-1.0, -0.5, 2.0, 1.0)).unwrap();
        let parts = m1.mass_rect(&Rect::new(-1.0, -0.5, 0.3, 1.0)).unwrap() + m1.mass_rect(&Rect::new(0.3, -0.5, 2.0, 1.0)).unwrap();
        assert!((whole - parts).abs() < 1e-8 * whole);
    }

    #[test]
    fn doubling_examples() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        let c = m2.doubling_constant(&[(p(1.0, 2.0), 0.7), (p(-3.0, 0.0), 2.0)]).unwrap();
        assert!((c - 4.0).abs() < 1e-10);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let c = m4.doubling_constant(&[(p(0.0, 0.0), 1.0), (p(3.0, 0.0), 0.1)]).unwrap();
        assert!((c - 16.0).abs() < 1e-9);
        let far = WeightModel::radial_power(4.0).unwrap().doubling_constant(&[(p(100.0, 0.0), 0.01)]).unwrap();
        assert!((far - 4.0).abs() < 1e-3);
    }

    #[test]
    fn rho_closed_forms() {
        let r2 = WeightModel::radial_power(2.0).unwrap().rho(p(7.0, -2.0)).unwrap();
        assert!((r2 - 0.5 / PI.sqrt()).abs() < 1e-14);
        let r4 = WeightModel::radial_power(4.0).unwrap().rho(p(0.0, 0.0)).unwrap();
        assert!((r4 - (8.0 * PI).powf(-0.25)).abs() < 1e-14);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let z = p(1.3, 0.4);
        let r = m4.rho(z).unwrap();
        assert!((m4.mass_disk(z, r).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_pullback_is_exact_change_of_variables() {
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let x = p(1.5, -0.7);
        let s = m4.rho(x).unwrap();
        let t = m4.affine_pullback(x, s);
        assert!(t.phi(p(0.0, 0.0)).abs() < 1e-12);
        for z in [p(0.3, 0.1), p(-1.0, 2.0)] {
            let a = t.mass_disk(z, 0.7).unwrap();
            let b = m4.mass_disk(x + z * s, 0.7 * s).unwrap();
            assert!((a - b).abs() < 1e-12 * b);
            // φ_x differs from φ∘τ − φ(x) by a harmonic (real-linear) term
            let lin = t.phi(z) - (m4.phi(x + z * s) - m4.phi(x));
            let lin2 = t.phi(z * 2.0) - (m4.phi(x + z * 2.0 * s) - m4.phi(x));
            assert!((lin2 - 2.0 * lin).abs() < 1e-9);
        }
        assert!((t.rho(p(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_uniform_square() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        let r = Rect::new(1.0, 1.0, 2.0, 3.0);
        let mo = m2.moments_rect(&r, r.center(), 3).unwrap();
        assert!((mo[0].re - 8.0).abs() < 1e-12);
        assert!(mo[1].norm() < 1e-12);
        // ∫ (x+iy)² over [-1/2,1/2]×[-1,1] times 4 = 4·(1/12·2 − 1/3·... )
        let exact = 4.0 * (2.0 / 12.0 - 2.0 / 3.0);
        assert!((mo[2].re - exact).abs() < 1e-12 && mo[2].im.abs() < 1e-12);
    }
}

#[cfg(test)]
pub(crate) fn split_at_point_pub(r: &Rect, p: Point) -> Vec<Rect> {
    split_at_point(r, p)
}

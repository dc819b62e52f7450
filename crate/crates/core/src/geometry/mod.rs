//! ρ(z), the metric d_φ, separation and covering statistics of sequences,
//! and scaled translations.

mod fit;
mod metric;
mod sequence;

pub use fit::{fit_christ, fit_disc_exponent, fit_distance_constants, fit_flat_weight, fit_growth_exponents, ChristFit, DistanceConstants, GrowthFit};
pub use metric::{MetricField, DEFAULT_RESOLUTION};
pub use sequence::{PointSequence, Provenance, SpatialIndex};

use crate::error::Result;
use crate::types::Point;
use crate::weights::{FlatWeight, WeightModel};

/// ρ(z): the radius with μ(D(z, ρ(z))) = 1.
pub fn rho_at(model: &WeightModel, z: Point) -> Result<f64> {
    model.rho(z)
}

/// Two-sided bounds for d_φ(z, ζ) with fitted constants: when
/// |z − ζ| ≤ r·ρ(z) both bounds are multiples of |z − ζ|/ρ(z); otherwise
/// they are powers q^δ and q^{2−δ} of q = |z − ζ|/ρ(z).
pub fn d_phi_bounds(metric: &MetricField, c: &DistanceConstants, z: Point, zeta: Point, r: f64) -> (f64, f64) {
    let q = (z - zeta).norm() / metric.rho(z);
    if q == 0.0 {
        return (0.0, 0.0);
    }
    if q <= r {
        (q / c.c_near, q * c.c_near)
    } else {
        (q.powf(c.delta) / c.c_far, c.c_far * q.powf(2.0 - c.delta))
    }
}

/// inf over distinct pairs of |λ − λ′| / max(ρ(λ), ρ(λ′)); +∞ for fewer than two points.
pub fn separation(seq: &PointSequence, metric: &MetricField) -> f64 {
    let n = seq.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let rhos: Vec<f64> = seq.points.iter().map(|&p| metric.rho(p)).collect();
    let rho_max = rhos.iter().cloned().fold(0.0, f64::max);
    let idx = seq.index();
    let mut best = f64::INFINITY;
    for (i, &p) in seq.points.iter().enumerate() {
        let mut local = f64::INFINITY;
        let bound = best;
        idx.expanding(
            p,
            &mut local,
            |local, j| {
                if j != i {
                    let d = (seq.points[j] - p).norm();
                    let v = d / rhos[i].max(rhos[j]);
                    if v < *local {
                        *local = v;
                    }
                }
            },
            |local, ring_min| ring_min / rho_max > local.min(bound),
        );
        best = best.min(local);
        if best == 0.0 {
            break;
        }
    }
    best
}

/// max over probes of d_φ(z, Λ).
pub fn covering_gap(seq: &PointSequence, metric: &MetricField, probes: &[Point]) -> Result<f64> {
    let d = metric.distance_to_set(seq, probes)?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// μ(D^{r+ε}(z)) / μ(D^r(z)) with D^r(z) = D(z, rρ(z)).
pub fn annulus_ratio(model: &WeightModel, z: Point, r: f64, eps: f64) -> Result<f64> {
    if !(r > eps && eps >= 0.0) {
        return Err(crate::Error::domain("annulus_ratio needs r > eps ≥ 0"));
    }
    let rho = model.rho(z)?;
    Ok(model.mass_disk(z, (r + eps) * rho)? / model.mass_disk(z, r * rho)?)
}

/// The frame τ_x(z) = x + z·ρ(x) with the pulled-back weight and flat weight.
#[derive(Debug, Clone)]
pub struct TranslatedFrame {
    pub x: Point,
    pub scale: f64,
    /// φ_x, normalised so that φ_x(0) = 0; its Laplacian is ρ(x)²·Δφ∘τ_x exactly.
    pub model: WeightModel,
    base_omega: FlatWeight,
    omega_x0: f64,
    base_model: WeightModel,
}

impl TranslatedFrame {
    pub fn tau(&self, z: Point) -> Point {
        self.x + z * self.scale
    }

    pub fn tau_inv(&self, w: Point) -> Point {
        (w - self.x) / self.scale
    }

    /// ω_x(z) = ω(τ_x(z)) / ω(x).
    pub fn omega(&self, z: Point) -> Result<f64> {
        Ok(self.base_omega.eval(&self.base_model, self.tau(z))? / self.omega_x0)
    }

    /// Λ_x = τ_x^{-1}(Λ).
    pub fn pull_sequence(&self, seq: &PointSequence) -> PointSequence {
        PointSequence::new(seq.points.iter().map(|&p| self.tau_inv(p)).collect(), seq.provenance.clone())
    }
}

pub fn translate(model: &WeightModel, omega: &FlatWeight, x: Point) -> Result<TranslatedFrame> {
    let s = model.rho(x)?;
    Ok(TranslatedFrame {
        x,
        scale: s,
        model: model.affine_pullback(x, s),
        base_omega: omega.clone(),
        omega_x0: omega.eval(model, x)?,
        base_model: model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Rect;
    use std::f64::consts::PI;

    #[test]
    fn rho_examples() {
        let r = rho_at(&WeightModel::radial_power(2.0).unwrap(), Point::new(3.0, 4.0)).unwrap();
        assert!((r - 0.282_094_8).abs() < 1e-7);
        let r = rho_at(&WeightModel::radial_power(4.0).unwrap(), Point::new(0.0, 0.0)).unwrap();
        assert!((r - 0.446_62).abs() < 1e-5);
        let r = rho_at(&WeightModel::radial_power(1.0).unwrap(), Point::new(0.0, 0.0)).unwrap();
        assert!((r - 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn separation_examples() {
        let m = WeightModel::radial_power(2.0).unwrap();
        let mf = MetricField::build(&m, Rect::square(6.0), 4.0).unwrap();
        let lat = PointSequence::lattice(1.0, &Rect::square(5.0), Point::new(0.0, 0.0));
        assert!((separation(&lat, &mf) - 2.0 * PI.sqrt()).abs() < 1e-12);
        let one = PointSequence::user(vec![Point::new(0.0, 0.0)]);
        assert_eq!(separation(&one, &mf), f64::INFINITY);
        let dup = PointSequence::user(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 0.0)]);
        assert_eq!(separation(&dup, &mf), 0.0);
    }

    #[test]
    fn covering_gap_lattice() {
        let m = WeightModel::radial_power(2.0).unwrap();
        let mf = MetricField::build(&m, Rect::square(4.0), 4.0).unwrap();
        let lat = PointSequence::lattice(1.0, &Rect::square(4.0), Point::new(0.0, 0.0));
        let probes = Rect::square(2.0).grid(41, 41);
        let g = covering_gap(&lat, &mf, &probes).unwrap();
        assert!((g - 0.5f64.sqrt() * 2.0 * PI.sqrt()).abs() < 1e-9);
        let self_gap = covering_gap(&PointSequence::user(probes.clone()), &mf, &probes).unwrap();
        assert_eq!(self_gap, 0.0);
    }

    #[test]
    fn annulus_examples() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        assert!((annulus_ratio(&m2, Point::new(0.0, 0.0), 10.0, 1.0).unwrap() - 1.21).abs() < 1e-12);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        assert!((annulus_ratio(&m4, Point::new(0.0, 0.0), 10.0, 1.0).unwrap() - 1.4641).abs() < 1e-10);
        assert!((annulus_ratio(&m4, Point::new(1.0, 0.0), 3.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn translated_frame_examples() {
        let m2 = WeightModel::radial_power(2.0).unwrap();
        let f = translate(&m2, &FlatWeight::One, Point::new(3.0, 0.0)).unwrap();
        assert!((f.model.density(Point::new(0.7, -2.0)) - 1.0 / PI).abs() < 1e-14);
        assert!((f.model.rho(Point::new(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.model.phi(Point::new(0.0, 0.0)).abs() < 1e-12);
        let m4 = WeightModel::radial_power(4.0).unwrap();
        let x = Point::new(0.8, 0.3);
        let f = translate(&m4, &FlatWeight::RhoPower(1.0), x).unwrap();
        for z in [Point::new(0.5, 0.5), Point::new(-2.0, 1.0)] {
            let lhs = m4.rho(f.tau(z)).unwrap();
            let rhs = f.model.rho(z).unwrap() * f.scale;
            assert!((lhs - rhs).abs() < 1e-12 * lhs);
            assert!((f.omega(z).unwrap() - lhs / f.scale).abs() < 1e-12);
        }
    }
}

//! Flat weights ω: positive functions of slow growth in the metric d_φ.

use super::WeightModel;
use crate::error::Result;
use crate::types::Point;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum FlatWeight {
    One,
    /// ω = ρ^α.
    RhoPower(f64),
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
    /// exp of the mean of log ω over D(z, ρ(z)); smooths a rough flat weight.
    Regularized(Box<FlatWeight>),
}

impl fmt::Debug for FlatWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlatWeight::One => write!(f, "one"),
            FlatWeight::RhoPower(a) => write!(f, "rho^{a}"),
            FlatWeight::Custom(_) => write!(f, "custom"),
            FlatWeight::Regularized(w) => write!(f, "regularized({w:?})"),
        }
    }
}

impl FlatWeight {
    pub fn is_regularized(&self) -> bool {
        matches!(self, FlatWeight::Regularized(_) | FlatWeight::One | FlatWeight::RhoPower(_))
    }

    /// ω(z) given ρ(z).
    pub fn eval_with_rho(&self, model: &WeightModel, z: Point, rho: f64) -> Result<f64> {
        Ok(match self {
            FlatWeight::One => 1.0,
            FlatWeight::RhoPower(a) => rho.powf(*a),
            FlatWeight::Custom(f) => f(z),
            FlatWeight::Regularized(w) => {
                // 4 radii × 8 angles midpoint rule in polar coordinates
                let mut s = 0.0;
                let mut wsum = 0.0;
                for i in 0..4 {
                    let r = rho * (i as f64 + 0.5) / 4.0;
                    for k in 0..8 {
                        let zz = z + Point::from_polar(r, 2.0 * PI * (k as f64 + 0.5 * (i % 2) as f64) / 8.0);
                        s += r * w.eval(model, zz)?.ln();
                        wsum += r;
                    }
                }
                (s / wsum).exp()
            }
        })
    }

    pub fn eval(&self, model: &WeightModel, z: Point) -> Result<f64> {
        match self {
            FlatWeight::One | FlatWeight::Custom(_) => self.eval_with_rho(model, z, 1.0),
            _ => self.eval_with_rho(model, z, model.rho(z)?),
        }
    }

    /// Exponent γ with ω(z)/ω(ζ) ≲ (1 + d)^γ, used to size peak decay orders.
    pub fn growth_exponent(&self, model: &WeightModel) -> f64 {
        match self {
            FlatWeight::One => 0.0,
            // ρ itself is Lipschitz with polynomial growth in d_φ; the radial
            // weights give ρ(z)/ρ(ζ) ≲ d^{|2−β|/β}-type growth, bounded by 1 per unit of α.
            FlatWeight::RhoPower(a) => {
                let b = model.radial_params().map(|(b, _, _)| (2.0 - b).abs() / b).unwrap_or(1.0);
                a.abs() * b
            }
            _ => 1.0,
        }
    }
}

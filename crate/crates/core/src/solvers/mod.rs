//! Weighted ∂̄ solutions, completion of a sparse sequence to a net,
//! interpolation by Neumann correction, sampling ratios and growth bounds.

mod complete;
mod dbar;
mod grid;
mod growth;
mod interpolate;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use complete::{complete_to_net, Completion, CompletionParams};
pub use dbar::{cauchy_cell_kernel, dbar_solve, DbarOptions, DbarReport, DbarSolution, NormConstant};
pub use grid::GridFunction;
pub(crate) use grid::Fft2;
pub use growth::{extremal_growth, GrowthBounds};
pub use interpolate::{interpolate, InterpolateOptions, InterpolationResult, Interpolant};
pub use sampling::{sampling_ratio, RatioProbe, SamplingOptions, SamplingReport, SamplingTrial};

/// An exponent p ∈ [1, ∞]; written as a number or `inf`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> crate::Result<Self> {
        if p >= 1.0 {
            Ok(Exponent(p))
        } else {
            Err(crate::Error::Domain(format!("exponent p = {p} is not in [1, ∞]")))
        }
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// (Σ |a|^p)^{1/p}, or the max for p = ∞. `a` holds magnitudes.
    pub fn norm<I: IntoIterator<Item = f64>>(self, a: I) -> f64 {
        if self.is_inf() {
            a.into_iter().fold(0.0, f64::max)
        } else {
            // scale by the max so large weights cannot overflow
            let v: Vec<f64> = a.into_iter().collect();
            let m = v.iter().copied().fold(0.0, f64::max);
            if m == 0.0 || !m.is_finite() {
                return m;
            }
            m * v.iter().map(|x| (x / m).powf(self.0)).sum::<f64>().powf(1.0 / self.0)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Exponent::INF);
        }
        let p: f64 = t.parse().map_err(|e| format!("bad exponent '{t}': {e}"))?;
        Exponent::new(p).map_err(|e| e.to_string())
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(p) => Exponent::new(p).map_err(serde::de::Error::custom),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

//! Constructive machinery for sampling and interpolation in weighted Fock
//! spaces whose weight has a doubling Laplacian.

pub mod analysis;
pub mod discretize;
pub mod error;
pub mod geometry;
pub mod partition;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod solvers;
pub mod roots;
pub mod types;
pub mod weights;

pub use error::{Error, Result};
pub use types::{pt, Point, Rect};
pub use geometry::{MetricField, PointSequence, Provenance};
pub use analysis::{classify, density_report, local_density, Classification, DensityReport, Verdict};
pub use discretize::{build_net, MomentCluster, Net};
pub use partition::{build_partition, Partition, QuasiSquare};
pub use potential::{AnalyticWindow, MultiplierEval, PeakFunction};
pub use weights::{DensityTable, FlatWeight, WeightModel};

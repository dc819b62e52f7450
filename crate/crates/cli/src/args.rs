use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fockdens::solvers::Exponent;
use fockdens::{Point, Rect};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "fockdens", version, about = "Density, sampling and interpolation experiments for weighted Fock spaces")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    RadialPower,
    Custom,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// key=value file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "radial-power")]
    pub weight: WeightKind,
    /// φ = |z|^β for the radial power weight.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub beta: f64,
    /// CSV density table x,y,value for `--weight custom`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    /// Flat weight ω = ρ^α.
    #[arg(long, global = true, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// x0,y0,x1,y1
    #[arg(long, global = true, default_value = "-10,-10,10,10", allow_hyphen_values = true)]
    pub window: Rect,
    /// Metric graph nodes per unit ρ at the window centre.
    #[arg(long, global = true, default_value_t = 8.0)]
    pub res: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON artifact path; `-` writes it to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Where the sequence under test comes from.
#[derive(Debug, Args, Serialize)]
pub struct SeqSource {
    /// Sequence JSON {"points": [[x, y], ...]}.
    #[arg(long)]
    pub seq: Option<PathBuf>,
    /// Square lattice aℤ² + offset, clipped to the window.
    #[arg(long)]
    pub lattice: Option<f64>,
    #[arg(long, default_value = "0,0", value_parser = parse_point, allow_hyphen_values = true)]
    pub offset: Point,
    /// Build the m = n = 1 net on the window.
    #[arg(long)]
    pub build_net: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RadiusGrid {
    /// Radii in units of ρ.
    #[arg(long, default_value_t = 5.0)]
    pub rmin: f64,
    #[arg(long, default_value_t = 20.0)]
    pub rmax: f64,
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    #[arg(long, default_value_t = 64)]
    pub probes: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// ρ(z), the radius of unit μ-mass.
    Rho {
        #[arg(long, default_value = "0,0", value_parser = parse_point, allow_hyphen_values = true)]
        at: Point,
    },
    /// Equal-mass partition of the window.
    Partition {
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
    },
    /// Zero set of a constructed multiplier.
    Net {
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, alias = "N", default_value_t = 1)]
        n: usize,
    },
    /// Multiplier certificate sup |log|g| − φ − log d_φ(·, Λ)|.
    Multiplier {
        #[arg(default_value = "check")]
        action: MultiplierAction,
        /// Net artifact written by `net`; built on the window when absent.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Probe grid points per side.
        #[arg(long, default_value_t = 41)]
        probes: usize,
        /// Probe region; the window shrunk by 4ρ when absent.
        #[arg(long, allow_hyphen_values = true)]
        probe_window: Option<Rect>,
        /// Per-probe CSV x,y,defect.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Upper and lower uniform densities.
    Density {
        #[command(flatten)]
        source: SeqSource,
        #[command(flatten)]
        radii: RadiusGrid,
        /// CSV r,sup,inf.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sampling-side / interpolating-side verdict.
    Classify {
        #[command(flatten)]
        source: SeqSource,
        #[command(flatten)]
        radii: RadiusGrid,
        /// Separation floor in units of ρ.
        #[arg(long, default_value_t = 0.1)]
        delta_floor: f64,
    },
    /// Interpolate values on Λ.
    Interpolate {
        #[command(flatten)]
        source: SeqSource,
        /// JSON {"values": [[re, im], ...]}, one per point, relative to e^{φ(λ)}/ω(λ).
        #[arg(long)]
        values: Option<PathBuf>,
        /// Without --values: this many seeded values at the points nearest the window centre.
        #[arg(long, default_value_t = 25)]
        count: usize,
        #[arg(long, default_value = "inf")]
        p: Exponent,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Solve ∂̄u = f against the weight.
    Dbar {
        /// CSV x,y,re[,im] on a uniform grid; defaults to e^φ times a smooth cutoff.
        #[arg(long)]
        datum: Option<PathBuf>,
        /// Grid step of the built-in datum.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        /// Support radius of the built-in datum.
        #[arg(long, default_value_t = 1.0)]
        support: f64,
        /// Comma separated exponents.
        #[arg(long, default_value = "1,2,inf", value_delimiter = ',')]
        p: Vec<Exponent>,
        #[arg(long, default_value_t = 1e-3)]
        residual_tol: f64,
        /// u on the grid as CSV x,y,re,im.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Peak-combination test of the sampling inequality.
    SampleTest {
        #[command(flatten)]
        source: SeqSource,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value = "2")]
        p: Exponent,
        #[arg(long, default_value_t = 3)]
        max_terms: usize,
    },
    /// Counting function against the weight's Jensen bound.
    Jensen {
        #[command(flatten)]
        source: SeqSource,
        /// Comma separated radii R, in units of ρ(0).
        #[arg(long, default_value = "10,20,30", value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        slack: f64,
    },
    /// Collect artifacts into one report, or run net → density → classify → jensen when none are given.
    Report {
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierAction {
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rho { .. } => "rho",
            Command::Partition { .. } => "partition",
            Command::Net { .. } => "net",
            Command::Multiplier { .. } => "multiplier",
            Command::Density { .. } => "density",
            Command::Classify { .. } => "classify",
            Command::Interpolate { .. } => "interpolate",
            Command::Dbar { .. } => "dbar",
            Command::SampleTest { .. } => "sample-test",
            Command::Jensen { .. } => "jensen",
            Command::Report { .. } => "report",
        }
    }
}

pub fn parse_point(s: &str) -> Result<Point, String> {
    let v: Vec<&str> = s.split(',').map(str::trim).collect();
    if v.len() != 2 {
        return Err(format!("expected x,y but got '{s}'"));
    }
    let x: f64 = v[0].parse().map_err(|e| format!("bad number '{}': {e}", v[0]))?;
    let y: f64 = v[1].parse().map_err(|e| format!("bad number '{}': {e}", v[1]))?;
    Ok(Point::new(x, y))
}

use std::path::PathBuf;

use capa_core::{Method, TruncationPolicy};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Default transmit-power sweep in watts: −30 dBW to 20 dBW in 5 dB steps.
pub fn default_power_sweep() -> Vec<f64> {
    (-6..=4).map(|k| 10f64.powf(0.5 * f64::from(k))).collect()
}

#[derive(Debug, Parser)]
#[command(name = "capa", version, about = "Channel statistics of linear continuous-aperture arrays")]
pub struct Cli {
    /// Worker threads for sweeps and Monte Carlo batches. Results do not depend on it.
    #[arg(long, env = "CAPA_THREADS", global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ordered eigenvalues of the sinc autocorrelation operator.
    Eigs(EigsArgs),
    /// Closed-form density and distribution of the normalized gain.
    Pdf(PdfArgs),
    /// Ergodic capacity against transmit power.
    Capacity(CapacityArgs),
    /// Aperture versus discrete-array capacity at equal power.
    Compare(CompareArgs),
    /// Raw gain draws from one of the simulators.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Aperture length in wavelengths.
    #[arg(long = "L", value_name = "WAVELENGTHS", default_value_t = 10.0, allow_negative_numbers = true)]
    pub length_wl: f64,

    /// Carrier frequency in Hz.
    #[arg(long, value_name = "HZ", default_value_t = 2.4e9)]
    pub fc: f64,

    /// Noise power in V²/m.
    #[arg(long, value_name = "V2M", default_value_t = 5.6e-3, allow_negative_numbers = true)]
    pub noise: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    /// Nyström quadrature order; defaults to max(64, 4·DOF).
    #[arg(long)]
    pub order: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// User location in wavelengths, recorded but unused under isotropic scattering.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [500.0, 0.0, 0.0])]
    pub user_position: Vec<f64>,
}

/// Truncation controls for the ψ series.
#[derive(Debug, Clone, Copy, Args)]
pub struct SeriesArgs {
    /// Tail-bound tolerance.
    #[arg(long, default_value_t = capa_core::gaindist::DEFAULT_TAIL_TOL)]
    pub tol: f64,

    /// Maximum number of terms before the run is aborted.
    #[arg(long, default_value_t = capa_core::gaindist::DEFAULT_Q_CAP)]
    pub q_cap: usize,
}

impl From<SeriesArgs> for TruncationPolicy {
    fn from(s: SeriesArgs) -> Self {
        TruncationPolicy { tol: s.tol, q_cap: s.q_cap }
    }
}

#[derive(Debug, Args)]
pub struct EigsArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PdfArgs {
    #[command(flatten)]
    pub common: Common,

    /// Upper end of the x grid; defaults to mean + 12 standard deviations.
    #[arg(long)]
    pub x_max: Option<f64>,

    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 2001)]
    pub points: usize,

    #[command(flatten)]
    pub series: SeriesArgs,

    /// Add an empirical CDF column from the spectral simulator.
    #[arg(long)]
    pub mc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapacityMode {
    /// Every column.
    All,
    ClosedForm,
    Mc,
    Mimo,
    Asymptote,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub common: Common,

    /// Transmit powers in watts.
    #[arg(long, value_delimiter = ',', default_values_t = default_power_sweep())]
    pub power: Vec<f64>,

    #[arg(long, value_enum, default_value_t = CapacityMode::All)]
    pub mode: CapacityMode,

    #[command(flatten)]
    pub series: SeriesArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,

    /// Transmit powers in watts.
    #[arg(long, value_delimiter = ',', default_values_t = default_power_sweep())]
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Spectral,
    Kl,
    Mimo,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Kl => Method::Kl,
            MethodArg::Mimo => Method::Mimo,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, value_enum, default_value_t = MethodArg::Spectral)]
    pub method: MethodArg,
}

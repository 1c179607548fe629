//! Channel statistics of a linear continuous-aperture array under isotropic
//! scattering.
//!
//! * [`spectrum`]: Nyström eigen-spectrum of the sinc autocorrelation kernel
//!   and Landau's eigenvalue-count prediction.
//! * [`gaindist`]: the channel gain as a weighted sum of exponentials, with
//!   PDF/CDF from a gamma-mixture series.
//! * [`capacity`]: closed-form ergodic capacity, its high-SNR line, and a
//!   quadrature cross-check.
//! * [`montecarlo`]: reproducible field simulators (spectral and
//!   Karhunen-Loève) and a discrete-array baseline.
//!
//! Lengths are measured in carrier wavelengths throughout.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod error;
pub mod gaindist;
pub mod montecarlo;
pub mod quadrature;
pub mod special;
pub mod spectrum;
pub mod stats;

pub use capacity::{avg_capacity, capacity_quadrature_oracle, high_snr_asymptote, CapacityResult, SnrConfig};
pub use error::{Error, Result};
pub use gaindist::{GainDistribution, GainSpectrum, PsiSeries, TruncationPolicy};
pub use montecarlo::{Method, SampleBatch, SimulationConfig};
pub use spectrum::{eigendecompose, landau_count, Aperture, QuadratureGrid, SpectralDecomposition, K0};

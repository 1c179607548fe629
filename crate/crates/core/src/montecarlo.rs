//! Monte Carlo simulation of the aperture field and its gain.
//!
//! The spectral simulator draws independent complex Gaussian weights on a
//! midpoint grid of wavenumbers in `[−k0, k0]`, each scaled by
//! `√(Δκ/(2k0))`, so the field's autocorrelation is a Riemann sum of the sinc
//! autocorrelation. The Karhunen-Loève simulator draws one coefficient per
//! eigenmode instead. Both are keyed by `(seed, sample_index, index)` through a
//! ChaCha stream, so results do not depend on how samples are split across
//! threads.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::SnrConfig;
use crate::error::{invalid, Error, Result};
use crate::spectrum::{Aperture, SpectralDecomposition, K0};
use crate::stats::mean_stderr;

/// Element length of the discrete baseline, `√(λ²/4π)` in wavelengths.
pub const MIMO_ELEMENT_LENGTH: f64 = 0.282_094_791_773_878_14;
/// Spacing of the discrete baseline, in wavelengths.
pub const MIMO_SPACING: f64 = 0.5;
/// Fraction of the trace the Karhunen-Loève simulator keeps.
pub const KL_ENERGY_FRACTION: f64 = 1.0 - 1e-6;

const DOMAIN_SPECTRAL: u64 = 0x5350_4543_5452_414c;
const DOMAIN_KL: u64 = 0x4b41_5248_554e_454e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Number of wavenumber bins in `[−k0, k0]`.
    pub kappa_bins: usize,
    /// Number of uniformly spaced field samples across the aperture, endpoints included.
    pub z_points: usize,
}

/// Outcome of [`SimulationConfig::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfigWarnings {
    /// Fewer than `8·DOF` wavenumber bins.
    pub coarse_kappa_grid: bool,
}

impl SimulationConfig {
    /// Recommended grid sizes for an aperture.
    pub fn for_aperture(aperture: &Aperture, seed: u64, n_samples: usize) -> Self {
        Self {
            seed,
            n_samples,
            kappa_bins: Self::min_kappa_bins(aperture).max(64),
            z_points: Self::min_z_points(aperture).max(33),
        }
    }

    pub fn min_kappa_bins(aperture: &Aperture) -> usize {
        (8.0 * aperture.dof()).ceil() as usize
    }

    /// At least 16 samples per wavelength over the aperture.
    pub fn min_z_points(aperture: &Aperture) -> usize {
        (16.0 * aperture.length_wl()).ceil() as usize + 1
    }

    pub fn validate(&self, aperture: &Aperture) -> Result<ConfigWarnings> {
        if self.n_samples == 0 {
            return invalid("n_samples must be positive");
        }
        if self.kappa_bins == 0 {
            return invalid("kappa_bins must be positive");
        }
        let min_z = Self::min_z_points(aperture).max(2);
        if self.z_points < min_z {
            return invalid(format!(
                "z_points = {} is below 16 per wavelength ({min_z} needed)",
                self.z_points
            ));
        }
        Ok(ConfigWarnings { coarse_kappa_grid: self.kappa_bins < Self::min_kappa_bins(aperture) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Kl,
    Mimo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spectral => "spectral",
            Method::Kl => "kl",
            Method::Mimo => "mimo",
        })
    }
}

/// Draws of the normalized gain `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub gains: Vec<f64>,
    pub method: Method,
    pub config: SimulationConfig,
}

/// Sample points and integration weights on the aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub z: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FieldGrid {
    /// Uniform grid over `[−L/2, L/2]` with trapezoidal weights.
    pub fn trapezoid(aperture: &Aperture, points: usize) -> Result<Self> {
        if points < 2 {
            return invalid("a trapezoidal grid needs at least two points");
        }
        let l = aperture.length_wl();
        let h = l / (points - 1) as f64;
        // mirror-exact placement: z[i] = −z[n−1−i]
        let z = (0..points)
            .map(|i| {
                let k = 2 * i as i64 - (points as i64 - 1);
                0.5 * h * k as f64
            })
            .collect();
        let mut weights = vec![h; points];
        weights[0] = 0.5 * h;
        weights[points - 1] = 0.5 * h;
        Ok(Self { z, weights })
    }
}

/// Field samples with the grid they live on.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: FieldGrid,
    pub values: Vec<Complex64>,
}

fn stream(seed: u64, domain: u64, sample_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(sample_index);
    rng
}

/// Fills `out` with i.i.d. `CN(0, 1)` draws. Entry `i` uses stream words
/// `4i..4i+4`, so it depends only on `(seed, domain, sample_index, i)`.
fn complex_normals(seed: u64, domain: u64, sample_index: u64, out: &mut [Complex64]) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let mut rng = stream(seed, domain, sample_index);
    for w in out.iter_mut() {
        let u1 = ((rng.next_u64() >> 11) as f64 + 1.0) * SCALE; // (0, 1]
        let u2 = (rng.next_u64() >> 11) as f64 * SCALE; // [0, 1)
        let r = (-u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        *w = Complex64::new(r * c, r * s);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (ra, rb) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Spectral-method field with precomputed cosine/sine tables on a point set
/// symmetric about the origin.
///
/// Pairing bins at `±κ` gives `g(±z) = amp·(A(z) ± jB(z))` with
/// `A = Σ (w₊ + w₋) cos κz` and `B = Σ (w₊ − w₋) sin κz`, so only `z ≥ 0` is tabulated.
#[derive(Debug, Clone)]
pub struct SpectralField {
    kappa_bins: usize,
    amp: f64,
    points: Vec<f64>,
    // rows for points[half..], columns for positive-κ pairs
    cos: Vec<f64>,
    sin: Vec<f64>,
    pairs: usize,
    half: usize,
}

impl SpectralField {
    /// Midpoint wavenumber grid, ascending.
    pub fn kappa_grid(kappa_bins: usize) -> Vec<f64> {
        let dk = 2.0 * K0 / kappa_bins as f64;
        (0..kappa_bins).map(|n| -K0 + (n as f64 + 0.5) * dk).collect()
    }

    /// `points` must be sorted ascending and symmetric about zero.
    pub fn new(kappa_bins: usize, points: &[f64]) -> Result<Self> {
        if kappa_bins == 0 {
            return invalid("kappa_bins must be positive");
        }
        let m = points.len();
        if m == 0 {
            return invalid("no field points");
        }
        for i in 0..m {
            if (points[i] + points[m - 1 - i]).abs() > 1e-12 * (1.0 + points[i].abs()) {
                return invalid("field points must be symmetric about the origin");
            }
        }
        let kappa = Self::kappa_grid(kappa_bins);
        let pairs = kappa_bins / 2;
        let half = m / 2;
        let rows = m - half;
        let mut cos = Vec::with_capacity(rows * pairs);
        let mut sin = Vec::with_capacity(rows * pairs);
        for &z in &points[half..] {
            for p in 0..pairs {
                let k = kappa[kappa_bins - 1 - p];
                cos.push((k * z).cos());
                sin.push((k * z).sin());
            }
        }
        Ok(Self {
            kappa_bins,
            amp: (1.0 / kappa_bins as f64).sqrt(),
            points: points.to_vec(),
            cos,
            sin,
            pairs,
            half,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kappa_bins(&self) -> usize {
        self.kappa_bins
    }

    /// Bin weights `w_n` for one draw.
    pub fn weights(&self, seed: u64, sample_index: u64) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.kappa_bins];
        complex_normals(seed, DOMAIN_SPECTRAL, sample_index, &mut w);
        w
    }

    /// Pair sums `(re a, im a, re b, im b, centre)` from the bin weights.
    fn pair_coefficients(&self, w: &[Complex64]) -> ([Vec<f64>; 4], Complex64) {
        let k = self.kappa_bins;
        let mut out = [
            Vec::with_capacity(self.pairs),
            Vec::with_capacity(self.pairs),
            Vec::with_capacity(self.pairs),
            Vec::with_capacity(self.pairs),
        ];
        for p in 0..self.pairs {
            let plus = w[k - 1 - p];
            let minus = w[p];
            let a = plus + minus;
            let b = plus - minus;
            out[0].push(a.re);
            out[1].push(a.im);
            out[2].push(b.re);
            out[3].push(b.im);
        }
        let centre = if k % 2 == 1 { w[k / 2] } else { Complex64::new(0.0, 0.0) };
        (out, centre)
    }

    /// `(A, B)` at tabulated row `r`.
    #[inline]
    fn row(&self, coef: &[Vec<f64>; 4], centre: Complex64, r: usize) -> (Complex64, Complex64) {
        let c = &self.cos[r * self.pairs..(r + 1) * self.pairs];
        let s = &self.sin[r * self.pairs..(r + 1) * self.pairs];
        let a = Complex64::new(dot(c, &coef[0]), dot(c, &coef[1])) + centre;
        let b = Complex64::new(dot(s, &coef[2]), dot(s, &coef[3]));
        (a, b)
    }

    /// Field values at every point.
    pub fn evaluate(&self, w: &[Complex64]) -> Vec<Complex64> {
        let (coef, centre) = self.pair_coefficients(w);
        let m = self.points.len();
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let j = Complex64::new(0.0, 1.0);
        for (r, i) in (self.half..m).enumerate() {
            let (a, b) = self.row(&coef, centre, r);
            out[i] = self.amp * (a + j * b);
            out[m - 1 - i] = self.amp * (a - j * b);
        }
        out
    }

    /// `Σ_i c_i |g(z_i)|²` for weights `c` symmetric like the points.
    pub fn weighted_energy(&self, w: &[Complex64], c: &[f64]) -> f64 {
        let (coef, centre) = self.pair_coefficients(w);
        let m = self.points.len();
        let mut total = 0.0;
        for (r, i) in (self.half..m).enumerate() {
            let (a, b) = self.row(&coef, centre, r);
            if i == m - 1 - i {
                total += c[i] * a.norm_sqr();
            } else {
                // |A + jB|² + |A − jB|²
                total += c[i] * 2.0 * (a.norm_sqr() + b.norm_sqr());
            }
        }
        self.amp * self.amp * total
    }
}

/// Direct evaluation of the spectral field at arbitrary positions.
pub fn spectral_field_at(kappa_bins: usize, w: &[Complex64], z: &[f64]) -> Vec<Complex64> {
    let kappa = SpectralField::kappa_grid(kappa_bins);
    let amp = (1.0 / kappa_bins as f64).sqrt();
    z.iter()
        .map(|&z| {
            kappa
                .iter()
                .zip(w)
                .map(|(k, w)| Complex64::from_polar(1.0, k * z) * w)
                .sum::<Complex64>()
                * amp
        })
        .collect()
}

/// One spectral-method field draw on the trapezoidal aperture grid.
pub fn simulate_field_spectral(
    aperture: &Aperture,
    config: &SimulationConfig,
    sample_index: u64,
) -> Result<FieldSample> {
    config.validate(aperture)?;
    let grid = FieldGrid::trapezoid(aperture, config.z_points)?;
    let field = SpectralField::new(config.kappa_bins, &grid.z)?;
    let values = field.evaluate(&field.weights(config.seed, sample_index));
    Ok(FieldSample { grid, values })
}

/// `∫|g(z)|² dz` by the grid's quadrature weights.
pub fn sample_gain(values: &[Complex64], grid: &FieldGrid) -> f64 {
    values.iter().zip(&grid.weights).map(|(v, w)| w * v.norm_sqr()).sum()
}

/// Karhunen-Loève field draw and the mode coefficients that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KlDraw {
    pub field: FieldSample,
    /// `Φ_ℓ`, i.i.d. `CN(0, 1)`.
    pub coefficients: Vec<Complex64>,
    /// `σ_ℓ` of the retained modes.
    pub sigma: Vec<f64>,
}

/// Karhunen-Loève simulator on the decomposition's quadrature grid.
#[derive(Debug, Clone)]
pub struct KlField {
    grid: FieldGrid,
    sigma: Vec<f64>,
    // row-major nodes × modes, already scaled by √σ_ℓ
    basis: Vec<f64>,
}

impl KlField {
    pub fn new(decomp: &SpectralDecomposition) -> Result<Self> {
        let phi = decomp.eigvec_samples.as_ref().ok_or(Error::MissingEigenfunctions)?;
        let total: f64 = decomp.sigma.iter().sum();
        let mut acc = 0.0;
        let mut modes = 0;
        for s in &decomp.sigma {
            if acc >= KL_ENERGY_FRACTION * total {
                break;
            }
            acc += s;
            modes += 1;
        }
        let sigma = decomp.sigma[..modes].to_vec();
        let nodes = phi.nrows();
        let mut basis = Vec::with_capacity(nodes * modes);
        for i in 0..nodes {
            for (l, s) in sigma.iter().enumerate() {
                basis.push(s.sqrt() * phi[(i, l)]);
            }
        }
        Ok(Self {
            grid: FieldGrid { z: decomp.grid.nodes.clone(), weights: decomp.grid.weights.clone() },
            sigma,
            basis,
        })
    }

    pub fn modes(&self) -> usize {
        self.sigma.len()
    }

    pub fn coefficients(&self, seed: u64, sample_index: u64) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); self.modes()];
        complex_normals(seed, DOMAIN_KL, sample_index, &mut c);
        c
    }

    pub fn evaluate(&self, coef: &[Complex64]) -> Vec<Complex64> {
        let modes = self.modes();
        let re: Vec<f64> = coef.iter().map(|c| c.re).collect();
        let im: Vec<f64> = coef.iter().map(|c| c.im).collect();
        self.basis
            .chunks_exact(modes)
            .map(|row| Complex64::new(dot(row, &re), dot(row, &im)))
            .collect()
    }

    pub fn draw(&self, seed: u64, sample_index: u64) -> KlDraw {
        let coefficients = self.coefficients(seed, sample_index);
        let values = self.evaluate(&coefficients);
        KlDraw {
            field: FieldSample { grid: self.grid.clone(), values },
            coefficients,
            sigma: self.sigma.clone(),
        }
    }

    pub fn gain(&self, seed: u64, sample_index: u64) -> f64 {
        let values = self.evaluate(&self.coefficients(seed, sample_index));
        sample_gain(&values, &self.grid)
    }
}

/// One Karhunen-Loève field draw on the decomposition's grid.
pub fn simulate_field_kl(
    decomp: &SpectralDecomposition,
    config: &SimulationConfig,
    sample_index: u64,
) -> Result<KlDraw> {
    Ok(KlField::new(decomp)?.draw(config.seed, sample_index))
}

/// Positions of the discrete baseline: `floor(2L/λ) + 1` elements at half-wavelength spacing.
pub fn mimo_positions(aperture: &Aperture) -> Result<Vec<f64>> {
    if aperture.length_wl() < MIMO_SPACING {
        return invalid(format!(
            "aperture of {} wavelengths is shorter than one element spacing",
            aperture.length_wl()
        ));
    }
    let n = (aperture.length_wl() / MIMO_SPACING).floor() as i64 + 1;
    Ok((0..n).map(|i| 0.5 * MIMO_SPACING * (2 * i - (n - 1)) as f64).collect())
}

/// Gain of the discrete array fed with the same field draw:
/// `ℓ_e · Σ_n |g(z_n)|²`.
pub fn mimo_baseline_gain(aperture: &Aperture, config: &SimulationConfig, sample_index: u64) -> Result<f64> {
    config.validate(aperture)?;
    let pos = mimo_positions(aperture)?;
    let field = SpectralField::new(config.kappa_bins, &pos)?;
    let c = vec![MIMO_ELEMENT_LENGTH; pos.len()];
    Ok(field.weighted_energy(&field.weights(config.seed, sample_index), &c))
}

/// Batch simulator sharing tables across draws.
#[derive(Debug, Clone)]
pub struct SpectralSimulator {
    config: SimulationConfig,
    grid: FieldGrid,
    aperture_field: SpectralField,
    mimo_field: Option<SpectralField>,
}

impl SpectralSimulator {
    pub fn new(aperture: &Aperture, config: &SimulationConfig) -> Result<Self> {
        config.validate(aperture)?;
        let grid = FieldGrid::trapezoid(aperture, config.z_points)?;
        let aperture_field = SpectralField::new(config.kappa_bins, &grid.z)?;
        let mimo_field = match mimo_positions(aperture) {
            Ok(p) => Some(SpectralField::new(config.kappa_bins, &p)?),
            Err(_) => None,
        };
        Ok(Self { config: *config, grid, aperture_field, mimo_field })
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn gain(&self, sample_index: u64) -> f64 {
        let w = self.aperture_field.weights(self.config.seed, sample_index);
        self.aperture_field.weighted_energy(&w, &self.grid.weights)
    }

    /// Aperture gain and discrete-array gain from the same draw.
    pub fn gain_pair(&self, sample_index: u64) -> Result<(f64, f64)> {
        let mimo = self
            .mimo_field
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("aperture too short for the discrete baseline".into()))?;
        let w = self.aperture_field.weights(self.config.seed, sample_index);
        let capa = self.aperture_field.weighted_energy(&w, &self.grid.weights);
        let c = vec![MIMO_ELEMENT_LENGTH; mimo.points().len()];
        Ok((capa, mimo.weighted_energy(&w, &c)))
    }

    /// `n_samples` aperture-gain draws, in index order.
    pub fn batch(&self) -> SampleBatch {
        let gains = (0..self.config.n_samples as u64).into_par_iter().map(|i| self.gain(i)).collect();
        SampleBatch { gains, method: Method::Spectral, config: self.config }
    }

    /// Aperture and discrete-array batches over common draws.
    pub fn batch_pair(&self) -> Result<(SampleBatch, SampleBatch)> {
        let pairs: Vec<(f64, f64)> = (0..self.config.n_samples as u64)
            .into_par_iter()
            .map(|i| self.gain_pair(i))
            .collect::<Result<_>>()?;
        let (capa, mimo) = pairs.into_iter().unzip();
        Ok((
            SampleBatch { gains: capa, method: Method::Spectral, config: self.config },
            SampleBatch { gains: mimo, method: Method::Mimo, config: self.config },
        ))
    }
}

/// Spectral-method gain draws.
pub fn simulate_spectral_batch(aperture: &Aperture, config: &SimulationConfig) -> Result<SampleBatch> {
    Ok(SpectralSimulator::new(aperture, config)?.batch())
}

/// Karhunen-Loève gain draws.
pub fn simulate_kl_batch(decomp: &SpectralDecomposition, config: &SimulationConfig) -> Result<SampleBatch> {
    if config.n_samples == 0 {
        return invalid("n_samples must be positive");
    }
    let kl = KlField::new(decomp)?;
    let gains = (0..config.n_samples as u64).into_par_iter().map(|i| kl.gain(config.seed, i)).collect();
    Ok(SampleBatch { gains, method: Method::Kl, config: *config })
}

/// Discrete-array gain draws.
pub fn simulate_mimo_batch(aperture: &Aperture, config: &SimulationConfig) -> Result<SampleBatch> {
    Ok(SpectralSimulator::new(aperture, config)?.batch_pair()?.1)
}

/// Sample mean and standard error of `log₂(1 + γ̄G)`.
pub fn ergodic_capacity_mc(batch: &SampleBatch, snr: &SnrConfig) -> Result<(f64, f64)> {
    if batch.gains.is_empty() {
        return invalid("empty sample batch");
    }
    let caps: Vec<f64> = batch
        .gains
        .iter()
        .map(|g| (snr.gamma_bar * g).ln_1p() / std::f64::consts::LN_2)
        .collect();
    Ok(mean_stderr(&caps))
}

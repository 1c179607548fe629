//! Distribution of the normalized channel gain `G = Σ σ_ℓ |Φ_ℓ|²`.
//!
//! `G` is a sum of independent exponentials with means `σ_ℓ`. Its density is
//! written as a mixture of gamma densities with common scale `σ_min` and shapes
//! `D + q`, the mixture weights coming from the ψ recursion. The series is
//! infinite and is cut at `Q` using a negative-binomial envelope on `ψ_q`.
//!
//! Densities are over `G`; the SNR is `γ̄·G`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{incomplete_gamma_int, ln_factorial};
use crate::spectrum::SpectralDecomposition;

/// Relative floor below which eigenvalues are treated as zero.
pub const DROP_RELATIVE: f64 = 1e-12;
/// Default tail tolerance for the ψ series.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Default cap on the number of ψ terms.
pub const DEFAULT_Q_CAP: usize = 5000;

/// Descending, strictly positive channel eigenvalues retained in the gain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSpectrum {
    sigma: Vec<f64>,
    sigma_min: f64,
}

impl GainSpectrum {
    /// Builds a spectrum from arbitrary-order values. Entries below
    /// `1e-12·max` are dropped.
    pub fn new(mut sigma: Vec<f64>) -> Result<Self> {
        if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return invalid("gain spectrum entries must be finite and nonnegative");
        }
        let max = sigma.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return invalid("gain spectrum has no positive entries");
        }
        sigma.retain(|&s| s >= DROP_RELATIVE * max);
        sigma.sort_by(|a, b| b.total_cmp(a));
        let sigma_min = *sigma.last().expect("max entry survives");
        Ok(Self { sigma, sigma_min })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma[0]
    }

    /// Number of exponential terms `D`.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `ln(σ_min^D / Π σ_ℓ)`.
    pub fn ln_normalizer(&self) -> f64 {
        self.sigma.iter().map(|s| (self.sigma_min / s).ln()).sum()
    }

    /// Base terms `1 − σ_min/σ_ℓ` of the ψ recursion.
    fn ratios(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| 1.0 - self.sigma_min / s).collect()
    }
}

/// Number of retained terms for a given DOF: nearest integer, halves rounded up.
pub fn retained_terms(dof: f64) -> usize {
    (dof + 0.5).floor() as usize
}

/// Leading `round(2L/λ)` channel eigenvalues of a decomposition.
pub fn make_gain_spectrum(decomp: &SpectralDecomposition) -> Result<GainSpectrum> {
    if !(decomp.dof >= 1.0) {
        return invalid(format!("DOF {} is below one; no terms to retain", decomp.dof));
    }
    let d = retained_terms(decomp.dof);
    if decomp.sigma.len() < d {
        return invalid(format!(
            "decomposition holds {} eigenvalues, {d} required",
            decomp.sigma.len()
        ));
    }
    let lead = &decomp.sigma[..d];
    if lead[d - 1] < DROP_RELATIVE * lead[0] {
        return invalid(format!("leading eigenvalue {d} is numerically zero; raise the order"));
    }
    GainSpectrum::new(lead.to_vec())
}

/// Mean and variance of `G`.
pub fn moments(spec: &GainSpectrum) -> (f64, f64) {
    let mean = spec.sigma.iter().sum();
    let var = spec.sigma.iter().map(|s| s * s).sum();
    (mean, var)
}

/// Coefficients of the gamma-mixture series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSeries {
    /// `ψ_0 … ψ_Q`, with `ψ_0 = 1`.
    pub psi: Vec<f64>,
    /// Mixture weights `(σ_min^D / Π σ_ℓ)·ψ_q`.
    pub weights: Vec<f64>,
    pub q_max: usize,
    pub tail_tol: f64,
    /// Upper bound on the probability mass dropped beyond `q_max`.
    pub tail_bound: f64,
    pub converged: bool,
}

impl PsiSeries {
    /// Truncates by [`choose_truncation`] and computes the coefficients.
    pub fn for_spectrum(spec: &GainSpectrum, policy: &TruncationPolicy) -> Result<Self> {
        let q = choose_truncation(spec, policy)?;
        Ok(psi_with_tolerance(spec, q, policy.tol))
    }

    pub fn terms(&self) -> usize {
        self.psi.len()
    }
}

/// ψ coefficients up to `q_max` by the exact recursion
/// `ψ_q = (1/q) Σ_{k=1}^{q} [Σ_ℓ (1 − σ_min/σ_ℓ)^k] ψ_{q−k}`.
pub fn psi_coefficients(spec: &GainSpectrum, q_max: usize) -> PsiSeries {
    psi_with_tolerance(spec, q_max, DEFAULT_TAIL_TOL)
}

fn psi_with_tolerance(spec: &GainSpectrum, q_max: usize, tail_tol: f64) -> PsiSeries {
    let ratios = spec.ratios();
    // power sums S_k, k = 1..=q_max
    let mut power_sums = vec![0.0; q_max + 1];
    let mut pows = ratios.clone();
    for s in power_sums.iter_mut().skip(1) {
        *s = pows.iter().sum();
        for (p, r) in pows.iter_mut().zip(&ratios) {
            *p *= r;
        }
    }

    let ln_c = spec.ln_normalizer();
    let mut weights = Vec::with_capacity(q_max + 1);
    weights.push(ln_c.exp());
    let mut psi = Vec::with_capacity(q_max + 1);
    psi.push(1.0);
    for q in 1..=q_max {
        let mut acc_w = 0.0;
        let mut acc_psi = 0.0;
        for k in 1..=q {
            acc_w += power_sums[k] * weights[q - k];
            acc_psi += power_sums[k] * psi[q - k];
        }
        weights.push(acc_w / q as f64);
        psi.push(acc_psi / q as f64);
    }

    let tail_bound = tail_bound(spec, q_max);
    PsiSeries {
        psi,
        weights,
        q_max,
        tail_tol,
        tail_bound,
        converged: tail_bound <= tail_tol,
    }
}

/// Stopping rule for the ψ series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub tol: f64,
    pub q_cap: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { tol: DEFAULT_TAIL_TOL, q_cap: DEFAULT_Q_CAP }
    }
}

impl TruncationPolicy {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Bound on `Σ_{q>Q} (σ_min^D/Πσ_ℓ)·ψ_q`.
///
/// `ψ_q` is the `t^q` coefficient of `Π_ℓ (1 − r_ℓ t)^{-1}`, so with
/// `r = max r_ℓ` and `D'` nonzero ratios it is at most `C(q+D'−1, q)·r^q`.
/// The negative-binomial tail is summed until its term ratio is safely below
/// one and closed with a geometric bound.
pub fn tail_bound(spec: &GainSpectrum, q: usize) -> f64 {
    let ratios = spec.ratios();
    let r = ratios.iter().cloned().fold(0.0, f64::max);
    let d_eff = ratios.iter().filter(|&&x| x > 0.0).count();
    if d_eff == 0 || r <= 0.0 {
        return 0.0;
    }
    let ln_c = spec.ln_normalizer();
    let ln_r = r.ln();
    let ln_fact_d = ln_factorial(d_eff - 1);
    let target_ratio = 0.5 * (1.0 + r);
    let d = d_eff as f64;

    let mut j = q + 1;
    let mut sum = 0.0;
    loop {
        let ln_term =
            ln_c + ln_factorial(j + d_eff - 1) - ln_factorial(j) - ln_fact_d + j as f64 * ln_r;
        let term = ln_term.exp();
        sum += term;
        let ratio = r * (j as f64 + d) / (j as f64 + 1.0);
        if ratio <= target_ratio {
            return sum + term * ratio / (1.0 - ratio);
        }
        j += 1;
    }
}

/// Smallest `Q` whose tail bound is below `policy.tol`.
pub fn choose_truncation(spec: &GainSpectrum, policy: &TruncationPolicy) -> Result<usize> {
    if !(policy.tol > 0.0) {
        return invalid(format!("truncation tolerance must be positive, got {}", policy.tol));
    }
    let mut last = f64::INFINITY;
    for q in 0..=policy.q_cap {
        last = tail_bound(spec, q);
        if last < policy.tol {
            return Ok(q);
        }
    }
    Err(Error::SeriesNotConverged { q_max: policy.q_cap, tail_bound: last, tol: policy.tol })
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return invalid(format!("gain argument must be nonnegative, got {x}"));
    }
    Ok(())
}

/// Truncated series density of `G` at `x`.
pub fn pdf(spec: &GainSpectrum, psi: &PsiSeries, x: f64) -> Result<f64> {
    check_x(x)?;
    let d = spec.len();
    let s = spec.sigma_min;
    if x == 0.0 {
        return Ok(if d == 1 { psi.weights[0] / s } else { 0.0 });
    }
    let ln_x = x.ln();
    let ln_s = s.ln();
    let base = -x / s;
    let mut total = 0.0;
    for (q, w) in psi.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let n = d + q;
        let ln_density = (n - 1) as f64 * ln_x + base - n as f64 * ln_s - ln_factorial(n - 1);
        total += w * ln_density.exp();
    }
    Ok(total)
}

/// Truncated series CDF, `Σ_q w_q·P(D+q, x/σ_min)`.
pub fn cdf(spec: &GainSpectrum, psi: &PsiSeries, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(incomplete_sums(spec, psi, x).0)
}

/// Truncated series survival function, `Σ_q w_q·Q(D+q, x/σ_min)`.
pub fn sf(spec: &GainSpectrum, psi: &PsiSeries, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(incomplete_sums(spec, psi, x).1)
}

fn incomplete_sums(spec: &GainSpectrum, psi: &PsiSeries, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, psi.weights.iter().sum());
    }
    let d = spec.len();
    let y = x / spec.sigma_min;
    let (mut p, mut q_upper) = incomplete_gamma_int(d, y);
    let ln_y = y.ln();
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (q, w) in psi.weights.iter().enumerate() {
        if q > 0 {
            // P(n+1, y) = P(n, y) − y^n e^{-y} / n!
            let n = d + q - 1;
            let step = (-y + n as f64 * ln_y - ln_factorial(n)).exp();
            p = (p - step).max(0.0);
            q_upper = (q_upper + step).min(1.0);
        }
        lower += w * p;
        upper += w * q_upper;
    }
    (lower, upper)
}

/// A gain spectrum bundled with its converged ψ series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainDistribution {
    pub spectrum: GainSpectrum,
    pub psi: PsiSeries,
}

impl GainDistribution {
    pub fn new(spectrum: GainSpectrum, policy: &TruncationPolicy) -> Result<Self> {
        let psi = PsiSeries::for_spectrum(&spectrum, policy)?;
        Ok(Self { spectrum, psi })
    }

    pub fn from_decomposition(decomp: &SpectralDecomposition, policy: &TruncationPolicy) -> Result<Self> {
        Self::new(make_gain_spectrum(decomp)?, policy)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        pdf(&self.spectrum, &self.psi, x)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        cdf(&self.spectrum, &self.psi, x)
    }

    pub fn sf(&self, x: f64) -> Result<f64> {
        sf(&self.spectrum, &self.psi, x)
    }

    pub fn moments(&self) -> (f64, f64) {
        moments(&self.spectrum)
    }
}

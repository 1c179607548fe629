//! Ergodic capacity `E{log₂(1 + γ̄G)}` of the aperture channel.
//!
//! The closed form expands each gamma component of the gain mixture into an
//! alternating sum over `Ei` and factorial terms. Terms are summed with
//! Neumaier compensation; a rounding bound derived from the summed term
//! magnitudes is checked before a value is returned.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaindist::{moments, pdf, sf, GainSpectrum, PsiSeries};
use crate::quadrature::integrate;
pub use crate::special::{digamma, exp_integral_ei};
use crate::special::ln_factorial;

/// Largest `1/(γ̄σ_min)` accepted by the closed form; `e^{1/(γ̄σ_min)}` overflows beyond.
pub const MAX_INV_SNR_SCALE: f64 = 700.0;
/// Largest tolerated rounding bound on the closed form, in bits.
pub const MAX_ROUNDING_BITS: f64 = 1e-8;
/// Absolute error target of the quadrature oracle, in bits.
pub const ORACLE_ABS_TOL: f64 = 1e-8;

/// Average SNR `γ̄ = P/σ²` with the raw quantities kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrConfig {
    pub gamma_bar: f64,
    pub power_w: f64,
    pub noise_v2m: f64,
}

impl SnrConfig {
    pub fn from_power(power_w: f64, noise_v2m: f64) -> Result<Self> {
        if !(power_w.is_finite() && power_w >= 0.0) {
            return invalid(format!("transmit power must be nonnegative, got {power_w}"));
        }
        if !(noise_v2m.is_finite() && noise_v2m > 0.0) {
            return invalid(format!("noise power must be positive, got {noise_v2m}"));
        }
        Ok(Self { gamma_bar: power_w / noise_v2m, power_w, noise_v2m })
    }

    /// Unit noise, so `P = γ̄`.
    pub fn from_gamma_bar(gamma_bar: f64) -> Result<Self> {
        Self::from_power(gamma_bar, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Bits per channel use.
    pub ergodic_bits: f64,
    /// Number of ψ terms entering the double sum.
    pub terms_used: usize,
    /// High-SNR slope, always one.
    pub slope: f64,
    /// High-SNR power offset in 3-dB units.
    pub offset_3db: f64,
    /// Bound on the floating-point rounding error of `ergodic_bits`.
    pub rounding_bound: f64,
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Closed-form ergodic capacity from the gamma-mixture representation of `G`.
///
/// For component shape `n = D+q` and `x = 1/(γ̄σ_min)`, the `v`-th term is
/// `1/(n−1−v)!·[(−1)^{n−v} x^{n−1−v} e^x Ei(−x) + Σ_u Γ(u)(−x)^{n−1−v−u}]`.
pub fn avg_capacity(spec: &GainSpectrum, psi: &PsiSeries, snr: &SnrConfig) -> Result<CapacityResult> {
    if !psi.converged {
        return invalid("psi series is not converged");
    }
    let a = snr.gamma_bar * spec.sigma_min();
    let x = 1.0 / a;
    if !(x <= MAX_INV_SNR_SCALE) {
        return Err(Error::NumericalRegime(format!(
            "1/(γ̄·σ_min) = {x:e} exceeds {MAX_INV_SNR_SCALE}"
        )));
    }
    let d = spec.len();
    let n_max = d + psi.q_max;
    let ln_x = x.ln();
    let e_ei = x.exp() * exp_integral_ei(-x)?;
    let ln_abs_e_ei = e_ei.abs().ln();

    // bracket_m / m! for m = 0..n_max, each bracket an alternating sum
    let mut per_m = Vec::with_capacity(n_max);
    let mut per_m_abs = Vec::with_capacity(n_max);
    for m in 0..n_max {
        let mut acc = Neumaier::default();
        let ln_mfact = ln_factorial(m);
        // (−1)^{n−v} with n−v = m+1, times the negative Ei
        let sign_ei = if m % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign_ei * (ln_abs_e_ei + m as f64 * ln_x - ln_mfact).exp());
        for u in 1..=m {
            let sign = if (m - u) % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * (ln_factorial(u - 1) + (m - u) as f64 * ln_x - ln_mfact).exp());
        }
        per_m_abs.push(acc.abs);
        per_m.push(acc);
    }

    let mut total = Neumaier::default();
    let mut magnitude = 0.0;
    for (q, w) in psi.weights.iter().enumerate() {
        let n = d + q;
        for m in 0..n {
            total.add(w * per_m[m].sum);
            total.add(w * per_m[m].comp);
            magnitude += w * per_m_abs[m];
        }
    }
    let ergodic_bits = total.value() / std::f64::consts::LN_2;
    // each exponentiated term carries ~|log-magnitude| ulps of error
    let log_scale = 8.0 + (n_max as f64) * ln_x.abs().max(1.0) + ln_factorial(n_max);
    let rounding_bound = magnitude / std::f64::consts::LN_2 * f64::EPSILON * log_scale;
    if rounding_bound > MAX_ROUNDING_BITS {
        return Err(Error::NumericalRegime(format!(
            "alternating-sum cancellation: rounding bound {rounding_bound:e} bits at 1/(γ̄·σ_min) = {x}"
        )));
    }

    let (slope, offset_3db) = high_snr_asymptote(spec, psi)?;
    Ok(CapacityResult {
        ergodic_bits: ergodic_bits.max(0.0),
        terms_used: psi.terms(),
        slope,
        offset_3db,
        rounding_bound,
    })
}

// Upper integration limit such that the neglected tail is below `tail_tol` bits.
fn oracle_upper_limit(spec: &GainSpectrum, psi: &PsiSeries, gamma_bar: f64, tail_tol: f64) -> Result<f64> {
    let (mean, var) = moments(spec);
    let sd = var.sqrt();
    let mut k = 12.0;
    loop {
        let upper = mean + k * sd;
        // ∫_u^∞ log₂(1+γ̄x) f(x) dx ≤ sf(u)·log₂(1+γ̄u)·(1 + σ_max/u) for the gamma-mixture tail
        let bound = sf(spec, psi, upper)? * (1.0 + gamma_bar * upper).log2() * (1.0 + spec.sigma_max() / upper)
            + 2.0 * spec.sigma_max() * sf(spec, psi, upper)? / std::f64::consts::LN_2 / upper;
        if bound < tail_tol || k > 400.0 {
            return Ok(upper);
        }
        k += 4.0;
    }
}

/// Adaptive Gauss-Kronrod evaluation of `∫ log₂(1 + γ̄x)·f(x) dx`.
///
/// The range starts at `mean + 12·sd` and is extended until the neglected
/// tail is negligible against the tolerance.
pub fn capacity_quadrature_oracle(spec: &GainSpectrum, psi: &PsiSeries, snr: &SnrConfig) -> Result<f64> {
    let g = snr.gamma_bar;
    if g == 0.0 {
        return Ok(0.0);
    }
    let upper = oracle_upper_limit(spec, psi, g, 0.1 * ORACLE_ABS_TOL)?;
    integrate(
        |x| {
            let f = pdf(spec, psi, x).expect("integration nodes are nonnegative");
            (g * x).ln_1p() / std::f64::consts::LN_2 * f
        },
        0.0,
        upper,
        0.5 * ORACLE_ABS_TOL,
        20_000,
    )
}

/// High-SNR slope and power offset in `E{C} ≃ S(log₂ γ̄ − L)`.
///
/// `L = −Σ_q w_q (ψ(D+q) + ln σ_min) / ln 2`, with `w_q` the mixture weights.
pub fn high_snr_asymptote(spec: &GainSpectrum, psi: &PsiSeries) -> Result<(f64, f64)> {
    if !psi.converged {
        return invalid("psi series is not converged");
    }
    let d = spec.len();
    let ln_s = spec.sigma_min().ln();
    let mut acc = Neumaier::default();
    for (q, w) in psi.weights.iter().enumerate() {
        acc.add(w * (digamma((d + q) as f64)? + ln_s));
    }
    Ok((1.0, -acc.value() / std::f64::consts::LN_2))
}

/// `log₂ γ̄ − L`, the high-SNR capacity line.
pub fn asymptotic_capacity(gamma_bar: f64, offset_3db: f64) -> f64 {
    gamma_bar.log2() - offset_3db
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaindist::{psi_coefficients, TruncationPolicy};
    use crate::special::{exp_integral_e1, EULER_GAMMA};
    use approx::assert_abs_diff_eq;

    fn dist(s: &[f64]) -> (GainSpectrum, PsiSeries) {
        let g = GainSpectrum::new(s.to_vec()).unwrap();
        let p = PsiSeries::for_spectrum(&g, &TruncationPolicy::default()).unwrap();
        (g, p)
    }

    fn snr(g: f64) -> SnrConfig {
        SnrConfig::from_gamma_bar(g).unwrap()
    }

    #[test]
    fn snr_config_ratio() {
        let s = SnrConfig::from_power(2.0, 5.6e-3).unwrap();
        assert!((s.gamma_bar - 2.0 / 5.6e-3).abs() / s.gamma_bar < 1e-12);
        assert!(SnrConfig::from_power(1.0, 0.0).is_err());
        assert!(SnrConfig::from_power(-1.0, 1.0).is_err());
    }

    #[test]
    fn single_rayleigh_reduction() {
        // e^{0.1} E1(0.1) / ln 2
        let expected = 0.1f64.exp() * exp_integral_e1(0.1) / std::f64::consts::LN_2;
        assert_abs_diff_eq!(expected, 2.9066, epsilon = 1e-4);
        let (g, p) = dist(&[1.0]);
        let c = avg_capacity(&g, &p, &snr(10.0)).unwrap();
        assert_abs_diff_eq!(c.ergodic_bits, expected, epsilon = 1e-12);
        let o = capacity_quadrature_oracle(&g, &p, &snr(10.0)).unwrap();
        assert_abs_diff_eq!(o, expected, epsilon = 1e-8);
        assert_eq!(c.slope, 1.0);
    }

    #[test]
    fn vanishing_snr() {
        let (g, p) = dist(&[1.0]);
        let mut prev = f64::INFINITY;
        for gb in [1e-1, 1e-2, 1e-2 / 3.0] {
            let c = avg_capacity(&g, &p, &snr(gb)).unwrap().ergodic_bits;
            assert!(c < prev && c >= 0.0);
            prev = c;
        }
        assert!(prev < 5e-3);
        assert!(matches!(avg_capacity(&g, &p, &snr(1e-4)), Err(Error::NumericalRegime(_))));
        assert_eq!(capacity_quadrature_oracle(&g, &p, &snr(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn equal_pair_golden_value() {
        // frozen from a 30-digit quadrature of ∫ log₂(1+10x)·4x·e^{-2x} dx
        let golden = 3.166_252_506_102_475;
        let (g, p) = dist(&[0.5, 0.5]);
        let o = capacity_quadrature_oracle(&g, &p, &snr(10.0)).unwrap();
        assert_abs_diff_eq!(o, golden, epsilon = 1e-6);
        let c = avg_capacity(&g, &p, &snr(10.0)).unwrap();
        assert_abs_diff_eq!(c.ergodic_bits, o, epsilon = 1e-6);
    }

    #[test]
    fn closed_form_tracks_oracle() {
        for s in [&[2.0, 1.0][..], &[0.5, 0.45, 0.4, 0.3][..], &[0.5, 0.49, 0.47, 0.4, 0.33, 0.2][..]] {
            let (g, p) = dist(s);
            for gb in [1.0, 10.0, 100.0, 1e4] {
                let c = avg_capacity(&g, &p, &snr(gb)).unwrap().ergodic_bits;
                let o = capacity_quadrature_oracle(&g, &p, &snr(gb)).unwrap();
                assert!((c - o).abs() < 1e-6, "{s:?} γ̄={gb}: {c} vs {o}");
            }
        }
    }

    #[test]
    fn asymptote_examples() {
        let (g, p) = dist(&[1.0]);
        let (slope, off) = high_snr_asymptote(&g, &p).unwrap();
        assert_eq!(slope, 1.0);
        assert_abs_diff_eq!(off, EULER_GAMMA / std::f64::consts::LN_2, epsilon = 1e-12);

        let s = 0.37;
        let g = GainSpectrum::new(vec![s; 7]).unwrap();
        let p = psi_coefficients(&g, 0);
        let (_, off) = high_snr_asymptote(&g, &p).unwrap();
        let expected = -(digamma(7.0).unwrap() + s.ln()) / std::f64::consts::LN_2;
        assert_abs_diff_eq!(off, expected, epsilon = 1e-13);
    }

    #[test]
    fn unconverged_series_rejected() {
        let g = GainSpectrum::new(vec![1.0, 0.1]).unwrap();
        let p = psi_coefficients(&g, 2);
        assert!(!p.converged);
        assert!(avg_capacity(&g, &p, &snr(10.0)).is_err());
        assert!(high_snr_asymptote(&g, &p).is_err());
    }
}

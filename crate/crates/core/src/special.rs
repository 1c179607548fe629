//! Special functions needed by the distribution and capacity formulas.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_FACT_TABLE_LEN: usize = 4096;

fn ln_factorial_cache() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE_LEN);
        let mut acc = 0.0;
        for k in 0..LN_FACT_TABLE_LEN {
            if k >= 2 {
                acc += (k as f64).ln();
            }
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`: cached running sum for small `n`, Stirling's series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE_LEN {
        ln_factorial_cache()[n]
    } else {
        let x = n as f64 + 1.0;
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

/// `ln Γ(n)` for positive integer `n`.
pub fn ln_gamma_int(n: usize) -> f64 {
    debug_assert!(n >= 1);
    ln_factorial(n - 1)
}

/// Regularized incomplete gamma `(P(n, y), Q(n, y))` for integer shape `n ≥ 1`.
///
/// Whichever of the two is smaller is computed directly; the other is its complement.
pub fn incomplete_gamma_int(n: usize, y: f64) -> (f64, f64) {
    debug_assert!(n >= 1);
    if y <= 0.0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let log_lead = -y + nf * y.ln() - ln_factorial(n);
    if y < nf {
        // P = e^{-y} y^n / n! · Σ_k y^k / ((n+1)…(n+k))
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= y / (nf + k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        let p = (log_lead.exp() * sum).min(1.0);
        (p, 1.0 - p)
    } else {
        // Q = e^{-y} Σ_{k<n} y^k / k!, summed from the largest term down
        let mut term = (log_lead + (nf / y).ln()).exp(); // y^{n-1} e^{-y} / (n-1)!
        let mut sum = 0.0;
        let mut k = n;
        while k > 0 {
            sum += term;
            k -= 1;
            term *= k as f64 / y;
            if term < sum * 1e-17 {
                break;
            }
        }
        let q = sum.min(1.0);
        (1.0 - q, q)
    }
}

/// Exponential integral `Ei(x)` for `x < 0`, equal to `−E₁(−x)`.
///
/// Power series for `|x| ≤ 1`, modified Lentz continued fraction otherwise.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return invalid(format!("Ei is only provided for negative arguments, got {x}"));
    }
    Ok(-exp_integral_e1(-x))
}

/// `E₁(y)` for `y > 0`.
pub fn exp_integral_e1(y: f64) -> f64 {
    debug_assert!(y > 0.0);
    if y <= 1.0 {
        // E1(y) = -γ - ln y - Σ_{k≥1} (-y)^k / (k·k!)
        let mut sum = 0.0;
        let mut fact_term = 1.0; // (-y)^k / k!
        for k in 1..100 {
            fact_term *= -y / k as f64;
            let t = fact_term / k as f64;
            sum += t;
            if t.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - y.ln() - sum
    } else {
        (-y).exp() * scaled_e1_cf(y)
    }
}

/// `e^y E₁(y)` by continued fraction, valid for `y ≥ 1`.
fn scaled_e1_cf(y: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = y + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Digamma `ψ(x) = d/dx ln Γ(x)` for `x > 0`.
///
/// Shifts the argument above 10 with `ψ(x) = ψ(x+1) − 1/x`, then applies the
/// asymptotic expansion.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return invalid(format!("digamma requires x > 0, got {x}"));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli coefficients B_{2k}/(2k)
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}

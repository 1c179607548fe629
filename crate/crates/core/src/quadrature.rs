//! Gauss-Legendre rules and adaptive Gauss-Kronrod integration.

use crate::error::{invalid, Error, Result};

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[a, b]`.
///
/// Nodes are returned in increasing order. Roots of `P_n` are found by Newton
/// iteration from the Tricomi initial guesses; weights come from `P_n'`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return invalid("Gauss-Legendre order must be positive");
    }
    if !(a.is_finite() && b.is_finite() && b > a) {
        return invalid(format!("invalid interval [{a}, {b}]"));
    }
    let n = order;
    let nf = n as f64;
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    for i in 0..n.div_ceil(2) {
        // i-th largest root
        let theta = std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * nf + 2.0);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // the middle root is exactly zero
        nodes[n / 2] = 0.0;
    }

    nodes.reverse();
    weights.reverse();
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        *x = mid + half * *x;
        *w *= half;
    }
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K15: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WEIGHTS_G7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS_K15[7];
    let mut gauss = fc * GK_WEIGHTS_G7[3];
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS_K15[j] * s;
        if j % 2 == 1 {
            gauss += GK_WEIGHTS_G7[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `abs_tol` or `max_intervals` is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    if !(b >= a) {
        return invalid(format!("invalid integration bounds [{a}, {b}]"));
    }
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut segments = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = segments.iter().map(|s| s.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if segments.len() >= max_intervals {
            return Err(Error::Quadrature { tol: abs_tol, estimate: total_err });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        segments.push((lo, mid, v1, e1));
        segments.push((mid, hi, v2, e2));
    }
    // sum in interval order for reproducible rounding
    segments.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(segments.iter().map(|s| s.2).sum())
}

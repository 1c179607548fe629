//! Eigen-spectrum of the isotropic-scattering autocorrelation operator.
//!
//! All lengths are in carrier wavelengths, so the wavenumber is `2π` and the
//! channel eigenvalues are half the kernel eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::gauss_legendre;

/// Wavenumber `k0 = 2π/λ` in wavelength units.
pub const K0: f64 = 2.0 * std::f64::consts::PI;

/// Ratio `σ_ℓ / ε_ℓ = π / k0`.
pub const SIGMA_PER_EPS: f64 = std::f64::consts::PI / K0;

/// Linear aperture centred on the origin along the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    length_wl: f64,
    carrier_hz: f64,
}

impl Aperture {
    /// Default carrier used when none is given (2.4 GHz).
    pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;

    pub fn new(length_wl: f64) -> Result<Self> {
        Self::with_carrier(length_wl, Self::DEFAULT_CARRIER_HZ)
    }

    pub fn with_carrier(length_wl: f64, carrier_hz: f64) -> Result<Self> {
        if !(length_wl.is_finite() && length_wl > 0.0) {
            return invalid(format!("aperture length must be positive, got {length_wl}"));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return invalid(format!("carrier frequency must be positive, got {carrier_hz}"));
        }
        Ok(Self { length_wl, carrier_hz })
    }

    /// Aperture length in wavelengths.
    pub fn length_wl(&self) -> f64 {
        self.length_wl
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    /// Physical length in metres (reporting only).
    pub fn length_m(&self) -> f64 {
        const C: f64 = 299_792_458.0;
        self.length_wl * C / self.carrier_hz
    }

    pub fn dof(&self) -> f64 {
        dof(self)
    }

    /// Default Nyström order, `max(64, ceil(4·DOF))`.
    pub fn default_order(&self) -> usize {
        ((4.0 * self.dof()).ceil() as usize).max(64)
    }
}

/// `sin(k0·dz) / (π·dz)`, equal to `k0/π` at `dz = 0`.
pub fn sinc_kernel(dz: f64, k0: f64) -> f64 {
    let arg = k0 * dz;
    if arg.abs() < 1e-8 {
        // Taylor: k0/π · (1 − arg²/6)
        k0 / std::f64::consts::PI * (1.0 - arg * arg / 6.0)
    } else {
        arg.sin() / (std::f64::consts::PI * dz)
    }
}

/// Channel autocorrelation `R_g(z, z') = (π/k0)·k(z − z')`; unity on the diagonal.
pub fn autocorrelation(z: f64, zp: f64, k0: f64) -> f64 {
    std::f64::consts::PI / k0 * sinc_kernel(z - zp, k0)
}

/// Effective degrees of freedom `2L/λ`.
pub fn dof(aperture: &Aperture) -> f64 {
    2.0 * aperture.length_wl
}

/// Gauss-Legendre discretization of the aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureGrid {
    pub fn gauss_legendre(aperture: &Aperture, order: usize) -> Result<Self> {
        let half = aperture.length_wl / 2.0;
        let (nodes, weights) = gauss_legendre(order, -half, half)?;
        Ok(Self { nodes, weights, order })
    }
}

/// Symmetrized Nyström matrix `√w_i · K(z_i, z_j) · √w_j` together with its grid.
pub fn build_operator(aperture: &Aperture, order: usize) -> Result<(DMatrix<f64>, QuadratureGrid)> {
    if order < 2 {
        return invalid(format!("quadrature order must be at least 2, got {order}"));
    }
    let grid = QuadratureGrid::gauss_legendre(aperture, order)?;
    let sqrt_w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::<f64>::zeros(order, order);
    for j in 0..order {
        for i in j..order {
            let v = sqrt_w[i] * sinc_kernel(grid.nodes[i] - grid.nodes[j], K0) * sqrt_w[j];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok((m, grid))
}

/// Ordered eigenpairs of the kernel `K` on a Gauss-Legendre grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Kernel eigenvalues, descending, clamped to be nonnegative.
    pub eps: Vec<f64>,
    /// Channel eigenvalues `σ_ℓ = ε_ℓ / 2`.
    pub sigma: Vec<f64>,
    pub dof: f64,
    pub grid: QuadratureGrid,
    /// Column `ℓ` holds `φ_ℓ` sampled at the grid nodes, orthonormal under the weights.
    pub eigvec_samples: Option<DMatrix<f64>>,
}

impl SpectralDecomposition {
    /// Number of kernel eigenvalues strictly above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.eps.iter().take_while(|&&e| e > threshold).count()
    }

    pub fn trace(&self) -> f64 {
        self.eps.iter().sum()
    }

    /// Largest deviation of the weighted Gram matrix of the eigenfunctions from identity.
    pub fn orthonormality_error(&self) -> Option<f64> {
        let phi = self.eigvec_samples.as_ref()?;
        let w = &self.grid.weights;
        let n = phi.ncols();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                let ip: f64 = (0..phi.nrows()).map(|i| w[i] * phi[(i, a)] * phi[(i, b)]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        Some(worst)
    }

    /// Drop the eigenfunction samples to save memory.
    pub fn without_eigenfunctions(mut self) -> Self {
        self.eigvec_samples = None;
        self
    }
}

/// Eigendecomposition of the kernel at the given Nyström order.
///
/// Output is deterministic for fixed inputs. Eigenvalues tie-break in the
/// eigensolver's output order.
pub fn eigendecompose(aperture: &Aperture, order: usize) -> Result<SpectralDecomposition> {
    let (m, grid) = build_operator(aperture, order)?;
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(Error::EigenSolve {
        order,
        length_wl: aperture.length_wl,
    })?;

    let mut idx: Vec<usize> = (0..order).collect();
    // stable: equal eigenvalues keep solver order
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eps: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let sigma = eps.iter().map(|e| e * SIGMA_PER_EPS).collect();

    let inv_sqrt_w: Vec<f64> = grid.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let phi = DMatrix::from_fn(order, order, |i, l| eig.eigenvectors[(i, idx[l])] * inv_sqrt_w[i]);

    Ok(SpectralDecomposition {
        eps,
        sigma,
        dof: dof(aperture),
        grid,
        eigvec_samples: Some(phi),
    })
}

/// Landau's asymptotic count of kernel eigenvalues above `threshold`:
/// `DOF + (1/π²)·ln((1 − √ε)/√ε)·ln DOF`, natural logarithms throughout.
///
/// The classical Landau-Widom statement uses `(1 − ε)/ε`; the `√ε` form is
/// the one implemented here. Both agree at `ε = 1/4` up to the `o(ln DOF)` term.
pub fn landau_count(threshold: f64, dof: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return invalid(format!("threshold must lie in (0, 1), got {threshold}"));
    }
    if !(dof > 1.0) {
        return invalid(format!("Landau count needs DOF > 1, got {dof}"));
    }
    let r = threshold.sqrt();
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    Ok(dof + ((1.0 - r) / r).ln() / pi2 * dof.ln())
}

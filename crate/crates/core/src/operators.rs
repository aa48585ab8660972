//! The nonlocal operators `K`, `J` and the Galerkin matrices of the model.
//!
//! For `u` supported in `Ω`:
//!
//! ```text
//! (Ku)(x) = ∫_Ω γ(x - y) u(y) dy - Γ u(x)
//! (Ju)(x) = ∫_Ω γ'(x - y) u(y) dy          (∫ γ' = 0)
//! B[u, φ] = -(Ku, φ)
//! G[w, ψ] = ∫_Ω w_x ψ_x - ν w_x ψ dx
//! ```
//!
//! Every inner integral against the kernel is split at `y = x`, where the
//! Laplace kernel has a kink.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::{gram_matrix, BasisKind, BasisSet};
use crate::error::{Error, Result};
use crate::kernel::{kernel_report, KernelSpec};
use crate::quadrature::QuadratureRule;

/// `Ku` at each point of `xs`, by direct quadrature of the convolution.
pub fn apply_k<F: Fn(f64) -> f64>(
    kernel: &KernelSpec,
    u: F,
    inner: &QuadratureRule,
    xs: &[f64],
) -> Vec<f64> {
    let gamma = kernel.gamma_mass();
    xs.iter()
        .map(|&x| {
            let conv: f64 = inner.split_at(x).iter().map(|&(y, w)| w * kernel.eval_gamma(x - y) * u(y)).sum();
            conv - gamma * u(x)
        })
        .collect()
}

/// `Ju` at each point of `xs`, by direct quadrature.
pub fn apply_j<F: Fn(f64) -> f64>(
    kernel: &KernelSpec,
    u: F,
    inner: &QuadratureRule,
    xs: &[f64],
) -> Vec<f64> {
    xs.iter()
        .map(|&x| inner.split_at(x).iter().map(|&(y, w)| w * kernel.eval_gamma_dz(x - y) * u(y)).sum())
        .collect()
}

/// Inner convolutions `∫_Ω γ(x_i - y) φ_j(y) dy` and `∫_Ω γ'(x_i - y) φ_j(y) dy`
/// at every node `x_i` of `quad`, each `nodes x dim`.
fn kernel_convolutions(
    kernel: &KernelSpec,
    basis: &BasisSet,
    quad: &QuadratureRule,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nodes = quad.nodes();
    let weights = quad.weights();
    let order = quad.order();
    let dim = basis.dim();
    let base_values = basis.sample_matrix(nodes);

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let x = nodes[i];
            let own_panel = i / order;
            let mut conv = vec![0.0; dim];
            let mut dconv = vec![0.0; dim];
            for (n, (&y, &w)) in nodes.iter().zip(weights).enumerate() {
                if n / order == own_panel {
                    continue;
                }
                let g = w * kernel.eval_gamma(x - y);
                let gp = w * kernel.eval_gamma_dz(x - y);
                for j in 0..dim {
                    let phi = base_values[(j, n)];
                    conv[j] += g * phi;
                    dconv[j] += gp * phi;
                }
            }
            let lo = quad.lower() + own_panel as f64 * quad.panel_width();
            let hi = lo + quad.panel_width();
            let own = QuadratureRule::new(lo, hi, 1, order).expect("valid panel");
            for &(y, w) in &own.split_at(x) {
                let g = w * kernel.eval_gamma(x - y);
                let gp = w * kernel.eval_gamma_dz(x - y);
                for j in 0..dim {
                    let phi = basis.eval(j, y).expect("index below dim");
                    conv[j] += g * phi;
                    dconv[j] += gp * phi;
                }
            }
            (conv, dconv)
        })
        .collect();

    let mut conv = DMatrix::zeros(nodes.len(), dim);
    let mut dconv = DMatrix::zeros(nodes.len(), dim);
    for (i, (c, d)) in rows.into_iter().enumerate() {
        for j in 0..dim {
            conv[(i, j)] = c[j];
            dconv[(i, j)] = d[j];
        }
    }
    (conv, dconv)
}

fn check_plant(basis: &BasisSet) -> Result<()> {
    if basis.kind() != BasisKind::PlantV {
        return Err(Error::InvalidBasis(format!("expected the plant family, got {:?}", basis.kind())));
    }
    Ok(())
}

/// Raw (unsymmetrized) `B̂` and `Ĵ` from one pass over the nodes.
fn assemble_b_and_j(
    kernel: &KernelSpec,
    basis: &BasisSet,
    quad: &QuadratureRule,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_plant(basis)?;
    let (conv, dconv) = kernel_convolutions(kernel, basis, quad);
    let values = basis.sample_matrix(quad.nodes());
    let mut weighted = values.clone();
    for (mut col, &w) in weighted.column_iter_mut().zip(quad.weights()) {
        col *= w;
    }
    // entry (k, j) = Σ_i w_i φ_k(x_i) conv_j(x_i)
    let double = &weighted * &conv;
    let j_hat = &weighted * &dconv;
    let b_hat = gram_matrix(basis, quad) * kernel.gamma_mass() - double;
    if b_hat.iter().chain(j_hat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix assembly"));
    }
    Ok((b_hat, j_hat))
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// `B̂[k][j] = B[φ_j, φ_k] = Γ (φ_j, φ_k) - ∬ γ(x - y) φ_j(y) φ_k(x)`.
///
/// The tensor quadrature is symmetrized; the raw asymmetry is at the level of
/// the quadrature error.
pub fn assemble_b(kernel: &KernelSpec, basis: &BasisSet, quad: &QuadratureRule) -> Result<DMatrix<f64>> {
    let (b, _) = assemble_b_and_j(kernel, basis, quad)?;
    Ok(symmetrize(&b))
}

/// `Ĵ[k][j] = (Jφ_j, φ_k)`.
pub fn assemble_j(kernel: &KernelSpec, basis: &BasisSet, quad: &QuadratureRule) -> Result<DMatrix<f64>> {
    let (_, j) = assemble_b_and_j(kernel, basis, quad)?;
    Ok(j)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Signed parity factor `1 - (-1)^{j+k}` (2 when `j + k` is odd, else 0).
fn odd_sum(j: usize, k: usize) -> f64 {
    if (j + k) % 2 == 1 {
        2.0
    } else {
        0.0
    }
}

/// `Ĝ[k][j] = G[ψ_j, ψ_k]` in closed form.
///
/// Diffusion is `diag((kπ/2L)²)`; advection is `-ν (ψ_j', ψ_k)` with
/// `(ψ_j', ψ_k) = (jk/L)(1 - (-1)^{j+k}) / (k² - j²)`, antisymmetric.
pub fn assemble_g(basis: &BasisSet, nu: f64) -> Result<DMatrix<f64>> {
    if basis.kind() != BasisKind::WaterDirichlet {
        return Err(Error::InvalidBasis(format!("expected the water family, got {:?}", basis.kind())));
    }
    let l = basis.half_length();
    let m = basis.dim();
    Ok(DMatrix::from_fn(m, m, |row, col| {
        let (k, j) = (row + 1, col + 1);
        if k == j {
            let w = basis.frequency(row).expect("in range");
            w * w
        } else {
            let (kf, jf) = (k as f64, j as f64);
            let adv = jf * kf / l * odd_sum(j, k) / (kf * kf - jf * jf);
            -nu * adv
        }
    }))
}

/// `M̂[k][j] = G[ρ_j, ρ_k]` in closed form.
///
/// `(ρ_j', ρ_k) = -(j²/L)(1 - (-1)^{j+k}) / (j² - k²)`; its symmetric part
/// carries the boundary values of the cosines.
pub fn assemble_m(basis: &BasisSet, nu: f64) -> Result<DMatrix<f64>> {
    if basis.kind() != BasisKind::DerivW {
        return Err(Error::InvalidBasis(format!("expected the derivative family, got {:?}", basis.kind())));
    }
    let l = basis.half_length();
    let m = basis.dim();
    Ok(DMatrix::from_fn(m, m, |row, col| {
        let (k, j) = (row + 1, col + 1);
        if k == j {
            let w = basis.frequency(row).expect("in range");
            w * w
        } else {
            let (kf, jf) = (k as f64, j as f64);
            let adv = -jf * jf / l * odd_sum(j, k) / (jf * jf - kf * kf);
            -nu * adv
        }
    }))
}

/// Smallest eigenvalue of the symmetric matrix `B̂`: the discrete coercivity
/// constant with `B[u, u] >= θ ‖u‖²` on the span (orthonormal basis).
pub fn coercivity_theta(b_hat: &DMatrix<f64>) -> Result<f64> {
    let asym = max_asymmetry(b_hat);
    if asym > 1e-10 * b_hat.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(b_hat.clone());
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Spectral norm.
pub fn matrix_two_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// All Galerkin matrices for one discretization, plus the scalar bounds the
/// estimates need.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperators {
    pub kernel: KernelSpec,
    pub plant: BasisSet,
    pub water: BasisSet,
    pub b_hat: DMatrix<f64>,
    pub j_hat: DMatrix<f64>,
    pub g_hat: DMatrix<f64>,
    pub m_hat: DMatrix<f64>,
    /// Gram matrix of the plant family (identity unless the constant mode is kept).
    pub plant_gram: DMatrix<f64>,
    pub nu: f64,
    /// `Γ = ∫ γ`.
    pub gamma: f64,
    pub theta: f64,
    /// Young bound `2Γ` on `‖K‖`, also used as the boundedness constant of `B`.
    pub k_norm_bound: f64,
    /// Young bound `‖γ'‖_{L¹}` on `‖J‖`.
    pub j_norm_bound: f64,
    /// Largest entry of `B̂ - B̂ᵀ` before symmetrization.
    pub b_raw_asymmetry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelCheck {
    /// Refuse kernels that fail the positivity/symmetry/moment checks.
    #[default]
    Require,
    /// Assemble anyway (e.g. compactly supported tabulated kernels).
    Override,
}

impl AssembledOperators {
    pub fn assemble(
        kernel: &KernelSpec,
        plant: &BasisSet,
        water: &BasisSet,
        quad: &QuadratureRule,
        nu: f64,
        check: KernelCheck,
    ) -> Result<Self> {
        if check == KernelCheck::Require {
            let kquad = QuadratureRule::new(0.0, 1.0, 40, 10)?;
            let report = kernel_report(kernel, &kquad)?;
            if !report.hypothesis_satisfied {
                return Err(Error::InvalidKernel(format!(
                    "kernel fails the standing assumptions: {:?}",
                    report.issues
                )));
            }
        }
        if water.kind() != BasisKind::WaterDirichlet {
            return Err(Error::InvalidBasis("water basis must be the Dirichlet family".into()));
        }
        if (plant.half_length() - water.half_length()).abs() > 0.0 || plant.m() != water.m() {
            return Err(Error::InvalidBasis("plant and water bases must share m and L".into()));
        }
        let (b_raw, j_hat) = assemble_b_and_j(kernel, plant, quad)?;
        let b_raw_asymmetry = max_asymmetry(&b_raw);
        let b_hat = symmetrize(&b_raw);
        let plant_gram = gram_matrix(plant, quad);
        let theta = if plant.is_orthonormal() {
            coercivity_theta(&b_hat)?
        } else {
            generalized_min_eigenvalue(&b_hat, &plant_gram)?
        };
        let deriv = water.derivative_target()?;
        Ok(Self {
            kernel: kernel.clone(),
            plant: *plant,
            water: *water,
            g_hat: assemble_g(water, nu)?,
            m_hat: assemble_m(&deriv, nu)?,
            b_hat,
            j_hat,
            plant_gram,
            nu,
            gamma: kernel.gamma_mass(),
            theta,
            k_norm_bound: 2.0 * kernel.gamma_mass(),
            j_norm_bound: kernel.l1_gamma_prime(),
            b_raw_asymmetry,
        })
    }

    /// Rebuild from stored matrices (e.g. a cached `assemble` run).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kernel: KernelSpec,
        plant: BasisSet,
        water: BasisSet,
        b_hat: DMatrix<f64>,
        j_hat: DMatrix<f64>,
        g_hat: DMatrix<f64>,
        m_hat: DMatrix<f64>,
        plant_gram: DMatrix<f64>,
        nu: f64,
    ) -> Result<Self> {
        let du = plant.dim();
        let dw = water.dim();
        for (mat, n) in [(&b_hat, du), (&j_hat, du), (&plant_gram, du), (&g_hat, dw), (&m_hat, dw)] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::LengthMismatch { expected: n, found: mat.nrows() });
            }
        }
        let theta = if plant.is_orthonormal() {
            coercivity_theta(&b_hat)?
        } else {
            generalized_min_eigenvalue(&b_hat, &plant_gram)?
        };
        let gamma = kernel.gamma_mass();
        let j_norm_bound = kernel.l1_gamma_prime();
        Ok(Self {
            kernel,
            plant,
            water,
            b_raw_asymmetry: max_asymmetry(&b_hat),
            b_hat,
            j_hat,
            g_hat,
            m_hat,
            plant_gram,
            nu,
            gamma,
            theta,
            k_norm_bound: 2.0 * gamma,
            j_norm_bound,
        })
    }

    pub fn deriv(&self) -> BasisSet {
        self.water.derivative_target().expect("water family")
    }
}

/// Smallest `λ` with `B c = λ Gram c` (Rayleigh quotient `B[u,u]/‖u‖²`).
fn generalized_min_eigenvalue(b: &DMatrix<f64>, gram: &DMatrix<f64>) -> Result<f64> {
    let chol = gram.clone().cholesky().ok_or(Error::SingularGram)?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(Error::SingularGram)?;
    let reduced = &l_inv * b * l_inv.transpose();
    coercivity_theta(&symmetrize(&reduced))
}

/// Coefficient-space quadratic form helper: `c₂ᵀ A c₁`.
pub fn bilinear(a: &DMatrix<f64>, c1: &DVector<f64>, c2: &DVector<f64>) -> f64 {
    c2.dot(&(a * c1))
}

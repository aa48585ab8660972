//! Orthonormal trigonometric families on `Ω = [-L, L]`.
//!
//! * `PlantV`: `s_j = L^{-1/2} sin((2j-1)πx/2L)`, `c_j = L^{-1/2} cos((2j-1)πx/2L)`,
//!   `j = 1..m`, optionally preceded by the constant `(2L)^{-1/2}`. Indexed as
//!   `[constant?, s_1, c_1, s_2, c_2, ...]`. Zero outside `Ω`.
//! * `WaterDirichlet`: `ψ_k = L^{-1/2} sin(kπ(x+L)/2L)`, `k = 1..m`; vanish at `±L`.
//! * `DerivW`: `ρ_k = L^{-1/2} cos(kπ(x+L)/2L)`, `k = 1..m`; zero mean, zero
//!   slope at `±L`.
//!
//! Differentiation maps `PlantV` into itself and `WaterDirichlet` onto `DerivW`
//! exactly, so derivative fields are represented without quadrature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    PlantV,
    WaterDirichlet,
    DerivW,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSet {
    kind: BasisKind,
    m: usize,
    half_length: f64,
    include_constant: bool,
}

/// One basis member resolved to its analytic form.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Member {
    Constant,
    /// `amp * sin(freq * (x + shift))`
    Sin { freq: f64, shift: f64 },
    /// `amp * cos(freq * (x + shift))`
    Cos { freq: f64, shift: f64 },
}

impl BasisSet {
    pub fn new(kind: BasisKind, m: usize, half_length: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidBasis("truncation level m must be at least 1".into()));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidBasis(format!("half-length must be positive, got {half_length}")));
        }
        Ok(Self { kind, m, half_length, include_constant: false })
    }

    pub fn plant(m: usize, half_length: f64) -> Result<Self> {
        Self::new(BasisKind::PlantV, m, half_length)
    }

    pub fn water(m: usize, half_length: f64) -> Result<Self> {
        Self::new(BasisKind::WaterDirichlet, m, half_length)
    }

    pub fn deriv(m: usize, half_length: f64) -> Result<Self> {
        Self::new(BasisKind::DerivW, m, half_length)
    }

    /// Prepend the constant mode (plant family only). The family is then no
    /// longer orthogonal and projections go through the Gram matrix.
    pub fn with_constant(mut self, include_constant: bool) -> Result<Self> {
        if include_constant && self.kind != BasisKind::PlantV {
            return Err(Error::InvalidBasis("only the plant family has a constant mode".into()));
        }
        self.include_constant = include_constant;
        Ok(self)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    pub fn is_orthonormal(&self) -> bool {
        !self.include_constant
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BasisKind::PlantV => 2 * self.m + usize::from(self.include_constant),
            BasisKind::WaterDirichlet | BasisKind::DerivW => self.m,
        }
    }

    /// Same family at a different truncation level.
    pub fn with_m(&self, m: usize) -> Result<Self> {
        Self::new(self.kind, m, self.half_length)?.with_constant(self.include_constant)
    }

    /// The family that derivatives land in.
    pub fn derivative_target(&self) -> Result<BasisSet> {
        match self.kind {
            BasisKind::PlantV => Ok(*self),
            BasisKind::WaterDirichlet => Self::deriv(self.m, self.half_length),
            BasisKind::DerivW => Err(Error::NoDerivativeMap("DerivW")),
        }
    }

    /// Angular frequency of member `index` (0 for the constant mode).
    pub fn frequency(&self, index: usize) -> Result<f64> {
        Ok(match self.member(index)? {
            Member::Constant => 0.0,
            Member::Sin { freq, .. } | Member::Cos { freq, .. } => freq,
        })
    }

    fn amplitude(&self) -> f64 {
        self.half_length.sqrt().recip()
    }

    fn member(&self, index: usize) -> Result<Member> {
        let dim = self.dim();
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let l = self.half_length;
        Ok(match self.kind {
            BasisKind::PlantV => {
                let i = if self.include_constant {
                    if index == 0 {
                        return Ok(Member::Constant);
                    }
                    index - 1
                } else {
                    index
                };
                let j = i / 2 + 1;
                let freq = (2 * j - 1) as f64 * PI / (2.0 * l);
                if i % 2 == 0 {
                    Member::Sin { freq, shift: 0.0 }
                } else {
                    Member::Cos { freq, shift: 0.0 }
                }
            }
            BasisKind::WaterDirichlet => {
                Member::Sin { freq: (index + 1) as f64 * PI / (2.0 * l), shift: l }
            }
            BasisKind::DerivW => Member::Cos { freq: (index + 1) as f64 * PI / (2.0 * l), shift: l },
        })
    }

    fn outside(&self, x: f64) -> bool {
        self.kind == BasisKind::PlantV && x.abs() > self.half_length
    }

    pub fn eval(&self, index: usize, x: f64) -> Result<f64> {
        let member = self.member(index)?;
        if self.outside(x) {
            return Ok(0.0);
        }
        Ok(self.eval_member(member, x))
    }

    fn eval_member(&self, member: Member, x: f64) -> f64 {
        match member {
            Member::Constant => (2.0 * self.half_length).sqrt().recip(),
            Member::Sin { freq, shift } => self.amplitude() * (freq * (x + shift)).sin(),
            Member::Cos { freq, shift } => self.amplitude() * (freq * (x + shift)).cos(),
        }
    }

    /// Pointwise derivative of member `index` inside `Ω`.
    pub fn eval_dx(&self, index: usize, x: f64) -> Result<f64> {
        let member = self.member(index)?;
        if self.outside(x) {
            return Ok(0.0);
        }
        Ok(match member {
            Member::Constant => 0.0,
            Member::Sin { freq, shift } => self.amplitude() * freq * (freq * (x + shift)).cos(),
            Member::Cos { freq, shift } => -self.amplitude() * freq * (freq * (x + shift)).sin(),
        })
    }

    /// Values of every member at every point: `dim x points.len()`.
    pub fn sample_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), points.len(), |i, p| {
            self.eval(i, points[p]).expect("index below dim")
        })
    }

    /// Derivatives of every member at every point: `dim x points.len()`.
    pub fn sample_dx_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), points.len(), |i, p| {
            self.eval_dx(i, points[p]).expect("index below dim")
        })
    }

    /// Default rule: `2m + 4` panels of 10 Gauss points on `Ω`.
    pub fn default_quadrature(&self) -> QuadratureRule {
        QuadratureRule::on_domain(self.half_length, 2 * self.m + 4, 10).expect("valid defaults")
    }
}

/// Exact coefficient map of `∂_x` from one family into another.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivMap {
    source: BasisSet,
    target: BasisSet,
    matrix: DMatrix<f64>,
}

impl DerivMap {
    pub fn source(&self) -> &BasisSet {
        &self.source
    }

    pub fn target(&self) -> &BasisSet {
        &self.target
    }

    /// `target.dim() x source.dim()`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.source.dim() {
            return Err(Error::LengthMismatch { expected: self.source.dim(), found: coeffs.len() });
        }
        Ok(&self.matrix * coeffs)
    }
}

pub fn differentiation_matrix(set: &BasisSet) -> Result<DerivMap> {
    let target = set.derivative_target()?;
    let mut matrix = DMatrix::zeros(target.dim(), set.dim());
    match set.kind() {
        BasisKind::PlantV => {
            let offset = usize::from(set.include_constant());
            for j in 0..set.m() {
                let s = offset + 2 * j;
                let c = s + 1;
                let freq = set.frequency(s)?;
                // s_j' = ω c_j, c_j' = -ω s_j
                matrix[(c, s)] = freq;
                matrix[(s, c)] = -freq;
            }
        }
        BasisKind::WaterDirichlet => {
            for k in 0..set.m() {
                matrix[(k, k)] = set.frequency(k)?;
            }
        }
        BasisKind::DerivW => unreachable!("rejected by derivative_target"),
    }
    Ok(DerivMap { source: *set, target, matrix })
}

/// `L²(Ω)` inner products of all pairs of members.
pub fn gram_matrix(set: &BasisSet, quad: &QuadratureRule) -> DMatrix<f64> {
    let values = set.sample_matrix(quad.nodes());
    let weighted = weighted_columns(&values, quad.weights());
    &weighted * values.transpose()
}

fn weighted_columns(values: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut out = values.clone();
    for (mut col, &w) in out.column_iter_mut().zip(weights) {
        col *= w;
    }
    out
}

/// Precomputed node values for repeated projection and synthesis on one rule.
#[derive(Debug, Clone)]
pub struct Projector {
    set: BasisSet,
    /// `dim x nodes`, basis values scaled by the quadrature weights.
    weighted: DMatrix<f64>,
    /// `dim x nodes`
    values: DMatrix<f64>,
    gram_factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl Projector {
    pub fn new(set: &BasisSet, quad: &QuadratureRule) -> Result<Self> {
        let values = set.sample_matrix(quad.nodes());
        let weighted = weighted_columns(&values, quad.weights());
        let gram_factor = if set.is_orthonormal() {
            None
        } else {
            let gram = &weighted * values.transpose();
            Some(gram.cholesky().ok_or(Error::SingularGram)?)
        };
        Ok(Self { set: *set, weighted, values, gram_factor })
    }

    pub fn set(&self) -> &BasisSet {
        &self.set
    }

    pub fn node_count(&self) -> usize {
        self.values.ncols()
    }

    /// Inner products `(f, φ_k)` of node samples with each member.
    pub fn inner_products(&self, samples: &DVector<f64>) -> Result<DVector<f64>> {
        if samples.len() != self.node_count() {
            return Err(Error::LengthMismatch { expected: self.node_count(), found: samples.len() });
        }
        Ok(&self.weighted * samples)
    }

    /// Solve `Gram * c = rhs` (identity for orthonormal families).
    pub fn solve_gram(&self, mut rhs: DVector<f64>) -> DVector<f64> {
        if let Some(chol) = &self.gram_factor {
            chol.solve_mut(&mut rhs);
        }
        rhs
    }

    /// Best `L²(Ω)` approximation coefficients of the sampled field.
    pub fn project(&self, samples: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve_gram(self.inner_products(samples)?))
    }

    /// Field values at the nodes.
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.set.dim() {
            return Err(Error::LengthMismatch { expected: self.set.dim(), found: coeffs.len() });
        }
        Ok(self.values.tr_mul(coeffs))
    }
}

/// Coefficients of a field sampled at the nodes of `quad`.
pub fn project(samples: &[f64], set: &BasisSet, quad: &QuadratureRule) -> Result<DVector<f64>> {
    if samples.len() != quad.len() {
        return Err(Error::LengthMismatch { expected: quad.len(), found: samples.len() });
    }
    Projector::new(set, quad)?.project(&DVector::from_column_slice(samples))
}

/// Pointwise evaluation of `Σ c_k φ_k(x)`.
pub fn synthesize(coeffs: &DVector<f64>, set: &BasisSet, points: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != set.dim() {
        return Err(Error::LengthMismatch { expected: set.dim(), found: coeffs.len() });
    }
    Ok(points
        .iter()
        .map(|&x| (0..set.dim()).map(|i| coeffs[i] * set.eval(i, x).expect("index below dim")).sum())
        .collect())
}

/// Pointwise evaluation of `Σ c_k φ_k'(x)`.
pub fn synthesize_dx(coeffs: &DVector<f64>, set: &BasisSet, points: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != set.dim() {
        return Err(Error::LengthMismatch { expected: set.dim(), found: coeffs.len() });
    }
    Ok(points
        .iter()
        .map(|&x| (0..set.dim()).map(|i| coeffs[i] * set.eval_dx(i, x).expect("index below dim")).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn endpoint_values() {
        let p = BasisSet::plant(3, 1.0).unwrap();
        assert_abs_diff_eq!(p.eval(0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(p.eval(0, 1.5).unwrap(), 0.0);
        let w = BasisSet::water(3, 1.0).unwrap();
        assert_abs_diff_eq!(w.eval(0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.eval(0, -1.0).unwrap(), 0.0, epsilon = 1e-15);
        let d = BasisSet::deriv(3, 1.0).unwrap();
        assert_abs_diff_eq!(d.eval(1, -1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn index_out_of_range() {
        let p = BasisSet::plant(2, 1.0).unwrap();
        assert!(matches!(p.eval(4, 0.0), Err(Error::IndexOutOfRange { index: 4, dim: 4 })));
        let pc = p.with_constant(true).unwrap();
        assert_eq!(pc.dim(), 5);
        assert!(pc.eval(4, 0.0).is_ok());
        assert!(BasisSet::water(2, 1.0).unwrap().with_constant(true).is_err());
    }

    #[test]
    fn derivative_maps() {
        let p = BasisSet::plant(2, 1.0).unwrap();
        let d = differentiation_matrix(&p).unwrap();
        let out = d.apply(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(out[1], PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm(), PI / 2.0, epsilon = 1e-15);

        let w = BasisSet::water(4, 2.0).unwrap();
        let dw = differentiation_matrix(&w).unwrap();
        assert_eq!(dw.target().kind(), BasisKind::DerivW);
        let out = dw.apply(&DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(out[2], 3.0 * PI / 4.0, epsilon = 1e-15);

        let pc = p.with_constant(true).unwrap();
        let dc = differentiation_matrix(&pc).unwrap();
        assert!(dc.matrix().column(0).iter().all(|&v| v == 0.0));

        assert!(differentiation_matrix(&BasisSet::deriv(2, 1.0).unwrap()).is_err());
    }

    #[test]
    fn twice_differentiated_plant_is_minus_frequency_squared() {
        let p = BasisSet::plant(5, 1.3).unwrap();
        let d = differentiation_matrix(&p).unwrap();
        let d2 = d.matrix() * d.matrix();
        for i in 0..p.dim() {
            let f = p.frequency(i).unwrap();
            for j in 0..p.dim() {
                let expected = if i == j { -f * f } else { 0.0 };
                assert_abs_diff_eq!(d2[(i, j)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sine_cosine_pair_orthogonal() {
        let p = BasisSet::plant(4, 1.0).unwrap();
        let g = gram_matrix(&p, &p.default_quadrature());
        assert_abs_diff_eq!(g[(0, 1)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_of_zero_and_length_checks() {
        let p = BasisSet::plant(3, 1.0).unwrap();
        let q = p.default_quadrature();
        let c = project(&vec![0.0; q.len()], &p, &q).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        assert!(project(&[1.0, 2.0], &p, &q).is_err());
        assert!(synthesize(&DVector::zeros(2), &p, &[0.0]).is_err());
    }
}

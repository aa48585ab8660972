//! Saturating cutoff and the reaction terms of the augmented system.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSet, Projector};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Cutoff `σ` with saturation bound `M`.
///
/// `σ(x) = x` on `|x| <= M/2`; beyond that it bends smoothly (C²) towards `±M`
/// along a tanh, so `|σ| < M` and `0 <= σ' <= 1` everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    bound: f64,
}

impl CutoffSpec {
    pub fn new(bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::InvalidParameter { name: "M", reason: format!("must be finite and positive, got {bound}") });
        }
        Ok(Self { bound })
    }

    /// The saturation bound `M`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sigma(&self, x: f64) -> f64 {
        let h = 0.5 * self.bound;
        let ax = x.abs();
        if ax <= h {
            x
        } else {
            (h + h * ((ax - h) / h).tanh()).copysign(x)
        }
    }

    pub fn sigma_prime(&self, x: f64) -> f64 {
        let h = 0.5 * self.bound;
        let ax = x.abs();
        if ax <= h {
            1.0
        } else {
            let c = ((ax - h) / h).cosh();
            1.0 / (c * c)
        }
    }
}

pub fn sigma(x: f64, spec: &CutoffSpec) -> f64 {
    spec.sigma(x)
}

pub fn sigma_prime(x: f64, spec: &CutoffSpec) -> f64 {
    spec.sigma_prime(x)
}

/// The parameters the reaction terms depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionParams {
    /// Rainfall.
    pub a: f64,
    /// Logistic coefficient.
    pub b: f64,
    pub cutoff: CutoffSpec,
}

/// `σ(u)² σ(w) (1 - b σ(u))`.
pub fn p1(u: f64, w: f64, p: &ReactionParams) -> f64 {
    let su = p.cutoff.sigma(u);
    su * su * p.cutoff.sigma(w) * (1.0 - p.b * su)
}

/// `a - σ(u)² σ(w)`.
pub fn p2(u: f64, w: f64, p: &ReactionParams) -> f64 {
    let su = p.cutoff.sigma(u);
    p.a - su * su * p.cutoff.sigma(w)
}

/// `∂ₓ P1` with `v = uₓ`, `z = wₓ`:
/// `σ(u)σ'(u)σ(w)(2 - 3bσ(u)) v + σ(u)²σ'(w)(1 - bσ(u)) z`.
pub fn q1(u: f64, w: f64, v: f64, z: f64, p: &ReactionParams) -> f64 {
    let c = &p.cutoff;
    let (su, sw) = (c.sigma(u), c.sigma(w));
    su * c.sigma_prime(u) * sw * (2.0 - 3.0 * p.b * su) * v + su * su * c.sigma_prime(w) * (1.0 - p.b * su) * z
}

/// `∂ₓ P2`: `-2σ(u)σ'(u)σ(w) v - σ(u)²σ'(w) z`.
pub fn q2(u: f64, w: f64, v: f64, z: f64, p: &ReactionParams) -> f64 {
    let c = &p.cutoff;
    let (su, sw) = (c.sigma(u), c.sigma(w));
    -2.0 * su * c.sigma_prime(u) * sw * v - su * su * c.sigma_prime(w) * z
}

/// Uncut Klausmeier growth `u² w (1 - b u)`.
pub fn raw_growth(u: f64, w: f64, b: f64) -> f64 {
    u * u * w * (1.0 - b * u)
}

/// Uncut water balance `a - u² w`.
pub fn raw_water(u: f64, w: f64, a: f64) -> f64 {
    a - u * u * w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NonlinearTerm {
    P1,
    P2,
    Q1,
    Q2,
}

impl NonlinearTerm {
    pub const ALL: [NonlinearTerm; 4] = [Self::P1, Self::P2, Self::Q1, Self::Q2];

    /// Family the term is tested against.
    pub fn target(self) -> BasisKind {
        match self {
            Self::P1 | Self::Q1 => BasisKind::PlantV,
            Self::P2 => BasisKind::WaterDirichlet,
            Self::Q2 => BasisKind::DerivW,
        }
    }
}

/// The four fields sampled at the quadrature nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalFields {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
}

impl NodalFields {
    pub fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], w: vec![0.0; n], v: vec![0.0; n], z: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn check(&self, expected: usize) -> Result<()> {
        for f in [&self.u, &self.w, &self.v, &self.z] {
            if f.len() != expected {
                return Err(Error::LengthMismatch { expected, found: f.len() });
            }
        }
        Ok(())
    }
}

/// Pointwise values of one term at every node.
pub fn evaluate_nodal(which: NonlinearTerm, fields: &NodalFields, params: &ReactionParams) -> Result<DVector<f64>> {
    fields.check(fields.len())?;
    let NodalFields { u, w, v, z } = fields;
    let n = fields.len();
    Ok(match which {
        NonlinearTerm::P1 => DVector::from_fn(n, |i, _| p1(u[i], w[i], params)),
        NonlinearTerm::P2 => DVector::from_fn(n, |i, _| p2(u[i], w[i], params)),
        NonlinearTerm::Q1 => DVector::from_fn(n, |i, _| q1(u[i], w[i], v[i], z[i], params)),
        NonlinearTerm::Q2 => DVector::from_fn(n, |i, _| q2(u[i], w[i], v[i], z[i], params)),
    })
}

/// Inner products `(N, χ_k)` of a nonlinear term with every member of its
/// target family, by quadrature on the nodes the fields were sampled at.
pub fn project_nonlinear(
    which: NonlinearTerm,
    fields: &NodalFields,
    params: &ReactionParams,
    target: &BasisSet,
    quad: &QuadratureRule,
) -> Result<DVector<f64>> {
    if target.kind() != which.target() {
        return Err(Error::InvalidBasis(format!("{which:?} is projected onto {:?}, got {:?}", which.target(), target.kind())));
    }
    fields.check(quad.len())?;
    let projector = Projector::new(target, quad)?;
    projector.inner_products(&evaluate_nodal(which, fields, params)?)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;

    use super::*;

    fn params(a: f64, b: f64, m: f64) -> ReactionParams {
        ReactionParams { a, b, cutoff: CutoffSpec::new(m).unwrap() }
    }

    #[test]
    fn sigma_examples() {
        let c = CutoffSpec::new(2.0).unwrap();
        assert_eq!(c.sigma(0.3), 0.3);
        assert_eq!(c.sigma(-1.0), -1.0);
        assert!(c.sigma(1e6) <= 2.0 && c.sigma(1e6) > 1.999);
        assert_eq!(c.sigma_prime(0.0), 1.0);
        assert!(c.sigma_prime(20.0) < 1e-6);
        assert!(CutoffSpec::new(0.0).is_err());
        assert!(CutoffSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn sigma_c2_at_the_seam() {
        let c = CutoffSpec::new(2.0).unwrap();
        let h = 1e-6;
        // second derivative of tanh branch vanishes at the seam
        let d2 = (c.sigma_prime(1.0 + h) - c.sigma_prime(1.0)) / h;
        assert!(d2.abs() < 1e-5);
    }

    #[test]
    fn reaction_examples() {
        let p = params(0.7, 0.5, 1e3);
        assert_eq!(p1(0.0, 0.0, &p), 0.0);
        assert_eq!(p2(0.0, 0.0, &p), 0.7);
        assert_abs_diff_eq!(p1(1.0, 1.0, &p), 0.5);
        assert_abs_diff_eq!(p2(1.0, 1.0, &p), 0.7 - 1.0);
        assert_eq!(q1(0.4, 0.2, 0.0, 0.0, &p), 0.0);
        assert_eq!(q2(0.4, 0.2, 0.0, 0.0, &p), 0.0);
        let p0 = params(0.0, 0.0, 1e3);
        assert_abs_diff_eq!(q1(1.0, 1.0, 1.0, 0.0, &p0), 2.0);
    }

    #[test]
    fn rainfall_projection_matches_closed_form() {
        let l = 1.0;
        let water = BasisSet::water(4, l).unwrap();
        let quad = water.default_quadrature();
        let fields = NodalFields::zeros(quad.len());
        let got = project_nonlinear(NonlinearTerm::P2, &fields, &params(2.0, 1.0, 2.0), &water, &quad).unwrap();
        let expect = [8.0 / PI, 0.0, 8.0 / (3.0 * PI), 0.0];
        for (g, e) in got.iter().zip(expect) {
            assert_abs_diff_eq!(*g, e, epsilon = 1e-12);
        }
        let zero = project_nonlinear(NonlinearTerm::P1, &fields, &params(2.0, 1.0, 2.0), &BasisSet::plant(4, l).unwrap(), &quad)
            .unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn wrong_target_or_length_rejected() {
        let water = BasisSet::water(3, 1.0).unwrap();
        let quad = water.default_quadrature();
        let p = params(1.0, 1.0, 2.0);
        assert!(project_nonlinear(NonlinearTerm::P1, &NodalFields::zeros(quad.len()), &p, &water, &quad).is_err());
        assert!(project_nonlinear(NonlinearTerm::P2, &NodalFields::zeros(3), &p, &water, &quad).is_err());
    }
}

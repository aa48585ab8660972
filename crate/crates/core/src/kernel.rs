//! Radial dispersal kernels `γ(z) = γ(|z|)` and the scalars derived from them.
//!
//! Three families are supported: a normalized Gaussian (`epsilon` is the
//! standard deviation), a normalized Laplace kernel `e^{-|z|/ε}/(2ε)` and a
//! tabulated kernel given by samples on `z >= 0` (or on a symmetric range),
//! interpolated with a monotone piecewise cubic. Every kernel is scaled by
//! `normalization`.
//!
//! The Laplace derivative has a jump at `z = 0`; [`KernelSpec::eval_gamma_dz`]
//! returns 0 there. The value at a single point never enters an integral.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{reference_rule, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Laplace,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Gaussian { epsilon: f64 },
    Laplace { epsilon: f64 },
    Tabulated(KernelTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    shape: Shape,
    normalization: f64,
}

impl KernelSpec {
    pub fn gaussian(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { shape: Shape::Gaussian { epsilon }, normalization: 1.0 })
    }

    pub fn laplace(epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self { shape: Shape::Laplace { epsilon }, normalization: 1.0 })
    }

    pub fn tabulated(table: KernelTable) -> Self {
        Self { shape: Shape::Tabulated(table), normalization: 1.0 }
    }

    pub fn with_normalization(mut self, normalization: f64) -> Result<Self> {
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "normalization must be positive and finite, got {normalization}"
            )));
        }
        self.normalization = normalization;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        match self.shape {
            Shape::Gaussian { .. } => KernelFamily::Gaussian,
            Shape::Laplace { .. } => KernelFamily::Laplace,
            Shape::Tabulated(_) => KernelFamily::Tabulated,
        }
    }

    /// Length scale of the analytic families.
    pub fn epsilon(&self) -> Option<f64> {
        match self.shape {
            Shape::Gaussian { epsilon } | Shape::Laplace { epsilon } => Some(epsilon),
            Shape::Tabulated(_) => None,
        }
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn table(&self) -> Option<&KernelTable> {
        match &self.shape {
            Shape::Tabulated(t) => Some(t),
            _ => None,
        }
    }

    /// Whether `γ'` jumps at the origin. Integrals against `γ(x - y)` are
    /// split at `y = x` for such kernels.
    pub fn has_kink(&self) -> bool {
        match &self.shape {
            Shape::Gaussian { .. } => false,
            Shape::Laplace { .. } => true,
            Shape::Tabulated(t) => t.slope_at_origin() != 0.0,
        }
    }

    /// Radius beyond which the kernel is negligible (analytic) or zero (tabulated).
    pub fn truncation_radius(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { epsilon } => 12.0 * epsilon,
            Shape::Laplace { epsilon } => 40.0 * epsilon,
            Shape::Tabulated(t) => t.max_z(),
        }
    }

    pub fn eval_gamma(&self, z: f64) -> f64 {
        let t = z.abs();
        let raw = match &self.shape {
            Shape::Gaussian { epsilon } => {
                (-0.5 * (t / epsilon).powi(2)).exp() / ((2.0 * PI).sqrt() * epsilon)
            }
            Shape::Laplace { epsilon } => (-t / epsilon).exp() / (2.0 * epsilon),
            Shape::Tabulated(table) => table.value(t),
        };
        self.normalization * raw
    }

    pub fn eval_gamma_dz(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let t = z.abs();
        let sign = z.signum();
        let raw = match &self.shape {
            Shape::Gaussian { epsilon } => {
                -z / (epsilon * epsilon) * (-0.5 * (t / epsilon).powi(2)).exp()
                    / ((2.0 * PI).sqrt() * epsilon)
            }
            Shape::Laplace { epsilon } => {
                -sign * (-t / epsilon).exp() / (2.0 * epsilon * epsilon)
            }
            Shape::Tabulated(table) => sign * table.slope(t),
        };
        self.normalization * raw
    }

    /// `Γ = ∫ γ dz`.
    pub fn gamma_mass(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { .. } | Shape::Laplace { .. } => self.normalization,
            Shape::Tabulated(t) => self.normalization * t.moments(4).mass,
        }
    }

    /// `‖γ'‖_{L¹(ℝ)}`, the Young bound on the operator norm of `J`.
    pub fn l1_gamma_prime(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { epsilon } => self.normalization * (2.0 / PI).sqrt() / epsilon,
            Shape::Laplace { epsilon } => self.normalization / epsilon,
            Shape::Tabulated(t) => self.normalization * t.moments(4).l1_gamma_prime,
        }
    }

    fn closed_form_moments(&self) -> Option<KernelMoments> {
        let n = self.normalization;
        match self.shape {
            Shape::Gaussian { epsilon: e } => Some(KernelMoments {
                mass: n,
                second_moment: n * e * e,
                l1_gamma: n,
                l2_gamma: n * (1.0 / (2.0 * PI.sqrt() * e)).sqrt(),
                l1_gamma_prime: n * (2.0 / PI).sqrt() / e,
                l2_gamma_prime: n * (1.0 / (4.0 * PI.sqrt() * e.powi(3))).sqrt(),
            }),
            Shape::Laplace { epsilon: e } => Some(KernelMoments {
                mass: n,
                second_moment: 2.0 * n * e * e,
                l1_gamma: n,
                l2_gamma: n * (1.0 / (4.0 * e)).sqrt(),
                l1_gamma_prime: n / e,
                l2_gamma_prime: n * (1.0 / (4.0 * e.powi(3))).sqrt(),
            }),
            Shape::Tabulated(_) => None,
        }
    }

    /// Mass, second moment and Lebesgue norms of `γ` and `γ'` by composite
    /// Gauss quadrature on `[0, R]` (doubled by symmetry). The Laplace tail
    /// beyond `R` is added in closed form; the Gaussian tail at `R = 12ε` is
    /// below double precision.
    pub fn moments_by_quadrature(&self, quad: &QuadratureRule) -> Result<KernelMoments> {
        if let Shape::Tabulated(t) = &self.shape {
            let m = t.moments(quad.order().max(4));
            return Ok(m.scaled(self.normalization));
        }
        let r = self.truncation_radius();
        let rule = quad.rescaled(0.0, r)?;
        let mut acc = [0.0_f64; 6];
        for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
            let g = self.eval_gamma(z);
            let gp = self.eval_gamma_dz(z);
            acc[0] += w * g;
            acc[1] += w * z * z * g;
            acc[2] += w * g.abs();
            acc[3] += w * g * g;
            acc[4] += w * gp.abs();
            acc[5] += w * gp * gp;
        }
        if let Shape::Laplace { epsilon: e } = self.shape {
            let n = self.normalization;
            let tail = (-r / e).exp();
            let tail2 = (-2.0 * r / e).exp();
            acc[0] += n * tail / 2.0;
            acc[1] += n * tail * (r * r + 2.0 * r * e + 2.0 * e * e) / 2.0;
            acc[2] += n * tail / 2.0;
            acc[3] += n * n * tail2 / (8.0 * e);
            acc[4] += n * tail / (2.0 * e);
            acc[5] += n * n * tail2 / (8.0 * e.powi(3));
        }
        Ok(KernelMoments {
            mass: 2.0 * acc[0],
            second_moment: 2.0 * acc[1],
            l1_gamma: 2.0 * acc[2],
            l2_gamma: (2.0 * acc[3]).sqrt(),
            l1_gamma_prime: 2.0 * acc[4],
            l2_gamma_prime: (2.0 * acc[5]).sqrt(),
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    pub mass: f64,
    pub second_moment: f64,
    pub l1_gamma: f64,
    pub l2_gamma: f64,
    pub l1_gamma_prime: f64,
    pub l2_gamma_prime: f64,
}

impl KernelMoments {
    fn scaled(self, n: f64) -> Self {
        Self {
            mass: n * self.mass,
            second_moment: n * self.second_moment,
            l1_gamma: n * self.l1_gamma,
            l2_gamma: n * self.l2_gamma,
            l1_gamma_prime: n * self.l1_gamma_prime,
            l2_gamma_prime: n * self.l2_gamma_prime,
        }
    }

    fn all_finite(&self) -> bool {
        [self.l1_gamma, self.l2_gamma, self.l1_gamma_prime, self.l2_gamma_prime]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelIssue {
    NotStrictlyPositive,
    NotSymmetric,
    NonFiniteMoment,
    NonFiniteNorm,
    NonPositiveMass,
    /// Tabulated kernel is zero beyond its last sample.
    TruncatedTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub family: KernelFamily,
    pub gamma_mass: f64,
    pub second_moment: f64,
    pub l1_gamma: f64,
    pub l2_gamma: f64,
    pub l1_gamma_prime: f64,
    pub l2_gamma_prime: f64,
    pub strictly_positive: bool,
    /// Positivity on `[-R, R]` only; for tables, checked on a 10x refined grid.
    pub positive_on_support: bool,
    pub symmetric: bool,
    pub hypothesis_satisfied: bool,
    pub issues: Vec<KernelIssue>,
    /// The same scalars computed by quadrature, for cross-checking closed forms.
    pub quadrature: KernelMoments,
}

/// Validate a kernel against the standing assumptions (positive, even, finite
/// second moment, `γ ∈ H¹ ∩ W^{1,1}`) and report its scalars.
pub fn kernel_report(spec: &KernelSpec, quad: &QuadratureRule) -> Result<KernelReport> {
    let quadrature = spec.moments_by_quadrature(quad)?;
    let scalars = spec.closed_form_moments().unwrap_or(quadrature);
    let mut issues = Vec::new();

    let (strictly_positive, positive_on_support) = match &spec.shape {
        Shape::Gaussian { .. } | Shape::Laplace { .. } => (true, true),
        Shape::Tabulated(t) => {
            // zero beyond the last sample, so never positive on all of ℝ
            issues.push(KernelIssue::TruncatedTable);
            (false, t.positive_on_refined_grid(10))
        }
    };
    if !strictly_positive {
        issues.push(KernelIssue::NotStrictlyPositive);
    }

    let symmetric = symmetry_probe(spec);
    if !symmetric {
        issues.push(KernelIssue::NotSymmetric);
    }
    if !scalars.second_moment.is_finite() {
        issues.push(KernelIssue::NonFiniteMoment);
    }
    if !scalars.all_finite() {
        issues.push(KernelIssue::NonFiniteNorm);
    }
    if scalars.mass.is_nan() || scalars.mass <= 0.0 {
        issues.push(KernelIssue::NonPositiveMass);
    }
    let hypothesis_satisfied = strictly_positive
        && symmetric
        && scalars.second_moment.is_finite()
        && scalars.all_finite()
        && scalars.mass > 0.0;

    Ok(KernelReport {
        family: spec.family(),
        gamma_mass: scalars.mass,
        second_moment: scalars.second_moment,
        l1_gamma: scalars.l1_gamma,
        l2_gamma: scalars.l2_gamma,
        l1_gamma_prime: scalars.l1_gamma_prime,
        l2_gamma_prime: scalars.l2_gamma_prime,
        strictly_positive,
        positive_on_support,
        symmetric,
        hypothesis_satisfied,
        issues,
        quadrature,
    })
}

fn symmetry_probe(spec: &KernelSpec) -> bool {
    let r = spec.truncation_radius();
    (0..=200).all(|i| {
        let z = r * i as f64 / 200.0;
        spec.eval_gamma(z) == spec.eval_gamma(-z) && spec.eval_gamma_dz(z) == -spec.eval_gamma_dz(-z)
    })
}

/// Samples of a radial kernel on `0 = z_0 < z_1 < ... < z_n`, interpolated by
/// a monotone (Fritsch-Carlson) piecewise cubic Hermite curve.
/// Number pairs from two-column CSV text. Blank lines and `#` comments are
/// skipped; a non-numeric first line is taken as a header.
pub fn parse_pairs(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    let mut pairs = Vec::new();
    let mut seen_data = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(format!("line {}: expected two columns", lineno + 1));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => pairs.push((x, y)),
            _ if !seen_data => {}
            _ => return Err(format!("line {}: not a number pair", lineno + 1)),
        }
        seen_data = true;
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    z: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl KernelTable {
    /// Build from `(z, γ)` samples. Samples may cover `z >= 0` only, or a
    /// symmetric range whose negative half mirrors the positive half.
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.iter().any(|(z, g)| !z.is_finite() || !g.is_finite()) {
            return Err(Error::InvalidKernel("table contains non-finite samples".into()));
        }
        if samples.iter().any(|&(_, g)| g < 0.0) {
            return Err(Error::InvalidKernel("table contains negative kernel values".into()));
        }
        let mut pos: Vec<(f64, f64)> = samples.iter().copied().filter(|&(z, _)| z >= 0.0).collect();
        let mut neg: Vec<(f64, f64)> =
            samples.iter().copied().filter(|&(z, _)| z < 0.0).map(|(z, g)| (-z, g)).collect();
        pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        neg.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !neg.is_empty() {
            let mirrored: Vec<(f64, f64)> = pos.iter().copied().filter(|&(z, _)| z > 0.0).collect();
            let matches = mirrored.len() == neg.len()
                && mirrored.iter().zip(&neg).all(|(p, n)| {
                    (p.0 - n.0).abs() <= 1e-12 * p.0.max(1.0) && (p.1 - n.1).abs() <= 1e-12 * p.1.max(1.0)
                });
            if !matches {
                return Err(Error::InvalidKernel("table does not cover a symmetric z-range".into()));
            }
        }
        if pos.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two samples with z >= 0".into()));
        }
        if pos[0].0 != 0.0 {
            return Err(Error::InvalidKernel("table must include z = 0".into()));
        }
        if pos.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidKernel("table z values must be distinct".into()));
        }
        let z: Vec<f64> = pos.iter().map(|p| p.0).collect();
        let values: Vec<f64> = pos.iter().map(|p| p.1).collect();
        let slopes = monotone_slopes(&z, &values);
        Ok(Self { z, values, slopes })
    }

    /// Parse a two-column `z,gamma` CSV. A non-numeric first line is a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::new(&parse_pairs(text).map_err(Error::InvalidKernel)?)
    }

    pub fn max_z(&self) -> f64 {
        *self.z.last().expect("at least two samples")
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.values.iter().copied())
    }

    fn slope_at_origin(&self) -> f64 {
        self.slopes[0]
    }

    fn interval(&self, t: f64) -> Option<usize> {
        if t > self.max_z() {
            return None;
        }
        let idx = self.z.partition_point(|&zk| zk <= t);
        Some(idx.saturating_sub(1).min(self.z.len() - 2))
    }

    /// Interpolated value at `t >= 0`; zero beyond the table.
    pub fn value(&self, t: f64) -> f64 {
        let Some(k) = self.interval(t) else { return 0.0 };
        let h = self.z[k + 1] - self.z[k];
        let s = (t - self.z[k]) / h;
        let (h00, h10, h01, h11) = hermite_basis(s);
        h00 * self.values[k] + h10 * h * self.slopes[k] + h01 * self.values[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// Derivative of the interpolant at `t >= 0`; zero beyond the table.
    pub fn slope(&self, t: f64) -> f64 {
        let Some(k) = self.interval(t) else { return 0.0 };
        let h = self.z[k + 1] - self.z[k];
        let s = (t - self.z[k]) / h;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        (d00 * self.values[k] + d01 * self.values[k + 1]) / h
            + d10 * self.slopes[k]
            + d11 * self.slopes[k + 1]
    }

    /// Positivity of the interpolant on a grid `refine` times finer than the samples.
    pub fn positive_on_refined_grid(&self, refine: usize) -> bool {
        self.z.windows(2).all(|w| {
            (0..=refine).all(|i| self.value(w[0] + (w[1] - w[0]) * i as f64 / refine as f64) > 0.0)
        })
    }

    /// Whole-line moments of the symmetric extension (unit normalization).
    /// Each cubic piece is integrated exactly for the polynomial integrands;
    /// `|γ'|` is single-signed per piece because the interpolant is monotone there.
    fn moments(&self, order: usize) -> KernelMoments {
        let reference = reference_rule(order.max(4)).expect("order >= 4");
        let mut acc = [0.0_f64; 6];
        for w in self.z.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            for &(xi, wi) in &reference {
                let t = w[0] + half * (xi + 1.0);
                let g = self.value(t);
                let gp = self.slope(t);
                let wt = half * wi;
                acc[0] += wt * g;
                acc[1] += wt * t * t * g;
                acc[2] += wt * g.abs();
                acc[3] += wt * g * g;
                acc[4] += wt * gp.abs();
                acc[5] += wt * gp * gp;
            }
        }
        // jump to zero at the end of the table contributes a point mass to γ'
        let jump = self.values.last().copied().unwrap_or(0.0);
        acc[4] += jump;
        let l2_prime = if jump > 0.0 { f64::INFINITY } else { (2.0 * acc[5]).sqrt() };
        KernelMoments {
            mass: 2.0 * acc[0],
            second_moment: 2.0 * acc[1],
            l1_gamma: 2.0 * acc[2],
            l2_gamma: (2.0 * acc[3]).sqrt(),
            l1_gamma_prime: 2.0 * acc[4],
            l2_gamma_prime: l2_prime,
        }
    }
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

/// Fritsch-Carlson slopes: harmonic-mean interior slopes, zero at local
/// extrema, shape-preserving three-point end slopes.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn rule() -> QuadratureRule {
        QuadratureRule::new(0.0, 1.0, 40, 10).unwrap()
    }

    #[test]
    fn closed_form_point_values() {
        let lap = KernelSpec::laplace(0.5).unwrap();
        assert_relative_eq!(lap.eval_gamma(0.0), 1.0);
        assert_relative_eq!(lap.eval_gamma_dz(1.0), -2.0 * (-2.0f64).exp(), max_relative = 1e-14);
        assert_eq!(lap.eval_gamma_dz(0.0), 0.0);
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_relative_eq!(g.eval_gamma(0.0), 0.398_942_280_401_432_7, max_relative = 1e-14);
        assert_eq!(g.eval_gamma_dz(0.0), 0.0);
    }

    #[test]
    fn even_value_odd_derivative() {
        for spec in [KernelSpec::laplace(0.3).unwrap(), KernelSpec::gaussian(0.7).unwrap()] {
            assert_eq!(spec.eval_gamma(0.7), spec.eval_gamma(-0.7));
            assert_eq!(spec.eval_gamma_dz(0.7), -spec.eval_gamma_dz(-0.7));
        }
    }

    #[test]
    fn laplace_report_matches_closed_form() {
        let rep = kernel_report(&KernelSpec::laplace(0.5).unwrap(), &rule()).unwrap();
        assert_relative_eq!(rep.gamma_mass, 1.0);
        assert_relative_eq!(rep.second_moment, 0.5);
        assert_relative_eq!(rep.l1_gamma_prime, 2.0);
        assert_relative_eq!(rep.quadrature.mass, 1.0, max_relative = 1e-10);
        assert_relative_eq!(rep.quadrature.l2_gamma_prime, rep.l2_gamma_prime, max_relative = 1e-10);
        assert!(rep.hypothesis_satisfied);
    }

    #[test]
    fn triangle_table_fails_positivity() {
        let t = KernelTable::new(&[(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]).unwrap();
        let rep = kernel_report(&KernelSpec::tabulated(t), &rule()).unwrap();
        assert_relative_eq!(rep.gamma_mass, 1.0, max_relative = 1e-14);
        assert!(!rep.strictly_positive);
        assert!(!rep.hypothesis_satisfied);
        assert!(rep.issues.contains(&KernelIssue::NotStrictlyPositive));
    }

    #[test]
    fn table_accepts_symmetric_range_and_rejects_asymmetric() {
        let ok = KernelTable::new(&[(-1.0, 0.2), (0.0, 1.0), (1.0, 0.2)]).unwrap();
        assert_eq!(ok.max_z(), 1.0);
        assert!(KernelTable::new(&[(-1.0, 0.3), (0.0, 1.0), (1.0, 0.2)]).is_err());
        assert!(KernelTable::new(&[(0.0, 1.0), (1.0, -0.1)]).is_err());
        assert!(KernelTable::new(&[(0.1, 1.0), (1.0, 0.1)]).is_err());
    }

    #[test]
    fn monotone_interpolation_does_not_overshoot() {
        let samples: Vec<(f64, f64)> =
            (0..8).map(|i| (i as f64 * 0.25, if i < 3 { 1.0 } else { 0.01 })).collect();
        let t = KernelTable::new(&samples).unwrap();
        for i in 0..=700 {
            let v = t.value(i as f64 * 0.0025);
            assert!((0.01 - 1e-15..=1.0 + 1e-15).contains(&v));
        }
    }

    #[test]
    fn csv_with_header() {
        let t = KernelTable::parse_csv("z,gamma\n0,1\n0.5,0.5\n1,0\n").unwrap();
        assert_eq!(t.samples().count(), 3);
        assert!(KernelTable::parse_csv("0,1\nfoo,bar\n").is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KernelSpec::laplace(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::gaussian(1.0).unwrap().with_normalization(0.0).is_err());
    }
}

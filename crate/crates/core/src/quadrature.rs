//! Composite Gauss-Legendre rules on intervals.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

/// Composite Gauss-Legendre rule: `panels` equal panels on `[a, b]`, `order`
/// points per panel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub(crate) fn reference_rule(order: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(order).ok_or(Error::InvalidQuadrature("order must be at least 1"))?;
    let rule = GaussLegendre::new(n);
    let mut pairs = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs)
}

impl QuadratureRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidQuadrature("panels must be at least 1"));
        }
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidQuadrature("interval must be finite with b > a"));
        }
        let reference = reference_rule(order)?;
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let left = a + p as f64 * h;
            for &(xi, wi) in &reference {
                nodes.push(left + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Ok(Self { a, b, panels, order, nodes, weights })
    }

    /// Rule on the symmetric domain `[-half_length, half_length]`.
    pub fn on_domain(half_length: f64, panels: usize, order: usize) -> Result<Self> {
        Self::new(-half_length, half_length, panels, order)
    }

    /// Same panel count and order, moved to a new interval.
    pub fn rescaled(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, self.panels, self.order)
    }

    pub fn lower(&self) -> f64 {
        self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_width(&self) -> f64 {
        (self.b - self.a) / self.panels as f64
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Weighted sum of values already sampled at the nodes.
    pub fn integrate_samples(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: samples.len() });
        }
        Ok(samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum())
    }

    /// Nodes and weights of the same panel structure with the panel containing
    /// `split` cut in two at `split`. Integrands with a kink at `split` keep full
    /// accuracy on each side.
    pub fn split_at(&self, split: f64) -> Vec<(f64, f64)> {
        let h = self.panel_width();
        let reference = reference_rule(self.order).expect("order validated at construction");
        let mut out = Vec::with_capacity((self.panels + 1) * self.order);
        let push_panel = |lo: f64, hi: f64, out: &mut Vec<(f64, f64)>| {
            if hi - lo <= 0.0 {
                return;
            }
            let half = 0.5 * (hi - lo);
            for &(xi, wi) in &reference {
                out.push((lo + half * (xi + 1.0), half * wi));
            }
        };
        for p in 0..self.panels {
            let lo = self.a + p as f64 * h;
            let hi = if p + 1 == self.panels { self.b } else { lo + h };
            if split > lo && split < hi {
                push_panel(lo, split, &mut out);
                push_panel(split, hi, &mut out);
            } else {
                push_panel(lo, hi, &mut out);
            }
        }
        out
    }
}

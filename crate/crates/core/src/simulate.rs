//! Coefficient ODE of the augmented system, its RK4 integration, and the
//! closed-form constants of the small-data energy estimates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{differentiation_matrix, BasisKind, BasisSet, DerivMap, Projector};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::nonlinear::{evaluate_nodal, CutoffSpec, NodalFields, NonlinearTerm, ReactionParams};
use crate::operators::AssembledOperators;
use crate::quadrature::QuadratureRule;

/// Physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Rainfall `a >= 0`.
    pub a: f64,
    /// Logistic coefficient `b >= 0`.
    pub b: f64,
    /// Plant dispersal rate `d > 0`.
    pub dispersal: f64,
    /// Plant mortality `μ > 0`.
    pub mu: f64,
    /// Slope advection `ν >= 0`.
    pub nu: f64,
    /// Half-length `L` of `Ω = [-L, L]`.
    pub half_length: f64,
    /// Cutoff bound `M`.
    pub cutoff_bound: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 7] = [
            ("a", self.a, self.a >= 0.0),
            ("b", self.b, self.b >= 0.0),
            ("dispersal", self.dispersal, self.dispersal > 0.0),
            ("mu", self.mu, self.mu > 0.0),
            ("nu", self.nu, self.nu >= 0.0),
            ("L", self.half_length, self.half_length > 0.0),
            ("M", self.cutoff_bound, self.cutoff_bound > 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() || !ok {
                let sign = if matches!(name, "a" | "b" | "nu") { "non-negative" } else { "positive" };
                return Err(Error::InvalidParameter { name, reason: format!("must be finite and {sign}, got {value}") });
            }
        }
        Ok(())
    }

    pub fn cutoff(&self) -> Result<CutoffSpec> {
        CutoffSpec::new(self.cutoff_bound)
    }

    pub fn reaction(&self) -> Result<ReactionParams> {
        Ok(ReactionParams { a: self.a, b: self.b, cutoff: self.cutoff()? })
    }

    /// `|Ω| = 2L`.
    pub fn domain_measure(&self) -> f64 {
        2.0 * self.half_length
    }
}

/// Galerkin coefficients of `(u, w, v, z)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub t: f64,
    pub coef_u: DVector<f64>,
    pub coef_w: DVector<f64>,
    pub coef_v: DVector<f64>,
    pub coef_z: DVector<f64>,
}

impl GalerkinState {
    pub fn zeros(dim_u: usize, m: usize) -> Self {
        Self {
            t: 0.0,
            coef_u: DVector::zeros(dim_u),
            coef_w: DVector::zeros(m),
            coef_v: DVector::zeros(dim_u),
            coef_z: DVector::zeros(m),
        }
    }

    pub fn dim_u(&self) -> usize {
        self.coef_u.len()
    }

    pub fn m(&self) -> usize {
        self.coef_w.len()
    }

    fn blocks(&self) -> [&DVector<f64>; 4] {
        [&self.coef_u, &self.coef_w, &self.coef_v, &self.coef_z]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Largest Euclidean norm among the four blocks.
    pub fn max_block_norm(&self) -> f64 {
        self.blocks().iter().map(|b| b.norm()).fold(0.0, f64::max)
    }

    /// `self + h * rate`, with the time advanced by `h`.
    pub fn step_by(&self, h: f64, rate: &GalerkinState) -> GalerkinState {
        GalerkinState {
            t: self.t + h,
            coef_u: &self.coef_u + &rate.coef_u * h,
            coef_w: &self.coef_w + &rate.coef_w * h,
            coef_v: &self.coef_v + &rate.coef_v * h,
            coef_z: &self.coef_z + &rate.coef_z * h,
        }
    }

    /// All coefficients concatenated as `[u, w, v, z]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|b| b.iter().copied()).collect()
    }

    pub fn from_flat(t: f64, dim_u: usize, m: usize, flat: &[f64]) -> Result<Self> {
        let expected = 2 * dim_u + 2 * m;
        if flat.len() != expected {
            return Err(Error::LengthMismatch { expected, found: flat.len() });
        }
        let (u, rest) = flat.split_at(dim_u);
        let (w, rest) = rest.split_at(m);
        let (v, z) = rest.split_at(dim_u);
        Ok(Self {
            t,
            coef_u: DVector::from_column_slice(u),
            coef_w: DVector::from_column_slice(w),
            coef_v: DVector::from_column_slice(v),
            coef_z: DVector::from_column_slice(z),
        })
    }
}

/// Which unknown a profile describes; fixes the meaning of `single_mode` and
/// the boundary constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Plant,
    Water,
}

/// Profile sampled on a grid, interpolated by local cubics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    x: Vec<f64>,
    values: Vec<f64>,
}

impl SampledProfile {
    pub fn new(x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x.len() != values.len() {
            return Err(Error::LengthMismatch { expected: x.len(), found: values.len() });
        }
        if x.len() < 4 {
            return Err(Error::InvalidParameter { name: "initial.csv", reason: "need at least 4 samples".into() });
        }
        if x.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled profile"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter { name: "initial.csv", reason: "x must be strictly increasing".into() });
        }
        Ok(Self { x, values })
    }

    /// Parse two-column `x,value` CSV text (see [`crate::kernel::parse_pairs`]).
    pub fn parse_csv(text: &str) -> Result<Self> {
        let pairs = crate::kernel::parse_pairs(text)
            .map_err(|reason| Error::InvalidParameter { name: "initial.csv", reason })?;
        let (x, values) = pairs.into_iter().unzip();
        Self::new(x, values)
    }

    /// Four-point Lagrange stencil around `t`, clamped to the data.
    fn stencil(&self, t: f64) -> usize {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t);
        i.saturating_sub(2).min(n - 4)
    }

    /// Value and slope of the local cubic; zero outside the sampled range.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t < self.x[0] || t > *self.x.last().expect("non-empty") {
            return (0.0, 0.0);
        }
        let s = self.stencil(t);
        let xs = &self.x[s..s + 4];
        let ys = &self.values[s..s + 4];
        let mut value = 0.0;
        let mut slope = 0.0;
        for i in 0..4 {
            let mut li = 1.0;
            let mut dli = 0.0;
            for j in (0..4).filter(|&j| j != i) {
                let denom = xs[i] - xs[j];
                // product rule over the remaining factors
                let mut term = 1.0 / denom;
                for k in (0..4).filter(|&k| k != i && k != j) {
                    term *= (t - xs[k]) / (xs[i] - xs[k]);
                }
                dli += term;
                li *= (t - xs[j]) / denom;
            }
            value += ys[i] * li;
            slope += ys[i] * dli;
        }
        (value, slope)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    /// `amplitude * exp(-(x - center)² / (2 width²))`.
    GaussianBump { center: f64, width: f64, amplitude: f64 },
    /// `amplitude * s_k` for the plant, `amplitude * ψ_k` for water (`k >= 1`).
    SingleMode { k: usize, amplitude: f64 },
    Sampled(SampledProfile),
}

impl Profile {
    /// Value and derivative at `x`.
    pub fn eval(&self, role: FieldRole, half_length: f64, x: f64) -> (f64, f64) {
        match self {
            Profile::Zero => (0.0, 0.0),
            Profile::GaussianBump { center, width, amplitude } => {
                let r = (x - center) / width;
                let g = amplitude * (-0.5 * r * r).exp();
                (g, -g * r / width)
            }
            Profile::SingleMode { k, amplitude } => {
                let amp = amplitude / half_length.sqrt();
                let (freq, shift) = match role {
                    FieldRole::Plant => ((2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * half_length), 0.0),
                    FieldRole::Water => (*k as f64 * std::f64::consts::PI / (2.0 * half_length), half_length),
                };
                let arg = freq * (x + shift);
                (amp * arg.sin(), amp * freq * arg.cos())
            }
            Profile::Sampled(s) => s.eval(x),
        }
    }

    fn validate(&self, role: FieldRole, half_length: f64) -> Result<()> {
        let field = match role {
            FieldRole::Plant => "u0",
            FieldRole::Water => "w0",
        };
        match self {
            Profile::GaussianBump { width, .. } if width.is_nan() || *width <= 0.0 => {
                return Err(Error::InvalidParameter { name: "initial.width", reason: format!("must be positive, got {width}") })
            }
            Profile::SingleMode { k: 0, .. } => {
                return Err(Error::InvalidParameter { name: "initial.k", reason: "modes are numbered from 1".into() })
            }
            _ => {}
        }
        if role == FieldRole::Water {
            for x in [-half_length, half_length] {
                let value = self.eval(role, half_length, x).0;
                if value.is_nan() || value.abs() > BOUNDARY_TOLERANCE {
                    return Err(Error::BoundaryViolation { field, x, value: value.abs() });
                }
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Profile {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::GaussianBump { center, width, amplitude } => {
                Profile::GaussianBump { center: *center, width: *width, amplitude: amplitude * factor }
            }
            Profile::SingleMode { k, amplitude } => Profile::SingleMode { k: *k, amplitude: amplitude * factor },
            Profile::Sampled(s) => Profile::Sampled(SampledProfile {
                x: s.x.clone(),
                values: s.values.iter().map(|v| v * factor).collect(),
            }),
        }
    }
}

/// Largest admissible `|w0(±L)|`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub u: Profile,
    pub w: Profile,
}

impl InitialCondition {
    pub fn scaled(&self, factor: f64) -> Self {
        Self { u: self.u.scaled(factor), w: self.w.scaled(factor) }
    }
}

/// Everything the right-hand side needs, precomputed once per discretization.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub ops: AssembledOperators,
    pub params: ModelParams,
    reaction: ReactionParams,
    quad: QuadratureRule,
    plant: Projector,
    water: Projector,
    deriv: Projector,
    plant_d: DerivMap,
    water_d: DerivMap,
    /// `dB̂ + μ Gram`, `Ĝ + I`, `M̂ + I`.
    plant_linear: DMatrix<f64>,
    water_linear: DMatrix<f64>,
    deriv_linear: DMatrix<f64>,
}

impl GalerkinSystem {
    pub fn new(ops: AssembledOperators, params: ModelParams, quad: QuadratureRule) -> Result<Self> {
        params.validate()?;
        if (ops.plant.half_length() - params.half_length).abs() > 1e-14 * params.half_length {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: format!("operators assembled on L = {}, model has L = {}", ops.plant.half_length(), params.half_length),
            });
        }
        if (ops.nu - params.nu).abs() > 0.0 {
            return Err(Error::InvalidParameter {
                name: "nu",
                reason: format!("operators assembled with nu = {}, model has nu = {}", ops.nu, params.nu),
            });
        }
        let deriv_set = ops.deriv();
        let plant_linear = &ops.b_hat * params.dispersal + &ops.plant_gram * params.mu;
        let water_linear = &ops.g_hat + DMatrix::identity(ops.water.dim(), ops.water.dim());
        let deriv_linear = &ops.m_hat + DMatrix::identity(deriv_set.dim(), deriv_set.dim());
        Ok(Self {
            reaction: params.reaction()?,
            plant: Projector::new(&ops.plant, &quad)?,
            water: Projector::new(&ops.water, &quad)?,
            deriv: Projector::new(&deriv_set, &quad)?,
            plant_d: differentiation_matrix(&ops.plant)?,
            water_d: differentiation_matrix(&ops.water)?,
            quad,
            plant_linear,
            water_linear,
            deriv_linear,
            ops,
            params,
        })
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn plant_basis(&self) -> &BasisSet {
        &self.ops.plant
    }

    pub fn water_basis(&self) -> &BasisSet {
        &self.ops.water
    }

    pub fn deriv_basis(&self) -> BasisSet {
        self.ops.deriv()
    }

    pub fn plant_deriv_map(&self) -> &DerivMap {
        &self.plant_d
    }

    pub fn water_deriv_map(&self) -> &DerivMap {
        &self.water_d
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.ops.kernel
    }

    pub fn reaction(&self) -> &ReactionParams {
        &self.reaction
    }

    pub fn zero_state(&self) -> GalerkinState {
        GalerkinState::zeros(self.ops.plant.dim(), self.ops.water.dim())
    }

    fn check_shape(&self, state: &GalerkinState) -> Result<()> {
        let (du, m) = (self.ops.plant.dim(), self.ops.water.dim());
        for (block, n) in [(&state.coef_u, du), (&state.coef_v, du), (&state.coef_w, m), (&state.coef_z, m)] {
            if block.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: block.len() });
            }
        }
        Ok(())
    }

    /// Project an initial condition: `u, v=u'` onto the plant family, `w`
    /// onto the water family and `z=w'` onto the derivative family.
    pub fn initial_state(&self, ic: &InitialCondition) -> Result<GalerkinState> {
        let l = self.params.half_length;
        ic.u.validate(FieldRole::Plant, l)?;
        ic.w.validate(FieldRole::Water, l)?;
        let sample = |p: &Profile, role| -> (DVector<f64>, DVector<f64>) {
            let n = self.quad.len();
            let mut f = DVector::zeros(n);
            let mut df = DVector::zeros(n);
            for (i, &x) in self.quad.nodes().iter().enumerate() {
                (f[i], df[i]) = p.eval(role, l, x);
            }
            (f, df)
        };
        let (u, du) = sample(&ic.u, FieldRole::Plant);
        let (w, dw) = sample(&ic.w, FieldRole::Water);
        let state = GalerkinState {
            t: 0.0,
            coef_u: self.plant.project(&u)?,
            coef_w: self.water.project(&w)?,
            coef_v: self.plant.project(&du)?,
            coef_z: self.deriv.project(&dw)?,
        };
        if !state.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        Ok(state)
    }

    /// The four fields at the quadrature nodes.
    pub fn nodal_fields(&self, state: &GalerkinState) -> Result<NodalFields> {
        self.check_shape(state)?;
        Ok(NodalFields {
            u: self.plant.synthesize(&state.coef_u)?.data.into(),
            w: self.water.synthesize(&state.coef_w)?.data.into(),
            v: self.plant.synthesize(&state.coef_v)?.data.into(),
            z: self.deriv.synthesize(&state.coef_z)?.data.into(),
        })
    }

    /// Projected reaction terms `(P̃1, P̃2, Q̃1, Q̃2)` as inner products.
    pub fn projected_nonlinear(&self, state: &GalerkinState) -> Result<[DVector<f64>; 4]> {
        let fields = self.nodal_fields(state)?;
        let proj = |which, projector: &Projector| -> Result<DVector<f64>> {
            projector.inner_products(&evaluate_nodal(which, &fields, &self.reaction)?)
        };
        Ok([
            proj(NonlinearTerm::P1, &self.plant)?,
            proj(NonlinearTerm::P2, &self.water)?,
            proj(NonlinearTerm::Q1, &self.plant)?,
            proj(NonlinearTerm::Q2, &self.deriv)?,
        ])
    }

    /// Time derivative of every coefficient block.
    pub fn rhs(&self, state: &GalerkinState) -> Result<GalerkinState> {
        let [p1, p2, q1, q2] = self.projected_nonlinear(state)?;
        let d = self.params.dispersal;
        let du = self.plant.solve_gram(-(&self.plant_linear * &state.coef_u) + p1);
        let dw = -(&self.water_linear * &state.coef_w) + p2;
        let dv = self.plant.solve_gram(&self.ops.j_hat * &state.coef_u * d + q1)
            - &state.coef_v * (self.params.mu + d * self.ops.gamma);
        let dz = -(&self.deriv_linear * &state.coef_z) + q2;
        let rate = GalerkinState { t: state.t, coef_u: du, coef_w: dw, coef_v: dv, coef_z: dz };
        if !rate.is_finite() {
            return Err(Error::NonFinite("right-hand side"));
        }
        Ok(rate)
    }

    /// Stability-limited default step `min(1e-3, 0.5/ρ)`, with
    /// `ρ = λ_max + 1 + μ + 2Γd` and `λ_max` the larger spectral radius of `Ĝ`, `M̂`.
    pub fn default_time_step(&self) -> f64 {
        let lambda = spectral_radius(&self.ops.g_hat).max(spectral_radius(&self.ops.m_hat));
        let rho = lambda + 1.0 + self.params.mu + 2.0 * self.ops.gamma * self.params.dispersal;
        (0.5 / rho).min(1e-3)
    }

    /// Classical RK4 with a fixed step, adjusted so the last step lands on `t_final`.
    ///
    /// States are recorded at step 0, every `record_stride` steps and at the end.
    /// `monitor` sees every accepted state.
    pub fn integrate<F: FnMut(&GalerkinState)>(
        &self,
        state0: &GalerkinState,
        t_final: f64,
        dt: f64,
        record_stride: usize,
        mut monitor: F,
    ) -> Result<Trajectory> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter { name: "T", reason: format!("must be positive, got {t_final}") });
        }
        if record_stride == 0 {
            return Err(Error::InvalidParameter { name: "record_stride", reason: "must be at least 1".into() });
        }
        self.check_shape(state0)?;
        let steps = ((t_final - state0.t) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (t_final - state0.t) / steps as f64;
        let t0 = state0.t;

        let mut state = state0.clone();
        monitor(&state);
        let mut states = vec![state.clone()];
        for n in 1..=steps {
            let next = self.rk4_step(&state, h).map_err(|e| Error::IntegrationAborted {
                t: state.t,
                reason: e.to_string(),
                last_valid: Box::new(state.clone()),
            })?;
            if !next.is_finite() || next.max_block_norm() > BLOW_UP {
                return Err(Error::IntegrationAborted {
                    t: next.t,
                    reason: if next.is_finite() { "coefficient norm exceeded 1e12".into() } else { "non-finite state".into() },
                    last_valid: Box::new(state),
                });
            }
            state = next;
            // pin the clock to the grid to avoid drift
            state.t = t0 + n as f64 * h;
            monitor(&state);
            if n % record_stride == 0 || n == steps {
                states.push(state.clone());
            }
        }
        Ok(Trajectory { states, dt: h, steps })
    }

    fn rk4_step(&self, s: &GalerkinState, h: f64) -> Result<GalerkinState> {
        let k1 = self.rhs(s)?;
        let k2 = self.rhs(&s.step_by(0.5 * h, &k1))?;
        let k3 = self.rhs(&s.step_by(0.5 * h, &k2))?;
        let k4 = self.rhs(&s.step_by(h, &k3))?;
        let mut out = s.step_by(h / 6.0, &k1);
        out = out.step_by(h / 3.0, &k2);
        out = out.step_by(h / 3.0, &k3);
        out = out.step_by(h / 6.0, &k4);
        out.t = s.t + h;
        Ok(out)
    }
}

const BLOW_UP: f64 = 1e12;

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<GalerkinState>,
    /// Step actually used.
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &GalerkinState {
        &self.states[0]
    }

    pub fn last(&self) -> &GalerkinState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// `L²` norms of the initial data and of its derivatives (the augmented
/// `v(0)`, `z(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialNorms {
    pub u: f64,
    pub w: f64,
    pub ux: f64,
    pub wx: f64,
}

impl InitialNorms {
    pub fn from_state(state: &GalerkinState, plant_gram: &DMatrix<f64>) -> Self {
        let plant = |c: &DVector<f64>| c.dot(&(plant_gram * c)).max(0.0).sqrt();
        Self { u: plant(&state.coef_u), w: state.coef_w.norm(), ux: plant(&state.coef_v), wx: state.coef_z.norm() }
    }

    pub fn l2_sum(&self) -> f64 {
        self.u + self.w
    }

    pub fn derivative_sum(&self) -> f64 {
        self.ux + self.wx
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { u: self.u * factor, w: self.w * factor, ux: self.ux * factor, wx: self.wx * factor }
    }
}

/// Operator bounds the estimates consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorBounds {
    /// `‖J‖` surrogate `‖γ'‖_{L¹}`.
    pub j_norm: f64,
    /// Boundedness constant of `B`, taken as `2Γ`.
    pub b_bound: f64,
}

impl From<&AssembledOperators> for OperatorBounds {
    fn from(ops: &AssembledOperators) -> Self {
        Self { j_norm: ops.j_norm_bound, b_bound: ops.k_norm_bound }
    }
}

/// The constants of the a-priori estimates, evaluated at `t_effective`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct EstimateConstants {
    pub C1: f64,
    pub C2: f64,
    pub D1: f64,
    pub D2: f64,
    pub D1_tilde: f64,
    pub D2_tilde: f64,
    pub E1: f64,
    pub E2: f64,
    pub E3: f64,
    pub F1: f64,
    pub F2: f64,
    pub F3: f64,
    pub script_C1: f64,
    pub script_C2: f64,
    pub kappa: f64,
    pub chi: f64,
    pub kappa_p: f64,
    pub chi_p: f64,
    pub C_emb: f64,
    /// Boundedness constant of the water form used in `F3`.
    pub C_G: f64,
    pub t_requested: f64,
    /// Largest horizon with `C_emb E3 <= M/5` (infinite when `a = 0`).
    pub t_max: f64,
    pub t_effective: f64,
    /// `‖u0‖ + ‖w0‖ < 𝒞1` and `‖u0'‖ + ‖w0'‖ < 𝒞2`.
    pub admissible: bool,
    /// `C_emb (E1 n0 + E2 n1 + E3)`: the a-priori `L∞` bound, to compare with `M/2`.
    pub linf_bound: f64,
}

/// Coercivity pair `(κ, χ)` of the water forms for slope `ν`.
pub fn coercivity_pair(nu: f64) -> (f64, f64) {
    (0.5, 0.5 * (1.0 + nu * nu))
}

/// `√(1 + 1/(2L))`: `‖f‖∞ <= C_emb ‖f‖_{H¹}` on `[-L, L]`.
pub fn embedding_constant(half_length: f64) -> f64 {
    (1.0 + 1.0 / (2.0 * half_length)).sqrt()
}

/// Largest `T` with `C_emb · a e^{χT} √(2|Ω|T) <= M/5`.
pub fn max_time(params: &ModelParams) -> f64 {
    if params.a == 0.0 {
        return f64::INFINITY;
    }
    let (_, chi) = coercivity_pair(params.nu);
    let c = embedding_constant(params.half_length);
    let target = params.cutoff_bound / 5.0;
    let lhs = |t: f64| c * params.a * (chi * t).exp() * (2.0 * params.domain_measure() * t).sqrt();
    let mut hi = 1.0;
    while lhs(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// Evaluate every constant at `min(t_requested, max_time)`.
#[allow(non_snake_case)]
pub fn estimate_constants(
    params: &ModelParams,
    t_requested: f64,
    ic: &InitialNorms,
    bounds: &OperatorBounds,
) -> EstimateConstants {
    let t_max = max_time(params);
    let t = t_requested.min(t_max);
    let (ModelParams { a, b, dispersal: d, mu, nu, .. }, m) = (*params, params.cutoff_bound);
    let (kappa, chi) = coercivity_pair(nu);
    let (kappa_p, chi_p) = coercivity_pair(nu);
    let c_emb = embedding_constant(params.half_length);
    let omega = params.domain_measure();
    let m2 = m * m;
    let m3 = m2 * m;
    let growth = m2 + b * m3;
    let dj = d * bounds.j_norm;

    let C1 = 2f64.sqrt() * (0.5 * growth * t).exp().max((chi * t).exp());
    let C2 = a * (chi * t).exp() * (2.0 * omega * t).sqrt();
    let D1_tilde = 2.0 * (2.0 * m + 3.0 * b * m3).max(0.5 * growth) + 2.0 * m2.max(3.0 * b * m3) + (0.5 * dj).max(chi_p);
    let D2_tilde = 0.5 * dj * (2.0 * growth * t).exp() * ic.u * ic.u;
    let D1 = 2f64.sqrt() * (D1_tilde * t).exp();
    let D2 = 2.0 * (D1_tilde * t).exp() * (D2_tilde * t).sqrt();
    let E1 = 2.0 * C1.max(D1 * (growth * t).exp() * dj.sqrt());
    let E2 = D1;
    let E3 = C2;
    let n0 = ic.l2_sum();
    let n1 = ic.derivative_sum();
    let F1 = t.sqrt() * (E1 * n0 + E2 * n1);
    let F2 = t.sqrt() * (growth * t).exp() * (0.25 * m2 + 0.125 * b * m3 + mu + bounds.b_bound * d) * ic.u;
    let C_G = 1.0 + nu;
    let F3 = t.sqrt() * (0.25 * a * m2 * omega.sqrt() + C_G + 1.0) * F1;
    let script_C1 = m / (2.0 * c_emb * E1);
    let script_C2 = m / (2.0 * c_emb * E2);
    EstimateConstants {
        C1,
        C2,
        D1,
        D2,
        D1_tilde,
        D2_tilde,
        E1,
        E2,
        E3,
        F1,
        F2,
        F3,
        script_C1,
        script_C2,
        kappa,
        chi,
        kappa_p,
        chi_p,
        C_emb: c_emb,
        C_G,
        t_requested,
        t_max,
        t_effective: t,
        admissible: n0 < script_C1 && n1 < script_C2,
        linf_bound: c_emb * (E1 * n0 + E2 * n1 + E3),
    }
}

/// Largest factor `s` with `C_emb (E1 s n0 + E2 s n1) = M/5` for data whose
/// norms at unit scale are `unit`. Scaling the data by any `f < s` keeps the
/// a-priori `L∞` bound below `2M/5 < M/2`.
pub fn max_admissible_scale(params: &ModelParams, t_requested: f64, unit: &InitialNorms, bounds: &OperatorBounds) -> f64 {
    let k = estimate_constants(params, t_requested, unit, bounds);
    let denom = k.C_emb * (k.E1 * unit.l2_sum() + k.E2 * unit.derivative_sum());
    if denom == 0.0 {
        f64::INFINITY
    } else {
        params.cutoff_bound / 5.0 / denom
    }
}

/// Initial data scaled into the small-data regime, with the matching constants.
#[derive(Debug, Clone)]
pub struct SmallDataSetup {
    pub initial: InitialCondition,
    pub state0: GalerkinState,
    pub norms: InitialNorms,
    pub constants: EstimateConstants,
    /// Factor applied to the unit-scale shape.
    pub scale: f64,
}

/// Scale `shape` to `fraction` of the largest admissible amplitude (see
/// [`max_admissible_scale`]) and evaluate the constants for it.
///
/// `t_requested = ∞` asks for the longest admissible horizon.
pub fn small_data_setup(
    sys: &GalerkinSystem,
    shape: &InitialCondition,
    t_requested: f64,
    fraction: f64,
) -> Result<SmallDataSetup> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter { name: "fraction", reason: format!("must lie in (0, 1), got {fraction}") });
    }
    if t_requested.is_infinite() && sys.params.a == 0.0 {
        return Err(Error::InvalidParameter { name: "T", reason: "no automatic horizon without rainfall".into() });
    }
    let unit_state = sys.initial_state(shape)?;
    let unit = InitialNorms::from_state(&unit_state, &sys.ops.plant_gram);
    let bounds = OperatorBounds::from(&sys.ops);
    let scale = fraction * max_admissible_scale(&sys.params, t_requested, &unit, &bounds);
    if !scale.is_finite() {
        return Err(Error::InvalidParameter { name: "initial", reason: "initial data are identically zero".into() });
    }
    let initial = shape.scaled(scale);
    let state0 = sys.initial_state(&initial)?;
    let norms = InitialNorms::from_state(&state0, &sys.ops.plant_gram);
    let constants = estimate_constants(&sys.params, t_requested, &norms, &bounds);
    Ok(SmallDataSetup { initial, state0, norms, constants, scale })
}

/// Basis family check shared by callers that accept raw coefficient blocks.
pub fn expect_kind(set: &BasisSet, kind: BasisKind) -> Result<()> {
    if set.kind() != kind {
        return Err(Error::InvalidBasis(format!("expected {kind:?}, got {:?}", set.kind())));
    }
    Ok(())
}

//! Subcommands. Each one writes into its own output directory and returns
//! whether everything it checked passed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use klausmeier::basis::BasisSet;
use klausmeier::kernel::{kernel_report, KernelFamily, KernelReport, KernelSpec, KernelTable};
use klausmeier::monitor::{level_difference, verify_all, VerificationReport};
use klausmeier::operators::{AssembledOperators, KernelCheck};
use klausmeier::quadrature::QuadratureRule;
use klausmeier::simulate::{
    estimate_constants, small_data_setup, EstimateConstants, GalerkinState, GalerkinSystem, InitialCondition,
    InitialNorms, ModelParams, OperatorBounds, Profile, SampledProfile, Trajectory,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Horizon, OutputFormat, ProfileConfig, RunConfig, Scaling, SweepKey};
use crate::output::{
    read_matrix_csv, write_fields_csv, write_json, write_matrix_csv, write_norms_csv, write_trajectory_csv, RunDir,
};

/// Options shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub quiet: bool,
}

impl RunContext {
    fn say(&self, text: impl std::fmt::Display) {
        if !self.quiet {
            println!("{text}");
        }
    }

    fn child(&self, name: &str) -> Self {
        Self { out: self.out.join(name), quiet: true }
    }
}

pub fn model_params(cfg: &RunConfig) -> ModelParams {
    let m = &cfg.model;
    ModelParams {
        a: m.a,
        b: m.b,
        dispersal: m.dispersal,
        mu: m.mu,
        nu: m.nu,
        half_length: cfg.discretization.half_length,
        cutoff_bound: m.cutoff_bound,
    }
}

pub fn build_kernel(cfg: &RunConfig) -> Result<KernelSpec> {
    let k = &cfg.kernel;
    let spec = match k.family {
        KernelFamily::Gaussian => KernelSpec::gaussian(k.epsilon_or_default())?,
        KernelFamily::Laplace => KernelSpec::laplace(k.epsilon_or_default())?,
        KernelFamily::Tabulated => {
            let path = k.table.as_ref().context("kernel.table is required for tabulated kernels")?;
            let text = fs::read_to_string(path).with_context(|| format!("reading kernel table {}", path.display()))?;
            KernelSpec::tabulated(KernelTable::parse_csv(&text).with_context(|| format!("kernel table {}", path.display()))?)
        }
    };
    Ok(spec.with_normalization(k.normalization)?)
}

/// Rule used to cross-check kernel scalars; it is rescaled to the kernel's
/// truncation radius internally.
fn kernel_check_rule() -> QuadratureRule {
    QuadratureRule::new(0.0, 1.0, 40, 10).expect("valid rule")
}

fn bases(cfg: &RunConfig) -> Result<(BasisSet, BasisSet, QuadratureRule)> {
    let d = &cfg.discretization;
    let plant = BasisSet::plant(d.m, d.half_length)?.with_constant(d.include_constant)?;
    let water = BasisSet::water(d.m, d.half_length)?;
    let quad = QuadratureRule::on_domain(d.half_length, d.panels_or_default(), d.order_or_default())?;
    Ok((plant, water, quad))
}

pub fn assemble_operators(cfg: &RunConfig) -> Result<AssembledOperators> {
    let kernel = build_kernel(cfg)?;
    let (plant, water, quad) = bases(cfg)?;
    Ok(AssembledOperators::assemble(&kernel, &plant, &water, &quad, cfg.model.nu, KernelCheck::Require)?)
}

/// Scalars and provenance stored next to assembled matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct OperatorReport {
    pub theta: f64,
    pub K_norm_bound: f64,
    pub J_norm_bound: f64,
    pub Gamma: f64,
    pub b_raw_asymmetry: f64,
    pub m: usize,
    pub L: f64,
    pub include_constant: bool,
    pub nu: f64,
    pub panels: usize,
    pub order: usize,
    /// SHA-256 of the `[kernel]` section, to catch reuse with another kernel.
    pub kernel_hash: String,
}

const MATRIX_FILES: [&str; 5] = ["b_hat.csv", "j_hat.csv", "g_hat.csv", "m_hat.csv", "plant_gram.csv"];

fn kernel_hash(cfg: &RunConfig) -> String {
    crate::output::sha256_hex(&toml::to_string(&cfg.kernel).expect("kernel section serializes"))
}

fn operator_report(cfg: &RunConfig, ops: &AssembledOperators) -> OperatorReport {
    let d = &cfg.discretization;
    OperatorReport {
        theta: ops.theta,
        K_norm_bound: ops.k_norm_bound,
        J_norm_bound: ops.j_norm_bound,
        Gamma: ops.gamma,
        b_raw_asymmetry: ops.b_raw_asymmetry,
        m: d.m,
        L: d.half_length,
        include_constant: d.include_constant,
        nu: ops.nu,
        panels: d.panels_or_default(),
        order: d.order_or_default(),
        kernel_hash: kernel_hash(cfg),
    }
}

/// Rebuild operators from an `assemble` output directory, refusing matrices
/// assembled for a different discretization or kernel.
pub fn load_operators(cfg: &RunConfig, dir: &Path) -> Result<AssembledOperators> {
    let report_path = dir.join("operators.json");
    let text = fs::read_to_string(&report_path).with_context(|| format!("reading {}", report_path.display()))?;
    let stored: OperatorReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", report_path.display()))?;
    let d = &cfg.discretization;
    let expected = (d.m, d.half_length, d.include_constant, cfg.model.nu, d.panels_or_default(), d.order_or_default());
    let found = (stored.m, stored.L, stored.include_constant, stored.nu, stored.panels, stored.order);
    ensure!(
        expected == found,
        "cached operators in {} were assembled for (m, L, include_constant, nu, panels, order) = {found:?}, config has {expected:?}",
        dir.display()
    );
    ensure!(stored.kernel_hash == kernel_hash(cfg), "cached operators in {} use a different [kernel] section", dir.display());
    let [b, j, g, m, gram] = MATRIX_FILES.map(|f| read_matrix_csv(&dir.join(f)));
    let kernel = build_kernel(cfg)?;
    let (plant, water, _) = bases(cfg)?;
    Ok(AssembledOperators::from_parts(kernel, plant, water, b?, j?, g?, m?, gram?, cfg.model.nu)?)
}

pub fn build_system(cfg: &RunConfig, cached: Option<&Path>) -> Result<GalerkinSystem> {
    let ops = match cached {
        Some(dir) => load_operators(cfg, dir)?,
        None => assemble_operators(cfg)?,
    };
    let (_, _, quad) = bases(cfg)?;
    Ok(GalerkinSystem::new(ops, model_params(cfg), quad)?)
}

fn profile(p: &ProfileConfig) -> Result<Profile> {
    Ok(match p {
        ProfileConfig::Zero => Profile::Zero,
        ProfileConfig::GaussianBump { center, width, amplitude } => {
            Profile::GaussianBump { center: *center, width: *width, amplitude: *amplitude }
        }
        ProfileConfig::SingleMode { k, amplitude } => Profile::SingleMode { k: *k, amplitude: *amplitude },
        ProfileConfig::Csv { path } => {
            let text = fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
            Profile::Sampled(SampledProfile::parse_csv(&text).with_context(|| format!("profile {}", path.display()))?)
        }
    })
}

pub fn initial_shape(cfg: &RunConfig) -> Result<InitialCondition> {
    Ok(InitialCondition { u: profile(&cfg.initial.u)?, w: profile(&cfg.initial.w)? })
}

/// Initial data, constants and time stepping resolved for one system.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub initial: InitialCondition,
    pub state0: GalerkinState,
    pub norms: InitialNorms,
    pub constants: EstimateConstants,
    /// Factor applied to the configured profiles.
    pub scale: f64,
    /// End time of `simulate`: `T`, or the admissible horizon for `T = "auto"`.
    pub t_final: f64,
    pub dt: f64,
}

impl Prepared {
    /// End time of `verify`: the estimates only hold up to `t_effective`.
    pub fn t_verify(&self) -> f64 {
        self.t_final.min(self.constants.t_effective)
    }

    pub fn resolved(&self, t_end: f64) -> serde_json::Value {
        json!({
            "t_final": t_end,
            "dt": self.dt,
            "scale": self.scale,
            "t_max": self.constants.t_max,
            "initial_norms": self.norms,
        })
    }
}

pub fn prepare(cfg: &RunConfig, sys: &GalerkinSystem) -> Result<Prepared> {
    let shape = initial_shape(cfg)?;
    let t_requested = match cfg.time.horizon {
        Horizon::Auto => f64::INFINITY,
        Horizon::Fixed(t) => t,
    };
    let (initial, state0, norms, constants, scale) = match cfg.initial.scale {
        Scaling::Fraction(f) => {
            let s = small_data_setup(sys, &shape, t_requested, f)?;
            (s.initial, s.state0, s.norms, s.constants, s.scale)
        }
        Scaling::Off => {
            let state0 = sys.initial_state(&shape)?;
            let norms = InitialNorms::from_state(&state0, &sys.ops.plant_gram);
            let k = estimate_constants(&sys.params, t_requested, &norms, &OperatorBounds::from(&sys.ops));
            (shape, state0, norms, k, 1.0)
        }
    };
    let t_final = match cfg.time.horizon {
        Horizon::Auto => constants.t_effective,
        Horizon::Fixed(t) => t,
    };
    ensure!(t_final.is_finite() && t_final > 0.0, "time.T: no finite horizon could be derived (got {t_final})");
    let dt = cfg.time.dt.unwrap_or_else(|| sys.default_time_step());
    ensure!(dt <= t_final, "time.dt exceeds the run length ({dt} > {t_final})");
    Ok(Prepared { initial, state0, norms, constants, scale, t_final, dt })
}

fn write_trajectory_files(run: &mut RunDir, cfg: &RunConfig, traj: &Trajectory, sys: &GalerkinSystem) -> Result<()> {
    for f in &cfg.output.formats {
        match f {
            OutputFormat::Trajectory => write_trajectory_csv(&run.path("trajectory.csv"), traj)?,
            OutputFormat::Fields => write_fields_csv(&run.path("fields.csv"), traj, sys, cfg.output.grid_points)?,
            OutputFormat::Norms => write_norms_csv(&run.path("norms.csv"), traj, sys)?,
        }
    }
    Ok(())
}

pub fn validate_kernel(cfg: &RunConfig, ctx: &RunContext) -> Result<bool> {
    let mut run = RunDir::create(&ctx.out, "validate-kernel", cfg.to_toml())?;
    let report: KernelReport = kernel_report(&build_kernel(cfg)?, &kernel_check_rule())?;
    write_json(&run.path("kernel_report.json"), &report)?;
    ctx.say(serde_json::to_string_pretty(&report)?);
    run.finish(json!({}), Some(report.hypothesis_satisfied))?;
    Ok(report.hypothesis_satisfied)
}

pub fn assemble(cfg: &RunConfig, ctx: &RunContext) -> Result<bool> {
    let mut run = RunDir::create(&ctx.out, "assemble", cfg.to_toml())?;
    let ops = assemble_operators(cfg)?;
    let mats = [&ops.b_hat, &ops.j_hat, &ops.g_hat, &ops.m_hat, &ops.plant_gram];
    for (name, m) in MATRIX_FILES.iter().zip(mats) {
        write_matrix_csv(&run.path(name), m)?;
    }
    let report = operator_report(cfg, &ops);
    write_json(&run.path("operators.json"), &report)?;
    let ok = report.theta > 0.0;
    ctx.say(format!(
        "theta = {:.6e}, K_norm_bound = {:.6e}, J_norm_bound = {:.6e}, Gamma = {:.6e}",
        report.theta, report.K_norm_bound, report.J_norm_bound, report.Gamma
    ));
    run.finish(json!({ "panels": report.panels, "order": report.order }), Some(ok))?;
    Ok(ok)
}

pub fn simulate(cfg: &RunConfig, ctx: &RunContext, cached: Option<&Path>) -> Result<bool> {
    let mut run = RunDir::create(&ctx.out, "simulate", cfg.to_toml())?;
    let sys = build_system(cfg, cached)?;
    let prep = prepare(cfg, &sys)?;
    let traj = sys.integrate(&prep.state0, prep.t_final, prep.dt, cfg.time.record_stride, |_| {})?;
    write_trajectory_files(&mut run, cfg, &traj, &sys)?;
    ctx.say(format!(
        "integrated to t = {:.6e} in {} steps of {:.3e}; {} states recorded in {}",
        traj.last().t,
        traj.steps,
        traj.dt,
        traj.states.len(),
        run.dir.display()
    ));
    run.finish(prep.resolved(prep.t_final), None)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct VerifyOutput<'a> {
    #[serde(flatten)]
    report: &'a VerificationReport,
    constants: &'a EstimateConstants,
    initial_norms: &'a InitialNorms,
    scale: f64,
}

/// Simulate up to the horizon covered by the estimates and run every check.
pub fn verify(cfg: &RunConfig, ctx: &RunContext, cached: Option<&Path>) -> Result<bool> {
    let mut run = RunDir::create(&ctx.out, "verify", cfg.to_toml())?;
    let sys = build_system(cfg, cached)?;
    let prep = prepare(cfg, &sys)?;
    let t_end = prep.t_verify();
    if t_end < prep.t_final {
        ctx.say(format!("note: T = {} exceeds the admissible horizon; checking on [0, {t_end:.6e}]", prep.t_final));
    }
    let dt = prep.dt.min(t_end);
    let traj = sys.integrate(&prep.state0, t_end, dt, cfg.time.record_stride, |_| {})?;
    write_trajectory_files(&mut run, cfg, &traj, &sys)?;
    let report = verify_all(&traj, &sys, &prep.constants, &prep.norms, cfg.verify.probes)?;
    let out = VerifyOutput { report: &report, constants: &prep.constants, initial_norms: &prep.norms, scale: prep.scale };
    write_json(&run.path("report.json"), &out)?;
    ctx.say(&report);
    run.finish(prep.resolved(t_end), Some(report.passed))?;
    Ok(report.passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub m_coarse: usize,
    pub m_fine: usize,
    pub difference: f64,
    /// This difference over the previous one.
    pub ratio: Option<f64>,
}

/// Run the same initial data at every level in `levels` and tabulate
/// `‖u^{fine} − u^{coarse}‖_{L²(0,T;L²)}` between consecutive levels. Passes
/// when the differences decrease.
pub fn convergence(cfg: &RunConfig, ctx: &RunContext, levels: &[usize]) -> Result<bool> {
    ensure!(levels.len() >= 2 && levels.windows(2).all(|w| w[0] < w[1]), "need at least two increasing levels, got {levels:?}");
    let mut run = RunDir::create(&ctx.out, "convergence", cfg.to_toml())?;
    // data and horizon are fixed once, on the configured level
    let base = build_system(cfg, None)?;
    let prep = prepare(cfg, &base)?;
    let systems = levels
        .par_iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.discretization.m = m;
            build_system(&c, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let dt = match cfg.time.dt {
        Some(dt) => dt,
        None => systems.iter().map(GalerkinSystem::default_time_step).fold(f64::INFINITY, f64::min),
    }
    .min(prep.t_final);
    let trajs = systems
        .par_iter()
        .map(|sys| {
            let s0 = sys.initial_state(&prep.initial)?;
            Ok(sys.integrate(&s0, prep.t_final, dt, 1, |_| {})?)
        })
        .collect::<Result<Vec<Trajectory>>>()?;

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for i in 1..levels.len() {
        let difference = level_difference(&trajs[i], &trajs[i - 1])?;
        let ratio = rows.last().map(|r| difference / r.difference);
        rows.push(ConvergenceRow { m_coarse: levels[i - 1], m_fine: levels[i], difference, ratio });
    }
    let passed = rows.windows(2).all(|w| w[1].difference < w[0].difference);

    let mut csv = String::from("m_coarse,m_fine,difference,ratio\n");
    for r in &rows {
        let ratio = r.ratio.map(crate::output::num).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", r.m_coarse, r.m_fine, crate::output::num(r.difference), ratio));
    }
    fs::write(run.path("convergence.csv"), csv).context("writing convergence.csv")?;
    ctx.say(format!("{:>8} {:>8} {:>16} {:>10}", "m", "2m", "L2(0,T;L2) diff", "ratio"));
    for r in &rows {
        let ratio = r.ratio.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        ctx.say(format!("{:>8} {:>8} {:>16.6e} {:>10}", r.m_coarse, r.m_fine, r.difference, ratio));
    }
    ctx.say(format!("differences decreasing: {}", if passed { "PASS" } else { "FAIL" }));
    let resolved = json!({ "levels": levels, "t_final": prep.t_final, "dt": dt, "scale": prep.scale, "rows": rows });
    run.finish(resolved, Some(passed))?;
    Ok(passed)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub directory: String,
    pub values: serde_json::Map<String, serde_json::Value>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `verify` for every cell of the `[sweep]` grid, each in its own
/// subdirectory with its own config and manifest. Cells share nothing, so
/// the results do not depend on the execution order.
pub fn sweep(cfg: &RunConfig, ctx: &RunContext) -> Result<bool> {
    let grid = cfg.sweep.cells();
    if cfg.sweep.axes().is_empty() {
        bail!("sweep: the [sweep] section lists no parameters");
    }
    let mut run = RunDir::create(&ctx.out, "sweep", cfg.to_toml())?;
    let width = (grid.len().saturating_sub(1)).to_string().len().max(3);
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .enumerate()
        .map(|(i, values)| {
            let name = format!("cell_{i:0width$}");
            let mut c = cfg.clone();
            c.sweep = Default::default();
            for &(key, v) in values {
                key.apply(&mut c, v);
            }
            let outcome = c.validate().map_err(anyhow::Error::from).and_then(|_| verify(&c, &ctx.child(&name), None));
            SweepCell {
                directory: name,
                values: values.iter().map(|&(k, v): &(SweepKey, f64)| (k.name().to_string(), json!(v))).collect(),
                passed: matches!(outcome, Ok(true)),
                error: outcome.err().map(|e| format!("{e:#}")),
            }
        })
        .collect();
    let passed = cells.iter().all(|c| c.passed);
    write_json(&run.path("sweep.json"), &cells)?;
    for c in &cells {
        let values: Vec<String> = c.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = if c.passed { "pass" } else { "FAIL" };
        let err = c.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default();
        ctx.say(format!("{}  {:<40} {status}{err}", c.directory, values.join(" ")));
    }
    ctx.say(format!("overall: {}", if passed { "PASS" } else { "FAIL" }));
    run.finish(json!({ "cells": cells.len() }), Some(passed))?;
    Ok(passed)
}

//! Regularized outer iterations: Tikhonov steps, discrepancy-principle
//! selection of the regularization weight, and the full-data
//! Levenberg-Marquardt driver.
//!
//! Each outer iteration linearizes the measurement map at the current
//! contrast iterate `φ_i`, forms the stacked residual `d = f − A(φ_i)`, and
//! updates
//!
//! ```text
//! φ_{i+1} = φ_i + (α_i I + A′ᴴ R⁻¹ A′)⁻¹ A′ᴴ R⁻¹ d,
//! ```
//!
//! with the data weight `R = r² I`. The per-iteration weight `α_i` is chosen
//! by the discrepancy principle: bisection on `log α` until the linearized
//! residual equals the fixed fraction `ρ` of the nonlinear residual,
//!
//! ```text
//! ‖d − A′ Δφ(α)‖_{R⁻¹} = ρ ‖d‖_{R⁻¹},
//! ```
//!
//! which for a scalar problem with unit operator reduces to the closed form
//! `α = ρ/(1−ρ)`. The Gram matrix of the normal equations is assembled once
//! per outer iteration and shared across all bisection evaluations.
//!
//! The sequential reconstruction drivers (Kalman-filter LM and the extended
//! Kalman filter) share this module's outer-loop bookkeeping: iteration
//! records, stagnation and blow-up detection, and the report format.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kalman::{FullLinearization, MeasurementModel, StepTrace};
use crate::linalg::hermitian_solve_vec;
use crate::{Error, Result, C64};

// ---- noise weight ------------------------------------------------------------

/// The measurement covariance `R = r² I`: every far-field sample carries the
/// same independent noise level `r`.
#[derive(Debug, Clone, Copy)]
pub struct NoiseWeight {
    r: f64,
}

impl NoiseWeight {
    /// Creates the weight with standard deviation scale `r > 0`.
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain(format!("noise weight must be positive, got {r}")));
        }
        Ok(NoiseWeight { r })
    }

    /// The scale `r`.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// The variance `r²` on the diagonal of `R`.
    pub fn variance(&self) -> f64 {
        self.r * self.r
    }

    /// The weighted norm `‖v‖_{R⁻¹} = ‖v‖ / r`.
    pub fn weighted_norm(&self, v: &DVector<C64>) -> f64 {
        v.norm() / self.r
    }
}

// ---- normal equations ---------------------------------------------------------

/// The Tikhonov normal equations `(α I + A′ᴴ R⁻¹ A′) Δ = A′ᴴ R⁻¹ d` for one
/// linearization point, with the Gram matrix cached so that repeated solves
/// at different `α` (as in the discrepancy bisection) cost one Cholesky each
/// and no re-assembly.
pub struct NormalEquations {
    /// `A′ᴴ A′ / r²`.
    gram: DMatrix<C64>,
    /// `A′ᴴ d / r²`.
    rhs: DVector<C64>,
    /// The stacked operator, kept for discrepancy evaluation.
    operator: DMatrix<C64>,
    /// The stacked residual `d`.
    data: DVector<C64>,
    weight: NoiseWeight,
}

impl NormalEquations {
    /// Builds the cache from the stacked operator (`N·J × cells`) and stacked
    /// residual (`N·J`).
    pub fn new(
        operator: DMatrix<C64>,
        data: DVector<C64>,
        weight: NoiseWeight,
    ) -> Result<Self> {
        if operator.nrows() != data.len() {
            return Err(Error::Dimension(format!(
                "operator has {} rows but residual has {} entries",
                operator.nrows(),
                data.len()
            )));
        }
        let adjoint = operator.adjoint();
        let inv_var = 1.0 / weight.variance();
        let gram = (&adjoint * &operator).scale(inv_var);
        let rhs = (&adjoint * &data).scale(inv_var);
        Ok(NormalEquations { gram, rhs, operator, data, weight })
    }

    /// Number of unknowns.
    pub fn state_dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Solves for the update `Δφ(α)`.
    pub fn solve(&self, alpha: f64) -> Result<DVector<C64>> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!(
                "regularization weight must be positive, got {alpha}"
            )));
        }
        let n = self.state_dim();
        let mut a = self.gram.clone();
        for i in 0..n {
            a[(i, i)] += C64::new(alpha, 0.0);
        }
        hermitian_solve_vec(&a, &self.rhs)
    }

    /// The weighted linearized residual `‖d − A′ Δ‖_{R⁻¹}`.
    pub fn weighted_discrepancy(&self, delta: &DVector<C64>) -> f64 {
        let residual = &self.data - &self.operator * delta;
        self.weight.weighted_norm(&residual)
    }

    /// The weighted residual norm `‖d‖_{R⁻¹}`.
    pub fn weighted_data_norm(&self) -> f64 {
        self.weight.weighted_norm(&self.data)
    }
}

/// One Tikhonov update `Δφ(α)` from a prepared [`NormalEquations`] cache.
pub fn tikhonov_step(equations: &NormalEquations, alpha: f64) -> Result<DVector<C64>> {
    equations.solve(alpha)
}

// ---- discrepancy principle -----------------------------------------------------

/// Search parameters for [`morozov_alpha`] and the outer loops.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LmConfig {
    /// Target fraction `ρ` of the nonlinear residual.
    pub rho: f64,
    /// Lower end of the `α` bracket.
    pub alpha_min: f64,
    /// Upper end of the `α` bracket.
    pub alpha_max: f64,
    /// Relative tolerance on the discrepancy equation.
    pub bisect_rel_tol: f64,
    /// Maximum bisection steps.
    pub bisect_max_iter: usize,
    /// Number of outer iterations.
    pub max_outer: usize,
    /// Stop when the residual norm changes by less than this relative amount.
    pub stagnation_tol: f64,
    /// Declare blow-up when the error exceeds this multiple of the initial
    /// error.
    pub blowup_factor: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            rho: 0.4,
            alpha_min: 1e-8,
            alpha_max: 1e8,
            bisect_rel_tol: 1e-3,
            bisect_max_iter: 60,
            max_outer: 10,
            stagnation_tol: 1e-6,
            blowup_factor: 1e3,
        }
    }
}

/// Outcome of a discrepancy-principle search.
#[derive(Debug, Clone, Copy)]
pub struct MorozovResult {
    /// Selected weight.
    pub alpha: f64,
    /// Whether the search ran out of bracket or iterations without meeting
    /// the tolerance; the returned `alpha` is then the nearest admissible
    /// value rather than a root.
    pub clamped: bool,
    /// Weighted linearized residual at the selected weight.
    pub discrepancy: f64,
    /// The target `ρ ‖d‖_{R⁻¹}`.
    pub target: f64,
}

/// Selects `α` so that the linearized residual is `ρ` times the nonlinear
/// one, by bisection on `log α`. The discrepancy is a nondecreasing function
/// of `α`, so a sign change over the bracket pins the root; when the bracket
/// does not contain one the nearest endpoint is returned with
/// `clamped = true`.
pub fn morozov_alpha(equations: &NormalEquations, config: &LmConfig) -> Result<MorozovResult> {
    if !(config.rho > 0.0 && config.rho < 1.0) {
        return Err(Error::Domain(format!(
            "discrepancy fraction must lie in (0, 1), got {}",
            config.rho
        )));
    }
    let data_norm = equations.weighted_data_norm();
    let target = config.rho * data_norm;
    if target <= f64::MIN_POSITIVE {
        // Nothing to fit; the largest weight gives the smallest step.
        return Ok(MorozovResult {
            alpha: config.alpha_max,
            clamped: true,
            discrepancy: 0.0,
            target,
        });
    }
    let eval = |alpha: f64| -> Result<f64> {
        let delta = equations.solve(alpha)?;
        Ok(equations.weighted_discrepancy(&delta))
    };
    let tol = config.bisect_rel_tol * target;
    let mut lo = config.alpha_min;
    let mut hi = config.alpha_max;
    let g_lo = eval(lo)? - target;
    if g_lo >= 0.0 {
        // Even the weakest regularization cannot push the residual below the
        // target: the least-squares floor sits above it.
        return Ok(MorozovResult {
            alpha: lo,
            clamped: g_lo > tol,
            discrepancy: g_lo + target,
            target,
        });
    }
    let g_hi = eval(hi)? - target;
    if g_hi <= 0.0 {
        return Ok(MorozovResult {
            alpha: hi,
            clamped: -g_hi > tol,
            discrepancy: g_hi + target,
            target,
        });
    }
    let mut alpha = (lo * hi).sqrt();
    let mut discrepancy = 0.0;
    for _ in 0..config.bisect_max_iter {
        alpha = (lo * hi).sqrt();
        discrepancy = eval(alpha)?;
        let g = discrepancy - target;
        if g.abs() <= 0.5 * tol {
            return Ok(MorozovResult { alpha, clamped: false, discrepancy, target });
        }
        if g < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    Ok(MorozovResult {
        alpha,
        clamped: (discrepancy - target).abs() > tol,
        discrepancy,
        target,
    })
}

// ---- run reports ----------------------------------------------------------------

/// Which reconstruction algorithm produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Flm,
    Kfl,
    Ekf,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algorithm::Flm => "flm",
            Algorithm::Kfl => "kfl",
            Algorithm::Ekf => "ekf",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flm" => Ok(Algorithm::Flm),
            "kfl" => Ok(Algorithm::Kfl),
            "ekf" => Ok(Algorithm::Ekf),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Per-outer-iteration summary of a reconstruction run. Record 0 describes
/// the initial iterate.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// Outer iteration index; 0 is the initial state.
    pub iter: usize,
    /// Regularization weight used to produce this iterate (`None` for the
    /// initial record and for algorithms that select no per-iteration
    /// weight).
    pub alpha: Option<f64>,
    /// Whether the weight search was clamped at a bracket end.
    pub alpha_clamped: bool,
    /// Residual norm `‖f − A(φ)‖` at this iterate. For the extended Kalman
    /// filter this is the stacked innovation norm gathered during the sweep.
    pub residual_norm: f64,
    /// Squared error `‖q_true − φ‖²` against the supplied truth, when known.
    pub mse: Option<f64>,
    /// Wall-clock seconds spent producing this iterate (0 for the initial
    /// record).
    pub seconds: f64,
}

/// Full outcome of a reconstruction run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    /// Per-measurement traces of the sequential algorithms; empty for the
    /// full-data method.
    pub traces: Vec<StepTrace>,
    /// Every outer iterate `φ_0, φ_1, …`, aligned with `records`.
    pub iterates: Vec<DVector<C64>>,
    /// The final contrast iterate.
    pub final_state: DVector<C64>,
    /// Error exceeded `blowup_factor` times the initial error, or the
    /// iterate became non-finite; the run stopped early.
    pub blew_up: bool,
    /// The residual norm stopped changing; the run stopped early.
    pub stagnated: bool,
}

impl RunReport {
    /// Squared-error history (for runs with truth supplied).
    pub fn mse_history(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.mse).collect()
    }

    /// The last iteration index reached.
    pub fn last_iter(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}

// ---- shared outer-loop driver ------------------------------------------------------

fn stack_columns(columns: &[DVector<C64>]) -> DVector<C64> {
    let total: usize = columns.iter().map(|c| c.len()).sum();
    let mut out = DVector::zeros(total);
    let mut offset = 0;
    for c in columns {
        out.rows_mut(offset, c.len()).copy_from(c);
        offset += c.len();
    }
    out
}

fn stack_blocks(blocks: &[DMatrix<C64>]) -> DMatrix<C64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        out.view_mut((offset, 0), (b.nrows(), cols)).copy_from(b);
        offset += b.nrows();
    }
    out
}

fn is_finite_vec(v: &DVector<C64>) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn validate_data<M: MeasurementModel>(
    model: &M,
    data: &[DVector<C64>],
) -> Result<()> {
    if data.len() != model.measurement_count() {
        return Err(Error::Dimension(format!(
            "expected {} measurement columns, got {}",
            model.measurement_count(),
            data.len()
        )));
    }
    if let Some(bad) = data.iter().find(|c| c.len() != model.observation_dim()) {
        return Err(Error::Dimension(format!(
            "measurement column has {} entries, expected {}",
            bad.len(),
            model.observation_dim()
        )));
    }
    Ok(())
}

/// How one outer iteration turns a linearization plus a selected weight into
/// the next iterate. Implemented by the full-data step and by the
/// Kalman-filter sweep.
pub(crate) trait OuterStep {
    fn step(
        &mut self,
        lin: &FullLinearization,
        equations: &NormalEquations,
        phi: &DVector<C64>,
        alpha: f64,
        outer: usize,
    ) -> Result<(DVector<C64>, Vec<StepTrace>)>;
}

/// Shared driver for the two one-linearization-per-outer algorithms. Handles
/// weight selection (schedule or discrepancy principle), iteration records,
/// stagnation, and blow-up.
///
/// When the discrepancy target drops below the attainable least-squares
/// floor (the residual has reached the noise level), the search clamps at
/// the lower bracket end; stepping at that weight would be essentially
/// unregularized and can make the scattering operator resonant. The driver
/// instead freezes the weight at its last selected value (or the upper
/// bracket end when this happens on the first iteration), keeping late
/// iterations bounded; such records carry the clamped flag.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lm_outer_driver<M: MeasurementModel, S: OuterStep>(
    algorithm: Algorithm,
    model: &M,
    data: &[DVector<C64>],
    initial: &DVector<C64>,
    truth: Option<&DVector<C64>>,
    weight: NoiseWeight,
    config: &LmConfig,
    alpha_schedule: Option<&[f64]>,
    step: &mut S,
) -> Result<RunReport> {
    validate_data(model, data)?;
    if initial.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, expected {}",
            initial.len(),
            model.state_dim()
        )));
    }
    if let Some(schedule) = alpha_schedule {
        if schedule.len() < config.max_outer {
            return Err(Error::Config(format!(
                "weight schedule has {} entries but {} outer iterations requested",
                schedule.len(),
                config.max_outer
            )));
        }
    }
    let stacked_data = stack_columns(data);
    let mut phi = initial.clone();
    let mse_of = |v: &DVector<C64>| truth.map(|t| (t - v).norm_squared());
    let initial_mse = mse_of(&phi);

    let mut lin = model.linearize_all(&phi)?;
    let mut residual = &stacked_data - stack_columns(&lin.values);
    let mut records = vec![IterationRecord {
        iter: 0,
        alpha: None,
        alpha_clamped: false,
        residual_norm: residual.norm(),
        mse: initial_mse,
        seconds: 0.0,
    }];
    let mut traces = Vec::new();
    let mut iterates = vec![phi.clone()];
    let mut blew_up = false;
    let mut stagnated = false;

    let mut last_alpha: Option<f64> = None;
    for i in 1..=config.max_outer {
        let started = Instant::now();
        let equations =
            NormalEquations::new(stack_blocks(&lin.blocks), residual.clone(), weight)?;
        let (alpha, clamped) = match alpha_schedule {
            Some(schedule) => (schedule[i - 1], false),
            None => {
                let selected = morozov_alpha(&equations, config)?;
                if selected.clamped && selected.alpha <= config.alpha_min {
                    (last_alpha.unwrap_or(config.alpha_max), true)
                } else {
                    (selected.alpha, selected.clamped)
                }
            }
        };
        last_alpha = Some(alpha);
        let (next_phi, step_traces) = step.step(&lin, &equations, &phi, alpha, i - 1)?;
        phi = next_phi;
        traces.extend(step_traces);

        // The next linearization doubles as the residual evaluation; the
        // final iteration only needs the forward map.
        let prev_norm = residual.norm();
        if i < config.max_outer {
            lin = model.linearize_all(&phi)?;
            residual = &stacked_data - stack_columns(&lin.values);
        } else {
            let values = model.forward(&phi)?;
            residual = &stacked_data - stack_columns(&values);
        }
        let mse = mse_of(&phi);
        records.push(IterationRecord {
            iter: i,
            alpha: Some(alpha),
            alpha_clamped: clamped,
            residual_norm: residual.norm(),
            mse,
            seconds: started.elapsed().as_secs_f64(),
        });
        iterates.push(phi.clone());

        if !is_finite_vec(&phi) {
            blew_up = true;
            break;
        }
        if let (Some(e0), Some(ei)) = (initial_mse, mse) {
            if e0 > 0.0 && (ei > config.blowup_factor * e0 || !ei.is_finite()) {
                blew_up = true;
                break;
            }
        }
        if prev_norm > 0.0
            && (residual.norm() - prev_norm).abs() / prev_norm < config.stagnation_tol
        {
            stagnated = true;
            break;
        }
    }

    Ok(RunReport { algorithm, records, traces, iterates, final_state: phi, blew_up, stagnated })
}

// ---- full-data Levenberg-Marquardt ----------------------------------------------------

struct FullDataStep;

impl OuterStep for FullDataStep {
    fn step(
        &mut self,
        _lin: &FullLinearization,
        equations: &NormalEquations,
        phi: &DVector<C64>,
        alpha: f64,
        _outer: usize,
    ) -> Result<(DVector<C64>, Vec<StepTrace>)> {
        let delta = equations.solve(alpha)?;
        Ok((phi + delta, Vec::new()))
    }
}

/// Full-data Levenberg-Marquardt: all measurements stacked into one Tikhonov
/// update per outer iteration, with the weight chosen by the discrepancy
/// principle unless an explicit schedule is supplied.
pub fn flm_run<M: MeasurementModel>(
    model: &M,
    data: &[DVector<C64>],
    initial: &DVector<C64>,
    truth: Option<&DVector<C64>>,
    weight: NoiseWeight,
    config: &LmConfig,
    alpha_schedule: Option<&[f64]>,
) -> Result<RunReport> {
    lm_outer_driver(
        Algorithm::Flm,
        model,
        data,
        initial,
        truth,
        weight,
        config,
        alpha_schedule,
        &mut FullDataStep,
    )
}

// ---- tests -------------------------------------------------------------------------

//! Sequential (Kalman-filter) processing of the far-field measurements.
//!
//! Both algorithms here maintain a state estimate `φ` (the contrast, one
//! complex value per coarse cell) and a Hermitian weight matrix `B`, and
//! absorb the `N` measurements one at a time. For measurement `n` with
//! linearized operator `A′_n` and innovation `v_n`:
//!
//! ```text
//! K_n = B A′_nᴴ (R + A′_n B A′_nᴴ)⁻¹,
//! φ  ← φ + K_n v_n,
//! B  ← (I − K_n A′_n) B = B − K_n (B A′_nᴴ)ᴴ,
//! ```
//!
//! which is algebraically the recursive solution of the stacked damped
//! least-squares problem. The two algorithms differ only in where they
//! linearize:
//!
//! * **KFL** (Kalman-filter Levenberg-Marquardt) freezes the linearization at
//!   the sweep's starting point `φ_{i,0}` and resets `B = I/α_i` every outer
//!   iteration, with `α_i` chosen by the discrepancy principle on the stacked
//!   system. Its innovation corrects for the drift of the state within the
//!   sweep, `v_n = f_n − A_n(φ_{i,0}) − A′_n (φ_{i,n−1} − φ_{i,0})`, and one
//!   full sweep reproduces the full-data Levenberg-Marquardt update exactly.
//! * **EKF** (extended Kalman filter) relinearizes at the current state for
//!   every measurement, `v_n = f_n − A_n(φ_{i,n−1})`, and carries `B` across
//!   outer iterations, initializing `B = I/α₀` only once.
//!
//! The covariance update keeps `B` Hermitian positive semidefinite and never
//! increases its spectral norm; the update is followed by an explicit
//! re-Hermitization to stop roundoff from accumulating asymmetry over the
//! thousands of updates in a run.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{hermitian_part, hermitian_solve};
use crate::regularize::{
    lm_outer_driver, validate_data, Algorithm, IterationRecord, LmConfig, NoiseWeight,
    NormalEquations, OuterStep, RunReport,
};
use crate::{Error, Result, C64};

// ---- measurement model abstraction ---------------------------------------------

/// A linearization of every measurement at one shared base point.
#[derive(Debug, Clone)]
pub struct FullLinearization {
    /// `A_n(φ)` for each measurement.
    pub values: Vec<DVector<C64>>,
    /// `A′_n(φ)` for each measurement (`J × cells` each).
    pub blocks: Vec<DMatrix<C64>>,
}

/// A nonlinear measurement map `φ ↦ (A_1(φ), …, A_N(φ))` with per-measurement
/// linearizations. The scattering model implements this; a dense linear model
/// is provided for algorithm tests.
pub trait MeasurementModel {
    /// Number of measurements `N`.
    fn measurement_count(&self) -> usize;

    /// Samples per measurement `J`.
    fn observation_dim(&self) -> usize;

    /// Number of unknowns.
    fn state_dim(&self) -> usize;

    /// Evaluates every measurement at `state`, without derivatives.
    fn forward(&self, state: &DVector<C64>) -> Result<Vec<DVector<C64>>>;

    /// Values and derivative blocks of every measurement at `state`.
    fn linearize_all(&self, state: &DVector<C64>) -> Result<FullLinearization>;

    /// Value and derivative block of measurement `n` at `state`.
    fn linearize_one(&self, state: &DVector<C64>, n: usize)
        -> Result<(DVector<C64>, DMatrix<C64>)>;
}

// ---- filter state ---------------------------------------------------------------

/// The pair `(φ, B)` carried by a sequential sweep.
#[derive(Debug, Clone)]
pub struct FilterState {
    /// Current contrast estimate.
    pub phi: DVector<C64>,
    /// Hermitian positive-semidefinite weight matrix.
    pub b: DMatrix<C64>,
}

impl FilterState {
    /// Initial state with `B = I/α₀`.
    pub fn initial(phi: DVector<C64>, alpha0: f64) -> Result<Self> {
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(Error::Domain(format!(
                "initial weight must be positive, got {alpha0}"
            )));
        }
        let dim = phi.len();
        let b = DMatrix::identity(dim, dim).scale(1.0 / alpha0);
        Ok(FilterState { phi, b })
    }
}

/// One inner (per-measurement) step of a sequential sweep, for trace output.
#[derive(Debug, Clone, Copy)]
pub struct StepTrace {
    /// Outer iteration index (0-based).
    pub outer: usize,
    /// Measurement index within the sweep.
    pub inner: usize,
    /// Norm of the innovation consumed by this step.
    pub innovation_norm: f64,
    /// Frobenius norm of `B` after the step.
    pub b_norm: f64,
    /// Squared error against the truth after the step, when known.
    pub mse: Option<f64>,
}

// ---- gain and covariance update ---------------------------------------------------

/// Kalman gain for one measurement block: returns `(K, W)` with
/// `W = B A′ᴴ` and `K = W (R + A′ W)⁻¹`. The innovation covariance is
/// re-Hermitized before the solve.
pub fn kalman_gain(
    b: &DMatrix<C64>,
    block: &DMatrix<C64>,
    weight: NoiseWeight,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    if b.nrows() != b.ncols() || b.nrows() != block.ncols() {
        return Err(Error::Dimension(format!(
            "gain dimensions: B is {}x{}, block is {}x{}",
            b.nrows(),
            b.ncols(),
            block.nrows(),
            block.ncols()
        )));
    }
    let w = b * block.adjoint();
    let j = block.nrows();
    let mut s = block * &w;
    for i in 0..j {
        s[(i, i)] += C64::new(weight.variance(), 0.0);
    }
    let s = hermitian_part(&s);
    let x = hermitian_solve(&s, &w.adjoint())?;
    Ok((x.adjoint(), w))
}

/// Covariance update `B ← B − K Wᴴ`, re-Hermitized. With `K` the exact gain
/// this equals `(I − K A′) B`, stays positive semidefinite, and cannot grow
/// in spectral norm.
pub fn covariance_update(
    b: &DMatrix<C64>,
    gain: &DMatrix<C64>,
    w: &DMatrix<C64>,
) -> DMatrix<C64> {
    hermitian_part(&(b - gain * w.adjoint()))
}

// ---- sweeps ------------------------------------------------------------------------

/// Result of one full pass over the measurements.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// State and weight after the last measurement.
    pub state: FilterState,
    /// Norm of all innovations stacked, `sqrt(Σ_n ‖v_n‖²)`.
    pub innovation_norm: f64,
    /// Per-measurement traces.
    pub traces: Vec<StepTrace>,
}

fn mse_against(truth: Option<&DVector<C64>>, phi: &DVector<C64>) -> Option<f64> {
    truth.map(|t| (t - phi).norm_squared())
}

/// One Kalman-filter LM sweep: fixed linearization `lin` taken at `base`,
/// starting state `φ = base`, starting weight `b0`. Processes measurements in
/// order and returns the final state.
pub fn kfl_sweep(
    lin: &FullLinearization,
    base: &DVector<C64>,
    data: &[DVector<C64>],
    b0: DMatrix<C64>,
    weight: NoiseWeight,
    truth: Option<&DVector<C64>>,
    outer: usize,
) -> Result<SweepOutcome> {
    if lin.blocks.len() != data.len() || lin.values.len() != data.len() {
        return Err(Error::Dimension(format!(
            "sweep: {} blocks, {} values, {} data columns",
            lin.blocks.len(),
            lin.values.len(),
            data.len()
        )));
    }
    let mut state = FilterState { phi: base.clone(), b: b0 };
    let mut innovation_sq = 0.0;
    let mut traces = Vec::with_capacity(data.len());
    for (n, column) in data.iter().enumerate() {
        let block = &lin.blocks[n];
        // Predicted measurement under the frozen linearization at the
        // current (drifted) state.
        let predicted = &lin.values[n] + block * (&state.phi - base);
        let innovation = column - predicted;
        let (gain, w) = kalman_gain(&state.b, block, weight)?;
        state.phi += &gain * &innovation;
        state.b = covariance_update(&state.b, &gain, &w);
        innovation_sq += innovation.norm_squared();
        traces.push(StepTrace {
            outer,
            inner: n,
            innovation_norm: innovation.norm(),
            b_norm: state.b.norm(),
            mse: mse_against(truth, &state.phi),
        });
    }
    Ok(SweepOutcome { state, innovation_norm: innovation_sq.sqrt(), traces })
}

/// One extended-Kalman-filter sweep: relinearizes the measurement map at the
/// current state before every measurement and carries `B` in and out.
pub fn ekf_sweep<M: MeasurementModel>(
    model: &M,
    data: &[DVector<C64>],
    mut state: FilterState,
    weight: NoiseWeight,
    truth: Option<&DVector<C64>>,
    outer: usize,
) -> Result<SweepOutcome> {
    validate_data(model, data)?;
    let mut innovation_sq = 0.0;
    let mut traces = Vec::with_capacity(data.len());
    for (n, column) in data.iter().enumerate() {
        let (value, block) = model.linearize_one(&state.phi, n)?;
        let innovation = column - value;
        let (gain, w) = kalman_gain(&state.b, &block, weight)?;
        state.phi += &gain * &innovation;
        state.b = covariance_update(&state.b, &gain, &w);
        innovation_sq += innovation.norm_squared();
        traces.push(StepTrace {
            outer,
            inner: n,
            innovation_norm: innovation.norm(),
            b_norm: state.b.norm(),
            mse: mse_against(truth, &state.phi),
        });
    }
    Ok(SweepOutcome { state, innovation_norm: innovation_sq.sqrt(), traces })
}

// ---- KFL outer loop -----------------------------------------------------------------

struct KflStep<'a> {
    data: &'a [DVector<C64>],
    weight: NoiseWeight,
    truth: Option<&'a DVector<C64>>,
}

impl OuterStep for KflStep<'_> {
    fn step(
        &mut self,
        lin: &FullLinearization,
        _equations: &NormalEquations,
        phi: &DVector<C64>,
        alpha: f64,
        outer: usize,
    ) -> Result<(DVector<C64>, Vec<StepTrace>)> {
        let dim = phi.len();
        let b0 = DMatrix::identity(dim, dim).scale(1.0 / alpha);
        let sweep = kfl_sweep(lin, phi, self.data, b0, self.weight, self.truth, outer)?;
        Ok((sweep.state.phi, sweep.traces))
    }
}

/// Kalman-filter Levenberg-Marquardt: per outer iteration, one linearization,
/// a discrepancy-principle weight `α_i` (or an explicit schedule), a reset
/// `B = I/α_i`, and one sequential sweep over all measurements. A full sweep
/// equals the full-data update at the same weight.
pub fn kfl_run<M: MeasurementModel>(
    model: &M,
    data: &[DVector<C64>],
    initial: &DVector<C64>,
    truth: Option<&DVector<C64>>,
    weight: NoiseWeight,
    config: &LmConfig,
    alpha_schedule: Option<&[f64]>,
) -> Result<RunReport> {
    let mut step = KflStep { data, weight, truth };
    lm_outer_driver(
        Algorithm::Kfl,
        model,
        data,
        initial,
        truth,
        weight,
        config,
        alpha_schedule,
        &mut step,
    )
}

// ---- EKF outer loop -----------------------------------------------------------------

/// Parameters of the extended-Kalman-filter run.
#[derive(Debug, Clone, Copy)]
pub struct EkfConfig {
    /// Initial weight: `B₀ = I/α₀`, set once and then carried.
    pub alpha0: f64,
    /// Number of outer iterations (full sweeps).
    pub max_outer: usize,
    /// Declare blow-up when the error exceeds this multiple of the initial
    /// error.
    pub blowup_factor: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig { alpha0: 50.0, max_outer: 10, blowup_factor: 1e3 }
    }
}

/// Iterative extended Kalman filter: sweeps the measurements repeatedly,
/// relinearizing at every measurement and carrying the weight matrix across
/// sweeps. There is no per-iteration weight selection and no stagnation stop;
/// the run goes to `max_outer` unless the blow-up detector fires.
pub fn ekf_run<M: MeasurementModel>(
    model: &M,
    data: &[DVector<C64>],
    initial: &DVector<C64>,
    truth: Option<&DVector<C64>>,
    weight: NoiseWeight,
    config: &EkfConfig,
) -> Result<RunReport> {
    validate_data(model, data)?;
    if initial.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, expected {}",
            initial.len(),
            model.state_dim()
        )));
    }
    let mut state = FilterState::initial(initial.clone(), config.alpha0)?;
    let initial_mse = mse_against(truth, initial);
    let initial_values = model.forward(initial)?;
    let initial_residual: f64 = data
        .iter()
        .zip(&initial_values)
        .map(|(f, a)| (f - a).norm_squared())
        .sum::<f64>()
        .sqrt();
    let mut records = vec![IterationRecord {
        iter: 0,
        alpha: None,
        alpha_clamped: false,
        residual_norm: initial_residual,
        mse: initial_mse,
        seconds: 0.0,
    }];
    let mut traces = Vec::new();
    let mut iterates = vec![initial.clone()];
    let mut blew_up = false;

    for i in 1..=config.max_outer {
        let started = Instant::now();
        let sweep = ekf_sweep(model, data, state, weight, truth, i - 1)?;
        state = sweep.state;
        traces.extend(sweep.traces);
        let mse = mse_against(truth, &state.phi);
        records.push(IterationRecord {
            iter: i,
            alpha: None,
            alpha_clamped: false,
            residual_norm: sweep.innovation_norm,
            mse,
            seconds: started.elapsed().as_secs_f64(),
        });
        iterates.push(state.phi.clone());
        let finite = state.phi.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            blew_up = true;
            break;
        }
        if let (Some(e0), Some(ei)) = (initial_mse, mse) {
            if e0 > 0.0 && (ei > config.blowup_factor * e0 || !ei.is_finite()) {
                blew_up = true;
                break;
            }
        }
    }

    Ok(RunReport {
        algorithm: Algorithm::Ekf,
        records,
        traces,
        iterates,
        final_state: state.phi,
        blew_up,
        stagnated: false,
    })
}

// ---- dense linear model for algorithm tests --------------------------------------------

/// A linear measurement map `A_n(φ) = M_n φ + c_n`, used to exercise the
/// reconstruction drivers against closed-form least-squares solutions.
pub struct LinearModel {
    matrices: Vec<DMatrix<C64>>,
    offsets: Vec<DVector<C64>>,
}

impl LinearModel {
    /// Builds the model; all matrices must share their shape. Offsets default
    /// to zero.
    pub fn new(
        matrices: Vec<DMatrix<C64>>,
        offsets: Option<Vec<DVector<C64>>>,
    ) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Dimension("linear model needs at least one block".into()))?;
        let (rows, cols) = (first.nrows(), first.ncols());
        if matrices.iter().any(|m| m.nrows() != rows || m.ncols() != cols) {
            return Err(Error::Dimension("linear model blocks differ in shape".into()));
        }
        let offsets = match offsets {
            Some(o) => {
                if o.len() != matrices.len() || o.iter().any(|c| c.len() != rows) {
                    return Err(Error::Dimension("linear model offsets mismatch".into()));
                }
                o
            }
            None => vec![DVector::zeros(rows); matrices.len()],
        };
        Ok(LinearModel { matrices, offsets })
    }
}

impl MeasurementModel for LinearModel {
    fn measurement_count(&self) -> usize {
        self.matrices.len()
    }

    fn observation_dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    fn state_dim(&self) -> usize {
        self.matrices[0].ncols()
    }

    fn forward(&self, state: &DVector<C64>) -> Result<Vec<DVector<C64>>> {
        Ok(self
            .matrices
            .iter()
            .zip(&self.offsets)
            .map(|(m, c)| m * state + c)
            .collect())
    }

    fn linearize_all(&self, state: &DVector<C64>) -> Result<FullLinearization> {
        Ok(FullLinearization {
            values: self.forward(state)?,
            blocks: self.matrices.clone(),
        })
    }

    fn linearize_one(
        &self,
        state: &DVector<C64>,
        n: usize,
    ) -> Result<(DVector<C64>, DMatrix<C64>)> {
        if n >= self.matrices.len() {
            return Err(Error::Dimension(format!("measurement index {n} out of range")));
        }
        Ok((&self.matrices[n] * state + &self.offsets[n], self.matrices[n].clone()))
    }
}

// ---- tests ---------------------------------------------------------------------------

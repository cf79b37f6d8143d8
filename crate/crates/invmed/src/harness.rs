//! Experiment harness: configuration, synthetic data, reconstruction runs,
//! and file output.
//!
//! The harness reproduces the desk-scale inverse-scattering experiments: a
//! piecewise-constant contrast on a `2M × 2M` cell grid over `[−S, S]²` is
//! probed by `N` incident plane waves, far fields are sampled at `J`
//! observation directions, complex Gaussian noise is added, and one of the
//! three reconstruction algorithms inverts the data starting from the zero
//! contrast.
//!
//! Everything is deterministic given the configuration: the noise comes from
//! a counter-based generator seeded explicitly, data generation defaults to a
//! grid twice as fine as the inversion grid (avoiding the inverse crime;
//! `inverse_crime = true` reuses the same grid), and all file output is
//! byte-reproducible except for the wall-clock `seconds` column of
//! `mse.csv`/`trace.csv`, which records measured time.
//!
//! File formats (all CSV floats in lower-exponent scientific notation, which
//! round-trips exactly):
//!
//! * `farfield.csv` — `j,n,re,im` with 1-based direction indices, rows
//!   grouped by incident direction `n`.
//! * `meta.toml` — the full configuration plus derived discretization facts.
//! * `medium_iter_<i>.csv` — `m1,m2,x,y,re_q,im_q` per coarse cell, storage
//!   order (`m1` outer, `m2` inner, both in `−M..M`).
//! * `mse.csv` — `iter,algo,mse,alpha,seconds`; `alpha` is empty for the
//!   initial row and for extended-Kalman-filter rows.
//! * `trace.csv` (with `verbose_trace`) — `outer,inner,innovation_norm,b_norm,mse`.
//! * `medium_iter_<i>.png` — green-channel heatmap of the real part, scale
//!   `[0, 0.12]`, 16 × 16 pixels per cell.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forward::{forward_map, FarFieldSet, FineGrid};
use crate::grid::{characteristic_medium, make_directions, make_grid, CellGrid, Medium, ShapeId, ShapeTag};
use crate::jacobian::ScatteringModel;
use crate::kalman::{ekf_run, kfl_run, EkfConfig, StepTrace};
use crate::linalg::GmresOptions;
use crate::regularize::{flm_run, Algorithm, LmConfig, NoiseWeight, RunReport};
use crate::{Error, Result, C64};

/// Upper end of the heatmap color scale (real part of the contrast).
pub const HEATMAP_MAX: f64 = 0.12;

/// Pixels per cell side in rendered heatmaps.
const HEATMAP_BLOCK: u32 = 16;

// ---- configuration ---------------------------------------------------------------

fn default_k() -> f64 {
    3.0
}
fn default_s() -> f64 {
    3.0
}
fn default_m() -> usize {
    8
}
fn default_j() -> usize {
    30
}
fn default_n() -> usize {
    30
}
fn default_r() -> f64 {
    3.0
}
fn default_sigma() -> f64 {
    0.01
}
fn default_rho() -> f64 {
    0.4
}
fn default_alpha0() -> f64 {
    50.0
}
fn default_iters() -> usize {
    10
}
fn default_seed() -> u64 {
    0
}
fn default_shape() -> ShapeTag {
    ShapeTag::B1
}
fn default_algo() -> Algorithm {
    Algorithm::Ekf
}
fn default_contrast() -> f64 {
    0.1
}
fn default_fine_grid() -> usize {
    128
}
fn default_period_factor() -> f64 {
    8.0
}
fn default_tol() -> f64 {
    1e-8
}

/// Full description of one experiment. Every field has a default matching
/// the desk-scale setup; a configuration file may set any subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Wavenumber.
    pub k: f64,
    /// Half-width of the contrast support square `[−S, S]²`.
    pub s: f64,
    /// Cells per half-side of the coarse grid (`2M × 2M` cells total).
    pub m: usize,
    /// Number of observation directions per measurement.
    pub j: usize,
    /// Number of incident directions (measurements).
    pub n: usize,
    /// Scale of the measurement weight `R = r² I`.
    pub r: f64,
    /// Noise standard deviation per real/imaginary component.
    pub sigma: f64,
    /// Discrepancy-principle fraction for the Levenberg-Marquardt methods.
    pub rho: f64,
    /// Initial weight of the extended Kalman filter.
    pub alpha0: f64,
    /// Outer iterations.
    pub iters: usize,
    /// Noise seed.
    pub seed: u64,
    /// True contrast shape.
    pub shape: ShapeTag,
    /// Algorithm for `reconstruct`.
    pub algo: Algorithm,
    /// Contrast value inside the shape.
    pub contrast: f64,
    /// Inversion fine grid nodes per side (power of two).
    pub fine_grid: usize,
    /// Generate data on the inversion grid instead of one twice as fine.
    pub inverse_crime: bool,
    /// Fine-grid period as a multiple of `s` (at least 4).
    pub period_factor: f64,
    /// Relative tolerance of the Krylov solver.
    pub tol: f64,
    /// Write per-measurement `trace.csv`.
    pub verbose_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: default_k(),
            s: default_s(),
            m: default_m(),
            j: default_j(),
            n: default_n(),
            r: default_r(),
            sigma: default_sigma(),
            rho: default_rho(),
            alpha0: default_alpha0(),
            iters: default_iters(),
            seed: default_seed(),
            shape: default_shape(),
            algo: default_algo(),
            contrast: default_contrast(),
            fine_grid: default_fine_grid(),
            inverse_crime: false,
            period_factor: default_period_factor(),
            tol: default_tol(),
            verbose_trace: false,
        }
    }
}

impl ExperimentConfig {
    /// Loads a configuration from a TOML file; unset keys take defaults and
    /// unknown keys are rejected.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks parameter ranges and discretization constraints.
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::Config(format!("s must be positive, got {}", self.s)));
        }
        if self.m == 0 || self.j == 0 || self.n == 0 || self.iters == 0 {
            return Err(Error::Config("m, j, n, iters must all be positive".into()));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(Error::Config(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !self.fine_grid.is_power_of_two() || self.fine_grid < 4 {
            return Err(Error::Config(format!(
                "fine_grid must be a power of two >= 4, got {}",
                self.fine_grid
            )));
        }
        if !(self.period_factor.is_finite() && self.period_factor >= 4.0) {
            return Err(Error::Config(format!(
                "period_factor must be at least 4, got {}",
                self.period_factor
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(self.contrast.is_finite()) {
            return Err(Error::Config(format!("contrast must be finite, got {}", self.contrast)));
        }
        // Construction checks of the geometry itself.
        self.cell_grid()?;
        self.inversion_grid()?;
        self.data_grid()?;
        Ok(())
    }

    /// The coarse reconstruction grid.
    pub fn cell_grid(&self) -> Result<CellGrid> {
        make_grid(self.s, self.m)
    }

    /// The fine grid used by the inversion.
    pub fn inversion_grid(&self) -> Result<FineGrid> {
        FineGrid::new(self.fine_grid, self.period_factor * self.s)
    }

    /// The fine grid used to synthesize data: twice the inversion resolution
    /// unless `inverse_crime` is set.
    pub fn data_grid(&self) -> Result<FineGrid> {
        let n = if self.inverse_crime { self.fine_grid } else { 2 * self.fine_grid };
        FineGrid::new(n, self.period_factor * self.s)
    }

    /// Observation and incident direction sets.
    pub fn directions(&self) -> Result<(DirectionPair, DirectionPair)> {
        Ok((make_directions(self.j)?, make_directions(self.n)?))
    }

    /// The true medium.
    pub fn truth(&self) -> Result<Medium> {
        let shape = ShapeId::new(self.shape, C64::new(self.contrast, 0.0));
        Ok(characteristic_medium(&shape, self.cell_grid()?))
    }

    /// Krylov options used by both data generation and inversion.
    pub fn gmres(&self) -> GmresOptions {
        GmresOptions { tol: self.tol, ..GmresOptions::default() }
    }

    /// Outer-loop parameters of the Levenberg-Marquardt family.
    pub fn lm_config(&self) -> LmConfig {
        LmConfig { rho: self.rho, max_outer: self.iters, ..LmConfig::default() }
    }

    /// Parameters of the extended Kalman filter.
    pub fn ekf_config(&self) -> EkfConfig {
        EkfConfig { alpha0: self.alpha0, max_outer: self.iters, ..EkfConfig::default() }
    }
}

type DirectionPair = crate::grid::DirectionSet;

// ---- noise -------------------------------------------------------------------------

/// Adds independent complex Gaussian noise `ε = ε_re + i ε_im`, each
/// component `N(0, σ²)`, to every far-field sample. Entries are perturbed in
/// stacked (measurement-major) order so the result is independent of any
/// parallel schedule; `σ = 0` returns the input bit-for-bit.
pub fn add_noise(set: &FarFieldSet, sigma: f64, rng: &mut ChaCha8Rng) -> FarFieldSet {
    if sigma == 0.0 {
        return set.clone();
    }
    let mut values = set.matrix().clone();
    for n in 0..set.incident_count() {
        for j in 0..set.observation_count() {
            let (g1, g2) = gaussian_pair(rng);
            values[(j, n)] += C64::new(sigma * g1, sigma * g2);
        }
    }
    FarFieldSet::new(values, set.observations().clone(), set.incidents().clone())
        .expect("dimensions preserved")
}

/// One standard-normal pair via the Box-Muller transform. `u1` is mapped into
/// `(0, 1]` so the logarithm never sees zero.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * PI * u2;
    (radius * angle.cos(), radius * angle.sin())
}

// ---- synthetic data ------------------------------------------------------------------

/// Far-field data synthesized from a known truth.
pub struct SyntheticData {
    /// Noise-free far field on the data grid.
    pub clean: FarFieldSet,
    /// The measured data: clean plus noise.
    pub noisy: FarFieldSet,
    /// The true medium on the coarse grid.
    pub truth: Medium,
}

/// Generates the experiment's data: exact forward solve of the true medium on
/// the data grid, then additive noise seeded by `config.seed`.
pub fn generate_data(config: &ExperimentConfig) -> Result<SyntheticData> {
    config.validate()?;
    let truth = config.truth()?;
    let (observations, incidents) = config.directions()?;
    let clean = forward_map(
        &truth,
        config.k,
        config.data_grid()?,
        config.gmres(),
        &incidents,
        &observations,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noisy = add_noise(&clean, config.sigma, &mut rng);
    Ok(SyntheticData { clean, noisy, truth })
}

/// Builds the inversion-side measurement model.
pub fn build_model(config: &ExperimentConfig) -> Result<ScatteringModel> {
    let (observations, incidents) = config.directions()?;
    ScatteringModel::new(
        config.k,
        config.cell_grid()?,
        config.inversion_grid()?,
        incidents,
        observations,
        config.gmres(),
    )
}

/// Runs one reconstruction algorithm on prepared data, starting from the zero
/// contrast. Pure computation; writes nothing.
pub fn run_reconstruction(
    config: &ExperimentConfig,
    data: &SyntheticData,
    algo: Algorithm,
) -> Result<RunReport> {
    let model = build_model(config)?;
    let columns = data.noisy.columns();
    let initial = DVector::zeros(model.state_dim());
    let truth_vec = DVector::from_column_slice(data.truth.values());
    let weight = NoiseWeight::new(config.r)?;
    match algo {
        Algorithm::Flm => flm_run(
            &model,
            &columns,
            &initial,
            Some(&truth_vec),
            weight,
            &config.lm_config(),
            None,
        ),
        Algorithm::Kfl => kfl_run(
            &model,
            &columns,
            &initial,
            Some(&truth_vec),
            weight,
            &config.lm_config(),
            None,
        ),
        Algorithm::Ekf => {
            ekf_run(&model, &columns, &initial, Some(&truth_vec), weight, &config.ekf_config())
        }
    }
}

// ---- file writers ----------------------------------------------------------------------

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Formats a float in scientific notation (exact round-trip).
fn fmt_float(x: f64) -> String {
    format!("{x:e}")
}

/// Writes far-field samples as `j,n,re,im` with 1-based indices, grouped by
/// incident direction.
pub fn write_farfield_csv(set: &FarFieldSet, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "j,n,re,im")?;
    for n in 0..set.incident_count() {
        for j in 0..set.observation_count() {
            let v = set.value(j, n);
            writeln!(out, "{},{},{},{}", j + 1, n + 1, fmt_float(v.re), fmt_float(v.im))?;
        }
    }
    Ok(())
}

/// Writes a medium as `m1,m2,x,y,re_q,im_q` in storage order.
pub fn write_medium_csv(medium: &Medium, path: &Path) -> Result<()> {
    let grid = medium.grid();
    let m = grid.divisions() as i64;
    let mut out = create(path)?;
    writeln!(out, "m1,m2,x,y,re_q,im_q")?;
    for m1 in -m..m {
        for m2 in -m..m {
            let center = grid.center(m1, m2);
            let q = medium.value(m1, m2);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m1,
                m2,
                fmt_float(center[0]),
                fmt_float(center[1]),
                fmt_float(q.re),
                fmt_float(q.im)
            )?;
        }
    }
    Ok(())
}

/// Reads a medium CSV back onto the expected grid, validating the cell
/// indices and center coordinates against it.
pub fn read_medium_csv(path: &Path, grid: CellGrid) -> Result<Medium> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("m1,m2,x,y,re_q,im_q") => {}
        other => {
            return Err(Error::Config(format!(
                "{}: unexpected medium header {other:?}",
                path.display()
            )))
        }
    }
    let mut values = vec![C64::new(0.0, 0.0); grid.num_cells()];
    let mut seen = vec![false; grid.num_cells()];
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "{}:{}: expected 6 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Config(format!("{}:{}: bad {what}", path.display(), lineno + 2))
        };
        let m1: i64 = fields[0].parse().map_err(|_| parse_err("m1"))?;
        let m2: i64 = fields[1].parse().map_err(|_| parse_err("m2"))?;
        let x: f64 = fields[2].parse().map_err(|_| parse_err("x"))?;
        let y: f64 = fields[3].parse().map_err(|_| parse_err("y"))?;
        let re: f64 = fields[4].parse().map_err(|_| parse_err("re_q"))?;
        let im: f64 = fields[5].parse().map_err(|_| parse_err("im_q"))?;
        let m = grid.divisions() as i64;
        if m1 < -m || m1 >= m || m2 < -m || m2 >= m {
            return Err(parse_err("cell index"));
        }
        let center = grid.center(m1, m2);
        if (center[0] - x).abs() > 1e-9 || (center[1] - y).abs() > 1e-9 {
            return Err(parse_err("cell center"));
        }
        let idx = grid.cell_index(m1, m2);
        if seen[idx] {
            return Err(parse_err("duplicate cell"));
        }
        seen[idx] = true;
        values[idx] = C64::new(re, im);
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Config(format!("{}: missing cells", path.display())));
    }
    Medium::new(grid, values)
}

/// One row of `mse.csv`.
struct MseRow {
    iter: usize,
    algo: Algorithm,
    mse: Option<f64>,
    alpha: Option<f64>,
    seconds: f64,
}

fn write_mse_csv(rows: &[MseRow], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "iter,algo,mse,alpha,seconds")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.iter,
            row.algo,
            row.mse.map(fmt_float).unwrap_or_default(),
            row.alpha.map(fmt_float).unwrap_or_default(),
            fmt_float(row.seconds)
        )?;
    }
    Ok(())
}

fn mse_rows(report: &RunReport) -> Vec<MseRow> {
    report
        .records
        .iter()
        .map(|r| MseRow {
            iter: r.iter,
            algo: report.algorithm,
            mse: r.mse,
            alpha: r.alpha,
            seconds: r.seconds,
        })
        .collect()
}

/// Writes per-measurement traces as
/// `outer,inner,innovation_norm,b_norm,mse`.
pub fn write_trace_csv(traces: &[StepTrace], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "outer,inner,innovation_norm,b_norm,mse")?;
    for t in traces {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.outer,
            t.inner,
            fmt_float(t.innovation_norm),
            fmt_float(t.b_norm),
            t.mse.map(fmt_float).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Renders the real part of a medium as a green-channel heatmap with a fixed
/// color scale `[0, HEATMAP_MAX]` and 16 × 16 pixels per cell. The vertical
/// axis points up: larger `m2` is nearer the top of the image.
pub fn render_heatmap(medium: &Medium, path: &Path) -> Result<()> {
    let grid = medium.grid();
    let cells_per_side = 2 * grid.divisions() as u32;
    let side = cells_per_side * HEATMAP_BLOCK;
    let m = grid.divisions() as i64;
    let image = image::RgbImage::from_fn(side, side, |px, py| {
        let col = (px / HEATMAP_BLOCK) as i64; // m1 + M
        let row = (py / HEATMAP_BLOCK) as i64; // (2M − 1) − (m2 + M)
        let m1 = col - m;
        let m2 = (2 * m - 1 - row) - m;
        let value = medium.value(m1, m2).re;
        let unit = (value / HEATMAP_MAX).clamp(0.0, 1.0);
        let green = (unit * 255.0).round() as u8;
        image::Rgb([0, green, 0])
    });
    image
        .save(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Derived facts recorded next to the configuration in `meta.toml`.
#[derive(Debug, Serialize, Deserialize)]
struct MetaRecord {
    config: ExperimentConfig,
    data_grid_nodes: usize,
    inversion_grid_nodes: usize,
    period: f64,
    cells: usize,
}

fn write_meta(config: &ExperimentConfig, path: &Path) -> Result<()> {
    let meta = MetaRecord {
        config: config.clone(),
        data_grid_nodes: config.data_grid()?.n(),
        inversion_grid_nodes: config.inversion_grid()?.n(),
        period: config.period_factor * config.s,
        cells: config.cell_grid()?.num_cells(),
    };
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| Error::Config(format!("meta serialization: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

// ---- run orchestration --------------------------------------------------------------------

fn write_iterates(
    report: &RunReport,
    grid: CellGrid,
    dir: &Path,
) -> Result<()> {
    for (i, state) in report.iterates.iter().enumerate() {
        let medium = Medium::new(grid, state.iter().copied().collect())?;
        write_medium_csv(&medium, &dir.join(format!("medium_iter_{i}.csv")))?;
        render_heatmap(&medium, &dir.join(format!("medium_iter_{i}.png")))?;
    }
    Ok(())
}

/// Generates data and writes it (and the truth) without reconstructing:
/// `farfield.csv`, `meta.toml`, `medium_true.csv`, `medium_true.png`.
pub fn run_forward_only(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let data = generate_data(config)?;
    write_farfield_csv(&data.noisy, &out_dir.join("farfield.csv"))?;
    write_meta(config, &out_dir.join("meta.toml"))?;
    write_medium_csv(&data.truth, &out_dir.join("medium_true.csv"))?;
    render_heatmap(&data.truth, &out_dir.join("medium_true.png"))?;
    Ok(())
}

/// Generates data, reconstructs with `config.algo`, and writes the full
/// output set into `out_dir`. Returns the run report.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(out_dir)?;
    let data = generate_data(config)?;
    let report = run_reconstruction(config, &data, config.algo)?;
    write_farfield_csv(&data.noisy, &out_dir.join("farfield.csv"))?;
    write_meta(config, &out_dir.join("meta.toml"))?;
    write_medium_csv(&data.truth, &out_dir.join("medium_true.csv"))?;
    render_heatmap(&data.truth, &out_dir.join("medium_true.png"))?;
    write_iterates(&report, data.truth.grid(), out_dir)?;
    write_mse_csv(&mse_rows(&report), &out_dir.join("mse.csv"))?;
    if config.verbose_trace {
        write_trace_csv(&report.traces, &out_dir.join("trace.csv"))?;
    }
    Ok(report)
}

/// Runs all three algorithms on one shared data set: `farfield.csv` and
/// `meta.toml` at the top level, per-algorithm outputs in `flm/`, `kfl/`,
/// `ekf/` subdirectories, and a combined `mse.csv`. The noise is drawn once;
/// every algorithm inverts identical data.
pub fn run_compare(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RunReport>> {
    fs::create_dir_all(out_dir)?;
    let data = generate_data(config)?;
    write_farfield_csv(&data.noisy, &out_dir.join("farfield.csv"))?;
    write_meta(config, &out_dir.join("meta.toml"))?;
    write_medium_csv(&data.truth, &out_dir.join("medium_true.csv"))?;
    render_heatmap(&data.truth, &out_dir.join("medium_true.png"))?;
    let mut reports = Vec::new();
    let mut all_rows = Vec::new();
    for algo in [Algorithm::Flm, Algorithm::Kfl, Algorithm::Ekf] {
        let sub = out_dir.join(algo.to_string());
        fs::create_dir_all(&sub)?;
        let report = run_reconstruction(config, &data, algo)?;
        write_iterates(&report, data.truth.grid(), &sub)?;
        write_mse_csv(&mse_rows(&report), &sub.join("mse.csv"))?;
        if config.verbose_trace {
            write_trace_csv(&report.traces, &sub.join("trace.csv"))?;
        }
        all_rows.extend(mse_rows(&report));
        reports.push(report);
    }
    write_mse_csv(&all_rows, &out_dir.join("mse.csv"))?;
    Ok(reports)
}

/// Convenience: the output paths a `reconstruct` run creates for `iters`
/// iterations (used by callers that post-process files).
pub fn iterate_paths(out_dir: &Path, iters: usize) -> Vec<PathBuf> {
    (0..=iters).map(|i| out_dir.join(format!("medium_iter_{i}.csv"))).collect()
}

// ---- tests ------------------------------------------------------------------------------

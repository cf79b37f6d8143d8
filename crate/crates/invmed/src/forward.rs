//! Forward acoustic scattering on a periodized fine grid.
//!
//! The total field `u` for an incident plane wave `u\u{2071}(x) = exp(i k x·θ)`
//! satisfies the second-kind integral equation
//!
//! ```text
//! u(x) = u\u{2071}(x) + k² ∫ Φ(x, y) q(y) u(y) dy,      Φ(x, y) = (i/4) H₀⁽¹⁾(k|x − y|),
//! ```
//!
//! with the integral taken over the square support of the contrast `q`. The
//! volume potential is discretized by periodization: the kernel is truncated
//! at radius `R = period/2`, extended periodically with period `period` in
//! both coordinates, and applied as a circulant convolution that diagonalizes
//! under the 2-D FFT. Provided the period is at least twice the diameter of
//! the support of `q`, the truncated kernel agrees with the free-space kernel
//! for every pair of points in the support, so the periodization is exact
//! there rather than an approximation.
//!
//! The Fourier multiplier of the truncated kernel has a closed form in terms
//! of Bessel and Hankel functions (see [`HelmholtzKernel`]), so no numerical
//! quadrature of the singular kernel is needed. The resulting dense-free
//! operator `u ↦ u − k² C(q u)` is inverted with restarted GMRES; a dense LU
//! solve over the same discretization is retained for small grids as an
//! independent oracle.
//!
//! Far fields are evaluated by quadrature of
//!
//! ```text
//! u∞(x̂, θ) = (k²/4π) ∫ exp(−i k x̂·y) q(y) u(y; θ) dy
//! ```
//!
//! over the fine grid, using the same nodes and weights as the convolution
//! discretization. Because the circulant matrix `C` is symmetric (not just
//! Hermitian), this discrete far field satisfies the reciprocity identity
//! `u∞(x̂, θ) = u∞(−θ, −x̂)` exactly, up to the Krylov solver tolerance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::{Fft, FftPlanner};

use crate::grid::{CellGrid, DirectionSet, Medium};
use crate::linalg::{gmres, GmresOptions};
use crate::par;
use crate::specfun::{bessel_j0, bessel_j1, hankel0_first, hankel1_first};
use crate::{Error, Result, C64};

/// The period must be at least this multiple of the contrast-support
/// half-width `S` so that the truncated kernel is exact on the support
/// (see the module docs: period ≥ 2 · diameter = 4 S).
pub const MIN_PERIOD_FACTOR: f64 = 4.0;

/// Directions passed to the solver must be unit vectors to within this
/// tolerance.
pub const DIRECTION_UNIT_TOL: f64 = 1e-12;

/// Half-width (relative to `max(k, 1)`) of the window `|μ − k|` in which the
/// kernel symbol switches from the direct quotient to its first-order Taylor
/// expansion about the removable singularity at `μ = k`.
const RADIAL_TAYLOR_WINDOW: f64 = 1e-5;

/// Largest grid dimension for which the dense LU oracle may be assembled.
const DENSE_ORACLE_MAX_N: usize = 32;

// ---- fine grid --------------------------------------------------------------

/// Uniform `n × n` grid of nodes covering the periodization square
/// `[−period/2, period/2)²`, node-cornered: node `(i₁, i₂)` sits at
/// `(−period/2 + i₁ h, −period/2 + i₂ h)` with spacing `h = period / n`.
///
/// `n` must be a power of two (for the FFT) and `period` a positive finite
/// length. Nodes are stored row-major with `i₂` fastest:
/// `index = i₁ · n + i₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineGrid {
    n: usize,
    period: f64,
}

impl FineGrid {
    /// Creates a grid with `n × n` nodes on a square of side `period`.
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "fine grid size must be a power of two >= 4, got {n}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!(
                "fine grid period must be positive and finite, got {period}"
            )));
        }
        Ok(FineGrid { n, period })
    }

    /// Nodes per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Side length of the periodization square.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// Node spacing `h = period / n`.
    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Total number of nodes `n²`.
    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    /// The 1-D coordinate of node index `i`: `−period/2 + i h`.
    pub fn coordinate(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        -0.5 * self.period + i as f64 * self.spacing()
    }

    /// Position of node `(i₁, i₂)`.
    pub fn node(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.coordinate(i1), self.coordinate(i2)]
    }

    /// Storage index of node `(i₁, i₂)`.
    pub fn node_index(&self, i1: usize, i2: usize) -> usize {
        debug_assert!(i1 < self.n && i2 < self.n);
        i1 * self.n + i2
    }

    /// The node nearest to `point`, rounding half-way cases away from zero in
    /// the index offset and clamping to the grid. Used to snap off-grid
    /// evaluation points (for example coarse-cell centers) to nodes in a
    /// deterministic, platform-independent way.
    pub fn nearest_node(&self, point: [f64; 2]) -> (usize, usize) {
        let h = self.spacing();
        let snap = |x: f64| -> usize {
            let raw = (x + 0.5 * self.period) / h;
            let idx = raw.round(); // rounds half-way cases away from zero
            idx.clamp(0.0, (self.n - 1) as f64) as usize
        };
        (snap(point[0]), snap(point[1]))
    }
}

// ---- coarse-to-fine sampling -------------------------------------------------

/// For every fine node, the index of the coarse cell containing it, or `None`
/// for nodes outside the contrast-support square.
pub(crate) fn cell_map(fine: &FineGrid, cells: &CellGrid) -> Vec<Option<usize>> {
    let n = fine.n();
    let mut map = Vec::with_capacity(fine.node_count());
    for i1 in 0..n {
        for i2 in 0..n {
            map.push(cells.cell_containing(fine.node(i1, i2)));
        }
    }
    map
}

/// Samples a piecewise-constant medium at the fine-grid nodes: each node takes
/// the value of the coarse cell containing it, and zero outside the support
/// square. This is the injection used by both the solver and the far-field
/// quadrature, so the two always see the same discrete contrast.
pub fn sample_medium(medium: &Medium, fine: &FineGrid) -> Vec<C64> {
    let grid = medium.grid();
    cell_map(fine, &grid)
        .into_iter()
        .map(|cell| cell.map_or(C64::new(0.0, 0.0), |c| medium.values()[c]))
        .collect()
}

// ---- periodized kernel -------------------------------------------------------

/// Radial part of the Fourier multiplier of the truncated kernel.
///
/// For the kernel `g(x) = (i/4) H₀⁽¹⁾(k|x|)` truncated at radius `R`, the
/// 2-D Fourier transform is radial, `ĝ(ξ) = (iπ/2) I(|ξ|)`, with
///
/// ```text
/// I(μ) = [R μ J₁(μR) H₀⁽¹⁾(kR) − R k J₀(μR) H₁⁽¹⁾(kR) − 2i/π] / (μ² − k²),
/// ```
///
/// obtained from the Lommel integral of `∫₀ᴿ J₀(μr) H₀⁽¹⁾(kr) r dr`; the
/// `−2i/π` term is the boundary contribution of `H₁` at `r → 0`. The
/// singularity at `μ = k` is removable:
///
/// ```text
/// I(k) = (R²/2) [J₀(kR) H₀⁽¹⁾(kR) + J₁(kR) H₁⁽¹⁾(kR)],
/// ```
///
/// and near `μ = k` the quotient is evaluated by the first-order Taylor
/// expansion `I(k + δ) ≈ I(k) + δ (N″(k)/4k − N′(k)/4k²)` in terms of the
/// numerator `N`, which avoids catastrophic cancellation in the direct form.
struct RadialSymbol {
    k: f64,
    radius: f64,
    /// `H₀⁽¹⁾(kR)` and `H₁⁽¹⁾(kR)`, fixed for the whole grid.
    h0_kr: C64,
    h1_kr: C64,
    /// Value at the removable singularity, `I(k)`.
    taylor_c0: C64,
    /// First derivative at the singularity, `I′(k)`.
    taylor_c1: C64,
}

impl RadialSymbol {
    fn new(k: f64, radius: f64) -> Result<Self> {
        let kr = k * radius;
        let h0_kr = hankel0_first(kr)?;
        let h1_kr = hankel1_first(kr)?;
        let j0_kr = bessel_j0(kr)?;
        let j1_kr = bessel_j1(kr)?;
        let r2 = radius * radius;
        // I(k) = (R²/2)(J₀H₀ + J₁H₁)(kR), and with N the numerator of the
        // direct quotient: N′(k) = k R² (J₀H₀ + J₁H₁), N″(k) = R² (J₀H₀ −
        // J₁H₁ − 2i/π), giving I′(k) = N″/(4k) − N′/(4k²).
        let jh_sum = j0_kr * h0_kr + j1_kr * h1_kr;
        let taylor_c0 = 0.5 * r2 * jh_sum;
        let n_prime = k * r2 * jh_sum;
        let n_second = r2 * (j0_kr * h0_kr - j1_kr * h1_kr - C64::new(0.0, 2.0 / PI));
        let taylor_c1 = n_second / (4.0 * k) - n_prime / (4.0 * k * k);
        Ok(RadialSymbol { k, radius, h0_kr, h1_kr, taylor_c0, taylor_c1 })
    }

    fn taylor_halfwidth(&self) -> f64 {
        RADIAL_TAYLOR_WINDOW * self.k.max(1.0)
    }

    /// `I(μ)` for `μ ≥ 0`.
    fn eval(&self, mu: f64) -> Result<C64> {
        if (mu - self.k).abs() <= self.taylor_halfwidth() {
            Ok(self.eval_taylor(mu))
        } else {
            self.eval_direct(mu)
        }
    }

    fn eval_taylor(&self, mu: f64) -> C64 {
        self.taylor_c0 + (mu - self.k) * self.taylor_c1
    }

    fn eval_direct(&self, mu: f64) -> Result<C64> {
        let r = self.radius;
        let k = self.k;
        let numerator = r * mu * bessel_j1(mu * r)? * self.h0_kr
            - r * k * bessel_j0(mu * r)? * self.h1_kr
            - C64::new(0.0, 2.0 / PI);
        Ok(numerator / (mu * mu - k * k))
    }
}

/// Periodized volume-potential operator `C ≈ ∫ Φ(·, y) f(y) dy` applied as a
/// circulant convolution on a [`FineGrid`].
///
/// The Fourier multiplier per discrete mode `ξ = (2π/period)(w₁, w₂)` (with
/// `w` the signed alias of the FFT bin) is `(iπ/2) I(|ξ|)` as documented on
/// [`RadialSymbol`]; the `1/n²` inverse-FFT normalization is folded into the
/// stored multiplier so [`HelmholtzKernel::convolve`] is a plain
/// FFT → multiply → inverse-FFT round trip.
pub struct HelmholtzKernel {
    k: f64,
    grid: FineGrid,
    symbol: Vec<C64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl HelmholtzKernel {
    /// Builds the kernel for wavenumber `k > 0` on `grid`, truncating the
    /// free-space kernel at radius `period/2`.
    pub fn new(k: f64, grid: FineGrid) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Domain(format!(
                "wavenumber must be positive and finite, got {k}"
            )));
        }
        let radial = RadialSymbol::new(k, 0.5 * grid.period())?;
        let n = grid.n();
        let scale = C64::new(0.0, 0.5 * PI) / (grid.node_count() as f64);
        let dxi = 2.0 * PI / grid.period();
        // The multiplier depends only on w₁² + w₂², so cache per squared
        // radius; for an n × n grid this cuts the Bessel evaluations from n²
        // to the number of distinct radii (about n²/8).
        let mut cache: HashMap<u64, C64> = HashMap::new();
        let mut symbol = Vec::with_capacity(grid.node_count());
        let wrap = |j: usize| -> i64 {
            if j <= n / 2 {
                j as i64
            } else {
                j as i64 - n as i64
            }
        };
        for j1 in 0..n {
            let w1 = wrap(j1);
            for j2 in 0..n {
                let w2 = wrap(j2);
                let r2 = (w1 * w1 + w2 * w2) as u64;
                let value = match cache.get(&r2) {
                    Some(v) => *v,
                    None => {
                        let mu = dxi * (r2 as f64).sqrt();
                        let v = radial.eval(mu)?;
                        cache.insert(r2, v);
                        v
                    }
                };
                symbol.push(scale * value);
            }
        }
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n);
        let fft_inverse = planner.plan_fft_inverse(n);
        Ok(HelmholtzKernel { k, grid, symbol, fft_forward, fft_inverse })
    }

    /// Wavenumber.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Underlying grid.
    pub fn grid(&self) -> FineGrid {
        self.grid
    }

    /// Applies the periodized volume potential to grid values.
    ///
    /// # Panics
    ///
    /// Panics if `values.len() != grid.node_count()`.
    pub fn convolve(&self, values: &[C64]) -> Vec<C64> {
        assert_eq!(
            values.len(),
            self.grid.node_count(),
            "convolve input length must match the grid"
        );
        let mut buf = values.to_vec();
        self.fft2(&mut buf, true);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b *= *s;
        }
        self.fft2(&mut buf, false);
        buf
    }

    /// Row-column 2-D FFT: transform all rows, transpose, transform all rows
    /// again, transpose back. `rustfft` processes the whole buffer as
    /// contiguous length-`n` chunks in one call.
    fn fft2(&self, data: &mut [C64], forward: bool) {
        let n = self.grid.n();
        let fft = if forward { &self.fft_forward } else { &self.fft_inverse };
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
    }
}

fn transpose_square(data: &mut [C64], n: usize) {
    debug_assert_eq!(data.len(), n * n);
    for i in 0..n {
        for j in 0..i {
            data.swap(i * n + j, j * n + i);
        }
    }
}

// ---- incident field ----------------------------------------------------------

fn check_unit_direction(direction: [f64; 2]) -> Result<()> {
    let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_UNIT_TOL {
        return Err(Error::Domain(format!(
            "direction ({}, {}) is not a unit vector",
            direction[0], direction[1]
        )));
    }
    Ok(())
}

/// Samples the incident plane wave `exp(i k x·θ)` at the fine-grid nodes.
/// `direction` must be a unit vector.
pub fn incident_plane_wave(k: f64, direction: [f64; 2], fine: &FineGrid) -> Result<Vec<C64>> {
    check_unit_direction(direction)?;
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Domain(format!(
            "wavenumber must be positive and finite, got {k}"
        )));
    }
    let n = fine.n();
    // exp(i k (d₁ x₁ + d₂ x₂)) factorizes over the two coordinates.
    let phase_1: Vec<C64> =
        (0..n).map(|i| C64::from_polar(1.0, k * direction[0] * fine.coordinate(i))).collect();
    let phase_2: Vec<C64> =
        (0..n).map(|i| C64::from_polar(1.0, k * direction[1] * fine.coordinate(i))).collect();
    let mut values = Vec::with_capacity(fine.node_count());
    for p1 in &phase_1 {
        for p2 in &phase_2 {
            values.push(p1 * p2);
        }
    }
    Ok(values)
}

// ---- total field -------------------------------------------------------------

/// A solved total field `u(·; θ)` on the fine grid, together with the
/// re-verified relative residual of the discrete integral equation.
#[derive(Debug, Clone)]
pub struct TotalField {
    grid: FineGrid,
    k: f64,
    direction: [f64; 2],
    values: Vec<C64>,
    residual: f64,
}

impl TotalField {
    /// Grid on which the field lives.
    pub fn grid(&self) -> FineGrid {
        self.grid
    }

    /// Wavenumber of the solve.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Incident direction of the solve.
    pub fn direction(&self) -> [f64; 2] {
        self.direction
    }

    /// Field values in fine-grid storage order.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// True relative residual `‖u − u\u{2071} − k² C(q u)‖ / ‖u\u{2071}‖`,
    /// recomputed from the returned iterate after the solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Samples the field at the centers of a coarse cell grid by snapping
    /// each center to the nearest fine node.
    pub fn at_cell_centers(&self, cells: &CellGrid) -> Vec<C64> {
        cells
            .centers()
            .into_iter()
            .map(|c| {
                let (i1, i2) = self.grid.nearest_node(c);
                self.values[self.grid.node_index(i1, i2)]
            })
            .collect()
    }
}

// ---- solver ------------------------------------------------------------------

/// Matrix-free solver for the discrete Lippmann-Schwinger system
/// `(I − k² C Q) u = u\u{2071}` on a fine grid, where `Q` is the diagonal of
/// the sampled contrast and `C` the periodized volume potential.
pub struct ForwardSolver {
    kernel: HelmholtzKernel,
    medium: Medium,
    q_fine: Vec<C64>,
    gmres: GmresOptions,
}

impl ForwardSolver {
    /// Builds a solver for `medium` at wavenumber `k` on `fine`.
    ///
    /// Requires `fine.period() ≥ 4 S` (twice the diameter of the support
    /// square), the condition under which the periodized kernel is exact on
    /// the support.
    pub fn new(medium: &Medium, k: f64, fine: FineGrid, gmres: GmresOptions) -> Result<Self> {
        let s = medium.grid().half_width();
        if fine.period() < MIN_PERIOD_FACTOR * s - 1e-12 {
            return Err(Error::Domain(format!(
                "period {} is below the required {} x half-width {s}",
                fine.period(),
                MIN_PERIOD_FACTOR
            )));
        }
        let kernel = HelmholtzKernel::new(k, fine)?;
        let q_fine = sample_medium(medium, &fine);
        Ok(ForwardSolver { kernel, medium: medium.clone(), q_fine, gmres })
    }

    /// Wavenumber.
    pub fn k(&self) -> f64 {
        self.kernel.k()
    }

    /// Fine grid of the discretization.
    pub fn grid(&self) -> FineGrid {
        self.kernel.grid()
    }

    /// The coarse medium this solver was built from.
    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    /// The contrast sampled on the fine grid.
    pub fn contrast(&self) -> &[C64] {
        &self.q_fine
    }

    /// The periodized kernel.
    pub fn kernel(&self) -> &HelmholtzKernel {
        &self.kernel
    }

    /// Applies the system operator `v ↦ v − k² C(q v)`.
    ///
    /// # Panics
    ///
    /// Panics if `v.len()` does not match the grid.
    pub fn apply_operator(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.grid().node_count(), "operator input length mismatch");
        let weighted: Vec<C64> = v.iter().zip(&self.q_fine).map(|(a, q)| a * q).collect();
        let conv = self.kernel.convolve(&weighted);
        let k2 = self.k() * self.k();
        v.iter().zip(conv).map(|(a, c)| a - k2 * c).collect()
    }

    /// Solves for the total field of one incident plane-wave direction.
    pub fn solve(&self, direction: [f64; 2]) -> Result<TotalField> {
        let uinc = incident_plane_wave(self.k(), direction, &self.grid())?;
        let solution = gmres(|v| self.apply_operator(v), &uinc, &self.gmres)?;
        Ok(TotalField {
            grid: self.grid(),
            k: self.k(),
            direction,
            values: solution.x,
            residual: solution.residual,
        })
    }

    /// Solves all directions of a set, in parallel when the `parallel`
    /// feature is enabled. Results are returned in direction order and are
    /// bitwise independent of the thread schedule.
    pub fn solve_many(&self, directions: &DirectionSet) -> Result<Vec<TotalField>> {
        par::try_map(directions.len(), |i| self.solve(directions.direction(i)))
    }

    /// Assembles the dense system matrix `I − k² C Q`. Only available for
    /// grids up to 32 × 32 nodes; intended as an oracle for the matrix-free
    /// path, not for production solves.
    pub fn dense_operator(&self) -> Result<DMatrix<C64>> {
        let n = self.grid().n();
        if n > DENSE_ORACLE_MAX_N {
            return Err(Error::Dimension(format!(
                "dense oracle limited to {DENSE_ORACLE_MAX_N} x {DENSE_ORACLE_MAX_N} grids, got {n} x {n}"
            )));
        }
        let dim = self.grid().node_count();
        let mut a = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::new(0.0, 0.0); dim];
        for col in 0..dim {
            e[col] = C64::new(1.0, 0.0);
            let column = self.apply_operator(&e);
            for (row, value) in column.into_iter().enumerate() {
                a[(row, col)] = value;
            }
            e[col] = C64::new(0.0, 0.0);
        }
        Ok(a)
    }

    /// Solves one direction through the dense LU oracle instead of GMRES.
    /// Subject to the same grid-size limit as [`ForwardSolver::dense_operator`].
    pub fn solve_dense(&self, direction: [f64; 2]) -> Result<TotalField> {
        let a = self.dense_operator()?;
        let uinc = incident_plane_wave(self.k(), direction, &self.grid())?;
        let b = DVector::from_column_slice(&uinc);
        let lu = a.lu();
        let x = lu
            .solve(&b)
            .ok_or_else(|| Error::Linalg("dense forward operator is singular".into()))?;
        let values: Vec<C64> = x.iter().copied().collect();
        let residual_vec = self.apply_operator(&values);
        let num: f64 = residual_vec
            .iter()
            .zip(&uinc)
            .map(|(r, b)| (r - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = uinc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Ok(TotalField {
            grid: self.grid(),
            k: self.k(),
            direction,
            values,
            residual: num / den,
        })
    }

    /// Far field of a solved total field at the given observation directions,
    /// by fine-grid quadrature with the solver's own sampled contrast.
    ///
    /// # Panics
    ///
    /// Panics if `field` was solved on a different grid or wavenumber.
    pub fn far_field(&self, field: &TotalField, observations: &DirectionSet) -> Vec<C64> {
        assert_eq!(field.grid(), self.grid(), "far_field: grid mismatch");
        assert_eq!(field.k(), self.k(), "far_field: wavenumber mismatch");
        let q_u: Vec<C64> =
            self.q_fine.iter().zip(field.values()).map(|(q, u)| q * u).collect();
        observations
            .iter()
            .map(|obs| far_field_quadrature(self.k(), &self.grid(), &q_u, obs))
            .collect()
    }

    /// Full far-field matrix over incident and observation direction sets:
    /// one Krylov solve per incident direction, then quadrature. Runs in
    /// parallel over incident directions when the `parallel` feature is on.
    pub fn far_field_map(
        &self,
        incident: &DirectionSet,
        observations: &DirectionSet,
    ) -> Result<FarFieldSet> {
        let columns = par::try_map(incident.len(), |i| -> Result<Vec<C64>> {
            let field = self.solve(incident.direction(i))?;
            Ok(self.far_field(&field, observations))
        })?;
        FarFieldSet::from_columns(&columns, observations.clone(), incident.clone())
    }
}

/// One far-field entry `(k² h²/4π) Σ_p exp(−i k x̂·x_p) (q u)(x_p)`, with the
/// phase factorized over the two coordinates so no per-node `exp` is needed.
fn far_field_quadrature(k: f64, fine: &FineGrid, q_u: &[C64], observation: [f64; 2]) -> C64 {
    let n = fine.n();
    let phase_1: Vec<C64> =
        (0..n).map(|i| C64::from_polar(1.0, -k * observation[0] * fine.coordinate(i))).collect();
    let phase_2: Vec<C64> =
        (0..n).map(|i| C64::from_polar(1.0, -k * observation[1] * fine.coordinate(i))).collect();
    let mut total = C64::new(0.0, 0.0);
    for (p1, line) in phase_1.iter().zip(q_u.chunks_exact(n)) {
        let mut row = C64::new(0.0, 0.0);
        for (p2, v) in phase_2.iter().zip(line) {
            row += p2 * v;
        }
        total += p1 * row;
    }
    let h = fine.spacing();
    total * C64::new(k * k * h * h / (4.0 * PI), 0.0)
}

/// Far field of an existing total field against an explicitly supplied
/// medium (resampled on the field's grid). The solver method
/// [`ForwardSolver::far_field`] is preferred when a solver is at hand; this
/// free function exists so oracles can mix fields and media.
pub fn far_field(field: &TotalField, medium: &Medium, observations: &DirectionSet) -> Result<Vec<C64>> {
    let fine = field.grid();
    if fine.period() < 2.0 * medium.grid().half_width() {
        return Err(Error::Domain(
            "far_field: fine grid does not cover the medium support".into(),
        ));
    }
    let q = sample_medium(medium, &fine);
    let q_u: Vec<C64> = q.iter().zip(field.values()).map(|(a, b)| a * b).collect();
    Ok(observations
        .iter()
        .map(|obs| far_field_quadrature(field.k(), &fine, &q_u, obs))
        .collect())
}

// ---- far-field data sets -------------------------------------------------------

/// Far-field samples `u∞(x̂_j, θ_n)` arranged as a `J × N` matrix: rows are
/// observation directions, columns incident directions. The stacked vector
/// used by the reconstruction algorithms is column-major, i.e. measurement
/// `n` occupies entries `nJ..(n+1)J`.
#[derive(Debug, Clone)]
pub struct FarFieldSet {
    values: DMatrix<C64>,
    observations: DirectionSet,
    incidents: DirectionSet,
}

impl FarFieldSet {
    /// Wraps a `J × N` matrix of samples.
    pub fn new(
        values: DMatrix<C64>,
        observations: DirectionSet,
        incidents: DirectionSet,
    ) -> Result<Self> {
        if values.nrows() != observations.len() || values.ncols() != incidents.len() {
            return Err(Error::Dimension(format!(
                "far-field matrix is {} x {}, expected {} x {}",
                values.nrows(),
                values.ncols(),
                observations.len(),
                incidents.len()
            )));
        }
        Ok(FarFieldSet { values, observations, incidents })
    }

    /// Builds the set from per-incident-direction columns.
    pub fn from_columns(
        columns: &[Vec<C64>],
        observations: DirectionSet,
        incidents: DirectionSet,
    ) -> Result<Self> {
        if columns.len() != incidents.len()
            || columns.iter().any(|c| c.len() != observations.len())
        {
            return Err(Error::Dimension("far-field column dimensions mismatch".into()));
        }
        let values = DMatrix::from_fn(observations.len(), incidents.len(), |j, n| columns[n][j]);
        Ok(FarFieldSet { values, observations, incidents })
    }

    /// Number of observation directions `J`.
    pub fn observation_count(&self) -> usize {
        self.observations.len()
    }

    /// Number of incident directions `N`.
    pub fn incident_count(&self) -> usize {
        self.incidents.len()
    }

    /// Observation direction set.
    pub fn observations(&self) -> &DirectionSet {
        &self.observations
    }

    /// Incident direction set.
    pub fn incidents(&self) -> &DirectionSet {
        &self.incidents
    }

    /// The `J × N` sample matrix.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.values
    }

    /// Sample for observation `j`, incident direction `n`.
    pub fn value(&self, j: usize, n: usize) -> C64 {
        self.values[(j, n)]
    }

    /// The measurement column for incident direction `n`.
    pub fn column(&self, n: usize) -> DVector<C64> {
        DVector::from_column_slice(self.values.column(n).as_slice())
    }

    /// All measurement columns in incident order.
    pub fn columns(&self) -> Vec<DVector<C64>> {
        (0..self.incident_count()).map(|n| self.column(n)).collect()
    }

    /// All samples stacked into one vector, measurement-major (column-major
    /// of the `J × N` matrix).
    pub fn stacked(&self) -> DVector<C64> {
        DVector::from_column_slice(self.values.as_slice())
    }
}

/// Computes the full far-field matrix for `medium`: a convenience wrapper
/// building a [`ForwardSolver`] and calling [`ForwardSolver::far_field_map`].
pub fn forward_map(
    medium: &Medium,
    k: f64,
    fine: FineGrid,
    gmres: GmresOptions,
    incident: &DirectionSet,
    observations: &DirectionSet,
) -> Result<FarFieldSet> {
    ForwardSolver::new(medium, k, fine, gmres)?.far_field_map(incident, observations)
}

/// Born-approximation far-field map: the total field in the quadrature is
/// replaced by the incident plane wave, so no linear system is solved. This
/// is the exact linearization of the discrete forward map at zero contrast,
/// on the same grid and quadrature as [`forward_map`].
pub fn born_map(
    medium: &Medium,
    k: f64,
    fine: FineGrid,
    incident: &DirectionSet,
    observations: &DirectionSet,
) -> Result<FarFieldSet> {
    if fine.period() < 2.0 * medium.grid().half_width() {
        return Err(Error::Domain(
            "born_map: fine grid does not cover the medium support".into(),
        ));
    }
    let q = sample_medium(medium, &fine);
    let columns = par::try_map(incident.len(), |i| -> Result<Vec<C64>> {
        let uinc = incident_plane_wave(k, incident.direction(i), &fine)?;
        let q_u: Vec<C64> = q.iter().zip(&uinc).map(|(a, b)| a * b).collect();
        Ok(observations
            .iter()
            .map(|obs| far_field_quadrature(k, &fine, &q_u, obs))
            .collect::<Vec<C64>>())
    })?;
    FarFieldSet::from_columns(&columns, observations.clone(), incident.clone())
}

// ---- tests ---------------------------------------------------------------------

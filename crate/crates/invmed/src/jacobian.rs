//! Linearization of the far-field map with respect to the contrast.
//!
//! The measurement map sends a piecewise-constant contrast `q` (one complex
//! value per coarse cell) to the far-field samples `u∞(x̂_j, θ_n)`. Writing
//! the discrete far field as `u∞(x̂_j) = c φ_jᵀ Q u`, with `φ_j` the sampled
//! phase `exp(−i k x̂_j·x)`, `Q` the diagonal of the fine-sampled contrast,
//! `u = (I − k² C Q)⁻¹ u\u{2071}` the total field, and `c = k²h²/4π` the
//! quadrature constant, the exact derivative with respect to the value on
//! coarse cell `m` follows from the product rule and the symmetry of the
//! convolution matrix `C`:
//!
//! ```text
//! ∂u∞(x̂_j, θ_n)/∂q_m = c Σ_{p ∈ cell m} w_j(x_p) u_n(x_p),
//! ```
//!
//! where `w_j` is the *kernel field*: the total field for the incident
//! plane-wave direction `−x̂_j`. This is the discrete form of the classical
//! reciprocity identity — the kernel of the Fréchet derivative evaluated at
//! `(x̂, y)` equals the total field at `y` generated by an incident wave from
//! direction `−x̂` — and at the same time the *exact* derivative of the
//! implemented discrete forward map, so finite-difference checks converge at
//! second order all the way down to solver tolerance.
//!
//! One full linearization therefore costs `J` kernel solves (shared by all
//! measurements) plus `N` total-field solves: `J + N` Krylov solves per
//! linearization point. Relinearizing at a single measurement (the extended
//! Kalman filter's inner update) costs `J + 1` solves because the kernel
//! fields depend on the linearization point.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::forward::{FarFieldSet, FineGrid, ForwardSolver};
use crate::grid::{CellGrid, DirectionSet, Medium};
use crate::kalman::{FullLinearization, MeasurementModel};
use crate::linalg::GmresOptions;
use crate::par;
use crate::{Error, Result, C64};

use std::f64::consts::PI;

// ---- scattering model ----------------------------------------------------------

/// The fixed geometry of a scattering experiment: wavenumber, coarse
/// reconstruction grid, fine solver grid, and the incident/observation
/// direction sets. Holds no linearization state; every method takes the base
/// contrast explicitly.
pub struct ScatteringModel {
    k: f64,
    coarse: CellGrid,
    fine: FineGrid,
    incidents: DirectionSet,
    observations: DirectionSet,
    gmres: GmresOptions,
    /// Fine-node indices inside each coarse cell, in storage order.
    cell_nodes: Vec<Vec<usize>>,
}

impl ScatteringModel {
    /// Builds the model. Requires the fine period to be at least four times
    /// the coarse half-width (so the periodized kernel is exact on the
    /// support) and the fine spacing to be at most one coarse cell (so every
    /// cell contains at least one quadrature node and no derivative column
    /// degenerates to zero).
    pub fn new(
        k: f64,
        coarse: CellGrid,
        fine: FineGrid,
        incidents: DirectionSet,
        observations: DirectionSet,
        gmres: GmresOptions,
    ) -> Result<Self> {
        if fine.spacing() > coarse.cell_size() + 1e-12 {
            return Err(Error::Domain(format!(
                "fine spacing {} exceeds coarse cell size {}; some cells would \
                 contain no quadrature node",
                fine.spacing(),
                coarse.cell_size()
            )));
        }
        if incidents.is_empty() || observations.is_empty() {
            return Err(Error::Domain("direction sets must be nonempty".into()));
        }
        // Delegate the period check to the solver constructor used later, but
        // fail fast here with the same rule.
        let probe = Medium::zero(coarse);
        ForwardSolver::new(&probe, k, fine, gmres)?;
        let map = crate::forward::cell_map(&fine, &coarse);
        let mut cell_nodes = vec![Vec::new(); coarse.num_cells()];
        for (node, cell) in map.into_iter().enumerate() {
            if let Some(c) = cell {
                cell_nodes[c].push(node);
            }
        }
        Ok(ScatteringModel { k, coarse, fine, incidents, observations, gmres, cell_nodes })
    }

    /// Wavenumber.
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Coarse reconstruction grid.
    pub fn coarse(&self) -> CellGrid {
        self.coarse
    }

    /// Fine solver grid.
    pub fn fine(&self) -> FineGrid {
        self.fine
    }

    /// Incident direction set (one measurement per direction).
    pub fn incidents(&self) -> &DirectionSet {
        &self.incidents
    }

    /// Observation direction set.
    pub fn observations(&self) -> &DirectionSet {
        &self.observations
    }

    /// Number of measurements `N`.
    pub fn measurement_count(&self) -> usize {
        self.incidents.len()
    }

    /// Samples per measurement `J`.
    pub fn observation_dim(&self) -> usize {
        self.observations.len()
    }

    /// Number of unknowns (coarse cells).
    pub fn state_dim(&self) -> usize {
        self.coarse.num_cells()
    }

    /// Quadrature constant `k² h² / 4π` of the far-field sum.
    fn quadrature_constant(&self) -> f64 {
        let h = self.fine.spacing();
        self.k * self.k * h * h / (4.0 * PI)
    }

    fn solver_for(&self, base: &Medium) -> Result<ForwardSolver> {
        if base.grid() != self.coarse {
            return Err(Error::Dimension(
                "base medium lives on a different coarse grid than the model".into(),
            ));
        }
        ForwardSolver::new(base, self.k, self.fine, self.gmres)
    }

    /// Solves the kernel fields `w_j` (incident direction `−x̂_j`) for all
    /// observation directions, in parallel when enabled.
    fn kernel_fields(&self, solver: &ForwardSolver) -> Result<Vec<crate::forward::TotalField>> {
        par::try_map(self.observations.len(), |j| {
            let d = self.observations.direction(j);
            solver.solve([-d[0], -d[1]])
        })
    }

    /// Far-field data `A_n(q)` for every measurement, without derivatives.
    pub fn forward_medium(&self, base: &Medium) -> Result<FarFieldSet> {
        self.solver_for(base)?.far_field_map(&self.incidents, &self.observations)
    }

    /// Full linearization at `base`: the far field `A_n(base)` and the
    /// derivative block `A′_n` for every measurement `n`, all sharing the one
    /// linearization point. Costs `J + N` solves.
    pub fn assemble(&self, base: &Medium) -> Result<LinearizedOperator> {
        let solver = self.solver_for(base)?;
        let kernels = self.kernel_fields(&solver)?;
        let fields = solver.solve_many(&self.incidents)?;
        let columns: Vec<Vec<C64>> =
            fields.iter().map(|f| solver.far_field(f, &self.observations)).collect();
        let base_farfield = FarFieldSet::from_columns(
            &columns,
            self.observations.clone(),
            self.incidents.clone(),
        )?;
        let blocks = par::try_map(self.incidents.len(), |n| -> Result<DMatrix<C64>> {
            Ok(self.derivative_block(&kernels, fields[n].values()))
        })?;
        Ok(LinearizedOperator { base: base.clone(), base_farfield, blocks })
    }

    /// Linearization of a single measurement `n` at `base`: returns
    /// `(A_n(base), A′_n(base))`. Costs `J + 1` solves; meant for filters
    /// that relinearize between measurements.
    pub fn linearize_measurement(
        &self,
        base: &Medium,
        n: usize,
    ) -> Result<(DVector<C64>, DMatrix<C64>)> {
        if n >= self.incidents.len() {
            return Err(Error::Dimension(format!(
                "measurement index {n} out of range (N = {})",
                self.incidents.len()
            )));
        }
        let solver = self.solver_for(base)?;
        let kernels = self.kernel_fields(&solver)?;
        let field = solver.solve(self.incidents.direction(n))?;
        let value = DVector::from_vec(solver.far_field(&field, &self.observations));
        let block = self.derivative_block(&kernels, field.values());
        Ok((value, block))
    }

    /// The `J × cells` derivative block for one measurement, given the kernel
    /// fields and the total field of that measurement.
    fn derivative_block(
        &self,
        kernels: &[crate::forward::TotalField],
        field: &[C64],
    ) -> DMatrix<C64> {
        let j_count = self.observations.len();
        let cells = self.coarse.num_cells();
        let c = self.quadrature_constant();
        let mut block = DMatrix::zeros(j_count, cells);
        for (m, nodes) in self.cell_nodes.iter().enumerate() {
            for (j, kernel) in kernels.iter().enumerate() {
                let w = kernel.values();
                let mut sum = C64::new(0.0, 0.0);
                for &p in nodes {
                    sum += w[p] * field[p];
                }
                block[(j, m)] = c * sum;
            }
        }
        block
    }

    /// The kernel matrix `K(x̂_j, y_m)`: the kernel field `w_j` sampled at
    /// the coarse-cell centers (snapped to the nearest fine node). `J` solves.
    pub fn kernel_matrix(&self, base: &Medium) -> Result<DMatrix<C64>> {
        let solver = self.solver_for(base)?;
        let kernels = self.kernel_fields(&solver)?;
        let cells = self.coarse.num_cells();
        let mut out = DMatrix::zeros(self.observations.len(), cells);
        for (j, kernel) in kernels.iter().enumerate() {
            let at_centers = kernel.at_cell_centers(&self.coarse);
            for m in 0..cells {
                out[(j, m)] = at_centers[m];
            }
        }
        Ok(out)
    }

    /// Converts a flat state vector into a medium on the coarse grid.
    pub fn medium_from_state(&self, state: &DVector<C64>) -> Result<Medium> {
        Medium::new(self.coarse, state.iter().copied().collect())
    }
}

// ---- linearized operator ---------------------------------------------------------

/// The measurement map linearized at one base contrast: per-measurement
/// derivative blocks `A′_n` (each `J × cells`) plus the base far field
/// `A_n(base)`. Rows of the stacked operator are ordered measurement-major:
/// row `n·J + j` is observation `j` of measurement `n`, matching
/// [`FarFieldSet::stacked`].
pub struct LinearizedOperator {
    base: Medium,
    base_farfield: FarFieldSet,
    blocks: Vec<DMatrix<C64>>,
}

impl LinearizedOperator {
    /// The linearization point.
    pub fn base_point(&self) -> &Medium {
        &self.base
    }

    /// Far-field data at the linearization point.
    pub fn base_farfield(&self) -> &FarFieldSet {
        &self.base_farfield
    }

    /// Number of measurements `N`.
    pub fn measurement_count(&self) -> usize {
        self.blocks.len()
    }

    /// Samples per measurement `J`.
    pub fn observation_dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    /// Number of unknowns.
    pub fn state_dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.ncols())
    }

    /// Derivative block of measurement `n`.
    pub fn block(&self, n: usize) -> &DMatrix<C64> {
        &self.blocks[n]
    }

    /// All blocks in measurement order.
    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Base far field of measurement `n` as a column vector.
    pub fn base_column(&self, n: usize) -> DVector<C64> {
        self.base_farfield.column(n)
    }

    /// The stacked `(N·J) × cells` operator.
    pub fn stacked(&self) -> DMatrix<C64> {
        let nj = self.measurement_count() * self.observation_dim();
        let cells = self.state_dim();
        let mut out = DMatrix::zeros(nj, cells);
        for (n, block) in self.blocks.iter().enumerate() {
            let offset = n * self.observation_dim();
            out.view_mut((offset, 0), (block.nrows(), cells)).copy_from(block);
        }
        out
    }

    /// Applies the stacked operator to a state perturbation.
    pub fn apply(&self, dq: &DVector<C64>) -> DVector<C64> {
        let j_dim = self.observation_dim();
        let mut out = DVector::zeros(self.measurement_count() * j_dim);
        for (n, block) in self.blocks.iter().enumerate() {
            let column = block * dq;
            out.rows_mut(n * j_dim, j_dim).copy_from(&column);
        }
        out
    }

    /// Decomposes the operator into its base point, base far field, and
    /// derivative blocks.
    pub fn into_parts(self) -> (Medium, FarFieldSet, Vec<DMatrix<C64>>) {
        (self.base, self.base_farfield, self.blocks)
    }

    /// Writes all blocks as CSV rows `n,j,m,re,im` (zero-based indices), for
    /// offline inspection of the derivative.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "n,j,m,re,im")?;
        for (n, block) in self.blocks.iter().enumerate() {
            for j in 0..block.nrows() {
                for m in 0..block.ncols() {
                    let v = block[(j, m)];
                    writeln!(out, "{},{},{},{:e},{:e}", n, j, m, v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

// ---- measurement-model integration ---------------------------------------------------

impl MeasurementModel for ScatteringModel {
    fn measurement_count(&self) -> usize {
        self.incidents.len()
    }

    fn observation_dim(&self) -> usize {
        self.observations.len()
    }

    fn state_dim(&self) -> usize {
        self.coarse.num_cells()
    }

    fn forward(&self, state: &DVector<C64>) -> Result<Vec<DVector<C64>>> {
        let medium = self.medium_from_state(state)?;
        Ok(self.forward_medium(&medium)?.columns())
    }

    fn linearize_all(&self, state: &DVector<C64>) -> Result<FullLinearization> {
        let medium = self.medium_from_state(state)?;
        let (_, base_farfield, blocks) = self.assemble(&medium)?.into_parts();
        Ok(FullLinearization { values: base_farfield.columns(), blocks })
    }

    fn linearize_one(
        &self,
        state: &DVector<C64>,
        n: usize,
    ) -> Result<(DVector<C64>, DMatrix<C64>)> {
        let medium = self.medium_from_state(state)?;
        self.linearize_measurement(&medium, n)
    }
}

// ---- tests -------------------------------------------------------------------------

//! Sampling geometry: the cell decomposition of the contrast square, unit
//! direction sets for incident/observation angles, and piecewise-constant
//! media.
//!
//! The unknown contrast lives on the square `[-S, S]^2`, split into
//! `(2M)^2` congruent cells with centers
//!
//! ```text
//! y[m1, m2] = ((2 m1 + 1) S / (2M), (2 m2 + 1) S / (2M)),   -M <= m1, m2 < M
//! ```
//!
//! A [`Medium`] is one complex value per cell, stored row-major with `m1`
//! as the slow index. Directions are the `count` equispaced unit vectors
//! `(cos(2 pi n / count), sin(2 pi n / count))`, `n = 1..=count`.

use crate::{Error, Result};
use num_complex::Complex64;

/// Uniform cell decomposition of `[-S, S]^2` into `(2M)^2` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    s: f64,
    m: usize,
}

impl CellGrid {
    /// A grid with half-width `s > 0` and `2 m` cells per axis (`m >= 1`).
    pub fn new(s: f64, m: usize) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("grid half-width must be positive, got {s}")));
        }
        if m == 0 {
            return Err(Error::Domain("grid needs at least one cell per half-axis".into()));
        }
        Ok(CellGrid { s, m })
    }

    pub fn half_width(&self) -> f64 {
        self.s
    }

    /// `M`: cells per half-axis.
    pub fn divisions(&self) -> usize {
        self.m
    }

    pub fn num_cells(&self) -> usize {
        4 * self.m * self.m
    }

    /// Side length of one cell, `S / M`.
    pub fn cell_size(&self) -> f64 {
        self.s / self.m as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.cell_size();
        h * h
    }

    /// Center of cell `(m1, m2)` with `-M <= m1, m2 < M`.
    pub fn center(&self, m1: i64, m2: i64) -> [f64; 2] {
        let f = |m: i64| (2 * m + 1) as f64 * self.s / (2.0 * self.m as f64);
        [f(m1), f(m2)]
    }

    /// Flat storage index of cell `(m1, m2)`; `m2` varies fastest.
    pub fn cell_index(&self, m1: i64, m2: i64) -> usize {
        let m = self.m as i64;
        debug_assert!(m1 >= -m && m1 < m && m2 >= -m && m2 < m);
        ((m1 + m) * 2 * m + (m2 + m)) as usize
    }

    /// Inverse of [`CellGrid::cell_index`].
    pub fn multi_index(&self, idx: usize) -> (i64, i64) {
        let m = self.m as i64;
        let idx = idx as i64;
        (idx / (2 * m) - m, idx % (2 * m) - m)
    }

    /// Cell centers in storage order.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let m = self.m as i64;
        let mut out = Vec::with_capacity(self.num_cells());
        for m1 in -m..m {
            for m2 in -m..m {
                out.push(self.center(m1, m2));
            }
        }
        out
    }

    /// Index of the cell containing `point`, or `None` outside the square.
    /// Cells are half-open: a point on an interior boundary belongs to the
    /// cell on its upper-right side.
    pub fn cell_containing(&self, point: [f64; 2]) -> Option<usize> {
        let h = self.cell_size();
        let m = self.m as i64;
        let locate = |x: f64| -> Option<i64> {
            let idx = ((x + self.s) / h).floor() as i64 - m;
            (-m..m).contains(&idx).then_some(idx)
        };
        Some(self.cell_index(locate(point[0])?, locate(point[1])?))
    }
}

/// Construct the standard cell grid; thin wrapper kept for call-site
/// symmetry with [`make_directions`].
pub fn make_grid(s: f64, m: usize) -> Result<CellGrid> {
    CellGrid::new(s, m)
}

/// Equispaced unit vectors on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    vectors: Vec<[f64; 2]>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Direction with zero-based index `i`, i.e. angle `2 pi (i+1) / count`.
    pub fn direction(&self, i: usize) -> [f64; 2] {
        self.vectors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.vectors.iter().copied()
    }

    /// Index of `-d_i` when the set is closed under negation (even count).
    pub fn negation_index(&self, i: usize) -> Option<usize> {
        let n = self.len();
        n.is_multiple_of(2).then(|| (i + n / 2) % n)
    }
}

/// `count` unit vectors at angles `2 pi n / count`, `n = 1..=count`.
pub fn make_directions(count: usize) -> Result<DirectionSet> {
    if count == 0 {
        return Err(Error::Domain("direction set must not be empty".into()));
    }
    let vectors = (1..=count)
        .map(|n| {
            let a = 2.0 * std::f64::consts::PI * n as f64 / count as f64;
            [a.cos(), a.sin()]
        })
        .collect();
    Ok(DirectionSet { vectors })
}

/// The two scatterer geometries used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeTag {
    /// Disk `x1^2 + x2^2 < 1.5` centered at the origin.
    B1,
    /// Union of the disk `(x1+1.5)^2 + (x2+1.5)^2 < 1` and two rectangular
    /// panels `(1,2) x (-2,2)` and `(-2,2) x (-2,-1)`.
    B2,
}

impl ShapeTag {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [x, y] = p;
        match self {
            ShapeTag::B1 => x * x + y * y < 1.5,
            ShapeTag::B2 => {
                (x + 1.5) * (x + 1.5) + (y + 1.5) * (y + 1.5) < 1.0
                    || (1.0 < x && x < 2.0 && -2.0 < y && y < 2.0)
                    || (-2.0 < x && x < 2.0 && -2.0 < y && y < -1.0)
            }
        }
    }
}

impl std::str::FromStr for ShapeTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(ShapeTag::B1),
            "b2" => Ok(ShapeTag::B2),
            other => Err(Error::Config(format!("unknown shape '{other}', expected b1 or b2"))),
        }
    }
}

/// A shape together with the constant contrast it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeId {
    pub tag: ShapeTag,
    pub contrast: Complex64,
}

impl ShapeId {
    pub fn new(tag: ShapeTag, contrast: Complex64) -> Self {
        ShapeId { tag, contrast }
    }

    /// The default experimental contrast of 0.1.
    pub fn with_default_contrast(tag: ShapeTag) -> Self {
        ShapeId { tag, contrast: Complex64::new(0.1, 0.0) }
    }
}

/// Piecewise-constant complex contrast on a [`CellGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    grid: CellGrid,
    values: Vec<Complex64>,
}

impl Medium {
    /// Wrap per-cell values. All values must be finite; physically
    /// meaningful media additionally have nonnegative imaginary part
    /// (see [`Medium::is_physical`]), but algorithm iterates are allowed
    /// to leave that half-space transiently, so it is not enforced here.
    pub fn new(grid: CellGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Dimension(format!(
                "medium has {} values for {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("medium contains non-finite values".into()));
        }
        Ok(Medium { grid, values })
    }

    pub fn zero(grid: CellGrid) -> Self {
        Medium { grid, values: vec![Complex64::ZERO; grid.num_cells()] }
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, m1: i64, m2: i64) -> Complex64 {
        self.values[self.grid.cell_index(m1, m2)]
    }

    /// Absorption is never negative in a passive medium.
    pub fn is_physical(&self) -> bool {
        self.values.iter().all(|v| v.im >= 0.0)
    }

    /// Squared Euclidean distance to another medium on the same grid,
    /// i.e. the plain (unweighted) sum of `|a - b|^2` over cells.
    pub fn mse(&self, other: &Medium) -> Result<f64> {
        mse(self, other)
    }
}

/// Characteristic function of `shape` sampled at cell centers: each cell
/// whose center lies inside the shape gets the shape's contrast, all
/// others zero.
pub fn characteristic_medium(shape: &ShapeId, grid: CellGrid) -> Medium {
    let values = grid
        .centers()
        .into_iter()
        .map(|c| if shape.tag.contains(c) { shape.contrast } else { Complex64::ZERO })
        .collect();
    Medium { grid, values }
}

/// Squared cellwise Euclidean error `sum_m |a_m - b_m|^2`.
pub fn mse(a: &Medium, b: &Medium) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::Dimension("mse of media on different grids".into()));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum())
}

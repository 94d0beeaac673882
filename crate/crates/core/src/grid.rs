//! Cell-centered finite-difference grids on intervals and rectangles with
//! homogeneous Neumann conditions.
//!
//! Neumann conditions are realized by mirror ghost values (`a_{-1} = a_0`,
//! `a_M = a_{M-1}`), so the discrete Laplacian annihilates constants and its
//! cell sum telescopes to zero. In 2D the operator is the Kronecker sum of the
//! 1D operators; nodes are stored row-major with the x axis fastest.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::{ConstantState, ModelParams};
use crate::{Error, Result};

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    lengths: Vec<f64>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

/// Serialized form of a grid: `{dim, lengths, cells}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        if s.dim != s.lengths.len() {
            return Err(Error::InvalidGrid(format!(
                "dim = {} but {} lengths given",
                s.dim,
                s.lengths.len()
            )));
        }
        Grid::new(&s.lengths, &s.cells)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            dim: g.dim(),
            lengths: g.lengths,
            cells: g.cells,
        }
    }
}

impl Grid {
    /// Builds a 1D or 2D box grid; `lengths` and `cells` must agree in size.
    pub fn new(lengths: &[f64], cells: &[usize]) -> Result<Self> {
        if !(1..=2).contains(&lengths.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2, got {}",
                lengths.len()
            )));
        }
        if lengths.len() != cells.len() {
            return Err(Error::InvalidGrid(format!(
                "{} lengths but {} cell counts",
                lengths.len(),
                cells.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidGrid(format!("length must be > 0, got {l}")));
        }
        if let Some(m) = cells.iter().find(|&&m| m < MIN_CELLS) {
            return Err(Error::InvalidGrid(format!(
                "at least {MIN_CELLS} cells per axis required, got {m}"
            )));
        }
        let spacing = lengths
            .iter()
            .zip(cells)
            .map(|(l, &m)| l / m as f64)
            .collect();
        Ok(Self {
            lengths: lengths.to_vec(),
            cells: cells.to_vec(),
            spacing,
        })
    }

    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        Self::new(&[length], &[cells])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Coordinates of the cell center with flat index `idx`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        self.cells
            .iter()
            .zip(&self.spacing)
            .map(|(&m, &h)| {
                let j = rem % m;
                rem /= m;
                (j as f64 + 0.5) * h
            })
            .collect()
    }

    /// Row-major strides per axis.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.dim());
        let mut acc = 1;
        for &m in &self.cells {
            s.push(acc);
            acc *= m;
        }
        s
    }

    /// Midpoint-rule integral of nodal values.
    pub fn integrate(&self, a: &[f64]) -> f64 {
        a.iter().sum::<f64>() * self.cell_volume()
    }

    fn check_len(&self, a: &[f64]) -> Result<()> {
        if a.len() == self.len() {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.len(),
                got: a.len(),
            })
        }
    }

    /// Second-order discrete Laplacian with mirror ghosts.
    pub fn laplacian_apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.check_len(a)?;
        let mut out = vec![0.0; a.len()];
        self.laplacian_into(a, &mut out);
        Ok(out)
    }

    /// Unchecked form of [`Grid::laplacian_apply`] writing into `out`.
    pub(crate) fn laplacian_into(&self, a: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let strides = self.strides();
        for (axis, (&m, &h)) in self.cells.iter().zip(&self.spacing).enumerate() {
            let stride = strides[axis];
            let inv_h2 = 1.0 / (h * h);
            for (idx, o) in out.iter_mut().enumerate() {
                let j = (idx / stride) % m;
                let left = if j > 0 { a[idx - stride] } else { a[idx] };
                let right = if j + 1 < m { a[idx + stride] } else { a[idx] };
                // flux differences keep the cell sum telescoping
                *o += ((right - a[idx]) - (a[idx] - left)) * inv_h2;
            }
        }
    }

    /// Continuous and discrete Neumann eigenvalues of `−Δ` for the mode with
    /// one index per axis: `Σ (m π / L)²` and `Σ (2/h²)(1 − cos(m π / M))`.
    pub fn neumann_eigenvalues(&self, modes: &[usize]) -> Result<(f64, f64)> {
        if modes.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} mode indices, got {}",
                self.dim(),
                modes.len()
            )));
        }
        let mut cont = 0.0;
        let mut disc = 0.0;
        for axis in 0..self.dim() {
            let m = modes[axis];
            let cells = self.cells[axis];
            if m >= cells {
                return Err(Error::ModeOutOfRange { mode: m, cells });
            }
            cont += (m as f64 * PI / self.lengths[axis]).powi(2);
            disc += axis_eigenvalue(m, cells, self.spacing[axis]);
        }
        Ok((cont, disc))
    }

    /// Discrete eigenvector `Π cos(m π (j + 1/2) / M)` sampled at cell centers.
    pub fn cosine_mode(&self, modes: &[usize]) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let mut rem = idx;
                self.cells
                    .iter()
                    .zip(modes)
                    .map(|(&cells, &m)| {
                        let j = rem % cells;
                        rem /= cells;
                        (m as f64 * PI * (j as f64 + 0.5) / cells as f64).cos()
                    })
                    .product()
            })
            .collect()
    }
}

/// `(2/h²)(1 − cos(m π / M))`, written with a sine to avoid cancellation.
pub(crate) fn axis_eigenvalue(m: usize, cells: usize, h: f64) -> f64 {
    let s = (m as f64 * PI / (2.0 * cells as f64)).sin();
    4.0 * s * s / (h * h)
}

/// Nodal values of all `N + 1` densities, ordered `(w_1, ..., w_N, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl Field {
    /// Validates component lengths and finiteness.
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("field needs at least one component".into()));
        }
        for c in &components {
            grid.check_len(c)?;
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("field values must be finite".into()));
            }
        }
        Ok(Self { grid, components })
    }

    /// Broadcasts constant component values over the grid.
    pub fn uniform(grid: &Grid, values: &[f64]) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            components: values.iter().map(|&v| vec![v; n]).collect(),
        }
    }

    pub fn from_constant(grid: &Grid, s: &ConstantState) -> Self {
        Self::uniform(grid, &s.components())
    }

    /// Number of predator components (all but the last).
    pub fn packs(&self) -> usize {
        self.components.len() - 1
    }

    pub fn prey(&self) -> &[f64] {
        &self.components[self.packs()]
    }

    pub fn predators(&self) -> &[Vec<f64>] {
        &self.components[..self.packs()]
    }

    /// Aggregate predator density `H = Σ w_i` at each node.
    pub fn aggregate(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.grid.len()];
        for w in self.predators() {
            for (a, b) in h.iter_mut().zip(w) {
                *a += b;
            }
        }
        h
    }

    /// Spatial means of every component.
    pub fn means(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        self.components
            .iter()
            .map(|c| c.iter().sum::<f64>() / n)
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|x| x.is_finite())
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_distance(&self, other: &Field) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Full residual `D_c Δ_h s_c + f_c(s)` of the stationary system, per component.
    pub fn residual(&self, p: &ModelParams) -> Vec<Vec<f64>> {
        crate::dynamics::system_residual(&crate::dynamics::FullSystem::new(*p), self)
    }
}

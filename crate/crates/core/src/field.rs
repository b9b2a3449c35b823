//! Space-time sample containers shared by the continuum maps and the grid
//! propagator.

use num_complex::Complex64;

use crate::error::{PulseError, Result};
use crate::grid::TimeGrid;
use crate::state::SpatialGrid1D;

/// A real scalar field sampled on a spatial grid at every time node, with an
/// optional analytic time derivative sampled alongside it. Used for densities,
/// currents, velocities and potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField1D {
    space: SpatialGrid1D,
    grid: TimeGrid,
    mass: f64,
    values: Vec<Vec<f64>>,
    d_dt: Option<Vec<Vec<f64>>>,
}

impl SpaceTimeField1D {
    pub fn new(
        space: SpatialGrid1D,
        grid: TimeGrid,
        mass: f64,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if mass <= 0.0 || !mass.is_finite() {
            return Err(PulseError::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if values.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} field rows for {} time nodes",
                values.len(),
                grid.len()
            )));
        }
        for (k, row) in values.iter().enumerate() {
            if row.len() != space.n_points() {
                return Err(PulseError::DimensionMismatch(format!(
                    "field row {k} has {} samples for {} grid points",
                    row.len(),
                    space.n_points()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(PulseError::NonFinite(format!("field row {k}")));
            }
        }
        Ok(Self { space, grid, mass, values, d_dt: None })
    }

    /// Sample a closed form f(x, t) onto the grid.
    pub fn from_fn(
        space: SpatialGrid1D,
        grid: TimeGrid,
        mass: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let values = grid
            .times()
            .map(|t| space.nodes().map(|x| f(x, t)).collect())
            .collect();
        Self::new(space, grid, mass, values)
    }

    /// Attach an analytic time derivative (same shape as the samples).
    pub fn with_time_derivative(mut self, d_dt: Vec<Vec<f64>>) -> Result<Self> {
        if d_dt.len() != self.grid.len() || d_dt.iter().any(|r| r.len() != self.space.n_points()) {
            return Err(PulseError::DimensionMismatch("analytic time derivative shape".into()));
        }
        self.d_dt = Some(d_dt);
        Ok(self)
    }

    pub fn space(&self) -> &SpatialGrid1D {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[k][j]
    }

    /// Analytic time derivative row, if one was attached.
    pub fn d_dt_row(&self, k: usize) -> Option<&[f64]> {
        self.d_dt.as_ref().map(|d| d[k].as_slice())
    }

    pub fn has_time_derivative(&self) -> bool {
        self.d_dt.is_some()
    }

    /// Time derivative of every row: analytic when attached, second-order
    /// finite differences otherwise.
    pub fn time_derivative(&self) -> Vec<Vec<f64>> {
        if let Some(d) = &self.d_dt {
            return d.clone();
        }
        let n_nodes = self.grid.len();
        let n_pts = self.space.n_points();
        let dt = self.grid.dt();
        let mut out = vec![vec![0.0; n_pts]; n_nodes];
        for j in 0..n_pts {
            let col: Vec<f64> = (0..n_nodes).map(|k| self.values[k][j]).collect();
            let d = crate::grid::central_diff_slice(&col, dt);
            for k in 0..n_nodes {
                out[k][j] = d[k];
            }
        }
        out
    }
}

/// A complex field sampled on a spatial grid at every time node; used for
/// reconstructed wavefunctions psi(x, t).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    space: SpatialGrid1D,
    grid: TimeGrid,
    mass: f64,
    values: Vec<Vec<Complex64>>,
}

impl ComplexField1D {
    pub fn new(
        space: SpatialGrid1D,
        grid: TimeGrid,
        mass: f64,
        values: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} field rows for {} time nodes",
                values.len(),
                grid.len()
            )));
        }
        for (k, row) in values.iter().enumerate() {
            if row.len() != space.n_points() {
                return Err(PulseError::DimensionMismatch(format!("complex field row {k} shape")));
            }
            if row.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(PulseError::NonFinite(format!("complex field row {k}")));
            }
        }
        Ok(Self { space, grid, mass, values })
    }

    pub fn space(&self) -> &SpatialGrid1D {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.values[k]
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn density_row(&self, k: usize) -> Vec<f64> {
        self.values[k].iter().map(|a| a.norm_sqr()).collect()
    }
}

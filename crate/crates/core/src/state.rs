//! Wavefunction containers: complex amplitudes on lattice sites and on a 1D
//! spatial grid with hard-wall boundaries.

use num_complex::Complex64;

use crate::error::{PulseError, Result};
use crate::grid::trapezoid_sum;

pub const LATTICE_NORM_TOL: f64 = 1e-12;
pub const GRID_NORM_TOL: f64 = 1e-10;
pub const BOUNDARY_AMPLITUDE_TOL: f64 = 1e-8;

/// Normalized state of a particle on an M-site lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWavefunction {
    amplitudes: Vec<Complex64>,
}

impl LatticeWavefunction {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(PulseError::InvalidParameter(format!(
                "lattice state needs at least 2 sites, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(PulseError::NonFinite("lattice amplitudes".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > LATTICE_NORM_TOL {
            return Err(PulseError::NormalizationDrift(format!(
                "lattice state norm^2 = {norm_sq:.15} (must be 1 within {LATTICE_NORM_TOL:.0e})"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Trajectory storage: validates shape and finiteness but not the norm,
    /// so that measured norm drift is reported instead of rejected.
    pub(crate) fn from_raw(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(PulseError::InvalidParameter(format!(
                "lattice state needs at least 2 sites, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(PulseError::NonFinite("lattice amplitudes".into()));
        }
        Ok(Self { amplitudes })
    }

    /// Build from unnormalized amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sq.is_finite() || norm_sq <= 0.0 {
            return Err(PulseError::NonFinite("lattice amplitudes".into()));
        }
        let s = norm_sq.sqrt().recip();
        Self::new(amplitudes.into_iter().map(|a| a * s).collect())
    }

    /// Real nonnegative amplitudes from site densities.
    pub fn from_densities(n: &[f64]) -> Result<Self> {
        if n.iter().any(|&x| x < 0.0) {
            return Err(PulseError::InvalidParameter("negative density".into()));
        }
        Self::new(n.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)).collect())
    }

    pub fn sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn density(&self, i: usize) -> f64 {
        self.amplitudes[i].norm_sqr()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.sites() != other.sites() {
            return Err(PulseError::DimensionMismatch(format!(
                "inner product of {}-site and {}-site states",
                self.sites(),
                other.sites()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Spin-up/spin-down basis states for the two-level isomorphism.
    pub fn spin_up() -> Self {
        Self { amplitudes: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)] }
    }

    pub fn spin_down() -> Self {
        Self { amplitudes: vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] }
    }

    /// (|up> + |down>)/sqrt(2): ground state of a field along +x.
    pub fn spin_left() -> Self {
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { amplitudes: vec![c, c] }
    }

    /// (|up> - |down>)/sqrt(2): excited state of a field along +x.
    pub fn spin_right() -> Self {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: vec![Complex64::new(c, 0.0), Complex64::new(-c, 0.0)] }
    }
}

/// Uniform spatial grid on [x_min, x_max] with n_points nodes (both walls
/// included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl SpatialGrid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(PulseError::NonFinite("spatial grid bounds".into()));
        }
        if x_max <= x_min {
            return Err(PulseError::InvalidParameter(format!(
                "spatial grid needs x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(PulseError::InvalidParameter(format!(
                "spatial grid needs at least 3 points, got {n_points}"
            )));
        }
        Ok(Self { x_min, x_max, n_points })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_points - 1 {
            self.x_max
        } else {
            self.x_min + j as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |j| self.node(j))
    }
}

/// Wavefunction sampled on a [`SpatialGrid1D`], hard-wall convention: the
/// amplitude vanishes at both boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction1D {
    space: SpatialGrid1D,
    mass: f64,
    amplitudes: Vec<Complex64>,
}

impl GridWavefunction1D {
    pub fn new(space: SpatialGrid1D, mass: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if mass <= 0.0 || !mass.is_finite() {
            return Err(PulseError::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if amplitudes.len() != space.n_points() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} amplitudes on a grid of {} points",
                amplitudes.len(),
                space.n_points()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(PulseError::NonFinite("grid amplitudes".into()));
        }
        let b0 = amplitudes[0].norm();
        let b1 = amplitudes[amplitudes.len() - 1].norm();
        if b0 > BOUNDARY_AMPLITUDE_TOL || b1 > BOUNDARY_AMPLITUDE_TOL {
            return Err(PulseError::InvalidParameter(format!(
                "hard-wall violation: boundary amplitudes {b0:.3e}, {b1:.3e}"
            )));
        }
        let norm_sq = trapezoid_sum(
            &amplitudes.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(),
            space.dx(),
        );
        if (norm_sq - 1.0).abs() > GRID_NORM_TOL {
            return Err(PulseError::NormalizationDrift(format!(
                "grid state norm^2 = {norm_sq:.15} (must be 1 within {GRID_NORM_TOL:.0e})"
            )));
        }
        Ok(Self { space, mass, amplitudes })
    }

    /// Sample a closed form and normalize by the trapezoid rule.
    pub fn from_fn(
        space: SpatialGrid1D,
        mass: f64,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let mut amplitudes: Vec<Complex64> = space.nodes().map(&f).collect();
        let norm_sq = trapezoid_sum(
            &amplitudes.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(),
            space.dx(),
        );
        if !norm_sq.is_finite() || norm_sq <= 0.0 {
            return Err(PulseError::NonFinite("grid amplitudes".into()));
        }
        let s = norm_sq.sqrt().recip();
        for a in &mut amplitudes {
            *a *= s;
        }
        Self::new(space, mass, amplitudes)
    }

    pub fn space(&self) -> &SpatialGrid1D {
        &self.space
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        trapezoid_sum(
            &self.amplitudes.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(),
            self.space.dx(),
        )
    }

    /// Overlap integral <self|other> by the trapezoid rule.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.space != other.space {
            return Err(PulseError::GridMismatch("overlap of states on different grids".into()));
        }
        let prod: Vec<Complex64> = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .collect();
        Ok(trapezoid_sum(&prod, self.space.dx()))
    }
}

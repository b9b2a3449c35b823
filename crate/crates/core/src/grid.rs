//! Uniform time grid and sampled time series, plus the deterministic
//! quadrature and differentiation rules every map in the crate is built on.

use num_complex::Complex64;

use crate::error::{PulseError, Result};

/// Uniform sampling of the interval [t_start, t_end] with n_steps steps,
/// i.e. n_steps + 1 nodes t_k = t_start + k dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !t_start.is_finite() || !t_end.is_finite() {
            return Err(PulseError::NonFinite("time grid bounds".into()));
        }
        if n_steps < 2 {
            return Err(PulseError::InvalidParameter(format!(
                "time grid needs n_steps >= 2, got {n_steps}"
            )));
        }
        if t_end <= t_start {
            return Err(PulseError::InvalidParameter(format!(
                "time grid needs t_end > t_start, got [{t_start}, {t_end}]"
            )));
        }
        Ok(Self { t_start, t_end, n_steps })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, n_steps + 1.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    /// Node time t_k. The last node returns t_end exactly so that closed-form
    /// samplers see the exact endpoint.
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n_steps);
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| self.time(k))
    }

    /// Index of the node closest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt()).round();
        (k.max(0.0) as usize).min(self.n_steps)
    }
}

/// Sample element that can be checked for finiteness. Implemented for the two
/// sample types the toolkit actually stores.
pub trait Sample:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + num_traits::Zero
{
    fn is_finite_sample(&self) -> bool;
}

impl Sample for f64 {
    fn is_finite_sample(&self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    fn is_finite_sample(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A time series: one sample per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    grid: TimeGrid,
    values: Vec<T>,
}

impl<T: Sample> TimeSeries<T> {
    pub fn new(grid: TimeGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "time series has {} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite_sample()) {
            return Err(PulseError::NonFinite(format!("time series sample {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Sample a closed-form signal onto the grid.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> T) -> Result<Self> {
        let values = grid.times().map(&f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Running trapezoid integral F(t_k) with F(t_0) = 0.
///
/// Second order for smooth integrands; exact for linear ones.
pub fn trapezoid_integrate<T: Sample>(series: &TimeSeries<T>) -> TimeSeries<T> {
    let dt = series.grid().dt();
    let y = series.values();
    let mut out = Vec::with_capacity(y.len());
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..y.len() {
        acc = acc + (y[k - 1] + y[k]) * (0.5 * dt);
        out.push(acc);
    }
    TimeSeries { grid: series.grid, values: out }
}

/// Plain trapezoid quadrature of uniformly spaced samples.
pub fn trapezoid_sum<T: Sample>(values: &[T], h: f64) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let mut acc = (values[0] + values[values.len() - 1]) * 0.5;
    for v in &values[1..values.len() - 1] {
        acc = acc + *v;
    }
    acc * h
}

/// Running trapezoid integral of a raw sample slice, F[0] = 0.
pub fn cumulative_trapezoid<T: Sample>(values: &[T], h: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    out.push(acc);
    for k in 1..values.len() {
        acc = acc + (values[k - 1] + values[k]) * (0.5 * h);
        out.push(acc);
    }
    out
}

/// Second-order finite-difference derivative: central in the interior,
/// one-sided three-point stencils at both ends.
pub fn central_diff<T: Sample>(series: &TimeSeries<T>) -> TimeSeries<T> {
    let values = central_diff_slice(series.values(), series.grid().dt());
    TimeSeries { grid: series.grid, values }
}

/// Slice form of [`central_diff`]; panics if fewer than 3 samples.
pub fn central_diff_slice<T: Sample>(y: &[T], h: f64) -> Vec<T> {
    assert!(y.len() >= 3, "central_diff needs at least 3 samples");
    let n = y.len();
    let inv2h = 1.0 / (2.0 * h);
    let mut out = Vec::with_capacity(n);
    out.push((y[1] * 4.0 - y[2] - y[0] * 3.0) * inv2h);
    for k in 1..n - 1 {
        out.push((y[k + 1] - y[k - 1]) * inv2h);
    }
    out.push((y[n - 1] * 3.0 - y[n - 2] * 4.0 + y[n - 3]) * inv2h);
    out
}

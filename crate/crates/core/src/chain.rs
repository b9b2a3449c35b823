//! Density control on a 1D nearest-neighbor chain with fixed hopping
//! amplitude: build the two-stage reshaping program, derive link currents and
//! kinetic link terms from the density alone, and reconstruct the on-site
//! potential and the wavefunction.
//!
//! Gauge convention: the returned potential vanishes identically on the last
//! site. With that anchor the initial ground-state potential is zero on every
//! site and the uniform-density potential is zero on both edge sites.

use num_complex::Complex64;

use crate::error::{PulseError, Result};
use crate::grid::{central_diff_slice, cumulative_trapezoid, TimeGrid};
use crate::lattice::{ComplexCurrent, LatticeTrajectory};
use crate::math::{smooth_step_deriv, smooth_step_deriv2, smooth_step_unchecked};
use crate::state::LatticeWavefunction;

/// Chain geometry: site count and the fixed positive hopping amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub sites: usize,
    pub t0: f64,
}

impl ChainSpec {
    pub fn new(sites: usize, t0: f64) -> Result<Self> {
        if sites < 2 {
            return Err(PulseError::InvalidParameter(format!("chain needs >= 2 sites, got {sites}")));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(PulseError::InvalidParameter(format!("hopping amplitude must be > 0, got {t0}")));
        }
        Ok(Self { sites, t0 })
    }

    pub fn links(&self) -> usize {
        self.sites - 1
    }
}

/// C2 smooth step S(x) = x - sin(2 pi x)/(2 pi) on [0, 1].
///
/// S(0) = 0, S(1) = 1 exactly; first and second derivatives vanish at both
/// ends, which is what makes the reshaped state land in an instantaneous
/// ground state.
pub fn smooth_step(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(PulseError::Domain(format!("smooth_step argument {x} outside [0, 1]")));
    }
    Ok(smooth_step_unchecked(x))
}

/// Prescribed on-site densities per time node, optionally with analytic first
/// and second time derivatives. Densities must be strictly positive and sum
/// to one at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProgram {
    grid: TimeGrid,
    sites: usize,
    n: Vec<Vec<f64>>,
    n_dot: Option<Vec<Vec<f64>>>,
    n_ddot: Option<Vec<Vec<f64>>>,
}

impl DensityProgram {
    pub fn new(grid: TimeGrid, n: Vec<Vec<f64>>) -> Result<Self> {
        if n.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} density rows for {} time nodes",
                n.len(),
                grid.len()
            )));
        }
        let sites = n[0].len();
        if sites < 2 {
            return Err(PulseError::InvalidParameter("density program needs >= 2 sites".into()));
        }
        for (k, row) in n.iter().enumerate() {
            if row.len() != sites {
                return Err(PulseError::DimensionMismatch(format!("density row {k} length")));
            }
            for (i, &x) in row.iter().enumerate() {
                if !x.is_finite() || x <= 0.0 {
                    return Err(PulseError::VanishingDensity { index: i, time: grid.time(k), value: x });
                }
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(PulseError::NormalizationDrift(format!(
                    "density row {k} sums to {total:.15}"
                )));
            }
        }
        Ok(Self { grid, sites, n, n_dot: None, n_ddot: None })
    }

    pub fn with_first_derivative(mut self, n_dot: Vec<Vec<f64>>) -> Result<Self> {
        if n_dot.len() != self.grid.len() || n_dot.iter().any(|r| r.len() != self.sites) {
            return Err(PulseError::DimensionMismatch("analytic density derivative shape".into()));
        }
        self.n_dot = Some(n_dot);
        Ok(self)
    }

    pub fn with_second_derivative(mut self, n_ddot: Vec<Vec<f64>>) -> Result<Self> {
        if n_ddot.len() != self.grid.len() || n_ddot.iter().any(|r| r.len() != self.sites) {
            return Err(PulseError::DimensionMismatch("analytic density curvature shape".into()));
        }
        self.n_ddot = Some(n_ddot);
        Ok(self)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn density(&self, k: usize, i: usize) -> f64 {
        self.n[k][i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.n[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.n
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.n_dot.is_some()
    }

    /// First time derivative per node and site: analytic when attached,
    /// second-order finite differences otherwise.
    pub fn first_derivative(&self) -> Vec<Vec<f64>> {
        if let Some(d) = &self.n_dot {
            return d.clone();
        }
        self.differentiate(&self.n)
    }

    /// Second time derivative, if analytic data was attached.
    pub fn second_derivative(&self) -> Option<&[Vec<f64>]> {
        self.n_ddot.as_deref()
    }

    fn differentiate(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n_nodes = self.grid.len();
        let mut out = vec![vec![0.0; self.sites]; n_nodes];
        for i in 0..self.sites {
            let col: Vec<f64> = (0..n_nodes).map(|k| rows[k][i]).collect();
            let d = central_diff_slice(&col, self.grid.dt());
            for k in 0..n_nodes {
                out[k][i] = d[k];
            }
        }
        out
    }
}

/// Ground-state density of the bare chain (zero on-site potential):
/// n_i = (2/(M+1)) sin^2(pi i/(M+1)) with i = 1..M.
pub fn ground_state_density_chain(spec: &ChainSpec) -> Vec<f64> {
    let m = spec.sites;
    let norm = 2.0 / (m as f64 + 1.0);
    (1..=m)
        .map(|i| {
            let s = crate::math::sin_pi(i as f64 / (m as f64 + 1.0));
            norm * s * s
        })
        .collect()
}

/// Ground-state amplitudes of the bare chain, all positive.
pub fn ground_state_chain(spec: &ChainSpec) -> LatticeWavefunction {
    let n = ground_state_density_chain(spec);
    LatticeWavefunction::from_densities(&n).expect("closed-form ground state is normalized")
}

/// The two-stage reshaping program: ground-state density blended to the
/// uniform distribution over [0, t1], then squeezed into a normalized
/// Gaussian centered on the middle site over [t1, t2]. Analytic first and
/// second time derivatives ride along.
pub fn two_stage_density(
    spec: &ChainSpec,
    t1: f64,
    t2: f64,
    grid: TimeGrid,
) -> Result<DensityProgram> {
    if !(t1 > 0.0 && t2 > t1) {
        return Err(PulseError::InvalidParameter(format!(
            "stage times must satisfy 0 < t1 < t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    if grid.t_start() != 0.0 || (grid.t_end() - t2).abs() > 1e-12 {
        return Err(PulseError::GridMismatch(format!(
            "two-stage program expects a grid spanning [0, t2]; got [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let m = spec.sites;
    let g = ground_state_density_chain(spec);
    let center = (m as f64 - 1.0) / 2.0;
    let d2: Vec<f64> = (0..m).map(|s| (s as f64 - center).powi(2)).collect();
    let uniform = 1.0 / m as f64;

    let n_nodes = grid.len();
    let mut n = vec![vec![0.0; m]; n_nodes];
    let mut ndot = vec![vec![0.0; m]; n_nodes];
    let mut nddot = vec![vec![0.0; m]; n_nodes];

    for (k, t) in grid.times().enumerate() {
        if t <= t1 {
            let u = (t / t1).min(1.0);
            let (s, s1, s2) = (
                smooth_step_unchecked(u),
                smooth_step_deriv(u) / t1,
                smooth_step_deriv2(u) / (t1 * t1),
            );
            for i in 0..m {
                let delta = uniform - g[i];
                n[k][i] = g[i] + s * delta;
                ndot[k][i] = s1 * delta;
                nddot[k][i] = s2 * delta;
            }
        } else {
            let span = t2 - t1;
            let w = ((t - t1) / span).min(1.0);
            let s = smooth_step_unchecked(w);
            let s1 = smooth_step_deriv(w) / span;
            let s2 = smooth_step_deriv2(w) / (span * span);
            let e: Vec<f64> = d2.iter().map(|&q| (-s * q).exp()).collect();
            let e1: Vec<f64> = d2.iter().zip(&e).map(|(&q, &ev)| -s1 * q * ev).collect();
            let e2: Vec<f64> = d2
                .iter()
                .zip(&e)
                .map(|(&q, &ev)| (-s2 * q + (s1 * q) * (s1 * q)) * ev)
                .collect();
            let sum: f64 = e.iter().sum();
            let sum1: f64 = e1.iter().sum();
            let sum2: f64 = e2.iter().sum();
            let norm = 1.0 / sum;
            let norm1 = -norm * norm * sum1;
            let norm2 = 2.0 * norm.powi(3) * sum1 * sum1 - norm * norm * sum2;
            for i in 0..m {
                n[k][i] = norm * e[i];
                ndot[k][i] = norm1 * e[i] + norm * e1[i];
                nddot[k][i] = norm2 * e[i] + 2.0 * norm1 * e1[i] + norm * e2[i];
            }
        }
    }

    DensityProgram::new(grid, n)?
        .with_first_derivative(ndot)?
        .with_second_derivative(nddot)
}

/// Per-link time series (one value per nearest-neighbor link), optionally
/// with an analytic time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSeries {
    grid: TimeGrid,
    links: usize,
    values: Vec<Vec<f64>>,
    d_dt: Option<Vec<Vec<f64>>>,
}

impl LinkSeries {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn value(&self, k: usize, l: usize) -> f64 {
        self.values[k][l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.d_dt.is_some()
    }

    /// Analytic derivative when available, central differences otherwise.
    pub fn derivative(&self) -> Vec<Vec<f64>> {
        if let Some(d) = &self.d_dt {
            return d.clone();
        }
        let n_nodes = self.grid.len();
        let mut out = vec![vec![0.0; self.links]; n_nodes];
        for l in 0..self.links {
            let col: Vec<f64> = (0..n_nodes).map(|k| self.values[k][l]).collect();
            let d = central_diff_slice(&col, self.grid.dt());
            for k in 0..n_nodes {
                out[k][l] = d[k];
            }
        }
        out
    }
}

/// Link currents from the density program by summing the continuity equation
/// from the left wall: J_{i,i+1} = -(ndot_1 + ... + ndot_i). The current
/// beyond the last site vanishes by normalization.
pub fn link_current_from_density(program: &DensityProgram) -> LinkSeries {
    let m = program.sites();
    let n_nodes = program.grid().len();
    let ndot = program.first_derivative();
    let mut values = vec![vec![0.0; m - 1]; n_nodes];
    for k in 0..n_nodes {
        let mut acc = 0.0;
        for l in 0..m - 1 {
            acc += ndot[k][l];
            values[k][l] = -acc;
        }
    }
    let d_dt = program.second_derivative().map(|nddot| {
        let mut jd = vec![vec![0.0; m - 1]; n_nodes];
        for k in 0..n_nodes {
            let mut acc = 0.0;
            for l in 0..m - 1 {
                acc += nddot[k][l];
                jd[k][l] = -acc;
            }
        }
        jd
    });
    LinkSeries { grid: *program.grid(), links: m - 1, values, d_dt }
}

/// Kinetic link terms from the density and the link currents:
/// K = s sqrt(4 T0^2 n_i n_{i+1} - J^2), with the branch sign per link frozen
/// from the initial state. A negative radicand means the prescribed density
/// moves faster than the fixed hopping amplitude allows.
pub fn kinetic_from_density(
    program: &DensityProgram,
    currents: &LinkSeries,
    spec: &ChainSpec,
    psi0: &LatticeWavefunction,
) -> Result<LinkSeries> {
    let m = program.sites();
    if psi0.sites() != m || currents.links() != m - 1 || spec.sites != m {
        return Err(PulseError::DimensionMismatch("kinetic_from_density inputs".into()));
    }
    let grid = *program.grid();
    let n_nodes = grid.len();
    let t0sq4 = 4.0 * spec.t0 * spec.t0;

    // Branch signs from K(t_start) of the actual initial state.
    let a = psi0.amplitudes();
    let mut signs = vec![1.0; m - 1];
    for l in 0..m - 1 {
        let k0 = 2.0 * spec.t0 * (a[l].conj() * a[l + 1]).re;
        if k0.abs() < 1e-8 {
            return Err(PulseError::AmbiguousSign { link: l, value: k0.abs() });
        }
        signs[l] = k0.signum();
    }

    let mut values = vec![vec![0.0; m - 1]; n_nodes];
    for k in 0..n_nodes {
        for l in 0..m - 1 {
            let bound = t0sq4 * program.density(k, l) * program.density(k, l + 1);
            let j = currents.value(k, l);
            let radicand = bound - j * j;
            if radicand <= 0.0 {
                return Err(PulseError::NotRepresentable(format!(
                    "link ({},{}) at t = {:.6}: J^2 = {:.6e} reaches the bound 4 T0^2 n_i n_j = {:.6e}",
                    l + 1,
                    l + 2,
                    grid.time(k),
                    j * j,
                    bound
                )));
            }
            values[k][l] = signs[l] * radicand.sqrt();
        }
    }

    // Closed-form Kdot = [4 T0^2 (ndot_i n_j + n_i ndot_j) - 2 J Jdot]/(2 K)
    // when both analytic derivatives exist.
    let d_dt = if program.has_analytic_derivative() && currents.has_analytic_derivative() {
        let ndot = program.first_derivative();
        let jdot = currents.derivative();
        let mut kd = vec![vec![0.0; m - 1]; n_nodes];
        for k in 0..n_nodes {
            for l in 0..m - 1 {
                let num = t0sq4
                    * (ndot[k][l] * program.density(k, l + 1)
                        + program.density(k, l) * ndot[k][l + 1])
                    - 2.0 * currents.value(k, l) * jdot[k][l];
                kd[k][l] = num / (2.0 * values[k][l]);
            }
        }
        Some(kd)
    } else {
        None
    };

    Ok(LinkSeries { grid, links: m - 1, values, d_dt })
}

/// Real on-site potential per time node.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsitePotentialSignal {
    grid: TimeGrid,
    v: Vec<Vec<f64>>,
}

impl OnsitePotentialSignal {
    pub fn new(grid: TimeGrid, v: Vec<Vec<f64>>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} potential rows for {} time nodes",
                v.len(),
                grid.len()
            )));
        }
        let m = v[0].len();
        for (k, row) in v.iter().enumerate() {
            if row.len() != m || row.iter().any(|x| !x.is_finite()) {
                return Err(PulseError::NonFinite(format!("potential row {k}")));
            }
        }
        Ok(Self { grid, v })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sites(&self) -> usize {
        self.v[0].len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.v[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.v[k][i]
    }

    /// Package as a forward-propagation signal with the chain hopping.
    pub fn hamiltonian_signal(&self, t0: f64) -> Result<crate::propagate::LatticeHamiltonianSignal> {
        crate::propagate::LatticeHamiltonianSignal::chain(self.grid, t0, self.v.clone())
    }
}

fn site_weights(k_row: &[f64], n_row: &[f64]) -> Vec<f64> {
    // W_i = (K_{i-1,i} + K_{i,i+1}) / (2 n_i), missing links contribute zero.
    let m = n_row.len();
    (0..m)
        .map(|i| {
            let left = if i > 0 { k_row[i - 1] } else { 0.0 };
            let right = if i < m - 1 { k_row[i] } else { 0.0 };
            (left + right) / (2.0 * n_row[i])
        })
        .collect()
}

/// On-site potential and wavefunction trajectory generating the prescribed
/// density program on the chain.
///
/// The potential is assembled from the link differences
/// v_i - v_{i+1} = W_i - W_{i+1} + (Jdot K - J Kdot)/(4 T0^2 n_i n_{i+1})
/// summed from the right wall (gauge: v = 0 on the last site); the phases
/// integrate W_i - v_i with the trapezoid rule.
pub fn onsite_potential(
    program: &DensityProgram,
    spec: &ChainSpec,
    psi0: &LatticeWavefunction,
) -> Result<(OnsitePotentialSignal, LatticeTrajectory)> {
    let m = program.sites();
    if spec.sites != m || psi0.sites() != m {
        return Err(PulseError::DimensionMismatch("onsite_potential inputs".into()));
    }
    for i in 0..m {
        if (psi0.density(i) - program.density(0, i)).abs() > 1e-8 {
            return Err(PulseError::InvalidParameter(format!(
                "initial state density at site {} is {:.12}, program prescribes {:.12}",
                i + 1,
                psi0.density(i),
                program.density(0, i)
            )));
        }
    }
    let grid = *program.grid();
    let n_nodes = grid.len();
    let currents = link_current_from_density(program);
    let kinetic = kinetic_from_density(program, &currents, spec, psi0)?;
    let jdot = currents.derivative();
    let kdot = kinetic.derivative();
    let t0sq4 = 4.0 * spec.t0 * spec.t0;

    let mut v = vec![vec![0.0; m]; n_nodes];
    let mut weights = vec![vec![0.0; m]; n_nodes];
    for k in 0..n_nodes {
        let w = site_weights(kinetic.row(k), program.row(k));
        // Phase-twist rate of each link, d/dt atan2(J, K).
        let mut twist = vec![0.0; m - 1];
        for l in 0..m - 1 {
            twist[l] = (jdot[k][l] * kinetic.value(k, l) - currents.value(k, l) * kdot[k][l])
                / (t0sq4 * program.density(k, l) * program.density(k, l + 1));
        }
        let mut acc = 0.0;
        for i in (0..m).rev() {
            if i == m - 1 {
                v[k][i] = 0.0;
            } else {
                acc += twist[i];
                v[k][i] = w[i] - w[m - 1] + acc;
            }
        }
        weights[k] = w;
    }

    // Phases: phi_i(t) = arg psi0_i + int (W_i - v_i) dt'.
    let mut states = Vec::with_capacity(n_nodes);
    let mut phases = vec![vec![0.0; n_nodes]; m];
    for i in 0..m {
        let integrand: Vec<f64> = (0..n_nodes).map(|k| weights[k][i] - v[k][i]).collect();
        let phi = cumulative_trapezoid(&integrand, grid.dt());
        let phi0 = psi0.amplitudes()[i].arg();
        for k in 0..n_nodes {
            phases[i][k] = phi0 + phi[k];
        }
    }
    for k in 0..n_nodes {
        let amps: Vec<Complex64> = (0..m)
            .map(|i| Complex64::from_polar(program.density(k, i).sqrt(), phases[i][k]))
            .collect();
        states.push(LatticeWavefunction::from_raw(amps)?);
    }

    Ok((OnsitePotentialSignal::new(grid, v)?, LatticeTrajectory { grid, states }))
}

/// Independent extraction of the on-site potential from a wavefunction
/// trajectory: v_i = Re[(i d/dt psi_i + T0 (psi_{i+1} + psi_{i-1})) / psi_i].
///
/// The logarithmic derivative (i d/dt psi)/psi is differenced through
/// ln(psi_{k+1}/psi_{k-1}), which keeps the second-order truncation constant
/// proportional to derivatives of ln psi instead of phase-winding powers.
/// Test-path companion to [`onsite_potential`]; the two must agree wherever
/// the trajectory is smooth.
pub fn onsite_potential_direct(traj: &LatticeTrajectory, spec: &ChainSpec) -> Vec<Vec<f64>> {
    let m = spec.sites;
    let n_nodes = traj.grid.len();
    let dt = traj.grid.dt();
    let i_unit = Complex64::new(0.0, 1.0);
    // Principal-branch log of a ratio; adjacent-node phase steps stay well
    // below pi for resolved trajectories.
    let log_ratio = |num: Complex64, den: Complex64| -> Complex64 {
        let r = num / den;
        Complex64::new(r.norm().ln(), r.arg())
    };
    let mut out = vec![vec![0.0; m]; n_nodes];
    for k in 0..n_nodes {
        for s in 0..m {
            let at = |node: usize| traj.state(node).amplitudes()[s];
            let dlog = if k == 0 {
                (log_ratio(at(1), at(0)) * 4.0 - log_ratio(at(2), at(0))) / (2.0 * dt)
            } else if k == n_nodes - 1 {
                (log_ratio(at(k - 1), at(k)) * -4.0 + log_ratio(at(k - 2), at(k))) / (2.0 * dt)
            } else {
                log_ratio(at(k + 1), at(k - 1)) / (2.0 * dt)
            };
            let a = traj.state(k).amplitudes();
            let left = if s > 0 { a[s - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if s < m - 1 { a[s + 1] } else { Complex64::new(0.0, 0.0) };
            out[k][s] = (i_unit * dlog + (left + right) * spec.t0 / a[s]).re;
        }
    }
    out
}

/// Static ground-state potential for a prescribed density: the potential
/// whose ground state is sqrt(n), anchored to zero on the last site.
///
/// v_i = G_i - G_M with G_i = T0 (sqrt(n_{i-1}) + sqrt(n_{i+1}))/sqrt(n_i)
/// and out-of-range neighbor terms dropped.
pub fn lattice_bohm_potential(densities: &[f64], spec: &ChainSpec) -> Result<Vec<f64>> {
    let m = spec.sites;
    if densities.len() != m {
        return Err(PulseError::DimensionMismatch(format!(
            "{} densities for a {}-site chain",
            densities.len(),
            m
        )));
    }
    for (i, &x) in densities.iter().enumerate() {
        if !x.is_finite() || x <= 0.0 {
            return Err(PulseError::VanishingDensity { index: i, time: f64::NAN, value: x });
        }
    }
    let a: Vec<f64> = densities.iter().map(|&x| x.sqrt()).collect();
    let g = |i: usize| -> f64 {
        let left = if i > 0 { a[i - 1] } else { 0.0 };
        let right = if i < m - 1 { a[i + 1] } else { 0.0 };
        spec.t0 * (left + right) / a[i]
    };
    let g_last = g(m - 1);
    Ok((0..m).map(|i| g(i) - g_last).collect())
}

/// Assemble the complex link observable Q = K + iJ implied by a density
/// program, for representability checks and cross-module comparisons.
pub fn observable_from_links(
    currents: &LinkSeries,
    kinetic: &LinkSeries,
    sites: usize,
) -> Result<ComplexCurrent> {
    if currents.links() != sites - 1 || kinetic.links() != sites - 1 {
        return Err(PulseError::DimensionMismatch("link series vs site count".into()));
    }
    let grid = *currents.grid();
    let steps = (0..grid.len())
        .map(|k| {
            let mut q = nalgebra::DMatrix::zeros(sites, sites);
            for l in 0..sites - 1 {
                let v = Complex64::new(kinetic.value(k, l), currents.value(k, l));
                q[(l, l + 1)] = v;
                q[(l + 1, l)] = v.conj();
            }
            q
        })
        .collect();
    ComplexCurrent::new(grid, steps)
}

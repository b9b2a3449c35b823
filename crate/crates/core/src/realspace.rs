//! 1D continuum inverse maps: density/velocity to scalar potential (Coulomb
//! gauge), current to vector potential (temporal gauge), the scaling-solution
//! family, and the driven-oscillator parameter recovery.
//!
//! All maps work on sampled fields. Spatial derivatives are second-order
//! central differences; the curvature term is evaluated on sqrt(n), and grid
//! nodes whose density sits below [`GRID_DENSITY_FLOOR`] are masked: mapped
//! values are extended constantly into the wings and excluded from residual
//! metrics.

use num_complex::Complex64;

use crate::error::{PulseError, Result};
use crate::field::{ComplexField1D, SpaceTimeField1D};
use crate::grid::{cumulative_trapezoid, trapezoid_sum, TimeGrid, TimeSeries};
use crate::math::{smooth_step_deriv, smooth_step_deriv2, smooth_step_unchecked};
use crate::state::{GridWavefunction1D, SpatialGrid1D};

/// Densities below this are treated as vacuum wings.
pub const GRID_DENSITY_FLOOR: f64 = 1e-10;
/// Guard on per-step normalization of the prescribed density derivative.
pub const NORMALIZATION_GUARD: f64 = 1e-6;
/// Coarse guard against grossly inconsistent (density, velocity) inputs.
pub const CONTINUITY_GUARD: f64 = 1e-3;
/// Relative stationary residual allowed for a base (V0, n0, E0) triple.
pub const BASE_RESIDUAL_TOL: f64 = 1e-6;
/// Mask floor for residual metrics. Stricter than the map floor: the
/// curvature term second-differences the reconstructed amplitude, which
/// amplifies smooth quadrature error by 1/n, so below this density the
/// metric reads noise rather than map accuracy.
pub const RESIDUAL_MASK_FLOOR: f64 = 1e-6;

pub type TimeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// First spatial derivative, second order, one-sided at the walls.
pub fn first_diff_x(row: &[f64], dx: f64) -> Vec<f64> {
    let n = row.len();
    let inv = 1.0 / (2.0 * dx);
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * row[0] + 4.0 * row[1] - row[2]) * inv;
    for j in 1..n - 1 {
        out[j] = (row[j + 1] - row[j - 1]) * inv;
    }
    out[n - 1] = (3.0 * row[n - 1] - 4.0 * row[n - 2] + row[n - 3]) * inv;
    out
}

/// Second spatial derivative on the interior (walls left at zero).
fn second_diff_x(row: &[f64], dx: f64) -> Vec<f64> {
    let n = row.len();
    let inv = 1.0 / (dx * dx);
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        out[j] = (row[j + 1] - 2.0 * row[j] + row[j - 1]) * inv;
    }
    out
}

/// Fourth-order five-point second derivative, used by validation oracles.
pub fn second_diff_x4(row: &[f64], dx: f64) -> Vec<f64> {
    let n = row.len();
    let inv = 1.0 / (12.0 * dx * dx);
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] = (-row[j + 2] + 16.0 * row[j + 1] - 30.0 * row[j] + 16.0 * row[j - 1]
            - row[j - 2])
            * inv;
    }
    out
}

/// Contiguous index range where the density clears the vacuum floor.
fn unmasked_range(row: &[f64], floor: f64) -> Option<(usize, usize)> {
    let lo = row.iter().position(|&x| x >= floor)?;
    let hi = row.iter().rposition(|&x| x >= floor)?;
    (hi > lo).then_some((lo, hi))
}

/// Velocity field from a prescribed density: v = -(1/n) int_{x_min}^x dn/dt,
/// the 1D solution of the continuity equation with a no-current left wall.
pub fn velocity_from_density_1d(density: &SpaceTimeField1D) -> Result<SpaceTimeField1D> {
    let space = *density.space();
    let grid = *density.grid();
    let dx = space.dx();
    let ndot = density.time_derivative();
    let mut v = vec![vec![0.0; space.n_points()]; grid.len()];
    for k in 0..grid.len() {
        let total = trapezoid_sum(&ndot[k], dx);
        if total.abs() > NORMALIZATION_GUARD {
            return Err(PulseError::NormalizationDrift(format!(
                "d/dt of the density integrates to {total:.3e} at t = {:.6}",
                grid.time(k)
            )));
        }
        let flux = cumulative_trapezoid(&ndot[k], dx);
        let row = density.row(k);
        if let Some((lo, hi)) = unmasked_range(row, GRID_DENSITY_FLOOR) {
            for j in lo..=hi {
                v[k][j] = -flux[j] / row[j];
            }
        }
    }
    SpaceTimeField1D::new(space, grid, density.mass(), v)
}

/// Scalar potential and wavefunction for a consistent (density, velocity)
/// pair in the Coulomb gauge:
/// V = d^2 sqrt(n)/dx^2 / (2 m sqrt(n)) - m int dv/dt dx' - m v^2/2 - Cdot,
/// phi = int m v dx' + C(t), with C(t) anchoring V to zero at the domain
/// midpoint.
pub fn potential_from_density_1d(
    density: &SpaceTimeField1D,
    velocity: &SpaceTimeField1D,
) -> Result<(SpaceTimeField1D, ComplexField1D)> {
    if density.space() != velocity.space() || density.grid() != velocity.grid() {
        return Err(PulseError::GridMismatch("density and velocity fields".into()));
    }
    let space = *density.space();
    let grid = *density.grid();
    let mass = density.mass();
    let dx = space.dx();
    let n_pts = space.n_points();
    let n_nodes = grid.len();
    let mid = n_pts / 2;

    // Continuity guard: dn/dt + d(n v)/dx must be small on the interior.
    let ndot = density.time_derivative();
    for k in 0..n_nodes {
        let nv: Vec<f64> = density.row(k).iter().zip(velocity.row(k)).map(|(a, b)| a * b).collect();
        let div = first_diff_x(&nv, dx);
        if let Some((lo, hi)) = unmasked_range(density.row(k), GRID_DENSITY_FLOOR) {
            for j in (lo + 1)..hi {
                let r = ndot[k][j] + div[j];
                if r.abs() > CONTINUITY_GUARD {
                    return Err(PulseError::InvalidParameter(format!(
                        "density and velocity violate continuity by {r:.3e} at x = {:.4}, t = {:.4}",
                        space.node(j),
                        grid.time(k)
                    )));
                }
            }
        }
    }

    let vdot = velocity.time_derivative();
    let mut potential = vec![vec![0.0; n_pts]; n_nodes];
    let mut anchor_rate = vec![0.0; n_nodes];
    for k in 0..n_nodes {
        let row = density.row(k);
        let (lo, hi) = unmasked_range(row, GRID_DENSITY_FLOOR).ok_or(
            PulseError::VanishingDensity { index: 0, time: grid.time(k), value: 0.0 },
        )?;
        let a: Vec<f64> = row.iter().map(|&x| x.max(0.0).sqrt()).collect();
        let curv = second_diff_x(&a, dx);
        let accel = cumulative_trapezoid(&vdot[k], dx);
        let vrow = velocity.row(k);
        let mut raw = vec![0.0; n_pts];
        for j in (lo + 1)..hi {
            raw[j] =
                curv[j] / (2.0 * mass * a[j]) - mass * accel[j] - 0.5 * mass * vrow[j] * vrow[j];
        }
        // Constant extension into the wings.
        for j in 0..=lo {
            raw[j] = raw[lo + 1];
        }
        for j in hi..n_pts {
            raw[j] = raw[hi - 1];
        }
        let anchor = raw[mid.clamp(lo + 1, hi - 1)];
        anchor_rate[k] = anchor;
        for j in 0..n_pts {
            potential[k][j] = raw[j] - anchor;
        }
    }

    // Phases: phi(x, t) = int m v dx' + C(t), C(t) = int_0^t anchor rate.
    let c_of_t = cumulative_trapezoid(&anchor_rate, grid.dt());
    let mut psi = vec![vec![Complex64::new(0.0, 0.0); n_pts]; n_nodes];
    for k in 0..n_nodes {
        let mv: Vec<f64> = velocity.row(k).iter().map(|&v| mass * v).collect();
        let phase = cumulative_trapezoid(&mv, dx);
        for j in 0..n_pts {
            psi[k][j] =
                Complex64::from_polar(density.value(k, j).max(0.0).sqrt(), phase[j] + c_of_t[k]);
        }
    }

    Ok((
        SpaceTimeField1D::new(space, grid, mass, potential)?,
        ComplexField1D::new(space, grid, mass, psi)?,
    ))
}

/// Vector potential and wavefunction reconstructed from a prescribed current
/// in the temporal gauge: the density follows from charge conservation, the
/// phase integrates the curvature and kinetic terms in time, and
/// A = dphi/dx - m v.
pub fn vector_potential_from_current_1d(
    current: &SpaceTimeField1D,
    psi0: &GridWavefunction1D,
) -> Result<(SpaceTimeField1D, ComplexField1D)> {
    if current.space() != psi0.space() {
        return Err(PulseError::GridMismatch("current field vs initial state".into()));
    }
    if current.mass() != psi0.mass() {
        return Err(PulseError::InvalidParameter(
            "current field and state carry different masses".into(),
        ));
    }
    let space = *current.space();
    let grid = *current.grid();
    let mass = current.mass();
    let dx = space.dx();
    let n_pts = space.n_points();
    let n_nodes = grid.len();

    let n0 = psi0.density();
    let (lo, hi) = unmasked_range(&n0, GRID_DENSITY_FLOOR)
        .ok_or(PulseError::VanishingDensity { index: 0, time: grid.t_start(), value: 0.0 })?;
    let phi0: Vec<f64> = psi0.amplitudes().iter().map(|a| a.arg()).collect();

    // Density from the accumulated divergence of the current.
    let div: Vec<Vec<f64>> = (0..n_nodes).map(|k| first_diff_x(current.row(k), dx)).collect();
    let mut density = vec![vec![0.0; n_pts]; n_nodes];
    for j in 0..n_pts {
        let col: Vec<f64> = (0..n_nodes).map(|k| div[k][j]).collect();
        let drained = cumulative_trapezoid(&col, grid.dt());
        for k in 0..n_nodes {
            let n = n0[j] - drained[k];
            if (lo..=hi).contains(&j) && n <= GRID_DENSITY_FLOOR {
                return Err(PulseError::VanishingDensity { index: j, time: grid.time(k), value: n });
            }
            density[k][j] = n.max(0.0);
        }
    }

    // Phase integrand per node: curvature term minus m v^2 / 2, extended
    // constantly into the wings.
    let mut integrand = vec![vec![0.0; n_pts]; n_nodes];
    let mut vel = vec![vec![0.0; n_pts]; n_nodes];
    for k in 0..n_nodes {
        let a: Vec<f64> = density[k].iter().map(|&x| x.sqrt()).collect();
        let curv = second_diff_x(&a, dx);
        for j in (lo + 1)..hi {
            let v = current.value(k, j) / density[k][j];
            vel[k][j] = v;
            integrand[k][j] = curv[j] / (2.0 * mass * a[j]) - 0.5 * mass * v * v;
        }
        for j in 0..=lo {
            integrand[k][j] = integrand[k][lo + 1];
        }
        for j in hi..n_pts {
            integrand[k][j] = integrand[k][hi - 1];
        }
    }

    let mut phase = vec![vec![0.0; n_pts]; n_nodes];
    for j in 0..n_pts {
        let col: Vec<f64> = (0..n_nodes).map(|k| integrand[k][j]).collect();
        let acc = cumulative_trapezoid(&col, grid.dt());
        for k in 0..n_nodes {
            phase[k][j] = phi0[j] + acc[k];
        }
    }

    let mut a_field = vec![vec![0.0; n_pts]; n_nodes];
    let mut psi = vec![vec![Complex64::new(0.0, 0.0); n_pts]; n_nodes];
    for k in 0..n_nodes {
        let grad = first_diff_x(&phase[k], dx);
        for j in 0..n_pts {
            a_field[k][j] = grad[j] - mass * vel[k][j];
            psi[k][j] = Complex64::from_polar(density[k][j].sqrt(), phase[k][j]);
        }
    }

    Ok((
        SpaceTimeField1D::new(space, grid, mass, a_field)?,
        ComplexField1D::new(space, grid, mass, psi)?,
    ))
}

/// Base eigenstate data: potential, ground-state density (optionally its
/// spatial derivative) and the ground-state energy.
pub struct BaseState {
    pub potential: SpaceFn,
    pub density: SpaceFn,
    pub density_prime: Option<SpaceFn>,
    pub energy: f64,
}

/// Harmonic base: V0 = m w0^2 x^2 / 2 with its normalized ground state.
pub fn harmonic_base(mass: f64, omega0: f64) -> BaseState {
    let norm = (mass * omega0 / std::f64::consts::PI).sqrt();
    BaseState {
        potential: Box::new(move |x| 0.5 * mass * omega0 * omega0 * x * x),
        density: Box::new(move |x| norm * (-mass * omega0 * x * x).exp()),
        density_prime: Some(Box::new(move |x| {
            -2.0 * mass * omega0 * x * norm * (-mass * omega0 * x * x).exp()
        })),
        energy: 0.5 * omega0,
    }
}

/// A time-dependent rescaling-plus-shift program acting on a base eigenstate:
/// the density profile is carried along x = r0(t) and stretched by alpha(t).
pub struct ScalingProgram {
    pub mass: f64,
    pub alpha: TimeFn,
    pub alpha_dot: TimeFn,
    pub alpha_ddot: TimeFn,
    pub r0: TimeFn,
    pub r0_dot: TimeFn,
    pub r0_ddot: TimeFn,
    pub base: BaseState,
}

impl ScalingProgram {
    /// The initial instant must leave the base state untouched and at rest.
    pub fn validate_initial(&self, t0: f64) -> Result<()> {
        let checks = [
            ("alpha(t0) - 1", (self.alpha)(t0) - 1.0),
            ("alpha_dot(t0)", (self.alpha_dot)(t0)),
            ("r0(t0)", (self.r0)(t0)),
            ("r0_dot(t0)", (self.r0_dot)(t0)),
        ];
        for (name, v) in checks {
            if v.abs() > 1e-12 {
                return Err(PulseError::InvalidParameter(format!(
                    "scaling program: {name} = {v:.3e} at the initial time"
                )));
            }
        }
        Ok(())
    }
}

/// Smooth-step scaling program: alpha(t) = 1 + alpha_amp S(t/tau),
/// r0(t) = shift_amp S(t/tau).
pub fn smooth_scaling_program(
    mass: f64,
    base: BaseState,
    alpha_amp: f64,
    shift_amp: f64,
    tau: f64,
) -> Result<ScalingProgram> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PulseError::InvalidParameter(format!("tau = {tau}")));
    }
    if alpha_amp <= -1.0 {
        return Err(PulseError::InvalidParameter("alpha_amp must keep alpha positive".into()));
    }
    let s = move |t: f64| smooth_step_unchecked((t / tau).clamp(0.0, 1.0));
    let s1 = move |t: f64| smooth_step_deriv((t / tau).clamp(0.0, 1.0)) / tau;
    let s2 = move |t: f64| smooth_step_deriv2((t / tau).clamp(0.0, 1.0)) / (tau * tau);
    Ok(ScalingProgram {
        mass,
        alpha: Box::new(move |t| 1.0 + alpha_amp * s(t)),
        alpha_dot: Box::new(move |t| alpha_amp * s1(t)),
        alpha_ddot: Box::new(move |t| alpha_amp * s2(t)),
        r0: Box::new(move |t| shift_amp * s(t)),
        r0_dot: Box::new(move |t| shift_amp * s1(t)),
        r0_ddot: Box::new(move |t| shift_amp * s2(t)),
        base,
    })
}

/// Density and velocity observables generated by a scaling program:
/// n(x,t) = n0((x - r0)/alpha)/alpha and v = (alpha_dot/alpha)(x - r0) +
/// r0_dot. Analytic time derivatives are attached where the base density
/// derivative is available.
pub fn scaling_observables(
    prog: &ScalingProgram,
    space: &SpatialGrid1D,
    grid: &TimeGrid,
) -> Result<(SpaceTimeField1D, SpaceTimeField1D)> {
    prog.validate_initial(grid.t_start())?;
    let n_pts = space.n_points();
    let mut n = vec![vec![0.0; n_pts]; grid.len()];
    let mut ndot: Option<Vec<Vec<f64>>> =
        prog.base.density_prime.as_ref().map(|_| vec![vec![0.0; n_pts]; grid.len()]);
    let mut v = vec![vec![0.0; n_pts]; grid.len()];
    let mut vdot = vec![vec![0.0; n_pts]; grid.len()];
    for (k, t) in grid.times().enumerate() {
        let al = (prog.alpha)(t);
        if al <= 0.0 {
            return Err(PulseError::InvalidParameter(format!("alpha({t}) = {al}")));
        }
        let ald = (prog.alpha_dot)(t);
        let aldd = (prog.alpha_ddot)(t);
        let r = (prog.r0)(t);
        let rd = (prog.r0_dot)(t);
        let rdd = (prog.r0_ddot)(t);
        for (j, x) in space.nodes().enumerate() {
            let xi = (x - r) / al;
            n[k][j] = (prog.base.density)(xi) / al;
            v[k][j] = (ald / al) * (x - r) + rd;
            vdot[k][j] = (aldd / al - (ald / al) * (ald / al)) * (x - r) - (ald / al) * rd + rdd;
            if let Some(nd) = ndot.as_mut() {
                let n0p = prog.base.density_prime.as_ref().unwrap()(xi);
                let xi_dot = -(rd + xi * ald) / al;
                nd[k][j] = -(ald / (al * al)) * (prog.base.density)(xi) + n0p * xi_dot / al;
            }
        }
    }
    let mut n_field = SpaceTimeField1D::new(*space, *grid, prog.mass, n)?;
    if let Some(nd) = ndot {
        n_field = n_field.with_time_derivative(nd)?;
    }
    let v_field = SpaceTimeField1D::new(*space, *grid, prog.mass, v)?.with_time_derivative(vdot)?;
    Ok((n_field, v_field))
}

fn validate_base_state(prog: &ScalingProgram, space: &SpatialGrid1D) -> Result<()> {
    // Fine validation grid with a fourth-order stencil, so a true eigenpair
    // clears the tolerance comfortably at any caller resolution.
    let fine = 4096;
    let dx = (space.x_max() - space.x_min()) / (fine - 1) as f64;
    let a: Vec<f64> = (0..fine)
        .map(|j| (prog.base.density)(space.x_min() + j as f64 * dx).max(0.0).sqrt())
        .collect();
    let norm = trapezoid_sum(&a.iter().map(|x| x * x).collect::<Vec<_>>(), dx);
    if (norm - 1.0).abs() > 1e-6 {
        return Err(PulseError::InvalidParameter(format!(
            "base density integrates to {norm:.9}, expected 1"
        )));
    }
    let curv = second_diff_x4(&a, dx);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 2..fine - 2 {
        let x = space.x_min() + j as f64 * dx;
        let r = -curv[j] / (2.0 * prog.mass) + ((prog.base.potential)(x) - prog.base.energy) * a[j];
        num += r * r;
        den += a[j] * a[j];
    }
    let residual = (num / den).sqrt() / prog.base.energy.abs().max(1.0);
    if residual > BASE_RESIDUAL_TOL {
        return Err(PulseError::BaseStateInvalid { residual, tolerance: BASE_RESIDUAL_TOL });
    }
    Ok(())
}

/// Closed-form potential and wavefunction generated by a scaling program:
/// V = V0(xi)/alpha^2 - m r0_ddot x - (m/2)(alpha_ddot/alpha)(x - r0)^2 with
/// xi = (x - r0)/alpha, and the phase
/// (m/2)(alpha_dot/alpha)(x - r0)^2 + m r0_dot x
/// - int (E0/alpha^2 + m r0_dot^2 / 2) dt'.
pub fn scaling_solution(
    prog: &ScalingProgram,
    space: &SpatialGrid1D,
    grid: &TimeGrid,
) -> Result<(SpaceTimeField1D, ComplexField1D)> {
    prog.validate_initial(grid.t_start())?;
    validate_base_state(prog, space)?;
    let n_pts = space.n_points();
    let n_nodes = grid.len();

    // Secular phase rate E0/alpha^2 + m r0_dot^2 / 2, integrated on the grid.
    let rate: Vec<f64> = grid
        .times()
        .map(|t| {
            let al = (prog.alpha)(t);
            let rd = (prog.r0_dot)(t);
            prog.base.energy / (al * al) + 0.5 * prog.mass * rd * rd
        })
        .collect();
    let secular = cumulative_trapezoid(&rate, grid.dt());

    let mut potential = vec![vec![0.0; n_pts]; n_nodes];
    let mut psi = vec![vec![Complex64::new(0.0, 0.0); n_pts]; n_nodes];
    for (k, t) in grid.times().enumerate() {
        let al = (prog.alpha)(t);
        let ald = (prog.alpha_dot)(t);
        let aldd = (prog.alpha_ddot)(t);
        let r = (prog.r0)(t);
        let rd = (prog.r0_dot)(t);
        let rdd = (prog.r0_ddot)(t);
        for (j, x) in space.nodes().enumerate() {
            let xi = (x - r) / al;
            potential[k][j] = (prog.base.potential)(xi) / (al * al)
                - prog.mass * rdd * x
                - 0.5 * prog.mass * (aldd / al) * (x - r) * (x - r);
            let amp = ((prog.base.density)(xi).max(0.0) / al).sqrt();
            let phase =
                0.5 * prog.mass * (ald / al) * (x - r) * (x - r) + prog.mass * rd * x - secular[k];
            psi[k][j] = Complex64::from_polar(amp, phase);
        }
    }
    Ok((
        SpaceTimeField1D::new(*space, *grid, prog.mass, potential)?,
        ComplexField1D::new(*space, *grid, prog.mass, psi)?,
    ))
}

/// Effective oscillator parameters traced out by a scaling program.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    pub omega0: f64,
    pub mass: f64,
    /// omega^2(t) = omega0^2/alpha^4 - alpha_ddot/alpha; transiently negative
    /// values are physical (inverted oscillator).
    pub omega_sq: TimeSeries<f64>,
    /// Driving force f(t) = m omega^2(t) r0 + m r0_ddot.
    pub force: TimeSeries<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorRecovery {
    pub params: OscillatorParams,
    /// m r0_ddot + m omega^2 r0 - f, which vanishes identically.
    pub newton_residual: TimeSeries<f64>,
}

/// Recover the driven-oscillator parameters from a scaling program over a
/// harmonic base. The center trajectory solves the classical Newton equation
/// by construction; the residual series is returned for verification.
pub fn oscillator_parameters(
    prog: &ScalingProgram,
    omega0: f64,
    grid: &TimeGrid,
) -> Result<OscillatorRecovery> {
    // The base must be harmonic with the stated frequency.
    for x in [-2.0, -0.5, 0.7, 1.3, 3.1] {
        let expect = 0.5 * prog.mass * omega0 * omega0 * x * x;
        let got = (prog.base.potential)(x);
        if (got - expect).abs() > 1e-9 * expect.abs().max(1.0) {
            return Err(PulseError::InvalidParameter(format!(
                "base potential is not harmonic with omega0 = {omega0}: V({x}) = {got}"
            )));
        }
    }
    let n = grid.len();
    let mut omega_sq = vec![0.0; n];
    let mut force = vec![0.0; n];
    let mut residual = vec![0.0; n];
    for (k, t) in grid.times().enumerate() {
        let al = (prog.alpha)(t);
        let aldd = (prog.alpha_ddot)(t);
        let r = (prog.r0)(t);
        let rdd = (prog.r0_ddot)(t);
        let w2 = omega0 * omega0 / al.powi(4) - aldd / al;
        omega_sq[k] = w2;
        force[k] = prog.mass * w2 * r + prog.mass * rdd;
        residual[k] = prog.mass * rdd + prog.mass * w2 * r - force[k];
    }
    Ok(OscillatorRecovery {
        params: OscillatorParams {
            omega0,
            mass: prog.mass,
            omega_sq: TimeSeries::new(*grid, omega_sq)?,
            force: TimeSeries::new(*grid, force)?,
        },
        newton_residual: TimeSeries::new(*grid, residual)?,
    })
}

/// Max-norm Schroedinger residual of a (potential, wavefunction) pair in the
/// Coulomb gauge, over interior nodes with density above the floor and
/// interior times.
pub fn coulomb_residual(potential: &SpaceTimeField1D, psi: &ComplexField1D) -> f64 {
    let dx = potential.space().dx();
    let dt = potential.grid().dt();
    let mass = potential.mass();
    let n_pts = potential.space().n_points();
    let n_nodes = potential.grid().len();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut worst = 0.0f64;
    for k in 1..n_nodes - 1 {
        let row = psi.row(k);
        let dens = psi.density_row(k);
        let Some((lo, hi)) = unmasked_range(&dens, RESIDUAL_MASK_FLOOR) else { continue };
        for j in (lo + 1).max(1)..hi.min(n_pts - 1) {
            let dpsi_dt = (psi.row(k + 1)[j] - psi.row(k - 1)[j]) / (2.0 * dt);
            let lap = (row[j + 1] - row[j] * 2.0 + row[j - 1]) / (dx * dx);
            let r = i_unit * dpsi_dt + lap / (2.0 * mass) - potential.value(k, j) * row[j];
            worst = worst.max(r.norm());
        }
    }
    worst
}

/// Max-norm Schroedinger residual of a (vector potential, wavefunction) pair
/// in the temporal gauge: i dpsi/dt = [(-i d/dx - A)^2 / 2m] psi.
pub fn temporal_residual(a_field: &SpaceTimeField1D, psi: &ComplexField1D) -> f64 {
    let dx = a_field.space().dx();
    let dt = a_field.grid().dt();
    let mass = a_field.mass();
    let n_pts = a_field.space().n_points();
    let n_nodes = a_field.grid().len();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut worst = 0.0f64;
    for k in 1..n_nodes - 1 {
        let row = psi.row(k);
        let dens = psi.density_row(k);
        let Some((lo, hi)) = unmasked_range(&dens, RESIDUAL_MASK_FLOOR) else { continue };
        for j in (lo + 1).max(1)..hi.min(n_pts - 1) {
            let dpsi_dt = (psi.row(k + 1)[j] - psi.row(k - 1)[j]) / (2.0 * dt);
            let lap = (row[j + 1] - row[j] * 2.0 + row[j - 1]) / (dx * dx);
            let grad = (row[j + 1] - row[j - 1]) / (2.0 * dx);
            let a = a_field.value(k, j);
            let da = (a_field.value(k, j + 1) - a_field.value(k, j - 1)) / (2.0 * dx);
            let h_psi =
                (-lap + i_unit * (da * row[j] + 2.0 * a * grad) + a * a * row[j]) / (2.0 * mass);
            let r = i_unit * dpsi_dt - h_psi;
            worst = worst.max(r.norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_density(space: SpatialGrid1D, grid: TimeGrid) -> SpaceTimeField1D {
        let norm = (1.0 / std::f64::consts::PI).sqrt();
        SpaceTimeField1D::from_fn(space, grid, 1.0, move |x, _| norm * (-x * x).exp()).unwrap()
    }

    #[test]
    fn velocity_static_density_is_zero() {
        let space = SpatialGrid1D::new(-8.0, 8.0, 257).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
        let n = gaussian_density(space, grid);
        let v = velocity_from_density_1d(&n).unwrap();
        // Division by the density amplifies derivative roundoff near the
        // vacuum floor, so the no-flow statement is checked where the
        // density is resolved and through the current elsewhere.
        for k in 0..grid.len() {
            for j in 0..space.n_points() {
                if n.value(k, j) > 1e-6 {
                    assert!(v.value(k, j).abs() < 1e-9);
                }
                assert!((v.value(k, j) * n.value(k, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn velocity_rigid_translation() {
        // n(x, t) = n0(x - r(t)) rides with v = r_dot(t), uniform in x;
        // the quadrature converges at second order in dx.
        let norm = (1.0 / std::f64::consts::PI).sqrt();
        let r = |t: f64| 0.3 * t * t;
        let worst_at = |pts: usize| -> f64 {
            let space = SpatialGrid1D::new(-9.0, 9.0, pts).unwrap();
            let grid = TimeGrid::new(0.0, 1.0, 400).unwrap();
            let n = SpaceTimeField1D::from_fn(space, grid, 1.0, move |x, t| {
                norm * (-(x - r(t)) * (x - r(t))).exp()
            })
            .unwrap()
            .with_time_derivative(
                grid.times()
                    .map(|t| {
                        space
                            .nodes()
                            .map(|x| {
                                let d = x - r(t);
                                2.0 * d * (0.6 * t) * norm * (-d * d).exp()
                            })
                            .collect()
                    })
                    .collect(),
            )
            .unwrap();
            let v = velocity_from_density_1d(&n).unwrap();
            let k = 200;
            let expect = 0.6 * grid.time(k);
            let mut worst = 0.0f64;
            for j in 0..space.n_points() {
                if n.value(k, j) > 1e-2 {
                    worst = worst.max((v.value(k, j) - expect).abs());
                }
            }
            worst
        };
        let (e1, e2) = (worst_at(1025), worst_at(2049));
        assert!(e2 < 1e-4, "velocity error {e2:.3e}");
        let order = (e1 / e2).log2();
        assert!(order > 1.6 && order < 2.4, "measured order {order}");
    }


    #[test]
    fn velocity_matches_scaling_form() {
        // For the scaling observables the closed form is
        // v = (alpha_dot/alpha)(x - r0) + r0_dot; convergence is second
        // order in dx both for the velocity (bulk) and the current.
        let worst_at = |pts: usize| -> (f64, f64) {
            let space = SpatialGrid1D::new(-9.0, 11.0, pts).unwrap();
            let grid = TimeGrid::new(0.0, 5.0, 500).unwrap();
            let prog =
                smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.5, 1.0, 5.0).unwrap();
            let (n, v_exact) = scaling_observables(&prog, &space, &grid).unwrap();
            let v = velocity_from_density_1d(&n).unwrap();
            let mut worst_v = 0.0f64;
            let mut worst_flux = 0.0f64;
            for k in 0..grid.len() {
                for j in 0..space.n_points() {
                    let dv = (v.value(k, j) - v_exact.value(k, j)).abs();
                    if n.value(k, j) > 1e-2 {
                        worst_v = worst_v.max(dv);
                    }
                    worst_flux = worst_flux.max(dv * n.value(k, j));
                }
            }
            (worst_v, worst_flux)
        };
        let ((v1, f1), (v2, f2)) = (worst_at(1025), worst_at(2049));
        assert!(v2 < 2e-4, "velocity mismatch {v2:.3e}");
        assert!(f2 < 1e-5, "current mismatch {f2:.3e}");
        let order_v = (v1 / v2).log2();
        let order_f = (f1 / f2).log2();
        assert!(order_v > 1.6 && order_v < 2.4, "velocity order {order_v}");
        assert!(order_f > 1.6 && order_f < 2.4, "current order {order_f}");
    }


    #[test]
    fn potential_recovers_harmonic_well() {
        // Static harmonic ground-state density with v = 0: the curvature term
        // rebuilds the parabola, anchored to zero at the midpoint.
        let space = SpatialGrid1D::new(-8.0, 8.0, 8193).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let n = gaussian_density(space, grid);
        let v = SpaceTimeField1D::from_fn(space, grid, 1.0, |_, _| 0.0).unwrap();
        let (pot, psi) = potential_from_density_1d(&n, &v).unwrap();
        for (j, x) in space.nodes().enumerate() {
            if n.value(5, j) > 1e-7 {
                assert!(
                    (pot.value(5, j) - 0.5 * x * x).abs() < 1e-4,
                    "x = {x}: V = {}",
                    pot.value(5, j)
                );
            }
        }
        // Zero velocity means a spatially constant phase.
        let row = psi.row(3);
        let base = row[space.n_points() / 2].arg();
        for j in 0..space.n_points() {
            if n.value(3, j) > 1e-8 {
                assert!((row[j].arg() - base).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn potential_galilean_ride() {
        // Constant velocity u with the density rigidly translating: the
        // potential pattern is the translated well, up to the gauge anchor.
        let space = SpatialGrid1D::new(-9.0, 9.0, 8193).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let u = 0.5;
        let norm = (1.0 / std::f64::consts::PI).sqrt();
        let n = SpaceTimeField1D::from_fn(space, grid, 1.0, move |x, t| {
            norm * (-(x - u * t) * (x - u * t)).exp()
        })
        .unwrap();
        let v = SpaceTimeField1D::from_fn(space, grid, 1.0, move |_, _| u).unwrap();
        let (pot, _) = potential_from_density_1d(&n, &v).unwrap();
        let k = 150;
        let t = grid.time(k);
        let x_ref = 0.0;
        for (j, x) in space.nodes().enumerate() {
            if n.value(k, j) > 1e-5 {
                let expect = 0.5 * ((x - u * t) * (x - u * t) - (x_ref - u * t) * (x_ref - u * t));
                let got = pot.value(k, j) - pot.value(k, space.n_points() / 2);
                assert!((got - expect).abs() < 2e-4, "x = {x}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn potential_rejects_inconsistent_velocity() {
        let space = SpatialGrid1D::new(-8.0, 8.0, 513).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let n = gaussian_density(space, grid);
        // A large divergence-carrying velocity over a static density.
        let v = SpaceTimeField1D::from_fn(space, grid, 1.0, |x, _| x).unwrap();
        assert!(matches!(
            potential_from_density_1d(&n, &v),
            Err(PulseError::InvalidParameter(_))
        ));
    }

    #[test]
    fn vector_potential_static_ground_state() {
        // Zero current over a stationary eigenstate: the phase winds as
        // (V0 - E0) t, so A = t dV0/dx on the unmasked interior, and
        // A(., t0) = 0 exactly.
        let space = SpatialGrid1D::new(-8.0, 8.0, 1025).unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 100).unwrap();
        let mass = 1.0;
        let psi0 = GridWavefunction1D::from_fn(space, mass, |x| {
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        })
        .unwrap();
        let j = SpaceTimeField1D::from_fn(space, grid, mass, |_, _| 0.0).unwrap();
        let (a, psi) = vector_potential_from_current_1d(&j, &psi0).unwrap();
        for jdx in 0..space.n_points() {
            assert_eq!(a.value(0, jdx), 0.0);
        }
        let k = 100;
        let t = grid.time(k);
        let n0 = psi0.density();
        for (jdx, x) in space.nodes().enumerate() {
            if n0[jdx] > 1e-6 {
                // dV0/dx = x for the harmonic well.
                assert!(
                    (a.value(k, jdx) - t * x).abs() < 2e-3,
                    "x = {x}: A = {} vs {}",
                    a.value(k, jdx),
                    t * x
                );
            }
        }
        // Density frozen.
        for (jdx, &n) in n0.iter().enumerate() {
            assert!((psi.density_row(k)[jdx] - n).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_potential_flags_node_formation() {
        // Uniform flow over a static profile drains density through the left
        // flank until a node forms.
        let space = SpatialGrid1D::new(-7.0, 7.0, 513).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 400).unwrap();
        let mass = 1.0;
        let psi0 = GridWavefunction1D::from_fn(space, mass, |x| {
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        })
        .unwrap();
        let norm = (1.0 / std::f64::consts::PI).sqrt();
        let j = SpaceTimeField1D::from_fn(space, grid, mass, move |x, _| {
            0.5 * norm * (-x * x).exp()
        })
        .unwrap();
        match vector_potential_from_current_1d(&j, &psi0) {
            Err(PulseError::VanishingDensity { .. }) => {}
            other => panic!("expected node formation, got {other:?}"),
        }
    }

    #[test]
    fn scaling_observables_identity_and_jacobian() {
        let space = SpatialGrid1D::new(-12.0, 12.0, 769).unwrap();
        let grid = TimeGrid::new(0.0, 4.0, 100).unwrap();
        // Identity program: base observables, no flow.
        let idp = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.0, 0.0, 4.0).unwrap();
        let (n, v) = scaling_observables(&idp, &space, &grid).unwrap();
        let norm = (1.0 / std::f64::consts::PI).sqrt();
        for (j, x) in space.nodes().enumerate() {
            assert!((n.value(50, j) - norm * (-x * x).exp()).abs() < 1e-14);
            assert_eq!(v.value(50, j), 0.0);
        }
        // Pure dilation to alpha = 2: center density halves, norm stays 1.
        let dil = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 1.0, 0.0, 4.0).unwrap();
        let (n2, _) = scaling_observables(&dil, &space, &grid).unwrap();
        let last = grid.len() - 1;
        let mid = space.n_points() / 2;
        assert!((n2.value(last, mid) - 0.5 * n2.value(0, mid)).abs() < 1e-12);
        let total = trapezoid_sum(n2.row(last), space.dx());
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_solution_identity_is_stationary() {
        let space = SpatialGrid1D::new(-8.0, 8.0, 513).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 100).unwrap();
        let idp = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.0, 0.0, 2.0).unwrap();
        let (v, psi) = scaling_solution(&idp, &space, &grid).unwrap();
        for (j, x) in space.nodes().enumerate() {
            assert!((v.value(60, j) - 0.5 * x * x).abs() < 1e-12);
        }
        // Phase winds as -E0 t globally.
        let k = 100;
        let mid = space.n_points() / 2;
        let expected = -0.5 * grid.time(k);
        assert!((psi.row(k)[mid].arg() - expected).abs() < 1e-9);
    }

    #[test]
    fn scaling_solution_rigid_transport() {
        // alpha = 1: V(x, t) = V0(x - r0) - m r0_ddot x, exactly.
        let space = SpatialGrid1D::new(-9.0, 11.0, 257).unwrap();
        let tau = 5.0;
        let grid = TimeGrid::new(0.0, tau, 100).unwrap();
        let prog = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.0, 1.0, tau).unwrap();
        let (v, _) = scaling_solution(&prog, &space, &grid).unwrap();
        let k = 40;
        let t = grid.time(k);
        let r = smooth_step_unchecked(t / tau);
        let rdd = smooth_step_deriv2(t / tau) / (tau * tau);
        for (j, x) in space.nodes().enumerate() {
            let expect = 0.5 * (x - r) * (x - r) - rdd * x;
            assert!((v.value(k, j) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_solution_rejects_bad_base_energy() {
        let space = SpatialGrid1D::new(-8.0, 8.0, 257).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let mut base = harmonic_base(1.0, 1.0);
        base.energy = 0.51; // off by 1e-2
        let prog = smooth_scaling_program(1.0, base, 0.2, 0.0, 1.0).unwrap();
        assert!(matches!(
            scaling_solution(&prog, &space, &grid),
            Err(PulseError::BaseStateInvalid { .. })
        ));
    }

    #[test]
    fn curvature_identity_on_scaled_density() {
        // d^2 sqrt(n)/dx^2/(2 m sqrt(n)) over the scaled density equals
        // V0(xi)/alpha^2 - E0/alpha^2; fourth-order stencil oracle.
        let space = SpatialGrid1D::new(-9.0, 11.0, 3601).unwrap();
        let grid = TimeGrid::new(0.0, 5.0, 4).unwrap();
        let prog = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.5, 1.0, 5.0).unwrap();
        let (n, _) = scaling_observables(&prog, &space, &grid).unwrap();
        let k = 3;
        let t = grid.time(k);
        let al = (prog.alpha)(t);
        let r = (prog.r0)(t);
        let a: Vec<f64> = n.row(k).iter().map(|&x| x.sqrt()).collect();
        let curv = second_diff_x4(&a, space.dx());
        let mut worst = 0.0f64;
        for (j, x) in space.nodes().enumerate().skip(2).take(space.n_points() - 4) {
            if n.value(k, j) > 1e-10 {
                let bohm = curv[j] / (2.0 * a[j]);
                let xi = (x - r) / al;
                let expect = (0.5 * xi * xi - 0.5) / (al * al);
                worst = worst.max((bohm - expect).abs());
            }
        }
        assert!(worst < 1e-6, "curvature identity off by {worst:.3e}");
    }

    #[test]
    fn oscillator_parameters_anchors() {
        let grid = TimeGrid::new(0.0, 5.0, 200).unwrap();
        // alpha = 1: omega = omega0 and f = m r0_ddot + m omega0^2 r0.
        let rigid = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.0, 1.0, 5.0).unwrap();
        let rec = oscillator_parameters(&rigid, 1.0, &grid).unwrap();
        for (k, t) in grid.times().enumerate() {
            assert!((rec.params.omega_sq.values()[k] - 1.0).abs() < 1e-14);
            let r = smooth_step_unchecked(t / 5.0);
            let rdd = smooth_step_deriv2(t / 5.0) / 25.0;
            assert!((rec.params.force.values()[k] - (rdd + r)).abs() < 1e-13);
        }
        // r0 = 0: no drive for any alpha program.
        let breathing = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.5, 0.0, 5.0).unwrap();
        let rec2 = oscillator_parameters(&breathing, 1.0, &grid).unwrap();
        for k in 0..grid.len() {
            assert_eq!(rec2.params.force.values()[k], 0.0);
        }
        // The Newton identity cancels pointwise for a generic program.
        let generic = smooth_scaling_program(1.0, harmonic_base(1.0, 1.0), 0.4, 0.7, 5.0).unwrap();
        let rec3 = oscillator_parameters(&generic, 1.0, &grid).unwrap();
        for k in 0..grid.len() {
            assert!(rec3.newton_residual.values()[k].abs() <= 1e-12);
        }
        // omega^2 and f at the initial instant.
        assert!((rec3.params.omega_sq.values()[0] - 1.0).abs() < 1e-14);
        assert_eq!(rec3.params.force.values()[0], 0.0);
    }

    #[test]
    fn oscillator_parameters_rejects_anharmonic_base() {
        let mut base = harmonic_base(1.0, 1.0);
        base.potential = Box::new(|x| 0.5 * x * x + 0.1 * x * x * x * x);
        let prog = smooth_scaling_program(1.0, base, 0.2, 0.0, 1.0).unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(oscillator_parameters(&prog, 1.0, &grid).is_err());
    }
}

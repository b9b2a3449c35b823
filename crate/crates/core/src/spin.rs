//! Two-level (spin-1/2) inverse engineering: map Bloch-sphere trajectories to
//! in-plane magnetic-field pulses and the global phase, with the
//! gamma-parametrization that builds in representability, and the cyclic
//! spin-flip (NOT gate) pulse generator.

use num_complex::Complex64;

use crate::error::{PulseError, Result};
use crate::grid::{cumulative_trapezoid, TimeGrid, TimeSeries};
use crate::lattice::HoppingSignal;
use crate::math::{cos_pi, sin_pi};
use crate::state::LatticeWavefunction;
use std::f64::consts::PI;

/// Trajectories passing closer than this to the equator are examined for a
/// perpendicular crossing.
pub const POLE_MARGIN: f64 = 1e-6;
/// An in-plane field component beyond this magnitude counts as divergent.
pub const FIELD_CAP: f64 = 1e6;
/// Azimuthal speed below this counts as a perpendicular equator crossing.
pub const CROSSING_TOL: f64 = 1e-8;

/// Bloch-sphere trajectory: polar and azimuthal angles with their time
/// derivatives at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    grid: TimeGrid,
    theta: Vec<f64>,
    phi: Vec<f64>,
    theta_dot: Vec<f64>,
    phi_dot: Vec<f64>,
}

impl BlochTrajectory {
    pub fn new(
        grid: TimeGrid,
        theta: Vec<f64>,
        phi: Vec<f64>,
        theta_dot: Vec<f64>,
        phi_dot: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        for (name, v) in
            [("theta", &theta), ("phi", &phi), ("theta_dot", &theta_dot), ("phi_dot", &phi_dot)]
        {
            if v.len() != n {
                return Err(PulseError::DimensionMismatch(format!("{name} series length")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PulseError::NonFinite(format!("{name} series")));
            }
        }
        if theta.iter().any(|&t| !(0.0..=PI).contains(&t)) {
            return Err(PulseError::Domain("theta outside (0, pi)".into()));
        }
        Ok(Self { grid, theta, phi, theta_dot, phi_dot })
    }

    /// Sample closed-form angles and derivatives.
    pub fn from_fns(
        grid: TimeGrid,
        theta: impl Fn(f64) -> f64,
        phi: impl Fn(f64) -> f64,
        theta_dot: impl Fn(f64) -> f64,
        phi_dot: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let t: Vec<f64> = grid.times().collect();
        Self::new(
            grid,
            t.iter().map(|&x| theta(x)).collect(),
            t.iter().map(|&x| phi(x)).collect(),
            t.iter().map(|&x| theta_dot(x)).collect(),
            t.iter().map(|&x| phi_dot(x)).collect(),
        )
    }

    /// Sample closed-form angles; derivatives by central differences.
    pub fn from_angles(
        grid: TimeGrid,
        theta: impl Fn(f64) -> f64,
        phi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let th: Vec<f64> = grid.times().map(&theta).collect();
        let ph: Vec<f64> = grid.times().map(&phi).collect();
        let thd = crate::grid::central_diff_slice(&th, grid.dt());
        let phd = crate::grid::central_diff_slice(&ph, grid.dt());
        Self::new(grid, th, ph, thd, phd)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.theta[k]
    }

    pub fn phi(&self, k: usize) -> f64 {
        self.phi[k]
    }

    pub fn theta_dot(&self, k: usize) -> f64 {
        self.theta_dot[k]
    }

    pub fn phi_dot(&self, k: usize) -> f64 {
        self.phi_dot[k]
    }

    /// Normalized spinor at node k, up to the global phase:
    /// (cos(theta/2), e^{i phi} sin(theta/2)).
    pub fn state(&self, k: usize) -> LatticeWavefunction {
        state_on_sphere(self.theta[k], self.phi[k], 0.0)
    }
}

/// Spinor for angles (theta, phi) and global phase beta.
pub fn state_on_sphere(theta: f64, phi: f64, beta: f64) -> LatticeWavefunction {
    let up = Complex64::from_polar((theta / 2.0).cos(), beta);
    let down = Complex64::from_polar((theta / 2.0).sin(), beta + phi);
    LatticeWavefunction::normalized(vec![up, down]).expect("spinor is normalized")
}

/// In-plane magnetic-field pulse (Bx, By); Bz is gauged away.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPulse {
    grid: TimeGrid,
    bx: Vec<f64>,
    by: Vec<f64>,
}

impl FieldPulse {
    pub fn new(grid: TimeGrid, bx: Vec<f64>, by: Vec<f64>) -> Result<Self> {
        if bx.len() != grid.len() || by.len() != grid.len() {
            return Err(PulseError::DimensionMismatch("field pulse length".into()));
        }
        if bx.iter().chain(by.iter()).any(|x| !x.is_finite()) {
            return Err(PulseError::NonFinite("field pulse".into()));
        }
        Ok(Self { grid, bx, by })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn bx(&self, k: usize) -> f64 {
        self.bx[k]
    }

    pub fn by(&self, k: usize) -> f64 {
        self.by[k]
    }

    pub fn bx_all(&self) -> &[f64] {
        &self.bx
    }

    pub fn by_all(&self) -> &[f64] {
        &self.by
    }

    /// Complex drive on the up-down link: (Bx - i By)/2.
    pub fn complex_drive(&self, k: usize) -> Complex64 {
        Complex64::new(self.bx[k] / 2.0, -self.by[k] / 2.0)
    }

    /// Package the pulse as the isomorphic two-site hopping signal.
    pub fn to_hopping_signal(&self) -> Result<HoppingSignal> {
        let steps = (0..self.grid.len())
            .map(|k| {
                let b = self.complex_drive(k);
                nalgebra::DMatrix::from_row_slice(
                    2,
                    2,
                    &[Complex64::new(0.0, 0.0), b, b.conj(), Complex64::new(0.0, 0.0)],
                )
            })
            .collect();
        HoppingSignal::new(self.grid, steps)
    }
}

/// Complex link observable of a Bloch point:
/// Q = (phi_dot sin(theta) tan(theta) + i theta_dot sin(theta)) / 2.
pub fn bloch_to_observable(theta: f64, theta_dot: f64, phi_dot: f64) -> Result<Complex64> {
    let k = if phi_dot == 0.0 {
        0.0
    } else {
        let v = phi_dot * theta.sin() * theta.tan();
        if !v.is_finite() || v.abs() > FIELD_CAP {
            return Err(PulseError::EquatorSingularity { time: f64::NAN, phi_dot });
        }
        v
    };
    Ok(Complex64::new(k / 2.0, theta_dot * theta.sin() / 2.0))
}

/// In-plane field components and global phase for a Bloch trajectory:
/// Bx = phi_dot tan(theta) cos(phi) + theta_dot sin(phi),
/// By = -theta_dot cos(phi) + phi_dot tan(theta) sin(phi),
/// beta(t) = beta(0) + (1/2) int phi_dot tan(theta) tan(theta/2) dt'.
pub fn field_from_bloch(traj: &BlochTrajectory) -> Result<(FieldPulse, TimeSeries<f64>)> {
    let grid = *traj.grid();
    let n = grid.len();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut beta_integrand = vec![0.0; n];
    for k in 0..n {
        let theta = traj.theta(k);
        let phi = traj.phi(k);
        let td = traj.theta_dot(k);
        let pd = traj.phi_dot(k);
        let transverse = if pd == 0.0 { 0.0 } else { pd * theta.tan() };
        if !transverse.is_finite() || transverse.abs() > FIELD_CAP {
            return Err(PulseError::EquatorSingularity { time: grid.time(k), phi_dot: pd });
        }
        bx[k] = transverse * phi.cos() + td * phi.sin();
        by[k] = -td * phi.cos() + transverse * phi.sin();
        beta_integrand[k] = 0.5 * transverse * (theta / 2.0).tan();
    }
    let beta = TimeSeries::new(grid, cumulative_trapezoid(&beta_integrand, grid.dt()))?;
    Ok((FieldPulse::new(grid, bx, by)?, beta))
}

/// Polar angle from the representability variable gamma = phi_dot tan(theta):
/// theta = 2 arctan(sqrt((phi_dot/gamma)^2 + 1) - phi_dot/gamma), always in
/// (0, pi). phi_dot/gamma = 0 puts the point on the equator.
pub fn theta_from_gamma(gamma: f64, phi_dot: f64) -> Result<f64> {
    if gamma == 0.0 {
        if phi_dot == 0.0 {
            return Ok(PI / 2.0);
        }
        return Err(PulseError::UndefinedLimit { time: f64::NAN });
    }
    Ok(theta_from_ratio(phi_dot / gamma))
}

/// theta for a given u = phi_dot/gamma, evaluated without cancellation.
pub fn theta_from_ratio(u: f64) -> f64 {
    if u >= 0.0 {
        2.0 * (1.0 / (u.hypot(1.0) + u)).atan()
    } else {
        2.0 * (u.hypot(1.0) - u).atan()
    }
}

/// Time functions of a gamma-parametrized drive program. The azimuth is held
/// in half-turns (phi / pi) so the trigonometry is exact at the pulse
/// boundaries; the ratio u = phi_dot/gamma and its derivative may be supplied
/// in closed form where gamma and phi_dot vanish together.
pub struct GammaProgram {
    pub gamma: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub gamma_dot: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub phi_half_turns: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub phi_dot: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub phi_ddot: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Closed-form (u, u_dot); when absent both are computed from the
    /// quotient rule, which fails where gamma and phi_dot vanish together.
    pub ratio: Option<Box<dyn Fn(f64) -> (f64, f64) + Send + Sync>>,
}

impl GammaProgram {
    /// phi in radians.
    pub fn phi(&self, t: f64) -> f64 {
        PI * (self.phi_half_turns)(t)
    }

    /// u = phi_dot/gamma and its time derivative.
    fn ratio_at(&self, t: f64) -> Result<(f64, f64)> {
        if let Some(r) = &self.ratio {
            return Ok(r(t));
        }
        let g = (self.gamma)(t);
        let gd = (self.gamma_dot)(t);
        let pd = (self.phi_dot)(t);
        let pdd = (self.phi_ddot)(t);
        let u = pd / g;
        let ud = (pdd * g - pd * gd) / (g * g);
        if !u.is_finite() || !ud.is_finite() {
            return Err(PulseError::UndefinedLimit { time: t });
        }
        Ok((u, ud))
    }
}

/// Field pulse and global phase from a gamma program:
/// Bx = gamma cos(phi) - [u_dot/(u^2+1)] sin(phi),
/// By = [u_dot/(u^2+1)] cos(phi) + gamma sin(phi),
/// beta(t) = beta(0) + (1/2) int [gamma sqrt(u^2+1) - phi_dot] dt'.
pub fn field_from_gamma(
    prog: &GammaProgram,
    grid: TimeGrid,
) -> Result<(FieldPulse, TimeSeries<f64>)> {
    let n = grid.len();
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut beta_integrand = vec![0.0; n];
    for (k, t) in grid.times().enumerate() {
        let g = (prog.gamma)(t);
        let (u, ud) = prog.ratio_at(t)?;
        let half = (prog.phi_half_turns)(t);
        let (sin_phi, cos_phi) = (sin_pi(half), cos_pi(half));
        let tilt = ud / (u * u + 1.0);
        bx[k] = g * cos_phi - tilt * sin_phi;
        by[k] = tilt * cos_phi + g * sin_phi;
        beta_integrand[k] = 0.5 * (g * u.hypot(1.0) - (prog.phi_dot)(t));
    }
    let beta = TimeSeries::new(grid, cumulative_trapezoid(&beta_integrand, grid.dt()))?;
    Ok((FieldPulse::new(grid, bx, by)?, beta))
}

/// Bloch trajectory traced by a gamma program.
pub fn bloch_from_gamma(prog: &GammaProgram, grid: TimeGrid) -> Result<BlochTrajectory> {
    let n = grid.len();
    let mut theta = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut theta_dot = vec![0.0; n];
    let mut phi_dot = vec![0.0; n];
    for (k, t) in grid.times().enumerate() {
        let (u, ud) = prog.ratio_at(t)?;
        theta[k] = theta_from_ratio(u);
        theta_dot[k] = -ud / (u * u + 1.0);
        phi[k] = prog.phi(t);
        phi_dot[k] = (prog.phi_dot)(t);
    }
    BlochTrajectory::new(grid, theta, phi, theta_dot, phi_dot)
}

/// The cyclic spin-flip program: gamma runs monotonically from B0 to -B0
/// through a cubic, and the azimuth advances from 0 to pi with vanishing
/// first and second derivatives at both ends and at the midpoint, where the
/// trajectory crosses the equator perpendicularly.
pub fn not_gate_program(b0: f64, tau: f64) -> Result<GammaProgram> {
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(PulseError::InvalidParameter(format!("field anchor B0 = {b0}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PulseError::InvalidParameter(format!("pulse duration tau = {tau}")));
    }
    // Prefactor chosen so gamma(0) = B0 exactly.
    let bg = b0 / 2.0;
    let x_of = move |t: f64| 1.0 - 2.0 * t / tau;
    let gamma = move |t: f64| {
        let x = x_of(t);
        0.5 * bg * x * (x * x + 3.0)
    };
    let gamma_dot = move |t: f64| {
        let x = x_of(t);
        -(3.0 * bg / tau) * (x * x + 1.0)
    };
    let phi_half_turns = move |t: f64| t / tau - sin_pi(4.0 * t / tau) / (4.0 * PI);
    let phi_dot = move |t: f64| {
        let s = sin_pi(2.0 * t / tau);
        (2.0 * PI / tau) * s * s
    };
    let phi_ddot = move |t: f64| (4.0 * PI * PI / (tau * tau)) * sin_pi(4.0 * t / tau);
    // u = phi_dot/gamma = (4 pi / (Bg tau)) sin^2(pi x) / (x (x^2 + 3)); the
    // 0/0 at the midpoint has the analytic limit u = 0 with
    // u_dot = -8 pi^3 / (3 Bg tau^2).
    let ratio = move |t: f64| -> (f64, f64) {
        let x = x_of(t);
        let c = 4.0 * PI / (bg * tau);
        if x == 0.0 {
            return (0.0, -8.0 * PI.powi(3) / (3.0 * bg * tau * tau));
        }
        let s = sin_pi(x);
        let s2 = s * s;
        let q = x * (x * x + 3.0);
        let u = c * s2 / q;
        let ds2 = PI * sin_pi(2.0 * x);
        let dq = 3.0 * x * x + 3.0;
        let du_dx = c * (ds2 * q - s2 * dq) / (q * q);
        (u, du_dx * (-2.0 / tau))
    };
    Ok(GammaProgram {
        gamma: Box::new(gamma),
        gamma_dot: Box::new(gamma_dot),
        phi_half_turns: Box::new(phi_half_turns),
        phi_dot: Box::new(phi_dot),
        phi_ddot: Box::new(phi_ddot),
        ratio: Some(Box::new(ratio)),
    })
}

/// Everything the spin-flip pulse produces: the field, the global-phase
/// series, the Bloch trajectory, the predicted final state (global phase
/// included) and the accumulated phase beta(tau) - beta(0).
pub struct NotGatePulse {
    pub pulse: FieldPulse,
    pub beta: TimeSeries<f64>,
    pub trajectory: BlochTrajectory,
    pub predicted_final: LatticeWavefunction,
    pub delta_beta: f64,
}

/// Build the spin-flip pulse on a grid spanning [0, tau]. Applied to the
/// ground state of B0 x-hat it lands on the excited state (and vice versa),
/// with the overall phase dropping by pi/2.
pub fn not_gate_pulse(b0: f64, tau: f64, grid: TimeGrid) -> Result<NotGatePulse> {
    if grid.t_start() != 0.0 || (grid.t_end() - tau).abs() > 1e-12 {
        return Err(PulseError::GridMismatch(format!(
            "pulse grid must span [0, {tau}], got [{}, {}]",
            grid.t_start(),
            grid.t_end()
        )));
    }
    let prog = not_gate_program(b0, tau)?;
    let (pulse, beta) = field_from_gamma(&prog, grid)?;
    let trajectory = bloch_from_gamma(&prog, grid)?;
    let last = grid.len() - 1;
    let delta_beta = beta.values()[last];
    let predicted_final = state_on_sphere(trajectory.theta(last), trajectory.phi(last), delta_beta);
    Ok(NotGatePulse { pulse, beta, trajectory, predicted_final, delta_beta })
}

/// One flagged grid node: the trajectory sits on the equator while still
/// moving azimuthally, which no finite in-plane field can produce.
#[derive(Debug, Clone, PartialEq)]
pub struct EquatorViolation {
    pub step: usize,
    pub time: f64,
    pub theta: f64,
    pub phi_dot: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlochReport {
    pub violations: Vec<EquatorViolation>,
}

impl BlochReport {
    pub fn is_representable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flag every node where theta sits within [`POLE_MARGIN`] of the equator
/// while the transverse drive phi_dot tan(theta) diverges beyond
/// [`FIELD_CAP`]: trajectories may cross the equator only perpendicularly.
/// Near a perpendicular crossing phi_dot and theta - pi/2 vanish together, so
/// their ratio stays bounded and the node passes; |phi_dot| at or below
/// [`CROSSING_TOL`] short-circuits as a crossing.
pub fn check_bloch_representability(traj: &BlochTrajectory) -> BlochReport {
    let mut report = BlochReport::default();
    for k in 0..traj.grid().len() {
        let theta = traj.theta(k);
        let pd = traj.phi_dot(k);
        if (theta - PI / 2.0).abs() > POLE_MARGIN || pd.abs() <= CROSSING_TOL {
            continue;
        }
        let transverse = pd * theta.tan();
        if !transverse.is_finite() || transverse.abs() > FIELD_CAP {
            report.violations.push(EquatorViolation {
                step: k,
                time: traj.grid().time(k),
                theta,
                phi_dot: pd,
            });
        }
    }
    report
}

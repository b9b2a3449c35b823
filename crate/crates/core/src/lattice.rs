//! Generalized lattice map between complex link observables and complex
//! hopping drives: extract the link observable from a state, reconstruct the
//! hopping matrix and the full wavefunction from a prescribed observable, and
//! check the fixed-amplitude representability bound.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PulseError, Result};
use crate::grid::{cumulative_trapezoid, TimeGrid};
use crate::state::LatticeWavefunction;

/// Below this site density the maps abort instead of dividing by a vanishing
/// amplitude: the reconstruction requires a nodeless state.
pub const DENSITY_FLOOR: f64 = 1e-10;

/// Relative slack on the |Q|^2 bound so that trajectories built to saturate
/// it exactly are not flagged by rounding.
pub const Q_BOUND_MARGIN_REL: f64 = 1e-12;

fn check_hermitian_step(m: &DMatrix<Complex64>, what: &str, step: usize) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(PulseError::DimensionMismatch(format!("{what} step {step} is not square")));
    }
    for i in 0..n {
        if m[(i, i)] != Complex64::new(0.0, 0.0) {
            return Err(PulseError::NonHermitian(format!(
                "{what} step {step} has nonzero diagonal at site {i}"
            )));
        }
        for j in (i + 1)..n {
            let a = m[(i, j)];
            let b = m[(j, i)];
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(PulseError::NonFinite(format!("{what} step {step} entry ({i},{j})")));
            }
            if a != b.conj() {
                return Err(PulseError::NonHermitian(format!(
                    "{what} step {step} entry ({i},{j}) vs ({j},{i})"
                )));
            }
        }
    }
    Ok(())
}

/// Time-dependent complex hopping matrix T_ij(t) with zero diagonal,
/// T_ij = conj(T_ji), one matrix per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingSignal {
    grid: TimeGrid,
    steps: Vec<DMatrix<Complex64>>,
}

impl HoppingSignal {
    pub fn new(grid: TimeGrid, steps: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if steps.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} hopping matrices for {} grid nodes",
                steps.len(),
                grid.len()
            )));
        }
        for (k, m) in steps.iter().enumerate() {
            check_hermitian_step(m, "hopping", k)?;
        }
        Ok(Self { grid, steps })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DMatrix<Complex64>) -> Result<Self> {
        let steps = grid.times().map(&f).collect();
        Self::new(grid, steps)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sites(&self) -> usize {
        self.steps[0].nrows()
    }

    pub fn step(&self, k: usize) -> &DMatrix<Complex64> {
        &self.steps[k]
    }

    pub fn steps(&self) -> &[DMatrix<Complex64>] {
        &self.steps
    }
}

/// Hermitian link observable Q_ij(t): the real part is the kinetic link term
/// K_ij, the imaginary part the link current J_ij.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCurrent {
    grid: TimeGrid,
    steps: Vec<DMatrix<Complex64>>,
}

impl ComplexCurrent {
    pub fn new(grid: TimeGrid, steps: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if steps.len() != grid.len() {
            return Err(PulseError::DimensionMismatch(format!(
                "{} observable matrices for {} grid nodes",
                steps.len(),
                grid.len()
            )));
        }
        for (k, m) in steps.iter().enumerate() {
            check_hermitian_step(m, "complex current", k)?;
        }
        Ok(Self { grid, steps })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sites(&self) -> usize {
        self.steps[0].nrows()
    }

    pub fn step(&self, k: usize) -> &DMatrix<Complex64> {
        &self.steps[k]
    }

    /// Kinetic link part, Re Q.
    pub fn kinetic(&self, k: usize, i: usize, j: usize) -> f64 {
        self.steps[k][(i, j)].re
    }

    /// Link current, Im Q.
    pub fn current(&self, k: usize, i: usize, j: usize) -> f64 {
        self.steps[k][(i, j)].im
    }
}

/// Link observable of a single instant: Q_ij = 2 T_ij psi_i^* psi_j.
///
/// Hermitian with zero diagonal by construction.
pub fn observable_from_state(
    hopping: &DMatrix<Complex64>,
    psi: &LatticeWavefunction,
) -> Result<DMatrix<Complex64>> {
    let m = psi.sites();
    if hopping.nrows() != m || hopping.ncols() != m {
        return Err(PulseError::DimensionMismatch(format!(
            "{}x{} hopping matrix for a {}-site state",
            hopping.nrows(),
            hopping.ncols(),
            m
        )));
    }
    let a = psi.amplitudes();
    let mut q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = 2.0 * hopping[(i, j)] * a[i].conj() * a[j];
            q[(i, j)] = v;
            q[(j, i)] = v.conj();
        }
    }
    Ok(q)
}

/// Wavefunction trajectory on a lattice, one state per grid node.
#[derive(Debug, Clone)]
pub struct LatticeTrajectory {
    pub grid: TimeGrid,
    pub states: Vec<LatticeWavefunction>,
}

impl LatticeTrajectory {
    pub fn state(&self, k: usize) -> &LatticeWavefunction {
        &self.states[k]
    }

    pub fn final_state(&self) -> &LatticeWavefunction {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest deviation of any stored state norm from 1.
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (s.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn densities(&self, k: usize) -> Vec<f64> {
        self.states[k].densities()
    }
}

/// Reconstruct the complex hopping drive and the wavefunction trajectory from
/// a prescribed link observable and the initial state.
///
/// The site amplitudes come from the running trapezoid integral of the link
/// currents, the phases from the kinetic terms divided by the running
/// density, and the hopping from Q_ij / (2 psi_i^* psi_j). Aborts with
/// [`PulseError::VanishingDensity`] if any site density falls to
/// [`DENSITY_FLOOR`].
pub fn reconstruct_hopping(
    q: &ComplexCurrent,
    psi0: &LatticeWavefunction,
) -> Result<(HoppingSignal, LatticeTrajectory)> {
    let m = psi0.sites();
    if q.sites() != m {
        return Err(PulseError::DimensionMismatch(format!(
            "{}-site observable for a {}-site initial state",
            q.sites(),
            m
        )));
    }
    let grid = *q.grid();
    let n_nodes = grid.len();
    let dt = grid.dt();

    for i in 0..m {
        if psi0.density(i) <= DENSITY_FLOOR {
            return Err(PulseError::VanishingDensity {
                index: i,
                time: grid.t_start(),
                value: psi0.density(i),
            });
        }
    }

    // Site densities from the integrated current outflow.
    let mut densities = vec![vec![0.0; m]; n_nodes];
    for i in 0..m {
        let outflow: Vec<f64> = (0..n_nodes)
            .map(|k| (0..m).map(|j| q.step(k)[(i, j)].im).sum::<f64>())
            .collect();
        let drained = cumulative_trapezoid(&outflow, dt);
        let n0 = psi0.density(i);
        for k in 0..n_nodes {
            let n = n0 - drained[k];
            if n <= DENSITY_FLOOR {
                return Err(PulseError::VanishingDensity { index: i, time: grid.time(k), value: n });
            }
            densities[k][i] = n;
        }
    }

    // Site phases from the kinetic terms over the running density.
    let mut phases = vec![vec![0.0; m]; n_nodes];
    for i in 0..m {
        let integrand: Vec<f64> = (0..n_nodes)
            .map(|k| {
                let ksum: f64 = (0..m).map(|j| q.step(k)[(i, j)].re).sum();
                ksum / (2.0 * densities[k][i])
            })
            .collect();
        let phi = cumulative_trapezoid(&integrand, dt);
        let phi0 = psi0.amplitudes()[i].arg();
        for k in 0..n_nodes {
            phases[k][i] = phi0 + phi[k];
        }
    }

    let mut states = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let amps: Vec<Complex64> = (0..m)
            .map(|i| Complex64::from_polar(densities[k][i].sqrt(), phases[k][i]))
            .collect();
        states.push(LatticeWavefunction::from_raw(amps)?);
    }

    let mut hops = Vec::with_capacity(n_nodes);
    for (k, state) in states.iter().enumerate() {
        let a = state.amplitudes();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let v = q.step(k)[(i, j)] / (2.0 * a[i].conj() * a[j]);
                t[(i, j)] = v;
                t[(j, i)] = v.conj();
            }
        }
        hops.push(t);
    }

    Ok((HoppingSignal::new(grid, hops)?, LatticeTrajectory { grid, states }))
}

/// One entry of a representability report: the bound |Q_ij|^2 <= 4 T0^2 n_i n_j
/// is exceeded on link (i, j) at grid node `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct QBoundViolation {
    pub step: usize,
    pub time: f64,
    pub i: usize,
    pub j: usize,
    /// |Q_ij|^2 - 4 T0^2 n_i n_j.
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RepresentabilityReport {
    pub violations: Vec<QBoundViolation>,
}

impl RepresentabilityReport {
    pub fn is_representable(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the fixed-amplitude bound |Q_ij|^2 <= 4 T0^2 n_i n_j on every link
/// and node. Exact saturation passes: only an excess beyond a relative
/// rounding margin is flagged.
pub fn check_representability(
    q: &ComplexCurrent,
    densities: &[Vec<f64>],
    t0: f64,
) -> Result<RepresentabilityReport> {
    let m = q.sites();
    let grid = q.grid();
    if densities.len() != grid.len() {
        return Err(PulseError::DimensionMismatch(format!(
            "{} density rows for {} grid nodes",
            densities.len(),
            grid.len()
        )));
    }
    if t0 <= 0.0 || !t0.is_finite() {
        return Err(PulseError::InvalidParameter(format!(
            "hopping amplitude must be positive, got {t0}"
        )));
    }
    let margin = 4.0 * t0 * t0 * Q_BOUND_MARGIN_REL;
    let mut report = RepresentabilityReport::default();
    for (k, n) in densities.iter().enumerate() {
        if n.len() != m {
            return Err(PulseError::DimensionMismatch(format!("density row {k} has {} sites", n.len())));
        }
        if n.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(PulseError::InvalidParameter(format!("negative density at step {k}")));
        }
        let total: f64 = n.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(PulseError::NormalizationDrift(format!(
                "density row {k} sums to {total:.12}"
            )));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let bound = 4.0 * t0 * t0 * n[i] * n[j];
                let excess = q.step(k)[(i, j)].norm_sqr() - bound;
                if excess > margin {
                    report.violations.push(QBoundViolation {
                        step: k,
                        time: grid.time(k),
                        i,
                        j,
                        excess,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Band-limited random Hermitian hopping signal for round-trip exercises:
/// each link carries a few random cosine/sine components with frequencies
/// of order one, scaled to `amplitude`.
pub fn random_smooth_hopping(
    sites: usize,
    grid: TimeGrid,
    seed: u64,
    amplitude: f64,
) -> Result<HoppingSignal> {
    if sites < 2 {
        return Err(PulseError::InvalidParameter(format!("need at least 2 sites, got {sites}")));
    }
    if amplitude <= 0.0 || !amplitude.is_finite() {
        return Err(PulseError::InvalidParameter(format!("bad amplitude {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_modes = 3;
    // Per link (i < j): coefficients, frequencies, phases for Re and Im.
    struct LinkModes {
        re: Vec<(f64, f64, f64)>,
        im: Vec<(f64, f64, f64)>,
    }
    let mut modes = Vec::new();
    for _ in 0..(sites * (sites - 1)) / 2 {
        let draw = |rng: &mut ChaCha8Rng| {
            (0..n_modes)
                .map(|_| {
                    (
                        rng.random_range(-1.0..1.0) * amplitude / n_modes as f64,
                        rng.random_range(0.5..2.5),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect::<Vec<_>>()
        };
        modes.push(LinkModes { re: draw(&mut rng), im: draw(&mut rng) });
    }

    HoppingSignal::from_fn(grid, |t| {
        let mut m = DMatrix::zeros(sites, sites);
        let mut link = 0;
        for i in 0..sites {
            for j in (i + 1)..sites {
                let lm = &modes[link];
                let re: f64 = lm.re.iter().map(|&(c, w, p)| c * (w * t + p).cos()).sum();
                let im: f64 = lm.im.iter().map(|&(c, w, p)| c * (w * t + p).sin()).sum();
                let v = Complex64::new(re, im);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
                link += 1;
            }
        }
        m
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_site_t(t12: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), t12, t12.conj(), Complex64::new(0.0, 0.0)])
    }

    #[test]
    fn observable_real_state_carries_no_current() {
        // Real symmetric hopping and a real state: Im Q = 0 on every link.
        let t = DMatrix::from_fn(4, 4, |i, j| {
            if i == j { Complex64::new(0.0, 0.0) } else { Complex64::new(1.0 / (1.0 + (i as f64 - j as f64).abs()), 0.0) }
        });
        let psi = LatticeWavefunction::normalized(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(1.5, 0.0),
        ])
        .unwrap();
        let q = observable_from_state(&t, &psi).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(q[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn observable_empty_site_kills_link() {
        let t = two_site_t(Complex64::new(1.0, 0.0));
        let psi = LatticeWavefunction::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        let q = observable_from_state(&t, &psi).unwrap();
        assert_eq!(q[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn observable_two_site_circulating() {
        // psi = (1/sqrt2, i/sqrt2) with T12 = 1: Q12 = 2 (1/sqrt2)(i/sqrt2) = i.
        let t = two_site_t(Complex64::new(1.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = LatticeWavefunction::new(vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
        let q = observable_from_state(&t, &psi).unwrap();
        assert!((q[(0, 1)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((q[(1, 0)] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn reconstruct_zero_observable_gives_zero_drive() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let q = ComplexCurrent::new(grid, (0..grid.len()).map(|_| DMatrix::zeros(3, 3)).collect()).unwrap();
        let psi0 = LatticeWavefunction::normalized(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.5, 0.0),
        ])
        .unwrap();
        let (t, traj) = reconstruct_hopping(&q, &psi0).unwrap();
        for k in 0..grid.len() {
            assert!(t.step(k).iter().all(|v| v.norm() == 0.0));
            for i in 0..3 {
                assert!((traj.state(k).amplitudes()[i] - psi0.amplitudes()[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn reconstruct_rejects_initial_node() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let q = ComplexCurrent::new(grid, (0..grid.len()).map(|_| DMatrix::zeros(2, 2)).collect()).unwrap();
        let psi0 = LatticeWavefunction::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        match reconstruct_hopping(&q, &psi0) {
            Err(PulseError::VanishingDensity { index: 1, .. }) => {}
            other => panic!("expected vanishing density, got {other:?}"),
        }
    }

    #[test]
    fn representability_flags_excess() {
        // n_i = n_j = 1/2 and |Q| = 1.01 T0: bound is T0^2, so |Q|^2 exceeds.
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let q12 = Complex64::new(1.01, 0.0);
        let q = ComplexCurrent::new(grid, (0..3).map(|_| two_site_t(q12)).collect()).unwrap();
        let n = vec![vec![0.5, 0.5]; 3];
        let report = check_representability(&q, &n, 1.0).unwrap();
        assert_eq!(report.violations.len(), 3);
        assert!((report.violations[0].excess - (1.01f64.powi(2) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn representability_accepts_zero_and_saturation() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let zero = ComplexCurrent::new(grid, (0..3).map(|_| DMatrix::zeros(2, 2)).collect()).unwrap();
        let n = vec![vec![0.3, 0.7]; 3];
        assert!(check_representability(&zero, &n, 1.0).unwrap().is_representable());

        // Exactly saturating |Q|^2 = 4 T0^2 n1 n2 must pass.
        let qsat = Complex64::new(2.0 * (0.3f64 * 0.7).sqrt(), 0.0);
        let sat = ComplexCurrent::new(grid, (0..3).map(|_| two_site_t(qsat)).collect()).unwrap();
        assert!(check_representability(&sat, &n, 1.0).unwrap().is_representable());
    }

    #[test]
    fn hermiticity_is_validated() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = Complex64::new(1.0, 0.5);
        bad[(1, 0)] = Complex64::new(1.0, 0.5); // not the conjugate
        assert!(ComplexCurrent::new(grid, vec![bad.clone(), bad.clone(), bad]).is_err());
    }

    #[test]
    fn random_hopping_is_deterministic_per_seed() {
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let a = random_smooth_hopping(4, grid, 7, 0.3).unwrap();
        let b = random_smooth_hopping(4, grid, 7, 0.3).unwrap();
        let c = random_smooth_hopping(4, grid, 8, 0.3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}

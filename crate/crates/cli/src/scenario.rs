//! Scenario drivers: build the drive, certify it with the forward propagator,
//! and write the artifact files (pulse, observable trajectory, reconstructed
//! wavefunction, verification report, optional plot data).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;

use pulseforge::chain::{ground_state_chain, onsite_potential, two_stage_density, ChainSpec};
use pulseforge::field::SpaceTimeField1D;
use pulseforge::grid::{trapezoid_sum, TimeGrid};
use pulseforge::lattice::{
    observable_from_state, reconstruct_hopping, random_smooth_hopping, ComplexCurrent,
    HoppingSignal, LatticeTrajectory,
};
use pulseforge::propagate::{
    ground_state_grid_1d, ground_state_lattice, propagate_lattice, verify_grid, verify_lattice,
    GridVerification, LatticeHamiltonianSignal, LatticeVerification,
};
use pulseforge::realspace::{
    harmonic_base, oscillator_parameters, scaling_observables, scaling_solution,
    smooth_scaling_program,
};
use pulseforge::spin::{not_gate_pulse, state_on_sphere};
use pulseforge::state::{GridWavefunction1D, LatticeWavefunction, SpatialGrid1D};

use crate::config::{ExportFormat, ScenarioConfig, Thresholds};
use crate::io::{
    complex_site_channels, site_channels, write_pulse_file, PulseFile, ReportFile,
};
use crate::{CliError, CliResult};

/// Resolved run options shared by every scenario.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub format: ExportFormat,
    pub emit_plot_data: bool,
}

fn strided_grid(grid: &TimeGrid, stride: usize) -> CliResult<TimeGrid> {
    if stride == 0 || grid.n_steps() % stride != 0 {
        return Err(CliError::Config(format!(
            "export stride {stride} must divide n_steps = {}",
            grid.n_steps()
        )));
    }
    TimeGrid::new(grid.t_start(), grid.t_end(), grid.n_steps() / stride)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn stride_indices(n_steps: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..=n_steps).step_by(stride)
}

fn lattice_states_rows(traj: &LatticeTrajectory, stride: usize) -> Vec<Vec<f64>> {
    stride_indices(traj.grid.n_steps(), stride)
        .map(|k| {
            traj.state(k)
                .amplitudes()
                .iter()
                .flat_map(|a| [a.re, a.im])
                .collect()
        })
        .collect()
}

fn write_plot_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| crate::io::fmt_f64(*v)).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Chain reshaping: reconstruct the on-site drive for the two-stage density
/// program, certify it by forward propagation, export everything.
pub fn run_chain(cfg: &ScenarioConfig, ctx: &RunContext) -> CliResult<ReportFile> {
    let c = &cfg.chain;
    let thr = &cfg.thresholds;
    let spec = ChainSpec::new(c.sites, c.t0).map_err(CliError::from)?;
    let grid = TimeGrid::new(0.0, c.t2, c.n_steps).map_err(CliError::from)?;
    let program = two_stage_density(&spec, c.t1, c.t2, grid)?;
    let psi0 = ground_state_chain(&spec);
    let (potential, traj) = onsite_potential(&program, &spec, &psi0)?;

    let signal = potential.hamiltonian_signal(spec.t0)?;
    let k1 = grid.nearest_index(c.t1);
    let k2 = grid.n_steps();
    let report = verify_lattice(&LatticeVerification {
        signal: &signal,
        psi0: &psi0,
        substeps: c.substeps,
        target_densities: Some(program.rows()),
        target_final: None,
        ground_checkpoints: &[k1, k2],
    })?;

    let mut out = ReportFile::new("chain-reshape");
    out.parameter("sites", c.sites as f64)
        .parameter("t0", c.t0)
        .parameter("t1", c.t1)
        .parameter("t2", c.t2)
        .parameter("n_steps", c.n_steps as f64)
        .parameter("substeps", c.substeps as f64);
    out.metric("max_density_error", report.max_density_error)
        .metric("norm_drift", report.norm_drift)
        .metric("norm_drift_per_unit_time", report.norm_drift / (c.t2 - 0.0))
        .metric("schroedinger_residual", report.residual_norm);
    for cp in &report.checkpoint_overlaps {
        out.metric(&format!("ground_state_overlap_t{:.6}", cp.time), cp.overlap_sq);
    }
    out.threshold("max_density_error", thr.max_density_error)
        .threshold("min_checkpoint_overlap", thr.min_checkpoint_overlap)
        .threshold("max_norm_drift_per_unit_time", thr.max_norm_drift_per_unit_time);

    out.gate(
        report.max_density_error <= thr.max_density_error,
        format!(
            "max density error {:.3e} exceeds {:.1e}",
            report.max_density_error, thr.max_density_error
        ),
    );
    for cp in &report.checkpoint_overlaps {
        out.gate(
            cp.overlap_sq >= thr.min_checkpoint_overlap,
            format!(
                "ground-state overlap {:.12} at t = {} below {:.12}",
                cp.overlap_sq, cp.time, thr.min_checkpoint_overlap
            ),
        );
    }
    out.gate(
        report.norm_drift / c.t2 <= thr.max_norm_drift_per_unit_time,
        format!("norm drift {:.3e} per unit time", report.norm_drift / c.t2),
    );
    out.finalize();

    // Artifacts.
    let s = c.export_stride;
    let egrid = strided_grid(&grid, s)?;
    let pulse = PulseFile::new(
        "chain-onsite",
        &egrid,
        site_channels("v", c.sites),
        stride_indices(c.n_steps, s).map(|k| potential.row(k).to_vec()).collect(),
    )
    .with_meta("t0", c.t0)
    .with_meta("t1", c.t1)
    .with_meta("t2", c.t2)
    .with_meta("sites", c.sites as f64);
    write_pulse_file(&pulse, &ctx.out_dir, "pulse", ctx.format)?;

    let observable = PulseFile::new(
        "lattice-density",
        &egrid,
        site_channels("n", c.sites),
        stride_indices(c.n_steps, s).map(|k| program.row(k).to_vec()).collect(),
    );
    write_pulse_file(&observable, &ctx.out_dir, "observable", ctx.format)?;

    let wavefunction = PulseFile::new(
        "lattice-wavefunction",
        &egrid,
        complex_site_channels("psi", c.sites),
        lattice_states_rows(&traj, s),
    );
    write_pulse_file(&wavefunction, &ctx.out_dir, "wavefunction", ctx.format)?;
    out.write(&ctx.out_dir)?;

    if ctx.emit_plot_data {
        let density_rows: Vec<Vec<f64>> = stride_indices(c.n_steps, s)
            .map(|k| {
                let mut row = vec![grid.time(k)];
                row.extend_from_slice(program.row(k));
                row
            })
            .collect();
        write_plot_csv(
            &ctx.out_dir,
            "fig_density.csv",
            &format!("t,{}", site_channels("n", c.sites).join(",")),
            &density_rows,
        )?;
        let potential_rows: Vec<Vec<f64>> = stride_indices(c.n_steps, s)
            .map(|k| {
                let mut row = vec![grid.time(k)];
                row.extend_from_slice(potential.row(k));
                row
            })
            .collect();
        write_plot_csv(
            &ctx.out_dir,
            "fig_potentials.csv",
            &format!("t,{}", site_channels("v", c.sites).join(",")),
            &potential_rows,
        )?;
    }
    Ok(out)
}

/// Spin flip: build the cyclic pulse, certify the flip in both directions
/// and the accumulated global phase, export everything.
pub fn run_spin(cfg: &ScenarioConfig, ctx: &RunContext) -> CliResult<ReportFile> {
    let s = &cfg.spin;
    let thr = &cfg.thresholds;
    let grid = TimeGrid::new(0.0, s.tau, s.n_steps).map_err(CliError::from)?;
    let gate = not_gate_pulse(s.b0, s.tau, grid)?;
    let signal = LatticeHamiltonianSignal::Hopping(gate.pulse.to_hopping_signal()?);

    let left = LatticeWavefunction::spin_left();
    let right = LatticeWavefunction::spin_right();
    let report = verify_lattice(&LatticeVerification {
        signal: &signal,
        psi0: &left,
        substeps: s.substeps,
        target_densities: None,
        target_final: Some(&gate.predicted_final),
        ground_checkpoints: &[],
    })?;
    let reverse = propagate_lattice(&signal, &right, s.substeps)?;
    let reverse_fidelity =
        left.inner(reverse.final_state())?.norm_sqr() / reverse.final_state().norm_sqr();

    let fidelity = report.final_fidelity.unwrap_or(0.0);
    let phase_error = report.final_phase_error.unwrap_or(f64::NAN);
    let last = grid.len() - 1;

    let mut out = ReportFile::new("spin-not");
    out.parameter("b0", s.b0)
        .parameter("tau", s.tau)
        .parameter("n_steps", s.n_steps as f64)
        .parameter("substeps", s.substeps as f64);
    out.metric("fidelity", fidelity)
        .metric("reverse_fidelity", reverse_fidelity)
        .metric("phase_error", phase_error)
        .metric("delta_beta", gate.delta_beta)
        .metric("bx_start", gate.pulse.bx(0))
        .metric("by_start", gate.pulse.by(0))
        .metric("bx_end", gate.pulse.bx(last))
        .metric("by_end", gate.pulse.by(last))
        .metric("norm_drift", report.norm_drift)
        .metric("norm_drift_per_unit_time", report.norm_drift / s.tau)
        .metric("schroedinger_residual", report.residual_norm);
    out.threshold("min_fidelity", thr.min_fidelity)
        .threshold("max_phase_error", thr.max_phase_error)
        .threshold("max_norm_drift_per_unit_time", thr.max_norm_drift_per_unit_time);

    out.gate(
        gate.pulse.bx(0) == s.b0
            && gate.pulse.by(0) == 0.0
            && gate.pulse.bx(last) == s.b0
            && gate.pulse.by(last) == 0.0,
        "pulse endpoints differ from (B0, 0)".into(),
    );
    out.gate(
        fidelity >= thr.min_fidelity,
        format!("flip fidelity {fidelity:.12} below {:.12}", thr.min_fidelity),
    );
    out.gate(
        reverse_fidelity >= thr.min_fidelity,
        format!("reverse flip fidelity {reverse_fidelity:.12} below {:.12}", thr.min_fidelity),
    );
    out.gate(
        phase_error.abs() <= thr.max_phase_error,
        format!("global phase off the prediction by {phase_error:.3e} rad"),
    );
    out.gate(
        report.norm_drift / s.tau <= thr.max_norm_drift_per_unit_time,
        format!("norm drift {:.3e} per unit time", report.norm_drift / s.tau),
    );
    out.finalize();

    // Artifacts.
    let stride = s.export_stride;
    let egrid = strided_grid(&grid, stride)?;
    let pulse = PulseFile::new(
        "spin-pulse",
        &egrid,
        vec!["Bx".into(), "By".into()],
        stride_indices(s.n_steps, stride)
            .map(|k| vec![gate.pulse.bx(k), gate.pulse.by(k)])
            .collect(),
    )
    .with_meta("b0", s.b0)
    .with_meta("tau", s.tau);
    write_pulse_file(&pulse, &ctx.out_dir, "pulse", ctx.format)?;

    let observable = PulseFile::new(
        "bloch-trajectory",
        &egrid,
        vec!["theta".into(), "phi".into(), "beta".into()],
        stride_indices(s.n_steps, stride)
            .map(|k| {
                vec![gate.trajectory.theta(k), gate.trajectory.phi(k), gate.beta.values()[k]]
            })
            .collect(),
    );
    write_pulse_file(&observable, &ctx.out_dir, "observable", ctx.format)?;

    let wavefunction = PulseFile::new(
        "spin-wavefunction",
        &egrid,
        complex_site_channels("psi", 2),
        stride_indices(s.n_steps, stride)
            .map(|k| {
                let state = state_on_sphere(
                    gate.trajectory.theta(k),
                    gate.trajectory.phi(k),
                    gate.beta.values()[k],
                );
                state.amplitudes().iter().flat_map(|a| [a.re, a.im]).collect()
            })
            .collect(),
    );
    write_pulse_file(&wavefunction, &ctx.out_dir, "wavefunction", ctx.format)?;
    out.write(&ctx.out_dir)?;

    if ctx.emit_plot_data {
        let bloch_rows: Vec<Vec<f64>> = stride_indices(s.n_steps, stride)
            .map(|k| vec![grid.time(k), gate.trajectory.theta(k), gate.trajectory.phi(k)])
            .collect();
        write_plot_csv(&ctx.out_dir, "fig_bloch.csv", "t,theta,phi", &bloch_rows)?;
        let field_rows: Vec<Vec<f64>> = stride_indices(s.n_steps, stride)
            .map(|k| vec![grid.time(k), gate.pulse.bx(k), gate.pulse.by(k)])
            .collect();
        write_plot_csv(&ctx.out_dir, "fig_field_path.csv", "t,Bx,By", &field_rows)?;
    }
    Ok(out)
}

/// Oscillator scaling: the closed-form scaled solution, its effective
/// oscillator parameters, and a Crank-Nicolson certification.
pub fn run_oscillator(cfg: &ScenarioConfig, ctx: &RunContext) -> CliResult<ReportFile> {
    let o = &cfg.oscillator;
    let thr = &cfg.thresholds;
    let space =
        SpatialGrid1D::new(o.x_min, o.x_max, o.n_points).map_err(CliError::from)?;
    let grid = TimeGrid::new(0.0, o.tau, o.n_steps).map_err(CliError::from)?;
    let prog = smooth_scaling_program(
        o.mass,
        harmonic_base(o.mass, o.omega0),
        o.alpha_amp,
        o.shift_amp,
        o.tau,
    )?;
    let (potential, psi_exact) = scaling_solution(&prog, &space, &grid)?;
    let (density, _) = scaling_observables(&prog, &space, &grid)?;
    let recovery = oscillator_parameters(&prog, o.omega0, &grid)?;
    let newton_worst =
        recovery.newton_residual.values().iter().fold(0.0f64, |acc, r| acc.max(r.abs()));

    let psi0 = GridWavefunction1D::from_fn(space, o.mass, |x| {
        Complex64::new((prog.base.density)(x).max(0.0).sqrt(), 0.0)
    })
    .map_err(CliError::from)?;
    let last = grid.len() - 1;
    let target_amps = psi_exact.row(last);
    let norm = trapezoid_sum(
        &target_amps.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(),
        space.dx(),
    )
    .sqrt();
    let target = GridWavefunction1D::new(
        space,
        o.mass,
        target_amps.iter().map(|a| a / norm).collect(),
    )
    .map_err(CliError::from)?;

    let report = verify_grid(&GridVerification {
        potential: &potential,
        psi0: &psi0,
        substeps: 1,
        keep_stride: o.export_stride,
        target_density: Some(&density),
        target_final: Some(&target),
    })?;
    let l2 = report.final_l2_error.unwrap_or(f64::NAN);

    let mut out = ReportFile::new("oscillator-scaling");
    out.parameter("omega0", o.omega0)
        .parameter("mass", o.mass)
        .parameter("tau", o.tau)
        .parameter("n_steps", o.n_steps as f64)
        .parameter("n_points", o.n_points as f64)
        .parameter("alpha_amp", o.alpha_amp)
        .parameter("shift_amp", o.shift_amp);
    out.metric("max_newton_residual", newton_worst)
        .metric("final_l2_error", l2)
        .metric("final_fidelity", report.final_fidelity.unwrap_or(f64::NAN))
        .metric("max_density_error", report.max_density_error)
        .metric("norm_drift", report.norm_drift)
        .metric("norm_drift_per_unit_time", report.norm_drift / o.tau);
    out.threshold("max_newton_residual", thr.max_newton_residual)
        .threshold("max_l2_error", thr.max_l2_error)
        .threshold("max_norm_drift_per_unit_time", thr.max_norm_drift_per_unit_time);

    out.gate(
        newton_worst <= thr.max_newton_residual,
        format!("Newton residual {newton_worst:.3e}"),
    );
    out.gate(l2 <= thr.max_l2_error, format!("final L2 error {l2:.3e}"));
    out.gate(
        report.norm_drift / o.tau <= thr.max_norm_drift_per_unit_time,
        format!("norm drift {:.3e} per unit time", report.norm_drift / o.tau),
    );
    out.finalize();

    // Artifacts (strided in time; sample rows span the spatial grid).
    let stride = o.export_stride;
    let egrid = strided_grid(&grid, stride)?;
    let pulse = PulseFile::new(
        "grid-potential",
        &egrid,
        vec!["V".into()],
        stride_indices(o.n_steps, stride).map(|k| potential.row(k).to_vec()).collect(),
    )
    .with_space(&space, o.mass)
    .with_meta("omega0", o.omega0)
    .with_meta("tau", o.tau)
    .with_meta("alpha_amp", o.alpha_amp)
    .with_meta("shift_amp", o.shift_amp);
    write_pulse_file(&pulse, &ctx.out_dir, "pulse", ctx.format)?;

    let observable = PulseFile::new(
        "grid-density",
        &egrid,
        vec!["n".into()],
        stride_indices(o.n_steps, stride).map(|k| density.row(k).to_vec()).collect(),
    )
    .with_space(&space, o.mass);
    write_pulse_file(&observable, &ctx.out_dir, "observable", ctx.format)?;

    let wavefunction = PulseFile::new(
        "grid-wavefunction",
        &egrid,
        vec!["psi_re".into(), "psi_im".into()],
        stride_indices(o.n_steps, stride)
            .map(|k| {
                let row = psi_exact.row(k);
                let mut flat: Vec<f64> = row.iter().map(|a| a.re).collect();
                flat.extend(row.iter().map(|a| a.im));
                flat
            })
            .collect(),
    )
    .with_space(&space, o.mass);
    write_pulse_file(&wavefunction, &ctx.out_dir, "wavefunction", ctx.format)?;

    let params = PulseFile::new(
        "oscillator-parameters",
        &egrid,
        vec!["omega_sq".into(), "force".into(), "newton_residual".into()],
        stride_indices(o.n_steps, stride)
            .map(|k| {
                vec![
                    recovery.params.omega_sq.values()[k],
                    recovery.params.force.values()[k],
                    recovery.newton_residual.values()[k],
                ]
            })
            .collect(),
    );
    write_pulse_file(&params, &ctx.out_dir, "oscillator_parameters", ctx.format)?;
    out.write(&ctx.out_dir)?;
    Ok(out)
}

/// Lattice round trip: propagate random smooth hoppings, extract the link
/// observable, reconstruct the drive and compare, over a batch of seeds.
pub fn run_roundtrip(cfg: &ScenarioConfig, ctx: &RunContext) -> CliResult<ReportFile> {
    let r = &cfg.roundtrip;
    let thr = &cfg.thresholds;
    let grid = TimeGrid::new(0.0, r.tau, r.n_steps).map_err(CliError::from)?;
    let psi0 = LatticeWavefunction::from_densities(&vec![1.0 / r.sites as f64; r.sites])
        .map_err(CliError::from)?;

    let mut out = ReportFile::new("lattice-roundtrip");
    out.parameter("sites", r.sites as f64)
        .parameter("tau", r.tau)
        .parameter("n_steps", r.n_steps as f64)
        .parameter("seeds", r.seeds as f64)
        .parameter("amplitude", r.amplitude);
    out.threshold("max_roundtrip_error", thr.max_roundtrip_error);

    let mut worst_rel = 0.0f64;
    let mut first: Option<(HoppingSignal, ComplexCurrent, LatticeTrajectory)> = None;
    for seed in 0..r.seeds as u64 {
        let hop = random_smooth_hopping(r.sites, grid, seed, r.amplitude)?;
        let traj =
            propagate_lattice(&LatticeHamiltonianSignal::Hopping(hop.clone()), &psi0, r.substeps)?;
        let steps: Vec<DMatrix<Complex64>> = (0..grid.len())
            .map(|k| observable_from_state(hop.step(k), traj.state(k)))
            .collect::<Result<_, _>>()?;
        let q = ComplexCurrent::new(grid, steps)?;
        let (recovered, _) = reconstruct_hopping(&q, &psi0)?;
        let mut scale = 0.0f64;
        let mut err = 0.0f64;
        for k in 0..grid.len() {
            for i in 0..r.sites {
                for j in 0..r.sites {
                    scale = scale.max(hop.step(k)[(i, j)].norm());
                    err = err.max((recovered.step(k)[(i, j)] - hop.step(k)[(i, j)]).norm());
                }
            }
        }
        let rel = err / scale;
        out.metric(&format!("roundtrip_error_seed_{seed}"), rel);
        worst_rel = worst_rel.max(rel);
        if first.is_none() {
            first = Some((hop, q, traj));
        }
    }
    out.metric("max_roundtrip_error", worst_rel);
    out.gate(
        worst_rel <= thr.max_roundtrip_error,
        format!("round-trip drive error {worst_rel:.3e} exceeds {:.1e}", thr.max_roundtrip_error),
    );
    out.finalize();

    // Seed-0 artifacts.
    let (hop, q, traj) = first.expect("at least one seed");
    let stride = r.export_stride;
    let egrid = strided_grid(&grid, stride)?;
    let mut link_channels = Vec::new();
    for i in 0..r.sites {
        for j in (i + 1)..r.sites {
            link_channels.push(format!("T_{}_{}_re", i + 1, j + 1));
            link_channels.push(format!("T_{}_{}_im", i + 1, j + 1));
        }
    }
    let link_rows = |m: &dyn Fn(usize) -> DMatrix<Complex64>| -> Vec<Vec<f64>> {
        stride_indices(r.n_steps, stride)
            .map(|k| {
                let step = m(k);
                let mut row = Vec::new();
                for i in 0..r.sites {
                    for j in (i + 1)..r.sites {
                        row.push(step[(i, j)].re);
                        row.push(step[(i, j)].im);
                    }
                }
                row
            })
            .collect()
    };
    let pulse = PulseFile::new(
        "lattice-hopping",
        &egrid,
        link_channels.clone(),
        link_rows(&|k| hop.step(k).clone()),
    )
    .with_meta("sites", r.sites as f64)
    .with_meta("seed", 0.0);
    write_pulse_file(&pulse, &ctx.out_dir, "pulse", ctx.format)?;

    let observable = PulseFile::new(
        "lattice-observable",
        &egrid,
        link_channels.iter().map(|c| c.replacen("T_", "Q_", 1)).collect(),
        link_rows(&|k| q.step(k).clone()),
    )
    .with_meta("sites", r.sites as f64);
    write_pulse_file(&observable, &ctx.out_dir, "observable", ctx.format)?;

    let density = PulseFile::new(
        "lattice-density",
        &egrid,
        site_channels("n", r.sites),
        stride_indices(r.n_steps, stride).map(|k| traj.densities(k)).collect(),
    );
    write_pulse_file(&density, &ctx.out_dir, "observable_density", ctx.format)?;

    let wavefunction = PulseFile::new(
        "lattice-wavefunction",
        &egrid,
        complex_site_channels("psi", r.sites),
        lattice_states_rows(&traj, stride),
    );
    write_pulse_file(&wavefunction, &ctx.out_dir, "wavefunction", ctx.format)?;
    out.write(&ctx.out_dir)?;
    Ok(out)
}

/// Options for re-verifying exported files.
pub struct VerifyOptions {
    pub pulse: PathBuf,
    pub target: PathBuf,
    pub psi0: Option<PathBuf>,
    pub substeps: usize,
}

fn lattice_psi0_from_file(path: &Path) -> CliResult<LatticeWavefunction> {
    let file = PulseFile::load(path)?;
    if !file.kind.ends_with("wavefunction") || file.space.is_some() {
        return Err(CliError::Config(format!(
            "--psi0 expects a lattice wavefunction file, got kind '{}'",
            file.kind
        )));
    }
    let row = &file.samples[0];
    let amps: Vec<Complex64> =
        row.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    LatticeWavefunction::new(amps).map_err(|e| CliError::Config(format!("--psi0 state: {e}")))
}

fn grid_psi0_from_file(path: &Path) -> CliResult<GridWavefunction1D> {
    let file = PulseFile::load(path)?;
    let space = file
        .space
        .as_ref()
        .ok_or_else(|| CliError::Config("--psi0 grid file lacks a spatial grid".into()))?
        .to_space()?;
    let mass = file.mass.ok_or_else(|| CliError::Config("--psi0 grid file lacks a mass".into()))?;
    let n = space.n_points();
    let row = &file.samples[0];
    if row.len() != 2 * n {
        return Err(CliError::Config("--psi0 grid row must hold re and im blocks".into()));
    }
    let amps: Vec<Complex64> =
        (0..n).map(|j| Complex64::new(row[j], row[n + j])).collect();
    GridWavefunction1D::new(space, mass, amps)
        .map_err(|e| CliError::Config(format!("--psi0 state: {e}")))
}

/// Re-verify an exported pulse against an exported observable trajectory.
/// The initial state defaults to the ground state of the drive at the
/// initial instant; `--psi0` overrides it with a wavefunction file.
pub fn run_verify(
    opts: &VerifyOptions,
    thresholds: &Thresholds,
    ctx: &RunContext,
) -> CliResult<ReportFile> {
    let pulse = PulseFile::load(&opts.pulse)?;
    let target = PulseFile::load(&opts.target)?;
    if pulse.grid != target.grid {
        return Err(CliError::Config(format!(
            "pulse and target live on different time grids: {:?} vs {:?}",
            pulse.grid, target.grid
        )));
    }
    let grid = pulse.grid.to_grid()?;
    let span = grid.t_end() - grid.t_start();

    let mut out = ReportFile::new("verify");
    out.threshold("max_density_error", thresholds.max_density_error)
        .threshold("max_norm_drift_per_unit_time", thresholds.max_norm_drift_per_unit_time);

    match (pulse.kind.as_str(), target.kind.as_str()) {
        ("chain-onsite", "lattice-density") | ("lattice-hopping", "lattice-density") => {
            let signal = if pulse.kind == "chain-onsite" {
                let t0 = *pulse
                    .meta
                    .get("t0")
                    .ok_or_else(|| CliError::Config("chain pulse lacks meta.t0".into()))?;
                LatticeHamiltonianSignal::chain(grid, t0, pulse.samples.clone())
                    .map_err(CliError::from)?
            } else {
                let sites = *pulse
                    .meta
                    .get("sites")
                    .ok_or_else(|| CliError::Config("hopping pulse lacks meta.sites".into()))?
                    as usize;
                let steps: Vec<DMatrix<Complex64>> = pulse
                    .samples
                    .iter()
                    .map(|row| {
                        let mut m = DMatrix::zeros(sites, sites);
                        let mut idx = 0;
                        for i in 0..sites {
                            for j in (i + 1)..sites {
                                let v = Complex64::new(row[idx], row[idx + 1]);
                                m[(i, j)] = v;
                                m[(j, i)] = v.conj();
                                idx += 2;
                            }
                        }
                        m
                    })
                    .collect();
                LatticeHamiltonianSignal::Hopping(
                    HoppingSignal::new(grid, steps).map_err(CliError::from)?,
                )
            };
            let psi0 = match &opts.psi0 {
                Some(p) => lattice_psi0_from_file(p)?,
                None => ground_state_lattice(&signal.matrix_at_node(0))?.state,
            };
            // Ground-state checkpoints at the stage ends, when recorded.
            let mut checkpoints = Vec::new();
            for key in ["t1", "t2"] {
                if let Some(&t) = pulse.meta.get(key) {
                    checkpoints.push(grid.nearest_index(t));
                }
            }
            let report = verify_lattice(&LatticeVerification {
                signal: &signal,
                psi0: &psi0,
                substeps: opts.substeps,
                target_densities: Some(&target.samples),
                target_final: None,
                ground_checkpoints: &checkpoints,
            })?;
            out.metric("max_density_error", report.max_density_error)
                .metric("norm_drift_per_unit_time", report.norm_drift / span)
                .metric("schroedinger_residual", report.residual_norm);
            out.gate(
                report.max_density_error <= thresholds.max_density_error,
                format!("max density error {:.3e}", report.max_density_error),
            );
            for cp in &report.checkpoint_overlaps {
                out.metric(&format!("ground_state_overlap_t{:.6}", cp.time), cp.overlap_sq);
                out.gate(
                    cp.overlap_sq >= thresholds.min_checkpoint_overlap,
                    format!("ground-state overlap {:.12} at t = {}", cp.overlap_sq, cp.time),
                );
            }
            out.gate(
                report.norm_drift / span <= thresholds.max_norm_drift_per_unit_time,
                format!("norm drift {:.3e} per unit time", report.norm_drift / span),
            );
        }
        ("spin-pulse", "bloch-trajectory") => {
            let bx: Vec<f64> = pulse.samples.iter().map(|r| r[0]).collect();
            let by: Vec<f64> = pulse.samples.iter().map(|r| r[1]).collect();
            let field =
                pulseforge::spin::FieldPulse::new(grid, bx, by).map_err(CliError::from)?;
            let signal = LatticeHamiltonianSignal::Hopping(field.to_hopping_signal()?);
            let psi0 = match &opts.psi0 {
                Some(p) => lattice_psi0_from_file(p)?,
                None => ground_state_lattice(&signal.matrix_at_node(0))?.state,
            };
            let densities: Vec<Vec<f64>> = target
                .samples
                .iter()
                .map(|row| {
                    let half = row[0] / 2.0;
                    vec![half.cos().powi(2), half.sin().powi(2)]
                })
                .collect();
            let last = target.samples.last().expect("validated file");
            let final_state = state_on_sphere(last[0], last[1], last[2]);
            let report = verify_lattice(&LatticeVerification {
                signal: &signal,
                psi0: &psi0,
                substeps: opts.substeps,
                target_densities: Some(&densities),
                target_final: Some(&final_state),
                ground_checkpoints: &[],
            })?;
            let fidelity = report.final_fidelity.unwrap_or(0.0);
            let phase = report.final_phase_error.unwrap_or(f64::NAN);
            out.metric("max_density_error", report.max_density_error)
                .metric("fidelity", fidelity)
                .metric("phase_error", phase)
                .metric("norm_drift_per_unit_time", report.norm_drift / span);
            out.threshold("min_fidelity", thresholds.min_fidelity)
                .threshold("max_phase_error", thresholds.max_phase_error);
            out.gate(
                report.max_density_error <= thresholds.max_density_error,
                format!("max density error {:.3e}", report.max_density_error),
            );
            out.gate(
                fidelity >= thresholds.min_fidelity,
                format!("fidelity {fidelity:.12}"),
            );
            out.gate(
                phase.abs() <= thresholds.max_phase_error,
                format!("phase error {phase:.3e} rad"),
            );
            out.gate(
                report.norm_drift / span <= thresholds.max_norm_drift_per_unit_time,
                format!("norm drift {:.3e} per unit time", report.norm_drift / span),
            );
        }
        ("grid-potential", "grid-density") => {
            let space = pulse
                .space
                .as_ref()
                .ok_or_else(|| CliError::Config("grid pulse lacks a spatial grid".into()))?
                .to_space()?;
            let mass =
                pulse.mass.ok_or_else(|| CliError::Config("grid pulse lacks a mass".into()))?;
            if target.space != pulse.space {
                return Err(CliError::Config("pulse and target spatial grids differ".into()));
            }
            let potential = SpaceTimeField1D::new(space, grid, mass, pulse.samples.clone())
                .map_err(CliError::from)?;
            let density = SpaceTimeField1D::new(space, grid, mass, target.samples.clone())
                .map_err(CliError::from)?;
            let psi0 = match &opts.psi0 {
                Some(p) => grid_psi0_from_file(p)?,
                None => ground_state_grid_1d(&space, mass, potential.row(0))?.1,
            };
            let report = verify_grid(&GridVerification {
                potential: &potential,
                psi0: &psi0,
                substeps: opts.substeps,
                keep_stride: 1,
                target_density: Some(&density),
                target_final: None,
            })?;
            out.metric("max_density_error", report.max_density_error)
                .metric("norm_drift_per_unit_time", report.norm_drift / span);
            out.gate(
                report.max_density_error <= thresholds.max_density_error,
                format!("max density error {:.3e}", report.max_density_error),
            );
            out.gate(
                report.norm_drift / span <= thresholds.max_norm_drift_per_unit_time,
                format!("norm drift {:.3e} per unit time", report.norm_drift / span),
            );
        }
        (p, t) => {
            return Err(CliError::Config(format!(
                "unsupported pulse/target kind combination: '{p}' vs '{t}'"
            )));
        }
    }

    out.finalize();
    out.write(&ctx.out_dir)?;
    Ok(out)
}

//! pulseforge: inverse-engineer quantum drives from prescribed observable
//! trajectories and certify them by forward propagation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pulseforge_cli::config::{ExportFormat, ScenarioConfig, Thresholds};
use pulseforge_cli::scenario::{
    run_chain, run_oscillator, run_roundtrip, run_spin, run_verify, RunContext, VerifyOptions,
};
use pulseforge_cli::{exit_codes, CliError, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Json => ExportFormat::Json,
            FormatArg::Both => ExportFormat::Both,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pulseforge",
    version,
    about = "Reconstruct analytic quantum drives from prescribed observable trajectories \
             and certify them with an independent forward propagator."
)]
struct Cli {
    /// Configuration file (JSON). Flags override config fields, which
    /// override the built-in scenario defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides config and PULSEFORGE_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Artifact format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Also write per-figure CSV files (densities, potentials, Bloch angles,
    /// field path).
    #[arg(long, global = true)]
    emit_plot_data: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct ThresholdArgs {
    /// Largest allowed |n_model - n_target| over all compared nodes.
    #[arg(long)]
    max_density_error: Option<f64>,
    /// Smallest allowed final-state fidelity.
    #[arg(long)]
    min_fidelity: Option<f64>,
    /// Largest allowed deviation of the global phase from the prediction (rad).
    #[arg(long)]
    max_phase_error: Option<f64>,
    /// Smallest allowed instantaneous-ground-state overlap at checkpoints.
    #[arg(long)]
    min_checkpoint_overlap: Option<f64>,
    /// Largest allowed norm drift per unit time.
    #[arg(long)]
    max_norm_drift: Option<f64>,
    /// Largest allowed relative drive error in the round trip.
    #[arg(long)]
    max_roundtrip_error: Option<f64>,
    /// Largest allowed L2 distance from the analytic final wavefunction.
    #[arg(long)]
    max_l2_error: Option<f64>,
}

impl ThresholdArgs {
    fn apply(&self, t: &mut Thresholds) {
        if let Some(v) = self.max_density_error {
            t.max_density_error = v;
        }
        if let Some(v) = self.min_fidelity {
            t.min_fidelity = v;
        }
        if let Some(v) = self.max_phase_error {
            t.max_phase_error = v;
        }
        if let Some(v) = self.min_checkpoint_overlap {
            t.min_checkpoint_overlap = v;
        }
        if let Some(v) = self.max_norm_drift {
            t.max_norm_drift_per_unit_time = v;
        }
        if let Some(v) = self.max_roundtrip_error {
            t.max_roundtrip_error = v;
        }
        if let Some(v) = self.max_l2_error {
            t.max_l2_error = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reshape the chain ground state to uniform and then into a Gaussian,
    /// reconstructing the on-site potential that does it.
    ChainReshape {
        #[arg(long)]
        sites: Option<usize>,
        /// Fixed hopping amplitude.
        #[arg(long)]
        t0: Option<f64>,
        /// End of the flattening stage.
        #[arg(long)]
        t1: Option<f64>,
        /// End of the squeezing stage (= end of the grid).
        #[arg(long)]
        t2: Option<f64>,
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long)]
        export_stride: Option<usize>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Build the cyclic in-plane pulse that flips the spin between the
    /// x-basis states, and certify fidelity and global phase.
    SpinNot {
        #[arg(long)]
        b0: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long)]
        export_stride: Option<usize>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Drive a harmonic ground state through a scaling-and-shift program and
    /// recover the equivalent driven-oscillator parameters.
    OscillatorScaling {
        #[arg(long)]
        omega0: Option<f64>,
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        /// Amplitude of the dilation stage: alpha goes to 1 + this.
        #[arg(long)]
        alpha_amp: Option<f64>,
        /// Final displacement of the density center.
        #[arg(long)]
        shift_amp: Option<f64>,
        #[arg(long)]
        export_stride: Option<usize>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Propagate random smooth hoppings, extract the link observable,
    /// reconstruct the drive and compare, over a batch of seeds.
    LatticeRoundtrip {
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        n_steps: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        substeps: Option<usize>,
        #[arg(long)]
        export_stride: Option<usize>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Re-verify an exported pulse file against an exported observable file.
    Verify {
        /// Pulse file (JSON, schema pulse-v1).
        pulse: PathBuf,
        /// Target observable file (JSON, schema pulse-v1).
        target: PathBuf,
        /// Initial state (wavefunction file); defaults to the ground state
        /// of the drive at the initial instant.
        #[arg(long)]
        psi0: Option<PathBuf>,
        #[arg(long)]
        substeps: Option<usize>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
}

fn load_config(path: Option<&PathBuf>) -> CliResult<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(cli.config.as_ref())?;
    let ctx = RunContext {
        out_dir: cfg.resolve_out_dir(cli.out.as_deref()),
        format: cfg.resolve_format(cli.format.map(Into::into)),
        emit_plot_data: cfg.resolve_plot_data(cli.emit_plot_data),
    };

    let report = match cli.command {
        Command::ChainReshape { sites, t0, t1, t2, n_steps, substeps, export_stride, thresholds } => {
            let c = &mut cfg.chain;
            if let Some(v) = sites {
                c.sites = v;
            }
            if let Some(v) = t0 {
                c.t0 = v;
            }
            if let Some(v) = t1 {
                c.t1 = v;
            }
            if let Some(v) = t2 {
                c.t2 = v;
            }
            if let Some(v) = n_steps {
                c.n_steps = v;
            }
            if let Some(v) = substeps {
                c.substeps = v;
            }
            if let Some(v) = export_stride {
                c.export_stride = v;
            }
            thresholds.apply(&mut cfg.thresholds);
            cfg.validate()?;
            run_chain(&cfg, &ctx)?
        }
        Command::SpinNot { b0, tau, n_steps, substeps, export_stride, thresholds } => {
            let s = &mut cfg.spin;
            if let Some(v) = b0 {
                s.b0 = v;
            }
            if let Some(v) = tau {
                s.tau = v;
            }
            if let Some(v) = n_steps {
                s.n_steps = v;
            }
            if let Some(v) = substeps {
                s.substeps = v;
            }
            if let Some(v) = export_stride {
                s.export_stride = v;
            }
            thresholds.apply(&mut cfg.thresholds);
            cfg.validate()?;
            run_spin(&cfg, &ctx)?
        }
        Command::OscillatorScaling {
            omega0,
            mass,
            tau,
            n_steps,
            n_points,
            x_min,
            x_max,
            alpha_amp,
            shift_amp,
            export_stride,
            thresholds,
        } => {
            let o = &mut cfg.oscillator;
            if let Some(v) = omega0 {
                o.omega0 = v;
            }
            if let Some(v) = mass {
                o.mass = v;
            }
            if let Some(v) = tau {
                o.tau = v;
            }
            if let Some(v) = n_steps {
                o.n_steps = v;
            }
            if let Some(v) = n_points {
                o.n_points = v;
            }
            if let Some(v) = x_min {
                o.x_min = v;
            }
            if let Some(v) = x_max {
                o.x_max = v;
            }
            if let Some(v) = alpha_amp {
                o.alpha_amp = v;
            }
            if let Some(v) = shift_amp {
                o.shift_amp = v;
            }
            if let Some(v) = export_stride {
                o.export_stride = v;
            }
            thresholds.apply(&mut cfg.thresholds);
            cfg.validate()?;
            run_oscillator(&cfg, &ctx)?
        }
        Command::LatticeRoundtrip {
            sites,
            tau,
            n_steps,
            seeds,
            amplitude,
            substeps,
            export_stride,
            thresholds,
        } => {
            let r = &mut cfg.roundtrip;
            if let Some(v) = sites {
                r.sites = v;
            }
            if let Some(v) = tau {
                r.tau = v;
            }
            if let Some(v) = n_steps {
                r.n_steps = v;
            }
            if let Some(v) = seeds {
                r.seeds = v;
            }
            if let Some(v) = amplitude {
                r.amplitude = v;
            }
            if let Some(v) = substeps {
                r.substeps = v;
            }
            if let Some(v) = export_stride {
                r.export_stride = v;
            }
            thresholds.apply(&mut cfg.thresholds);
            cfg.validate()?;
            run_roundtrip(&cfg, &ctx)?
        }
        Command::Verify { pulse, target, psi0, substeps, thresholds } => {
            thresholds.apply(&mut cfg.thresholds);
            cfg.validate()?;
            run_verify(
                &VerifyOptions { pulse, target, psi0, substeps: substeps.unwrap_or(2) },
                &cfg.thresholds,
                &ctx,
            )?
        }
    };

    println!(
        "{}: {} (artifacts in {})",
        report.scenario,
        if report.pass { "PASS" } else { "FAIL" },
        ctx.out_dir.display()
    );
    for (key, value) in &report.metrics {
        println!("  {key} = {value:.6e}");
    }
    if !report.pass {
        return Err(CliError::Threshold(report.failures.clone()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit_codes::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

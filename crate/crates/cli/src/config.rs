//! Scenario configuration: a single JSON document with per-scenario blocks;
//! command-line flags override config fields, which override the built-in
//! defaults (the published scenario values).

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
    Both,
}

impl ExportFormat {
    pub fn csv(self) -> bool {
        matches!(self, ExportFormat::Csv | ExportFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, ExportFormat::Json | ExportFormat::Both)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub sites: usize,
    pub t0: f64,
    pub t1: f64,
    pub t2: f64,
    pub n_steps: usize,
    pub substeps: usize,
    pub export_stride: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { sites: 11, t0: 1.0, t1: 3.0, t2: 12.0, n_steps: 12_000, substeps: 2, export_stride: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinConfig {
    pub b0: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub substeps: usize,
    pub export_stride: usize,
}

impl Default for SpinConfig {
    fn default() -> Self {
        Self { b0: 1.0, tau: 12.0, n_steps: 100_000, substeps: 2, export_stride: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatorConfig {
    pub omega0: f64,
    pub mass: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub alpha_amp: f64,
    pub shift_amp: f64,
    pub export_stride: usize,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            omega0: 1.0,
            mass: 1.0,
            tau: 5.0,
            n_steps: 5000,
            n_points: 512,
            x_min: -9.0,
            x_max: 11.0,
            alpha_amp: 0.5,
            shift_amp: 1.0,
            export_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundtripConfig {
    pub sites: usize,
    pub tau: f64,
    pub n_steps: usize,
    pub seeds: usize,
    pub amplitude: f64,
    pub substeps: usize,
    pub export_stride: usize,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        Self { sites: 4, tau: 1.0, n_steps: 10_000, seeds: 20, amplitude: 0.3, substeps: 2, export_stride: 10 }
    }
}

/// Pass/fail thresholds applied by the scenario drivers and `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub max_density_error: f64,
    pub min_fidelity: f64,
    /// Allowed deviation of the propagated global phase from the prediction,
    /// in radians.
    pub max_phase_error: f64,
    pub min_checkpoint_overlap: f64,
    pub max_norm_drift_per_unit_time: f64,
    pub max_roundtrip_error: f64,
    pub max_l2_error: f64,
    pub max_newton_residual: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            max_density_error: 1e-5,
            min_fidelity: 1.0 - 1e-6,
            max_phase_error: 1e-4,
            min_checkpoint_overlap: 1.0 - 1e-6,
            max_norm_drift_per_unit_time: 1e-10,
            max_roundtrip_error: 1e-6,
            max_l2_error: 1e-3,
            max_newton_residual: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub out_dir: Option<PathBuf>,
    pub format: Option<ExportFormat>,
    pub emit_plot_data: Option<bool>,
    pub chain: ChainConfig,
    pub spin: SpinConfig,
    pub oscillator: OscillatorConfig,
    pub roundtrip: RoundtripConfig,
    pub thresholds: Thresholds,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    /// Range checks shared by every entry point; violations exit with the
    /// configuration error code.
    pub fn validate(&self) -> CliResult<()> {
        let c = &self.chain;
        if c.sites < 2 {
            return Err(CliError::Config(format!("chain.sites = {} (need >= 2)", c.sites)));
        }
        if !(c.t0 > 0.0) {
            return Err(CliError::Config(format!("chain.t0 = {} (need > 0)", c.t0)));
        }
        if !(c.t1 > 0.0 && c.t2 > c.t1) {
            return Err(CliError::Config(format!(
                "chain stage times must satisfy 0 < t1 < t2, got t1 = {}, t2 = {}",
                c.t1, c.t2
            )));
        }
        if c.n_steps < 2 || c.substeps == 0 || c.export_stride == 0 {
            return Err(CliError::Config("chain steps/substeps/stride must be positive".into()));
        }
        let s = &self.spin;
        if !(s.b0 > 0.0 && s.tau > 0.0) {
            return Err(CliError::Config(format!("spin.b0 = {}, spin.tau = {} (need > 0)", s.b0, s.tau)));
        }
        if s.n_steps < 2 || s.substeps == 0 || s.export_stride == 0 {
            return Err(CliError::Config("spin steps/substeps/stride must be positive".into()));
        }
        let o = &self.oscillator;
        if !(o.omega0 > 0.0 && o.mass > 0.0 && o.tau > 0.0) {
            return Err(CliError::Config("oscillator omega0/mass/tau must be positive".into()));
        }
        if o.x_max <= o.x_min || o.n_points < 3 || o.n_steps < 2 {
            return Err(CliError::Config("oscillator grid is degenerate".into()));
        }
        if o.alpha_amp <= -1.0 {
            return Err(CliError::Config("oscillator.alpha_amp must keep alpha positive".into()));
        }
        if o.export_stride == 0 || o.n_steps % o.export_stride != 0 {
            return Err(CliError::Config(
                "oscillator.export_stride must divide n_steps".into(),
            ));
        }
        let r = &self.roundtrip;
        if r.sites < 2 || r.seeds == 0 || !(r.tau > 0.0) || !(r.amplitude > 0.0) {
            return Err(CliError::Config("roundtrip block is degenerate".into()));
        }
        if r.n_steps < 2 || r.substeps == 0 || r.export_stride == 0 {
            return Err(CliError::Config("roundtrip steps/substeps/stride must be positive".into()));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("max_density_error", t.max_density_error),
            ("max_phase_error", t.max_phase_error),
            ("max_norm_drift_per_unit_time", t.max_norm_drift_per_unit_time),
            ("max_roundtrip_error", t.max_roundtrip_error),
            ("max_l2_error", t.max_l2_error),
            ("max_newton_residual", t.max_newton_residual),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("thresholds.{name} = {v} (need > 0)")));
            }
        }
        if !(0.0..=1.0).contains(&t.min_fidelity) || !(0.0..=1.0).contains(&t.min_checkpoint_overlap) {
            return Err(CliError::Config("fidelity thresholds must sit in [0, 1]".into()));
        }
        Ok(())
    }

    /// Resolve the output directory: flag > config > PULSEFORGE_OUT > default.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.out_dir {
            return p.clone();
        }
        if let Ok(p) = std::env::var("PULSEFORGE_OUT") {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        PathBuf::from("pulseforge_out")
    }

    pub fn resolve_format(&self, flag: Option<ExportFormat>) -> ExportFormat {
        flag.or(self.format).unwrap_or(ExportFormat::Both)
    }

    pub fn resolve_plot_data(&self, flag: bool) -> bool {
        flag || self.emit_plot_data.unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_published_scenario_values() {
        let c = ScenarioConfig::default();
        assert_eq!(c.chain.sites, 11);
        assert_eq!(c.chain.t0, 1.0);
        assert_eq!(c.chain.t1, 3.0);
        assert_eq!(c.chain.t2, 12.0);
        assert_eq!(c.spin.b0, 1.0);
        assert_eq!(c.spin.tau, 12.0);
        c.validate().unwrap();
    }

    #[test]
    fn ordering_violation_is_a_config_error() {
        let mut c = ScenarioConfig::default();
        c.chain.t1 = 0.0;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<ScenarioConfig, _> = serde_json::from_str(r#"{"chian": {}}"#);
        assert!(r.is_err());
    }
}

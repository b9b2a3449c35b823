//! Bit-exact export and import of pulses, observable trajectories,
//! wavefunctions and verification reports.
//!
//! JSON data files follow the committed `schemas/pulse-v1.schema.json`; all
//! floats are rendered with 17 significant digits so a re-imported file
//! reproduces the in-memory samples bit for bit, and files for identical
//! inputs are byte-identical (no timestamps in data files).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{CliError, CliResult};
use pulseforge::grid::TimeGrid;
use pulseforge::state::SpatialGrid1D;

pub const SCHEMA: &str = "pulse-v1";

/// 17-significant-digit rendering: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn from_grid(grid: &TimeGrid) -> Self {
        Self { t_start: grid.t_start(), t_end: grid.t_end(), n_steps: grid.n_steps() }
    }

    pub fn to_grid(&self) -> CliResult<TimeGrid> {
        TimeGrid::new(self.t_start, self.t_end, self.n_steps)
            .map_err(|e| CliError::Config(format!("file time grid: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl SpaceSpec {
    pub fn from_space(space: &SpatialGrid1D) -> Self {
        Self { x_min: space.x_min(), x_max: space.x_max(), n_points: space.n_points() }
    }

    pub fn to_space(&self) -> CliResult<SpatialGrid1D> {
        SpatialGrid1D::new(self.x_min, self.x_max, self.n_points)
            .map_err(|e| CliError::Config(format!("file spatial grid: {e}")))
    }
}

/// One exported data set: a drive, an observable trajectory or a
/// wavefunction, on a uniform time grid (optionally with a spatial grid for
/// continuum kinds, where each sample row spans the spatial nodes).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PulseFile {
    pub schema: String,
    pub kind: String,
    pub grid: GridSpec,
    #[serde(default)]
    pub space: Option<SpaceSpec>,
    #[serde(default)]
    pub mass: Option<f64>,
    /// Scenario parameters needed to re-verify from the file alone.
    #[serde(default)]
    pub meta: BTreeMap<String, f64>,
    pub channels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

impl PulseFile {
    pub fn new(kind: &str, grid: &TimeGrid, channels: Vec<String>, samples: Vec<Vec<f64>>) -> Self {
        Self {
            schema: SCHEMA.into(),
            kind: kind.into(),
            grid: GridSpec::from_grid(grid),
            space: None,
            mass: None,
            meta: BTreeMap::new(),
            channels,
            samples,
        }
    }

    pub fn with_space(mut self, space: &SpatialGrid1D, mass: f64) -> Self {
        self.space = Some(SpaceSpec::from_space(space));
        self.mass = Some(mass);
        self
    }

    pub fn with_meta(mut self, key: &str, value: f64) -> Self {
        self.meta.insert(key.into(), value);
        self
    }

    /// Width of a sample row: channel count, or spatial node count per
    /// channel for continuum kinds.
    pub fn row_width(&self) -> usize {
        match &self.space {
            Some(s) => s.n_points * self.channels.len(),
            None => self.channels.len(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema '{}'", self.schema)));
        }
        if self.samples.len() != self.grid.n_steps + 1 {
            return Err(CliError::Config(format!(
                "{} sample rows for {} time nodes",
                self.samples.len(),
                self.grid.n_steps + 1
            )));
        }
        let width = self.row_width();
        for (k, row) in self.samples.iter().enumerate() {
            if row.len() != width {
                return Err(CliError::Config(format!(
                    "sample row {k} has {} values, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("non-finite value in sample row {k}")));
            }
        }
        Ok(())
    }

    /// Deterministic JSON with fixed key order and 17-digit floats.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        let _ = writeln!(s, "  \"schema\": \"{}\",", self.schema);
        let _ = writeln!(s, "  \"kind\": \"{}\",", self.kind);
        let _ = writeln!(
            s,
            "  \"grid\": {{\"t_start\": {}, \"t_end\": {}, \"n_steps\": {}}},",
            fmt_f64(self.grid.t_start),
            fmt_f64(self.grid.t_end),
            self.grid.n_steps
        );
        if let Some(sp) = &self.space {
            let _ = writeln!(
                s,
                "  \"space\": {{\"x_min\": {}, \"x_max\": {}, \"n_points\": {}}},",
                fmt_f64(sp.x_min),
                fmt_f64(sp.x_max),
                sp.n_points
            );
        }
        if let Some(m) = self.mass {
            let _ = writeln!(s, "  \"mass\": {},", fmt_f64(m));
        }
        if !self.meta.is_empty() {
            s.push_str("  \"meta\": {");
            for (i, (k, v)) in self.meta.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                let _ = write!(s, "\"{}\": {}", k, fmt_f64(*v));
            }
            s.push_str("},\n");
        }
        let _ = writeln!(
            s,
            "  \"channels\": [{}],",
            self.channels.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(", ")
        );
        s.push_str("  \"samples\": [\n");
        for (k, row) in self.samples.iter().enumerate() {
            s.push_str("    [");
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                s.push_str(&fmt_f64(*v));
            }
            s.push(']');
            s.push_str(if k + 1 < self.samples.len() { ",\n" } else { "\n" });
        }
        s.push_str("  ]\n}\n");
        s
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let file: PulseFile = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("cannot parse pulse file: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    /// CSV export. Time-series kinds use `t,<channel...>` columns; continuum
    /// kinds use `t,x,<channel...>` long rows.
    pub fn to_csv(&self) -> String {
        let grid = TimeGrid::new(self.grid.t_start, self.grid.t_end, self.grid.n_steps)
            .expect("validated grid");
        let mut s = String::new();
        match &self.space {
            None => {
                let _ = writeln!(s, "t,{}", self.channels.join(","));
                for (k, row) in self.samples.iter().enumerate() {
                    s.push_str(&fmt_f64(grid.time(k)));
                    for v in row {
                        s.push(',');
                        s.push_str(&fmt_f64(*v));
                    }
                    s.push('\n');
                }
            }
            Some(sp) => {
                let space = SpatialGrid1D::new(sp.x_min, sp.x_max, sp.n_points)
                    .expect("validated space");
                let _ = writeln!(s, "t,x,{}", self.channels.join(","));
                let nch = self.channels.len();
                for (k, row) in self.samples.iter().enumerate() {
                    let t = fmt_f64(grid.time(k));
                    for j in 0..sp.n_points {
                        s.push_str(&t);
                        s.push(',');
                        s.push_str(&fmt_f64(space.node(j)));
                        for c in 0..nch {
                            s.push(',');
                            s.push_str(&fmt_f64(row[c * sp.n_points + j]));
                        }
                        s.push('\n');
                    }
                }
            }
        }
        s
    }

    /// CSV import for time-series kinds: the header supplies the channels,
    /// the time column rebuilds the grid.
    pub fn from_csv(kind: &str, text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| CliError::Config("empty csv".into()))?;
        let mut cols = header.split(',');
        if cols.next() != Some("t") {
            return Err(CliError::Config("csv must start with a t column".into()));
        }
        let channels: Vec<String> = cols.map(|c| c.to_string()).collect();
        if channels.first().map(String::as_str) == Some("x") {
            return Err(CliError::Config("continuum csv import is not supported; use json".into()));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let t: f64 = parts
                .next()
                .ok_or_else(|| CliError::Config(format!("csv row {idx} is empty")))?
                .parse()
                .map_err(|e| CliError::Config(format!("csv row {idx}: {e}")))?;
            let row: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("csv row {idx}: {e}")))?;
            if row.len() != channels.len() {
                return Err(CliError::Config(format!("csv row {idx} has {} values", row.len())));
            }
            times.push(t);
            samples.push(row);
        }
        if times.len() < 3 {
            return Err(CliError::Config("csv needs at least 3 rows".into()));
        }
        let grid = GridSpec { t_start: times[0], t_end: *times.last().unwrap(), n_steps: times.len() - 1 };
        let file = PulseFile {
            schema: SCHEMA.into(),
            kind: kind.into(),
            grid,
            space: None,
            mass: None,
            meta: BTreeMap::new(),
            channels,
            samples,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Write a data set in the requested formats next to `stem` (extension is
/// appended).
pub fn write_pulse_file(
    file: &PulseFile,
    dir: &Path,
    stem: &str,
    format: crate::config::ExportFormat,
) -> CliResult<()> {
    file.validate()?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    if format.json() {
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, file.to_json())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    if format.csv() {
        let path = dir.join(format!("{stem}.csv"));
        std::fs::write(&path, file.to_csv())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Serializable half of a verification report plus scenario metadata.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportFile {
    pub scenario: String,
    pub pass: bool,
    pub failures: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub parameters: BTreeMap<String, f64>,
    pub toolkit_version: String,
}

impl ReportFile {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            ..Default::default()
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) -> &mut Self {
        self.metrics.insert(key.into(), value);
        self
    }

    pub fn parameter(&mut self, key: &str, value: f64) -> &mut Self {
        self.parameters.insert(key.into(), value);
        self
    }

    pub fn threshold(&mut self, key: &str, value: f64) -> &mut Self {
        self.thresholds.insert(key.into(), value);
        self
    }

    /// Record a pass/fail gate; failing gates accumulate messages.
    pub fn gate(&mut self, ok: bool, message: String) {
        if !ok {
            self.failures.push(message);
        }
    }

    pub fn finalize(&mut self) {
        self.pass = self.failures.is_empty();
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("report serialization: {e}")))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Channel names for per-site real series v_1..v_M (1-based, matching the
/// physics convention).
pub fn site_channels(prefix: &str, sites: usize) -> Vec<String> {
    (1..=sites).map(|i| format!("{prefix}_{i}")).collect()
}

/// Channel names for complex per-site series: psi_1_re, psi_1_im, ...
pub fn complex_site_channels(prefix: &str, sites: usize) -> Vec<String> {
    (1..=sites)
        .flat_map(|i| [format!("{prefix}_{i}_re"), format!("{prefix}_{i}_im")])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_file() -> PulseFile {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        PulseFile::new(
            "spin-pulse",
            &grid,
            vec!["Bx".into(), "By".into()],
            (0..5).map(|k| vec![1.0 + k as f64 * 0.1, -0.5 * k as f64]).collect(),
        )
        .with_meta("b0", 1.0)
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = sample_file();
        let text = f.to_json();
        let back = PulseFile::from_json(&text).unwrap();
        assert_eq!(f, back);
        // And the re-serialization is byte-identical.
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = sample_file();
        let text = f.to_csv();
        assert!(text.starts_with("t,Bx,By\n"));
        let back = PulseFile::from_csv("spin-pulse", &text).unwrap();
        assert_eq!(f.samples, back.samples);
        assert_eq!(f.grid, back.grid);
    }

    #[test]
    fn awkward_floats_survive() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let values = vec![
            vec![std::f64::consts::PI, 1.0 / 3.0],
            vec![f64::MIN_POSITIVE, -0.0],
            vec![1e300, -2.2250738585072014e-308],
        ];
        let f = PulseFile::new("spin-pulse", &grid, vec!["a".into(), "b".into()], values.clone());
        let back = PulseFile::from_json(&f.to_json()).unwrap();
        for (r1, r2) in values.iter().zip(&back.samples) {
            for (a, b) in r1.iter().zip(r2) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empty_trajectory_is_schema_valid() {
        // The smallest legal grid still carries its three node rows.
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let f = PulseFile::new("spin-pulse", &grid, vec!["Bx".into()], vec![vec![0.0]; 3]);
        assert!(f.validate().is_ok());
        assert!(PulseFile::from_json(&f.to_json()).is_ok());
    }

    #[test]
    fn validation_catches_shape_errors() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let f = PulseFile::new("spin-pulse", &grid, vec!["Bx".into()], vec![vec![0.0]; 3]);
        assert!(f.validate().is_err());
    }
}

//! Run configuration: a JSON document with `mode`, `system`, `sweep`,
//! `continuation`, `n` and `output` sections.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vibratrak_core::analysis::ForceAxis;
use vibratrak_core::model::{presets, ForceKind, ForceModel, SystemConfig};
use vibratrak_core::ContinuationConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Apriori,
    Frc,
    Vprnm,
    Compare,
    Bench,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Apriori => "apriori",
            Mode::Frc => "frc",
            Mode::Vprnm => "vprnm",
            Mode::Compare => "compare",
            Mode::Bench => "bench",
            Mode::Validate => "validate",
        }
    }
}

/// `system` section. Either a `preset` whose fields may be overridden, or
/// every physical field spelled out.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub preset: Option<ForceKind>,
    pub mass: Option<f64>,
    pub damping: Option<f64>,
    pub stiffness: Option<f64>,
    pub force: Option<ForceModel>,
    pub harmonics: Option<usize>,
    pub time_samples: Option<usize>,
    pub x_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Explicit `values`, or `count` points from `from` to `to`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub values: Option<Vec<f64>>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Grid {
    pub fn points(&self, path: &str) -> Result<Vec<f64>, CliError> {
        let bad = |reason: String| CliError::Config(format!("{path}: {reason}"));
        let pts = match (&self.values, self.from, self.to, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err(bad("count must be at least 1".into()));
                }
                if self.spacing == Spacing::Log && !(a > 0.0 && b > 0.0) {
                    return Err(bad("log spacing needs positive bounds".into()));
                }
                (0..n)
                    .map(|i| {
                        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        match self.spacing {
                            Spacing::Linear => a + t * (b - a),
                            Spacing::Log => (a.ln() + t * (b.ln() - a.ln())).exp(),
                        }
                    })
                    .collect()
            }
            (None, ..) => {
                let missing: Vec<&str> = [("from", self.from.is_none()), ("to", self.to.is_none()), ("count", self.count.is_none())]
                    .iter()
                    .filter(|m| m.1)
                    .map(|m| m.0)
                    .collect();
                return Err(bad(format!("give `values` or all of from/to/count (missing {})", missing.join(", "))));
            }
            (Some(_), ..) => return Err(bad("`values` cannot be combined with from/to/count".into())),
        };
        if pts.is_empty() {
            return Err(bad("empty list".into()));
        }
        if let Some(v) = pts.iter().find(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value {v}")));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Forcing amplitudes.
    pub forces: Option<Grid>,
    pub omega_range: Option<(f64, f64)>,
    /// Fixed frequency of a-priori sweeps (default: the linear natural
    /// frequency).
    pub omega: Option<f64>,
    /// Fundamental amplitudes of a-priori sweeps.
    pub amplitudes: Option<Grid>,
    /// `X3 / X1` of the secondary a-priori motion.
    pub third_ratio: Option<f64>,
    /// Frequency window for peak selection and the amplitude band.
    pub window: Option<(f64, f64)>,
    /// Divide response amplitudes by the force level in comparisons.
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub axis: ForceAxis,
    /// Forces, frequencies and amplitudes are given as `F/(k_lin x_ref)`,
    /// `ω/ω0` and `X/x_ref`.
    #[serde(default)]
    pub scaled: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
}

/// The document as written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<Mode>,
    pub system: Option<SystemSection>,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    pub n: Option<usize>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A checked configuration with physical units throughout.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub system: Option<SystemConfig>,
    pub forces: Vec<f64>,
    pub omega_range: Option<(f64, f64)>,
    pub omega: Option<f64>,
    pub amplitudes: Vec<f64>,
    pub third_ratio: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub normalized: bool,
    pub axis: ForceAxis,
    pub continuation: ContinuationConfig,
    pub n: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn system(&self) -> &SystemConfig {
        self.system.as_ref().expect("checked in parse")
    }

    pub fn harmonic(&self) -> usize {
        self.n.expect("checked in parse")
    }

    pub fn omega_range(&self) -> (f64, f64) {
        self.omega_range.expect("checked in parse")
    }
}

pub const DEFAULT_OUT_DIR: &str = "out";

/// Parse and check a configuration document. `mode` is the mode requested
/// on the command line; when the document also names one they must agree.
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    resolve(file, mode)
}

fn resolve(file: ConfigFile, mode: Option<Mode>) -> Result<RunConfig, CliError> {
    let mode = match (mode, file.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "command line asks for `{}` but the config sets mode `{}`",
                a.name(),
                b.name()
            )))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(CliError::Config("missing required keys: mode".into())),
    };
    file.continuation
        .validate()
        .map_err(|e| CliError::Config(format!("continuation: {e}")))?;

    let sweep = &file.sweep;
    let mut missing = Vec::new();
    let needs_system = mode != Mode::Validate;
    let needs_n = matches!(mode, Mode::Apriori | Mode::Vprnm | Mode::Compare | Mode::Bench);
    let needs_forces = matches!(mode, Mode::Frc | Mode::Vprnm | Mode::Compare | Mode::Bench);
    let needs_range = matches!(mode, Mode::Frc | Mode::Compare | Mode::Bench);
    if needs_system && file.system.is_none() {
        missing.push("system".to_string());
    }
    if needs_n && file.n.is_none() {
        missing.push("n".into());
    }
    if needs_forces && sweep.forces.is_none() {
        missing.push("sweep.forces".into());
    }
    if needs_range && sweep.omega_range.is_none() {
        missing.push("sweep.omega_range".into());
    }
    if mode == Mode::Apriori && sweep.amplitudes.is_none() {
        missing.push("sweep.amplitudes".into());
    }
    let system = match &file.system {
        Some(s) if needs_system => match build_system(s) {
            Ok(sys) => Some(sys),
            Err(fields) => {
                missing.extend(fields);
                None
            }
        },
        _ => None,
    };
    if !missing.is_empty() {
        return Err(CliError::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    if let Some(sys) = &system {
        sys.validate().map_err(|e| CliError::Config(format!("system: {e}")))?;
    }
    if let (Some(n), Some(sys)) = (file.n, &system) {
        if n < 1 || n > sys.harmonics {
            return Err(CliError::Config(format!(
                "n: need 1 <= n <= harmonics = {}, got {n}",
                sys.harmonics
            )));
        }
        if n < 2 && needs_n && mode != Mode::Apriori {
            return Err(CliError::Config("n: superharmonic tracking needs n >= 2".into()));
        }
    }

    let (f_unit, w_unit, x_unit) = match (&system, sweep.scaled) {
        (Some(sys), true) => (sys.force_scale(), sys.omega0(), sys.x_ref),
        _ => (1.0, 1.0, 1.0),
    };
    let check_range = |name: &str, r: (f64, f64)| -> Result<(f64, f64), CliError> {
        if !(r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite()) {
            return Err(CliError::Config(format!("{name}: need 0 < lower <= upper, got [{}, {}]", r.0, r.1)));
        }
        Ok((r.0 * w_unit, r.1 * w_unit))
    };
    let forces = match &sweep.forces {
        Some(g) => {
            let v = g.points("sweep.forces")?;
            if let Some(bad) = v.iter().find(|f| **f <= 0.0) {
                return Err(CliError::Config(format!("sweep.forces: levels must be positive, got {bad}")));
            }
            v.into_iter().map(|f| f * f_unit).collect()
        }
        None => Vec::new(),
    };
    let amplitudes = match &sweep.amplitudes {
        Some(g) => g.points("sweep.amplitudes")?.into_iter().map(|a| a * x_unit).collect(),
        None => Vec::new(),
    };
    let omega_range = sweep.omega_range.map(|r| check_range("sweep.omega_range", r)).transpose()?;
    let window = sweep.window.map(|r| check_range("sweep.window", r)).transpose()?;
    let omega = match sweep.omega {
        Some(w) if !(w > 0.0 && w.is_finite()) => {
            return Err(CliError::Config(format!("sweep.omega: must be positive, got {w}")))
        }
        w => w.map(|w| w * w_unit),
    };
    Ok(RunConfig {
        mode,
        system,
        forces,
        omega_range,
        omega,
        amplitudes,
        third_ratio: sweep.third_ratio,
        window,
        normalized: sweep.normalized,
        axis: sweep.axis,
        continuation: file.continuation,
        n: file.n,
        out_dir: file.output.dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
    })
}

/// Fill a system from a preset plus overrides, or from explicit fields.
/// On failure, lists the missing field paths.
fn build_system(s: &SystemSection) -> Result<SystemConfig, Vec<String>> {
    let mut sys = match s.preset {
        Some(kind) => presets::system(kind, s.harmonics.unwrap_or(3)),
        None => {
            let missing: Vec<String> = [
                ("mass", s.mass.is_none()),
                ("damping", s.damping.is_none()),
                ("stiffness", s.stiffness.is_none()),
                ("force", s.force.is_none()),
                ("harmonics", s.harmonics.is_none()),
            ]
            .iter()
            .filter(|m| m.1)
            .map(|m| format!("system.{}", m.0))
            .collect();
            if !missing.is_empty() {
                return Err(missing);
            }
            SystemConfig::new(
                s.mass.unwrap(),
                s.damping.unwrap(),
                s.stiffness.unwrap(),
                s.force.clone().unwrap(),
                s.harmonics.unwrap(),
            )
        }
    };
    if let Some(v) = s.mass {
        sys.mass = v;
    }
    if let Some(v) = s.damping {
        sys.damping = v;
    }
    if let Some(v) = s.stiffness {
        sys.stiffness = v;
    }
    if let Some(f) = &s.force {
        if s.preset.is_some() && s.x_ref.is_none() {
            sys.x_ref = f.default_x_ref();
        }
        sys.force = f.clone();
    }
    if let Some(v) = s.harmonics {
        sys.harmonics = v;
    }
    if let Some(v) = s.time_samples {
        sys.time_samples = v;
    }
    if let Some(v) = s.x_ref {
        sys.x_ref = v;
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use vibratrak_core::model::nondimensionalize;

    #[test]
    fn minimal_duffing_frc_gets_defaults() {
        let text = r#"{
            "mode": "frc",
            "system": {"mass": 1, "damping": 0.01, "stiffness": 1,
                       "force": {"type": "stiffening_duffing", "alpha": 1}, "harmonics": 3},
            "sweep": {"forces": {"values": [0.1]}, "omega_range": [0.2, 2.0]}
        }"#;
        let cfg = parse_config(text, Some(Mode::Frc)).unwrap();
        let sys = cfg.system();
        assert_eq!(sys.time_samples, 1024);
        assert_eq!(cfg.continuation.tol, 1e-9);
        assert_eq!(sys.x_ref, 1.0);
        assert_eq!(cfg.forces, vec![0.1]);
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"mode": "frc", "system": {"preset": "stiffening_duffing",
            "force": {"type": "stiffening_duffing", "alpa": 1}}}"#;
        let err = parse_config(text, None).unwrap_err().to_string();
        assert!(err.contains("alpa"), "{err}");
        assert!(err.contains("system.force"), "{err}");
        let text = r#"{"mode": "frc", "sweeep": {}}"#;
        let err = parse_config(text, None).unwrap_err().to_string();
        assert!(err.contains("sweeep"), "{err}");
    }

    #[test]
    fn missing_keys_are_enumerated() {
        let text = r#"{"mode": "compare", "system": {"damping": 0.01}}"#;
        let err = parse_config(text, None).unwrap_err().to_string();
        for key in ["n", "sweep.forces", "sweep.omega_range", "system.mass", "system.stiffness", "system.force", "system.harmonics"] {
            assert!(err.contains(key), "{key} not in {err}");
        }
    }

    #[test]
    fn empty_force_list_rejected() {
        let text = r#"{"mode": "frc", "system": {"preset": "jenkins"},
            "sweep": {"forces": {"values": []}, "omega_range": [0.2, 0.4]}}"#;
        let err = parse_config(text, None).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("empty"));
    }

    #[test]
    fn mode_mismatch_rejected() {
        let text = r#"{"mode": "frc"}"#;
        assert!(parse_config(text, Some(Mode::Vprnm)).is_err());
        assert!(parse_config(r#"{}"#, Some(Mode::Validate)).is_ok());
    }

    #[test]
    fn iwan_block_round_trips_scales() {
        let text = r#"{"mode": "frc",
            "system": {"mass": 1, "damping": 0.01, "stiffness": 0.75, "harmonics": 3, "x_ref": 2.4,
                       "force": {"type": "iwan", "k_t": 0.25, "f_s": 0.2, "chi": -0.5, "beta": 0}},
            "sweep": {"forces": {"values": [1]}, "omega_range": [0.2, 0.4]}}"#;
        let cfg = parse_config(text, None).unwrap();
        let sys = cfg.system();
        let scales = nondimensionalize(sys);
        match scales.force_hat {
            ForceModel::Iwan { f_s, n_sliders, .. } => {
                assert!((f_s - 0.083333).abs() < 1e-6);
                assert_eq!(n_sliders, 100);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(&scales.to_system(sys.harmonics, sys.time_samples), sys);
    }

    #[test]
    fn scaled_sweeps_convert_to_physical_units() {
        let text = r#"{"mode": "compare", "n": 3, "system": {"preset": "jenkins"},
            "sweep": {"scaled": true, "forces": {"from": 1, "to": 100, "count": 3, "spacing": "log"},
                      "omega_range": [0.2, 0.4]}}"#;
        let cfg = parse_config(text, None).unwrap();
        let xr = cfg.system().x_ref;
        assert_eq!(cfg.forces.len(), 3);
        assert!((cfg.forces[1] - 10.0 * xr).abs() < 1e-12);
        assert_eq!(cfg.omega_range, Some((0.2, 0.4)));
    }

    #[test]
    fn bad_ranges_and_harmonic_rejected() {
        let base = |extra: &str| {
            format!(r#"{{"mode": "compare", "system": {{"preset": "jenkins"}}, {extra}}}"#)
        };
        let t = base(r#""n": 3, "sweep": {"forces": {"values": [1]}, "omega_range": [0.4, 0.2]}"#);
        assert!(parse_config(&t, None).is_err());
        let t = base(r#""n": 5, "sweep": {"forces": {"values": [1]}, "omega_range": [0.2, 0.4]}"#);
        assert!(parse_config(&t, None).is_err());
        let t = base(r#""n": 3, "sweep": {"forces": {"values": [-1]}, "omega_range": [0.2, 0.4]}"#);
        assert!(parse_config(&t, None).is_err());
        let t = base(r#""n": 3, "sweep": {"forces": {"from": 1, "to": 2}, "omega_range": [0.2, 0.4]}"#);
        let err = parse_config(&t, None).unwrap_err().to_string();
        assert!(err.contains("count"), "{err}");
    }
}

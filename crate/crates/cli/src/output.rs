//! CSV and JSON writers.
//!
//! CSV files use `,` separators, `.` decimals, LF line endings and floats
//! with 17 significant digits. Every header names its unit in brackets.
//! Missing values are empty fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vibratrak_core::analysis::{total_amplitude, AprioriSample, LevelSummary};
use vibratrak_core::vprnm::harmonic_phase;
use vibratrak_core::{Frc, HarmonicVector, VprnmPoint};

use crate::error::CliError;

/// Float with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// `X0 [m]`, `X1c [m]`, `X1s [m]`, ...
pub fn harmonic_headers(harmonics: usize) -> Vec<String> {
    let mut h = vec!["X0 [m]".to_string()];
    for k in 1..=harmonics {
        h.push(format!("X{k}c [m]"));
        h.push(format!("X{k}s [m]"));
    }
    h
}

fn harmonic_cells(x: &HarmonicVector) -> impl Iterator<Item = String> + '_ {
    x.as_vector().iter().map(|v| num(*v))
}

fn phase_cell(x: &HarmonicVector, n: usize) -> String {
    if n > x.harmonics() {
        return String::new();
    }
    harmonic_phase(x, n).map(num).unwrap_or_default()
}

/// Header plus rows of pre-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Points of one response curve. `n` selects the harmonic whose phase is
/// reported.
pub fn frc_table(frc: &Frc, n: usize) -> Table {
    let h = frc.points.first().map(|p| p.x.harmonics()).unwrap_or(0);
    let mut header = vec!["force [N]".to_string(), "frequency [rad/s]".into()];
    header.extend(harmonic_headers(h));
    header.extend(
        ["total_amplitude [m]", "phase_n [rad]", "residual_norm [-]", "arc [-]"].map(String::from),
    );
    let rows = frc
        .points
        .iter()
        .map(|p| {
            let mut r = vec![num(frc.force), num(p.omega)];
            r.extend(harmonic_cells(&p.x));
            r.push(num(total_amplitude(&p.x)));
            r.push(phase_cell(&p.x, n));
            r.push(num(p.residual_norm));
            r.push(num(p.arc));
            r
        })
        .collect();
    Table { header, rows }
}

/// Points of a resonance backbone.
pub fn backbone_table(points: &[VprnmPoint]) -> Table {
    let h = points.first().map(|p| p.x.harmonics()).unwrap_or(0);
    let mut header = vec!["force [N]".to_string(), "frequency [rad/s]".into()];
    header.extend(harmonic_headers(h));
    header.extend(
        [
            "total_amplitude [m]",
            "phase_n [rad]",
            "phase_n_unwrapped [rad]",
            "broadband_magnitude [N]",
            "broadband_phase [rad]",
            "constraint [-]",
            "residual_norm [-]",
        ]
        .map(String::from),
    );
    let rows = points
        .iter()
        .map(|p| {
            let mut r = vec![num(p.force), num(p.omega)];
            r.extend(harmonic_cells(&p.x));
            r.extend([
                num(total_amplitude(&p.x)),
                num(p.phase_n),
                num(p.phase_n_unwrapped),
                num(p.broadband.magnitude),
                num(p.broadband.phase),
                num(p.constraint),
                num(p.residual_norm),
            ]);
            r
        })
        .collect();
    Table { header, rows }
}

/// One row per superharmonic peak of every level.
pub fn peaks_table(levels: &[LevelSummary], normalized: bool) -> Table {
    let band_unit = if normalized { "m/N" } else { "m" };
    let header = vec![
        "force [N]".to_string(),
        "frequency_peak [rad/s]".into(),
        "x_super [m]".into(),
        "x_nom [m]".into(),
        "phase_n [rad]".into(),
        "harmonic_amplitude [m]".into(),
        "dominance [-]".into(),
        "selected [-]".into(),
        format!("band_min [{band_unit}]"),
        format!("band_max [{band_unit}]"),
    ];
    let mut rows = Vec::new();
    for l in levels {
        for (i, p) in l.peaks.iter().enumerate() {
            rows.push(vec![
                num(l.force),
                num(p.omega_peak),
                num(p.x_super),
                num(p.x_nom),
                num(p.phase_n),
                num(p.harmonic_amplitude),
                num(p.dominance),
                u8::from(l.selected == Some(i)).to_string(),
                opt(l.band.map(|b| b.0)),
                opt(l.band.map(|b| b.1)),
            ]);
        }
    }
    Table { header, rows }
}

/// Broadband excitation predictions.
pub fn apriori_table(samples: &[AprioriSample], omega: f64) -> Table {
    let header = [
        "n [-]",
        "X1 [m]",
        "X3 [m]",
        "frequency [rad/s]",
        "Fc [N]",
        "Fs [N]",
        "magnitude [N]",
        "phase_broad [rad]",
        "phase_n [rad]",
        "X1_hat [-]",
        "magnitude_hat [-]",
        "magnitude_over_slip [-]",
        "magnitude_over_linear [-]",
    ]
    .map(String::from)
    .to_vec();
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                num(s.x1),
                opt(s.x3),
                num(omega),
                num(s.fc),
                num(s.fs),
                num(s.magnitude),
                num(s.phase_broad),
                opt(s.phase_n),
                num(s.x1_hat),
                num(s.magnitude_hat),
                opt(s.magnitude_over_slip),
                num(s.magnitude_over_linear),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Collects the files of one run under its output directory.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    /// Create the directory and check that it accepts files.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let unwritable = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(unwritable)?;
        let probe = dir.join(".vibratrak-write-check");
        fs::write(&probe, b"").map_err(unwritable)?;
        let _ = fs::remove_file(&probe);
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let bytes = table.to_csv()?;
        self.put(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        bytes.push(b'\n');
        self.put(name, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vibratrak_core::continuation::{SolveStats, Termination};
    use vibratrak_core::FrcPoint;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::NAN), "NaN");
        for v in [0.1, 1.0 / 3.0, -7.25e-13, 123456.789] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_uses_lf_and_units() {
        let mut x = HarmonicVector::zeros(1);
        x.set_pair(1, 3.0, 4.0);
        let frc = Frc {
            force: 1.0,
            points: vec![FrcPoint { omega: 0.5, x, residual_norm: 0.0, arc: 0.0 }],
            termination: Termination::Boundary,
            stats: SolveStats::default(),
        };
        let bytes = frc_table(&frc, 1).to_csv().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(!text.contains('\r'));
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "force [N],frequency [rad/s],X0 [m],X1c [m],X1s [m],total_amplitude [m],phase_n [rad],residual_norm [-],arc [-]"
        );
        for col in header.split(',') {
            assert!(col.ends_with(']'), "{col}");
        }
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row[3], 3.0);
        assert!((row[5] - 5.0).abs() < 1e-9);
        assert!((row[6] - 4f64.atan2(3.0)).abs() < 1e-15);
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let tmp = tempfile::tempdir().unwrap();
        let file = tmp.path().join("plain");
        fs::write(&file, b"x").unwrap();
        let err = OutputDir::create(&file.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}

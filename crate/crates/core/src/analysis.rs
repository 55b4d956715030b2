//! A-priori excitation predictions, frequency response post-processing and
//! the amplitude-shift accuracy metric.

use std::f64::consts::PI;

use serde::Serialize;

use crate::aft::HarmonicVector;
use crate::error::{Error, Result};
use crate::continuation::ContinuationConfig;
use crate::hbm::{trace_frc, Frc, Hbm};
use crate::model::{ForceModel, SystemConfig};
use crate::vprnm::{broadband_force, expected_phase, harmonic_phase, Backbone, BroadbandForce};

/// Broadband excitation of one harmonic for an assumed motion.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriSample {
    pub n: usize,
    pub x1: f64,
    /// Amplitude of the third harmonic, when it is part of the motion.
    pub x3: Option<f64>,
    pub fc: f64,
    pub fs: f64,
    pub magnitude: f64,
    pub phase_broad: f64,
    /// Phase at which harmonic `n` would resonate; `None` when the
    /// excitation vanishes.
    pub phase_n: Option<f64>,
    /// `X1 / x_ref`.
    pub x1_hat: f64,
    /// Magnitude over `k_lin x_ref`.
    pub magnitude_hat: f64,
    /// Magnitude over the slip force, for saturating laws.
    pub magnitude_over_slip: Option<f64>,
    /// Magnitude over `k_lin X1`, the fundamental force of the linearized spring.
    pub magnitude_over_linear: f64,
}

fn sweep_system(sys: &SystemConfig, n: usize) -> SystemConfig {
    let h = sys.harmonics.max(n).max(3);
    let mut s = sys.clone().with_harmonics(h);
    while s.time_samples < 4 * h {
        s.time_samples *= 2;
    }
    s
}

/// Evaluate the broadband excitation of harmonic `n` for
/// `x = X1 cos ωt`, or with `third_ratio = Some(r)` for
/// `x = X1 cos ωt + r X1 cos(3ωt − φ_broad,3)` where `φ_broad,3` is the phase
/// of the third-harmonic excitation produced by the fundamental alone. If that
/// excitation vanishes, as it does identically for the unilateral spring, the
/// third harmonic is left out.
pub fn apriori_sweep(
    sys: &SystemConfig,
    n: usize,
    amplitudes: &[f64],
    omega: f64,
    third_ratio: Option<f64>,
) -> Result<Vec<AprioriSample>> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need n >= 2, got {n}"),
        });
    }
    let s = sweep_system(sys, n);
    let h = s.harmonics;
    let k_lin = s.k_lin();
    let slip = s.force.slip_force();
    amplitudes
        .iter()
        .map(|&x1| {
            if !(x1 > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "amplitudes",
                    reason: format!("amplitudes must be positive, got {x1}"),
                });
            }
            let mut x = HarmonicVector::zeros(h);
            x.set_pair(1, x1, 0.0);
            let mut x3 = None;
            let no_third = matches!(s.force, ForceModel::UnilateralSpring { .. });
            if let Some(r) = third_ratio.filter(|_| !no_third) {
                let b3 = broadband_force(&s, &x, omega, 3)?;
                if b3.magnitude > 0.0 {
                    let a3 = r * x1;
                    x.set_pair(3, a3 * b3.phase.cos(), a3 * b3.phase.sin());
                    x3 = Some(a3);
                }
            }
            let b = broadband_force(&s, &x, omega, n)?;
            Ok(sample(&b, x1, x3, s.x_ref, k_lin, slip))
        })
        .collect()
}

fn sample(
    b: &BroadbandForce,
    x1: f64,
    x3: Option<f64>,
    x_ref: f64,
    k_lin: f64,
    slip: Option<f64>,
) -> AprioriSample {
    AprioriSample {
        n: b.n,
        x1,
        x3,
        fc: b.fc,
        fs: b.fs,
        magnitude: b.magnitude,
        phase_broad: b.phase,
        phase_n: expected_phase(b).ok(),
        x1_hat: x1 / x_ref,
        magnitude_hat: b.magnitude / (k_lin * x_ref),
        magnitude_over_slip: slip.map(|f| b.magnitude / f),
        magnitude_over_linear: b.magnitude / (k_lin * x1),
    }
}

/// Closed-form broadband excitation `(Fc, Fs)` of harmonic `n` for
/// `x = X1 cos ωt` (`x3 = None`) or for the motion with a phase-locked third
/// harmonic described in [`apriori_sweep`] (`x3 = Some(X3)`).
///
/// Available for the polynomial stiffness laws, the unilateral spring and
/// cubic damping. The unilateral spring has no third-harmonic excitation, so
/// its result ignores `x3`.
pub fn analytic_fbroad(
    force: &ForceModel,
    n: usize,
    x1: f64,
    x3: Option<f64>,
    omega: f64,
) -> Result<(f64, f64)> {
    let secondary = x3.filter(|_| n > 3);
    match *force {
        ForceModel::StiffeningDuffing { alpha } | ForceModel::SofteningDuffing { alpha } => {
            Ok(match (n, secondary) {
                (3, _) => (-alpha * x1.powi(3) / 4.0, 0.0),
                (5, Some(a3)) => {
                    // X3 sits in phase with the third-harmonic excitation −αX1³/4.
                    let y = -alpha.signum() * a3;
                    (-3.0 * alpha * (x1 * x1 * y + x1 * y * y) / 4.0, 0.0)
                }
                (n, None) if n != 3 => (0.0, 0.0),
                (n, Some(_)) if n % 2 == 0 => (0.0, 0.0),
                _ => return unsupported(force, n),
            })
        }
        ForceModel::QuinticStiffness { eta } => Ok(match (n, secondary) {
            (3, _) => (-5.0 * eta * x1.powi(5) / 16.0, 0.0),
            (5, None) => (-eta * x1.powi(5) / 16.0, 0.0),
            (5, Some(a3)) => {
                let y = -eta.signum() * a3;
                let p = x1.powi(5)
                    + 20.0 * x1.powi(4) * y
                    + 30.0 * x1.powi(3) * y * y
                    + 30.0 * x1 * x1 * y.powi(3)
                    + 20.0 * x1 * y.powi(4);
                (-eta * p / 16.0, 0.0)
            }
            (n, _) if n % 2 == 0 => (0.0, 0.0),
            (_, None) => (0.0, 0.0),
            _ => return unsupported(force, n),
        }),
        ForceModel::UnilateralSpring { k_nl } => {
            if n % 2 == 1 {
                return Ok((0.0, 0.0));
            }
            // Half-wave rectified cosine: a_n = 2(−1)^(n/2+1) / (π(n²−1)).
            let sign = if (n / 2) % 2 == 1 { 1.0 } else { -1.0 };
            let nf = n as f64;
            let a = 2.0 * sign / (PI * (nf * nf - 1.0));
            Ok((-k_nl * x1.abs() * a, 0.0))
        }
        ForceModel::CubicDamping { gamma } => {
            let w3 = omega.powi(3);
            Ok(match (n, secondary) {
                (3, _) => (0.0, -gamma * w3 * x1.powi(3) / 4.0),
                (5, Some(a3)) => {
                    // Sine coefficient of the third harmonic, in phase with its excitation.
                    let s3 = -gamma.signum() * a3;
                    (
                        9.0 * gamma * w3 * x1 * x1 * s3 / 4.0,
                        -27.0 * gamma * w3 * x1 * s3 * s3 / 4.0,
                    )
                }
                (n, _) if n % 2 == 0 => (0.0, 0.0),
                (_, None) => (0.0, 0.0),
                _ => return unsupported(force, n),
            })
        }
        _ => unsupported(force, n),
    }
}

fn unsupported<T>(force: &ForceModel, n: usize) -> Result<T> {
    Err(Error::Unsupported(format!(
        "no closed-form excitation of harmonic {n} for the {} law",
        force.kind().name()
    )))
}

/// Largest displacement magnitude over one cycle.
pub fn total_amplitude(x: &HarmonicVector) -> f64 {
    let h = x.harmonics();
    let nt = (64 * h.max(1)).max(256);
    let eval = |t: f64| {
        let mut v = x[0];
        let mut d = 0.0;
        let mut dd = 0.0;
        for k in 1..=h {
            let kf = k as f64;
            let (c, s) = x.pair(k);
            let (sn, cs) = (kf * t).sin_cos();
            v += c * cs + s * sn;
            d += kf * (-c * sn + s * cs);
            dd += -kf * kf * (c * cs + s * sn);
        }
        (v, d, dd)
    };
    let mut best = (0.0, 0.0);
    for i in 0..nt {
        let t = 2.0 * PI * i as f64 / nt as f64;
        let v = eval(t).0.abs();
        if v > best.0 {
            best = (v, t);
        }
    }
    // Newton on the derivative from the best sample.
    let mut t = best.1;
    let dt_max = 2.0 * PI / nt as f64;
    for _ in 0..20 {
        let (_, d, dd) = eval(t);
        if dd == 0.0 {
            break;
        }
        let step = (d / dd).clamp(-dt_max, dt_max);
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    eval(t).0.abs().max(best.0)
}

/// Superharmonic peak found on one frequency response curve.
#[derive(Debug, Clone, Serialize)]
pub struct PeakRecord {
    pub force: f64,
    pub omega_peak: f64,
    /// Total amplitude at the peak.
    pub x_super: f64,
    /// Total amplitude at `1.1 ω_peak`.
    pub x_nom: f64,
    pub phase_n: f64,
    /// `|X_n|` at the peak.
    pub harmonic_amplitude: f64,
    /// `|X_n| / |X_1|` at the peak.
    pub dominance: f64,
    pub x: HarmonicVector,
}

fn quadratic_vertex(s: [f64; 3], a: [f64; 3]) -> f64 {
    let d1 = (a[1] - a[0]) / (s[1] - s[0]);
    let d2 = (a[2] - a[1]) / (s[2] - s[1]);
    let curv = (d2 - d1) / (s[2] - s[0]);
    if curv >= 0.0 {
        return s[1];
    }
    let v = 0.5 * (s[0] + s[1]) - d1 / (2.0 * curv);
    v.clamp(s[0], s[2])
}

fn lagrange(s: [f64; 3], v: [f64; 3], t: f64) -> f64 {
    let mut out = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (t - s[j]) / (s[i] - s[j]);
            }
        }
        out += w * v[i];
    }
    out
}

/// Locate strict local maxima of `|X_n|` along a traced response curve and
/// characterize each one.
///
/// The maximum is placed by a quadratic through three consecutive points in
/// arclength, the state there is re-converged at fixed frequency, and the
/// nominal amplitude is converged at `1.1 ω_peak` starting from the nearest
/// branch point past the peak.
pub fn extract_superharmonic_peaks(sys: &SystemConfig, frc: &Frc, n: usize) -> Result<Vec<PeakRecord>> {
    if n < 1 || n > sys.harmonics {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 1 <= n <= H = {}, got {n}", sys.harmonics),
        });
    }
    let hbm = Hbm::new(sys)?;
    let pts = &frc.points;
    let amp: Vec<f64> = pts.iter().map(|p| p.x.magnitude(n)).collect();
    let mut out = Vec::new();
    for i in 1..pts.len().saturating_sub(1) {
        if !(amp[i] > amp[i - 1] && amp[i] > amp[i + 1]) {
            continue;
        }
        // Ignore numerically empty harmonics.
        if amp[i] <= 1e-12 * pts[i].x.as_vector().amax().max(sys.x_ref) {
            continue;
        }
        let s = [pts[i - 1].arc, pts[i].arc, pts[i + 1].arc];
        let sv = quadratic_vertex(s, [amp[i - 1], amp[i], amp[i + 1]]);
        let omega = lagrange(s, [pts[i - 1].omega, pts[i].omega, pts[i + 1].omega], sv);
        let mut guess = pts[i].x.clone();
        for k in 0..guess.len() {
            guess[k] = lagrange(s, [pts[i - 1].x[k], pts[i].x[k], pts[i + 1].x[k]], sv);
        }
        let x = match hbm.solve(&guess, omega, frc.force, Default::default()) {
            Ok(sol) => sol.x,
            Err(_) => match hbm.solve(&pts[i].x, pts[i].omega, frc.force, Default::default()) {
                Ok(sol) => sol.x,
                Err(_) => continue,
            },
        };
        let omega_nom = 1.1 * omega;
        let x_nom = nominal_amplitude(&hbm, frc, i, omega_nom)?;
        let h_amp = x.magnitude(n);
        let fund = x.magnitude(1);
        out.push(PeakRecord {
            force: frc.force,
            omega_peak: omega,
            x_super: total_amplitude(&x),
            x_nom,
            phase_n: harmonic_phase(&x, n).unwrap_or(f64::NAN),
            harmonic_amplitude: h_amp,
            dominance: if fund > 0.0 { h_amp / fund } else { f64::INFINITY },
            x,
        });
    }
    Ok(out)
}

fn nominal_amplitude(hbm: &Hbm, frc: &Frc, from: usize, omega: f64) -> Result<f64> {
    let pts = &frc.points;
    // First crossing of the target frequency after the peak, else the nearest point.
    let crossing = (from..pts.len() - 1).find(|&j| {
        (pts[j].omega - omega) * (pts[j + 1].omega - omega) <= 0.0 && pts[j].omega != pts[j + 1].omega
    });
    let guess = match crossing {
        Some(j) => {
            let t = (omega - pts[j].omega) / (pts[j + 1].omega - pts[j].omega);
            HarmonicVector::from(pts[j].x.as_vector() * (1.0 - t) + pts[j + 1].x.as_vector() * t)
        }
        None => {
            let j = (0..pts.len())
                .min_by(|&a, &b| {
                    (pts[a].omega - omega)
                        .abs()
                        .total_cmp(&(pts[b].omega - omega).abs())
                })
                .expect("branch has points");
            pts[j].x.clone()
        }
    };
    let sol = hbm.solve(&guess, omega, frc.force, Default::default())?;
    Ok(total_amplitude(&sol.x))
}

/// Peak whose harmonic is largest relative to the fundamental.
pub fn dominant_peak(peaks: &[PeakRecord]) -> Option<&PeakRecord> {
    peaks.iter().max_by(|a, b| a.dominance.total_cmp(&b.dominance))
}

/// Total amplitude along each point of a curve, optionally over the force.
pub fn amplitude_curve(frc: &Frc, normalized: bool) -> Vec<(f64, f64)> {
    let scale = if normalized { 1.0 / frc.force } else { 1.0 };
    frc.points
        .iter()
        .map(|p| (p.omega, total_amplitude(&p.x) * scale))
        .collect()
}

/// Band of total amplitude across several curves on a common frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyEnvelope {
    pub omega: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Number of frequencies in [`frc_envelope`].
pub const ENVELOPE_POINTS: usize = 400;

/// Every value a piecewise-linear curve takes at `omega`, following the
/// curve in arclength order so folds contribute all of their branches.
fn values_at(curve: &[(f64, f64)], omega: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in curve.windows(2) {
        let ((w0, a0), (w1, a1)) = (w[0], w[1]);
        let (lo, hi) = if w0 <= w1 { (w0, w1) } else { (w1, w0) };
        if omega < lo || omega > hi {
            continue;
        }
        if w0 == w1 {
            out.push(a0);
            out.push(a1);
        } else {
            let t = (omega - w0) / (w1 - w0);
            out.push(a0 + t * (a1 - a0));
        }
    }
    if curve.len() == 1 && curve[0].0 == omega {
        out.push(curve[0].1);
    }
    out
}

/// Band spanned by the total amplitude of several curves, on
/// [`ENVELOPE_POINTS`] log-spaced frequencies across the common frequency
/// support.
pub fn frc_envelope(frcs: &[Frc], normalized: bool) -> Result<FrequencyEnvelope> {
    if frcs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "frcs",
            reason: format!("need at least two curves, got {}", frcs.len()),
        });
    }
    let curves: Vec<Vec<(f64, f64)>> = frcs.iter().map(|f| amplitude_curve(f, normalized)).collect();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for c in &curves {
        if c.is_empty() {
            return Err(Error::EmptyOverlap("a curve has no points".into()));
        }
        let (a, b) = c
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        lo = lo.max(a);
        hi = hi.min(b);
    }
    if !(lo <= hi) || !(lo > 0.0) {
        return Err(Error::EmptyOverlap(format!(
            "curves share no frequency interval (largest start {lo}, smallest end {hi})"
        )));
    }
    let m = ENVELOPE_POINTS;
    let mut env = FrequencyEnvelope {
        omega: Vec::with_capacity(m),
        lower: Vec::with_capacity(m),
        upper: Vec::with_capacity(m),
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    for i in 0..m {
        let w = if i == 0 {
            lo
        } else if i == m - 1 {
            hi
        } else {
            (llo + (lhi - llo) * i as f64 / (m - 1) as f64).exp()
        };
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for c in &curves {
            for v in values_at(c, w) {
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        env.omega.push(w);
        env.lower.push(mn);
        env.upper.push(mx);
    }
    Ok(env)
}

/// Smallest and largest total amplitude of one curve inside a frequency
/// window, including the values where the curve crosses the window edges.
pub fn amplitude_bounds(frc: &Frc, window: (f64, f64), normalized: bool) -> Option<(f64, f64)> {
    let curve = amplitude_curve(frc, normalized);
    let mut vals: Vec<f64> = curve
        .iter()
        .filter(|p| p.0 >= window.0 && p.0 <= window.1)
        .map(|p| p.1)
        .collect();
    vals.extend(values_at(&curve, window.0));
    vals.extend(values_at(&curve, window.1));
    if vals.is_empty() {
        return None;
    }
    Some(vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
        (a.min(v), b.max(v))
    }))
}

/// Force axis used when integrating amplitude curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceAxis {
    #[default]
    Linear,
    Log,
}

/// Amplitude band per force level: `(force, lower, upper)`.
pub type ForceBand = [(f64, f64, f64)];

fn interpolate_curve(curve: &[(f64, f64)], f: f64, axis: ForceAxis) -> Option<f64> {
    let u = |v: f64| match axis {
        ForceAxis::Linear => v,
        ForceAxis::Log => v.ln(),
    };
    let uf = u(f);
    for w in curve.windows(2) {
        let (a, b) = (u(w[0].0), u(w[1].0));
        if (a - uf) * (b - uf) <= 0.0 {
            if a == b {
                return Some(w[0].1);
            }
            let t = (uf - a) / (b - a);
            return Some(w[0].1 + t * (w[1].1 - w[0].1));
        }
    }
    if curve.len() == 1 && curve[0].0 == f {
        return Some(curve[0].1);
    }
    None
}

/// Percent difference in amplitude shift between a traced resonance curve
/// and the peak amplitudes found on discrete response curves.
///
/// `tracked` is `(force, amplitude)` along the traced backbone, `peaks` the
/// `(force, amplitude)` at each discrete level and `band` the per-level
/// amplitude range. The area between `tracked` and `peaks` over the area of
/// `band` is integrated with the trapezoidal rule on the discrete force
/// levels covered by the backbone.
pub fn accuracy_metric(
    tracked: &[(f64, f64)],
    peaks: &[(f64, f64)],
    band: &ForceBand,
    axis: ForceAxis,
) -> Result<f64> {
    let u = |v: f64| match axis {
        ForceAxis::Linear => v,
        ForceAxis::Log => v.ln(),
    };
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for &(f, a_peak) in peaks {
        let Some(&(_, lo, hi)) = band.iter().find(|b| b.0 == f) else {
            continue;
        };
        let Some(a_tr) = interpolate_curve(tracked, f, axis) else {
            continue;
        };
        rows.push((u(f), (a_tr - a_peak).abs(), hi - lo));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.len() < 2 {
        return Err(Error::EmptyOverlap(format!(
            "need at least two force levels shared by the backbone, peaks and band, got {}",
            rows.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for w in rows.windows(2) {
        let du = w[1].0 - w[0].0;
        num += 0.5 * du * (w[0].1 + w[1].1);
        den += 0.5 * du * (w[0].2 + w[1].2);
    }
    if den == 0.0 {
        return if num == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::OutOfRange("amplitude band has zero area".into()))
        };
    }
    Ok(100.0 * num / den)
}

/// Response curve at one force level with its superharmonic peaks.
#[derive(Debug, Clone)]
pub struct LevelSummary {
    pub force: f64,
    pub frc: Frc,
    pub peaks: Vec<PeakRecord>,
    /// Index into `peaks` of the resonance used for comparison.
    pub selected: Option<usize>,
    /// Total amplitude range inside the band window.
    pub band: Option<(f64, f64)>,
}

impl LevelSummary {
    pub fn selected_peak(&self) -> Option<&PeakRecord> {
        self.selected.map(|i| &self.peaks[i])
    }
}

/// Trace the response at `force` over `omega_range`, extract the peaks of
/// harmonic `n` and pick the one with the largest `|X_n| / |X_1|` inside
/// `window` (default: the whole range).
pub fn summarize_level(
    sys: &SystemConfig,
    n: usize,
    force: f64,
    omega_range: (f64, f64),
    window: Option<(f64, f64)>,
    cfg: &ContinuationConfig,
    normalized: bool,
) -> Result<LevelSummary> {
    let frc = trace_frc(sys, force, omega_range, cfg)?;
    let peaks = extract_superharmonic_peaks(sys, &frc, n)?;
    let win = window.unwrap_or(omega_range);
    let selected = peaks
        .iter()
        .enumerate()
        .filter(|(_, p)| p.omega_peak >= win.0 && p.omega_peak <= win.1)
        .max_by(|a, b| a.1.dominance.total_cmp(&b.1.dominance))
        .map(|(i, _)| i);
    let band = amplitude_bounds(&frc, win, normalized);
    Ok(LevelSummary {
        force,
        frc,
        peaks,
        selected,
        band,
    })
}

/// `(force, total amplitude)` along a backbone, optionally over the force.
pub fn backbone_curve(backbone: &Backbone, normalized: bool) -> Vec<(f64, f64)> {
    backbone
        .points
        .iter()
        .map(|p| {
            let a = total_amplitude(&p.x);
            (p.force, if normalized { a / p.force } else { a })
        })
        .collect()
}

/// [`accuracy_metric`] of a backbone against discrete-level peak records.
pub fn comparison_metric(
    levels: &[LevelSummary],
    backbone: &Backbone,
    normalized: bool,
    axis: ForceAxis,
) -> Result<f64> {
    let scale = |f: f64, a: f64| if normalized { a / f } else { a };
    let peaks: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|l| l.selected_peak().map(|p| (l.force, scale(l.force, p.x_super))))
        .collect();
    let band: Vec<(f64, f64, f64)> = levels
        .iter()
        .filter_map(|l| l.band.map(|(lo, hi)| (l.force, lo, hi)))
        .collect();
    accuracy_metric(&backbone_curve(backbone, normalized), &peaks, &band, axis)
}

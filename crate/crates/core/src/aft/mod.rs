//! Alternating frequency-time evaluation of the nonlinear force.
//!
//! A harmonic displacement vector is synthesized on `Nt` samples over one
//! period, the force law is evaluated sample by sample, and the samples are
//! transformed back to harmonic coefficients. Derivatives with respect to the
//! harmonic coefficients follow by the chain rule through the same transforms.

mod basis;
mod hysteretic;

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eval_instantaneous, ForceModel, HystereticElement, SystemConfig};

pub use basis::{unit_circle, Basis};
pub use hysteretic::{find_critical_instants, HystereticStats};
use hysteretic::{RunningSums, SliderSet};

/// Harmonic coefficients `[X0, X1c, X1s, …, XHc, XHs]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct HarmonicVector(DVector<f64>);

impl From<Vec<f64>> for HarmonicVector {
    fn from(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }
}

impl From<HarmonicVector> for Vec<f64> {
    fn from(v: HarmonicVector) -> Self {
        v.0.as_slice().to_vec()
    }
}

impl From<DVector<f64>> for HarmonicVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

impl Deref for HarmonicVector {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for HarmonicVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl HarmonicVector {
    pub fn zeros(harmonics: usize) -> Self {
        Self(DVector::zeros(2 * harmonics + 1))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    /// Highest harmonic represented.
    pub fn harmonics(&self) -> usize {
        (self.0.len().saturating_sub(1)) / 2
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// Index of the cosine coefficient of harmonic `k ≥ 1`.
    pub fn cos_index(k: usize) -> usize {
        2 * k - 1
    }

    /// Index of the sine coefficient of harmonic `k ≥ 1`.
    pub fn sin_index(k: usize) -> usize {
        2 * k
    }

    pub fn static_term(&self) -> f64 {
        self.0[0]
    }

    /// `(X_kc, X_ks)`; zero for harmonics beyond the stored range.
    pub fn pair(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            return (self.0[0], 0.0);
        }
        if k > self.harmonics() {
            return (0.0, 0.0);
        }
        (self.0[2 * k - 1], self.0[2 * k])
    }

    pub fn set_pair(&mut self, k: usize, c: f64, s: f64) {
        self.0[2 * k - 1] = c;
        self.0[2 * k] = s;
    }

    /// `sqrt(X_kc² + X_ks²)` (or `|X0|` for `k = 0`).
    pub fn magnitude(&self, k: usize) -> f64 {
        let (c, s) = self.pair(k);
        c.hypot(s)
    }

    /// Copy keeping only harmonics `0..n` (exclusive of `n`).
    pub fn truncated_below(&self, n: usize) -> Self {
        let mut out = self.clone();
        for i in (2 * n - 1)..out.len() {
            out.0[i] = 0.0;
        }
        out
    }

    /// Copy keeping only harmonic `n ≥ 1`.
    pub fn only_harmonic(&self, n: usize) -> Self {
        let mut out = Self(DVector::zeros(self.len()));
        let (c, s) = self.pair(n);
        out.set_pair(n, c, s);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Harmonic force coefficients with their derivatives.
#[derive(Debug, Clone)]
pub struct AftResult {
    pub f_nl: HarmonicVector,
    /// `∂F_nl / ∂X`, `(2H+1) × (2H+1)`.
    pub df_dx: DMatrix<f64>,
    /// `∂F_nl / ∂ω`; zero unless the force depends on velocity.
    pub df_domega: DVector<f64>,
}

/// Which evaluation strategy to use for hysteretic elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AftPath {
    /// Step every sample twice.
    Standard,
    /// Step only the velocity reversals, then evaluate samples independently.
    #[default]
    Fast,
}

#[derive(Debug, Clone)]
enum Law {
    Instantaneous(ForceModel),
    Hysteretic(SliderSet, RunningSums),
}

/// Reusable evaluator for one force law at a fixed harmonic count and
/// sample count.
#[derive(Debug, Clone)]
pub struct Aft {
    basis: Basis,
    law: Law,
    velocity_dependent: bool,
}

impl Aft {
    pub fn new(force: &ForceModel, harmonics: usize, nt: usize) -> Result<Self> {
        force.validate()?;
        if harmonics == 0 {
            return Err(Error::InvalidParameter {
                name: "harmonics",
                reason: "must be >= 1".into(),
            });
        }
        if nt < 4 * harmonics || nt % 4 != 0 {
            return Err(Error::InvalidParameter {
                name: "time_samples",
                reason: format!(
                    "need a multiple of 4 that is at least 4 * harmonics = {}, got {nt}",
                    4 * harmonics
                ),
            });
        }
        let basis = Basis::new(harmonics, nt);
        let law = if force.is_hysteretic() {
            Law::Hysteretic(
                SliderSet::new(&HystereticElement::new(force)?),
                RunningSums::new(&basis),
            )
        } else {
            Law::Instantaneous(force.clone())
        };
        Ok(Self {
            basis,
            law,
            velocity_dependent: force.is_velocity_dependent(),
        })
    }

    pub fn for_system(sys: &SystemConfig) -> Result<Self> {
        Self::new(&sys.force, sys.harmonics, sys.time_samples)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn harmonics(&self) -> usize {
        self.basis.harmonics
    }

    pub fn is_hysteretic(&self) -> bool {
        matches!(self.law, Law::Hysteretic(..))
    }

    fn check_input(&self, x: &HarmonicVector, omega: f64) -> Result<()> {
        if x.len() != self.basis.n_coeffs() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.n_coeffs(),
                got: x.len(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFiniteInput("harmonic coefficients".into()));
        }
        if !omega.is_finite() {
            return Err(Error::NonFiniteInput("frequency".into()));
        }
        Ok(())
    }

    /// Force coefficients and derivatives using the default (fast) path.
    pub fn eval(&self, x: &HarmonicVector, omega: f64) -> Result<AftResult> {
        self.eval_with(x, omega, AftPath::Fast).map(|(r, _)| r)
    }

    /// Force coefficients and derivatives with an explicit path choice.
    /// The path only matters for hysteretic elements.
    pub fn eval_with(
        &self,
        x: &HarmonicVector,
        omega: f64,
        path: AftPath,
    ) -> Result<(AftResult, HystereticStats)> {
        self.check_input(x, omega)?;
        let b = &self.basis;
        let disp = b.displacement(x);
        let n = b.n_coeffs();
        match &self.law {
            Law::Instantaneous(force) => {
                let vel_unit = &b.synth_dot * x.as_vector();
                let mut f = DVector::zeros(b.nt);
                let mut rows = b.synth.clone();
                let mut dv = DVector::zeros(b.nt);
                for j in 0..b.nt {
                    let e = eval_instantaneous(force, disp[j], omega * vel_unit[j])?;
                    if !e.f.is_finite() {
                        return Err(Error::NonFiniteSample { index: j });
                    }
                    f[j] = e.f;
                    for c in 0..n {
                        rows[(j, c)] = e.df_dx * b.synth[(j, c)]
                            + e.df_dv * omega * b.synth_dot[(j, c)];
                    }
                    dv[j] = e.df_dv * vel_unit[j];
                }
                let df_domega = if self.velocity_dependent {
                    &b.analysis * dv
                } else {
                    DVector::zeros(n)
                };
                Ok((
                    AftResult {
                        f_nl: HarmonicVector(&b.analysis * f),
                        df_dx: &b.analysis * rows,
                        df_domega,
                    },
                    HystereticStats::default(),
                ))
            }
            Law::Hysteretic(set, sums) => {
                let samples = disp.as_slice();
                let sampled = match path {
                    AftPath::Standard => hysteretic::standard(set, samples, b),
                    AftPath::Fast => match hysteretic::fast(set, samples, b, sums) {
                        Some(s) => s,
                        None => {
                            let mut s = hysteretic::standard(set, samples, b);
                            s.stats.fell_back = true;
                            s
                        }
                    },
                };
                if let Some(j) = sampled.forces.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample { index: j });
                }
                Ok((
                    AftResult {
                        f_nl: HarmonicVector(&b.analysis * &sampled.forces),
                        df_dx: sampled.df_dx,
                        df_domega: DVector::zeros(n),
                    },
                    sampled.stats,
                ))
            }
        }
    }

    /// Force samples over one period (second cycle for hysteretic elements).
    pub fn force_samples(&self, x: &HarmonicVector, omega: f64) -> Result<Vec<f64>> {
        self.check_input(x, omega)?;
        let b = &self.basis;
        let disp = b.displacement(x);
        match &self.law {
            Law::Instantaneous(force) => {
                let vel = b.velocity(x, omega);
                (0..b.nt)
                    .map(|j| {
                        let f = eval_instantaneous(force, disp[j], vel[j])?.f;
                        if f.is_finite() {
                            Ok(f)
                        } else {
                            Err(Error::NonFiniteSample { index: j })
                        }
                    })
                    .collect()
            }
            Law::Hysteretic(set, sums) => {
                let s = hysteretic::fast(set, disp.as_slice(), b, sums)
                    .unwrap_or_else(|| hysteretic::standard(set, disp.as_slice(), b));
                Ok(s.forces.as_slice().to_vec())
            }
        }
    }

    /// Force coefficients only.
    pub fn coefficients(&self, x: &HarmonicVector, omega: f64) -> Result<HarmonicVector> {
        let f = self.force_samples(x, omega)?;
        Ok(HarmonicVector(&self.basis.analysis * DVector::from_vec(f)))
    }
}

/// Sample `x(t)` and `ẋ(t)` at `t_j = j T / nt`, `j = 0..nt`.
pub fn synthesize_time_series(
    x: &HarmonicVector,
    omega: f64,
    nt: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = x.harmonics();
    if nt < 4 * h || nt % 4 != 0 {
        return Err(Error::InvalidParameter {
            name: "time_samples",
            reason: format!("need a multiple of 4 that is at least {}", 4 * h.max(1)),
        });
    }
    let b = Basis::new(h, nt);
    let d = b.displacement(x);
    let v = b.velocity(x, omega);
    Ok((d.as_slice().to_vec(), v.as_slice().to_vec()))
}

/// Harmonic coefficients `0..=H` of a periodic sample series: the period
/// mean for `n = 0` and `2/Nt`-scaled projections for `n ≥ 1`.
pub fn harmonic_coefficients(f: &[f64], harmonics: usize) -> HarmonicVector {
    let nt = f.len();
    let (c, s) = unit_circle(nt);
    let mut out = HarmonicVector::zeros(harmonics);
    out.0[0] = f.iter().sum::<f64>() / nt as f64;
    for k in 1..=harmonics {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, &v) in f.iter().enumerate() {
            let m = (k * j) % nt;
            a += v * c[m];
            b += v * s[m];
        }
        out.set_pair(k, 2.0 * a / nt as f64, 2.0 * b / nt as f64);
    }
    out
}

/// One-shot evaluation using the standard path.
pub fn aft(force: &ForceModel, x: &HarmonicVector, omega: f64, nt: usize) -> Result<AftResult> {
    Aft::new(force, x.harmonics(), nt)?
        .eval_with(x, omega, AftPath::Standard)
        .map(|(r, _)| r)
}

/// One-shot evaluation of a Jenkins or Iwan element using the reversal-only
/// path.
pub fn aft_fast_hysteretic(
    force: &ForceModel,
    x: &HarmonicVector,
    omega: f64,
    nt: usize,
) -> Result<AftResult> {
    if !force.is_hysteretic() {
        return Err(Error::ContractViolation(
            "the reversal-only path applies to Jenkins and Iwan elements".into(),
        ));
    }
    Aft::new(force, x.harmonics(), nt)?
        .eval_with(x, omega, AftPath::Fast)
        .map(|(r, _)| r)
}

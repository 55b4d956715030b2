//! Single-degree-of-freedom oscillator and its nonlinear force laws.
//!
//! The system is `m ẍ + c ẋ + k x + f_nl(x, ẋ) = F cos(ω t)`. Eight force
//! laws are supported; six of them are instantaneous functions of `(x, ẋ)`
//! and two (Jenkins and Iwan) carry a slip history.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default number of continuum sliders in the discretized Iwan element.
pub const DEFAULT_IWAN_SLIDERS: usize = 100;

/// Default time samples per period used by the alternating frequency-time scheme.
pub const DEFAULT_TIME_SAMPLES: usize = 1024;

fn default_sliders() -> usize {
    DEFAULT_IWAN_SLIDERS
}

/// Nonlinear internal force law with its (dimensional) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceModel {
    /// `α x³` with `α > 0`.
    StiffeningDuffing { alpha: f64 },
    /// `η x⁵`.
    QuinticStiffness { eta: f64 },
    /// `α x³` with `α < 0`.
    SofteningDuffing { alpha: f64 },
    /// Conservative softening law following the monotonic loading curve of a
    /// four-parameter Iwan element.
    SofteningIi {
        k_t: f64,
        f_s: f64,
        chi: f64,
        beta: f64,
    },
    /// `max(k_nl x, 0)`.
    UnilateralSpring { k_nl: f64 },
    /// `γ ẋ³`.
    CubicDamping { gamma: f64 },
    /// Elastic-perfectly-plastic stick-slip element.
    Jenkins { k_t: f64, f_s: f64 },
    /// Four-parameter Iwan element: a power-law continuum of Jenkins sliders
    /// plus a Dirac slider at the maximum strength.
    Iwan {
        k_t: f64,
        f_s: f64,
        chi: f64,
        beta: f64,
        #[serde(default = "default_sliders")]
        n_sliders: usize,
    },
}

/// Coarse classification of a force law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    StiffeningDuffing,
    QuinticStiffness,
    SofteningDuffing,
    SofteningIi,
    UnilateralSpring,
    CubicDamping,
    Jenkins,
    Iwan,
}

impl ForceKind {
    pub const ALL: [ForceKind; 8] = [
        ForceKind::StiffeningDuffing,
        ForceKind::QuinticStiffness,
        ForceKind::SofteningDuffing,
        ForceKind::SofteningIi,
        ForceKind::UnilateralSpring,
        ForceKind::CubicDamping,
        ForceKind::Jenkins,
        ForceKind::Iwan,
    ];

    /// Snake-case name used in configuration files.
    pub fn name(self) -> &'static str {
        match self {
            ForceKind::StiffeningDuffing => "stiffening_duffing",
            ForceKind::QuinticStiffness => "quintic_stiffness",
            ForceKind::SofteningDuffing => "softening_duffing",
            ForceKind::SofteningIi => "softening_ii",
            ForceKind::UnilateralSpring => "unilateral_spring",
            ForceKind::CubicDamping => "cubic_damping",
            ForceKind::Jenkins => "jenkins",
            ForceKind::Iwan => "iwan",
        }
    }
}

impl ForceModel {
    pub fn kind(&self) -> ForceKind {
        match self {
            ForceModel::StiffeningDuffing { .. } => ForceKind::StiffeningDuffing,
            ForceModel::QuinticStiffness { .. } => ForceKind::QuinticStiffness,
            ForceModel::SofteningDuffing { .. } => ForceKind::SofteningDuffing,
            ForceModel::SofteningIi { .. } => ForceKind::SofteningIi,
            ForceModel::UnilateralSpring { .. } => ForceKind::UnilateralSpring,
            ForceModel::CubicDamping { .. } => ForceKind::CubicDamping,
            ForceModel::Jenkins { .. } => ForceKind::Jenkins,
            ForceModel::Iwan { .. } => ForceKind::Iwan,
        }
    }

    pub fn is_hysteretic(&self) -> bool {
        matches!(self, ForceModel::Jenkins { .. } | ForceModel::Iwan { .. })
    }

    /// True when `f(-x, -v) = -f(x, v)`.
    pub fn is_odd(&self) -> bool {
        !matches!(self, ForceModel::UnilateralSpring { .. })
    }

    /// True when the force depends on velocity.
    pub fn is_velocity_dependent(&self) -> bool {
        matches!(self, ForceModel::CubicDamping { .. })
    }

    /// True for force laws that do no net work over a cycle.
    pub fn is_conservative(&self) -> bool {
        !matches!(
            self,
            ForceModel::CubicDamping { .. } | ForceModel::Jenkins { .. } | ForceModel::Iwan { .. }
        )
    }

    /// Check the parameter invariants of the force law.
    pub fn validate(&self) -> Result<()> {
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, "must be finite"))
            }
        }
        fn friction(k_t: f64, f_s: f64) -> Result<()> {
            finite("k_t", k_t)?;
            finite("f_s", f_s)?;
            if k_t <= 0.0 {
                return Err(invalid("k_t", format!("must be > 0, got {k_t}")));
            }
            if f_s <= 0.0 {
                return Err(invalid("f_s", format!("must be > 0, got {f_s}")));
            }
            Ok(())
        }
        fn shape(chi: f64, beta: f64) -> Result<()> {
            finite("chi", chi)?;
            finite("beta", beta)?;
            if chi <= -1.0 || chi > 0.0 {
                return Err(invalid("chi", format!("must lie in (-1, 0], got {chi}")));
            }
            if beta < 0.0 {
                return Err(invalid("beta", format!("must be >= 0, got {beta}")));
            }
            Ok(())
        }
        match *self {
            ForceModel::StiffeningDuffing { alpha } => {
                finite("alpha", alpha)?;
                if alpha < 0.0 {
                    return Err(invalid("alpha", "stiffening Duffing needs alpha >= 0"));
                }
            }
            ForceModel::SofteningDuffing { alpha } => {
                finite("alpha", alpha)?;
                if alpha >= 0.0 {
                    return Err(invalid("alpha", "softening Duffing needs alpha < 0"));
                }
            }
            ForceModel::QuinticStiffness { eta } => finite("eta", eta)?,
            ForceModel::CubicDamping { gamma } => finite("gamma", gamma)?,
            ForceModel::UnilateralSpring { k_nl } => {
                finite("k_nl", k_nl)?;
                if k_nl <= 0.0 {
                    return Err(invalid("k_nl", "must be > 0"));
                }
            }
            ForceModel::SofteningIi {
                k_t,
                f_s,
                chi,
                beta,
            } => {
                friction(k_t, f_s)?;
                shape(chi, beta)?;
            }
            ForceModel::Jenkins { k_t, f_s } => friction(k_t, f_s)?,
            ForceModel::Iwan {
                k_t,
                f_s,
                chi,
                beta,
                n_sliders,
            } => {
                friction(k_t, f_s)?;
                shape(chi, beta)?;
                if n_sliders < 2 {
                    return Err(invalid("n_sliders", "must be >= 2"));
                }
            }
        }
        Ok(())
    }

    /// Natural displacement scale of the law: the saturation displacement for
    /// the friction-like laws, 1 otherwise.
    pub fn default_x_ref(&self) -> f64 {
        match *self {
            ForceModel::SofteningIi {
                k_t,
                f_s,
                chi,
                beta,
            }
            | ForceModel::Iwan {
                k_t,
                f_s,
                chi,
                beta,
                ..
            } => phi_max(f_s, k_t, chi, beta).unwrap_or(1.0),
            ForceModel::Jenkins { k_t, f_s } => f_s / k_t,
            _ => 1.0,
        }
    }

    /// Slip force for the saturating laws.
    pub fn slip_force(&self) -> Option<f64> {
        match *self {
            ForceModel::SofteningIi { f_s, .. }
            | ForceModel::Jenkins { f_s, .. }
            | ForceModel::Iwan { f_s, .. } => Some(f_s),
            _ => None,
        }
    }
}

/// Slope of the nonlinear force at `x = 0, ẋ = 0`.
///
/// The unilateral spring has no derivative at the origin; its symmetric
/// part `k_nl / 2` is used instead.
pub fn linearized_stiffness(force: &ForceModel) -> f64 {
    match *force {
        ForceModel::StiffeningDuffing { .. }
        | ForceModel::QuinticStiffness { .. }
        | ForceModel::SofteningDuffing { .. }
        | ForceModel::CubicDamping { .. } => 0.0,
        ForceModel::SofteningIi { k_t, .. }
        | ForceModel::Jenkins { k_t, .. }
        | ForceModel::Iwan { k_t, .. } => k_t,
        ForceModel::UnilateralSpring { k_nl } => 0.5 * k_nl,
    }
}

/// Displacement at which the Iwan loading curve reaches the slip force.
pub fn phi_max(f_s: f64, k_t: f64, chi: f64, beta: f64) -> Result<f64> {
    if chi <= -1.0 {
        return Err(invalid("chi", format!("must be > -1, got {chi}")));
    }
    if k_t <= 0.0 {
        return Err(invalid("k_t", "must be > 0"));
    }
    Ok(f_s * (1.0 + beta) / (k_t * (beta + (chi + 1.0) / (chi + 2.0))))
}

/// Instantaneous force value with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceEval {
    pub f: f64,
    pub df_dx: f64,
    pub df_dv: f64,
}

/// Evaluate one of the six history-free force laws.
///
/// At `x = 0` the unilateral spring reports the right-limit slope `k_nl`.
pub fn eval_instantaneous(force: &ForceModel, x: f64, v: f64) -> Result<ForceEval> {
    let (f, df_dx, df_dv) = match *force {
        ForceModel::StiffeningDuffing { alpha } | ForceModel::SofteningDuffing { alpha } => {
            (alpha * x * x * x, 3.0 * alpha * x * x, 0.0)
        }
        ForceModel::QuinticStiffness { eta } => {
            let x2 = x * x;
            (eta * x2 * x2 * x, 5.0 * eta * x2 * x2, 0.0)
        }
        ForceModel::SofteningIi {
            k_t,
            f_s,
            chi,
            beta,
        } => {
            let (f, df) = softening_ii(k_t, f_s, chi, beta, x);
            (f, df, 0.0)
        }
        ForceModel::UnilateralSpring { k_nl } => {
            if x >= 0.0 {
                (k_nl * x, k_nl, 0.0)
            } else {
                (0.0, 0.0, 0.0)
            }
        }
        ForceModel::CubicDamping { gamma } => (gamma * v * v * v, 0.0, 3.0 * gamma * v * v),
        ForceModel::Jenkins { .. } | ForceModel::Iwan { .. } => {
            return Err(Error::ContractViolation(
                "hysteretic force laws need a slip history; use a hysteretic element".into(),
            ))
        }
    };
    Ok(ForceEval { f, df_dx, df_dv })
}

/// Loading curve of the four-parameter Iwan element, evaluated on `|x|` so
/// the result is exactly odd.
fn softening_ii(k_t: f64, f_s: f64, chi: f64, beta: f64, x: f64) -> (f64, f64) {
    let shape = beta + (chi + 1.0) / (chi + 2.0);
    let pmax = f_s * (1.0 + beta) / (k_t * shape);
    let a = x.abs();
    let s = if x < 0.0 { -1.0 } else { 1.0 };
    if a >= pmax {
        return (s * f_s, 0.0);
    }
    let coeff = (k_t * shape / (f_s * (1.0 + beta))).powf(1.0 + chi) * k_t
        / ((1.0 + beta) * (chi + 2.0));
    let p = a.powf(chi + 1.0);
    let f = k_t * a - coeff * p * a;
    let df = k_t - coeff * (chi + 2.0) * p;
    (s * f, df)
}

/// Discretized slider population of an Iwan element.
///
/// The continuum `(0, φ_max)` is split into equal cells. Each cell becomes
/// one slider whose weight is the exact integral of the density over the
/// cell and whose strength is the density-weighted centroid of the cell, so
/// the total stiffness is `k_t` and the saturated force is `F_s`. The last
/// slider is the Dirac component at `φ_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct IwanSliders {
    pub strengths: Vec<f64>,
    pub weights: Vec<f64>,
}

impl IwanSliders {
    pub fn new(k_t: f64, f_s: f64, chi: f64, beta: f64, n: usize) -> Result<Self> {
        let pmax = phi_max(f_s, k_t, chi, beta)?;
        let shape = beta + (chi + 1.0) / (chi + 2.0);
        let density = f_s * (chi + 1.0) / (pmax.powf(chi + 2.0) * shape);
        let h = pmax / n as f64;
        let mut strengths = Vec::with_capacity(n + 1);
        let mut weights = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = h * i as f64;
            let b = if i + 1 == n { pmax } else { h * (i + 1) as f64 };
            let w = density * (b.powf(chi + 1.0) - a.powf(chi + 1.0)) / (chi + 1.0);
            let moment = density * (b.powf(chi + 2.0) - a.powf(chi + 2.0)) / (chi + 2.0);
            strengths.push(moment / w);
            weights.push(w);
        }
        strengths.push(pmax);
        weights.push(f_s * beta / (pmax * shape));
        Ok(Self { strengths, weights })
    }

    pub fn from_model(force: &ForceModel) -> Result<Self> {
        match *force {
            ForceModel::Iwan {
                k_t,
                f_s,
                chi,
                beta,
                n_sliders,
            } => Self::new(k_t, f_s, chi, beta, n_sliders),
            _ => Err(Error::ContractViolation("not an Iwan element".into())),
        }
    }

    pub fn len(&self) -> usize {
        self.strengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strengths.is_empty()
    }
}

/// Slip history of a hysteretic element.
#[derive(Debug, Clone, PartialEq)]
pub enum HystereticState {
    Jenkins { x0: f64, f0: f64 },
    Iwan { x0: f64, slider_forces: Vec<f64> },
}

impl HystereticState {
    /// Unloaded state anchored at displacement `x0`.
    pub fn unloaded(force: &ForceModel, x0: f64) -> Result<Self> {
        match *force {
            ForceModel::Jenkins { .. } => Ok(HystereticState::Jenkins { x0, f0: 0.0 }),
            ForceModel::Iwan { n_sliders, .. } => Ok(HystereticState::Iwan {
                x0,
                slider_forces: vec![0.0; n_sliders + 1],
            }),
            _ => Err(Error::ContractViolation(
                "history state requested for a non-hysteretic force".into(),
            )),
        }
    }
}

/// Result of advancing a hysteretic element to a new displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct HystereticStep {
    pub force: f64,
    pub state: HystereticState,
    /// Local tangent: `k_t` times the stuck fraction.
    pub tangent: f64,
}

/// A Jenkins or Iwan element ready for repeated evaluation.
#[derive(Debug, Clone)]
pub enum HystereticElement {
    Jenkins { k_t: f64, f_s: f64 },
    Iwan { sliders: IwanSliders },
}

impl HystereticElement {
    pub fn new(force: &ForceModel) -> Result<Self> {
        force.validate()?;
        match *force {
            ForceModel::Jenkins { k_t, f_s } => Ok(HystereticElement::Jenkins { k_t, f_s }),
            ForceModel::Iwan { .. } => Ok(HystereticElement::Iwan {
                sliders: IwanSliders::from_model(force)?,
            }),
            _ => Err(Error::ContractViolation(
                "hysteretic element requested for a non-hysteretic force".into(),
            )),
        }
    }

    pub fn step(&self, x: f64, state: &HystereticState) -> Result<HystereticStep> {
        match (self, state) {
            (HystereticElement::Jenkins { k_t, f_s }, HystereticState::Jenkins { x0, f0 }) => {
                let stuck = k_t * (x - x0) + f0;
                let (force, tangent) = if stuck.abs() < *f_s {
                    (stuck, *k_t)
                } else {
                    (f_s * stuck.signum(), 0.0)
                };
                Ok(HystereticStep {
                    force,
                    state: HystereticState::Jenkins { x0: x, f0: force },
                    tangent,
                })
            }
            (
                HystereticElement::Iwan { sliders },
                HystereticState::Iwan { x0, slider_forces },
            ) => {
                if slider_forces.len() != sliders.len() {
                    return Err(Error::DimensionMismatch {
                        expected: sliders.len(),
                        got: slider_forces.len(),
                    });
                }
                let dx = x - x0;
                let mut next = Vec::with_capacity(sliders.len());
                let mut force = 0.0;
                let mut tangent = 0.0;
                for ((&phi, &w), &f_prev) in sliders
                    .strengths
                    .iter()
                    .zip(&sliders.weights)
                    .zip(slider_forces)
                {
                    let stuck = dx + f_prev;
                    let f = if stuck.abs() < phi {
                        tangent += w;
                        stuck
                    } else {
                        phi * stuck.signum()
                    };
                    force += w * f;
                    next.push(f);
                }
                Ok(HystereticStep {
                    force,
                    state: HystereticState::Iwan {
                        x0: x,
                        slider_forces: next,
                    },
                    tangent,
                })
            }
            _ => Err(Error::ContractViolation(
                "history state does not match the element type".into(),
            )),
        }
    }
}

/// Advance a Jenkins or Iwan element from `state` to displacement `x`.
pub fn eval_hysteretic_step(
    force: &ForceModel,
    x: f64,
    state: &HystereticState,
) -> Result<HystereticStep> {
    HystereticElement::new(force)?.step(x, state)
}

/// Mass-spring-damper carrying one nonlinear force, plus the discretization
/// settings used by the harmonic balance solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Mass [kg].
    pub mass: f64,
    /// Viscous damping [kg/s].
    pub damping: f64,
    /// Linear stiffness [N/m].
    pub stiffness: f64,
    pub force: ForceModel,
    /// Highest retained harmonic.
    pub harmonics: usize,
    /// Time samples per period in the frequency-time transform.
    #[serde(default = "default_time_samples")]
    pub time_samples: usize,
    /// Reference displacement [m] used for nondimensional output.
    pub x_ref: f64,
}

fn default_time_samples() -> usize {
    DEFAULT_TIME_SAMPLES
}

impl SystemConfig {
    pub fn new(mass: f64, damping: f64, stiffness: f64, force: ForceModel, harmonics: usize) -> Self {
        let x_ref = force.default_x_ref();
        Self {
            mass,
            damping,
            stiffness,
            force,
            harmonics,
            time_samples: DEFAULT_TIME_SAMPLES,
            x_ref,
        }
    }

    pub fn with_harmonics(mut self, harmonics: usize) -> Self {
        self.harmonics = harmonics;
        self
    }

    pub fn with_time_samples(mut self, nt: usize) -> Self {
        self.time_samples = nt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass", "must be finite and > 0"));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(invalid("damping", "must be finite and >= 0"));
        }
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0) {
            return Err(invalid("stiffness", "must be finite and >= 0"));
        }
        if self.harmonics < 1 {
            return Err(invalid("harmonics", "must be >= 1"));
        }
        if !self.time_samples.is_power_of_two() {
            return Err(invalid("time_samples", "must be a power of two"));
        }
        if self.time_samples < 4 * self.harmonics {
            return Err(invalid(
                "time_samples",
                format!("must be >= 4 * harmonics = {}", 4 * self.harmonics),
            ));
        }
        if !(self.x_ref.is_finite() && self.x_ref > 0.0) {
            return Err(invalid("x_ref", "must be finite and > 0"));
        }
        self.force.validate()?;
        if self.k_lin() <= 0.0 {
            return Err(invalid("stiffness", "linearized stiffness must be > 0"));
        }
        Ok(())
    }

    /// Linear stiffness plus the slope of the nonlinear force at rest.
    pub fn k_lin(&self) -> f64 {
        self.stiffness + linearized_stiffness(&self.force)
    }

    /// Linearized natural frequency [rad/s].
    pub fn omega0(&self) -> f64 {
        (self.k_lin() / self.mass).sqrt()
    }

    /// Force scale `k_lin x_ref` [N].
    pub fn force_scale(&self) -> f64 {
        self.k_lin() * self.x_ref
    }

    /// Length of the harmonic coefficient vector, `2H + 1`.
    pub fn n_coeffs(&self) -> usize {
        2 * self.harmonics + 1
    }
}

/// Nondimensional description of a system: natural frequency, damping
/// ratio and the scaled parameters of the force law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scales {
    /// `sqrt(k_lin / m)` [rad/s].
    pub omega0: f64,
    /// `c / (2 sqrt(k_lin m))`.
    pub zeta0: f64,
    /// `k / k_lin`.
    pub k_hat: f64,
    /// Force law with every parameter in scaled form (`k̂_t`, `k̂_nl`,
    /// `α̂`, `η̂`, `γ̂`, `F̂_s`); `χ`, `β` and slider counts are unchanged.
    pub force_hat: ForceModel,
    pub mass: f64,
    pub k_lin: f64,
    pub x_ref: f64,
}

/// Compute the nondimensional scales of a system.
pub fn nondimensionalize(sys: &SystemConfig) -> Scales {
    let k_lin = sys.k_lin();
    let m = sys.mass;
    let x_ref = sys.x_ref;
    let omega0 = (k_lin / m).sqrt();
    let force_hat = match sys.force.clone() {
        ForceModel::StiffeningDuffing { alpha } => ForceModel::StiffeningDuffing {
            alpha: alpha * x_ref * x_ref / k_lin,
        },
        ForceModel::SofteningDuffing { alpha } => ForceModel::SofteningDuffing {
            alpha: alpha * x_ref * x_ref / k_lin,
        },
        ForceModel::QuinticStiffness { eta } => ForceModel::QuinticStiffness {
            eta: eta * x_ref.powi(4) / k_lin,
        },
        ForceModel::CubicDamping { gamma } => ForceModel::CubicDamping {
            gamma: gamma * (omega0 * x_ref).powi(3) / (k_lin * x_ref),
        },
        ForceModel::UnilateralSpring { k_nl } => ForceModel::UnilateralSpring { k_nl: k_nl / k_lin },
        ForceModel::SofteningIi {
            k_t,
            f_s,
            chi,
            beta,
        } => ForceModel::SofteningIi {
            k_t: k_t / k_lin,
            f_s: f_s / (k_lin * x_ref),
            chi,
            beta,
        },
        ForceModel::Jenkins { k_t, f_s } => ForceModel::Jenkins {
            k_t: k_t / k_lin,
            f_s: f_s / (k_lin * x_ref),
        },
        ForceModel::Iwan {
            k_t,
            f_s,
            chi,
            beta,
            n_sliders,
        } => ForceModel::Iwan {
            k_t: k_t / k_lin,
            f_s: f_s / (k_lin * x_ref),
            chi,
            beta,
            n_sliders,
        },
    };
    Scales {
        omega0,
        zeta0: sys.damping / (2.0 * (k_lin * m).sqrt()),
        k_hat: sys.stiffness / k_lin,
        force_hat,
        mass: m,
        k_lin,
        x_ref,
    }
}

impl Scales {
    /// Rebuild the dimensional system described by these scales.
    pub fn to_system(&self, harmonics: usize, time_samples: usize) -> SystemConfig {
        let k_lin = self.k_lin;
        let x_ref = self.x_ref;
        let force = match self.force_hat.clone() {
            ForceModel::StiffeningDuffing { alpha } => ForceModel::StiffeningDuffing {
                alpha: alpha * k_lin / (x_ref * x_ref),
            },
            ForceModel::SofteningDuffing { alpha } => ForceModel::SofteningDuffing {
                alpha: alpha * k_lin / (x_ref * x_ref),
            },
            ForceModel::QuinticStiffness { eta } => ForceModel::QuinticStiffness {
                eta: eta * k_lin / x_ref.powi(4),
            },
            ForceModel::CubicDamping { gamma } => ForceModel::CubicDamping {
                gamma: gamma * k_lin * x_ref / (self.omega0 * x_ref).powi(3),
            },
            ForceModel::UnilateralSpring { k_nl } => ForceModel::UnilateralSpring { k_nl: k_nl * k_lin },
            ForceModel::SofteningIi {
                k_t,
                f_s,
                chi,
                beta,
            } => ForceModel::SofteningIi {
                k_t: k_t * k_lin,
                f_s: f_s * k_lin * x_ref,
                chi,
                beta,
            },
            ForceModel::Jenkins { k_t, f_s } => ForceModel::Jenkins {
                k_t: k_t * k_lin,
                f_s: f_s * k_lin * x_ref,
            },
            ForceModel::Iwan {
                k_t,
                f_s,
                chi,
                beta,
                n_sliders,
            } => ForceModel::Iwan {
                k_t: k_t * k_lin,
                f_s: f_s * k_lin * x_ref,
                chi,
                beta,
                n_sliders,
            },
        };
        SystemConfig {
            mass: self.mass,
            damping: 2.0 * self.zeta0 * (k_lin * self.mass).sqrt(),
            stiffness: self.k_hat * k_lin,
            force,
            harmonics,
            time_samples,
            x_ref,
        }
    }

    pub fn force_scale(&self) -> f64 {
        self.k_lin * self.x_ref
    }

    /// `F̂ = F / (k_lin x_ref)`.
    pub fn force_hat(&self, force: f64) -> f64 {
        force / self.force_scale()
    }

    /// `ω̂ = ω / ω0`.
    pub fn frequency_hat(&self, omega: f64) -> f64 {
        omega / self.omega0
    }
}

/// Reference systems with unit mass, `c = 0.01` and unit linearized
/// natural frequency, one per force law.
pub mod presets {
    use super::{ForceKind, ForceModel, SystemConfig, DEFAULT_IWAN_SLIDERS};

    pub fn system(kind: ForceKind, harmonics: usize) -> SystemConfig {
        let (k, force) = match kind {
            ForceKind::StiffeningDuffing => (1.0, ForceModel::StiffeningDuffing { alpha: 1.0 }),
            ForceKind::QuinticStiffness => (1.0, ForceModel::QuinticStiffness { eta: 1.0 }),
            ForceKind::SofteningDuffing => {
                (1.0, ForceModel::SofteningDuffing { alpha: -2.5e-4 })
            }
            ForceKind::SofteningIi => (
                0.75,
                ForceModel::SofteningIi {
                    k_t: 0.25,
                    f_s: 0.2,
                    chi: 0.0,
                    beta: 0.0,
                },
            ),
            ForceKind::UnilateralSpring => (0.75, ForceModel::UnilateralSpring { k_nl: 0.5 }),
            ForceKind::CubicDamping => (1.0, ForceModel::CubicDamping { gamma: 0.03 }),
            ForceKind::Jenkins => (0.75, ForceModel::Jenkins { k_t: 0.25, f_s: 0.2 }),
            ForceKind::Iwan => (
                0.75,
                ForceModel::Iwan {
                    k_t: 0.25,
                    f_s: 0.2,
                    chi: -0.5,
                    beta: 0.0,
                    n_sliders: DEFAULT_IWAN_SLIDERS,
                },
            ),
        };
        SystemConfig::new(1.0, 0.01, k, force, harmonics)
    }

    pub fn by_name(name: &str, harmonics: usize) -> Option<SystemConfig> {
        ForceKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .map(|k| system(k, harmonics))
    }
}

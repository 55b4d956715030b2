//! Force decomposition into broadband excitation and superposition
//! correction, and tracking of an `n:1` superharmonic resonance over force
//! level.
//!
//! The broadband excitation of harmonic `n` is the `n`th harmonic of the
//! force produced by harmonics `0..n` of the motion alone (negated, so it
//! reads as an external load). A resonance of harmonic `n` is taken to occur
//! when the `n`th harmonic of the response is orthogonal to that excitation,
//! i.e. lags it by a quarter period. Appending this condition to the balanced
//! equations and freeing the frequency gives one extra equation and one extra
//! unknown, so the resonance can be followed as the force level varies.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::aft::HarmonicVector;
use crate::continuation::{
    continue_branch, solve_fixed_lambda, ContinuationConfig, Evaluation, SolveStats, Termination,
};
use crate::error::{Error, Result};
use crate::hbm::Hbm;
use crate::model::SystemConfig;

/// Wrap an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Broadband excitation of harmonic `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BroadbandForce {
    pub n: usize,
    pub fc: f64,
    pub fs: f64,
    pub magnitude: f64,
    /// `atan2(Fs, Fc)`.
    pub phase: f64,
}

impl BroadbandForce {
    pub fn new(n: usize, fc: f64, fs: f64) -> Self {
        Self {
            n,
            fc,
            fs,
            magnitude: fc.hypot(fs),
            phase: fs.atan2(fc),
        }
    }
}

/// Phase at which harmonic `n` resonates under this excitation: a quarter
/// period behind it, wrapped to `(−π, π]`.
pub fn expected_phase(b: &BroadbandForce) -> Result<f64> {
    if b.magnitude == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    Ok(wrap_angle(b.phase + PI / 2.0))
}

/// Phase of harmonic `k` of `x`: `atan2(X_ks, X_kc)` wrapped to `(−π, π]`.
pub fn harmonic_phase(x: &HarmonicVector, k: usize) -> Result<f64> {
    let (c, s) = x.pair(k);
    if c == 0.0 && s == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    Ok(wrap_angle(s.atan2(c)))
}

/// Resonance tracker for harmonic `n` of one system.
#[derive(Debug, Clone)]
pub struct Vprnm {
    hbm: Hbm,
    n: usize,
}

/// Broadband excitation with its derivatives.
#[derive(Debug, Clone)]
pub struct BroadbandJacobian {
    pub force: BroadbandForce,
    /// `2 × (2H+1)`; columns of harmonics `≥ n` are zero.
    pub d_dx: DMatrix<f64>,
    /// `∂(Fc, Fs)/∂ω`.
    pub d_domega: DVector<f64>,
}

/// Augmented residual `[R; g]` and its Jacobian with respect to `(X, ω, F)`.
#[derive(Debug, Clone)]
pub struct VprnmResidual {
    pub r: DVector<f64>,
    /// `(2H+2) × (2H+3)`.
    pub jacobian: DMatrix<f64>,
    pub broadband: BroadbandForce,
}

/// Converged resonance point.
#[derive(Debug, Clone, Serialize)]
pub struct VprnmPoint {
    pub force: f64,
    pub omega: f64,
    pub x: HarmonicVector,
    /// Phase of harmonic `n`, wrapped to `(−π, π]`.
    pub phase_n: f64,
    /// Phase of harmonic `n` made continuous along the backbone.
    pub phase_n_unwrapped: f64,
    pub broadband: BroadbandForce,
    /// Orthogonality residual divided by `x_ref`.
    pub constraint: f64,
    /// Balanced-equation residual divided by `k_lin x_ref`.
    pub residual_norm: f64,
}

/// Traced backbone.
#[derive(Debug, Clone)]
pub struct Backbone {
    pub n: usize,
    pub points: Vec<VprnmPoint>,
    pub termination: Termination,
    pub stats: SolveStats,
}

impl Vprnm {
    pub fn new(sys: &SystemConfig, n: usize) -> Result<Self> {
        if n < 2 || n > sys.harmonics {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("need 2 <= n <= H = {}, got {n}", sys.harmonics),
            });
        }
        Ok(Self {
            hbm: Hbm::new(sys)?,
            n,
        })
    }

    pub fn hbm(&self) -> &Hbm {
        &self.hbm
    }

    pub fn harmonic(&self) -> usize {
        self.n
    }

    fn system(&self) -> &SystemConfig {
        self.hbm.system()
    }

    /// Broadband excitation of harmonic `n` and its derivatives.
    pub fn broadband(&self, x: &HarmonicVector, omega: f64) -> Result<BroadbandJacobian> {
        broadband_with(&self.hbm, x, omega, self.n)
    }

    /// Augmented residual. Fails when the broadband excitation vanishes.
    pub fn residual(&self, x: &HarmonicVector, omega: f64, force: f64) -> Result<VprnmResidual> {
        let n = self.n;
        let nc = x.len();
        let hr = self.hbm.residual(x, omega, force)?;
        let bb = self.broadband(x, omega)?;
        let scale = self.system().force_scale() * (1.0 + x.norm() / self.system().x_ref);
        if bb.force.magnitude <= 1e-13 * scale {
            return Err(Error::VanishingBroadband { harmonic: n });
        }
        let u = DVector::from_vec(vec![bb.force.fc, bb.force.fs]);
        let mag = bb.force.magnitude;
        let uhat = &u / mag;
        let (xc, xs) = x.pair(n);
        let xn = DVector::from_vec(vec![xc, xs]);
        let g = uhat.dot(&xn);
        // ∂g/∂u = Xnᵀ (I − ûûᵀ) / |u|
        let dg_du = (&xn - &uhat * uhat.dot(&xn)) / mag;

        let mut r = DVector::zeros(nc + 1);
        r.rows_mut(0, nc).copy_from(&hr.r);
        r[nc] = g;
        let mut j = DMatrix::zeros(nc + 1, nc + 2);
        j.view_mut((0, 0), (nc, nc)).copy_from(&hr.dr_dx);
        j.view_mut((0, nc), (nc, 1)).copy_from(&hr.dr_domega);
        j.view_mut((0, nc + 1), (nc, 1)).copy_from(&hr.dr_dforce);
        let dg_dx = bb.d_dx.transpose() * &dg_du;
        for c in 0..nc {
            j[(nc, c)] = dg_dx[c];
        }
        j[(nc, 2 * n - 1)] += uhat[0];
        j[(nc, 2 * n)] += uhat[1];
        j[(nc, nc)] = dg_du.dot(&bb.d_domega);
        Ok(VprnmResidual {
            r,
            jacobian: j,
            broadband: bb.force,
        })
    }

    fn scaled_closure(
        &self,
    ) -> impl FnMut(&DVector<f64>) -> Result<Evaluation> + '_ {
        let sys = self.system();
        let (xr, w0, fscale) = (sys.x_ref, sys.omega0(), sys.force_scale());
        let nc = sys.n_coeffs();
        move |y: &DVector<f64>| {
            let x = HarmonicVector::from(y.rows(0, nc) * xr);
            let omega = y[nc] * w0;
            let force = y[nc + 1].exp() * fscale;
            let res = self.residual(&x, omega, force)?;
            let mut r = res.r;
            let mut j = res.jacobian;
            for i in 0..nc {
                r[i] /= fscale;
            }
            r[nc] /= xr;
            let col_scale = |c: usize| {
                if c < nc {
                    xr
                } else if c == nc {
                    w0
                } else {
                    force
                }
            };
            for row in 0..=nc {
                let rs = if row < nc { fscale } else { xr };
                for c in 0..nc + 2 {
                    j[(row, c)] *= col_scale(c) / rs;
                }
            }
            Ok((r, j))
        }
    }

    fn pack(&self, x: &HarmonicVector, omega: f64, force: f64) -> DVector<f64> {
        let sys = self.system();
        let nc = sys.n_coeffs();
        let mut y = DVector::zeros(nc + 2);
        y.rows_mut(0, nc).copy_from(&(x.as_vector() / sys.x_ref));
        y[nc] = omega / sys.omega0();
        y[nc + 1] = (force / sys.force_scale()).ln();
        y
    }

    fn unpack(&self, y: &DVector<f64>) -> (HarmonicVector, f64, f64) {
        let sys = self.system();
        let nc = sys.n_coeffs();
        (
            HarmonicVector::from(y.rows(0, nc) * sys.x_ref),
            y[nc] * sys.omega0(),
            y[nc + 1].exp() * sys.force_scale(),
        )
    }

    /// Solve the augmented system at fixed force from a guess of `(X, ω)`.
    pub fn solve_point(
        &self,
        x: &HarmonicVector,
        omega: f64,
        force: f64,
        tol: f64,
        stats: &mut SolveStats,
    ) -> Result<VprnmPoint> {
        if !(force > 0.0) {
            return Err(Error::InvalidParameter {
                name: "force",
                reason: "resonance tracking needs a positive force level".into(),
            });
        }
        let y0 = self.pack(x, omega, force);
        let mut f = self.scaled_closure();
        let (y, _) = solve_fixed_lambda(&mut f, &y0, tol, 40, stats)?;
        drop(f);
        let (x, omega, force) = self.unpack(&y);
        self.point(x, omega, force)
    }

    fn point(&self, x: HarmonicVector, omega: f64, force: f64) -> Result<VprnmPoint> {
        let res = self.residual(&x, omega, force)?;
        let sys = self.system();
        let nc = sys.n_coeffs();
        let phase_n = harmonic_phase(&x, self.n).unwrap_or(f64::NAN);
        Ok(VprnmPoint {
            force,
            omega,
            phase_n,
            phase_n_unwrapped: phase_n,
            broadband: res.broadband,
            constraint: res.r[nc] / sys.x_ref,
            residual_norm: res.r.rows(0, nc).amax() / sys.force_scale(),
            x,
        })
    }

    /// Converge a first resonance point at `force`, starting from the
    /// linearized response at `ω0/n`, then from a frequency scan if needed.
    pub fn seed(&self, force: f64, tol: f64, stats: &mut SolveStats) -> Result<VprnmPoint> {
        let sys = self.system();
        let w_guess = sys.omega0() / self.n as f64;
        let x_lin = self.hbm.linear_response(w_guess, force);
        let first = self
            .hbm
            .solve(&x_lin, w_guess, force, Default::default())
            .map(|s| {
                stats.newton_iterations += s.iterations;
                s.x
            });
        if let Ok(x) = &first {
            if let Ok(p) = self.solve_point(x, w_guess, force, tol, stats) {
                if self.plausible(&p) {
                    return Ok(p);
                }
            }
        }
        // Scan frequency for a sign change of the orthogonality residual.
        let steps = 60;
        let (lo, hi) = (0.7 * w_guess, 1.3 * w_guess);
        let mut x = self.hbm.linear_response(lo, force);
        let mut prev: Option<(f64, HarmonicVector, f64)> = None;
        let mut last_err = None;
        for i in 0..=steps {
            let w = lo + (hi - lo) * i as f64 / steps as f64;
            let sol = match self.hbm.solve(&x, w, force, Default::default()) {
                Ok(s) => s,
                Err(e) => {
                    last_err = Some(e);
                    x = self.hbm.linear_response(w, force);
                    prev = None;
                    continue;
                }
            };
            stats.newton_iterations += sol.iterations;
            x = sol.x.clone();
            let g = match self.residual(&sol.x, w, force) {
                Ok(r) => r.r[sys.n_coeffs()],
                Err(e) => {
                    last_err = Some(e);
                    prev = None;
                    continue;
                }
            };
            if let Some((wp, xp, gp)) = &prev {
                if gp.signum() != g.signum() {
                    let (wb, xb) = self.bisect((*wp, xp.clone(), *gp), (w, sol.x.clone(), g), force, stats);
                    if let Ok(p) = self.solve_point(&xb, wb, force, tol, stats) {
                        if self.plausible(&p) {
                            return Ok(p);
                        }
                    }
                }
            }
            prev = Some((w, sol.x, g));
        }
        Err(Error::SeedFailure(format!(
            "no {}:1 resonance found near ω0/{} at force {force:.6e}{}; try another force range or a wider frequency bracket",
            self.n,
            self.n,
            last_err.map(|e| format!(" (last error: {e})")).unwrap_or_default()
        )))
    }

    /// Narrow a sign change of the orthogonality residual along the forced
    /// response, returning the state on the side with the smaller residual.
    fn bisect(
        &self,
        mut a: (f64, HarmonicVector, f64),
        mut b: (f64, HarmonicVector, f64),
        force: f64,
        stats: &mut SolveStats,
    ) -> (f64, HarmonicVector) {
        let nc = self.system().n_coeffs();
        for _ in 0..40 {
            if (b.0 - a.0).abs() <= 1e-10 * b.0.abs() {
                break;
            }
            let w = 0.5 * (a.0 + b.0);
            let near = if a.2.abs() < b.2.abs() { &a.1 } else { &b.1 };
            let Ok(sol) = self.hbm.solve(near, w, force, Default::default()) else {
                break;
            };
            stats.newton_iterations += sol.iterations;
            let Ok(r) = self.residual(&sol.x, w, force) else {
                break;
            };
            let g = r.r[nc];
            if g.signum() == a.2.signum() {
                a = (w, sol.x, g);
            } else {
                b = (w, sol.x, g);
            }
        }
        if a.2.abs() < b.2.abs() {
            (a.0, a.1)
        } else {
            (b.0, b.1)
        }
    }

    fn plausible(&self, p: &VprnmPoint) -> bool {
        let w_guess = self.system().omega0() / self.n as f64;
        p.omega > 0.3 * w_guess && p.omega < 3.0 * w_guess
    }

    /// Trace the resonance of harmonic `n` over `force_range` (dimensional).
    ///
    /// The continuation parameter is `ln(F / (k_lin x_ref))`; the
    /// `lambda_range` of `cfg` is overwritten accordingly.
    pub fn backbone(&self, force_range: (f64, f64), cfg: &ContinuationConfig) -> Result<Backbone> {
        let (f_lo, f_hi) = force_range;
        if !(f_lo > 0.0 && f_lo <= f_hi) {
            return Err(Error::InvalidParameter {
                name: "force_range",
                reason: format!("need 0 < F_lo <= F_hi, got [{f_lo}, {f_hi}]"),
            });
        }
        let sys = self.system().clone();
        let mut stats = SolveStats::default();
        let nc = sys.n_coeffs();
        let fscale = sys.force_scale();

        // Start in the weakly nonlinear regime when the low end is not already there.
        let w_guess = sys.omega0() / self.n as f64;
        let lin_amp = self.hbm.linear_response(w_guess, f_lo).magnitude(1);
        let f_small = if lin_amp > 0.05 * sys.x_ref {
            f_lo * 0.05 * sys.x_ref / lin_amp
        } else {
            f_lo
        };
        let mut start = match self.seed(f_small, cfg.tol, &mut stats) {
            Ok(p) => p,
            Err(_) if f_small < f_lo => self.seed(f_lo, cfg.tol, &mut stats)?,
            Err(e) => return Err(e),
        };

        let mut bcfg = cfg.clone();
        bcfg.relative_coords = nc;
        let ln = |f: f64| (f / fscale).ln();
        let mut f = self.scaled_closure();
        if start.force < f_lo {
            bcfg.lambda_range = (ln(start.force), ln(f_lo));
            let y0 = self.pack(&start.x, start.omega, start.force);
            let lead = continue_branch(&mut f, &y0, &bcfg)?;
            stats += lead.stats;
            if lead.termination != Termination::Boundary {
                return Err(Error::SeedFailure(format!(
                    "could not continue from the seed force {:.6e} to {f_lo:.6e}",
                    start.force
                )));
            }
            let last = lead.points.last().expect("branch has a start point");
            let (x, w, fl) = self.unpack(&last.y);
            drop(f);
            start = self.point(x, w, fl)?;
            f = self.scaled_closure();
        }
        bcfg.lambda_range = (ln(f_lo), ln(f_hi));
        let y0 = self.pack(&start.x, start.omega, start.force);
        let branch = continue_branch(&mut f, &y0, &bcfg)?;
        stats += branch.stats;
        drop(f);
        let mut points = Vec::with_capacity(branch.points.len());
        for bp in &branch.points {
            let (x, w, force) = self.unpack(&bp.y);
            points.push(self.point(x, w, force)?);
        }
        unwrap_phases(&mut points);
        Ok(Backbone {
            n: self.n,
            points,
            termination: branch.termination,
            stats,
        })
    }
}

fn unwrap_phases(points: &mut [VprnmPoint]) {
    let mut prev: Option<f64> = None;
    for p in points.iter_mut() {
        if !p.phase_n.is_finite() {
            continue;
        }
        let v = match prev {
            None => p.phase_n,
            Some(q) => q + wrap_angle(p.phase_n - q),
        };
        p.phase_n_unwrapped = v;
        prev = Some(v);
    }
}

fn broadband_with(hbm: &Hbm, x: &HarmonicVector, omega: f64, n: usize) -> Result<BroadbandJacobian> {
    if n < 1 || n > hbm.harmonics() {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need 1 <= n <= H = {}, got {n}", hbm.harmonics()),
        });
    }
    let trunc = x.truncated_below(n);
    let r = hbm.aft().eval(&trunc, omega)?;
    let (ic, is) = (2 * n - 1, 2 * n);
    let nc = x.len();
    let mut d_dx = DMatrix::zeros(2, nc);
    for c in 0..(2 * n - 1) {
        d_dx[(0, c)] = -r.df_dx[(ic, c)];
        d_dx[(1, c)] = -r.df_dx[(is, c)];
    }
    Ok(BroadbandJacobian {
        force: BroadbandForce::new(n, -r.f_nl[ic], -r.f_nl[is]),
        d_dx,
        d_domega: DVector::from_vec(vec![-r.df_domega[ic], -r.df_domega[is]]),
    })
}

/// Broadband excitation of harmonic `n` (`1 ≤ n ≤ H`).
pub fn broadband_force(
    sys: &SystemConfig,
    x: &HarmonicVector,
    omega: f64,
    n: usize,
) -> Result<BroadbandForce> {
    broadband_with(&Hbm::new(sys)?, x, omega, n).map(|b| b.force)
}

/// Harmonic `k` of `−[f(x) − f(x_n) − f(x_{0:n−1})]`: the part of the force
/// not explained by evaluating the law on the two motion subsets separately.
pub fn superposition_force(
    sys: &SystemConfig,
    x: &HarmonicVector,
    omega: f64,
    k: usize,
    n: usize,
) -> Result<(f64, f64)> {
    let hbm = Hbm::new(sys)?;
    if k > hbm.harmonics() || n > hbm.harmonics() || n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "harmonic index beyond the retained set".into(),
        });
    }
    let aft = hbm.aft();
    let full = aft.coefficients(x, omega)?;
    let only = aft.coefficients(&x.only_harmonic(n), omega)?;
    let low = aft.coefficients(&x.truncated_below(n), omega)?;
    let (a, b, c) = (full.pair(k), only.pair(k), low.pair(k));
    Ok((-(a.0 - b.0 - c.0), -(a.1 - b.1 - c.1)))
}

/// Largest deviation of `F_n{f(x)} − (F_n{f(x_n)} − F_broad − F_sup)` from
/// zero over both components.
pub fn decomposition_check(
    sys: &SystemConfig,
    x: &HarmonicVector,
    omega: f64,
    n: usize,
) -> Result<f64> {
    let hbm = Hbm::new(sys)?;
    let aft = hbm.aft();
    let full = aft.coefficients(x, omega)?.pair(n);
    let only = aft.coefficients(&x.only_harmonic(n), omega)?.pair(n);
    let broad = broadband_with(&hbm, x, omega, n)?.force;
    let sup = superposition_force(sys, x, omega, n, n)?;
    let dc = full.0 - (only.0 - broad.fc - sup.0);
    let ds = full.1 - (only.1 - broad.fs - sup.1);
    Ok(dc.abs().max(ds.abs()))
}

/// Augmented residual at one state.
pub fn vprnm_residual(
    sys: &SystemConfig,
    x: &HarmonicVector,
    omega: f64,
    force: f64,
    n: usize,
) -> Result<VprnmResidual> {
    Vprnm::new(sys, n)?.residual(x, omega, force)
}

/// Trace the `n:1` resonance over a dimensional force range.
pub fn vprnm_backbone(
    sys: &SystemConfig,
    n: usize,
    force_range: (f64, f64),
    cfg: &ContinuationConfig,
) -> Result<Backbone> {
    Vprnm::new(sys, n)?.backbone(force_range, cfg)
}

#[cfg(test)]
mod tests;

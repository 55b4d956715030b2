//! Harmonic balance residual and a damped Newton solver for one
//! (frequency, force level) point.

use nalgebra::{DMatrix, DVector};

use crate::aft::{Aft, HarmonicVector};
use crate::continuation::{continue_branch, continue_branch_along, ContinuationConfig, SolveStats, Termination};
use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// Default convergence tolerance on `‖R‖∞ / (k_lin x_ref)`.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default Newton iteration limit.
pub const DEFAULT_MAX_ITER: usize = 30;
const MAX_HALVINGS: usize = 8;

/// Linear dynamic stiffness of harmonic `n`: `[k]` for `n = 0`, otherwise
/// `[[k − (nω)²m, nωc], [−nωc, k − (nω)²m]]` acting on `(X_nc, X_ns)`.
pub fn dynamic_stiffness_block(sys: &SystemConfig, omega: f64, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::from_element(1, 1, sys.stiffness);
    }
    let nw = n as f64 * omega;
    let diag = sys.stiffness - nw * nw * sys.mass;
    let off = nw * sys.damping;
    DMatrix::from_row_slice(2, 2, &[diag, off, -off, diag])
}

/// Residual of the balanced equations with its derivatives.
#[derive(Debug, Clone)]
pub struct HbmResidual {
    pub r: DVector<f64>,
    pub dr_dx: DMatrix<f64>,
    pub dr_domega: DVector<f64>,
    pub dr_dforce: DVector<f64>,
}

/// Converged point.
#[derive(Debug, Clone)]
pub struct HbmSolution {
    pub x: HarmonicVector,
    /// `‖R‖∞ / (k_lin x_ref)` at `x`.
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A system paired with its force evaluator.
#[derive(Debug, Clone)]
pub struct Hbm {
    sys: SystemConfig,
    aft: Aft,
}

impl Hbm {
    pub fn new(sys: &SystemConfig) -> Result<Self> {
        sys.validate()?;
        Ok(Self {
            sys: sys.clone(),
            aft: Aft::for_system(sys)?,
        })
    }

    pub fn system(&self) -> &SystemConfig {
        &self.sys
    }

    pub fn aft(&self) -> &Aft {
        &self.aft
    }

    pub fn harmonics(&self) -> usize {
        self.sys.harmonics
    }

    pub fn n_coeffs(&self) -> usize {
        self.sys.n_coeffs()
    }

    /// `E(ω) X`, the linear part of the residual.
    pub fn linear_force(&self, x: &HarmonicVector, omega: f64) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        out[0] = self.sys.stiffness * x[0];
        for n in 1..=self.harmonics() {
            let b = dynamic_stiffness_block(&self.sys, omega, n);
            let (c, s) = x.pair(n);
            out[2 * n - 1] = b[(0, 0)] * c + b[(0, 1)] * s;
            out[2 * n] = b[(1, 0)] * c + b[(1, 1)] * s;
        }
        out
    }

    pub fn residual(&self, x: &HarmonicVector, omega: f64, force: f64) -> Result<HbmResidual> {
        let nl = self.aft.eval(x, omega)?;
        let n = self.n_coeffs();
        let mut r = self.linear_force(x, omega) + nl.f_nl.as_vector();
        r[1] -= force;
        let mut dr_dx = nl.df_dx;
        let mut dr_domega = nl.df_domega;
        dr_dx[(0, 0)] += self.sys.stiffness;
        let (m, c) = (self.sys.mass, self.sys.damping);
        for h in 1..=self.harmonics() {
            let b = dynamic_stiffness_block(&self.sys, omega, h);
            let (ic, is) = (2 * h - 1, 2 * h);
            dr_dx[(ic, ic)] += b[(0, 0)];
            dr_dx[(ic, is)] += b[(0, 1)];
            dr_dx[(is, ic)] += b[(1, 0)];
            dr_dx[(is, is)] += b[(1, 1)];
            let hf = h as f64;
            let (xc, xs) = x.pair(h);
            let d_diag = -2.0 * hf * hf * omega * m;
            let d_off = hf * c;
            dr_domega[ic] += d_diag * xc + d_off * xs;
            dr_domega[is] += -d_off * xc + d_diag * xs;
        }
        let mut dr_dforce = DVector::zeros(n);
        dr_dforce[1] = -1.0;
        Ok(HbmResidual {
            r,
            dr_dx,
            dr_domega,
            dr_dforce,
        })
    }

    /// Scaled residual norm used for convergence checks.
    pub fn norm(&self, r: &DVector<f64>) -> f64 {
        r.amax() / self.sys.force_scale()
    }

    /// Response of the linearized system (nonlinear force replaced by its
    /// slope at rest) to `F cos ωt`.
    pub fn linear_response(&self, omega: f64, force: f64) -> HarmonicVector {
        let k = self.sys.k_lin();
        let diag = k - omega * omega * self.sys.mass;
        let off = omega * self.sys.damping;
        let det = diag * diag + off * off;
        let mut x = HarmonicVector::zeros(self.harmonics());
        x.set_pair(1, force * diag / det, force * off / det);
        x
    }

    /// Damped Newton iteration at fixed `(ω, F)`.
    pub fn solve(
        &self,
        guess: &HarmonicVector,
        omega: f64,
        force: f64,
        opts: NewtonOptions,
    ) -> Result<HbmSolution> {
        if !guess.is_finite() || !omega.is_finite() || !force.is_finite() {
            return Err(Error::NonFiniteInput("initial guess, frequency or force".into()));
        }
        if guess.len() != self.n_coeffs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_coeffs(),
                got: guess.len(),
            });
        }
        let mut x = guess.clone();
        let mut res = self.residual(&x, omega, force)?;
        let mut norm = self.norm(&res.r);
        let mut best = (x.clone(), norm);
        for iter in 0..=opts.max_iter {
            if norm <= opts.tol {
                return Ok(HbmSolution {
                    x,
                    residual_norm: norm,
                    iterations: iter,
                });
            }
            if iter == opts.max_iter {
                break;
            }
            let step = res
                .dr_dx
                .clone()
                .lu()
                .solve(&(-&res.r))
                .ok_or(Error::SingularJacobian)?;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial = HarmonicVector::from(x.as_vector() + &step * scale);
                if let Ok(tr) = self.residual(&trial, omega, force) {
                    let tn = self.norm(&tr.r);
                    if tn.is_finite() && (tn < norm || accepted.is_none()) {
                        let better = tn < norm;
                        accepted = Some((trial, tr, tn));
                        if better {
                            break;
                        }
                    }
                }
                scale *= 0.5;
            }
            let (nx, nr, nn) = accepted.ok_or_else(|| Error::NonConvergence {
                iterations: iter + 1,
                residual_norm: best.1,
                best: Box::new(best.0.clone()),
            })?;
            x = nx;
            res = nr;
            norm = nn;
            if norm < best.1 {
                best = (x.clone(), norm);
            }
        }
        Err(Error::NonConvergence {
            iterations: opts.max_iter,
            residual_norm: best.1,
            best: Box::new(best.0),
        })
    }
}

/// Residual at one point.
pub fn hbm_residual(
    sys: &SystemConfig,
    x: &HarmonicVector,
    omega: f64,
    force: f64,
) -> Result<HbmResidual> {
    Hbm::new(sys)?.residual(x, omega, force)
}

/// Solve the balanced equations at one point.
pub fn solve_hbm(
    sys: &SystemConfig,
    guess: &HarmonicVector,
    omega: f64,
    force: f64,
    tol: f64,
    max_iter: usize,
) -> Result<HbmSolution> {
    Hbm::new(sys)?.solve(guess, omega, force, NewtonOptions { tol, max_iter })
}

/// One point of a frequency response curve.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FrcPoint {
    pub omega: f64,
    pub x: HarmonicVector,
    /// `‖R‖∞ / (k_lin x_ref)`.
    pub residual_norm: f64,
    /// Arclength from the start in scaled coordinates.
    pub arc: f64,
}

/// Frequency response curve at one force level.
#[derive(Debug, Clone)]
pub struct Frc {
    pub force: f64,
    pub points: Vec<FrcPoint>,
    pub termination: Termination,
    pub stats: SolveStats,
}

/// Trace the forced response at `force` over `omega_range` (dimensional),
/// starting from the linearized response at the lower end.
///
/// Coordinates are `X / x_ref` and `ω / ω0`; the `lambda_range` of `cfg` is
/// overwritten accordingly.
pub fn trace_frc(
    sys: &SystemConfig,
    force: f64,
    omega_range: (f64, f64),
    cfg: &ContinuationConfig,
) -> Result<Frc> {
    let hbm = Hbm::new(sys)?;
    let (w_lo, w_hi) = omega_range;
    if !(w_lo > 0.0 && w_lo <= w_hi) {
        return Err(Error::InvalidParameter {
            name: "omega_range",
            reason: format!("need 0 < ω_lo <= ω_hi, got [{w_lo}, {w_hi}]"),
        });
    }
    let (xr, w0, fs) = (sys.x_ref, sys.omega0(), sys.force_scale());
    let nc = sys.n_coeffs();
    let mut stats = SolveStats::default();
    let opts = NewtonOptions { tol: cfg.tol, max_iter: 4 * DEFAULT_MAX_ITER };
    let seed = match hbm.solve(&hbm.linear_response(w_lo, force), w_lo, force, opts) {
        Ok(s) => {
            stats.newton_iterations += s.iterations;
            s.x
        }
        Err(direct) => ramp_force(&hbm, w_lo, force, cfg, &mut stats).map_err(|e| {
            Error::SeedFailure(format!(
                "no forced response at ω = {w_lo:.6e}, F = {force:.6e} ({direct}; force ramp: {e}); try a lower start frequency"
            ))
        })?,
    };
    let mut f = |y: &DVector<f64>| {
        let x = HarmonicVector::from(y.rows(0, nc) * xr);
        let omega = y[nc] * w0;
        let res = hbm.residual(&x, omega, force)?;
        let mut j = DMatrix::zeros(nc, nc + 1);
        j.view_mut((0, 0), (nc, nc)).copy_from(&(res.dr_dx * (xr / fs)));
        j.view_mut((0, nc), (nc, 1)).copy_from(&(res.dr_domega * (w0 / fs)));
        Ok((res.r / fs, j))
    };
    let mut y0 = DVector::zeros(nc + 1);
    y0.rows_mut(0, nc).copy_from(&(seed.as_vector() / xr));
    y0[nc] = w_lo / w0;
    let mut bcfg = cfg.clone();
    bcfg.lambda_range = (w_lo / w0, w_hi / w0);
    bcfg.relative_coords = nc;
    let mut branch = continue_branch(&mut f, &y0, &bcfg)?;
    let returned = |b: &crate::continuation::Branch| {
        b.points.len() > 1 && b.termination == Termination::Boundary && b.points[b.points.len() - 1].y[nc] == bcfg.lambda_range.0
    };
    if returned(&branch) {
        let last = branch.points[branch.points.len() - 1].clone();
        let mut ecfg = bcfg.clone();
        ecfg.lambda_range.0 *= 0.5;
        let more = continue_branch_along(&mut f, &last.y, Some(&last.tangent), &ecfg)?;
        branch.stats += more.stats;
        branch.termination = more.termination;
        branch.points.extend(more.points.into_iter().skip(1).map(|mut p| {
            p.arc += last.arc;
            p
        }));
    }
    stats += branch.stats;
    let points = branch
        .points
        .iter()
        .map(|p| FrcPoint {
            omega: p.y[nc] * w0,
            x: HarmonicVector::from(p.y.rows(0, nc) * xr),
            residual_norm: p.residual_norm,
            arc: p.arc,
        })
        .collect();
    Ok(Frc {
        force,
        points,
        termination: branch.termination,
        stats,
    })
}

/// Response at `(omega, force)` continued in `ln F` from a level where the
/// direct solve converges.
fn ramp_force(
    hbm: &Hbm,
    omega: f64,
    force: f64,
    cfg: &ContinuationConfig,
    stats: &mut SolveStats,
) -> Result<HarmonicVector> {
    let sys = &hbm.sys;
    let (xr, fs) = (sys.x_ref, sys.force_scale());
    let nc = sys.n_coeffs();
    let opts = NewtonOptions { tol: cfg.tol, max_iter: 4 * DEFAULT_MAX_ITER };
    let mut start = None;
    let mut f0 = force;
    for _ in 0..40 {
        f0 *= 0.5;
        if let Ok(s) = hbm.solve(&hbm.linear_response(omega, f0), omega, f0, opts) {
            stats.newton_iterations += s.iterations;
            start = Some(s.x);
            break;
        }
    }
    let start = start.ok_or_else(|| Error::SeedFailure("no convergence at any reduced force".into()))?;
    let mut f = |y: &DVector<f64>| {
        let x = HarmonicVector::from(y.rows(0, nc) * xr);
        let level = y[nc].exp() * fs;
        let res = hbm.residual(&x, omega, level)?;
        let mut j = DMatrix::zeros(nc, nc + 1);
        j.view_mut((0, 0), (nc, nc)).copy_from(&(res.dr_dx * (xr / fs)));
        j.view_mut((0, nc), (nc, 1)).copy_from(&(res.dr_dforce * level / fs));
        Ok((res.r / fs, j))
    };
    let mut y0 = DVector::zeros(nc + 1);
    y0.rows_mut(0, nc).copy_from(&(start.as_vector() / xr));
    y0[nc] = (f0 / fs).ln();
    let mut bcfg = cfg.clone();
    bcfg.lambda_range = (y0[nc], (force / fs).ln());
    bcfg.relative_coords = nc;
    let branch = continue_branch(&mut f, &y0, &bcfg)?;
    *stats += branch.stats;
    match branch.termination {
        Termination::Boundary if branch.points[branch.points.len() - 1].y[nc] == bcfg.lambda_range.1 => {
            let last = &branch.points[branch.points.len() - 1];
            Ok(HarmonicVector::from(last.y.rows(0, nc) * xr))
        }
        other => Err(Error::SeedFailure(format!("force continuation stopped early: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, ForceKind, ForceModel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// A system whose nonlinear force is identically zero.
    fn linear(c: f64) -> SystemConfig {
        let mut s = SystemConfig::new(1.0, c, 1.0, ForceModel::StiffeningDuffing { alpha: 0.0 }, 3);
        s.time_samples = 64;
        s
    }

    #[test]
    fn stiffness_block_examples() {
        let b = dynamic_stiffness_block(&linear(0.0), 1.0, 1);
        assert!(b.iter().all(|&v| v == 0.0));
        let b = dynamic_stiffness_block(&linear(0.01), 1.0 / 3.0, 3);
        assert!(b[(0, 0)].abs() < 1e-15 && b[(1, 1)].abs() < 1e-15);
        assert_relative_eq!(b[(0, 1)], 0.01, epsilon = 1e-15);
        assert_relative_eq!(b[(1, 0)], -0.01, epsilon = 1e-15);
        let b = dynamic_stiffness_block(&linear(0.3), 2.0, 0);
        assert_eq!(b.shape(), (1, 1));
        assert_eq!(b[(0, 0)], 1.0);
    }

    fn closed_form(sys: &SystemConfig, omega: f64, force: f64) -> (f64, f64) {
        // Complex amplitude F / (k − mω² + icω); x = Re(A e^{iωt}).
        let re = sys.stiffness - sys.mass * omega * omega;
        let im = sys.damping * omega;
        let det = re * re + im * im;
        (force * re / det, force * im / det)
    }

    #[test]
    fn linear_limit_matches_closed_form() {
        let sys = linear(0.01);
        let hbm = Hbm::new(&sys).unwrap();
        for i in 0..40 {
            let omega = 0.1 + 1.9 * i as f64 / 39.0;
            let sol = hbm.solve(&HarmonicVector::zeros(3), omega, 1.0, NewtonOptions::default()).unwrap();
            let (c, s) = closed_form(&sys, omega, 1.0);
            assert_relative_eq!(sol.x[1], c, max_relative = 1e-10);
            assert_relative_eq!(sol.x[2], s, max_relative = 1e-10);
            assert_relative_eq!(sol.x.magnitude(1), c.hypot(s), max_relative = 1e-10);
        }
    }

    #[test]
    fn trivial_equilibrium_for_every_model() {
        for kind in [
            ForceKind::StiffeningDuffing,
            ForceKind::QuinticStiffness,
            ForceKind::SofteningDuffing,
            ForceKind::SofteningIi,
            ForceKind::UnilateralSpring,
            ForceKind::CubicDamping,
            ForceKind::Jenkins,
            ForceKind::Iwan,
        ] {
            let sys = presets::system(kind, 3).with_time_samples(128);
            let r = hbm_residual(&sys, &HarmonicVector::zeros(3), 0.7, 0.0).unwrap();
            assert!(r.r.iter().all(|&v| v == 0.0), "{kind:?}");
        }
    }

    #[test]
    fn duffing_below_resonance_converges_quickly() {
        let sys = presets::system(ForceKind::StiffeningDuffing, 5).with_time_samples(256);
        let sol = solve_hbm(&sys, &HarmonicVector::zeros(5), 0.15, 1.0, 1e-9, 30).unwrap();
        assert!(sol.iterations <= 10, "{}", sol.iterations);
        let r = hbm_residual(&sys, &sol.x, 0.15, 1.0).unwrap();
        assert!(r.r.amax() <= 1e-9);
    }

    #[test]
    fn nan_guess_rejected() {
        let sys = linear(0.01);
        let mut g = HarmonicVector::zeros(3);
        g[1] = f64::NAN;
        assert!(matches!(
            solve_hbm(&sys, &g, 1.0, 1.0, 1e-9, 30),
            Err(Error::NonFiniteInput(_))
        ));
    }

    #[test]
    fn iteration_limit_reports_best_iterate() {
        let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
        let err = solve_hbm(&sys, &HarmonicVector::zeros(3), 1.5, 10.0, 1e-9, 1).unwrap_err();
        match err {
            Error::NonConvergence { best, residual_norm, .. } => {
                assert_eq!(best.len(), 7);
                assert!(residual_norm.is_finite());
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn linear_frc_matches_closed_form() {
        let sys = linear(0.02);
        let cfg = ContinuationConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let frc = trace_frc(&sys, 0.5, (0.1, 2.0), &cfg).unwrap();
        assert_eq!(frc.termination, Termination::Boundary);
        assert!(frc.points.len() > 10);
        for p in &frc.points {
            let (c, s) = closed_form(&sys, p.omega, 0.5);
            let err = (p.x[1] - c).abs().max((p.x[2] - s).abs()) / c.hypot(s);
            assert!(err <= 1e-9, "{} {err}", p.omega);
        }
        assert_relative_eq!(frc.points.last().unwrap().omega, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn duffing_frc_passes_primary_fold() {
        let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
        let frc = trace_frc(&sys, 0.01, (0.8, 2.0), &ContinuationConfig::default()).unwrap();
        assert_eq!(frc.termination, Termination::Boundary);
        // Frequency decreases somewhere along the branch: a turning point was crossed.
        let turns = frc.points.windows(2).filter(|w| w[1].omega < w[0].omega).count();
        assert!(turns > 0);
        let peak = frc.points.iter().map(|p| p.x.magnitude(1)).fold(0.0, f64::max);
        assert!(peak > 0.5, "{peak}");
    }

    #[test]
    fn jenkins_linear_seed_converges() {
        let sys = presets::system(ForceKind::Jenkins, 3).with_time_samples(128);
        let hbm = Hbm::new(&sys).unwrap();
        let w = 0.2 * sys.omega0();
        let sol = hbm.solve(&hbm.linear_response(w, 0.9), w, 0.9, NewtonOptions::default());
        assert!(sol.is_ok(), "{sol:?}");
    }

    #[test]
    fn force_ramp_reaches_strong_forcing() {
        let sys = presets::system(ForceKind::StiffeningDuffing, 12).with_time_samples(128);
        let hbm = Hbm::new(&sys).unwrap();
        let (w, f) = (0.25, 10.0);
        let direct = hbm.solve(&hbm.linear_response(w, f), w, f, NewtonOptions::default());
        assert!(direct.is_err());
        let mut stats = SolveStats::default();
        let x = ramp_force(&hbm, w, f, &ContinuationConfig::default(), &mut stats).unwrap();
        let r = hbm.residual(&x, w, f).unwrap();
        assert!(hbm.norm(&r.r) <= 1e-9);
        // Single-harmonic balance (1 - w^2) a + 3a^3/4 = F.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let a = 0.5 * (lo + hi);
            if (1.0 - w * w) * a + 0.75 * a * a * a > f {
                hi = a;
            } else {
                lo = a;
            }
        }
        assert!((x.pair(1).0 - lo).abs() < 0.05 * lo, "{:?} vs {lo}", x.pair(1));
    }

    #[test]
    fn frc_leaves_window_around_boundary_fold() {
        let sys = presets::system(ForceKind::StiffeningDuffing, 12).with_time_samples(128);
        let frc = trace_frc(&sys, 2.6101572, (0.25, 1.25), &ContinuationConfig::default()).unwrap();
        assert_eq!(frc.termination, Termination::Boundary);
        assert_eq!(frc.points.last().unwrap().omega, 1.25);
        assert!(frc.points.iter().any(|p| p.omega < 0.25));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residual_derivatives_match_differences(
            v in proptest::collection::vec(-1.0f64..1.0, 7),
            omega in 0.2f64..1.5,
            which in 0usize..3,
        ) {
            let kind = [ForceKind::StiffeningDuffing, ForceKind::CubicDamping, ForceKind::SofteningIi][which];
            let hbm = Hbm::new(&presets::system(kind, 3).with_time_samples(256)).unwrap();
            let x = HarmonicVector::from_slice(&v);
            let f = 0.4;
            let r = hbm.residual(&x, omega, f).unwrap();
            let h = 1e-6;
            let scale = r.dr_dx.amax();
            for col in 0..7 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[col] += h;
                xm[col] -= h;
                let fd = (hbm.residual(&xp, omega, f).unwrap().r - hbm.residual(&xm, omega, f).unwrap().r) / (2.0 * h);
                prop_assert!((r.dr_dx.column(col) - fd).amax() / scale <= 1e-5);
            }
            let fd = (hbm.residual(&x, omega + h, f).unwrap().r - hbm.residual(&x, omega - h, f).unwrap().r) / (2.0 * h);
            prop_assert!((&r.dr_domega - fd).amax() / r.dr_domega.amax().max(1e-3) <= 1e-5);
            let fd = (hbm.residual(&x, omega, f + h).unwrap().r - hbm.residual(&x, omega, f - h).unwrap().r) / (2.0 * h);
            prop_assert!((&r.dr_dforce - fd).amax() <= 1e-8);
        }
    }
}

//! Pseudo-arclength continuation with a tangent predictor and a corrector
//! constrained to the hyperplane orthogonal to the tangent.
//!
//! The unknown vector `y` carries the continuation parameter `λ` in its last
//! entry. The residual has one equation fewer than `y` has entries.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual and Jacobian `∂r/∂y` (`(n−1) × n`) at `y`.
pub type Evaluation = (DVector<f64>, DMatrix<f64>);

/// Step-size and termination settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Parameter interval `[λ_min, λ_max]`.
    pub lambda_range: (f64, f64),
    pub max_points: usize,
    /// Corrector tolerance on `‖r‖∞`.
    pub tol: f64,
    pub max_corrector_iter: usize,
    /// Step growth after an easy corrector.
    pub grow: f64,
    /// Step reduction after a failed corrector.
    pub shrink: f64,
    /// Corrector iteration count at or below which the step grows.
    pub easy_iterations: usize,
    /// Largest accepted angle between consecutive tangents [rad].
    pub max_turn: f64,
    /// Largest accepted corrector displacement, in units of the step.
    pub max_correction: f64,
    /// Number of leading coordinates measured relative to their own norm.
    pub relative_coords: usize,
    /// Floor of the norm used for relative coordinates.
    pub relative_floor: f64,
    /// Scale dividing `λ` in the arclength metric.
    pub lambda_scale: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            ds0: 0.02,
            ds_min: 1e-6,
            ds_max: 0.1,
            lambda_range: (0.0, 1.0),
            max_points: 5000,
            tol: 1e-9,
            max_corrector_iter: 10,
            grow: 2.0,
            shrink: 4.0,
            easy_iterations: 3,
            max_turn: 0.5,
            max_correction: 0.5,
            relative_coords: 0,
            relative_floor: 1e-3,
            lambda_scale: 1.0,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0 && self.ds_min <= self.ds0 && self.ds0 <= self.ds_max;
        if !ok {
            return Err(Error::InvalidParameter {
                name: "continuation",
                reason: format!(
                    "need 0 < ds_min <= ds0 <= ds_max, got {}, {}, {}",
                    self.ds_min, self.ds0, self.ds_max
                ),
            });
        }
        if !(self.lambda_range.0 <= self.lambda_range.1) {
            return Err(Error::InvalidParameter {
                name: "lambda_range",
                reason: "lower bound exceeds upper bound".into(),
            });
        }
        if self.lambda_scale <= 0.0 || self.grow < 1.0 || self.shrink <= 1.0 || self.max_correction <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "continuation",
                reason: "lambda_scale > 0, max_correction > 0, grow >= 1 and shrink > 1 required".into(),
            });
        }
        Ok(())
    }

    /// Copy with every arclength step multiplied by `factor`.
    pub fn scaled_steps(&self, factor: f64) -> Self {
        Self {
            ds0: self.ds0 * factor,
            ds_min: self.ds_min * factor.min(1.0),
            ds_max: self.ds_max * factor,
            ..self.clone()
        }
    }
}

/// Accepted point of a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub y: DVector<f64>,
    pub residual_norm: f64,
    /// Accumulated arclength in the weighted metric.
    pub arc: f64,
    /// Unit tangent in unweighted coordinates (direction of travel).
    pub tangent: DVector<f64>,
}

impl BranchPoint {
    pub fn lambda(&self) -> f64 {
        self.y[self.y.len() - 1]
    }
}

/// Why a trace stopped.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum Termination {
    Boundary,
    MaxPoints,
    StepTooSmall(String),
}

/// Work counters for a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    /// Linear solves performed by Newton-type iterations.
    pub newton_iterations: usize,
    /// Residual and Jacobian evaluations.
    pub evaluations: usize,
    /// Corrector attempts that failed and were retried with a smaller step.
    pub rejected_steps: usize,
}

impl std::ops::AddAssign for SolveStats {
    fn add_assign(&mut self, o: Self) {
        self.newton_iterations += o.newton_iterations;
        self.evaluations += o.evaluations;
        self.rejected_steps += o.rejected_steps;
    }
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
    pub stats: SolveStats,
}

fn weights(y: &DVector<f64>, cfg: &ContinuationConfig) -> DVector<f64> {
    let n = y.len();
    let mut w = DVector::from_element(n, 1.0);
    let r = cfg.relative_coords.min(n - 1);
    if r > 0 {
        let norm = y.rows(0, r).norm().max(cfg.relative_floor);
        for i in 0..r {
            w[i] = 1.0 / norm;
        }
    }
    w[n - 1] = 1.0 / cfg.lambda_scale;
    w
}

/// Newton on the residual with the last coordinate held fixed. Steps that
/// fail to evaluate or raise the residual are halved up to eight times.
pub fn solve_fixed_lambda<F>(
    f: &mut F,
    y0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
    stats: &mut SolveStats,
) -> Result<(DVector<f64>, f64)>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    let n = y0.len();
    let mut y = y0.clone();
    let (mut r, mut j) = f(&y)?;
    stats.evaluations += 1;
    let mut norm = r.amax();
    let fail = |y: &DVector<f64>, norm: f64, iterations| Error::NonConvergence {
        iterations,
        residual_norm: norm,
        best: Box::new(y.as_slice().to_vec().into()),
    };
    for iter in 0..=max_iter {
        if !norm.is_finite() {
            return Err(fail(&y, norm, iter));
        }
        if norm <= tol {
            return Ok((y, norm));
        }
        if iter == max_iter {
            break;
        }
        let jx = j.columns(0, n - 1).into_owned();
        let step = jx.lu().solve(&(-&r)).ok_or(Error::SingularJacobian)?;
        stats.newton_iterations += 1;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=8 {
            let mut trial = y.clone();
            for i in 0..n - 1 {
                trial[i] += scale * step[i];
            }
            if let Ok((tr, tj)) = f(&trial) {
                stats.evaluations += 1;
                let tn = tr.amax();
                if tn.is_finite() && (tn < norm || accepted.is_none()) {
                    let better = tn < norm;
                    accepted = Some((trial, tr, tj, tn));
                    if better {
                        break;
                    }
                }
            }
            scale *= 0.5;
        }
        let Some((ny, nr, nj, nn)) = accepted else {
            return Err(fail(&y, norm, iter + 1));
        };
        y = ny;
        r = nr;
        j = nj;
        norm = nn;
    }
    Err(fail(&y, norm, max_iter))
}

/// Converge a starting point at parameter `lambda0`.
pub fn initial_point<F>(
    f: &mut F,
    lambda0: f64,
    seed: &DVector<f64>,
    cfg: &ContinuationConfig,
    stats: &mut SolveStats,
) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    let (lo, hi) = cfg.lambda_range;
    if !(lo..=hi).contains(&lambda0) {
        return Err(Error::OutOfRange(format!(
            "start parameter {lambda0} lies outside [{lo}, {hi}]"
        )));
    }
    let mut y = seed.clone();
    let n = y.len();
    y[n - 1] = lambda0;
    solve_fixed_lambda(f, &y, cfg.tol, 4 * cfg.max_corrector_iter, stats)
        .map(|(y, _)| y)
        .map_err(|e| match e {
            Error::NonConvergence { residual_norm, .. } => Error::SeedFailure(format!(
                "no convergence at parameter {lambda0} (residual {residual_norm:.3e}); try a different start value"
            )),
            e => e,
        })
}

/// Unit tangent in weighted coordinates oriented along `reference`.
fn tangent(jw: &DMatrix<f64>, reference: &DVector<f64>) -> Result<DVector<f64>> {
    let n = jw.ncols();
    let mut a = DMatrix::zeros(n, n);
    a.rows_mut(0, n - 1).copy_from(jw);
    a.row_mut(n - 1).copy_from(&reference.transpose());
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let t = a.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
    let norm = t.norm();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::SingularJacobian);
    }
    Ok(t / norm)
}

enum Corrected {
    Converged(DVector<f64>, f64, usize),
    Failed,
}

/// Newton iteration in the hyperplane through `pred` orthogonal to `t`
/// (both in weighted coordinates `z = W y`).
fn correct<F>(
    f: &mut F,
    pred: &DVector<f64>,
    t: &DVector<f64>,
    w: &DVector<f64>,
    cfg: &ContinuationConfig,
    stats: &mut SolveStats,
) -> Corrected
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    let n = pred.len();
    let mut z = pred.clone();
    for iter in 0..=cfg.max_corrector_iter {
        let y = z.component_div(w);
        let Ok((r, j)) = f(&y) else {
            return Corrected::Failed;
        };
        stats.evaluations += 1;
        let norm = r.amax();
        if !norm.is_finite() {
            return Corrected::Failed;
        }
        if norm <= cfg.tol {
            return Corrected::Converged(y, norm, iter);
        }
        if iter == cfg.max_corrector_iter {
            break;
        }
        let mut a = DMatrix::zeros(n, n);
        for c in 0..n {
            for r_ in 0..n - 1 {
                a[(r_, c)] = j[(r_, c)] / w[c];
            }
            a[(n - 1, c)] = t[c];
        }
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, n - 1).copy_from(&(-&r));
        rhs[n - 1] = -t.dot(&(&z - pred));
        let Some(step) = a.lu().solve(&rhs) else {
            return Corrected::Failed;
        };
        stats.newton_iterations += 1;
        z += step;
    }
    Corrected::Failed
}

/// Trace a branch from the converged point `y_start` towards increasing λ.
pub fn continue_branch<F>(f: &mut F, y_start: &DVector<f64>, cfg: &ContinuationConfig) -> Result<Branch>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    continue_branch_along(f, y_start, None, cfg)
}

/// Like [`continue_branch`], but leaving `y_start` along the tangent that
/// has a positive projection on `direction` when one is given.
pub fn continue_branch_along<F>(
    f: &mut F,
    y_start: &DVector<f64>,
    direction: Option<&DVector<f64>>,
    cfg: &ContinuationConfig,
) -> Result<Branch>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    cfg.validate()?;
    let n = y_start.len();
    let (lo, hi) = cfg.lambda_range;
    let mut stats = SolveStats::default();

    let (r0, j0) = f(y_start)?;
    stats.evaluations += 1;
    let norm0 = r0.amax();
    if !(norm0 <= cfg.tol) {
        return Err(Error::SeedFailure(format!(
            "start point is not converged (residual {norm0:.3e})"
        )));
    }
    let mut w = weights(y_start, cfg);
    let mut e_lambda = DVector::zeros(n);
    e_lambda[n - 1] = 1.0;
    let jw0 = scale_columns(&j0, &w);
    let mut t = tangent(&jw0, &e_lambda)?;
    let flip = match direction {
        Some(d) => unweighted(&t, &w).dot(d) < 0.0,
        None => t[n - 1] < 0.0,
    };
    if flip {
        t = -t;
    }
    let mut points = vec![BranchPoint {
        y: y_start.clone(),
        residual_norm: norm0,
        arc: 0.0,
        tangent: unweighted(&t, &w),
    }];
    if hi - lo <= 0.0 {
        return Ok(Branch {
            points,
            termination: Termination::Boundary,
            stats,
        });
    }

    let mut ds = cfg.ds0;
    let mut y = y_start.clone();
    let mut arc = 0.0;
    let termination = loop {
        if points.len() >= cfg.max_points {
            break Termination::MaxPoints;
        }
        if ds < cfg.ds_min {
            break Termination::StepTooSmall(format!(
                "corrector failed at the minimum step {:.3e} at parameter {:.6e}",
                cfg.ds_min,
                y[n - 1]
            ));
        }
        let at_min = ds <= cfg.ds_min;
        let z = y.component_mul(&w);
        let pred = &z + &t * ds;
        match correct(f, &pred, &t, &w, cfg, &mut stats) {
            Corrected::Converged(ny, norm, iters) => {
                let jump = (ny.component_mul(&w) - &pred).norm();
                if jump > cfg.max_correction * ds && !at_min {
                    ds = reduce(ds, cfg);
                    stats.rejected_steps += 1;
                    continue;
                }
                let (_, nj) = match f(&ny) {
                    Ok(v) => v,
                    Err(_) => {
                        ds = reduce(ds, cfg);
                        stats.rejected_steps += 1;
                        continue;
                    }
                };
                stats.evaluations += 1;
                let nw = weights(&ny, cfg);
                let reference = unweighted(&t, &w).component_mul(&nw);
                let Ok(mut nt) = tangent(&scale_columns(&nj, &nw), &reference) else {
                    ds = reduce(ds, cfg);
                    stats.rejected_steps += 1;
                    continue;
                };
                let reference = reference.normalize();
                if nt.dot(&reference) < 0.0 {
                    nt = -nt;
                }
                let turn = nt.dot(&reference).clamp(-1.0, 1.0).acos();
                if turn > cfg.max_turn && !at_min {
                    ds = reduce(ds, cfg);
                    stats.rejected_steps += 1;
                    continue;
                }
                let lam = ny[n - 1];
                if lam > hi || lam < lo {
                    let bound = if lam > hi { hi } else { lo };
                    if let Some(p) = land_on_boundary(f, &y, &ny, bound, cfg, &mut stats) {
                        let step = (p.component_mul(&w) - &z).norm();
                        points.push(BranchPoint {
                            tangent: unweighted(&nt, &nw),
                            residual_norm: residual_norm(f, &p, &mut stats),
                            arc: arc + step,
                            y: p,
                        });
                        break Termination::Boundary;
                    }
                    ds = reduce(ds, cfg);
                    stats.rejected_steps += 1;
                    continue;
                }
                arc += (ny.component_mul(&w) - &z).norm();
                points.push(BranchPoint {
                    y: ny.clone(),
                    residual_norm: norm,
                    arc,
                    tangent: unweighted(&nt, &nw),
                });
                y = ny;
                w = nw;
                t = nt;
                if iters <= cfg.easy_iterations {
                    ds = (ds * cfg.grow).min(cfg.ds_max);
                }
            }
            Corrected::Failed => {
                ds = reduce(ds, cfg);
                stats.rejected_steps += 1;
            }
        }
    };
    Ok(Branch {
        points,
        termination,
        stats,
    })
}

/// Next trial step after a rejection: one shrink, floored at `ds_min`. A
/// rejection at the floor drops below it and ends the trace.
fn reduce(ds: f64, cfg: &ContinuationConfig) -> f64 {
    if ds <= cfg.ds_min {
        0.0
    } else {
        (ds / cfg.shrink).max(cfg.ds_min)
    }
}

fn residual_norm<F>(f: &mut F, y: &DVector<f64>, stats: &mut SolveStats) -> f64
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    stats.evaluations += 1;
    f(y).map(|(r, _)| r.amax()).unwrap_or(f64::NAN)
}

/// Solve at `λ = bound` starting from the linear interpolation between the
/// last accepted point and the overshooting one.
fn land_on_boundary<F>(
    f: &mut F,
    inside: &DVector<f64>,
    outside: &DVector<f64>,
    bound: f64,
    cfg: &ContinuationConfig,
    stats: &mut SolveStats,
) -> Option<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    let n = inside.len();
    let (a, b) = (inside[n - 1], outside[n - 1]);
    let s = if b != a { (bound - a) / (b - a) } else { 1.0 };
    let mut guess = inside + (outside - inside) * s;
    guess[n - 1] = bound;
    solve_fixed_lambda(f, &guess, cfg.tol, cfg.max_corrector_iter, stats)
        .ok()
        .map(|(y, _)| y)
}

fn scale_columns(j: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = j.clone();
    for c in 0..j.ncols() {
        let s = 1.0 / w[c];
        out.column_mut(c).scale_mut(s);
    }
    out
}

fn unweighted(t: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    t.component_div(w).normalize()
}

//! Property suite run by `vibratrak validate`: transform round trips,
//! zero cycle work of conservative laws, finite-difference Jacobian checks,
//! and consistency of traced backbones with the balanced equations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vibratrak_core::aft::{harmonic_coefficients, synthesize_time_series, Aft, AftPath};
use vibratrak_core::analysis::{analytic_fbroad, apriori_sweep};
use vibratrak_core::hbm::{Hbm, NewtonOptions};
use vibratrak_core::model::{presets, ForceKind, ForceModel, SystemConfig};
use vibratrak_core::vprnm::{broadband_force, decomposition_check, Vprnm};
use vibratrak_core::{ContinuationConfig, HarmonicVector, SolveStats};

/// Outcome of one property.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst measured deviation.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: false,
            value: f64::INFINITY,
            tolerance: 0.0,
            detail: detail.into(),
        }
    }
}

const CONSERVATIVE: [ForceKind; 5] = [
    ForceKind::StiffeningDuffing,
    ForceKind::QuinticStiffness,
    ForceKind::SofteningDuffing,
    ForceKind::SofteningIi,
    ForceKind::UnilateralSpring,
];

const DISSIPATIVE: [ForceKind; 3] = [ForceKind::CubicDamping, ForceKind::Jenkins, ForceKind::Iwan];

/// Run every check. The suite is deterministic.
pub fn run_suite() -> Vec<Check> {
    let mut out = vec![round_trip()];
    out.extend(CONSERVATIVE.iter().map(|&k| conservative_work(k)));
    out.extend(DISSIPATIVE.iter().map(|&k| dissipative_work(k)));
    out.extend(ForceKind::ALL.iter().map(|&k| aft_jacobian(k)));
    out.extend(ForceKind::ALL.iter().map(|&k| decomposition(k)));
    out.push(fast_path_equivalence());
    out.push(analytic_excitation());
    out.push(linear_frf());
    for k in [ForceKind::StiffeningDuffing, ForceKind::Jenkins] {
        out.push(hbm_jacobian(k));
        out.push(vprnm_jacobian(k));
    }
    out.extend(backbone_checks(ForceKind::StiffeningDuffing, 9, 128, (0.1, 5.0)));
    out.extend(backbone_checks(ForceKind::Jenkins, 3, 1024, (0.9, 125.0)));
    for k in [ForceKind::StiffeningDuffing, ForceKind::SofteningDuffing, ForceKind::CubicDamping] {
        out.push(low_amplitude_phase(k));
    }
    out.push(unilateral_scaling());
    out.push(saturating_excitation());
    out
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random state with coefficients decaying as `1/k`, scaled to `scale`.
pub fn random_state(rng: &mut impl Rng, harmonics: usize, scale: f64) -> HarmonicVector {
    let mut x = HarmonicVector::zeros(harmonics);
    for i in 0..x.len() {
        let decay = if i == 0 { 0.3 } else { 1.0 / ((i + 1) / 2) as f64 };
        x[i] = scale * decay * rng.gen_range(-1.0..1.0);
    }
    x
}

/// `Σ k (F_kc X_ks − F_ks X_kc)`, proportional to the work of the force over
/// one cycle.
pub fn cycle_work(x: &HarmonicVector, f: &HarmonicVector) -> f64 {
    (1..=x.harmonics())
        .map(|k| {
            let (xc, xs) = x.pair(k);
            let (fc, fs) = f.pair(k);
            k as f64 * (fc * xs - fs * xc)
        })
        .sum()
}

fn round_trip() -> Check {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for &(h, nt) in &[(1, 4), (3, 16), (3, 1024), (12, 128), (12, 256)] {
        for _ in 0..20 {
            let x = random_state(&mut r, h, 1.0);
            let (d, _) = synthesize_time_series(&x, 1.0, nt).expect("valid sizes");
            let back = harmonic_coefficients(&d, h);
            worst = worst.max((back.as_vector() - x.as_vector()).amax());
        }
    }
    Check::at_most("transform_round_trip", worst, 1e-12, "max |X' − X| over H ≤ Nt/4")
}

fn system(kind: ForceKind, harmonics: usize, nt: usize) -> SystemConfig {
    presets::system(kind, harmonics).with_time_samples(nt)
}

fn conservative_work(kind: ForceKind) -> Check {
    let sys = system(kind, 3, 1024);
    let aft = Aft::for_system(&sys).expect("preset");
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_state(&mut r, 3, 1.5 * sys.x_ref);
        match aft.eval(&x, 1.0) {
            Ok(res) => worst = worst.max(cycle_work(&x, &res.f_nl).abs()),
            Err(e) => return Check::failed(format!("conservative_work_{}", kind.name()), e.to_string()),
        }
    }
    Check::at_most(
        format!("conservative_work_{}", kind.name()),
        worst,
        1e-10,
        "max |Σ k (F_kc X_ks − F_ks X_kc)| over 100 random states, Nt = 1024",
    )
}

fn dissipative_work(kind: ForceKind) -> Check {
    let sys = system(kind, 3, 1024);
    let aft = Aft::for_system(&sys).expect("preset");
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = random_state(&mut r, 3, 3.0 * sys.x_ref);
        match aft.eval(&x, 1.0) {
            Ok(res) => worst = worst.max(-cycle_work(&x, &res.f_nl)),
            Err(e) => return Check::failed(format!("dissipated_work_{}", kind.name()), e.to_string()),
        }
    }
    Check::at_most(
        format!("dissipated_work_{}", kind.name()),
        worst,
        1e-12,
        "largest negative cycle work over 50 random states",
    )
}

/// Largest deviation of the analytic Jacobian from central differences,
/// relative to its largest entry. A column is skipped when differences at
/// `h` and `h/2` disagree, which happens when the perturbation moves a
/// sample across a kink or a stick-slip transition.
fn fd_relative_error<F>(jac: &DMatrix<f64>, point: &DVector<f64>, scales: &[f64], f: F) -> (f64, usize)
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let diff = |col: usize, h: f64| -> Option<DVector<f64>> {
        let mut p = point.clone();
        let mut m = point.clone();
        p[col] += h;
        m[col] -= h;
        Some((f(&p)? - f(&m)?) / (2.0 * h))
    };
    let norm = jac.amax().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for col in 0..point.len() {
        let h = 1e-6 * point[col].abs().max(scales[col]);
        let (Some(d1), Some(d2)) = (diff(col, h), diff(col, 0.5 * h)) else {
            skipped += 1;
            continue;
        };
        if (&d1 - &d2).amax() > 1e-6 * norm {
            skipped += 1;
            continue;
        }
        worst = worst.max((jac.column(col) - d2).amax() / norm);
    }
    (worst, skipped)
}

fn aft_jacobian(kind: ForceKind) -> Check {
    let name = format!("aft_jacobian_{}", kind.name());
    let sys = system(kind, 3, 256);
    let aft = Aft::for_system(&sys).expect("preset");
    let mut r = rng(4);
    let omega = 0.7;
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut total = 0;
    for _ in 0..10 {
        let x = random_state(&mut r, 3, 1.5 * sys.x_ref);
        let Ok((res, _)) = aft.eval_with(&x, omega, AftPath::Standard) else {
            return Check::failed(name, "evaluation failed");
        };
        let nc = x.len();
        let mut jac = DMatrix::zeros(nc, nc + 1);
        jac.view_mut((0, 0), (nc, nc)).copy_from(&res.df_dx);
        jac.set_column(nc, &res.df_domega);
        let point = x.as_vector().clone().insert_row(nc, omega);
        let mut scales = vec![sys.x_ref; nc];
        scales.push(omega);
        let (e, s) = fd_relative_error(&jac, &point, &scales, |p| {
            let x = HarmonicVector::from(p.rows(0, nc).into_owned());
            aft.eval_with(&x, p[nc], AftPath::Standard)
                .ok()
                .map(|(r, _)| r.f_nl.as_vector().clone())
        });
        worst = worst.max(e);
        skipped += s;
        total += nc + 1;
    }
    let mut c = Check::at_most(name, worst, 1e-5, format!("∂F/∂(X, ω); {skipped} of {total} directions crossed a transition"));
    if 2 * skipped > total {
        c.passed = false;
    }
    c
}

fn hbm_jacobian(kind: ForceKind) -> Check {
    let name = format!("hbm_jacobian_{}", kind.name());
    let sys = system(kind, 3, 256);
    let hbm = Hbm::new(&sys).expect("preset");
    let nc = sys.n_coeffs();
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..10 {
        let x = random_state(&mut r, 3, 1.5 * sys.x_ref);
        let (omega, force) = (0.6, 0.3 * sys.force_scale());
        let Ok(res) = hbm.residual(&x, omega, force) else {
            return Check::failed(name, "evaluation failed");
        };
        let mut jac = DMatrix::zeros(nc, nc + 2);
        jac.view_mut((0, 0), (nc, nc)).copy_from(&res.dr_dx);
        jac.set_column(nc, &res.dr_domega);
        jac.set_column(nc + 1, &res.dr_dforce);
        let mut point = DVector::zeros(nc + 2);
        point.rows_mut(0, nc).copy_from(x.as_vector());
        point[nc] = omega;
        point[nc + 1] = force;
        let mut scales = vec![sys.x_ref; nc];
        scales.extend([sys.omega0(), sys.force_scale()]);
        let (e, s) = fd_relative_error(&jac, &point, &scales, |p| {
            let x = HarmonicVector::from(p.rows(0, nc).into_owned());
            hbm.residual(&x, p[nc], p[nc + 1]).ok().map(|r| r.r)
        });
        worst = worst.max(e);
        skipped += s;
    }
    let total = 10 * (nc + 2);
    let mut c = Check::at_most(name, worst, 1e-5, format!("∂R/∂(X, ω, F); {skipped} of {total} directions crossed a transition"));
    if 2 * skipped > total {
        c.passed = false;
    }
    c
}

fn vprnm_jacobian(kind: ForceKind) -> Check {
    let name = format!("vprnm_jacobian_{}", kind.name());
    let sys = system(kind, 3, 256);
    let v = Vprnm::new(&sys, 3).expect("preset");
    let nc = sys.n_coeffs();
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    let mut total = 0;
    for _ in 0..10 {
        let x = random_state(&mut r, 3, 1.5 * sys.x_ref);
        let (omega, force) = (0.35, 0.3 * sys.force_scale());
        let Ok(res) = v.residual(&x, omega, force) else {
            continue;
        };
        let mut point = DVector::zeros(nc + 2);
        point.rows_mut(0, nc).copy_from(x.as_vector());
        point[nc] = omega;
        point[nc + 1] = force;
        let mut scales = vec![sys.x_ref; nc];
        scales.extend([sys.omega0(), sys.force_scale()]);
        let (e, s) = fd_relative_error(&res.jacobian, &point, &scales, |p| {
            let x = HarmonicVector::from(p.rows(0, nc).into_owned());
            v.residual(&x, p[nc], p[nc + 1]).ok().map(|r| r.r)
        });
        worst = worst.max(e);
        skipped += s;
        total += nc + 2;
    }
    if total == 0 {
        return Check::failed(name, "broadband excitation vanished at every sample state");
    }
    let mut c = Check::at_most(name, worst, 1e-5, format!("∂[R; g]/∂(X, ω, F); {skipped} of {total} directions crossed a transition"));
    if 2 * skipped > total {
        c.passed = false;
    }
    c
}

fn decomposition(kind: ForceKind) -> Check {
    let sys = system(kind, 5, 256);
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let x = random_state(&mut r, 5, 1.5 * sys.x_ref);
        let n = 2 + i % 4;
        match decomposition_check(&sys, &x, 0.5, n) {
            Ok(d) => worst = worst.max(d / sys.force_scale()),
            Err(e) => return Check::failed(format!("decomposition_{}", kind.name()), e.to_string()),
        }
    }
    Check::at_most(
        format!("decomposition_{}", kind.name()),
        worst,
        1e-10,
        "|F_n{f(x)} − (F_n{f(x_n)} − F_broad − F_sup)| / (k_lin x_ref), 100 random states",
    )
}

fn fast_path_equivalence() -> Check {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for kind in [ForceKind::Jenkins, ForceKind::Iwan] {
        let sys = system(kind, 3, 1024);
        let aft = Aft::for_system(&sys).expect("preset");
        for _ in 0..100 {
            let x = random_state(&mut r, 3, 4.0 * sys.x_ref);
            let (Ok((a, _)), Ok((b, _))) = (
                aft.eval_with(&x, 1.0, AftPath::Standard),
                aft.eval_with(&x, 1.0, AftPath::Fast),
            ) else {
                return Check::failed("fast_hysteretic_path", "evaluation failed");
            };
            worst = worst.max((a.f_nl.as_vector() - b.f_nl.as_vector()).amax());
        }
    }
    Check::at_most("fast_hysteretic_path", worst, 1e-12, "max force-coefficient difference, 200 Jenkins/Iwan states")
}

fn analytic_excitation() -> Check {
    let mut worst_poly: f64 = 0.0;
    let mut worst_unilateral: f64 = 0.0;
    let kinds = [
        (ForceKind::StiffeningDuffing, 3),
        (ForceKind::QuinticStiffness, 3),
        (ForceKind::SofteningDuffing, 3),
        (ForceKind::CubicDamping, 3),
        (ForceKind::UnilateralSpring, 2),
    ];
    for (kind, n) in kinds {
        let sys = system(kind, 5, 1024);
        for i in 0..20 {
            let x1 = 0.1 * sys.x_ref * (1.0 + i as f64);
            let omega = 0.4;
            let mut x = HarmonicVector::zeros(5);
            x.set_pair(1, x1, 0.0);
            let (Ok(b), Ok((fc, fs))) = (
                broadband_force(&sys, &x, omega, n),
                analytic_fbroad(&sys.force, n, x1, None, omega),
            ) else {
                return Check::failed("analytic_excitation", format!("{} failed", kind.name()));
            };
            let rel = (b.fc - fc).hypot(b.fs - fs) / fc.hypot(fs);
            if kind == ForceKind::UnilateralSpring {
                worst_unilateral = worst_unilateral.max(rel);
            } else {
                worst_poly = worst_poly.max(rel);
            }
        }
    }
    let mut c = Check::at_most(
        "analytic_excitation",
        worst_poly,
        1e-10,
        format!("closed-form primary excitation; unilateral spring {worst_unilateral:.2e} (bound 1e-3)"),
    );
    c.passed &= worst_unilateral <= 1e-3;
    c
}

fn linear_frf() -> Check {
    let sys = SystemConfig::new(1.0, 0.01, 1.0, ForceModel::StiffeningDuffing { alpha: 0.0 }, 3);
    let hbm = Hbm::new(&sys).expect("linear system");
    let force = 0.5;
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let omega = 0.1 + 0.05 * i as f64;
        let guess = HarmonicVector::zeros(3);
        let Ok(sol) = hbm.solve(&guess, omega, force, NewtonOptions { tol: 1e-14, max_iter: 10 }) else {
            return Check::failed("linear_frf", format!("no convergence at ω = {omega}"));
        };
        let (k, c) = (1.0 - omega * omega, 0.01 * omega);
        let det = k * k + c * c;
        let (xc, xs) = (force * k / det, force * c / det);
        let (gc, gs) = sol.x.pair(1);
        worst = worst.max((gc - xc).hypot(gs - xs) / xc.hypot(xs));
    }
    Check::at_most("linear_frf", worst, 1e-10, "relative error against the closed-form receptance, 40 frequencies")
}

/// Orthogonality, membership of the balanced equations and the
/// decomposition identity along a traced backbone.
fn backbone_checks(kind: ForceKind, harmonics: usize, nt: usize, force_hat: (f64, f64)) -> Vec<Check> {
    let tag = kind.name();
    let sys = system(kind, harmonics, nt);
    let fs = sys.force_scale();
    let cfg = ContinuationConfig {
        tol: 1e-11,
        ..Default::default()
    };
    let bb = match vibratrak_core::vprnm_backbone(&sys, 3, (force_hat.0 * fs, force_hat.1 * fs), &cfg) {
        Ok(b) => b,
        Err(e) => {
            let msg = e.to_string();
            return ["backbone_orthogonality", "backbone_hbm_membership", "backbone_decomposition"]
                .iter()
                .map(|n| Check::failed(format!("{n}_{tag}"), msg.clone()))
                .collect();
        }
    };
    let hbm = Hbm::new(&sys).expect("preset");
    let mut orth: f64 = 0.0;
    let mut member: f64 = 0.0;
    let mut decomp: f64 = 0.0;
    let mut failures = 0;
    let opts = NewtonOptions { tol: 1e-12, max_iter: 30 };
    for p in &bb.points {
        orth = orth.max(p.constraint.abs());
        let guess = HarmonicVector::from(p.x.as_vector() * 1.001);
        match hbm.solve(&guess, p.omega, p.force, opts) {
            Ok(s) => member = member.max((s.x.as_vector() - p.x.as_vector()).amax() / sys.x_ref),
            Err(_) => failures += 1,
        }
        if let Ok(d) = decomposition_check(&sys, &p.x, p.omega, 3) {
            decomp = decomp.max(d / fs);
        }
    }
    let pts = bb.points.len();
    let mut membership = Check::at_most(
        format!("backbone_hbm_membership_{tag}"),
        member,
        1e-8,
        format!("max |X_hbm − X| / x_ref over {pts} points re-solved from a 0.1% perturbation; {failures} did not converge"),
    );
    membership.passed &= failures == 0;
    vec![
        Check::at_most(format!("backbone_orthogonality_{tag}"), orth, 1e-9, format!("max |constraint| over {pts} points")),
        membership,
        Check::at_most(format!("backbone_decomposition_{tag}"), decomp, 1e-10, format!("{pts} points")),
    ]
}

fn low_amplitude_phase(kind: ForceKind) -> Check {
    let name = format!("low_amplitude_phase_{}", kind.name());
    let sys = system(kind, 5, 256);
    let expected = match kind {
        ForceKind::StiffeningDuffing => -std::f64::consts::FRAC_PI_2,
        ForceKind::SofteningDuffing => std::f64::consts::FRAC_PI_2,
        _ => 0.0,
    };
    let v = Vprnm::new(&sys, 3).expect("preset");
    let mut stats = SolveStats::default();
    match v.seed(0.01 * sys.force_scale(), 1e-10, &mut stats) {
        Ok(p) => Check::at_most(
            name,
            (p.phase_n - expected).abs(),
            0.05,
            format!("3:1 phase {:.4} rad, expected {expected:.4}", p.phase_n),
        ),
        Err(e) => Check::failed(name, e.to_string()),
    }
}

fn unilateral_scaling() -> Check {
    let name = "unilateral_proportional_scaling";
    let sys = system(ForceKind::UnilateralSpring, 4, 1024);
    let v = Vprnm::new(&sys, 2).expect("preset");
    let mut stats = SolveStats::default();
    let f = 0.1 * sys.force_scale();
    let p1 = match v.seed(f, 1e-12, &mut stats) {
        Ok(p) => p,
        Err(e) => return Check::failed(name, e.to_string()),
    };
    let guess = HarmonicVector::from(p1.x.as_vector() * 2.0);
    let p2 = match v.solve_point(&guess, p1.omega, 2.0 * f, 1e-12, &mut stats) {
        Ok(p) => p,
        Err(e) => return Check::failed(name, e.to_string()),
    };
    let scaled = p1.x.as_vector() * 2.0;
    let rel = (p2.x.as_vector() - &scaled).amax() / scaled.amax();
    let dw = (p2.omega - p1.omega).abs() / p1.omega;
    Check::at_most(name, rel.max(dw), 1e-6, format!("2:1 resonance: |X(2F) − 2X(F)| rel {rel:.2e}, frequency shift {dw:.2e}"))
}

fn saturating_excitation() -> Check {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for kind in [ForceKind::SofteningIi, ForceKind::Jenkins, ForceKind::Iwan] {
        let sys = presets::system(kind, 3);
        let amps = [10.0 * sys.x_ref, 100.0 * sys.x_ref];
        let Ok(s) = apriori_sweep(&sys, 3, &amps, sys.omega0(), None) else {
            return Check::failed("saturating_excitation", format!("{} sweep failed", kind.name()));
        };
        let ratio = s[1].magnitude / s[0].magnitude;
        detail.push(format!("{} {ratio:.4}", kind.name()));
        worst = worst.max(ratio);
    }
    Check::at_most(
        "saturating_excitation",
        worst,
        1.05,
        format!("|F_broad,3|(100 x_ref) / |F_broad,3|(10 x_ref): {}", detail.join(", ")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_work_of_a_spring_vanishes_and_of_a_damper_is_positive() {
        let mut x = HarmonicVector::zeros(2);
        x.set_pair(1, 1.0, 0.5);
        x.set_pair(2, -0.2, 0.3);
        let spring = HarmonicVector::from(x.as_vector() * 3.0);
        assert!(cycle_work(&x, &spring).abs() < 1e-15);
        // f = c ẋ at ω = 1: F_kc = c k X_ks, F_ks = −c k X_kc.
        let mut damper = HarmonicVector::zeros(2);
        for k in 1..=2 {
            let (c, s) = x.pair(k);
            damper.set_pair(k, k as f64 * s, -(k as f64) * c);
        }
        let expected = 1.0 * (1.0 + 0.25) + 4.0 * (0.04 + 0.09);
        assert!((cycle_work(&x, &damper) - expected).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_check_skips_kinks() {
        let point = DVector::from_vec(vec![0.0, 1.0]);
        // |p0| has a kink at the evaluation point; p1² is smooth.
        let jac = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let (err, skipped) = fd_relative_error(&jac, &point, &[1.0, 1.0], |p| {
            Some(DVector::from_vec(vec![p[0].abs() + p[1] * p[1]]))
        });
        assert_eq!(skipped, 0, "symmetric differences of |x| at 0 agree");
        assert!((err - 0.5).abs() < 1e-9, "{err}");
        let (err, _) = fd_relative_error(&DMatrix::from_row_slice(1, 2, &[0.0, 2.0]), &point, &[1.0, 1.0], |p| {
            Some(DVector::from_vec(vec![p[0].abs() + p[1] * p[1]]))
        });
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn cheap_checks_pass() {
        assert!(round_trip().passed);
        assert!(conservative_work(ForceKind::StiffeningDuffing).passed);
        assert!(dissipative_work(ForceKind::Jenkins).passed);
        assert!(linear_frf().passed);
        let c = aft_jacobian(ForceKind::QuinticStiffness);
        assert!(c.passed, "{c:?}");
    }
}

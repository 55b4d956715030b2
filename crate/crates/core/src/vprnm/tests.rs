use super::*;
use crate::model::{presets, ForceKind, ForceModel};
use approx::assert_relative_eq;
use proptest::prelude::*;

fn fundamental(h: usize, c: f64, s: f64) -> HarmonicVector {
    let mut x = HarmonicVector::zeros(h);
    x.set_pair(1, c, s);
    x
}

#[test]
fn duffing_third_harmonic_excitation() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 5).with_time_samples(256);
    let b = broadband_force(&sys, &fundamental(5, 1.0, 0.0), 0.3, 3).unwrap();
    assert_relative_eq!(b.fc, -0.25, epsilon = 1e-14);
    assert!(b.fs.abs() < 1e-14);
    assert_relative_eq!(b.magnitude, 0.25, epsilon = 1e-14);
    assert_relative_eq!(b.phase.abs(), PI, epsilon = 1e-12);
    assert_relative_eq!(expected_phase(&b).unwrap(), -PI / 2.0, epsilon = 1e-12);
}

#[test]
fn unilateral_second_harmonic_excitation() {
    let sys = presets::system(ForceKind::UnilateralSpring, 3).with_time_samples(1024);
    let b = broadband_force(&sys, &fundamental(3, 1.0, 0.0), 1.0, 2).unwrap();
    let exact = -1.0 / (3.0 * PI);
    assert!((b.fc - exact).abs() / exact.abs() <= 1e-3, "{}", b.fc);
    assert!(b.fs.abs() < 1e-12);
}

#[test]
fn broadband_vanishes_at_rest() {
    for kind in ForceKind::ALL {
        let sys = presets::system(kind, 3).with_time_samples(64);
        let b = broadband_force(&sys, &HarmonicVector::zeros(3), 0.5, 3).unwrap();
        assert_eq!((b.fc, b.fs), (0.0, 0.0), "{kind:?}");
        assert!(matches!(expected_phase(&b), Err(Error::UndefinedPhase)));
    }
}

#[test]
fn broadband_rejects_harmonic_beyond_range() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    assert!(broadband_force(&sys, &fundamental(3, 1.0, 0.0), 0.3, 4).is_err());
    assert!(Vprnm::new(&sys, 1).is_err());
}

#[test]
fn expected_phase_examples() {
    let cases = [((-0.25, 0.0), -PI / 2.0), ((1.0, 0.0), PI / 2.0), ((0.0, -1.0), 0.0)];
    for ((fc, fs), want) in cases {
        let got = expected_phase(&BroadbandForce::new(3, fc, fs)).unwrap();
        assert_relative_eq!(got, want, epsilon = 1e-15);
    }
    // −π/2 − π/2 lands on the closed end of the interval.
    let got = expected_phase(&BroadbandForce::new(3, 0.0, 1.0)).unwrap();
    assert_relative_eq!(got, PI, epsilon = 1e-15);
}

#[test]
fn harmonic_phase_examples() {
    let mut x = HarmonicVector::zeros(2);
    x.set_pair(2, 1.0, 0.0);
    assert_eq!(harmonic_phase(&x, 2).unwrap(), 0.0);
    x.set_pair(2, 0.0, 1.0);
    assert_relative_eq!(harmonic_phase(&x, 2).unwrap(), PI / 2.0);
    x.set_pair(2, -1.0, 0.0);
    assert_relative_eq!(harmonic_phase(&x, 2).unwrap(), PI);
    assert!(harmonic_phase(&x, 1).is_err());
}

#[test]
fn superposition_vanishes_for_linear_law_and_fundamental_motion() {
    let lin = SystemConfig::new(1.0, 0.01, 1.0, ForceModel::StiffeningDuffing { alpha: 0.0 }, 3)
        .with_time_samples(64);
    let x = HarmonicVector::from_slice(&[0.1, 1.0, -0.3, 0.2, 0.5, -0.1, 0.05]);
    let s = superposition_force(&lin, &x, 0.4, 3, 3).unwrap();
    assert_eq!(s, (0.0, 0.0));

    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    let s = superposition_force(&sys, &fundamental(3, 0.8, 0.3), 0.4, 3, 3).unwrap();
    assert!(s.0.abs() < 1e-15 && s.1.abs() < 1e-15);
}

#[test]
fn superposition_duffing_cross_terms() {
    // (x1 + x3)³ − x1³ − x3³ = 3x1²x3 + 3x1x3² with x1 = cos θ, x3 = 0.1 cos 3θ;
    // the cos θ coefficient is 0.3/4 + 0.03/2 = 0.09.
    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    let mut x = fundamental(3, 1.0, 0.0);
    x.set_pair(3, 0.1, 0.0);
    let s = superposition_force(&sys, &x, 0.4, 1, 3).unwrap();
    assert_relative_eq!(s.0, -0.09, epsilon = 1e-14);
    assert!(s.1.abs() < 1e-14);
}

#[test]
fn decomposition_identity_at_rest() {
    for kind in ForceKind::ALL {
        let sys = presets::system(kind, 3).with_time_samples(64);
        assert_eq!(decomposition_check(&sys, &HarmonicVector::zeros(3), 0.5, 3).unwrap(), 0.0);
    }
}

#[test]
fn constraint_measures_projection_on_excitation() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    let v = Vprnm::new(&sys, 3).unwrap();
    let mut x = fundamental(3, 1.0, 0.2);
    let b = v.broadband(&x, 0.33).unwrap().force;
    let u = (b.fc / b.magnitude, b.fs / b.magnitude);
    x.set_pair(3, -u.1 * 0.7, u.0 * 0.7);
    let r = v.residual(&x, 0.33, 0.1).unwrap();
    assert!(r.r[7].abs() < 1e-15);
    x.set_pair(3, u.0, u.1);
    assert_relative_eq!(v.residual(&x, 0.33, 0.1).unwrap().r[7], 1.0, epsilon = 1e-14);
    x.set_pair(3, -u.0, -u.1);
    assert_relative_eq!(v.residual(&x, 0.33, 0.1).unwrap().r[7], -1.0, epsilon = 1e-14);
}

#[test]
fn residual_rejects_vanishing_excitation() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    let err = vprnm_residual(&sys, &HarmonicVector::zeros(3), 0.33, 0.1, 3).unwrap_err();
    assert!(matches!(err, Error::VanishingBroadband { harmonic: 3 }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn jenkins_decomposition_identity(
        v in proptest::collection::vec(-3.0f64..3.0, 7),
        omega in 0.1f64..1.0,
    ) {
        let sys = presets::system(ForceKind::Jenkins, 3).with_time_samples(128);
        let d = decomposition_check(&sys, &HarmonicVector::from_slice(&v), omega, 3).unwrap();
        prop_assert!(d <= 1e-10, "{d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn decomposition_identity_every_law(
        v in proptest::collection::vec(-2.0f64..2.0, 11),
        omega in 0.1f64..1.0,
        which in 0usize..8,
        n in 2usize..=5,
    ) {
        let kind = ForceKind::ALL[which];
        let sys = presets::system(kind, 5).with_time_samples(128);
        let x = HarmonicVector::from_slice(&v);
        let d = decomposition_check(&sys, &x, omega, n).unwrap();
        prop_assert!(d <= 1e-10, "{kind:?}: {d}");
    }

    #[test]
    fn augmented_jacobian_matches_differences(
        v in proptest::collection::vec(-1.0f64..1.0, 7),
        omega in 0.2f64..0.6,
        which in 0usize..3,
    ) {
        let kind = [ForceKind::StiffeningDuffing, ForceKind::CubicDamping, ForceKind::QuinticStiffness][which];
        let sys = presets::system(kind, 3).with_time_samples(128);
        let vp = Vprnm::new(&sys, 3).unwrap();
        let mut x = HarmonicVector::from_slice(&v);
        x[1] += 1.5;
        let f = 0.3;
        let r = vp.residual(&x, omega, f).unwrap();
        let h = 1e-6;
        let eval = |x: &HarmonicVector, w: f64, f: f64| vp.residual(x, w, f).unwrap().r;
        let scale = r.jacobian.amax();
        for col in 0..9 {
            let fd = if col < 7 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[col] += h;
                xm[col] -= h;
                (eval(&xp, omega, f) - eval(&xm, omega, f)) / (2.0 * h)
            } else if col == 7 {
                (eval(&x, omega + h, f) - eval(&x, omega - h, f)) / (2.0 * h)
            } else {
                (eval(&x, omega, f + h) - eval(&x, omega, f - h)) / (2.0 * h)
            };
            let err = (r.jacobian.column(col) - fd).amax() / scale;
            prop_assert!(err <= 1e-6, "{kind:?} column {col}: {err}");
        }
    }
}

fn quick_cfg() -> ContinuationConfig {
    ContinuationConfig {
        ds0: 0.05,
        ds_max: 0.3,
        ..Default::default()
    }
}

fn check_backbone(sys: &SystemConfig, bb: &Backbone) {
    let hbm = Hbm::new(sys).unwrap();
    for p in &bb.points {
        assert!(p.constraint.abs() <= 1e-9, "{}", p.constraint);
        assert!(p.residual_norm <= 1e-9, "{}", p.residual_norm);
        let sol = hbm.solve(&p.x, p.omega, p.force, Default::default()).unwrap();
        let diff = (sol.x.as_vector() - p.x.as_vector()).amax() / sys.x_ref;
        assert!(diff <= 1e-8, "{diff}");
        assert!(decomposition_check(sys, &p.x, p.omega, bb.n).unwrap() <= 1e-10);
    }
}

#[test]
fn duffing_backbone_starts_at_quarter_period_lag() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 5).with_time_samples(128);
    let bb = vprnm_backbone(&sys, 3, (0.1, 10.0), &quick_cfg()).unwrap();
    assert_eq!(bb.termination, Termination::Boundary);
    assert_relative_eq!(bb.points[0].force, 0.1, max_relative = 1e-12);
    assert_relative_eq!(bb.points.last().unwrap().force, 10.0, max_relative = 1e-9);
    check_backbone(&sys, &bb);
    assert!((bb.points[0].phase_n + PI / 2.0).abs() <= 0.05, "{}", bb.points[0].phase_n);
    // Stiffening moves the resonance upward with force.
    assert!(bb.points.last().unwrap().omega > bb.points[0].omega);
}

#[test]
fn softening_and_damping_low_force_phases() {
    let sys = presets::system(ForceKind::SofteningDuffing, 5).with_time_samples(128);
    let bb = vprnm_backbone(&sys, 3, (0.1, 1.0), &quick_cfg()).unwrap();
    check_backbone(&sys, &bb);
    assert!((bb.points[0].phase_n - PI / 2.0).abs() <= 0.05, "{}", bb.points[0].phase_n);

    let sys = presets::system(ForceKind::CubicDamping, 5).with_time_samples(128);
    let bb = vprnm_backbone(&sys, 3, (0.1, 1.0), &quick_cfg()).unwrap();
    check_backbone(&sys, &bb);
    assert!(bb.points[0].phase_n.abs() <= 0.05, "{}", bb.points[0].phase_n);
}

#[test]
fn unilateral_backbone_scales_with_force() {
    let sys = presets::system(ForceKind::UnilateralSpring, 4).with_time_samples(256);
    let vp = Vprnm::new(&sys, 2).unwrap();
    let mut stats = SolveStats::default();
    let a = vp.seed(0.5, 1e-11, &mut stats).unwrap();
    let b = vp
        .solve_point(&HarmonicVector::from(a.x.as_vector() * 2.0), a.omega, 1.0, 1e-11, &mut stats)
        .unwrap();
    assert_relative_eq!(b.omega, a.omega, max_relative = 1e-9);
    let rel = (b.x.as_vector() - a.x.as_vector() * 2.0).amax() / b.x.as_vector().amax();
    assert!(rel <= 1e-6, "{rel}");
}

#[test]
fn zero_width_force_range_gives_one_point() {
    let sys = presets::system(ForceKind::StiffeningDuffing, 3).with_time_samples(64);
    let bb = vprnm_backbone(&sys, 3, (0.2, 0.2), &quick_cfg()).unwrap();
    assert_eq!(bb.points.len(), 1);
    assert_relative_eq!(bb.points[0].force, 0.2, max_relative = 1e-12);
}

#[test]
fn unwrapped_phase_is_continuous() {
    let mut pts: Vec<VprnmPoint> = [3.0, -3.1, 3.0, 2.0]
        .iter()
        .map(|&ph| VprnmPoint {
            force: 1.0,
            omega: 1.0,
            x: HarmonicVector::zeros(1),
            phase_n: ph,
            phase_n_unwrapped: ph,
            broadband: BroadbandForce::new(3, 1.0, 0.0),
            constraint: 0.0,
            residual_norm: 0.0,
        })
        .collect();
    unwrap_phases(&mut pts);
    let u: Vec<f64> = pts.iter().map(|p| p.phase_n_unwrapped).collect();
    assert_relative_eq!(u[1], -3.1 + 2.0 * PI, epsilon = 1e-12);
    assert_relative_eq!(u[3], 2.0, epsilon = 1e-12);
}

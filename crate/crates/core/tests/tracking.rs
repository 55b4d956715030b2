use proptest::prelude::*;
use vibratrak_core::analysis::{dominant_peak, extract_superharmonic_peaks, total_amplitude};
use vibratrak_core::model::presets;
use vibratrak_core::{
    trace_frc, vprnm_backbone, Aft, AftPath, ContinuationConfig, ForceKind, ForceModel, HarmonicVector, Hbm,
    SystemConfig,
};

fn duffing() -> SystemConfig {
    presets::system(ForceKind::StiffeningDuffing, 7).with_time_samples(64)
}

#[test]
fn backbone_points_solve_the_forced_equations() {
    let sys = duffing();
    let bb = vprnm_backbone(&sys, 3, (0.2, 2.0), &ContinuationConfig::default()).unwrap();
    assert!(bb.points.len() > 5);
    let hbm = Hbm::new(&sys).unwrap();
    for p in &bb.points {
        let r = hbm.residual(&p.x, p.omega, p.force).unwrap();
        assert!(hbm.norm(&r.r) < 1e-8, "F = {}: {}", p.force, hbm.norm(&r.r));
        assert!(p.constraint.abs() < 1e-8);
    }
    assert!(bb.points[0].force <= 0.2 + 1e-12);
    assert!(bb.points[bb.points.len() - 1].force >= 2.0 - 1e-9);
}

#[test]
fn backbone_follows_the_frc_peak() {
    let sys = duffing();
    let force = 1.0;
    let frc = trace_frc(&sys, force, (0.3, 0.7), &ContinuationConfig::default()).unwrap();
    let peaks = extract_superharmonic_peaks(&sys, &frc, 3).unwrap();
    let peak = dominant_peak(&peaks).expect("3:1 peak on the curve");
    let bb = vprnm_backbone(&sys, 3, (0.5, 1.5), &ContinuationConfig::default()).unwrap();
    let near = bb
        .points
        .iter()
        .min_by(|a, b| (a.force - force).abs().total_cmp(&(b.force - force).abs()))
        .unwrap();
    let seeded = Hbm::new(&sys)
        .unwrap()
        .solve(&near.x, near.omega, force, Default::default())
        .unwrap();
    let rel = (total_amplitude(&seeded.x) - peak.x_super).abs() / peak.x_super;
    assert!((near.omega - peak.omega_peak).abs() < 0.02, "{} vs {}", near.omega, peak.omega_peak);
    assert!(rel < 0.05, "amplitude differs by {rel}");
}

#[test]
fn linear_frc_matches_receptance_everywhere() {
    let sys = SystemConfig::new(1.0, 0.02, 1.0, ForceModel::StiffeningDuffing { alpha: 0.0 }, 3);
    let frc = trace_frc(&sys, 0.1, (0.5, 1.5), &ContinuationConfig::default()).unwrap();
    assert!(frc.points.last().unwrap().omega >= 1.5 - 1e-9);
    for p in &frc.points {
        let (k, c) = (1.0 - p.omega * p.omega, 0.02 * p.omega);
        let want = 0.1 / k.hypot(c);
        assert!((p.x.magnitude(1) - want).abs() <= 1e-8 * want);
    }
}

fn state(coeffs: Vec<f64>) -> HarmonicVector {
    HarmonicVector::from(coeffs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fast_and_standard_paths_agree(
        coeffs in prop::collection::vec(-6.0f64..6.0, 7),
        iwan in any::<bool>(),
    ) {
        let kind = if iwan { ForceKind::Iwan } else { ForceKind::Jenkins };
        let sys = presets::system(kind, 3).with_time_samples(256);
        let aft = Aft::for_system(&sys).unwrap();
        let x = state(coeffs);
        let (a, _) = aft.eval_with(&x, 1.0, AftPath::Standard).unwrap();
        let (b, stats) = aft.eval_with(&x, 1.0, AftPath::Fast).unwrap();
        prop_assert!((a.f_nl.as_vector() - b.f_nl.as_vector()).amax() <= 1e-12);
        prop_assert!((a.df_dx - b.df_dx).amax() <= 1e-12);
        prop_assert!(stats.fell_back || stats.critical_path <= 4 * 3 + 1);
    }
}

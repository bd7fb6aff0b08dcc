use std::sync::Arc;

use qrm_core::harness::{add_noise, decay_law_source};
use qrm_core::temporal::check_assumption;
use qrm_core::{
    ForwardOperatorF32, ForwardOperatorF64, QrmSolverF32, QrmSolverF64, SmoothnessClass, SpectralDomainF32, SpectralDomainF64,
    TemporalProfileF32, TemporalProfileF64,
};

#[test]
fn f32_pipeline_tracks_f64() {
    let d32 = Arc::new(SpectralDomainF32::interval(1.0, 32).unwrap());
    let d64 = Arc::new(SpectralDomainF64::interval(1.0, 32).unwrap());
    let op32 = Arc::new(ForwardOperatorF32::new(Arc::clone(&d32), Arc::new(TemporalProfileF32::constant(1.0, 1.0).unwrap())).unwrap());
    let op64 = Arc::new(ForwardOperatorF64::new(Arc::clone(&d64), Arc::new(TemporalProfileF64::constant(1.0, 1.0).unwrap())).unwrap());
    for (a, b) in op32.mu().iter().zip(op64.mu()) {
        assert!(((*a as f64) - b).abs() <= 1e-5 * b.abs());
    }

    let s32 = QrmSolverF32::new(Arc::clone(&op32)).unwrap();
    let s64 = QrmSolverF64::new(Arc::clone(&op64)).unwrap();
    let f32_src = decay_law_source(d32, &SmoothnessClass::new(1.0f32, 1.0).unwrap(), 0.5).unwrap();
    let f64_src = decay_law_source(d64, &SmoothnessClass::new(1.0f64, 1.0).unwrap(), 0.5).unwrap();
    let h32 = add_noise(&op32.apply_t(&f32_src).unwrap(), 1e-4, 9).unwrap();
    let h64 = add_noise(&op64.apply_t(&f64_src).unwrap(), 1e-4, 9).unwrap();
    let class32 = SmoothnessClass::new(1.0f32, 1.0).unwrap();
    let class64 = SmoothnessClass::new(1.0f64, 1.0).unwrap();
    let e32 = s32.invert_apriori(&h32, 1e-4, &class32, 2.0).unwrap().solution.sub(&f32_src).unwrap().l2_norm();
    let e64 = s64.invert_apriori(&h64, 1e-4, &class64, 2.0).unwrap().solution.sub(&f64_src).unwrap().l2_norm();
    assert!(((e32 as f64) - e64).abs() <= 1e-3 * e64, "{} vs {}", e32, e64);
}

#[test]
fn f32_admissibility_agrees_on_constant_profile() {
    let p = TemporalProfileF32::constant(1.0, 1.0).unwrap();
    let r = check_assumption(&p, std::f32::consts::PI.powi(2)).unwrap();
    assert!(r.is_admissible());
    let c = r.lower_bound.unwrap() as f64;
    let x = std::f64::consts::PI.powi(2);
    let exact = 1.0 - (1.0 + x) * (-x).exp();
    assert!((c - exact).abs() < 1e-5);
}

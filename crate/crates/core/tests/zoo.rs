//! Certificates against trajectories across the standard systems and damping
//! kinds, envelopes of the two-phase decay, and the Gramian chain on random
//! linear flows.

use dampkit::analysis::{behavior_profile, verify_lyapunov_decrease, verify_poly_chain, sweep_direction};
use dampkit::damping::{DampingSpec, ScalarSaturation};
use dampkit::linalg::{gramian_quadrature, DenseMatrix, InnerProduct, Vector};
use dampkit::lyapunov::{
    build_exp_certificate, build_finite_dim_certificate, build_semiglobal_certificate, LyapunovCertificate,
};
use dampkit::models::{discretize_kdv, discretize_wave, estimate_cs, make_finite_dim, NormChoice, SemiDiscreteSystem};
use dampkit::sim::{integrate, IntegratorConfig};
use proptest::prelude::*;

fn dampings() -> Vec<DampingSpec> {
    vec![
        DampingSpec::linear(),
        DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0),
        DampingSpec::componentwise(ScalarSaturation::Tanh, 1.0),
        DampingSpec::componentwise(ScalarSaturation::Arctan, 1.0),
        DampingSpec::norm_saturation(1.0),
    ]
}

fn oscillator() -> SemiDiscreteSystem {
    make_finite_dim(
        DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        1.0,
    )
    .unwrap()
}

/// The certificate each system/damping pair is entitled to, with `r = ||z0||_{D(A)}`.
fn certificate(sys: &SemiDiscreteSystem, d: &DampingSpec, z0: &Vector, c_s: f64) -> LyapunovCertificate {
    if sys.dim() == 2 {
        build_finite_dim_certificate(sys, d).unwrap()
    } else if d.uses_sup_norm() {
        let sup = sys.clone().with_norm_choice(NormChoice::SSup);
        build_semiglobal_certificate(&sup, d, sys.norm_da(z0), Some(c_s)).unwrap()
    } else {
        build_exp_certificate(sys, d).unwrap()
    }
}

#[test]
fn decrease_holds_across_the_zoo() {
    let systems = vec![
        ("oscillator", oscillator()),
        ("kdv", discretize_kdv(2.0 * std::f64::consts::PI, 64, &|_| 1.0, 1.0).unwrap()),
        ("wave", discretize_wave(32, &|x| if (0.2..0.6).contains(&x) { 1.0 } else { 0.0 }, 1.0).unwrap()),
    ];
    for (name, sys) in &systems {
        let c_s = estimate_cs(sys);
        for d in dampings() {
            let z0 = sweep_direction(sys, &d).unwrap() * 5.0;
            let cert = certificate(sys, &d, &z0, c_s);
            let cfg = IntegratorConfig::new(5e-3, 5.0);
            let traj = integrate(sys, &d, &z0, &cfg, Some(&cert)).unwrap();
            let rep = verify_lyapunov_decrease(&traj, &cert).unwrap();
            assert!(rep.pass, "{name} / {}: {rep:?}", d.kind.name());
        }
    }
}

#[test]
fn envelope_bounds_saturated_oscillator() {
    let sys = oscillator();
    let d = DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0);
    let cert = build_finite_dim_certificate(&sys, &d).unwrap();
    let cfg = IntegratorConfig {
        record_every: 10,
        ..IntegratorConfig::new(1e-3, 200.0)
    };
    let traj = integrate(&sys, &d, &Vector::from_vec(vec![0.0, 100.0]), &cfg, Some(&cert)).unwrap();
    let prof = behavior_profile(&traj, &cert).unwrap();
    assert!(prof.pre_max_ratio <= 1.1, "pre ratio {}", prof.pre_max_ratio);
    assert!(prof.post_max_ratio <= 1.1, "post ratio {}", prof.post_max_ratio);
    assert!(!prof.pre.is_empty() && !prof.post.is_empty());
}

#[test]
fn saturated_envelope_is_affine_early() {
    // h = 1: sqrt(|z|^2) decays linearly while M K dominates
    let sys = make_finite_dim(DenseMatrix::zeros(1, 1), DenseMatrix::identity(1, 1), 1.0).unwrap();
    let d = DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0);
    let cert = build_finite_dim_certificate(&sys, &d).unwrap();
    let traj = integrate(&sys, &d, &Vector::from_element(1, 1e4), &IntegratorConfig::new(1e-1, 100.0), Some(&cert)).unwrap();
    let prof = behavior_profile(&traj, &cert).unwrap();
    let env: Vec<f64> = prof.pre.iter().map(|p| p.1).collect();
    let slopes: Vec<f64> = env.windows(2).map(|w| (w[1] - w[0]) / 0.1).collect();
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    assert!(hi < 0.0 && (hi - lo) <= 0.01 * lo.abs(), "slopes in [{lo}, {hi}]");
}

fn dissipative(entries: &[f64], n: usize, damp: f64) -> DenseMatrix {
    let g = DenseMatrix::from_row_slice(n, n, &entries[..n * n]);
    let s = (&g - g.transpose()) * 0.5;
    let d = &g * g.transpose() * (0.1 / n as f64);
    s - d - DenseMatrix::identity(n, n) * damp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gramian_chain_holds(
        n in 1usize..=4,
        entries in prop::collection::vec(-2.0f64..2.0, 16),
        z in prop::collection::vec(-1.0f64..1.0, 4),
        damp in 0.05f64..1.0,
        alpha in 0.0f64..0.5,
    ) {
        let a = dissipative(&entries, n, damp);
        let p = gramian_quadrature(&a, alpha, 1e-12).unwrap();
        let z0 = Vector::from_column_slice(&z[..n]);
        prop_assume!(z0.norm() > 1e-3);
        let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.5).collect();
        let reps = verify_poly_chain(&a, &InnerProduct::identity(n), &p, 1.0, &z0, &grid).unwrap();
        for r in &reps {
            prop_assert!(r.pass, "{:?}", r);
        }
    }
}

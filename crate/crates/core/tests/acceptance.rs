//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts the outcome. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use dampkit::analysis::{
    fit_exponential, fit_linear_phase, sweep_semiglobal, sweep_trend_ok, verify_lyapunov_decrease, verify_poly_chain,
};
use dampkit::damping::{DampingSpec, ScalarSaturation};
use dampkit::linalg::{
    gramian_quadrature, solve_lyapunov, spectral_abscissa, DenseMatrix, InnerProduct, Vector,
};
use dampkit::lyapunov::build_exp_certificate;
use dampkit::models::{discretize_kdv, discretize_wave, make_finite_dim, SemiDiscreteSystem};
use dampkit::sim::{integrate, IntegratorConfig};
use dampkit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn verdict(id: u32, pass: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random matrix shifted so its spectral abscissa lies in `[-1.5, -0.5]`.
fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let m = gaussian(rng, n, n) / (n as f64).sqrt();
    let shift = spectral_abscissa(&m) + rng.random_range(0.5..1.5);
    m - DenseMatrix::identity(n, n) * shift
}

/// `S - D` with `S` skew and `D` symmetric positive definite.
fn random_dissipative(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = gaussian(rng, n, n);
    let s = (&g - g.transpose()) * 0.5;
    let h = gaussian(rng, n, n) / (n as f64).sqrt();
    let d = &h * h.transpose() * 0.5 + DenseMatrix::identity(n, n) * 0.2;
    s - d
}

fn oscillator() -> SemiDiscreteSystem {
    make_finite_dim(
        DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        1.0,
    )
    .unwrap()
}

fn scalar() -> SemiDiscreteSystem {
    make_finite_dim(DenseMatrix::zeros(1, 1), DenseMatrix::identity(1, 1), 1.0).unwrap()
}

fn clamp() -> DampingSpec {
    DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0)
}

#[test]
fn criterion_1_lyapunov_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=30);
        let a = random_hurwitz(&mut rng, n);
        let g = gaussian(&mut rng, n, n);
        let q = &g * g.transpose() + DenseMatrix::identity(n, n);
        let p = solve_lyapunov(&a, &q).unwrap();
        let residual = (a.transpose() * &p + &p * &a + &q).norm() / q.norm();
        worst = worst.max(residual);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && elapsed < Duration::from_secs(5);
    verdict(1, pass, format!("worst relative residual {worst:e} over 100 instances in {elapsed:?}"));
    assert!(pass);
}

#[test]
fn criterion_2_gramian_equals_lyapunov() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=10);
        let a = random_hurwitz(&mut rng, n);
        let alpha = rng.random_range(0.0..1.0);
        let quad = gramian_quadrature(&a, alpha, 1e-12).unwrap();
        let exact = solve_lyapunov(&a, &DenseMatrix::identity(n, n)).unwrap() + DenseMatrix::identity(n, n) * alpha;
        worst = worst.max((quad - exact).amax());
    }
    let pass = worst <= 1e-6;
    verdict(2, pass, format!("largest entry difference {worst:e} over 20 instances"));
    assert!(pass);
}

#[test]
fn criterion_3_chain_inequalities() {
    let grid: Vec<f64> = (0..=80).map(|i| i as f64 * 0.25).collect();
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;

    let alpha = 0.25;
    let a = DenseMatrix::from_element(1, 1, -1.0);
    let p = DenseMatrix::from_element(1, 1, 0.5 + alpha);
    let reps = verify_poly_chain(&a, &InnerProduct::identity(1), &p, 1.0, &Vector::from_element(1, 1.0), &grid).unwrap();
    for r in &reps {
        all &= r.pass && r.max_violation <= 1e-8;
        worst = worst.max(r.max_violation);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.random_range(2..=5);
        let a = random_dissipative(&mut rng, n);
        let alpha = rng.random_range(0.0..0.5);
        let p = gramian_quadrature(&a, alpha, 1e-12).unwrap();
        let z: Vector = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let z0 = &z / z.norm();
        let reps = verify_poly_chain(&a, &InnerProduct::identity(n), &p, 1.0, &z0, &grid).unwrap();
        for r in &reps {
            all &= r.pass && r.max_violation <= 1e-8;
            worst = worst.max(r.max_violation);
        }
    }
    verdict(3, all, format!("worst negated margin {worst:e} (scalar case + 10 random instances)"));
    assert!(all);
}

/// Initial states for the decrease check: 8 directions at each of 3 radii.
fn decrease_ensemble() -> Vec<Vector> {
    let mut out = Vec::new();
    for r in [1.0, 3.0, 10.0] {
        for j in 0..8 {
            let th = 2.0 * PI * j as f64 / 8.0;
            out.push(Vector::from_vec(vec![r * th.cos(), r * th.sin()]));
        }
    }
    out
}

#[test]
fn criterion_4_strict_lyapunov_decrease() {
    let start = Instant::now();
    let sys = oscillator();
    let d = clamp();
    let cert = build_exp_certificate(&sys, &d).unwrap();
    let ensemble = decrease_ensemble();
    let mut worst = [f64::NEG_INFINITY; 2];
    let mut all_pass = true;
    let mut single = [0.0; 2];
    for (j, dt) in [1e-3, 5e-4].into_iter().enumerate() {
        for (i, z0) in ensemble.iter().enumerate() {
            let traj = integrate(&sys, &d, z0, &IntegratorConfig::new(dt, 20.0), Some(&cert)).unwrap();
            let rep = verify_lyapunov_decrease(&traj, &cert).unwrap();
            all_pass &= rep.pass;
            worst[j] = worst[j].max(rep.max_violation);
            if i == 0 {
                single[j] = rep.max_violation;
            }
        }
    }
    let shrink = worst[0] / worst[1];
    let elapsed = start.elapsed();
    let pass = all_pass && shrink >= 2.0 && elapsed < Duration::from_secs(30);
    verdict(
        4,
        pass,
        format!(
            "all {} runs pass; ensemble max violation {:e} -> {:e} (shrink {shrink:.2}x); \
             z0 = (1, 0) alone {:e} -> {:e}; {elapsed:?}",
            2 * ensemble.len(),
            worst[0],
            worst[1],
            single[0],
            single[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_semiglobal_exponential_decay() {
    let start = Instant::now();
    let kdv = discretize_kdv(2.0 * PI, 64, &|_| 1.0, 1.0).unwrap();
    let cfg = IntegratorConfig::new(1e-2, 30.0);
    let radii = [1.0, 5.0, 25.0];
    let sat = sweep_semiglobal(&kdv, &clamp(), &radii, &cfg).unwrap();
    let lin = sweep_semiglobal(&kdv, &DampingSpec::linear(), &radii, &cfg).unwrap();
    let fits_ok = sat.iter().all(|r| r.r_squared >= 0.99);
    let ratio = sat[2].mu / sat[0].mu;
    let trend = sweep_trend_ok(&sat, 0.2);
    let flat = lin.iter().all(|r| (r.mu - lin[0].mu).abs() <= 0.02 * lin[0].mu);
    let elapsed = start.elapsed();
    let pass = fits_ok && ratio <= 1.2 && trend && flat && elapsed < Duration::from_secs(300);
    let rows: Vec<String> = sat
        .iter()
        .map(|r| format!("r={} mu={:.6} K={:.4e} R2={:.6}", r.r, r.mu, r.k, r.r_squared))
        .collect();
    let lin_mu: Vec<String> = lin.iter().map(|r| format!("{:.6}", r.mu)).collect();
    verdict(
        5,
        pass,
        format!(
            "{}; mu(25)/mu(1) = {ratio:.4}; linear control mu = [{}]; {elapsed:?}",
            rows.join(", "),
            lin_mu.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_two_phase_behavior() {
    let d = clamp();
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, sys, z0, t_end) in [
        ("scalar", scalar(), Vector::from_element(1, 100.0), 110.0),
        ("oscillator", oscillator(), Vector::from_vec(vec![0.0, 100.0]), 200.0),
    ] {
        let cfg = IntegratorConfig {
            record_every: 10,
            ..IntegratorConfig::new(1e-3, t_end)
        };
        let traj = integrate(&sys, &d, &z0, &cfg, None).unwrap();
        let c_sigma = d.bound(sys.control_dim(), sys.u_weight).unwrap();
        let lp = fit_linear_phase(&traj, c_sigma, sys.b_eff_norm(), 1e-9).unwrap();
        let t_star = traj.t_star.unwrap();
        let tail = fit_exponential(&traj, Some((t_star, t_end))).unwrap();
        let ok = lp.pass && tail.r_squared >= 0.99;
        pass &= ok;
        notes.push(format!(
            "{name}: slope {:.6} in [{}, 0], t* = {t_star:.4}, tail R2 {:.6}",
            lp.estimate.rate, lp.slope_bound, tail.r_squared
        ));
    }
    // closed form of z' = -sat(z), z0 = 5: 5 - t until t = 4, then e^{-(t-4)}
    let traj = integrate(&scalar(), &d, &Vector::from_element(1, 5.0), &IntegratorConfig::new(1e-3, 6.0), None).unwrap();
    let mut err: f64 = 0.0;
    for (t, exact) in [(1.0, 4.0), (4.0, 1.0), (6.0, (-2.0f64).exp())] {
        let i = traj.times.iter().position(|&s| (s - t).abs() < 1e-9).unwrap();
        err = err.max((traj.states[i][0] - exact).abs());
    }
    pass &= err <= 1e-4;
    notes.push(format!("closed-form error at t = 1, 4, 6: {err:e}"));
    verdict(6, pass, notes.join("; "));
    assert!(pass);
}

#[test]
fn criterion_7_damping_definition() {
    let kinds = [
        DampingSpec::linear(),
        DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0),
        DampingSpec::componentwise(ScalarSaturation::Tanh, 1.0),
        DampingSpec::componentwise(ScalarSaturation::Arctan, 1.0),
        DampingSpec::norm_saturation(1.0),
    ];
    let mut pass = true;
    let mut worst_mono = f64::INFINITY;
    let mut worst_sector = f64::INFINITY;
    for d in &kinds {
        for dim in [1, 4, 64] {
            let rep = d.verify_definition(dim, 10_000, 7);
            pass &= rep.all_pass() && !rep.h0_singular;
            worst_mono = worst_mono.min(rep.monotone_margin);
            worst_sector = worst_sector.min(rep.sector_margin);
        }
    }

    // weak damping sigma(s) = sign(s)|s|^q
    let q = 0.5;
    let weak = DampingSpec::weak(q, 1.0);
    let mut h_err: f64 = 0.0;
    let mut sector_ok = true;
    let mut tight_large = 0.0;
    for i in 0..=100 {
        let x = 10f64.powf(-4.0 + 10.0 * i as f64 / 100.0);
        let h = weak.h_eval(x).unwrap();
        h_err = h_err.max((h - x.powf(q - 1.0)).abs() / x.powf(q - 1.0));
        // smallest admissible h at |s| = x is |sigma(s) - C1 s| / (C2 <sigma(s), s>)
        let s = [x];
        let sig = weak.apply(&s)[0];
        let needed = (sig - weak.c1 * x).abs() / (weak.c2 * sig * x);
        if x >= 0.25 {
            sector_ok &= needed <= h * (1.0 + 1e-12);
        }
        tight_large = needed / h;
    }
    let rep = weak.verify_definition(1, 10_000, 7);
    let flagged = rep.h0_singular && matches!(weak.h_eval(0.0), Err(Error::DomainError(_)));
    let weak_ok = h_err <= 1e-12 && sector_ok && (tight_large - 1.0).abs() < 1e-2 && flagged;
    pass &= weak_ok;
    verdict(
        7,
        pass,
        format!(
            "5 kinds x dims {{1, 4, 64}} x 1e4 samples: min monotone {worst_mono:e}, min sector {worst_sector:e}; \
             weak q = 1/2: h error {h_err:e}, needed/h at |s| = 1e6 is {tight_large:.6}, h(0) flagged = {flagged}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_conservation_control() {
    let wave = discretize_wave(32, &|_| 0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z: Vector = Vector::from_fn(wave.dim(), |_, _| StandardNormal.sample(&mut rng));
    let z0 = &z / wave.norm_h(&z);
    let traj = integrate(&wave, &DampingSpec::linear(), &z0, &IntegratorConfig::new(1e-3, 10.0), None).unwrap();
    let drift = traj.norm_h.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max);
    let pass = drift <= 1e-8 && traj.times.last().copied() == Some(10.0);
    verdict(8, pass, format!("max | ||z(t)||_H - ||z0||_H | = {drift:e} over [0, 10]"));
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_dampkit");
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("run.ini");
    fs::write(
        &config,
        "[system]\nname = finite_dim\nA = 0, 1; -1, 0\nB = 1; 0\n\n[damping]\nkind = tanh\nlevel = 0.5\n\n\
         [sim]\ndt = 1e-3\nt_end = 20\nz0 = random 5\n\n[analysis]\nfits = exponential, polynomial\n",
    )
    .unwrap();
    let run = |out: &str, cmd: &str| {
        let status = Command::new(bin)
            .args([cmd, "--config", config.to_str().unwrap(), "--out", out, "--seed", "42"])
            .env_remove("DAMPKIT_OUT_DIR")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    };
    let a = work.path().join("a");
    let b = work.path().join("b");
    for dir in [&a, &b] {
        run(dir.to_str().unwrap(), "simulate");
        run(dir.to_str().unwrap(), "fit-decay");
    }
    let mut identical = true;
    let mut sizes = Vec::new();
    for name in ["trajectory.csv", "decay.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        identical &= x == y && !x.is_empty();
        sizes.push(format!("{name} {} bytes", x.len()));
    }
    verdict(9, identical, format!("two runs with seed 42: {} identical = {identical}", sizes.join(", ")));
    assert!(identical);
}

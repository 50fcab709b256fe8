//! Time integration of `z' = Az - sqrt(k) B sigma(sqrt(k) B* z)`.
//!
//! Each step is the implicit midpoint rule
//! `z1 = z0 + dt (A zm + N(zm))`, `zm = (z0 + z1) / 2`, solved by fixed-point
//! iteration on `z1 = (I - dt/2 A)^{-1} [(I + dt/2 A) z0 + dt N(zm)]`. On the
//! linear part this is the trapezoidal rule and its first iterate is the
//! explicit-midpoint treatment of `N`; iterating to convergence makes the
//! step satisfy `|z1|^2 - |z0|^2 = 2 dt <A zm + N(zm), zm> <= 0` exactly.

use std::collections::HashMap;

use nalgebra::LU;

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::lyapunov::LyapunovCertificate;
use crate::models::SemiDiscreteSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorControl {
    None,
    /// Substeps are halved until the Richardson estimate of the local error
    /// is at most `target * ||z||_H`.
    StepHalving { target: f64 },
}

pub const DEFAULT_TARGET: f64 = 1e-8;
pub const MAX_HALVINGS: u32 = 16;
const FIXED_POINT_TOL: f64 = 1e-14;
const FIXED_POINT_MAX_ITER: usize = 50;
/// Relative growth of `||z||_H` per step tolerated before aborting.
pub const CONTRACTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub error_control: ErrorControl,
    /// Record every `record_every`-th step (the final step is always recorded).
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            error_control: ErrorControl::StepHalving { target: DEFAULT_TARGET },
            record_every: 1,
        }
    }

    pub fn without_error_control(mut self) -> Self {
        self.error_control = ErrorControl::None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidInput(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidInput("record_every must be at least 1".into()));
        }
        if let ErrorControl::StepHalving { target } = self.error_control {
            if !(target > 0.0) {
                return Err(Error::InvalidInput("error target must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub norm_h: Vec<f64>,
    pub norm_da: Vec<f64>,
    pub v: Option<Vec<f64>>,
    /// `<sigma(sqrt(k) B* z), sqrt(k) B* z>_U`.
    pub damping_power: Vec<f64>,
    pub t_star: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// A trajectory carrying only times and `H` norms, e.g. read back from CSV.
    pub fn from_norms(times: Vec<f64>, norm_h: Vec<f64>) -> Self {
        let n = times.len();
        let mut t = Self {
            times,
            states: Vec::new(),
            norm_da: norm_h.clone(),
            norm_h,
            v: None,
            damping_power: vec![0.0; n],
            t_star: None,
        };
        t.t_star = detect_unit_ball_entry(&t);
        t
    }
}

/// Evaluates the damping term and its power for one state.
struct Feedback<'a> {
    system: &'a SemiDiscreteSystem,
    damping: &'a DampingSpec,
    sqrt_k: f64,
}

impl Feedback<'_> {
    /// `(-sqrt(k) B sigma(sqrt(k) B* z), <sigma(.), sqrt(k) B* z>_U)`.
    fn eval(&self, z: &Vector) -> (Vector, f64) {
        let s: Vec<f64> = (&self.system.b_adj * z).iter().map(|v| v * self.sqrt_k).collect();
        let sig = self.damping.apply_weighted(&s, self.system.u_weight);
        let power = self.system.u_weight * sig.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>();
        let sig = Vector::from_vec(sig);
        (-(&self.system.b * sig) * self.sqrt_k, power)
    }
}

struct Stepper<'a> {
    system: &'a SemiDiscreteSystem,
    feedback: Feedback<'a>,
    /// Per substep size: `(I + tau A, LU of I - tau A)`.
    cache: HashMap<u32, (DenseMatrix, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    dt: f64,
}

impl<'a> Stepper<'a> {
    fn ensure_operators(&mut self, level: u32) {
        let n = self.system.dim();
        let a = &self.system.a;
        let tau = 0.5 * self.dt / f64::from(1u32 << level);
        self.cache.entry(level).or_insert_with(|| {
            let eye = DenseMatrix::identity(n, n);
            let explicit = &eye + a * tau;
            let implicit = (&eye - a * tau).lu();
            (explicit, implicit)
        });
    }

    /// One implicit-midpoint step of size `dt / 2^level`; `None` if the
    /// fixed-point iteration does not converge.
    fn step(&mut self, z0: &Vector, level: u32) -> Option<Vector> {
        self.ensure_operators(level);
        let h = self.dt / f64::from(1u32 << level);
        let (explicit, implicit) = &self.cache[&level];
        let base = explicit * z0;
        let mut z1 = z0.clone();
        for _ in 0..FIXED_POINT_MAX_ITER {
            let mid = (z0 + &z1) * 0.5;
            let (nl, _) = self.feedback.eval(&mid);
            let next = implicit.solve(&(&base + nl * h))?;
            let diff = (&next - &z1).amax();
            let scale = next.amax().max(f64::MIN_POSITIVE);
            z1 = next;
            if !z1.iter().all(|v| v.is_finite()) {
                return None;
            }
            if diff <= FIXED_POINT_TOL * scale {
                return Some(z1);
            }
        }
        None
    }

    fn substeps(&mut self, z0: &Vector, level: u32) -> Option<Vector> {
        let mut z = z0.clone();
        for _ in 0..(1u32 << level) {
            z = self.step(&z, level)?;
        }
        Some(z)
    }
}

/// Integrates the closed loop from `z0` over `[0, t_end]`.
pub fn integrate(
    system: &SemiDiscreteSystem,
    damping: &DampingSpec,
    z0: &Vector,
    config: &IntegratorConfig,
    cert: Option<&LyapunovCertificate>,
) -> Result<Trajectory> {
    config.validate()?;
    damping.validate()?;
    if z0.len() != system.dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {} but the system has dimension {}",
            z0.len(),
            system.dim()
        )));
    }
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("initial state has non-finite entries".into()));
    }
    if let Some(c) = cert {
        if c.dim() != system.dim() {
            return Err(Error::Dimension("certificate and system dimensions differ".into()));
        }
    }

    let feedback = Feedback {
        system,
        damping,
        sqrt_k: system.k.sqrt(),
    };
    let mut stepper = Stepper {
        system,
        feedback,
        cache: HashMap::new(),
        dt: config.dt,
    };

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        norm_h: Vec::new(),
        norm_da: Vec::new(),
        v: cert.map(|_| Vec::new()),
        damping_power: Vec::new(),
        t_star: None,
    };
    let record = |traj: &mut Trajectory, stepper: &Stepper, t: f64, z: &Vector| {
        traj.times.push(t);
        traj.norm_h.push(system.norm_h(z));
        traj.norm_da.push(system.norm_da(z));
        traj.damping_power.push(stepper.feedback.eval(z).1);
        if let (Some(v), Some(c)) = (traj.v.as_mut(), cert) {
            v.push(c.eval_v(z));
        }
        traj.states.push(z.clone());
    };

    let steps = config.steps();
    let norm0 = system.norm_h(z0);
    let mut z = z0.clone();
    let mut level: u32 = 0;
    record(&mut traj, &stepper, 0.0, &z);

    for n in 1..=steps {
        let t = n as f64 * config.dt;
        let before = system.norm_h(&z);
        let next = match config.error_control {
            ErrorControl::None => stepper
                .substeps(&z, 0)
                .ok_or(Error::StepRejectionLimit { t, halvings: 0 })?,
            ErrorControl::StepHalving { target } => {
                level = level.saturating_sub(1);
                loop {
                    if level > MAX_HALVINGS {
                        return Err(Error::StepRejectionLimit { t, halvings: MAX_HALVINGS });
                    }
                    let coarse = stepper.substeps(&z, level);
                    let fine = stepper.substeps(&z, level + 1);
                    if let (Some(c), Some(f)) = (coarse, fine) {
                        let est = system.norm_h(&(&f - &c)) / 3.0;
                        if est <= target * before {
                            break f;
                        }
                    }
                    level += 1;
                }
            }
        };
        let after = system.norm_h(&next);
        if after > before * (1.0 + CONTRACTION_TOL) + 1e-15 * norm0 {
            return Err(Error::ContractionViolation { t, before, after });
        }
        z = next;
        if n % config.record_every == 0 || n == steps {
            record(&mut traj, &stepper, t, &z);
        }
    }
    traj.t_star = detect_unit_ball_entry(&traj);
    Ok(traj)
}

/// First time `||z||_H <= 1`, interpolated linearly in `log ||z||_H`.
pub fn detect_unit_ball_entry(traj: &Trajectory) -> Option<f64> {
    let first = *traj.norm_h.first()?;
    if first <= 1.0 {
        return Some(traj.times[0]);
    }
    let i = traj.norm_h.iter().position(|&v| v <= 1.0)?;
    let (t0, t1) = (traj.times[i - 1], traj.times[i]);
    let (l0, l1) = (traj.norm_h[i - 1].ln(), traj.norm_h[i].ln());
    if l1 == l0 || !l1.is_finite() {
        return Some(t1);
    }
    Some(t0 + (t1 - t0) * (-l0) / (l1 - l0))
}

/// `(I - eps A)^{-1} z`, one resolvent smoothing step towards `D(A)`.
pub fn smooth_initial(system: &SemiDiscreteSystem, z: &Vector, eps: f64) -> Result<Vector> {
    let n = system.dim();
    (DenseMatrix::identity(n, n) - &system.a * eps)
        .lu()
        .solve(z)
        .ok_or_else(|| Error::SingularSystem("resolvent is singular".into()))
}

pub const SMOOTHING_EPS: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::ScalarSaturation;
    use crate::models::{discretize_kdv, discretize_wave, make_finite_dim};

    fn scalar_saturated() -> (SemiDiscreteSystem, DampingSpec) {
        let sys = make_finite_dim(DenseMatrix::zeros(1, 1), DenseMatrix::identity(1, 1), 1.0).unwrap();
        (sys, DampingSpec::componentwise(ScalarSaturation::Clamp, 1.0))
    }

    fn exact_saturated(t: f64) -> f64 {
        if t <= 4.0 {
            5.0 - t
        } else {
            (-(t - 4.0)).exp()
        }
    }

    #[test]
    fn scalar_linear_decay() {
        let mut sys = make_finite_dim(DenseMatrix::zeros(1, 1), DenseMatrix::identity(1, 1), 1.0).unwrap();
        sys.a[(0, 0)] = -1.0;
        sys.b.fill(0.0);
        sys.b_adj.fill(0.0);
        let traj = integrate(&sys, &DampingSpec::linear(), &Vector::from_element(1, 1.0), &IntegratorConfig::new(1e-3, 1.0), None).unwrap();
        let last = traj.states.last().unwrap()[0];
        assert!((last - (-1f64).exp()).abs() < 1e-6);
        assert!((traj.times.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_saturated_closed_form() {
        let (sys, d) = scalar_saturated();
        let traj = integrate(&sys, &d, &Vector::from_element(1, 5.0), &IntegratorConfig::new(1e-3, 6.0), None).unwrap();
        for t in [1.0, 4.0, 6.0] {
            let i = (t / 1e-3f64).round() as usize;
            assert!((traj.times[i] - t).abs() < 1e-12);
            assert!((traj.states[i][0] - exact_saturated(t)).abs() < 1e-4, "t = {t}: {}", traj.states[i][0]);
        }
        let ts = traj.t_star.unwrap();
        assert!((ts - 4.0).abs() <= 1e-3);
    }

    #[test]
    fn unit_ball_entry_cases() {
        let inside = Trajectory::from_norms(vec![0.0, 1.0], vec![0.5, 0.4]);
        assert_eq!(inside.t_star, Some(0.0));
        let never = Trajectory::from_norms(vec![0.0, 1.0, 2.0], vec![2.0, 2.0, 2.0]);
        assert_eq!(never.t_star, None);
        let cross = Trajectory::from_norms(vec![0.0, 1.0], vec![std::f64::consts::E, 1.0 / std::f64::consts::E]);
        assert!((cross.t_star.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn undamped_wave_conserves_energy() {
        let sys = discretize_wave(32, &|_| 0.0, 1.0).unwrap();
        let z0 = Vector::from_fn(sys.dim(), |i, _| ((i * 7 % 13) as f64 - 6.0) / 6.0);
        let cfg = IntegratorConfig {
            record_every: 100,
            ..IntegratorConfig::new(1e-3, 10.0).without_error_control()
        };
        let traj = integrate(&sys, &DampingSpec::linear(), &z0, &cfg, None).unwrap();
        let e0 = traj.norm_h[0];
        for e in &traj.norm_h {
            assert!((e - e0).abs() <= 1e-8 * e0);
        }
    }

    #[test]
    fn contraction_and_nonnegative_power_on_kdv() {
        let sys = discretize_kdv(2.0 * std::f64::consts::PI, 32, &|_| 1.0, 1.0).unwrap();
        let d = DampingSpec::componentwise(ScalarSaturation::Tanh, 0.5);
        let nodes = sys.nodes().unwrap();
        let z0 = Vector::from_iterator(sys.dim(), nodes.iter().map(|x| 3.0 * x.sin()));
        let traj = integrate(&sys, &d, &z0, &IntegratorConfig::new(1e-2, 2.0), None).unwrap();
        for w in traj.norm_h.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        assert!(traj.damping_power.iter().all(|p| *p >= -1e-12));
    }

    #[test]
    fn second_order_convergence() {
        let sys = make_finite_dim(
            DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            1.0,
        )
        .unwrap();
        let d = DampingSpec::componentwise(ScalarSaturation::Tanh, 1.0);
        let z0 = Vector::from_vec(vec![2.0, -1.0]);
        let run = |dt: f64| {
            let cfg = IntegratorConfig::new(dt, 2.0).without_error_control();
            integrate(&sys, &d, &z0, &cfg, None).unwrap().states.last().unwrap().clone()
        };
        let reference = run(0.0025);
        let e1 = (run(0.04) - &reference).norm();
        let e2 = (run(0.02) - &reference).norm();
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn energy_identity_along_run() {
        let sys = discretize_wave(16, &|x| if x > 0.3 && x < 0.7 { 1.0 } else { 0.0 }, 1.0).unwrap();
        let d = DampingSpec::componentwise(ScalarSaturation::Arctan, 0.3);
        let z0 = Vector::from_fn(sys.dim(), |i, _| (i as f64 * 0.7).sin());
        let dt = 1e-3;
        let traj = integrate(&sys, &d, &z0, &IntegratorConfig::new(dt, 1.0), None).unwrap();
        let w = sys.h_ip.weight();
        for k in (0..traj.len() - 1).step_by(10) {
            let lhs = (traj.norm_h[k + 1].powi(2) - traj.norm_h[k].powi(2)) / dt;
            let z = &traj.states[k];
            let z1 = &traj.states[k + 1];
            let az = 2.0 * z.dot(&(w * (&sys.a * z)));
            let az1 = 2.0 * z1.dot(&(w * (&sys.a * z1)));
            let rhs = 0.5 * (az - 2.0 * traj.damping_power[k] + az1 - 2.0 * traj.damping_power[k + 1]);
            assert!((lhs - rhs).abs() <= 1e-3 * traj.norm_h[0].powi(2), "k = {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (sys, d) = scalar_saturated();
        assert!(integrate(&sys, &d, &Vector::zeros(2), &IntegratorConfig::new(1e-3, 1.0), None).is_err());
        assert!(integrate(&sys, &d, &Vector::zeros(1), &IntegratorConfig::new(-1.0, 1.0), None).is_err());
    }

    #[test]
    fn smoothing_is_resolvent() {
        let sys = discretize_kdv(5.0, 16, &|_| 1.0, 1.0).unwrap();
        let z = Vector::from_element(sys.dim(), 1.0);
        let s = smooth_initial(&sys, &z, 1e-3).unwrap();
        assert!((&s - &sys.a * &s * 1e-3 - z).amax() < 1e-10);
    }
}

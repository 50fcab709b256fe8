//! Lyapunov certificates for the damped closed loop.
//!
//! All certificates work with the effective input operator `sqrt(k) B`, so
//! the linear comparison system is `A~ = A - C1 k B B*`. The quadratic part
//! `<Pz, z>_H` is stored as its Gram matrix `G` (`<Pz, z>_H = z^T G z`) and
//! is normalized so that `<A~z, Pz> + <Pz, A~z> <= -C ||z||_H^2` with `C = 1`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::damping::{DampingSpec, HFunction};
use crate::error::{Error, Result};
use crate::linalg::{self, gramian_quadrature, solve_lyapunov, sym_eig_range, DenseMatrix, InnerProduct, Vector};
use crate::models::{write_matrix, NormChoice, SemiDiscreteSystem};
use crate::quad::adaptive_simpson;

/// Decrease constant produced by the `-I` normalization.
pub const DECREASE_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    GlobalExpSU,
    SemiglobalExpSneqU,
    SemiglobalPoly,
    FiniteDim,
}

impl CertificateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CertificateKind::GlobalExpSU => "global_exp_SU",
            CertificateKind::SemiglobalExpSneqU => "semiglobal_exp_SneqU",
            CertificateKind::SemiglobalPoly => "semiglobal_poly",
            CertificateKind::FiniteDim => "finite_dim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            CertificateKind::GlobalExpSU,
            CertificateKind::SemiglobalExpSneqU,
            CertificateKind::SemiglobalPoly,
            CertificateKind::FiniteDim,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    /// Kinds whose functional carries the `K(||z||^2)` term.
    pub fn uses_k_term(&self) -> bool {
        matches!(self, CertificateKind::GlobalExpSU | CertificateKind::FiniteDim)
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub kind: CertificateKind,
    /// Gram matrix of `P` in the `H` product.
    pub p: DenseMatrix,
    pub h_ip: InnerProduct,
    /// Comparison matrix `A - C1 k B B*`.
    pub a_tilde: DenseMatrix,
    pub c: f64,
    /// Coercivity constant `lambda_min(P)` in `H`.
    pub alpha: f64,
    pub m: f64,
    pub mu: Option<f64>,
    pub r: Option<f64>,
    /// Embedding constant of the effective input operator.
    pub c_s: Option<f64>,
    pub p_norm_h: f64,
    /// `||P||` on `D(A)` with the sum norm (upper bound).
    pub p_norm_da: Option<f64>,
    /// `||sqrt(k) B*||_{L(H,U)}`.
    pub b_norm: f64,
    pub c_theta: Option<f64>,
    pub gamma: Option<f64>,
    /// Identity shift added to the Gramian.
    pub shift: f64,
    pub damping: DampingSpec,
    pub k: f64,
}

/// `K(X) = int_0^X sqrt(v) h(beta sqrt(v)) dv`.
pub fn k_function(h: &HFunction, beta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match h {
        HFunction::Constant(c) => c * (2.0 / 3.0) * x.powf(1.5),
        HFunction::Power(p) => {
            let e = (3.0 + p) / 2.0;
            beta.powf(*p) * x.powf(e) / e
        }
        HFunction::Table(_) => {
            // v = u^2 removes the square-root kink at the origin
            let f = |u: f64| 2.0 * u * u * h.eval(beta * u).unwrap_or(0.0);
            adaptive_simpson(f, 0.0, x.sqrt(), 1e-10)
        }
    }
}

fn operator_norms(system: &SemiDiscreteSystem, p_form: &DenseMatrix) -> (f64, f64) {
    let p_hat = system.h_ip.form_to_euclidean(p_form);
    let (lmin, lmax) = sym_eig_range(&p_hat);
    (lmin, lmax)
}

/// `sqrt(2) * ||P||` in the Hilbert graph norm, an upper bound for the
/// operator norm under `||z||_H + ||Az||_H`.
pub fn p_norm_da(system: &SemiDiscreteSystem, p_form: &DenseMatrix) -> Result<f64> {
    let w = system.h_ip.weight();
    let graph = InnerProduct::new(linalg::symmetrize(&(w + system.a.transpose() * w * &system.a)))?;
    let p_op = w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("H weight lost definiteness".into()))?
        .solve(p_form);
    Ok(std::f64::consts::SQRT_2 * linalg::op_norm(&graph.operator_to_euclidean(&p_op)))
}

fn check_gain(damping: &DampingSpec) -> Result<()> {
    damping.validate()
}

fn lyapunov_form(system: &SemiDiscreteSystem, a_tilde: &DenseMatrix) -> Result<DenseMatrix> {
    let a_hat = system.h_ip.operator_to_euclidean(a_tilde);
    let n = system.dim();
    let p_hat = solve_lyapunov(&a_hat, &DenseMatrix::identity(n, n))?;
    Ok(system.h_ip.form_from_euclidean(&p_hat))
}

fn base_certificate(
    kind: CertificateKind,
    system: &SemiDiscreteSystem,
    damping: &DampingSpec,
    a_tilde: DenseMatrix,
    p: DenseMatrix,
) -> LyapunovCertificate {
    let (alpha, p_norm_h) = operator_norms(system, &p);
    LyapunovCertificate {
        kind,
        p,
        h_ip: system.h_ip.clone(),
        a_tilde,
        c: DECREASE_CONSTANT,
        alpha,
        m: 0.0,
        mu: None,
        r: None,
        c_s: None,
        p_norm_h,
        p_norm_da: None,
        b_norm: system.b_eff_norm(),
        c_theta: None,
        gamma: None,
        shift: 0.0,
        damping: damping.clone(),
        k: system.k,
    }
}

/// Global certificate `V = <Pz,z> + M K(||z||^2)` for `S = U`, with
/// `M = C2 ||B*|| ||P||`.
pub fn build_exp_certificate(system: &SemiDiscreteSystem, damping: &DampingSpec) -> Result<LyapunovCertificate> {
    check_gain(damping)?;
    if system.s_choice == NormChoice::SSup {
        return Err(Error::WrongNormChoice);
    }
    let a_tilde = system.closed_loop(damping.c1);
    let p = lyapunov_form(system, &a_tilde)?;
    let mut cert = base_certificate(CertificateKind::GlobalExpSU, system, damping, a_tilde, p);
    cert.m = damping.c2 * cert.b_norm * cert.p_norm_h;
    Ok(cert)
}

/// Finite-dimensional form of [`build_exp_certificate`] on Euclidean `R^n`.
pub fn build_finite_dim_certificate(system: &SemiDiscreteSystem, damping: &DampingSpec) -> Result<LyapunovCertificate> {
    if system.kind != crate::models::SystemKind::FiniteDim {
        return Err(Error::InvalidInput("finite_dim certificate needs a finite-dimensional system".into()));
    }
    let mut cert = build_exp_certificate(system, damping)?;
    cert.kind = CertificateKind::FiniteDim;
    Ok(cert)
}

/// Semi-global certificate `V = <Pz,z> + M ||z||^2` valid for `||z0||_{D(A)} <= r`
/// when the damping is measured in the sup norm.
pub fn build_semiglobal_certificate(
    system: &SemiDiscreteSystem,
    damping: &DampingSpec,
    r: f64,
    c_s: Option<f64>,
) -> Result<LyapunovCertificate> {
    check_gain(damping)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("radius r must be positive, got {r}")));
    }
    if !damping.uses_sup_norm() {
        return Err(Error::WrongNormChoice);
    }
    let c_s = c_s.ok_or(Error::MissingCS)?;
    let a_tilde = system.closed_loop(damping.c1);
    let p = lyapunov_form(system, &a_tilde)?;
    let mut cert = base_certificate(CertificateKind::SemiglobalExpSneqU, system, damping, a_tilde, p);
    let p_da = p_norm_da(system, &cert.p)?;
    let c_s_eff = system.k.sqrt() * c_s;
    let h = damping.h_eval(cert.b_norm * r)?;
    cert.m = c_s_eff * damping.c2 * h * r * p_da;
    cert.mu = Some(semiglobal_rate(cert.c, cert.p_norm_h, cert.m));
    cert.r = Some(r);
    cert.c_s = Some(c_s_eff);
    cert.p_norm_da = Some(p_da);
    Ok(cert)
}

/// `min(C / (2 ||P||), C / (2M))`.
pub fn semiglobal_rate(c: f64, p_norm: f64, m: f64) -> f64 {
    let a = c / (2.0 * p_norm);
    if m > 0.0 {
        a.min(c / (2.0 * m))
    } else {
        a
    }
}

/// Gram matrix of `P_1 = int_0^inf e^{sA~*} e^{sA~} ds + shift I` in `H`.
pub fn gramian_form(system: &SemiDiscreteSystem, a_tilde: &DenseMatrix, shift: f64, tol: f64) -> Result<DenseMatrix> {
    let a_hat = system.h_ip.operator_to_euclidean(a_tilde);
    let p_hat = gramian_quadrature(&a_hat, shift, tol)?;
    Ok(system.h_ip.form_from_euclidean(&p_hat))
}

/// Probe horizon and grid used to calibrate `C_theta`.
pub const CALIBRATION_HORIZON: f64 = 100.0;
pub const CALIBRATION_STEPS: usize = 200;
const CALIBRATION_RANDOM_PROBES: usize = 20;

/// Smallest `C_theta` such that
/// `<e^{tA~}z, P_1 e^{tA~}z> <= C_theta (1+t)^{-(2 gamma - 1)} ||z||_{D(A)}^2`
/// on the probe set, and `C_theta >= ||P_1||_{L(H)}`.
pub fn calibrate_c_theta(
    system: &SemiDiscreteSystem,
    a_tilde: &DenseMatrix,
    p_form: &DenseMatrix,
    gamma: f64,
) -> Result<f64> {
    let n = system.dim();
    let mut probes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xca11b);
    for _ in 0..CALIBRATION_RANDOM_PROBES {
        probes.push(Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)));
    }
    let mut eig = linalg::eigenvalues(a_tilde);
    eig.sort_by(|a, b| b.re.total_cmp(&a.re));
    for lambda in eig.into_iter().filter(|l| l.im >= 0.0).take(CALIBRATION_RANDOM_PROBES) {
        if let Ok(v) = linalg::eigenvector(a_tilde, lambda) {
            probes.push(v.map(|c| c.re));
            if lambda.im != 0.0 {
                probes.push(v.map(|c| c.im));
            }
        }
    }
    let dt = CALIBRATION_HORIZON / CALIBRATION_STEPS as f64;
    let step = linalg::matrix_exponential(a_tilde, dt)?;
    let mut c: f64 = 0.0;
    for probe in probes {
        let scale = system.norm_da(&probe);
        if !(scale > 0.0) {
            continue;
        }
        let mut z = probe / scale;
        for j in 0..=CALIBRATION_STEPS {
            let t = j as f64 * dt;
            let v = z.dot(&(p_form * &z));
            c = c.max(v * (1.0 + t).powf(2.0 * gamma - 1.0));
            z = &step * z;
        }
    }
    let (_, p_norm) = operator_norms(system, p_form);
    Ok(c.max(p_norm))
}

/// Polynomial certificate `V = <P_1 z, z> + M ||z||^2` for `S = U`, with
/// `M = C2 C_theta h(||B*|| r) ||B*|| r`.
pub fn build_poly_certificate(
    system: &SemiDiscreteSystem,
    damping: &DampingSpec,
    r: f64,
    gamma: f64,
    c_theta: f64,
    shift: f64,
) -> Result<LyapunovCertificate> {
    check_gain(damping)?;
    if !(gamma > 0.5) {
        return Err(Error::InvalidInput(format!("gamma must exceed 1/2, got {gamma}")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("radius r must be positive, got {r}")));
    }
    if !(shift >= 0.0) {
        return Err(Error::InvalidInput("Gramian shift must be nonnegative".into()));
    }
    if system.s_choice == NormChoice::SSup {
        return Err(Error::WrongNormChoice);
    }
    let a_tilde = system.closed_loop(damping.c1);
    let p = gramian_form(system, &a_tilde, shift, 1e-12)?;
    let needed = calibrate_c_theta(system, &a_tilde, &p, gamma)?;
    if !(c_theta >= needed) {
        return Err(Error::CalibrationFailed(format!(
            "C_theta = {c_theta} is below the probe requirement {needed} for gamma = {gamma}"
        )));
    }
    let mut cert = base_certificate(CertificateKind::SemiglobalPoly, system, damping, a_tilde, p);
    let h = damping.h_eval(cert.b_norm * r)?;
    cert.m = damping.c2 * c_theta * h * cert.b_norm * r;
    cert.r = Some(r);
    cert.c_theta = Some(c_theta);
    cert.gamma = Some(gamma);
    cert.shift = shift;
    Ok(cert)
}

impl LyapunovCertificate {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn quadratic(&self, z: &Vector) -> f64 {
        z.dot(&(&self.p * z))
    }

    pub fn k_value(&self, x: f64) -> f64 {
        k_function(&self.damping.h, self.b_norm, x)
    }

    pub fn eval_v(&self, z: &Vector) -> f64 {
        assert_eq!(z.len(), self.dim(), "state dimension does not match certificate");
        let x = self.h_ip.norm_sq(z);
        let extra = if self.m == 0.0 {
            0.0
        } else if self.kind.uses_k_term() {
            self.m * self.k_value(x)
        } else {
            self.m * x
        };
        self.quadratic(z) + extra
    }

    /// Kind-specific lower and upper bounds on `V(z)`.
    ///
    /// `norm_da` is `||z||_{D(A)}`, needed only by the polynomial upper bound.
    pub fn sandwich_bounds(&self, z: &Vector, norm_da: f64) -> (f64, f64) {
        let x = self.h_ip.norm_sq(z);
        let nz = x.sqrt();
        match self.kind {
            CertificateKind::GlobalExpSU | CertificateKind::FiniteDim => {
                let h0 = self.damping.h_eval(0.0).unwrap_or(f64::INFINITY);
                let hz = self.damping.h_eval(self.b_norm * nz).unwrap_or(f64::INFINITY);
                let (hmin, hmax) = (h0.min(hz), h0.max(hz));
                let cube = nz * nz * nz;
                let tail_lo = if self.m == 0.0 || cube == 0.0 { 0.0 } else { self.m * hmin * (2.0 / 3.0) * cube };
                let tail_hi = if self.m == 0.0 || cube == 0.0 { 0.0 } else { self.m * hmax * cube };
                (self.alpha * x + tail_lo, self.p_norm_h * x + tail_hi)
            }
            CertificateKind::SemiglobalExpSneqU => ((self.alpha + self.m) * x, (self.p_norm_h + self.m) * x),
            CertificateKind::SemiglobalPoly => {
                let c_theta = self.c_theta.unwrap_or(self.p_norm_h);
                ((self.alpha + self.m) * x, self.m * x + c_theta * norm_da * norm_da)
            }
        }
    }

    /// Largest `z^T (A~^T G + G A~ + C W) z / ||z||_H^2`; nonpositive when
    /// the Lyapunov inequality holds.
    pub fn lyapunov_residual(&self) -> f64 {
        let s = self.a_tilde.transpose() * &self.p + &self.p * &self.a_tilde + self.h_ip.weight() * self.c;
        sym_eig_range(&self.h_ip.form_to_euclidean(&s)).1
    }

    /// Re-derives `M` (and `mu`) from the stored fields.
    pub fn formulas_hold(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        let d = &self.damping;
        match self.kind {
            CertificateKind::GlobalExpSU | CertificateKind::FiniteDim => close(self.m, d.c2 * self.b_norm * self.p_norm_h),
            CertificateKind::SemiglobalExpSneqU => {
                let (Some(r), Some(cs), Some(pda), Some(mu)) = (self.r, self.c_s, self.p_norm_da, self.mu) else {
                    return false;
                };
                let Ok(h) = d.h_eval(self.b_norm * r) else { return false };
                let m = cs * d.c2 * h * r * pda;
                close(self.m, m) && close(mu, semiglobal_rate(self.c, self.p_norm_h, m))
            }
            CertificateKind::SemiglobalPoly => {
                let (Some(r), Some(ct)) = (self.r, self.c_theta) else { return false };
                let Ok(h) = d.h_eval(self.b_norm * r) else { return false };
                close(self.m, d.c2 * ct * h * self.b_norm * r)
            }
        }
    }

    /// Scalars as `key = value` lines; `P` goes to a separate matrix file.
    pub fn export_text(&self, p_file: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x}"));
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "dim = {}", self.dim());
        let _ = writeln!(s, "C = {}", self.c);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "M = {}", self.m);
        let _ = writeln!(s, "mu = {}", opt(self.mu));
        let _ = writeln!(s, "r = {}", opt(self.r));
        let _ = writeln!(s, "c_S = {}", opt(self.c_s));
        let _ = writeln!(s, "norm_P_H = {}", self.p_norm_h);
        let _ = writeln!(s, "norm_P_DA = {}", opt(self.p_norm_da));
        let _ = writeln!(s, "norm_B = {}", self.b_norm);
        let _ = writeln!(s, "C_theta = {}", opt(self.c_theta));
        let _ = writeln!(s, "gamma = {}", opt(self.gamma));
        let _ = writeln!(s, "shift = {}", self.shift);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "damping = {}", self.damping.kind.name());
        let _ = writeln!(s, "C1 = {}", self.damping.c1);
        let _ = writeln!(s, "C2 = {}", self.damping.c2);
        let _ = writeln!(s, "P_file = {p_file}");
        s
    }

    pub fn p_matrix_text(&self) -> String {
        write_matrix(&self.p)
    }
}

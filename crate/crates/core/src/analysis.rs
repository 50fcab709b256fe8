//! Decay fits, certificate checks along trajectories, the Gramian chain
//! inequalities, two-phase (linear then exponential) analysis and radius sweeps.

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, matrix_exponential, DenseMatrix, InnerProduct, Vector};
use crate::lyapunov::LyapunovCertificate;
use crate::models::SemiDiscreteSystem;
use crate::quad::{adaptive_simpson, invert_increasing};
use crate::sim::{integrate, IntegratorConfig, Trajectory};

/// Norms below this are treated as solver noise and excluded from fits.
pub const NOISE_FLOOR: f64 = 1e-8;
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `K e^{-mu t}`
    Exponential,
    /// `C (1+t)^{-gamma}`
    Polynomial,
    /// `c0 + slope t`
    LinearPhase,
}

impl DecayModel {
    pub fn name(&self) -> &'static str {
        match self {
            DecayModel::Exponential => "exponential",
            DecayModel::Polynomial => "polynomial",
            DecayModel::LinearPhase => "linear_phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayEstimate {
    pub model: DecayModel,
    /// `mu`, `gamma`, or the signed slope.
    pub rate: f64,
    pub prefactor: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub r_squared: f64,
    /// Polynomial rate at or below 1/2.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
}

impl VerificationReport {
    pub fn new(check: &str, max_violation: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            check: check.to_string(),
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
            samples,
        }
    }
}

/// Least squares `y = a + b x`; returns `(a, b, r_squared)`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res <= f64::EPSILON * my.abs().max(1.0) {
        1.0
    } else {
        0.0
    };
    (a, b, r2)
}

/// Indices inside the window with norms above the noise floor; the default
/// window is the latter half of all such samples.
fn fit_indices(traj: &Trajectory, window: Option<(f64, f64)>) -> Result<Vec<usize>> {
    let usable: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.norm_h[i] > NOISE_FLOOR && traj.norm_h[i].is_finite())
        .collect();
    let idx: Vec<usize> = match window {
        Some((lo, hi)) => usable
            .into_iter()
            .filter(|&i| traj.times[i] >= lo && traj.times[i] <= hi)
            .collect(),
        None => {
            let half = usable.len() / 2;
            usable[half..].to_vec()
        }
    };
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            have: idx.len(),
            need: MIN_FIT_SAMPLES,
        });
    }
    Ok(idx)
}

/// Log-linear fit `log ||z||_H = log K - mu t`.
pub fn fit_exponential(traj: &Trajectory, window: Option<(f64, f64)>) -> Result<DecayEstimate> {
    let idx = fit_indices(traj, window)?;
    let x: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| traj.norm_h[i].ln()).collect();
    let (a, b, r2) = linear_regression(&x, &y);
    Ok(DecayEstimate {
        model: DecayModel::Exponential,
        rate: -b,
        prefactor: a.exp(),
        t_lo: x[0],
        t_hi: x[x.len() - 1],
        r_squared: r2,
        flagged: false,
    })
}

/// Log-log fit `log ||z||_H = log C - gamma log(1+t)`.
pub fn fit_polynomial(traj: &Trajectory, window: Option<(f64, f64)>) -> Result<DecayEstimate> {
    let idx = fit_indices(traj, window)?;
    let t: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let x: Vec<f64> = t.iter().map(|v| (1.0 + v).ln()).collect();
    let y: Vec<f64> = idx.iter().map(|&i| traj.norm_h[i].ln()).collect();
    let (a, b, r2) = linear_regression(&x, &y);
    Ok(DecayEstimate {
        model: DecayModel::Polynomial,
        rate: -b,
        prefactor: a.exp(),
        t_lo: t[0],
        t_hi: t[t.len() - 1],
        r_squared: r2,
        flagged: -b <= 0.5,
    })
}

/// Checks `(V[k+1] - V[k]) / dt_k + C ||z_{k+1}||_H^2 <= tol` at every step,
/// with `tol = 1e-4 V[0]`.
///
/// Norms are nonincreasing along the flow, so `V' <= -C ||z||^2` integrated
/// over a step implies this form exactly; the left-endpoint norm would leave
/// an `O(dt)` gap for any tight certificate.
pub fn check_decrease(times: &[f64], norm_h: &[f64], v: &[f64], c: f64) -> VerificationReport {
    let tol = 1e-4 * v.first().copied().unwrap_or(0.0).abs();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..times.len().saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        let viol = (v[k + 1] - v[k]) / dt + c * norm_h[k + 1] * norm_h[k + 1];
        worst = worst.max(viol);
    }
    VerificationReport::new("lyapunov_decrease", worst, tol, times.len().saturating_sub(1))
}

pub fn verify_lyapunov_decrease(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<VerificationReport> {
    let v = traj
        .v
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trajectory has no V values; integrate with a certificate".into()))?;
    Ok(check_decrease(&traj.times, &traj.norm_h, v, cert.c))
}

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `int_0^len ||e^{sA} z||_H^2 ds` by composite 8-point Gauss-Legendre and
/// the state at the end of the interval.
fn flow_energy(a: &DenseMatrix, ip: &InnerProduct, z: &Vector, len: f64, panel: f64) -> Result<(f64, Vector)> {
    if len <= 0.0 {
        return Ok((0.0, z.clone()));
    }
    let panels = (len / panel).ceil().max(1.0) as usize;
    let width = len / panels as f64;
    let nodes: Vec<(DenseMatrix, f64)> = GL8
        .iter()
        .map(|&(x, w)| Ok((matrix_exponential(a, 0.5 * width * (x + 1.0))?, 0.5 * width * w)))
        .collect::<Result<_>>()?;
    let step = matrix_exponential(a, width)?;
    let mut acc = 0.0;
    let mut z = z.clone();
    for _ in 0..panels {
        for (e, w) in &nodes {
            acc += w * ip.norm_sq(&(e * &z));
        }
        z = &step * z;
    }
    Ok((acc, z))
}

/// Verifies, along the linear flow `z(t) = e^{tA} z0` and `V(z) = z^T G z`:
///
/// * `tail_integral`: `V(z(t)) >= C int_t^inf ||z(s)||_H^2 ds`;
/// * `decay_chain`: `(1+t) ||z(t)||_H^2 <= (4/C) V(z(t/2))` for `t >= 1`.
///
/// Violations are reported as negated margins with tolerance `1e-8`.
pub fn verify_poly_chain(
    a: &DenseMatrix,
    h_ip: &InnerProduct,
    p_form: &DenseMatrix,
    c: f64,
    z0: &Vector,
    t_grid: &[f64],
) -> Result<[VerificationReport; 2]> {
    const TOL: f64 = 1e-8;
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= linalg::HURWITZ_EPS {
        return Err(Error::NotHurwitz { abscissa });
    }
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("t_grid must be nonnegative and increasing".into()));
    }
    let a_norm = a.norm().max(1e-12);
    let panel = (0.25 / a_norm).min(0.5);
    let v = |z: &Vector| z.dot(&(p_form * z));

    // segment integrals between grid points, then the tail beyond the last one
    let mut states = Vec::with_capacity(t_grid.len());
    let mut segments = Vec::with_capacity(t_grid.len());
    let mut z = matrix_exponential(a, t_grid.first().copied().unwrap_or(0.0))? * z0;
    for (i, &t) in t_grid.iter().enumerate() {
        states.push(z.clone());
        let next = t_grid.get(i + 1).copied();
        if let Some(tn) = next {
            let (e, zn) = flow_energy(a, h_ip, &z, tn - t, panel)?;
            segments.push(e);
            z = zn;
        }
    }
    let decay = abscissa.abs();
    let scale0 = h_ip.norm_sq(z0).max(f64::MIN_POSITIVE);
    let mut tail = 0.0;
    let mut horizon = 0.0;
    while h_ip.norm_sq(&z) > 1e-20 * scale0 && horizon < 1e5 {
        let len = 1.0 / decay;
        let (e, zn) = flow_energy(a, h_ip, &z, len, panel)?;
        tail += e;
        z = zn;
        horizon += len;
    }
    // exponential remainder with the asymptotic rate
    tail += h_ip.norm_sq(&z) / (2.0 * decay);

    let mut integrals = vec![0.0; t_grid.len()];
    let mut acc = tail;
    for i in (0..t_grid.len()).rev() {
        integrals[i] = acc;
        if i > 0 {
            acc += segments[i - 1];
        }
    }

    let mut worst_tail = f64::NEG_INFINITY;
    let mut worst_chain = f64::NEG_INFINITY;
    let mut chain_samples = 0;
    for (i, &t) in t_grid.iter().enumerate() {
        worst_tail = worst_tail.max(c * integrals[i] - v(&states[i]));
        if t >= 1.0 {
            let half = matrix_exponential(a, 0.5 * t)? * z0;
            let lhs = (1.0 + t) * h_ip.norm_sq(&states[i]);
            worst_chain = worst_chain.max(lhs - 4.0 / c * v(&half));
            chain_samples += 1;
        }
    }
    Ok([
        VerificationReport::new("tail_integral", worst_tail, TOL, t_grid.len()),
        VerificationReport::new("decay_chain", worst_chain, TOL, chain_samples),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPhaseFit {
    pub estimate: DecayEstimate,
    /// `-2 C_sigma ||B||`.
    pub slope_bound: f64,
    pub pass: bool,
}

/// Linear fit of `||z||_H` against `t` on `[0, t*]`, checked against the
/// converse bound `||z(t)|| >= ||z0|| - 2 C_sigma ||B|| t`.
pub fn fit_linear_phase(traj: &Trajectory, c_sigma: f64, b_norm: f64, tol: f64) -> Result<LinearPhaseFit> {
    if traj.is_empty() || traj.norm_h[0] <= 1.0 {
        return Err(Error::NoLinearPhase("trajectory starts inside the unit ball".into()));
    }
    let t_star = traj
        .t_star
        .ok_or_else(|| Error::NoLinearPhase("trajectory never enters the unit ball".into()))?;
    let idx: Vec<usize> = (0..traj.len()).filter(|&i| traj.times[i] <= t_star).collect();
    if idx.len() < 3 {
        return Err(Error::NoLinearPhase(format!("only {} samples before t*", idx.len())));
    }
    let x: Vec<f64> = idx.iter().map(|&i| traj.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| traj.norm_h[i]).collect();
    let (a, b, r2) = linear_regression(&x, &y);
    let slope_bound = -2.0 * c_sigma * b_norm;
    Ok(LinearPhaseFit {
        estimate: DecayEstimate {
            model: DecayModel::LinearPhase,
            rate: b,
            prefactor: a,
            t_lo: x[0],
            t_hi: x[x.len() - 1],
            r_squared: r2,
            flagged: false,
        },
        slope_bound,
        pass: b >= slope_bound - tol && b <= tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub mu: f64,
    /// Fitted prefactor `K(r)`.
    pub k: f64,
    pub r_squared: f64,
}

/// Real eigendirection of `A - gain k BB*`. Eigenvalues are ordered by modulus,
/// ties by decreasing imaginary part; the complex phase is rotated so that the
/// largest entry is real and positive.
pub fn eigen_direction(system: &SemiDiscreteSystem, gain: f64, index: usize) -> Result<Vector> {
    let a_tilde = system.closed_loop(gain);
    let mut eig = linalg::eigenvalues(&a_tilde);
    eig.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(b.im.total_cmp(&a.im)));
    let lambda = *eig
        .get(index)
        .ok_or_else(|| Error::Dimension(format!("eigenvector index {index} out of range 0..{}", eig.len())))?;
    let v = linalg::eigenvector(&a_tilde, lambda)?;
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let phase = pivot.conj() / pivot.norm();
    Ok(v.map(|c| (c * phase).re))
}

/// Unit-`D(A)`-norm direction used by sweeps: the eigendirection of
/// `A - C1 k BB*` with the smallest eigenvalue modulus.
pub fn sweep_direction(system: &SemiDiscreteSystem, damping: &DampingSpec) -> Result<Vector> {
    let mut z = eigen_direction(system, damping.c1, 0)?;
    let norm = system.norm_da(&z);
    if !(norm > 0.0) {
        return Err(Error::SingularSystem("sweep direction vanished".into()));
    }
    z /= norm;
    Ok(z)
}

/// Integrates from `r * z_hat` for each radius and fits an exponential on the
/// tail (latter half of the samples above the noise floor).
pub fn sweep_semiglobal(
    system: &SemiDiscreteSystem,
    damping: &DampingSpec,
    radii: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<SweepRow>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and increasing".into()));
    }
    let z_hat = sweep_direction(system, damping)?;
    radii
        .iter()
        .map(|&r| {
            let traj = integrate(system, damping, &(&z_hat * r), config, None)?;
            let fit = fit_exponential(&traj, None)?;
            Ok(SweepRow {
                r,
                mu: fit.rate,
                k: fit.prefactor,
                r_squared: fit.r_squared,
            })
        })
        .collect()
}

/// `mu(r)` nonincreasing in `r` up to a relative tolerance.
pub fn sweep_trend_ok(rows: &[SweepRow], rel_tol: f64) -> bool {
    rows.windows(2).all(|w| w[1].mu <= w[0].mu * (1.0 + rel_tol))
}

/// Scalar functions behind the two-phase envelope of a `K`-type certificate.
#[derive(Debug, Clone)]
pub struct ProfileFunctions {
    pub m: f64,
    pub c: f64,
    pub lambda_min: f64,
    pub p_norm: f64,
    pub cert: LyapunovCertificate,
}

impl ProfileFunctions {
    pub fn new(cert: &LyapunovCertificate) -> Result<Self> {
        if !cert.kind.uses_k_term() {
            return Err(Error::InvalidInput(format!(
                "behavior profile needs a K-type certificate, got {}",
                cert.kind.name()
            )));
        }
        if cert.damping.h0_singular() {
            return Err(Error::DomainError(0.0));
        }
        Ok(Self {
            m: cert.m,
            c: cert.c,
            lambda_min: cert.alpha,
            p_norm: cert.p_norm_h,
            cert: cert.clone(),
        })
    }

    /// `X -> M K(X) + lambda X`.
    pub fn lower_map(&self, x: f64) -> f64 {
        self.m * self.cert.k_value(x) + self.lambda_min * x
    }

    /// `X -> M K(X) + ||P|| X`.
    pub fn upper_map(&self, x: f64) -> f64 {
        self.m * self.cert.k_value(x) + self.p_norm * x
    }

    /// Inverse of [`Self::lower_map`]: `|z|^2 <= g(V)`.
    pub fn g(&self, y: f64) -> f64 {
        invert_increasing(|x| self.lower_map(x), y, 1e-13)
    }

    /// Inverse of [`Self::upper_map`]: `|z|^2 >= g_up(V)`.
    pub fn g_up(&self, y: f64) -> f64 {
        invert_increasing(|x| self.upper_map(x), y, 1e-13)
    }

    /// `G(y) = int_1^y dv / g_up(v)`, so that `V' <= -C g_up(V)` gives
    /// `G(V(t)) <= G(V(0)) - C t`.
    pub fn big_g(&self, y: f64) -> f64 {
        adaptive_simpson(|v| 1.0 / self.g_up(v), 1.0, y, 1e-10)
    }

    /// `d/dX (M K(X) + ||P|| X)`.
    fn upper_slope(&self, x: f64) -> f64 {
        let h = self.cert.damping.h_eval(self.cert.b_norm * x.sqrt()).unwrap_or(f64::INFINITY);
        self.m * x.sqrt() * h + self.p_norm
    }

    /// Comparison solution `Y(t)` of `Y' = -C g_up(Y)`, `Y(0) = y0`, on the
    /// given times. Integrated in `X = g_up(Y)`, where `X' = -C X / upper_slope(X)`.
    pub fn comparison(&self, y0: f64, times: &[f64]) -> Vec<f64> {
        let mut x = self.g_up(y0);
        let rhs = |x: f64| -self.c * x / self.upper_slope(x.max(0.0));
        let mut out = Vec::with_capacity(times.len());
        let mut t = times.first().copied().unwrap_or(0.0);
        for &target in times {
            while t < target {
                let h = (target - t).min(1e-2);
                let k1 = rhs(x);
                let k2 = rhs(x + 0.5 * h * k1);
                let k3 = rhs(x + 0.5 * h * k2);
                let k4 = rhs(x + h * k3);
                x = (x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
                t += h;
            }
            out.push(self.upper_map(x));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub t_star: Option<f64>,
    /// `(t, bound on ||z(t)||_H)` for samples up to `t*`.
    pub pre: Vec<(f64, f64)>,
    /// Exponential envelope for samples after `t*`.
    pub post: Vec<(f64, f64)>,
    pub pre_max_ratio: f64,
    pub post_max_ratio: f64,
    /// `C_V = C / (||P|| + M h(||B||))`.
    pub c_v: f64,
}

/// Envelopes for `||z(t)||_H` from a `K`-type certificate.
///
/// Before `t*`: `sqrt(g(Y(t)))` with `Y` the comparison solution started at
/// `V(z0)`. After `t*`: `sqrt(V(t_i) / lambda_min * e^{-C_V (t - t_i)})`
/// from the first sample `t_i >= t*`.
pub fn behavior_profile(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<BehaviorProfile> {
    let f = ProfileFunctions::new(cert)?;
    if traj.is_empty() {
        return Err(Error::InsufficientData { have: 0, need: 1 });
    }
    let v_at = |i: usize| -> Result<f64> {
        if let Some(v) = &traj.v {
            return Ok(v[i]);
        }
        traj.states
            .get(i)
            .map(|z| cert.eval_v(z))
            .ok_or_else(|| Error::InvalidInput("trajectory carries neither V values nor states".into()))
    };
    let t_star = traj.t_star;
    let split = match t_star {
        Some(ts) => traj.times.iter().position(|&t| t >= ts).unwrap_or(traj.len()),
        None => traj.len(),
    };

    let pre_times: Vec<f64> = traj.times[..split.min(traj.len())]
        .iter()
        .copied()
        .chain(if split < traj.len() { Some(traj.times[split]) } else { None })
        .collect();
    let ys = f.comparison(v_at(0)?, &pre_times);
    let mut pre = Vec::with_capacity(pre_times.len());
    let mut pre_ratio: f64 = 0.0;
    for (i, (&t, &y)) in pre_times.iter().zip(&ys).enumerate() {
        let env = f.g(y).sqrt();
        pre.push((t, env));
        if env > 0.0 {
            pre_ratio = pre_ratio.max(traj.norm_h[i] / env);
        }
    }

    let h_b = cert.damping.h_eval(cert.b_norm)?;
    let c_v = cert.c / (cert.p_norm_h + cert.m * h_b);
    let mut post = Vec::new();
    let mut post_ratio: f64 = 0.0;
    if split < traj.len() {
        let (t0, v0) = (traj.times[split], v_at(split)?);
        for i in split..traj.len() {
            let t = traj.times[i];
            let env = (v0 / f.lambda_min * (-c_v * (t - t0)).exp()).sqrt();
            post.push((t, env));
            if env > 0.0 && traj.norm_h[i] > NOISE_FLOOR {
                post_ratio = post_ratio.max(traj.norm_h[i] / env);
            }
        }
    }
    Ok(BehaviorProfile {
        t_star,
        pre,
        post,
        pre_max_ratio: pre_ratio,
        post_max_ratio: post_ratio,
        c_v,
    })
}

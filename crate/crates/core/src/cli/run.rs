//! Subcommand execution: builds the objects a config describes, runs the
//! numerics and writes CSVs, certificates, reports and a run manifest.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::config::{ConfigError, ExperimentConfig, FitKind, InitialState};
use crate::analysis::{
    check_decrease, eigen_direction, fit_exponential, fit_linear_phase, fit_polynomial, sweep_semiglobal,
    sweep_trend_ok, verify_poly_chain, DecayEstimate, VerificationReport,
};
use crate::damping::DampingSpec;
use crate::error::Error;
use crate::linalg::Vector;
use crate::lyapunov::{
    build_exp_certificate, build_finite_dim_certificate, build_poly_certificate, build_semiglobal_certificate,
    calibrate_c_theta, gramian_form, CertificateKind, LyapunovCertificate,
};
use crate::models::{
    discretize_kdv, discretize_wave, estimate_cs_with, make_finite_dim, parse_matrix, SemiDiscreteSystem, SystemKind,
    DEFAULT_CS_TRIALS,
};
use crate::sim::{integrate, smooth_initial, Trajectory, SMOOTHING_EPS};

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const DECAY_CSV: &str = "decay.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const DAMPING_CSV: &str = "damping_report.csv";
pub const VERIFICATION_CSV: &str = "verification.csv";
pub const CERTIFICATE_TXT: &str = "certificate.txt";
pub const P_MATRIX: &str = "P.mat";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const PLOT_SCRIPT: &str = "plot.gp";

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "norm_H", "norm_DA", "V", "damping_power"];
pub const DECAY_HEADER: [&str; 6] = ["model", "rate", "prefactor", "t_lo", "t_hi", "r_squared"];
pub const SWEEP_HEADER: [&str; 4] = ["r", "mu", "K", "r_squared"];
pub const DAMPING_HEADER: [&str; 3] = ["item", "margin", "pass"];
pub const VERIFICATION_HEADER: [&str; 5] = ["check", "max_violation", "tolerance", "pass", "samples"];

/// Relative tolerance on the `mu(r)` trend of a sweep.
pub const SWEEP_TREND_TOL: f64 = 0.2;
/// Grid spacing for the Gramian chain checks run by `verify`.
pub const CHAIN_GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Certify,
    CheckDamping,
    FitDecay,
    Sweep,
    Verify,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Certify => "certify",
            Command::CheckDamping => "check-damping",
            Command::FitDecay => "fit-decay",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    MissingInput(String),
    Io(String),
    Core(Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Config(e) => e.kind(),
            CliError::MissingInput(_) => "MissingInput",
            CliError::Io(_) => "Io",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(ConfigError::Parse { .. }) => 3,
            CliError::Config(ConfigError::Validation(_)) => 4,
            CliError::MissingInput(_) => 5,
            CliError::Io(_) => 6,
            CliError::Core(e) => e.exit_code(),
        }
    }

    /// `error: code=<Kind> message="..."`
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
        format!("error: code={} message=\"{msg}\"", self.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::MissingInput(m) | CliError::Io(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub struct RunContext {
    pub config: ExperimentConfig,
    pub config_text: String,
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunContext {
    fn base_dir(&self) -> &Path {
        self.config_path.parent().unwrap_or(Path::new("."))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn build_system(ctx: &RunContext) -> Result<SemiDiscreteSystem, CliError> {
    let s = &ctx.config.system;
    let profile = s.a_profile;
    let eval = move |x: f64| profile.eval(x);
    let sys = match s.name {
        SystemKind::FiniteDim => {
            let a = s.a_matrix.clone().ok_or_else(|| Error::InvalidInput("finite_dim needs A".into()))?;
            let b = s.b_matrix.clone().ok_or_else(|| Error::InvalidInput("finite_dim needs B".into()))?;
            make_finite_dim(a, b, s.k)?
        }
        SystemKind::Kdv => {
            let (l, n) = (s.length.unwrap_or_default(), s.intervals.unwrap_or_default());
            discretize_kdv(l, n, &eval, s.k)?
        }
        SystemKind::Wave => discretize_wave(s.intervals.unwrap_or_default(), &eval, s.k)?,
    };
    Ok(sys.with_norm_choice(s.s_norm))
}

pub fn initial_state(ctx: &RunContext, sys: &SemiDiscreteSystem, damping: &DampingSpec) -> Result<Vector, CliError> {
    let n = sys.dim();
    let unit_h = |v: Vector, scale: f64| -> Result<Vector, CliError> {
        let norm = sys.norm_h(&v);
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("initial direction has zero norm".into()).into());
        }
        Ok(v * (scale / norm))
    };
    let z = match &ctx.config.sim.z0 {
        InitialState::Eigvec { index, scale } => unit_h(eigen_direction(sys, damping.c1, *index)?, *scale)?,
        InitialState::Values(v) => Vector::from_vec(v.clone()),
        InitialState::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            unit_h(Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)), *scale)?
        }
        InitialState::File(p) => {
            let path = if p.is_absolute() { p.clone() } else { ctx.base_dir().join(p) };
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::MissingInput(format!("z0 file {}: {e}", path.display())))?;
            let m = parse_matrix(&text)?;
            if m.nrows() != 1 && m.ncols() != 1 {
                return Err(Error::Dimension(format!("z0 file must hold a vector, got {}x{}", m.nrows(), m.ncols())).into());
            }
            Vector::from_iterator(m.len(), m.transpose().iter().copied())
        }
    };
    if z.len() != n {
        return Err(Error::Dimension(format!("z0 has {} entries, system has {n}", z.len())).into());
    }
    if ctx.config.sim.smooth {
        return Ok(smooth_initial(sys, &z, SMOOTHING_EPS)?);
    }
    Ok(z)
}

/// Kind chosen when the config says `auto`.
pub fn auto_certificate_kind(sys: &SemiDiscreteSystem, damping: &DampingSpec) -> CertificateKind {
    if sys.kind == SystemKind::FiniteDim {
        CertificateKind::FiniteDim
    } else if damping.uses_sup_norm() {
        CertificateKind::SemiglobalExpSneqU
    } else {
        CertificateKind::GlobalExpSU
    }
}

/// Builds the configured certificate. Radius-dependent kinds default `r` to
/// `||z0||_{D(A)}`.
pub fn build_certificate(
    ctx: &RunContext,
    sys: &SemiDiscreteSystem,
    damping: &DampingSpec,
    z0: &Vector,
) -> Result<LyapunovCertificate, CliError> {
    let an = &ctx.config.analysis;
    let kind = an.certificate.unwrap_or_else(|| auto_certificate_kind(sys, damping));
    let r = an.r.unwrap_or_else(|| sys.norm_da(z0));
    let cert = match kind {
        CertificateKind::FiniteDim => build_finite_dim_certificate(sys, damping)?,
        CertificateKind::GlobalExpSU => build_exp_certificate(sys, damping)?,
        CertificateKind::SemiglobalExpSneqU => {
            let c_s = an.c_s.unwrap_or_else(|| estimate_cs_with(sys, DEFAULT_CS_TRIALS, ctx.seed));
            build_semiglobal_certificate(sys, damping, r, Some(c_s))?
        }
        CertificateKind::SemiglobalPoly => {
            let gamma = an
                .gamma
                .ok_or_else(|| Error::InvalidInput("semiglobal_poly needs [analysis] gamma".into()))?;
            let c_theta = match an.c_theta {
                Some(c) => c,
                None => {
                    let a_tilde = sys.closed_loop(damping.c1);
                    let p = gramian_form(sys, &a_tilde, an.shift, 1e-12)?;
                    calibrate_c_theta(sys, &a_tilde, &p, gamma)?
                }
            };
            build_poly_certificate(sys, damping, r, gamma, c_theta, an.shift)?
        }
    };
    Ok(cert)
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: &[[String; N]]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Reads a CSV whose header must equal `header`.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(format!("{} not found", path.display())));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let got: Vec<String> = r.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    if got != header {
        return Err(CliError::Io(format!(
            "{}: header {:?} does not match {:?}",
            path.display(),
            got,
            header
        )));
    }
    r.records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| io_err(path, e)))
        .collect()
}

fn num(path: &Path, s: &str) -> Result<f64, CliError> {
    s.parse().map_err(|_| CliError::Io(format!("{}: bad number {s:?}", path.display())))
}

/// Columns of a trajectory CSV: `(t, norm_H, norm_DA, V, damping_power)`.
pub struct TrajectoryTable {
    pub t: Vec<f64>,
    pub norm_h: Vec<f64>,
    pub norm_da: Vec<f64>,
    pub v: Vec<f64>,
    pub damping_power: Vec<f64>,
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable, CliError> {
    let rows = read_csv(path, &TRAJECTORY_HEADER)?;
    let mut t = TrajectoryTable {
        t: Vec::with_capacity(rows.len()),
        norm_h: Vec::with_capacity(rows.len()),
        norm_da: Vec::with_capacity(rows.len()),
        v: Vec::with_capacity(rows.len()),
        damping_power: Vec::with_capacity(rows.len()),
    };
    for row in rows {
        t.t.push(num(path, &row[0])?);
        t.norm_h.push(num(path, &row[1])?);
        t.norm_da.push(num(path, &row[2])?);
        t.v.push(num(path, &row[3])?);
        t.damping_power.push(num(path, &row[4])?);
    }
    Ok(t)
}

/// `key = value` pairs of a certificate file, in file order.
pub fn read_certificate(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

fn cert_value<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Output of one subcommand: files written (relative names) and console lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

pub fn run_subcommand(cmd: Command, ctx: &RunContext) -> Result<Outcome, CliError> {
    fs::create_dir_all(&ctx.out_dir).map_err(|e| io_err(&ctx.out_dir, e))?;
    match cmd {
        Command::Simulate => simulate(ctx),
        Command::Certify => certify(ctx),
        Command::CheckDamping => check_damping(ctx),
        Command::FitDecay => fit_decay(ctx),
        Command::Sweep => sweep(ctx),
        Command::Verify => verify(ctx),
        Command::Report => report(ctx),
    }
}

fn damping_spec(ctx: &RunContext) -> Result<DampingSpec, CliError> {
    let d = ctx.config.damping.spec();
    d.validate()?;
    Ok(d)
}

fn simulate(ctx: &RunContext) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let sys = build_system(ctx)?;
    let d = damping_spec(ctx)?;
    let z0 = initial_state(ctx, &sys, &d)?;
    let cert = match build_certificate(ctx, &sys, &d, &z0) {
        Ok(c) => Some(c),
        Err(e) if ctx.config.analysis.certificate.is_none() => {
            out.notes.push(format!("no certificate ({}); V column is NaN", e.code()));
            None
        }
        Err(e) => return Err(e),
    };
    let traj = integrate(&sys, &d, &z0, &ctx.config.sim.integrator(), cert.as_ref())?;
    let rows: Vec<[String; 5]> = (0..traj.len())
        .map(|i| {
            let v = traj.v.as_ref().map_or(f64::NAN, |v| v[i]);
            [f(traj.times[i]), f(traj.norm_h[i]), f(traj.norm_da[i]), f(v), f(traj.damping_power[i])]
        })
        .collect();
    write_csv(&ctx.path(TRAJECTORY_CSV), TRAJECTORY_HEADER, &rows)?;
    out.files.push(TRAJECTORY_CSV.into());
    let last = traj.len() - 1;
    out.notes.push(format!(
        "{} samples, ||z||_H: {} -> {}",
        traj.len(),
        traj.norm_h[0],
        traj.norm_h[last]
    ));
    if let Some(ts) = traj.t_star {
        out.notes.push(format!("unit-ball entry t* = {ts}"));
    }
    Ok(out)
}

fn certify(ctx: &RunContext) -> Result<Outcome, CliError> {
    let sys = build_system(ctx)?;
    let d = damping_spec(ctx)?;
    let z0 = initial_state(ctx, &sys, &d)?;
    let cert = build_certificate(ctx, &sys, &d, &z0)?;
    let path = ctx.path(CERTIFICATE_TXT);
    fs::write(&path, cert.export_text(P_MATRIX)).map_err(|e| io_err(&path, e))?;
    let p_path = ctx.path(P_MATRIX);
    fs::write(&p_path, cert.p_matrix_text()).map_err(|e| io_err(&p_path, e))?;
    Ok(Outcome {
        files: vec![CERTIFICATE_TXT.into(), P_MATRIX.into()],
        notes: vec![format!(
            "{} certificate: C = {}, M = {}, ||P||_H = {}",
            cert.kind.name(),
            cert.c,
            cert.m,
            cert.p_norm_h
        )],
    })
}

fn check_damping(ctx: &RunContext) -> Result<Outcome, CliError> {
    let d = damping_spec(ctx)?;
    let an = &ctx.config.analysis;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &dim in &an.damping_dims {
        let rep = d.verify_definition(dim, an.damping_trials, ctx.seed);
        notes.push(rep.to_string().trim_end().to_string());
        for (item, margin, pass) in rep.rows() {
            rows.push([format!("d{dim}.{item}"), f(margin), pass.to_string()]);
        }
    }
    write_csv(&ctx.path(DAMPING_CSV), DAMPING_HEADER, &rows)?;
    Ok(Outcome {
        files: vec![DAMPING_CSV.into()],
        notes,
    })
}

fn decay_row(e: &DecayEstimate) -> [String; 6] {
    [
        e.model.name().to_string(),
        f(e.rate),
        f(e.prefactor),
        f(e.t_lo),
        f(e.t_hi),
        f(e.r_squared),
    ]
}

fn fit_decay(ctx: &RunContext) -> Result<Outcome, CliError> {
    let table = read_trajectory(&ctx.path(TRAJECTORY_CSV))?;
    let traj = Trajectory::from_norms(table.t, table.norm_h);
    let an = &ctx.config.analysis;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for fit in &an.fits {
        let est = match fit {
            FitKind::Exponential => fit_exponential(&traj, an.window)?,
            FitKind::Polynomial => {
                let e = fit_polynomial(&traj, an.window)?;
                if e.flagged {
                    notes.push(format!("polynomial rate {} <= 1/2", e.rate));
                }
                e
            }
            FitKind::LinearPhase => {
                let sys = build_system(ctx)?;
                let d = damping_spec(ctx)?;
                let c_sigma = d.bound(sys.control_dim(), sys.u_weight).ok_or_else(|| {
                    Error::InvalidInput(format!("linear-phase fit needs bounded damping, got {}", d.kind.name()))
                })?;
                let lp = fit_linear_phase(&traj, c_sigma, sys.b_eff_norm(), 1e-9)?;
                notes.push(format!(
                    "linear phase slope {} vs bound {}: {}",
                    lp.estimate.rate,
                    lp.slope_bound,
                    if lp.pass { "pass" } else { "FAIL" }
                ));
                lp.estimate
            }
        };
        rows.push(decay_row(&est));
    }
    write_csv(&ctx.path(DECAY_CSV), DECAY_HEADER, &rows)?;
    Ok(Outcome {
        files: vec![DECAY_CSV.into()],
        notes,
    })
}

fn sweep(ctx: &RunContext) -> Result<Outcome, CliError> {
    let radii = &ctx.config.analysis.radii;
    if radii.is_empty() {
        return Err(Error::InvalidInput("sweep needs [analysis] radii".into()).into());
    }
    let sys = build_system(ctx)?;
    let d = damping_spec(ctx)?;
    let table = sweep_semiglobal(&sys, &d, radii, &ctx.config.sim.integrator())?;
    let rows: Vec<[String; 4]> = table.iter().map(|r| [f(r.r), f(r.mu), f(r.k), f(r.r_squared)]).collect();
    write_csv(&ctx.path(SWEEP_CSV), SWEEP_HEADER, &rows)?;
    let trend = sweep_trend_ok(&table, SWEEP_TREND_TOL);
    Ok(Outcome {
        files: vec![SWEEP_CSV.into()],
        notes: vec![format!(
            "mu(r) nonincreasing within {}%: {}",
            SWEEP_TREND_TOL * 100.0,
            if trend { "yes" } else { "no" }
        )],
    })
}

fn report_row(r: &VerificationReport) -> [String; 5] {
    [
        r.check.clone(),
        f(r.max_violation),
        f(r.tolerance),
        r.pass.to_string(),
        r.samples.to_string(),
    ]
}

fn verify(ctx: &RunContext) -> Result<Outcome, CliError> {
    let table = read_trajectory(&ctx.path(TRAJECTORY_CSV))?;
    let cert_path = ctx.path(CERTIFICATE_TXT);
    if !cert_path.exists() {
        return Err(CliError::MissingInput(format!("{} not found; run certify first", cert_path.display())));
    }
    let entries = read_certificate(&cert_path)?;
    let c: f64 = cert_value(&entries, "C")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Io(format!("{}: missing C", cert_path.display())))?;
    if table.v.iter().any(|v| !v.is_finite()) {
        return Err(CliError::MissingInput(format!(
            "{} has no V values; simulate with a certificate",
            TRAJECTORY_CSV
        )));
    }
    let mut reports = vec![check_decrease(&table.t, &table.norm_h, &table.v, c)];
    if cert_value(&entries, "kind") == Some(CertificateKind::SemiglobalPoly.name()) {
        let p_path = ctx.path(cert_value(&entries, "P_file").unwrap_or(P_MATRIX));
        let p_text = fs::read_to_string(&p_path)
            .map_err(|e| CliError::MissingInput(format!("{}: {e}", p_path.display())))?;
        let p = parse_matrix(&p_text)?;
        let sys = build_system(ctx)?;
        let d = damping_spec(ctx)?;
        let z0 = initial_state(ctx, &sys, &d)?;
        let steps = (ctx.config.sim.t_end / CHAIN_GRID_STEP).round() as usize;
        let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * CHAIN_GRID_STEP).collect();
        let chain = verify_poly_chain(&sys.closed_loop(d.c1), &sys.h_ip, &p, c, &z0, &grid)?;
        reports.extend(chain);
    }
    let rows: Vec<[String; 5]> = reports.iter().map(report_row).collect();
    write_csv(&ctx.path(VERIFICATION_CSV), VERIFICATION_HEADER, &rows)?;
    let notes = reports
        .iter()
        .map(|r| format!("{}: {}", r.check, if r.pass { "pass" } else { "FAIL" }))
        .collect();
    Ok(Outcome {
        files: vec![VERIFICATION_CSV.into()],
        notes,
    })
}

/// Collates existing outputs; nothing is recomputed.
fn report(ctx: &RunContext) -> Result<Outcome, CliError> {
    let mut s = String::from("dampkit run summary\n");
    let mut found = Vec::new();

    let cert_path = ctx.path(CERTIFICATE_TXT);
    if cert_path.exists() {
        let _ = writeln!(s, "\n[certificate]");
        for (k, v) in read_certificate(&cert_path)? {
            let _ = writeln!(s, "{k} = {v}");
        }
        found.push(CERTIFICATE_TXT);
    }

    let traj_path = ctx.path(TRAJECTORY_CSV);
    if traj_path.exists() {
        let t = read_trajectory(&traj_path)?;
        let n = t.t.len();
        let _ = writeln!(s, "\n[trajectory]");
        let _ = writeln!(s, "samples = {n}");
        if n > 0 {
            let traj = Trajectory::from_norms(t.t.clone(), t.norm_h.clone());
            let _ = writeln!(s, "t_end = {}", t.t[n - 1]);
            let _ = writeln!(s, "norm_H(0) = {}", t.norm_h[0]);
            let _ = writeln!(s, "norm_H(end) = {}", t.norm_h[n - 1]);
            let _ = writeln!(s, "norm_DA(0) = {}", t.norm_da[0]);
            let _ = writeln!(s, "V(0) = {}", t.v[0]);
            let _ = writeln!(s, "t_star = {}", traj.t_star.map_or("none".to_string(), f));
        }
        found.push(TRAJECTORY_CSV);
    }

    let decay_path = ctx.path(DECAY_CSV);
    if decay_path.exists() {
        let _ = writeln!(s, "\n[decay]");
        for row in read_csv(&decay_path, &DECAY_HEADER)? {
            let _ = writeln!(
                s,
                "{}: rate = {}, prefactor = {}, window = [{}, {}], r_squared = {}",
                row[0], row[1], row[2], row[3], row[4], row[5]
            );
        }
        found.push(DECAY_CSV);
    }

    let sweep_path = ctx.path(SWEEP_CSV);
    if sweep_path.exists() {
        let _ = writeln!(s, "\n[sweep]");
        for row in read_csv(&sweep_path, &SWEEP_HEADER)? {
            let _ = writeln!(s, "r = {}: mu = {}, K = {}, r_squared = {}", row[0], row[1], row[2], row[3]);
        }
        found.push(SWEEP_CSV);
    }

    let damping_path = ctx.path(DAMPING_CSV);
    if damping_path.exists() {
        let _ = writeln!(s, "\n[damping]");
        for row in read_csv(&damping_path, &DAMPING_HEADER)? {
            let _ = writeln!(s, "{}: margin = {}, pass = {}", row[0], row[1], row[2]);
        }
        found.push(DAMPING_CSV);
    }

    let ver_path = ctx.path(VERIFICATION_CSV);
    if ver_path.exists() {
        let _ = writeln!(s, "\n[verification]");
        for row in read_csv(&ver_path, &VERIFICATION_HEADER)? {
            let _ = writeln!(
                s,
                "{}: max_violation = {}, tolerance = {}, pass = {}, samples = {}",
                row[0], row[1], row[2], row[3], row[4]
            );
        }
        found.push(VERIFICATION_CSV);
    }

    if found.is_empty() {
        return Err(CliError::MissingInput(format!(
            "no outputs to report in {}",
            ctx.out_dir.display()
        )));
    }
    let summary_path = ctx.path(SUMMARY_TXT);
    fs::write(&summary_path, &s).map_err(|e| io_err(&summary_path, e))?;
    let mut files = vec![SUMMARY_TXT.to_string()];
    if ctx.config.output.formats.iter().any(|f| f == "gnuplot") {
        let plot_path = ctx.path(PLOT_SCRIPT);
        fs::write(&plot_path, plot_script(&found)).map_err(|e| io_err(&plot_path, e))?;
        files.push(PLOT_SCRIPT.into());
    }
    Ok(Outcome {
        files,
        notes: vec![format!("collated {}", found.join(", "))],
    })
}

/// gnuplot script drawing one PNG per available CSV.
pub fn plot_script(found: &[&str]) -> String {
    let mut s = String::from(
        "# usage: gnuplot plot.gp (run inside the output directory)\n\
         set datafile separator \",\"\n\
         set terminal pngcairo size 900,600\n\
         set grid\n",
    );
    if found.contains(&TRAJECTORY_CSV) {
        s.push_str(
            "\nset output 'trajectory.png'\nset logscale y\nset xlabel 't'\n\
             plot 'trajectory.csv' using 1:2 skip 1 with lines title 'norm_H', \\\n     \
             '' using 1:3 skip 1 with lines title 'norm_DA', \\\n     \
             '' using 1:4 skip 1 with lines title 'V'\nunset logscale y\n\
             \nset output 'damping_power.png'\nset xlabel 't'\n\
             plot 'trajectory.csv' using 1:5 skip 1 with lines title 'damping power'\n",
        );
    }
    if found.contains(&SWEEP_CSV) {
        s.push_str(
            "\nset output 'sweep.png'\nset logscale x\nset xlabel 'r'\n\
             plot 'sweep.csv' using 1:2 skip 1 with linespoints title 'mu(r)'\nunset logscale x\n",
        );
    }
    s
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:09}", d.as_secs(), d.subsec_nanos())
}

/// `manifest-<command>.txt`: config hash, version, seed, timestamps and the
/// files written with their hashes.
pub fn write_manifest(ctx: &RunContext, cmd: Command, started: &str, files: &[String]) -> Result<String, CliError> {
    let name = format!("manifest-{}.txt", cmd.name());
    let mut s = String::new();
    let _ = writeln!(s, "tool = dampkit");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = {}", cmd.name());
    let _ = writeln!(s, "config = {}", ctx.config_path.display());
    let _ = writeln!(s, "config_sha256 = {}", sha256_hex(ctx.config_text.as_bytes()));
    let _ = writeln!(s, "seed = {}", ctx.seed);
    let _ = writeln!(s, "started_unix = {started}");
    let _ = writeln!(s, "finished_unix = {}", unix_now());
    for file in files {
        let path = ctx.path(file);
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let _ = writeln!(s, "file = {file} bytes={} sha256={}", bytes.len(), sha256_hex(&bytes));
    }
    let path = ctx.path(&name);
    fs::write(&path, s).map_err(|e| io_err(&path, e))?;
    Ok(name)
}

pub fn started_stamp() -> String {
    unix_now()
}

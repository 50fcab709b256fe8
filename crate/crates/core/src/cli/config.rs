//! Experiment configuration: an INI-style grammar with `[section]` headers,
//! `key = value` lines and `#` comments.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::damping::{DampingKind, DampingSpec};
use crate::linalg::DenseMatrix;
use crate::lyapunov::CertificateKind;
use crate::models::{AProfile, NormChoice, SystemKind};
use crate::sim::{ErrorControl, IntegratorConfig, DEFAULT_TARGET};

pub const SECTIONS: [&str; 5] = ["system", "damping", "sim", "analysis", "output"];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    /// Every semantic violation, each with the line it was found on (0 when
    /// the problem is a missing key).
    Validation(Vec<(usize, String)>),
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Parse { .. } => "ParseError",
            ConfigError::Validation(_) => "ValidationError",
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Validation(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|(line, m)| if *line > 0 { format!("line {line}: {m}") } else { m.clone() })
                    .collect();
                write!(f, "{}", parts.join("; "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub name: SystemKind,
    pub length: Option<f64>,
    pub intervals: Option<usize>,
    pub k: f64,
    pub a_profile: AProfile,
    pub a_matrix: Option<DenseMatrix>,
    pub b_matrix: Option<DenseMatrix>,
    pub s_norm: NormChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingConfig {
    pub kind: DampingKind,
    pub level: f64,
    pub q: f64,
    pub gain: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl DampingConfig {
    pub fn spec(&self) -> DampingSpec {
        let mut d = DampingSpec::from_kind(self.kind, self.level, self.q, self.gain);
        if let Some(c1) = self.c1 {
            d.c1 = c1;
        }
        if let Some(c2) = self.c2 {
            d.c2 = c2;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Eigendirection `index` of the closed loop, scaled to `H`-norm `scale`.
    Eigvec { index: usize, scale: f64 },
    /// Matrix file holding a single row or column; relative to the config file.
    File(PathBuf),
    Values(Vec<f64>),
    /// Seeded Gaussian direction scaled to `H`-norm `scale`.
    Random { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub error_control: bool,
    pub target: f64,
    pub record_every: usize,
    pub z0: InitialState,
    /// Apply `(I - eps A)^{-1}` to `z0` before integrating.
    pub smooth: bool,
}

impl SimConfig {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            t_end: self.t_end,
            error_control: if self.error_control {
                ErrorControl::StepHalving { target: self.target }
            } else {
                ErrorControl::None
            },
            record_every: self.record_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Exponential,
    Polynomial,
    LinearPhase,
}

impl FitKind {
    pub fn name(&self) -> &'static str {
        match self {
            FitKind::Exponential => "exponential",
            FitKind::Polynomial => "polynomial",
            FitKind::LinearPhase => "linear_phase",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential" => Some(FitKind::Exponential),
            "polynomial" => Some(FitKind::Polynomial),
            "linear_phase" => Some(FitKind::LinearPhase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub fits: Vec<FitKind>,
    pub radii: Vec<f64>,
    pub window: Option<(f64, f64)>,
    /// `None` selects the kind from the system and damping.
    pub certificate: Option<CertificateKind>,
    pub r: Option<f64>,
    pub gamma: Option<f64>,
    pub c_theta: Option<f64>,
    pub shift: f64,
    pub c_s: Option<f64>,
    pub damping_dims: Vec<usize>,
    pub damping_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<String>,
}

pub const FORMATS: [&str; 2] = ["csv", "gnuplot"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub damping: DampingConfig,
    pub sim: SimConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

/// Raw `key = value` entries with line numbers, per section.
type Raw = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn tokenize(text: &str) -> Result<Raw, ConfigError> {
    let mut raw: Raw = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: lineno,
                message: format!("unterminated section header {line:?}"),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Parse {
                    line: lineno,
                    message: format!("bad section name {name:?}"),
                });
            }
            raw.entry(name.to_string()).or_default();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: lineno,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: lineno,
                message: "empty key".into(),
            });
        }
        let sec = section.as_ref().ok_or_else(|| ConfigError::Parse {
            line: lineno,
            message: format!("key {key:?} appears before any section header"),
        })?;
        let entries = raw.get_mut(sec).unwrap();
        if let Some((first, _)) = entries.get(key) {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("duplicate key {key:?} in [{sec}] (first on line {first})"),
            });
        }
        entries.insert(key.to_string(), (lineno, value.trim().to_string()));
    }
    Ok(raw)
}

/// Pulls typed values out of one section, collecting violations.
struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, (usize, String)>,
    errors: &'a mut Vec<(usize, String)>,
}

impl<'a> Section<'a> {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn fail(&mut self, line: usize, msg: String) {
        self.errors.push((line, msg));
    }

    fn parsed<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<(usize, T)> {
        let (line, v) = self.take(key)?;
        match parse(&v) {
            Ok(x) => Some((line, x)),
            Err(e) => {
                let name = self.name;
                self.fail(line, format!("[{name}] {key}: {e}"));
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<(usize, f64)> {
        self.parsed(key, parse_float)
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let (line, v) = self.float(key)?;
        if v > 0.0 {
            Some(v)
        } else {
            let name = self.name;
            self.fail(line, format!("[{name}] {key} must be > 0, got {v}"));
            None
        }
    }

    fn nonnegative(&mut self, key: &str) -> Option<f64> {
        let (line, v) = self.float(key)?;
        if v >= 0.0 {
            Some(v)
        } else {
            let name = self.name;
            self.fail(line, format!("[{name}] {key} must be >= 0, got {v}"));
            None
        }
    }

    fn count(&mut self, key: &str, min: i64) -> Option<usize> {
        let (line, v) = self.parsed(key, |s| s.parse::<i64>().map_err(|e| format!("expected an integer ({e})")))?;
        if v >= min {
            Some(v as usize)
        } else {
            let name = self.name;
            self.fail(line, format!("[{name}] {key} must be >= {min}, got {v}"));
            None
        }
    }

    fn missing(&mut self, key: &str, why: &str) {
        let name = self.name;
        self.fail(0, format!("[{name}] {key} is required {why}"));
    }

    fn finish(self) {
        for (key, (line, _)) in self.entries {
            self.errors.push((line, format!("[{}] unknown key {key:?}", self.name)));
        }
    }
}

fn parse_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {s:?}"))
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(item).collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on/off, got {s:?}")),
    }
}

/// Rows separated by `;`, entries by `,`.
fn parse_rows(s: &str) -> Result<DenseMatrix, String> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| parse_list(r, parse_float))
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err("rows must be nonempty and of equal length".into());
    }
    let flat: Vec<f64> = rows.concat();
    Ok(DenseMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn parse_profile(s: &str) -> Result<AProfile, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["constant", c] => Ok(AProfile::Constant(parse_float(c)?)),
        ["indicator", lo, hi, amp] => {
            let (lo, hi, amp) = (parse_float(lo)?, parse_float(hi)?, parse_float(amp)?);
            if !(lo < hi) {
                return Err(format!("indicator needs lo < hi, got {lo} >= {hi}"));
            }
            Ok(AProfile::Indicator { lo, hi, amp })
        }
        _ => Err(format!("expected `constant c` or `indicator lo hi amp`, got {s:?}")),
    }
}

fn parse_z0(s: &str) -> Result<InitialState, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["eigvec", idx, scale] => Ok(InitialState::Eigvec {
            index: idx.parse().map_err(|_| format!("bad eigenvector index {idx:?}"))?,
            scale: parse_float(scale)?,
        }),
        ["file", path] => Ok(InitialState::File(PathBuf::from(path))),
        ["random", scale] => Ok(InitialState::Random { scale: parse_float(scale)? }),
        ["values", ..] => {
            let rest = s.trim_start()["values".len()..].trim();
            let v = parse_list(rest, parse_float)?;
            if v.is_empty() {
                return Err("`values` needs at least one entry".into());
            }
            Ok(InitialState::Values(v))
        }
        _ => Err(format!(
            "expected `eigvec index scale`, `file path`, `values v1, v2, ...` or `random scale`, got {s:?}"
        )),
    }
}

fn parse_system(mut s: Section) -> Option<SystemConfig> {
    let name = s.parsed("name", |v| match v {
        "finite_dim" => Ok(SystemKind::FiniteDim),
        "kdv" => Ok(SystemKind::Kdv),
        "wave" => Ok(SystemKind::Wave),
        _ => Err(format!("expected finite_dim, kdv or wave, got {v:?}")),
    });
    if name.is_none() && !s.errors.iter().any(|(_, m)| m.starts_with("[system] name")) {
        s.missing("name", "(finite_dim, kdv or wave)");
    }
    let present = |s: &Section, key: &str| s.entries.contains_key(key);
    let (has_l, has_n, has_a, has_b) = (present(&s, "L"), present(&s, "N"), present(&s, "A"), present(&s, "B"));
    let length = s.positive("L");
    let intervals = s.count("N", 2);
    let k = s.positive("k").unwrap_or(1.0);
    let a_profile = s.parsed("a", parse_profile).map(|x| x.1).unwrap_or(AProfile::Constant(1.0));
    let a_matrix = s.parsed("A", parse_rows).map(|x| x.1);
    let b_matrix = s.parsed("B", parse_rows).map(|x| x.1);
    let s_norm = s
        .parsed("s_norm", |v| match v {
            "euclidean" => Ok(NormChoice::UEuclidean),
            "sup" => Ok(NormChoice::SSup),
            _ => Err(format!("expected euclidean or sup, got {v:?}")),
        })
        .map(|x| x.1)
        .unwrap_or(NormChoice::UEuclidean);
    let name = name.map(|x| x.1);
    match name {
        Some(SystemKind::FiniteDim) => {
            if !has_a {
                s.missing("A", "for finite_dim systems");
            }
            if !has_b {
                s.missing("B", "for finite_dim systems");
            }
        }
        Some(SystemKind::Kdv) => {
            if !has_l {
                s.missing("L", "for kdv systems");
            }
            if !has_n {
                s.missing("N", "for kdv systems");
            }
        }
        Some(SystemKind::Wave) => {
            if !has_n {
                s.missing("N", "for wave systems");
            }
        }
        None => {}
    }
    s.finish();
    Some(SystemConfig {
        name: name?,
        length,
        intervals,
        k,
        a_profile,
        a_matrix,
        b_matrix,
        s_norm,
    })
}

fn parse_damping(mut s: Section) -> Option<DampingConfig> {
    let kind = s.parsed("kind", |v| DampingKind::parse(v).ok_or_else(|| format!("unknown damping kind {v:?}")));
    if kind.is_none() && !s.errors.iter().any(|(_, m)| m.starts_with("[damping] kind")) {
        s.missing("kind", "(linear, clamp, tanh, arctan, norm_saturation or weak)");
    }
    let level = s.positive("level").unwrap_or(1.0);
    let q = match s.float("q") {
        Some((line, q)) if !(q > 0.0 && q < 1.0) => {
            s.fail(line, format!("[damping] q must lie in (0, 1), got {q}"));
            0.5
        }
        Some((_, q)) => q,
        None => 0.5,
    };
    let gain = s.positive("gain").unwrap_or(1.0);
    let c1 = s.positive("C1");
    let c2 = s.positive("C2");
    s.finish();
    Some(DampingConfig {
        kind: kind?.1,
        level,
        q,
        gain,
        c1,
        c2,
    })
}

fn parse_sim(mut s: Section) -> SimConfig {
    let dt = s.positive("dt").unwrap_or(1e-3);
    let t_end = s.positive("t_end").unwrap_or(10.0);
    let error_control = s.parsed("error_control", parse_bool).map(|x| x.1).unwrap_or(true);
    let target = s.positive("target").unwrap_or(DEFAULT_TARGET);
    let record_every = s.count("record_every", 1).unwrap_or(1);
    let z0 = s
        .parsed("z0", parse_z0)
        .map(|x| x.1)
        .unwrap_or(InitialState::Eigvec { index: 0, scale: 1.0 });
    let smooth = s.parsed("smooth", parse_bool).map(|x| x.1).unwrap_or(false);
    if dt > t_end {
        s.fail(0, format!("[sim] dt = {dt} exceeds t_end = {t_end}"));
    }
    s.finish();
    SimConfig {
        dt,
        t_end,
        error_control,
        target,
        record_every,
        z0,
        smooth,
    }
}

fn parse_analysis(mut s: Section) -> AnalysisConfig {
    let fits = s
        .parsed("fits", |v| {
            parse_list(v, |f| FitKind::parse(f).ok_or_else(|| format!("unknown fit {f:?}")))
        })
        .map(|x| x.1)
        .unwrap_or_else(|| vec![FitKind::Exponential]);
    let radii = match s.parsed("radii", |v| parse_list(v, parse_float)) {
        Some((line, r)) => {
            if r.iter().any(|x| !(*x > 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
                s.fail(line, "[analysis] radii must be positive and strictly increasing".into());
            }
            r
        }
        None => Vec::new(),
    };
    let window = match s.parsed("window", |v| parse_list(v, parse_float)) {
        Some((_, w)) if w.len() == 2 && w[0] < w[1] => Some((w[0], w[1])),
        Some((line, _)) => {
            s.fail(line, "[analysis] window must be `lo, hi` with lo < hi".into());
            None
        }
        None => None,
    };
    let certificate = s
        .parsed("certificate", |v| {
            if v == "auto" {
                Ok(None)
            } else {
                CertificateKind::parse(v).map(Some).ok_or_else(|| format!("unknown certificate kind {v:?}"))
            }
        })
        .and_then(|x| x.1);
    let r = s.positive("r");
    let gamma = match s.float("gamma") {
        Some((line, g)) if g <= 0.5 => {
            s.fail(line, format!("[analysis] gamma must exceed 1/2, got {g}"));
            None
        }
        other => other.map(|x| x.1),
    };
    let c_theta = s.positive("C_theta");
    let shift = s.nonnegative("shift").unwrap_or(0.0);
    let c_s = s.positive("c_S");
    let damping_dims = match s.parsed("damping_dims", |v| {
        parse_list(v, |d| d.parse::<usize>().map_err(|_| format!("bad dimension {d:?}")))
    }) {
        Some((line, d)) if d.is_empty() || d.contains(&0) => {
            s.fail(line, "[analysis] damping_dims must list positive dimensions".into());
            vec![1]
        }
        Some((_, d)) => d,
        None => vec![1, 4, 64],
    };
    let damping_trials = s.count("damping_trials", 1).unwrap_or(10_000);
    s.finish();
    AnalysisConfig {
        fits,
        radii,
        window,
        certificate,
        r,
        gamma,
        c_theta,
        shift,
        c_s,
        damping_dims,
        damping_trials,
    }
}

fn parse_output(mut s: Section) -> OutputConfig {
    let directory = s.take("directory").map(|(_, v)| PathBuf::from(v));
    let formats = match s.take("formats") {
        Some((line, v)) => {
            let f: Vec<String> = v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
            for x in &f {
                if !FORMATS.contains(&x.as_str()) {
                    s.fail(line, format!("[output] unknown format {x:?} (expected csv or gnuplot)"));
                }
            }
            f
        }
        None => vec!["csv".into(), "gnuplot".into()],
    };
    s.finish();
    OutputConfig { directory, formats }
}

/// Parses and validates a configuration. Syntax errors stop at the first bad
/// line; semantic problems are collected and reported together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = tokenize(text)?;
    let mut errors = Vec::new();
    for name in raw.keys() {
        if !SECTIONS.contains(&name.as_str()) {
            let line = raw[name].values().map(|(l, _)| *l).min().unwrap_or(0);
            errors.push((line, format!("unknown section [{name}]")));
        }
    }
    fn section<'a>(raw: &mut Raw, name: &'a str, errors: &'a mut Vec<(usize, String)>) -> Section<'a> {
        Section {
            name,
            entries: raw.remove(name).unwrap_or_default(),
            errors,
        }
    }
    let system = parse_system(section(&mut raw, "system", &mut errors));
    let damping = parse_damping(section(&mut raw, "damping", &mut errors));
    let sim = parse_sim(section(&mut raw, "sim", &mut errors));
    let analysis = parse_analysis(section(&mut raw, "analysis", &mut errors));
    let output = parse_output(section(&mut raw, "output", &mut errors));

    if let (Some(sys), InitialState::Values(v)) = (&system, &sim.z0) {
        if let (SystemKind::FiniteDim, Some(a)) = (sys.name, &sys.a_matrix) {
            if v.len() != a.nrows() {
                errors.push((0, format!("[sim] z0 has {} values but A is {}x{}", v.len(), a.nrows(), a.ncols())));
            }
        }
    }
    match (system, damping) {
        (Some(system), Some(damping)) if errors.is_empty() => Ok(ExperimentConfig {
            system,
            damping,
            sim,
            analysis,
            output,
        }),
        _ => {
            errors.sort_by_key(|(line, _)| *line);
            Err(ConfigError::Validation(errors))
        }
    }
}

fn write_rows(m: &DenseMatrix) -> String {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect::<Vec<_>>().join(", "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Canonical text form; `parse_config(cfg.to_ini())` reproduces `cfg`.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let sys = &self.system;
        let _ = writeln!(s, "[system]");
        let name = match sys.name {
            SystemKind::FiniteDim => "finite_dim",
            SystemKind::Kdv => "kdv",
            SystemKind::Wave => "wave",
        };
        let _ = writeln!(s, "name = {name}");
        if let Some(l) = sys.length {
            let _ = writeln!(s, "L = {l}");
        }
        if let Some(n) = sys.intervals {
            let _ = writeln!(s, "N = {n}");
        }
        let _ = writeln!(s, "k = {}", sys.k);
        match sys.a_profile {
            AProfile::Constant(c) => {
                let _ = writeln!(s, "a = constant {c}");
            }
            AProfile::Indicator { lo, hi, amp } => {
                let _ = writeln!(s, "a = indicator {lo} {hi} {amp}");
            }
        }
        if let Some(a) = &sys.a_matrix {
            let _ = writeln!(s, "A = {}", write_rows(a));
        }
        if let Some(b) = &sys.b_matrix {
            let _ = writeln!(s, "B = {}", write_rows(b));
        }
        let s_norm = match sys.s_norm {
            NormChoice::UEuclidean => "euclidean",
            NormChoice::SSup => "sup",
        };
        let _ = writeln!(s, "s_norm = {s_norm}");

        let d = &self.damping;
        let _ = writeln!(s, "\n[damping]");
        let _ = writeln!(s, "kind = {}", d.kind.name());
        let _ = writeln!(s, "level = {}", d.level);
        let _ = writeln!(s, "q = {}", d.q);
        let _ = writeln!(s, "gain = {}", d.gain);
        if let Some(c) = d.c1 {
            let _ = writeln!(s, "C1 = {c}");
        }
        if let Some(c) = d.c2 {
            let _ = writeln!(s, "C2 = {c}");
        }

        let m = &self.sim;
        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "dt = {}", m.dt);
        let _ = writeln!(s, "t_end = {}", m.t_end);
        let _ = writeln!(s, "error_control = {}", if m.error_control { "on" } else { "off" });
        let _ = writeln!(s, "target = {}", m.target);
        let _ = writeln!(s, "record_every = {}", m.record_every);
        let z0 = match &m.z0 {
            InitialState::Eigvec { index, scale } => format!("eigvec {index} {scale}"),
            InitialState::File(p) => format!("file {}", p.display()),
            InitialState::Values(v) => format!("values {}", join(v)),
            InitialState::Random { scale } => format!("random {scale}"),
        };
        let _ = writeln!(s, "z0 = {z0}");
        let _ = writeln!(s, "smooth = {}", if m.smooth { "on" } else { "off" });

        let a = &self.analysis;
        let _ = writeln!(s, "\n[analysis]");
        let fits: Vec<&str> = a.fits.iter().map(FitKind::name).collect();
        let _ = writeln!(s, "fits = {}", fits.join(", "));
        if !a.radii.is_empty() {
            let _ = writeln!(s, "radii = {}", join(&a.radii));
        }
        if let Some((lo, hi)) = a.window {
            let _ = writeln!(s, "window = {lo}, {hi}");
        }
        let _ = writeln!(s, "certificate = {}", a.certificate.map_or("auto", |c| c.name()));
        for (key, v) in [("r", a.r), ("gamma", a.gamma), ("C_theta", a.c_theta), ("c_S", a.c_s)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{key} = {v}");
            }
        }
        let _ = writeln!(s, "shift = {}", a.shift);
        let _ = writeln!(s, "damping_dims = {}", join(&a.damping_dims));
        let _ = writeln!(s, "damping_trials = {}", a.damping_trials);

        let _ = writeln!(s, "\n[output]");
        if let Some(d) = &self.output.directory {
            let _ = writeln!(s, "directory = {}", d.display());
        }
        let _ = writeln!(s, "formats = {}", self.output.formats.join(", "));
        s
    }
}

//! Nonlinear damping functions `sigma: U -> U` and a sampled checker for the
//! three defining properties (local Lipschitz, monotone, sector bound
//! `||sigma(s) - C1 s||_{S'} <= C2 h(||s||_S) <sigma(s), s>_U`).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Scalar saturation applied entrywise, all with unit slope at 0 and range `(-s0, s0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarSaturation {
    Tanh,
    Arctan,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingKind {
    Linear,
    NormSaturation,
    Componentwise(ScalarSaturation),
    Weak,
}

impl DampingKind {
    pub fn name(&self) -> &'static str {
        match self {
            DampingKind::Linear => "linear",
            DampingKind::NormSaturation => "norm_saturation",
            DampingKind::Componentwise(ScalarSaturation::Tanh) => "tanh",
            DampingKind::Componentwise(ScalarSaturation::Arctan) => "arctan",
            DampingKind::Componentwise(ScalarSaturation::Clamp) => "clamp",
            DampingKind::Weak => "weak",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "linear" => DampingKind::Linear,
            "norm_saturation" => DampingKind::NormSaturation,
            "tanh" => DampingKind::Componentwise(ScalarSaturation::Tanh),
            "arctan" => DampingKind::Componentwise(ScalarSaturation::Arctan),
            "clamp" => DampingKind::Componentwise(ScalarSaturation::Clamp),
            "weak" => DampingKind::Weak,
            _ => return None,
        })
    }

    /// Componentwise kinds measure `s` in the sup norm, the rest in `U`.
    pub fn uses_sup_norm(&self) -> bool {
        matches!(self, DampingKind::Componentwise(_) | DampingKind::Weak)
    }
}

/// Nondecreasing `h` of the sector bound.
#[derive(Debug, Clone, PartialEq)]
pub enum HFunction {
    Constant(f64),
    /// `x^exponent`; singular at 0 when the exponent is negative.
    Power(f64),
    /// Piecewise linear through `(x, y)` knots, constant outside.
    Table(Vec<(f64, f64)>),
}

impl HFunction {
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::InvalidInput(format!("h evaluated at negative x = {x}")));
        }
        match self {
            HFunction::Constant(c) => Ok(*c),
            HFunction::Power(p) => {
                if x == 0.0 && *p < 0.0 {
                    Err(Error::DomainError(x))
                } else {
                    Ok(x.powf(*p))
                }
            }
            HFunction::Table(knots) => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return Ok(first.1);
                }
                if x >= last.0 {
                    return Ok(last.1);
                }
                let i = knots.partition_point(|k| k.0 <= x);
                let (x0, y0) = knots[i - 1];
                let (x1, y1) = knots[i];
                Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DampingSpec {
    pub kind: DampingKind,
    /// Saturation level `s0`.
    pub level: f64,
    /// Weak-damping exponent.
    pub q: f64,
    /// Weak-damping gain.
    pub gain: f64,
    pub c1: f64,
    pub c2: f64,
    pub h: HFunction,
}

impl DampingSpec {
    pub fn linear() -> Self {
        Self {
            kind: DampingKind::Linear,
            level: 1.0,
            q: 1.0,
            gain: 1.0,
            c1: 1.0,
            c2: 1.0,
            h: HFunction::Constant(1.0),
        }
    }

    pub fn norm_saturation(level: f64) -> Self {
        Self {
            kind: DampingKind::NormSaturation,
            level,
            c2: 1.0 / level,
            ..Self::linear()
        }
    }

    pub fn componentwise(sat: ScalarSaturation, level: f64) -> Self {
        let c2 = match sat {
            ScalarSaturation::Arctan => std::f64::consts::FRAC_PI_2 / level,
            ScalarSaturation::Tanh | ScalarSaturation::Clamp => 1.0 / level,
        };
        Self {
            kind: DampingKind::Componentwise(sat),
            level,
            c2,
            ..Self::linear()
        }
    }

    /// `sigma(s) = c sign(s) |s|^q` entrywise, with `C1 = c` and `h(x) = x^(q-1)`.
    pub fn weak(q: f64, gain: f64) -> Self {
        Self {
            kind: DampingKind::Weak,
            level: 1.0,
            q,
            gain,
            c1: gain,
            c2: 1.0,
            h: HFunction::Power(q - 1.0),
        }
    }

    /// Default constants for a kind, with `level` or `(q, gain)` as applicable.
    pub fn from_kind(kind: DampingKind, level: f64, q: f64, gain: f64) -> Self {
        match kind {
            DampingKind::Linear => Self::linear(),
            DampingKind::NormSaturation => Self::norm_saturation(level),
            DampingKind::Componentwise(sat) => Self::componentwise(sat, level),
            DampingKind::Weak => Self::weak(q, gain),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return bad("C1 and C2 must be positive");
        }
        match self.kind {
            DampingKind::NormSaturation | DampingKind::Componentwise(_) if !(self.level > 0.0) => {
                return bad("saturation level must be positive");
            }
            DampingKind::Weak if !(self.q > 0.0 && self.q < 1.0) || !(self.gain >= 0.0) => {
                return bad("weak damping needs q in (0, 1) and gain >= 0");
            }
            _ => {}
        }
        match &self.h {
            HFunction::Constant(c) if !(*c > 0.0) => bad("constant h must be positive"),
            HFunction::Table(k) => {
                if k.is_empty() {
                    return bad("h table is empty");
                }
                let ordered = k.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
                if !ordered || k[0].1 <= 0.0 || k[0].0 < 0.0 {
                    return bad("h table must have increasing x, nondecreasing positive y");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn uses_sup_norm(&self) -> bool {
        self.kind.uses_sup_norm()
    }

    /// `h` is singular at 0 (weak damping, or any negative power).
    pub fn h0_singular(&self) -> bool {
        matches!(self.h, HFunction::Power(p) if p < 0.0)
    }

    /// `sigma(s)` with the Euclidean control norm.
    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        self.apply_weighted(s, 1.0)
    }

    /// `sigma(s)` with `||s||_U^2 = weight * sum s_i^2`.
    pub fn apply_weighted(&self, s: &[f64], weight: f64) -> Vec<f64> {
        match self.kind {
            DampingKind::Linear => s.to_vec(),
            DampingKind::NormSaturation => {
                let norm = (weight * s.iter().map(|x| x * x).sum::<f64>()).sqrt();
                if norm <= self.level {
                    s.to_vec()
                } else {
                    let f = self.level / norm;
                    s.iter().map(|x| x * f).collect()
                }
            }
            DampingKind::Componentwise(sat) => s.iter().map(|&x| scalar_saturation(sat, self.level, x)).collect(),
            DampingKind::Weak => s
                .iter()
                .map(|&x| {
                    let m = self.gain * x.abs().powf(self.q);
                    if x < 0.0 { -m } else { m }
                })
                .collect(),
        }
    }

    pub fn h_eval(&self, x: f64) -> Result<f64> {
        self.h.eval(x)
    }

    /// `||s||_S`: sup norm for componentwise kinds, weighted l2 otherwise.
    pub fn s_norm(&self, s: &[f64], weight: f64) -> f64 {
        if self.uses_sup_norm() {
            s.iter().fold(0.0, |m, x| m.max(x.abs()))
        } else {
            (weight * s.iter().map(|x| x * x).sum::<f64>()).sqrt()
        }
    }

    /// `||s||_{S'}`: grid-weighted l1 for componentwise kinds, weighted l2 otherwise.
    pub fn s_dual_norm(&self, s: &[f64], weight: f64) -> f64 {
        if self.uses_sup_norm() {
            weight * s.iter().map(|x| x.abs()).sum::<f64>()
        } else {
            (weight * s.iter().map(|x| x * x).sum::<f64>()).sqrt()
        }
    }

    /// Uniform bound `C_sigma >= ||sigma(s)||_U` for bounded kinds.
    pub fn bound(&self, dim: usize, weight: f64) -> Option<f64> {
        match self.kind {
            DampingKind::NormSaturation => Some(self.level),
            DampingKind::Componentwise(_) => Some(self.level * (dim as f64 * weight).sqrt()),
            DampingKind::Linear | DampingKind::Weak => None,
        }
    }

    /// `C2 h(||s||_S) <sigma(s), s>_U - ||sigma(s) - C1 s||_{S'}`.
    pub fn sector_margin(&self, s: &[f64], weight: f64) -> Result<f64> {
        let sig = self.apply_weighted(s, weight);
        let power = weight * sig.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
        let diff: Vec<f64> = sig.iter().zip(s).map(|(a, b)| a - self.c1 * b).collect();
        let h = self.h_eval(self.s_norm(s, weight))?;
        Ok(self.c2 * h * power - self.s_dual_norm(&diff, weight))
    }

    /// Checks the defining properties on random samples.
    pub fn verify_definition(&self, dim: usize, trials: usize, seed: u64) -> DampingReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = trials.max(1);

        let mut lipschitz: f64 = 0.0;
        for &radius in &[0.1, 1.0, 10.0] {
            for _ in 0..trials {
                let s1 = random_in_ball(&mut rng, dim, radius);
                let s2 = random_in_ball(&mut rng, dim, radius);
                let ds = l2(&sub(&s1, &s2));
                if ds > 0.0 {
                    let dsig = l2(&sub(&self.apply(&s1), &self.apply(&s2)));
                    lipschitz = lipschitz.max(dsig / ds);
                }
            }
        }

        let mut monotone = f64::INFINITY;
        for _ in 0..trials {
            let s1 = random_log_magnitude(&mut rng, dim);
            let s2 = random_log_magnitude(&mut rng, dim);
            let ds = sub(&s1, &s2);
            let nrm2 = ds.iter().map(|x| x * x).sum::<f64>();
            if nrm2 > 0.0 {
                let dsig = sub(&self.apply(&s1), &self.apply(&s2));
                let ip = dsig.iter().zip(&ds).map(|(a, b)| a * b).sum::<f64>();
                monotone = monotone.min(ip / nrm2);
            }
        }

        let h0_singular = self.h0_singular();
        let mut sector = f64::INFINITY;
        let mut sector_samples = 0usize;
        for _ in 0..trials {
            let s = random_log_magnitude(&mut rng, dim);
            if h0_singular && self.s_norm(&s, 1.0) < 1e-6 {
                continue;
            }
            if let Ok(m) = self.sector_margin(&s, 1.0) {
                sector = sector.min(m);
                sector_samples += 1;
            }
        }

        DampingReport {
            kind: self.kind,
            dim,
            lipschitz_ratio: lipschitz,
            monotone_margin: monotone,
            sector_margin: sector,
            sector_samples,
            h0_singular,
        }
    }
}

fn scalar_saturation(sat: ScalarSaturation, level: f64, x: f64) -> f64 {
    match sat {
        ScalarSaturation::Clamp => x.clamp(-level, level),
        ScalarSaturation::Tanh => level * (x / level).tanh(),
        ScalarSaturation::Arctan => {
            let c = std::f64::consts::FRAC_2_PI * level;
            c * (x / c).atan()
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = l2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    random_direction(rng, dim).into_iter().map(|x| x * r).collect()
}

/// Random direction with Euclidean magnitude log-uniform in `[1e-3, 1e3]`.
fn random_log_magnitude(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mag = 10f64.powf(rng.random_range(-3.0..3.0));
    random_direction(rng, dim).into_iter().map(|x| x * mag).collect()
}

/// Outcome of [`DampingSpec::verify_definition`].
#[derive(Debug, Clone, PartialEq)]
pub struct DampingReport {
    pub kind: DampingKind,
    pub dim: usize,
    /// Largest sampled `|sigma(s1) - sigma(s2)| / |s1 - s2|`.
    pub lipschitz_ratio: f64,
    /// Smallest `<sigma(s1) - sigma(s2), s1 - s2> / |s1 - s2|^2`.
    pub monotone_margin: f64,
    /// Smallest raw sector-bound margin.
    pub sector_margin: f64,
    pub sector_samples: usize,
    pub h0_singular: bool,
}

pub const DEFINITION_TOL: f64 = -1e-12;

impl DampingReport {
    pub fn lipschitz_pass(&self) -> bool {
        self.lipschitz_ratio.is_finite()
    }

    pub fn monotone_pass(&self) -> bool {
        self.monotone_margin >= DEFINITION_TOL
    }

    pub fn sector_pass(&self) -> bool {
        self.sector_samples > 0 && self.sector_margin >= DEFINITION_TOL
    }

    pub fn all_pass(&self) -> bool {
        self.lipschitz_pass() && self.monotone_pass() && self.sector_pass()
    }

    /// `(item, margin, pass)` rows in report order.
    pub fn rows(&self) -> Vec<(&'static str, f64, bool)> {
        let mut rows = vec![
            ("lipschitz", self.lipschitz_ratio, self.lipschitz_pass()),
            ("monotone", self.monotone_margin, self.monotone_pass()),
            ("sector", self.sector_margin, self.sector_pass()),
        ];
        if self.h0_singular {
            rows.push(("h0_singular", f64::INFINITY, false));
        }
        rows
    }
}

impl fmt::Display for DampingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "damping {} (dim {})", self.kind.name(), self.dim)?;
        for (item, margin, pass) in self.rows() {
            writeln!(f, "  {item:<12} {margin:>14e}  {}", if pass { "pass" } else { "FAIL" })?;
        }
        Ok(())
    }
}

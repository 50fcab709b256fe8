//! Dense real linear algebra used by every other module.
//!
//! Operators acting on a weighted space `<x, y> = x^T W y` are handled by
//! moving to Euclidean coordinates `y = L^T x` where `W = L L^T`. In those
//! coordinates an operator `A` becomes `L^T A L^{-T}` and adjoints become
//! plain transposes.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalue real parts at or above this value disqualify a matrix as Hurwitz.
pub const HURWITZ_EPS: f64 = -1e-12;

/// Inner product `<x, y> = x^T W y` with a symmetric positive-definite weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProduct {
    weight: DenseMatrix,
    /// Lower Cholesky factor of `weight`.
    factor: DenseMatrix,
    /// `factor^{-T}`.
    factor_inv_t: DenseMatrix,
}

impl InnerProduct {
    pub fn new(weight: DenseMatrix) -> Result<Self> {
        if !weight.is_square() || weight.nrows() == 0 {
            return Err(Error::Dimension("inner-product weight must be square and nonempty".into()));
        }
        if weight.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("inner-product weight has non-finite entries".into()));
        }
        let scale = weight.amax().max(1.0);
        let asym = (&weight - weight.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "inner-product weight is not symmetric (asymmetry {asym:e})"
            )));
        }
        let sym = (&weight + weight.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("inner-product weight is not positive definite".into()))?;
        let factor = chol.l();
        let n = sym.nrows();
        let factor_inv_t = factor
            .transpose()
            .solve_upper_triangular(&DenseMatrix::identity(n, n))
            .ok_or_else(|| Error::SingularSystem("Cholesky factor is singular".into()))?;
        Ok(Self {
            weight: sym,
            factor,
            factor_inv_t,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `w * I`, the grid-weighted l2 product when `w` is the mesh spacing.
    pub fn scaled_identity(n: usize, w: f64) -> Self {
        assert!(w > 0.0 && n > 0);
        let s = w.sqrt();
        Self {
            weight: DenseMatrix::identity(n, n) * w,
            factor: DenseMatrix::identity(n, n) * s,
            factor_inv_t: DenseMatrix::identity(n, n) / s,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.factor
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&(&self.weight * y))
    }

    pub fn norm_sq(&self, x: &Vector) -> f64 {
        self.inner(x, x).max(0.0)
    }

    pub fn norm(&self, x: &Vector) -> f64 {
        self.norm_sq(x).sqrt()
    }

    /// Euclidean coordinates `L^T x` of a vector.
    pub fn to_euclidean(&self, x: &Vector) -> Vector {
        self.factor.transpose() * x
    }

    pub fn from_euclidean(&self, y: &Vector) -> Vector {
        &self.factor_inv_t * y
    }

    /// Matrix of an operator `H -> H` in Euclidean coordinates.
    pub fn operator_to_euclidean(&self, a: &DenseMatrix) -> DenseMatrix {
        self.factor.transpose() * a * &self.factor_inv_t
    }

    /// Matrix of an operator from `domain` into `self` in Euclidean coordinates.
    pub fn map_to_euclidean(&self, domain: &InnerProduct, b: &DenseMatrix) -> DenseMatrix {
        self.factor.transpose() * b * &domain.factor_inv_t
    }

    /// Gram matrix `G` (so that `<Pz, z> = z^T G z`) of an operator given by
    /// its symmetric Euclidean-coordinate matrix.
    pub fn form_from_euclidean(&self, p_hat: &DenseMatrix) -> DenseMatrix {
        let g = &self.factor * p_hat * self.factor.transpose();
        symmetrize(&g)
    }

    /// Symmetric Euclidean-coordinate matrix `L^{-1} G L^{-T}` of a Gram matrix.
    pub fn form_to_euclidean(&self, g: &DenseMatrix) -> DenseMatrix {
        let m = self.factor_inv_t.transpose() * g * &self.factor_inv_t;
        symmetrize(&m)
    }

    /// Adjoint of `b: domain -> self`, i.e. `W_domain^{-1} b^T W_self`.
    pub fn adjoint_of_map(&self, domain: &InnerProduct, b: &DenseMatrix) -> DenseMatrix {
        let rhs = b.transpose() * &self.weight;
        domain
            .weight
            .clone()
            .cholesky()
            .expect("inner-product weight is positive definite")
            .solve(&rhs)
    }
}

pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

pub fn eigenvalues(a: &DenseMatrix) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DenseMatrix) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &DenseMatrix) -> bool {
    spectral_abscissa(a) < HURWITZ_EPS
}

/// Eigenvector for an (approximate) eigenvalue, by shifted inverse iteration
/// in complex arithmetic. Normalized to unit Euclidean length.
pub fn eigenvector(a: &DenseMatrix, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let shift = lambda + Complex64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    let mut m: DMatrix<Complex64> = a.map(|v| Complex64::new(v, 0.0));
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i % 3) as f64));
    for _ in 0..4 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::SingularSystem("inverse iteration matrix is singular".into()))?;
        let nrm = v.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::SingularSystem("inverse iteration diverged".into()));
        }
        v /= Complex64::new(nrm, 0.0);
    }
    Ok(v)
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(s: &DenseMatrix) -> (f64, f64) {
    let eig = SymmetricEigen::new(symmetrize(s));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn numerical_rank(m: &DenseMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = smax * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON * 10.0;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Rank of the Kalman matrix `[B, AB, ..., A^{n-1} B]`.
pub fn kalman_rank(a: &DenseMatrix, b: &DenseMatrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut k = DenseMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        k.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
        // keep blocks comparable in size so the rank tolerance is meaningful
        let s = block.amax();
        if s > 0.0 {
            block /= s;
        }
    }
    numerical_rank(&k)
}

/// Solves `A^T P + P A = -Q` for the symmetric positive-definite `P`.
///
/// Bartels-Stewart on the real Schur form `A = U T U^T`: the transformed
/// equation `T^T X + X T = -U^T Q U` is solved block by block (1x1 and 2x2
/// diagonal blocks) and `P = U X U^T`.
pub fn solve_lyapunov(a_tilde: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a_tilde.nrows();
    if !a_tilde.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "solve_lyapunov needs square A and Q of equal size, got {:?} and {:?}",
            a_tilde.shape(),
            q.shape()
        )));
    }
    if a_tilde.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries in Lyapunov data".into()));
    }
    let abscissa = spectral_abscissa(a_tilde);
    if abscissa >= HURWITZ_EPS {
        return Err(Error::NotHurwitz { abscissa });
    }

    let (u, t) = Schur::new(a_tilde.clone()).unpack();
    let f = -(u.transpose() * q * &u);

    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    let mut x = DenseMatrix::zeros(n, n);
    for &(ri, pi) in &blocks {
        for &(cj, qj) in &blocks {
            let mut rhs = DenseMatrix::zeros(pi, qj);
            for r in 0..pi {
                for c in 0..qj {
                    let (row, col) = (ri + r, cj + c);
                    let mut acc = f[(row, col)];
                    for k in 0..ri {
                        acc -= t[(k, row)] * x[(k, col)];
                    }
                    for l in 0..cj {
                        acc -= x[(row, l)] * t[(l, col)];
                    }
                    rhs[(r, c)] = acc;
                }
            }
            let tii = t.view((ri, ri), (pi, pi)).into_owned();
            let tjj = t.view((cj, cj), (qj, qj)).into_owned();
            let block = solve_small_sylvester(&tii, &tjj, &rhs)?;
            x.view_mut((ri, cj), (pi, qj)).copy_from(&block);
        }
    }

    let p = &u * x * u.transpose();
    Ok(symmetrize(&p))
}

/// Solves `T1^T X + X T2 = R` for blocks of size at most 2.
fn solve_small_sylvester(t1: &DenseMatrix, t2: &DenseMatrix, r: &DenseMatrix) -> Result<DenseMatrix> {
    let p = t1.nrows();
    let q = t2.nrows();
    let dim = p * q;
    // column-major vec: (I_q (x) T1^T + T2^T (x) I_p) vec(X) = vec(R)
    let mut k = DenseMatrix::zeros(dim, dim);
    for c in 0..q {
        for r_ in 0..p {
            let row = c * p + r_;
            for k_ in 0..p {
                k[(row, c * p + k_)] += t1[(k_, r_)];
            }
            for l in 0..q {
                k[(row, l * p + r_)] += t2[(l, c)];
            }
        }
    }
    let rhs = DVector::from_fn(dim, |idx, _| r[(idx % p, idx / p)]);
    let scale = k.amax().max(f64::MIN_POSITIVE);
    let det = k.determinant();
    if !det.is_finite() || det.abs() <= (1e-14 * scale).powi(dim as i32) {
        return Err(Error::SingularSystem(format!(
            "Sylvester block is rank deficient (det {det:e})"
        )));
    }
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Sylvester block solve failed".into()))?;
    Ok(DenseMatrix::from_fn(p, q, |r_, c| sol[c * p + r_]))
}

/// `e^{tA}` by scaling and squaring with a Pade approximant.
pub fn matrix_exponential(a: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::Dimension("matrix_exponential needs a nonempty square matrix".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time {t} is not finite")));
    }
    let scaled = a * t;
    if scaled.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    let e = scaled.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(e)
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Horizon beyond which the Gramian tail is declared non-convergent.
pub const GRAMIAN_MAX_HORIZON: f64 = 1e8;

/// `int_0^T (e^{sA})^T e^{sA} ds + alpha I` with `T` doubled until the tail
/// bound `||e^{TA}||^2 / (2 |max Re lambda|)` drops below `tol`.
///
/// The integral over `[0, d]` is taken by 8-point Gauss-Legendre with
/// `d ||A|| <= 1/4`; each doubling uses `G(2T) = G(T) + E_T^T G(T) E_T`.
pub fn gramian_quadrature(a: &DenseMatrix, alpha: f64, tol: f64) -> Result<DenseMatrix> {
    let n = a.nrows();
    if !a.is_square() || n == 0 {
        return Err(Error::Dimension("gramian_quadrature needs a nonempty square matrix".into()));
    }
    if !(tol > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidInput("tol must be > 0 and alpha >= 0".into()));
    }
    let abscissa = spectral_abscissa(a);
    if abscissa >= HURWITZ_EPS {
        return Err(Error::NotHurwitz { abscissa });
    }
    let decay = abscissa.abs();

    let anorm = a.norm().max(f64::MIN_POSITIVE);
    let mut horizon = 1.0;
    while horizon * anorm > 0.25 {
        horizon *= 0.5;
    }

    let mut gram = DenseMatrix::zeros(n, n);
    for &(node, weight) in &GAUSS_LEGENDRE_8 {
        let s = 0.5 * horizon * (node + 1.0);
        let e = matrix_exponential(a, s)?;
        gram += e.transpose() * &e * (0.5 * horizon * weight);
    }
    let mut step = matrix_exponential(a, horizon)?;

    loop {
        let enorm = step.norm();
        if !enorm.is_finite() {
            return Err(Error::TailNotConvergent { horizon, norm: enorm });
        }
        let tail = enorm * enorm / (2.0 * decay);
        if tail <= tol {
            break;
        }
        if horizon >= GRAMIAN_MAX_HORIZON {
            return Err(Error::TailNotConvergent { horizon, norm: enorm });
        }
        gram = &gram + step.transpose() * &gram * &step;
        step = &step * &step;
        horizon *= 2.0;
    }

    Ok(symmetrize(&gram) + DenseMatrix::identity(n, n) * alpha)
}

/// Largest value of `<Az, z> + <z, Az>` over unit vectors of `ip`.
///
/// Exact (largest eigenvalue of the symmetrized operator) up to n = 2000;
/// beyond that the maximum over `samples` random unit directions.
pub fn dissipativity_margin(a: &DenseMatrix, ip: &InnerProduct, samples: usize) -> f64 {
    let n = a.nrows();
    assert_eq!(n, ip.dim(), "operator and inner product dimensions differ");
    let w = ip.weight();
    let s = a.transpose() * w + w * a;
    if n <= 2000 {
        let s_hat = ip.form_to_euclidean(&s);
        return sym_eig_range(&s_hat).1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples.max(1) {
        let z = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nrm = ip.norm_sq(&z);
        if nrm > 0.0 {
            best = best.max(z.dot(&(&s * &z)) / nrm);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_oracle(a: &DenseMatrix, q: &DenseMatrix) -> DenseMatrix {
        let n = a.nrows();
        let at = a.transpose();
        let eye = DenseMatrix::identity(n, n);
        let k = eye.kronecker(&at) + at.kronecker(&eye);
        let rhs = -DVector::from_column_slice(q.as_slice());
        let sol = k.lu().solve(&rhs).unwrap();
        DenseMatrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn lyapunov_trivial_cases() {
        let p = solve_lyapunov(&(-DenseMatrix::identity(2, 2)), &DenseMatrix::identity(2, 2)).unwrap();
        assert!((p - DenseMatrix::identity(2, 2) * 0.5).amax() < 1e-14);
        let p = solve_lyapunov(&DenseMatrix::from_element(1, 1, -1.0), &DenseMatrix::from_element(1, 1, 2.0)).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle_on_oscillator() {
        let a = DenseMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 0.0]);
        let q = DenseMatrix::identity(2, 2);
        // frozen from the Kronecker oracle: P = [[1, -1/2], [-1/2, 3/2]]
        let expected = DenseMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.5]);
        assert!((kron_oracle(&a, &q) - &expected).amax() < 1e-13);
        let p = solve_lyapunov(&a, &q).unwrap();
        assert!((p - expected).amax() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let a = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_lyapunov(&a, &DenseMatrix::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn exponential_closed_forms() {
        let z = matrix_exponential(&DenseMatrix::zeros(3, 3), 2.0).unwrap();
        assert!((z - DenseMatrix::identity(3, 3)).amax() < 1e-15);
        let h = matrix_exponential(&DenseMatrix::from_element(1, 1, -1.0), 2f64.ln()).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-15);
        let nil = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = matrix_exponential(&nil, 3.5).unwrap();
        let expected = DenseMatrix::from_row_slice(2, 2, &[1.0, 3.5, 0.0, 1.0]);
        assert!((e - expected).amax() < 1e-14);
    }

    #[test]
    fn exponential_overflow() {
        let a = DenseMatrix::from_element(1, 1, 1.0);
        assert_eq!(matrix_exponential(&a, 1e6), Err(Error::Overflow));
    }

    #[test]
    fn gramian_scalar_and_diagonal() {
        let g = gramian_quadrature(&DenseMatrix::from_element(1, 1, -1.0), 0.1, 1e-12).unwrap();
        assert!((g[(0, 0)] - 0.6).abs() < 1e-10);
        let g = gramian_quadrature(&(DenseMatrix::identity(2, 2) * -2.0), 0.0, 1e-12).unwrap();
        assert!((g - DenseMatrix::identity(2, 2) * 0.25).amax() < 1e-10);
    }

    #[test]
    fn gramian_rejects_non_hurwitz() {
        let a = DenseMatrix::zeros(2, 2);
        assert!(matches!(gramian_quadrature(&a, 0.0, 1e-8), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn margins_of_simple_operators() {
        let skew = DenseMatrix::from_row_slice(3, 3, &[0.0, 2.0, -1.0, -2.0, 0.0, 4.0, 1.0, -4.0, 0.0]);
        assert!(dissipativity_margin(&skew, &InnerProduct::identity(3), 10).abs() < 1e-12);
        let neg = -DenseMatrix::identity(2, 2);
        assert!((dissipativity_margin(&neg, &InnerProduct::identity(2), 10) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_validation() {
        let asym = DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(InnerProduct::new(asym).is_err());
        let indef = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(InnerProduct::new(indef).is_err());
        let w = DenseMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let ip = InnerProduct::new(w.clone()).unwrap();
        let x = Vector::from_vec(vec![1.0, -2.0]);
        assert!((ip.norm_sq(&x) - x.dot(&(&w * &x))).abs() < 1e-14);
        assert!((ip.to_euclidean(&x).norm_squared() - ip.norm_sq(&x)).abs() < 1e-13);
        assert!((ip.from_euclidean(&ip.to_euclidean(&x)) - x).amax() < 1e-14);
    }

    #[test]
    fn kalman_rank_detects_uncontrollable() {
        let a = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(kalman_rank(&a, &DenseMatrix::zeros(2, 1)), 0);
        assert_eq!(kalman_rank(&a, &DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0])), 2);
    }

    #[test]
    fn inverse_iteration_finds_eigenvector() {
        let a = DenseMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 0.0]);
        for lambda in eigenvalues(&a) {
            let v = eigenvector(&a, lambda).unwrap();
            let ac: DMatrix<Complex64> = a.map(|x| Complex64::new(x, 0.0));
            let r = &ac * &v - &v * lambda;
            assert!(r.norm() < 1e-8);
        }
    }
}

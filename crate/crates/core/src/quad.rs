//! Scalar quadrature and root bracketing.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // absolute floor keeps integrals that vanish from recursing to max depth
    let tol = (rel_tol * whole.abs()).max(1e-300);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Solves `f(x) = target` for nondecreasing `f` with `f(0) <= target`.
///
/// The upper bracket is grown geometrically from `1`; bisection stops when
/// the bracket is narrower than `tol * max(1, x)`.
pub fn invert_increasing<F: Fn(f64) -> f64>(f: F, target: f64, tol: f64) -> f64 {
    if target <= f(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomials_and_roots() {
        assert!((adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-12);
        let v = adaptive_simpson(|v: f64| v.powf(0.25), 0.0, 1.0, 1e-12);
        assert!((v - 0.8).abs() < 1e-9);
        assert_eq!(adaptive_simpson(|x| x, 2.0, 2.0, 1e-10), 0.0);
    }

    #[test]
    fn inversion() {
        let x = invert_increasing(|x| x * x * x + x, 10.0, 1e-13);
        assert!((x - 2.0).abs() < 1e-11);
        assert_eq!(invert_increasing(|x| x, -1.0, 1e-10), 0.0);
    }
}

//! Small dense linear-algebra helpers shared by the analysis modules.
//!
//! Everything here works on `nalgebra` dynamic matrices with complex
//! entries; the matrices involved are the per-frequency symbols, so they
//! stay small (n is expected to be at most a few tens).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

pub(crate) fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Hermitian part (m + m*)/2.
pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest singular value; 0 for a zero-sized matrix.
pub(crate) fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s))
}

/// Eigenvalues of a Hermitian matrix, sorted ascending.
///
/// The input is symmetrized first so that callers may pass a matrix that
/// is Hermitian only up to round-off.
pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("hermitian eigenvalues are finite"));
    ev
}

/// Eigenvalues of a general complex matrix via the Schur decomposition.
pub(crate) fn complex_eigenvalues(m: &CMatrix) -> Option<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let eig = m.clone().schur().eigenvalues()?;
    Some(eig.iter().copied().collect())
}

/// (sigma_max, sigma_min) of a complex matrix.
pub(crate) fn extreme_singular_values(m: &CMatrix) -> (f64, f64) {
    let sv = m.clone().singular_values();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &s in sv.iter() {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    (hi, lo)
}

/// Numerical rank via singular values with a relative threshold.
pub(crate) fn rank(m: &CMatrix, rel_threshold: f64) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_threshold * max).count()
}

/// Right null-direction of m: the right singular vector for the smallest
/// singular value, together with that value.
pub(crate) fn smallest_singular_direction(m: &CMatrix) -> Option<(f64, CVector)> {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t?;
    let (mut idx, mut smin) = (0usize, f64::INFINITY);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < smin {
            smin = s;
            idx = i;
        }
    }
    let dir = vt.row(idx).adjoint();
    Some((smin, dir))
}

/// Solve the Lyapunov equation a* v + v a = -q for Hermitian v via the
/// Kronecker (vectorized) linear system.
pub(crate) fn lyapunov_solve(a: &CMatrix, q: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(q.nrows(), n);
    assert_eq!(q.ncols(), n);
    // vec(a* v) = (I kron a*) vec(v), vec(v a) = (a^T kron I) vec(v)
    let mut big = CMatrix::zeros(n * n, n * n);
    let astar = a.adjoint();
    let atrans = a.transpose();
    for bi in 0..n {
        for bj in 0..n {
            // (I kron a*) block (bi,bj) = delta_{bi bj} a*
            if bi == bj {
                let mut blk = big.view_mut((bi * n, bj * n), (n, n));
                blk += &astar;
            }
            // (a^T kron I) block (bi,bj) = atrans[(bi,bj)] * I
            let coeff = atrans[(bi, bj)];
            for d in 0..n {
                big[(bi * n + d, bj * n + d)] += coeff;
            }
        }
    }
    let mut rhs = CVector::zeros(n * n);
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = -q[(i, j)];
        }
    }
    let sol = big.lu().solve(&rhs)?;
    let mut v = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            v[(i, j)] = sol[j * n + i];
        }
    }
    Some(hermitian_part(&v))
}

/// m^{-1/2} of a real symmetric positive definite matrix.
pub(crate) fn inv_sqrt_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let se = m.clone().symmetric_eigen();
    if se.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let d = DMatrix::from_diagonal(&se.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Some(&se.eigenvectors * d * se.eigenvectors.transpose())
}

/// Largest real part of the eigenvalues of a general complex matrix.
pub(crate) fn max_real_eigenvalue(m: &CMatrix) -> Option<f64> {
    let eig = complex_eigenvalues(m)?;
    eig.iter().map(|e| e.re).fold(None, |acc, re| {
        Some(match acc {
            None => re,
            Some(a) => a.max(re),
        })
    })
}

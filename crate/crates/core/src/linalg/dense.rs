//! Dense complex kernels on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Complex matrix from a real one.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Build a complex matrix from real row-major data.
pub fn from_real_rows(n: usize, m: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(n, m, data.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

pub fn real_diag(values: &[f64]) -> CMatrix {
    CMatrix::from_fn(values.len(), values.len(), |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO })
}

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = if a.nrows() >= a.ncols() { a.adjoint() * a } else { a * a.adjoint() };
    g.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Smallest singular value (of the `min(m, n)` ones). Zero for empty matrices.
pub fn smallest_singular_value(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    svd(a).1.last().copied().unwrap_or(0.0)
}

/// Thin singular value decomposition `a = u diag(s) v*` by one-sided Jacobi
/// rotations, singular values in decreasing order.
pub fn svd(a: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = svd(&a.adjoint());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    // columns below this squared norm are numerically zero
    let negligible = (f64::EPSILON * a.norm()).powi(2);
    let tol = (m as f64).max(4.0) * f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, ZERO);
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() || g == 0.0 || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // rotate (x, y·e^{-iφ}) as a real Jacobi pair
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)] * phase.conj());
                    w[(i, p)] = x * c - y * s;
                    w[(i, q)] = x * s + y * c;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)] * phase.conj());
                    v[(i, p)] = x * c - y * s;
                    v[(i, q)] = x * s + y * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (c, &k) in order.iter().enumerate() {
        s.push(norms[k]);
        if norms[k] > 0.0 {
            u.set_column(c, &(w.column(k) / C64::new(norms[k], 0.0)));
        }
        vs.set_column(c, &v.column(k));
    }
    (u, s, vs)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Complex Schur factorization `a = q r q*` with `r` upper triangular.
///
/// Hessenberg reduction followed by single-shift QR sweeps with Wilkinson
/// shifts and deflation.
pub fn schur(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    if n == 0 {
        return (CMatrix::zeros(0, 0), CMatrix::zeros(0, 0));
    }
    let (mut q, mut h) = a.clone().hessenberg().unpack();
    for j in 0..n {
        for i in (j + 2)..n {
            h[(i, j)] = ZERO;
        }
    }
    if hessenberg_qr(&mut h, &mut q) {
        for j in 0..n {
            for i in (j + 1)..n {
                h[(i, j)] = ZERO;
            }
        }
        return (q, h);
    }
    let (q, mut r) = a.clone().schur().unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            r[(i, j)] = ZERO;
        }
    }
    (q, r)
}

/// Givens rotation `[[c, s], [−s̄, c]]` (real `c`) mapping `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, ONE);
    }
    let c = x.norm() / r;
    (c, (x / x.norm()) * y.conj() / r)
}

/// In-place QR iteration on an upper Hessenberg `h`, accumulating into `q`.
/// Returns `false` if the iteration budget is exhausted.
fn hessenberg_qr(h: &mut CMatrix, q: &mut CMatrix) -> bool {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut budget = 60 * n.max(10);
    while hi > 0 {
        // locate the active window [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let scale = if scale == 0.0 { hnorm } else { scale };
            if h[(lo, lo - 1)].norm() <= eps * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        if budget == 0 {
            return false;
        }
        budget -= 1;
        iter += 1;
        let (a, b, c, d) = (h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
        let shift = if iter % 11 == 10 {
            // exceptional shift to break cycles
            d + C64::new(0.75 * c.norm(), 0.0)
        } else {
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let (s1, s2) = ((a + d) * 0.5 + disc, (a + d) * 0.5 - disc);
            if (s1 - d).norm() <= (s2 - d).norm() {
                s1
            } else {
                s2
            }
        };
        let mut x = h[(lo, lo)] - shift;
        let mut y = h[(lo + 1, lo)];
        for k in lo..hi {
            if k > lo {
                x = h[(k, k - 1)];
                y = h[(k + 1, k - 1)];
            }
            let (cs, sn) = givens(x, y);
            let first_col = if k > lo { k - 1 } else { lo };
            for col in first_col..n {
                let (u, v) = (h[(k, col)], h[(k + 1, col)]);
                h[(k, col)] = u * cs + sn * v;
                h[(k + 1, col)] = -sn.conj() * u + v * cs;
            }
            let last_row = (k + 2).min(hi);
            for row in 0..=last_row {
                let (u, v) = (h[(row, k)], h[(row, k + 1)]);
                h[(row, k)] = u * cs + v * sn.conj();
                h[(row, k + 1)] = -u * sn + v * cs;
            }
            for row in 0..n {
                let (u, v) = (q[(row, k)], q[(row, k + 1)]);
                q[(row, k)] = u * cs + v * sn.conj();
                q[(row, k + 1)] = -u * sn + v * cs;
            }
            if k > lo {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    true
}

/// Eigenvalues (with algebraic multiplicity) of a square matrix.
pub fn eigenvalues(a: &CMatrix) -> Vec<C64> {
    let (_, r) = schur(a);
    (0..r.nrows()).map(|i| r[(i, i)]).collect()
}

/// Eigenvalues and unit eigenvectors (columns) via Schur back-substitution.
///
/// For defective matrices the returned vectors for a repeated eigenvalue are
/// (nearly) parallel; callers needing root subspaces should use spectral
/// projections instead.
pub fn eigen_decomposition(a: &CMatrix) -> (Vec<C64>, CMatrix) {
    let n = a.nrows();
    let (q, r) = schur(a);
    let small = f64::EPSILON * r.norm().max(f64::MIN_POSITIVE);
    let mut x = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = r[(k, k)];
        x[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in (i + 1)..=k {
                s += r[(i, j)] * x[(j, k)];
            }
            let mut d = r[(i, i)] - lam;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            x[(i, k)] = -s / d;
        }
    }
    let mut v = q * x;
    for mut col in v.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    let vals = (0..n).map(|i| r[(i, i)]).collect();
    (vals, v)
}

/// Ascending eigenvalues of the Hermitian part of `h`.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Smallest eigenvalue of the Hermitian pencil `(a, b)` with `b` positive definite.
pub fn pencil_min_eigenvalue(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::DimensionMismatch("empty pencil".into()));
    }
    let bh = (b + b.adjoint()) * C64::new(0.5, 0.0);
    let chol = bh
        .cholesky()
        .ok_or_else(|| Error::Singular("pencil metric is not positive definite (rank-deficient basis)".into()))?;
    let l = chol.l();
    let m = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&m.adjoint())
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    Ok(hermitian_eigenvalues(&c)[0])
}

/// LU solve of `a x = b`.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("dense LU solve failed".into()))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix is not invertible".into()))
}

/// Orthonormal basis of the column space of `x` with `rank` columns, plus the
/// ratio between the `rank`-th and the largest singular value.
pub fn orthonormal_range(x: &CMatrix, rank: usize) -> (CMatrix, f64) {
    let (u, s, _) = svd(x);
    let rank = rank.min(s.len());
    let top = s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let ratio = if rank == 0 { 1.0 } else { s[rank - 1] / top };
    (u.columns(0, rank).into_owned(), ratio)
}

/// Numerical rank: singular values above `tol`.
pub fn rank(x: &CMatrix, tol: f64) -> usize {
    if x.is_empty() {
        return 0;
    }
    svd(x).1.iter().filter(|&&s| s > tol).count()
}

/// Largest absolute row sum.
pub fn norm_inf(a: &CMatrix) -> f64 {
    a.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

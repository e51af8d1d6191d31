//! Krylov methods: Krylov–Schur Arnoldi for dominant eigenpairs and Lanczos
//! for the extreme eigenvalue of a Hermitian positive operator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{schur, CMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArnoldiOptions {
    /// Maximal Krylov subspace dimension (clamped to the operator order).
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Relative residual tolerance on the Ritz pairs of the operator.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self { krylov_dim: 0, max_restarts: 60, tol: 1e-12, seed: 0x5eed }
    }
}

/// A Ritz pair of the iterated operator.
#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: C64,
    pub vector: Vec<C64>,
    /// `‖A x - θ x‖` for the unit Ritz vector `x`.
    pub residual: f64,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [C64], s: C64) {
    a.iter_mut().for_each(|z| *z *= s);
}

/// Orthogonalize `w` against `basis` (two classical Gram–Schmidt passes);
/// returns the accumulated coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut coeffs = vec![ZERO; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(basis) {
            let h = dot(v, w);
            *c += h;
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= h * y);
        }
    }
    coeffs
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let s = norm(&v);
    scale(&mut v, C64::new(1.0 / s, 0.0));
    v
}

/// Swap the adjacent diagonal entries `i`, `i+1` of an upper triangular `s`
/// by a unitary rotation, updating the Schur vectors `z`.
fn swap_schur(s: &mut CMatrix, z: &mut CMatrix, i: usize) {
    let (t11, t12, t22) = (s[(i, i)], s[(i, i + 1)], s[(i + 1, i + 1)]);
    let (v1, v2) = (t12, t22 - t11);
    let r = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (v1, v2) = (v1 / r, v2 / r);
    let n = s.nrows();
    for c in 0..n {
        let (a, b) = (s[(i, c)], s[(i + 1, c)]);
        s[(i, c)] = v1.conj() * a + v2.conj() * b;
        s[(i + 1, c)] = -v2 * a + v1 * b;
    }
    for r in 0..n {
        let (a, b) = (s[(r, i)], s[(r, i + 1)]);
        s[(r, i)] = a * v1 + b * v2;
        s[(r, i + 1)] = -a * v2.conj() + b * v1.conj();
    }
    for r in 0..z.nrows() {
        let (a, b) = (z[(r, i)], z[(r, i + 1)]);
        z[(r, i)] = a * v1 + b * v2;
        z[(r, i + 1)] = -a * v2.conj() + b * v1.conj();
    }
    s[(i + 1, i)] = ZERO;
    s[(i, i)] = t22;
    s[(i + 1, i + 1)] = t11;
}

/// Reorder the Schur form so that diagonal entries appear by decreasing modulus.
fn sort_schur_by_modulus(s: &mut CMatrix, z: &mut CMatrix) {
    let n = s.nrows();
    for pass in 0..n {
        let mut swapped = false;
        for i in (pass..n.saturating_sub(1)).rev() {
            if s[(i + 1, i + 1)].norm() > s[(i, i)].norm() {
                swap_schur(s, z, i);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

/// Eigenvectors of an upper triangular matrix (columns, unit norm).
fn triangular_eigenvectors(s: &CMatrix, k: usize) -> CMatrix {
    let small = f64::EPSILON * s.norm().max(f64::MIN_POSITIVE);
    let mut y = CMatrix::zeros(k, k);
    for j in 0..k {
        let lam = s[(j, j)];
        y[(j, j)] = ONE;
        for i in (0..j).rev() {
            let mut acc = ZERO;
            for l in (i + 1)..=j {
                acc += s[(i, l)] * y[(l, j)];
            }
            let mut d = s[(i, i)] - lam;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            y[(i, j)] = -acc / d;
        }
        let nrm = y.column(j).norm();
        y.column_mut(j).scale_mut(1.0 / nrm);
    }
    y
}

/// The `nev` eigenpairs of largest modulus of the operator `apply` of order `n`.
pub fn arnoldi_dominant(
    apply: &dyn Fn(&[C64]) -> Vec<C64>,
    n: usize,
    nev: usize,
    opts: &ArnoldiOptions,
) -> Result<Vec<RitzPair>> {
    if n == 0 || nev == 0 {
        return Ok(Vec::new());
    }
    let nev = nev.min(n);
    let m = if opts.krylov_dim == 0 { (2 * nev + 20).max(40) } else { opts.krylov_dim };
    let m = m.max(nev + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut basis: Vec<Vec<C64>> = vec![random_unit(n, &mut rng)];
    let mut h = CMatrix::zeros(m + 1, m);
    let mut kept = 0usize;
    let mut op_scale: f64 = 0.0;

    for _restart in 0..=opts.max_restarts {
        let mut dim = m;
        for j in kept..m {
            let mut w = apply(&basis[j]);
            op_scale = op_scale.max(norm(&w));
            let coeffs = orthogonalize(&basis[..=j], &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] += c;
            }
            let beta = norm(&w);
            if beta <= 1e-13 * op_scale.max(f64::MIN_POSITIVE) {
                // invariant subspace: restart the residual direction randomly
                let mut fresh = random_unit(n, &mut rng);
                orthogonalize(&basis[..=j], &mut fresh);
                let fn_ = norm(&fresh);
                h[(j + 1, j)] = ZERO;
                if j + 1 == n || fn_ < 1e-8 {
                    dim = j + 1;
                    break;
                }
                scale(&mut fresh, C64::new(1.0 / fn_, 0.0));
                basis.truncate(j + 1);
                basis.push(fresh);
                continue;
            }
            h[(j + 1, j)] = C64::new(beta, 0.0);
            scale(&mut w, C64::new(1.0 / beta, 0.0));
            basis.truncate(j + 1);
            basis.push(w);
        }

        let hm = h.view((0, 0), (dim, dim)).into_owned();
        let (mut z, mut s) = schur(&hm);
        sort_schur_by_modulus(&mut s, &mut z);
        let want = nev.min(dim);

        // residual coupling row b = h_{m+1,m} e_mᵀ Z
        let b = h.view((dim, 0), (1, dim)) * &z;

        let y = triangular_eigenvectors(&s, want);
        let mut pairs = Vec::with_capacity(want);
        let mut all_ok = true;
        for i in 0..want {
            let theta = s[(i, i)];
            let yi = y.column(i);
            let mut res = ZERO;
            for l in 0..want {
                res += b[(0, l)] * yi[l];
            }
            let res = res.norm();
            if res > opts.tol * theta.norm().max(op_scale * 1e-3) {
                all_ok = false;
            }
            pairs.push((theta, res, i));
        }

        let exhausted = dim < m || _restart == opts.max_restarts;
        if all_ok || exhausted {
            if !all_ok && dim == m {
                return Err(Error::NoConvergence(format!(
                    "Krylov–Schur: {want} eigenpairs not converged after {} restarts",
                    opts.max_restarts
                )));
            }
            // Ritz vectors x = V Z y
            let zy = z.columns(0, want) * &y;
            return Ok(pairs
                .into_iter()
                .map(|(theta, res, i)| {
                    let mut x = vec![ZERO; n];
                    for (l, v) in basis.iter().take(dim).enumerate() {
                        let c = zy[(l, i)];
                        if c != ZERO {
                            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += c * vi);
                        }
                    }
                    let nrm = norm(&x);
                    scale(&mut x, C64::new(1.0 / nrm, 0.0));
                    RitzPair { value: theta, vector: x, residual: res }
                })
                .collect());
        }

        // thick restart keeping the leading `keep` Schur vectors
        let keep = (want + (m - want) / 2).min(m - 1).max(want);
        let mut new_basis = Vec::with_capacity(m + 1);
        for c in 0..keep {
            let mut x = vec![ZERO; n];
            for (l, v) in basis.iter().take(dim).enumerate() {
                let coef = z[(l, c)];
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += coef * vi);
            }
            new_basis.push(x);
        }
        new_basis.push(basis[dim].clone());
        basis = new_basis;
        h = CMatrix::zeros(m + 1, m);
        for i in 0..keep {
            for j in i..keep {
                h[(i, j)] = s[(i, j)];
            }
            h[(keep, i)] = b[(0, i)];
        }
        kept = keep;
    }
    unreachable!("loop returns on the final restart")
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator by Lanczos
/// with full reorthogonalization.
pub fn lanczos_largest(apply: &dyn Fn(&[C64]) -> Vec<C64>, n: usize, max_steps: usize, seed: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let steps = max_steps.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = vec![random_unit(n, &mut rng)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for j in 0..steps {
        let mut w = apply(&basis[j]);
        let coeffs = orthogonalize(&basis, &mut w);
        alpha.push(coeffs[j].re);
        let b = norm(&w);
        let k = alpha.len();
        let t = DMatrix::<f64>::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c || c + 1 == r {
                beta[r.min(c)]
            } else {
                0.0
            }
        });
        let top = t.symmetric_eigenvalues().max();
        let converged = (top - last).abs() <= 1e-13 * top.abs();
        last = top;
        if b <= 1e-14 * top.abs() || converged || j + 1 == steps {
            break;
        }
        beta.push(b);
        scale(&mut w, C64::new(1.0 / b, 0.0));
        basis.push(w);
    }
    last
}

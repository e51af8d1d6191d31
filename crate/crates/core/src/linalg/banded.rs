//! Banded LU factorization with partial pivoting.
//!
//! The factorization follows the classical band elimination: row interchanges
//! are confined to `kl` rows below the pivot, which widens the upper band of
//! `U` to `ku + kl`. Multipliers are kept per elimination step so that both
//! `A x = b` and `A* x = b` can be solved from one factorization.

use super::dense::{CMatrix, C64, ZERO};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// A factorized operator that can solve with itself and its adjoint.
pub trait LinearSolver: Sync {
    fn order(&self) -> usize;
    fn solve_in_place(&self, b: &mut [C64]);
    fn solve_adjoint_in_place(&self, b: &mut [C64]);

    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_adjoint_in_place(&mut x);
        x
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<C64>,
    mult: Vec<C64>,
    piv: Vec<usize>,
    /// `perm[old] = new`, when the matrix was reordered before factoring.
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    /// Factor a sparse matrix in its natural ordering.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_permuted(a, None)
    }

    /// Factor `P A Pᵀ` where `perm[old] = new` is chosen to reduce bandwidth.
    pub fn factor_permuted(a: &CsrMatrix, perm: Option<Vec<usize>>) -> Result<Self> {
        let owned;
        let m = match &perm {
            Some(p) => {
                owned = a.permuted(p);
                &owned
            }
            None => a,
        };
        let n = m.order();
        let (kl, ku) = m.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band: vec![ZERO; n * width],
            mult: vec![ZERO; n * kl.max(1)],
            piv: vec![0; n],
            perm,
        };
        for (i, j, v) in m.entries() {
            let idx = lu.idx(i, j);
            lu.band[idx] += v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let jmax = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].norm();
            for r in (k + 1)..=last {
                let v = self.band[self.idx(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k} of banded factorization")));
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.idx(k, k)];
            for r in (k + 1)..=last {
                let ir = self.idx(r, k);
                let m = self.band[ir] / pivot;
                self.band[ir] = ZERO;
                self.mult[k * kl + (r - k - 1)] = m;
                if m != ZERO {
                    for j in (k + 1)..=jmax {
                        let kj = self.band[self.idx(k, j)];
                        let rj = self.idx(r, j);
                        self.band[rj] -= m * kj;
                    }
                }
            }
        }
        Ok(())
    }

    fn solve_core(&self, b: &mut [C64]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != ZERO {
                for t in 1..=kl.min(n - 1 - k) {
                    b[k + t] -= self.mult[k * kl + t - 1] * bk;
                }
            }
        }
        let span = self.ku + kl;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..=(i + span).min(n - 1) {
                s -= self.band[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.band[self.idx(i, i)];
        }
    }

    fn solve_adjoint_core(&self, b: &mut [C64]) {
        let (n, kl) = (self.n, self.kl);
        let span = self.ku + kl;
        // U* z = b
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(span)..i {
                s -= self.band[self.idx(j, i)].conj() * b[j];
            }
            b[i] = s / self.band[self.idx(i, i)].conj();
        }
        // M* y = z, undoing the elimination steps in reverse
        for k in (0..n).rev() {
            let mut s = b[k];
            for t in 1..=kl.min(n - 1 - k) {
                s -= self.mult[k * kl + t - 1].conj() * b[k + t];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }

    fn with_perm(&self, b: &mut [C64], f: impl Fn(&Self, &mut [C64])) {
        match &self.perm {
            None => f(self, b),
            Some(perm) => {
                let mut c = vec![ZERO; self.n];
                for (old, &new) in perm.iter().enumerate() {
                    c[new] = b[old];
                }
                f(self, &mut c);
                for (old, &new) in perm.iter().enumerate() {
                    b[old] = c[new];
                }
            }
        }
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }
}

impl LinearSolver for BandedLu {
    fn order(&self) -> usize {
        self.n
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        self.with_perm(b, Self::solve_core);
    }

    fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        self.with_perm(b, Self::solve_adjoint_core);
    }
}

/// Dense LU of a matrix and of its adjoint.
pub struct DenseLu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_adj: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn factor(a: &CMatrix) -> Result<Self> {
        let lu = a.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("dense LU: singular matrix".into()));
        }
        Ok(Self { lu, lu_adj: a.adjoint().lu() })
    }
}

impl LinearSolver for DenseLu {
    fn order(&self) -> usize {
        self.lu.l().nrows()
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        let mut v = nalgebra::DVector::from_column_slice(b);
        self.lu.solve_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }

    fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let mut v = nalgebra::DVector::from_column_slice(b);
        self.lu_adj.solve_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded(n: usize, kl: usize, ku: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // weak diagonal so that pivoting actually happens
                let scale = if i == j { 0.1 } else { 1.0 };
                trip.push((i, j, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale));
            }
        }
        CsrMatrix::from_triplets(n, trip)
    }

    #[test]
    fn solves_match_dense() {
        let a = random_banded(40, 3, 2, 7);
        let lu = BandedLu::factor(&a).unwrap();
        let dense = a.to_dense();
        let b: Vec<C64> = (0..40).map(|k| C64::new(k as f64, 1.0 - k as f64 * 0.1)).collect();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "residual {err}");

        let y = lu.solve_adjoint(&b);
        let yv = nalgebra::DVector::from_column_slice(&y);
        let r = dense.adjoint() * yv;
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "adjoint residual {err}");
    }

    #[test]
    fn permuted_factorization() {
        let a = random_banded(12, 1, 1, 3);
        let perm: Vec<usize> = (0..12).rev().collect();
        let lu = BandedLu::factor_permuted(&a, Some(perm)).unwrap();
        let b: Vec<C64> = (0..12).map(|k| C64::new(1.0, k as f64)).collect();
        let x = lu.solve(&b);
        let r = a.matvec(&x);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).norm() < 1e-10);
        }
        let y = lu.solve_adjoint(&b);
        let r = a.adjoint().matvec(&y);
        for (p, q) in r.iter().zip(&b) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, C64::new(1.0, 0.0)), (0, 1, C64::new(1.0, 0.0))]);
        assert!(BandedLu::factor(&a).is_err());
    }
}

//! Minimal compressed-sparse-row matrix for the finite-difference operators.

use super::dense::{CMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    /// Square matrix of order `n` from `(row, col, value)` triplets.
    /// Duplicate entries are summed; explicit zeros are kept.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside order {n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &CMatrix) -> Self {
        let n = a.nrows();
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != ZERO {
                    trip.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut a = CMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            a[(i, j)] += v;
        }
        a
    }

    /// `self - shift·I` as a new matrix.
    pub fn shifted(&self, shift: C64) -> Self {
        let mut trip: Vec<(usize, usize, C64)> = self.entries().collect();
        trip.extend((0..self.n).map(|i| (i, i, -shift)));
        Self::from_triplets(self.n, trip)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.n, self.entries().map(|(i, j, v)| (j, i, v.conj())).collect())
    }

    /// `P A Pᵀ` for a permutation given as `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_triplets(self.n, self.entries().map(|(i, j, v)| (perm[i], perm[j], v)).collect())
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        self.entries().fold((0, 0), |(kl, ku), (i, j, _)| {
            if i > j {
                (kl.max(i - j), ku)
            } else {
                (kl, ku.max(j - i))
            }
        })
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (_, j, v) in self.entries() {
            col[j] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sqrt(‖A‖₁ ‖A‖∞)`, an upper bound for the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (self.norm_one() * self.norm_inf()).sqrt()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut trip: Vec<(usize, usize, C64)> = self.entries().collect();
        trip.extend(other.entries().map(|(i, j, v)| (i, j, -v)));
        Self::from_triplets(self.n, trip)
    }
}

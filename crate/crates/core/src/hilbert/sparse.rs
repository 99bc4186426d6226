//! Compressed-sparse-row complex matrices.
//!
//! Used to assemble Hamiltonians without dense Kronecker products and to
//! apply them (and jump operators) to dense states in the time steppers.
//! Dense matrices are column-major (nalgebra), so `mul_dense` walks one
//! column of the right-hand side at a time.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{strides, CMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut t: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), &mut t)
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, triplets: &mut [(usize, usize, C64)]) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets.iter() {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        // drop cancelled entries
        let mut keep_c = Vec::with_capacity(col_idx.len());
        let mut keep_v = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.iter().zip(col_idx).zip(vals) {
            if v != C64::new(0.0, 0.0) {
                row_ptr[r + 1] += 1;
                keep_c.push(c);
                keep_v.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx: keep_c,
            vals: keep_v,
        }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut t = Vec::new();
        for c in 0..n {
            for r in 0..n {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    t.push((r, c, v));
                }
            }
        }
        Self::from_triplets(n, &mut t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n)
            .flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.vals[k])))
    }

    /// Stored `(col, value)` entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn diagonal(&self) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); self.n];
        for (r, c, v) in self.triplets() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    /// Splits into (diagonal, off-diagonal part).
    pub fn split_diagonal(&self) -> (Vec<C64>, CsrMatrix) {
        let mut off: Vec<_> = self.triplets().filter(|&(r, c, _)| r != c).collect();
        (self.diagonal(), Self::from_triplets(self.n, &mut off))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        self.add_scaled(other, C64::new(1.0, 0.0))
    }

    pub fn add_scaled(&self, other: &CsrMatrix, s: C64) -> Self {
        assert_eq!(self.n, other.n);
        let mut t: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(r, c, v)| (r, c, v * s)))
            .collect();
        Self::from_triplets(self.n, &mut t)
    }

    pub fn adjoint(&self) -> Self {
        let mut t: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.n, &mut t)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = Vec::new();
        let mut acc = vec![C64::new(0.0, 0.0); self.n];
        let mut touched = Vec::new();
        let mut mark = vec![false; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (mid, a) = (self.col_idx[k], self.vals[k]);
                for q in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.col_idx[q];
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * other.vals[q];
                }
            }
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = C64::new(0.0, 0.0);
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.n, &mut t)
    }

    pub fn mul_vec_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for r in 0..self.n {
            let mut s = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            out[r] = s;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = self * m` for a dense square `m`.
    pub fn mul_dense_into(&self, m: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        assert_eq!(m.nrows(), n);
        assert_eq!(out.nrows(), n);
        assert_eq!(out.ncols(), m.ncols());
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        for (col_in, col_out) in src.chunks_exact(n).zip(dst.chunks_exact_mut(n)) {
            self.mul_vec_into(col_in, col_out);
        }
    }

    /// `out = m * self` for a dense square `m`; streams whole columns, which
    /// suits column-major storage better than [`CsrMatrix::mul_dense_into`].
    pub fn dense_mul_into(&self, m: &CMatrix, out: &mut CMatrix) {
        let n = self.n;
        assert_eq!(m.ncols(), n);
        assert_eq!(out.ncols(), n);
        assert_eq!(out.nrows(), m.nrows());
        let rows = m.nrows();
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        dst.fill(C64::new(0.0, 0.0));
        for r in 0..n {
            let col_in = &src[r * rows..(r + 1) * rows];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let c = self.col_idx[k];
                for (o, x) in dst[c * rows..(c + 1) * rows].iter_mut().zip(col_in) {
                    *o += v * x;
                }
            }
        }
    }

    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = DMatrix::zeros(self.n, m.ncols());
        self.mul_dense_into(m, &mut out);
        out
    }

    /// Values in storage order; pairs with [`CsrMatrix::with_values`] for
    /// matrices that share a sparsity pattern.
    pub fn values(&self) -> &[C64] {
        &self.vals
    }

    pub fn with_values(&self, vals: Vec<C64>) -> Self {
        assert_eq!(vals.len(), self.vals.len());
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals,
        }
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.vals
    }

    /// Re-expresses `self` on the sparsity pattern of `pattern`, which must
    /// contain every stored entry of `self`.
    pub fn values_on_pattern(&self, pattern: &CsrMatrix) -> Vec<C64> {
        assert_eq!(self.n, pattern.n);
        let mut out = vec![C64::new(0.0, 0.0); pattern.nnz()];
        for r in 0..self.n {
            let p = &pattern.col_idx[pattern.row_ptr[r]..pattern.row_ptr[r + 1]];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let pos = p.binary_search(&self.col_idx[k]).expect("entry missing from pattern");
                out[pattern.row_ptr[r] + pos] = self.vals[k];
            }
        }
        out
    }
}

/// Kronecker embedding of a single-mode matrix, built directly in sparse
/// form (mode 0 varies slowest).
pub fn embed_sparse(op: &CMatrix, mode: usize, dims: &[usize]) -> CsrMatrix {
    let total: usize = dims.iter().product();
    let st = strides(dims);
    let dm = dims[mode];
    let stride = st[mode];
    let mut t = Vec::new();
    for row in 0..total {
        let nr = (row / stride) % dm;
        let base = row - nr * stride;
        for nc in 0..dm {
            let v = op[(nr, nc)];
            if v != C64::new(0.0, 0.0) {
                t.push((row, base + nc * stride, v));
            }
        }
    }
    CsrMatrix::from_triplets(total, &mut t)
}

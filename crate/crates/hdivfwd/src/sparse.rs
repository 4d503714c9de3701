//! Compressed sparse row matrices with deterministic parallel products.

use rayon::prelude::*;
use std::io::Write;

use crate::error::Result;

/// CSR matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entry lists. Entries must be sorted by column and
    /// free of duplicates.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0usize);
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                debug_assert!((c as usize) < ncols);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// Per-row Euclidean norm, `D_ii = (sum_j A_ij^2)^(1/2)`.
    pub fn row_l2_norms(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().sum::<f64>()).collect()
    }

    pub fn row_l1_norms(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).collect()
    }

    /// y = A x, parallel over rows (deterministic: each row is a serial sum).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        });
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.cols {
            counts[c as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(self.ncols + 1);
        row_ptr.push(0);
        for c in 0..self.ncols {
            row_ptr.push(row_ptr[c] + counts[c]);
        }
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        let mut next = row_ptr[..self.ncols].to_vec();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[k] as usize;
                let pos = next[c];
                next[c] += 1;
                cols[pos] = i as u32;
                vals[pos] = self.vals[k];
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, cols, vals }
    }

    /// One symmetric Gauss-Seidel sweep (forward then backward) on `A z = r`,
    /// updating `z` in place. Serial by construction.
    pub fn sgs_sweep(&self, r: &[f64], z: &mut [f64]) {
        self.gs_forward_sweep(r, z);
        self.gs_backward_sweep(r, z);
    }

    pub fn gs_forward_sweep(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(self.nrows, self.ncols);
        for i in 0..self.nrows {
            self.gs_update(i, r, z);
        }
    }

    pub fn gs_backward_sweep(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(self.nrows, self.ncols);
        for i in (0..self.nrows).rev() {
            self.gs_update(i, r, z);
        }
    }

    fn gs_update(&self, i: usize, r: &[f64], z: &mut [f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let mut acc = r[i];
        let mut diag = 0.0;
        for k in lo..hi {
            let c = self.cols[k] as usize;
            if c == i {
                diag = self.vals[k];
            } else {
                acc -= self.vals[k] * z[c];
            }
        }
        if diag != 0.0 {
            z[i] = acc / diag;
        }
    }

    /// Sparse matrix product C = self * other.
    pub fn multiply(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let rows: Vec<Vec<(u32, f64)>> = (0..self.nrows)
            .map(|i| {
                let mut acc: Vec<(u32, f64)> = Vec::new();
                let (cols, vals) = self.row(i);
                for (&k, &v) in cols.iter().zip(vals) {
                    let (ocols, ovals) = other.row(k as usize);
                    for (&c, &ov) in ocols.iter().zip(ovals) {
                        acc.push((c, v * ov));
                    }
                }
                acc.sort_unstable_by_key(|e| e.0);
                acc.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                acc
            })
            .collect();
        CsrMatrix::from_rows(other.ncols, rows)
    }

    /// Matrix Market coordinate export. With `symmetric` set, only the lower
    /// triangle is written and the `symmetric` qualifier is used.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W, symmetric: bool) -> Result<()> {
        let kind = if symmetric { "symmetric" } else { "general" };
        writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
        let mut entries = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if symmetric && (c as usize) > i {
                    continue;
                }
                entries.push((i + 1, c as usize + 1, v));
            }
        }
        writeln!(w, "{} {} {}", self.nrows, self.ncols, entries.len())?;
        for (i, j, v) in entries {
            writeln!(w, "{} {} {:.16e}", i, j, v)?;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i][c as usize] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CsrMatrix {
        // [2 1 0; 1 2 1; 0 1 2]
        CsrMatrix::from_rows(
            3,
            vec![
                vec![(0, 2.0), (1, 1.0)],
                vec![(0, 1.0), (1, 2.0), (2, 1.0)],
                vec![(1, 1.0), (2, 2.0)],
            ],
        )
    }

    #[test]
    fn matvec_basic() {
        let a = small();
        let y = a.matvec_alloc(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![4.0, 8.0, 8.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = small();
        let att = a.transpose().transpose();
        assert_eq!(a.to_dense(), att.to_dense());
    }

    #[test]
    fn matrix_market_header() {
        let a = small();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
        // lower triangle of the tridiagonal matrix has 5 entries
        assert!(text.lines().nth(1).unwrap().ends_with(" 5"));
    }
}

//! Exact linear-time solver for the RT0 face mass matrix.
//!
//! Same-axis tent functions couple only with their immediate neighbors along
//! one grid direction, so the adjacency graph of `A` is a union of simple
//! paths. Ordering each path end-to-end gives a perfect elimination ordering,
//! and an LDL^T (Thomas) factorization solves `A x = b` exactly in O(n).

use crate::sparse::CsrMatrix;

/// LDL^T factorization of a symmetric positive definite matrix whose
/// adjacency graph is a union of simple paths.
pub struct PathFactor {
    /// Elimination order: chains laid out back to back.
    order: Vec<u32>,
    /// Position of each unknown in `order` (inverse permutation).
    position: Vec<u32>,
    /// Pivot diagonal per position.
    d: Vec<f64>,
    /// Subdiagonal multiplier linking position k-1 to k; zero at chain starts.
    l: Vec<f64>,
}

impl PathFactor {
    /// Build the factorization, or `None` when the sparsity pattern is not a
    /// union of paths (some row couples to more than two neighbors, or the
    /// graph contains a cycle) or a pivot fails to stay positive.
    pub fn build(a: &CsrMatrix) -> Option<PathFactor> {
        let n = a.nrows();
        // neighbor lists; bail out beyond degree 2
        let mut nbrs: Vec<[u32; 2]> = vec![[u32::MAX; 2]; n];
        let mut deg = vec![0u8; n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c as usize != i && v != 0.0 {
                    if deg[i] >= 2 {
                        return None;
                    }
                    nbrs[i][deg[i] as usize] = c;
                    deg[i] += 1;
                }
            }
        }
        // walk each path from an endpoint (degree <= 1)
        let mut order: Vec<u32> = Vec::with_capacity(n);
        let mut chain_start = vec![false; n.max(1)];
        let mut visited = vec![false; n];
        for start in 0..n as u32 {
            if visited[start as usize] || deg[start as usize] > 1 {
                continue;
            }
            let mut prev = u32::MAX;
            let mut cur = start;
            let mut first = true;
            loop {
                visited[cur as usize] = true;
                if first {
                    chain_start[order.len()] = true;
                    first = false;
                }
                order.push(cur);
                let [a0, a1] = nbrs[cur as usize];
                let next = if a0 != prev && a0 != u32::MAX {
                    a0
                } else if a1 != prev && a1 != u32::MAX {
                    a1
                } else {
                    break;
                };
                prev = cur;
                cur = next;
            }
        }
        if order.len() != n {
            // leftover nodes all have degree 2: the graph contains a cycle
            return None;
        }
        let mut position = vec![0u32; n];
        for (k, &i) in order.iter().enumerate() {
            position[i as usize] = k as u32;
        }
        // Thomas factorization per chain
        let mut d = vec![0.0f64; n];
        let mut l = vec![0.0f64; n];
        for k in 0..n {
            let i = order[k] as usize;
            let mut diag = 0.0;
            let mut e_prev = 0.0; // coupling to the previous position
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c as usize == i {
                    diag = v;
                } else if !chain_start[k] && c == order[k - 1] {
                    e_prev = v;
                }
            }
            if chain_start[k] {
                d[k] = diag;
            } else {
                l[k] = e_prev / d[k - 1];
                d[k] = diag - l[k] * e_prev;
            }
            if d[k] <= 0.0 {
                return None;
            }
        }
        Some(PathFactor { order, position, d, l })
    }

    /// Exact solve of `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        assert_eq!(b.len(), n);
        // forward substitution in elimination order
        let mut y = vec![0.0f64; n];
        for k in 0..n {
            let bi = b[self.order[k] as usize];
            y[k] = if self.l[k] != 0.0 { bi - self.l[k] * y[k - 1] } else { bi };
        }
        // diagonal scale and backward substitution
        let mut x = vec![0.0f64; n];
        let mut carry = 0.0;
        for k in (0..n).rev() {
            let mut v = y[k] / self.d[k];
            // carry is valid only when position k+1 continues the same chain,
            // i.e. l[k+1] links it back to k
            if k + 1 < n && self.l[k + 1] != 0.0 {
                v -= self.l[k + 1] * carry;
            }
            carry = v;
            x[k] = v;
        }
        // undo the permutation
        let mut out = vec![0.0f64; n];
        for i in 0..n {
            out[i] = x[self.position[i] as usize];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::amg::DenseLu;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn chain_matrix(lens: &[usize], seed: u64) -> CsrMatrix {
        // SPD tridiagonal chains with random sizes: diag 2.5, off -1 +- noise
        let n: usize = lens.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        let mut base = 0usize;
        for &len in lens {
            for k in 0..len {
                let i = base + k;
                rows[i].push((i as u32, 2.5 + rng.gen::<f64>()));
            }
            for k in 0..len.saturating_sub(1) {
                let i = base + k;
                let v = -1.0 + 0.3 * rng.gen::<f64>();
                rows[i].push(((i + 1) as u32, v));
                rows[i + 1].push((i as u32, v));
            }
            base += len;
        }
        for r in &mut rows {
            r.sort_unstable_by_key(|e| e.0);
        }
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn matches_dense_solve() {
        let a = chain_matrix(&[7, 1, 12, 3], 3);
        let f = PathFactor::build(&a).expect("path structure");
        let lu = DenseLu::factor(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let b: Vec<f64> = (0..a.nrows()).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x = f.solve(&b);
            let x_ref = lu.solve(&b);
            for (u, v) in x.iter().zip(&x_ref) {
                assert!((u - v).abs() < 1e-9, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn exact_residual() {
        let a = chain_matrix(&[50], 1);
        let f = PathFactor::build(&a).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = f.solve(&b);
        let ax = a.matvec_alloc(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_branching_pattern() {
        // star graph: center couples to three leaves
        let rows = vec![
            vec![(0u32, 4.0), (1, -1.0), (2, -1.0), (3, -1.0)],
            vec![(0u32, -1.0), (1, 4.0)],
            vec![(0u32, -1.0), (2, 4.0)],
            vec![(0u32, -1.0), (3, 4.0)],
        ];
        let a = CsrMatrix::from_rows(4, rows);
        assert!(PathFactor::build(&a).is_none());
    }

    #[test]
    fn rejects_cycle() {
        let n = 6;
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                let prev = ((i + n - 1) % n) as u32;
                let next = ((i + 1) % n) as u32;
                let mut r = vec![(i as u32, 4.0), (prev, -1.0), (next, -1.0)];
                r.sort_unstable_by_key(|e| e.0);
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(n, rows);
        assert!(PathFactor::build(&a).is_none());
    }

    #[test]
    fn face_mass_matrix_is_path_structured() {
        use crate::assembly::assemble_system;
        use crate::hexmesh::{CompartmentTable, HexMesh};
        let table = CompartmentTable::new(vec![(1, "unit".into(), 1.0)]).unwrap();
        let mesh =
            HexMesh::from_labels([4, 3, 2], 1.0, [0.0; 3], vec![1; 24]).unwrap();
        let sys = assemble_system(&mesh, &table).unwrap();
        let f = PathFactor::build(&sys.a).expect("RT0 mass matrix is a union of chains");
        let b: Vec<f64> = (0..sys.a.nrows()).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = f.solve(&b);
        let ax = sys.a.matvec_alloc(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}

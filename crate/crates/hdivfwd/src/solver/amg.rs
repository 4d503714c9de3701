//! Smoothed-aggregation multigrid for the Schur preconditioner input
//! `P = B D^-1 B^T`. One V-cycle is used as a fixed, symmetric linear map.

use crate::sparse::CsrMatrix;

const COARSEST_SIZE: usize = 128;
/// Largest coarse grid still factored densely; beyond this the coarsest
/// level is only smoothed.
const COARSEST_LU: usize = 1500;
const STRENGTH_THETA: f64 = 0.25;

struct Level {
    a: CsrMatrix,
    prolong: CsrMatrix,
    restrict: CsrMatrix,
}

/// Coarsest-level solve: dense LU when small enough, otherwise a fixed
/// number of symmetric Gauss-Seidel sweeps (keeps the cycle symmetric).
enum CoarseSolver {
    Lu(DenseLu),
    Sgs(CsrMatrix),
}

impl CoarseSolver {
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        match self {
            CoarseSolver::Lu(lu) => lu.solve(r),
            CoarseSolver::Sgs(a) => {
                let mut z = vec![0.0; r.len()];
                for _ in 0..8 {
                    a.sgs_sweep(r, &mut z);
                }
                z
            }
        }
    }
}

pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse: CoarseSolver,
    coarse_n: usize,
}

impl AmgHierarchy {
    pub fn build(a: &CsrMatrix) -> AmgHierarchy {
        let mut levels = Vec::new();
        let mut current = a.clone();
        while current.nrows() > COARSEST_SIZE {
            let agg = aggregate(&current);
            let n_agg = agg.iter().copied().max().map_or(0, |m| m as usize + 1);
            // stop if coarsening stalls
            if n_agg == 0 || n_agg * 4 > current.nrows() * 3 {
                break;
            }
            let tentative = tentative_prolongator(&agg, n_agg);
            let prolong = smooth_prolongator(&current, &tentative);
            let restrict = prolong.transpose();
            let coarse = restrict.multiply(&current).multiply(&prolong);
            if std::env::var("HDIVFWD_AMG_DEBUG").is_ok() {
                eprintln!("amg level: {} -> {} rows, {} nnz", current.nrows(), coarse.nrows(), coarse.nnz());
            }
            levels.push(Level { a: current, prolong, restrict });
            current = coarse;
        }
        let coarse_n = current.nrows();
        let coarse = if coarse_n <= COARSEST_LU {
            CoarseSolver::Lu(DenseLu::factor(&current))
        } else {
            CoarseSolver::Sgs(current)
        };
        AmgHierarchy { levels, coarse, coarse_n }
    }

    /// Apply one V-cycle to `r`, returning an approximate solution of
    /// `P z = r`. Forward GS pre-smoothing and backward GS post-smoothing
    /// keep the cycle symmetric.
    pub fn v_cycle(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(0, r)
    }

    fn cycle(&self, level: usize, r: &[f64]) -> Vec<f64> {
        if level == self.levels.len() {
            debug_assert_eq!(r.len(), self.coarse_n);
            return self.coarse.solve(r);
        }
        let lv = &self.levels[level];
        let mut z = vec![0.0; r.len()];
        lv.a.gs_forward_sweep(r, &mut z);
        let az = lv.a.matvec_alloc(&z);
        let resid: Vec<f64> = r.iter().zip(&az).map(|(a, b)| a - b).collect();
        let rc = lv.restrict.matvec_alloc(&resid);
        let zc = self.cycle(level + 1, &rc);
        let corr = lv.prolong.matvec_alloc(&zc);
        for (zi, ci) in z.iter_mut().zip(&corr) {
            *zi += ci;
        }
        lv.a.gs_backward_sweep(r, &mut z);
        z
    }
}

/// Greedy aggregation on the strength-of-connection graph. Strength is
/// judged per row against the largest off-diagonal magnitude, which stays
/// meaningful on coarse levels where scales vary between rows.
fn aggregate(a: &CsrMatrix) -> Vec<u32> {
    let n = a.nrows();
    let row_max: Vec<f64> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .filter(|&(&c, _)| c as usize != i)
                .map(|(_, &v)| v.abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let strong = |i: usize, j: u32, v: f64| -> bool {
        let jj = j as usize;
        i != jj && v.abs() >= STRENGTH_THETA * row_max[i]
    };
    const UNASSIGNED: u32 = u32::MAX;
    let mut agg = vec![UNASSIGNED; n];
    let mut next = 0u32;
    // pass 1: seed aggregates from nodes whose strong neighborhood is free
    for i in 0..n {
        if agg[i] != UNASSIGNED {
            continue;
        }
        let (cols, vals) = a.row(i);
        let nbrs: Vec<usize> = cols
            .iter()
            .zip(vals)
            .filter(|&(&c, &v)| strong(i, c, v))
            .map(|(&c, _)| c as usize)
            .collect();
        if nbrs.iter().all(|&j| agg[j] == UNASSIGNED) {
            agg[i] = next;
            for &j in &nbrs {
                agg[j] = next;
            }
            next += 1;
        }
    }
    // pass 2: attach leftovers to the most strongly connected aggregate
    for i in 0..n {
        if agg[i] != UNASSIGNED {
            continue;
        }
        let (cols, vals) = a.row(i);
        let mut best: Option<(u32, f64)> = None;
        for (&c, &v) in cols.iter().zip(vals) {
            if strong(i, c, v) && agg[c as usize] != UNASSIGNED {
                let w = v.abs();
                if best.map_or(true, |(_, bw)| w > bw) {
                    best = Some((agg[c as usize], w));
                }
            }
        }
        match best {
            Some((g, _)) => agg[i] = g,
            None => {
                agg[i] = next;
                next += 1;
            }
        }
    }
    agg
}

/// Piecewise-constant tentative prolongator (preserves the constant vector).
fn tentative_prolongator(agg: &[u32], n_agg: usize) -> CsrMatrix {
    let rows: Vec<Vec<(u32, f64)>> = agg.iter().map(|&g| vec![(g, 1.0)]).collect();
    CsrMatrix::from_rows(n_agg, rows)
}

/// One damped-Jacobi smoothing step applied to the tentative prolongator:
/// P = (I - omega D^-1 A) P0.
fn smooth_prolongator(a: &CsrMatrix, tentative: &CsrMatrix) -> CsrMatrix {
    let diag = a.diag();
    let omega = 4.0 / 3.0 / estimate_jacobi_radius(a, &diag);
    let ap0 = a.multiply(tentative);
    let n = a.nrows();
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|i| {
            let d = if diag[i] != 0.0 { diag[i] } else { 1.0 };
            let mut acc: Vec<(u32, f64)> = Vec::new();
            let (c0, v0) = tentative.row(i);
            for (&c, &v) in c0.iter().zip(v0) {
                acc.push((c, v));
            }
            let (c1, v1) = ap0.row(i);
            for (&c, &v) in c1.iter().zip(v1) {
                acc.push((c, -omega / d * v));
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
    CsrMatrix::from_rows(tentative.ncols(), rows)
}

fn estimate_jacobi_radius(a: &CsrMatrix, diag: &[f64]) -> f64 {
    let n = a.nrows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut radius = 1.0;
    for _ in 0..10 {
        let mut av = a.matvec_alloc(&v);
        for i in 0..n {
            av[i] /= if diag[i] != 0.0 { diag[i] } else { 1.0 };
        }
        let norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        radius = norm;
        for i in 0..n {
            v[i] = av[i] / norm;
        }
    }
    radius.max(1e-12)
}

/// Dense LU with partial pivoting for the coarsest level. A small diagonal
/// shift absorbs the constant nullspace of the Schur preconditioner input.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &CsrMatrix) -> DenseLu {
        let n = a.nrows();
        let mut m = vec![0.0f64; n * n];
        let mut max_diag = 0.0f64;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[i * n + c as usize] = v;
            }
            max_diag = max_diag.max(a.get(i, i).abs());
        }
        let shift = 1e-10 * max_diag.max(1.0);
        for i in 0..n {
            m[i * n + i] += shift;
        }
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = m[k * n + k].abs();
            for r in k + 1..n {
                if m[r * n + k].abs() > best {
                    best = m[r * n + k].abs();
                    p = r;
                }
            }
            if p != k {
                for c in 0..n {
                    m.swap(k * n + c, p * n + c);
                }
                piv.swap(k, p);
            }
            let pivot = m[k * n + k];
            if pivot == 0.0 {
                continue;
            }
            for r in k + 1..n {
                let factor = m[r * n + k] / pivot;
                m[r * n + k] = factor;
                for c in k + 1..n {
                    m[r * n + c] -= factor * m[k * n + c];
                }
            }
        }
        DenseLu { n, lu: m, piv }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for k in 0..n {
            for r in k + 1..n {
                x[r] -= self.lu[r * n + k] * x[k];
            }
        }
        for k in (0..n).rev() {
            for c in k + 1..n {
                x[k] -= self.lu[k * n + c] * x[c];
            }
            let d = self.lu[k * n + k];
            if d != 0.0 {
                x[k] /= d;
            }
        }
        x
    }
}

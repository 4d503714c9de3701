//! Schur-complement solver for the saddle-point system.
//!
//! The outer iteration is preconditioned conjugate gradients on the implicit
//! operator `S = B A^-1 B^T`, with `A^-1` realized by an inner CG solve per
//! application (fixed iteration count or tolerance). The constant nullspace
//! of `S` is handled by deflation: the right-hand side and all iterates are
//! kept mean-zero.
//!
//! The preconditioner approximates `P = B D^-1 B^T` for a diagonal `D`
//! approximating `A` (per-row l2 norm by default), applied either through
//! symmetric Gauss-Seidel sweeps or one smoothed-aggregation multigrid
//! V-cycle.

pub mod amg;
pub mod tridiag;

use std::time::Instant;

use crate::assembly::SaddleSystem;
use crate::error::{Error, Result};
use crate::sources::{RhsKind, RhsSpec};
use crate::sparse::CsrMatrix;
use crate::vecops;

use amg::AmgHierarchy;

/// Diagonal approximation of `A` used to build the preconditioner input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagApprox {
    /// `D_ii = l2(A_i,:)`, the per-row Euclidean norm.
    #[default]
    L2Row,
    /// `D_ii = A_ii`
    Diag,
    /// `D_ii = sum_j A_ij`
    RowSum,
    /// `D_ii = l1(A_i,:)`
    L1Row,
}

impl DiagApprox {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(DiagApprox::L2Row),
            "diag" => Ok(DiagApprox::Diag),
            "rowsum" => Ok(DiagApprox::RowSum),
            "l1" => Ok(DiagApprox::L1Row),
            other => Err(Error::Validation(format!("unknown diagonal approximation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrecondKind {
    None,
    /// Symmetric Gauss-Seidel sweeps on `P`.
    #[default]
    Ssor,
    /// One smoothed-aggregation V-cycle on `P`.
    Amg,
}

impl PrecondKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PrecondKind::None),
            "ssor" => Ok(PrecondKind::Ssor),
            "amg" => Ok(PrecondKind::Amg),
            other => Err(Error::Validation(format!("unknown preconditioner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative residual target of the outer iteration.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Fixed inner CG iteration count; when `None`, `inner_tol` governs.
    pub inner_iters: Option<usize>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub precond: PrecondKind,
    pub ssor_sweeps: usize,
    pub diag_approx: DiagApprox,
    pub deflate_constants: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_tol: 1e-8,
            outer_max_iter: 10_000,
            inner_iters: Some(1),
            inner_tol: 1e-10,
            inner_max_iter: 1000,
            precond: PrecondKind::Ssor,
            ssor_sweeps: 1,
            diag_approx: DiagApprox::L2Row,
            deflate_constants: true,
        }
    }
}

impl SolverConfig {
    /// Variant with converged inner solves, used wherever the exact Schur
    /// operator matters (current recovery, accuracy studies).
    pub fn converged_inner(mut self) -> Self {
        self.inner_iters = None;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outer_tol) || self.outer_tol == 0.0 {
            return Err(Error::Validation("outer_tol must be in (0,1)".into()));
        }
        if !(0.0..1.0).contains(&self.inner_tol) || self.inner_tol == 0.0 {
            return Err(Error::Validation("inner_tol must be in (0,1)".into()));
        }
        if self.inner_iters == Some(0) {
            return Err(Error::Validation("inner_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a Schur solve: element potential (mean-zero), recovered face
/// current over interior-face columns, and convergence metadata.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub j: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub wall_seconds: f64,
    /// (iteration, relative residual) per outer iteration.
    pub history: Vec<(usize, f64)>,
}

/// x ~= A^-1 y. In converged mode (`inner_iters == None`) the union-of-paths
/// structure of the mass matrix admits an exact linear-time direct solve;
/// with a fixed iteration budget, Jacobi-preconditioned CG from a zero start
/// is used (and also serves as a fallback for non-path sparsity).
pub fn apply_a_inverse(system: &SaddleSystem, y: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    let a = &system.a;
    let n = a.nrows();
    assert_eq!(y.len(), n);
    let norm_y = vecops::norm2(y);
    let mut x = vec![0.0; n];
    if norm_y == 0.0 {
        return Ok(x);
    }
    if config.inner_iters.is_none() {
        if let Some(factor) = system.a_direct() {
            return Ok(factor.solve(y));
        }
    }
    let diag = a.diag();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Numerical("A has a nonpositive diagonal entry".into()));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = y.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = vecops::dot(&r, &z);
    let max_iter = config.inner_iters.unwrap_or(config.inner_max_iter);
    let tol = if config.inner_iters.is_some() { 0.0 } else { config.inner_tol };
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = vecops::dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Numerical("inner CG: A lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        vecops::axpy(alpha, &p, &mut x);
        vecops::axpy(-alpha, &ap, &mut r);
        if vecops::norm2(&r) <= tol * norm_y {
            break;
        }
        z.iter_mut().zip(&r).zip(&inv_diag).for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = vecops::dot(&r, &z);
        if rz_new == 0.0 {
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        vecops::scale_add(beta, &mut p, &z);
    }
    Ok(x)
}

/// Converged solve of `A x = y` to the given relative tolerance.
pub fn solve_a_converged(system: &SaddleSystem, y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let cfg = SolverConfig {
        inner_iters: None,
        inner_tol: tol,
        inner_max_iter: 10_000,
        ..SolverConfig::default()
    };
    apply_a_inverse(system, y, &cfg)
}

/// Apply the implicit Schur complement: `B A^-1 B^T v`.
pub fn schur_apply(system: &SaddleSystem, v: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
    let w = system.bt.matvec_alloc(v);
    let x = apply_a_inverse(system, &w, config)?;
    Ok(system.b.matvec_alloc(&x))
}

/// Approximate inverse of `P = B D^-1 B^T`.
pub struct SchurPrecond {
    kind: PrecondKind,
    p: Option<CsrMatrix>,
    sweeps: usize,
    amg: Option<AmgHierarchy>,
}

impl SchurPrecond {
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self.kind {
            PrecondKind::None => r.to_vec(),
            PrecondKind::Ssor => {
                let p = self.p.as_ref().unwrap();
                let mut z = vec![0.0; r.len()];
                for _ in 0..self.sweeps {
                    p.sgs_sweep(r, &mut z);
                }
                z
            }
            PrecondKind::Amg => self.amg.as_ref().unwrap().v_cycle(r),
        }
    }
}

/// Assemble `P = B D^-1 B^T` and wrap it in the requested apply scheme.
pub fn build_preconditioner(
    system: &SaddleSystem,
    kind: PrecondKind,
    diag_approx: DiagApprox,
    ssor_sweeps: usize,
) -> Result<SchurPrecond> {
    if kind == PrecondKind::None {
        return Ok(SchurPrecond { kind, p: None, sweeps: 0, amg: None });
    }
    let d = match diag_approx {
        DiagApprox::L2Row => system.a.row_l2_norms(),
        DiagApprox::Diag => system.a.diag(),
        DiagApprox::RowSum => system.a.row_sums(),
        DiagApprox::L1Row => system.a.row_l1_norms(),
    };
    if d.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical(
            "preconditioner construction: zero or nonpositive row in A".into(),
        ));
    }
    let ne = system.b.nrows();
    let rows: Vec<Vec<(u32, f64)>> = (0..ne)
        .map(|e| {
            let mut acc: Vec<(u32, f64)> = Vec::with_capacity(7);
            let (cols, vals) = system.b.row(e);
            for (&f, &v) in cols.iter().zip(vals) {
                let (ecols, evals) = system.bt.row(f as usize);
                for (&e2, &v2) in ecols.iter().zip(evals) {
                    acc.push((e2, v * v2 / d[f as usize]));
                }
            }
            acc.sort_unstable_by_key(|en| en.0);
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
    let p = CsrMatrix::from_rows(ne, rows);
    let amg = (kind == PrecondKind::Amg).then(|| AmgHierarchy::build(&p));
    Ok(SchurPrecond { kind, p: Some(p), sweeps: ssor_sweeps.max(1), amg })
}

fn deflate(config: &SolverConfig, v: &mut [f64]) {
    if config.deflate_constants {
        vecops::project_mean_zero(v);
    }
}

/// Outer PCG on `S u = h`. Returns the solution together with iteration
/// count, final relative residual, and the per-iteration residual history.
fn solve_schur(
    system: &SaddleSystem,
    h: &[f64],
    config: &SolverConfig,
    precond: &SchurPrecond,
) -> Result<(Vec<f64>, usize, f64, Vec<(usize, f64)>)> {
    let n = h.len();
    let mut rhs = h.to_vec();
    deflate(config, &mut rhs);
    let norm_h = vecops::norm2(&rhs);
    let mut history = Vec::new();
    if norm_h == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0, history));
    }
    let mut u = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = precond.apply(&r);
    deflate(config, &mut z);
    let mut p = z.clone();
    let mut rz = vecops::dot(&r, &z);
    let mut rel = vecops::norm2(&r) / norm_h;
    history.push((0, rel));
    let mut iterations = 0;
    for it in 1..=config.outer_max_iter {
        let mut sp = schur_apply(system, &p, config)?;
        deflate(config, &mut sp);
        let psp = vecops::dot(&p, &sp);
        if psp <= 0.0 {
            return Err(Error::Numerical(format!(
                "outer CG breakdown at iteration {it}: <p,Sp> = {psp}"
            )));
        }
        let alpha = rz / psp;
        vecops::axpy(alpha, &p, &mut u);
        vecops::axpy(-alpha, &sp, &mut r);
        // recompute the residual periodically to bound recurrence drift
        if it % 50 == 0 {
            let su = schur_apply(system, &u, config)?;
            r = vecops::sub(&rhs, &su);
            deflate(config, &mut r);
        }
        rel = vecops::norm2(&r) / norm_h;
        history.push((it, rel));
        iterations = it;
        if rel <= config.outer_tol {
            break;
        }
        z = precond.apply(&r);
        deflate(config, &mut z);
        let rz_new = vecops::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        vecops::scale_add(beta, &mut p, &z);
    }
    if rel > config.outer_tol {
        return Err(Error::Numerical(format!(
            "outer CG did not converge in {} iterations (relative residual {rel:.3e}); \
             history of last iterations: {:?}",
            config.outer_max_iter,
            &history[history.len().saturating_sub(5)..]
        )));
    }
    Ok((u, iterations, rel, history))
}

/// Build the element-space right-hand side `h` for an assembled rhs.
/// Direct: `h = B A^-1 b^cur` (converged inner solve). Projected:
/// `h = B b^pot`, available in closed form as the payload.
pub fn build_h(system: &SaddleSystem, rhs: &RhsSpec, config: &SolverConfig) -> Result<Vec<f64>> {
    let ne = system.b.nrows();
    match rhs.kind {
        RhsKind::Direct => {
            let mut b = vec![0.0; system.a.nrows()];
            for &(c, v) in &rhs.face_vector {
                b[c as usize] = v;
            }
            let x = solve_a_converged(system, &b, config.inner_tol.min(1e-10))?;
            Ok(system.b.matvec_alloc(&x))
        }
        RhsKind::Projected => {
            let mut h = vec![0.0; ne];
            for &(e, v) in &rhs.payload {
                h[e as usize] = v;
            }
            Ok(h)
        }
    }
}

/// Solve the forward problem for one right-hand side. The returned potential
/// is the physical, mean-zero element potential; the current is recovered
/// with a converged inner solve and is discretely divergence-free at
/// convergence.
pub fn solve_potential(
    system: &SaddleSystem,
    rhs: &RhsSpec,
    config: &SolverConfig,
) -> Result<Solution> {
    let precond =
        build_preconditioner(system, config.precond, config.diag_approx, config.ssor_sweeps)?;
    solve_potential_with(system, rhs, config, &precond)
}

/// Like [`solve_potential`], but reusing a prebuilt preconditioner — useful
/// when many right-hand sides are solved on the same system.
pub fn solve_potential_with(
    system: &SaddleSystem,
    rhs: &RhsSpec,
    config: &SolverConfig,
    precond: &SchurPrecond,
) -> Result<Solution> {
    config.validate()?;
    if system.degenerate {
        return Err(Error::Validation("system has no interior faces (degenerate)".into()));
    }
    let start = Instant::now();
    let h = build_h(system, rhs, config)?;
    let norm_h = vecops::norm2(&h);
    if norm_h > 0.0 && vecops::mean(&h).abs() * (h.len() as f64).sqrt() > 1e-12 * norm_h {
        return Err(Error::Validation("incompatible right-hand side: nonzero mean".into()));
    }
    let (u_tilde, iterations, final_residual, history) =
        solve_schur(system, &h, config, precond)?;
    // the Schur unknown is the negated physical potential (the weak form
    // carries -B^T u); flip and fix the mean-zero gauge
    let mut u: Vec<f64> = u_tilde.iter().map(|v| -v).collect();
    vecops::project_mean_zero(&mut u);

    // recover j = A^-1 (rhs_face + B^T u) with a converged inner solve
    let nf = system.a.nrows();
    let mut rhs_face = vec![0.0; nf];
    match rhs.kind {
        RhsKind::Direct => {
            for &(c, v) in &rhs.face_vector {
                rhs_face[c as usize] = v;
            }
        }
        RhsKind::Projected => {
            let mut b_pot = vec![0.0; nf];
            for &(c, v) in &rhs.face_vector {
                b_pot[c as usize] = v;
            }
            system.a.matvec(&b_pot, &mut rhs_face);
        }
    }
    let btu = system.bt.matvec_alloc(&u);
    vecops::axpy(1.0, &btu, &mut rhs_face);
    let j = solve_a_converged(system, &rhs_face, 1e-10)?;

    Ok(Solution {
        u,
        j,
        iterations,
        final_residual,
        wall_seconds: start.elapsed().as_secs_f64(),
        history,
    })
}

/// Per-sensor transfer solves: `t_k` such that the leadfield entry for any
/// element-space rhs `h` is `<t_k, h>`. Restriction vectors must be
/// mean-zero (sensor minus reference).
pub fn transfer_solve(
    system: &SaddleSystem,
    restrictions: &[Vec<f64>],
    config: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let ne = system.b.nrows();
    let precond =
        build_preconditioner(system, config.precond, config.diag_approx, config.ssor_sweeps)?;
    restrictions
        .iter()
        .map(|r_k| {
            if r_k.len() != ne {
                return Err(Error::Validation("restriction vector length mismatch".into()));
            }
            let norm = vecops::norm2(r_k);
            if norm > 0.0 && vecops::mean(r_k).abs() * (ne as f64).sqrt() > 1e-10 * norm {
                return Err(Error::Validation("restriction vector must be mean-zero".into()));
            }
            // S t = -R folds the potential sign flip into t, so that
            // <t, h> directly equals the sensor reading
            let neg: Vec<f64> = r_k.iter().map(|v| -v).collect();
            let (t, _, _, _) = solve_schur(system, &neg, config, &precond)?;
            Ok(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::hexmesh::{CompartmentTable, HexMesh};
    use crate::sources::{rhs_projected, Dipole};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_table() -> CompartmentTable {
        CompartmentTable::new(vec![(1, "unit".into(), 1.0)]).unwrap()
    }

    fn cube(n: usize) -> (HexMesh, SaddleSystem) {
        let mesh =
            HexMesh::from_labels([n, n, n], 1.0, [0.0; 3], vec![1; n * n * n]).unwrap();
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        (mesh, sys)
    }

    fn random_mean_zero(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        vecops::project_mean_zero(&mut v);
        v
    }

    #[test]
    fn a_inverse_zero_rhs() {
        let (_, sys) = cube(2);
        let cfg = SolverConfig::default();
        let x = apply_a_inverse(&sys, &vec![0.0; sys.a.nrows()], &cfg).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn a_inverse_scalar_system() {
        // 2x1x1 bar: A is 1x1 with value 2/3, so A^-1 * 1 = 3/2
        let mesh = HexMesh::from_labels([2, 1, 1], 1.0, [0.0; 3], vec![1, 1]).unwrap();
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        let x = solve_a_converged(&sys, &[1.0], 1e-12).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn a_inverse_converges() {
        let (_, sys) = cube(4);
        let n = sys.a.nrows();
        let y = random_mean_zero(n, 3);
        let x = solve_a_converged(&sys, &y, 1e-12).unwrap();
        let ax = sys.a.matvec_alloc(&x);
        let resid: f64 = vecops::norm2(&vecops::sub(&ax, &y)) / vecops::norm2(&y);
        assert!(resid < 1e-10);
    }

    #[test]
    fn schur_kills_constants() {
        let (_, sys) = cube(3);
        let cfg = SolverConfig::default().converged_inner();
        let ones = vec![1.0; sys.b.nrows()];
        let s1 = schur_apply(&sys, &ones, &cfg).unwrap();
        assert!(vecops::norm2(&s1) < 1e-12);
    }

    #[test]
    fn schur_symmetric_positive() {
        let (_, sys) = cube(4);
        let cfg = SolverConfig {
            inner_iters: None,
            inner_tol: 1e-14,
            inner_max_iter: 10_000,
            ..SolverConfig::default()
        };
        let n = sys.b.nrows();
        let a = random_mean_zero(n, 1);
        let b = random_mean_zero(n, 2);
        let sa = schur_apply(&sys, &a, &cfg).unwrap();
        let sb = schur_apply(&sys, &b, &cfg).unwrap();
        let lhs = vecops::dot(&sa, &b);
        let rhs = vecops::dot(&sb, &a);
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        assert!(vecops::dot(&sa, &a) >= 0.0);
    }

    #[test]
    fn preconditioner_d_variants() {
        // 2x1x1 bar: single row of A is (2/3); l2 norm = 2/3
        let mesh = HexMesh::from_labels([2, 1, 1], 1.0, [0.0; 3], vec![1, 1]).unwrap();
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        let d_l2 = sys.a.row_l2_norms();
        assert!((d_l2[0] - 2.0 / 3.0).abs() < 1e-15);
        for kind in ["l2", "diag", "rowsum", "l1"] {
            let approx = DiagApprox::parse(kind).unwrap();
            build_preconditioner(&sys, PrecondKind::Ssor, approx, 1).unwrap();
        }
    }

    #[test]
    fn solve_zero_rhs_gives_zero() {
        let (mesh, sys) = cube(3);
        // projected rhs with an explicitly zeroed payload
        let d = Dipole { position: [1.5, 1.5, 1.5], moment: [1.0, 0.0, 0.0] };
        let mut rhs = rhs_projected(&d, &sys, &mesh).unwrap();
        rhs.face_vector.clear();
        rhs.payload.clear();
        let sol = solve_potential(&sys, &rhs, &SolverConfig::default()).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
        assert!(sol.j.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_system_rejected() {
        let mesh = HexMesh::from_labels([1, 1, 1], 1.0, [0.0; 3], vec![1]).unwrap();
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        let rhs = RhsSpec {
            kind: RhsKind::Projected,
            face_vector: vec![],
            payload: vec![],
            dropped_boundary: false,
        };
        assert!(solve_potential(&sys, &rhs, &SolverConfig::default()).is_err());
    }

    #[test]
    fn solution_mean_zero_and_linearity() {
        let (mesh, sys) = cube(4);
        let cfg = SolverConfig::default().converged_inner();
        let d1 = Dipole { position: [2.0, 2.0, 2.0], moment: [1.0, 0.0, 0.0] };
        let d2 = Dipole { position: [2.0, 2.0, 2.0], moment: [0.0, 1.0, 0.0] };
        let r1 = rhs_projected(&d1, &sys, &mesh).unwrap();
        let r2 = rhs_projected(&d2, &sys, &mesh).unwrap();
        let s1 = solve_potential(&sys, &r1, &cfg).unwrap();
        let s2 = solve_potential(&sys, &r2, &cfg).unwrap();
        assert!(vecops::mean(&s1.u).abs() < 1e-12);
        // combined moment
        let d3 = Dipole { position: [2.0, 2.0, 2.0], moment: [2.0, -1.0, 0.0] };
        let r3 = rhs_projected(&d3, &sys, &mesh).unwrap();
        let s3 = solve_potential(&sys, &r3, &cfg).unwrap();
        for i in 0..s3.u.len() {
            let expect = 2.0 * s1.u[i] - s2.u[i];
            assert!(
                (s3.u[i] - expect).abs() < 1e-6 * vecops::norm2(&s3.u),
                "linearity violated at {i}"
            );
        }
    }

    #[test]
    fn recovered_current_is_divergence_free() {
        let (mesh, sys) = cube(4);
        let cfg = SolverConfig::default().converged_inner();
        let d = Dipole { position: [2.0, 2.0, 2.0], moment: [0.3, -0.7, 0.2] };
        let rhs =
            crate::sources::rhs_direct(&d, &sys, &mesh, &unit_table()).unwrap();
        let sol = solve_potential(&sys, &rhs, &cfg).unwrap();
        let div = sys.b.matvec_alloc(&sol.j);
        let b_norm: f64 = rhs.face_vector.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        assert!(vecops::norm2(&div) <= 1e-7 * b_norm);
    }

    #[test]
    fn transfer_matches_forward_solve() {
        let (mesh, sys) = cube(4);
        let cfg = SolverConfig::default().converged_inner();
        let ne = sys.b.nrows();
        // sensor = element 0 minus element ne-1
        let mut r = vec![0.0; ne];
        r[0] = 1.0;
        r[ne - 1] = -1.0;
        let t = transfer_solve(&sys, &[r.clone()], &cfg).unwrap();
        let d = Dipole { position: [2.0, 2.0, 2.0], moment: [1.0, 1.0, 0.0] };
        let rhs = rhs_projected(&d, &sys, &mesh).unwrap();
        let sol = solve_potential(&sys, &rhs, &cfg).unwrap();
        let direct = sol.u[0] - sol.u[ne - 1];
        let h = build_h(&sys, &rhs, &cfg).unwrap();
        let via_transfer = vecops::dot(&t[0], &h);
        assert!(
            (direct - via_transfer).abs() < 1e-7 * direct.abs().max(1e-12),
            "{direct} vs {via_transfer}"
        );
    }

    #[test]
    fn transfer_zero_restriction() {
        let (_, sys) = cube(3);
        let cfg = SolverConfig::default();
        let t = transfer_solve(&sys, &[vec![0.0; sys.b.nrows()]], &cfg).unwrap();
        assert!(t[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gauge_invariance_of_current() {
        // adding a constant to u does not change B^T u
        let (_, sys) = cube(3);
        let ne = sys.b.nrows();
        let u = random_mean_zero(ne, 11);
        let shifted: Vec<f64> = u.iter().map(|v| v + 3.7).collect();
        let a = sys.bt.matvec_alloc(&u);
        let b = sys.bt.matvec_alloc(&shifted);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

//! Conforming trilinear hexahedral FEM baseline with a partial-integration
//! dipole load. Serves as the comparison method for the mixed solver,
//! in particular for the skull-leakage studies.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hexmesh::{CompartmentTable, HexMesh, NO_ELEMENT};
use crate::sparse::CsrMatrix;
use crate::vecops;

/// Nodal stiffness system over the vertices of labeled elements.
#[derive(Debug)]
pub struct NodalSystem {
    /// Stiffness matrix over active vertex DOFs (S*mm), `K 1 = 0`.
    pub k: CsrMatrix,
    /// DOF -> grid vertex index.
    pub dof_vertices: Vec<u32>,
    /// Grid vertex index -> DOF, or `NO_ELEMENT` for inactive vertices.
    pub vertex_dofs: Vec<u32>,
}

fn vertex_dims(mesh: &HexMesh) -> [usize; 3] {
    let d = mesh.dims();
    [d[0] + 1, d[1] + 1, d[2] + 1]
}

fn vertex_index(vd: [usize; 3], ijk: [usize; 3]) -> usize {
    ijk[0] + vd[0] * (ijk[1] + vd[1] * ijk[2])
}

/// Local vertex order: bit 0 -> +x offset, bit 1 -> +y, bit 2 -> +z.
fn element_vertices(mesh: &HexMesh, e: u32) -> [usize; 8] {
    let vd = vertex_dims(mesh);
    let ijk = mesh.cell_ijk(mesh.element_cell(e));
    let mut out = [0usize; 8];
    for (local, slot) in out.iter_mut().enumerate() {
        *slot = vertex_index(
            vd,
            [ijk[0] + (local & 1), ijk[1] + ((local >> 1) & 1), ijk[2] + ((local >> 2) & 1)],
        );
    }
    out
}

/// Gradient of the 8 trilinear shape functions on the unit cube at `p`.
fn shape_gradients(p: [f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (local, grad) in g.iter_mut().enumerate() {
        let off = [local & 1, (local >> 1) & 1, (local >> 2) & 1];
        for a in 0..3 {
            let mut v = if off[a] == 1 { 1.0 } else { -1.0 };
            for b in 0..3 {
                if b != a {
                    v *= if off[b] == 1 { p[b] } else { 1.0 - p[b] };
                }
            }
            grad[a] = v;
        }
    }
    g
}

fn shape_values(p: [f64; 3]) -> [f64; 8] {
    let mut vals = [0.0; 8];
    for (local, v) in vals.iter_mut().enumerate() {
        let off = [local & 1, (local >> 1) & 1, (local >> 2) & 1];
        *v = (0..3)
            .map(|a| if off[a] == 1 { p[a] } else { 1.0 - p[a] })
            .product();
    }
    vals
}

/// Reference 8x8 stiffness for sigma = 1, h = 1, by 2^3 Gauss quadrature
/// (exact for the integrand's polynomial degree).
fn reference_stiffness() -> [[f64; 8]; 8] {
    let gp = [0.5 - 0.5 / 3.0_f64.sqrt(), 0.5 + 0.5 / 3.0_f64.sqrt()];
    let mut k = [[0.0; 8]; 8];
    for &gz in &gp {
        for &gy in &gp {
            for &gx in &gp {
                let g = shape_gradients([gx, gy, gz]);
                for i in 0..8 {
                    for j in 0..8 {
                        // weight 1/8 per point on the unit cube
                        k[i][j] += 0.125
                            * (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]);
                    }
                }
            }
        }
    }
    k
}

/// Assemble the trilinear stiffness matrix. Only vertices touching labeled
/// elements carry DOFs, so the baseline solves the same domain as the mixed
/// method. The per-element block scales as sigma * h.
pub fn assemble_stiffness(mesh: &HexMesh, table: &CompartmentTable) -> Result<NodalSystem> {
    let vd = vertex_dims(mesh);
    let n_vertices = vd[0] * vd[1] * vd[2];
    let mut vertex_dofs = vec![NO_ELEMENT; n_vertices];
    let mut dof_vertices = Vec::new();
    for e in 0..mesh.n_elements() as u32 {
        for v in element_vertices(mesh, e) {
            if vertex_dofs[v] == NO_ELEMENT {
                vertex_dofs[v] = u32::MAX - 1; // mark active, numbered below
            }
        }
    }
    // deterministic DOF order: ascending grid vertex index
    for (v, slot) in vertex_dofs.iter_mut().enumerate() {
        if *slot != NO_ELEMENT {
            *slot = dof_vertices.len() as u32;
            dof_vertices.push(v as u32);
        }
    }

    let kref = reference_stiffness();
    let n = dof_vertices.len();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for e in 0..mesh.n_elements() as u32 {
        let sigma = table.sigma(mesh.element_label(e)).ok_or_else(|| {
            Error::Validation(format!("no conductivity for label {}", mesh.element_label(e)))
        })?;
        let scale = sigma * mesh.spacing();
        let verts = element_vertices(mesh, e);
        for i in 0..8 {
            let ri = vertex_dofs[verts[i]] as usize;
            for j in 0..8 {
                rows[ri].push((vertex_dofs[verts[j]], scale * kref[i][j]));
            }
        }
    }
    rows.par_iter_mut().for_each(|row| {
        row.sort_unstable_by_key(|e| e.0);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
    });
    Ok(NodalSystem { k: CsrMatrix::from_rows(n, rows), dof_vertices, vertex_dofs })
}

/// Partial-integration dipole load: `b_i = <m, grad phi_i(x0)>` on the
/// vertices of the containing element. Entries sum to zero because the
/// shape-function gradients do.
pub fn rhs_partial_integration(
    dipole: &crate::sources::Dipole,
    mesh: &HexMesh,
    system: &NodalSystem,
) -> Result<Vec<(u32, f64)>> {
    if dipole.moment_norm() == 0.0 {
        return Err(Error::Validation("dipole moment must be nonzero".into()));
    }
    let elem = mesh.locate(dipole.position).ok_or_else(|| {
        Error::Validation(format!(
            "dipole at ({}, {}, {}) lies outside the labeled domain",
            dipole.position[0], dipole.position[1], dipole.position[2]
        ))
    })?;
    let h = mesh.spacing();
    let lo = mesh.element_min_corner(elem);
    let local = [
        (dipole.position[0] - lo[0]) / h,
        (dipole.position[1] - lo[1]) / h,
        (dipole.position[2] - lo[2]) / h,
    ];
    let grads = shape_gradients(local);
    let verts = element_vertices(mesh, elem);
    let mut entries: Vec<(u32, f64)> = (0..8)
        .map(|i| {
            // physical gradient is the reference gradient over h
            let v = (dipole.moment[0] * grads[i][0]
                + dipole.moment[1] * grads[i][1]
                + dipole.moment[2] * grads[i][2])
                / h;
            (system.vertex_dofs[verts[i]], v)
        })
        .filter(|e| e.1 != 0.0)
        .collect();
    entries.sort_unstable_by_key(|e| e.0);
    Ok(entries)
}

/// Jacobi-preconditioned CG on `K u = b` with constant-vector deflation;
/// returns the mean-zero potential at the vertex DOFs.
pub fn solve_nodal(system: &NodalSystem, load: &[f64], tol: f64) -> Result<Vec<f64>> {
    let k = &system.k;
    let n = k.nrows();
    assert_eq!(load.len(), n);
    let mut b = load.to_vec();
    let norm_b0 = vecops::norm2(&b);
    if norm_b0 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    if vecops::mean(&b).abs() * (n as f64).sqrt() > 1e-10 * norm_b0 {
        return Err(Error::Validation("nodal load is not mean-compatible".into()));
    }
    vecops::project_mean_zero(&mut b);
    let norm_b = vecops::norm2(&b);
    let diag = k.diag();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Numerical("stiffness matrix has a nonpositive diagonal".into()));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut u = vec![0.0; n];
    let mut r = b.clone();
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        vecops::project_mean_zero(&mut z);
        z
    };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = vecops::dot(&r, &z);
    let max_iter = 50 * n + 100;
    let mut converged = false;
    let mut kp = vec![0.0; n];
    for it in 1..=max_iter {
        k.matvec(&p, &mut kp);
        vecops::project_mean_zero(&mut kp);
        let pkp = vecops::dot(&p, &kp);
        if pkp <= 0.0 {
            return Err(Error::Numerical("nodal CG breakdown: <p,Kp> <= 0".into()));
        }
        let alpha = rz / pkp;
        vecops::axpy(alpha, &p, &mut u);
        vecops::axpy(-alpha, &kp, &mut r);
        if it % 50 == 0 {
            let ku = k.matvec_alloc(&u);
            r = vecops::sub(&b, &ku);
            vecops::project_mean_zero(&mut r);
        }
        if vecops::norm2(&r) <= tol * norm_b {
            converged = true;
            break;
        }
        z = precond(&r);
        let rz_new = vecops::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        vecops::scale_add(beta, &mut p, &z);
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "nodal CG did not converge (relative residual {:.3e})",
            vecops::norm2(&r) / norm_b
        )));
    }
    vecops::project_mean_zero(&mut u);
    Ok(u)
}

/// Per-element current density `-sigma grad u` evaluated at element centers
/// from the trilinear interpolant.
pub fn element_current(
    u: &[f64],
    mesh: &HexMesh,
    table: &CompartmentTable,
    system: &NodalSystem,
) -> Result<Vec<[f64; 3]>> {
    let h = mesh.spacing();
    (0..mesh.n_elements() as u32)
        .map(|e| {
            let sigma = table.sigma(mesh.element_label(e)).ok_or_else(|| {
                Error::Validation(format!("no conductivity for label {}", mesh.element_label(e)))
            })?;
            let verts = element_vertices(mesh, e);
            let grads = shape_gradients([0.5, 0.5, 0.5]);
            let mut g = [0.0f64; 3];
            for i in 0..8 {
                let ui = u[system.vertex_dofs[verts[i]] as usize];
                for a in 0..3 {
                    g[a] += ui * grads[i][a] / h;
                }
            }
            Ok([-sigma * g[0], -sigma * g[1], -sigma * g[2]])
        })
        .collect()
}

/// Trilinear interpolation of the nodal solution at a point inside `elem`.
/// Coordinates are clamped to the element box.
pub fn interpolate(
    u: &[f64],
    mesh: &HexMesh,
    system: &NodalSystem,
    elem: u32,
    point: [f64; 3],
) -> f64 {
    let h = mesh.spacing();
    let lo = mesh.element_min_corner(elem);
    let mut local = [0.0; 3];
    for a in 0..3 {
        local[a] = ((point[a] - lo[a]) / h).clamp(0.0, 1.0);
    }
    let vals = shape_values(local);
    let verts = element_vertices(mesh, elem);
    (0..8).map(|i| vals[i] * u[system.vertex_dofs[verts[i]] as usize]).sum()
}

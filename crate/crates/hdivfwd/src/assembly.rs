//! Assembly of the saddle-point blocks on a hexahedral mesh.
//!
//! `A` is the conductivity-weighted RT0 face mass matrix, `B` the P0
//! divergence matrix. On a regular grid the RT0 products integrate exactly:
//! within one element the same-axis tent profiles give h^3/3 on the diagonal
//! and h^3/6 for the opposite-face coupling, and perpendicular axes do not
//! couple. Divergence entries are +-h^2 by the flux theorem.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::hexmesh::{CompartmentTable, HexMesh, NO_ELEMENT};
use crate::solver::tridiag::PathFactor;
use crate::sparse::CsrMatrix;

/// Saddle blocks after boundary-face elimination, plus the index map from
/// global faces to interior-face columns.
pub struct SaddleSystem {
    /// Interior-face RT0 mass matrix, sigma^-1 weighted (mm^3 / (S/m)).
    pub a: CsrMatrix,
    /// Element x interior-face divergence matrix (mm^2).
    pub b: CsrMatrix,
    /// Transpose of `b`, kept explicitly for the Schur product.
    pub bt: CsrMatrix,
    /// Global face id -> interior column, or `NO_ELEMENT` for boundary faces.
    pub face_map: Vec<u32>,
    /// Interior column -> global face id.
    pub interior_faces: Vec<u32>,
    /// Conductivity per element (S/m).
    pub sigma: Vec<f64>,
    /// Mesh edge length (mm).
    pub spacing: f64,
    /// True when the eliminated system has no interior faces.
    pub degenerate: bool,
    /// Lazily built exact factorization of `A` (union-of-paths sparsity).
    a_factor: OnceLock<Option<PathFactor>>,
}

impl SaddleSystem {
    /// Exact direct solver for `A`, built on first use. `None` when the
    /// sparsity pattern is not a union of paths (never the case for the
    /// grid-assembled mass matrix, but external matrices may differ).
    pub fn a_direct(&self) -> Option<&PathFactor> {
        self.a_factor.get_or_init(|| PathFactor::build(&self.a)).as_ref()
    }
}

fn element_sigmas(mesh: &HexMesh, table: &CompartmentTable) -> Result<Vec<f64>> {
    (0..mesh.n_elements() as u32)
        .map(|e| {
            let label = mesh.element_label(e);
            table.sigma(label).ok_or_else(|| {
                Error::Validation(format!("no conductivity for label {label}"))
            })
        })
        .collect()
}

/// Assemble the RT0 mass matrix over all faces (boundary included).
pub fn assemble_a(mesh: &HexMesh, table: &CompartmentTable) -> Result<CsrMatrix> {
    let sigma = element_sigmas(mesh, table)?;
    Ok(assemble_a_with_sigma(mesh, &sigma))
}

pub(crate) fn assemble_a_with_sigma(mesh: &HexMesh, sigma: &[f64]) -> CsrMatrix {
    let h = mesh.spacing();
    let vol_diag = h * h * h / 3.0;
    let vol_off = h * h * h / 6.0;
    let nf = mesh.n_faces();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::with_capacity(3); nf];
    for fid in 0..nf as u32 {
        let face = mesh.face(fid);
        let a = face.axis as usize;
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(3);
        let mut diag = 0.0;
        for &elem in &[face.minus, face.plus] {
            if elem == NO_ELEMENT {
                continue;
            }
            let inv_sigma = 1.0 / sigma[elem as usize];
            diag += inv_sigma * vol_diag;
            // opposite same-axis face of this supporting element
            let efaces = mesh.element_faces(elem);
            let opposite = if efaces[2 * a] == fid { efaces[2 * a + 1] } else { efaces[2 * a] };
            entries.push((opposite, inv_sigma * vol_off));
        }
        entries.push((fid, diag));
        entries.sort_unstable_by_key(|e| e.0);
        rows[fid as usize] = entries;
    }
    CsrMatrix::from_rows(nf, rows)
}

/// Assemble the divergence matrix over all faces. Row k holds +-h^2 for the
/// six faces of element k, positive where the element sits on the minus side
/// of the face (outward flux along the +axis normal).
pub fn assemble_b(mesh: &HexMesh) -> CsrMatrix {
    let h2 = mesh.spacing() * mesh.spacing();
    let ne = mesh.n_elements();
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(ne);
    for e in 0..ne as u32 {
        let mut entries: Vec<(u32, f64)> = mesh
            .element_faces(e)
            .iter()
            .map(|&fid| {
                let sign = if mesh.face(fid).minus == e { h2 } else { -h2 };
                (fid, sign)
            })
            .collect();
        entries.sort_unstable_by_key(|en| en.0);
        rows.push(entries);
    }
    CsrMatrix::from_rows(mesh.n_faces(), rows)
}

/// Remove boundary-face degrees of freedom, enforcing the zero normal-flux
/// boundary condition on the discrete current space.
pub fn eliminate_boundary(
    mesh: &HexMesh,
    table: &CompartmentTable,
    a: &CsrMatrix,
    b: &CsrMatrix,
) -> Result<SaddleSystem> {
    let sigma = element_sigmas(mesh, table)?;
    let nf = mesh.n_faces();
    let mut face_map = vec![NO_ELEMENT; nf];
    let mut interior_faces = Vec::with_capacity(mesh.n_interior_faces());
    for fid in 0..nf as u32 {
        if mesh.face(fid).is_interior() {
            face_map[fid as usize] = interior_faces.len() as u32;
            interior_faces.push(fid);
        }
    }
    let ni = interior_faces.len();

    let a_rows: Vec<Vec<(u32, f64)>> = interior_faces
        .iter()
        .map(|&fid| {
            let (cols, vals) = a.row(fid as usize);
            cols.iter()
                .zip(vals)
                .filter_map(|(&c, &v)| {
                    let m = face_map[c as usize];
                    (m != NO_ELEMENT).then_some((m, v))
                })
                .collect()
        })
        .collect();
    let a_int = CsrMatrix::from_rows(ni, a_rows);

    let b_rows: Vec<Vec<(u32, f64)>> = (0..b.nrows())
        .map(|e| {
            let (cols, vals) = b.row(e);
            cols.iter()
                .zip(vals)
                .filter_map(|(&c, &v)| {
                    let m = face_map[c as usize];
                    (m != NO_ELEMENT).then_some((m, v))
                })
                .collect()
        })
        .collect();
    let b_int = CsrMatrix::from_rows(ni, b_rows);
    let bt = b_int.transpose();

    Ok(SaddleSystem {
        a: a_int,
        b: b_int,
        bt,
        face_map,
        interior_faces,
        sigma,
        spacing: mesh.spacing(),
        degenerate: ni == 0,
        a_factor: OnceLock::new(),
    })
}

/// Convenience wrapper: assemble both blocks and eliminate boundary faces.
pub fn assemble_system(mesh: &HexMesh, table: &CompartmentTable) -> Result<SaddleSystem> {
    let a = assemble_a(mesh, table)?;
    let b = assemble_b(mesh);
    eliminate_boundary(mesh, table, &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hexmesh::HexMesh;

    fn table() -> CompartmentTable {
        CompartmentTable::standard_four_layer()
    }

    fn uniform_mesh(dims: [usize; 3]) -> HexMesh {
        let n = dims[0] * dims[1] * dims[2];
        HexMesh::from_labels(dims, 1.0, [0.0; 3], vec![2; n]).unwrap()
    }

    fn unit_table() -> CompartmentTable {
        CompartmentTable::new(vec![(2, "unit".into(), 1.0)]).unwrap()
    }

    #[test]
    fn mass_matrix_entries() {
        // h=1, sigma=1: interior-face diagonal 2/3, opposite-face coupling 1/6
        let mesh = uniform_mesh([2, 1, 1]);
        let a = assemble_a(&mesh, &unit_table()).unwrap();
        let interior: Vec<u32> = (0..mesh.n_faces() as u32)
            .filter(|&f| mesh.face(f).is_interior())
            .collect();
        assert_eq!(interior.len(), 1);
        let fi = interior[0] as usize;
        assert!((a.get(fi, fi) - 2.0 / 3.0).abs() < 1e-15);
        // coupling with the two boundary x-faces
        let efaces0 = mesh.element_faces(0);
        let xm = efaces0[0] as usize;
        assert!((a.get(fi, xm) - 1.0 / 6.0).abs() < 1e-15);
        // perpendicular faces do not couple
        let ym = efaces0[2] as usize;
        assert_eq!(a.get(fi, ym), 0.0);
    }

    #[test]
    fn mass_matrix_matches_gauss_quadrature() {
        // 3-point Gauss per axis is exact for the quadratic tent products;
        // check every nonzero of A on a mixed-label mesh against quadrature
        let mesh =
            HexMesh::from_labels([2, 2, 1], 0.5, [0.0; 3], vec![1, 2, 3, 4]).unwrap();
        let a = assemble_a(&mesh, &table()).unwrap();
        let h = mesh.spacing();
        // 3-point Gauss on [0,1]
        let gp = [0.5 - (0.15f64).sqrt(), 0.5, 0.5 + (0.15f64).sqrt()];
        let gw = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let w_profile = |fid: u32, p: [f64; 3]| -> f64 {
            // scalar profile of the face basis along its axis at point p
            let ax = mesh.face(fid).axis as usize;
            let c = mesh.face_centroid(fid);
            let d = (p[ax] - c[ax]).abs() / h;
            if d <= 1.0 {
                1.0 - d
            } else {
                0.0
            }
        };
        for i in 0..a.nrows() {
            let (cols, _) = a.row(i);
            for &j in cols {
                let fi = i as u32;
                let fj = j;
                if mesh.face(fi).axis != mesh.face(fj).axis {
                    continue;
                }
                let mut quad = 0.0;
                for e in 0..mesh.n_elements() as u32 {
                    let faces = mesh.element_faces(e);
                    if !faces.contains(&fi) || !faces.contains(&fj) {
                        continue;
                    }
                    let inv_sigma = 1.0
                        / table().sigma(mesh.element_label(e)).unwrap();
                    let lo = mesh.element_min_corner(e);
                    let mut acc = 0.0;
                    for (gz, wz) in gp.iter().zip(gw) {
                        for (gy, wy) in gp.iter().zip(gw) {
                            for (gx, wx) in gp.iter().zip(gw) {
                                let p = [lo[0] + gx * h, lo[1] + gy * h, lo[2] + gz * h];
                                acc += wx * wy * wz
                                    * w_profile(fi, p)
                                    * w_profile(fj, p);
                            }
                        }
                    }
                    quad += inv_sigma * acc * h * h * h;
                }
                let exact = a.get(i, j as usize);
                assert!(
                    (exact - quad).abs() <= 1e-12 * quad.abs().max(1e-30),
                    "A[{i},{j}] = {exact} vs quadrature {quad}"
                );
            }
        }
    }

    #[test]
    fn divergence_signs_and_row_sums() {
        let mesh = uniform_mesh([3, 3, 3]);
        let b = assemble_b(&mesh);
        for e in 0..mesh.n_elements() {
            let (_, vals) = b.row(e);
            let abs_sum: f64 = vals.iter().map(|v| v.abs()).sum();
            assert!((abs_sum - 6.0).abs() < 1e-15);
        }
        // interior face: +h^2 on the minus element row, -h^2 on the plus row
        for fid in 0..mesh.n_faces() as u32 {
            let f = mesh.face(fid);
            if f.is_interior() {
                assert_eq!(b.get(f.minus as usize, fid as usize), 1.0);
                assert_eq!(b.get(f.plus as usize, fid as usize), -1.0);
            }
        }
    }

    #[test]
    fn telescoping_flux_on_bar() {
        // constant unit flux through a straight channel is divergence-free on
        // the interior channel elements
        let mesh = uniform_mesh([3, 1, 1]);
        let b = assemble_b(&mesh);
        let mut j = vec![0.0; mesh.n_faces()];
        for fid in 0..mesh.n_faces() as u32 {
            if mesh.face(fid).axis == crate::hexmesh::Axis::X {
                j[fid as usize] = 1.0;
            }
        }
        let div = b.matvec_alloc(&j);
        // middle element has both x-faces interior: fluxes telescope to zero
        assert!(div[1].abs() < 1e-15);
    }

    #[test]
    fn eliminate_two_cell_bar() {
        let mesh = uniform_mesh([2, 1, 1]);
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        assert_eq!(sys.a.nrows(), 1);
        assert!((sys.a.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sys.b.nrows(), 2);
        assert_eq!(sys.b.get(0, 0), 1.0);
        assert_eq!(sys.b.get(1, 0), -1.0);
        assert!(!sys.degenerate);
    }

    #[test]
    fn eliminate_single_cell_is_degenerate() {
        let mesh = uniform_mesh([1, 1, 1]);
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        assert!(sys.degenerate);
        assert_eq!(sys.a.nrows(), 0);
    }

    #[test]
    fn cube_interior_dimension() {
        let mesh = uniform_mesh([3, 3, 3]);
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        assert_eq!(sys.a.nrows(), 54);
    }

    #[test]
    fn column_sums_vanish_after_elimination() {
        let mesh = uniform_mesh([3, 2, 2]);
        let sys = assemble_system(&mesh, &unit_table()).unwrap();
        let ones = vec![1.0; sys.b.nrows()];
        let bt1 = sys.bt.matvec_alloc(&ones);
        assert!(bt1.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn positive_definite_on_random_vectors() {
        use rand::prelude::*;
        let mesh = uniform_mesh([4, 4, 4]);
        let sys = assemble_system(&mesh, &table()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = sys.a.nrows();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let ax = sys.a.matvec_alloc(&x);
            let xtax: f64 = x.iter().zip(&ax).map(|(u, v)| u * v).sum();
            assert!(xtax > 0.0);
        }
    }

    #[test]
    fn conductivity_scaling() {
        let mesh = uniform_mesh([3, 2, 2]);
        let t1 = CompartmentTable::new(vec![(2, "a".into(), 0.5)]).unwrap();
        let t2 = CompartmentTable::new(vec![(2, "a".into(), 1.5)]).unwrap();
        let a1 = assemble_a(&mesh, &t1).unwrap();
        let a2 = assemble_a(&mesh, &t2).unwrap();
        for i in 0..a1.nrows() {
            let (cols, vals) = a1.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                // scaling sigma by 3 scales A by 1/3
                assert!((a2.get(i, c as usize) - v / 3.0).abs() < 1e-14);
            }
        }
        let b1 = assemble_b(&mesh);
        let b2 = assemble_b(&mesh);
        assert_eq!(b1.to_dense(), b2.to_dense());
    }

    #[test]
    fn rejects_missing_conductivity() {
        let mesh = HexMesh::from_labels([2, 1, 1], 1.0, [0.0; 3], vec![1, 7]).unwrap();
        assert!(assemble_a(&mesh, &table()).is_err());
    }
}

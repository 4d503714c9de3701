//! CSV and legacy-VTK exporters. Every file starts with a provenance line
//! (version, seed, config hash) and numbers are written with 17 significant
//! digits so identical runs produce byte-identical files.

use std::io::Write;

use crate::error::{Error, Result};
use crate::evaluation::{ErrorRecord, SweepSummary};
use crate::hexmesh::{HexMesh, NO_ELEMENT};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance token written into every output file.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn line(&self) -> String {
        format!("# hdivfwd {} seed={} config={}", VERSION, self.seed, self.config_hash)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Element potential CSV: `element_id,x,y,z,u`.
pub fn write_potential_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    mesh: &HexMesh,
    u: &[f64],
) -> Result<()> {
    if u.len() != mesh.n_elements() {
        return Err(Error::Dimension("potential length != element count".into()));
    }
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "element_id,x,y,z,u")?;
    for e in 0..mesh.n_elements() as u32 {
        let c = mesh.element_centroid(e);
        writeln!(w, "{},{},{},{},{}", e, fmt(c[0]), fmt(c[1]), fmt(c[2]), fmt(u[e as usize]))?;
    }
    Ok(())
}

/// Nodal potential CSV: `vertex_id,x,y,z,u` over active vertex DOFs.
pub fn write_nodal_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    mesh: &HexMesh,
    dof_vertices: &[u32],
    u: &[f64],
) -> Result<()> {
    if u.len() != dof_vertices.len() {
        return Err(Error::Dimension("potential length != DOF count".into()));
    }
    let d = mesh.dims();
    let vd = [d[0] + 1, d[1] + 1, d[2] + 1];
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "vertex_id,x,y,z,u")?;
    for (i, &v) in dof_vertices.iter().enumerate() {
        let v = v as usize;
        let ijk = [v % vd[0], (v / vd[0]) % vd[1], v / (vd[0] * vd[1])];
        let p: Vec<f64> =
            (0..3).map(|a| mesh.origin()[a] + ijk[a] as f64 * mesh.spacing()).collect();
        writeln!(w, "{},{},{},{},{}", v, fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(u[i]))?;
    }
    Ok(())
}

/// Face current CSV: `face_id,axis,x,y,z,j` over interior faces.
pub fn write_current_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    mesh: &HexMesh,
    interior_faces: &[u32],
    j: &[f64],
) -> Result<()> {
    if j.len() != interior_faces.len() {
        return Err(Error::Dimension("current length != interior face count".into()));
    }
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "face_id,axis,x,y,z,j")?;
    for (col, &fid) in interior_faces.iter().enumerate() {
        let c = mesh.face_centroid(fid);
        let axis = mesh.face(fid).axis as usize;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fid,
            axis,
            fmt(c[0]),
            fmt(c[1]),
            fmt(c[2]),
            fmt(j[col])
        )?;
    }
    Ok(())
}

/// Reference potential CSV: `point_id,x,y,z,u`.
pub fn write_reference_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    points: &[[f64; 3]],
    u: &[f64],
) -> Result<()> {
    if u.len() != points.len() {
        return Err(Error::Dimension("potential length != point count".into()));
    }
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "point_id,x,y,z,u")?;
    for (i, (p, v)) in points.iter().zip(u).enumerate() {
        writeln!(w, "{},{},{},{},{}", i, fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(*v))?;
    }
    Ok(())
}

/// Sweep records CSV: `model,method,dipole_id,eccentricity,outside_flag,rdm,lnmag`.
pub fn write_records_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    model: &str,
    records: &[ErrorRecord],
) -> Result<()> {
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "model,method,dipole_id,eccentricity,outside_flag,rdm,lnmag")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            model,
            r.method.as_str(),
            r.dipole_id,
            fmt(r.eccentricity),
            r.outside as u8,
            fmt(r.rdm),
            fmt(r.lnmag)
        )?;
    }
    Ok(())
}

/// Sweep summary CSV: one row per (method, eccentricity).
pub fn write_summary_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    summaries: &[SweepSummary],
) -> Result<()> {
    writeln!(w, "{}", prov.line())?;
    writeln!(
        w,
        "method,eccentricity,count,rdm_min,rdm_q1,rdm_median,rdm_q3,rdm_max,\
         lnmag_min,lnmag_q1,lnmag_median,lnmag_q3,lnmag_max"
    )?;
    for s in summaries {
        let stats: Vec<String> =
            s.rdm.iter().chain(s.lnmag.iter()).map(|&v| fmt(v)).collect();
        writeln!(
            w,
            "{},{},{},{}",
            s.method.as_str(),
            fmt(s.eccentricity),
            s.count,
            stats.join(",")
        )?;
    }
    Ok(())
}

/// Convergence log CSV: `iter,residual`.
pub fn write_convergence_csv<W: Write>(
    w: &mut W,
    prov: &Provenance,
    history: &[(usize, f64)],
) -> Result<()> {
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "iter,residual")?;
    for (it, res) in history {
        writeln!(w, "{},{}", it, fmt(*res))?;
    }
    Ok(())
}

/// Compartment labels on the full voxel grid as legacy-VTK structured points
/// (cell data; label 0 marks exterior cells).
pub fn write_vtk_labels<W: Write>(w: &mut W, prov: &Provenance, mesh: &HexMesh) -> Result<()> {
    let d = mesh.dims();
    let o = mesh.origin();
    let h = mesh.spacing();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", prov.line().trim_start_matches("# "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", d[0] + 1, d[1] + 1, d[2] + 1)?;
    writeln!(w, "ORIGIN {} {} {}", fmt(o[0]), fmt(o[1]), fmt(o[2]))?;
    writeln!(w, "SPACING {} {} {}", fmt(h), fmt(h), fmt(h))?;
    writeln!(w, "CELL_DATA {}", d[0] * d[1] * d[2])?;
    writeln!(w, "SCALARS labels unsigned_char 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &l in mesh.labels() {
        writeln!(w, "{l}")?;
    }
    Ok(())
}

/// Labeled cells as an unstructured hexahedral grid with per-cell potential
/// and current-density fields (current in uA/mm^2 under unit-dipole scaling).
pub fn write_vtk_fields<W: Write>(
    w: &mut W,
    prov: &Provenance,
    mesh: &HexMesh,
    potential: &[f64],
    current: &[[f64; 3]],
) -> Result<()> {
    let ne = mesh.n_elements();
    if potential.len() != ne || current.len() != ne {
        return Err(Error::Dimension("field length != element count".into()));
    }
    let d = mesh.dims();
    let vd = [d[0] + 1, d[1] + 1, d[2] + 1];
    // collect the vertices of labeled cells, compactly renumbered
    let mut vertex_ids = vec![NO_ELEMENT; vd[0] * vd[1] * vd[2]];
    let mut vertices: Vec<usize> = Vec::new();
    let mut cells: Vec<[u32; 8]> = Vec::with_capacity(ne);
    for e in 0..ne as u32 {
        let ijk = mesh.cell_ijk(mesh.element_cell(e));
        let mut cell = [0u32; 8];
        // VTK hexahedron ordering: bottom quad counterclockwise, then top
        const OFFS: [[usize; 3]; 8] = [
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [1, 1, 1],
            [0, 1, 1],
        ];
        for (slot, off) in cell.iter_mut().zip(OFFS) {
            let v = (ijk[0] + off[0]) + vd[0] * ((ijk[1] + off[1]) + vd[1] * (ijk[2] + off[2]));
            if vertex_ids[v] == NO_ELEMENT {
                vertex_ids[v] = vertices.len() as u32;
                vertices.push(v);
            }
            *slot = vertex_ids[v];
        }
        cells.push(cell);
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", prov.line().trim_start_matches("# "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", vertices.len())?;
    for &v in &vertices {
        let ijk = [v % vd[0], (v / vd[0]) % vd[1], v / (vd[0] * vd[1])];
        let p: Vec<String> = (0..3)
            .map(|a| fmt(mesh.origin()[a] + ijk[a] as f64 * mesh.spacing()))
            .collect();
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    writeln!(w, "CELLS {} {}", ne, 9 * ne)?;
    for cell in &cells {
        let ids: Vec<String> = cell.iter().map(|c| c.to_string()).collect();
        writeln!(w, "8 {}", ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(w, "12")?;
    }
    writeln!(w, "CELL_DATA {ne}")?;
    writeln!(w, "SCALARS potential double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &u in potential {
        writeln!(w, "{}", fmt(u))?;
    }
    writeln!(w, "SCALARS current_magnitude double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for j in current {
        writeln!(w, "{}", fmt((j[0] * j[0] + j[1] * j[1] + j[2] * j[2]).sqrt()))?;
    }
    writeln!(w, "VECTORS current double")?;
    for j in current {
        writeln!(w, "{} {} {}", fmt(j[0]), fmt(j[1]), fmt(j[2]))?;
    }
    Ok(())
}

/// Per-element current vector from interior-face RT0 coefficients: each
/// component is the mean of the element's two same-axis face fluxes
/// (boundary faces carry zero flux).
pub fn element_current_from_faces(
    mesh: &HexMesh,
    face_map: &[u32],
    j: &[f64],
) -> Vec<[f64; 3]> {
    (0..mesh.n_elements() as u32)
        .map(|e| {
            let faces = mesh.element_faces(e);
            let mut v = [0.0; 3];
            for a in 0..3 {
                let mut acc = 0.0;
                for &fid in &faces[2 * a..2 * a + 2] {
                    let col = face_map[fid as usize];
                    if col != NO_ELEMENT {
                        acc += j[col as usize];
                    }
                }
                v[a] = acc / 2.0;
            }
            v
        })
        .collect()
}

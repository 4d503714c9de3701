//! End-to-end export demo: generate a sphere mesh, solve one dipole, and
//! write VTK files (labels as a structured-points grid, potential and
//! current on the labeled cells as an unstructured grid) for inspection in
//! ParaView or similar tools.
//!
//! Run with: cargo run --release --example export_vtk [out_dir]

use std::fs::File;
use std::io::BufWriter;

use hdivfwd::assembly::assemble_system;
use hdivfwd::export::{
    element_current_from_faces, write_vtk_fields, write_vtk_labels, Provenance,
};
use hdivfwd::hexmesh::{generate_sphere_mesh, CompartmentTable, SphereSpec};
use hdivfwd::solver::{solve_potential, SolverConfig};
use hdivfwd::sources::{rhs_projected, Dipole};

fn main() -> hdivfwd::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "vtk-out".into());
    std::fs::create_dir_all(&out_dir)?;

    let spec = SphereSpec::standard_four_layer(6.0);
    let mesh = generate_sphere_mesh(&spec)?;
    let table = CompartmentTable::standard_four_layer();
    let system = assemble_system(&mesh, &table)?;

    let dipole = Dipole { position: [0.0, 0.0, 52.0], moment: [0.0, 0.0, 1.0] };
    let rhs = rhs_projected(&dipole, &system, &mesh)?;
    let sol = solve_potential(&system, &rhs, &SolverConfig::default().converged_inner())?;
    let current = element_current_from_faces(&mesh, &system.face_map, &sol.j);

    let prov = Provenance { seed: 0, config_hash: "example".into() };
    let labels_path = format!("{out_dir}/labels.vtk");
    let fields_path = format!("{out_dir}/solution.vtk");
    write_vtk_labels(&mut BufWriter::new(File::create(&labels_path)?), &prov, &mesh)?;
    write_vtk_fields(
        &mut BufWriter::new(File::create(&fields_path)?),
        &prov,
        &mesh,
        &sol.u,
        &current,
    )?;
    println!("wrote {labels_path} (compartment labels, structured points)");
    println!("wrote {fields_path} (potential + current, unstructured hex grid)");
    Ok(())
}

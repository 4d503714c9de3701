//! Transfer-matrix workflow: precompute one Schur solve per sensor, then
//! obtain leadfield entries for any dipole with a dot product instead of a
//! full forward solve. Verifies a few entries against direct forward solves.
//!
//! Run with: cargo run --release --example transfer_matrix [spacing_mm]

use hdivfwd::analytic::fibonacci_sphere;
use hdivfwd::assembly::assemble_system;
use hdivfwd::evaluation::nearest_surface_elements;
use hdivfwd::hexmesh::{generate_sphere_mesh, CompartmentTable, SphereSpec};
use hdivfwd::solver::{build_h, solve_potential, transfer_solve, SolverConfig};
use hdivfwd::sources::{place_sources, rhs_projected};
use hdivfwd::vecops;

fn main() -> hdivfwd::Result<()> {
    let spacing: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6.0);
    let spec = SphereSpec::standard_four_layer(spacing);
    let mesh = generate_sphere_mesh(&spec)?;
    let table = CompartmentTable::standard_four_layer();
    let system = assemble_system(&mesh, &table)?;
    println!(
        "sphere mesh at h = {spacing} mm: {} elements, {} interior faces",
        mesh.n_elements(),
        mesh.n_interior_faces()
    );

    // 8 scalp sensors referenced against the mean potential: the restriction
    // row for sensor k is e_k - 1/n, which is mean-zero
    let sensors = fibonacci_sphere(8, 92.0, [0.0; 3]);
    let sensor_elements = nearest_surface_elements(&mesh, &sensors)?;
    let ne = system.b.nrows();
    let restrictions: Vec<Vec<f64>> = sensor_elements
        .iter()
        .map(|&e| {
            let mut r = vec![-1.0 / ne as f64; ne];
            r[e as usize] += 1.0;
            r
        })
        .collect();

    let config = SolverConfig::default().converged_inner();
    let start = std::time::Instant::now();
    let transfer = transfer_solve(&system, &restrictions, &config)?;
    println!("computed {} transfer vectors in {:.2} s", transfer.len(), start.elapsed().as_secs_f64());

    // leadfield via transfer vs direct forward solves for 3 dipoles
    let dipoles = place_sources([0.0; 3], 78.0, 39.0, 10.0, 3, 1, 5, true);
    println!();
    println!("{:<8} {:<8} {:>16} {:>16} {:>12}", "dipole", "sensor", "via transfer", "via forward", "rel diff");
    for (di, dipole) in dipoles.iter().enumerate() {
        let rhs = rhs_projected(dipole, &system, &mesh)?;
        let h = build_h(&system, &rhs, &config)?;
        let sol = solve_potential(&system, &rhs, &config)?;
        for (si, t) in transfer.iter().enumerate() {
            let via_transfer = vecops::dot(t, &h);
            let via_forward =
                sol.u[sensor_elements[si] as usize] - vecops::mean(&sol.u);
            let denom = via_forward.abs().max(1e-30);
            println!(
                "{:<8} {:<8} {:>16.8e} {:>16.8e} {:>12.3e}",
                di,
                si,
                via_transfer,
                via_forward,
                (via_transfer - via_forward).abs() / denom
            );
        }
    }
    Ok(())
}

//! Mesh statistics for the four-layer sphere family: element/face counts at
//! a given resolution, and leakage counts (vertices shared by CSF and skin
//! elements) for the thin-skull variants.
//!
//! Run with: cargo run --release --example mesh_stats [spacing_mm]

use hdivfwd::hexmesh::{generate_leaky_sphere, generate_sphere_mesh, SphereSpec};

fn main() -> hdivfwd::Result<()> {
    let spacing: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let spec = SphereSpec::standard_four_layer(spacing);
    let mesh = generate_sphere_mesh(&spec)?;
    let d = mesh.dims();
    println!("four-layer sphere, h = {spacing} mm");
    println!("  grid           {} x {} x {}", d[0], d[1], d[2]);
    println!("  elements       {}", mesh.n_elements());
    println!("  faces          {}", mesh.n_faces());
    println!("  interior faces {}", mesh.n_interior_faces());
    println!("  boundary faces {}", mesh.n_boundary_faces());

    // thin-skull variants: shrink the skull's outer radius toward the CSF
    // boundary (80 mm) and count vertices where CSF and skin elements touch
    println!();
    println!("thin-skull variants (skull outer radius -> CSF/skin leak count)");
    for r in [82.0, 83.0, 84.0] {
        let leaky = generate_leaky_sphere(&spec, r)?;
        let leaks = leaky.count_leaks(2, 4)?;
        println!("  {r} mm -> {leaks} leaks ({} elements)", leaky.n_elements());
    }
    Ok(())
}

//! Command-line front end: `generate-mesh`, `solve`, `sweep`, `transfer`,
//! and `export-vtk` subcommands over the library pipeline.
//!
//! Exit codes: 0 success, 2 usage error, 3 validation/input error,
//! 4 numerical failure.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analytic::{fibonacci_sphere, LayeredSphere};
use crate::assembly::assemble_system;
use crate::cg_baseline;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::evaluation::{self, Method, SweepContext};
use crate::export::{self, Provenance};
use crate::hexmesh::{
    generate_leaky_sphere, generate_sphere_mesh, load_labeled_voxels, Centering,
    CompartmentTable, HexMesh, SphereSpec,
};
use crate::solver::{self, DiagApprox, PrecondKind, SolverConfig};
use crate::sources::{self, Dipole};
use crate::vecops;

const USAGE: &str = "\
usage: hdivfwd <subcommand> [flags]

subcommands:
  generate-mesh   build a labeled sphere mesh and print its statistics
  solve           solve the forward problem for one dipole
  sweep           run an eccentricity sweep against the analytic reference
  transfer        compute per-sensor transfer rows and a leadfield table
  export-vtk      write mesh labels / solution fields as legacy VTK

common flags:
  --config FILE    read key = value configuration (flags win)
  --out PATH       output file or directory (default .)
  --seed N         RNG seed recorded in outputs (default 0)
  --threads N      rayon thread count (or HDIVFWD_THREADS)

generate-mesh: --spacing MM [--radii R1,R2,...] [--skull-radius MM]
               [--centering corner|center]
solve:         --mesh FILE --dipole X,Y,Z,MX,MY,MZ [--method NAME]
               [--outer-tol T] [--inner-iters N] [--precond none|ssor|amg]
               [--diag l2|diag|rowsum|l1] [--ssor-sweeps K] [--log-convergence]
sweep:         (--mesh FILE | --spacing MM) [--methods A,B] [--n-radii N]
               [--n-per-radius N] [--d-max MM] [--d-min MM] [--points N]
               [--skull-radius MM] [--tangential]
transfer:      --mesh FILE --sensors FILE --dipoles FILE
export-vtk:    --mesh FILE [--potential CSV --current CSV]
";

/// Flag name -> configuration key. Boolean flags take no value.
const FLAGS: &[(&str, &str, bool)] = &[
    ("--config", "config", false),
    ("--out", "out", false),
    ("--seed", "seed", false),
    ("--threads", "threads", false),
    ("--spacing", "mesh.spacing", false),
    ("--radii", "mesh.radii", false),
    ("--skull-radius", "mesh.skull_radius", false),
    ("--centering", "mesh.centering", false),
    ("--mesh", "mesh.file", false),
    ("--outer-tol", "solver.outer_tol", false),
    ("--outer-max-iter", "solver.outer_max_iter", false),
    ("--inner-iters", "solver.inner_iters", false),
    ("--inner-tol", "solver.inner_tol", false),
    ("--precond", "solver.precond", false),
    ("--diag", "solver.diag", false),
    ("--ssor-sweeps", "solver.ssor_sweeps", false),
    ("--log-convergence", "solver.log_convergence", true),
    ("--method", "method", false),
    ("--methods", "sweep.methods", false),
    ("--dipole", "source.dipole", false),
    ("--dipoles", "source.dipoles", false),
    ("--n-radii", "sweep.n_radii", false),
    ("--n-per-radius", "sweep.n_per_radius", false),
    ("--d-max", "sweep.d_max", false),
    ("--d-min", "sweep.d_min", false),
    ("--points", "sweep.points", false),
    ("--tangential", "sweep.tangential", true),
    ("--sensors", "transfer.sensors", false),
    ("--potential", "vtk.potential", false),
    ("--current", "vtk.current", false),
];

/// Entry point; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let argv: Vec<String> = args.into_iter().collect();
    match parse(&argv) {
        Err(usage_msg) => {
            eprintln!("{usage_msg}");
            eprintln!("{USAGE}");
            2
        }
        Ok((sub, cfg)) => {
            init_threads(&cfg);
            let res = match sub.as_str() {
                "generate-mesh" => cmd_generate(&cfg),
                "solve" => cmd_solve(&cfg),
                "sweep" => cmd_sweep(&cfg),
                "transfer" => cmd_transfer(&cfg),
                "export-vtk" => cmd_export_vtk(&cfg),
                _ => unreachable!(),
            };
            match res {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    }
}

/// Parse argv into (subcommand, merged config). String error = usage problem.
fn parse(argv: &[String]) -> std::result::Result<(String, Config), String> {
    let mut it = argv.iter().skip(1);
    let sub = it.next().ok_or("missing subcommand")?.clone();
    if !["generate-mesh", "solve", "sweep", "transfer", "export-vtk"].contains(&sub.as_str()) {
        return Err(format!("unknown subcommand '{sub}'"));
    }
    let mut flags: Vec<(String, String)> = Vec::new();
    while let Some(flag) = it.next() {
        let spec = FLAGS
            .iter()
            .find(|(name, _, _)| name == flag)
            .ok_or_else(|| format!("unknown flag '{flag}'"))?;
        let value = if spec.2 {
            "true".to_string()
        } else {
            it.next().ok_or_else(|| format!("flag '{flag}' needs a value"))?.clone()
        };
        flags.push((spec.1.to_string(), value));
    }
    // config file first, then flags on top
    let mut cfg = Config::new();
    if let Some((_, path)) = flags.iter().find(|(k, _)| k == "config") {
        cfg = Config::load(Path::new(path)).map_err(|e| format!("cannot read config: {e}"))?;
    }
    for (k, v) in &flags {
        cfg.set(k, v);
    }
    Ok((sub, cfg))
}

fn init_threads(cfg: &Config) {
    let n = cfg
        .get("threads")
        .map(|s| s.to_string())
        .or_else(|| std::env::var("HDIVFWD_THREADS").ok())
        .and_then(|s| s.parse::<usize>().ok());
    if let Some(n) = n {
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn provenance(cfg: &Config) -> Result<Provenance> {
    Ok(Provenance { seed: cfg.get_or("seed", 0u64)?, config_hash: cfg.hash() })
}

fn out_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.get("out").unwrap_or("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn solver_config(cfg: &Config) -> Result<SolverConfig> {
    let mut sc = SolverConfig {
        outer_tol: cfg.get_or("solver.outer_tol", 1e-8)?,
        outer_max_iter: cfg.get_or("solver.outer_max_iter", 10_000)?,
        inner_tol: cfg.get_or("solver.inner_tol", 1e-10)?,
        ssor_sweeps: cfg.get_or("solver.ssor_sweeps", 1)?,
        ..SolverConfig::default()
    };
    match cfg.get("solver.inner_iters") {
        None => {}
        Some("converged") => sc.inner_iters = None,
        Some(_) => sc.inner_iters = Some(cfg.get_or("solver.inner_iters", 1usize)?),
    }
    if let Some(p) = cfg.get("solver.precond") {
        sc.precond = PrecondKind::parse(p)?;
    }
    if let Some(d) = cfg.get("solver.diag") {
        sc.diag_approx = DiagApprox::parse(d)?;
    }
    Ok(sc)
}

fn sphere_spec(cfg: &Config) -> Result<SphereSpec> {
    let spacing: f64 = cfg
        .get_parsed("mesh.spacing")?
        .ok_or_else(|| Error::Validation("--spacing is required".into()))?;
    let mut spec = SphereSpec::standard_four_layer(spacing);
    if let Some(radii) = cfg.get_list("mesh.radii") {
        let parsed: Result<Vec<f64>> = radii
            .iter()
            .map(|r| {
                r.parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad radius '{r}'")))
            })
            .collect();
        spec.radii = parsed?;
        spec.labels = (1..=spec.radii.len() as u8).collect();
    }
    spec.centering = match cfg.get("mesh.centering").unwrap_or("corner") {
        "corner" => Centering::CellCorner,
        "center" => Centering::CellCenter,
        other => return Err(Error::Validation(format!("unknown centering '{other}'"))),
    };
    Ok(spec)
}

fn build_mesh(cfg: &Config, table: &CompartmentTable) -> Result<(HexMesh, Option<SphereSpec>)> {
    if let Some(path) = cfg.get("mesh.file") {
        Ok((load_labeled_voxels(Path::new(path), table)?, None))
    } else {
        let spec = sphere_spec(cfg)?;
        let mesh = match cfg.get_parsed::<f64>("mesh.skull_radius")? {
            Some(r) => generate_leaky_sphere(&spec, r)?,
            None => generate_sphere_mesh(&spec)?,
        };
        Ok((mesh, Some(spec)))
    }
}

fn parse_dipole(cfg: &Config) -> Result<Dipole> {
    let raw = cfg
        .get("source.dipole")
        .ok_or_else(|| Error::Validation("--dipole is required".into()))?;
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad dipole component '{s}'")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 6 {
        return Err(Error::Validation("--dipole needs 6 comma-separated numbers".into()));
    }
    Ok(Dipole {
        position: [parts[0], parts[1], parts[2]],
        moment: [parts[3], parts[4], parts[5]],
    })
}

fn cmd_generate(cfg: &Config) -> Result<()> {
    let spec = sphere_spec(cfg)?;
    let skull = cfg.get_parsed::<f64>("mesh.skull_radius")?;
    let mesh = match skull {
        Some(r) => generate_leaky_sphere(&spec, r)?,
        None => generate_sphere_mesh(&spec)?,
    };
    let out = PathBuf::from(cfg.get("out").unwrap_or("mesh.hxm"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    mesh.write_hxm(&out)?;
    println!("mesh: {}", out.display());
    println!("dims: {} {} {}", mesh.dims()[0], mesh.dims()[1], mesh.dims()[2]);
    println!("elements: {}", mesh.n_elements());
    println!("faces: {}", mesh.n_faces());
    println!("interior_faces: {}", mesh.n_interior_faces());
    // leak count between the compartments that the thin layer separates
    if spec.labels.len() >= 3 {
        let n = spec.labels.len();
        let below = spec.labels[n - 3];
        let above = spec.labels[n - 1];
        match mesh.count_leaks(below, above) {
            Ok(leaks) => println!("leaks: {leaks}"),
            Err(_) => println!("leaks: n/a"),
        }
    }
    Ok(())
}

fn cmd_solve(cfg: &Config) -> Result<()> {
    let table = CompartmentTable::standard_four_layer();
    let (mesh, _) = build_mesh(cfg, &table)?;
    let dipole = parse_dipole(cfg)?;
    let method = Method::parse(cfg.get("method").unwrap_or("mixed-projected"))?;
    let sc = solver_config(cfg)?;
    let prov = provenance(cfg)?;
    let dir = out_dir(cfg)?;

    match method {
        Method::MixedDirect | Method::MixedProjected => {
            let sys = assemble_system(&mesh, &table)?;
            let rhs = match method {
                Method::MixedDirect => sources::rhs_direct(&dipole, &sys, &mesh, &table)?,
                _ => sources::rhs_projected(&dipole, &sys, &mesh)?,
            };
            let sol = solver::solve_potential(&sys, &rhs, &sc)?;
            let mut w = BufWriter::new(File::create(dir.join("potential.csv"))?);
            export::write_potential_csv(&mut w, &prov, &mesh, &sol.u)?;
            let mut w = BufWriter::new(File::create(dir.join("current.csv"))?);
            export::write_current_csv(&mut w, &prov, &mesh, &sys.interior_faces, &sol.j)?;
            if cfg.get("solver.log_convergence") == Some("true") {
                let mut w = BufWriter::new(File::create(dir.join("convergence.csv"))?);
                export::write_convergence_csv(&mut w, &prov, &sol.history)?;
            }
            println!(
                "solved ({}): {} outer iterations, residual {:.3e}, {:.2}s",
                method.as_str(),
                sol.iterations,
                sol.final_residual,
                sol.wall_seconds
            );
        }
        Method::CgPi => {
            let sys = cg_baseline::assemble_stiffness(&mesh, &table)?;
            let sparse = cg_baseline::rhs_partial_integration(&dipole, &mesh, &sys)?;
            let mut load = vec![0.0; sys.k.nrows()];
            for (c, v) in sparse {
                load[c as usize] = v;
            }
            let u = cg_baseline::solve_nodal(&sys, &load, sc.outer_tol)?;
            let mut w = BufWriter::new(File::create(dir.join("potential.csv"))?);
            export::write_nodal_csv(&mut w, &prov, &mesh, &sys.dof_vertices, &u)?;
            println!("solved (cg-pi): {} vertex DOFs", u.len());
        }
    }
    Ok(())
}

fn cmd_sweep(cfg: &Config) -> Result<()> {
    let table = CompartmentTable::standard_four_layer();
    let (mesh, spec) = build_mesh(cfg, &table)?;
    // analytic model mirrors the generated geometry (including a skull
    // override); a loaded mesh file uses the standard four-layer model
    let mut radii = spec
        .as_ref()
        .map(|s| s.radii.clone())
        .unwrap_or_else(|| vec![78.0, 80.0, 86.0, 92.0]);
    if let Some(r) = cfg.get_parsed::<f64>("mesh.skull_radius")? {
        let n = radii.len();
        radii[n - 2] = r;
    }
    let sigmas: Vec<f64> = (1..=radii.len() as u8)
        .map(|l| {
            table
                .sigma(l)
                .ok_or_else(|| Error::Validation(format!("no conductivity for layer {l}")))
        })
        .collect::<Result<_>>()?;
    let model = LayeredSphere::new(radii, sigmas, [0.0; 3])?;

    let methods: Vec<Method> = match cfg.get_list("sweep.methods") {
        Some(names) => names.iter().map(|n| Method::parse(n)).collect::<Result<_>>()?,
        None => vec![Method::MixedProjected],
    };
    let seed = cfg.get_or("seed", 0u64)?;
    let dipoles = sources::place_sources(
        model.center,
        model.inner_radius(),
        cfg.get_or("sweep.d_max", model.inner_radius() / 2.0)?,
        cfg.get_or("sweep.d_min", 0.5)?,
        cfg.get_or("sweep.n_radii", 10usize)?,
        cfg.get_or("sweep.n_per_radius", 10usize)?,
        seed,
        cfg.get("sweep.tangential") != Some("true"),
    );
    let points = fibonacci_sphere(
        cfg.get_or("sweep.points", 1000usize)?,
        model.outer_radius(),
        model.center,
    );
    let sc = solver_config(cfg)?;
    let prov = provenance(cfg)?;
    let dir = out_dir(cfg)?;

    let ctx = SweepContext::build(&mesh, &table, &model, points, &methods, sc)?;
    let records = evaluation::run_sweep(&ctx, &methods, &dipoles)?;
    let summaries = evaluation::summarize(&records)?;

    let model_tag = format!("sphere-h{}", mesh.spacing());
    let mut w = BufWriter::new(File::create(dir.join("dipoles.csv"))?);
    writeln!(w, "{}", prov.line())?;
    sources::write_dipoles_csv(&mut w, &dipoles)?;
    let mut w = BufWriter::new(File::create(dir.join("records.csv"))?);
    export::write_records_csv(&mut w, &prov, &model_tag, &records)?;
    let mut w = BufWriter::new(File::create(dir.join("summary.csv"))?);
    export::write_summary_csv(&mut w, &prov, &summaries)?;
    println!("sweep: {} records over {} dipoles -> {}", records.len(), dipoles.len(), dir.display());
    Ok(())
}

fn read_sensors_csv(path: &Path) -> Result<Vec<[f64; 3]>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || (lineno == 0 && t.starts_with("x,")) {
            continue;
        }
        let parts: Vec<f64> = t
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Validation(format!("bad sensor coordinate '{s}'")))
            })
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return Err(Error::Validation(format!(
                "sensor CSV line {} needs 3 fields",
                lineno + 1
            )));
        }
        out.push([parts[0], parts[1], parts[2]]);
    }
    if out.is_empty() {
        return Err(Error::Validation("no sensors in file".into()));
    }
    Ok(out)
}

fn cmd_transfer(cfg: &Config) -> Result<()> {
    let table = CompartmentTable::standard_four_layer();
    let (mesh, _) = build_mesh(cfg, &table)?;
    let sensors = read_sensors_csv(Path::new(
        cfg.get("transfer.sensors")
            .ok_or_else(|| Error::Validation("--sensors is required".into()))?,
    ))?;
    let dipoles = sources::read_dipoles_csv(BufReader::new(File::open(
        cfg.get("source.dipoles")
            .ok_or_else(|| Error::Validation("--dipoles is required".into()))?,
    )?))?;
    let sys = assemble_system(&mesh, &table)?;
    let sc = solver_config(cfg)?;
    let prov = provenance(cfg)?;
    let dir = out_dir(cfg)?;

    // restriction per sensor: nearest outer-compartment element minus the
    // domain mean (mean-zero, sensor against the average reference)
    let sensor_elems = evaluation::nearest_surface_elements(&mesh, &sensors)?;
    let ne = sys.b.nrows();
    let restrictions: Vec<Vec<f64>> = sensor_elems
        .iter()
        .map(|&e| {
            let mut r = vec![-1.0 / ne as f64; ne];
            r[e as usize] += 1.0;
            r
        })
        .collect();
    let rows = solver::transfer_solve(&sys, &restrictions, &sc)?;

    let mut w = BufWriter::new(File::create(dir.join("leadfield.csv"))?);
    writeln!(w, "{}", prov.line())?;
    writeln!(w, "sensor_id,dipole_id,u")?;
    for (d_id, dipole) in dipoles.iter().enumerate() {
        let rhs = sources::rhs_projected(dipole, &sys, &mesh)?;
        let h = solver::build_h(&sys, &rhs, &sc)?;
        for (s_id, t) in rows.iter().enumerate() {
            writeln!(w, "{},{},{:.16e}", s_id, d_id, vecops::dot(t, &h))?;
        }
    }
    println!("leadfield: {} sensors x {} dipoles -> {}", rows.len(), dipoles.len(), dir.display());
    Ok(())
}

/// Read a potential CSV written by `cmd_solve` back into an element vector.
fn read_potential_csv(path: &Path, ne: usize) -> Result<Vec<f64>> {
    let r = BufReader::new(File::open(path)?);
    let mut u = vec![0.0; ne];
    let mut seen = 0usize;
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("element_id") {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Validation("malformed potential CSV".into()));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::Validation("bad element id in potential CSV".into()))?;
        if id >= ne {
            return Err(Error::Validation("element id out of range in potential CSV".into()));
        }
        u[id] = fields[4]
            .parse()
            .map_err(|_| Error::Validation("bad value in potential CSV".into()))?;
        seen += 1;
    }
    if seen != ne {
        return Err(Error::Dimension(format!(
            "potential CSV has {seen} rows, mesh has {ne} elements"
        )));
    }
    Ok(u)
}

/// Read a face-current CSV back into interior-face coefficients.
fn read_current_csv(path: &Path, interior_faces: &[u32]) -> Result<Vec<f64>> {
    let r = BufReader::new(File::open(path)?);
    let mut j = vec![0.0; interior_faces.len()];
    let mut row = 0usize;
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("face_id") {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Validation("malformed current CSV".into()));
        }
        if row >= j.len() {
            return Err(Error::Dimension("current CSV longer than interior face count".into()));
        }
        let fid: u32 = fields[0]
            .parse()
            .map_err(|_| Error::Validation("bad face id in current CSV".into()))?;
        if fid != interior_faces[row] {
            return Err(Error::Validation("current CSV face order mismatch".into()));
        }
        j[row] = fields[5]
            .parse()
            .map_err(|_| Error::Validation("bad value in current CSV".into()))?;
        row += 1;
    }
    if row != j.len() {
        return Err(Error::Dimension("current CSV shorter than interior face count".into()));
    }
    Ok(j)
}

fn cmd_export_vtk(cfg: &Config) -> Result<()> {
    let table = CompartmentTable::standard_four_layer();
    let (mesh, _) = build_mesh(cfg, &table)?;
    let prov = provenance(cfg)?;
    let out = PathBuf::from(cfg.get("out").unwrap_or("mesh.vtk"));
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    match (cfg.get("vtk.potential"), cfg.get("vtk.current")) {
        (Some(pot), Some(cur)) => {
            let sys = assemble_system(&mesh, &table)?;
            let u = read_potential_csv(Path::new(pot), mesh.n_elements())?;
            let j = read_current_csv(Path::new(cur), &sys.interior_faces)?;
            let vectors = export::element_current_from_faces(&mesh, &sys.face_map, &j);
            let mut w = BufWriter::new(File::create(&out)?);
            export::write_vtk_fields(&mut w, &prov, &mesh, &u, &vectors)?;
        }
        (None, None) => {
            let mut w = BufWriter::new(File::create(&out)?);
            export::write_vtk_labels(&mut w, &prov, &mesh)?;
        }
        _ => {
            return Err(Error::Validation(
                "--potential and --current must be given together".into(),
            ))
        }
    }
    println!("vtk: {}", out.display());
    Ok(())
}

//! Error metrics and eccentricity sweeps against the analytic reference.

use rayon::prelude::*;

use crate::analytic::{surface_potential, LayeredSphere, SeriesConfig};
use crate::assembly::{assemble_system, SaddleSystem};
use crate::cg_baseline::{self, NodalSystem};
use crate::error::{Error, Result};
use crate::hexmesh::{CompartmentTable, HexMesh};
use crate::solver::{self, SolverConfig};
use crate::sources::{rhs_direct, rhs_projected, Dipole};
use crate::vecops;

/// Forward method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    MixedDirect,
    MixedProjected,
    CgPi,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MixedDirect => "mixed-direct",
            Method::MixedProjected => "mixed-projected",
            Method::CgPi => "cg-pi",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "mixed-direct" => Ok(Method::MixedDirect),
            "mixed-projected" => Ok(Method::MixedProjected),
            "cg-pi" => Ok(Method::CgPi),
            other => Err(Error::Validation(format!("unknown method '{other}'"))),
        }
    }
}

/// One dipole/method comparison against the reference.
#[derive(Debug, Clone)]
pub struct ErrorRecord {
    pub dipole_id: usize,
    pub eccentricity: f64,
    pub method: Method,
    /// Dipole fell outside the innermost compartment of the discretized mesh.
    pub outside: bool,
    pub rdm: f64,
    pub lnmag: f64,
}

/// Box statistics per (method, eccentricity) group.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub method: Method,
    pub eccentricity: f64,
    pub count: usize,
    pub rdm: [f64; 5],
    pub lnmag: [f64; 5],
}

/// Relative difference measure, the scale-invariant topography error in
/// [0, 2]: norm of the difference of the normalized vectors.
pub fn rdm(u_num: &[f64], u_ref: &[f64]) -> Result<f64> {
    assert_eq!(u_num.len(), u_ref.len());
    let nn = vecops::norm2(u_num);
    let nr = vecops::norm2(u_ref);
    if nn == 0.0 || nr == 0.0 {
        return Err(Error::Numerical("rdm undefined for a zero vector".into()));
    }
    let diff: f64 = u_num
        .iter()
        .zip(u_ref)
        .map(|(a, b)| {
            let d = a / nn - b / nr;
            d * d
        })
        .sum();
    Ok(diff.sqrt())
}

/// Log magnitude ratio ln(|u_num| / |u_ref|); antisymmetric in its arguments.
pub fn lnmag(u_num: &[f64], u_ref: &[f64]) -> Result<f64> {
    let nn = vecops::norm2(u_num);
    let nr = vecops::norm2(u_ref);
    if nn == 0.0 || nr == 0.0 {
        return Err(Error::Numerical("lnmag undefined for a zero vector".into()));
    }
    Ok((nn / nr).ln())
}

/// For each evaluation point, the labeled element of the outermost
/// compartment whose center is nearest (the surface-sampling map for
/// element-wise potentials).
pub fn nearest_surface_elements(mesh: &HexMesh, points: &[[f64; 3]]) -> Result<Vec<u32>> {
    let skin_label = *mesh
        .labels()
        .iter()
        .filter(|&&l| l != 0)
        .max()
        .ok_or_else(|| Error::Validation("mesh has no labeled cells".into()))?;
    let candidates: Vec<(u32, [f64; 3])> = (0..mesh.n_elements() as u32)
        .filter(|&e| mesh.element_label(e) == skin_label)
        .map(|e| (e, mesh.element_centroid(e)))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Validation("no cells carry the outermost label".into()));
    }
    Ok(points
        .par_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0u32);
            for &(e, c) in &candidates {
                let d = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2);
                if d < best.0 {
                    best = (d, e);
                }
            }
            best.1
        })
        .collect())
}

/// Everything a sweep needs besides the dipoles themselves.
pub struct SweepContext<'a> {
    pub mesh: &'a HexMesh,
    pub table: &'a CompartmentTable,
    pub model: &'a LayeredSphere,
    pub points: Vec<[f64; 3]>,
    pub sample_elements: Vec<u32>,
    pub solver: SolverConfig,
    pub series: SeriesConfig,
    mixed: Option<SaddleSystem>,
    precond: Option<solver::SchurPrecond>,
    nodal: Option<NodalSystem>,
}

impl<'a> SweepContext<'a> {
    /// Assemble the systems needed by `methods` and build the surface
    /// sampling map.
    pub fn build(
        mesh: &'a HexMesh,
        table: &'a CompartmentTable,
        model: &'a LayeredSphere,
        points: Vec<[f64; 3]>,
        methods: &[Method],
        solver: SolverConfig,
    ) -> Result<Self> {
        let needs_mixed =
            methods.iter().any(|m| matches!(m, Method::MixedDirect | Method::MixedProjected));
        let needs_nodal = methods.contains(&Method::CgPi);
        let mixed = if needs_mixed { Some(assemble_system(mesh, table)?) } else { None };
        let precond = match &mixed {
            Some(sys) => Some(solver::build_preconditioner(
                sys,
                solver.precond,
                solver.diag_approx,
                solver.ssor_sweeps,
            )?),
            None => None,
        };
        let nodal = if needs_nodal { Some(cg_baseline::assemble_stiffness(mesh, table)?) } else { None };
        let sample_elements = nearest_surface_elements(mesh, &points)?;
        Ok(SweepContext {
            mesh,
            table,
            model,
            points,
            sample_elements,
            solver,
            series: SeriesConfig::default(),
            mixed,
            precond,
            nodal,
        })
    }

    pub fn mixed_system(&self) -> Option<&SaddleSystem> {
        self.mixed.as_ref()
    }

    pub fn nodal_system(&self) -> Option<&NodalSystem> {
        self.nodal.as_ref()
    }

    /// The preconditioner built for the mixed system, for callers that want
    /// to run extra solves on the same system without rebuilding it.
    pub fn preconditioner(&self) -> Option<&solver::SchurPrecond> {
        self.precond.as_ref()
    }

    /// Numerical potential samples at the evaluation points for one dipole.
    pub fn solve_sampled(&self, method: Method, dipole: &Dipole) -> Result<Vec<f64>> {
        match method {
            Method::MixedDirect | Method::MixedProjected => {
                let sys = self
                    .mixed
                    .as_ref()
                    .ok_or_else(|| Error::Validation("mixed system not assembled".into()))?;
                let rhs = match method {
                    Method::MixedDirect => rhs_direct(dipole, sys, self.mesh, self.table)?,
                    _ => rhs_projected(dipole, sys, self.mesh)?,
                };
                let precond = self
                    .precond
                    .as_ref()
                    .ok_or_else(|| Error::Validation("preconditioner not built".into()))?;
                let sol = solver::solve_potential_with(sys, &rhs, &self.solver, precond)?;
                Ok(self.sample_elements.iter().map(|&e| sol.u[e as usize]).collect())
            }
            Method::CgPi => {
                let sys = self
                    .nodal
                    .as_ref()
                    .ok_or_else(|| Error::Validation("nodal system not assembled".into()))?;
                let sparse = cg_baseline::rhs_partial_integration(dipole, self.mesh, sys)?;
                let mut load = vec![0.0; sys.k.nrows()];
                for (c, v) in sparse {
                    load[c as usize] = v;
                }
                let u = cg_baseline::solve_nodal(sys, &load, self.solver.outer_tol)?;
                Ok(self
                    .sample_elements
                    .iter()
                    .zip(&self.points)
                    .map(|(&e, &p)| cg_baseline::interpolate(&u, self.mesh, sys, e, p))
                    .collect())
            }
        }
    }
}

fn innermost_label(mesh: &HexMesh) -> u8 {
    mesh.labels().iter().filter(|&&l| l != 0).copied().min().unwrap_or(0)
}

/// Run the full comparison: per dipole and method, solve, sample the outer
/// surface, and compare against the analytic reference under the mean-zero
/// gauge. Solver failures for individual dipoles are reported and skipped.
pub fn run_sweep(
    ctx: &SweepContext,
    methods: &[Method],
    dipoles: &[Dipole],
) -> Result<Vec<ErrorRecord>> {
    let inner_r = ctx.model.inner_radius();
    let brain_label = innermost_label(ctx.mesh);
    let mut records = Vec::new();
    for (id, dipole) in dipoles.iter().enumerate() {
        let p = dipole.position;
        let rel = [
            p[0] - ctx.model.center[0],
            p[1] - ctx.model.center[1],
            p[2] - ctx.model.center[2],
        ];
        let ecc = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt() / inner_r;
        let outside = ctx.mesh.locate(p).map_or(true, |e| ctx.mesh.element_label(e) != brain_label);
        let mut u_ref = surface_potential(ctx.model, dipole, &ctx.points, &ctx.series)?;
        vecops::project_mean_zero(&mut u_ref);
        for &method in methods {
            match ctx.solve_sampled(method, dipole) {
                Ok(mut u_num) => {
                    vecops::project_mean_zero(&mut u_num);
                    records.push(ErrorRecord {
                        dipole_id: id,
                        eccentricity: ecc,
                        method,
                        outside,
                        rdm: rdm(&u_num, &u_ref)?,
                        lnmag: lnmag(&u_num, &u_ref)?,
                    });
                }
                Err(e) => {
                    eprintln!("warning: dipole {id} ({}) skipped: {e}", method.as_str());
                }
            }
        }
    }
    Ok(records)
}

/// R-7 quantile (linear interpolation between order statistics) of sorted
/// data.
fn quantile_r7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn five_number(values: &mut Vec<f64>) -> [f64; 5] {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [
        values[0],
        quantile_r7(values, 0.25),
        quantile_r7(values, 0.5),
        quantile_r7(values, 0.75),
        values[values.len() - 1],
    ]
}

/// Group records by (method, eccentricity) and take five-number summaries
/// of RDM and lnMAG. Eccentricities are grouped to 1e-9 to absorb rounding.
pub fn summarize(records: &[ErrorRecord]) -> Result<Vec<SweepSummary>> {
    if records.is_empty() {
        return Err(Error::Validation("cannot summarize an empty record list".into()));
    }
    let mut groups: Vec<((Method, i64), Vec<&ErrorRecord>)> = Vec::new();
    for r in records {
        let key = (r.method, (r.eccentricity * 1e9).round() as i64);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups.sort_by(|a, b| {
        (a.0 .0.as_str(), a.0 .1).cmp(&(b.0 .0.as_str(), b.0 .1))
    });
    Ok(groups
        .into_iter()
        .map(|((method, _), recs)| {
            let ecc = recs[0].eccentricity;
            let mut rdms: Vec<f64> = recs.iter().map(|r| r.rdm).collect();
            let mut lnmags: Vec<f64> = recs.iter().map(|r| r.lnmag).collect();
            SweepSummary {
                method,
                eccentricity: ecc,
                count: recs.len(),
                rdm: five_number(&mut rdms),
                lnmag: five_number(&mut lnmags),
            }
        })
        .collect())
}

/// Median of a slice (R-7), for quick gate checks.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_r7(&v, 0.5)
}

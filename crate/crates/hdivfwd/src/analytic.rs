//! Quasianalytic dipole potential in a concentric multilayer sphere.
//!
//! Each spherical harmonic order n carries a 2x2 interface recursion for the
//! coefficients of rho^n and rho^-(n+1) (rho = r / R_outer, normalized to
//! avoid overflow at large n), enforcing continuity of u and sigma du/dr with
//! an insulating outer boundary. The dipole enters through its per-order
//! source strengths; radial and tangential moment parts share the recursion
//! and differ only in the angular functions (P_n versus P_n^1).

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Concentric layered sphere: outer radii in mm (increasing, innermost
/// first) with conductivities in S/m.
#[derive(Debug, Clone)]
pub struct LayeredSphere {
    pub radii: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub center: [f64; 3],
}

impl LayeredSphere {
    pub fn new(radii: Vec<f64>, sigmas: Vec<f64>, center: [f64; 3]) -> Result<Self> {
        if radii.is_empty() || radii.len() != sigmas.len() {
            return Err(Error::Validation("radii/sigmas length mismatch".into()));
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("radii must be positive and increasing".into()));
        }
        if sigmas.iter().any(|&s| s <= 0.0) {
            return Err(Error::Validation("conductivities must be positive".into()));
        }
        Ok(LayeredSphere { radii, sigmas, center })
    }

    /// Four-layer head model: brain 78 / CSF 80 / skull 86 / skin 92 mm.
    pub fn standard_four_layer() -> Self {
        LayeredSphere::new(
            vec![78.0, 80.0, 86.0, 92.0],
            vec![0.33, 1.79, 0.01, 0.43],
            [0.0; 3],
        )
        .unwrap()
    }

    pub fn outer_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn inner_radius(&self) -> f64 {
        self.radii[0]
    }
}

/// Series truncation policy.
#[derive(Debug, Clone, Copy)]
pub struct SeriesConfig {
    pub max_terms: usize,
    /// Relative tail tolerance on the accumulated coefficient magnitudes.
    pub tol: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { max_terms: 200, tol: 1e-8 }
    }
}

/// Radial coefficient pair (a, b) of one layer: u_n(rho) = a rho^n
/// + b rho^-(n+1), in normalized radius rho = r / R_outer. The chain is one
/// homogeneous solution satisfying the insulating outer boundary condition;
/// the physical field scales it per source order.
pub fn layer_coefficients(model: &LayeredSphere, n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let nl = model.radii.len();
    let r_out = model.outer_radius();
    let nf = n as f64;
    let mut coeffs = vec![(0.0, 0.0); nl];
    // outermost layer: a (n) rho^(n-1) - b (n+1) rho^-(n+2) = 0 at rho = 1
    coeffs[nl - 1] = (nf + 1.0, nf);
    for l in (0..nl - 1).rev() {
        let rho = model.radii[l] / r_out;
        let (a_up, b_up) = coeffs[l + 1];
        let s = model.sigmas[l + 1] / model.sigmas[l];
        // continuity of u and sigma du/dr, written so that s = 1 passes the
        // pair through unchanged (no cancellation between the rho^n and
        // rho^-(n+1) parts at large n)
        let rho_2n1 = rho.powi(2 * n as i32 + 1);
        let d = 2.0 * nf + 1.0;
        let a = a_up * ((nf + 1.0) + s * nf) / d
            + b_up * (nf + 1.0) * (1.0 - s) / (d * rho_2n1);
        let b = b_up * (nf + s * (nf + 1.0)) / d + a_up * nf * (1.0 - s) * rho_2n1 / d;
        coeffs[l] = (a, b);
    }
    coeffs
}

/// Dipole-aligned frame: e_z along the dipole position, e_x along the
/// tangential moment part. Returns (e_z, e_x, b, m_radial, m_tangential).
fn dipole_frame(model: &LayeredSphere, dipole: &crate::sources::Dipole) -> ([f64; 3], [f64; 3], f64, f64, f64) {
    let p = [
        dipole.position[0] - model.center[0],
        dipole.position[1] - model.center[1],
        dipole.position[2] - model.center[2],
    ];
    let b = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let ez = if b > 1e-12 { [p[0] / b, p[1] / b, p[2] / b] } else { [0.0, 0.0, 1.0] };
    let m = dipole.moment;
    let mr = m[0] * ez[0] + m[1] * ez[1] + m[2] * ez[2];
    let mt_vec = [m[0] - mr * ez[0], m[1] - mr * ez[1], m[2] - mr * ez[2]];
    let mt = (mt_vec[0] * mt_vec[0] + mt_vec[1] * mt_vec[1] + mt_vec[2] * mt_vec[2]).sqrt();
    let ex = if mt > 1e-300 {
        [mt_vec[0] / mt, mt_vec[1] / mt, mt_vec[2] / mt]
    } else {
        // any unit vector orthogonal to ez (tangential part is zero anyway)
        if ez[0].abs() < 0.9 {
            let v = [1.0 - ez[0] * ez[0], -ez[0] * ez[1], -ez[0] * ez[2]];
            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / nv, v[1] / nv, v[2] / nv]
        } else {
            let v = [-ez[1] * ez[0], 1.0 - ez[1] * ez[1], -ez[1] * ez[2]];
            let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / nv, v[1] / nv, v[2] / nv]
        }
    };
    (ez, ex, b, mr, mt)
}

/// Potential at points inside (or on) the sphere for a dipole strictly
/// inside the innermost layer. Points are in the same mm frame as the model.
pub fn surface_potential(
    model: &LayeredSphere,
    dipole: &crate::sources::Dipole,
    points: &[[f64; 3]],
    cfg: &SeriesConfig,
) -> Result<Vec<f64>> {
    assert!(cfg.max_terms >= 1);
    let (ez, ex, b, mr, mt) = dipole_frame(model, dipole);
    if b >= model.inner_radius() {
        return Err(Error::Validation(format!(
            "dipole radius {b} outside the innermost layer ({})",
            model.inner_radius()
        )));
    }
    let r_out = model.outer_radius();
    let beta = b / r_out;
    let sigma1 = model.sigmas[0];
    let nl = model.radii.len();

    // per-order surface amplitudes: chain scaling c = gamma_n / b_1(n)
    // applied to each layer's (a, b) pair; precompute up to truncation
    let mut rad_coeffs: Vec<Vec<(f64, f64)>> = Vec::new(); // per n, per layer, scaled
    let mut tan_coeffs: Vec<Vec<(f64, f64)>> = Vec::new();
    let scale = 1.0 / (4.0 * std::f64::consts::PI * sigma1 * r_out * r_out);
    let mut beta_pow = 1.0; // beta^(n-1)
    let mut acc_mag = 0.0f64;
    for n in 1..=cfg.max_terms {
        let chain = layer_coefficients(model, n);
        let b1 = chain[0].1;
        let gamma_rad = scale * mr * n as f64 * beta_pow;
        let gamma_tan = scale * mt * beta_pow;
        let c_rad = gamma_rad / b1;
        let c_tan = gamma_tan / b1;
        rad_coeffs.push(chain.iter().map(|&(a, bb)| (c_rad * a, c_rad * bb)).collect());
        tan_coeffs.push(chain.iter().map(|&(a, bb)| (c_tan * a, c_tan * bb)).collect());
        // moment-independent truncation indicator (a per-unit-moment surface
        // magnitude bound), so the term count depends only on the geometry
        // and the series stays exactly linear in the moment
        let mag =
            (n as f64 + 1.0) * beta_pow * ((chain[nl - 1].0 + chain[nl - 1].1) / b1).abs();
        acc_mag += mag;
        if acc_mag > 0.0 && mag <= cfg.tol * acc_mag && n >= 10 {
            break;
        }
        beta_pow *= beta;
    }
    let n_terms = rad_coeffs.len();

    let u: Vec<f64> = points
        .par_iter()
        .map(|pt| {
            let q = [
                pt[0] - model.center[0],
                pt[1] - model.center[1],
                pt[2] - model.center[2],
            ];
            let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            let rho = (r / r_out).min(1.0);
            // layer containing the point (points beyond R use the outer layer)
            let layer = model
                .radii
                .iter()
                .position(|&rad| r <= rad + 1e-9 * r_out)
                .unwrap_or(nl - 1);
            let ct = if r > 1e-300 {
                ((q[0] * ez[0] + q[1] * ez[1] + q[2] * ez[2]) / r).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            // sin(theta) cos(phi) without forming angles explicitly
            let st_cp = if r > 1e-300 {
                (q[0] * ex[0] + q[1] * ex[1] + q[2] * ex[2]) / r
            } else {
                0.0
            };
            // Legendre recurrences: P_n(ct) and the derivative P_n'(ct);
            // P_n^1(ct) cos(phi) = P_n'(ct) * sin(theta) cos(phi)
            let mut p_prev = 1.0; // P_0
            let mut p_cur = ct; // P_1
            let mut dp_prev = 0.0; // P_0'
            let mut dp_cur = 1.0; // P_1'
            let mut rho_n = rho; // rho^n
            let rho_m0 = if rho > 0.0 { 1.0 / rho } else { 0.0 };
            let mut rho_m = rho_m0 * rho_m0; // rho^-(n+1)
            let mut acc = 0.0;
            for n in 1..=n_terms {
                let (ar, br) = rad_coeffs[n - 1][layer];
                let (at, bt) = tan_coeffs[n - 1][layer];
                let radial = ar * rho_n + br * rho_m;
                let tang = at * rho_n + bt * rho_m;
                acc += radial * p_cur + tang * dp_cur * st_cp;
                // advance recurrences to order n+1
                let nf = n as f64;
                let p_next = ((2.0 * nf + 1.0) * ct * p_cur - nf * p_prev) / (nf + 1.0);
                let dp_next = dp_prev + (2.0 * nf + 1.0) * p_cur;
                p_prev = p_cur;
                p_cur = p_next;
                dp_prev = dp_cur;
                dp_cur = dp_next;
                rho_n *= rho;
                rho_m *= rho_m0;
            }
            acc
        })
        .collect();
    Ok(u)
}

/// Closed-form surface potential of a dipole in a homogeneous sphere
/// (radius R, conductivity sigma), via generating-function sums of the
/// Legendre series. Independent reference for validating the layered
/// recursion in the uniform-conductivity limit.
pub fn homogeneous_surface_potential(
    radius: f64,
    sigma: f64,
    center: [f64; 3],
    dipole: &crate::sources::Dipole,
    points: &[[f64; 3]],
) -> Result<Vec<f64>> {
    let model = LayeredSphere::new(vec![radius], vec![sigma], center)?;
    let (ez, ex, b, mr, mt) = dipole_frame(&model, dipole);
    if b >= radius {
        return Err(Error::Validation("dipole outside the sphere".into()));
    }
    let beta = b / radius;
    let scale = 1.0 / (4.0 * std::f64::consts::PI * sigma * radius * radius);
    Ok(points
        .iter()
        .map(|pt| {
            let q = [pt[0] - center[0], pt[1] - center[1], pt[2] - center[2]];
            let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            let ct = ((q[0] * ez[0] + q[1] * ez[1] + q[2] * ez[2]) / r).clamp(-1.0, 1.0);
            let st_cp = (q[0] * ex[0] + q[1] * ex[1] + q[2] * ex[2]) / r;
            // d_hat = |surface direction - beta * e_z|
            let d_hat = (1.0 - 2.0 * beta * ct + beta * beta).sqrt();
            if beta < 1e-12 {
                // centered dipole limit: u = 3 m . q_hat / (4 pi sigma R^2)
                return 3.0 * scale * (mr * ct + mt * st_cp);
            }
            let radial =
                mr * scale / beta * (2.0 * beta * (ct - beta) / d_hat.powi(3) + 1.0 / d_hat - 1.0);
            let tang = mt * scale
                * st_cp
                * (2.0 / d_hat.powi(3) + (d_hat + 1.0) / (d_hat * (1.0 - beta * ct + d_hat)));
            radial + tang
        })
        .collect())
}

/// Evenly distributed points on a sphere via the Fibonacci lattice.
pub fn fibonacci_sphere(n: usize, radius: f64, center: [f64; 3]) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [
                center[0] + radius * s * phi.cos(),
                center[1] + radius * s * phi.sin(),
                center[2] + radius * z,
            ]
        })
        .collect()
}

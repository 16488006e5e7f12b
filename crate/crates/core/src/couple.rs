//! Coupling of the inner spectral-element region with the outer boundary
//! integral equation, solution of the joint system and recovery of the
//! physical wave field.

use num_complex::Complex64;

use crate::bsem::{BieRegion, BsemSystem};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::{FluxLayout, SpectralMesh};
use crate::sem::{BoundarySchur, SemSystem};
use crate::waves::{bergmann_inverse, solve_dispersion, velocities, wave_height, Bathymetry, WaveEnvironment};

/// Linear system over `(phi, q)` with the row blocks
/// `[A_I  A_c  -C] [0  H  -G] [corner]`.
///
/// In the reduced form the interior unknowns are eliminated and the
/// columns are `(phi_c, q)`; the full form keeps all SEM nodes.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<Complex64>,
    pub n_phi: usize,
    pub n_flux: usize,
    pub reduced: bool,
}

/// Nodal solution of a coupled run.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    /// Transformed potential at every SEM node.
    pub phi_hat: Vec<Complex64>,
    /// Outward flux unknowns on the loop, in [`FluxLayout`] order.
    pub q: Vec<Complex64>,
    /// Physical potential `phi_hat / sqrt(c c_g)`.
    pub phi: Vec<Complex64>,
    /// Wave height in metres.
    pub height: Vec<f64>,
    /// Wave height over the incident height.
    pub height_norm: Vec<f64>,
    pub incident_height: f64,
    /// `||M z - b|| / ||b||` of the unreduced system.
    pub residual: f64,
}

/// Rows of the corner equations over `(phi_loop, q)`; columns `< n_loop`
/// are loop values, the rest are `n_loop + flux index`.
pub fn corner_equations(mesh: &SpectralMesh, layout: &FluxLayout) -> Vec<Vec<(usize, f64)>> {
    let p = mesh.order();
    let nc = layout.n_loop();
    let ne = mesh.boundary_elements().len();
    let rule = mesh.rule();
    let d_end = rule.lagrange_derivative_all(1.0);
    let d_start = rule.lagrange_derivative_all(-1.0);
    (0..layout.corners().len())
        .map(|c| {
            let j = layout.corners()[c];
            let a = (0..ne).find(|&e| mesh.boundary_loop_index(e, p) == j).expect("incoming element");
            let b = (0..ne).find(|&e| mesh.boundary_loop_index(e, 0) == j).expect("outgoing element");
            let fa = mesh.boundary_frame(a, 1.0);
            let fb = mesh.boundary_frame(b, -1.0);
            let ta = [fa.tangent[0] / fa.jacobian, fa.tangent[1] / fa.jacobian];
            let tb = [fb.tangent[0] / fb.jacobian, fb.tangent[1] / fb.jacobian];
            // grad = M^{-1} (s_a, s_b) with M rows t_a, t_b
            let det = ta[0] * tb[1] - ta[1] * tb[0];
            let inv = [[tb[1] / det, -ta[1] / det], [-tb[0] / det, ta[0] / det]];
            // n . grad = (n^T M^{-1}) (s_a, s_b)
            let coef = |n: [f64; 2]| {
                [
                    n[0] * inv[0][0] + n[1] * inv[1][0],
                    n[0] * inv[0][1] + n[1] * inv[1][1],
                ]
            };
            let (ca, cb) = (coef(fa.normal), coef(fb.normal));
            // (q_a - n_a . grad) - (q_b - n_b . grad)
            let wa = ca[0] - cb[0];
            let wb = ca[1] - cb[1];
            let (qa, qb) = layout.corner_pair(c);
            let mut row = vec![(nc + qa, 1.0), (nc + qb, -1.0)];
            for m in 0..=p {
                row.push((mesh.boundary_loop_index(a, m), -wa * d_end[m] / fa.jacobian));
                row.push((mesh.boundary_loop_index(b, m), -wb * d_start[m] / fb.jacobian));
            }
            row
        })
        .collect()
}

fn check_dims(mesh: &SpectralMesh, layout: &FluxLayout, bsem: &BsemSystem) -> Result<()> {
    let nc = mesh.n_boundary_nodes();
    if layout.n_loop() != nc || bsem.h.rows() != nc || bsem.h.cols() != nc || bsem.g.cols() != layout.n_flux() {
        return Err(Error::Coupling(format!(
            "loop has {nc} nodes, layout {}x{}, H {}x{}, G {}x{}",
            layout.n_loop(),
            layout.n_flux(),
            bsem.h.rows(),
            bsem.h.cols(),
            bsem.g.rows(),
            bsem.g.cols()
        )));
    }
    if bsem.region != BieRegion::Exterior {
        return Err(Error::Coupling("the outer equation must be posed on the exterior".into()));
    }
    Ok(())
}

/// Loop-row boundary weights `C_c` as `(loop row, flux column, weight)`.
fn boundary_weights(mesh: &SpectralMesh, layout: &FluxLayout, sem: &SemSystem) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for e in 0..mesh.boundary_elements().len() {
        for (m, &w) in sem.boundary_weights(e).iter().enumerate() {
            out.push((mesh.boundary_loop_index(e, m), layout.index(e, m), w));
        }
    }
    out
}

/// Reduced system over `(phi_c, q)`.
pub fn assemble_coupled(
    mesh: &SpectralMesh,
    sem: &SemSystem,
    schur: &BoundarySchur,
    bsem: &BsemSystem,
    layout: &FluxLayout,
) -> Result<CoupledSystem> {
    check_dims(mesh, layout, bsem)?;
    let nc = layout.n_loop();
    let nq = layout.n_flux();
    let n = nc + nq;
    let mut m = DenseMatrix::zeros(n, n);
    let s = schur.schur();
    for i in 0..nc {
        for j in 0..nc {
            m[(i, j)] = Complex64::new(s[i * nc + j], 0.0);
        }
    }
    for (i, c, w) in boundary_weights(mesh, layout, sem) {
        m[(i, nc + c)] -= w;
    }
    for i in 0..nc {
        for j in 0..nc {
            m[(nc + i, j)] = bsem.h[(i, j)];
        }
        for c in 0..nq {
            m[(nc + i, nc + c)] = -bsem.g[(i, c)];
        }
    }
    for (r, row) in corner_equations(mesh, layout).into_iter().enumerate() {
        for (c, v) in row {
            m[(2 * nc + r, c)] += v;
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[nc..2 * nc].copy_from_slice(&bsem.phi_in);
    Ok(CoupledSystem {
        matrix: m,
        rhs,
        n_phi: nc,
        n_flux: nq,
        reduced: true,
    })
}

/// Unreduced system over `(phi_all, q)`; dense, for verification on small meshes.
pub fn assemble_full(mesh: &SpectralMesh, sem: &SemSystem, bsem: &BsemSystem, layout: &FluxLayout) -> Result<CoupledSystem> {
    check_dims(mesh, layout, bsem)?;
    let nf = sem.n_nodes();
    let ni = sem.n_interior();
    let nc = layout.n_loop();
    let nq = layout.n_flux();
    let n = nf + nq;
    if nf != ni + nc {
        return Err(Error::Coupling(format!("{nf} nodes but {ni} interior and {nc} on the loop")));
    }
    let mut m = DenseMatrix::zeros(n, n);
    for (i, j, v) in sem.a().triplets() {
        m[(i, j)] += v;
    }
    for (i, c, w) in boundary_weights(mesh, layout, sem) {
        m[(ni + i, nf + c)] -= w;
    }
    for i in 0..nc {
        for j in 0..nc {
            m[(nf + i, ni + j)] = bsem.h[(i, j)];
        }
        for c in 0..nq {
            m[(nf + i, nf + c)] = -bsem.g[(i, c)];
        }
    }
    for (r, row) in corner_equations(mesh, layout).into_iter().enumerate() {
        for (c, v) in row {
            let col = if c < nc { ni + c } else { nf + (c - nc) };
            m[(nf + nc + r, col)] += v;
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    rhs[nf..nf + nc].copy_from_slice(&bsem.phi_in);
    Ok(CoupledSystem {
        matrix: m,
        rhs,
        n_phi: nf,
        n_flux: nq,
        reduced: false,
    })
}

/// Factor and solve; returns nodal `phi_hat` on all SEM nodes and `q`.
pub fn solve_coupled(
    mesh: &SpectralMesh,
    schur: &BoundarySchur,
    system: CoupledSystem,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let CoupledSystem {
        matrix, rhs, n_phi, reduced, ..
    } = system;
    let z = matrix.lu()?.solve(&rhs);
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Internal("non-finite coupled solution".into()));
    }
    let q = z[n_phi..].to_vec();
    let phi = if reduced {
        schur.lift(mesh, &z[..n_phi])
    } else {
        z[..n_phi].to_vec()
    };
    Ok((phi, q))
}

/// `||M z - b|| / ||b||` of the unreduced system, with the sparse SEM block.
pub fn coupled_residual(
    mesh: &SpectralMesh,
    sem: &SemSystem,
    bsem: &BsemSystem,
    layout: &FluxLayout,
    phi: &[Complex64],
    q: &[Complex64],
) -> f64 {
    let ni = sem.n_interior();
    let nc = layout.n_loop();
    let mut r = sem.a().matvec(phi);
    for (i, c, w) in boundary_weights(mesh, layout, sem) {
        r[ni + i] -= q[c] * w;
    }
    let phi_c = &phi[ni..];
    for i in 0..nc {
        let hp: Complex64 = bsem.h.row(i).iter().zip(phi_c).map(|(a, b)| a * b).sum();
        let gq: Complex64 = bsem.g.row(i).iter().zip(q).map(|(a, b)| a * b).sum();
        r.push(hp - gq - bsem.phi_in[i]);
    }
    for row in corner_equations(mesh, layout) {
        let v: Complex64 = row
            .iter()
            .map(|&(c, w)| if c < nc { phi_c[c] * w } else { q[c - nc] * w })
            .sum();
        r.push(v);
    }
    let norm = |v: &[Complex64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let b = norm(&bsem.phi_in);
    norm(&r) / if b > 0.0 { b } else { 1.0 }
}

/// `phi_hat` amplitude of an incident wave of height `height` over `depth`.
pub fn incident_amplitude(env: &WaveEnvironment, depth: f64, height: f64) -> f64 {
    let k = solve_dispersion(env.omega, depth);
    let (c, cg) = velocities(k, depth, env.omega);
    (c * cg).sqrt() * env.gravity() * height / (2.0 * env.omega)
}

/// Bergmann inversion and wave heights at every SEM node.
pub fn recover_fields(
    mesh: &SpectralMesh,
    env: &WaveEnvironment,
    bathymetry: &Bathymetry,
    phi_hat: Vec<Complex64>,
    q: Vec<Complex64>,
    residual: f64,
) -> FieldSolution {
    let upstream = bathymetry.outer_profile().depth_a();
    let k0 = solve_dispersion(env.omega, upstream);
    let (c0, cg0) = velocities(k0, upstream, env.omega);
    let incident_height = wave_height(bergmann_inverse(env.amplitude, c0, cg0), env.omega);
    let phi: Vec<Complex64> = phi_hat
        .iter()
        .zip(mesh.coords())
        .map(|(&v, c)| {
            let h = bathymetry.depth(c[0], c[1]);
            let k = solve_dispersion(env.omega, h);
            let (cp, cg) = velocities(k, h, env.omega);
            bergmann_inverse(v, cp, cg)
        })
        .collect();
    let height: Vec<f64> = phi.iter().map(|&v| wave_height(v, env.omega)).collect();
    let height_norm = height
        .iter()
        .map(|&h| if incident_height > 0.0 { h / incident_height } else { 0.0 })
        .collect();
    FieldSolution {
        phi_hat,
        q,
        phi,
        height,
        height_norm,
        incident_height,
        residual,
    }
}

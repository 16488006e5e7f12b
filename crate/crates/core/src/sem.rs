//! Spectral-element discretization of the transformed Helmholtz equation
//! inside the meshed region: element stiffness, mass and boundary matrices,
//! global assembly of `A = K - M`, and elimination of the interior unknowns
//! onto the boundary loop.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{solve_dense_in_place, BandLu, BandMatrix, CsrMatrix, DenseMatrix};
use crate::mesh::{Side, SpectralMesh};
use crate::specbasis::GaussRule;
use crate::waves::{solve_dispersion, Bathymetry, WaveEnvironment};

/// Quadrature used for the element mass matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassQuadrature {
    /// Nodal LGL quadrature everywhere (diagonal mass).
    #[default]
    Lgl,
    /// Gauss(p+2) on elements where the depth has a kink.
    GaussOnKinks,
}

/// Reference gradients of the nodal basis at the LGL points of a quad.
fn lgl_stiffness(mesh: &SpectralMesh, e: usize) -> Result<Vec<f64>> {
    let rule = mesh.rule();
    let n = rule.len();
    let nn = n * n;
    let d = rule.derivative_matrix();
    let w = rule.weights();
    let nodes = rule.nodes();
    let mut k = vec![0.0; nn * nn];
    let mut ids = Vec::with_capacity(2 * n);
    let mut grads: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for qd in 0..n {
        for qc in 0..n {
            let f = mesh.element_frame(e, nodes[qc], nodes[qd])?;
            let g = f.inverse_transpose();
            let wt = w[qc] * w[qd] * f.det;
            ids.clear();
            grads.clear();
            // basis (a, qd): xi-derivative, plus zeta-derivative when a == qc
            for a in 0..n {
                let rx = d.get(qc, a);
                let rz = if a == qc { d.get(qd, qd) } else { 0.0 };
                ids.push(a + qd * n);
                grads.push([g[0][0] * rx + g[0][1] * rz, g[1][0] * rx + g[1][1] * rz]);
            }
            // basis (qc, b), b != qd: zeta-derivative only
            for b in (0..n).filter(|&b| b != qd) {
                let rz = d.get(qd, b);
                ids.push(qc + b * n);
                grads.push([g[0][1] * rz, g[1][1] * rz]);
            }
            for (i, gi) in ids.iter().zip(&grads) {
                for (j, gj) in ids.iter().zip(&grads) {
                    k[i * nn + j] += wt * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
    }
    Ok(k)
}

/// Quadrature for the element stiffness matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StiffnessRule {
    /// Nodal LGL rule of the element order.
    #[default]
    Lgl,
    /// Gauss rule with the given number of points per direction.
    Gauss(usize),
}

/// `K^e_ij = int grad L_i . grad L_j` over quad `e`.
pub fn element_stiffness(mesh: &SpectralMesh, e: usize, rule: StiffnessRule) -> Result<Vec<f64>> {
    match rule {
        StiffnessRule::Lgl => lgl_stiffness(mesh, e),
        StiffnessRule::Gauss(ng) => element_stiffness_gauss(mesh, e, ng),
    }
}

/// Basis values and reference gradients at Gauss points of order `ng`.
struct GaussTable {
    pts: Vec<(f64, f64, f64)>,
    vals: Vec<Vec<f64>>,
    dxi: Vec<Vec<f64>>,
    dzeta: Vec<Vec<f64>>,
}

fn gauss_table(mesh: &SpectralMesh, ng: usize) -> Result<GaussTable> {
    let rule = mesh.rule();
    let n = rule.len();
    let g = GaussRule::new(ng)?;
    let mut t = GaussTable {
        pts: Vec::new(),
        vals: Vec::new(),
        dxi: Vec::new(),
        dzeta: Vec::new(),
    };
    for (&zeta, &wz) in g.nodes().iter().zip(g.weights()) {
        for (&xi, &wx) in g.nodes().iter().zip(g.weights()) {
            let (lx, lz) = (rule.lagrange_all(xi), rule.lagrange_all(zeta));
            let (dx, dz) = (rule.lagrange_derivative_all(xi), rule.lagrange_derivative_all(zeta));
            let mut v = vec![0.0; n * n];
            let mut gx = vec![0.0; n * n];
            let mut gz = vec![0.0; n * n];
            for b in 0..n {
                for a in 0..n {
                    v[a + b * n] = lx[a] * lz[b];
                    gx[a + b * n] = dx[a] * lz[b];
                    gz[a + b * n] = lx[a] * dz[b];
                }
            }
            t.pts.push((xi, zeta, wx * wz));
            t.vals.push(v);
            t.dxi.push(gx);
            t.dzeta.push(gz);
        }
    }
    Ok(t)
}

/// Stiffness of quad `e` with a Gauss rule of `ng` points per direction.
pub fn element_stiffness_gauss(mesh: &SpectralMesh, e: usize, ng: usize) -> Result<Vec<f64>> {
    let n = mesh.rule().len();
    let nn = n * n;
    let t = gauss_table(mesh, ng)?;
    let mut k = vec![0.0; nn * nn];
    let mut phys = vec![[0.0; 2]; nn];
    for (q, &(xi, zeta, w)) in t.pts.iter().enumerate() {
        let f = mesh.element_frame(e, xi, zeta)?;
        let g = f.inverse_transpose();
        for i in 0..nn {
            let (rx, rz) = (t.dxi[q][i], t.dzeta[q][i]);
            phys[i] = [g[0][0] * rx + g[0][1] * rz, g[1][0] * rx + g[1][1] * rz];
        }
        let wt = w * f.det;
        for i in 0..nn {
            for j in 0..nn {
                k[i * nn + j] += wt * (phys[i][0] * phys[j][0] + phys[i][1] * phys[j][1]);
            }
        }
    }
    Ok(k)
}

/// Diagonal `M^e_ii = khat(x_i)^2 J(x_i) w_i` of quad `e`.
pub fn element_mass(mesh: &SpectralMesh, e: usize, khat: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
    let rule = mesh.rule();
    let n = rule.len();
    let (nodes, w) = (rule.nodes(), rule.weights());
    let mut m = vec![0.0; n * n];
    for b in 0..n {
        for a in 0..n {
            let f = mesh.element_frame(e, nodes[a], nodes[b])?;
            let k = khat(f.point);
            m[a + b * n] = k * k * f.det * w[a] * w[b];
        }
    }
    Ok(m)
}

/// Dense consistent mass of quad `e` with `ng` Gauss points per direction.
pub fn element_mass_gauss(
    mesh: &SpectralMesh,
    e: usize,
    ng: usize,
    khat: impl Fn([f64; 2]) -> f64,
) -> Result<Vec<f64>> {
    let n = mesh.rule().len();
    let nn = n * n;
    let t = gauss_table(mesh, ng)?;
    let mut m = vec![0.0; nn * nn];
    for (q, &(xi, zeta, w)) in t.pts.iter().enumerate() {
        let f = mesh.element_frame(e, xi, zeta)?;
        let k = khat(f.point);
        let wt = w * f.det * k * k;
        let v = &t.vals[q];
        for i in 0..nn {
            for j in 0..nn {
                m[i * nn + j] += wt * v[i] * v[j];
            }
        }
    }
    Ok(m)
}

/// Diagonal `C^e_mm = J(xi_m) w_m` of boundary element `e`.
pub fn element_boundary(mesh: &SpectralMesh, e: usize) -> Vec<f64> {
    let rule = mesh.rule();
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&xi, &w)| mesh.boundary_frame(e, xi).jacobian * w)
        .collect()
}

/// Assembled inner-region operator `A = K - M` (real) with its parts.
#[derive(Debug, Clone)]
pub struct SemSystem {
    n_nodes: usize,
    n_interior: usize,
    khat: Vec<f64>,
    stiffness: CsrMatrix<f64>,
    mass: CsrMatrix<f64>,
    a: CsrMatrix<f64>,
    element_a: Vec<Vec<f64>>,
    boundary_weights: Vec<Vec<f64>>,
}

pub fn assemble_sem(
    mesh: &SpectralMesh,
    env: &WaveEnvironment,
    bathymetry: &Bathymetry,
    quadrature: MassQuadrature,
) -> Result<SemSystem> {
    let omega = env.omega;
    let khat_at = |pt: [f64; 2]| solve_dispersion(omega, bathymetry.depth(pt[0], pt[1]));
    let khat: Vec<f64> = mesh.coords().iter().map(|&c| khat_at(c)).collect();
    let p = mesh.order();
    let nn = (p + 1) * (p + 1);

    let per_element: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..mesh.quads().len())
        .into_par_iter()
        .map(|e| {
            let k = element_stiffness(mesh, e, StiffnessRule::Lgl)?;
            let (x0, x1, y0, y1) = mesh.quad_bounds(e);
            let kinked = bathymetry.nonsmooth_in(x0, x1, y0, y1);
            if quadrature == MassQuadrature::GaussOnKinks && kinked {
                Ok((k, element_mass_gauss(mesh, e, p + 3, khat_at)?, true))
            } else {
                let q = &mesh.quads()[e];
                let m = (0..nn)
                    .map(|i| {
                        let f = mesh.rule();
                        let (a, b) = (i % (p + 1), i / (p + 1));
                        let kk = khat[q[i]];
                        let det = mesh.element_frame(e, f.nodes()[a], f.nodes()[b]).map(|fr| fr.det)?;
                        Ok(kk * kk * det * f.weights()[a] * f.weights()[b])
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((k, m, false))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n = mesh.n_nodes();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    let mut element_a = Vec::with_capacity(per_element.len());
    for (e, (ke, me, dense)) in per_element.into_iter().enumerate() {
        let q = &mesh.quads()[e];
        let mut ae = ke.clone();
        for i in 0..nn {
            for j in 0..nn {
                let v = ke[i * nn + j];
                if v != 0.0 {
                    kt.push((q[i], q[j], v));
                }
            }
        }
        if dense {
            for i in 0..nn {
                for j in 0..nn {
                    let v = me[i * nn + j];
                    ae[i * nn + j] -= v;
                    if v != 0.0 {
                        mt.push((q[i], q[j], v));
                    }
                }
            }
        } else {
            for i in 0..nn {
                ae[i * nn + i] -= me[i];
                mt.push((q[i], q[i], me[i]));
            }
        }
        element_a.push(ae);
    }
    let stiffness = CsrMatrix::from_triplets(n, n, kt.clone());
    let mass = CsrMatrix::from_triplets(n, n, mt.clone());
    let mut at = kt;
    at.extend(mt.into_iter().map(|(i, j, v)| (i, j, -v)));
    let a = CsrMatrix::from_triplets(n, n, at);
    let boundary_weights = (0..mesh.boundary_elements().len())
        .map(|e| element_boundary(mesh, e))
        .collect();
    Ok(SemSystem {
        n_nodes: n,
        n_interior: mesh.n_interior(),
        khat,
        stiffness,
        mass,
        a,
        element_a,
        boundary_weights,
    })
}

impl SemSystem {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Modified wavenumber at every node.
    pub fn khat(&self) -> &[f64] {
        &self.khat
    }

    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix<f64> {
        &self.mass
    }

    /// `A = K - M`.
    pub fn a(&self) -> &CsrMatrix<f64> {
        &self.a
    }

    pub fn element_a(&self, e: usize) -> &[f64] {
        &self.element_a[e]
    }

    /// Diagonal boundary weights of boundary element `e`.
    pub fn boundary_weights(&self, e: usize) -> &[f64] {
        &self.boundary_weights[e]
    }

    /// Whether the assembled mass matrix has only diagonal entries.
    pub fn mass_is_diagonal(&self) -> bool {
        self.mass.triplets().all(|(i, j, _)| i == j)
    }

    /// Coupling matrix `C` (`N_F x N_q`) acting on the flux unknowns.
    pub fn coupling(&self, mesh: &SpectralMesh, layout: &crate::mesh::FluxLayout) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for (e, be) in mesh.boundary_elements().iter().enumerate() {
            for (m, &id) in be.nodes.iter().enumerate() {
                t.push((id, layout.index(e, m), self.boundary_weights[e][m]));
            }
        }
        CsrMatrix::from_triplets(self.n_nodes, layout.n_flux(), t)
    }
}

/// The operator `A` with every unknown off the boundary loop eliminated.
///
/// Element bubbles are condensed first; the remaining interior skeleton is
/// factored as a band matrix ordered along the shorter side of the mesh.
pub struct BoundarySchur {
    n_nodes: usize,
    n_interior: usize,
    n_loop: usize,
    /// Per element: local skeleton ids, local bubble ids, `A_BB^{-1} A_BS`.
    bubbles: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)>,
    skel_pos: Vec<Option<usize>>,
    skel_ids: Vec<usize>,
    /// `A_II^{-1} A_Ic`, row-major `n_skel x n_loop`.
    lift: Vec<f64>,
    /// Dense Schur complement, row-major `n_loop x n_loop`.
    schur: Vec<f64>,
}

impl BoundarySchur {
    pub fn new(mesh: &SpectralMesh, sys: &SemSystem) -> Result<Self> {
        let p = mesh.order();
        let n1 = p + 1;
        let nn = n1 * n1;
        let n_nodes = mesh.n_nodes();
        let n_interior = mesh.n_interior();
        let n_loop = mesh.n_boundary_nodes();
        let is_bubble = |i: usize| {
            let (a, b) = (i % n1, i / n1);
            a > 0 && a < p && b > 0 && b < p
        };
        let local_b: Vec<usize> = (0..nn).filter(|&i| is_bubble(i)).collect();
        let local_s: Vec<usize> = (0..nn).filter(|&i| !is_bubble(i)).collect();

        // element-level condensation
        let condensed: Vec<(Vec<f64>, Vec<f64>)> = (0..mesh.quads().len())
            .into_par_iter()
            .map(|e| {
                let ae = &sys.element_a[e];
                let (nb, ns) = (local_b.len(), local_s.len());
                let mut sc = vec![0.0; ns * ns];
                for (r, &i) in local_s.iter().enumerate() {
                    for (c, &j) in local_s.iter().enumerate() {
                        sc[r * ns + c] = ae[i * nn + j];
                    }
                }
                if nb == 0 {
                    return Ok((sc, Vec::new()));
                }
                let mut abb = vec![0.0; nb * nb];
                for (r, &i) in local_b.iter().enumerate() {
                    for (c, &j) in local_b.iter().enumerate() {
                        abb[r * nb + c] = ae[i * nn + j];
                    }
                }
                let mut f = vec![0.0; nb * ns];
                for (r, &i) in local_b.iter().enumerate() {
                    for (c, &j) in local_s.iter().enumerate() {
                        f[r * ns + c] = ae[i * nn + j];
                    }
                }
                solve_dense_in_place(&mut abb, nb, &mut f, ns)?;
                for (r, &i) in local_s.iter().enumerate() {
                    for (t, &bi) in local_b.iter().enumerate() {
                        let a_sb = ae[i * nn + bi];
                        if a_sb == 0.0 {
                            continue;
                        }
                        for c in 0..ns {
                            sc[r * ns + c] -= a_sb * f[t * ns + c];
                        }
                    }
                }
                Ok((sc, f))
            })
            .collect::<Result<Vec<_>>>()?;

        // skeleton numbering: interior skeleton nodes sorted along the long
        // side, then across, so that the band is narrow
        let mut is_skel = vec![false; n_nodes];
        for q in mesh.quads() {
            for &i in &local_s {
                is_skel[q[i]] = true;
            }
        }
        let d = mesh.domain();
        let across_y = d.height() <= d.width();
        let mut skel_ids: Vec<usize> = (0..n_interior).filter(|&i| is_skel[i]).collect();
        let c = mesh.coords();
        skel_ids.sort_by(|&u, &v| {
            let (a, b) = (c[u], c[v]);
            let (ka, kb) = if across_y { ((a[0], a[1]), (b[0], b[1])) } else { ((a[1], a[0]), (b[1], b[0])) };
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
        });
        let mut skel_pos = vec![None; n_nodes];
        for (k, &id) in skel_ids.iter().enumerate() {
            skel_pos[id] = Some(k);
        }
        let ni = skel_ids.len();

        let mut bw = 0;
        for q in mesh.quads() {
            let pos: Vec<usize> = local_s.iter().filter_map(|&i| skel_pos[q[i]]).collect();
            if let (Some(lo), Some(hi)) = (pos.iter().min(), pos.iter().max()) {
                bw = bw.max(hi - lo);
            }
        }

        let mut band = BandMatrix::<f64>::zeros(ni.max(1), bw, bw);
        let mut a_ic: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_loop];
        let mut schur = vec![0.0; n_loop * n_loop];
        let ns = local_s.len();
        for (e, q) in mesh.quads().iter().enumerate() {
            let sc = &condensed[e].0;
            for (r, &i) in local_s.iter().enumerate() {
                let gi = q[i];
                for (cc, &j) in local_s.iter().enumerate() {
                    let gj = q[j];
                    let v = sc[r * ns + cc];
                    if v == 0.0 {
                        continue;
                    }
                    match (skel_pos[gi], skel_pos[gj]) {
                        (Some(u), Some(w)) => band.add(u, w, v),
                        (Some(u), None) => a_ic[gj - n_interior].push((u, v)),
                        (None, None) => {
                            schur[(gi - n_interior) * n_loop + (gj - n_interior)] += v;
                        }
                        (None, Some(_)) => {}
                    }
                }
            }
        }
        if ni == 0 {
            band.set_identity_row(0);
        }
        let lu: BandLu<f64> = band.lu()?;

        // columns of A_II^{-1} A_Ic
        let cols: Vec<Vec<f64>> = a_ic
            .par_iter()
            .map(|entries| {
                let mut x = vec![0.0; ni.max(1)];
                for &(u, v) in entries {
                    x[u] += v;
                }
                if ni > 0 {
                    lu.solve_in_place(&mut x);
                }
                x
            })
            .collect();
        let mut lift = vec![0.0; ni * n_loop];
        for (j, col) in cols.iter().enumerate() {
            for k in 0..ni {
                lift[k * n_loop + j] = col[k];
            }
        }
        // S = A_cc - A_cI X, with A_cI = A_Ic^T by symmetry
        for (i, entries) in a_ic.iter().enumerate() {
            for &(u, v) in entries {
                let row = &lift[u * n_loop..(u + 1) * n_loop];
                let srow = &mut schur[i * n_loop..(i + 1) * n_loop];
                for (s, x) in srow.iter_mut().zip(row) {
                    *s -= v * x;
                }
            }
        }

        let bubbles = mesh
            .quads()
            .iter()
            .zip(condensed)
            .map(|(_, (_, f))| (local_s.clone(), local_b.clone(), f))
            .collect();
        Ok(Self {
            n_nodes,
            n_interior,
            n_loop,
            bubbles,
            skel_pos,
            skel_ids,
            lift,
            schur,
        })
    }

    pub fn n_loop(&self) -> usize {
        self.n_loop
    }

    /// Dense Schur complement on the loop nodes, row-major.
    pub fn schur(&self) -> &[f64] {
        &self.schur
    }

    /// Extend boundary values to all nodes by solving the homogeneous
    /// interior problem.
    pub fn lift(&self, mesh: &SpectralMesh, boundary: &[Complex64]) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let mut phi = vec![zero; self.n_nodes];
        phi[self.n_interior..].copy_from_slice(boundary);
        for (k, &id) in self.skel_ids.iter().enumerate() {
            let row = &self.lift[k * self.n_loop..(k + 1) * self.n_loop];
            let mut s = zero;
            for (x, b) in row.iter().zip(boundary) {
                s += b * *x;
            }
            phi[id] = -s;
        }
        for (q, (ls, lb, f)) in mesh.quads().iter().zip(&self.bubbles) {
            let ns = ls.len();
            for (t, &bi) in lb.iter().enumerate() {
                let mut s = zero;
                for (c, &si) in ls.iter().enumerate() {
                    s += phi[q[si]] * f[t * ns + c];
                }
                phi[q[bi]] = -s;
            }
        }
        let _ = &self.skel_pos;
        phi
    }
}

/// Boundary condition type on one side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeCondition {
    Dirichlet,
    Neumann,
}

/// Solve `A phi = C q` with Dirichlet or Neumann data from `exact`
/// (value and gradient) on each side. Returns nodal values.
pub fn solve_sem_bvp(
    mesh: &SpectralMesh,
    sys: &SemSystem,
    schur: &BoundarySchur,
    condition: impl Fn(Side) -> EdgeCondition,
    exact: impl Fn([f64; 2]) -> (Complex64, [Complex64; 2]),
) -> Result<Vec<Complex64>> {
    let nc = schur.n_loop();
    let zero = Complex64::new(0.0, 0.0);
    let mut fixed = vec![None; nc];
    let mut load = vec![zero; nc];
    let ne = mesh.boundary_elements().len();
    for e in 0..ne {
        let side = mesh.boundary_elements()[e].side;
        for (m, &xi) in mesh.rule().nodes().iter().enumerate() {
            let j = mesh.boundary_loop_index(e, m);
            let fr = mesh.boundary_frame(e, xi);
            let (v, g) = exact(fr.point);
            match condition(side) {
                EdgeCondition::Dirichlet => fixed[j] = Some(v),
                EdgeCondition::Neumann => {
                    let q = g[0] * fr.normal[0] + g[1] * fr.normal[1];
                    load[j] += q * sys.boundary_weights(e)[m];
                }
            }
        }
    }
    let free: Vec<usize> = (0..nc).filter(|&j| fixed[j].is_none()).collect();
    let s = schur.schur();
    let nf = free.len();
    let mut mat = DenseMatrix::zeros(nf, nf);
    let mut rhs = vec![zero; nf];
    for (r, &i) in free.iter().enumerate() {
        let mut b = load[i];
        for j in 0..nc {
            let v = s[i * nc + j];
            if let Some(fj) = fixed[j] {
                b -= fj * v;
            }
        }
        rhs[r] = b;
        for (c, &j) in free.iter().enumerate() {
            mat[(r, c)] = Complex64::new(s[i * nc + j], 0.0);
        }
    }
    let sol = if nf > 0 { mat.lu()?.solve(&rhs) } else { Vec::new() };
    let mut boundary: Vec<Complex64> = fixed.iter().map(|f| f.unwrap_or(zero)).collect();
    for (r, &i) in free.iter().enumerate() {
        boundary[i] = sol[r];
    }
    if boundary.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Internal("non-finite boundary solution".into()));
    }
    Ok(schur.lift(mesh, &boundary))
}

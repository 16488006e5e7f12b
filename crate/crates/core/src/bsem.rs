//! Spectral boundary elements: collocation of the boundary integral equation
//! on the loop that closes the inner region, with regular, near-singular and
//! log-singular element integrals.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greens::{greens_constant, DiffRow, GreensEvaluation, IncidentField, KernelCache, SourceKernel, EULER_GAMMA};
use crate::linalg::{DenseMatrix, Scalar};
use crate::mesh::{FluxLayout, Side, SpectralMesh};
use crate::specbasis::GaussRule;

/// Side of the loop on which the integral equation is posed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BieRegion {
    /// The bounded region enclosed by the loop.
    Interior,
    /// The unbounded region outside the loop, with an incident wave.
    Exterior,
}

/// Fundamental solution used in the outer region.
#[derive(Clone, Copy)]
pub enum BoundaryKernel<'a> {
    Constant { k: f64 },
    Variable(&'a KernelCache),
}

/// Quadrature controls for element integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsemOptions {
    /// Gauss points per panel on near and singular elements.
    pub gauss_points: usize,
    /// Distance, in element lengths, beyond which the nodal LGL rule may be used.
    pub far_ratio: f64,
    /// Distance, in element lengths, below which panels are refined toward the point.
    pub near_ratio: f64,
    /// Use the nodal LGL rule on far elements when its error estimate allows.
    pub lgl_far_field: bool,
    /// Geometric ratio of the panels that grade toward a singular node.
    pub grading: f64,
    /// Number of graded panels on each side of a singular node.
    pub levels: usize,
}

impl Default for BsemOptions {
    fn default() -> Self {
        Self {
            gauss_points: 16,
            far_ratio: 2.0,
            near_ratio: 0.5,
            lgl_far_field: true,
            grading: 0.15,
            levels: 14,
        }
    }
}

/// Collocated boundary integral equation `H phi = G q + phi_in`.
#[derive(Debug, Clone)]
pub struct BsemSystem {
    pub region: BieRegion,
    /// `N_c x N_c`, columns are loop nodes.
    pub h: DenseMatrix,
    /// `N_c x N_q`, columns are flux unknowns of the [`FluxLayout`].
    pub g: DenseMatrix,
    pub phi_in: Vec<Complex64>,
    pub free_term: Vec<f64>,
}

/// `C = theta / 2 pi` for the angle `theta` subtended by the region.
pub fn free_term(theta: f64) -> f64 {
    theta / (2.0 * PI)
}

/// Angle of the inner region at loop node `j`.
pub fn interior_angle(mesh: &SpectralMesh, j: usize) -> f64 {
    let (incoming, outgoing) = loop_neighbours(mesh, j);
    match (incoming, outgoing) {
        (Some(a), Some(b)) => {
            let t1 = mesh.boundary_frame(a, 1.0).tangent;
            let t2 = mesh.boundary_frame(b, -1.0).tangent;
            let turn = (t1[0] * t2[1] - t1[1] * t2[0]).atan2(t1[0] * t2[0] + t1[1] * t2[1]);
            PI - turn
        }
        _ => PI,
    }
}

/// Free term at loop node `j` for the chosen region.
pub fn loop_free_term(mesh: &SpectralMesh, j: usize, region: BieRegion) -> f64 {
    let theta = interior_angle(mesh, j);
    match region {
        BieRegion::Interior => free_term(theta),
        BieRegion::Exterior => free_term(2.0 * PI - theta),
    }
}

/// Elements ending and starting at loop node `j`, if it is an element junction.
fn loop_neighbours(mesh: &SpectralMesh, j: usize) -> (Option<usize>, Option<usize>) {
    let p = mesh.order();
    let mut inc = None;
    let mut out = None;
    for e in 0..mesh.boundary_elements().len() {
        if mesh.boundary_loop_index(e, p) == j {
            inc = Some(e);
        }
        if mesh.boundary_loop_index(e, 0) == j {
            out = Some(e);
        }
    }
    (inc, out)
}

/// Closed form of `int_{-1}^{1} (T0 + T1 ln|xi - xi'|) dxi`.
pub fn singular_analytic(t0: Complex64, t1: Complex64, xi_src: f64) -> Complex64 {
    let xlogx = |r: f64| if r > 0.0 { r * r.ln() } else { 0.0 };
    let rm = (-1.0 - xi_src).abs();
    let rp = (1.0 - xi_src).abs();
    t0 * 2.0 + t1 * (xlogx(rm) + xlogx(rp) - 2.0)
}

/// Coefficients `(T0, T1)` of the logarithmic part of the kernel at a node
/// with basis value `l0`, jacobian `j0` and local stretch `a`.
pub fn singular_coefficients(k: f64, a: f64, l0: f64, j0: f64) -> (Complex64, Complex64) {
    let p0 = -(EULER_GAMMA + (k * a / 2.0).ln()) / (2.0 * PI);
    let p1 = -1.0 / (2.0 * PI);
    (Complex64::new(p0 * l0 * j0, 0.0), Complex64::new(p1 * l0 * j0, 0.0))
}

/// Panels of `[-1, 1]` graded geometrically toward `xi_src`, none wider
/// than `max_width`.
fn graded_panels(xi_src: f64, ratio: f64, levels: usize, max_width: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (len, dir) in [(1.0 + xi_src, -1.0), (1.0 - xi_src, 1.0)] {
        if len <= 1e-14 {
            continue;
        }
        let mut outer = 1.0;
        for _ in 0..levels {
            if len * outer < 1e-9 {
                break;
            }
            let inner = outer * ratio;
            let (a, b) = (xi_src + dir * len * inner, xi_src + dir * len * outer);
            out.push(if a < b { (a, b) } else { (b, a) });
            outer = inner;
        }
        let (a, b) = (xi_src, xi_src + dir * len * outer);
        out.push(if a < b { (a, b) } else { (b, a) });
    }
    let mut out: Vec<(f64, f64)> = out
        .into_iter()
        .flat_map(|(a, b)| {
            let parts = ((b - a) / max_width).ceil().max(1.0) as usize;
            let h = (b - a) / parts as f64;
            (0..parts).map(move |i| (a + i as f64 * h, if i + 1 == parts { b } else { a + (i + 1) as f64 * h }))
        })
        .collect();
    out.sort_by(|u, v| u.0.total_cmp(&v.0));
    out
}

/// Widest singular panel, in local coordinates, for a phase change of 4 rad
/// across it.
fn singular_width(mesh: &SpectralMesh, e: usize, k: f64) -> f64 {
    let pa = mesh.boundary_frame(e, -1.0).point;
    let pb = mesh.boundary_frame(e, 1.0).point;
    let kl = k * (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
    if kl > 0.0 {
        8.0 / kl
    } else {
        2.0
    }
}

/// Bisect `[-1, 1]` until every panel is no longer than its distance to `x`.
fn near_panels(mesh: &SpectralMesh, e: usize, x: [f64; 2]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![(-1.0, 1.0, 0usize)];
    while let Some((a, b, depth)) = stack.pop() {
        let pa = mesh.boundary_frame(e, a).point;
        let pb = mesh.boundary_frame(e, b).point;
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let d = segment_distance(x, pa, pb);
        if d >= len || depth >= 50 {
            out.push((a, b));
        } else {
            let m = 0.5 * (a + b);
            stack.push((m, b, depth + 1));
            stack.push((a, m, depth + 1));
        }
    }
    out.sort_by(|u, v| u.0.total_cmp(&v.0));
    out
}

fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x[0] - a[0] - t * d[0]).hypot(x[1] - a[1] - t * d[1])
}

/// Gauss points needed for a smooth kernel over an element spanning
/// `k L` radians at relative distance `ratio`.
fn regular_points(kl: f64, ratio: f64) -> usize {
    let a = 1.0 + 2.0 * ratio;
    let rho = a + (a * a - 1.0).sqrt();
    let geometric = (12.0 * std::f64::consts::LN_10 / (2.0 * rho.ln())).ceil() as usize;
    geometric.max((0.5 * kl).ceil() as usize + 10)
}

/// How one element is integrated for one collocation point.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementRule {
    /// Nodal LGL rule, a single kernel evaluation per basis function.
    Lgl,
    /// Gauss points on the listed panels.
    Panels(Vec<(f64, f64)>, usize),
    /// Collocation node `m` lies on the element: graded panels plus the
    /// analytic logarithmic part.
    Singular(usize, Vec<(f64, f64)>, usize),
}

/// Quadrature choice for element `e` and collocation loop node `j`.
pub fn element_rule(mesh: &SpectralMesh, e: usize, j: usize, k: f64, opts: &BsemOptions) -> ElementRule {
    let p = mesh.order();
    let n = opts.gauss_points.max(p + 2);
    if let Some(m) = (0..=p).find(|&m| mesh.boundary_loop_index(e, m) == j) {
        let xi = mesh.rule().nodes()[m];
        return ElementRule::Singular(m, graded_panels(xi, opts.grading, opts.levels, singular_width(mesh, e, k)), n);
    }
    let x = loop_point(mesh, j);
    let pa = mesh.boundary_frame(e, -1.0).point;
    let pb = mesh.boundary_frame(e, 1.0).point;
    let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
    let d = segment_distance(x, pa, pb);
    if d < opts.near_ratio * len {
        return ElementRule::Panels(near_panels(mesh, e, x), n);
    }
    let need = regular_points(k * len, d / len);
    if opts.lgl_far_field && d > opts.far_ratio * len && p >= need {
        ElementRule::Lgl
    } else {
        ElementRule::Panels(vec![(-1.0, 1.0)], need.max(p + 2))
    }
}

fn loop_point(mesh: &SpectralMesh, j: usize) -> [f64; 2] {
    for (e, be) in mesh.boundary_elements().iter().enumerate() {
        for (m, &id) in be.nodes.iter().enumerate() {
            if mesh.boundary_loop_index(e, m) == j {
                return mesh.coords()[id];
            }
        }
    }
    unreachable!("loop index {j} out of range")
}

/// Kernel evaluator for one source point.
trait SourceEval: Sync {
    fn eval(&self, x: [f64; 2]) -> Result<GreensEvaluation>;
    /// Wavenumber of the logarithmic part at the source.
    fn k_log(&self) -> f64;
}

struct ConstantSource {
    k: f64,
    src: [f64; 2],
}

impl SourceEval for ConstantSource {
    fn eval(&self, x: [f64; 2]) -> Result<GreensEvaluation> {
        greens_constant(x, self.src, self.k)
    }

    fn k_log(&self) -> f64 {
        self.k
    }
}

struct VariableSource<'a> {
    kernel: &'a SourceKernel,
    rows: &'a HashMap<u64, DiffRow>,
    y_src: f64,
}

impl SourceEval for VariableSource<'_> {
    fn eval(&self, x: [f64; 2]) -> Result<GreensEvaluation> {
        let row = self
            .rows
            .get(&x[0].to_bits())
            .ok_or_else(|| Error::Internal(format!("missing kernel row at x = {x:?}", x = x[0])))?;
        self.kernel.eval(row, x, self.y_src)
    }

    fn k_log(&self) -> f64 {
        self.kernel.k_ref()
    }
}

/// Quadrature points `(xi, w)` of a panel list.
fn panel_points<'a>(panels: &'a [(f64, f64)], g: &'a GaussRule) -> impl Iterator<Item = (f64, f64)> + 'a {
    panels.iter().flat_map(move |&(a, b)| {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        g.nodes().iter().zip(g.weights()).map(move |(&t, &w)| (c + h * t, h * w))
    })
}

/// Field points visited by the rule, used to precompute kernel rows.
fn rule_points(mesh: &SpectralMesh, e: usize, rule: &ElementRule, gauss: &GaussCache) -> Vec<[f64; 2]> {
    match rule {
        ElementRule::Lgl => mesh.rule().nodes().iter().map(|&xi| mesh.boundary_frame(e, xi).point).collect(),
        ElementRule::Panels(panels, n) | ElementRule::Singular(_, panels, n) => panel_points(panels, gauss.get(*n))
            .map(|(xi, _)| mesh.boundary_frame(e, xi).point)
            .collect(),
    }
}

struct GaussCache(HashMap<usize, GaussRule>);

impl GaussCache {
    fn new(ns: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut m = HashMap::new();
        for n in ns {
            if let std::collections::hash_map::Entry::Vacant(v) = m.entry(n) {
                v.insert(GaussRule::new(n)?);
            }
        }
        Ok(Self(m))
    }

    fn get(&self, n: usize) -> &GaussRule {
        &self.0[&n]
    }
}

/// Row contributions `(int psi L_m J, int dpsi/dn L_m J)` of one element.
fn integrate_element(
    mesh: &SpectralMesh,
    e: usize,
    rule: &ElementRule,
    src: &dyn SourceEval,
    gauss: &GaussCache,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let np = mesh.order() + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut g = vec![zero; np];
    let mut h = vec![zero; np];
    match rule {
        ElementRule::Lgl => {
            let r = mesh.rule();
            for m in 0..np {
                let f = mesh.boundary_frame(e, r.nodes()[m]);
                let k = src.eval(f.point)?;
                let wj = r.weights()[m] * f.jacobian;
                g[m] = k.psi * wj;
                h[m] = k.normal_derivative(f.normal) * wj;
            }
        }
        ElementRule::Panels(panels, n) => {
            for (xi, w) in panel_points(panels, gauss.get(*n)) {
                let f = mesh.boundary_frame(e, xi);
                let k = src.eval(f.point)?;
                let l = mesh.rule().lagrange_all(xi);
                let (kg, kh) = (k.psi * (w * f.jacobian), k.normal_derivative(f.normal) * (w * f.jacobian));
                for m in 0..np {
                    g[m] += kg * l[m];
                    h[m] += kh * l[m];
                }
            }
        }
        ElementRule::Singular(ms, panels, n) => {
            let xs = mesh.rule().nodes()[*ms];
            let f0 = mesh.boundary_frame(e, xs);
            let (t0, t1) = singular_coefficients(src.k_log(), f0.jacobian, 1.0, f0.jacobian);
            for (xi, w) in panel_points(panels, gauss.get(*n)) {
                let f = mesh.boundary_frame(e, xi);
                let k = src.eval(f.point)?;
                let l = mesh.rule().lagrange_all(xi);
                let (kg, kh) = (k.psi * (w * f.jacobian), k.normal_derivative(f.normal) * (w * f.jacobian));
                for m in 0..np {
                    g[m] += kg * l[m];
                    h[m] += kh * l[m];
                }
                g[*ms] -= (t0 + t1 * (xi - xs).abs().ln()) * w;
            }
            g[*ms] += singular_analytic(t0, t1, xs);
        }
    }
    Ok((g, h))
}

/// Regularized `int psi L_m J dxi` over boundary element `e` for the
/// constant-depth kernel, with the source at local node `m_src` of `e`.
pub fn integrate_singular(mesh: &SpectralMesh, e: usize, m_src: usize, k: f64, opts: &BsemOptions) -> Result<Vec<Complex64>> {
    let p = mesh.order();
    let n = opts.gauss_points.max(p + 2);
    let xs = mesh.rule().nodes()[m_src];
    let rule = ElementRule::Singular(m_src, graded_panels(xs, opts.grading, opts.levels, singular_width(mesh, e, k)), n);
    let src = ConstantSource {
        k,
        src: mesh.boundary_frame(e, xs).point,
    };
    let gauss = GaussCache::new([n])?;
    Ok(integrate_element(mesh, e, &rule, &src, &gauss)?.0)
}

/// `(int psi L_m J, int dpsi/dn L_m J)` over element `e` for a source at `x`
/// off the element, with the constant-depth kernel.
pub fn integrate_regular(
    mesh: &SpectralMesh,
    e: usize,
    x: [f64; 2],
    k: f64,
    rule: &ElementRule,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let ns: Vec<usize> = match rule {
        ElementRule::Lgl => vec![],
        ElementRule::Panels(_, n) | ElementRule::Singular(_, _, n) => vec![*n],
    };
    let gauss = GaussCache::new(ns)?;
    integrate_element(mesh, e, rule, &ConstantSource { k, src: x }, &gauss)
}

/// Assemble `H` and `G` on the boundary loop of `mesh`.
pub fn assemble_bsem(
    mesh: &SpectralMesh,
    layout: &FluxLayout,
    kernel: BoundaryKernel<'_>,
    region: BieRegion,
    incident: Option<&IncidentField>,
    opts: &BsemOptions,
) -> Result<BsemSystem> {
    let nc = mesh.n_boundary_nodes();
    let nq = layout.n_flux();
    let ne = mesh.boundary_elements().len();
    let points: Vec<[f64; 2]> = (0..nc).map(|j| loop_point(mesh, j)).collect();
    let k_scale = match kernel {
        BoundaryKernel::Constant { k } => k,
        BoundaryKernel::Variable(c) => c.line().k_max(),
    };
    let rules: Vec<Vec<ElementRule>> = (0..nc)
        .into_par_iter()
        .map(|j| (0..ne).map(|e| element_rule(mesh, e, j, k_scale, opts)).collect())
        .collect();
    let mut ns: HashSet<usize> = HashSet::new();
    for r in rules.iter().flatten() {
        if let ElementRule::Panels(_, n) | ElementRule::Singular(_, _, n) = r {
            ns.insert(*n);
        }
    }
    let gauss = GaussCache::new(ns)?;

    let row = |j: usize, src: &dyn SourceEval| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let zero = Complex64::new(0.0, 0.0);
        let mut grow = vec![zero; nq];
        let mut hrow = vec![zero; nc];
        for e in 0..ne {
            let (g, h) = integrate_element(mesh, e, &rules[j][e], src, &gauss)?;
            for m in 0..g.len() {
                grow[layout.index(e, m)] += g[m];
                hrow[mesh.boundary_loop_index(e, m)] += h[m];
            }
        }
        Ok((grow, hrow))
    };

    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = match kernel {
        BoundaryKernel::Constant { k } => (0..nc)
            .into_par_iter()
            .map(|j| row(j, &ConstantSource { k, src: points[j] }))
            .collect::<Result<_>>()?,
        BoundaryKernel::Variable(cache) => {
            let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
            let mut by_x: HashMap<u64, usize> = HashMap::new();
            for (j, pt) in points.iter().enumerate() {
                let g = *by_x.entry(pt[0].to_bits()).or_insert_with(|| {
                    groups.push((pt[0], Vec::new()));
                    groups.len() - 1
                });
                groups[g].1.push(j);
            }
            let mut out: Vec<Option<(Vec<Complex64>, Vec<Complex64>)>> = vec![None; nc];
            for (x_src, members) in &groups {
                let source = cache.build_source(*x_src)?;
                let mut xs: Vec<f64> = Vec::new();
                let mut seen = HashSet::new();
                for &j in members {
                    for e in 0..ne {
                        for pt in rule_points(mesh, e, &rules[j][e], &gauss) {
                            if seen.insert(pt[0].to_bits()) {
                                xs.push(pt[0]);
                            }
                        }
                    }
                }
                let row_list = source.rows(&xs);
                let table: HashMap<u64, DiffRow> =
                    xs.iter().map(|x| x.to_bits()).zip(row_list).collect();
                let done: Vec<(usize, (Vec<Complex64>, Vec<Complex64>))> = members
                    .par_iter()
                    .map(|&j| {
                        let src = VariableSource {
                            kernel: &source,
                            rows: &table,
                            y_src: points[j][1],
                        };
                        row(j, &src).map(|r| (j, r))
                    })
                    .collect::<Result<_>>()?;
                for (j, r) in done {
                    out[j] = Some(r);
                }
            }
            out.into_iter()
                .map(|r| r.ok_or_else(|| Error::Internal("missing collocation row".into())))
                .collect::<Result<_>>()?
        }
    };

    let sign = match region {
        BieRegion::Interior => 1.0,
        BieRegion::Exterior => -1.0,
    };
    let free: Vec<f64> = (0..nc).map(|j| loop_free_term(mesh, j, region)).collect();
    let mut h = DenseMatrix::zeros(nc, nc);
    let mut g = DenseMatrix::zeros(nc, nq);
    for (j, (grow, hrow)) in rows.into_iter().enumerate() {
        for (c, v) in hrow.into_iter().enumerate() {
            h[(j, c)] = v * sign;
        }
        h[(j, j)] += free[j];
        for (c, v) in grow.into_iter().enumerate() {
            g[(j, c)] = v * sign;
        }
    }
    let phi_in = match (region, incident) {
        (BieRegion::Exterior, Some(inc)) => points.iter().map(|&p| inc.eval(p).0).collect(),
        _ => vec![Complex64::zero(); nc],
    };
    Ok(BsemSystem {
        region,
        h,
        g,
        phi_in,
        free_term: free,
    })
}

/// Boundary condition of one side for the standalone boundary problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryData {
    Dirichlet,
    Neumann,
}

/// Loop values and fluxes of a standalone boundary problem.
#[derive(Debug, Clone)]
pub struct BoundarySolution {
    pub phi: Vec<Complex64>,
    pub q: Vec<Complex64>,
}

/// Solve `H phi = G q + phi_in` with `phi` prescribed on Dirichlet sides and
/// `q` on Neumann sides, both taken from `exact` (value and gradient).
pub fn solve_bsem_bvp(
    mesh: &SpectralMesh,
    layout: &FluxLayout,
    sys: &BsemSystem,
    condition: impl Fn(Side) -> BoundaryData,
    exact: impl Fn([f64; 2]) -> (Complex64, [Complex64; 2]),
) -> Result<BoundarySolution> {
    let nc = mesh.n_boundary_nodes();
    let nq = layout.n_flux();
    let zero = Complex64::new(0.0, 0.0);
    let mut phi: Vec<Option<Complex64>> = vec![None; nc];
    let mut q: Vec<Option<Complex64>> = vec![None; nq];
    let mut phi_exact = vec![zero; nc];
    for (e, be) in mesh.boundary_elements().iter().enumerate() {
        for (m, &xi) in mesh.rule().nodes().iter().enumerate() {
            let j = mesh.boundary_loop_index(e, m);
            let f = mesh.boundary_frame(e, xi);
            let (v, grad) = exact(f.point);
            phi_exact[j] = v;
            match condition(be.side) {
                BoundaryData::Dirichlet => phi[j] = Some(v),
                BoundaryData::Neumann => {
                    q[layout.index(e, m)] = Some(grad[0] * f.normal[0] + grad[1] * f.normal[1]);
                }
            }
        }
    }
    // unknown columns: phi where not prescribed, q where not prescribed
    let mut cols: Vec<(bool, usize)> = Vec::new();
    cols.extend((0..nc).filter(|&j| phi[j].is_none()).map(|j| (true, j)));
    cols.extend((0..nq).filter(|&c| q[c].is_none()).map(|c| (false, c)));
    if cols.len() != nc {
        return Err(Error::Coupling(format!(
            "{} unknowns for {nc} collocation equations",
            cols.len()
        )));
    }
    let mut a = DenseMatrix::zeros(nc, nc);
    let mut b = sys.phi_in.clone();
    for i in 0..nc {
        for (c, &(is_phi, idx)) in cols.iter().enumerate() {
            a[(i, c)] = if is_phi { sys.h[(i, idx)] } else { -sys.g[(i, idx)] };
        }
        for j in 0..nc {
            if let Some(v) = phi[j] {
                b[i] -= sys.h[(i, j)] * v;
            }
        }
        for c in 0..nq {
            if let Some(v) = q[c] {
                b[i] += sys.g[(i, c)] * v;
            }
        }
    }
    let x = a.lu()?.solve(&b);
    for (&(is_phi, idx), v) in cols.iter().zip(x) {
        if is_phi {
            phi[idx] = Some(v);
        } else {
            q[idx] = Some(v);
        }
    }
    Ok(BoundarySolution {
        phi: phi.into_iter().map(|v| v.unwrap_or(zero)).collect(),
        q: q.into_iter().map(|v| v.unwrap_or(zero)).collect(),
    })
}

/// Exact loop values and fluxes of a field, in the layout of [`BoundarySolution`].
pub fn boundary_trace_of(
    mesh: &SpectralMesh,
    layout: &FluxLayout,
    exact: impl Fn([f64; 2]) -> (Complex64, [Complex64; 2]),
) -> BoundarySolution {
    let zero = Complex64::new(0.0, 0.0);
    let mut phi = vec![zero; mesh.n_boundary_nodes()];
    let mut q = vec![zero; layout.n_flux()];
    for e in 0..mesh.boundary_elements().len() {
        for (m, &xi) in mesh.rule().nodes().iter().enumerate() {
            let f = mesh.boundary_frame(e, xi);
            let (v, g) = exact(f.point);
            phi[mesh.boundary_loop_index(e, m)] = v;
            q[layout.index(e, m)] = g[0] * f.normal[0] + g[1] * f.normal[1];
        }
    }
    BoundarySolution { phi, q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rectangle;

    fn plane(k: f64, th: f64) -> impl Fn([f64; 2]) -> (Complex64, [Complex64; 2]) {
        move |p: [f64; 2]| {
            let v = Complex64::from_polar(1.0, k * (th.cos() * p[0] + th.sin() * p[1]));
            let iu = Complex64::i();
            (v, [iu * k * th.cos() * v, iu * k * th.sin() * v])
        }
    }

    #[test]
    fn analytic_part_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert!(singular_analytic(one, one, 0.0).norm() < 1e-15);
        let v = singular_analytic(one, one, 0.5);
        let expect = 2.0 + 1.5 * 1.5f64.ln() + 0.5 * 0.5f64.ln() - 2.0;
        assert!((v.re - expect).abs() < 1e-15);
        assert!((v.re - 0.26162).abs() < 1e-5);
    }

    #[test]
    fn free_terms() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 2, 1, 3).unwrap();
        let layout = FluxLayout::new(&m);
        for j in 0..m.n_boundary_nodes() {
            let c = loop_free_term(&m, j, BieRegion::Interior);
            let e = loop_free_term(&m, j, BieRegion::Exterior);
            if layout.corners().contains(&j) {
                assert!((c - 0.25).abs() < 1e-14 && (e - 0.75).abs() < 1e-14);
            } else {
                assert!((c - 0.5).abs() < 1e-14 && (e - 0.5).abs() < 1e-14);
            }
        }
        assert!((free_term(PI) - 0.5).abs() < 1e-15);
        assert!((free_term(1.5 * PI) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn lgl_weight_identity() {
        // int L_m dxi = w_m, with a constant integrand
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 2.0), 1, 1, 5).unwrap();
        let gauss = GaussCache::new([16]).unwrap();
        struct One;
        impl SourceEval for One {
            fn eval(&self, _: [f64; 2]) -> Result<GreensEvaluation> {
                let z = Complex64::new(0.0, 0.0);
                Ok(GreensEvaluation { psi: Complex64::new(1.0, 0.0), grad: [z, z] })
            }
            fn k_log(&self) -> f64 {
                1.0
            }
        }
        let (g, _) = integrate_element(&m, 0, &ElementRule::Panels(vec![(-1.0, 1.0)], 16), &One, &gauss).unwrap();
        for (v, w) in g.iter().zip(m.rule().weights()) {
            // jacobian of a side of length 2 is 1
            assert!((v.re - w).abs() < 1e-14);
        }
    }

    #[test]
    fn far_field_lgl_matches_gauss() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 10, 5, 12).unwrap();
        let opts = BsemOptions::default();
        let k = 15.0;
        let j = m.boundary_loop_index(m.boundary_elements().len() / 2, 3);
        let src = loop_point(&m, j);
        let mut tested = 0;
        for e in 0..m.boundary_elements().len() {
            if element_rule(&m, e, j, k, &opts) == ElementRule::Lgl {
                let a = integrate_regular(&m, e, src, k, &ElementRule::Lgl).unwrap();
                let b = integrate_regular(&m, e, src, k, &ElementRule::Panels(vec![(-1.0, 1.0)], 32)).unwrap();
                for (u, v) in a.0.iter().zip(&b.0).chain(a.1.iter().zip(&b.1)) {
                    assert!((u - v).norm() < 1e-9, "{e}: {}", (u - v).norm());
                }
                tested += 1;
            }
        }
        assert!(tested > 5, "{tested}");
    }

    #[test]
    fn singular_entry_is_stable() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 3, 2, 7).unwrap();
        for ms in 0..=7 {
            let base = BsemOptions::default();
            let a = integrate_singular(&m, 1, ms, 15.0, &BsemOptions { gauss_points: 32, ..base }).unwrap();
            let b = integrate_singular(&m, 1, ms, 15.0, &BsemOptions { gauss_points: 48, grading: 0.1, levels: 20, ..base }).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn laplace_limit_row_sums() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 4, 2, 6).unwrap();
        let layout = FluxLayout::new(&m);
        let sys = assemble_bsem(
            &m,
            &layout,
            BoundaryKernel::Constant { k: 1e-6 },
            BieRegion::Interior,
            None,
            &BsemOptions::default(),
        )
        .unwrap();
        for i in 0..m.n_boundary_nodes() {
            let s: Complex64 = sys.h.row(i).iter().sum();
            assert!(s.norm() < 1e-3, "{i}: {s}");
        }
    }

    #[test]
    fn standalone_plane_wave() {
        let k = 6.0;
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 4, 2, 8).unwrap();
        let layout = FluxLayout::new(&m);
        let sys = assemble_bsem(
            &m,
            &layout,
            BoundaryKernel::Constant { k },
            BieRegion::Interior,
            None,
            &BsemOptions::default(),
        )
        .unwrap();
        let exact = plane(k, 0.4);
        let cond = |s: Side| match s {
            Side::Left | Side::Right => BoundaryData::Dirichlet,
            _ => BoundaryData::Neumann,
        };
        let sol = solve_bsem_bvp(&m, &layout, &sys, cond, &exact).unwrap();
        let tr = boundary_trace_of(&m, &layout, &exact);
        let ep = sol.phi.iter().zip(&tr.phi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let eq = sol.q.iter().zip(&tr.q).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / k;
        assert!(ep < 1e-5 && eq < 1e-4, "{ep:e} {eq:e}");
    }

    #[test]
    fn exterior_identity_for_incident_field() {
        // an incident wave with no scatterer satisfies the exterior equation
        // with its own trace: H phi_in - G q_in = phi_in
        let k = 5.0;
        let m = SpectralMesh::structured(Rectangle::new(0.0, 1.0, 0.0, 1.0), 2, 2, 8).unwrap();
        let layout = FluxLayout::new(&m);
        let inc = IncidentField::Plane {
            k,
            dir: [0.3f64.cos(), 0.3f64.sin()],
            amplitude: Complex64::new(1.0, 0.0),
        };
        let sys = assemble_bsem(
            &m,
            &layout,
            BoundaryKernel::Constant { k },
            BieRegion::Exterior,
            Some(&inc),
            &BsemOptions::default(),
        )
        .unwrap();
        let tr = boundary_trace_of(&m, &layout, plane(k, 0.3));
        let hp = sys.h.matvec(&tr.phi);
        let mut gq = vec![Complex64::zero(); m.n_boundary_nodes()];
        for i in 0..gq.len() {
            gq[i] = sys.g.row(i).iter().zip(&tr.q).map(|(a, b)| a * b).sum();
        }
        for i in 0..gq.len() {
            let r = hp[i] - gq[i] - sys.phi_in[i];
            assert!(r.norm() < 1e-6, "{i}: {}", r.norm());
        }
    }
}

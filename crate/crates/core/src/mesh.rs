//! Structured quadrilateral spectral-element meshes and the matched
//! boundary-element loop around them.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::specbasis::LglRule;

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }
}

/// Side of the rectangle a boundary element lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// One spectral boundary element of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryElement {
    /// Global SEM node ids in loop order (p+1 of them).
    pub nodes: Vec<usize>,
    /// Quad the element is an edge of.
    pub quad: usize,
    pub side: Side,
}

/// Geometric data of an element at a local point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFrame {
    pub point: [f64; 2],
    /// `[[dx/dξ, dx/dζ], [dy/dξ, dy/dζ]]`
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementFrame {
    /// Inverse-transpose of the jacobian, mapping reference gradients to
    /// physical gradients.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let [[a, b], [c, d]] = self.jacobian;
        let inv = 1.0 / self.det;
        // (J^{-1})^T
        [[d * inv, -c * inv], [-b * inv, a * inv]]
    }
}

/// Geometric data of a boundary element at a local point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFrame {
    pub point: [f64; 2],
    /// `dx/dξ` along the element.
    pub tangent: [f64; 2],
    /// Arc-length jacobian `|dx/dξ|`.
    pub jacobian: f64,
    /// Unit normal pointing out of the meshed (inner) region.
    pub normal: [f64; 2],
}

/// Quadrilateral spectral-element mesh of a rectangle with its boundary loop.
///
/// Interior nodes are numbered first, boundary nodes last and in loop order,
/// so boundary node `j` of the loop has global id `n_interior + j`.
#[derive(Debug, Clone)]
pub struct SpectralMesh {
    domain: Rectangle,
    nx: usize,
    ny: usize,
    rule: LglRule,
    coords: Vec<[f64; 2]>,
    quads: Vec<Vec<usize>>,
    boundary: Vec<BoundaryElement>,
    n_interior: usize,
}

impl SpectralMesh {
    pub fn structured(domain: Rectangle, nx: usize, ny: usize, p: usize) -> Result<Self> {
        if !(domain.width() > 0.0 && domain.height() > 0.0) {
            return Err(Error::Config(format!("degenerate rectangle {domain:?}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::Config("element counts must be at least 1".into()));
        }
        let rule = LglRule::new(p)?;
        let (mx, my) = (nx * p + 1, ny * p + 1);
        let lattice_x = lattice(domain.x0, domain.x1, nx, &rule);
        let lattice_y = lattice(domain.y0, domain.y1, ny, &rule);

        // boundary lattice points in counter-clockwise loop order
        let mut loop_pts = Vec::with_capacity(2 * (mx + my) - 4);
        for i in 0..mx - 1 {
            loop_pts.push((i, 0));
        }
        for j in 0..my - 1 {
            loop_pts.push((mx - 1, j));
        }
        for i in (1..mx).rev() {
            loop_pts.push((i, my - 1));
        }
        for j in (1..my).rev() {
            loop_pts.push((0, j));
        }
        let n_interior = (mx - 2) * (my - 2);
        let mut id = vec![usize::MAX; mx * my];
        let mut coords = vec![[0.0; 2]; mx * my];
        let mut next = 0;
        for j in 1..my - 1 {
            for i in 1..mx - 1 {
                id[j * mx + i] = next;
                coords[next] = [lattice_x[i], lattice_y[j]];
                next += 1;
            }
        }
        for &(i, j) in &loop_pts {
            id[j * mx + i] = next;
            coords[next] = [lattice_x[i], lattice_y[j]];
            next += 1;
        }
        debug_assert_eq!(next, mx * my);

        let mut quads = Vec::with_capacity(nx * ny);
        for ey in 0..ny {
            for ex in 0..nx {
                let mut q = Vec::with_capacity((p + 1) * (p + 1));
                for b in 0..=p {
                    for a in 0..=p {
                        q.push(id[(ey * p + b) * mx + ex * p + a]);
                    }
                }
                quads.push(q);
            }
        }

        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        let grab = |pts: &mut dyn Iterator<Item = (usize, usize)>| -> Vec<usize> {
            pts.map(|(i, j)| id[j * mx + i]).collect()
        };
        for ex in 0..nx {
            boundary.push(BoundaryElement {
                nodes: grab(&mut (0..=p).map(|a| (ex * p + a, 0))),
                quad: ex,
                side: Side::Bottom,
            });
        }
        for ey in 0..ny {
            boundary.push(BoundaryElement {
                nodes: grab(&mut (0..=p).map(|b| (mx - 1, ey * p + b))),
                quad: ey * nx + nx - 1,
                side: Side::Right,
            });
        }
        for ex in (0..nx).rev() {
            boundary.push(BoundaryElement {
                nodes: grab(&mut (0..=p).rev().map(|a| (ex * p + a, my - 1))),
                quad: (ny - 1) * nx + ex,
                side: Side::Top,
            });
        }
        for ey in (0..ny).rev() {
            boundary.push(BoundaryElement {
                nodes: grab(&mut (0..=p).rev().map(|b| (0, ey * p + b))),
                quad: ey * nx,
                side: Side::Left,
            });
        }

        Ok(Self {
            domain,
            nx,
            ny,
            rule,
            coords,
            quads,
            boundary,
            n_interior,
        })
    }

    pub fn domain(&self) -> Rectangle {
        self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn rule(&self) -> &LglRule {
        &self.rule
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary_nodes(&self) -> usize {
        self.coords.len() - self.n_interior
    }

    pub fn quads(&self) -> &[Vec<usize>] {
        &self.quads
    }

    pub fn boundary_elements(&self) -> &[BoundaryElement] {
        &self.boundary
    }

    /// Loop index of boundary element `e`, local node `m`.
    pub fn boundary_loop_index(&self, e: usize, m: usize) -> usize {
        (e * self.order() + m) % self.n_boundary_nodes()
    }

    /// Corner coordinates of quad `e` as (x0, x1, y0, y1).
    pub fn quad_bounds(&self, e: usize) -> (f64, f64, f64, f64) {
        let q = &self.quads[e];
        let p = self.order();
        let lo = self.coords[q[0]];
        let hi = self.coords[q[(p + 1) * (p + 1) - 1]];
        (lo[0], hi[0], lo[1], hi[1])
    }

    /// Frame of quad `element` at reference point (ξ, ζ).
    pub fn element_frame(&self, element: usize, xi: f64, zeta: f64) -> Result<ElementFrame> {
        let q = &self.quads[element];
        let n = self.order() + 1;
        let (lx, ly) = (self.rule.lagrange_all(xi), self.rule.lagrange_all(zeta));
        let (dx, dy) = (
            self.rule.lagrange_derivative_all(xi),
            self.rule.lagrange_derivative_all(zeta),
        );
        let mut point = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for b in 0..n {
            for a in 0..n {
                let c = self.coords[q[b * n + a]];
                for d in 0..2 {
                    point[d] += lx[a] * ly[b] * c[d];
                    jac[d][0] += dx[a] * ly[b] * c[d];
                    jac[d][1] += lx[a] * dy[b] * c[d];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det > 0.0) {
            return Err(Error::InvertedElement {
                element,
                jacobian: det,
            });
        }
        Ok(ElementFrame {
            point,
            jacobian: jac,
            det,
        })
    }

    /// Frame of boundary element `e` at reference point ξ.
    pub fn boundary_frame(&self, e: usize, xi: f64) -> BoundaryFrame {
        let nodes = &self.boundary[e].nodes;
        let l = self.rule.lagrange_all(xi);
        let dl = self.rule.lagrange_derivative_all(xi);
        let mut point = [0.0; 2];
        let mut tangent = [0.0; 2];
        for (m, &id) in nodes.iter().enumerate() {
            let c = self.coords[id];
            for d in 0..2 {
                point[d] += l[m] * c[d];
                tangent[d] += dl[m] * c[d];
            }
        }
        // keep straight axis-aligned sides exact
        let c0 = self.coords[nodes[0]];
        for d in 0..2 {
            if nodes.iter().all(|&id| self.coords[id][d] == c0[d]) {
                point[d] = c0[d];
                tangent[d] = 0.0;
            }
        }
        let jacobian = tangent[0].hypot(tangent[1]);
        // loop is counter-clockwise, so the outward normal is on the right
        let normal = [tangent[1] / jacobian, -tangent[0] / jacobian];
        BoundaryFrame {
            point,
            tangent,
            jacobian,
            normal,
        }
    }

    /// Quad containing the point and the reference coordinates in it.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, f64, f64)> {
        let d = self.domain;
        let tol = 1e-12 * (d.width() + d.height());
        if x < d.x0 - tol || x > d.x1 + tol || y < d.y0 - tol || y > d.y1 + tol {
            return Err(Error::OutsideMesh { x, y });
        }
        let fx = ((x - d.x0) / d.width() * self.nx as f64).clamp(0.0, self.nx as f64);
        let fy = ((y - d.y0) / d.height() * self.ny as f64).clamp(0.0, self.ny as f64);
        let ex = (fx.floor() as usize).min(self.nx - 1);
        let ey = (fy.floor() as usize).min(self.ny - 1);
        let e = ey * self.nx + ex;
        let (x0, x1, y0, y1) = self.quad_bounds(e);
        let xi = (2.0 * (x - x0) / (x1 - x0) - 1.0).clamp(-1.0, 1.0);
        let zeta = (2.0 * (y - y0) / (y1 - y0) - 1.0).clamp(-1.0, 1.0);
        Ok((e, xi, zeta))
    }

    /// Spectral interpolation of a nodal field at a physical point.
    pub fn interpolate<T>(&self, values: &[T], x: f64, y: f64) -> Result<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let (e, xi, zeta) = self.locate(x, y)?;
        let n = self.order() + 1;
        let (lx, ly) = (self.rule.lagrange_all(xi), self.rule.lagrange_all(zeta));
        let q = &self.quads[e];
        Ok((0..n)
            .flat_map(|b| (0..n).map(move |a| (a, b)))
            .map(|(a, b)| values[q[b * n + a]] * (lx[a] * ly[b]))
            .sum())
    }

    /// Plain-text listing of nodes, quads and boundary elements.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# nodes {}", self.n_nodes());
        for (i, c) in self.coords.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e}", c[0], c[1]);
        }
        let _ = writeln!(s, "# quads {}", self.quads.len());
        for (i, q) in self.quads.iter().enumerate() {
            let ids: Vec<String> = q.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{i} {}", ids.join(" "));
        }
        let _ = writeln!(s, "# boundary {}", self.boundary.len());
        for (i, b) in self.boundary.iter().enumerate() {
            let ids: Vec<String> = b.nodes.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{i} {}", ids.join(" "));
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

fn lattice(lo: f64, hi: f64, n: usize, rule: &LglRule) -> Vec<f64> {
    let p = rule.order();
    let h = (hi - lo) / n as f64;
    let mut out = Vec::with_capacity(n * p + 1);
    for e in 0..n {
        let a = lo + e as f64 * h;
        for &x in &rule.nodes()[..p] {
            out.push(a + 0.5 * (x + 1.0) * h);
        }
    }
    out.push(hi);
    out
}

/// Node correspondence between the SEM boundary and the boundary-element loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMap {
    /// SEM global id of each loop node.
    pub sem_of_loop: Vec<usize>,
    /// Loop index of each SEM node (None for interior nodes).
    pub loop_of_sem: Vec<Option<usize>>,
}

pub fn boundary_trace(mesh: &SpectralMesh) -> Result<TraceMap> {
    let nc = mesh.n_boundary_nodes();
    let mut sem_of_loop = vec![usize::MAX; nc];
    let mut loop_of_sem = vec![None; mesh.n_nodes()];
    for (e, be) in mesh.boundary_elements().iter().enumerate() {
        for (m, &id) in be.nodes.iter().enumerate() {
            let j = mesh.boundary_loop_index(e, m);
            if sem_of_loop[j] != usize::MAX && sem_of_loop[j] != id {
                return Err(Error::Coupling(format!(
                    "loop node {j} matched to SEM nodes {} and {id}",
                    sem_of_loop[j]
                )));
            }
            sem_of_loop[j] = id;
            loop_of_sem[id] = Some(j);
        }
    }
    if sem_of_loop.iter().any(|&v| v == usize::MAX) {
        return Err(Error::Coupling("unmatched boundary node".into()));
    }
    Ok(TraceMap {
        sem_of_loop,
        loop_of_sem,
    })
}

/// Numbering of boundary flux unknowns. Every loop node carries one flux,
/// except the corners of the loop, which carry one per adjacent element
/// because the normal is discontinuous there.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxLayout {
    n_loop: usize,
    corners: Vec<usize>,
    index: Vec<Vec<usize>>,
}

impl FluxLayout {
    pub fn new(mesh: &SpectralMesh) -> Self {
        let elems = mesh.boundary_elements();
        let ne = elems.len();
        let p = mesh.order();
        let n_loop = mesh.n_boundary_nodes();
        let corners: Vec<usize> = (0..ne)
            .filter(|&e| elems[e].side != elems[(e + ne - 1) % ne].side)
            .map(|e| mesh.boundary_loop_index(e, 0))
            .collect();
        let index = (0..ne)
            .map(|e| {
                (0..=p)
                    .map(|m| {
                        let j = mesh.boundary_loop_index(e, m);
                        match corners.iter().position(|&c| c == j) {
                            Some(c) if m == p => n_loop + c,
                            _ => j,
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            n_loop,
            corners,
            index,
        }
    }

    pub fn n_flux(&self) -> usize {
        self.n_loop + self.corners.len()
    }

    pub fn n_loop(&self) -> usize {
        self.n_loop
    }

    /// Loop indices of the corner nodes.
    pub fn corners(&self) -> &[usize] {
        &self.corners
    }

    /// Flux unknown of boundary element `e`, local node `m`.
    pub fn index(&self, e: usize, m: usize) -> usize {
        self.index[e][m]
    }

    /// The two flux unknowns at corner `c`: (end of the incoming element,
    /// start of the outgoing element).
    pub fn corner_pair(&self, c: usize) -> (usize, usize) {
        (self.n_loop + c, self.corners[c])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Rectangle {
        Rectangle::new(0.0, 1.0, 0.0, 1.0)
    }

    #[test]
    fn flux_layout_doubles_corners() {
        let m = SpectralMesh::structured(unit(), 2, 3, 3).unwrap();
        let f = FluxLayout::new(&m);
        assert_eq!(f.corners().len(), 4);
        assert_eq!(f.n_flux(), m.n_boundary_nodes() + 4);
        assert_eq!(f.corners()[0], 0);
        let ne = m.boundary_elements().len();
        assert_eq!(f.index(ne - 1, 3), f.corner_pair(0).0);
        assert_eq!(f.index(0, 0), 0);
        let mut seen = vec![0; f.n_flux()];
        for e in 0..ne {
            for k in 0..=3 {
                seen[f.index(e, k)] += 1;
            }
        }
        // each loop node is shared by two elements unless it is interior to one
        assert!(seen.iter().all(|&c| c == 1 || c == 2));
        assert_eq!(seen.iter().filter(|&&c| c == 2).count(), ne - 4);
    }

    #[test]
    fn single_bilinear_quad() {
        let m = SpectralMesh::structured(unit(), 1, 1, 1).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.quads().len(), 1);
        assert_eq!(m.boundary_elements().len(), 4);
        let t = boundary_trace(&m).unwrap();
        assert_eq!(t.sem_of_loop.len(), 4);
        for (j, &s) in t.sem_of_loop.iter().enumerate() {
            assert_eq!(t.loop_of_sem[s], Some(j));
        }
    }

    #[test]
    fn benchmark_mesh_sizes() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.4, 0.0, 2.4), 10, 10, 15).unwrap();
        assert_eq!(m.n_nodes(), 22801);
        assert_eq!(m.boundary_elements().len(), 40);
        assert_eq!(boundary_trace(&m).unwrap().sem_of_loop.len(), 600);
        let m = SpectralMesh::structured(Rectangle::new(-10.0, 10.0, -7.5, 7.5), 40, 30, 2).unwrap();
        assert_eq!(m.quads().len(), 1200);
        assert_eq!(m.boundary_elements().len(), 140);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(SpectralMesh::structured(Rectangle::new(0.0, 0.0, 0.0, 1.0), 1, 1, 2).is_err());
        assert!(SpectralMesh::structured(unit(), 0, 1, 2).is_err());
    }

    #[test]
    fn frames() {
        let m = SpectralMesh::structured(Rectangle::new(0.0, 3.0, 0.0, 2.0), 1, 1, 3).unwrap();
        let f = m.element_frame(0, 0.2, -0.7).unwrap();
        assert!((f.det - 1.5).abs() < 1e-13);
        let m = SpectralMesh::structured(unit(), 1, 1, 2).unwrap();
        for &(a, b) in &[(0.0, 0.0), (0.3, -0.9), (1.0, 1.0)] {
            assert!((m.element_frame(0, a, b).unwrap().det - 0.25).abs() < 1e-14);
        }
        let m = SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), 4, 2, 4).unwrap();
        for e in 0..m.boundary_elements().len() {
            let bf = m.boundary_frame(e, 0.1);
            assert!((bf.jacobian - 0.25).abs() < 1e-13);
            assert!((bf.normal[0].hypot(bf.normal[1]) - 1.0).abs() < 1e-13);
            // outward: normal points away from the centre
            let c = [1.0, 0.5];
            let d = (bf.point[0] - c[0]) * bf.normal[0] + (bf.point[1] - c[1]) * bf.normal[1];
            assert!(d > 0.0);
        }
    }

    #[test]
    fn area_and_perimeter_quadrature() {
        let d = Rectangle::new(-1.0, 2.5, 0.5, 1.7);
        let m = SpectralMesh::structured(d, 3, 4, 5).unwrap();
        let w = m.rule().weights();
        let n = m.order() + 1;
        let mut area = 0.0;
        for e in 0..m.quads().len() {
            for b in 0..n {
                for a in 0..n {
                    let f = m.element_frame(e, m.rule().nodes()[a], m.rule().nodes()[b]).unwrap();
                    area += f.det * w[a] * w[b];
                }
            }
        }
        assert!((area - d.area()).abs() < 1e-10 * d.area());
        let mut per = 0.0;
        for e in 0..m.boundary_elements().len() {
            for a in 0..n {
                per += m.boundary_frame(e, m.rule().nodes()[a]).jacobian * w[a];
            }
        }
        assert!((per - d.perimeter()).abs() < 1e-10 * d.perimeter());
    }

    #[test]
    fn conforming_and_loop_closed() {
        let m = SpectralMesh::structured(unit(), 3, 2, 4).unwrap();
        let be = m.boundary_elements();
        for e in 0..be.len() {
            let next = &be[(e + 1) % be.len()];
            assert_eq!(be[e].nodes.last(), next.nodes.first());
        }
        let mut count = vec![0; m.n_nodes()];
        for b in be {
            for &id in &b.nodes {
                count[id] += 1;
            }
        }
        for id in m.n_interior()..m.n_nodes() {
            assert!(count[id] == 1 || count[id] == 2);
        }
        // boundary nodes of each element coincide with quad edge nodes
        for b in be {
            let q = &m.quads()[b.quad];
            assert!(b.nodes.iter().all(|id| q.contains(id)));
        }
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let m = SpectralMesh::structured(unit(), 2, 2, 3).unwrap();
        let f: Vec<f64> = m.coords().iter().map(|c| c[0] * c[0] - c[1] * c[0]).collect();
        for (i, c) in m.coords().iter().enumerate() {
            let v = m.interpolate(&f, c[0], c[1]).unwrap();
            assert!((v - f[i]).abs() < 1e-14);
        }
        assert!(m.interpolate(&f, 1.5, 0.0).is_err());
    }
}

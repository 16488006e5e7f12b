//! Benchmark drivers: plane-wave convergence sweeps, the circular shoal and
//! the elliptic shoal on a slope, with error norms and section profiles.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;

use crate::bsem::{
    assemble_bsem, boundary_trace_of, solve_bsem_bvp, BieRegion, BoundaryData, BoundaryKernel, BsemOptions,
};
use crate::couple::{assemble_coupled, coupled_residual, incident_amplitude, recover_fields, solve_coupled, FieldSolution};
use crate::error::{Error, Result};
use crate::io::{read_field_file, sha256_hex, write_field_file, FieldMeta};
use crate::greens::{greens_constant, IncidentField, KernelCache, LineProfile, QuadratureSpec};
use crate::mesh::{FluxLayout, Rectangle, Side, SpectralMesh};
use crate::sem::{assemble_sem, element_mass, solve_sem_bvp, BoundarySchur, EdgeCondition, MassQuadrature};
use crate::waves::{bergmann_inverse, solve_dispersion, velocities, wave_height, Bathymetry, WaveEnvironment, XProfile, GRAVITY};

/// Discretization used by the plane-wave sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sem,
    Bsem,
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub p: usize,
    /// Number of elements.
    pub n: usize,
    /// Number of unknowns.
    pub dof: usize,
    pub linf_error: Option<f64>,
    pub relative_error: Option<f64>,
    pub runtime_s: f64,
}

/// Wavenumber of the plane-wave test.
pub const PLANE_WAVE_K: f64 = 15.0;
/// Direction of the plane-wave test.
pub const PLANE_WAVE_THETA: f64 = PI / 6.0;
const PLANE_WAVE_DEPTH: f64 = 1.0;

/// `exp(i k (cos t x + sin t y))` and its gradient.
pub fn plane_wave(k: f64, theta: f64) -> impl Fn([f64; 2]) -> (Complex64, [Complex64; 2]) + Copy {
    move |p: [f64; 2]| {
        let (s, c) = theta.sin_cos();
        let v = Complex64::from_polar(1.0, k * (c * p[0] + s * p[1]));
        let ik = Complex64::new(0.0, k);
        (v, [ik * c * v, ik * s * v])
    }
}

/// Mesh of `[0,2]x[0,1]` with square elements of side `h`.
pub fn plane_wave_mesh(h: f64, p: usize) -> Result<SpectralMesh> {
    let nx = (2.0 / h).round() as usize;
    let ny = (1.0 / h).round() as usize;
    if nx == 0 || ny == 0 || ((nx as f64) * h - 2.0).abs() > 1e-9 || ((ny as f64) * h - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("element size {h} does not tile [0,2]x[0,1]")));
    }
    SpectralMesh::structured(Rectangle::new(0.0, 2.0, 0.0, 1.0), nx, ny, p)
}

/// L-infinity error of one plane-wave solve.
pub fn plane_wave_error(h: f64, p: usize, method: Method) -> Result<ErrorReport> {
    let start = Instant::now();
    let k = PLANE_WAVE_K;
    let exact = plane_wave(k, PLANE_WAVE_THETA);
    let mesh = plane_wave_mesh(h, p)?;
    let dirichlet_x = |s: Side| matches!(s, Side::Left | Side::Right);
    let (dof, err) = match method {
        Method::Sem => {
            let omega = (GRAVITY * k * (k * PLANE_WAVE_DEPTH).tanh()).sqrt();
            let env = WaveEnvironment::new(omega, PLANE_WAVE_THETA);
            let bathy = Bathymetry::Constant {
                depth: PLANE_WAVE_DEPTH,
            };
            let sys = assemble_sem(&mesh, &env, &bathy, MassQuadrature::Lgl)?;
            let schur = BoundarySchur::new(&mesh, &sys)?;
            let cond = |s: Side| {
                if dirichlet_x(s) {
                    EdgeCondition::Dirichlet
                } else {
                    EdgeCondition::Neumann
                }
            };
            let phi = solve_sem_bvp(&mesh, &sys, &schur, cond, exact)?;
            let reference: Vec<Complex64> = mesh.coords().iter().map(|&c| exact(c).0).collect();
            (mesh.n_nodes(), error_linf(&phi, &reference)?)
        }
        Method::Bsem => {
            let layout = FluxLayout::new(&mesh);
            let sys = assemble_bsem(
                &mesh,
                &layout,
                BoundaryKernel::Constant { k },
                BieRegion::Interior,
                None,
                &BsemOptions::default(),
            )?;
            let cond = |s: Side| {
                if dirichlet_x(s) {
                    BoundaryData::Dirichlet
                } else {
                    BoundaryData::Neumann
                }
            };
            let sol = solve_bsem_bvp(&mesh, &layout, &sys, cond, exact)?;
            let tr = boundary_trace_of(&mesh, &layout, exact);
            let ep = error_linf(&sol.phi, &tr.phi)?;
            let eq = error_linf(&sol.q, &tr.q)? / k;
            (mesh.n_boundary_nodes(), ep.max(eq))
        }
    };
    let n = match method {
        Method::Sem => mesh.quads().len(),
        Method::Bsem => mesh.boundary_elements().len(),
    };
    Ok(ErrorReport {
        p,
        n,
        dof,
        linf_error: Some(err),
        relative_error: None,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Plane-wave sweep over increasing orders.
pub fn run_plane_wave(h: f64, ps: &[usize], method: Method) -> Result<Vec<ErrorReport>> {
    check_sweep(ps)?;
    ps.iter().map(|&p| plane_wave_error(h, p, method)).collect()
}

fn check_sweep(ps: &[usize]) -> Result<()> {
    if ps.is_empty() || ps.windows(2).any(|w| w[1] <= w[0]) || ps[0] == 0 {
        return Err(Error::Config("order sweep must be non-empty, positive and strictly increasing".into()));
    }
    Ok(())
}

/// Configuration of a coupled scattering run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCase {
    pub name: String,
    pub domain: Rectangle,
    pub nx: usize,
    pub ny: usize,
    /// Wave period, direction and incident `phi_hat` amplitude.
    pub env: WaveEnvironment,
    pub bathymetry: Bathymetry,
    pub incident_height: f64,
    pub mass: MassQuadrature,
    pub bsem: BsemOptions,
    /// Transverse quadrature of the variable kernel; derived from the domain when absent.
    pub kernel: Option<QuadratureSpec>,
}

impl CoupledCase {
    fn new(name: &str, domain: Rectangle, n: (usize, usize), period: f64, theta: f64, bathy: Bathymetry, height: f64) -> Self {
        let env = WaveEnvironment::from_period(period, theta);
        let upstream = bathy.outer_profile().depth_a();
        let amp = incident_amplitude(&env, upstream, height);
        Self {
            name: name.into(),
            domain,
            nx: n.0,
            ny: n.1,
            env: env.with_amplitude(Complex64::new(amp, 0.0)),
            bathymetry: bathy,
            incident_height: height,
            mass: MassQuadrature::Lgl,
            bsem: BsemOptions::default(),
            kernel: None,
        }
    }

    /// The same case driven by another period, direction or incident height.
    pub fn with_wave(self, period: f64, theta: f64, height: f64) -> Self {
        let mut c = Self::new(&self.name, self.domain, (self.nx, self.ny), period, theta, self.bathymetry, height);
        c.mass = self.mass;
        c.bsem = self.bsem;
        c.kernel = self.kernel;
        c
    }

    /// Parabolic shoal on a flat bed, period 0.511 s, waves along x.
    pub fn circular_shoal() -> Self {
        Self::new(
            "circular-shoal",
            Rectangle::new(0.0, 2.4, 0.0, 2.4),
            (10, 10),
            0.511,
            0.0,
            Bathymetry::circular_shoal(),
            0.01,
        )
    }

    /// Elliptic shoal on a 2% slope, period 1 s, height 0.01058 m, 20 degrees.
    pub fn elliptic_shoal() -> Self {
        Self::new(
            "elliptic-shoal",
            Rectangle::new(-10.0, 10.0, -7.5, 7.5),
            (40, 30),
            1.0,
            20f64.to_radians(),
            Bathymetry::SlopeEllipticShoal,
            0.01058,
        )
    }

    /// Flat bed everywhere, for the null-scatterer check.
    pub fn flat(domain: Rectangle, n: (usize, usize), period: f64, theta: f64, depth: f64) -> Self {
        Self::new("flat", domain, n, period, theta, Bathymetry::Constant { depth }, 0.01)
    }

    /// Stable identity of the configuration, used to key stored references.
    pub fn fingerprint(&self, p: usize) -> String {
        format!("msewave {} {self:?} p={p}", env!("CARGO_PKG_VERSION"))
    }
}

/// A solved coupled case.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub mesh: SpectralMesh,
    pub solution: FieldSolution,
    pub runtime_s: f64,
}

/// Mesh, assemble and solve a coupled case at order `p`.
pub fn run_coupled(case: &CoupledCase, p: usize) -> Result<CoupledRun> {
    let start = Instant::now();
    let d = case.domain;
    let mesh = SpectralMesh::structured(d, case.nx, case.ny, p)?;
    let layout = FluxLayout::new(&mesh);
    let sem = assemble_sem(&mesh, &case.env, &case.bathymetry, case.mass)?;
    let schur = BoundarySchur::new(&mesh, &sem)?;
    let profile = case.bathymetry.outer_profile();
    let line = LineProfile::new(&profile, case.env.omega, (d.x0, d.x1))?;
    let incident = IncidentField::new(&line, &case.env)?;
    let cache;
    let kernel = if profile.is_flat() {
        BoundaryKernel::Constant {
            k: solve_dispersion(case.env.omega, profile.depth_a()),
        }
    } else {
        let spec = case
            .kernel
            .unwrap_or_else(|| QuadratureSpec::for_extent(d.width().hypot(d.height())));
        cache = KernelCache::new(line, spec)?;
        BoundaryKernel::Variable(&cache)
    };
    let bsem = assemble_bsem(&mesh, &layout, kernel, BieRegion::Exterior, Some(&incident), &case.bsem)?;
    let system = assemble_coupled(&mesh, &sem, &schur, &bsem, &layout)?;
    let (phi_hat, q) = solve_coupled(&mesh, &schur, system)?;
    let residual = coupled_residual(&mesh, &sem, &bsem, &layout, &phi_hat, &q);
    let solution = recover_fields(&mesh, &case.env, &case.bathymetry, phi_hat, q, residual);
    Ok(CoupledRun {
        mesh,
        solution,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Name of the stored field file for `case` at order `p`.
pub fn reference_file(case: &CoupledCase, p: usize) -> String {
    format!("{}-p{p}.field", case.name)
}

/// Load the stored run of `case` at order `p` from `dir` when its
/// configuration hash matches, otherwise run it and store the result.
/// Stored runs carry `phi_hat` only, so the loaded flux vector is empty.
pub fn load_or_run(case: &CoupledCase, p: usize, dir: &Path) -> Result<CoupledRun> {
    let path = dir.join(reference_file(case, p));
    let hash = sha256_hex(case.fingerprint(p).as_bytes());
    if path.exists() {
        let start = Instant::now();
        let (meta, coords, values) = read_field_file(&path)?;
        if meta.config_hash == hash {
            let mesh = SpectralMesh::structured(case.domain, case.nx, case.ny, p)?;
            if coords.as_slice() != mesh.coords() {
                return Err(Error::Format {
                    path,
                    reason: "stored nodes differ from the rebuilt mesh".into(),
                });
            }
            let solution = recover_fields(&mesh, &case.env, &case.bathymetry, values, Vec::new(), meta.residual);
            return Ok(CoupledRun {
                mesh,
                solution,
                runtime_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    let run = run_coupled(case, p)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = FieldMeta {
        version: 0,
        case: case.name.clone(),
        p,
        nx: case.nx,
        ny: case.ny,
        config_hash: hash,
        residual: run.solution.residual,
        payload_hash: String::new(),
    };
    write_field_file(&path, &meta, run.mesh.coords(), &run.solution.phi_hat)?;
    Ok(run)
}

/// One row of the variable-versus-constant kernel comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSample {
    pub point: [f64; 2],
    pub kr: f64,
    pub variable: Complex64,
    pub hankel: Complex64,
    pub rel_error: f64,
}

/// Evaluate the transformed-kernel route on a flat profile of depth `depth`
/// against `(i/4) H0(kr)` for `pairs` points with `kr` log-spaced on
/// `[0.1, 20]` around a source at the origin.
pub fn kernel_check(
    depth: f64,
    period: f64,
    pairs: usize,
    tune: impl FnOnce(QuadratureSpec) -> QuadratureSpec,
) -> Result<Vec<KernelSample>> {
    if pairs == 0 {
        return Err(Error::Config("kernel check needs at least one pair".into()));
    }
    let env = WaveEnvironment::from_period(period, 0.0);
    let k = solve_dispersion(env.omega, depth);
    let reach = 20.0 / k + 1.0;
    let line = LineProfile::new(&XProfile::flat(depth), env.omega, (-reach, reach))?;
    let spec = tune(QuadratureSpec::for_extent(2.0 * reach));
    let cache = KernelCache::new(line, spec)?;
    let src = cache.source(0.0)?;
    (0..pairs)
        .map(|i| {
            let t = if pairs > 1 { i as f64 / (pairs - 1) as f64 } else { 0.0 };
            let kr = 0.1 * 200f64.powf(t);
            let angle = 2.399963229728653 * i as f64;
            let r = kr / k;
            let point = [r * angle.cos(), r * angle.sin()];
            let row = src.row(point[0]);
            let variable = src.eval(&row, point, 0.0)?.psi;
            let hankel = greens_constant(point, [0.0, 0.0], k)?.psi;
            Ok(KernelSample {
                point,
                kr,
                variable,
                hankel,
                rel_error: (variable - hankel).norm() / hankel.norm(),
            })
        })
        .collect()
}

/// `max |a - b|` over matching node sets.
pub fn error_linf(computed: &[Complex64], exact: &[Complex64]) -> Result<f64> {
    if computed.len() != exact.len() {
        return Err(Error::Config(format!(
            "node sets differ: {} vs {}",
            computed.len(),
            exact.len()
        )));
    }
    Ok(computed
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// LGL quadrature weight of every node of `mesh`.
pub fn nodal_weights(mesh: &SpectralMesh) -> Result<Vec<f64>> {
    let mut w = vec![0.0; mesh.n_nodes()];
    for (e, q) in mesh.quads().iter().enumerate() {
        for (&id, m) in q.iter().zip(element_mass(mesh, e, |_| 1.0)?) {
            w[id] += m;
        }
    }
    Ok(w)
}

/// `|int (phi - phi_ref) / int phi_ref|`, with `phi` interpolated onto the
/// reference nodes and both integrated with the reference LGL rule.
pub fn error_relative(
    mesh: &SpectralMesh,
    field: &[Complex64],
    ref_mesh: &SpectralMesh,
    reference: &[Complex64],
) -> Result<f64> {
    if field.len() != mesh.n_nodes() || reference.len() != ref_mesh.n_nodes() {
        return Err(Error::Config("field length does not match its mesh".into()));
    }
    let w = nodal_weights(ref_mesh)?;
    let same = mesh.domain() == ref_mesh.domain()
        && (mesh.nx(), mesh.ny(), mesh.order()) == (ref_mesh.nx(), ref_mesh.ny(), ref_mesh.order());
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for (i, ((c, r), wi)) in ref_mesh.coords().iter().zip(reference).zip(&w).enumerate() {
        let v = if same { field[i] } else { mesh.interpolate(field, c[0], c[1])? };
        num += (v - r) * wi;
        den += r * wi;
    }
    if den.norm() == 0.0 {
        return Err(Error::UndefinedRelativeError);
    }
    Ok(num.norm() / den.norm())
}

/// A straight section through the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Section {
    /// `x = const`, sampled along y.
    X(f64),
    /// `y = const`, sampled along x.
    Y(f64),
}

/// Interpolated `phi_hat` at `samples` equispaced points along a section.
pub fn extract_complex(mesh: &SpectralMesh, field: &[Complex64], section: Section, samples: usize) -> Result<Vec<(f64, Complex64)>> {
    let d = mesh.domain();
    let (lo, hi) = match section {
        Section::X(x) if x >= d.x0 && x <= d.x1 => (d.y0, d.y1),
        Section::Y(y) if y >= d.y0 && y <= d.y1 => (d.x0, d.x1),
        _ => return Err(Error::Config(format!("section {section:?} misses the domain"))),
    };
    if samples < 2 {
        return Err(Error::Config("a profile needs at least two samples".into()));
    }
    (0..samples)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let (x, y) = match section {
                Section::X(x) => (x, s),
                Section::Y(y) => (s, y),
            };
            Ok((s, mesh.interpolate(field, x, y)?))
        })
        .collect()
}

/// `(coordinate, H/H0)` along a section.
pub fn extract_profile(
    mesh: &SpectralMesh,
    solution: &FieldSolution,
    env: &WaveEnvironment,
    bathymetry: &Bathymetry,
    section: Section,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let pts = extract_complex(mesh, &solution.phi_hat, section, samples)?;
    Ok(pts
        .into_iter()
        .map(|(s, v)| {
            let (x, y) = match section {
                Section::X(x) => (x, s),
                Section::Y(y) => (s, y),
            };
            let h = bathymetry.depth(x, y);
            let k = solve_dispersion(env.omega, h);
            let (c, cg) = velocities(k, h, env.omega);
            let height = wave_height(bergmann_inverse(v, c, cg), env.omega);
            let norm = if solution.incident_height > 0.0 {
                height / solution.incident_height
            } else {
                0.0
            };
            (s, norm)
        })
        .collect())
}

/// Sections shown for the circular shoal.
pub fn circular_shoal_sections(longitudinal_y: f64) -> Vec<(String, Section)> {
    vec![
        (format!("y={longitudinal_y}"), Section::Y(longitudinal_y)),
        ("x=2".into(), Section::X(2.0)),
        ("x=1.2".into(), Section::X(1.2)),
    ]
}

/// Sections shown for the elliptic shoal.
pub fn elliptic_shoal_sections() -> Vec<(String, Section)> {
    [1.0, 3.0, 5.0, 7.0, 9.0]
        .iter()
        .map(|&x| (format!("x={x}"), Section::X(x)))
        .chain([-2.0, 0.0, 2.0].iter().map(|&y| (format!("y={y}"), Section::Y(y))))
        .collect()
}

/// Self-convergence of a coupled case against a reference run.
pub fn self_convergence(case: &CoupledCase, ps: &[usize], reference: &CoupledRun) -> Result<Vec<ErrorReport>> {
    check_sweep(ps)?;
    ps.iter()
        .map(|&p| {
            let run = run_coupled(case, p)?;
            let rel = error_relative(&run.mesh, &run.solution.phi_hat, &reference.mesh, &reference.solution.phi_hat)?;
            Ok(ErrorReport {
                p,
                n: run.mesh.quads().len(),
                dof: run.mesh.n_nodes() + run.solution.q.len(),
                linf_error: None,
                relative_error: Some(rel),
                runtime_s: run.runtime_s,
            })
        })
        .collect()
}

/// Local minima of `H/H0` on the nodes of `mesh` that lie below `threshold`
/// inside the box, at least `separation` apart.
pub fn low_points(
    mesh: &SpectralMesh,
    height_norm: &[f64],
    bounds: Rectangle,
    threshold: f64,
    separation: f64,
) -> Vec<([f64; 2], f64)> {
    let mut cand: Vec<([f64; 2], f64)> = mesh
        .coords()
        .iter()
        .zip(height_norm)
        .filter(|(c, &h)| h < threshold && c[0] >= bounds.x0 && c[0] <= bounds.x1 && c[1] >= bounds.y0 && c[1] <= bounds.y1)
        .map(|(c, &h)| (*c, h))
        .collect();
    cand.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<([f64; 2], f64)> = Vec::new();
    for (c, h) in cand {
        if out.iter().all(|(o, _)| (o[0] - c[0]).hypot(o[1] - c[1]) >= separation) {
            out.push((c, h));
        }
    }
    out
}

//! Kernel over an `x`-dependent bathymetry by inverse cosine transform of
//! the 1D solutions, and the incident field refracted by the same profile.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use super::transformed::{
    solve_end_load, solve_incoming, solve_transformed_1d, transformed_constant, LineProfile, TransformedLine,
};
use super::{greens_constant, GreensEvaluation};
use crate::error::{Error, Result};
use crate::specbasis::GaussRule;
use crate::waves::WaveEnvironment;

const ROW_DECAY: f64 = 40.0;

/// Composite quadrature over the transverse wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Largest panel width in `lambda` (rad/m).
    pub panel_width: f64,
    /// Gauss points per panel.
    pub points: usize,
    /// Upper limit of the integral as a multiple of the largest wavenumber.
    pub cap_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panel_width: 0.3,
            points: 16,
            cap_factor: 6.0,
        }
    }
}

impl QuadratureSpec {
    /// Panels narrow enough to resolve the phase `gamma |dx| + lambda |dy|`
    /// for source-field distances up to `max_distance`.
    pub fn for_extent(max_distance: f64) -> Self {
        Self {
            panel_width: (7.0 / max_distance.max(1e-3)).min(2.0),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.panel_width > 0.0) || self.points < 2 || self.points > 64 || !(self.cap_factor > 1.0) {
            return Err(Error::Config(format!("invalid kernel quadrature {self:?}")));
        }
        Ok(())
    }
}

/// Intervals of `[0, cap]` between consecutive branch points.
fn lambda_intervals(branches: &[f64], cap: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = branches.iter().copied().filter(|&b| b > 0.0 && b < cap).collect();
    cuts.push(0.0);
    cuts.push(cap);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    cuts.windows(2).map(|c| (c[0], c[1])).collect()
}

/// Nodes and weights on one interval, mapped by
/// `lambda = l0 + (l1 - l0)(1 - cos(pi s))/2` so square-root end behaviour
/// is absorbed.
fn interval_grid(l0: f64, l1: f64, spec: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
    let gauss = GaussRule::new(spec.points).expect("valid Gauss order");
    let span = l1 - l0;
    let m = ((span * 0.5 * PI) / spec.panel_width).ceil().max(1.0) as usize;
    let mut lam = Vec::with_capacity(m * spec.points);
    let mut wts = Vec::with_capacity(m * spec.points);
    for j in 0..m {
        let s0 = j as f64 / m as f64;
        let hs = 0.5 / m as f64;
        for (&t, &w) in gauss.nodes().iter().zip(gauss.weights()) {
            let s = s0 + hs * (t + 1.0);
            lam.push(l0 + 0.5 * span * (1.0 - (PI * s).cos()));
            wts.push(w * hs * 0.5 * span * PI * (PI * s).sin());
        }
    }
    (lam, wts)
}

/// Nodes and weights in `lambda` on `[0, cap]`, split at every branch point.
#[cfg(test)]
pub(crate) fn lambda_grid(branches: &[f64], cap: f64, spec: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
    let mut lam = Vec::new();
    let mut wts = Vec::new();
    for (l0, l1) in lambda_intervals(branches, cap) {
        let (l, w) = interval_grid(l0, l1, spec);
        lam.extend(l);
        wts.extend(w);
    }
    (lam, wts)
}

/// Solutions with the load at either end of the span. For an interior
/// source `Psi(x; x') = Psi_hi(min(x, x')) Psi_lo(max(x, x')) / Psi_hi(lo)`.
struct EndPair {
    hi: TransformedLine,
    lo: TransformedLine,
    norm: Complex64,
}

impl EndPair {
    /// `None` when the end-to-end value underflows.
    fn new(line: &LineProfile, lambda: f64) -> Result<Option<Self>> {
        let (a, b) = line.span();
        let q = (lambda * lambda - line.k_max() * line.k_max()).max(0.0).sqrt();
        if q * (b - a) > 550.0 {
            return Ok(None);
        }
        let hi = solve_end_load(line, lambda, true)?;
        let lo = solve_end_load(line, lambda, false)?;
        let norm = hi.eval(line.span().0).0;
        let ok = norm.norm() > 1e-250 && norm.re.is_finite() && norm.im.is_finite();
        Ok(ok.then_some(Self { hi, lo, norm }))
    }
}

/// End-load solutions on the nodes of one `lambda` interval.
struct SharedInterval {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    pairs: Vec<Option<Arc<EndPair>>>,
}

impl SharedInterval {
    fn new(line: &LineProfile, l0: f64, l1: f64, spec: &QuadratureSpec) -> Result<Self> {
        let (lambdas, weights) = interval_grid(l0, l1, spec);
        let pairs = lambdas
            .par_iter()
            .map(|&l| Ok(EndPair::new(line, l)?.map(Arc::new)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lambdas,
            weights,
            pairs,
        })
    }
}

enum LineSample {
    Direct(TransformedLine),
    Split {
        pair: Arc<EndPair>,
        /// `Psi_lo(x') / norm`, multiplies `Psi_hi(x)` for `x <= x'`.
        left: Complex64,
        /// `Psi_hi(x') / norm`, multiplies `Psi_lo(x)` for `x >= x'`.
        right: Complex64,
    },
}

impl LineSample {
    fn split(pair: Arc<EndPair>, x_src: f64) -> Self {
        let left = pair.lo.eval(x_src).0.fdiv(pair.norm);
        let right = pair.hi.eval(x_src).0.fdiv(pair.norm);
        LineSample::Split { pair, left, right }
    }

    fn eval(&self, x: f64, x_src: f64) -> (Complex64, Complex64) {
        match self {
            LineSample::Direct(line) => line.eval(x),
            LineSample::Split { pair, left, right } => {
                if x < x_src {
                    let (v, g) = pair.hi.eval(x);
                    (v * left, g * left)
                } else if x > x_src {
                    let (v, g) = pair.lo.eval(x);
                    (v * right, g * right)
                } else {
                    let (v, gl) = pair.hi.eval(x);
                    let (_, gr) = pair.lo.eval(x);
                    (v * left, 0.5 * (gl * left + gr * right))
                }
            }
        }
    }
}

/// Transformed solutions for one source abscissa, together with the
/// constant-depth reference that is subtracted before integration.
pub struct SourceKernel {
    x_src: f64,
    k_ref: f64,
    k_max: f64,
    lambdas: Vec<f64>,
    weights: Vec<f64>,
    lines: Vec<LineSample>,
}

/// Weighted difference samples `w (Psi - Psi_ref)` and `w (Psi_x - Psi_ref,x)`
/// for one field abscissa.
#[derive(Debug, Clone)]
pub struct DiffRow {
    x: f64,
    d: Vec<Complex64>,
    dx: Vec<Complex64>,
}

impl SourceKernel {
    pub fn new(line: &LineProfile, x_src: f64, k_ref: f64, spec: &QuadratureSpec) -> Result<Self> {
        Self::build(line, x_src, k_ref, spec, None)
    }

    fn build(
        line: &LineProfile,
        x_src: f64,
        k_ref: f64,
        spec: &QuadratureSpec,
        shared: Option<&KernelCache>,
    ) -> Result<Self> {
        spec.validate()?;
        if !(k_ref > 0.0) {
            return Err(Error::Domain(format!("reference wavenumber must be positive, got {k_ref}")));
        }
        let cap = spec.cap_factor * line.k_max().max(k_ref);
        let fixed = [0.0, line.k_a(), line.k_c(), cap];
        let is_fixed = |l: f64| fixed.iter().any(|&f| (f - l).abs() <= 1e-12 * f.abs().max(1.0));
        let mut lambdas = Vec::new();
        let mut weights = Vec::new();
        let mut lines = Vec::new();
        for (l0, l1) in lambda_intervals(&[line.k_a(), line.k_c(), k_ref], cap) {
            let reuse = match shared {
                Some(cache) if is_fixed(l0) && is_fixed(l1) => Some(cache.shared_interval(l0, l1)?),
                _ => None,
            };
            match reuse {
                Some(int) => {
                    lambdas.extend_from_slice(&int.lambdas);
                    weights.extend_from_slice(&int.weights);
                    let samples = int
                        .lambdas
                        .par_iter()
                        .zip(&int.pairs)
                        .map(|(&l, pair)| match pair {
                            Some(p) => Ok(LineSample::split(p.clone(), x_src)),
                            None => Ok(LineSample::Direct(solve_transformed_1d(line, l, x_src)?)),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    lines.extend(samples);
                }
                None => {
                    let (l, w) = interval_grid(l0, l1, spec);
                    let samples = l
                        .par_iter()
                        .map(|&l| Ok(LineSample::Direct(solve_transformed_1d(line, l, x_src)?)))
                        .collect::<Result<Vec<_>>>()?;
                    lambdas.extend(l);
                    weights.extend(w);
                    lines.extend(samples);
                }
            }
        }
        Ok(Self {
            x_src,
            k_ref,
            k_max: line.k_max().max(k_ref),
            lambdas,
            weights,
            lines,
        })
    }

    pub fn x_src(&self) -> f64 {
        self.x_src
    }

    pub fn k_ref(&self) -> f64 {
        self.k_ref
    }

    pub fn n_lambda(&self) -> usize {
        self.lambdas.len()
    }

    /// Samples with `sqrt(lambda^2 - k_max^2) |x - x'| > ROW_DECAY` are
    /// below `exp(-ROW_DECAY)` in both terms and are left out.
    pub fn row(&self, x: f64) -> DiffRow {
        let a = (x - self.x_src).abs();
        let n = if a > 0.0 {
            let cut = self.k_max.hypot(ROW_DECAY / a);
            self.lambdas.partition_point(|&l| l <= cut)
        } else {
            self.lambdas.len()
        };
        let mut d = Vec::with_capacity(n);
        let mut dx = Vec::with_capacity(n);
        let off = x - self.x_src;
        for ((line, &l), &w) in self.lines[..n].iter().zip(&self.lambdas).zip(&self.weights) {
            let (v, g) = line.eval(x, self.x_src);
            let (vc, gc) = transformed_constant(self.k_ref, l, off);
            d.push((v - vc) * (w / PI));
            dx.push((g - gc) * (w / PI));
        }
        DiffRow { x, d, dx }
    }

    pub fn rows(&self, xs: &[f64]) -> Vec<DiffRow> {
        xs.par_iter().map(|&x| self.row(x)).collect()
    }

    /// The regular remainder `psi - (i/4) H0(k_ref r)` and its gradient.
    pub fn smooth(&self, row: &DiffRow, dy: f64) -> GreensEvaluation {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        for ((&l, d), dx) in self.lambdas.iter().zip(&row.d).zip(&row.dx) {
            let (s, c) = (dy * l).sin_cos();
            psi += d * c;
            gx += dx * c;
            gy -= d * (l * s);
        }
        GreensEvaluation {
            psi,
            grad: [gx, gy],
        }
    }

    /// Full kernel at field point `x` for the source at `(x_src, y_src)`.
    pub fn eval(&self, row: &DiffRow, x: [f64; 2], y_src: f64) -> Result<GreensEvaluation> {
        let sm = self.smooth(row, x[1] - y_src);
        let c = greens_constant([row.x, x[1]], [self.x_src, y_src], self.k_ref)?;
        Ok(GreensEvaluation {
            psi: c.psi + sm.psi,
            grad: [c.grad[0] + sm.grad[0], c.grad[1] + sm.grad[1]],
        })
    }
}

/// Kernel evaluations over a fixed profile and frequency; per-source
/// transformed solutions are computed once and shared.
pub struct KernelCache {
    line: LineProfile,
    spec: QuadratureSpec,
    key: u64,
    sources: Mutex<HashMap<u64, Arc<SourceKernel>>>,
    shared: Mutex<HashMap<(u64, u64), Arc<SharedInterval>>>,
}

impl KernelCache {
    pub fn new(line: LineProfile, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let mut h = std::hash::DefaultHasher::new();
        line.profile().fingerprint().hash(&mut h);
        line.omega().to_bits().hash(&mut h);
        line.span().0.to_bits().hash(&mut h);
        line.span().1.to_bits().hash(&mut h);
        spec.panel_width.to_bits().hash(&mut h);
        spec.points.hash(&mut h);
        spec.cap_factor.to_bits().hash(&mut h);
        Ok(Self {
            line,
            spec,
            key: h.finish(),
            sources: Mutex::new(HashMap::new()),
            shared: Mutex::new(HashMap::new()),
        })
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn line(&self) -> &LineProfile {
        &self.line
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Reference wavenumber used for the subtraction at source abscissa `x`.
    pub fn k_ref(&self, x: f64) -> f64 {
        self.line.k(x)
    }

    /// Build (without memoizing) the transformed solutions for one source.
    pub fn build_source(&self, x_src: f64) -> Result<SourceKernel> {
        SourceKernel::build(&self.line, x_src, self.k_ref(x_src), &self.spec, Some(self))
    }

    fn shared_interval(&self, l0: f64, l1: f64) -> Result<Arc<SharedInterval>> {
        let key = (l0.to_bits(), l1.to_bits());
        if let Some(s) = self.shared.lock().expect("kernel cache lock").get(&key) {
            return Ok(s.clone());
        }
        let built = Arc::new(SharedInterval::new(&self.line, l0, l1, &self.spec)?);
        let mut map = self.shared.lock().expect("kernel cache lock");
        Ok(map.entry(key).or_insert(built).clone())
    }

    pub fn source(&self, x_src: f64) -> Result<Arc<SourceKernel>> {
        let key = x_src.to_bits();
        if let Some(s) = self.sources.lock().expect("kernel cache lock").get(&key) {
            return Ok(s.clone());
        }
        let built = Arc::new(self.build_source(x_src)?);
        let mut map = self.sources.lock().expect("kernel cache lock");
        Ok(map.entry(key).or_insert(built).clone())
    }

    pub fn evaluate(&self, x: [f64; 2], xs: [f64; 2]) -> Result<GreensEvaluation> {
        let src = self.source(xs[0])?;
        let row = src.row(x[0]);
        src.eval(&row, x, xs[1])
    }

    pub fn clear(&self) {
        self.sources.lock().expect("kernel cache lock").clear();
        self.shared.lock().expect("kernel cache lock").clear();
    }
}

/// Incident potential and gradient on the transformed field.
pub enum IncidentField {
    Plane {
        k: f64,
        dir: [f64; 2],
        amplitude: Complex64,
    },
    Refracted {
        lambda0: f64,
        line: Box<TransformedLine>,
        amplitude: Complex64,
    },
}

impl IncidentField {
    pub fn new(line: &LineProfile, env: &WaveEnvironment) -> Result<Self> {
        let dir = [env.theta.cos(), env.theta.sin()];
        if line.is_flat() {
            return Ok(IncidentField::Plane {
                k: line.k_a(),
                dir,
                amplitude: env.amplitude,
            });
        }
        if dir[0] <= 0.0 {
            return Err(Error::Config(
                "incident direction must enter the sloping region from x = a".into(),
            ));
        }
        let lambda0 = line.k_a() * dir[1];
        let sol = solve_incoming(line, lambda0.abs())?;
        Ok(IncidentField::Refracted {
            lambda0,
            line: Box::new(sol),
            amplitude: env.amplitude,
        })
    }

    pub fn eval(&self, p: [f64; 2]) -> (Complex64, [Complex64; 2]) {
        let iu = Complex64::i();
        match self {
            IncidentField::Plane { k, dir, amplitude } => {
                let v = amplitude * (iu * k * (dir[0] * p[0] + dir[1] * p[1])).exp();
                (v, [iu * k * dir[0] * v, iu * k * dir[1] * v])
            }
            IncidentField::Refracted {
                lambda0,
                line,
                amplitude,
            } => {
                let (u, ux) = line.eval(p[0]);
                let e = amplitude * (iu * lambda0 * p[1]).exp();
                (u * e, [ux * e, iu * lambda0 * u * e])
            }
        }
    }
}

/// One-off incident field evaluation; build an [`IncidentField`] for many points.
pub fn incident_field(
    line: &LineProfile,
    env: &WaveEnvironment,
    point: [f64; 2],
) -> Result<(Complex64, [Complex64; 2])> {
    Ok(IncidentField::new(line, env)?.eval(point))
}

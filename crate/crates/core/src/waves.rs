//! Linear wave physics: dispersion, phase/group speed, the Bergmann
//! substitution and the benchmark bathymetries.

use num_complex::Complex64;

/// Gravitational acceleration (m/s²).
pub const GRAVITY: f64 = 9.81;

const DISPERSION_TOL: f64 = 1e-14;

/// Frequency, direction and amplitude of the incident wave train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveEnvironment {
    pub omega: f64,
    pub theta: f64,
    /// Scale of the incident (transformed) potential.
    pub amplitude: Complex64,
}

impl WaveEnvironment {
    pub fn new(omega: f64, theta: f64) -> Self {
        assert!(omega > 0.0, "angular frequency must be positive");
        Self {
            omega,
            theta,
            amplitude: Complex64::new(1.0, 0.0),
        }
    }

    pub fn from_period(period: f64, theta: f64) -> Self {
        Self::new(2.0 * std::f64::consts::PI / period, theta)
    }

    pub fn with_amplitude(mut self, amplitude: Complex64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn gravity(&self) -> f64 {
        GRAVITY
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn state(&self, depth: f64) -> DispersionState {
        DispersionState::new(self.omega, depth)
    }
}

/// Positive root `k` of `ω² = g k tanh(k h)`.
pub fn solve_dispersion(omega: f64, h: f64) -> f64 {
    assert!(omega > 0.0 && h > 0.0, "dispersion needs ω > 0 and h > 0");
    let w2 = omega * omega;
    let k_deep = w2 / GRAVITY;
    let residual = |k: f64| GRAVITY * k * (k * h).tanh() - w2;

    let mut k = k_deep / (k_deep * h).tanh();
    let mut ok = false;
    for _ in 0..50 {
        let t = (k * h).tanh();
        let f = GRAVITY * k * t - w2;
        let df = GRAVITY * (t + k * h * (1.0 - t * t));
        let next = k - f / df;
        if !(next > 0.0) || !next.is_finite() {
            break;
        }
        let step = (next - k).abs();
        k = next;
        if step <= DISPERSION_TOL * k {
            ok = true;
            break;
        }
    }
    if ok && residual(k).abs() < 1e-12 * w2 {
        return k;
    }

    // bisection fallback; f is increasing in k
    let (mut lo, mut hi) = (1e-8, 10.0 * k_deep.max(w2.sqrt() / (GRAVITY * h).sqrt()));
    while residual(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < DISPERSION_TOL * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Phase speed `c = ω/k` and group speed `c_g = (c/2)(1 + 2kh/sinh 2kh)`.
pub fn velocities(k: f64, h: f64, omega: f64) -> (f64, f64) {
    let c = omega / k;
    let x = 2.0 * k * h;
    let ratio = if x > 700.0 {
        0.0
    } else if x < 1e-8 {
        1.0
    } else {
        x / x.sinh()
    };
    (c, 0.5 * c * (1.0 + ratio))
}

/// Per-point wave quantities for a given depth and frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionState {
    pub k: f64,
    pub c: f64,
    pub cg: f64,
    pub k_hat: f64,
    pub ccg: f64,
}

impl DispersionState {
    pub fn new(omega: f64, depth: f64) -> Self {
        let k = solve_dispersion(omega, depth);
        let (c, cg) = velocities(k, depth, omega);
        Self {
            k,
            c,
            cg,
            k_hat: k,
            ccg: c * cg,
        }
    }
}

/// Modified wave number at a point; the curvature correction is dropped so
/// `k̂ = k(h(x, y))`.
pub fn modified_wavenumber(env: &WaveEnvironment, bathymetry: &Bathymetry, x: f64, y: f64) -> f64 {
    solve_dispersion(env.omega, bathymetry.depth(x, y))
}

pub fn bergmann_forward(phi: Complex64, c: f64, cg: f64) -> Complex64 {
    phi * (c * cg).sqrt()
}

pub fn bergmann_inverse(phi_hat: Complex64, c: f64, cg: f64) -> Complex64 {
    phi_hat / (c * cg).sqrt()
}

/// Wave height `H = 2ω|φ|/g`.
pub fn wave_height(phi: Complex64, omega: f64) -> f64 {
    2.0 * omega * phi.norm() / GRAVITY
}

/// Depth of the parabolic shoal centred at (1.2, 1.2).
pub fn depth_circular_shoal(x: f64, y: f64) -> f64 {
    circular_shoal_depth((1.2, 1.2), x, y)
}

fn circular_shoal_depth(center: (f64, f64), x: f64, y: f64) -> f64 {
    let r = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
    if r < 0.8 {
        0.1 * (r / 0.8).powi(2) + 0.05
    } else {
        0.15
    }
}

/// Sloping beach component of the elliptic shoal bathymetry.
pub fn depth_elliptic_slope(x: f64) -> f64 {
    if x < -5.85 {
        0.45
    } else if x <= 14.15 {
        0.45 - 0.02 * (5.85 + x)
    } else {
        0.05
    }
}

/// Elliptic shoal perturbation; zero outside `(x/3)² + (y/4)² <= 1`.
pub fn depth_elliptic_shoal(x: f64, y: f64) -> f64 {
    if (x / 3.0).powi(2) + (y / 4.0).powi(2) <= 1.0 {
        let s = 1.0 - (x / 3.75).powi(2) - (y / 5.0).powi(2);
        0.3 - 0.5 * s.max(0.0).sqrt()
    } else {
        0.0
    }
}

pub fn depth_elliptic(x: f64, y: f64) -> f64 {
    depth_elliptic_slope(x) + depth_elliptic_shoal(x, y)
}

/// Depth varying along `x` only: piecewise linear between knots, flat
/// beyond the first and last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct XProfile {
    knots: Vec<(f64, f64)>,
}

impl XProfile {
    pub fn new(knots: Vec<(f64, f64)>) -> crate::Result<Self> {
        if knots.is_empty() {
            return Err(crate::Error::Config("profile needs at least one knot".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(crate::Error::Config("profile knots must increase in x".into()));
        }
        if knots.iter().any(|&(_, h)| !(h > 0.0)) {
            return Err(crate::Error::Config("profile depths must be positive".into()));
        }
        Ok(Self { knots })
    }

    pub fn flat(depth: f64) -> Self {
        Self {
            knots: vec![(0.0, depth)],
        }
    }

    /// The sloping beach of the elliptic-shoal case.
    pub fn elliptic_slope() -> Self {
        Self {
            knots: vec![(-5.85, 0.45), (14.15, 0.05)],
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Left end `a` of the variable part.
    pub fn a(&self) -> f64 {
        self.knots[0].0
    }

    /// Right end `c` of the variable part.
    pub fn c(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn depth_a(&self) -> f64 {
        self.knots[0].1
    }

    pub fn depth_c(&self) -> f64 {
        self.knots[self.knots.len() - 1].1
    }

    pub fn is_flat(&self) -> bool {
        self.knots.iter().all(|k| k.1 == self.knots[0].1)
    }

    pub fn depth(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        k[k.len() - 1].1
    }

    pub fn min_depth(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    /// Stable digest used as a cache key.
    pub fn fingerprint(&self) -> Vec<u64> {
        self.knots
            .iter()
            .flat_map(|&(x, h)| [x.to_bits(), h.to_bits()])
            .collect()
    }
}

/// Seabed depth field.
#[derive(Debug, Clone, PartialEq)]
pub enum Bathymetry {
    Constant { depth: f64 },
    CircularShoal { center: (f64, f64) },
    SlopeEllipticShoal,
    PiecewiseX(XProfile),
}

impl Bathymetry {
    pub fn circular_shoal() -> Self {
        Bathymetry::CircularShoal { center: (1.2, 1.2) }
    }

    pub fn depth(&self, x: f64, y: f64) -> f64 {
        match self {
            Bathymetry::Constant { depth } => *depth,
            Bathymetry::CircularShoal { center } => circular_shoal_depth(*center, x, y),
            Bathymetry::SlopeEllipticShoal => depth_elliptic(x, y),
            Bathymetry::PiecewiseX(p) => p.depth(x),
        }
    }

    /// Depth profile of the surrounding open region (straight, parallel
    /// contours), used to pick the boundary kernel and incident field.
    pub fn outer_profile(&self) -> XProfile {
        match self {
            Bathymetry::Constant { depth } => XProfile::flat(*depth),
            Bathymetry::CircularShoal { .. } => XProfile::flat(0.15),
            Bathymetry::SlopeEllipticShoal => XProfile::elliptic_slope(),
            Bathymetry::PiecewiseX(p) => p.clone(),
        }
    }

    /// Whether the depth has a derivative discontinuity inside the box.
    pub fn nonsmooth_in(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> bool {
        let inside = |x: f64, lo: f64, hi: f64| x > lo && x < hi;
        match self {
            Bathymetry::Constant { .. } => false,
            Bathymetry::CircularShoal { center } => {
                let r = 0.8;
                let nx = center.0.clamp(x0, x1);
                let ny = center.1.clamp(y0, y1);
                let near = ((nx - center.0).powi(2) + (ny - center.1).powi(2)).sqrt();
                let far = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
                    .iter()
                    .map(|&(x, y)| ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                near < r && far > r
            }
            Bathymetry::SlopeEllipticShoal => {
                let f = |x: f64, y: f64| (x / 3.0).powi(2) + (y / 4.0).powi(2);
                let lo = f(0.0f64.clamp(x0, x1), 0.0f64.clamp(y0, y1));
                let hi = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)]
                    .iter()
                    .map(|&(x, y)| f(x, y))
                    .fold(0.0, f64::max);
                (lo < 1.0 && hi > 1.0) || inside(-5.85, x0, x1) || inside(14.15, x0, x1)
            }
            Bathymetry::PiecewiseX(p) => p.knots().iter().any(|k| inside(k.0, x0, x1)),
        }
    }
}

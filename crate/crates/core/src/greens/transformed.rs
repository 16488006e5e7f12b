//! The 1D problem obtained by Fourier transforming the kernel equation in `y`:
//! `Psi'' + (k(x)^2 - lambda^2) Psi + delta(x - x') = 0` with radiation
//! conditions at both ends, solved with 1D spectral elements.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::specbasis::{DerivativeMatrix, LglRule};
use crate::waves::{solve_dispersion, XProfile};

const LINE_ORDER: usize = 10;
/// Element length times the largest local |kappa|.
const PHASE_PER_ELEMENT: f64 = 2.5;
const MAX_ELEMENT: f64 = 2.0;
/// Evanescent solutions are cut at `exp(-DECAY_CUT)`.
const DECAY_CUT: f64 = 36.0;

/// Wavenumber profile `k(x)` over a solve span `[lo, hi]` that contains the
/// variable part `[a, c]`; `k` is constant outside `[a, c]`.
#[derive(Debug, Clone)]
pub struct LineProfile {
    profile: XProfile,
    omega: f64,
    lo: f64,
    hi: f64,
    k_a: f64,
    k_c: f64,
    k_min: f64,
    k_max: f64,
}

impl LineProfile {
    pub fn new(profile: &XProfile, omega: f64, span: (f64, f64)) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::Config(format!("angular frequency must be positive, got {omega}")));
        }
        if !(span.1 > span.0) {
            return Err(Error::Config("kernel span must have positive length".into()));
        }
        let lo = span.0.min(profile.a());
        let hi = span.1.max(profile.c());
        let ks: Vec<f64> = profile.knots().iter().map(|&(_, h)| solve_dispersion(omega, h)).collect();
        let k_min = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let k_max = ks.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            profile: profile.clone(),
            omega,
            lo,
            hi,
            k_a: ks[0],
            k_c: ks[ks.len() - 1],
            k_min,
            k_max,
        })
    }

    pub fn profile(&self) -> &XProfile {
        &self.profile
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn span(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn k_a(&self) -> f64 {
        self.k_a
    }

    pub fn k_c(&self) -> f64 {
        self.k_c
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn is_flat(&self) -> bool {
        self.profile.is_flat()
    }

    pub fn k(&self, x: f64) -> f64 {
        if x <= self.profile.a() {
            self.k_a
        } else if x >= self.profile.c() {
            self.k_c
        } else {
            solve_dispersion(self.omega, self.profile.depth(x))
        }
    }

    fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.profile.knots().iter().map(|k| k.0)
    }
}

/// `sqrt(k^2 - lambda^2)` on the branch with non-negative imaginary part.
pub(crate) fn radiation_root(k: f64, lambda: f64) -> Complex64 {
    let d = k * k - lambda * lambda;
    if d >= 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-d).sqrt())
    }
}

/// Solution of the transformed problem for one `(lambda, x')`.
#[derive(Debug, Clone)]
pub struct TransformedLine {
    lambda: f64,
    source: f64,
    breaks: Vec<f64>,
    values: Vec<Complex64>,
    /// `d Psi / d t` at the nodes of each element, `p + 1` per element.
    slopes: Vec<Complex64>,
    alpha: Complex64,
    beta: Complex64,
    span: (f64, f64),
    window: (f64, f64),
}

struct LineBasis {
    rule: LglRule,
    d: DerivativeMatrix,
    stiff: Vec<f64>,
    bary: [f64; LINE_ORDER + 1],
}

impl LineBasis {
    /// Lagrange basis at `t`, or the index of the node `t` coincides with.
    fn lagrange(&self, t: f64) -> std::result::Result<[f64; LINE_ORDER + 1], usize> {
        let nodes = self.rule.nodes();
        let mut l = [0.0; LINE_ORDER + 1];
        let mut sum = 0.0;
        for j in 0..=LINE_ORDER {
            let d = t - nodes[j];
            if d == 0.0 {
                return Err(j);
            }
            l[j] = self.bary[j] / d;
            sum += l[j];
        }
        let inv = 1.0 / sum;
        for v in &mut l {
            *v *= inv;
        }
        Ok(l)
    }
}

fn line_basis() -> &'static LineBasis {
    static BASIS: std::sync::OnceLock<LineBasis> = std::sync::OnceLock::new();
    BASIS.get_or_init(|| {
        let rule = LglRule::new(LINE_ORDER).expect("valid order");
        let d = rule.derivative_matrix();
        let n = rule.len();
        let w = rule.weights();
        let mut stiff = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                stiff[i * n + j] = (0..n).map(|q| w[q] * d.get(q, i) * d.get(q, j)).sum();
            }
        }
        let nodes = rule.nodes();
        let mut bary = [1.0; LINE_ORDER + 1];
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    bary[j] /= nodes[j] - nodes[i];
                }
            }
        }
        LineBasis { rule, d, stiff, bary }
    })
}

/// Solve the transformed problem for transverse wavenumber `lambda >= 0`
/// and source position `source`.
pub fn solve_transformed_1d(line: &LineProfile, lambda: f64, source: f64) -> Result<TransformedLine> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("transverse wavenumber must be >= 0, got {lambda}")));
    }
    let (lo, hi) = line.span();
    if !(source >= lo && source <= hi) {
        return Err(Error::Domain(format!(
            "source x = {source} outside kernel span [{lo}, {hi}]"
        )));
    }
    solve_line(line, lambda, Load::Point(source))
}

/// Field of a unit-amplitude wave `e^{i alpha x}` entering from the left
/// end, with no point load.
pub(crate) fn solve_incoming(line: &LineProfile, lambda: f64) -> Result<TransformedLine> {
    solve_line(line, lambda, Load::Incoming)
}

/// Point load at one end of the span, solved over the whole span even
/// when the solution is evanescent.
pub(crate) fn solve_end_load(line: &LineProfile, lambda: f64, at_hi: bool) -> Result<TransformedLine> {
    let (lo, hi) = line.span();
    solve_line(line, lambda, Load::End(if at_hi { hi } else { lo }))
}

enum Load {
    Point(f64),
    End(f64),
    Incoming,
}

fn solve_line(line: &LineProfile, lambda: f64, load: Load) -> Result<TransformedLine> {
    let (lo, hi) = line.span();
    let source = match load {
        Load::Point(x) | Load::End(x) => x,
        Load::Incoming => lo,
    };
    let kappa_scale = (line.k_max * line.k_max - lambda * lambda)
        .abs()
        .max((lambda * lambda - line.k_min * line.k_min).abs())
        .sqrt();
    let h_max = if kappa_scale > 0.0 {
        (PHASE_PER_ELEMENT / kappa_scale).min(MAX_ELEMENT)
    } else {
        MAX_ELEMENT
    };

    let mut window = (lo, hi);
    if lambda > line.k_max && matches!(load, Load::Point(_)) {
        let q = (lambda * lambda - line.k_max * line.k_max).sqrt();
        let reach = DECAY_CUT / q;
        window = ((source - reach).max(lo), (source + reach).min(hi));
    }

    let mut cuts: Vec<f64> = vec![window.0, window.1, source];
    cuts.extend(line.breakpoints().filter(|&x| x > window.0 && x < window.1));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    let mut breaks = vec![cuts[0]];
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let n = (len / h_max).ceil().max(1.0) as usize;
        for s in 1..n {
            breaks.push(w[0] + len * s as f64 / n as f64);
        }
        breaks.push(w[1]);
    }
    if breaks.len() < 2 {
        return Err(Error::Domain("degenerate kernel window".into()));
    }

    let basis = line_basis();
    let p = LINE_ORDER;
    let n_el = breaks.len() - 1;
    let n = n_el * p + 1;
    let mut a = BandMatrix::zeros(n, p, p);
    let nodes = basis.rule.nodes();
    let w = basis.rule.weights();
    let lam2 = lambda * lambda;
    for e in 0..n_el {
        let (x0, x1) = (breaks[e], breaks[e + 1]);
        let half = 0.5 * (x1 - x0);
        for i in 0..=p {
            for j in 0..=p {
                let kij = basis.stiff[i * (p + 1) + j] / half;
                if kij != 0.0 {
                    a.add(e * p + i, e * p + j, Complex64::new(kij, 0.0));
                }
            }
            let x = x0 + half * (nodes[i] + 1.0);
            let k = line.k(x);
            let kappa2 = k * k - lam2;
            a.add(e * p + i, e * p + i, Complex64::new(-kappa2 * w[i] * half, 0.0));
        }
    }
    let alpha = radiation_root(line.k(window.0), lambda);
    let beta = radiation_root(line.k(window.1), lambda);
    let iu = Complex64::i();
    a.add(0, 0, -iu * alpha);
    a.add(n - 1, n - 1, -iu * beta);

    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    match load {
        Load::Point(_) | Load::End(_) => {
            let src_el = breaks
                .iter()
                .position(|&b| (b - source).abs() <= 1e-12 * (1.0 + source.abs()))
                .ok_or_else(|| Error::Internal("source is not an element break".into()))?;
            rhs[src_el * p] = Complex64::new(1.0, 0.0);
        }
        Load::Incoming => {
            // Psi' + i alpha Psi = 2 i alpha A at the left end, A = e^{i alpha lo}
            let amp = (iu * alpha * lo).exp();
            rhs[0] = -2.0 * iu * alpha * amp;
        }
    }
    let lu = a.lu()?;
    lu.solve_in_place(&mut rhs);

    Ok(TransformedLine {
        lambda,
        source,
        breaks,
        slopes: element_slopes(&rhs, n_el),
        values: rhs,
        alpha: radiation_root(line.k(lo), lambda),
        beta: radiation_root(line.k(hi), lambda),
        span: (lo, hi),
        window,
    })
}

fn element_slopes(values: &[Complex64], n_el: usize) -> Vec<Complex64> {
    let basis = line_basis();
    let p = LINE_ORDER;
    let mut out = Vec::with_capacity(n_el * (p + 1));
    for e in 0..n_el {
        let vals = &values[e * p..=e * p + p];
        for m in 0..=p {
            out.push(vals.iter().zip(basis.d.row(m)).map(|(v, d)| v * d).sum());
        }
    }
    out
}

impl TransformedLine {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn source(&self) -> f64 {
        self.source
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    /// Grid coordinates of the discrete solution.
    pub fn grid(&self) -> Vec<f64> {
        let nodes = line_basis().rule.nodes();
        let p = LINE_ORDER;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(self.breaks[0]);
        for w in self.breaks.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            out.extend(nodes[1..].iter().map(|&t| w[0] + half * (t + 1.0)));
        }
        debug_assert_eq!(out.len(), self.breaks.len() * p - p + 1);
        out
    }

    pub fn nodal_values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(Psi, Psi_x)` at `x`. At element breaks the derivative is the mean
    /// of the one-sided values.
    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let iu = Complex64::i();
        let (lo, hi) = self.span;
        if x < lo {
            let (v, _) = self.eval(lo);
            let f = v * (-iu * self.alpha * (x - lo)).exp();
            return (f, -iu * self.alpha * f);
        }
        if x > hi {
            let (v, _) = self.eval(hi);
            let f = v * (iu * self.beta * (x - hi)).exp();
            return (f, iu * self.beta * f);
        }
        if x < self.window.0 || x > self.window.1 {
            return (zero, zero);
        }
        let nb = self.breaks.len();
        let e = match self.breaks.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => {
                let slopes: Vec<Complex64> = [i.checked_sub(1), (i + 1 < nb).then_some(i)]
                    .into_iter()
                    .flatten()
                    .map(|e| self.element_eval(e, x).1)
                    .collect();
                let v = self.values[i * LINE_ORDER];
                let d = slopes.iter().sum::<Complex64>() / slopes.len() as f64;
                return (v, d);
            }
            Err(i) => i - 1,
        };
        self.element_eval(e, x)
    }

    fn element_eval(&self, e: usize, x: f64) -> (Complex64, Complex64) {
        let basis = line_basis();
        let p = LINE_ORDER;
        let (x0, x1) = (self.breaks[e], self.breaks[e + 1]);
        let half = 0.5 * (x1 - x0);
        let t = ((x - x0) / half - 1.0).clamp(-1.0, 1.0);
        let vals = &self.values[e * p..=e * p + p];
        let slopes = &self.slopes[e * (p + 1)..(e + 1) * (p + 1)];
        match basis.lagrange(t) {
            Ok(l) => {
                let mut v = Complex64::new(0.0, 0.0);
                let mut d = Complex64::new(0.0, 0.0);
                for j in 0..=p {
                    v += vals[j] * l[j];
                    d += slopes[j] * l[j];
                }
                (v, d / half)
            }
            Err(j) => (vals[j], slopes[j] / half),
        }
    }
}

/// Closed-form transformed kernel for constant `k`: `(i / 2 gamma) e^{i gamma |dx|}`
/// and its `x` derivative (zero at `dx = 0`).
pub(crate) fn transformed_constant(k: f64, lambda: f64, dx: f64) -> (Complex64, Complex64) {
    let r = k * k - lambda * lambda;
    let a = dx.abs();
    let (v, dv) = if r > 0.0 {
        let g = r.sqrt();
        let (s, c) = (g * a).sin_cos();
        let v = Complex64::new(-s, c) / (2.0 * g);
        (v, Complex64::new(-v.im, v.re) * g)
    } else {
        let q = (-r).sqrt();
        let v = (-q * a).exp() / (2.0 * q);
        (Complex64::new(v, 0.0), Complex64::new(-q * v, 0.0))
    };
    let d = if dx == 0.0 { Complex64::new(0.0, 0.0) } else { dv * dx.signum() };
    (v, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_line(depth: f64, omega: f64) -> LineProfile {
        LineProfile::new(&XProfile::flat(depth), omega, (-3.0, 3.0)).unwrap()
    }

    #[test]
    fn constant_profile_matches_closed_form() {
        let line = flat_line(0.3, 7.0);
        let k = line.k(0.0);
        for &lambda in &[0.0, 0.3 * k, 0.99 * k, 1.01 * k, 2.0 * k, 10.0 * k] {
            let src = 0.37;
            let sol = solve_transformed_1d(&line, lambda, src).unwrap();
            for &x in &[-2.9, -1.0, 0.0, 0.37, 0.5, 2.2, 3.0, 4.5, -5.0] {
                let (v, d) = sol.eval(x);
                let (ve, de) = transformed_constant(k, lambda, x - src);
                let peak = 0.5 / radiation_root(k, lambda).norm();
                assert!((v - ve).norm() < 1e-9 * peak, "lambda={lambda} x={x} {v} vs {ve}");
                if x != src {
                    assert!((d - de).norm() < 1e-8, "lambda={lambda} x={x}");
                }
            }
        }
    }

    #[test]
    fn unit_source_at_zero_lambda() {
        let line = flat_line(0.5, 5.0);
        let k = line.k(0.0);
        let sol = solve_transformed_1d(&line, 0.0, 0.0).unwrap();
        let (v, _) = sol.eval(1.0);
        let expect = Complex64::i() / (2.0 * k) * Complex64::from_polar(1.0, k);
        assert!((v - expect).norm() < 1e-10);
    }

    #[test]
    fn evanescent_decay() {
        let line = flat_line(0.5, 5.0);
        let k = line.k(0.0);
        let lambda = 3.0 * k;
        let q = (lambda * lambda - k * k).sqrt();
        let sol = solve_transformed_1d(&line, lambda, 0.0).unwrap();
        let r = sol.eval(0.4).0.norm() / sol.eval(0.0).0.norm();
        assert!((r - (-q * 0.4).exp()).abs() < 1e-9);
    }

    #[test]
    fn reciprocity_on_sloping_profile() {
        let profile = XProfile::new(vec![(-1.0, 0.4), (1.5, 0.08)]).unwrap();
        let line = LineProfile::new(&profile, 6.0, (-2.0, 2.0)).unwrap();
        for &lambda in &[0.0, 4.0, 9.0, 30.0] {
            let (x1, x2) = (-0.7, 1.1);
            let a = solve_transformed_1d(&line, lambda, x1).unwrap().eval(x2).0;
            let b = solve_transformed_1d(&line, lambda, x2).unwrap().eval(x1).0;
            assert!((a - b).norm() < 1e-8 * a.norm().max(1e-12), "lambda={lambda}");
        }
    }

    #[test]
    fn radiation_conditions_hold() {
        let profile = XProfile::new(vec![(-1.0, 0.4), (1.5, 0.08)]).unwrap();
        let line = LineProfile::new(&profile, 6.0, (-1.0, 1.5)).unwrap();
        let lambda = 2.0;
        let sol = solve_transformed_1d(&line, lambda, 0.2).unwrap();
        let iu = Complex64::i();
        let (va, da) = sol.eval(-1.0 - 1e-9);
        let alpha = radiation_root(line.k_a(), lambda);
        assert!((da + iu * alpha * va).norm() < 1e-8 * va.norm());
        let (vc, dc) = sol.eval(1.5 + 1e-9);
        let beta = radiation_root(line.k_c(), lambda);
        assert!((dc - iu * beta * vc).norm() < 1e-8 * vc.norm());
    }

    #[test]
    fn derivative_jump_at_source() {
        let profile = XProfile::new(vec![(-1.0, 0.4), (1.5, 0.08)]).unwrap();
        let line = LineProfile::new(&profile, 6.0, (-1.0, 1.5)).unwrap();
        let sol = solve_transformed_1d(&line, 3.0, 0.3).unwrap();
        let left = sol.eval(0.3 - 1e-7).1;
        let right = sol.eval(0.3 + 1e-7).1;
        assert!((right - left + 1.0).norm() < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let line = flat_line(0.5, 5.0);
        assert!(solve_transformed_1d(&line, -1.0, 0.0).is_err());
        assert!(solve_transformed_1d(&line, 1.0, 10.0).is_err());
    }
}

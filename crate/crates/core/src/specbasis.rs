//! Legendre polynomials, Legendre-Gauss-Lobatto rules, nodal Lagrange bases
//! and plain Gauss-Legendre rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Highest supported element order.
pub const MAX_ORDER: usize = 32;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Value and first derivative of the Legendre polynomial `P_p` at `x`.
pub fn legendre_eval(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    for n in 1..p {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        // P'_{n+1} = P'_{n-1} + (2n+1) P_n
        let d2 = d0 + (2.0 * nf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Legendre-Gauss-Lobatto nodes and weights of order `p` (p+1 points).
#[derive(Debug, Clone, PartialEq)]
pub struct LglRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    bary: Vec<f64>,
}

impl LglRule {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > MAX_ORDER {
            return Err(Error::Config(format!(
                "element order must lie in 1..={MAX_ORDER}, got {p}"
            )));
        }
        let mut nodes = vec![0.0; p + 1];
        nodes[0] = -1.0;
        nodes[p] = 1.0;
        let pf = p as f64;
        for j in 1..p {
            // Chebyshev-Lobatto initial guess, Newton on P'_p using
            // P''_p = (2x P'_p - p(p+1) P_p) / (1 - x^2).
            let mut x = -(PI * j as f64 / pf).cos();
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let (v, d) = legendre_eval(p, x);
                let dd = (2.0 * x * d - pf * (pf + 1.0) * v) / (1.0 - x * x);
                let step = d / dd;
                x -= step;
                if step.abs() < NEWTON_TOL {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Internal(format!(
                    "LGL Newton iteration did not converge for p={p}, node {j}"
                )));
            }
            nodes[j] = x;
        }
        // enforce exact symmetry
        for j in 0..=p / 2 {
            let s = 0.5 * (nodes[p - j] - nodes[j]);
            nodes[j] = -s;
            nodes[p - j] = s;
        }
        if p % 2 == 0 {
            nodes[p / 2] = 0.0;
        }
        // final polish: pick the representable neighbour with the smallest
        // residual on both mirrored nodes
        for j in 1..(p + 1) / 2 {
            let s = nodes[p - j];
            let resid = |x: f64| legendre_eval(p, x).1.abs().max(legendre_eval(p, -x).1.abs());
            let mut best = (resid(s), s);
            let mut up = s;
            let mut down = s;
            for _ in 0..16 {
                up = up.next_up();
                down = down.next_down();
                for x in [up, down] {
                    let r = resid(x);
                    if r < best.0 {
                        best = (r, x);
                    }
                }
            }
            nodes[j] = -best.1;
            nodes[p - j] = best.1;
        }
        let weights = nodes
            .iter()
            .map(|&x| {
                let (v, _) = legendre_eval(p, x);
                2.0 / (pf * (pf + 1.0) * v * v)
            })
            .collect();
        let bary = barycentric_weights(&nodes);
        Ok(Self {
            order: p,
            nodes,
            weights,
            bary,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value of the nodal basis function `L_m` at `xi`.
    pub fn lagrange(&self, m: usize, xi: f64) -> f64 {
        if let Some(k) = self.nodes.iter().position(|&x| x == xi) {
            return if k == m { 1.0 } else { 0.0 };
        }
        let den: f64 = self
            .nodes
            .iter()
            .zip(&self.bary)
            .map(|(&x, &b)| b / (xi - x))
            .sum();
        (self.bary[m] / (xi - self.nodes[m])) / den
    }

    /// All basis values `L_0(xi) .. L_p(xi)` at once.
    pub fn lagrange_all(&self, xi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.lagrange_into(xi, &mut out);
        out
    }

    pub fn lagrange_into(&self, xi: f64, out: &mut [f64]) {
        if let Some(k) = self.nodes.iter().position(|&x| x == xi) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[k] = 1.0;
            return;
        }
        let mut den = 0.0;
        for (j, (&x, &b)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let t = b / (xi - x);
            out[j] = t;
            den += t;
        }
        out.iter_mut().for_each(|v| *v /= den);
    }

    /// Derivatives `L'_0(xi) .. L'_p(xi)`.
    pub fn lagrange_derivative_all(&self, xi: f64) -> Vec<f64> {
        let n = self.len();
        if let Some(k) = self.nodes.iter().position(|&x| x == xi) {
            let d = self.derivative_matrix();
            return (0..n).map(|j| d.get(k, j)).collect();
        }
        // l(x) = sum_j b_j/(x-x_j) f_j / sum_j b_j/(x-x_j); differentiate the
        // barycentric quotient for each cardinal function.
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut t = vec![0.0; n];
        for j in 0..n {
            let r = 1.0 / (xi - self.nodes[j]);
            t[j] = self.bary[j] * r;
            s0 += t[j];
            s1 -= t[j] * r;
        }
        (0..n)
            .map(|j| {
                let r = 1.0 / (xi - self.nodes[j]);
                let dt = -t[j] * r;
                (dt * s0 - t[j] * s1) / (s0 * s0)
            })
            .collect()
    }

    /// Differentiation matrix `D[i][j] = L'_j(xi_i)`.
    pub fn derivative_matrix(&self) -> DerivativeMatrix {
        let n = self.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = self.bary[j] / self.bary[i] / (self.nodes[i] - self.nodes[j]);
                    data[i * n + j] = v;
                    diag -= v;
                }
            }
            // negative-sum trick keeps rows summing to zero
            data[i * n + i] = diag;
        }
        DerivativeMatrix { n, data }
    }

    /// Interpolate nodal values at `xi`.
    pub fn interpolate<T>(&self, values: &[T], xi: f64) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let l = self.lagrange_all(xi);
        values.iter().zip(&l).map(|(&v, &w)| v * w).sum()
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= nodes[j] - nodes[k];
            }
        }
    }
    w
}

/// Square matrix of nodal basis derivatives, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DerivativeMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(samples).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Standard Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::Config(format!(
                "Gauss rule size must lie in 1..=64, got {n}"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut d = 1.0;
            for _ in 0..NEWTON_MAX_ITER {
                let (v, dv) = legendre_eval(n, x);
                d = dv;
                let step = v / dv;
                x -= step;
                if step.abs() < NEWTON_TOL {
                    let (_, dv) = legendre_eval(n, x);
                    d = dv;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * d * d);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        F: FnMut(f64) -> T,
        T: std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(c + h * x) * (w * h))
            .sum()
    }
}

/// Convenience wrapper returning the LGL rule of order `p`.
pub fn lgl_rule(p: usize) -> Result<LglRule> {
    LglRule::new(p)
}

/// Convenience wrapper returning the `n`-point Gauss-Legendre rule.
pub fn gauss_rule(n: usize) -> Result<GaussRule> {
    GaussRule::new(n)
}

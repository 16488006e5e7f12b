//! Fundamental solutions of the transformed mild-slope equation.
//!
//! The constant-depth kernel is `(i/4) H0(k r)`. Over a bathymetry that
//! varies only with `x` the kernel is recovered from a family of 1D problems
//! in the transverse wavenumber by an inverse cosine transform.

pub mod hankel;
mod transformed;
mod variable;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use hankel::{bessel01, hankel1_0, hankel1_1, Bessel01};
pub use transformed::{solve_transformed_1d, LineProfile, TransformedLine};
pub use variable::{incident_field, DiffRow, IncidentField, KernelCache, QuadratureSpec, SourceKernel};

pub(crate) use hankel::EULER_GAMMA;

/// Kernel value and its gradient with respect to the field point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreensEvaluation {
    pub psi: Complex64,
    pub grad: [Complex64; 2],
}

impl GreensEvaluation {
    /// Normal derivative `grad . n`.
    pub fn normal_derivative(&self, n: [f64; 2]) -> Complex64 {
        self.grad[0] * n[0] + self.grad[1] * n[1]
    }
}

/// `psi = (i/4) H0(k r)` and its gradient at `x` for a source at `xs`.
pub fn greens_constant(x: [f64; 2], xs: [f64; 2], k: f64) -> Result<GreensEvaluation> {
    let dx = x[0] - xs[0];
    let dy = x[1] - xs[1];
    let r = dx.hypot(dy);
    if r == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let b = bessel01(k * r)?;
    let quarter_i = Complex64::new(0.0, 0.25);
    let psi = quarter_i * b.h0();
    let dpsi_dr = -quarter_i * k * b.h1();
    Ok(GreensEvaluation {
        psi,
        grad: [dpsi_dr * (dx / r), dpsi_dr * (dy / r)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_distance_value() {
        let g = greens_constant([1.0, 0.0], [0.0, 0.0], 1.0).unwrap();
        assert!((g.psi.re + 0.02207).abs() < 1e-5);
        assert!((g.psi.im - 0.19130).abs() < 1e-5);
    }

    #[test]
    fn small_argument_expansion() {
        let k = 3.0;
        let mut prev = f64::INFINITY;
        for &s in &[1e-2, 1e-3, 1e-4] {
            let g = greens_constant([s, 0.0], [0.0, 0.0], k).unwrap();
            let lead = Complex64::new(
                -((k * s / 2.0).ln() + EULER_GAMMA) / (2.0 * PI),
                0.25,
            );
            let d = (g.psi - lead).norm();
            let ks = k * s;
            assert!(d < 2.0 * ks * ks * (1.0 - ks.ln()));
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn reciprocity_and_gradient() {
        let a = [0.3, -1.2];
        let b = [2.1, 0.4];
        let k = 5.5;
        let g1 = greens_constant(a, b, k).unwrap();
        let g2 = greens_constant(b, a, k).unwrap();
        assert_eq!(g1.psi, g2.psi);
        let h = 1e-6;
        for d in 0..2 {
            let mut p = a;
            let mut m = a;
            p[d] += h;
            m[d] -= h;
            let fd = (greens_constant(p, b, k).unwrap().psi - greens_constant(m, b, k).unwrap().psi)
                / (2.0 * h);
            assert!((fd - g1.grad[d]).norm() < 1e-7);
        }
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(matches!(
            greens_constant([1.0, 1.0], [1.0, 1.0], 2.0),
            Err(Error::CoincidentPoints)
        ));
    }
}

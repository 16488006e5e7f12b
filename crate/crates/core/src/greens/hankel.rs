//! Bessel functions of integer order 0 and 1 and the Hankel functions of the
//! first kind built from them.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 8.0;
const ASYMPTOTIC_MIN: f64 = 25.0;

/// `J_0, Y_0, J_1, Y_1` at a single argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bessel01 {
    pub j0: f64,
    pub y0: f64,
    pub j1: f64,
    pub y1: f64,
}

impl Bessel01 {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

pub fn bessel01(z: f64) -> Result<Bessel01> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel argument must be positive and finite, got {z}"
        )));
    }
    Ok(if z <= SERIES_MAX {
        ascending(z)
    } else if z <= ASYMPTOTIC_MIN {
        miller(z)
    } else {
        asymptotic(z)
    })
}

pub fn hankel1_0(z: f64) -> Result<Complex64> {
    bessel01(z).map(|b| b.h0())
}

pub fn hankel1_1(z: f64) -> Result<Complex64> {
    bessel01(z).map(|b| b.h1())
}

fn ascending(z: f64) -> Bessel01 {
    let q = 0.25 * z * z;
    let half = 0.5 * z;
    let lg = half.ln() + EULER_GAMMA;

    // term_m = (-q)^m / (m!)^2
    let mut term = 1.0;
    let mut j0 = 1.0;
    let mut harm = 0.0;
    let mut ysum = 0.0;
    // term1_m = (-q)^m / (m! (m+1)!)
    let mut term1 = 1.0;
    let mut j1s = 1.0;
    // psi(m+1) + psi(m+2) without the -2 gamma part
    let mut y1s = 1.0;
    for m in 1..60 {
        let mf = m as f64;
        term *= -q / (mf * mf);
        harm += 1.0 / mf;
        j0 += term;
        ysum -= harm * term;
        term1 *= -q / (mf * (mf + 1.0));
        j1s += term1;
        y1s += (2.0 * harm + 1.0 / (mf + 1.0)) * term1;
        if term.abs() < 1e-18 * j0.abs().max(1e-300) && term1.abs() < 1e-18 {
            break;
        }
    }
    let j1 = half * j1s;
    let y0 = FRAC_2_PI * (lg * j0 + ysum);
    // Y1 = -2/(pi z) + (2/pi) ln(z/2) J1 - (1/pi) sum (-q)^m (psi(m+1)+psi(m+2)) (z/2) / (m!(m+1)!)
    let psi_sum = y1s - 2.0 * EULER_GAMMA * j1s;
    let y1 = -FRAC_2_PI / z + FRAC_2_PI * half.ln() * j1 - half * psi_sum / PI;
    Bessel01 { j0, y0, j1, y1 }
}

fn miller(z: f64) -> Bessel01 {
    let mut n = (z as usize + 40) & !1;
    if n < 2 {
        n = 2;
    }
    let mut jn = vec![0.0; n + 2];
    jn[n] = 1e-30;
    for k in (1..=n).rev() {
        jn[k - 1] = 2.0 * k as f64 / z * jn[k] - jn[k + 1];
        if jn[k - 1].abs() > 1e250 {
            for v in jn[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = jn[0] + 2.0 * jn.iter().skip(2).step_by(2).sum::<f64>();
    jn.iter_mut().for_each(|v| *v /= norm);

    let lg = (0.5 * z).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut sign = -1.0;
    for k in 1..=n / 2 {
        let kf = k as f64;
        s0 += sign * jn[2 * k] / kf;
        if 2 * k + 1 <= n {
            s1 += sign * (2.0 * kf + 1.0) / (kf * (kf + 1.0)) * jn[2 * k + 1];
        }
        sign = -sign;
    }
    let (j0, j1) = (jn[0], jn[1]);
    let y0 = FRAC_2_PI * (lg * j0 - 2.0 * s0);
    let y1 = FRAC_2_PI * ((lg - 1.0) * j1 - j0 / z - s1);
    Bessel01 { j0, y0, j1, y1 }
}

fn asymptotic(z: f64) -> Bessel01 {
    let h0 = asymptotic_hankel(0.0, z);
    let h1 = asymptotic_hankel(1.0, z);
    Bessel01 {
        j0: h0.re,
        y0: h0.im,
        j1: h1.re,
        y1: h1.im,
    }
}

fn asymptotic_hankel(nu: f64, z: f64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut a = Complex64::new(1.0, 0.0);
    let mut sum = a;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= Complex64::new(0.0, (mu - odd * odd) / (kf * 8.0 * z));
        let mag = a.norm();
        if mag > prev {
            break;
        }
        sum += a;
        prev = mag;
        if mag < 1e-17 {
            break;
        }
    }
    let phase = z - nu * 0.5 * PI - FRAC_PI_4;
    (2.0 / (PI * z)).sqrt() * Complex64::from_polar(1.0, phase) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    // 30-digit reference values: z, [J0, Y0, J1, Y1]
    const REFERENCE: &[(f64, [f64; 4])] = &[
        (1e-6, [0.99999999999975, -8.8690314816594437029, 4.999999999999375e-7, -636619.77237217501376]),
        (0.01, [0.99997500015624956597, -3.0054556370836459578, 0.0049999375002604161241, -63.678596282060656374]),
        (0.5, [0.93846980724081290423, -0.44451873350670655715, 0.24226845767487388638, -1.4714723926702430692]),
        (1.0, [0.76519768655796655145, 0.088256964215676957983, 0.44005058574493351596, -0.78121282130028871655]),
        (5.0, [-0.17759677131433830435, -0.30851762524903378007, -0.32757913759146522204, 0.1478631433912268448]),
        (7.99, [0.17399001312793263252, 0.22192874178576449894, 0.23320071425350174304, -0.16048695141166469696]),
        (8.01, [0.1692973691105429142, 0.22508990929357916758, 0.23604710363083402796, -0.15562145403809819948]),
        (12.5, [0.14688405470042110231, -0.17121430684466928735, -0.16548380461475971846, -0.15383825653750118008]),
        (20.0, [0.16702466434058315473, 0.062640596809383831162, 0.066833124175850045579, -0.16551161436252129586]),
        (24.99, [0.095008236967548321198, -0.1282315498864509101, -0.12635698500780503915, -0.097591842102019159146]),
        (25.01, [0.097515201593195513016, -0.12625498512516853894, -0.12433140440396825069, -0.10005772718567949341]),
        (40.0, [0.0073668905842372895535, 0.12593641705826092925, 0.12603831803758499921, -0.0057935058215496329412]),
        (150.0, [-0.00077409037539429124695, -0.065142221509037354596, -0.065145163657727360305, 0.0005569563495608399837]),
    ];

    #[test]
    fn matches_reference() {
        for &(z, [j0, y0, j1, y1]) in REFERENCE {
            let b = bessel01(z).unwrap();
            let e0 = (b.h0() - Complex64::new(j0, y0)).norm() / Complex64::new(j0, y0).norm();
            let e1 = (b.h1() - Complex64::new(j1, y1)).norm() / Complex64::new(j1, y1).norm();
            assert!(e0 < 1e-10, "z={z} H0 rel err {e0:e}");
            assert!(e1 < 1e-10, "z={z} H1 rel err {e1:e}");
        }
    }

    #[test]
    fn unit_argument() {
        let h = hankel1_0(1.0).unwrap();
        assert!((h.re - 0.7652).abs() < 1e-4 && (h.im - 0.0883).abs() < 1e-4);
    }

    #[test]
    fn wronskian() {
        let mut z = 0.05;
        while z < 200.0 {
            let b = bessel01(z).unwrap();
            let w = b.j0 * b.y1 - b.j1 * b.y0;
            let expect = -2.0 / (PI * z);
            assert!((w - expect).abs() < 1e-10 * expect.abs().max(1.0), "z={z}");
            z *= 1.07;
        }
    }

    #[test]
    fn small_argument_limit() {
        let z = 1e-5;
        let h = hankel1_0(z).unwrap();
        let lead = Complex64::new(1.0, FRAC_2_PI * ((0.5 * z).ln() + EULER_GAMMA));
        assert!((h - lead).norm() < 1e-9);
    }

    #[test]
    fn continuity_across_branches() {
        for &edge in &[SERIES_MAX, ASYMPTOTIC_MIN] {
            let below = bessel01(edge * (1.0 - 1e-12)).unwrap();
            let above = bessel01(edge * (1.0 + 1e-12)).unwrap();
            assert!((below.h0() - above.h0()).norm() < 1e-10);
            assert!((below.h1() - above.h1()).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(hankel1_0(0.0).is_err());
        assert!(hankel1_1(-1.0).is_err());
        assert!(hankel1_0(f64::NAN).is_err());
    }
}

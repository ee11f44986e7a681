//! Integer-order Bessel functions of orders 0 and 1 and the second-kind
//! Hankel functions built from them.
//!
//! Three regimes are used, each accurate to a few ulps of the result:
//!
//! * `x <= 2`: ascending power series.
//! * `2 < x <= 25`: Miller's backward recurrence for `J_n`, normalised with
//!   `J_0 + 2 sum J_2k = 1`, and Neumann series for `Y_0`, `Y_1`.
//! * `x > 25`: Hankel asymptotic expansion truncated at the smallest term.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 2.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// `J0, J1, Y0, Y1` evaluated together at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bessel01 {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Bessel01 {
    pub fn hankel2_0(&self) -> Complex64 {
        Complex64::new(self.j0, -self.y0)
    }

    pub fn hankel2_1(&self) -> Complex64 {
        Complex64::new(self.j1, -self.y1)
    }
}

/// Evaluates `J0, J1, Y0, Y1` at `x > 0`.
pub fn bessel01(x: f64) -> Result<Bessel01> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel functions of the second kind need a finite x > 0, got {x}"
        )));
    }
    Ok(if x <= SERIES_LIMIT {
        ascending_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        miller_neumann(x)
    } else {
        hankel_asymptotic(x)
    })
}

/// `J0(x)` for any real `x`.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        1.0
    } else {
        bessel01(x).map(|b| b.j0).unwrap_or(f64::NAN)
    }
}

/// `J1(x)` for any real `x` (odd function).
pub fn j1(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let v = bessel01(x.abs()).map(|b| b.j1).unwrap_or(f64::NAN);
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `H0^(2)(x) = J0(x) - i Y0(x)`, the outgoing-wave kernel for the
/// `e^{jωt}` time convention.
pub fn hankel2_0(x: f64) -> Result<Complex64> {
    bessel01(x).map(|b| b.hankel2_0())
}

/// `H1^(2)(x) = J1(x) - i Y1(x)`.
pub fn hankel2_1(x: f64) -> Result<Complex64> {
    bessel01(x).map(|b| b.hankel2_1())
}

fn ascending_series(x: f64) -> Bessel01 {
    let half = 0.5 * x;
    let t = half * half;
    let log_term = half.ln() + EULER_GAMMA;

    // term0_k = (-t)^k / (k!)^2, term1_k = (-t)^k / (k! (k+1)!)
    let mut term0 = 1.0;
    let mut term1 = 1.0;
    let mut j0 = 1.0;
    let mut j1 = 1.0;
    let mut harmonic = 0.0;
    let mut y0_sum = 0.0;
    // (H_0 + H_1) * term1_0
    let mut y1_sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term0 *= -t / (kf * kf);
        term1 *= -t / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        j0 += term0;
        j1 += term1;
        y0_sum -= harmonic * term0;
        y1_sum += (2.0 * harmonic + 1.0 / (kf + 1.0)) * term1;
        if term0.abs() < 1e-18 * j0.abs() && term1.abs() < 1e-18 {
            break;
        }
    }
    let j1 = half * j1;
    let y0 = FRAC_2_PI * (log_term * j0 + y0_sum);
    let y1 = -FRAC_2_PI / x + FRAC_2_PI * log_term * j1 - half * y1_sum / PI;
    Bessel01 { j0, j1, y0, y1 }
}

fn miller_neumann(x: f64) -> Bessel01 {
    // Start far enough above x that J_start(x) is below double precision.
    let start = 2 * ((x as usize + 50) / 2);
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut norm = 0.0;
    let mut y0_sum = 0.0;
    let mut y1_sum = 0.0;
    let mut j1 = 0.0;
    let j0;
    let mut k = start;
    loop {
        // `current` holds the unnormalised J_k.
        if k == 1 {
            j1 = current;
        }
        if k == 0 {
            j0 = current;
            norm += current;
            break;
        }
        if k % 2 == 0 {
            norm += 2.0 * current;
            let half_k = (k / 2) as f64;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            y0_sum += sign * current / half_k;
        } else if k > 1 {
            let kf = k as f64;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            y1_sum += sign * kf / (kf * kf - 1.0) * current;
        }
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        k -= 1;
        if current.abs() > 1e250 {
            let s = 1e-250;
            current *= s;
            above *= s;
            norm *= s;
            y0_sum *= s;
            y1_sum *= s;
            j1 *= s;
        }
    }
    let j0 = j0 / norm;
    let j1 = j1 / norm;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = FRAC_2_PI * (log_term * j0 - 2.0 * y0_sum / norm);
    let y1 = FRAC_2_PI * ((log_term - 1.0) * j1 - j0 / x - 4.0 * y1_sum / norm);
    Bessel01 { j0, j1, y0, y1 }
}

/// Returns `(P, Q)` of the Hankel expansion for integer order `nu`.
fn asymptotic_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..80 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = a.abs();
        if mag >= last || mag < 1e-18 {
            break;
        }
        last = mag;
        // a_k / x^k alternates between Q (odd k) and P (even k) with sign (-1)^(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
    }
    (p, q)
}

fn hankel_asymptotic(x: f64) -> Bessel01 {
    let amp = (FRAC_2_PI / x).sqrt();
    let (p0, q0) = asymptotic_pq(0.0, x);
    let (p1, q1) = asymptotic_pq(1.0, x);
    let chi0 = x - FRAC_PI_4;
    let chi1 = x - 3.0 * FRAC_PI_4;
    let (s0, c0) = chi0.sin_cos();
    let (s1, c1) = chi1.sin_cos();
    Bessel01 {
        j0: amp * (p0 * c0 - q0 * s0),
        y0: amp * (p0 * s0 + q0 * c0),
        j1: amp * (p1 * c1 - q1 * s1),
        y1: amp * (p1 * s1 + q1 * c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from standard tables.
    #[test]
    fn tabulated_values() {
        let b = bessel01(1.0).unwrap();
        assert_relative_eq!(b.j0, 0.765_197_686_557_966_6, max_relative = 1e-14);
        assert_relative_eq!(b.j1, 0.440_050_585_744_933_5, max_relative = 1e-14);
        assert_relative_eq!(b.y0, 0.088_256_964_215_676_96, max_relative = 1e-13);
        assert_relative_eq!(b.y1, -0.781_212_821_300_288_7, max_relative = 1e-14);

        let b = bessel01(10.0).unwrap();
        assert_relative_eq!(b.j0, -0.245_935_764_451_348_3, max_relative = 1e-13);
        assert_relative_eq!(b.y0, 0.055_671_167_283_599_39, max_relative = 1e-12);
        assert_relative_eq!(b.j1, 0.043_472_746_168_861_44, max_relative = 1e-12);
        assert_relative_eq!(b.y1, 0.249_015_424_206_953_9, max_relative = 1e-13);
    }

    #[test]
    fn zero_and_negative_arguments_are_domain_errors() {
        assert!(matches!(hankel2_0(0.0), Err(Error::Domain(_))));
        assert!(matches!(hankel2_0(-1.0), Err(Error::Domain(_))));
        assert!(matches!(hankel2_0(f64::NAN), Err(Error::Domain(_))));
        assert_eq!(j0(0.0), 1.0);
        assert_eq!(j1(0.0), 0.0);
        assert_eq!(j1(-1.0), -j1(1.0));
    }

    #[test]
    fn regimes_join_continuously() {
        for &edge in &[SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            let lo = bessel01(edge).unwrap();
            let hi = bessel01(edge * (1.0 + 1e-12)).unwrap();
            for (a, b) in [(lo.j0, hi.j0), (lo.j1, hi.j1), (lo.y0, hi.y0), (lo.y1, hi.y1)] {
                assert!((a - b).abs() < 1e-11, "jump at {edge}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn large_argument_matches_leading_asymptotic_term() {
        let x = 50.0;
        let h = hankel2_0(x).unwrap();
        let leading = (2.0 / (PI * x)).sqrt() * Complex64::new(0.0, -(x - FRAC_PI_4)).exp();
        // The first neglected term has relative size 1/(8x).
        let rel = (h - leading).norm() / leading.norm();
        assert!(rel < 1.05 / (8.0 * x), "rel {rel}");
        let two_term = leading * Complex64::new(1.0, 1.0 / (8.0 * x));
        assert!((h - two_term).norm() / leading.norm() < 1e-4);
    }
}

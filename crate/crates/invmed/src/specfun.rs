//! Cylinder functions of order zero and one on the positive real axis.
//!
//! The scattering kernel of the two-dimensional Helmholtz equation is the
//! first-kind Hankel function `H0(z) = J0(z) + i Y0(z)`, and the Fourier
//! symbol of its truncation additionally needs `J1`/`Y1`. Only orders zero
//! and one are provided; nothing here attempts general order or complex
//! argument.
//!
//! Each function is evaluated by an ascending power series for
//! `z <= SWITCHOVER` and by the Hankel large-argument expansion
//!
//! ```text
//! Hnu(z) ~ sqrt(2/(pi z)) * exp(i(z - nu pi/2 - pi/4)) * sum_j i^j a_j(nu) / z^j
//! ```
//!
//! above it. The switchover point is chosen so that both branches deliver
//! about 1e-11 absolute accuracy where they meet: the alternating series
//! loses roughly `log10(I0(z))` digits to cancellation (acceptable up to
//! `z ~ 15`), while the asymptotic tail bottoms out below 1e-11 once
//! `z > 11`.

use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Euler-Mascheroni constant, used by the `Y` series.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Branch switch between the ascending series and the asymptotic expansion.
const SWITCHOVER: f64 = 12.0;

/// Terms of the asymptotic expansion are added while they keep shrinking;
/// this caps the tail for arguments just above the switchover.
const ASYMPTOTIC_MAX_TERMS: usize = 40;

fn check_domain(z: f64, name: &str, allow_zero: bool) -> Result<()> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("{name}: argument {z} is not finite")));
    }
    if z < 0.0 || (z == 0.0 && !allow_zero) {
        return Err(Error::Domain(format!(
            "{name}: argument {z} outside the supported domain"
        )));
    }
    Ok(())
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(z: f64) -> Result<f64> {
    check_domain(z, "bessel_j0", true)?;
    if z <= SWITCHOVER {
        Ok(j0_series(z))
    } else {
        Ok(hankel_asymptotic(0, z).re)
    }
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(z: f64) -> Result<f64> {
    check_domain(z, "bessel_j1", true)?;
    if z <= SWITCHOVER {
        Ok(j1_series(z))
    } else {
        Ok(hankel_asymptotic(1, z).re)
    }
}

/// Bessel function of the second kind, order zero. Diverges to `-inf`
/// logarithmically as `z -> 0+`, so zero is excluded from the domain.
pub fn bessel_y0(z: f64) -> Result<f64> {
    check_domain(z, "bessel_y0", false)?;
    if z <= SWITCHOVER {
        Ok(y0_series(z))
    } else {
        Ok(hankel_asymptotic(0, z).im)
    }
}

/// Bessel function of the second kind, order one.
pub fn bessel_y1(z: f64) -> Result<f64> {
    check_domain(z, "bessel_y1", false)?;
    if z <= SWITCHOVER {
        Ok(y1_series(z))
    } else {
        Ok(hankel_asymptotic(1, z).im)
    }
}

/// First-kind Hankel function of order zero, `J0(z) + i Y0(z)`.
///
/// The result is assembled componentwise from [`bessel_j0`] and
/// [`bessel_y0`], so it is exactly consistent with them.
pub fn hankel0_first(z: f64) -> Result<Complex64> {
    Ok(Complex64::new(bessel_j0(z)?, bessel_y0(z)?))
}

/// First-kind Hankel function of order one, `J1(z) + i Y1(z)`.
pub fn hankel1_first(z: f64) -> Result<Complex64> {
    Ok(Complex64::new(bessel_j1(z)?, bessel_y1(z)?))
}

// ---- ascending series ----------------------------------------------------

/// `J0(z) = sum_m (-1)^m (z^2/4)^m / (m!)^2`.
fn j0_series(z: f64) -> f64 {
    let w = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=200u32 {
        term *= -w / ((m as f64) * (m as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

/// `J1(z) = (z/2) sum_m (-1)^m (z^2/4)^m / (m! (m+1)!)`.
fn j1_series(z: f64) -> f64 {
    let w = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=200u32 {
        term *= -w / ((m as f64) * (m as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    0.5 * z * sum
}

/// `Y0(z) = (2/pi) [ (ln(z/2) + gamma) J0(z) + sum_{m>=1} (-1)^{m+1} H_m (z^2/4)^m / (m!)^2 ]`
/// with `H_m` the m-th harmonic number.
fn y0_series(z: f64) -> f64 {
    let w = 0.25 * z * z;
    let mut term = 1.0; // (z^2/4)^m / (m!)^2, starting at m = 0
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for m in 1..=200u32 {
        term *= w / ((m as f64) * (m as f64));
        harmonic += 1.0 / m as f64;
        sum += sign * harmonic * term;
        if term * harmonic < 1e-18 * sum.abs().max(1.0) {
            break;
        }
        sign = -sign;
    }
    (2.0 / PI) * (((0.5 * z).ln() + EULER_GAMMA) * j0_series(z) + sum)
}

/// `Y1(z) = (2/pi)(ln(z/2) + gamma) J1(z) - 2/(pi z)
///          - (z/(2 pi)) sum_m (-1)^m (H_m + H_{m+1}) (z^2/4)^m / (m! (m+1)!)`.
fn y1_series(z: f64) -> f64 {
    let w = 0.25 * z * z;
    let mut term = 1.0; // (z^2/4)^m / (m! (m+1)!)
    let mut h_m = 0.0;
    let mut h_m1 = 1.0;
    let mut sum = h_m + h_m1; // m = 0 contribution
    let mut sign = -1.0;
    for m in 1..=200u32 {
        term *= w / ((m as f64) * (m as f64 + 1.0));
        h_m += 1.0 / m as f64;
        h_m1 += 1.0 / (m as f64 + 1.0);
        sum += sign * (h_m + h_m1) * term;
        if term * (h_m + h_m1) < 1e-18 * sum.abs().max(1.0) {
            break;
        }
        sign = -sign;
    }
    (2.0 / PI) * ((0.5 * z).ln() + EULER_GAMMA) * j1_series(z) - 2.0 / (PI * z)
        - z / (2.0 * PI) * sum
}

// ---- asymptotic branch ---------------------------------------------------

/// Hankel's expansion of `Hnu(z)` for large arguments. The coefficients
/// follow the recurrence `a_j = a_{j-1} (4 nu^2 - (2j-1)^2) / (8 j)` and the
/// sum is truncated at the smallest term, whose size bounds the error.
fn hankel_asymptotic(nu: u32, z: f64) -> Complex64 {
    let four_nu2 = 4.0 * (nu * nu) as f64;
    let mut coeff = 1.0f64;
    let mut power = Complex64::new(1.0, 0.0); // i^j / z^j
    let i_over_z = Complex64::new(0.0, 1.0 / z);
    let mut sum = Complex64::new(1.0, 0.0);
    let mut last = 1.0f64;
    for j in 1..=ASYMPTOTIC_MAX_TERMS {
        let jf = j as f64;
        coeff *= (four_nu2 - (2.0 * jf - 1.0) * (2.0 * jf - 1.0)) / (8.0 * jf);
        power *= i_over_z;
        let mag = coeff.abs() / z.powi(j as i32);
        if mag >= last {
            break; // divergent tail reached; stop at the optimal truncation
        }
        sum += power * coeff;
        last = mag;
        if mag < 1e-18 {
            break;
        }
    }
    let phase = z - 0.5 * PI * nu as f64 - 0.25 * PI;
    (2.0 / (PI * z)).sqrt() * Complex64::new(phase.cos(), phase.sin()) * sum
}

//! Complex gamma and upper incomplete gamma functions, principal branch.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const MAX_ITER: usize = 5000;
const EPS: f64 = 1e-16;

/// Complex gamma function (Lanczos with reflection).
pub fn gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (z * PI).sin();
        return Complex64::from(PI) / (s * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::from(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

fn nonpositive_integer(s: Complex64) -> Option<i64> {
    if s.im == 0.0 && s.re <= 0.0 && s.re.fract() == 0.0 {
        Some(s.re as i64)
    } else {
        None
    }
}

fn positive_integer(s: Complex64) -> bool {
    s.im == 0.0 && s.re >= 1.0 && s.re.fract() == 0.0
}

/// `gamma(s) - gamma_lower(s, z)` by the power series of the lower function.
fn series(s: Complex64, z: Complex64) -> Result<Complex64> {
    let mut term = Complex64::from(1.0);
    let mut sum = 1.0 / s;
    for k in 1..MAX_ITER {
        term *= -z / k as f64;
        let add = term / (s + k as f64);
        sum += add;
        if add.norm() <= EPS * sum.norm() {
            return Ok(gamma(s) - z.powc(s) * sum);
        }
    }
    Err(Error::NonConvergence { what: "incomplete gamma series".into(), estimate: term.norm() })
}

/// Exponential integral E1 via its series; small `|z|` only.
fn e1_series(z: Complex64) -> Result<Complex64> {
    let mut term = Complex64::from(1.0);
    let mut sum = Complex64::from(0.0);
    for k in 1..MAX_ITER {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.norm() <= EPS * sum.norm().max(1e-300) {
            return Ok(-EULER_GAMMA - z.ln() - sum);
        }
    }
    Err(Error::NonConvergence { what: "E1 series".into(), estimate: term.norm() })
}

/// Legendre continued fraction, modified Lentz.
fn continued_fraction(s: Complex64, z: Complex64) -> Result<Complex64> {
    let tiny = 1e-300;
    let mut b = z + 1.0 - s;
    let mut c = Complex64::from(1.0 / tiny);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (Complex64::from(i as f64) - s);
        b += 2.0;
        d = an * d + b;
        if d.norm() < tiny {
            d = Complex64::from(tiny);
        }
        c = b + an / c;
        if c.norm() < tiny {
            c = Complex64::from(tiny);
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).norm() < EPS {
            return Ok((-z).exp() * z.powc(s) * h);
        }
    }
    Err(Error::NonConvergence { what: "incomplete gamma continued fraction".into(), estimate: h.norm() })
}

/// Upper incomplete gamma `Gamma(s, z) = int_z^inf t^(s-1) e^(-t) dt`,
/// continued analytically from the principal branch of `t^(s-1)`.
pub fn upper_incomplete_gamma(s: Complex64, z: Complex64) -> Result<Complex64> {
    if !(s.re.is_finite() && s.im.is_finite() && z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::invalid("non-finite argument to incomplete gamma"));
    }
    if z.im == 0.0 && z.re < 0.0 && !positive_integer(s) {
        return Err(Error::BranchAmbiguity(format!(
            "Gamma({s}, {z}): argument on the negative real axis"
        )));
    }
    if z == Complex64::from(0.0) {
        if s.re > 0.0 {
            return Ok(gamma(s));
        }
        return Err(Error::invalid("Gamma(s, 0) diverges for Re(s) <= 0"));
    }
    let r = z.norm();
    let use_series = r < 2.5 || (z.re < 0.0 && z.im.abs() < 3.0);
    if !use_series {
        return continued_fraction(s, z);
    }
    if let Some(n) = nonpositive_integer(s) {
        let mut g = e1_series(z)?;
        let ez = (-z).exp();
        for k in 1..=(-n) {
            let sk = -(k as f64);
            g = (g - z.powf(sk) * ez) / sk;
        }
        return Ok(g);
    }
    let k = s.re.round();
    if k <= 0.0 && (s - k).norm() < 1e-4 {
        // Too close to a pole of gamma(s): climb to s + m and recur down.
        let m = (1.0 - k) as i64;
        let mut g = series(s + m as f64, z)?;
        let ez = (-z).exp();
        for j in (0..m).rev() {
            let sj = s + j as f64;
            g = (g - z.powc(sj) * ez) / sj;
        }
        return Ok(g);
    }
    series(s, z)
}

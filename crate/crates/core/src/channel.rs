//! Composite channel gain, rate/SIR mapping and the shadowing-fading ratio
//! factors `Q` and `V`.

use crate::error::{Error, Result};
use crate::numerics::quadrature::{hermite, Quadrature};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

/// `ln(10) / 10`, the dB-to-neper factor applied to shadowing.
pub const C: f64 = std::f64::consts::LN_10 / 10.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path-loss exponent, `> 2`.
    pub beta: f64,
    /// Shadowing deviation in dB.
    pub sigma: f64,
    /// Antenna-gain constant, linear.
    pub k: f64,
    /// SIR gap, linear.
    pub delta: f64,
    /// Bandwidth; 1 in normalised-rate mode.
    pub bw: f64,
}

impl ChannelParams {
    pub fn new(beta: f64, sigma: f64, k: f64, delta: f64, bw: f64) -> Result<Self> {
        let p = Self { beta, sigma, k, delta, bw };
        p.check()?;
        Ok(p)
    }

    /// Build from dB-valued `K` and `Delta`.
    pub fn from_db(beta: f64, sigma: f64, k_db: f64, delta_db: f64, bw: f64) -> Result<Self> {
        Self::new(beta, sigma, db_to_linear(k_db), db_to_linear(delta_db), bw)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.beta > 2.0) {
            return Err(Error::invalid(format!("path-loss exponent {} must exceed 2", self.beta)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("shadowing deviation must be >= 0"));
        }
        if !(self.k > 0.0) || !(self.delta >= 1.0) || !(self.bw > 0.0) {
            return Err(Error::invalid("need K > 0, Delta >= 1 (0 dB), bandwidth > 0"));
        }
        Ok(())
    }

    /// Stable index `2 / beta`.
    pub fn p(&self) -> f64 {
        2.0 / self.beta
    }

    /// `L = K r^(-beta) exp(c sigma xi) zeta2`.
    pub fn channel_gain(&self, r: f64, xi: f64, zeta2: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::invalid("link distance must be positive"));
        }
        Ok(self.k * r.powf(-self.beta) * (C * self.sigma * xi).exp() * zeta2)
    }

    /// `gamma = Delta (2^(rho / B_W) - 1)`.
    pub fn rate_to_sir(&self, rho: f64) -> f64 {
        self.delta * (rho / self.bw).exp2().sub_one()
    }

    /// Natural log of [`Self::rate_to_sir`], stable for large rates.
    pub fn ln_sir(&self, rho: f64) -> f64 {
        let x = rho / self.bw * LN_2;
        self.delta.ln() + x + (-(-x).exp()).ln_1p()
    }

    /// SIR density implied by Pareto rates.
    pub fn sir_pdf(&self, z: f64, theta: f64, rho_min: f64) -> f64 {
        let z0 = self.rate_to_sir(rho_min);
        if z <= z0 {
            return 0.0;
        }
        let l = (1.0 + z / self.delta).log2();
        theta * rho_min.powf(theta) * self.bw.powf(-theta) / (LN_2 * (self.delta + z)) * l.powf(-theta - 1.0)
    }

    pub fn sir_cdf(&self, z: f64, theta: f64, rho_min: f64) -> f64 {
        let z0 = self.rate_to_sir(rho_min);
        if z <= z0 {
            return 0.0;
        }
        let rho = self.bw * (1.0 + z / self.delta).log2();
        1.0 - (rho_min / rho).powf(theta)
    }
}

trait SubOne {
    fn sub_one(self) -> f64;
}

impl SubOne for f64 {
    fn sub_one(self) -> f64 {
        self - 1.0
    }
}

fn hermite64() -> &'static [(f64, f64)] {
    static H: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    H.get_or_init(|| hermite(64))
}

fn hermite40() -> &'static [(f64, f64)] {
    static H: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    H.get_or_init(|| hermite(40))
}

/// `E[g(s W)]` for standard normal `W`: Gauss-Hermite at two orders, falling
/// back to adaptive quadrature when they disagree.
fn normal_expectation<F: Fn(f64) -> f64>(g: F, s: f64, centre: f64) -> Result<f64> {
    let gh = |rule: &[(f64, f64)]| -> f64 {
        rule.iter().map(|(t, w)| w * g(std::f64::consts::SQRT_2 * s * t)).sum::<f64>() / PI.sqrt()
    };
    let a = gh(hermite64());
    let b = gh(hermite40());
    if (a - b).abs() <= 1e-9 * a.abs().max(1e-300) {
        return Ok(a);
    }
    let phi = |t: f64| (-0.5 * (t / s).powi(2)).exp() / (s * (2.0 * PI).sqrt());
    let lo = (-12.0 * s).min(centre - 40.0);
    let hi = (12.0 * s).max(centre + 40.0);
    let q = Quadrature { abs_tol: 1e-13, rel_tol: 1e-11, max_intervals: 4000, scale: 1.0 };
    let mut total = 0.0;
    let mut edges = vec![lo, hi];
    if centre > lo && centre < hi {
        edges.insert(1, centre);
    }
    for e in edges.windows(2) {
        total += q.integrate(|t| phi(t) * g(t), e[0], e[1])?.value;
    }
    Ok(total)
}

/// Density of `Q = exp(c sigma (xi1 - xi2)) zeta1^2 / zeta2^2`.
///
/// `f_Q(x) = int_R phi_W(t) e^t / (e^t + x)^2 dt`, `W ~ N(0, 2 c^2 sigma^2)`.
pub fn q_ratio_pdf(x: f64, sigma: f64) -> Result<f64> {
    if !(x >= 0.0) || !(sigma >= 0.0) {
        return Err(Error::invalid("q_ratio_pdf needs x >= 0 and sigma >= 0"));
    }
    if sigma == 0.0 {
        return Ok(1.0 / (1.0 + x).powi(2));
    }
    let s = std::f64::consts::SQRT_2 * C * sigma;
    let centre = if x > 0.0 { x.ln() } else { 0.0 };
    normal_expectation(
        |t| {
            // e^t/(e^t+x)^2 written to avoid overflow
            if t > 0.0 {
                let e = (-t).exp();
                e / (1.0 + x * e).powi(2)
            } else {
                let e = t.exp();
                e / (e + x).powi(2)
            }
        },
        s,
        centre,
    )
}

/// `E[Q^(2/beta)] = 2 pi / (beta sin(2 pi / beta)) exp(4 c^2 sigma^2 / beta^2)`.
pub fn q_moment(beta: f64, sigma: f64) -> Result<f64> {
    if !(beta > 2.0) {
        return Err(Error::invalid("Q moment needs beta > 2"));
    }
    let cs = C * sigma;
    Ok(2.0 * PI / (beta * (2.0 * PI / beta).sin()) * (4.0 * cs * cs / (beta * beta)).exp())
}

/// Density of `V = exp(-c sigma xi) / zeta^2`.
pub fn v_factor_pdf(x: f64, sigma: f64) -> Result<f64> {
    if !(x > 0.0) || !(sigma >= 0.0) {
        return Err(Error::invalid("v_factor_pdf needs x > 0 and sigma >= 0"));
    }
    if sigma == 0.0 {
        return Ok((-1.0 / x).exp() / (x * x));
    }
    let s = C * sigma;
    let lx = x.ln();
    // f_V(x) = E_t[ e^t exp(-e^t / x) ] / x^2 with t ~ N(0, s^2)
    let v = normal_expectation(|t| (t - lx - (t - lx).exp()).exp(), s, lx)?;
    Ok(v / x)
}

/// Numerical moment `int_0^inf x^p f(x) dx` in log coordinates.
pub fn log_moment<F: Fn(f64) -> Result<f64>>(f: F, p: f64, lo: f64, hi: f64) -> Result<f64> {
    let q = Quadrature { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000, scale: 1.0 };
    let err = std::cell::Cell::new(None);
    let g = |u: f64| {
        let x = u.exp();
        match f(x) {
            Ok(v) => v * x.powf(p) * x,
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    let mut total = 0.0;
    let edges = [lo, -10.0, 0.0, 10.0, 30.0, hi];
    for e in edges.windows(2) {
        if e[1] > e[0] {
            total += q.integrate(&g, e[0], e[1])?.value;
        }
    }
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(total)
}

pub fn sample_q<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let x1: f64 = StandardNormal.sample(rng);
    let x2: f64 = StandardNormal.sample(rng);
    let z1: f64 = Exp1.sample(rng);
    let z2: f64 = Exp1.sample(rng);
    (C * sigma * (x1 - x2)).exp() * z1 / z2
}

pub fn sample_v<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let x: f64 = StandardNormal.sample(rng);
    let z: f64 = Exp1.sample(rng);
    (-C * sigma * x).exp() / z
}

//! Rate-averaged kernels behind the receiving-power and total-power CFs.
//!
//! Both CFs reduce to `J(a) = E_u[k(a + p ln gamma(u))]` with `u` the
//! bandwidth-normalised Pareto rate, `gamma(u) = Delta (2^u - 1)` and a
//! complex kernel of `z = exp(x - j pi/beta)`:
//!
//! * logistic `z / (1 + z)` for the total transmit power,
//! * `1 - exp(-z)` for the receiving power.
//!
//! Since `ln gamma` grows linearly in `u`, `k` switches from 0 to 1 over a
//! window of a few dozen units around `u* = (-a/p - ln Delta) / ln 2`, and
//! `J` is a windowed Gauss-Legendre sum plus the closed-form Pareto tail
//! above the window. For very large `u*` it tends to
//! `(u_min/u*)^theta + (m0/kappa) f(u*)` with `kappa = p ln 2` and
//! `m0 = int (k(x) - H(x)) dx`.

use crate::channel::C;
use crate::exec::Exec;
use crate::numerics::quadrature::{legendre, Quadrature};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Logistic,
    Exp,
}

impl KernelKind {
    /// Kernel value at `z = exp(x - j phase)`.
    #[inline]
    pub fn eval(self, x: f64, phase: f64) -> Complex64 {
        let x = x.clamp(-700.0, 700.0);
        match self {
            KernelKind::Logistic => {
                // z/(1+z) = 1/(1 + exp(-x + j phase))
                let e = Complex64::from_polar((-x).exp(), phase);
                1.0 / (1.0 + e)
            }
            KernelKind::Exp => {
                let z = Complex64::from_polar(x.exp(), -phase);
                if x < -18.0 {
                    z - z * z * 0.5
                } else {
                    1.0 - (-z).exp()
                }
            }
        }
    }
}

/// Pareto law of `u = rho / B_W` and the SIR map.
#[derive(Debug, Clone, Copy)]
pub struct RateLaw {
    pub theta: f64,
    pub u_min: f64,
    pub ln_delta: f64,
    /// `2 / beta`.
    pub p: f64,
}

impl RateLaw {
    #[inline]
    pub fn ln_gamma(&self, u: f64) -> f64 {
        let x = u * LN_2;
        self.ln_delta + x + (-(-x).exp()).ln_1p()
    }

    #[inline]
    pub fn pdf(&self, u: f64) -> f64 {
        self.theta * self.u_min.powf(self.theta) / u.powf(self.theta + 1.0)
    }

    pub fn kappa(&self) -> f64 {
        self.p * LN_2
    }

    /// Centre of the switching window.
    pub fn u_star(&self, a: f64) -> f64 {
        (-a / self.p - self.ln_delta) / LN_2
    }
}

const WINDOW: f64 = 130.0;

/// `J(a)` by windowed quadrature.
pub fn j_direct(kind: KernelKind, a: f64, law: &RateLaw, phase: f64, rule: &[(f64, f64)]) -> Complex64 {
    let us = law.u_star(a);
    let lo = law.u_min.max(us - WINDOW);
    let hi = law.u_min.max(us) + WINDOW;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut left = lo;
    while left < hi {
        let width = (0.5 * left).clamp(1e-3, 1.0);
        let right = (left + width).min(hi);
        let h = 0.5 * (right - left);
        let c = 0.5 * (right + left);
        for &(x, w) in rule {
            let u = c + h * x;
            acc += kind.eval(a + law.p * law.ln_gamma(u), phase) * (h * w * law.pdf(u));
        }
        left = right;
    }
    acc + (law.u_min / hi).powf(law.theta)
}

/// `m0 = int_R (k(x - j phase) - H(x)) dx`.
pub fn m0(kind: KernelKind, phase: f64) -> Complex64 {
    let q = Quadrature { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 2000, scale: 1.0 };
    let lower = q.integrate(|x| kind.eval(x, phase), -60.0, 0.0).map(|r| r.value).unwrap_or_default();
    let upper = q
        .integrate(|x| kind.eval(x, phase) - 1.0, 0.0, 60.0)
        .map(|r| r.value)
        .unwrap_or_default();
    lower + upper
}

/// Large-`u*` form of `J`.
pub fn j_asymptotic(a: f64, law: &RateLaw, m0: Complex64) -> Complex64 {
    let us = law.u_star(a);
    (law.u_min / us).powf(law.theta) + m0 * (law.pdf(us) / law.kappa())
}

/// `J` tabulated on a uniform grid in `a`.
#[derive(Debug, Clone)]
pub struct JTable {
    pub kind: KernelKind,
    pub law: RateLaw,
    pub phase: f64,
    a_lo: f64,
    step: f64,
    vals: Vec<Complex64>,
    m0: Complex64,
}

/// Above the window the kernel is 1 to double precision.
const UPPER_MARGIN: f64 = 45.0;
/// `u*` beyond which the asymptotic form is used.
const ASYMPTOTIC_U: f64 = 2000.0;

impl JTable {
    pub fn new(kind: KernelKind, law: RateLaw, phase: f64, step: f64, exec: Exec) -> Self {
        let a_hi = UPPER_MARGIN - law.p * law.ln_gamma(law.u_min);
        let a_lo = -law.p * (law.ln_delta + ASYMPTOTIC_U * LN_2);
        let n = ((a_hi - a_lo) / step).ceil() as usize + 1;
        let rule = legendre(8);
        let vals = exec.map_range(n, |i| j_direct(kind, a_lo + step * i as f64, &law, phase, &rule));
        Self { kind, law, phase, a_lo, step, vals, m0: m0(kind, phase) }
    }

    pub fn a_range(&self) -> (f64, f64) {
        (self.a_lo, self.a_lo + self.step * (self.vals.len() - 1) as f64)
    }

    #[inline]
    pub fn eval(&self, a: f64) -> Complex64 {
        if a < self.a_lo {
            return j_asymptotic(a, &self.law, self.m0);
        }
        let t = (a - self.a_lo) / self.step;
        let i = t.floor() as usize;
        if i + 1 >= self.vals.len() {
            return Complex64::new(1.0, 0.0);
        }
        let f = t - i as f64;
        self.vals[i] * (1.0 - f) + self.vals[i + 1] * f
    }
}

/// Discretised law of `y = ln V`, `V = exp(-c sigma xi) / zeta^2`.
#[derive(Debug, Clone)]
pub struct LnVGrid {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl LnVGrid {
    /// `y = -c sigma xi - t` with `t = ln zeta^2` of density `exp(t - e^t)`.
    pub fn new(sigma: f64) -> Self {
        let cs = C * sigma;
        let dy = 0.05;
        let n = ((50.0 + 18.0 * cs) / dy).ceil() as usize;
        let y: Vec<f64> = (0..=n).map(|i| -5.0 - 9.0 * cs + dy * i as f64).collect();
        let f: Vec<f64> = if cs == 0.0 {
            y.iter().map(|&y| (-y - (-y).exp()).exp()).collect()
        } else {
            let dt = 0.02;
            let ts: Vec<f64> = (0..2500).map(|i| -45.0 + dt * i as f64).collect();
            let ft: Vec<f64> = ts.iter().map(|&t| (t - t.exp()).exp()).collect();
            let norm = dt / (cs * (2.0 * PI).sqrt());
            y.iter()
                .map(|&y| {
                    ts.iter()
                        .zip(&ft)
                        .map(|(&t, &g)| g * (-0.5 * ((-y - t) / cs).powi(2)).exp())
                        .sum::<f64>()
                        * norm
                })
                .collect()
        };
        let mut ys = Vec::new();
        let mut ws = Vec::new();
        for (yy, ff) in y.into_iter().zip(f) {
            if ff * dy > 1e-20 {
                ys.push(yy);
                ws.push(ff * dy);
            }
        }
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
        Self { y: ys, w: ws }
    }

    /// `E[V^q]` under the grid.
    pub fn moment(&self, q: f64) -> f64 {
        self.y.iter().zip(&self.w).map(|(y, w)| w * (q * y).exp()).sum()
    }
}

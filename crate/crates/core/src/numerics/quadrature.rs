//! Adaptive Gauss-Kronrod (7/15) quadrature for real and complex integrands,
//! plus fixed Gauss-Legendre panel rules used by the hot loops.

use crate::error::{Error, Result};
use gauss_quad::{GaussHermite, GaussLegendre};
use num_complex::Complex64;
use std::num::NonZeroUsize;
use std::ops::{Add, Mul, Sub};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Scalar types the integrator can accumulate.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_err: f64,
    pub evals: usize,
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Length scale for the map of `[a, inf)` onto `[0, 1)`.
    pub scale: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-10,
            max_intervals: 2000,
            scale: 1.0,
        }
    }
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

fn gk15<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k = k + s * WGK[i];
        if i % 2 == 1 {
            g = g + s * WG[i / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

impl Quadrature {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Integrate over `[a, b]`; `b` may be `f64::INFINITY`.
    pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(&self, f: F, a: f64, b: f64) -> Result<QuadResult<T>> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(Error::invalid(format!("bad limits [{a}, {b}]")));
        }
        if a == b {
            return Ok(QuadResult { value: T::zero(), abs_err: 0.0, evals: 0 });
        }
        if b.is_infinite() {
            if a.is_infinite() {
                return Err(Error::invalid("both limits infinite"));
            }
            let h = self.scale;
            let g = move |u: f64| {
                let d = 1.0 - u;
                f(a + h * u / d) * (h / (d * d))
            };
            return self.adaptive(&g, 0.0, 1.0);
        }
        self.adaptive(&f, a, b)
    }

    fn adaptive<T: QuadValue, F: Fn(f64) -> T>(&self, f: &F, a: f64, b: f64) -> Result<QuadResult<T>> {
        let (v, e) = gk15(f, a, b);
        let mut segs = vec![Segment { a, b, value: v, err: e }];
        let mut evals = 15;
        loop {
            let total = segs.iter().fold(T::zero(), |s, g| s + g.value);
            let err: f64 = segs.iter().map(|g| g.err).sum();
            let target = self.abs_tol.max(self.rel_tol * total.magnitude());
            if err <= target {
                return Ok(QuadResult { value: total, abs_err: err, evals });
            }
            if segs.len() >= self.max_intervals {
                return Err(Error::NonConvergence {
                    what: "adaptive quadrature".into(),
                    estimate: err,
                });
            }
            let (idx, _) = segs
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, g)| if g.err > best.1 { (i, g.err) } else { best });
            let s = segs.swap_remove(idx);
            let m = 0.5 * (s.a + s.b);
            if m <= s.a || m >= s.b {
                return Err(Error::NonConvergence {
                    what: "adaptive quadrature (interval underflow)".into(),
                    estimate: err,
                });
            }
            let (v1, e1) = gk15(f, s.a, m);
            let (v2, e2) = gk15(f, m, s.b);
            evals += 30;
            segs.push(Segment { a: s.a, b: m, value: v1, err: e1 });
            segs.push(Segment { a: m, b: s.b, value: v2, err: e2 });
        }
    }
}

/// Adaptive integral of a real or complex integrand to absolute tolerance `tol`.
/// For `b = +inf` the decay length defaults to 1; use [`Quadrature::scale`]
/// when the integrand lives on another scale.
pub fn integrate_adaptive<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: f64) -> Result<T> {
    Ok(Quadrature::with_tol(tol).integrate(f, a, b)?.value)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn legendre(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let q = GaussLegendre::new(n);
    let mut v: Vec<(f64, f64)> = q.as_node_weight_pairs().iter().copied().collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Gauss-Hermite nodes and weights for weight `exp(-x^2)`.
pub fn hermite(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    let q = GaussHermite::new(n);
    let mut v: Vec<(f64, f64)> = q.as_node_weight_pairs().iter().copied().collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Composite Gauss-Legendre nodes over consecutive panels given by `edges`.
pub fn panel_nodes(edges: &[f64], rule: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(edges.len() * rule.len());
    let mut ws = Vec::with_capacity(edges.len() * rule.len());
    for e in edges.windows(2) {
        let h = 0.5 * (e[1] - e[0]);
        let c = 0.5 * (e[1] + e[0]);
        for &(x, w) in rule {
            xs.push(c + h * x);
            ws.push(h * w);
        }
    }
    (xs, ws)
}

/// Trapezoid rule on a sampled grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exponential_tail() {
        let v: f64 = integrate_adaptive(|t: f64| (-t).exp(), 0.0, f64::INFINITY, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn arctan_pi() {
        let v: f64 = integrate_adaptive(|t: f64| 4.0 / (1.0 + t * t), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - PI).abs() < 1e-12);
    }

    #[test]
    fn complex_integrand() {
        // int_0^pi e^{jt} dt = 2j
        let v: Complex64 =
            integrate_adaptive(|t: f64| Complex64::new(0.0, t).exp(), 0.0, PI, 1e-12).unwrap();
        assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-11);
    }

    #[test]
    fn cap_reports_estimate() {
        let q = Quadrature { abs_tol: 1e-15, rel_tol: 0.0, max_intervals: 4, scale: 1.0 };
        match q.integrate(|t: f64| (1.0 / t).sin(), 1e-3, 1.0) {
            Err(Error::NonConvergence { estimate, .. }) => assert!(estimate > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn legendre_panels_integrate_polynomials() {
        let rule = legendre(8);
        let edges: Vec<f64> = (0..=4).map(|i| i as f64 * 0.5).collect();
        let (x, w) = panel_nodes(&edges, &rule);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn hermite_gaussian_moment() {
        let s: f64 = hermite(64).iter().map(|(x, w)| w * x * x).sum();
        assert!((s - PI.sqrt() / 2.0).abs() < 1e-12);
    }
}

//! Characteristic functions `phi(w) = E[exp(j w X)]` of real random variables.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// A characteristic function of a real random variable.
///
/// Implementors provide `eval` for `w > 0` through [`CharFn::eval_pos`];
/// negative frequencies follow from conjugate symmetry and `w = 0` is
/// exactly one by construction.
pub trait CharFn: Sync {
    /// Evaluate at `w > 0`.
    fn eval_pos(&self, w: f64) -> Complex64;

    /// Evaluate at `w = exp(s)`. Override when the function is only
    /// resolvable on a log-frequency scale (log-heavy tails).
    fn eval_log(&self, s: f64) -> Complex64 {
        self.eval_pos(s.exp())
    }

    /// Probability mass at exactly zero.
    fn atom_at_zero(&self) -> f64 {
        0.0
    }

    /// Lowest point of the continuous part when its density jumps there;
    /// sets the phase of the `1/w` tail.
    fn density_edge(&self) -> f64 {
        0.0
    }

    /// Suggested `|w|` cutoff for inversion, if known.
    fn cutoff_hint(&self) -> Option<f64> {
        None
    }

    fn eval(&self, w: f64) -> Complex64 {
        if w == 0.0 {
            Complex64::new(1.0, 0.0)
        } else if w > 0.0 {
            self.eval_pos(w)
        } else {
            self.eval_pos(-w).conj()
        }
    }
}

impl<T: CharFn + ?Sized> CharFn for &T {
    fn eval_pos(&self, w: f64) -> Complex64 {
        (**self).eval_pos(w)
    }
    fn eval_log(&self, s: f64) -> Complex64 {
        (**self).eval_log(s)
    }
    fn atom_at_zero(&self) -> f64 {
        (**self).atom_at_zero()
    }
    fn cutoff_hint(&self) -> Option<f64> {
        (**self).cutoff_hint()
    }
}

/// Closure-backed characteristic function.
pub struct FnCf<F> {
    f: F,
    atom: f64,
}

impl<F: Fn(f64) -> Complex64 + Sync> FnCf<F> {
    pub fn new(f: F) -> Self {
        Self { f, atom: 0.0 }
    }

    pub fn with_atom(mut self, atom: f64) -> Self {
        self.atom = atom;
        self
    }
}

impl<F: Fn(f64) -> Complex64 + Sync> CharFn for FnCf<F> {
    fn eval_pos(&self, w: f64) -> Complex64 {
        (self.f)(w)
    }
    fn atom_at_zero(&self) -> f64 {
        self.atom
    }
}

/// Closed-form reference laws, used for round-trip checks.
pub mod reference {
    use super::*;

    /// Gamma(shape, rate).
    pub struct GammaCf {
        pub shape: f64,
        pub rate: f64,
    }

    impl CharFn for GammaCf {
        fn eval_pos(&self, w: f64) -> Complex64 {
            Complex64::new(1.0, -w / self.rate).powf(-self.shape)
        }
    }

    pub struct NormalCf {
        pub mean: f64,
        pub sd: f64,
    }

    impl CharFn for NormalCf {
        fn eval_pos(&self, w: f64) -> Complex64 {
            let m = (-0.5 * (self.sd * w).powi(2)).exp();
            Complex64::from_polar(m, self.mean * w)
        }
    }

    pub struct PointMassCf {
        pub at: f64,
    }

    impl CharFn for PointMassCf {
        fn eval_pos(&self, w: f64) -> Complex64 {
            Complex64::from_polar(1.0, self.at * w)
        }
        fn atom_at_zero(&self) -> f64 {
            if self.at == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Outcome of an axiom check.
#[derive(Debug, Clone, Copy)]
pub struct AxiomReport {
    pub at_zero: f64,
    pub max_modulus: f64,
    pub max_conj_err: f64,
}

impl AxiomReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.at_zero <= tol && self.max_modulus <= 1.0 + tol && self.max_conj_err <= tol
    }
}

/// Check `phi(0) = 1`, `|phi| <= 1` and `phi(-w) = conj(phi(w))` on `grid`.
pub fn check_axioms<C: CharFn + ?Sized>(cf: &C, grid: &[f64]) -> AxiomReport {
    let at_zero = (cf.eval(0.0) - 1.0).norm();
    let mut max_modulus: f64 = 0.0;
    let mut max_conj_err: f64 = 0.0;
    for &w in grid {
        let a = cf.eval(w);
        let b = cf.eval(-w);
        max_modulus = max_modulus.max(a.norm()).max(b.norm());
        max_conj_err = max_conj_err.max((a - b.conj()).norm());
    }
    AxiomReport { at_zero, max_modulus, max_conj_err }
}

/// Symmetric 64-point grid: 32 log-spaced magnitudes in `[lo, hi]`, both signs.
pub fn axiom_grid(lo: f64, hi: f64) -> Vec<f64> {
    let n = 32;
    let (a, b) = (lo.ln(), hi.ln());
    let mut g = Vec::with_capacity(2 * n);
    for i in 0..n {
        let w = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
        g.push(w);
        g.push(-w);
    }
    g
}

/// Empirical characteristic function `(1/N) sum exp(j w x_i)` per frequency.
/// Infinite samples count towards `N` and add nothing, the `w x -> inf`
/// limit of a sample escaping to infinity.
pub fn empirical_cf(samples: &[f64], grid: &[f64]) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empirical CF of an empty sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN sample in empirical CF"));
    }
    let n = samples.len() as f64;
    Ok(grid
        .iter()
        .map(|&w| {
            let s = samples
                .iter()
                .filter(|x| x.is_finite())
                .fold(Complex64::new(0.0, 0.0), |acc, &x| acc + Complex64::from_polar(1.0, w * x));
            s / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;

    #[test]
    fn reference_laws_satisfy_axioms() {
        let g = axiom_grid(1e-3, 1e3);
        assert_eq!(g.len(), 64);
        let cfs: [&dyn CharFn; 3] = [
            &GammaCf { shape: 3.61, rate: 3.57 },
            &NormalCf { mean: 0.0, sd: 1.0 },
            &PointMassCf { at: 5.0 },
        ];
        for cf in cfs {
            assert!(check_axioms(cf, &g).passes(1e-12));
        }
    }

    #[test]
    fn zero_samples_give_one() {
        let v = empirical_cf(&[0.0; 10], &[0.5, 3.0]).unwrap();
        assert!(v.iter().all(|z| (z - 1.0).norm() < 1e-15));
        assert!(empirical_cf(&[], &[1.0]).is_err());
    }

    #[test]
    fn gamma_cf_first_moment() {
        let cf = GammaCf { shape: 3.61, rate: 3.57 };
        let h = 1e-6;
        let d = (cf.eval(h) - cf.eval(-h)) / (2.0 * h);
        assert!((d.im - 3.61 / 3.57).abs() < 1e-6);
    }
}

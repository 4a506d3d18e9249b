//! Pareto per-MS traffic and the aggregate load of a typical cell.

use crate::error::{Error, Result};
use crate::numerics::cf::CharFn;
use crate::numerics::incgamma::upper_incomplete_gamma;
use crate::numerics::inversion::{invert, InversionOptions};
use crate::numerics::table::DistributionTable;
use num_complex::Complex64;
use rand::Rng;

/// Per-MS traffic law and the intensities that set the cell load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    /// Heaviness index, `1 < theta <= 2`.
    pub theta: f64,
    /// Minimum rate; any rate unit.
    pub rho_min: f64,
    /// MS intensity, 1/m^2.
    pub lambda_m: f64,
    /// BS intensity, 1/m^2.
    pub lambda_b: f64,
    /// Cell-area Gamma shape.
    pub a: f64,
    /// Cell-area Gamma rate coefficient (rate is `b * lambda_b`).
    pub b: f64,
}

impl TrafficModel {
    pub fn new(theta: f64, rho_min: f64, lambda_m: f64, lambda_b: f64, a: f64, b: f64) -> Result<Self> {
        let m = Self { theta, rho_min, lambda_m, lambda_b, a, b };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.theta > 1.0 && self.theta <= 2.0) {
            return Err(Error::invalid(format!("theta = {} outside (1, 2]", self.theta)));
        }
        if !(self.rho_min > 0.0) {
            return Err(Error::invalid("rho_min must be positive"));
        }
        if !(self.lambda_m >= 0.0) || !(self.lambda_b > 0.0) {
            return Err(Error::invalid("need lambda_m >= 0 and lambda_b > 0"));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::invalid("cell-area constants a, b must be positive"));
        }
        Ok(())
    }

    /// `lambda_m / lambda_b`.
    pub fn ratio(&self) -> f64 {
        self.lambda_m / self.lambda_b
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.lambda_m = ratio * self.lambda_b;
        self
    }

    pub fn pareto_pdf(&self, x: f64) -> f64 {
        if x < self.rho_min {
            0.0
        } else {
            self.theta * self.rho_min.powf(self.theta) / x.powf(self.theta + 1.0)
        }
    }

    pub fn pareto_cdf(&self, x: f64) -> f64 {
        if x < self.rho_min {
            0.0
        } else {
            1.0 - (self.rho_min / x).powf(self.theta)
        }
    }

    /// Inverse-CDF draw `rho_min * u^(-1/theta)`.
    pub fn sample_pareto<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        self.rho_min * u.powf(-1.0 / self.theta)
    }

    /// `theta * rho_min / (theta - 1)`.
    pub fn pareto_mean(&self) -> f64 {
        self.theta * self.rho_min / (self.theta - 1.0)
    }

    /// Closed-form mean cell load `lambda_m theta rho_min / (lambda_b (theta - 1))`.
    pub fn mean_aggregate(&self) -> Result<f64> {
        if self.theta <= 1.0 {
            return Err(Error::invalid("mean load is infinite for theta <= 1"));
        }
        Ok(self.ratio() * self.pareto_mean())
    }

    /// Mass of the empty-cell atom, `(1 + r/b)^(-a)`.
    pub fn empty_cell_probability(&self) -> f64 {
        (1.0 + self.ratio() / self.b).powf(-self.a)
    }

    /// Characteristic function of the cell load at `w`.
    pub fn cf(&self, w: f64) -> Result<Complex64> {
        if w == 0.0 || self.lambda_m == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let v = self.cf_pos(w.abs())?;
        Ok(if w > 0.0 { v } else { v.conj() })
    }

    fn cf_pos(&self, w: f64) -> Result<Complex64> {
        let k = self.ratio() / self.b;
        if self.rho_min * w < 1e-10 {
            // next term is O((rho_min w)^theta)
            return Ok(Complex64::new(1.0, w * self.a / self.b * self.mean_aggregate()?));
        }
        let z = Complex64::new(0.0, -self.rho_min * w);
        let g = upper_incomplete_gamma(Complex64::new(-self.theta, 0.0), z)?;
        let bracket = 1.0 + k - k * self.theta * z.powf(self.theta) * g;
        Ok(bracket.powf(-self.a))
    }

    pub fn char_fn(&self) -> TrafficCf {
        TrafficCf { model: *self }
    }
}

/// [`CharFn`] adaptor for the cell-load law.
pub struct TrafficCf {
    model: TrafficModel,
}

impl CharFn for TrafficCf {
    fn eval_pos(&self, w: f64) -> Complex64 {
        if self.model.lambda_m == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        // Arguments off the branch cut never fail; keep a finite fallback.
        self.model.cf_pos(w).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    fn atom_at_zero(&self) -> f64 {
        self.model.empty_cell_probability()
    }

    fn density_edge(&self) -> f64 {
        self.model.rho_min
    }
}

/// Options tuned for the cell-load law.
pub fn traffic_inversion_options(tol: f64) -> InversionOptions {
    InversionOptions { panel_width: 2.0, far_extent: 6.0, ..InversionOptions::with_tol(tol) }
}

/// Invert the cell-load CF on `grid`.
pub fn traffic_load_distribution(model: &TrafficModel, grid: &[f64], opts: &InversionOptions) -> Result<DistributionTable> {
    model.check()?;
    if model.lambda_m == 0.0 {
        return Err(Error::DegenerateConfig("empty cells carry no load: the law is a point mass at zero".into()));
    }
    invert(&model.char_fn(), grid, opts)
}

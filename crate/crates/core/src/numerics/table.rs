//! Tabulated distributions on a finite grid.

use crate::error::{Error, Result};
use crate::numerics::quadrature::trapezoid;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdfMethod {
    /// Damped Fourier inversion.
    Fourier,
    /// Central differences of the CDF.
    Differenced,
    /// Closed form or rescaled from another table.
    Derived,
}

#[derive(Debug, Clone)]
pub struct DistributionTable {
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub pdf_method: PdfMethod,
    /// Grid points whose pdf went negative beyond tolerance and was clipped.
    pub clipped: usize,
    /// Most negative pdf value seen before clipping.
    pub min_raw_pdf: f64,
    /// Mass at exactly zero (included in every cdf value).
    pub atom_at_zero: f64,
}

impl DistributionTable {
    pub fn new(grid: Vec<f64>, pdf: Vec<f64>, cdf: Vec<f64>, pdf_method: PdfMethod) -> Result<Self> {
        if grid.len() != pdf.len() || grid.len() != cdf.len() || grid.len() < 2 {
            return Err(Error::invalid("table columns must have equal length >= 2"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("table grid must be strictly ascending"));
        }
        Ok(Self { grid, pdf, cdf, pdf_method, clipped: 0, min_raw_pdf: 0.0, atom_at_zero: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Verify monotone cdf in `[0, 1 + tol]`, nonnegative pdf and the
    /// pdf/cdf consistency of the continuous part.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.pdf.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("negative or non-finite pdf entry"));
        }
        if self.cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("cdf decreases"));
        }
        let last = *self.cdf.last().unwrap();
        if self.cdf[0] < -tol || last > 1.0 + tol {
            return Err(Error::invalid(format!("cdf out of range: [{}, {last}]", self.cdf[0])));
        }
        let mass = trapezoid(&self.grid, &self.pdf);
        let span = last - self.cdf[0];
        if (mass - span).abs() > tol {
            return Err(Error::invalid(format!(
                "pdf integrates to {mass:.6} but cdf rises by {span:.6}"
            )));
        }
        Ok(())
    }

    /// Linear interpolation of the cdf; clamps outside the grid.
    pub fn cdf_at(&self, x: f64) -> f64 {
        interp(&self.grid, &self.cdf, x)
    }

    pub fn pdf_at(&self, x: f64) -> f64 {
        if x < self.grid[0] || x > *self.grid.last().unwrap() {
            return 0.0;
        }
        interp(&self.grid, &self.pdf, x)
    }

    /// `int_0^{x_max} (1 - F) dx` on the grid, the mean of the part below the
    /// grid end.
    pub fn truncated_mean(&self) -> f64 {
        let surv: Vec<f64> = self.cdf.iter().map(|f| 1.0 - f).collect();
        trapezoid(&self.grid, &surv) + self.grid[0] * (1.0 - self.atom_at_zero)
    }

    /// Mean with the beyond-grid tail extrapolated as a power law
    /// `1 - F(x) ~ C x^(-theta)`, `theta > 1`.
    pub fn mean_with_power_tail(&self, theta: f64) -> f64 {
        let xm = *self.grid.last().unwrap();
        let sm = (1.0 - self.cdf.last().unwrap()).max(0.0);
        self.truncated_mean() + sm * xm / (theta - 1.0)
    }

    /// Restrict to `[0, p_max]` and renormalise so the cdf reaches one at `p_max`.
    pub fn truncate(&self, p_max: f64) -> Result<DistributionTable> {
        let f_max = self.cdf_at(p_max);
        if f_max <= 0.0 {
            return Err(Error::DegenerateConfig(format!("no probability mass below P_max = {p_max}")));
        }
        let mut grid = Vec::new();
        let mut pdf = Vec::new();
        let mut cdf = Vec::new();
        for i in 0..self.len() {
            if self.grid[i] < p_max {
                grid.push(self.grid[i]);
                pdf.push(self.pdf[i] / f_max);
                cdf.push(self.cdf[i] / f_max);
            }
        }
        grid.push(p_max);
        pdf.push(self.pdf_at(p_max) / f_max);
        cdf.push(1.0);
        let mut t = DistributionTable::new(grid, pdf, cdf, PdfMethod::Derived)?;
        t.atom_at_zero = self.atom_at_zero / f_max;
        Ok(t)
    }

    /// CSV with columns `x, pdf, cdf`; `x_label` carries the unit.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: &str, x_label: &str) -> Result<()> {
        writeln!(out, "# {comment}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([x_label, "pdf", "cdf"])?;
        for i in 0..self.len() {
            w.write_record([
                format!("{:.6e}", self.grid[i]),
                format!("{:.6e}", self.pdf[i]),
                format!("{:.8}", self.cdf[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&g| g <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

//! Characteristic-function inversion.
//!
//! Gil-Pelaez for the CDF,
//! `F(x) = 1/2 - (1/pi) int_0^inf Im[exp(-j w x) phi(w)] / w dw`,
//! and a damped Fourier integral for the density. An atom at zero is split
//! off first so the remaining integrand decays. The frequency integral is
//! taken in `s = ln w` over three regions:
//!
//! * far: `s = s1 - (e^v - 1)`, reaching `|s|` of order `e^v_max`, for laws
//!   whose CF approaches one only logarithmically slowly;
//! * log: uniform in `s` between `s1` and `ln(1/x_scale)`;
//! * linear: uniform panels in `w` until `|phi|` falls below tolerance.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::cf::CharFn;
use crate::numerics::incgamma::upper_incomplete_gamma;
use crate::numerics::quadrature::{legendre, panel_nodes};
use crate::numerics::table::{DistributionTable, PdfMethod};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    /// Characteristic scale of the support; defaults to the grid end.
    pub x_scale: Option<f64>,
    /// Linear-region panel width in units of `1/x_scale`.
    pub panel_width: f64,
    pub max_panels: usize,
    /// Extent of the far region in `v` (`|s|` reaches about `e^far_extent`).
    pub far_extent: f64,
    /// Lower end of the log region, as a multiple of `1/x_scale`.
    pub low_cut: f64,
    /// Required CDF accuracy; the truncation estimate is compared to it.
    pub tol: f64,
    /// Support is `[0, inf)`: the continuous part is anchored at `F_c(0) = 0`,
    /// which removes the offset left by mass beyond the lowest frequency node.
    pub nonnegative: bool,
    pub exec: Exec,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            x_scale: None,
            panel_width: 2.0,
            max_panels: 6000,
            far_extent: 12.0,
            low_cut: 1e-6,
            tol: 1e-4,
            nonnegative: false,
            exec: Exec::default(),
        }
    }
}

impl InversionOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// CF samples on the inversion nodes, with the atom removed.
#[derive(Debug, Clone)]
pub struct CfSamples {
    /// Frequencies `w_i > 0`.
    pub omega: Vec<f64>,
    /// Quadrature weights in `s = ln w`.
    pub weight: Vec<f64>,
    /// `(phi - atom) / (1 - atom)`.
    pub phi_c: Vec<Complex64>,
    pub atom: f64,
    /// Estimated CDF error at the grid step from stopping the frequency integral.
    pub truncation: f64,
    pub bound: TruncationBound,
    pub nonnegative: bool,
    /// Location of the density jump behind the `1/w` tail.
    pub edge: f64,
}

/// Error left by stopping the frequency integral at `omega_max`: pointwise
/// `scale * min(1, 1/(omega_max x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBound {
    pub scale: f64,
    pub omega_max: f64,
}

impl TruncationBound {
    /// Bound on the CDF error at `x > 0`.
    pub fn at(&self, x: f64) -> f64 {
        self.scale * (1.0 / (self.omega_max * x)).min(1.0)
    }

    /// Bound on `(1/x) int_0^x |CDF error|`.
    pub fn mean_over(&self, x: f64) -> f64 {
        let k = self.omega_max * x;
        if k <= 1.0 {
            self.scale
        } else {
            self.scale * (1.0 + k.ln()) / k
        }
    }
}

const GL_ORDER: usize = 8;
const CHUNK_PANELS: usize = 64;

/// Node positions (in `s`) and `ds` weights for the far and log regions.
pub fn low_frequency_nodes(x_scale: f64, opts: &InversionOptions) -> (Vec<f64>, Vec<f64>) {
    let rule = legendre(GL_ORDER);
    let s1 = (opts.low_cut / x_scale).ln();
    let n_far = (opts.far_extent / 0.25).ceil() as usize;
    let edges: Vec<f64> = (0..=n_far).map(|i| i as f64 * opts.far_extent / n_far as f64).collect();
    let (v, wv) = panel_nodes(&edges, &rule);
    let mut s: Vec<f64> = v.iter().map(|v| s1 - v.exp_m1()).collect();
    let mut w: Vec<f64> = v.iter().zip(&wv).map(|(v, w)| w * v.exp()).collect();
    let s2 = (1.0 / x_scale).ln();
    let n_log = (((s2 - s1) / 0.25).ceil() as usize).max(1);
    let edges: Vec<f64> = (0..=n_log).map(|i| s1 + (s2 - s1) * i as f64 / n_log as f64).collect();
    let (sl, wl) = panel_nodes(&edges, &rule);
    s.extend(sl);
    w.extend(wl);
    (s, w)
}

fn center(z: Complex64, atom: f64) -> Complex64 {
    if atom > 0.0 {
        (z - atom) / (1.0 - atom)
    } else {
        z
    }
}

/// Evaluate `cf` on the inversion nodes for a support scale `x_scale`.
pub fn sample_cf(cf: &dyn CharFn, x_scale: f64, grid_step: f64, opts: &InversionOptions) -> Result<CfSamples> {
    if !(x_scale > 0.0 && x_scale.is_finite()) {
        return Err(Error::invalid("inversion scale must be positive"));
    }
    let atom = cf.atom_at_zero();
    if atom >= 1.0 {
        return Err(Error::DegenerateConfig("distribution is a point mass at zero".into()));
    }
    let (s, w) = low_frequency_nodes(x_scale, opts);
    let phi: Vec<Complex64> = opts.exec.map(&s, |&s| center(cf.eval_log(s), atom));
    let mut omega: Vec<f64> = s.iter().map(|s| s.exp()).collect();
    let mut weight = w;
    let mut phi_c = phi;

    let rule = legendre(GL_ORDER);
    let h = opts.panel_width / x_scale;
    let w0 = 1.0 / x_scale;
    let stop = opts.tol * 1e-3;
    let mut done = 0usize;
    while done < opts.max_panels {
        let n = CHUNK_PANELS.min(opts.max_panels - done);
        let edges: Vec<f64> = (0..=n).map(|i| w0 + h * (done + i) as f64).collect();
        let (om, wo) = panel_nodes(&edges, &rule);
        let vals: Vec<Complex64> = opts.exec.map(&om, |&x| center(cf.eval_pos(x), atom));
        for i in 0..om.len() {
            omega.push(om[i]);
            weight.push(wo[i] / om[i]);
            phi_c.push(vals[i]);
        }
        done += n;
        let tail_max = vals[vals.len() - GL_ORDER * 4.min(n)..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tail_max < stop {
            break;
        }
    }
    let bound = truncation_bound(&omega, &phi_c);
    let truncation = bound.at(grid_step.max(x_scale * 1e-3));
    Ok(CfSamples { omega, weight, phi_c, atom, truncation, bound, nonnegative: opts.nonnegative, edge: cf.density_edge() })
}

/// All nodes (no early stop) as `(omega, ds-weight)`: the low-frequency
/// regions plus `opts.max_panels` linear panels.
pub fn node_set(x_scale: f64, opts: &InversionOptions) -> (Vec<f64>, Vec<f64>) {
    let (s, w) = low_frequency_nodes(x_scale, opts);
    let mut omega: Vec<f64> = s.iter().map(|s| s.exp()).collect();
    let mut weight = w;
    let rule = legendre(GL_ORDER);
    let h = opts.panel_width / x_scale;
    let w0 = 1.0 / x_scale;
    let edges: Vec<f64> = (0..=opts.max_panels).map(|i| w0 + h * i as f64).collect();
    let (om, wo) = panel_nodes(&edges, &rule);
    for (o, w) in om.into_iter().zip(wo) {
        weight.push(w / o);
        omega.push(o);
    }
    (omega, weight)
}

/// The tail correction absorbs a `1/w` decay; what is left is bounded by
/// `|r| / (pi W)` with `r = W phi(W) - h phi(h)`, `h` the node closest to
/// `W/2`, and shrinks by `1/(W x)` through oscillation.
fn truncation_bound(omega: &[f64], phi_c: &[Complex64]) -> TruncationBound {
    let n = omega.len();
    let (wl, pl) = (omega[n - 1], phi_c[n - 1]);
    let h = omega
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 0.5 * wl).abs().total_cmp(&(b.1 - 0.5 * wl).abs()))
        .map(|(i, _)| i)
        .unwrap_or(n - 1);
    let r = (pl * wl - phi_c[h] * omega[h]).norm();
    TruncationBound { scale: r / (PI * wl), omega_max: wl }
}

impl CfSamples {
    /// Wrap CF values `phi` taken on `node_set` frequencies; the atom is
    /// removed here.
    pub fn from_values(omega: Vec<f64>, weight: Vec<f64>, phi: &[Complex64], atom: f64, grid_step: f64, nonnegative: bool) -> Self {
        let phi_c: Vec<Complex64> = phi.iter().map(|&z| if atom > 0.0 { (z - atom) / (1.0 - atom) } else { z }).collect();
        let bound = truncation_bound(&omega, &phi_c);
        let truncation = bound.at(grid_step.max(1e-300));
        Self { omega, weight, phi_c, atom, truncation, bound, nonnegative, edge: 0.0 }
    }
}

fn is_uniform(grid: &[f64]) -> bool {
    if grid.len() < 3 {
        return true;
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    grid.iter().enumerate().all(|(i, &x)| (x - (grid[0] + h * i as f64)).abs() <= 1e-9 * h.abs().max(1e-300) * grid.len() as f64)
}

/// Damping scale: the end of the frequency range. When the CF has decayed
/// below `1e-6` there the damping is invisible; otherwise it tames the
/// truncation ringing.
fn damping_cutoff(samples: &CfSamples) -> f64 {
    *samples.omega.last().unwrap()
}

/// `E_2(z) = exp(-z) - z E_1(z)`.
fn e2(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let e1 = upper_incomplete_gamma(Complex64::new(0.0, 0.0), z).unwrap_or(Complex64::new(0.0, 0.0));
    (-z).exp() - z * e1
}

/// Tail of the Gil-Pelaez integral beyond the last node, assuming
/// `phi ~ A exp(j w e)/w` for a density jump at `e`:
/// `int_W^inf Im[exp(-j w x) phi(w)] / w dw ~ Im[phi(W) exp(-j W e) E_2(j W (x - e))]`.
fn tail_correction(samples: &CfSamples, x: f64) -> f64 {
    let w = *samples.omega.last().unwrap();
    let z = *samples.phi_c.last().unwrap();
    let e = samples.edge;
    let z = if e == 0.0 { z } else { z * Complex64::from_polar(1.0, -w * e) };
    (z * e2(Complex64::new(0.0, w * (x - e)))).im
}

/// Gil-Pelaez sums `(S_cdf(x), S_pdf(x))` over the nodes for every grid point.
fn fourier_sums(samples: &CfSamples, grid: &[f64], exec: Exec) -> (Vec<f64>, Vec<f64>) {
    let n = samples.omega.len();
    let wc = damping_cutoff(samples);
    let damp: Vec<f64> = samples.omega.iter().map(|w| (-(w / wc).powi(4)).exp()).collect();
    let chunk = 512;
    let n_chunks = n.div_ceil(chunk);
    let uniform = is_uniform(grid);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = exec.map_range(n_chunks, |c| {
        let mut sc = vec![0.0; grid.len()];
        let mut sp = vec![0.0; grid.len()];
        for i in c * chunk..((c + 1) * chunk).min(n) {
            let w = samples.omega[i];
            let ws = samples.weight[i];
            let wp = ws * w * damp[i];
            let z = samples.phi_c[i];
            if uniform && grid.len() > 1 {
                let hx = grid[1] - grid[0];
                let rot = Complex64::from_polar(1.0, -w * hx);
                let mut e = Complex64::from_polar(1.0, -w * grid[0]);
                for k in 0..grid.len() {
                    if k % 64 == 0 {
                        e = Complex64::from_polar(1.0, -w * grid[k]);
                    }
                    let t = e * z;
                    sc[k] += ws * t.im;
                    sp[k] += wp * t.re;
                    e *= rot;
                }
            } else {
                for (k, &x) in grid.iter().enumerate() {
                    let t = Complex64::from_polar(1.0, -w * x) * z;
                    sc[k] += ws * t.im;
                    sp[k] += wp * t.re;
                }
            }
        }
        (sc, sp)
    });
    let mut sc = vec![0.0; grid.len()];
    let mut sp = vec![0.0; grid.len()];
    for (a, b) in parts {
        for k in 0..grid.len() {
            sc[k] += a[k];
            sp[k] += b[k];
        }
    }
    (sc, sp)
}

/// Build a table from precomputed samples.
pub fn table_from_samples(samples: &CfSamples, grid: &[f64], exec: Exec) -> Result<DistributionTable> {
    let (sc, sp) = fourier_sums(samples, grid, exec);
    let a = samples.atom;
    let offset = if samples.nonnegative {
        let s0: f64 = samples.weight.iter().zip(&samples.phi_c).map(|(w, z)| w * z.im).sum();
        0.5 - (s0 + tail_correction(samples, 0.0)) / PI
    } else {
        0.0
    };
    let mut cdf = Vec::with_capacity(grid.len());
    let mut pdf = Vec::with_capacity(grid.len());
    let mut min_raw: f64 = 0.0;
    for k in 0..grid.len() {
        let fc = 0.5 - (sc[k] + tail_correction(samples, grid[k])) / PI - offset;
        let mut f = if grid[k] < 0.0 { 0.0 } else { a } + (1.0 - a) * fc;
        if grid[k] == 0.0 && a > 0.0 {
            f = a;
        }
        cdf.push(f.clamp(0.0, 1.0));
        let d = (1.0 - a) * sp[k] / PI;
        min_raw = min_raw.min(d);
        pdf.push(d);
    }
    // enforce monotonicity against residual ringing
    for k in 1..cdf.len() {
        if cdf[k] < cdf[k - 1] {
            cdf[k] = cdf[k - 1];
        }
    }
    let ringing = 1e-3 * pdf.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let clipped = pdf.iter().filter(|&&p| p < -ringing).count();
    for p in pdf.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let mut t = DistributionTable::new(grid.to_vec(), pdf, cdf, PdfMethod::Fourier)?;
    t.clipped = clipped;
    t.min_raw_pdf = min_raw;
    t.atom_at_zero = a;
    Ok(t)
}

fn grid_step(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        return 0.0;
    }
    (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
}

fn checked_grid(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("inversion grid must be ascending with >= 2 points"));
    }
    let scale = grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale <= 0.0 {
        return Err(Error::invalid("inversion grid must not be identically zero"));
    }
    Ok(scale)
}

/// Invert to a table whose CDF column is accurate to `opts.tol`. The pdf column
/// comes from the companion damped density integral.
pub fn invert(cf: &dyn CharFn, grid: &[f64], opts: &InversionOptions) -> Result<DistributionTable> {
    let scale = opts.x_scale.unwrap_or(checked_grid(grid)?);
    checked_grid(grid)?;
    let samples = sample_cf(cf, scale, grid_step(grid), opts)?;
    if samples.truncation > opts.tol {
        return Err(Error::NonConvergence {
            what: "characteristic-function inversion".into(),
            estimate: samples.truncation,
        });
    }
    table_from_samples(&samples, grid, opts.exec)
}

/// Gil-Pelaez CDF on `grid` to tolerance `tol`.
pub fn invert_cf_to_cdf(cf: &dyn CharFn, grid: &[f64], tol: f64) -> Result<DistributionTable> {
    invert(cf, grid, &InversionOptions::with_tol(tol))
}

/// Density on `grid` by the damped Fourier integral. Negative ringing is
/// clipped to zero; the count is kept in the table.
pub fn invert_cf_to_pdf(cf: &dyn CharFn, grid: &[f64], tol: f64) -> Result<DistributionTable> {
    invert(cf, grid, &InversionOptions::with_tol(tol))
}

/// Density by FFT on `n` points over `[0, x_max)`; cross-check path for
/// laws supported on the half line.
pub fn fft_pdf(cf: &dyn CharFn, x_max: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let atom = cf.atom_at_zero();
    let dx = x_max / n as f64;
    let dw = 2.0 * PI / (n as f64 * dx);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let w = j as f64 * dw;
            let z = center(cf.eval(w), atom);
            if j == 0 {
                z * 0.5
            } else {
                z
            }
        })
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let xs: Vec<f64> = (0..n).map(|k| k as f64 * dx).collect();
    let f: Vec<f64> = buf.iter().map(|z| (1.0 - atom) * z.re * dw / PI).collect();
    (xs, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cf::reference::*;
    use crate::numerics::table::linspace;
    use statrs::distribution::{Continuous, ContinuousCDF, Exp, Gamma, Normal};

    #[test]
    fn gamma_cdf_round_trip() {
        let cf = GammaCf { shape: 3.61, rate: 3.57 };
        let law = Gamma::new(3.61, 3.57).unwrap();
        let grid = linspace(0.0, 6.0, 200);
        let t = invert_cf_to_cdf(&cf, &grid, 1e-4).unwrap();
        let sup = grid.iter().zip(&t.cdf).map(|(x, f)| (f - law.cdf(*x)).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-4, "sup err {sup}");
        let m = 3.61 / 3.57;
        assert!((t.cdf_at(m) - 0.570029212354366679).abs() < 1e-4);
    }

    #[test]
    fn gamma_pdf_at_mode() {
        let cf = GammaCf { shape: 3.61, rate: 3.57 };
        let mode = 2.61 / 3.57;
        let t = invert_cf_to_pdf(&cf, &[0.0, mode, 3.0, 6.0], 1e-4).unwrap();
        let want = Gamma::new(3.61, 3.57).unwrap().pdf(mode);
        assert!((t.pdf[1] - want).abs() < 1e-3, "{} vs {want}", t.pdf[1]);
        assert!((want - 0.853998159387029304).abs() < 1e-12);
    }

    #[test]
    fn normal_round_trip() {
        let cf = NormalCf { mean: 0.0, sd: 1.0 };
        let grid = linspace(-5.0, 5.0, 200);
        let t = invert_cf_to_cdf(&cf, &grid, 1e-4).unwrap();
        let law = Normal::new(0.0, 1.0).unwrap();
        let sup = grid.iter().zip(&t.cdf).map(|(x, f)| (f - law.cdf(*x)).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-4, "sup err {sup}");
        let p = invert_cf_to_pdf(&cf, &[-1.0, 0.0, 1.0], 1e-4).unwrap();
        assert!((p.pdf[1] - 0.398942280401).abs() < 1e-4);
    }

    #[test]
    fn exponential_round_trip() {
        let cf = GammaCf { shape: 1.0, rate: 1.0 };
        let grid = linspace(0.0, 10.0, 200);
        let t = invert_cf_to_cdf(&cf, &grid, 1e-4).unwrap();
        let law = Exp::new(1.0).unwrap();
        let sup = grid.iter().zip(&t.cdf).map(|(x, f)| (f - law.cdf(*x)).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-4, "sup err {sup}");
        let near0 = t.pdf_at(0.06);
        assert!((near0 - (-0.06f64).exp()).abs() < 2e-2, "{near0}");
    }

    #[test]
    fn point_mass_steps() {
        let cf = PointMassCf { at: 5.0 };
        let mut o = InversionOptions::with_tol(1.0);
        o.max_panels = 2000;
        let t = invert(&cf, &[4.0, 4.5, 5.5, 6.0], &o).unwrap();
        assert!(t.cdf[0] < 0.05 && t.cdf[1] < 0.05);
        assert!(t.cdf[2] > 0.95 && t.cdf[3] > 0.95);
    }

    #[test]
    fn atom_is_restored() {
        // mixture: 0.3 at zero, 0.7 Exp(1)
        let cf = crate::numerics::cf::FnCf::new(|w: f64| 0.3 + 0.7 / Complex64::new(1.0, -w)).with_atom(0.3);
        let grid = linspace(0.0, 10.0, 101);
        let t = invert_cf_to_cdf(&cf, &grid, 1e-4).unwrap();
        assert_eq!(t.cdf[0], 0.3);
        // the density jumps at zero; check consistency away from it
        let t = invert_cf_to_cdf(&cf, &linspace(0.5, 10.0, 96), 1e-4).unwrap();
        let want = 0.3 + 0.7 * (1.0 - (-2.0f64).exp());
        assert!((t.cdf_at(2.0) - want).abs() < 1e-4);
        t.validate(1e-3).unwrap();
    }

    #[test]
    fn fft_cross_check_matches_gil_pelaez() {
        let cf = GammaCf { shape: 3.61, rate: 3.57 };
        let (xs, f) = fft_pdf(&cf, 40.0, 1 << 14);
        let law = Gamma::new(3.61, 3.57).unwrap();
        for k in [100, 300, 800] {
            assert!((f[k] - law.pdf(xs[k])).abs() < 2e-3, "x={} {} vs {}", xs[k], f[k], law.pdf(xs[k]));
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cf = GammaCf { shape: 2.0, rate: 1.0 };
        let grid = linspace(0.0, 8.0, 50);
        let mut o = InversionOptions::with_tol(1e-4);
        o.exec = Exec::Sequential;
        let a = invert(&cf, &grid, &o).unwrap();
        o.exec = Exec::Parallel;
        let b = invert(&cf, &grid, &o).unwrap();
        for (x, y) in a.cdf.iter().zip(&b.cdf) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn far_mass_does_not_leak_into_small_x() {
        // half the mass near 1e9, far below the lowest node
        let cf = crate::numerics::cf::FnCf::new(|w: f64| {
            0.5 / Complex64::new(1.0, -w) + 0.5 / Complex64::new(1.0, -1e9 * w)
        });
        let grid = linspace(0.0, 10.0, 101);
        let opts = InversionOptions { far_extent: 0.5, ..InversionOptions::with_tol(1e-3) };
        let law = Exp::new(1.0).unwrap();
        let err = |nonnegative: bool| {
            let o = InversionOptions { nonnegative, ..opts };
            let s = sample_cf(&cf, 10.0, 0.1, &o).unwrap();
            let t = table_from_samples(&s, &grid, Exec::Sequential).unwrap();
            grid.iter().zip(&t.cdf).map(|(x, f)| (f - 0.5 * law.cdf(*x)).abs()).fold(0.0, f64::max)
        };
        assert!(err(false) > 0.1);
        assert!(err(true) < 5e-3, "{}", err(true));
    }
}

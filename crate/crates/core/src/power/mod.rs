//! Interference, receiving-power and total-BS-power characteristic functions,
//! truncation at `P_max` and the linear BS consumption model.

pub mod kernel;

use crate::channel::{q_moment, q_ratio_pdf, log_moment, ChannelParams};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::cf::CharFn;
use crate::numerics::incgamma::gamma;
use crate::numerics::inversion::{invert, node_set, table_from_samples, CfSamples, InversionOptions, TruncationBound};
use crate::numerics::quadrature::{legendre, trapezoid};
use crate::numerics::table::{interp, DistributionTable};
use crate::traffic::TrafficModel;
use kernel::{j_direct, JTable, KernelKind, LnVGrid, RateLaw};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Everything the power pipeline needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub channel: ChannelParams,
    /// Rates in the units of `channel.bw` (bits/s/Hz when normalised).
    pub traffic: TrafficModel,
    /// Interfering-link intensity, 1/m^2.
    pub lambda_inf: f64,
    /// `E[S^(2/beta)]`, W^(2/beta).
    pub e_s: f64,
    /// W.
    pub p_max: f64,
    pub eta_rf: f64,
    /// W.
    pub p_circuit: f64,
}

impl PowerParams {
    pub fn check(&self) -> Result<()> {
        self.channel.check()?;
        self.traffic.check()?;
        if !(self.lambda_inf >= 0.0) {
            return Err(Error::invalid("lambda_inf must be >= 0"));
        }
        if !(self.e_s > 0.0) {
            return Err(Error::invalid("E_S must be positive"));
        }
        if !(self.p_max > 0.0) || !(self.eta_rf > 0.0 && self.eta_rf <= 1.0) || !(self.p_circuit >= 0.0) {
            return Err(Error::invalid("need P_max > 0, 0 < eta_rf <= 1, P_circuit >= 0"));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.traffic.ratio()
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.traffic = self.traffic.with_ratio(ratio);
        self
    }

    /// Deterministic interferer receiving power `s* = E_S^(beta/2)`.
    pub fn s_star(&self) -> f64 {
        self.e_s.powf(self.channel.beta / 2.0)
    }

    pub(crate) fn rate_law(&self) -> RateLaw {
        RateLaw {
            theta: self.traffic.theta,
            u_min: self.traffic.rho_min / self.channel.bw,
            ln_delta: self.channel.delta.ln(),
            p: self.channel.p(),
        }
    }
}

/// Parameters of the totally skewed stable interference law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableCfParams {
    pub delta: f64,
    pub beta: f64,
    /// `tan(pi / beta)`.
    pub skew: f64,
}

impl StableCfParams {
    /// Dispersion from the closed-form `E[Q^(2/beta)]`.
    pub fn new(p: &PowerParams) -> Result<Self> {
        let eq = q_moment(p.channel.beta, p.channel.sigma)?;
        Self::with_q_moment(p, eq)
    }

    /// Dispersion from the numerical moment of the `Q` density.
    pub fn numerical(p: &PowerParams) -> Result<Self> {
        let pp = p.channel.p();
        let sigma = p.channel.sigma;
        let eq = log_moment(|x| q_ratio_pdf(x, sigma), pp, -80.0, 140.0)?;
        Self::with_q_moment(p, eq)
    }

    fn with_q_moment(p: &PowerParams, eq: f64) -> Result<Self> {
        p.check()?;
        let beta = p.channel.beta;
        let pp = 2.0 / beta;
        let g = gamma(Complex64::new(1.0 - pp, 0.0)).re;
        let delta = p.lambda_inf / (4.0 * p.traffic.lambda_b) * g * (PI / beta).cos() * p.e_s * eq;
        Ok(Self { delta, beta, skew: (PI / beta).tan() })
    }

    pub fn p(&self) -> f64 {
        2.0 / self.beta
    }

    /// `G(w) = delta |w|^(2/beta) (1 - j sign(w) tan(pi/beta))`.
    pub fn g_kernel(&self, w: f64) -> Complex64 {
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let m = self.delta * w.abs().powf(self.p());
        Complex64::new(m, -m * w.signum() * self.skew)
    }

    /// Aggregate-interference CF `exp(-G(w))`.
    pub fn cf(&self, w: f64) -> Complex64 {
        (-self.g_kernel(w)).exp()
    }

    /// `ln(delta / cos(pi/beta))`, the log-scale of `|G|` at `w = 1`.
    pub fn ln_scale(&self) -> f64 {
        (self.delta / (PI / self.beta).cos()).ln()
    }
}

/// Aggregate-interference CF.
pub fn interference_cf(w: f64, p: &PowerParams) -> Result<Complex64> {
    Ok(StableCfParams::new(p)?.cf(w))
}

/// Receiving-power CF `E_gamma[exp(-G(w) gamma^(2/beta))]`.
pub fn receiving_power_cf(w: f64, p: &PowerParams) -> Result<Complex64> {
    let s = StableCfParams::new(p)?;
    Ok(ReceivingPowerCf::from_stable(p, s).eval(w))
}

/// [`CharFn`] of the receiving power `S0 = gamma I_agg`.
pub struct ReceivingPowerCf {
    law: RateLaw,
    stable: StableCfParams,
    rule: Vec<(f64, f64)>,
}

impl ReceivingPowerCf {
    pub fn new(p: &PowerParams) -> Result<Self> {
        Ok(Self::from_stable(p, StableCfParams::new(p)?))
    }

    fn from_stable(p: &PowerParams, stable: StableCfParams) -> Self {
        Self { law: p.rate_law(), stable, rule: legendre(8) }
    }
}

impl CharFn for ReceivingPowerCf {
    fn eval_pos(&self, w: f64) -> Complex64 {
        self.eval_log(w.ln())
    }

    fn eval_log(&self, s: f64) -> Complex64 {
        if self.stable.delta == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let a = self.stable.ln_scale() + self.law.p * s;
        1.0 - j_direct(KernelKind::Exp, a, &self.law, PI / self.stable.beta, &self.rule)
    }
}

/// Per-link transmit power `r^beta exp(-c sigma xi) S0 / (K zeta2)`.
pub fn per_link_power(s0: f64, r: f64, xi: f64, zeta2: f64, ch: &ChannelParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("link distance must be positive"));
    }
    if !(zeta2 > 0.0) {
        return Err(Error::invalid("zero fading gain"));
    }
    Ok(r.powf(ch.beta) * (-crate::channel::C * ch.sigma * xi).exp() * s0 / (ch.k * zeta2))
}

/// `M(w) = 1 - E_{gamma,V}[pi lambda_B / (G(w/K) V^p gamma^p + pi lambda_B)]`, the
/// ratio-free part of the total-power CF `exp(-(lambda_M/lambda_B) M(w))`.
pub struct TotalPowerKernel {
    table: JTable,
    vgrid: LnVGrid,
    /// `ln(delta / (cos(pi/beta) pi lambda_B)) - p ln K`.
    offset: f64,
    p: f64,
    zero: bool,
}

impl TotalPowerKernel {
    pub fn new(params: &PowerParams, exec: Exec) -> Result<Self> {
        let stable = StableCfParams::new(params)?;
        Ok(Self::from_stable(params, stable, exec))
    }

    pub fn from_stable(params: &PowerParams, stable: StableCfParams, exec: Exec) -> Self {
        let law = params.rate_law();
        let p = law.p;
        let table = JTable::new(KernelKind::Logistic, law, PI / stable.beta, 0.05, exec);
        let vgrid = LnVGrid::new(params.channel.sigma);
        let zero = stable.delta == 0.0;
        let offset = if zero {
            0.0
        } else {
            stable.ln_scale() - (PI * params.traffic.lambda_b).ln() - p * params.channel.k.ln()
        };
        Self { table, vgrid, offset, p, zero }
    }

    /// `M` at `w = exp(s)`.
    pub fn m_log(&self, s: f64) -> Complex64 {
        if self.zero {
            return Complex64::new(0.0, 0.0);
        }
        let l = self.offset + self.p * s;
        self.vgrid
            .y
            .iter()
            .zip(&self.vgrid.w)
            .fold(Complex64::new(0.0, 0.0), |acc, (y, w)| acc + self.table.eval(l + self.p * y) * *w)
    }
}

/// [`CharFn`] of the required total BS transmit power of a typical cell.
pub struct TotalPowerCf {
    kernel: TotalPowerKernel,
    ratio: f64,
}

impl TotalPowerCf {
    pub fn new(params: &PowerParams, exec: Exec) -> Result<Self> {
        Ok(Self { kernel: TotalPowerKernel::new(params, exec)?, ratio: params.ratio() })
    }

    pub fn kernel(&self) -> &TotalPowerKernel {
        &self.kernel
    }
}

impl CharFn for TotalPowerCf {
    fn eval_pos(&self, w: f64) -> Complex64 {
        self.eval_log(w.ln())
    }

    fn eval_log(&self, s: f64) -> Complex64 {
        (-self.kernel.m_log(s) * self.ratio).exp()
    }

    fn atom_at_zero(&self) -> f64 {
        if self.kernel.zero {
            1.0
        } else {
            (-self.ratio).exp()
        }
    }
}

/// Total-power CF at a single frequency. Builds the kernel table; reuse a
/// [`TotalPowerCf`] for many evaluations.
pub fn total_power_cf(w: f64, p: &PowerParams) -> Result<Complex64> {
    Ok(TotalPowerCf::new(p, Exec::default())?.eval(w))
}

/// Inversion settings for the total-power law: the log-heavy tail needs the
/// far region to reach `|ln w|` of order `e^(22/theta)`.
pub fn power_inversion_options(theta: f64, tol: f64) -> InversionOptions {
    InversionOptions {
        far_extent: 22.0 / theta,
        panel_width: 1.0,
        max_panels: 8000,
        nonnegative: true,
        ..InversionOptions::with_tol(tol)
    }
}

/// Distribution of the required total transmit power on `grid` (W).
pub fn required_power_distribution(p: &PowerParams, grid: &[f64], opts: &InversionOptions) -> Result<DistributionTable> {
    let cf = TotalPowerCf::new(p, opts.exec)?;
    if cf.atom_at_zero() >= 1.0 {
        return Err(Error::DegenerateConfig("no interference or no MSs: required power is identically zero".into()));
    }
    invert(&cf, grid, opts)
}

/// Power tables for many ratios sharing one kernel and one node set.
pub struct PowerSweep {
    omega: Vec<f64>,
    weight: Vec<f64>,
    m: Vec<Complex64>,
    exec: Exec,
}

impl PowerSweep {
    pub fn new(p: &PowerParams, x_scale: f64, opts: &InversionOptions) -> Result<Self> {
        let kernel = TotalPowerKernel::new(p, opts.exec)?;
        if kernel.zero {
            return Err(Error::DegenerateConfig("zero interference: required power is identically zero".into()));
        }
        let (omega, weight) = node_set(x_scale, opts);
        let m = opts.exec.map(&omega, |w| kernel.m_log(w.ln()));
        Ok(Self { omega, weight, m, exec: opts.exec })
    }

    /// Table at intensity ratio `ratio`, with its truncation bound.
    pub fn table(&self, ratio: f64, grid: &[f64]) -> Result<(DistributionTable, TruncationBound)> {
        let phi: Vec<Complex64> = self.m.iter().map(|m| (-m * ratio).exp()).collect();
        let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        let s = CfSamples::from_values(self.omega.clone(), self.weight.clone(), &phi, (-ratio).exp(), step, true);
        let t = table_from_samples(&s, grid, self.exec)?;
        Ok((t, s.bound))
    }
}

/// Renormalised law on `(0, P_max]`.
pub fn truncated_power_pdf(table: &DistributionTable, p_max: f64) -> Result<DistributionTable> {
    table.truncate(p_max)
}

/// `(F(P_max), int_0^P_max x f(x) dx)` from a table reaching `P_max`.
pub fn truncated_moments(table: &DistributionTable, p_max: f64) -> (f64, f64) {
    let f_max = table.cdf_at(p_max);
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for (x, f) in table.grid.iter().zip(&table.cdf) {
        if *x < p_max {
            xs.push(*x);
            fs.push(*f);
        }
    }
    xs.push(p_max);
    fs.push(f_max);
    let int_f = if xs[0] > 0.0 {
        trapezoid(&xs, &fs) + xs[0] * table.atom_at_zero
    } else {
        trapezoid(&xs, &fs)
    };
    (f_max, p_max * f_max - int_f)
}

/// Mean BS consumption `int x f / (eta_rf int f) + P_circuit` over `(0, P_max]`.
pub fn mean_bs_power(table: &DistributionTable, p: &PowerParams) -> Result<f64> {
    let (f_max, int_xf) = truncated_moments(table, p.p_max);
    if f_max <= 0.0 {
        return Err(Error::DegenerateConfig("no probability mass below P_max".into()));
    }
    Ok(int_xf / (p.eta_rf * f_max) + p.p_circuit)
}

#[allow(dead_code)]
fn cdf_from(grid: &[f64], cdf: &[f64], x: f64) -> f64 {
    interp(grid, cdf, x)
}

//! Snapshot simulator of the full network model: Poisson BSs and MSs in a
//! disc, nearest-BS cells, thinned co-channel interferers, Pareto rates,
//! per-link power control with `P_max` and random drops.
//!
//! Trial `t` draws from `ChaCha8Rng::seed_from_u64(seed)` moved to stream `t`,
//! so every trial is reproducible on its own and the aggregate does not
//! depend on scheduling.

use crate::channel::sample_q;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{assign_nearest_bs, interior_cells, sample_poisson_pattern, CellPartition, Disc, PointPattern};
use crate::numerics::cf::{empirical_cf, CharFn};
use crate::power::{per_link_power, PowerParams, ReceivingPowerCf, StableCfParams, TotalPowerCf};
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::io::Write;

/// Fading draws below this are redrawn.
pub const DEEP_FADE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    /// Window radius, m.
    pub window_radius: f64,
    /// Guard band, m; only cells with BS at least this far inside are evaluated.
    pub guard: f64,
    pub trials: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl McSettings {
    pub fn check(&self) -> Result<()> {
        if !(self.window_radius > 0.0) || !(self.guard >= 0.0) || self.guard >= self.window_radius {
            return Err(Error::invalid("need 0 <= guard < window radius"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        Ok(())
    }

    pub fn window(&self) -> Disc {
        Disc::centred(self.window_radius)
    }
}

/// Per-MS record for MSs of evaluated cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsRecord {
    pub ms: usize,
    pub bs: usize,
    /// Distance to the serving BS, m.
    pub r: f64,
    /// Rate, rate units.
    pub rate: f64,
    pub sir: f64,
    /// W.
    pub i_agg: f64,
    /// W.
    pub s0: f64,
    /// Required link power, W.
    pub eps: f64,
    pub dropped: bool,
}

/// Aggregates of one evaluated cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRecord {
    pub bs: usize,
    pub ms_count: usize,
    pub traffic: f64,
    /// W.
    pub p_req: f64,
    /// W.
    pub p_real: f64,
    pub served: f64,
}

/// Interfering link hosted by a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub bs: usize,
    pub ms: usize,
    /// Distance to its own BS, m.
    pub r_own: f64,
}

#[derive(Debug, Clone)]
pub struct NetworkSnapshot {
    pub bs_pattern: PointPattern,
    pub ms_pattern: PointPattern,
    pub partition: CellPartition,
    pub interferers: Vec<Interferer>,
    pub ms: Vec<MsRecord>,
    pub cells: Vec<CellRecord>,
    /// True when no interferer is active, so every required power is zero.
    pub interference_free: bool,
}

/// Aggregate interference at `at` from every interferer outside cell `own`.
fn aggregate_interference<R: Rng + ?Sized>(
    at: [f64; 2],
    own: usize,
    bs: &[[f64; 2]],
    interferers: &[Interferer],
    s_star: f64,
    p: &PowerParams,
    rng: &mut R,
) -> f64 {
    let half_beta = 0.5 * p.channel.beta;
    let mut total = 0.0;
    for it in interferers {
        if it.bs == own {
            continue;
        }
        let b = bs[it.bs];
        let d2 = (b[0] - at[0]).powi(2) + (b[1] - at[1]).powi(2);
        let ratio = (it.r_own * it.r_own / d2).powf(half_beta);
        total += s_star * ratio * sample_q(rng, p.channel.sigma);
    }
    total
}

fn own_link_fade<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let xi: f64 = StandardNormal.sample(rng);
    loop {
        let z: f64 = Exp1.sample(rng);
        if z >= DEEP_FADE {
            return (xi, z);
        }
    }
}

/// One network snapshot; only cells whose BS lies inside the guard band are
/// evaluated.
pub fn simulate_snapshot<R: Rng + ?Sized>(p: &PowerParams, s: &McSettings, rng: &mut R) -> Result<NetworkSnapshot> {
    p.check()?;
    s.check()?;
    let window = s.window();
    let mut bs = sample_poisson_pattern(p.traffic.lambda_b, window, rng)?;
    let mut tries = 0;
    while bs.is_empty() {
        tries += 1;
        if tries > 1000 {
            return Err(Error::DegenerateConfig("window too small to hold a BS".into()));
        }
        bs = sample_poisson_pattern(p.traffic.lambda_b, window, rng)?;
    }
    let ms = sample_poisson_pattern(p.traffic.lambda_m, window, rng)?;
    let partition = assign_nearest_bs(&ms, &bs)?;

    let host_prob = (p.lambda_inf / p.traffic.lambda_b).min(1.0);
    let mut interferers = Vec::new();
    for (j, members) in partition.members.iter().enumerate() {
        if rng.random::<f64>() < host_prob {
            if let Some(&m) = members.choose(rng) {
                interferers.push(Interferer { bs: j, ms: m, r_own: partition.distance[m] });
            }
        }
    }
    let s_star = p.s_star();

    let mut records = Vec::new();
    let mut cells = Vec::new();
    for j in interior_cells(&bs, s.guard) {
        let start = records.len();
        for &i in &partition.members[j] {
            let rate = p.traffic.sample_pareto(rng);
            let sir = p.channel.rate_to_sir(rate);
            let i_agg = aggregate_interference(ms.points[i], j, &bs.points, &interferers, s_star, p, rng);
            let s0 = if i_agg == 0.0 { 0.0 } else { sir * i_agg };
            let (xi, zeta2) = own_link_fade(rng);
            let r = partition.distance[i].max(1e-9);
            let eps = per_link_power(s0, r, xi, zeta2, &p.channel)?;
            records.push(MsRecord { ms: i, bs: j, r, rate, sir, i_agg, s0, eps, dropped: false });
        }
        let cell = &mut records[start..];
        let traffic: f64 = cell.iter().map(|m| m.rate).sum();
        let p_req: f64 = cell.iter().map(|m| m.eps).sum();
        let mut live: Vec<usize> = (0..cell.len()).collect();
        let mut load = p_req;
        while load > p.p_max && !live.is_empty() {
            let k = rng.random_range(0..live.len());
            cell[live.swap_remove(k)].dropped = true;
            load = cell.iter().filter(|m| !m.dropped).map(|m| m.eps).sum();
        }
        let served = cell.iter().filter(|m| !m.dropped).map(|m| m.rate).sum();
        cells.push(CellRecord { bs: j, ms_count: cell.len(), traffic, p_req, p_real: load, served });
    }
    Ok(NetworkSnapshot {
        bs_pattern: bs,
        ms_pattern: ms,
        partition,
        interference_free: interferers.is_empty() || p.lambda_inf == 0.0,
        interferers,
        ms: records,
        cells,
    })
}

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Mean and 95% half-width over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub trials: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_trials(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self { mean, half_width, trials: n, seed }
    }
}

/// Per-trial totals over evaluated cells.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TrialTotals {
    cells: usize,
    traffic: f64,
    served: f64,
    p_real: f64,
    outage_cells: usize,
}

fn totals(snap: &NetworkSnapshot, p_max: f64) -> TrialTotals {
    let mut t = TrialTotals::default();
    for c in &snap.cells {
        t.cells += 1;
        t.traffic += c.traffic;
        t.served += c.served;
        t.p_real += c.p_real;
        if c.p_req > p_max {
            t.outage_cells += 1;
        }
    }
    t
}

/// Monte Carlo energy efficiency and companions at the ratio carried by `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub ratio: f64,
    /// Served load over mean BS consumption.
    pub ee: McEstimate,
    /// Fraction of cells whose required power exceeds `P_max`.
    pub outage: McEstimate,
    /// Mean realised transmit power per cell, W.
    pub mean_tx_power_w: McEstimate,
    /// Mean BS consumption `P_tx / eta_rf + P_circuit`, W.
    pub mean_bs_power_w: McEstimate,
    /// Mean offered load per cell.
    pub mean_traffic: McEstimate,
    pub interference_free: bool,
}

/// EE from `trials` independent snapshots; per trial the evaluated cells are
/// pooled, and the CI comes from the spread between trials.
pub fn mc_energy_efficiency(p: &PowerParams, s: &McSettings) -> Result<McReport> {
    s.check()?;
    let runs = s.exec.map_range(s.trials, |t| {
        let mut rng = trial_rng(s.seed, t);
        simulate_snapshot(p, s, &mut rng).map(|snap| (totals(&snap, p.p_max), snap.interference_free))
    });
    let mut ee = Vec::new();
    let mut outage = Vec::new();
    let mut power = Vec::new();
    let mut traffic = Vec::new();
    let mut free = true;
    for r in runs {
        let (t, f) = r?;
        free &= f;
        if t.cells == 0 {
            continue;
        }
        let n = t.cells as f64;
        let mean_p = t.p_real / n;
        ee.push((t.served / n) / (mean_p / p.eta_rf + p.p_circuit));
        outage.push(t.outage_cells as f64 / n);
        power.push(mean_p);
        traffic.push(t.traffic / n);
    }
    if ee.is_empty() {
        return Err(Error::DegenerateConfig("no evaluated cells in any trial; enlarge the window".into()));
    }
    Ok(McReport {
        ratio: p.ratio(),
        ee: McEstimate::from_trials(&ee, s.seed),
        outage: McEstimate::from_trials(&outage, s.seed),
        mean_tx_power_w: McEstimate::from_trials(&power, s.seed),
        mean_bs_power_w: McEstimate::from_trials(
            &power.iter().map(|x| x / p.eta_rf + p.p_circuit).collect::<Vec<_>>(),
            s.seed,
        ),
        mean_traffic: McEstimate::from_trials(&traffic, s.seed),
        interference_free: free,
    })
}

/// Monte Carlo sweep over ratios; every ratio reuses the same seed.
pub fn mc_sweep(p: &PowerParams, ratios: &[f64], s: &McSettings) -> Result<Vec<McReport>> {
    ratios.iter().map(|&r| mc_energy_efficiency(&p.with_ratio(r), s)).collect()
}

/// CSV: `ratio, ee_mc, ci_halfwidth, outage_mc, mean_power_mc_w`.
pub fn write_mc_csv<W: Write>(mut out: W, rows: &[McReport], comment: &str, rate_unit: &str) -> Result<()> {
    writeln!(out, "# {comment}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "ratio".to_string(),
        format!("ee_mc_{rate_unit}_per_joule"),
        "ci_halfwidth".to_string(),
        "outage_mc".to_string(),
        "mean_power_mc_w".to_string(),
    ])?;
    for r in rows {
        w.write_record([
            format!("{}", r.ratio),
            format!("{:.6e}", r.ee.mean),
            format!("{:.6e}", r.ee.half_width),
            format!("{:.6e}", r.outage.mean),
            format!("{:.6e}", r.mean_bs_power_w.mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pooled samples from evaluated cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McSamples {
    /// Per MS, W.
    pub i_agg: Vec<f64>,
    /// Per MS, W.
    pub s0: Vec<f64>,
    /// Per MS, distance to the serving BS, m.
    pub distance: Vec<f64>,
    /// Per cell, W.
    pub p_req: Vec<f64>,
    /// Per cell.
    pub traffic: Vec<f64>,
    pub ms_count: Vec<usize>,
}

/// Run trials until at least `min_cells` evaluated cells are pooled (and at
/// least `s.trials` trials).
pub fn mc_samples(p: &PowerParams, s: &McSettings, min_cells: usize) -> Result<McSamples> {
    s.check()?;
    let mut out = McSamples::default();
    let mut next = 0usize;
    while next < s.trials || out.p_req.len() < min_cells {
        let batch = s.exec.map_range(s.trials.max(1), |k| {
            let mut rng = trial_rng(s.seed, next + k);
            simulate_snapshot(p, s, &mut rng)
        });
        next += s.trials.max(1);
        for snap in batch {
            let snap = snap?;
            for m in &snap.ms {
                out.i_agg.push(m.i_agg);
                out.s0.push(m.s0);
                out.distance.push(m.r);
            }
            for c in &snap.cells {
                out.p_req.push(c.p_req);
                out.traffic.push(c.traffic);
                out.ms_count.push(c.ms_count);
            }
        }
        if next > 1_000_000 {
            return Err(Error::DegenerateConfig("too few evaluated cells per trial".into()));
        }
    }
    Ok(out)
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

/// `(1/N) sum exp(j w x_i)` per `w`; infinite samples contribute nothing.
pub fn mc_empirical_cf(samples: &[f64], grid: &[f64]) -> Result<Vec<Complex64>> {
    empirical_cf(samples, grid)
}

/// Frequencies `t / x_scale` for `t` in 0.05..10, eight points.
pub fn duality_grid(x_scale: f64) -> Vec<f64> {
    [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0].iter().map(|t| t / x_scale).collect()
}

/// Analytic and empirical CF of one quantity on its comparison grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DualityCheck {
    pub name: &'static str,
    pub samples: usize,
    pub grid: Vec<f64>,
    pub analytic: Vec<Complex64>,
    pub empirical: Vec<Complex64>,
}

impl DualityCheck {
    pub fn max_abs_diff(&self) -> f64 {
        self.analytic
            .iter()
            .zip(&self.empirical)
            .map(|(a, e)| (a - e).norm())
            .fold(0.0, f64::max)
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return 1.0;
    }
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Empirical CFs of the interference, receiving power and per-cell required
/// power against their analytic forms. Each grid is scaled by the sample
/// median of its quantity.
pub fn cf_duality(p: &PowerParams, samples: &McSamples) -> Result<Vec<DualityCheck>> {
    let stable = StableCfParams::new(p)?;
    let rp = ReceivingPowerCf::new(p)?;
    let tp = TotalPowerCf::new(p, Exec::default())?;
    let mut out = Vec::new();
    let cases: [(&'static str, &[f64], &dyn CharFn); 3] =
        [("i_agg", &samples.i_agg, &StableCf(stable)), ("s0", &samples.s0, &rp), ("p_req", &samples.p_req, &tp)];
    for (name, xs, cf) in cases {
        if xs.is_empty() {
            return Err(Error::DegenerateConfig(format!("no {name} samples")));
        }
        let m = median(xs);
        let grid = duality_grid(if m > 0.0 { m } else { 1.0 });
        let empirical = empirical_cf(xs, &grid)?;
        let analytic = grid.iter().map(|&w| cf.eval(w)).collect();
        out.push(DualityCheck { name, samples: xs.len(), grid, analytic, empirical });
    }
    Ok(out)
}

struct StableCf(StableCfParams);

impl CharFn for StableCf {
    fn eval_pos(&self, w: f64) -> Complex64 {
        self.0.cf(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::tests::default_params;

    fn settings(trials: usize) -> McSettings {
        McSettings { window_radius: 5000.0, guard: 2400.0, trials, seed: 7, exec: Exec::default() }
    }

    #[test]
    fn drop_rule_is_safe() {
        let p = default_params().with_ratio(130.0);
        let mut rng = trial_rng(3, 0);
        let snap = simulate_snapshot(&p, &settings(1), &mut rng).unwrap();
        assert!(!snap.cells.is_empty());
        for c in &snap.cells {
            assert!(c.p_real <= p.p_max);
            let live: Vec<&MsRecord> = snap.ms.iter().filter(|m| m.bs == c.bs && !m.dropped).collect();
            let sum: f64 = live.iter().map(|m| m.eps).sum();
            assert_eq!(sum, c.p_real);
            assert_eq!(live.iter().map(|m| m.rate).sum::<f64>(), c.served);
        }
    }

    #[test]
    fn no_ms_no_load() {
        let p = default_params().with_ratio(0.0);
        let mut rng = trial_rng(1, 0);
        let snap = simulate_snapshot(&p, &settings(1), &mut rng).unwrap();
        assert!(snap.cells.iter().all(|c| c.traffic == 0.0 && c.p_req == 0.0 && c.p_real == 0.0));
        assert!(snap.ms.iter().all(|m| !m.dropped));
    }

    #[test]
    fn no_interference_no_power() {
        let p = PowerParams { lambda_inf: 0.0, ..default_params() };
        let mut rng = trial_rng(1, 0);
        let snap = simulate_snapshot(&p, &settings(1), &mut rng).unwrap();
        assert!(snap.interference_free);
        assert!(snap.ms.iter().all(|m| m.i_agg == 0.0 && m.eps == 0.0));
    }

    #[test]
    fn interferers_are_nearest_associated() {
        let p = default_params();
        let mut rng = trial_rng(5, 0);
        let snap = simulate_snapshot(&p, &settings(1), &mut rng).unwrap();
        for it in &snap.interferers {
            let m = snap.ms_pattern.points[it.ms];
            for b in &snap.bs_pattern.points {
                assert!(it.r_own <= (b[0] - m[0]).hypot(b[1] - m[1]) + 1e-9);
            }
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = default_params().with_ratio(20.0);
        let a = mc_energy_efficiency(&p, &settings(3)).unwrap();
        let b = mc_energy_efficiency(&p, &settings(3)).unwrap();
        assert_eq!(a, b);
        let seq = mc_energy_efficiency(&p, &McSettings { exec: Exec::Sequential, ..settings(3) }).unwrap();
        assert_eq!(a, seq);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!((ks_distance(&xs, |x| x) - 0.0005).abs() < 1e-12);
        assert!(ks_distance(&xs, |x| x * x) > 0.2);
    }

    #[test]
    fn empirical_cf_of_zeros() {
        let v = mc_empirical_cf(&[0.0; 10], &[0.5, 3.0]).unwrap();
        assert!(v.iter().all(|z| (z - 1.0).norm() < 1e-15));
    }
}

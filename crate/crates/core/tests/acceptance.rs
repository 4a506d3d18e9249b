//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it.

use pvt_energy::channel::{log_moment, q_moment, q_ratio_pdf};
use pvt_energy::config::{Command, NetworkConfig};
use pvt_energy::energy::{ee_options, ee_sweep, EnergySweepResult};
use pvt_energy::geometry::{
    estimate_cell_areas, nearest_distance_cdf, sample_poisson_pattern, Disc,
};
use pvt_energy::montecarlo::{cf_duality, ks_distance, mc_samples, mc_sweep, trial_rng};
use pvt_energy::numerics::cf::{axiom_grid, check_axioms, FnCf};
use pvt_energy::numerics::quadrature::integrate_adaptive;
use pvt_energy::numerics::table::linspace;
use pvt_energy::power::{
    interference_cf, power_inversion_options, required_power_distribution, PowerParams, ReceivingPowerCf,
    TotalPowerCf,
};
use pvt_energy::traffic::{traffic_inversion_options, traffic_load_distribution};
use pvt_energy::Exec;
use statrs::distribution::{ContinuousCDF, Gamma};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

const CF_TOL: f64 = 1e-8;
const INVERSION_TOL: f64 = 1e-4;

fn config(name: &str, cmd: Command) -> NetworkConfig {
    let path = format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    NetworkConfig::from_file(std::path::Path::new(&path), cmd).unwrap()
}

fn params(name: &str) -> PowerParams {
    *config(name, Command::EeSweep).power().unwrap()
}

fn report(n: usize, pass: bool, what: &str, detail: String, start: Instant, budget: Duration) -> bool {
    let t = start.elapsed();
    let ok = pass && t <= budget;
    let timing = format!("{:.1}s of {}s", t.as_secs_f64(), budget.as_secs());
    println!("{} criterion {n}: {what}: {detail} [{timing}]", if ok { "PASS" } else { "FAIL" });
    ok
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Analytic sweeps over ratios 10..300, shared between criteria.
fn sweep(name: &'static str) -> EnergySweepResult {
    static CACHE: OnceLock<std::sync::Mutex<HashMap<&'static str, EnergySweepResult>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().unwrap().get(name) {
        return r.clone();
    }
    let cfg = config(name, Command::EeSweep);
    let p = cfg.power().unwrap();
    let r = ee_sweep(p, cfg.ratios.as_ref().unwrap(), &ee_options(p)).unwrap();
    cache.lock().unwrap().insert(name, r.clone());
    r
}

fn maximum(r: &EnergySweepResult) -> (f64, f64) {
    r.argmax().map(|m| (m.ee, m.ratio)).unwrap_or((f64::NAN, f64::NAN))
}

#[test]
fn cf_axioms() {
    let start = Instant::now();
    let base = params("ee_default");
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for theta in [1.2, 1.5, 1.8, 2.0] {
        for ratio in [5.0, 15.0, 30.0] {
            let mut p = base.with_ratio(ratio);
            p.traffic.theta = theta;
            let t = p.traffic.char_fn();
            let ifc = FnCf::new(|w| interference_cf(w, &p).unwrap());
            let rp = ReceivingPowerCf::new(&p).unwrap();
            let tp = TotalPowerCf::new(&p, Exec::default()).unwrap();
            let checks = [
                ("traffic", check_axioms(&t, &axiom_grid(1e-4 / p.traffic.rho_min, 1e3 / p.traffic.rho_min))),
                ("interference", check_axioms(&ifc, &axiom_grid(1e8, 1e22))),
                ("receiving", check_axioms(&rp, &axiom_grid(1e8, 1e22))),
                ("total_power", check_axioms(&tp, &axiom_grid(1e-3, 1e3))),
            ];
            for (name, r) in checks {
                worst = worst.max(r.at_zero).max(r.max_modulus - 1.0).max(r.max_conj_err);
                if !r.passes(CF_TOL) {
                    failures.push(format!("{name} theta={theta} ratio={ratio}"));
                }
            }
        }
    }
    let pass = failures.is_empty();
    let detail = format!("4 CFs x 12 configs, worst violation {worst:.2e} (tol {CF_TOL:e}) {failures:?}");
    assert!(report(1, pass, "CF axioms", detail, start, minutes(1)));
}

#[test]
fn closed_form_moments() {
    let start = Instant::now();
    let cfg = config("traffic_default", Command::TrafficDist);
    let model = cfg.traffic;
    let mean = model.mean_aggregate().unwrap();
    let grid = linspace(0.0, 40.0 * mean, 4001);
    let table = traffic_load_distribution(&model, &grid, &traffic_inversion_options(INVERSION_TOL)).unwrap();
    let table_mean = table.mean_with_power_tail(model.theta);
    let mean_err = rel(table_mean, mean);
    let mut worst_moment: f64 = 0.0;
    for beta in [3.5, 3.8, 4.0] {
        for sigma in [0.0, 6.0, 8.0] {
            let closed = q_moment(beta, sigma).unwrap();
            let numeric = log_moment(|x| q_ratio_pdf(x, sigma), 2.0 / beta, -80.0, 140.0).unwrap();
            worst_moment = worst_moment.max(rel(numeric, closed));
        }
    }
    let pass = mean_err <= 0.01 && worst_moment <= 1e-3;
    let detail = format!(
        "load mean {table_mean:.3} vs closed form {mean:.4} (rel {mean_err:.2e}, tol 1e-2); \
         Q moment worst rel {worst_moment:.2e} (tol 1e-3)"
    );
    assert!(report(2, pass, "closed-form moments", detail, start, minutes(1)));
}

#[test]
fn nearest_distance_law() {
    let start = Instant::now();
    let lambda = 1.0 / (PI * 800.0 * 800.0);
    // typical point at the origin of independent patterns
    let window = Disc::centred(3.0 * 1600.0);
    let mut rng = trial_rng(2024, 0);
    let mut d = Vec::with_capacity(1_000_000);
    while d.len() < 1_000_000 {
        let bs = sample_poisson_pattern(lambda, window, &mut rng).unwrap();
        let r = bs.points.iter().map(|p| p[0].hypot(p[1])).fold(f64::INFINITY, f64::min);
        if r.is_finite() {
            d.push(r);
        }
    }
    let ks = ks_distance(&d, |r| nearest_distance_cdf(r, lambda));
    let hi = 8.0 / (PI * lambda).sqrt();
    let integral = integrate_adaptive(|x: f64| x.powi(3) * (-2.0 * PI * lambda * x * x).exp(), 0.0, hi, 1e-14).unwrap();
    let exact = 1.0 / (8.0 * (PI * lambda).powi(2));
    let int_err = rel(integral, exact);
    let pass = ks < 0.01 && int_err <= 1e-10;
    let detail = format!("KS {ks:.2e} over 1e6 samples (tol 1e-2); moment integral rel err {int_err:.2e} (tol 1e-10)");
    assert!(report(3, pass, "nearest-distance law", detail, start, minutes(5)));
}

#[test]
fn voronoi_cell_areas() {
    let start = Instant::now();
    let lambda = 1.0 / (PI * 800.0 * 800.0);
    let (a, b) = (3.61, 3.57);
    let window = Disc::centred(10_000.0);
    let guard = pvt_energy::geometry::guard_band(lambda);
    let mut areas = Vec::new();
    let mut t = 0;
    while areas.len() < 10_000 {
        let mut rng = trial_rng(77, t);
        t += 1;
        let bs = sample_poisson_pattern(lambda, window, &mut rng).unwrap();
        if bs.is_empty() {
            continue;
        }
        areas.extend(estimate_cell_areas(&bs, 100_000, guard, &mut rng).unwrap().into_iter().map(|(_, x)| x));
    }
    let mean = areas.iter().sum::<f64>() / areas.len() as f64;
    let target = a / (b * lambda);
    let law = Gamma::new(a, b * lambda).unwrap();
    let ks = ks_distance(&areas, |x| law.cdf(x));
    let pass = rel(mean, target) <= 0.02 && ks < 0.05;
    let detail = format!(
        "{} cells, mean {:.4}/lambda_B (target {:.4}/lambda_B, tol 2%), KS {ks:.3} (tol 0.05)",
        areas.len(),
        mean * lambda,
        target * lambda
    );
    assert!(report(4, pass, "Voronoi cell areas", detail, start, minutes(2)));
}

#[test]
fn cf_duality_with_simulation() {
    let start = Instant::now();
    let cfg = config("ee_default", Command::Validate);
    let p = cfg.power().unwrap();
    let samples = mc_samples(p, &cfg.mc_settings(Exec::default()), 10_000).unwrap();
    let checks = cf_duality(p, &samples).unwrap();
    let diffs: Vec<String> =
        checks.iter().map(|c| format!("{} {:.3} (n={})", c.name, c.max_abs_diff(), c.samples)).collect();
    let pass = checks.iter().all(|c| c.max_abs_diff() <= 0.03 && c.samples >= 10_000);
    let detail = format!("max |phi - phi_emp| {} (tol 0.03)", diffs.join(", "));
    assert!(report(5, pass, "CF duality", detail, start, minutes(10)));
}

fn cdf_on(p: &PowerParams, grid: &[f64]) -> Vec<f64> {
    let opts = power_inversion_options(p.traffic.theta, INVERSION_TOL);
    required_power_distribution(p, grid, &opts).unwrap().cdf
}

/// Largest violation of `lo[k] >= hi[k]` over consecutive pairs.
fn ordering_violation(cdfs: &[Vec<f64>]) -> f64 {
    cdfs.windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| b - a))
        .fold(0.0, f64::max)
}

#[test]
fn monotonicity_and_dominance() {
    let start = Instant::now();
    let slack = 2.0 * INVERSION_TOL;
    let d = sweep("ee_default");
    let outs: Vec<f64> = d.rows.iter().map(|r| r.p_out).collect();
    let in_ratio = outs.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let base = params("ee_default").with_ratio(30.0);
    let outs_pmax: Vec<f64> = [20.0, 40.0, 60.0, 80.0]
        .iter()
        .map(|&pm| {
            let p = PowerParams { p_max: pm, ..base };
            ee_sweep(&p, &[30.0], &ee_options(&p)).unwrap().rows[0].p_out
        })
        .collect();
    let in_pmax = outs_pmax.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let fig = *config("power_default", Command::PowerDist).power().unwrap();
    let grid = linspace(0.0, 80.0, 401);
    // larger ratio, smaller beta and larger lambda_Inf each need more power
    let by_ratio: Vec<Vec<f64>> = [10.0, 30.0, 50.0].iter().map(|&r| cdf_on(&fig.with_ratio(r), &grid)).collect();
    let by_beta: Vec<Vec<f64>> = [4.0, 3.8, 3.5]
        .iter()
        .map(|&b| {
            let mut p = fig;
            p.channel.beta = b;
            cdf_on(&p, &grid)
        })
        .collect();
    let by_inf: Vec<Vec<f64>> = [0.5, 0.7, 0.9]
        .iter()
        .map(|&f| cdf_on(&PowerParams { lambda_inf: f * fig.traffic.lambda_b, ..fig }, &grid))
        .collect();
    let v = [in_ratio, in_pmax, ordering_violation(&by_ratio), ordering_violation(&by_beta), ordering_violation(&by_inf)];
    let pass = v.iter().all(|&x| x <= slack);
    let detail = format!(
        "worst violations: p_out vs ratio {:.1e}, vs P_max {:.1e}; CDF order by ratio {:.1e}, beta {:.1e}, lambda_Inf {:.1e} (slack {slack:.0e})",
        v[0], v[1], v[2], v[3], v[4]
    );
    assert!(report(6, pass, "monotonicity and dominance", detail, start, minutes(10)));
}

#[test]
fn default_sweep_maximum() {
    let start = Instant::now();
    let r = sweep("ee_default");
    let (ee, at) = maximum(&r);
    let failed = r.rows.iter().filter(|x| !x.is_ok()).count();
    let pass = failed == 0 && r.interior_maximum() && rel(ee, 0.29) <= 0.20 && (at - 130.0).abs() <= 30.0;
    let detail = format!(
        "maximum {ee:.4} at ratio {at} (target 0.29 +-20% at 130 +-30), interior {}, failed rows {failed}",
        r.interior_maximum()
    );
    assert!(report(7, pass, "default EE maximum", detail, start, minutes(15)));
}

fn ordered_case(n: usize, what: &str, names: [&'static str; 3], targets: [f64; 3], increasing: bool, ratios_increase: bool) {
    let start = Instant::now();
    let maxima: Vec<(f64, f64)> = names.iter().map(|n| maximum(&sweep(n))).collect();
    let ee: Vec<f64> = maxima.iter().map(|m| m.0).collect();
    let at: Vec<f64> = maxima.iter().map(|m| m.1).collect();
    let order = ee.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    let order_at = !ratios_increase || at.windows(2).all(|w| w[1] > w[0]);
    let close = ee.iter().zip(&targets).all(|(e, t)| rel(*e, *t) <= 0.25);
    let detail = format!("maxima {ee:.4?} at ratios {at:?} (targets {targets:?} +-25%)");
    assert!(report(n, order && order_at && close, what, detail, start, minutes(15)));
}

#[test]
fn path_loss_ordering() {
    ordered_case(8, "path-loss ordering", ["ee_beta36", "ee_default", "ee_beta40"], [0.17, 0.29, 0.46], true, true);
}

#[test]
fn interference_ordering() {
    let names = ["ee_lambda_inf_3e7", "ee_default", "ee_lambda_inf_5e7"];
    ordered_case(9, "interfering-link ordering", names, [0.39, 0.29, 0.23], false, false);
}

#[test]
fn traffic_shape_set() {
    let start = Instant::now();
    let names = ["ee_theta12_rho2", "ee_theta12_rho3", "ee_default", "ee_theta18_rho3"];
    let mut ee: Vec<f64> = names.iter().map(|n| maximum(&sweep(n)).0).collect();
    ee.sort_by(|a, b| b.total_cmp(a));
    let targets = [0.55, 0.45, 0.29, 0.26];
    let pass = ee.iter().zip(&targets).all(|(e, t)| rel(*e, *t) <= 0.25);
    let detail = format!("sorted maxima {ee:.4?} (targets {targets:?} +-25%)");
    assert!(report(10, pass, "traffic-shape set", detail, start, minutes(15)));
}

#[test]
fn simulation_saturation() {
    let start = Instant::now();
    let cfg = config("ee_default", Command::McSweep);
    let p = cfg.power().unwrap();
    let s = cfg.mc_settings(Exec::default());
    assert!(s.trials >= 50 && s.window_radius >= 10_000.0);
    let analytic = sweep("ee_default");
    let (_, argmax) = maximum(&analytic);
    let ratios = cfg.ratios.clone().unwrap();
    let mc = mc_sweep(p, &ratios, &s).unwrap();
    let beyond: Vec<_> = mc.iter().filter(|r| r.ratio >= argmax).collect();
    let worst_drop = beyond
        .windows(2)
        .map(|w| w[0].ee.mean - w[1].ee.mean - (w[0].ee.half_width + w[1].ee.half_width))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut worst_gap: f64 = 0.0;
    for (m, a) in mc.iter().zip(&analytic.rows) {
        if m.ratio < argmax {
            worst_gap = worst_gap.max(rel(m.ee.mean, a.ee));
        }
    }
    let pass = worst_drop <= 0.0 && worst_gap <= 0.15;
    let detail = format!(
        "beyond ratio {argmax}: worst CI-adjusted drop {worst_drop:.2e} (must be <= 0); \
         below it: worst MC/analytic gap {worst_gap:.3} (tol 0.15); {} trials, R {} m",
        s.trials, s.window_radius
    );
    assert!(report(11, pass, "simulation saturation", detail, start, minutes(30)));
}

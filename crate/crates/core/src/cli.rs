//! Command-line front end: parses flags, loads the config, runs one
//! experiment and writes CSVs. Exit codes: 0 success, 1 config error,
//! 2 numeric failure, 3 validation threshold missed.

use crate::config::{parse_ratios, Command, NetworkConfig};
use crate::energy::{ee_options, ee_sweep, outage_probability};
use crate::error::{Error, Result};
use crate::exec::{set_threads, Exec};
use crate::geometry::nearest_distance_cdf;
use crate::montecarlo::{cf_duality, ks_distance, mc_samples, mc_sweep, write_mc_csv};
use crate::numerics::cf::{axiom_grid, check_axioms};
use crate::numerics::table::linspace;
use crate::power::{power_inversion_options, required_power_distribution, StableCfParams, TotalPowerCf};
use crate::traffic::{traffic_inversion_options, traffic_load_distribution};
use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Packaged default energy configuration.
pub const DEFAULT_EE_CONFIG: &str = include_str!("../configs/ee_default.toml");

#[derive(Debug, Parser)]
#[command(name = "pvt", version, about = "Energy efficiency of Poisson-Voronoi cellular networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
    /// Config file (flat TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Ratio range `a:b:step`.
    #[arg(long, global = true)]
    pub ratios: Option<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Cmd {
    /// Aggregate traffic-load distribution per ratio.
    TrafficDist,
    /// Required total BS power distribution per ratio.
    PowerDist,
    /// Analytic energy-efficiency sweep.
    EeSweep,
    /// Monte Carlo energy-efficiency sweep.
    McSweep,
    /// Analytic versus Monte Carlo report.
    Validate,
    /// Invariant suite.
    Selftest,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::TrafficDist => Command::TrafficDist,
            Cmd::PowerDist => Command::PowerDist,
            Cmd::EeSweep => Command::EeSweep,
            Cmd::McSweep => Command::McSweep,
            Cmd::Validate => Command::Validate,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

/// Outcome of a command that can miss a threshold.
enum Outcome {
    Done,
    Failed(Vec<String>),
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) => EXIT_CONFIG,
        Error::NonConvergence { .. } | Error::BranchAmbiguity(_) | Error::DegenerateConfig(_) => EXIT_NUMERIC,
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Ok(n) = std::env::var("PVT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => set_threads(n),
            _ => {
                eprintln!("error: PVT_THREADS must be a positive integer, got {n:?}");
                return EXIT_CONFIG;
            }
        }
    }
    match execute(&cli) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::Failed(lines)) => {
            for l in lines {
                eprintln!("FAIL {l}");
            }
            EXIT_VALIDATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(cli: &Cli) -> Result<NetworkConfig> {
    // selftest exercises the power pipeline, so it resolves like an energy run
    let cmd = match cli.command.command() {
        Command::Selftest => Command::EeSweep,
        c => c,
    };
    let mut cfg = match &cli.config {
        Some(p) => NetworkConfig::from_file(p, cmd)?,
        None if cli.command.command() == Command::Selftest => NetworkConfig::parse(DEFAULT_EE_CONFIG, cmd)?,
        None => return Err(Error::Config("--config is required".into())),
    };
    let ratios = cli.ratios.as_deref().map(parse_ratios).transpose()?;
    cfg.apply_overrides(cli.seed, cli.trials, ratios)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn ratio_tag(r: f64) -> String {
    format!("{r}").replace('.', "p")
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = load(cli)?;
    for line in cfg.report() {
        eprintln!("{line}");
    }
    eprintln!("config_digest = {}", cfg.digest);
    match cli.command {
        Cmd::TrafficDist => traffic_dist(&cfg, &cli.out),
        Cmd::PowerDist => power_dist(&cfg, &cli.out),
        Cmd::EeSweep => ee(&cfg, &cli.out),
        Cmd::McSweep => mc(&cfg, &cli.out),
        Cmd::Validate => validate(&cfg, &cli.out),
        Cmd::Selftest => selftest(&cfg),
    }
}

fn traffic_dist(cfg: &NetworkConfig, out: &Path) -> Result<Outcome> {
    let opts = traffic_inversion_options(cfg.inversion_tol.value);
    for r in cfg.sweep_ratios() {
        let model = cfg.traffic.with_ratio(r);
        let mean = model.mean_aggregate()?;
        let grid_max = cfg.grid_max.unwrap_or(8.0 * mean.max(model.rho_min));
        let grid = linspace(0.0, grid_max, cfg.grid_points.value);
        let t = traffic_load_distribution(&model, &grid, &opts)?;
        let name = format!("traffic_dist_ratio{}.csv", ratio_tag(r));
        t.write_csv(create(out, &name)?, &cfg.csv_comment(), &format!("load_{}", cfg.rate_units.label()))?;
        eprintln!(
            "ratio {r}: mean load {:.4} (closed form {:.4}) {}; wrote {name}",
            t.mean_with_power_tail(model.theta),
            mean,
            cfg.rate_units.label()
        );
    }
    Ok(Outcome::Done)
}

fn power_dist(cfg: &NetworkConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.power()?;
    for r in cfg.sweep_ratios() {
        let pr = p.with_ratio(r);
        let grid = linspace(0.0, cfg.grid_max.unwrap_or(2.0 * p.p_max), cfg.grid_points.value);
        let opts = power_inversion_options(p.traffic.theta, cfg.inversion_tol.value);
        let t = required_power_distribution(&pr, &grid, &opts)?;
        let name = format!("power_dist_ratio{}.csv", ratio_tag(r));
        t.write_csv(create(out, &name)?, &cfg.csv_comment(), "power_w")?;
        eprintln!("ratio {r}: p_out {:.4} at P_max {} W; wrote {name}", outage_probability(&t, p.p_max), p.p_max);
    }
    Ok(Outcome::Done)
}

fn require_ratios(cfg: &NetworkConfig) -> Result<Vec<f64>> {
    cfg.ratios.clone().ok_or_else(|| Error::Config("missing required key `ratios` (or --ratios)".into()))
}

fn ee(cfg: &NetworkConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.power()?;
    let ratios = require_ratios(cfg)?;
    let mut opts = ee_options(p);
    opts.tol = cfg.inversion_tol.value;
    let mut res = ee_sweep(p, &ratios, &opts)?;
    res.digest = cfg.digest.clone();
    res.write_csv(create(out, "ee_sweep.csv")?, &cfg.csv_comment(), cfg.rate_units.ee_label())?;
    if let Some(m) = res.argmax() {
        eprintln!("maximum EE {:.4} at ratio {}; wrote ee_sweep.csv", m.ee, m.ratio);
    }
    let failed: Vec<&str> = res.rows.iter().filter_map(|r| r.error.as_deref()).collect();
    if !failed.is_empty() {
        return Err(Error::NonConvergence { what: format!("{} sweep rows ({})", failed.len(), failed[0]), estimate: f64::NAN });
    }
    Ok(Outcome::Done)
}

fn mc(cfg: &NetworkConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.power()?;
    let ratios = require_ratios(cfg)?;
    let rows = mc_sweep(p, &ratios, &cfg.mc_settings(Exec::default()))?;
    write_mc_csv(create(out, "mc_sweep.csv")?, &rows, &cfg.csv_comment(), cfg.rate_units.ee_label())?;
    if rows.iter().any(|r| r.interference_free) {
        eprintln!("note: no active interferer in some trials; required powers are zero there");
    }
    eprintln!("wrote mc_sweep.csv ({} ratios, {} trials each)", rows.len(), cfg.trials.value);
    Ok(Outcome::Done)
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn validate(cfg: &NetworkConfig, out: &Path) -> Result<Outcome> {
    let p = cfg.power()?;
    let s = cfg.mc_settings(Exec::default());
    let samples = mc_samples(p, &s, 10_000)?;
    let mut checks = Vec::new();
    for d in cf_duality(p, &samples)? {
        let v = d.max_abs_diff();
        let t = cfg.cf_tol.value;
        checks.push(Check { name: format!("cf_{}_max_abs_diff", d.name), value: v, threshold: t, pass: v <= t });
    }
    let ks = ks_distance(&samples.distance, |r| nearest_distance_cdf(r, p.traffic.lambda_b));
    checks.push(Check { name: "ks_serving_distance".into(), value: ks, threshold: cfg.ks_tol.value, pass: ks <= cfg.ks_tol.value });
    let n = samples.traffic.len() as f64;
    let mean_t = samples.traffic.iter().sum::<f64>() / n;
    let rel = (mean_t / p.traffic.mean_aggregate()? - 1.0).abs();
    checks.push(Check { name: "mean_traffic_rel_err".into(), value: rel, threshold: 0.02, pass: rel <= 0.02 });
    let mean_n = samples.ms_count.iter().sum::<usize>() as f64 / n;
    let rel_n = (mean_n / p.ratio() - 1.0).abs();
    checks.push(Check { name: "mean_ms_count_rel_err".into(), value: rel_n, threshold: 0.02, pass: rel_n <= 0.02 });
    let mut opts = ee_options(p);
    opts.tol = cfg.inversion_tol.value.max(opts.tol);
    let row = ee_sweep(p, &[p.ratio()], &opts)?.rows.remove(0);
    let mc_out = samples.p_req.iter().filter(|&&x| x > p.p_max).count() as f64 / n;
    let d_out = (row.p_out - mc_out).abs();
    checks.push(Check { name: "outage_abs_diff".into(), value: d_out, threshold: 0.03, pass: d_out <= 0.03 });

    let mut w = csv::Writer::from_writer(create(out, "validate_report.csv")?);
    w.write_record(["check", "value", "threshold", "pass"])?;
    for c in &checks {
        w.write_record([c.name.clone(), format!("{:.6e}", c.value), format!("{}", c.threshold), c.pass.to_string()])?;
        eprintln!("{} {} = {:.4e} (threshold {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    w.flush()?;
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    Ok(if failed.is_empty() { Outcome::Done } else { Outcome::Failed(failed) })
}

fn selftest(cfg: &NetworkConfig) -> Result<Outcome> {
    let p = cfg.power()?;
    let mut failed = Vec::new();
    let mut record = |name: String, ok: bool| {
        eprintln!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name);
        }
    };
    let grid = axiom_grid(1e-4, 1e4);
    for theta in [1.2, 1.5, 1.8, 2.0] {
        for ratio in [5.0, 15.0, 30.0] {
            let t = cfg.traffic.with_ratio(ratio);
            let t = crate::traffic::TrafficModel { theta, ..t };
            let ok = check_axioms(&t.char_fn(), &axiom_grid(1e-4 / t.rho_min, 1e3 / t.rho_min)).passes(1e-9);
            record(format!("traffic_cf_axioms theta={theta} ratio={ratio}"), ok);
        }
    }
    let stable = StableCfParams::new(p)?;
    let modulus = grid.iter().all(|&w| ((stable.cf(w).norm()) - (-stable.delta * w.abs().powf(stable.p())).exp()).abs() < 1e-12);
    record("interference_cf_modulus_law".into(), modulus);
    let numeric = StableCfParams::numerical(p)?;
    record("dispersion_closed_vs_numerical".into(), (numeric.delta / stable.delta - 1.0).abs() < 1e-3);
    let tp = TotalPowerCf::new(p, Exec::default())?;
    record("total_power_cf_axioms".into(), check_axioms(&tp, &axiom_grid(1e-3, 1e3)).passes(1e-9));
    let ratios = [10.0, 20.0, 40.0, 80.0];
    let res = ee_sweep(p, &ratios, &ee_options(p))?;
    let outs: Vec<f64> = res.rows.iter().map(|r| r.p_out).collect();
    record("p_out_nondecreasing_in_ratio".into(), outs.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    record("ee_forms_agree".into(), res.rows.iter().all(|r| (r.ee / r.ee_composed - 1.0).abs() < 1e-6));
    let small = crate::montecarlo::McSettings { trials: 2, ..cfg.mc_settings(Exec::default()) };
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed.value);
    let snap = crate::montecarlo::simulate_snapshot(&p.with_ratio(60.0), &small, &mut rng)?;
    record("drop_rule_safety".into(), snap.cells.iter().all(|c| c.p_real <= p.p_max));
    Ok(if failed.is_empty() { Outcome::Done } else { Outcome::Failed(failed) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_config_is_a_config_error() {
        assert_eq!(run(["pvt", "ee-sweep"]), EXIT_CONFIG);
        assert_eq!(run(["pvt", "ee-sweep", "--config", "/nonexistent/x.toml"]), EXIT_CONFIG);
        assert_eq!(run(["pvt", "no-such-command"]), EXIT_CONFIG);
    }

    #[test]
    fn error_classes_map_to_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::NonConvergence { what: "x".into(), estimate: 1.0 }), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::DegenerateConfig("x".into())), EXIT_NUMERIC);
    }

    #[test]
    fn packaged_default_parses() {
        let c = NetworkConfig::parse(DEFAULT_EE_CONFIG, Command::EeSweep).unwrap();
        assert_eq!(c.power().unwrap().p_max, 40.0);
    }
}

//! Flat TOML run configuration. Key names carry their units; unknown keys
//! are rejected. dB inputs are converted to linear once, here.

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::guard_band;
use crate::montecarlo::McSettings;
use crate::power::PowerParams;
use crate::traffic::TrafficModel;
use crate::Exec;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnits {
    Kbps,
    BitsPerSPerHz,
}

impl RateUnits {
    pub fn label(self) -> &'static str {
        match self {
            RateUnits::Kbps => "kbps",
            RateUnits::BitsPerSPerHz => "bits_per_s_per_hz",
        }
    }

    /// Unit of EE: rate per Joule.
    pub fn ee_label(self) -> &'static str {
        match self {
            RateUnits::Kbps => "kbit",
            RateUnits::BitsPerSPerHz => "bits_per_hz",
        }
    }
}

/// Raw file contents. Every key is optional here; commands check what they need.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub lambda_b_per_m2: Option<f64>,
    pub ratio: Option<f64>,
    /// `"a:b:step"`.
    pub ratios: Option<String>,
    pub inf_bs_ratio: Option<f64>,
    pub lambda_inf_per_m2: Option<f64>,
    pub beta: Option<f64>,
    pub sigma_db: Option<f64>,
    pub k_db: Option<f64>,
    pub delta_db: Option<f64>,
    pub theta: Option<f64>,
    pub rho_min: Option<f64>,
    pub rate_units: Option<RateUnits>,
    pub e_s_w2b: Option<f64>,
    pub p_max_w: Option<f64>,
    pub eta_rf: Option<f64>,
    pub p_circuit_w: Option<f64>,
    pub area_shape_a: Option<f64>,
    pub area_rate_b: Option<f64>,
    pub window_radius_m: Option<f64>,
    pub guard_m: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub inversion_tol: Option<f64>,
    /// Upper end of distribution grids, in rate units or W.
    pub grid_max: Option<f64>,
    pub grid_points: Option<usize>,
    /// Empirical-CF agreement threshold for `validate`.
    pub cf_tol: Option<f64>,
    /// KS threshold for `validate`.
    pub ks_tol: Option<f64>,
}

/// Value with where it came from, for the run report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sourced<T> {
    pub value: T,
    pub from_file: bool,
}

/// Commands and the keys they need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TrafficDist,
    PowerDist,
    EeSweep,
    McSweep,
    Validate,
    Selftest,
}

impl Command {
    pub fn required_keys(self) -> &'static [&'static str] {
        const TRAFFIC: &[&str] = &["lambda_b_per_m2", "ratio", "theta", "rho_min", "rate_units"];
        const POWER: &[&str] = &[
            "lambda_b_per_m2",
            "ratio",
            "theta",
            "rho_min",
            "rate_units",
            "beta",
            "sigma_db",
            "k_db",
            "delta_db",
            "e_s_w2b",
            "p_max_w",
        ];
        const EE: &[&str] = &[
            "lambda_b_per_m2",
            "theta",
            "rho_min",
            "rate_units",
            "beta",
            "sigma_db",
            "k_db",
            "delta_db",
            "e_s_w2b",
            "p_max_w",
            "eta_rf",
            "p_circuit_w",
        ];
        match self {
            Command::TrafficDist => TRAFFIC,
            Command::PowerDist => POWER,
            Command::EeSweep | Command::McSweep => EE,
            Command::Validate => POWER,
            Command::Selftest => &[],
        }
    }

    pub fn needs_interference(self) -> bool {
        !matches!(self, Command::TrafficDist | Command::Selftest)
    }
}

/// Resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub raw: RawConfig,
    pub lambda_b: f64,
    pub ratio: f64,
    pub ratios: Option<Vec<f64>>,
    pub rate_units: RateUnits,
    pub traffic: TrafficModel,
    pub power: Option<PowerParams>,
    pub area_a: Sourced<f64>,
    pub area_b: Sourced<f64>,
    pub window_radius: Sourced<f64>,
    pub guard: Sourced<f64>,
    pub seed: Sourced<u64>,
    pub trials: Sourced<usize>,
    pub inversion_tol: Sourced<f64>,
    pub grid_max: Option<f64>,
    pub grid_points: Sourced<usize>,
    pub cf_tol: Sourced<f64>,
    pub ks_tol: Sourced<f64>,
    pub digest: String,
}

fn sourced<T: Copy>(v: Option<T>, default: T) -> Sourced<T> {
    Sourced { value: v.unwrap_or(default), from_file: v.is_some() }
}

/// Parse `"a:b:step"` into an ascending list.
pub fn parse_ratios(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("ratios must look like a:b:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || !(b >= a) || !(a >= 0.0) {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + step * i as f64).collect())
}

impl NetworkConfig {
    pub fn from_file(path: &Path, cmd: Command) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, cmd)
    }

    pub fn parse(text: &str, cmd: Command) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::resolve(raw, cmd)
    }

    fn present(raw: &RawConfig, key: &str) -> bool {
        match key {
            "lambda_b_per_m2" => raw.lambda_b_per_m2.is_some(),
            "ratio" => raw.ratio.is_some(),
            "theta" => raw.theta.is_some(),
            "rho_min" => raw.rho_min.is_some(),
            "rate_units" => raw.rate_units.is_some(),
            "beta" => raw.beta.is_some(),
            "sigma_db" => raw.sigma_db.is_some(),
            "k_db" => raw.k_db.is_some(),
            "delta_db" => raw.delta_db.is_some(),
            "e_s_w2b" => raw.e_s_w2b.is_some(),
            "p_max_w" => raw.p_max_w.is_some(),
            "eta_rf" => raw.eta_rf.is_some(),
            "p_circuit_w" => raw.p_circuit_w.is_some(),
            _ => true,
        }
    }

    pub fn resolve(raw: RawConfig, cmd: Command) -> Result<Self> {
        for key in cmd.required_keys() {
            if !Self::present(&raw, key) {
                return Err(Error::Config(format!("missing required key `{key}`")));
            }
        }
        let cfg_err = |e: Error| match e {
            Error::InvalidInput(m) => Error::Config(m),
            other => other,
        };
        let lambda_b = raw.lambda_b_per_m2.unwrap_or(1.0 / (std::f64::consts::PI * 800.0 * 800.0));
        let ratios = raw.ratios.as_deref().map(parse_ratios).transpose()?;
        let ratio = raw.ratio.or_else(|| ratios.as_ref().and_then(|r| r.first().copied())).unwrap_or(1.0);
        let rate_units = raw.rate_units.unwrap_or(RateUnits::BitsPerSPerHz);
        let area_a = sourced(raw.area_shape_a, 3.61);
        let area_b = sourced(raw.area_rate_b, 3.57);
        let traffic = TrafficModel::new(
            raw.theta.unwrap_or(1.8),
            raw.rho_min.unwrap_or(2.0),
            ratio * lambda_b,
            lambda_b,
            area_a.value,
            area_b.value,
        )
        .map_err(cfg_err)?;

        let power = if cmd.needs_interference() {
            if rate_units != RateUnits::BitsPerSPerHz {
                return Err(Error::Config(
                    "power and energy commands need rate_units = \"bits_per_s_per_hz\" (normalised bandwidth)".into(),
                ));
            }
            let lambda_inf = match (raw.inf_bs_ratio, raw.lambda_inf_per_m2) {
                (Some(r), None) => r * lambda_b,
                (None, Some(l)) => l,
                (Some(_), Some(_)) => {
                    return Err(Error::Config("give only one of `inf_bs_ratio` and `lambda_inf_per_m2`".into()))
                }
                (None, None) => {
                    return Err(Error::Config("missing required key `inf_bs_ratio` (or `lambda_inf_per_m2`)".into()))
                }
            };
            let channel = ChannelParams::from_db(
                raw.beta.unwrap_or(3.8),
                raw.sigma_db.unwrap_or(6.0),
                raw.k_db.unwrap_or(-31.54),
                raw.delta_db.unwrap_or(8.6),
                1.0,
            )
            .map_err(cfg_err)?;
            let p = PowerParams {
                channel,
                traffic,
                lambda_inf,
                e_s: raw.e_s_w2b.unwrap_or(1e-10),
                p_max: raw.p_max_w.unwrap_or(40.0),
                eta_rf: raw.eta_rf.unwrap_or(0.047),
                p_circuit: raw.p_circuit_w.unwrap_or(354.4),
            };
            p.check().map_err(cfg_err)?;
            Some(p)
        } else {
            None
        };

        let window_radius = sourced(raw.window_radius_m, 10_000.0);
        let guard = sourced(raw.guard_m, guard_band(lambda_b));
        if !(window_radius.value > guard.value) {
            return Err(Error::Config("window_radius_m must exceed guard_m".into()));
        }
        let trials = sourced(raw.trials, 50);
        if trials.value == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        let inversion_tol = sourced(raw.inversion_tol, 1e-4);
        let grid_points = sourced(raw.grid_points, 801);
        if grid_points.value < 2 {
            return Err(Error::Config("grid_points must be >= 2".into()));
        }
        if let Some(g) = raw.grid_max {
            if !(g > 0.0) {
                return Err(Error::Config("grid_max must be positive".into()));
            }
        }
        let mut cfg = Self {
            lambda_b,
            ratio,
            ratios,
            rate_units,
            traffic,
            power,
            area_a,
            area_b,
            window_radius,
            guard,
            seed: sourced(raw.seed, 1),
            trials,
            inversion_tol,
            grid_max: raw.grid_max,
            grid_points,
            cf_tol: sourced(raw.cf_tol, 0.03),
            ks_tol: sourced(raw.ks_tol, 0.05),
            digest: String::new(),
            raw,
        };
        cfg.digest = cfg.compute_digest();
        Ok(cfg)
    }

    /// Overrides from the command line; the digest is recomputed.
    pub fn apply_overrides(&mut self, seed: Option<u64>, trials: Option<usize>, ratios: Option<Vec<f64>>) -> Result<()> {
        if let Some(s) = seed {
            self.seed = Sourced { value: s, from_file: false };
        }
        if let Some(t) = trials {
            if t == 0 {
                return Err(Error::Config("--trials must be >= 1".into()));
            }
            self.trials = Sourced { value: t, from_file: false };
        }
        if let Some(r) = ratios {
            self.ratios = Some(r);
        }
        self.digest = self.compute_digest();
        Ok(())
    }

    /// Resolved parameters as `key = value  # source` lines.
    pub fn report(&self) -> Vec<String> {
        let src = |f: bool| if f { "config file" } else { "default" };
        let mut v = vec![
            format!("lambda_b_per_m2 = {:e}  # {}", self.lambda_b, src(self.raw.lambda_b_per_m2.is_some())),
            format!("ratio = {}  # {}", self.ratio, src(self.raw.ratio.is_some())),
            format!("theta = {}  # {}", self.traffic.theta, src(self.raw.theta.is_some())),
            format!("rho_min = {} {}  # {}", self.traffic.rho_min, self.rate_units.label(), src(self.raw.rho_min.is_some())),
            format!("area_shape_a = {}  # {}", self.area_a.value, src(self.area_a.from_file)),
            format!("area_rate_b = {}  # {}", self.area_b.value, src(self.area_b.from_file)),
        ];
        if let Some(p) = &self.power {
            v.push(format!("lambda_inf_per_m2 = {:e}  # config file", p.lambda_inf));
            v.push(format!("beta = {}  # {}", p.channel.beta, src(self.raw.beta.is_some())));
            v.push(format!("sigma_db = {}  # {}", p.channel.sigma, src(self.raw.sigma_db.is_some())));
            v.push(format!("k_linear = {:e}  # {}", p.channel.k, src(self.raw.k_db.is_some())));
            v.push(format!("delta_linear = {}  # {}", p.channel.delta, src(self.raw.delta_db.is_some())));
            v.push(format!("e_s_w2b = {:e}  # {}", p.e_s, src(self.raw.e_s_w2b.is_some())));
            v.push(format!("p_max_w = {}  # {}", p.p_max, src(self.raw.p_max_w.is_some())));
            v.push(format!("eta_rf = {}  # {}", p.eta_rf, src(self.raw.eta_rf.is_some())));
            v.push(format!("p_circuit_w = {}  # {}", p.p_circuit, src(self.raw.p_circuit_w.is_some())));
        }
        v.push(format!("window_radius_m = {}  # {}", self.window_radius.value, src(self.window_radius.from_file)));
        v.push(format!("guard_m = {}  # {}", self.guard.value, src(self.guard.from_file)));
        v.push(format!("seed = {}  # {}", self.seed.value, src(self.seed.from_file)));
        v.push(format!("trials = {}  # {}", self.trials.value, src(self.trials.from_file)));
        v.push(format!("inversion_tol = {:e}  # {}", self.inversion_tol.value, src(self.inversion_tol.from_file)));
        v
    }

    fn compute_digest(&self) -> String {
        let mut h = Sha256::new();
        for line in self.report() {
            let kv = line.split("  #").next().unwrap_or("");
            h.update(kv.as_bytes());
            h.update(b"\n");
        }
        if let Some(r) = &self.ratios {
            h.update(format!("ratios={r:?}\n").as_bytes());
        }
        h.update(format!("grid_max={:?} grid_points={}\n", self.grid_max, self.grid_points.value).as_bytes());
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Comment line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!("config_digest={} seed={}", self.digest, self.seed.value)
    }

    pub fn mc_settings(&self, exec: Exec) -> McSettings {
        McSettings {
            window_radius: self.window_radius.value,
            guard: self.guard.value,
            trials: self.trials.value,
            seed: self.seed.value,
            exec,
        }
    }

    /// Sweep ratios, falling back to the single `ratio`.
    pub fn sweep_ratios(&self) -> Vec<f64> {
        self.ratios.clone().unwrap_or_else(|| vec![self.ratio])
    }

    pub fn power(&self) -> Result<&PowerParams> {
        self.power.as_ref().ok_or_else(|| Error::Config("power parameters not configured".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EE: &str = r#"
lambda_b_per_m2 = 4.973591971621729e-7
theta = 1.8
rho_min = 2.0
rate_units = "bits_per_s_per_hz"
inf_bs_ratio = 0.8
beta = 3.8
sigma_db = 6.0
k_db = -31.54
delta_db = 8.6
e_s_w2b = 1e-10
p_max_w = 40.0
eta_rf = 0.047
p_circuit_w = 354.4
ratios = "10:300:10"
"#;

    #[test]
    fn parses_full_config() {
        let c = NetworkConfig::parse(EE, Command::EeSweep).unwrap();
        let p = c.power().unwrap();
        assert!((p.lambda_inf / c.lambda_b - 0.8).abs() < 1e-12);
        assert!((p.channel.delta - 10f64.powf(0.86)).abs() < 1e-12);
        assert_eq!(c.sweep_ratios().len(), 30);
        assert_eq!(c.digest.len(), 16);
        assert!(c.report().iter().any(|l| l.starts_with("area_shape_a = 3.61  # default")));
    }

    #[test]
    fn missing_key_is_named() {
        let text = EE.replace("eta_rf = 0.047\n", "");
        match NetworkConfig::parse(&text, Command::EeSweep) {
            Err(Error::Config(m)) => assert!(m.contains("eta_rf"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{EE}\nbogus_key = 1\n");
        assert!(matches!(NetworkConfig::parse(&text, Command::EeSweep), Err(Error::Config(_))));
    }

    #[test]
    fn kbps_mode_refused_for_energy() {
        let text = EE.replace("bits_per_s_per_hz", "kbps");
        assert!(matches!(NetworkConfig::parse(&text, Command::EeSweep), Err(Error::Config(_))));
    }

    #[test]
    fn digest_tracks_values() {
        let a = NetworkConfig::parse(EE, Command::EeSweep).unwrap();
        let b = NetworkConfig::parse(&EE.replace("p_max_w = 40.0", "p_max_w = 20.0"), Command::EeSweep).unwrap();
        assert_ne!(a.digest, b.digest);
        let c = NetworkConfig::parse(&format!("# comment\n{EE}"), Command::EeSweep).unwrap();
        assert_eq!(a.digest, c.digest);
    }

    #[test]
    fn ratio_spec() {
        assert_eq!(parse_ratios("10:30:10").unwrap(), vec![10.0, 20.0, 30.0]);
        assert!(parse_ratios("10:5:1").is_err());
        assert!(parse_ratios("1:2").is_err());
    }
}

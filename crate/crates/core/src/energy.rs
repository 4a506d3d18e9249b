//! Outage probability and the energy-efficiency utility, single point and
//! swept over the MS/BS intensity ratio.

use crate::error::{Error, Result};
use crate::numerics::inversion::InversionOptions;
use crate::numerics::table::{linspace, DistributionTable};
use crate::power::{power_inversion_options, truncated_moments, PowerParams, PowerSweep};
use std::io::Write;

/// Points of the `[0, P_max]` grid the power law is inverted on.
pub const EE_GRID_POINTS: usize = 801;

/// `1 - F_req(P_max)`.
pub fn outage_probability(table: &DistributionTable, p_max: f64) -> f64 {
    (1.0 - table.cdf_at(p_max)).clamp(0.0, 1.0)
}

/// Direct form: `T F^2 / (int x f / eta_rf + P_circuit F)`, with `T` the mean
/// cell load, `F = F_req(P_max)` and `int x f` over `(0, P_max]`.
pub fn ee_direct(mean_traffic: f64, f_max: f64, int_xf: f64, p: &PowerParams) -> f64 {
    let den = int_xf / p.eta_rf + p.p_circuit * f_max;
    if den <= 0.0 {
        return 0.0;
    }
    mean_traffic * f_max * f_max / den
}

/// Composed form: served load over mean BS consumption.
pub fn ee_composed(mean_traffic: f64, p_out: f64, mean_bs_power: f64) -> f64 {
    mean_traffic * (1.0 - p_out) / mean_bs_power
}

/// One ratio of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub ratio: f64,
    /// Direct form.
    pub ee: f64,
    /// Composed form; equal to `ee` up to rounding.
    pub ee_composed: f64,
    pub p_out: f64,
    /// Mean BS consumption, W.
    pub mean_bs_power_w: f64,
    /// Mean realised transmit power, W.
    pub mean_tx_power_w: f64,
    /// Mean offered cell load, rate units.
    pub mean_traffic: f64,
    /// Bound on the inversion error of `F(P_max)` and of the mean of `F`
    /// over `[0, P_max]`, the two functionals EE depends on.
    pub truncation: f64,
    pub error: Option<String>,
}

impl EnergyRow {
    fn failed(ratio: f64, e: &Error) -> Self {
        Self {
            ratio,
            ee: f64::NAN,
            ee_composed: f64::NAN,
            p_out: f64::NAN,
            mean_bs_power_w: f64::NAN,
            mean_tx_power_w: f64::NAN,
            mean_traffic: f64::NAN,
            truncation: f64::NAN,
            error: Some(e.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySweepResult {
    pub rows: Vec<EnergyRow>,
    /// Config digest of the run.
    pub digest: String,
}

impl EnergySweepResult {
    /// Row of largest EE among the successful ones.
    pub fn argmax(&self) -> Option<&EnergyRow> {
        self.rows
            .iter()
            .filter(|r| r.is_ok())
            .max_by(|a, b| a.ee.total_cmp(&b.ee))
    }

    /// True when the maximum is at neither end of the swept range.
    pub fn interior_maximum(&self) -> bool {
        let ok: Vec<&EnergyRow> = self.rows.iter().filter(|r| r.is_ok()).collect();
        match self.argmax() {
            Some(m) if ok.len() >= 3 => m.ratio != ok[0].ratio && m.ratio != ok[ok.len() - 1].ratio,
            _ => false,
        }
    }

    /// CSV with a digest comment; `rate_unit` names the traffic unit.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: &str, rate_unit: &str) -> Result<()> {
        writeln!(out, "# {comment}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "ratio".to_string(),
            format!("ee_analytic_{rate_unit}_per_joule"),
            "p_out".to_string(),
            "mean_power_w".to_string(),
            format!("mean_traffic_{rate_unit}"),
            "error".to_string(),
        ])?;
        for r in &self.rows {
            w.write_record([
                format!("{}", r.ratio),
                format!("{:.6e}", r.ee),
                format!("{:.6e}", r.p_out),
                format!("{:.6e}", r.mean_bs_power_w),
                format!("{:.6e}", r.mean_traffic),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default inversion settings for EE work.
pub fn ee_options(p: &PowerParams) -> InversionOptions {
    power_inversion_options(p.traffic.theta, 1e-4)
}

fn row_from_table(p: &PowerParams, ratio: f64, table: &DistributionTable, truncation: f64) -> Result<EnergyRow> {
    let pr = p.with_ratio(ratio);
    let mean_traffic = pr.traffic.mean_aggregate()?;
    let (f_max, int_xf) = truncated_moments(table, p.p_max);
    if f_max <= 0.0 {
        return Err(Error::DegenerateConfig("no probability mass below P_max".into()));
    }
    let p_out = outage_probability(table, p.p_max);
    let mean_tx = int_xf / f_max;
    let mean_bs = mean_tx / p.eta_rf + p.p_circuit;
    Ok(EnergyRow {
        ratio,
        ee: ee_direct(mean_traffic, f_max, int_xf, p),
        ee_composed: ee_composed(mean_traffic, p_out, mean_bs),
        p_out,
        mean_bs_power_w: mean_bs,
        mean_tx_power_w: mean_tx,
        mean_traffic,
        truncation,
        error: None,
    })
}

/// Row for a configuration whose required power is identically zero.
fn zero_power_row(p: &PowerParams, ratio: f64) -> Result<EnergyRow> {
    let mean_traffic = p.with_ratio(ratio).traffic.mean_aggregate()?;
    Ok(EnergyRow {
        ratio,
        ee: mean_traffic / p.p_circuit,
        ee_composed: mean_traffic / p.p_circuit,
        p_out: 0.0,
        mean_bs_power_w: p.p_circuit,
        mean_tx_power_w: 0.0,
        mean_traffic,
        truncation: 0.0,
        error: None,
    })
}

/// EE over `ratios` (ascending). Kernel nodes are shared by every ratio;
/// a failing row is recorded and the sweep carries on.
pub fn ee_sweep(p: &PowerParams, ratios: &[f64], opts: &InversionOptions) -> Result<EnergySweepResult> {
    p.check()?;
    if ratios.iter().any(|r| !(*r >= 0.0)) || ratios.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ratios must be nonnegative and strictly ascending"));
    }
    let grid = linspace(0.0, p.p_max, EE_GRID_POINTS);
    let opts = InversionOptions { x_scale: Some(p.p_max), ..*opts };
    let sweep = match PowerSweep::new(p, p.p_max, &opts) {
        Ok(s) => Some(s),
        Err(Error::DegenerateConfig(_)) => None,
        Err(e) => return Err(e),
    };
    let rows = opts.exec.map(ratios, |&ratio| {
        let row = match &sweep {
            _ if ratio == 0.0 => zero_power_row(p, ratio),
            None => zero_power_row(p, ratio),
            Some(s) => s.table(ratio, &grid).and_then(|(t, bound)| {
                let trunc = bound.at(p.p_max).max(bound.mean_over(p.p_max));
                if trunc > opts.tol {
                    return Err(Error::NonConvergence { what: "power-law inversion".into(), estimate: trunc });
                }
                row_from_table(p, ratio, &t, trunc)
            }),
        };
        row.unwrap_or_else(|e| EnergyRow::failed(ratio, &e))
    });
    Ok(EnergySweepResult { rows, digest: String::new() })
}

/// EE at the ratio carried by `p`.
pub fn energy_efficiency(p: &PowerParams, opts: &InversionOptions) -> Result<f64> {
    let r = ee_sweep(p, &[p.ratio()], opts)?;
    let row = &r.rows[0];
    match &row.error {
        None => Ok(row.ee),
        Some(_) => {
            // rerun the single point to surface the typed error
            let grid = linspace(0.0, p.p_max, EE_GRID_POINTS);
            let opts = InversionOptions { x_scale: Some(p.p_max), ..*opts };
            let (t, bound) = PowerSweep::new(p, p.p_max, &opts)?.table(p.ratio(), &grid)?;
            let trunc = bound.at(p.p_max).max(bound.mean_over(p.p_max));
            if trunc > opts.tol {
                return Err(Error::NonConvergence { what: "power-law inversion".into(), estimate: trunc });
            }
            Ok(row_from_table(p, p.ratio(), &t, trunc)?.ee)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::table::PdfMethod;
    use crate::power::tests::default_params;

    #[test]
    fn outage_limits() {
        let g = linspace(0.0, 100.0, 1001);
        let cdf: Vec<f64> = g.iter().map(|x| 1.0 - (-x / 5.0).exp()).collect();
        let t = DistributionTable::new(g, vec![0.0; 1001], cdf, PdfMethod::Derived).unwrap();
        assert!(outage_probability(&t, 100.0) < 1e-8);
        assert!(outage_probability(&t, 1e-9) > 0.999);
        assert!((outage_probability(&t, 5.0) - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn forms_agree() {
        let p = default_params();
        let r = ee_sweep(&p, &[10.0, 60.0, 130.0], &ee_options(&p)).unwrap();
        for row in &r.rows {
            assert!(row.is_ok(), "{:?}", row.error);
            assert!((row.ee / row.ee_composed - 1.0).abs() < 1e-6);
            assert!((0.0..=1.0).contains(&row.p_out));
            assert!(row.mean_bs_power_w >= p.p_circuit);
        }
    }

    #[test]
    fn zero_traffic_and_circuit_domination() {
        let p = default_params();
        let r = ee_sweep(&p, &[0.0], &ee_options(&p)).unwrap();
        assert_eq!(r.rows[0].ee, 0.0);
        let q = PowerParams { p_circuit: 1e12, ..p.with_ratio(20.0) };
        assert!(energy_efficiency(&q, &ee_options(&q)).unwrap() < 1e-9);
    }

    #[test]
    fn rejects_unsorted_ratios() {
        let p = default_params();
        assert!(ee_sweep(&p, &[20.0, 10.0], &ee_options(&p)).is_err());
    }
}

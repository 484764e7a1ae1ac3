use std::thread;

use serde::Serialize;

use super::run::{cubic_regressions, prepare};
use super::scenario::Scenario;
use crate::error::{Error, Result};

/// Acceptance band for successive defect ratios when the amplitude halves.
pub const RATIO_BAND: (f64, f64) = (4.0, 16.0);

/// RMS of the cubic-regression defect `ζ − ΨᵀΘ_true` per disturbance scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scales: Vec<f64>,
    /// `rms[j][i]`: scale `j`, channel `i`.
    pub rms: Vec<Vec<f64>>,
    /// `ratios[j][i] = rms[j][i] / rms[j + 1][i]`.
    pub ratios: Vec<Vec<f64>>,
    /// `ln(ratio) / ln(scale_j / scale_{j+1})`; 3 for a cubic defect.
    pub orders: Vec<Vec<f64>>,
}

impl SweepReport {
    pub fn ratios_within(&self, (lo, hi): (f64, f64)) -> bool {
        self.ratios.iter().flatten().all(|r| (lo..=hi).contains(r))
    }

    /// Plain-text table, one row per scale.
    pub fn table(&self) -> String {
        let channels = self.rms.first().map_or(0, Vec::len);
        let mut out = String::from("scale");
        for i in 1..=channels {
            out.push_str(&format!("\trms{i}\tratio{i}\torder{i}"));
        }
        out.push('\n');
        for (j, scale) in self.scales.iter().enumerate() {
            out.push_str(&format!("{scale}"));
            for i in 0..channels {
                out.push_str(&format!("\t{:.6e}", self.rms[j][i]));
                match j.checked_sub(1) {
                    Some(p) => out.push_str(&format!(
                        "\t{:.4}\t{:.4}",
                        self.ratios[p][i], self.orders[p][i]
                    )),
                    None => out.push_str("\t-\t-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn defect_rms(s: &Scenario) -> Result<Vec<f64>> {
    let p = prepare(s)?;
    let theta = s.theta_true();
    Ok(cubic_regressions(s, &p)?
        .iter()
        .zip(theta)
        .map(|(cr, th)| cr.residual(th).rms())
        .collect())
}

/// Runs the cubic-regression front end at each disturbance scale.
pub fn defect_sweep(s: &Scenario, scales: &[f64]) -> Result<SweepReport> {
    if scales.len() < 2 {
        return Err(Error::validation(
            "delta-scale",
            "at least two scales are required",
        ));
    }
    for (j, &a) in scales.iter().enumerate() {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::validation(
                format!("delta-scale[{j}]"),
                format!("must be finite and > 0, found {a}"),
            ));
        }
    }
    let rms = thread::scope(|scope| {
        let handles: Vec<_> = scales
            .iter()
            .map(|&a| scope.spawn(move || defect_rms(&s.with_disturbance_scale(a))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut ratios = Vec::new();
    let mut orders = Vec::new();
    for j in 0..scales.len() - 1 {
        let r: Vec<f64> = rms[j].iter().zip(&rms[j + 1]).map(|(a, b)| a / b).collect();
        let step = (scales[j] / scales[j + 1]).ln();
        orders.push(r.iter().map(|x| x.ln() / step).collect());
        ratios.push(r);
    }
    Ok(SweepReport {
        scales: scales.to_vec(),
        rms,
        ratios,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_scales() {
        let s = Scenario::paper();
        assert!(defect_sweep(&s, &[1.0]).is_err());
        assert!(defect_sweep(&s, &[1.0, 0.0]).is_err());
        assert!(defect_sweep(&s, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn table_layout() {
        let report = SweepReport {
            scales: vec![1.0, 0.5],
            rms: vec![vec![8.0, 16.0], vec![1.0, 2.0]],
            ratios: vec![vec![8.0, 8.0]],
            orders: vec![vec![3.0, 3.0]],
        };
        let table = report.table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("scale\trms1\tratio1\torder1\trms2"));
        assert!(lines[2].contains("8.0000\t3.0000"));
        assert!(report.ratios_within(RATIO_BAND));
    }
}

use std::fmt::Write as _;

use super::{mann_whitney_u, Alternative, UTestResult};
use crate::error::{Error, Result};
use crate::features::{FeatureDataset, FeatureVector, WindowSpec, FEATURE_NAMES, N_FEATURES};
use crate::fmt::sig9;

/// Keeps, per player, only windows whose start is a multiple of the window
/// width, so retained windows are disjoint and adjacent.
pub fn non_overlapping_subsample(rows: &[FeatureVector], spec: &WindowSpec) -> Vec<FeatureVector> {
    let width_ms = spec.width_ms();
    rows.iter()
        .filter(|r| {
            let start_ms = (r.window_start_s * 1000.0).round() as u64;
            width_ms > 0 && start_ms.is_multiple_of(width_ms)
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceRow {
    pub feature: &'static str,
    /// First sample PRO, second NONPRO.
    pub result: UTestResult,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceTable {
    pub alpha: f64,
    pub rows: Vec<SignificanceRow>,
}

/// Tests every feature between PRO and NONPRO windows after
/// non-overlapping subsampling; `significant` iff `p < alpha`.
pub fn significance_table(
    dataset: &FeatureDataset,
    spec: &WindowSpec,
    alpha: f64,
    alternative: Alternative,
) -> Result<SignificanceTable> {
    let rows = non_overlapping_subsample(&dataset.rows, spec);
    let (pro, nonpro): (Vec<&FeatureVector>, Vec<&FeatureVector>) =
        rows.iter().partition(|r| r.label.is_pro());
    if pro.is_empty() {
        return Err(Error::MissingClass("PRO"));
    }
    if nonpro.is_empty() {
        return Err(Error::MissingClass("NONPRO"));
    }
    let mut out = Vec::with_capacity(N_FEATURES);
    for (j, feature) in FEATURE_NAMES.iter().enumerate() {
        let a: Vec<f64> = pro.iter().map(|r| r.values()[j]).collect();
        let b: Vec<f64> = nonpro.iter().map(|r| r.values()[j]).collect();
        let result = mann_whitney_u(&a, &b, alternative)?;
        out.push(SignificanceRow {
            feature,
            result,
            significant: result.p_value < alpha,
        });
    }
    Ok(SignificanceTable { alpha, rows: out })
}

fn display_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

impl SignificanceTable {
    pub fn significant_count(&self) -> usize {
        self.rows.iter().filter(|r| r.significant).count()
    }

    pub fn row(&self, feature: &str) -> Option<&SignificanceRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    /// `feature,u,p_value,method,n_pro,n_nonpro,significant,p_raw`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,u,p_value,method,n_pro,n_nonpro,significant,p_raw\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.feature,
                sig9(r.result.u_statistic),
                display_p(r.result.p_value),
                r.result.method,
                r.result.n_a,
                r.result.n_b,
                u8::from(r.significant),
                sig9(r.result.p_value)
            );
        }
        out
    }

    /// Features as columns, one p-value row; significant cells starred.
    pub fn console_table(&self) -> String {
        let cells: Vec<(String, String)> = self
            .rows
            .iter()
            .map(|r| {
                let mark = if r.significant { "*" } else { "" };
                (r.feature.to_string(), format!("{}{mark}", display_p(r.result.p_value)))
            })
            .collect();
        let mut head = format!("{:<8}", "");
        let mut vals = format!("{:<8}", "p-value");
        for (name, p) in &cells {
            let w = name.len().max(p.len()) + 2;
            let _ = write!(head, "{name:>w$}");
            let _ = write!(vals, "{p:>w$}");
        }
        format!(
            "{head}\n{vals}\n(* significant at alpha = {}; {} of {} features)\n",
            self.alpha,
            self.significant_count(),
            self.rows.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::BinaryLabel;

    fn windows(id: &str, label: BinaryLabel, n: usize, step: f64, value: impl Fn(usize) -> [f64; N_FEATURES]) -> Vec<FeatureVector> {
        (0..n)
            .map(|i| FeatureVector::from_values(id, label, i as f64 * step, value(i)))
            .collect()
    }

    #[test]
    fn subsample_arithmetic_and_idempotence() {
        let rows = windows("p", BinaryLabel::Pro, 51, 30.0, |_| [0.0; N_FEATURES]);
        let spec = WindowSpec::default();
        let kept = non_overlapping_subsample(&rows, &spec);
        let starts: Vec<f64> = kept.iter().map(|r| r.window_start_s).collect();
        assert_eq!(starts, vec![0.0, 300.0, 600.0, 900.0, 1200.0, 1500.0]);
        assert_eq!(non_overlapping_subsample(&kept, &spec), kept);
    }

    #[test]
    fn missing_class() {
        let ds = FeatureDataset::new(windows("p", BinaryLabel::NonPro, 6, 300.0, |_| [0.0; N_FEATURES]));
        assert!(matches!(
            significance_table(&ds, &WindowSpec::default(), 0.01, Alternative::TwoSided),
            Err(Error::MissingClass("PRO"))
        ));
    }

    #[test]
    fn extreme_shift_is_flagged() {
        // deterministic pseudo-noise, PRO gaze shifted by ten standard deviations
        let noise = |i: usize, j: usize| (((i * 7919 + j * 104_729) % 1000) as f64 / 1000.0 - 0.5) * 0.02;
        let mut rows = Vec::new();
        for p in 0..4 {
            rows.extend(windows(&format!("pro{p}"), BinaryLabel::Pro, 6, 300.0, |i| {
                let mut v = [0.0; N_FEATURES];
                for (j, x) in v.iter_mut().enumerate() {
                    *x = 0.5 + noise(p * 6 + i, j);
                }
                v[8] += 10.0 * 0.00577;
                v
            }));
        }
        for p in 0..24 {
            rows.extend(windows(&format!("np{p:02}"), BinaryLabel::NonPro, 6, 300.0, |i| {
                let mut v = [0.0; N_FEATURES];
                for (j, x) in v.iter_mut().enumerate() {
                    *x = 0.5 + noise(100 + p * 6 + i, j);
                }
                v
            }));
        }
        let t = significance_table(&FeatureDataset::new(rows), &WindowSpec::default(), 0.01, Alternative::TwoSided).unwrap();
        assert!(t.row("gaze_std").unwrap().result.p_value < 1e-6);
        assert_eq!(t.row("gaze_std").unwrap().result.n_a, 24);
        assert_eq!(t.row("gaze_std").unwrap().result.n_b, 144);
        let csv = t.to_csv();
        assert!(csv.lines().any(|l| l.starts_with("gaze_std,") && l.contains(",<0.001,NORMAL_APPROX,24,144,1,")));
        assert!(t.console_table().contains("<0.001*"));
    }
}

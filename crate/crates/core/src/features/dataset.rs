use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{FEATURE_NAMES, N_FEATURES};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::telemetry::BinaryLabel;

/// One window of one player's session.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub player_id: String,
    pub label: BinaryLabel,
    pub window_start_s: f64,
    pub keys1_usage: f64,
    pub mouse1_usage: f64,
    pub mouse1_duration_s: f64,
    pub w_or_s_usage: f64,
    pub w_or_s_duration_s: f64,
    pub a_or_d_usage: f64,
    pub a_or_d_duration_s: f64,
    pub a_ctrl_mouse1_usage: f64,
    pub gaze_std: f64,
}

impl FeatureVector {
    /// Feature values in column order.
    pub fn values(&self) -> [f64; N_FEATURES] {
        [
            self.keys1_usage,
            self.mouse1_usage,
            self.mouse1_duration_s,
            self.w_or_s_usage,
            self.w_or_s_duration_s,
            self.a_or_d_usage,
            self.a_or_d_duration_s,
            self.a_ctrl_mouse1_usage,
            self.gaze_std,
        ]
    }

    pub fn from_values(
        player_id: impl Into<String>,
        label: BinaryLabel,
        window_start_s: f64,
        v: [f64; N_FEATURES],
    ) -> Self {
        FeatureVector {
            player_id: player_id.into(),
            label,
            window_start_s,
            keys1_usage: v[0],
            mouse1_usage: v[1],
            mouse1_duration_s: v[2],
            w_or_s_usage: v[3],
            w_or_s_duration_s: v[4],
            a_or_d_usage: v[5],
            a_or_d_duration_s: v[6],
            a_ctrl_mouse1_usage: v[7],
            gaze_std: v[8],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    pub rows: Vec<FeatureVector>,
    pub feature_names: Vec<String>,
}

impl FeatureDataset {
    pub fn new(rows: Vec<FeatureVector>) -> Self {
        FeatureDataset {
            rows,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values()[j]).collect()
    }

    /// `(pro, nonpro)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pro = self.rows.iter().filter(|r| r.label.is_pro()).count();
        (pro, self.rows.len() - pro)
    }

    pub fn header() -> String {
        format!("player_id,label,window_start_s,{}", FEATURE_NAMES.join(","))
    }

    /// CSV with values printed to nine significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = Self::header();
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.player_id, r.label, sig9(r.window_start_s));
            for v in r.values() {
                out.push(',');
                out.push_str(&sig9(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let header = Self::header();
        let header: Vec<&str> = header.split(',').collect();
        let mut rows = Vec::new();
        for r in crate::telemetry::parse_records(text, &header)? {
            let (line, rec) = r?;
            let bad = |what: &str| Error::MalformedLine {
                line,
                reason: format!("bad {what}"),
            };
            let label = rec[1].parse().map_err(|_| bad("label"))?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(header[i]))
            };
            let start = num(2)?;
            let mut v = [0.0; N_FEATURES];
            for (j, slot) in v.iter_mut().enumerate() {
                *slot = num(3 + j)?;
            }
            rows.push(FeatureVector::from_values(&rec[0], label, start, v));
        }
        Ok(FeatureDataset::new(rows))
    }

    /// Pearson correlation matrix of the nine feature columns.
    pub fn feature_correlations(&self) -> Result<[[f64; N_FEATURES]; N_FEATURES]> {
        if self.rows.len() < 2 {
            return Err(Error::TooFewRows);
        }
        let n = self.rows.len() as f64;
        let cols: Vec<Vec<f64>> = (0..N_FEATURES).map(|j| self.column(j)).collect();
        let mut centered = Vec::with_capacity(N_FEATURES);
        for (j, col) in cols.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let ss: f64 = c.iter().map(|v| v * v).sum();
            if ss == 0.0 || col.iter().all(|v| *v == col[0]) {
                return Err(Error::ConstantColumn(FEATURE_NAMES[j].to_string()));
            }
            centered.push((c, ss.sqrt()));
        }
        let mut m = [[0.0; N_FEATURES]; N_FEATURES];
        for i in 0..N_FEATURES {
            m[i][i] = 1.0;
            for j in 0..i {
                let (a, na) = &centered[i];
                let (b, nb) = &centered[j];
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let r = (dot / (na * nb)).clamp(-1.0, 1.0);
                m[i][j] = r;
                m[j][i] = r;
            }
        }
        Ok(m)
    }
}

/// Five-number summary plus mean of one feature within one group, the
/// tabular stand-in for a box plot.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSummary {
    pub group: String,
    pub feature: &'static str,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxSummary {
    pub fn csv_header() -> &'static str {
        "group,feature,n,min,q1,median,q3,max,mean"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.group,
            self.feature,
            self.n,
            sig9(self.min),
            sig9(self.q1),
            sig9(self.median),
            sig9(self.q3),
            sig9(self.max),
            sig9(self.mean)
        )
    }
}

/// Per-group, per-feature box summaries, groups in sorted order.
pub fn box_summaries<F>(rows: &[FeatureVector], group_of: F) -> Vec<BoxSummary>
where
    F: Fn(&FeatureVector) -> String,
{
    let mut groups: BTreeMap<String, Vec<&FeatureVector>> = BTreeMap::new();
    for r in rows {
        groups.entry(group_of(r)).or_default().push(r);
    }
    let mut out = Vec::new();
    for (group, members) in groups {
        for (j, &feature) in FEATURE_NAMES.iter().enumerate() {
            let mut v: Vec<f64> = members.iter().map(|r| r.values()[j]).collect();
            v.sort_by(f64::total_cmp);
            out.push(BoxSummary {
                group: group.clone(),
                feature,
                n: v.len(),
                min: v[0],
                q1: quantile(&v, 0.25),
                median: quantile(&v, 0.5),
                q3: quantile(&v, 0.75),
                max: v[v.len() - 1],
                mean: v.iter().sum::<f64>() / v.len() as f64,
            });
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, label: BinaryLabel, v: [f64; N_FEATURES]) -> FeatureVector {
        FeatureVector::from_values(id, label, 0.0, v)
    }

    fn ramp_dataset(n: usize) -> FeatureDataset {
        let rows = (0..n)
            .map(|i| {
                let x = i as f64;
                let label = if i % 3 == 0 { BinaryLabel::Pro } else { BinaryLabel::NonPro };
                row(
                    "p",
                    label,
                    [x, -x, x * x, (x * 0.7).sin(), 1.0 / (1.0 + x), x.sqrt(), (x * 1.3).cos(), x % 5.0, x % 7.0],
                )
            })
            .collect();
        FeatureDataset::new(rows)
    }

    #[test]
    fn correlation_diagonal_and_negation() {
        let m = ramp_dataset(20).feature_correlations().unwrap();
        for (i, r) in m.iter().enumerate() {
            assert_eq!(r[i], 1.0);
            for (j, v) in r.iter().enumerate() {
                assert_eq!(*v, m[j][i]);
                assert!((-1.0..=1.0).contains(v));
            }
        }
        assert!((m[0][1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_named() {
        let mut ds = ramp_dataset(10);
        for r in &mut ds.rows {
            r.gaze_std = 0.2;
        }
        match ds.feature_correlations() {
            Err(Error::ConstantColumn(name)) => assert_eq!(name, "gaze_std"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ramp_dataset(1).feature_correlations(), Err(Error::TooFewRows)));
    }

    #[test]
    fn csv_round_trip_is_stable() {
        let mut ds = ramp_dataset(12);
        ds.rows[3].window_start_s = 30.0;
        let text = ds.to_csv();
        assert!(text.starts_with("player_id,label,window_start_s,keys1_usage,mouse1_usage,mouse1_duration_s,w_or_s_usage,w_or_s_duration_s,a_or_d_usage,a_or_d_duration_s,a_ctrl_mouse1_usage,gaze_std\n"));
        let back = FeatureDataset::from_csv(&text).unwrap();
        assert_eq!(back.to_csv(), text);
        for (a, b) in ds.rows.iter().zip(&back.rows) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn csv_rejects_bad_label() {
        let text = format!("{}\np,MAYBE,0,1,1,1,1,1,1,1,1,1\n", FeatureDataset::header());
        assert!(matches!(
            FeatureDataset::from_csv(&text),
            Err(Error::MalformedLine { line: 2, .. })
        ));
    }

    #[test]
    fn box_summary_quartiles() {
        let rows: Vec<_> = (1..=5)
            .map(|i| row("p", BinaryLabel::Pro, [i as f64; N_FEATURES]))
            .collect();
        let s = box_summaries(&rows, |r| r.label.to_string());
        assert_eq!(s.len(), N_FEATURES);
        assert_eq!((s[0].min, s[0].q1, s[0].median, s[0].q3, s[0].max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s[0].mean, 3.0);
    }
}

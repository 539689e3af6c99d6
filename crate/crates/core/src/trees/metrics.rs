use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::sig9;

/// Confusion matrix with PRO as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn pro(&self) -> ClassMetrics {
        ClassMetrics::new(self.tp, self.fp, self.fn_)
    }

    pub fn nonpro(&self) -> ClassMetrics {
        ClassMetrics::new(self.tn, self.fn_, self.fp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassMetrics {
    /// From true positives, false positives and false negatives of the
    /// class; empty denominators give 0.
    fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub pro: ClassMetrics,
    pub nonpro: ClassMetrics,
    pub accuracy: f64,
    pub roc_auc: f64,
    pub threshold: f64,
    /// `(feature, normalized importance)`, sorted descending when present.
    pub importances: Vec<(String, f64)>,
}

/// Scores PRO probabilities against labels (`true` = PRO).
///
/// ROC AUC is the probability that a random PRO row outscores a random
/// NONPRO row, ties counting one half, computed from midranks.
pub fn evaluate(labels: &[bool], scores: &[f64], threshold: f64) -> Result<EvalReport> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut cm = ConfusionMatrix::default();
    for (&l, &s) in labels.iter().zip(scores) {
        match (l, s >= threshold) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(EvalReport {
        confusion: cm,
        pro: cm.pro(),
        nonpro: cm.nonpro(),
        accuracy: cm.accuracy(),
        roc_auc: rank_auc(labels, scores, n_pos, n_neg),
        threshold,
        importances: Vec::new(),
    })
}

fn rank_auc(labels: &[bool], scores: &[f64], n_pos: usize, n_neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += midrank * pos_in_group as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

impl EvalReport {
    pub fn with_importances(mut self, names: &[String], values: &[f64]) -> Self {
        let mut imp: Vec<(String, f64)> = names.iter().cloned().zip(values.iter().copied()).collect();
        imp.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.importances = imp;
        self
    }

    /// Three CSV blocks separated by blank lines: per-class metrics,
    /// confusion matrix, importances (descending).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,roc_auc,accuracy\n");
        let _ = writeln!(
            out,
            "non-pro,{},{},{},{},{}",
            sig9(self.nonpro.precision),
            sig9(self.nonpro.recall),
            sig9(self.nonpro.f1),
            sig9(self.roc_auc),
            sig9(self.accuracy)
        );
        let _ = writeln!(
            out,
            "pro,{},{},{},,",
            sig9(self.pro.precision),
            sig9(self.pro.recall),
            sig9(self.pro.f1)
        );
        out.push_str("\nclass,predicted_non_pro,predicted_pro,support\n");
        let cm = &self.confusion;
        let _ = writeln!(out, "non-pro,{},{},{}", cm.tn, cm.fp, cm.tn + cm.fp);
        let _ = writeln!(out, "pro,{},{},{}", cm.fn_, cm.tp, cm.fn_ + cm.tp);
        if !self.importances.is_empty() {
            out.push_str("\nfeature,importance\n");
            for (name, v) in &self.importances {
                let _ = writeln!(out, "{name},{}", sig9(*v));
            }
        }
        out
    }

    pub fn console_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}", "", "Precision", "Recall", "F1 score", "ROC AUC", "Accuracy");
        let _ = writeln!(
            out,
            "{:<10}{:>10.2}{:>10.2}{:>10.2}{:>10.2}{:>10.2}",
            "non-pro", self.nonpro.precision, self.nonpro.recall, self.nonpro.f1, self.roc_auc, self.accuracy
        );
        let _ = writeln!(out, "{:<10}{:>10.2}{:>10.2}{:>10.2}", "pro", self.pro.precision, self.pro.recall, self.pro.f1);
        out.push('\n');
        let cm = &self.confusion;
        let _ = writeln!(out, "{:<10}{:>18}{:>15}{:>9}", "", "Predicted non-pro", "Predicted pro", "Support");
        let _ = writeln!(out, "{:<10}{:>18}{:>15}{:>9}", "non-pro", cm.tn, cm.fp, cm.tn + cm.fp);
        let _ = writeln!(out, "{:<10}{:>18}{:>15}{:>9}", "pro", cm.fn_, cm.tp, cm.fn_ + cm.tp);
        if !self.importances.is_empty() {
            out.push('\n');
            for (name, v) in &self.importances {
                let _ = writeln!(out, "{name:<22}{v:>8.4}");
            }
        }
        out
    }
}

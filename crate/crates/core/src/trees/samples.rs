use crate::error::{Error, Result};
use crate::features::{FeatureDataset, FEATURE_NAMES};

/// Dense row-major design matrix with PRO labels and player groups.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub feature_names: Vec<String>,
    x: Vec<f64>,
    pub labels: Vec<bool>,
    pub groups: Vec<String>,
}

impl Samples {
    pub fn new(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<bool>,
        groups: Vec<String>,
    ) -> Result<Self> {
        let f = feature_names.len();
        if rows.len() != labels.len() || rows.len() != groups.len() {
            return Err(Error::LengthMismatch {
                labels: labels.len(),
                scores: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != f) {
            return Err(Error::MissingFeature {
                expected: f,
                got: r.len(),
            });
        }
        Ok(Samples {
            feature_names,
            x: rows.concat(),
            labels,
            groups,
        })
    }

    pub fn from_dataset(ds: &FeatureDataset) -> Self {
        Samples {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            x: ds.rows.iter().flat_map(|r| r.values()).collect(),
            labels: ds.rows.iter().map(|r| r.label.is_pro()).collect(),
            groups: ds.rows.iter().map(|r| r.player_id.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.n_features();
        &self.x[i * f..(i + 1) * f]
    }

    #[inline]
    pub(crate) fn value(&self, i: usize, feature: usize) -> f64 {
        self.x[i * self.n_features() + feature]
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        Samples {
            feature_names: self.feature_names.clone(),
            x: idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
        }
    }
}

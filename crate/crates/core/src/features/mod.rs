//! Rolling-window biometric features.
//!
//! Nine features per window, in a fixed column order used by every
//! downstream artifact:
//!
//! | column | definition |
//! |---|---|
//! | `keys1_usage` | fraction of ticks with exactly one of W, A, S, D, CTRL held |
//! | `mouse1_usage` / `mouse1_duration_s` | MOUSE1 held |
//! | `w_or_s_usage` / `w_or_s_duration_s` | W or S held |
//! | `a_or_d_usage` / `a_or_d_duration_s` | A or D held |
//! | `a_ctrl_mouse1_usage` | A, CTRL and MOUSE1 all held (others may be too) |
//! | `gaze_std` | mean Euclidean distance of gaze from screen center |
//!
//! Usage is the fraction of window ticks on which a predicate holds;
//! duration is the mean length in seconds of maximal runs of such ticks,
//! clipped to the window (0 when there are none).

mod dataset;
mod predicate;
mod window;

pub use dataset::{box_summaries, BoxSummary, FeatureDataset, FeatureVector};
pub use predicate::ControlPredicate;
pub use window::{extract_cohort, extract_features, gaze_std, mean_press_duration, usage_fraction, Window, WindowSpec};

pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "keys1_usage",
    "mouse1_usage",
    "mouse1_duration_s",
    "w_or_s_usage",
    "w_or_s_duration_s",
    "a_or_d_usage",
    "a_or_d_duration_s",
    "a_ctrl_mouse1_usage",
    "gaze_std",
];

/// Column index of a feature name.
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

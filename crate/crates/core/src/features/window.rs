use std::ops::Range;

use rayon::prelude::*;

use super::dataset::{FeatureDataset, FeatureVector};
use super::predicate::{Compiled, ControlPredicate};
use crate::error::{Error, Result};
use crate::telemetry::SessionTimeline;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowSpec {
    pub width_s: f64,
    pub step_s: f64,
    /// Minimum fraction of gaze-valid ticks for a window to be kept.
    pub min_gaze_coverage: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            width_s: 300.0,
            step_s: 30.0,
            min_gaze_coverage: 0.5,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_s > 0.0 && self.step_s <= self.width_s) {
            return Err(Error::InvalidParams(format!(
                "need 0 < step_s ({}) <= width_s ({})",
                self.step_s, self.width_s
            )));
        }
        if !(0.0..=1.0).contains(&self.min_gaze_coverage) {
            return Err(Error::InvalidParams(format!(
                "min_gaze_coverage {} outside [0,1]",
                self.min_gaze_coverage
            )));
        }
        Ok(())
    }

    pub(crate) fn width_ms(&self) -> u64 {
        secs_to_ms(self.width_s)
    }

    pub(crate) fn step_ms(&self) -> u64 {
        secs_to_ms(self.step_s)
    }
}

pub(crate) fn secs_to_ms(s: f64) -> u64 {
    (s * 1000.0).round() as u64
}

/// Half-open time interval `[start_s, start_s + width_s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub start_s: f64,
    pub width_s: f64,
}

impl Window {
    pub fn new(start_s: f64, width_s: f64) -> Self {
        Window { start_s, width_s }
    }

    /// Ticks whose start time falls inside the window.
    pub fn ticks(&self, tl: &SessionTimeline) -> Result<Range<usize>> {
        let out_of_bounds = || Error::WindowOutOfBounds {
            start_s: self.start_s,
            width_s: self.width_s,
            duration_s: tl.duration_s(),
        };
        if !(self.start_s >= 0.0 && self.width_s > 0.0) {
            return Err(out_of_bounds());
        }
        let start_ms = secs_to_ms(self.start_s);
        let end_ms = start_ms + secs_to_ms(self.width_s);
        let start = start_ms.div_ceil(tl.tick_ms) as usize;
        let end = end_ms.div_ceil(tl.tick_ms) as usize;
        if end > tl.ticks.len() || start >= end {
            return Err(out_of_bounds());
        }
        Ok(start..end)
    }
}

/// Fraction of window ticks on which `pred` holds.
pub fn usage_fraction(tl: &SessionTimeline, window: Window, pred: &ControlPredicate) -> Result<f64> {
    let range = window.ticks(tl)?;
    let pred = pred.compile(&tl.controls)?;
    let n = range.len();
    let on = tl.ticks[range].iter().filter(|t| pred.holds(t.held)).count();
    Ok(on as f64 / n as f64)
}

/// Mean length in seconds of maximal runs where `pred` holds, with runs
/// clipped at the window edges. Zero when there are no runs.
pub fn mean_press_duration(
    tl: &SessionTimeline,
    window: Window,
    pred: &ControlPredicate,
) -> Result<f64> {
    let range = window.ticks(tl)?;
    let pred = pred.compile(&tl.controls)?;
    let mut runs = 0usize;
    let mut on = 0usize;
    let mut prev = false;
    for tick in &tl.ticks[range] {
        let cur = pred.holds(tick.held);
        if cur {
            on += 1;
            if !prev {
                runs += 1;
            }
        }
        prev = cur;
    }
    Ok(mean_run_s(on, runs, tl.tick_ms))
}

fn mean_run_s(on_ticks: usize, runs: usize, tick_ms: u64) -> f64 {
    if runs == 0 {
        0.0
    } else {
        on_ticks as f64 * tick_ms as f64 / 1000.0 / runs as f64
    }
}

/// Mean distance of valid gaze from the screen center over the window.
pub fn gaze_std(tl: &SessionTimeline, window: Window, min_coverage: f64) -> Result<f64> {
    let range = window.ticks(tl)?;
    let n = range.len();
    let (valid, sum) = tl.ticks[range]
        .iter()
        .filter(|t| t.gaze_valid)
        .fold((0usize, 0.0), |(c, s), t| (c + 1, s + center_distance(t.gaze_x, t.gaze_y)));
    gaze_mean(valid, n, sum, min_coverage)
}

fn gaze_mean(valid: usize, n: usize, sum: f64, min_coverage: f64) -> Result<f64> {
    let coverage = valid as f64 / n as f64;
    if valid == 0 || coverage < min_coverage {
        return Err(Error::InsufficientGaze {
            coverage,
            required: min_coverage,
        });
    }
    Ok(sum / valid as f64)
}

#[inline]
fn center_distance(x: f64, y: f64) -> f64 {
    (x - 0.5).hypot(y - 0.5)
}

/// Per-tick prefix sums of one predicate: ticks on, and run starts.
struct PredicateTrack {
    on: Vec<u32>,
    starts: Vec<u32>,
    raw: Vec<bool>,
}

impl PredicateTrack {
    fn new(tl: &SessionTimeline, pred: Compiled) -> Self {
        let n = tl.ticks.len();
        let mut on = Vec::with_capacity(n + 1);
        let mut starts = Vec::with_capacity(n + 1);
        let mut raw = Vec::with_capacity(n);
        on.push(0);
        starts.push(0);
        let mut prev = false;
        for t in &tl.ticks {
            let cur = pred.holds(t.held);
            on.push(on.last().unwrap() + u32::from(cur));
            starts.push(starts.last().unwrap() + u32::from(cur && !prev));
            raw.push(cur);
            prev = cur;
        }
        PredicateTrack { on, starts, raw }
    }

    fn on_ticks(&self, r: &Range<usize>) -> usize {
        (self.on[r.end] - self.on[r.start]) as usize
    }

    fn runs(&self, r: &Range<usize>) -> usize {
        // a run already in progress at the window start counts once, clipped
        let interior = (self.starts[r.end] - self.starts[r.start + 1]) as usize;
        interior + usize::from(self.raw[r.start])
    }

    fn usage(&self, r: &Range<usize>) -> f64 {
        self.on_ticks(r) as f64 / r.len() as f64
    }

    fn duration(&self, r: &Range<usize>, tick_ms: u64) -> f64 {
        mean_run_s(self.on_ticks(r), self.runs(r), tick_ms)
    }
}

/// One feature row per window start `0, step, 2·step, …` with
/// `start + width <= duration`. Windows failing the gaze coverage
/// threshold are dropped.
pub fn extract_features(tl: &SessionTimeline, spec: &WindowSpec) -> Result<Vec<FeatureVector>> {
    spec.validate()?;
    let duration_ms = tl.ticks.len() as u64 * tl.tick_ms;
    let (width_ms, step_ms) = (spec.width_ms(), spec.step_ms());
    if duration_ms < width_ms {
        return Err(Error::SessionTooShort {
            duration_s: tl.duration_s(),
            width_s: spec.width_s,
        });
    }
    let track = |p: ControlPredicate| -> Result<PredicateTrack> {
        Ok(PredicateTrack::new(tl, p.compile(&tl.controls)?))
    };
    let keys1 = track(ControlPredicate::ExactlyOneKey)?;
    let mouse1 = track(ControlPredicate::single("MOUSE1"))?;
    let w_or_s = track(ControlPredicate::or(&["W", "S"]))?;
    let a_or_d = track(ControlPredicate::or(&["A", "D"]))?;
    let combo = track(ControlPredicate::and(&["A", "CTRL", "MOUSE1"]))?;

    let mut gaze_valid = Vec::with_capacity(tl.ticks.len() + 1);
    let mut gaze_sum = Vec::with_capacity(tl.ticks.len() + 1);
    gaze_valid.push(0u32);
    gaze_sum.push(0.0f64);
    for t in &tl.ticks {
        let (c, s) = (*gaze_valid.last().unwrap(), *gaze_sum.last().unwrap());
        if t.gaze_valid {
            gaze_valid.push(c + 1);
            gaze_sum.push(s + center_distance(t.gaze_x, t.gaze_y));
        } else {
            gaze_valid.push(c);
            gaze_sum.push(s);
        }
    }

    let mut rows = Vec::new();
    let mut start_ms = 0;
    while start_ms + width_ms <= duration_ms {
        let window = Window::new(start_ms as f64 / 1000.0, spec.width_s);
        let r = window.ticks(tl)?;
        let valid = (gaze_valid[r.end] - gaze_valid[r.start]) as usize;
        let sum = gaze_sum[r.end] - gaze_sum[r.start];
        if let Ok(gaze) = gaze_mean(valid, r.len(), sum, spec.min_gaze_coverage) {
            rows.push(FeatureVector {
                player_id: tl.meta.player_id.clone(),
                label: tl.meta.binary_label(),
                window_start_s: window.start_s,
                keys1_usage: keys1.usage(&r),
                mouse1_usage: mouse1.usage(&r),
                mouse1_duration_s: mouse1.duration(&r, tl.tick_ms),
                w_or_s_usage: w_or_s.usage(&r),
                w_or_s_duration_s: w_or_s.duration(&r, tl.tick_ms),
                a_or_d_usage: a_or_d.usage(&r),
                a_or_d_duration_s: a_or_d.duration(&r, tl.tick_ms),
                a_ctrl_mouse1_usage: combo.usage(&r),
                gaze_std: gaze,
            });
        }
        start_ms += step_ms;
    }
    Ok(rows)
}

/// Extracts every session in parallel; rows come out ordered by
/// `(player_id, window_start_s)`.
pub fn extract_cohort(timelines: &[SessionTimeline], spec: &WindowSpec) -> Result<FeatureDataset> {
    let per_session = timelines
        .par_iter()
        .map(|tl| extract_features(tl, spec))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<FeatureVector> = per_session.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.player_id
            .cmp(&b.player_id)
            .then(a.window_start_s.total_cmp(&b.window_start_s))
    });
    Ok(FeatureDataset::new(rows))
}

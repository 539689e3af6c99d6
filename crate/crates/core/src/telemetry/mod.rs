//! Raw telemetry data model, log parsing and uniform-tick synchronization.
//!
//! Input logs carry keyboard/mouse DOWN/UP edges with millisecond
//! timestamps; gaze logs carry normalized screen coordinates sampled by the
//! eye tracker. [`synchronize`] merges both onto a fixed tick grid.

mod manifest;
mod parse;
mod sync;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{Manifest, ManifestEntry};
pub(crate) use parse::records as parse_records;
pub use parse::{
    parse_gaze_log, parse_gaze_log_scaled, parse_input_log, write_gaze_log, write_input_log,
    GazeScale,
};
pub use sync::synchronize;

/// Default master tick, matching the 10 ms key logger period.
pub const DEFAULT_TICK_MS: u64 = 10;

/// The controls the biometric features look at, in bit order.
pub const CANONICAL_CONTROLS: [&str; 6] = ["W", "A", "S", "D", "CTRL", "MOUSE1"];

/// Upper bound on distinct control codes per session (one bit each).
pub const MAX_CONTROLS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Device {
    Keyboard,
    Mouse,
}

impl Device {
    pub fn token(self) -> &'static str {
        match self {
            Device::Keyboard => "KB",
            Device::Mouse => "MOUSE",
        }
    }
}

impl FromStr for Device {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "KB" => Ok(Device::Keyboard),
            "MOUSE" => Ok(Device::Mouse),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Edge {
    Down,
    Up,
}

impl Edge {
    pub fn token(self) -> &'static str {
        match self {
            Edge::Down => "DOWN",
            Edge::Up => "UP",
        }
    }
}

impl FromStr for Edge {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "DOWN" => Ok(Edge::Down),
            "UP" => Ok(Edge::Up),
            _ => Err(()),
        }
    }
}

/// A single key or button edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputEvent {
    pub t_ms: u64,
    pub device: Device,
    pub code: String,
    pub edge: Edge,
}

impl InputEvent {
    pub fn new(t_ms: u64, device: Device, code: impl Into<String>, edge: Edge) -> Self {
        InputEvent {
            t_ms,
            device,
            code: code.into(),
            edge,
        }
    }
}

/// One eye-tracker sample in normalized screen coordinates, `(0.5, 0.5)`
/// being the screen center. `valid == false` marks blinks and tracking loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GazeSample {
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkillClass {
    #[serde(rename = "PRO")]
    Pro,
    #[serde(rename = "HIGH_AMATEUR")]
    HighAmateur,
    #[serde(rename = "LOW_AMATEUR")]
    LowAmateur,
    #[serde(rename = "NEWBIE")]
    Newbie,
}

impl SkillClass {
    pub const ALL: [SkillClass; 4] = [
        SkillClass::Pro,
        SkillClass::HighAmateur,
        SkillClass::LowAmateur,
        SkillClass::Newbie,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SkillClass::Pro => "PRO",
            SkillClass::HighAmateur => "HIGH_AMATEUR",
            SkillClass::LowAmateur => "LOW_AMATEUR",
            SkillClass::Newbie => "NEWBIE",
        }
    }

    pub fn binary(self) -> BinaryLabel {
        match self {
            SkillClass::Pro => BinaryLabel::Pro,
            _ => BinaryLabel::NonPro,
        }
    }
}

impl fmt::Display for SkillClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SkillClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        SkillClass::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or(())
    }
}

/// Athlete vs. everybody else; `Pro` is the positive class throughout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinaryLabel {
    #[serde(rename = "NONPRO")]
    NonPro,
    #[serde(rename = "PRO")]
    Pro,
}

impl BinaryLabel {
    pub fn token(self) -> &'static str {
        match self {
            BinaryLabel::Pro => "PRO",
            BinaryLabel::NonPro => "NONPRO",
        }
    }

    pub fn is_pro(self) -> bool {
        self == BinaryLabel::Pro
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for BinaryLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "PRO" => Ok(BinaryLabel::Pro),
            "NONPRO" => Ok(BinaryLabel::NonPro),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionMeta {
    pub player_id: String,
    pub class_label: SkillClass,
    pub duration_ms: u64,
}

impl SessionMeta {
    pub fn new(player_id: impl Into<String>, class_label: SkillClass, duration_ms: u64) -> Self {
        SessionMeta {
            player_id: player_id.into(),
            class_label,
            duration_ms,
        }
    }

    pub fn binary_label(&self) -> BinaryLabel {
        self.class_label.binary()
    }
}

/// Set of held controls, one bit per entry of the session's [`ControlTable`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ControlSet(pub u64);

impl ControlSet {
    pub const EMPTY: ControlSet = ControlSet(0);

    pub fn contains(self, bit: usize) -> bool {
        self.0 >> bit & 1 == 1
    }

    pub fn insert(&mut self, bit: usize) {
        self.0 |= 1 << bit;
    }

    pub fn remove(&mut self, bit: usize) {
        self.0 &= !(1 << bit);
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn bits(self) -> impl Iterator<Item = usize> {
        (0..MAX_CONTROLS).filter(move |&b| self.contains(b))
    }
}

/// Interned control codes of one session. The canonical controls always
/// occupy bits 0..6; other codes follow in order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlTable {
    codes: Vec<(String, Device)>,
}

impl Default for ControlTable {
    fn default() -> Self {
        let codes = CANONICAL_CONTROLS
            .iter()
            .map(|&c| {
                let device = if c == "MOUSE1" {
                    Device::Mouse
                } else {
                    Device::Keyboard
                };
                (c.to_string(), device)
            })
            .collect();
        ControlTable { codes }
    }
}

impl ControlTable {
    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|(c, _)| c == code)
    }

    pub fn intern(&mut self, code: &str, device: Device) -> Result<usize> {
        if let Some(i) = self.index_of(code) {
            return Ok(i);
        }
        if self.codes.len() == MAX_CONTROLS {
            return Err(Error::TooManyControls(MAX_CONTROLS));
        }
        self.codes.push((code.to_string(), device));
        Ok(self.codes.len() - 1)
    }

    pub fn code(&self, bit: usize) -> &str {
        &self.codes[bit].0
    }

    pub fn device(&self, bit: usize) -> Device {
        self.codes[bit].1
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickState {
    pub held: ControlSet,
    pub gaze_x: f64,
    pub gaze_y: f64,
    pub gaze_valid: bool,
}

/// Edge anomalies tolerated by [`synchronize`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SyncWarnings {
    /// DOWN for a control that was already held.
    pub duplicate_down: usize,
    /// UP for a control that was not held.
    pub orphan_up: usize,
}

impl SyncWarnings {
    pub fn total(&self) -> usize {
        self.duplicate_down + self.orphan_up
    }
}

/// Uniform-tick reconstruction of one session. Tick `i` covers
/// `[i * tick_ms, (i + 1) * tick_ms)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionTimeline {
    pub tick_ms: u64,
    pub ticks: Vec<TickState>,
    pub meta: SessionMeta,
    pub controls: ControlTable,
    pub warnings: SyncWarnings,
}

impl SessionTimeline {
    pub fn duration_s(&self) -> f64 {
        self.ticks.len() as f64 * self.tick_ms as f64 / 1000.0
    }

    pub fn held_codes(&self, tick: usize) -> Vec<&str> {
        self.ticks[tick]
            .held
            .bits()
            .map(|b| self.controls.code(b))
            .collect()
    }

    /// Re-emits the timeline as logs: edges at tick starts wherever the held
    /// set changes and one gaze sample per tick near its midpoint.
    pub fn to_logs(&self) -> (Vec<InputEvent>, Vec<GazeSample>) {
        let mut events = Vec::new();
        let mut prev = ControlSet::EMPTY;
        for (i, tick) in self.ticks.iter().enumerate() {
            let t_ms = i as u64 * self.tick_ms;
            let released = ControlSet(prev.0 & !tick.held.0);
            let pressed = ControlSet(tick.held.0 & !prev.0);
            for bit in released.bits() {
                events.push(InputEvent::new(
                    t_ms,
                    self.controls.device(bit),
                    self.controls.code(bit),
                    Edge::Up,
                ));
            }
            for bit in pressed.bits() {
                events.push(InputEvent::new(
                    t_ms,
                    self.controls.device(bit),
                    self.controls.code(bit),
                    Edge::Down,
                ));
            }
            prev = tick.held;
        }
        let gaze = self
            .ticks
            .iter()
            .enumerate()
            .map(|(i, tick)| GazeSample {
                t_ms: i as u64 * self.tick_ms + self.tick_ms / 2,
                x: tick.gaze_x,
                y: tick.gaze_y,
                valid: tick.gaze_valid,
            })
            .collect();
        (events, gaze)
    }
}

//! Seeded synthetic cohorts for the four skill archetypes.
//!
//! Archetype parameters live in `config/archetypes.toml` and are compiled
//! into the crate. They are synthetic calibration constants chosen so that
//! class-level feature orderings match the study's qualitative findings;
//! they are not measurements.
//!
//! Every session is a pure function of its archetype, duration and seed.
//! Cohort sessions derive their seeds from `(cohort seed, player index)`,
//! so parallel generation is schedule-independent.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::telemetry::{
    synchronize, write_gaze_log, write_input_log, Device, Edge, GazeSample, InputEvent, Manifest,
    ManifestEntry, SessionMeta, SessionTimeline, SkillClass, CANONICAL_CONTROLS,
};

const ARCHETYPES_TOML: &str = include_str!("../config/archetypes.toml");

/// Input events are quantized to the key logger period.
const EVENT_GRID_MS: u64 = 10;
/// Eye tracker period (250 Hz).
pub const GAZE_PERIOD_MS: u64 = 4;
const A: usize = 1;
const D: usize = 3;
const COMBO_CONTROLS: [&str; 3] = ["A", "CTRL", "MOUSE1"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlProcess {
    /// Presses per second of idle time.
    pub rate: f64,
    pub hold_median_s: f64,
    /// Standard deviation of log hold time.
    pub hold_dispersion: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldDist {
    pub median_s: f64,
    pub dispersion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    pub class: SkillClass,
    /// Keyed by canonical control code; missing controls are never pressed.
    pub controls: BTreeMap<String, ControlProcess>,
    /// Strafing: one renewal process whose presses alternate between A and
    /// D, so the two never overlap.
    #[serde(default)]
    pub strafe: Option<ControlProcess>,
    pub combo_rate_per_min: f64,
    pub combo_hold: HoldDist,
    /// Stationary per-axis standard deviation of gaze around the center.
    pub gaze_sigma: f64,
    /// Mean-reversion rate of gaze, 1/s.
    pub gaze_reversion: f64,
    pub blink_rate_per_min: f64,
    pub blink_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeTable {
    pub player_jitter: f64,
    pub hold_jitter: f64,
    #[serde(rename = "archetype")]
    pub archetypes: Vec<Archetype>,
}

impl ArchetypeTable {
    /// The checked-in calibration.
    pub fn builtin() -> &'static ArchetypeTable {
        static TABLE: OnceLock<ArchetypeTable> = OnceLock::new();
        TABLE.get_or_init(|| ArchetypeTable::parse(ARCHETYPES_TOML).expect("bundled archetypes.toml"))
    }

    pub fn parse(text: &str) -> Result<ArchetypeTable> {
        let table: ArchetypeTable =
            toml::from_str(text).map_err(|e| Error::InvalidParams(format!("archetype table: {e}")))?;
        if ![table.player_jitter, table.hold_jitter].iter().all(|j| *j >= 0.0 && j.is_finite()) {
            return Err(Error::InvalidParams("jitter must be >= 0".into()));
        }
        for class in SkillClass::ALL {
            if table.archetypes.iter().filter(|a| a.class == class).count() != 1 {
                return Err(Error::InvalidParams(format!("need exactly one {} archetype", class.token())));
            }
        }
        for a in &table.archetypes {
            a.validate()?;
        }
        Ok(table)
    }

    pub fn get(&self, class: SkillClass) -> &Archetype {
        self.archetypes.iter().find(|a| a.class == class).expect("validated")
    }
}

impl Archetype {
    pub fn builtin(class: SkillClass) -> Archetype {
        ArchetypeTable::builtin().get(class).clone()
    }

    /// No presses, no combos; gaze is still produced.
    pub fn idle(class: SkillClass) -> Archetype {
        Archetype {
            controls: BTreeMap::new(),
            strafe: None,
            combo_rate_per_min: 0.0,
            ..Archetype::builtin(class)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParams(format!("{} archetype: {what}", self.class.token())));
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        let pos = |v: f64| v > 0.0 && v.is_finite();
        for (code, p) in &self.controls {
            if !CANONICAL_CONTROLS.contains(&code.as_str()) {
                return bad(format!("unknown control `{code}`"));
            }
            if !(nonneg(p.rate) && pos(p.hold_median_s) && nonneg(p.hold_dispersion)) {
                return bad(format!("bad process for `{code}`"));
            }
        }
        if let Some(p) = &self.strafe {
            if !(nonneg(p.rate) && pos(p.hold_median_s) && nonneg(p.hold_dispersion)) {
                return bad("bad strafe process".into());
            }
        }
        if !(nonneg(self.combo_rate_per_min) && pos(self.combo_hold.median_s) && nonneg(self.combo_hold.dispersion)) {
            return bad("bad combo parameters".into());
        }
        if !(self.gaze_sigma > 0.0 && self.gaze_sigma <= 0.3) {
            return bad(format!("gaze_sigma {} outside (0, 0.3]", self.gaze_sigma));
        }
        if !(pos(self.gaze_reversion) && nonneg(self.blink_rate_per_min) && pos(self.blink_s)) {
            return bad("bad gaze parameters".into());
        }
        Ok(())
    }

    /// Per-player variant: rates and the gaze spread are scaled by
    /// independent log-normal factors with log-sd `jitter`, hold medians by
    /// factors with log-sd `hold_jitter`.
    pub fn jittered(&self, jitter: f64, hold_jitter: f64, rng: &mut impl Rng) -> Archetype {
        let mut factor = |sd: f64| (sd * rng.sample::<f64, _>(StandardNormal)).exp();
        let mut a = self.clone();
        for p in a.controls.values_mut().chain(a.strafe.as_mut()) {
            p.rate *= factor(jitter);
            p.hold_median_s *= factor(hold_jitter);
        }
        a.combo_rate_per_min *= factor(jitter);
        a.gaze_sigma = (a.gaze_sigma * factor(jitter)).min(0.3);
        a
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn quantize(t_s: f64) -> u64 {
    (t_s * 1000.0 / EVENT_GRID_MS as f64).round() as u64 * EVENT_GRID_MS
}

/// Alternating renewal process: exponential idle gaps, log-normal holds.
/// Returns `[down, up)` intervals in ms, at least one grid step long.
fn renewal_intervals(rate: f64, median_s: f64, dispersion: f64, duration_ms: u64, rng: &mut ChaCha8Rng) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate).expect("rate > 0");
    let hold = LogNormal::new(median_s.ln(), dispersion).expect("validated hold");
    let duration_s = duration_ms as f64 / 1000.0;
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= duration_s {
            break;
        }
        let h: f64 = hold.sample(rng);
        let down = quantize(t);
        let up = quantize(t + h).max(down + EVENT_GRID_MS);
        out.push((down, up));
        t += h;
    }
    out
}

/// Union of intervals, clipped to the session. Touching intervals merge,
/// so no control is released and pressed in the same millisecond.
fn merge(mut intervals: Vec<(u64, u64)>, duration_ms: u64) -> Vec<(u64, u64)> {
    intervals.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
    for (s, e) in intervals {
        if s >= duration_ms {
            break;
        }
        let e = e.min(duration_ms);
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn input_events(arch: &Archetype, duration_ms: u64, seed: u64) -> Vec<InputEvent> {
    let mut per_control: Vec<Vec<(u64, u64)>> = CANONICAL_CONTROLS
        .iter()
        .enumerate()
        .map(|(i, code)| match arch.controls.get(*code) {
            Some(p) => renewal_intervals(
                p.rate,
                p.hold_median_s,
                p.hold_dispersion,
                duration_ms,
                &mut stream(seed, i as u64),
            ),
            None => Vec::new(),
        })
        .collect();
    let combos = renewal_intervals(
        arch.combo_rate_per_min / 60.0,
        arch.combo_hold.median_s,
        arch.combo_hold.dispersion,
        duration_ms,
        &mut stream(seed, CANONICAL_CONTROLS.len() as u64),
    );
    if let Some(p) = &arch.strafe {
        let mut rng = stream(seed, CANONICAL_CONTROLS.len() as u64 + 2);
        let strafes = renewal_intervals(p.rate, p.hold_median_s, p.hold_dispersion, duration_ms, &mut rng);
        let mut side = rng.random_bool(0.5);
        for iv in strafes {
            per_control[if side { A } else { D }].push(iv);
            side = !side;
        }
    }
    for code in COMBO_CONTROLS {
        let i = CANONICAL_CONTROLS.iter().position(|c| *c == code).unwrap();
        per_control[i].extend_from_slice(&combos);
    }

    let mut events = Vec::new();
    for (i, intervals) in per_control.into_iter().enumerate() {
        let code = CANONICAL_CONTROLS[i];
        let device = if code == "MOUSE1" { Device::Mouse } else { Device::Keyboard };
        for (down, up) in merge(intervals, duration_ms) {
            events.push((down, i, InputEvent::new(down, device, code, Edge::Down)));
            events.push((up, i, InputEvent::new(up, device, code, Edge::Up)));
        }
    }
    events.sort_by_key(|e| (e.0, e.1));
    events.into_iter().map(|e| e.2).collect()
}

fn round5(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 1e5).round() / 1e5
}

/// Ornstein–Uhlenbeck gaze around the screen center, sampled exactly at
/// 250 Hz, with blinks reported as invalid samples.
fn gaze_samples(arch: &Archetype, duration_ms: u64, seed: u64) -> Vec<GazeSample> {
    let mut rng = stream(seed, CANONICAL_CONTROLS.len() as u64 + 1);
    let dt = GAZE_PERIOD_MS as f64 / 1000.0;
    let decay = (-arch.gaze_reversion * dt).exp();
    let kick = arch.gaze_sigma * (1.0 - decay * decay).sqrt();
    let blink_gap = (arch.blink_rate_per_min > 0.0).then(|| Exp::new(arch.blink_rate_per_min / 60.0).unwrap());
    let blink_len = LogNormal::new(arch.blink_s.ln(), 0.3).unwrap();

    let mut next_blink = blink_gap.map_or(f64::INFINITY, |d| d.sample(&mut rng));
    let mut blink_end = 0.0;
    let mut dev = [
        arch.gaze_sigma * rng.sample::<f64, _>(StandardNormal),
        arch.gaze_sigma * rng.sample::<f64, _>(StandardNormal),
    ];
    let n = duration_ms / GAZE_PERIOD_MS;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let t_s = k as f64 * dt;
        if t_s >= next_blink {
            blink_end = next_blink + blink_len.sample(&mut rng);
            next_blink = blink_end + blink_gap.map_or(f64::INFINITY, |d| d.sample(&mut rng));
        }
        out.push(GazeSample {
            t_ms: k * GAZE_PERIOD_MS,
            x: round5(0.5 + dev[0]),
            y: round5(0.5 + dev[1]),
            valid: t_s >= blink_end,
        });
        for d in &mut dev {
            *d = *d * decay + kick * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// One session's input and gaze logs.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionLogs {
    pub events: Vec<InputEvent>,
    pub gaze: Vec<GazeSample>,
}

pub fn generate_session(arch: &Archetype, duration_s: f64, seed: u64) -> Result<SessionLogs> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::InvalidDuration(format!("{duration_s} s")));
    }
    arch.validate()?;
    let duration_ms = (duration_s * 1000.0).round() as u64;
    Ok(SessionLogs {
        events: input_events(arch, duration_ms, seed),
        gaze: gaze_samples(arch, duration_ms, seed),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    /// Players per class, in [`SkillClass::ALL`] order.
    pub counts: [usize; 4],
    pub duration_s: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec { counts: [4, 11, 7, 6], duration_s: 1800.0, seed: 0 }
    }
}

/// Sessions shorter than one default feature window yield no rows.
pub const MIN_SESSION_S: f64 = 300.0;

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= MIN_SESSION_S && self.duration_s.is_finite()) {
            return Err(Error::InvalidDuration(format!(
                "{} s is shorter than one {MIN_SESSION_S} s window",
                self.duration_s
            )));
        }
        Ok(())
    }

    /// `(player_id, class)` in cohort order, e.g. `pro_01`.
    pub fn players(&self) -> Vec<(String, SkillClass)> {
        SkillClass::ALL
            .iter()
            .zip(self.counts)
            .flat_map(|(&class, n)| {
                (1..=n).map(move |i| (format!("{}_{i:02}", class.token().to_lowercase()), class))
            })
            .collect()
    }
}

/// A generated player session held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSession {
    pub meta: SessionMeta,
    pub logs: SessionLogs,
}

impl SyntheticSession {
    pub fn timeline(&self, tick_ms: u64) -> Result<SessionTimeline> {
        synchronize(&self.logs.events, &self.logs.gaze, self.meta.clone(), tick_ms)
    }
}

/// Generates every session of the cohort without touching the disk.
pub fn synthesize_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticSession>> {
    spec.validate()?;
    let table = ArchetypeTable::builtin();
    let duration_ms = (spec.duration_s * 1000.0).round() as u64;
    spec.players()
        .into_par_iter()
        .enumerate()
        .map(|(i, (player_id, class))| {
            let seed = crate::seed::derive(spec.seed, i as u64);
            let mut rng = stream(seed, u64::MAX);
            let arch = table.get(class).jittered(table.player_jitter, table.hold_jitter, &mut rng);
            Ok(SyntheticSession {
                meta: SessionMeta::new(player_id, class, duration_ms),
                logs: generate_session(&arch, spec.duration_s, seed)?,
            })
        })
        .collect()
}

/// Writes `manifest.csv` and `sessions/<player>_{input,gaze}.csv` under
/// `out_dir`. An empty cohort writes only the manifest header.
pub fn generate_cohort(spec: &CohortSpec, out_dir: &Path) -> Result<Manifest> {
    let sessions = synthesize_cohort(spec)?;
    let entries: Vec<ManifestEntry> = sessions
        .par_iter()
        .map(|s| {
            let id = &s.meta.player_id;
            let input_log = PathBuf::from("sessions").join(format!("{id}_input.csv"));
            let gaze_log = PathBuf::from("sessions").join(format!("{id}_gaze.csv"));
            write_atomic(&out_dir.join(&input_log), write_input_log(&s.logs.events).as_bytes())?;
            write_atomic(&out_dir.join(&gaze_log), write_gaze_log(&s.logs.gaze).as_bytes())?;
            Ok(ManifestEntry {
                player_id: id.clone(),
                class: s.meta.class_label,
                input_log,
                gaze_log,
                duration_ms: s.meta.duration_ms,
            })
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest { dir: out_dir.to_path_buf(), entries };
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_atomic(&out_dir.join("manifest.csv"), manifest.to_csv().as_bytes())?;
    Ok(manifest)
}

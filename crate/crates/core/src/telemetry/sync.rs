use super::{
    ControlSet, ControlTable, Edge, GazeSample, InputEvent, SessionMeta, SessionTimeline,
    SyncWarnings, TickState,
};
use crate::error::{Error, Result};

/// Builds the uniform-tick timeline of one session.
///
/// The held set of tick `i` is the control state right after replaying every
/// event with `t_ms <= i * tick_ms` in order. A DOWN for an already held
/// control and an UP for a released one are ignored and tallied in
/// [`SyncWarnings`]. Controls still held at the end of the session are
/// implicitly released at `duration_ms`.
///
/// Gaze is linearly interpolated at tick midpoints between two consecutive
/// valid samples. A midpoint bracketed by an invalid sample, or outside the
/// sampled span, yields `gaze_valid = false` with the last valid coordinates
/// carried forward (screen center before the first one).
pub fn synchronize(
    events: &[InputEvent],
    gaze: &[GazeSample],
    meta: SessionMeta,
    tick_ms: u64,
) -> Result<SessionTimeline> {
    if tick_ms == 0 {
        return Err(Error::InvalidParams("tick_ms must be positive".into()));
    }
    let n_ticks = (meta.duration_ms / tick_ms) as usize;
    if n_ticks == 0 {
        return Err(Error::EmptySession);
    }
    check_sorted(events.iter().map(|e| e.t_ms))?;
    check_sorted(gaze.iter().map(|g| g.t_ms))?;

    let mut controls = ControlTable::default();
    let bits = events
        .iter()
        .map(|e| controls.intern(&e.code, e.device))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = SyncWarnings::default();
    let mut held = ControlSet::EMPTY;
    let mut apply = |idx: usize, held: &mut ControlSet| {
        let bit = bits[idx];
        match events[idx].edge {
            Edge::Down if held.contains(bit) => warnings.duplicate_down += 1,
            Edge::Down => held.insert(bit),
            Edge::Up if !held.contains(bit) => warnings.orphan_up += 1,
            Edge::Up => held.remove(bit),
        }
    };

    let mut ticks = Vec::with_capacity(n_ticks);
    let mut next_event = 0;
    let mut cursor = GazeCursor::new(gaze);
    for i in 0..n_ticks {
        let start = i as u64 * tick_ms;
        while next_event < events.len() && events[next_event].t_ms <= start {
            apply(next_event, &mut held);
            next_event += 1;
        }
        let mid = start as f64 + tick_ms as f64 / 2.0;
        let (gaze_x, gaze_y, gaze_valid) = cursor.at(mid);
        ticks.push(TickState {
            held,
            gaze_x,
            gaze_y,
            gaze_valid,
        });
    }
    // remaining edges cannot change any tick but still count as anomalies
    for idx in next_event..events.len() {
        apply(idx, &mut held);
    }

    Ok(SessionTimeline {
        tick_ms,
        ticks,
        meta,
        controls,
        warnings,
    })
}

fn check_sorted(times: impl Iterator<Item = u64>) -> Result<()> {
    let mut last = 0;
    for (i, t) in times.enumerate() {
        if t < last {
            return Err(Error::NonMonotonicTime {
                line: i as u64 + 1,
                t_ms: t,
            });
        }
        last = t;
    }
    Ok(())
}

struct GazeCursor<'a> {
    samples: &'a [GazeSample],
    // index of the last sample with t_ms <= the query time
    idx: Option<usize>,
    last_valid: (f64, f64),
}

impl<'a> GazeCursor<'a> {
    fn new(samples: &'a [GazeSample]) -> Self {
        GazeCursor {
            samples,
            idx: None,
            last_valid: (0.5, 0.5),
        }
    }

    /// Queries must be nondecreasing.
    fn at(&mut self, t: f64) -> (f64, f64, bool) {
        let s = self.samples;
        let mut next = self.idx.map_or(0, |i| i + 1);
        while next < s.len() && s[next].t_ms as f64 <= t {
            self.idx = Some(next);
            if s[next].valid {
                self.last_valid = (s[next].x, s[next].y);
            }
            next += 1;
        }
        let Some(i) = self.idx else {
            return self.invalid();
        };
        let a = &s[i];
        if a.valid && a.t_ms as f64 == t {
            return (a.x, a.y, true);
        }
        match s.get(i + 1) {
            Some(b) if a.valid && b.valid => {
                let w = (t - a.t_ms as f64) / (b.t_ms - a.t_ms) as f64;
                let x = a.x + w * (b.x - a.x);
                let y = a.y + w * (b.y - a.y);
                (x.clamp(a.x.min(b.x), a.x.max(b.x)), y.clamp(a.y.min(b.y), a.y.max(b.y)), true)
            }
            _ => self.invalid(),
        }
    }

    fn invalid(&self) -> (f64, f64, bool) {
        (self.last_valid.0, self.last_valid.1, false)
    }
}

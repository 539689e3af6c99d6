//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Written against the definitions, not the library code.
#![allow(dead_code)]

use skilltrace::telemetry::{Edge, GazeSample, InputEvent};

pub const MOVEMENT: [&str; 5] = ["W", "A", "S", "D", "CTRL"];

/// Held codes at `t_ms` for a clean, time-sorted log (alternating edges
/// per code): a code is held when more of its DOWNs than UPs have happened.
pub struct Replay {
    codes: Vec<(String, Vec<u64>, Vec<u64>)>,
}

impl Replay {
    pub fn new(events: &[InputEvent]) -> Replay {
        let mut codes: Vec<(String, Vec<u64>, Vec<u64>)> = Vec::new();
        for e in events {
            let i = match codes.iter().position(|c| c.0 == e.code) {
                Some(i) => i,
                None => {
                    codes.push((e.code.clone(), Vec::new(), Vec::new()));
                    codes.len() - 1
                }
            };
            match e.edge {
                Edge::Down => codes[i].1.push(e.t_ms),
                Edge::Up => codes[i].2.push(e.t_ms),
            }
        }
        Replay { codes }
    }

    pub fn held(&self, t_ms: u64) -> Vec<&str> {
        self.codes
            .iter()
            .filter(|(_, downs, ups)| {
                downs.partition_point(|&d| d <= t_ms) > ups.partition_point(|&u| u <= t_ms)
            })
            .map(|c| c.0.as_str())
            .collect()
    }
}

/// Gaze at time `t` (ms): linear between the samples around `t`, valid
/// only when both are valid.
pub fn gaze_at(samples: &[GazeSample], t: f64) -> Option<(f64, f64)> {
    let after = samples.partition_point(|s| (s.t_ms as f64) <= t);
    if after == 0 {
        return None;
    }
    let a = &samples[after - 1];
    if a.valid && a.t_ms as f64 == t {
        return Some((a.x, a.y));
    }
    let b = samples.get(after)?;
    if !(a.valid && b.valid) {
        return None;
    }
    let w = (t - a.t_ms as f64) / (b.t_ms as f64 - a.t_ms as f64);
    Some((a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)))
}

pub struct TickView {
    pub held: Vec<String>,
    pub gaze: Option<(f64, f64)>,
}

pub fn ticks(events: &[InputEvent], gaze: &[GazeSample], duration_ms: u64, tick_ms: u64) -> Vec<TickView> {
    let replay = Replay::new(events);
    (0..duration_ms / tick_ms)
        .map(|i| {
            let start = i * tick_ms;
            TickView {
                held: replay.held(start).into_iter().map(String::from).collect(),
                gaze: gaze_at(gaze, start as f64 + tick_ms as f64 / 2.0),
            }
        })
        .collect()
}

fn has(t: &TickView, code: &str) -> bool {
    t.held.iter().any(|h| h == code)
}

fn usage(win: &[&TickView], pred: impl Fn(&TickView) -> bool) -> f64 {
    win.iter().filter(|t| pred(t)).count() as f64 / win.len() as f64
}

fn duration(win: &[&TickView], tick_s: f64, pred: impl Fn(&TickView) -> bool) -> f64 {
    let mut runs = Vec::new();
    let mut current = 0usize;
    for t in win {
        if pred(t) {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    if runs.is_empty() {
        0.0
    } else {
        runs.iter().sum::<usize>() as f64 * tick_s / runs.len() as f64
    }
}

/// `(window_start_s, nine features)` for every window that keeps at least
/// `min_coverage` valid gaze.
pub fn feature_rows(
    ticks: &[TickView],
    tick_ms: u64,
    width_s: f64,
    step_s: f64,
    min_coverage: f64,
) -> Vec<(f64, [f64; 9])> {
    let duration_ms = ticks.len() as u64 * tick_ms;
    let width_ms = (width_s * 1000.0).round() as u64;
    let step_ms = (step_s * 1000.0).round() as u64;
    let tick_s = tick_ms as f64 / 1000.0;
    let mut out = Vec::new();
    let mut start = 0;
    while start + width_ms <= duration_ms {
        let win: Vec<&TickView> = ticks
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = *i as u64 * tick_ms;
                t >= start && t < start + width_ms
            })
            .map(|(_, t)| t)
            .collect();
        let valid: Vec<(f64, f64)> = win.iter().filter_map(|t| t.gaze).collect();
        if valid.len() as f64 / win.len() as f64 >= min_coverage && !valid.is_empty() {
            let keys1 = |t: &TickView| MOVEMENT.iter().filter(|c| has(t, c)).count() == 1;
            let m1 = |t: &TickView| has(t, "MOUSE1");
            let ws = |t: &TickView| has(t, "W") || has(t, "S");
            let ad = |t: &TickView| has(t, "A") || has(t, "D");
            let combo = |t: &TickView| has(t, "A") && has(t, "CTRL") && has(t, "MOUSE1");
            let gaze = valid.iter().map(|(x, y)| ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt()).sum::<f64>()
                / valid.len() as f64;
            out.push((
                start as f64 / 1000.0,
                [
                    usage(&win, keys1),
                    usage(&win, m1),
                    duration(&win, tick_s, m1),
                    usage(&win, ws),
                    duration(&win, tick_s, ws),
                    usage(&win, ad),
                    duration(&win, tick_s, ad),
                    usage(&win, combo),
                    gaze,
                ],
            ));
        }
        start += step_ms;
    }
    out
}

/// `(P(U_a <= u), P(U_a >= u))` by enumerating every assignment of the
/// pooled ranks to sample a. Untied data only.
pub fn u_tails_by_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n, m) = (a.len(), b.len());
    let u_obs = a.iter().map(|x| b.iter().filter(|y| x > y).count()).sum::<usize>();
    // U_a = rank sum of a - n(n+1)/2 for untied data
    let mut counts = vec![0u64; n * m + 1];
    fn walk(next: usize, total: usize, left: usize, rank_sum: usize, n: usize, counts: &mut [u64]) {
        if left == 0 {
            counts[rank_sum - n * (n + 1) / 2] += 1;
            return;
        }
        for r in next..=total - left + 1 {
            walk(r + 1, total, left - 1, rank_sum + r, n, counts);
        }
    }
    walk(1, n + m, n, 0, n, &mut counts);
    let total: u64 = counts.iter().sum();
    let le: u64 = counts[..=u_obs].iter().sum();
    let ge: u64 = counts[u_obs..].iter().sum();
    (le as f64 / total as f64, ge as f64 / total as f64)
}

/// Largest cell value `t` whose superlevel set `{c >= t}` holds at least
/// `p` of the mass, found by trying every distinct cell value.
pub fn hdr_by_scan(cells: &[f64], p: f64) -> f64 {
    let mut candidates: Vec<f64> = cells.iter().copied().filter(|&c| c > 0.0).collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    for &t in &candidates {
        let mass: f64 = cells.iter().filter(|&&c| c >= t).sum();
        if mass >= p - 1e-12 {
            return t;
        }
    }
    *candidates.last().expect("some positive cell")
}

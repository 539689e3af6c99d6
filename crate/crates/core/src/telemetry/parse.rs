use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{Edge, GazeSample, InputEvent};
use crate::error::{Error, Result};

pub(crate) const INPUT_HEADER: [&str; 4] = ["t_ms", "device", "code", "edge"];
pub(crate) const GAZE_HEADER: [&str; 4] = ["t_ms", "x", "y", "valid"];

/// How gaze coordinates in a log are expressed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum GazeScale {
    /// Already in `[0,1]²`.
    #[default]
    Normalized,
    /// Pixel coordinates on a screen of the given resolution.
    Pixels { width: f64, height: f64 },
}

pub(crate) fn records<'a>(
    text: &'a str,
    header: &[&str],
) -> Result<impl Iterator<Item = Result<(u64, StringRecord)>> + 'a> {
    let mut reader = ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| Error::MalformedLine {
        line: 1,
        reason: e.to_string(),
    })?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::MalformedLine {
            line: 1,
            reason: format!("expected header `{}`", header.join(",")),
        });
    }
    let width = header.len();
    Ok(reader.into_records().map(move |r| {
        let rec = r.map_err(|e| Error::MalformedLine {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::MalformedLine {
                line,
                reason: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        Ok((line, rec))
    }))
}

fn field<T: std::str::FromStr>(rec: &StringRecord, i: usize, line: u64, what: &str) -> Result<T> {
    rec[i].parse().map_err(|_| Error::MalformedLine {
        line,
        reason: format!("bad {what} `{}`", &rec[i]),
    })
}

/// Parses an input log with header `t_ms,device,code,edge`.
pub fn parse_input_log(text: &str) -> Result<Vec<InputEvent>> {
    let mut events = Vec::new();
    let mut last = 0u64;
    for r in records(text, &INPUT_HEADER)? {
        let (line, rec) = r?;
        let t_ms: u64 = field(&rec, 0, line, "timestamp")?;
        let device = field(&rec, 1, line, "device")?;
        let code = rec[2].to_string();
        if code.is_empty() {
            return Err(Error::MalformedLine {
                line,
                reason: "empty control code".into(),
            });
        }
        let edge: Edge = field(&rec, 3, line, "edge")?;
        if t_ms < last {
            return Err(Error::NonMonotonicTime { line, t_ms });
        }
        last = t_ms;
        events.push(InputEvent {
            t_ms,
            device,
            code,
            edge,
        });
    }
    Ok(events)
}

/// Parses a gaze log with header `t_ms,x,y,valid` in normalized coordinates.
pub fn parse_gaze_log(text: &str) -> Result<Vec<GazeSample>> {
    parse_gaze_log_scaled(text, GazeScale::Normalized)
}

pub fn parse_gaze_log_scaled(text: &str, scale: GazeScale) -> Result<Vec<GazeSample>> {
    let (sx, sy) = match scale {
        GazeScale::Normalized => (1.0, 1.0),
        GazeScale::Pixels { width, height } => (width, height),
    };
    let mut samples = Vec::new();
    let mut last = 0u64;
    for r in records(text, &GAZE_HEADER)? {
        let (line, rec) = r?;
        let t_ms: u64 = field(&rec, 0, line, "timestamp")?;
        let x = field::<f64>(&rec, 1, line, "x")? / sx;
        let y = field::<f64>(&rec, 2, line, "y")? / sy;
        let valid = match &rec[3] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::MalformedLine {
                    line,
                    reason: format!("bad validity flag `{other}`"),
                })
            }
        };
        if valid && !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::CoordOutOfRange { line });
        }
        if t_ms < last {
            return Err(Error::NonMonotonicTime { line, t_ms });
        }
        last = t_ms;
        samples.push(GazeSample { t_ms, x, y, valid });
    }
    Ok(samples)
}

pub fn write_input_log(events: &[InputEvent]) -> String {
    let mut out = String::with_capacity(16 * events.len() + 32);
    out.push_str(&INPUT_HEADER.join(","));
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.t_ms,
            e.device.token(),
            e.code,
            e.edge.token()
        );
    }
    out
}

pub fn write_gaze_log(samples: &[GazeSample]) -> String {
    let mut out = String::with_capacity(24 * samples.len() + 32);
    out.push_str(&GAZE_HEADER.join(","));
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.t_ms, s.x, s.y, u8::from(s.valid));
    }
    out
}

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::parse::records;
use super::{parse_gaze_log_scaled, parse_input_log, synchronize, GazeScale, SessionMeta, SessionTimeline, SkillClass};
use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["player_id", "class", "input_log", "gaze_log", "duration_ms"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub player_id: String,
    pub class: SkillClass,
    /// Relative to the manifest's directory.
    pub input_log: PathBuf,
    pub gaze_log: PathBuf,
    pub duration_ms: u64,
}

impl ManifestEntry {
    pub fn meta(&self) -> SessionMeta {
        SessionMeta::new(self.player_id.clone(), self.class, self.duration_ms)
    }
}

/// Cohort manifest: one row per player session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Manifest::parse(&text, dir).map_err(|e| Error::in_file(path, e))
    }

    pub fn parse(text: &str, dir: PathBuf) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for r in records(text, &HEADER)? {
            let (line, rec) = r?;
            let bad = |reason: String| Error::MalformedLine { line, reason };
            let player_id = rec[0].to_string();
            if player_id.is_empty() || !seen.insert(player_id.clone()) {
                return Err(bad(format!("empty or duplicate player_id `{player_id}`")));
            }
            let class = rec[1]
                .parse()
                .map_err(|_| bad(format!("unknown class `{}`", &rec[1])))?;
            let duration_ms: u64 = rec[4]
                .parse()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| bad(format!("bad duration_ms `{}`", &rec[4])))?;
            entries.push(ManifestEntry {
                player_id,
                class,
                input_log: PathBuf::from(&rec[2]),
                gaze_log: PathBuf::from(&rec[3]),
                duration_ms,
            });
        }
        Ok(Manifest { dir, entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = HEADER.join(",");
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.player_id,
                e.class,
                e.input_log.display(),
                e.gaze_log.display(),
                e.duration_ms
            );
        }
        out
    }

    /// Reads, parses and synchronizes one session. Errors name the file.
    pub fn load_session(
        &self,
        entry: &ManifestEntry,
        tick_ms: u64,
        scale: GazeScale,
    ) -> Result<SessionTimeline> {
        let input_path = self.dir.join(&entry.input_log);
        let gaze_path = self.dir.join(&entry.gaze_log);
        let input = fs::read_to_string(&input_path).map_err(|e| Error::io(&input_path, e))?;
        let events = parse_input_log(&input).map_err(|e| Error::in_file(&input_path, e))?;
        let gaze = fs::read_to_string(&gaze_path).map_err(|e| Error::io(&gaze_path, e))?;
        let samples =
            parse_gaze_log_scaled(&gaze, scale).map_err(|e| Error::in_file(&gaze_path, e))?;
        synchronize(&events, &samples, entry.meta(), tick_ms)
    }
}

//! JSON profile storage and the append-only CSV episodic log.
//!
//! Profiles round-trip bit-exactly (ordered maps, pretty JSON, trailing
//! newline). The episodic log enforces non-decreasing timestamps per file
//! and a single writer via an exclusive lock file; appends are flushed per
//! record.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use homeval::domain::{EpisodicRecord, UserProfile, EPISODIC_CSV_HEADER};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("corrupt profile {path}: {message}")]
    CorruptProfile { path: PathBuf, message: String },
    #[error("non-monotonic timestamp: {got} after {last}")]
    NonMonotonicTimestamp {
        last: NaiveDateTime,
        got: NaiveDateTime,
    },
    #[error("episodic log {0} is locked by another writer")]
    LockHeld(PathBuf),
    #[error("corrupt episodic log {path}: {message}")]
    CorruptLog { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes a profile as pretty JSON with a trailing newline. Saving and
/// re-loading yields the identical byte sequence.
pub fn save_profile(path: &Path, profile: &UserProfile) -> Result<(), PersistError> {
    let mut json = serde_json::to_string_pretty(profile).expect("profiles serialize");
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<UserProfile, PersistError> {
    let text = std::fs::read_to_string(path).map_err(|e| PersistError::CorruptProfile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| PersistError::CorruptProfile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Append-only CSV episodic log with a single-writer lock. The lock file
/// (`<path>.lock`) is held for the writer's lifetime; a second open fails
/// with [`PersistError::LockHeld`].
pub struct EpisodicLogWriter {
    file: File,
    lock_path: PathBuf,
    last_timestamp: Option<NaiveDateTime>,
}

impl EpisodicLogWriter {
    pub fn open(path: &Path) -> Result<Self, PersistError> {
        let lock_path = path.with_extension("csv.lock");
        match OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
        {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(PersistError::LockHeld(path.to_path_buf()));
            }
            Err(e) => return Err(e.into()),
        }

        let exists = path.exists();
        let mut last_timestamp = None;
        if exists {
            let text = std::fs::read_to_string(path)?;
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                let fields = parse_csv_line(line).map_err(|message| {
                    let _ = std::fs::remove_file(&lock_path);
                    PersistError::CorruptLog {
                        path: path.to_path_buf(),
                        message,
                    }
                })?;
                let record = EpisodicRecord::from_csv_fields(&fields).map_err(|message| {
                    let _ = std::fs::remove_file(&lock_path);
                    PersistError::CorruptLog {
                        path: path.to_path_buf(),
                        message,
                    }
                })?;
                last_timestamp = Some(record.timestamp);
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if !exists {
            writeln!(file, "{EPISODIC_CSV_HEADER}")?;
            file.flush()?;
        }
        Ok(Self {
            file,
            lock_path,
            last_timestamp,
        })
    }

    /// Appends one record; timestamps must be non-decreasing within the
    /// file. Each append is flushed before returning.
    pub fn append(&mut self, record: &EpisodicRecord) -> Result<(), PersistError> {
        if let Some(last) = self.last_timestamp {
            if record.timestamp < last {
                return Err(PersistError::NonMonotonicTimestamp {
                    last,
                    got: record.timestamp,
                });
            }
        }
        let line = record
            .csv_fields()
            .iter()
            .map(|f| csv_escape(f))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        self.last_timestamp = Some(record.timestamp);
        Ok(())
    }
}

impl Drop for EpisodicLogWriter {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock_path);
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Minimal RFC-4180 line parser for resuming a log file.
fn parse_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    current.push('"');
                } else {
                    quoted = false;
                }
            }
            '"' if current.is_empty() => quoted = true,
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            c => current.push(c),
        }
    }
    if quoted {
        return Err(format!("unterminated quote in {line:?}"));
    }
    fields.push(current);
    Ok(fields)
}

/// Reads a whole episodic CSV back into records.
pub fn read_episodic_log(path: &Path) -> Result<Vec<EpisodicRecord>, PersistError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let fields = parse_csv_line(line).map_err(|message| PersistError::CorruptLog {
            path: path.to_path_buf(),
            message,
        })?;
        records.push(EpisodicRecord::from_csv_fields(&fields).map_err(|message| {
            PersistError::CorruptLog {
                path: path.to_path_buf(),
                message,
            }
        })?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use homeval::domain::{AutonomyMode, ConsentFlags, EventType, UserArchetype};
    use std::collections::BTreeMap;

    fn profile() -> UserProfile {
        UserProfile {
            user_id: "u1".to_string(),
            pseudonym: "BraveOtter-0a1b2c3d".to_string(),
            archetype: UserArchetype::Elderly,
            age_band: "65+".to_string(),
            language: "en-US".to_string(),
            autonomy_mode: AutonomyMode::Autonomous,
            preferences: BTreeMap::from([("volume".to_string(), "low".to_string())]),
            consent: ConsentFlags {
                data_logging: true,
                parental_reporting: None,
            },
        }
    }

    fn record(hour: u32) -> EpisodicRecord {
        EpisodicRecord {
            timestamp: NaiveDate::from_ymd_opt(2025, 3, 1)
                .unwrap()
                .and_hms_opt(hour, 0, 0)
                .unwrap(),
            user_id: "u1".to_string(),
            event_type: EventType::Query,
            payload_summary: "hello, with a comma".to_string(),
            latency_ms: Some(3.5),
            flags: vec![],
        }
    }

    #[test]
    fn profile_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u1.json");
        save_profile(&path, &profile()).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_profile(&path).unwrap();
        assert_eq!(loaded, profile());
        save_profile(&path, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn corrupt_profile_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(
            load_profile(&path),
            Err(PersistError::CorruptProfile { .. })
        ));
    }

    #[test]
    fn episodic_appends_round_trip_and_stay_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        {
            let mut writer = EpisodicLogWriter::open(&path).unwrap();
            writer.append(&record(8)).unwrap();
            writer.append(&record(9)).unwrap();
            let err = writer.append(&record(7)).unwrap_err();
            assert!(matches!(err, PersistError::NonMonotonicTimestamp { .. }));
        }
        // Reopen resumes from the last timestamp on disk.
        {
            let mut writer = EpisodicLogWriter::open(&path).unwrap();
            assert!(matches!(
                writer.append(&record(8)),
                Err(PersistError::NonMonotonicTimestamp { .. })
            ));
            writer.append(&record(10)).unwrap();
        }
        let records = read_episodic_log(&path).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0], record(8));
    }

    #[test]
    fn second_writer_is_rejected_while_lock_held() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let writer = EpisodicLogWriter::open(&path).unwrap();
        assert!(matches!(
            EpisodicLogWriter::open(&path),
            Err(PersistError::LockHeld(_))
        ));
        drop(writer);
        // Lock released on drop.
        let _again = EpisodicLogWriter::open(&path).unwrap();
    }
}

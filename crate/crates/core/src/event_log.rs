//! Append-only game event log.
//!
//! Records are JSON objects, one per line, in per-day files named
//! `events-YYYY-MM-DD.jsonl` (UTC). Every room numbers its records from 1
//! without gaps. An append returns only after the bytes reached stable
//! storage, and a torn trailing line left by a crash is cut off on reopen.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{ChatMessage, ControlMessage, Message, ProtocolError};
use crate::types::RoomId;

/// Opcode recorded for relayed chat lines.
pub const CHAT_OPCODE: &str = "CHAT";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("room {room}: expected seq {expected}, got {got}")]
    SequenceGap { room: RoomId, expected: u64, got: u64 },
    #[error("log i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{file}:{line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error("unparseable record: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub seq: u64,
    pub wall_time_ms: i64,
    pub room_id: RoomId,
    /// A player id or `SYSTEM`.
    pub actor: String,
    pub opcode: String,
    pub fields: Vec<String>,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn parse_line(line: &str) -> Result<LogRecord, LogError> {
        serde_json::from_str(line).map_err(|e| LogError::Parse(e.to_string()))
    }

    /// The wire message this record stores.
    pub fn message(&self) -> Result<Message, ProtocolError> {
        if self.opcode == CHAT_OPCODE {
            let text = self.fields.first().cloned().unwrap_or_default();
            return Ok(Message::Chat(ChatMessage::new(self.actor.clone(), text)));
        }
        ControlMessage::from_parts(&self.opcode, self.fields.iter().cloned()).map(Message::Control)
    }

    pub fn day(&self) -> String {
        DateTime::<Utc>::from_timestamp_millis(self.wall_time_ms)
            .unwrap_or_default()
            .format("%Y-%m-%d")
            .to_string()
    }

    pub fn wall_time_rfc3339(&self) -> String {
        DateTime::<Utc>::from_timestamp_millis(self.wall_time_ms)
            .unwrap_or_default()
            .to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}

/// Durable line storage behind the log.
pub trait LogStorage: Send {
    /// All complete lines written so far, oldest first.
    fn load(&mut self) -> Result<Vec<String>, LogError>;
    /// Appends newline-terminated `lines` to the file for `day`. Must not
    /// return until the data is durable; on error nothing may remain written.
    fn append(&mut self, day: &str, lines: &str) -> io::Result<()>;
}

/// Shared switch that makes a [`MemoryStorage`] fail its appends, standing
/// in for a full or failing disk.
#[derive(Debug, Clone, Default)]
pub struct FaultSwitch(Arc<AtomicBool>);

impl FaultSwitch {
    pub fn set(&self, failing: bool) {
        self.0.store(failing, Ordering::SeqCst);
    }

    pub fn is_set(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// In-memory storage. Clones share the same contents.
#[derive(Debug, Clone, Default)]
pub struct MemoryStorage {
    files: Arc<Mutex<Vec<(String, String)>>>,
    fault: FaultSwitch,
}

impl MemoryStorage {
    pub fn new() -> MemoryStorage {
        MemoryStorage::default()
    }

    pub fn fault_switch(&self) -> FaultSwitch {
        self.fault.clone()
    }

    /// `(day, contents)` pairs in day order.
    pub fn files(&self) -> Vec<(String, String)> {
        self.files.lock().expect("poisoned").clone()
    }
}

impl LogStorage for MemoryStorage {
    fn load(&mut self) -> Result<Vec<String>, LogError> {
        Ok(self
            .files()
            .iter()
            .flat_map(|(_, body)| body.lines().map(str::to_string).collect::<Vec<_>>())
            .collect())
    }

    fn append(&mut self, day: &str, lines: &str) -> io::Result<()> {
        if self.fault.is_set() {
            return Err(io::Error::new(io::ErrorKind::StorageFull, "injected: no space left"));
        }
        let mut files = self.files.lock().expect("poisoned");
        match files.iter_mut().find(|(d, _)| d == day) {
            Some((_, body)) => body.push_str(lines),
            None => {
                files.push((day.to_string(), lines.to_string()));
                files.sort();
            }
        }
        Ok(())
    }
}

/// Per-day files in a directory.
#[derive(Debug)]
pub struct FileStorage {
    dir: PathBuf,
}

impl FileStorage {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<FileStorage> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(FileStorage { dir })
    }

    pub fn file_for(&self, day: &str) -> PathBuf {
        self.dir.join(format!("events-{day}.jsonl"))
    }

    fn day_files(&self) -> io::Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("events-") && n.ends_with(".jsonl"))
            })
            .collect();
        files.sort();
        Ok(files)
    }
}

fn truncate_torn_tail(path: &Path, body: &str) -> io::Result<usize> {
    let keep = body.rfind('\n').map_or(0, |i| i + 1);
    if keep < body.len() {
        tracing::warn!(file = %path.display(), dropped = body.len() - keep, "truncating torn log tail");
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(keep as u64)?;
        f.sync_all()?;
    }
    Ok(keep)
}

impl LogStorage for FileStorage {
    fn load(&mut self) -> Result<Vec<String>, LogError> {
        let mut lines = Vec::new();
        for path in self.day_files()? {
            let body = fs::read_to_string(&path)?;
            let keep = truncate_torn_tail(&path, &body)?;
            lines.extend(body[..keep].lines().map(str::to_string));
        }
        Ok(lines)
    }

    fn append(&mut self, day: &str, lines: &str) -> io::Result<()> {
        let path = self.file_for(day);
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        let before = file.metadata()?.len();
        let written = file.write_all(lines.as_bytes()).and_then(|_| file.sync_data());
        if let Err(e) = written {
            // Best effort rollback so a failed append leaves no partial batch.
            let _ = File::options().write(true).open(&path).and_then(|f| f.set_len(before));
            return Err(e);
        }
        Ok(())
    }
}

/// The log: sequence checking over a storage backend plus an in-memory index
/// for queries.
pub struct EventLog {
    storage: Box<dyn LogStorage>,
    rooms: HashMap<RoomId, Vec<LogRecord>>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("rooms", &self.rooms.len()).finish()
    }
}

impl EventLog {
    /// Opens the log, loading and checking every record already stored.
    pub fn open(mut storage: Box<dyn LogStorage>) -> Result<EventLog, LogError> {
        let mut log = EventLog {
            storage: Box::new(MemoryStorage::new()),
            rooms: HashMap::new(),
        };
        for (i, line) in storage.load()?.into_iter().enumerate() {
            let record = LogRecord::parse_line(&line).map_err(|e| LogError::Corrupt {
                file: "log".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            log.check_seq(&record)?;
            log.rooms.entry(record.room_id.clone()).or_default().push(record);
        }
        log.storage = storage;
        Ok(log)
    }

    pub fn in_memory() -> EventLog {
        EventLog::open(Box::new(MemoryStorage::new())).expect("empty storage loads")
    }

    pub fn open_dir(dir: impl Into<PathBuf>) -> Result<EventLog, LogError> {
        EventLog::open(Box::new(FileStorage::open(dir)?))
    }

    pub fn next_seq(&self, room: &RoomId) -> u64 {
        self.rooms.get(room).map_or(1, |r| r.len() as u64 + 1)
    }

    fn check_seq(&self, record: &LogRecord) -> Result<(), LogError> {
        let expected = self.next_seq(&record.room_id);
        if record.seq == expected {
            Ok(())
        } else {
            Err(LogError::SequenceGap {
                room: record.room_id.clone(),
                expected,
                got: record.seq,
            })
        }
    }

    pub fn append(&mut self, record: LogRecord) -> Result<(), LogError> {
        self.append_batch(vec![record])
    }

    /// Appends records atomically: all of them become durable or none do.
    pub fn append_batch(&mut self, records: Vec<LogRecord>) -> Result<(), LogError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut next: HashMap<&RoomId, u64> = HashMap::new();
        for r in &records {
            let expected = *next.entry(&r.room_id).or_insert_with(|| self.next_seq(&r.room_id));
            if r.seq != expected {
                return Err(LogError::SequenceGap {
                    room: r.room_id.clone(),
                    expected,
                    got: r.seq,
                });
            }
            next.insert(&r.room_id, expected + 1);
        }
        // Group by day so each file gets one write.
        let mut by_day: Vec<(String, String)> = Vec::new();
        for r in &records {
            let day = r.day();
            let mut line = r.to_line();
            line.push('\n');
            match by_day.last_mut() {
                Some((d, body)) if *d == day => body.push_str(&line),
                _ => by_day.push((day, line)),
            }
        }
        for (day, body) in &by_day {
            self.storage.append(day, body)?;
        }
        for r in records {
            self.rooms.entry(r.room_id.clone()).or_default().push(r);
        }
        Ok(())
    }

    /// All records for `room` in sequence order; empty for an unknown room.
    pub fn query(&self, room: &RoomId) -> Vec<LogRecord> {
        self.rooms.get(room).cloned().unwrap_or_default()
    }

    pub fn room_ids(&self) -> Vec<RoomId> {
        let mut ids: Vec<RoomId> = self.rooms.keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// Writes records as CSV: fixed columns then `field_1..field_N`.
pub fn export_csv<W: Write>(records: &[LogRecord], out: W) -> Result<(), LogError> {
    let width = records.iter().map(|r| r.fields.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["seq", "wall_time", "room_id", "actor", "opcode"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=width).map(|i| format!("field_{i}")));
    let to_io = |e: csv::Error| LogError::Io(io::Error::other(e));
    w.write_record(&header).map_err(to_io)?;
    for r in records {
        let mut row = vec![
            r.seq.to_string(),
            r.wall_time_rfc3339(),
            r.room_id.to_string(),
            r.actor.clone(),
            r.opcode.clone(),
        ];
        row.extend(r.fields.iter().cloned());
        row.resize(5 + width, String::new());
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

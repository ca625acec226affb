use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MosResponse, PerceptualError, PreferenceResponse, Result};

/// One line of the response journal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum JournalRecord {
    Session {
        session_id: String,
        seed: u64,
        items: usize,
        timestamp: u64,
    },
    Rater {
        rater_id: String,
        token: String,
        timestamp: u64,
    },
    Mos(MosResponse),
    Preference(PreferenceResponse),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PerceptualError + '_ {
    move |source| PerceptualError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses journal bytes. A final line without its newline is the remains of
/// an interrupted append and is dropped if it does not parse. Returns the
/// records and the byte length of the intact prefix.
fn replay(bytes: &[u8]) -> Result<(Vec<JournalRecord>, usize)> {
    let mut records = Vec::new();
    let mut offset = 0;
    for (i, line) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
        let complete = line.ends_with(b"\n");
        let body = line.strip_suffix(b"\n").unwrap_or(line);
        if body.iter().all(u8::is_ascii_whitespace) {
            if complete {
                offset += line.len();
            }
            continue;
        }
        match serde_json::from_slice::<JournalRecord>(body) {
            Ok(r) => {
                records.push(r);
                offset += line.len();
            }
            Err(_) if !complete => {
                log::warn!("dropping torn journal tail at line {}", i + 1);
            }
            Err(e) => {
                return Err(PerceptualError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok((records, offset))
}

pub fn read_journal(path: impl AsRef<Path>) -> Result<Vec<JournalRecord>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(replay(&bytes)?.0)
}

/// Append-only NDJSON writer. Every append is flushed and synced before it
/// returns, so an acknowledged response survives a crash.
#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    /// Opens (creating if needed) and replays the journal, cutting off a torn
    /// final line so later appends start on a clean line.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<JournalRecord>)> {
        let path = path.as_ref();
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(path)(e)),
        };
        let (records, intact) = replay(&bytes)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        if intact < bytes.len() {
            file.set_len(intact as u64).map_err(io_err(path))?;
        }
        let mut journal = Self {
            path: path.to_path_buf(),
            file,
        };
        // a complete record missing only its newline
        if intact > 0 && bytes[intact - 1] != b'\n' {
            journal.file.write_all(b"\n").map_err(io_err(path))?;
        }
        Ok((journal, records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &JournalRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).expect("records serialize");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

//! Session storage: an in-memory map with an optional append-only JSON-lines
//! log. Every change appends the full record, so the last line per id wins
//! on reload.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use krds_core::session::SessionRecord;

/// One session, locked for the duration of a turn.
pub type SessionHandle = Arc<Mutex<SessionRecord>>;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub struct SessionLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl SessionLog {
    fn io(&self, source: std::io::Error) -> StoreError {
        StoreError::Io {
            path: self.path.clone(),
            source,
        }
    }

    fn append(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("session record serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("log lock poisoned");
        file.write_all(line.as_bytes()).map_err(|e| self.io(e))?;
        file.flush().map_err(|e| self.io(e))
    }
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    log: Option<SessionLog>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays `path` if it exists, then appends to it.
    pub fn persistent(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let mut sessions = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: SessionRecord =
                    serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                        path: path.clone(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                sessions.insert(record.id.clone(), Arc::new(Mutex::new(record)));
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(SessionStore {
            sessions: RwLock::new(sessions),
            log: Some(SessionLog {
                path,
                file: Mutex::new(file),
            }),
        })
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions
            .read()
            .expect("store lock poisoned")
            .get(id)
            .cloned()
    }

    pub fn insert(&self, record: SessionRecord) -> Result<(), StoreError> {
        self.persist(&record)?;
        let id = record.id.clone();
        self.sessions
            .write()
            .expect("store lock poisoned")
            .insert(id, Arc::new(Mutex::new(record)));
        Ok(())
    }

    /// Appends the current state of a session to the log, if any.
    pub fn persist(&self, record: &SessionRecord) -> Result<(), StoreError> {
        match &self.log {
            Some(log) => log.append(record),
            None => Ok(()),
        }
    }
}

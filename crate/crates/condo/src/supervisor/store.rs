//! Persistence behind a narrow trait: the supervisor only appends events
//! and replays them on start-up.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::records::StoreEvent;

pub trait Store: Send {
    /// Durably appends one event. Returns only once it would survive a
    /// crash.
    fn append(&mut self, event: &StoreEvent) -> std::io::Result<()>;

    /// Every committed event, oldest first.
    fn replay(&self) -> std::io::Result<Vec<StoreEvent>>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    events: Vec<StoreEvent>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn append(&mut self, event: &StoreEvent) -> std::io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }

    fn replay(&self) -> std::io::Result<Vec<StoreEvent>> {
        Ok(self.events.clone())
    }
}

/// One JSON document per line, synced after each append. A torn last line
/// (crash mid-write) is ignored on replay and overwritten by the next
/// append.
#[derive(Debug)]
pub struct JsonlStore {
    path: PathBuf,
    file: File,
}

impl JsonlStore {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)?;
        let mut store = Self { path, file };
        store.truncate_torn_tail()?;
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn truncate_torn_tail(&mut self) -> std::io::Result<()> {
        let bytes = std::fs::read(&self.path)?;
        let keep = match bytes.iter().rposition(|&b| b == b'\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if keep < bytes.len() {
            log::warn!(
                "{}: dropping {} bytes of an unfinished record",
                self.path.display(),
                bytes.len() - keep
            );
            self.file.set_len(keep as u64)?;
            self.file.sync_all()?;
        }
        Ok(())
    }
}

impl Store for JsonlStore {
    fn append(&mut self, event: &StoreEvent) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    fn replay(&self) -> std::io::Result<Vec<StoreEvent>> {
        let mut out = Vec::new();
        for (n, line) in BufReader::new(File::open(&self.path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", self.path.display(), n + 1),
                )
            })?;
            out.push(e);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supervisor::records::{FlockStatus, Ledger};

    #[test]
    fn jsonl_survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let e = StoreEvent::FlockStatus {
            flock_id: 3,
            status: FlockStatus::Complete,
        };
        {
            let mut s = JsonlStore::open(&path).unwrap();
            s.append(&e).unwrap();
            s.append(&StoreEvent::FlocksEvaluated { flock_ids: vec![3] })
                .unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"flock_st").unwrap();
        drop(f);
        let mut s = JsonlStore::open(&path).unwrap();
        assert_eq!(s.replay().unwrap().len(), 2);
        s.append(&e).unwrap();
        let events = s.replay().unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[2], e);
        let mut l = Ledger::default();
        events.iter().for_each(|e| l.apply(e));
        assert!(l.flocks.is_empty());
    }
}

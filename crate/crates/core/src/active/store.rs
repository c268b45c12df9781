use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::hash::Hash;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::records::{AdjudicationRecord, AnnotationRecord};
use crate::error::{Error, Result};

/// A record kept in an append-only store.
pub trait StoreRecord: Serialize + DeserializeOwned + Clone {
    type Key: Eq + Hash + std::fmt::Debug;

    fn key(&self) -> Self::Key;

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

impl StoreRecord for AnnotationRecord {
    type Key = (String, crate::types::TaskId, String, super::records::AnnotationSource);

    fn key(&self) -> Self::Key {
        AnnotationRecord::key(self)
    }

    fn validate(&self) -> Result<()> {
        AnnotationRecord::validate(self)
    }
}

impl StoreRecord for AdjudicationRecord {
    type Key = (String, String);

    fn key(&self) -> Self::Key {
        AdjudicationRecord::key(self)
    }
}

/// Append-only JSONL log. Every accepted record is written and synced to
/// disk before `append` returns. Opening replays the log; a torn final line
/// (no trailing newline, so never acknowledged) is cut off.
pub struct JsonlStore<T: StoreRecord> {
    path: PathBuf,
    file: File,
    records: Vec<T>,
    keys: HashSet<T::Key>,
}

pub type AnnotationStore = JsonlStore<AnnotationRecord>;
pub type AdjudicationStore = JsonlStore<AdjudicationRecord>;

impl<T: StoreRecord> JsonlStore<T> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(|e| Error::io(&path, e))?;
        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            file.set_len(complete as u64).map_err(|e| Error::io(&path, e))?;
            file.seek(SeekFrom::End(0)).map_err(|e| Error::io(&path, e))?;
        }
        let parsed: Vec<(usize, T)> =
            crate::io::parse_jsonl_numbered(&bytes[..complete], &path.display().to_string())?;
        let mut store = JsonlStore {
            path,
            file,
            records: Vec::with_capacity(parsed.len()),
            keys: HashSet::new(),
        };
        for (line, rec) in parsed {
            if !store.keys.insert(rec.key()) {
                return Err(Error::Parse {
                    source_name: store.path.display().to_string(),
                    line,
                    message: format!("duplicate record {:?}", rec.key()),
                });
            }
            store.records.push(rec);
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates, rejects duplicates, then appends durably.
    pub fn append(&mut self, record: T) -> Result<()> {
        record.validate()?;
        let key = record.key();
        if self.keys.contains(&key) {
            return Err(Error::Duplicate(format!("{key:?}")));
        }
        let mut line = serde_json::to_vec(&record).expect("record serializes");
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| Error::io(&self.path, e))?;
        self.keys.insert(key);
        self.records.push(record);
        Ok(())
    }

    pub fn contains(&self, key: &T::Key) -> bool {
        self.keys.contains(key)
    }

    pub fn records(&self) -> &[T] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::AnnotationSource;
    use crate::types::{MentionClass, TaskId};

    fn rec(key: &str, task: TaskId, label: MentionClass) -> AnnotationRecord {
        AnnotationRecord {
            dedup_key: key.into(),
            report_id: "r".into(),
            sentence_index: 0,
            task,
            label,
            annotator_id: "ann".into(),
            timestamp: 1,
            source: AnnotationSource::ActiveRound,
        }
    }

    #[test]
    fn append_replay_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut s = AnnotationStore::open(&path).unwrap();
        s.append(rec("a", TaskId::Edema, MentionClass::Positive)).unwrap();
        assert_eq!(s.len(), 1);
        let dup = s.append(rec("a", TaskId::Edema, MentionClass::Negative));
        assert!(matches!(dup, Err(Error::Duplicate(_))));
        assert_eq!(s.len(), 1);
        let bad = s.append(rec("b", TaskId::NoFinding, MentionClass::Uncertain));
        assert!(matches!(bad, Err(Error::InvalidLabel { .. })));
        s.append(rec("a", TaskId::Fracture, MentionClass::Negative)).unwrap();
        drop(s);
        let s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.records().len(), 2);
        assert_eq!(s.records()[1].task, TaskId::Fracture);
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        let mut s = AnnotationStore::open(&path).unwrap();
        s.append(rec("a", TaskId::Edema, MentionClass::Positive)).unwrap();
        drop(s);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"dedup_key\":\"b\",\"rep").unwrap();
        drop(f);
        let mut s = AnnotationStore::open(&path).unwrap();
        assert_eq!(s.len(), 1);
        s.append(rec("b", TaskId::Edema, MentionClass::Positive)).unwrap();
        drop(s);
        assert_eq!(AnnotationStore::open(&path).unwrap().len(), 2);
    }
}

//! Persistence of studies, sessions and responses.
//!
//! Three record families, each keyed by a string and stored as JSON:
//!
//! | table       | key                         | value            |
//! |-------------|-----------------------------|------------------|
//! | `studies`   | study id                    | `Study`          |
//! | `sessions`  | token                       | `Session`        |
//! | `responses` | `{token}/{phase}`           | `ResponseRecord` |
//!
//! A commit writes all its records in one transaction.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use redb::{Database, ReadableDatabase, ReadableTable, TableDefinition};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::model::{ResponseRecord, Session, Study};

const STUDIES: TableDefinition<&str, &[u8]> = TableDefinition::new("studies");
const SESSIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("sessions");
const RESPONSES: TableDefinition<&str, &[u8]> = TableDefinition::new("responses");

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage engine: {0}")]
    Engine(#[from] redb::Error),
    #[error("corrupt record {key}: {source}")]
    Corrupt {
        key: String,
        source: serde_json::Error,
    },
}

macro_rules! engine_from {
    ($($t:ty),*) => {$(
        impl From<$t> for StoreError {
            fn from(e: $t) -> Self {
                StoreError::Engine(e.into())
            }
        }
    )*};
}
engine_from!(
    redb::DatabaseError,
    redb::TransactionError,
    redb::TableError,
    redb::StorageError,
    redb::CommitError
);

#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Study(Study),
    Session(Session),
    Response(ResponseRecord),
}

impl Record {
    fn key(&self) -> String {
        match self {
            Record::Study(s) => s.id.clone(),
            Record::Session(s) => s.token.clone(),
            Record::Response(r) => response_key(r),
        }
    }
}

pub fn response_key(r: &ResponseRecord) -> String {
    let phase = serde_json::to_value(r.phase).expect("phase serializes");
    format!("{}/{}", r.token, phase.as_str().unwrap_or_default())
}

/// Everything a store holds, each family sorted by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Snapshot {
    pub studies: Vec<Study>,
    pub sessions: Vec<Session>,
    pub responses: Vec<ResponseRecord>,
}

pub trait Store: Send + Sync {
    /// Atomically writes `records`, replacing any with the same key.
    fn commit(&self, records: &[Record]) -> Result<(), StoreError>;
    fn load(&self) -> Result<Snapshot, StoreError>;
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("records serialize")
}

fn decode<T: DeserializeOwned>(key: &str, bytes: &[u8]) -> Result<T, StoreError> {
    serde_json::from_slice(bytes).map_err(|source| StoreError::Corrupt {
        key: key.to_string(),
        source,
    })
}

#[derive(Default)]
struct Tables {
    studies: BTreeMap<String, Vec<u8>>,
    sessions: BTreeMap<String, Vec<u8>>,
    responses: BTreeMap<String, Vec<u8>>,
}

/// Volatile store for tests and throwaway deployments. Records are kept
/// serialized so that it behaves exactly like the file store.
#[derive(Default)]
pub struct MemoryStore {
    tables: Mutex<Tables>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn commit(&self, records: &[Record]) -> Result<(), StoreError> {
        let mut t = self.tables.lock().unwrap();
        for r in records {
            let (table, bytes) = match r {
                Record::Study(s) => (&mut t.studies, encode(s)),
                Record::Session(s) => (&mut t.sessions, encode(s)),
                Record::Response(x) => (&mut t.responses, encode(x)),
            };
            table.insert(r.key(), bytes);
        }
        Ok(())
    }

    fn load(&self) -> Result<Snapshot, StoreError> {
        let t = self.tables.lock().unwrap();
        fn all<T: DeserializeOwned>(m: &BTreeMap<String, Vec<u8>>) -> Result<Vec<T>, StoreError> {
            m.iter().map(|(k, v)| decode(k, v)).collect()
        }
        Ok(Snapshot {
            studies: all(&t.studies)?,
            sessions: all(&t.sessions)?,
            responses: all(&t.responses)?,
        })
    }
}

/// File-backed transactional store.
pub struct RedbStore {
    db: Database,
}

impl RedbStore {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let db = Database::create(path)?;
        let txn = db.begin_write()?;
        txn.open_table(STUDIES)?;
        txn.open_table(SESSIONS)?;
        txn.open_table(RESPONSES)?;
        txn.commit()?;
        Ok(RedbStore { db })
    }
}

fn read_all<T: DeserializeOwned>(
    txn: &redb::ReadTransaction,
    def: TableDefinition<&str, &[u8]>,
) -> Result<Vec<T>, StoreError> {
    let table = txn.open_table(def)?;
    let mut out = Vec::new();
    for entry in table.iter()? {
        let (k, v) = entry?;
        out.push(decode(k.value(), v.value())?);
    }
    Ok(out)
}

impl Store for RedbStore {
    fn commit(&self, records: &[Record]) -> Result<(), StoreError> {
        let txn = self.db.begin_write()?;
        {
            let mut studies = txn.open_table(STUDIES)?;
            let mut sessions = txn.open_table(SESSIONS)?;
            let mut responses = txn.open_table(RESPONSES)?;
            for r in records {
                let key = r.key();
                match r {
                    Record::Study(s) => studies.insert(key.as_str(), encode(s).as_slice())?,
                    Record::Session(s) => sessions.insert(key.as_str(), encode(s).as_slice())?,
                    Record::Response(x) => responses.insert(key.as_str(), encode(x).as_slice())?,
                };
            }
        }
        txn.commit()?;
        Ok(())
    }

    fn load(&self) -> Result<Snapshot, StoreError> {
        let txn = self.db.begin_read()?;
        Ok(Snapshot {
            studies: read_all(&txn, STUDIES)?,
            sessions: read_all(&txn, SESSIONS)?,
            responses: read_all(&txn, RESPONSES)?,
        })
    }
}

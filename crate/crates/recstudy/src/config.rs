//! Deployment configuration read from the environment.
//!
//! | variable                 | default                         |
//! |--------------------------|---------------------------------|
//! | `RECSTUDY_DATA_DIR`      | `./recstudy-data`               |
//! | `RECSTUDY_BIND`          | `127.0.0.1:8080`                |
//! | `RECSTUDY_BASE_URL`      | `http://{bind}`                 |
//! | `RECSTUDY_STORE`         | `redb` (or `memory`)            |
//! | `RECSTUDY_HASH_SALT`     | generated once, kept in the data directory |
//! | `RECSTUDY_DISPATCHER`    | `file` (or `smtp`)              |
//! | `RECSTUDY_INVITATIONS`   | `{data_dir}/invitations.jsonl`  |
//! | `RECSTUDY_SMTP_HOST`     | required for `smtp`             |
//! | `RECSTUDY_SMTP_PORT`     | `25`                            |
//! | `RECSTUDY_SMTP_USERNAME` | none                            |
//! | `RECSTUDY_SMTP_PASSWORD` | none                            |
//! | `RECSTUDY_SMTP_FROM`     | required for `smtp`             |
//! | `RECSTUDY_STATIC_DIR`    | none; the API is served alone   |
//! | `RECSTUDY_SEED`          | none; tokens come from the OS   |

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use rand::RngCore;

use crate::service::dispatch::{Dispatcher, FileSink, SmtpDispatcher, SmtpSettings};
use crate::service::store::{MemoryStore, RedbStore, Store};
use crate::service::ServiceOptions;

pub const SALT_FILE: &str = "hash_salt";
pub const STORE_FILE: &str = "recstudy.redb";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StoreKind {
    Redb,
    Memory,
}

#[derive(Clone, Debug)]
pub enum DispatcherKind {
    File(PathBuf),
    Smtp(SmtpSettings),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub data_dir: PathBuf,
    pub bind: String,
    pub base_url: String,
    pub store: StoreKind,
    /// `None` means a salt is generated on first use and kept in the data
    /// directory.
    pub hash_salt: Option<String>,
    pub dispatcher: DispatcherKind,
    pub static_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_env() -> anyhow::Result<Self> {
        Self::from_lookup(|key| std::env::var(key).ok().filter(|v| !v.is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> anyhow::Result<Self> {
        let data_dir = PathBuf::from(get("RECSTUDY_DATA_DIR").unwrap_or_else(|| "./recstudy-data".into()));
        let bind = get("RECSTUDY_BIND").unwrap_or_else(|| "127.0.0.1:8080".into());
        let base_url = get("RECSTUDY_BASE_URL").unwrap_or_else(|| format!("http://{bind}"));
        let store = match get("RECSTUDY_STORE").as_deref() {
            None | Some("redb") => StoreKind::Redb,
            Some("memory") => StoreKind::Memory,
            Some(other) => bail!("RECSTUDY_STORE must be 'redb' or 'memory', got '{other}'"),
        };
        let dispatcher = match get("RECSTUDY_DISPATCHER").as_deref() {
            None | Some("file") => DispatcherKind::File(
                get("RECSTUDY_INVITATIONS")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| data_dir.join("invitations.jsonl")),
            ),
            Some("smtp") => DispatcherKind::Smtp(SmtpSettings {
                host: get("RECSTUDY_SMTP_HOST").context("RECSTUDY_SMTP_HOST is required for smtp")?,
                port: match get("RECSTUDY_SMTP_PORT") {
                    Some(p) => p.parse().context("RECSTUDY_SMTP_PORT")?,
                    None => 25,
                },
                username: get("RECSTUDY_SMTP_USERNAME"),
                password: get("RECSTUDY_SMTP_PASSWORD"),
                from: get("RECSTUDY_SMTP_FROM").context("RECSTUDY_SMTP_FROM is required for smtp")?,
            }),
            Some(other) => bail!("RECSTUDY_DISPATCHER must be 'file' or 'smtp', got '{other}'"),
        };
        let seed = match get("RECSTUDY_SEED") {
            Some(s) => Some(s.parse().context("RECSTUDY_SEED")?),
            None => None,
        };
        Ok(Config {
            data_dir,
            bind,
            base_url,
            store,
            hash_salt: get("RECSTUDY_HASH_SALT"),
            dispatcher,
            static_dir: get("RECSTUDY_STATIC_DIR").map(PathBuf::from),
            seed,
        })
    }

    /// The configured salt, or the one kept in the data directory, created
    /// on first use.
    pub fn resolve_salt(&self) -> anyhow::Result<String> {
        if let Some(salt) = &self.hash_salt {
            return Ok(salt.clone());
        }
        let path = self.data_dir.join(SALT_FILE);
        if let Ok(existing) = std::fs::read_to_string(&path) {
            return Ok(existing.trim().to_string());
        }
        let mut bytes = [0u8; 32];
        rand::rng().fill_bytes(&mut bytes);
        let salt = hex::encode(bytes);
        std::fs::write(&path, &salt).with_context(|| format!("writing {}", path.display()))?;
        Ok(salt)
    }

    pub fn open_store(&self) -> anyhow::Result<Arc<dyn Store>> {
        Ok(match self.store {
            StoreKind::Memory => Arc::new(MemoryStore::new()),
            StoreKind::Redb => {
                let path = self.data_dir.join(STORE_FILE);
                Arc::new(RedbStore::open(&path).with_context(|| format!("opening {}", path.display()))?)
            }
        })
    }

    pub fn open_dispatcher(&self) -> anyhow::Result<Arc<dyn Dispatcher>> {
        Ok(match &self.dispatcher {
            DispatcherKind::File(path) => Arc::new(
                FileSink::open(path).with_context(|| format!("opening {}", path.display()))?,
            ),
            DispatcherKind::Smtp(settings) => {
                Arc::new(SmtpDispatcher::new(settings).map_err(anyhow::Error::msg)?)
            }
        })
    }

    pub fn service_options(&self) -> anyhow::Result<ServiceOptions> {
        Ok(ServiceOptions {
            base_url: self.base_url.clone(),
            hash_salt: self.resolve_salt()?,
            seed: self.seed,
        })
    }

    pub fn ensure_data_dir(&self) -> anyhow::Result<&Path> {
        std::fs::create_dir_all(&self.data_dir)
            .with_context(|| format!("creating {}", self.data_dir.display()))?;
        Ok(&self.data_dir)
    }
}

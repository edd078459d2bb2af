//! Invitation delivery.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use lettre::message::Mailbox;
use lettre::transport::smtp::authentication::Credentials;
use lettre::{Message, SmtpTransport, Transport};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invitation {
    pub study_id: String,
    pub title: String,
    pub email: String,
    pub token: String,
    pub url: String,
}

impl Invitation {
    pub fn new(base_url: &str, study_id: &str, title: &str, email: &str, token: &str) -> Self {
        Invitation {
            study_id: study_id.to_string(),
            title: title.to_string(),
            email: email.to_string(),
            token: token.to_string(),
            url: format!("{}/participate/{token}", base_url.trim_end_matches('/')),
        }
    }
}

/// Delivers one invitation. An error is recorded on the participant's
/// session; it does not stop the other invitations.
pub trait Dispatcher: Send + Sync {
    fn dispatch(&self, invitation: &Invitation) -> Result<(), String>;
}

/// Appends one JSON line per invitation to a file.
pub struct FileSink {
    path: PathBuf,
    out: Mutex<BufWriter<File>>,
}

impl FileSink {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileSink {
            path: path.to_path_buf(),
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn read_all(path: &Path) -> std::io::Result<Vec<Invitation>> {
        let text = std::fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
            .collect()
    }
}

impl Dispatcher for FileSink {
    fn dispatch(&self, invitation: &Invitation) -> Result<(), String> {
        let mut out = self.out.lock().unwrap();
        let line = serde_json::to_string(invitation).map_err(|e| e.to_string())?;
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(|e| format!("{}: {e}", self.path.display()))
    }
}

/// Keeps invitations in memory. Addresses in `failing` are rejected.
#[derive(Default)]
pub struct MemorySink {
    sent: Mutex<Vec<Invitation>>,
    failing: BTreeSet<String>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn failing<I: IntoIterator<Item = S>, S: Into<String>>(emails: I) -> Self {
        MemorySink {
            sent: Mutex::default(),
            failing: emails.into_iter().map(Into::into).collect(),
        }
    }

    pub fn sent(&self) -> Vec<Invitation> {
        self.sent.lock().unwrap().clone()
    }
}

impl Dispatcher for MemorySink {
    fn dispatch(&self, invitation: &Invitation) -> Result<(), String> {
        if self.failing.contains(&invitation.email) {
            return Err(format!("mailbox {} rejected the invitation", invitation.email));
        }
        self.sent.lock().unwrap().push(invitation.clone());
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SmtpSettings {
    pub host: String,
    pub port: u16,
    pub username: Option<String>,
    pub password: Option<String>,
    pub from: String,
}

/// Sends invitations through a plaintext SMTP relay, usually a local MTA.
pub struct SmtpDispatcher {
    transport: SmtpTransport,
    from: Mailbox,
}

impl SmtpDispatcher {
    pub fn new(settings: &SmtpSettings) -> Result<Self, String> {
        let from = settings
            .from
            .parse::<Mailbox>()
            .map_err(|e| format!("sender address '{}': {e}", settings.from))?;
        let mut builder = SmtpTransport::builder_dangerous(&settings.host).port(settings.port);
        if let (Some(user), Some(pass)) = (&settings.username, &settings.password) {
            builder = builder.credentials(Credentials::new(user.clone(), pass.clone()));
        }
        Ok(SmtpDispatcher {
            transport: builder.build(),
            from,
        })
    }
}

impl Dispatcher for SmtpDispatcher {
    fn dispatch(&self, invitation: &Invitation) -> Result<(), String> {
        let to = invitation
            .email
            .parse::<Mailbox>()
            .map_err(|e| e.to_string())?;
        let body = format!(
            "You are invited to take part in the study \"{}\".\n\n\
             Open the following link to start:\n{}\n",
            invitation.title, invitation.url
        );
        let message = Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject(format!("Invitation: {}", invitation.title))
            .body(body)
            .map_err(|e| e.to_string())?;
        self.transport
            .send(&message)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_joins_base() {
        let inv = Invitation::new("http://h:8080/", "s1", "T", "a@b.org", "abc");
        assert_eq!(inv.url, "http://h:8080/participate/abc");
    }

    #[test]
    fn file_sink_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inv.jsonl");
        let sink = FileSink::open(&path).unwrap();
        for t in ["t1", "t2"] {
            sink.dispatch(&Invitation::new("http://x", "s", "T", "a@b.org", t))
                .unwrap();
        }
        let read = FileSink::read_all(&path).unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(read[1].token, "t2");
    }
}

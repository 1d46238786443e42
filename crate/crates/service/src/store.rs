//! File-backed session store: one `<id>.session.json` per session.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cloudgate_core::formats::{session_from_json, session_to_json};
use cloudgate_core::{Repository, Session};
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;

const SUFFIX: &str = ".session.json";

pub type SessionCell = Arc<Mutex<Session>>;

pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<BTreeMap<String, SessionCell>>,
}

/// Session ids double as file names.
pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl SessionStore {
    /// Creates the directory if needed, checks it is writable and loads
    /// every session document found in it. Unreadable documents are
    /// skipped with a warning.
    pub async fn open(dir: &Path, repo: &Repository) -> std::io::Result<SessionStore> {
        tokio::fs::create_dir_all(dir).await?;
        let probe = dir.join(".write-probe");
        tokio::fs::write(&probe, b"").await?;
        tokio::fs::remove_file(&probe).await?;

        let mut sessions = BTreeMap::new();
        let mut entries = tokio::fs::read_dir(dir).await?;
        while let Some(entry) = entries.next_entry().await? {
            let name = entry.file_name().to_string_lossy().into_owned();
            let Some(id) = name.strip_suffix(SUFFIX) else { continue };
            let text = tokio::fs::read_to_string(entry.path()).await?;
            match session_from_json(&text, repo) {
                Ok(loaded) if loaded.session.session_id == id => {
                    for w in &loaded.warnings {
                        tracing::warn!(session = id, "{w}");
                    }
                    sessions.insert(id.to_string(), Arc::new(Mutex::new(loaded.session)));
                }
                Ok(_) => tracing::warn!(file = %name, "session id does not match file name; skipped"),
                Err(e) => tracing::warn!(file = %name, "unreadable session document skipped: {e}"),
            }
        }
        Ok(SessionStore { dir: dir.to_path_buf(), sessions: RwLock::new(sessions) })
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{SUFFIX}"))
    }

    /// Writes via a temporary file so a crash never leaves half a document.
    pub async fn persist(&self, session: &Session) -> Result<(), ApiError> {
        let path = self.path_of(&session.session_id);
        let tmp = path.with_extension("json.tmp");
        let write = async {
            tokio::fs::write(&tmp, session_to_json(session)).await?;
            tokio::fs::rename(&tmp, &path).await
        };
        write.await.map_err(|e| ApiError::internal(format!("failed to persist session: {e}")))
    }

    pub async fn insert(&self, session: Session) -> Result<(), ApiError> {
        let mut map = self.sessions.write().await;
        if map.contains_key(&session.session_id) {
            return Err(ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "session_exists",
                format!("session `{}` already exists", session.session_id),
            )
            .at("session_id"));
        }
        self.persist(&session).await?;
        map.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(())
    }

    pub async fn get(&self, id: &str) -> Result<SessionCell, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(&format!("session `{id}`")).at(id))
    }

    pub async fn list(&self) -> Vec<SessionCell> {
        self.sessions.read().await.values().cloned().collect()
    }

    pub async fn remove(&self, id: &str) -> Result<(), ApiError> {
        let mut map = self.sessions.write().await;
        if map.remove(id).is_none() {
            return Err(ApiError::not_found(&format!("session `{id}`")).at(id));
        }
        match tokio::fs::remove_file(self.path_of(id)).await {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(ApiError::internal(format!("failed to delete session file: {e}"))),
        }
    }
}

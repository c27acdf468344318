//! In-memory session store with idle expiry and optional snapshot files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use tokio::sync::Mutex as AsyncMutex;
use uuid::Uuid;

use seqdiag_core::dpi::DpiDocument;
use seqdiag_core::dynamichs::DhsSnapshot;
use seqdiag_core::session::Session;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Clone, Debug)]
pub struct StoreConfig {
    pub idle_timeout: Duration,
    /// Directory receiving one snapshot file per session after every iteration.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            snapshot_dir: None,
        }
    }
}

pub struct Entry {
    pub session: Arc<AsyncMutex<Session>>,
    last_used: Mutex<Instant>,
}

impl Entry {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_used.lock().unwrap())
    }
}

#[derive(Default)]
pub struct Store {
    sessions: Mutex<HashMap<Uuid, Arc<Entry>>>,
    pub config: StoreConfig,
}

impl Store {
    pub fn new(config: StoreConfig) -> Store {
        Store {
            sessions: Mutex::new(HashMap::new()),
            config,
        }
    }

    pub fn insert(&self, session: Session) -> Uuid {
        let id = Uuid::new_v4();
        let entry = Entry {
            session: Arc::new(AsyncMutex::new(session)),
            last_used: Mutex::new(Instant::now()),
        };
        self.sessions.lock().unwrap().insert(id, Arc::new(entry));
        id
    }

    pub fn get(&self, id: &Uuid) -> Option<Arc<Entry>> {
        let entry = self.sessions.lock().unwrap().get(id).cloned();
        if let Some(e) = &entry {
            e.touch();
        }
        entry
    }

    pub fn remove(&self, id: &Uuid) -> bool {
        let removed = self.sessions.lock().unwrap().remove(id).is_some();
        if removed {
            if let Some(path) = self.snapshot_path(id) {
                let _ = std::fs::remove_file(path);
            }
        }
        removed
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn sweep(&self, now: Instant) -> usize {
        let timeout = self.config.idle_timeout;
        let expired: Vec<Uuid> = self
            .sessions
            .lock()
            .unwrap()
            .iter()
            .filter(|(_, e)| e.idle_for(now) > timeout)
            .map(|(id, _)| *id)
            .collect();
        for id in &expired {
            self.remove(id);
        }
        expired.len()
    }

    pub fn snapshot_path(&self, id: &Uuid) -> Option<PathBuf> {
        self.config.snapshot_dir.as_ref().map(|d| d.join(format!("{id}.json")))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SnapshotFile<'a> {
    session_id: String,
    dpi: DpiDocument,
    ld: usize,
    heuristic: String,
    engine: String,
    positive_measurements: Vec<String>,
    negative_measurements: Vec<String>,
    tree: Option<DhsSnapshot>,
    history: &'a [seqdiag_core::session::IterationRecord],
}

/// Writes the session's measurements and engine state to `path`.
pub fn write_snapshot(path: &Path, id: &Uuid, session: &Session) -> std::io::Result<()> {
    let config = session.config();
    let file = SnapshotFile {
        session_id: id.to_string(),
        dpi: config.dpi.to_document(),
        ld: config.ld,
        heuristic: config.heuristic.to_string(),
        engine: config.engine.to_string(),
        positive_measurements: session.positive_measurements().iter().map(|f| f.render()).collect(),
        negative_measurements: session.negative_measurements().iter().map(|f| f.render()).collect(),
        tree: session.engine_state().map(|s| s.snapshot(session.dpi())),
        history: session.history(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(std::io::Error::other)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use seqdiag_core::dpi::Dpi;
    use seqdiag_core::query::Heuristic;
    use seqdiag_core::session::{Engine, SessionConfig};

    fn session() -> Session {
        let dpi = Dpi::from_json(
            r#"{"components":[{"id":"c1","formula":"A"},{"id":"c2","formula":"!A"}],"negativeTests":[]}"#,
        )
        .unwrap();
        Session::start(SessionConfig::new(dpi, 2, Heuristic::Ent, Engine::DynamicHs)).unwrap()
    }

    #[test]
    fn idle_sessions_are_swept() {
        let store = Store::new(StoreConfig {
            idle_timeout: Duration::from_secs(60),
            snapshot_dir: None,
        });
        let a = store.insert(session());
        let b = store.insert(session());
        assert_eq!(store.sweep(Instant::now()), 0);
        let later = Instant::now() + Duration::from_secs(120);
        store.get(&b).unwrap().last_used.lock().map(|mut t| *t = later).unwrap();
        assert_eq!(store.sweep(later), 1);
        assert!(store.get(&a).is_none());
        assert!(store.get(&b).is_some());
    }

    #[test]
    fn snapshots_are_written_and_removed() {
        let dir = std::env::temp_dir().join(format!("seqdiag-store-{}", std::process::id()));
        let store = Store::new(StoreConfig {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            snapshot_dir: Some(dir.clone()),
        });
        let s = session();
        let id = store.insert(s.clone());
        let path = store.snapshot_path(&id).unwrap();
        write_snapshot(&path, &id, &s).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(doc["engine"], "dynamichs");
        assert!(doc["tree"]["queue"].is_array());
        assert!(store.remove(&id));
        assert!(!path.exists());
        std::fs::remove_dir_all(dir).ok();
    }
}

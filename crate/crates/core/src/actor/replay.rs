//! Deterministic Actor backed by recorded responses on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{Actor, ActorError, CallKey, ChatMessage};

/// Location of the fixture for one call: `<dir>/<problem-id>/<iteration>.txt`.
pub fn fixture_path(dir: &Path, key: &CallKey) -> PathBuf {
    dir.join(&key.problem_id).join(format!("{}.txt", key.iteration))
}

/// Serves fixtures by key. A missing fixture is an error.
#[derive(Debug)]
pub struct ReplayActor {
    dir: PathBuf,
    calls: AtomicUsize,
}

impl ReplayActor {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReplayActor { dir: dir.into(), calls: AtomicUsize::new(0) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Number of `complete` calls made so far, including failed lookups.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Actor for ReplayActor {
    fn complete(&self, key: &CallKey, _messages: &[ChatMessage]) -> Result<String, ActorError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let path = fixture_path(&self.dir, key);
        fs::read_to_string(&path).map_err(|_| ActorError::MissingFixture {
            problem_id: key.problem_id.clone(),
            iteration: key.iteration,
            path: path.display().to_string(),
        })
    }

    fn parameters(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("actor".to_string(), "replay".to_string())])
    }
}

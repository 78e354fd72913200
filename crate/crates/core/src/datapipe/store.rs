use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::env::Trajectory;

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEpisode {
    #[serde(rename = "ticket-id")]
    pub ticket_id: String,
    #[serde(flatten)]
    pub trajectory: Trajectory,
}

#[derive(Debug, Default)]
struct Inner {
    episodes: Vec<StoredEpisode>,
    successes: BTreeMap<String, usize>,
    rejected: usize,
    log: Option<(PathBuf, File)>,
}

/// Append-only store of successful episodes. Zero-return episodes are
/// counted and dropped. Safe for concurrent appends.
#[derive(Debug, Default)]
pub struct TrajectoryStore {
    inner: Mutex<Inner>,
}

impl TrajectoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store that also appends every kept episode to a JSONL file.
    pub fn with_log(path: &Path) -> Result<Self, DataError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| DataError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let store = Self::new();
        store.lock().log = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Returns whether the episode was kept.
    pub fn append(&self, ticket_id: &str, trajectory: Trajectory) -> Result<bool, DataError> {
        let mut inner = self.lock();
        if !trajectory.succeeded() {
            inner.rejected += 1;
            return Ok(false);
        }
        let episode = StoredEpisode { ticket_id: ticket_id.to_string(), trajectory };
        if let Some((path, file)) = inner.log.as_mut() {
            let line = serde_json::to_string(&episode).expect("episode encoding");
            writeln!(file, "{line}")
                .map_err(|e| DataError::Io { path: path.display().to_string(), message: e.to_string() })?;
        }
        *inner.successes.entry(episode.trajectory.instance.template_id.clone()).or_insert(0) += 1;
        inner.episodes.push(episode);
        Ok(true)
    }

    pub fn success_counts(&self) -> BTreeMap<String, usize> {
        self.lock().successes.clone()
    }

    pub fn rejected(&self) -> usize {
        self.lock().rejected
    }

    pub fn len(&self) -> usize {
        self.lock().episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored episodes ordered by ticket id, independent of arrival order.
    pub fn snapshot(&self) -> Vec<StoredEpisode> {
        let mut out = self.lock().episodes.clone();
        out.sort_by(|a, b| a.ticket_id.cmp(&b.ticket_id));
        out
    }

    /// Reads a trajectory log written by [`TrajectoryStore::with_log`].
    pub fn read_log(path: &Path) -> Result<Vec<StoredEpisode>, DataError> {
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| DataError::Io { path: display.clone(), message: e.to_string() })?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| DataError::Io { path: display.clone(), message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| DataError::Corrupt {
                path: display.clone(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Access to file contents at arbitrary points of the history.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::Result;
use crate::git::GitRepo;

pub type Blob = Arc<[u8]>;

pub trait ContentSource: Send + Sync {
    /// Contents of the given blobs. Unknown ids are missing from the map.
    fn blobs(&self, ids: &[&str]) -> Result<HashMap<String, Blob>>;

    /// `(path, blob id)` of every file in the snapshot right before
    /// `commit_id` was applied, sorted by path.
    fn tree_before(&self, commit_id: &str) -> Result<Vec<(String, String)>>;

    fn blob(&self, id: &str) -> Result<Option<Blob>> {
        Ok(self.blobs(&[id])?.remove(id))
    }

    fn text(&self, id: &str) -> Result<Option<String>> {
        Ok(self
            .blob(id)?
            .map(|b| String::from_utf8_lossy(&b).into_owned()))
    }
}

/// Contents read from a git repository, cached in memory.
pub struct GitContent {
    repo: GitRepo,
    cache: Mutex<HashMap<String, Blob>>,
}

impl GitContent {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(GitContent {
            repo: GitRepo::open(path)?,
            cache: Mutex::new(HashMap::new()),
        })
    }
}

impl ContentSource for GitContent {
    fn blobs(&self, ids: &[&str]) -> Result<HashMap<String, Blob>> {
        let mut out = HashMap::new();
        let mut missing = Vec::new();
        {
            let cache = self.cache.lock();
            for &id in ids {
                match cache.get(id) {
                    Some(b) => {
                        out.insert(id.to_string(), b.clone());
                    }
                    None => missing.push(id),
                }
            }
        }
        if !missing.is_empty() {
            let fetched = self.repo.read_blobs(&missing)?;
            let mut cache = self.cache.lock();
            for (id, bytes) in fetched {
                let blob: Blob = bytes.into();
                cache.insert(id.clone(), blob.clone());
                out.insert(id, blob);
            }
        }
        Ok(out)
    }

    fn tree_before(&self, commit_id: &str) -> Result<Vec<(String, String)>> {
        self.repo.tree_files(&format!("{commit_id}^"))
    }
}

/// In-memory contents for tests and synthetic datasets.
#[derive(Default)]
pub struct MemoryContent {
    blobs: HashMap<String, Blob>,
    trees: HashMap<String, Vec<(String, String)>>,
}

impl MemoryContent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_blob(&mut self, id: impl Into<String>, content: impl Into<Vec<u8>>) {
        self.blobs.insert(id.into(), content.into().into());
    }

    pub fn insert_tree_before(&mut self, commit_id: impl Into<String>, mut files: Vec<(String, String)>) {
        files.sort();
        self.trees.insert(commit_id.into(), files);
    }
}

impl ContentSource for MemoryContent {
    fn blobs(&self, ids: &[&str]) -> Result<HashMap<String, Blob>> {
        Ok(ids
            .iter()
            .filter_map(|&id| self.blobs.get(id).map(|b| (id.to_string(), b.clone())))
            .collect())
    }

    fn tree_before(&self, commit_id: &str) -> Result<Vec<(String, String)>> {
        Ok(self.trees.get(commit_id).cloned().unwrap_or_default())
    }
}

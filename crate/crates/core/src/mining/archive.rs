// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::rules::{ObjectiveVector, RuleSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: String,
    pub objectives: ObjectiveVector,
    pub ruleset: RuleSet,
}

/// Mutually nondominated rulesets. A candidate is accepted only when no
/// entry is at least as good in every objective; accepted candidates evict
/// the entries they dominate.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
    generation: u64,
    next_id: u64,
}

/// Immutable view handed to readers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ArchiveSnapshot {
    pub generation: u64,
    pub entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    /// Bumped on every change to the entry set.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, id: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Would `ov` be accepted?
    pub fn admits(&self, ov: &ObjectiveVector) -> bool {
        !self
            .entries
            .iter()
            .any(|e| e.objectives == *ov || e.objectives.dominates(ov))
    }

    pub fn add(&mut self, ruleset: RuleSet, objectives: ObjectiveVector) -> bool {
        if !self.admits(&objectives) {
            return false;
        }
        self.entries.retain(|e| !objectives.dominates(&e.objectives));
        self.next_id += 1;
        self.entries.push(ArchiveEntry {
            id: format!("r{}", self.next_id),
            objectives,
            ruleset,
        });
        self.generation += 1;
        true
    }

    /// Drop entries matching `pred`; returns how many were removed.
    pub fn purge(&mut self, mut pred: impl FnMut(&ArchiveEntry) -> bool) -> usize {
        let before = self.entries.len();
        self.entries.retain(|e| !pred(e));
        let removed = before - self.entries.len();
        if removed > 0 {
            self.generation += 1;
        }
        removed
    }

    /// Re-score every entry and rebuild the front from the new vectors.
    /// Entry ids are kept for survivors.
    pub fn reevaluate(&mut self, mut eval: impl FnMut(&RuleSet) -> ObjectiveVector) {
        let old = std::mem::take(&mut self.entries);
        for mut e in old {
            e.objectives = eval(&e.ruleset);
            if self
                .entries
                .iter()
                .any(|k| k.objectives == e.objectives || k.objectives.dominates(&e.objectives))
            {
                continue;
            }
            self.entries.retain(|k| !e.objectives.dominates(&k.objectives));
            self.entries.push(e);
        }
        self.generation += 1;
    }

    pub fn snapshot(&self) -> Arc<ArchiveSnapshot> {
        Arc::new(ArchiveSnapshot {
            generation: self.generation,
            entries: self.entries.clone(),
        })
    }

    /// Rebuild from stored entries; ids continue after the largest seen.
    pub fn from_entries(entries: Vec<ArchiveEntry>, generation: u64) -> Self {
        let next_id = entries
            .iter()
            .filter_map(|e| e.id.strip_prefix('r')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        ParetoArchive {
            entries,
            generation,
            next_id,
        }
    }
}

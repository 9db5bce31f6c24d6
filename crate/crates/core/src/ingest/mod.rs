// SPDX-License-Identifier: Apache-2.0

//! Repository and ticket-log ingestion.
//!
//! A [`Dataset`] holds the complete first-parent history of the repository
//! (commits without a ticket ID are kept as history-only commits so that
//! tracing can walk across them) and, per ticket, the implementation/review
//! split plus the change-part records of the implementation commits.

mod dataset_io;
mod ticket_log;

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::git::GitRepo;
use crate::remarks::{Remark, TriggerLink};
use crate::scope::LineRange;

pub use dataset_io::{load_dataset, persist_dataset, read_dataset, write_dataset, SCHEMA_VERSION};
pub use ticket_log::{ingest_ticket_log, parse_ticket_log};

/// Files at or above this size are treated as binary.
pub const LARGE_FILE_BYTES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Implementation,
    Review,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangeType {
    Modify,
    Add,
    Rename,
    Delete,
    Copy,
}

impl ChangeType {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeType::Modify => "MODIFY",
            ChangeType::Add => "ADD",
            ChangeType::Rename => "RENAME",
            ChangeType::Delete => "DELETE",
            ChangeType::Copy => "COPY",
        }
    }
}

/// One contiguous changed region, extracted with zero lines of context.
///
/// Line numbers follow the unified-diff convention: for a pure insertion
/// `old_start` is the line after which the new lines were inserted, and for a
/// pure deletion `new_start` is the line after which the old lines used to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub old_lines: Vec<String>,
    pub new_lines: Vec<String>,
}

impl Hunk {
    pub fn new_range(&self) -> Option<LineRange> {
        LineRange::with_len(self.new_start, self.new_len)
    }

    pub fn old_range(&self) -> Option<LineRange> {
        LineRange::with_len(self.old_start, self.old_len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path_old: Option<String>,
    pub path_new: Option<String>,
    pub change_type: ChangeType,
    pub binary: bool,
    /// 0–100; 100 means the content did not change.
    pub similarity: u8,
    pub old_blob: Option<String>,
    pub new_blob: Option<String>,
    pub old_line_count: Option<u32>,
    pub new_line_count: Option<u32>,
    pub hunks: Vec<Hunk>,
}

impl FileChange {
    /// The path the change is filed under: the new path, or the old one for deletions.
    pub fn path(&self) -> &str {
        self.path_new
            .as_deref()
            .or(self.path_old.as_deref())
            .unwrap_or_default()
    }

    /// Whether this change rewrote the content without line-level information.
    pub fn is_opaque(&self) -> bool {
        self.hunks.is_empty() && (self.binary || self.old_blob != self.new_blob)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    /// `None` for commits whose message carries no ticket ID; those are kept
    /// only as history.
    pub ticket_id: Option<String>,
    pub author: String,
    /// Committer time, UTC seconds.
    pub timestamp: i64,
    pub author_timestamp: i64,
    pub author_tz_minutes: i32,
    pub file_changes: Vec<FileChange>,
    pub phase: Option<Phase>,
}

impl CommitRecord {
    pub fn is_implementation_of(&self, ticket: &str) -> bool {
        self.phase == Some(Phase::Implementation) && self.ticket_id.as_deref() == Some(ticket)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TicketState {
    InImplementation,
    ReadyForReview,
    InReview,
    ReviewRejected,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketEvent {
    pub ticket_id: String,
    pub timestamp: i64,
    pub new_state: TicketState,
    pub issue_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketTimeline {
    pub ticket_id: String,
    pub issue_type: Option<String>,
    pub events: Vec<TicketEvent>,
    /// `None` when the ticket never entered review (split at +∞).
    pub split_point: Option<f64>,
    pub commit_ids_impl: Vec<String>,
    pub commit_ids_review: Vec<String>,
}

impl TicketTimeline {
    pub fn phase_at(&self, timestamp: i64) -> Phase {
        match self.split_point {
            Some(split) if timestamp as f64 >= split => Phase::Review,
            _ => Phase::Implementation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ticket {ticket_id}: first review at {review_start} precedes all implementation activity")]
pub struct DegenerateTimeline {
    pub ticket_id: String,
    pub review_start: i64,
}

/// Split a ticket's commits at the midpoint between the end of the last
/// implementation interval before the first review and the start of that review.
///
/// `events` must be timestamp-sorted. Commits exactly at the split point are
/// review commits.
pub fn build_timeline(
    ticket_id: &str,
    events: &[TicketEvent],
    commits: &[(&str, i64)],
) -> Result<TicketTimeline, DegenerateTimeline> {
    let first_review = events
        .iter()
        .position(|e| e.new_state == TicketState::InReview);
    let split_point = match first_review {
        None => None,
        Some(review_idx) => {
            let review_start = events[review_idx].timestamp;
            let last_impl = events[..review_idx]
                .iter()
                .rposition(|e| e.new_state == TicketState::InImplementation)
                .ok_or_else(|| DegenerateTimeline {
                    ticket_id: ticket_id.to_string(),
                    review_start,
                })?;
            // the interval ends with whatever event follows it
            let impl_end = events[last_impl + 1].timestamp;
            Some((impl_end as f64 + review_start as f64) / 2.0)
        }
    };
    let mut timeline = TicketTimeline {
        ticket_id: ticket_id.to_string(),
        issue_type: events.iter().find_map(|e| e.issue_type.clone()),
        events: events.to_vec(),
        split_point,
        commit_ids_impl: Vec::new(),
        commit_ids_review: Vec::new(),
    };
    for &(id, ts) in commits {
        match timeline.phase_at(ts) {
            Phase::Implementation => timeline.commit_ids_impl.push(id.to_string()),
            Phase::Review => timeline.commit_ids_review.push(id.to_string()),
        }
    }
    Ok(timeline)
}

/// One change part of an implementation commit: a hunk, or the whole file for
/// changes without hunks (binary files, pure renames, empty additions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePartRecord {
    pub id: String,
    pub ticket_id: String,
    pub commit_id: String,
    pub file_index: usize,
    pub hunk_index: Option<usize>,
    pub path: String,
    #[serde(skip)]
    pub features: Option<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicketData {
    pub timeline: TicketTimeline,
    pub records: Vec<ChangePartRecord>,
    pub remarks: Vec<Remark>,
    pub trigger_links: Vec<TriggerLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub ticket_id: String,
    pub reason: String,
}

/// Settings the feature values were computed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub ngram_order: usize,
    pub lambda: f64,
    pub entropy_log_base: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub schema_version: u32,
    pub created_at: i64,
    pub repo_path: Option<String>,
    /// Complete first-parent history, oldest first.
    pub commits: Vec<CommitRecord>,
    pub tickets: BTreeMap<String, TicketData>,
    pub excluded_tickets: Vec<Exclusion>,
    pub traced: bool,
    pub feature_settings: Option<FeatureSettings>,
}

impl Dataset {
    pub fn commit_index(&self) -> std::collections::HashMap<&str, usize> {
        self.commits
            .iter()
            .enumerate()
            .map(|(i, c)| (c.commit_id.as_str(), i))
            .collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &ChangePartRecord> {
        self.tickets.values().flat_map(|t| t.records.iter())
    }

    pub fn remarks(&self) -> impl Iterator<Item = &Remark> {
        self.tickets.values().flat_map(|t| t.remarks.iter())
    }

    pub fn record_count(&self) -> usize {
        self.tickets.values().map(|t| t.records.len()).sum()
    }

    pub fn remark_count(&self) -> usize {
        self.tickets.values().map(|t| t.remarks.len()).sum()
    }

    /// Check the structural invariants: unique record ids, links that point at
    /// existing remarks and records of the same ticket.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for ticket in self.tickets.values() {
            for r in &ticket.records {
                if !seen.insert(r.id.as_str()) {
                    return Err(Error::Invalid(format!("duplicate record id {}", r.id)));
                }
            }
        }
        for ticket in self.tickets.values() {
            let own: std::collections::HashSet<&str> =
                ticket.records.iter().map(|r| r.id.as_str()).collect();
            let remarks: std::collections::HashSet<&str> =
                ticket.remarks.iter().map(|r| r.remark_id.as_str()).collect();
            for link in &ticket.trigger_links {
                if !remarks.contains(link.remark_id.as_str()) {
                    return Err(Error::Invalid(format!(
                        "link references unknown remark {}",
                        link.remark_id
                    )));
                }
                if let Some(bad) = link.triggers.iter().find(|t| !own.contains(t.as_str())) {
                    return Err(Error::Invalid(format!(
                        "remark {} links to record {bad} outside its ticket",
                        link.remark_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Commits scanned from a repository.
#[derive(Debug, Clone, Default)]
pub struct ScanOutput {
    /// Every first-parent commit, oldest first.
    pub commits: Vec<CommitRecord>,
    /// Number of commits whose message matched no ticket ID.
    pub skipped: usize,
}

impl ScanOutput {
    pub fn ticket_commits(&self) -> impl Iterator<Item = &CommitRecord> {
        self.commits.iter().filter(|c| c.ticket_id.is_some())
    }
}

pub fn compile_ticket_pattern(pattern: &str) -> Result<Regex> {
    let re = Regex::new(pattern).map_err(|e| Error::Pattern(e.to_string()))?;
    if re.captures_len() != 2 {
        return Err(Error::Pattern(format!(
            "`{pattern}` must have exactly one capture group, found {}",
            re.captures_len() - 1
        )));
    }
    Ok(re)
}

pub fn ticket_id_of(pattern: &Regex, message: &str) -> Option<String> {
    pattern
        .captures(message)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().to_string())
        .filter(|s| !s.is_empty())
}

/// Walk the first-parent history of `repo_path` and assign ticket IDs.
pub fn scan_repository(repo_path: &Path, ticket_pattern: &str) -> Result<ScanOutput> {
    let pattern = compile_ticket_pattern(ticket_pattern)?;
    let repo = GitRepo::open(repo_path)?;
    let raw = repo.first_parent_log()?;
    let mut out = ScanOutput::default();
    for commit in raw {
        let ticket_id = ticket_id_of(&pattern, &commit.message);
        if ticket_id.is_none() {
            out.skipped += 1;
        }
        out.commits.push(CommitRecord {
            commit_id: commit.id,
            ticket_id,
            author: commit.author,
            timestamp: commit.commit_time,
            author_timestamp: commit.author_time,
            author_tz_minutes: commit.author_tz_minutes,
            file_changes: commit.file_changes,
            phase: None,
        });
    }
    if out.skipped > 0 {
        log::info!("{} commits without a ticket ID kept as history only", out.skipped);
    }
    Ok(out)
}

/// Group scanned commits by ticket, split each ticket's timeline, and cut the
/// implementation commits into change-part records.
pub fn assemble_dataset(
    scan: ScanOutput,
    events: &[TicketEvent],
    repo_path: Option<String>,
) -> Dataset {
    let mut commits = scan.commits;
    let mut events_by_ticket: BTreeMap<&str, Vec<TicketEvent>> = BTreeMap::new();
    for e in events {
        events_by_ticket
            .entry(e.ticket_id.as_str())
            .or_default()
            .push(e.clone());
    }
    for evs in events_by_ticket.values_mut() {
        evs.sort_by_key(|e| e.timestamp);
    }

    let mut by_ticket: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in commits.iter().enumerate() {
        if let Some(t) = &c.ticket_id {
            by_ticket.entry(t.clone()).or_default().push(i);
        }
    }

    let mut dataset = Dataset {
        schema_version: SCHEMA_VERSION,
        created_at: commits.iter().map(|c| c.timestamp).max().unwrap_or(0),
        repo_path,
        ..Dataset::default()
    };

    for (ticket_id, idxs) in by_ticket {
        let evs = events_by_ticket
            .get(ticket_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let pairs: Vec<(&str, i64)> = idxs
            .iter()
            .map(|&i| (commits[i].commit_id.as_str(), commits[i].timestamp))
            .collect();
        let timeline = match build_timeline(&ticket_id, evs, &pairs) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("{e}");
                dataset.excluded_tickets.push(Exclusion {
                    ticket_id: ticket_id.clone(),
                    reason: "degenerate timeline: review before implementation".into(),
                });
                continue;
            }
        };
        let mut records = Vec::new();
        for &i in &idxs {
            let phase = timeline.phase_at(commits[i].timestamp);
            commits[i].phase = Some(phase);
            if phase != Phase::Implementation {
                continue;
            }
            let commit = &commits[i];
            for (fi, fc) in commit.file_changes.iter().enumerate() {
                let hunk_indices: Vec<Option<usize>> = if fc.hunks.is_empty() {
                    vec![None]
                } else {
                    (0..fc.hunks.len()).map(Some).collect()
                };
                for hunk_index in hunk_indices {
                    records.push(ChangePartRecord {
                        id: format!("{ticket_id}/cp{}", records.len()),
                        ticket_id: ticket_id.clone(),
                        commit_id: commit.commit_id.clone(),
                        file_index: fi,
                        hunk_index,
                        path: fc.path().to_string(),
                        features: None,
                    });
                }
            }
        }
        dataset.tickets.insert(
            ticket_id,
            TicketData {
                timeline,
                records,
                remarks: Vec::new(),
                trigger_links: Vec::new(),
            },
        );
    }
    dataset.commits = commits;
    dataset
}

/// `extract` end to end: scan, read the ticket log, split, cut records.
pub fn extract(repo_path: &Path, ticket_log: &Path, ticket_pattern: &str) -> Result<Dataset> {
    let scan = scan_repository(repo_path, ticket_pattern)?;
    let events = ingest_ticket_log(ticket_log)?;
    let repo = std::fs::canonicalize(repo_path).map_err(|e| Error::io(repo_path, e))?;
    Ok(assemble_dataset(
        scan,
        &events,
        Some(repo.to_string_lossy().into_owned()),
    ))
}

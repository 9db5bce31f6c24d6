// SPDX-License-Identifier: Apache-2.0

//! Review remarks and their potential triggers.
//!
//! Every hunk of a review commit is a raw remark. Raw remarks of the same
//! commit with the same normalized text are merged, and whitespace, import
//! and generated-file remarks are dropped before tracing.

mod trace;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::features::patterns;
use crate::ingest::{CommitRecord, FileChange};
use crate::scope::{extension, LineRange, ScopeVariant};

pub use trace::{
    clean_dataset, parse_exclusion_list, trace_dataset, trace_remark_units, trace_ticket,
    trace_with_scope, unit_starts, RecordMap, TraceContext, TraceOutcome, TraceStats, TracedUnit,
    UnitStart,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindFlags {
    pub whitespace_only: bool,
    pub import_only: bool,
    pub derived: bool,
}

/// One raw hunk (or hunk-less file change) that was merged into a remark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemarkPart {
    pub file_index: usize,
    pub hunk_index: Option<usize>,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Remark {
    pub remark_id: String,
    pub ticket_id: String,
    pub review_commit_id: String,
    /// Path of the first merged part.
    pub file: String,
    /// New-side lines of the first merged part, if it has any.
    pub line_range: Option<LineRange>,
    pub content_key: String,
    pub kind_flags: KindFlags,
    pub merged_count: usize,
    pub parts: Vec<RemarkPart>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerLink {
    pub remark_id: String,
    /// Potential triggers; empty when `whole_ticket` is set.
    pub triggers: BTreeSet<String>,
    /// Every record of the ticket is a potential trigger.
    pub whole_ticket: bool,
    pub found_at_scope: ScopeVariant,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub whitespace_only: usize,
    pub import_only: usize,
    pub derived: usize,
}

impl FilterCounts {
    pub fn add(&mut self, other: &FilterCounts) {
        self.whitespace_only += other.whitespace_only;
        self.import_only += other.import_only;
        self.derived += other.derived;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemarkConfig {
    /// Extensions of generated files whose changes are not remarks.
    pub derived_extensions: Vec<String>,
}

impl Default for RemarkConfig {
    fn default() -> Self {
        RemarkConfig {
            derived_extensions: vec!["jav".into()],
        }
    }
}

fn normalize_lines(lines: &[String]) -> String {
    lines
        .iter()
        .map(|l| l.trim())
        .collect::<Vec<_>>()
        .join("\n")
}

fn part_key(fc: &FileChange, hunk_index: Option<usize>) -> String {
    match hunk_index {
        Some(h) => {
            let hunk = &fc.hunks[h];
            format!(
                "{}\0{}",
                normalize_lines(&hunk.old_lines),
                normalize_lines(&hunk.new_lines)
            )
        }
        // hunk-less changes never merge
        None => format!("\u{1}{}\0{}", fc.change_type.as_str(), fc.path()),
    }
}

fn part_flags(fc: &FileChange, hunk_index: Option<usize>, config: &RemarkConfig) -> KindFlags {
    let ext = extension(fc.path());
    let derived = config
        .derived_extensions
        .iter()
        .any(|d| d.eq_ignore_ascii_case(ext));
    match hunk_index {
        Some(h) => {
            let hunk = &fc.hunks[h];
            let ws = patterns::whitespace_only(&hunk.old_lines, &hunk.new_lines);
            KindFlags {
                whitespace_only: ws,
                import_only: !ws && patterns::import_only(&hunk.old_lines, &hunk.new_lines),
                derived,
            }
        }
        None => KindFlags {
            derived,
            ..KindFlags::default()
        },
    }
}

/// Turn the hunks of a ticket's review commits into merged, filtered remarks.
pub fn extract_remarks(
    ticket_id: &str,
    review_commits: &[&CommitRecord],
    config: &RemarkConfig,
) -> (Vec<Remark>, FilterCounts) {
    let mut remarks: Vec<Remark> = Vec::new();
    let mut counts = FilterCounts::default();
    for commit in review_commits {
        let mut merged: Vec<Remark> = Vec::new();
        let mut by_key: BTreeMap<String, usize> = BTreeMap::new();
        for (fi, fc) in commit.file_changes.iter().enumerate() {
            let parts: Vec<Option<usize>> = if fc.hunks.is_empty() {
                vec![None]
            } else {
                (0..fc.hunks.len()).map(Some).collect()
            };
            for hi in parts {
                let key = part_key(fc, hi);
                let flags = part_flags(fc, hi, config);
                let part = RemarkPart {
                    file_index: fi,
                    hunk_index: hi,
                    path: fc.path().to_string(),
                };
                match by_key.get(&key) {
                    Some(&i) => {
                        let r = &mut merged[i];
                        r.merged_count += 1;
                        r.kind_flags.derived &= flags.derived;
                        r.parts.push(part);
                    }
                    None => {
                        by_key.insert(key.clone(), merged.len());
                        merged.push(Remark {
                            remark_id: String::new(),
                            ticket_id: ticket_id.to_string(),
                            review_commit_id: commit.commit_id.clone(),
                            file: fc.path().to_string(),
                            line_range: hi.and_then(|h| fc.hunks[h].new_range()),
                            content_key: key,
                            kind_flags: flags,
                            merged_count: 1,
                            parts: vec![part],
                        });
                    }
                }
            }
        }
        for r in merged {
            if r.kind_flags.whitespace_only {
                counts.whitespace_only += 1;
            } else if r.kind_flags.import_only {
                counts.import_only += 1;
            } else if r.kind_flags.derived {
                counts.derived += 1;
            } else {
                remarks.push(r);
            }
        }
    }
    for (i, r) in remarks.iter_mut().enumerate() {
        r.remark_id = format!("{ticket_id}/rm{i}");
    }
    (remarks, counts)
}

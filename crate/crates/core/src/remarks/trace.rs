// SPDX-License-Identifier: Apache-2.0

//! Tracing remarks back to the implementation change parts of their ticket.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_remarks, FilterCounts, Remark, RemarkConfig, TriggerLink};
use crate::content::ContentSource;
use crate::error::Result;
use crate::history::{HistoryIndex, Region, Touch};
use crate::ingest::{ChangeType, CommitRecord, Dataset, Exclusion, FileChange, TicketData};
use crate::scope::{build_scope_tree_for_path, expand, LineRange, Scope, ScopeTree, ScopeVariant};

/// Record ids of one ticket keyed by their position in the history.
pub struct RecordMap {
    by_part: HashMap<(usize, usize, Option<usize>), String>,
    by_file: HashMap<(usize, usize), Vec<String>>,
    all: Vec<String>,
}

impl RecordMap {
    pub fn new(ticket: &TicketData, commit_pos: &HashMap<&str, usize>) -> Self {
        let mut by_part = HashMap::new();
        let mut by_file: HashMap<(usize, usize), Vec<String>> = HashMap::new();
        for r in &ticket.records {
            let Some(&ci) = commit_pos.get(r.commit_id.as_str()) else {
                continue;
            };
            by_part.insert((ci, r.file_index, r.hunk_index), r.id.clone());
            by_file.entry((ci, r.file_index)).or_default().push(r.id.clone());
        }
        RecordMap {
            by_part,
            by_file,
            all: ticket.records.iter().map(|r| r.id.clone()).collect(),
        }
    }

    /// Records of the touched change parts.
    pub fn touched(&self, touch: &Touch) -> Vec<String> {
        if touch.whole_file || touch.hunks.is_empty() {
            return self
                .by_file
                .get(&(touch.commit, touch.file))
                .cloned()
                .unwrap_or_default();
        }
        touch
            .hunks
            .iter()
            .filter_map(|&h| self.by_part.get(&(touch.commit, touch.file, Some(h))).cloned())
            .collect()
    }

    pub fn all(&self) -> &[String] {
        &self.all
    }
}

/// Shared read-only state for tracing one dataset.
pub struct TraceContext<'a> {
    pub commits: &'a [CommitRecord],
    pub index: HistoryIndex<'a>,
    pub commit_pos: HashMap<&'a str, usize>,
    pub content: &'a dyn ContentSource,
}

impl<'a> TraceContext<'a> {
    pub fn new(dataset: &'a Dataset, content: &'a dyn ContentSource) -> Self {
        TraceContext {
            commits: &dataset.commits,
            index: HistoryIndex::new(&dataset.commits),
            commit_pos: dataset.commit_index(),
            content,
        }
    }
}

/// Where tracing of one remark line (or file) begins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitStart {
    WholeTicket,
    Scope {
        path: String,
        scope: Scope,
        old_blob: Option<String>,
        old_line_count: Option<u32>,
    },
}

/// Result of tracing one starting scope, expanded as needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracedUnit {
    pub line: Option<u32>,
    pub triggers: BTreeSet<String>,
    pub whole_ticket: bool,
    pub scope: ScopeVariant,
}

/// Starting scopes for one part of a review commit.
pub fn unit_starts(fc: &FileChange, hunk_index: Option<usize>) -> Vec<(Option<u32>, UnitStart)> {
    if fc.change_type == ChangeType::Add {
        return vec![(None, UnitStart::WholeTicket)];
    }
    let path = fc
        .path_old
        .clone()
        .unwrap_or_else(|| fc.path().to_string());
    let start = |scope: Scope| UnitStart::Scope {
        path: path.clone(),
        scope,
        old_blob: fc.old_blob.clone(),
        old_line_count: fc.old_line_count,
    };
    let hunk = match hunk_index {
        Some(h) if fc.change_type != ChangeType::Delete && !fc.binary => &fc.hunks[h],
        _ => return vec![(None, start(Scope::File))],
    };
    let lines: Vec<u32> = match hunk.old_range() {
        Some(r) => r.lines().collect(),
        None if fc.old_line_count == Some(0) => return vec![(None, start(Scope::File))],
        None => vec![hunk.old_start.max(1)],
    };
    lines
        .into_iter()
        .map(|l| {
            (
                Some(l),
                start(Scope::LineRange {
                    range: LineRange::single(l),
                }),
            )
        })
        .collect()
}

/// Collect triggers for one scope: every earlier change to the region made
/// by an implementation commit of `ticket_id`. The walk does not stop at the
/// first trigger, and changes by other commits are passed over.
pub fn trace_with_scope(
    ctx: &TraceContext<'_>,
    ticket_id: &str,
    records: &RecordMap,
    path: &str,
    scope: &Scope,
    before: usize,
) -> BTreeSet<String> {
    let region = match scope.range() {
        Some(r) => Region::Lines(r),
        None => Region::File,
    };
    let mut found = BTreeSet::new();
    ctx.index.walk_back(path, region, before, |touch| {
        if ctx.commits[touch.commit].is_implementation_of(ticket_id) {
            found.extend(records.touched(touch));
        }
        ControlFlow::Continue(())
    });
    found
}

struct TreeCache<'c> {
    content: &'c dyn ContentSource,
    trees: HashMap<(String, String), ScopeTree>,
    errors: Vec<String>,
}

impl<'c> TreeCache<'c> {
    fn get(&mut self, path: &str, blob: Option<&str>, line_count: Option<u32>) -> &ScopeTree {
        let key = (path.to_string(), blob.unwrap_or_default().to_string());
        if !self.trees.contains_key(&key) {
            let fallback = || ScopeTree::plain(line_count.unwrap_or(0));
            let tree = match blob {
                None => fallback(),
                Some(id) => match self.content.text(id) {
                    Ok(Some(text)) => build_scope_tree_for_path(&text, path),
                    Ok(None) => {
                        self.errors.push(format!("{path}: blob {id} not available"));
                        fallback()
                    }
                    Err(e) => {
                        self.errors.push(format!("{path}: {e}"));
                        fallback()
                    }
                },
            };
            self.trees.insert(key.clone(), tree);
        }
        &self.trees[&key]
    }
}

fn trace_unit(
    ctx: &TraceContext<'_>,
    ticket_id: &str,
    records: &RecordMap,
    trees: &mut TreeCache<'_>,
    line: Option<u32>,
    start: &UnitStart,
    before: usize,
) -> TracedUnit {
    let whole = TracedUnit {
        line,
        triggers: BTreeSet::new(),
        whole_ticket: true,
        scope: ScopeVariant::WholeTicket,
    };
    let UnitStart::Scope {
        path,
        scope,
        old_blob,
        old_line_count,
    } = start
    else {
        return whole;
    };
    let mut scope = *scope;
    loop {
        let triggers = trace_with_scope(ctx, ticket_id, records, path, &scope, before);
        if !triggers.is_empty() {
            return TracedUnit {
                line,
                triggers,
                whole_ticket: false,
                scope: scope.variant(),
            };
        }
        if scope == Scope::File {
            return whole;
        }
        let tree = trees.get(path, old_blob.as_deref(), *old_line_count);
        match expand(&scope, tree) {
            Some(next) => scope = next,
            None => return whole,
        }
    }
}

/// Per-unit trace results of one remark, in part and line order.
pub fn trace_remark_units(
    ctx: &TraceContext<'_>,
    ticket_id: &str,
    records: &RecordMap,
    remark: &Remark,
    errors: &mut Vec<String>,
) -> Vec<TracedUnit> {
    let Some(&before) = ctx.commit_pos.get(remark.review_commit_id.as_str()) else {
        errors.push(format!("{}: review commit not in history", remark.remark_id));
        return Vec::new();
    };
    let commit = &ctx.commits[before];
    let mut trees = TreeCache {
        content: ctx.content,
        trees: HashMap::new(),
        errors: Vec::new(),
    };
    let mut units = Vec::new();
    for part in &remark.parts {
        let fc = &commit.file_changes[part.file_index];
        for (line, start) in unit_starts(fc, part.hunk_index) {
            units.push(trace_unit(ctx, ticket_id, records, &mut trees, line, &start, before));
        }
    }
    errors.extend(
        trees
            .errors
            .into_iter()
            .map(|e| format!("{}: {e}", remark.remark_id)),
    );
    units
}

fn link_from_units(remark_id: &str, units: &[TracedUnit]) -> TriggerLink {
    let whole_ticket = units.is_empty() || units.iter().any(|u| u.whole_ticket);
    let found_at_scope = units
        .iter()
        .map(|u| u.scope)
        .max()
        .unwrap_or(ScopeVariant::WholeTicket);
    TriggerLink {
        remark_id: remark_id.to_string(),
        triggers: if whole_ticket {
            BTreeSet::new()
        } else {
            units.iter().flat_map(|u| u.triggers.iter().cloned()).collect()
        },
        whole_ticket,
        found_at_scope,
    }
}

/// Trace every remark of one ticket.
pub fn trace_ticket(
    ctx: &TraceContext<'_>,
    ticket: &TicketData,
    remarks: &[Remark],
) -> (Vec<TriggerLink>, Vec<String>) {
    let records = RecordMap::new(ticket, &ctx.commit_pos);
    let mut errors = Vec::new();
    let links = remarks
        .iter()
        .map(|r| {
            let units = trace_remark_units(ctx, &ticket.timeline.ticket_id, &records, r, &mut errors);
            link_from_units(&r.remark_id, &units)
        })
        .collect();
    (links, errors)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    pub tickets: usize,
    pub records: usize,
    pub remarks: usize,
    pub raw_remark_parts: usize,
    pub filtered: FilterCounts,
    /// Remarks per largest scope needed to find a trigger.
    pub by_scope: BTreeMap<ScopeVariant, usize>,
    pub errors: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TraceOutcome {
    pub stats: TraceStats,
    pub errors: Vec<String>,
}

/// Extract and trace the remarks of every ticket, replacing any previous
/// tracing result.
pub fn trace_dataset(
    dataset: &mut Dataset,
    content: &dyn ContentSource,
    config: &RemarkConfig,
) -> Result<TraceOutcome> {
    type TicketResult = (String, Vec<Remark>, Vec<TriggerLink>, FilterCounts, Vec<String>);
    let results: Vec<TicketResult> = {
        let ctx = TraceContext::new(dataset, content);
        dataset
            .tickets
            .par_iter()
            .map(|(id, ticket)| {
                let review: Vec<&CommitRecord> = ticket
                    .timeline
                    .commit_ids_review
                    .iter()
                    .filter_map(|c| ctx.commit_pos.get(c.as_str()).map(|&i| &ctx.commits[i]))
                    .collect();
                let (remarks, counts) = extract_remarks(id, &review, config);
                let (links, errors) = trace_ticket(&ctx, ticket, &remarks);
                (id.clone(), remarks, links, counts, errors)
            })
            .collect()
    };

    let mut outcome = TraceOutcome::default();
    for (id, remarks, links, counts, errors) in results {
        let stats = &mut outcome.stats;
        stats.tickets += 1;
        stats.remarks += remarks.len();
        stats.raw_remark_parts += remarks.iter().map(|r| r.merged_count).sum::<usize>();
        stats.filtered.add(&counts);
        for l in &links {
            *stats.by_scope.entry(l.found_at_scope).or_default() += 1;
        }
        stats.errors += errors.len();
        outcome.errors.extend(errors);
        let ticket = dataset.tickets.get_mut(&id).expect("ticket exists");
        stats.records += ticket.records.len();
        ticket.remarks = remarks;
        ticket.trigger_links = links;
    }
    dataset.traced = true;
    Ok(outcome)
}

/// Move the listed tickets out of the dataset. Unknown ids are logged and
/// ignored.
pub fn clean_dataset(mut dataset: Dataset, exclusions: &[(String, String)]) -> Dataset {
    for (id, reason) in exclusions {
        if dataset.tickets.remove(id).is_some() {
            dataset.excluded_tickets.push(Exclusion {
                ticket_id: id.clone(),
                reason: reason.clone(),
            });
        } else {
            log::warn!("cannot exclude unknown ticket {id}");
        }
    }
    dataset
}

/// One ticket per line, optionally followed by a comma or tab and a reason.
/// Blank lines and `#` comments are ignored.
pub fn parse_exclusion_list(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| match l.split_once([',', '\t']) {
            Some((id, reason)) => (id.trim().to_string(), reason.trim().to_string()),
            None => (l.to_string(), "manual exclusion".to_string()),
        })
        .collect()
}

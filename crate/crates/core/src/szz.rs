// SPDX-License-Identifier: Apache-2.0

//! Plain blame-style tracing and its agreement with the remark tracer.
//!
//! Each remark line is followed back to the single commit that last changed
//! it. There is no skipping of foreign commits and no scope expansion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::content::ContentSource;
use crate::error::{Error, Result};
use crate::history::Region;
use crate::ingest::Dataset;
use crate::remarks::{trace_remark_units, unit_starts, RecordMap, Remark, TraceContext, UnitStart};
use crate::scope::extension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Same,
    Incomplete,
    DifferentStuck,
    DifferentNoScope,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Same,
        Category::Incomplete,
        Category::DifferentStuck,
        Category::DifferentNoScope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Same => "SAME",
            Category::Incomplete => "INCOMPLETE",
            Category::DifferentStuck => "DIFFERENT_STUCK",
            Category::DifferentNoScope => "DIFFERENT_NO_SCOPE",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SzzResult {
    /// Commits found for the traced lines, sorted and deduplicated.
    pub found_commits: Vec<String>,
    /// Records of the found change parts that belong to the remark's ticket.
    pub found_hunks: BTreeSet<String>,
    /// Some found commit is not an implementation commit of the ticket.
    pub foreign: bool,
}

impl SzzResult {
    fn merge(&mut self, other: SzzResult) {
        self.found_commits.extend(other.found_commits);
        self.found_commits.sort();
        self.found_commits.dedup();
        self.found_hunks.extend(other.found_hunks);
        self.foreign |= other.foreign;
    }
}

fn szz_unit(
    ctx: &TraceContext<'_>,
    ticket_id: &str,
    records: &RecordMap,
    start: &UnitStart,
    before: usize,
) -> SzzResult {
    let UnitStart::Scope { path, scope, .. } = start else {
        return SzzResult::default();
    };
    let region = match scope.range() {
        Some(r) => Region::Lines(r),
        None => Region::File,
    };
    let mut result = SzzResult::default();
    ctx.index.walk_back(path, region, before, |touch| {
        let commit = &ctx.commits[touch.commit];
        result.found_commits.push(commit.commit_id.clone());
        if commit.is_implementation_of(ticket_id) {
            result.found_hunks.extend(records.touched(touch));
        } else {
            result.foreign = true;
        }
        ControlFlow::Break(())
    });
    result
}

/// Last change to every line of the remark before its review commit.
pub fn szz_trace(ctx: &TraceContext<'_>, records: &RecordMap, remark: &Remark) -> SzzResult {
    let mut result = SzzResult::default();
    let Some(&before) = ctx.commit_pos.get(remark.review_commit_id.as_str()) else {
        return result;
    };
    let commit = &ctx.commits[before];
    for part in &remark.parts {
        let fc = &commit.file_changes[part.file_index];
        for (_, start) in unit_starts(fc, part.hunk_index) {
            result.merge(szz_unit(ctx, &remark.ticket_id, records, &start, before));
        }
    }
    result
}

/// Compare our trigger set with the blame result. `ours` is the full set of
/// potential triggers, with whole-ticket links already expanded.
pub fn classify(ours: &BTreeSet<String>, szz: &SzzResult) -> Category {
    if szz.found_commits.is_empty() {
        Category::DifferentNoScope
    } else if szz.foreign {
        Category::DifferentStuck
    } else if &szz.found_hunks == ours {
        Category::Same
    } else {
        Category::Incomplete
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub remark_id: String,
    /// Line of the remark in per-line mode.
    pub line: Option<u32>,
    pub file: String,
    pub category: Category,
}

/// Classify every remark (or, with `per_line`, every traced remark line).
pub fn szz_compare(
    dataset: &Dataset,
    content: &dyn ContentSource,
    per_line: bool,
) -> Result<Vec<Comparison>> {
    if !dataset.traced {
        return Err(Error::NotTraced("run `trace` before comparing with SZZ".into()));
    }
    let ctx = TraceContext::new(dataset, content);
    let mut out = Vec::new();
    for ticket in dataset.tickets.values() {
        let records = RecordMap::new(ticket, &ctx.commit_pos);
        let all: BTreeSet<String> = records.all().iter().cloned().collect();
        let links: BTreeMap<&str, _> = ticket
            .trigger_links
            .iter()
            .map(|l| (l.remark_id.as_str(), l))
            .collect();
        for remark in &ticket.remarks {
            if per_line {
                let Some(&before) = ctx.commit_pos.get(remark.review_commit_id.as_str()) else {
                    continue;
                };
                let commit = &ctx.commits[before];
                let mut errors = Vec::new();
                let units =
                    trace_remark_units(&ctx, &remark.ticket_id, &records, remark, &mut errors);
                let starts = remark.parts.iter().flat_map(|p| {
                    let path = p.path.clone();
                    unit_starts(&commit.file_changes[p.file_index], p.hunk_index)
                        .into_iter()
                        .map(move |s| (path.clone(), s))
                });
                for ((path, (_, start)), unit) in starts.zip(&units) {
                    let ours = if unit.whole_ticket {
                        all.clone()
                    } else {
                        unit.triggers.clone()
                    };
                    let szz = szz_unit(&ctx, &remark.ticket_id, &records, &start, before);
                    out.push(Comparison {
                        remark_id: remark.remark_id.clone(),
                        line: unit.line,
                        file: path,
                        category: classify(&ours, &szz),
                    });
                }
            } else {
                let Some(link) = links.get(remark.remark_id.as_str()) else {
                    continue;
                };
                let ours = if link.whole_ticket {
                    all.clone()
                } else {
                    link.triggers.clone()
                };
                let szz = szz_trace(&ctx, &records, remark);
                out.push(Comparison {
                    remark_id: remark.remark_id.clone(),
                    line: None,
                    file: remark.file.clone(),
                    category: classify(&ours, &szz),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub total: usize,
    pub counts: BTreeMap<Category, usize>,
    pub percentages: BTreeMap<Category, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzzReport {
    pub all: CategorySummary,
    pub extension: String,
    pub filtered: CategorySummary,
}

pub fn summarize_categories<'a>(categories: impl IntoIterator<Item = &'a Category>) -> CategorySummary {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    let mut total = 0;
    for c in categories {
        *counts.get_mut(c).expect("all categories present") += 1;
        total += 1;
    }
    let percentages = counts
        .iter()
        .map(|(&c, &n)| {
            let p = if total == 0 {
                0.0
            } else {
                100.0 * n as f64 / total as f64
            };
            (c, p)
        })
        .collect();
    CategorySummary {
        total,
        counts,
        percentages,
    }
}

/// Category shares over all comparisons and over those in files with the
/// given extension.
pub fn summarize(comparisons: &[Comparison], ext: &str) -> SzzReport {
    let ext = ext.trim_start_matches('.');
    SzzReport {
        all: summarize_categories(comparisons.iter().map(|c| &c.category)),
        extension: ext.to_string(),
        filtered: summarize_categories(
            comparisons
                .iter()
                .filter(|c| extension(&c.file).eq_ignore_ascii_case(ext))
                .map(|c| &c.category),
        ),
    }
}

impl SzzReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header_ext = format!(".{} files", self.extension);
        let _ = writeln!(out, "{:<20} {:>16} {:>16}", "category", "all", header_ext);
        for c in Category::ALL {
            let cell = |s: &CategorySummary| format!("{} ({:.1}%)", s.counts[&c], s.percentages[&c]);
            let _ = writeln!(out, "{:<20} {:>16} {:>16}", c.as_str(), cell(&self.all), cell(&self.filtered));
        }
        let _ = writeln!(out, "{:<20} {:>16} {:>16}", "total", self.all.total, self.filtered.total);
        out
    }
}

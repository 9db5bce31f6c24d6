// SPDX-License-Identifier: Apache-2.0

//! Backward walks through the change history of one file.
//!
//! Line ranges are carried across intervening commits with hunk-offset
//! arithmetic on the zero-context hunks already stored in the dataset.

use std::collections::HashMap;
use std::ops::ControlFlow;

use crate::ingest::{ChangeType, CommitRecord, FileChange, Hunk};
use crate::scope::LineRange;

/// Part of a file being followed backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Lines(LineRange),
    File,
}

/// A previous change that touched the followed region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Touch {
    pub commit: usize,
    pub file: usize,
    /// Indices of the touching hunks; empty when `whole_file` is set.
    pub hunks: Vec<usize>,
    /// The change has no hunks (binary, oversize or pure rename).
    pub whole_file: bool,
}

/// Per-path index of file changes over the whole first-parent history.
pub struct HistoryIndex<'a> {
    commits: &'a [CommitRecord],
    by_path: HashMap<&'a str, Vec<(usize, usize)>>,
}

impl<'a> HistoryIndex<'a> {
    pub fn new(commits: &'a [CommitRecord]) -> Self {
        let mut by_path: HashMap<&str, Vec<(usize, usize)>> = HashMap::new();
        for (ci, c) in commits.iter().enumerate() {
            for (fi, fc) in c.file_changes.iter().enumerate() {
                if let Some(p) = fc.path_new.as_deref() {
                    by_path.entry(p).or_default().push((ci, fi));
                }
            }
        }
        HistoryIndex { commits, by_path }
    }

    pub fn commits(&self) -> &'a [CommitRecord] {
        self.commits
    }

    /// Changes that produced `path`, oldest first.
    pub fn changes_to(&self, path: &str) -> &[(usize, usize)] {
        self.by_path.get(path).map(Vec::as_slice).unwrap_or(&[])
    }

    fn last_change_before(&self, path: &str, before: usize) -> Option<(usize, usize)> {
        let list = self.changes_to(path);
        let n = list.partition_point(|&(ci, _)| ci < before);
        n.checked_sub(1).map(|i| list[i])
    }

    /// Visit every earlier change touching `region` of `path` as it existed
    /// right before commit `before`, newest first. The walk follows renames
    /// and copies and stops at the file's creation, when the tracked lines
    /// vanish, or when `visit` breaks.
    pub fn walk_back<F>(&self, path: &str, region: Region, before: usize, mut visit: F)
    where
        F: FnMut(&Touch) -> ControlFlow<()>,
    {
        let mut path = path;
        let mut region = region;
        let mut pos = before;
        while let Some((ci, fi)) = self.last_change_before(path, pos) {
            pos = ci;
            let fc = &self.commits[ci].file_changes[fi];
            let mut next_region = Some(region);
            let touch = match region {
                Region::File => Some(Touch {
                    commit: ci,
                    file: fi,
                    hunks: (0..fc.hunks.len()).collect(),
                    whole_file: fc.hunks.is_empty(),
                }),
                Region::Lines(_) if fc.hunks.is_empty() => {
                    if fc.is_opaque() {
                        next_region = None;
                        Some(Touch {
                            commit: ci,
                            file: fi,
                            hunks: Vec::new(),
                            whole_file: true,
                        })
                    } else {
                        None
                    }
                }
                Region::Lines(range) => {
                    let hunks: Vec<usize> = fc
                        .hunks
                        .iter()
                        .enumerate()
                        .filter(|(_, h)| hunk_touches(h, &range))
                        .map(|(i, _)| i)
                        .collect();
                    next_region = remap_to_old(&fc.hunks, &range).map(Region::Lines);
                    (!hunks.is_empty()).then_some(Touch {
                        commit: ci,
                        file: fi,
                        hunks,
                        whole_file: false,
                    })
                }
            };
            if let Some(t) = touch {
                if visit(&t).is_break() {
                    return;
                }
            }
            let Some(r) = next_region else {
                return;
            };
            region = r;
            match previous_path(fc) {
                Some(p) => path = p,
                None => return,
            }
        }
    }
}

/// Path the file had before `fc`, or `None` when `fc` created it.
fn previous_path(fc: &FileChange) -> Option<&str> {
    match fc.change_type {
        ChangeType::Add => None,
        _ => fc.path_old.as_deref(),
    }
}

/// Whether a hunk changes any line of `range` (new-side coordinates). A pure
/// deletion touches the range when it removed lines strictly inside it.
pub fn hunk_touches(h: &Hunk, range: &LineRange) -> bool {
    match h.new_range() {
        Some(r) => r.intersects(range),
        None => range.start <= h.new_start && h.new_start < range.end,
    }
}

/// Map a new-side range to the old side of the same diff. Lines inside a
/// modification map to its whole old range; lines added by the diff vanish.
/// Returns the hull of the mapped lines, or `None` when nothing survives.
pub fn remap_to_old(hunks: &[Hunk], range: &LineRange) -> Option<LineRange> {
    let mut lo: Option<i64> = None;
    let mut hi: Option<i64> = None;
    let (a, b) = (i64::from(range.start), i64::from(range.end));
    let mut take = |from: i64, to: i64| {
        if from <= to {
            lo = Some(lo.map_or(from, |v: i64| v.min(from)));
            hi = Some(hi.map_or(to, |v: i64| v.max(to)));
        }
    };
    // Unchanged lines in [from, to] of the new side, shifted by delta.
    let gap = |from: i64, to: i64, delta: i64, take: &mut dyn FnMut(i64, i64)| {
        let (s, e) = (from.max(a), to.min(b));
        if s <= e {
            take(s + delta, e + delta);
        }
    };
    let mut delta: i64 = 0;
    let mut prev_end: i64 = 0;
    for h in hunks {
        let ns = i64::from(h.new_start);
        let nl = i64::from(h.new_len);
        let os = i64::from(h.old_start);
        let ol = i64::from(h.old_len);
        if nl == 0 {
            gap(prev_end + 1, ns, delta, &mut take);
            prev_end = ns;
        } else {
            gap(prev_end + 1, ns - 1, delta, &mut take);
            let (he, overlaps) = (ns + nl - 1, ns <= b && a <= ns + nl - 1);
            if overlaps && ol > 0 {
                take(os, os + ol - 1);
            }
            prev_end = he;
        }
        delta += ol - nl;
    }
    gap(prev_end + 1, i64::MAX / 4, delta, &mut take);
    match (lo, hi) {
        (Some(l), Some(h)) if l >= 1 => Some(LineRange::new(l as u32, h as u32)),
        _ => None,
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ngram::{aggregate, NgramModel};
use super::patterns;
use super::tokenize::{tokenize, tokenize_lines};
use super::{FeatureValue, FeatureVector};
use crate::content::ContentSource;
use crate::error::{Error, Result};
use crate::history::{HistoryIndex, Region};
use crate::ingest::{
    ChangeType, CommitRecord, Dataset, FeatureSettings, FileChange, Hunk, TicketData,
    LARGE_FILE_BYTES,
};
use crate::scope::{extension, FileKind};

const DAY: i64 = 86_400;
const OWNERSHIP_WINDOW: i64 = 365 * DAY;
const FREQUENT_FILENAMES: usize = 20;
const WEEKDAYS: [&str; 7] = [
    "Sunday",
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
];

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            ngram_order: 3,
            lambda: 0.5,
            entropy_log_base: 2.0,
        }
    }
}

pub fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

/// First path segment, or `None` for files at the repository root.
pub fn project_of(path: &str) -> Option<&str> {
    path.split_once('/').map(|(p, _)| p)
}

pub fn srcdir_of(path: &str) -> &'static str {
    let lower = path.to_ascii_lowercase();
    let segments: Vec<&str> = lower.split('/').collect();
    let (dirs, file) = segments.split_at(segments.len() - 1);
    let stem = file[0].split('.').next().unwrap_or_default();
    if dirs.iter().any(|s| *s == "testdata" || *s == "test-data") {
        "testdata"
    } else if dirs.iter().any(|s| *s == "test" || *s == "tests")
        || stem.ends_with("test")
        || stem.ends_with("tests")
    {
        "test"
    } else if dirs.contains(&"resources") {
        "resources"
    } else {
        "src"
    }
}

pub fn is_node_modules(path: &str) -> bool {
    path.split('/').any(|s| s == "node_modules")
}

/// Local weekday name and hour shifted so that 06:00 is 0.
pub fn author_day_and_shifted_hour(timestamp: i64, tz_minutes: i32) -> (&'static str, u32) {
    let local = timestamp + i64::from(tz_minutes) * 60;
    let day = WEEKDAYS[(local.div_euclid(DAY) + 4).rem_euclid(7) as usize];
    let hour = local.rem_euclid(DAY) / 3600;
    (day, ((hour + 18) % 24) as u32)
}

/// Dataset-wide lookups shared by all records.
pub struct FeatureContext<'a> {
    commits: &'a [CommitRecord],
    index: HistoryIndex<'a>,
    commit_pos: HashMap<&'a str, usize>,
    frequent: HashSet<String>,
    /// Commit positions touching each project ("" for root files).
    project_commits: HashMap<String, Vec<usize>>,
    file_remarks: HashMap<String, Vec<usize>>,
    author_project_remarks: HashMap<(String, String), Vec<usize>>,
    content: &'a dyn ContentSource,
    settings: FeatureSettings,
}

impl<'a> FeatureContext<'a> {
    pub fn new(dataset: &'a Dataset, content: &'a dyn ContentSource, settings: FeatureSettings) -> Self {
        let commits = dataset.commits.as_slice();
        let commit_pos = dataset.commit_index();

        let mut paths_by_name: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in dataset.records() {
            paths_by_name
                .entry(basename(&r.path))
                .or_default()
                .insert(r.path.as_str());
        }
        let mut ranked: Vec<(&str, usize)> =
            paths_by_name.iter().map(|(n, p)| (*n, p.len())).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let frequent = ranked
            .into_iter()
            .take(FREQUENT_FILENAMES)
            .map(|(n, _)| n.to_string())
            .collect();

        let mut project_commits: HashMap<String, Vec<usize>> = HashMap::new();
        for (ci, c) in commits.iter().enumerate() {
            let projects: BTreeSet<&str> = c
                .file_changes
                .iter()
                .map(|fc| project_of(fc.path()).unwrap_or_default())
                .collect();
            for p in projects {
                project_commits.entry(p.to_string()).or_default().push(ci);
            }
        }

        let mut file_remarks: HashMap<String, Vec<usize>> = HashMap::new();
        let mut author_project_remarks: HashMap<(String, String), Vec<usize>> = HashMap::new();
        for ticket in dataset.tickets.values() {
            let record_author: HashMap<&str, &str> = ticket
                .records
                .iter()
                .filter_map(|r| {
                    commit_pos
                        .get(r.commit_id.as_str())
                        .map(|&ci| (r.id.as_str(), commits[ci].author.as_str()))
                })
                .collect();
            let links: HashMap<&str, _> = ticket
                .trigger_links
                .iter()
                .map(|l| (l.remark_id.as_str(), l))
                .collect();
            for remark in &ticket.remarks {
                let Some(&pos) = commit_pos.get(remark.review_commit_id.as_str()) else {
                    continue;
                };
                let authors: BTreeSet<&str> = match links.get(remark.remark_id.as_str()) {
                    Some(l) if !l.whole_ticket => l
                        .triggers
                        .iter()
                        .filter_map(|t| record_author.get(t.as_str()).copied())
                        .collect(),
                    _ => record_author.values().copied().collect(),
                };
                for part in &remark.parts {
                    file_remarks.entry(part.path.clone()).or_default().push(pos);
                    let project = project_of(&part.path).unwrap_or_default();
                    for a in &authors {
                        author_project_remarks
                            .entry((a.to_string(), project.to_string()))
                            .or_default()
                            .push(pos);
                    }
                }
            }
        }
        for v in file_remarks
            .values_mut()
            .chain(author_project_remarks.values_mut())
        {
            v.sort_unstable();
            v.dedup();
        }

        FeatureContext {
            commits,
            index: HistoryIndex::new(commits),
            commit_pos,
            frequent,
            project_commits,
            file_remarks,
            author_project_remarks,
            content,
            settings,
        }
    }

    /// Positions of all commits to the file up to and including `ci`,
    /// following renames back to the file's creation. Newest first.
    fn file_commits(&self, ci: usize, fc: &FileChange) -> Vec<usize> {
        let mut out = vec![ci];
        if fc.change_type == ChangeType::Add {
            return out;
        }
        if let Some(prev) = fc.path_old.as_deref() {
            self.index.walk_back(prev, Region::File, ci, |t| {
                out.push(t.commit);
                ControlFlow::Continue(())
            });
        }
        out
    }

    fn last_before(list: Option<&Vec<usize>>, ci: usize) -> Option<usize> {
        let list = list?;
        let n = list.partition_point(|&p| p < ci);
        n.checked_sub(1).map(|i| list[i])
    }

    fn file_level(&self, ci: usize, fc: &FileChange, fv: &mut FeatureVector) {
        let commit = &self.commits[ci];
        let path = fc.path();
        let history = self.file_commits(ci, fc);
        let created = history
            .iter()
            .map(|&p| self.commits[p].timestamp)
            .min()
            .unwrap_or(commit.timestamp);
        fv.set_num(
            "fileAgeDays",
            ((commit.timestamp - created).max(0) / DAY) as f64,
        );
        fv.set_num("fileCommitCount", history.len() as f64);
        let authors: BTreeSet<&str> = history
            .iter()
            .map(|&p| self.commits[p].author.as_str())
            .collect();
        fv.set_num("distinctFileAuthorCount", authors.len() as f64);

        let since_file_remark = match Self::last_before(self.file_remarks.get(path), ci) {
            Some(last) => history.iter().filter(|&&p| p > last).count(),
            None => history.len(),
        };
        fv.set_num("commitsSinceLastRemarkInFile", since_file_remark as f64);

        let project = project_of(path).unwrap_or_default();
        let project_commits = self
            .project_commits
            .get(project)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let upto = project_commits.partition_point(|&p| p <= ci);
        let key = (commit.author.clone(), project.to_string());
        let since_author_remark = match Self::last_before(self.author_project_remarks.get(&key), ci) {
            Some(last) => upto - project_commits.partition_point(|&p| p <= last),
            None => upto,
        };
        fv.set_num(
            "commitsSinceLastRemarkForAuthorInProject",
            since_author_remark as f64,
        );

        let cutoff = commit.timestamp - OWNERSHIP_WINDOW;
        let (mut mine, mut all) = (0usize, 0usize);
        for &p in &project_commits[..upto] {
            let c = &self.commits[p];
            if c.timestamp >= cutoff && c.timestamp <= commit.timestamp {
                all += 1;
                mine += usize::from(c.author == commit.author);
            }
        }
        if all > 0 {
            fv.set_num("recentProjectOwnership", mine as f64 / all as f64);
        }

        fv.set_bool("binary", fc.binary);
        let ext = extension(path);
        if !ext.is_empty() {
            fv.set_cat("filetype", ext);
        }
        fv.set_cat("srcdir", srcdir_of(path));
        if let Some(p) = project_of(path) {
            fv.set_cat("project", p);
        }
        let name = basename(path);
        if self.frequent.contains(name) {
            fv.set_cat("frequentFilename", name);
        }
        if let Some(n) = fc.new_line_count {
            fv.set_num("newLineCountInFile", f64::from(n));
            if n > 0 {
                let changed: u32 = fc.hunks.iter().map(|h| h.new_len).sum();
                fv.set_num("newShareOfLinesInFile", f64::from(changed) / f64::from(n));
            }
        }
        fv.set_num("hunkCountInFile", fc.hunks.len().max(1) as f64);
        fv.set_cat("changetype", fc.change_type.as_str());
        fv.set_num("gitSimilarity", f64::from(fc.similarity));
        fv.set_bool("isNodeModules", is_node_modules(path));
    }
}

fn commit_level(ticket: &TicketData, commit: &CommitRecord, fv: &mut FeatureVector) {
    if let Some(t) = &ticket.timeline.issue_type {
        fv.set_cat("issueType", t.as_str());
    }
    fv.set_cat("author", commit.author.as_str());
    let (day, hour) = author_day_and_shifted_hour(commit.author_timestamp, commit.author_tz_minutes);
    fv.set_cat("authorDay", day);
    fv.set_num("shiftedAuthorHour", f64::from(hour));
    fv.set_num("fileCountInCommit", commit.file_changes.len() as f64);
    let parts: usize = commit.file_changes.iter().map(|f| f.hunks.len().max(1)).sum();
    fv.set_num("hunkCountInCommit", parts as f64);
    let test = commit
        .file_changes
        .iter()
        .any(|f| srcdir_of(f.path()) == "test");
    fv.set_bool("commitContainsTest", test);
}

fn pair(fv: &mut FeatureVector, old_name: &str, new_name: &str, change: &str, old: usize, new: usize) {
    fv.set_num(old_name, old as f64);
    fv.set_num(new_name, new as f64);
    fv.set_num(change, new as f64 - old as f64);
}

fn hunk_level(path: &str, hunk: &Hunk, fv: &mut FeatureVector) {
    let (old, new) = (&hunk.old_lines, &hunk.new_lines);
    pair(
        fv,
        "oldHunkSize",
        "newHunkSize",
        "changeInHunkSize",
        hunk.old_len as usize,
        hunk.new_len as usize,
    );
    pair(
        fv,
        "commentLineCountOld",
        "commentLineCountNew",
        "changeInCommentLineCount",
        patterns::comment_line_count(old),
        patterns::comment_line_count(new),
    );
    if FileKind::from_path(path) == FileKind::BraceStructured {
        pair(
            fv,
            "oldBlockCount",
            "newBlockCount",
            "changeInBlockCount",
            patterns::block_count(old),
            patterns::block_count(new),
        );
        pair(
            fv,
            "responseForHunkOld",
            "responseForHunkNew",
            "changeInResponseForHunk",
            patterns::call_targets(old),
            patterns::call_targets(new),
        );
    }
    fv.set_bool("whitespaceOnly", patterns::whitespace_only(old, new));
    fv.set_bool("packageAndImportOnly", patterns::import_only(old, new));
    fv.set_bool("finalChangeOnly", patterns::final_change_only(old, new));
    fv.set_bool("nonnlsChangeOnly", patterns::nonnls_change_only(old, new));
    fv.set_bool("visibilityChangeOnly", patterns::visibility_change_only(old, new));
    let has = |lines: &[String]| lines.iter().any(|l| l.contains("@Override"));
    let side = match (has(old), has(new)) {
        (false, false) => "none",
        (true, false) => "old",
        (false, true) => "new",
        (true, true) => "both",
    };
    fv.set_cat("overrideAnnotation", side);
}

const ENTROPY_SUFFIXES: [&str; 5] = ["Max", "UppQuar", "Med", "Sum", "Avg"];

fn set_entropy(fv: &mut FeatureVector, prefix: &str, values: &[f64]) {
    if let Some(a) = aggregate(values) {
        for (suffix, v) in ENTROPY_SUFFIXES.iter().zip([a.max, a.upp_quar, a.med, a.sum, a.avg]) {
            fv.set(&format!("{prefix}{suffix}"), FeatureValue::Num(v));
        }
    }
}

/// Train one model per file kind on the snapshot before `commit_id`.
fn codebase_models(
    content: &dyn ContentSource,
    commit_id: &str,
    kinds: &BTreeSet<KindKey>,
    settings: &FeatureSettings,
) -> Result<HashMap<KindKey, NgramModel>> {
    let mut models: HashMap<KindKey, NgramModel> = kinds
        .iter()
        .map(|k| (*k, NgramModel::new(settings.ngram_order, settings.lambda)))
        .collect();
    let tree = content.tree_before(commit_id)?;
    let wanted: Vec<(&str, &str)> = tree
        .iter()
        .filter(|(p, _)| kinds.contains(&KindKey::of(p)))
        .map(|(p, b)| (p.as_str(), b.as_str()))
        .collect();
    let ids: Vec<&str> = wanted.iter().map(|(_, b)| *b).collect();
    let blobs = content.blobs(&ids)?;
    for (path, id) in wanted {
        let Some(bytes) = blobs.get(id) else {
            continue;
        };
        if bytes.len() as u64 >= LARGE_FILE_BYTES || bytes.contains(&0) {
            continue;
        }
        let text = String::from_utf8_lossy(bytes);
        models
            .get_mut(&KindKey::of(path))
            .expect("model per wanted kind")
            .add_sequence(&tokenize(&text));
    }
    Ok(models)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum KindKey {
    Brace,
    Markup,
    Plain,
}

impl KindKey {
    fn of(path: &str) -> KindKey {
        match FileKind::from_path(path) {
            FileKind::BraceStructured => KindKey::Brace,
            FileKind::Markup => KindKey::Markup,
            FileKind::Plain => KindKey::Plain,
        }
    }
}

fn ticket_features(ctx: &FeatureContext<'_>, ticket: &TicketData) -> Result<Vec<FeatureVector>> {
    let settings = &ctx.settings;
    let located: Vec<(usize, &FileChange, Option<&Hunk>)> = ticket
        .records
        .iter()
        .map(|r| {
            let ci = *ctx
                .commit_pos
                .get(r.commit_id.as_str())
                .ok_or_else(|| Error::Invalid(format!("record {} has unknown commit", r.id)))?;
            let fc = &ctx.commits[ci].file_changes[r.file_index];
            Ok((ci, fc, r.hunk_index.map(|h| &fc.hunks[h])))
        })
        .collect::<Result<_>>()?;

    let kinds: BTreeSet<KindKey> = located
        .iter()
        .filter(|(_, fc, h)| h.is_some() && !fc.binary)
        .map(|(_, fc, _)| KindKey::of(fc.path()))
        .collect();
    let codebase = match located.first() {
        Some(&(ci, _, _)) if !kinds.is_empty() => {
            codebase_models(ctx.content, &ctx.commits[ci].commit_id, &kinds, settings)?
        }
        _ => HashMap::new(),
    };
    let mut review_model = NgramModel::new(settings.ngram_order, settings.lambda);

    let mut file_cache: HashMap<(usize, usize), FeatureVector> = HashMap::new();
    let mut out = Vec::with_capacity(located.len());
    for (r, &(ci, fc, hunk)) in ticket.records.iter().zip(&located) {
        let mut fv = file_cache
            .entry((ci, r.file_index))
            .or_insert_with(|| {
                let mut fv = FeatureVector::new();
                commit_level(ticket, &ctx.commits[ci], &mut fv);
                ctx.file_level(ci, fc, &mut fv);
                fv
            })
            .clone();
        if let Some(h) = hunk {
            hunk_level(fc.path(), h, &mut fv);
            if !fc.binary {
                let tokens = tokenize_lines(&h.new_lines);
                if let Some(m) = codebase.get(&KindKey::of(fc.path())) {
                    set_entropy(&mut fv, "entropyCb", &m.entropies(&tokens, settings.entropy_log_base));
                }
                set_entropy(
                    &mut fv,
                    "entropyRe",
                    &review_model.entropies(&tokens, settings.entropy_log_base),
                );
                review_model.add_sequence(&tokens);
            }
        }
        out.push(fv);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub tickets: usize,
    pub records: usize,
    /// Number of records without a value, per feature.
    pub absent: BTreeMap<String, usize>,
}

/// Compute the full catalog for every record. Needs a traced dataset, since
/// the remark-history features use the tracing result.
pub fn compute_features(
    dataset: &mut Dataset,
    content: &dyn ContentSource,
    settings: FeatureSettings,
) -> Result<FeatureStats> {
    if !dataset.traced {
        return Err(Error::NotTraced(
            "remark history features need `trace` to run first".into(),
        ));
    }
    let results: Vec<(String, Vec<FeatureVector>)> = {
        let ctx = FeatureContext::new(dataset, content, settings.clone());
        dataset
            .tickets
            .par_iter()
            .map(|(id, t)| ticket_features(&ctx, t).map(|v| (id.clone(), v)))
            .collect::<Result<_>>()?
    };
    let mut stats = FeatureStats::default();
    for (id, vectors) in results {
        let ticket = dataset.tickets.get_mut(&id).expect("ticket exists");
        stats.tickets += 1;
        for (r, fv) in ticket.records.iter_mut().zip(vectors) {
            for (name, v) in fv.iter() {
                if v.is_absent() {
                    *stats.absent.entry(name.to_string()).or_default() += 1;
                }
            }
            r.features = Some(fv);
            stats.records += 1;
        }
    }
    dataset.feature_settings = Some(settings);
    Ok(stats)
}

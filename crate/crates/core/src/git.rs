// SPDX-License-Identifier: Apache-2.0

//! Thin wrapper around the `git` command line.
//!
//! History is read with a single `git log --first-parent --raw -p -U0` call;
//! the raw section supplies blob ids, status letters and rename scores, the
//! patch section supplies zero-context hunks.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::ingest::{ChangeType, FileChange, Hunk, LARGE_FILE_BYTES};

const NULL_SHA: &str = "0000000000000000000000000000000000000000";

#[derive(Debug, Clone)]
pub struct RawCommit {
    pub id: String,
    pub author: String,
    pub author_time: i64,
    pub author_tz_minutes: i32,
    pub commit_time: i64,
    pub message: String,
    pub file_changes: Vec<FileChange>,
}

#[derive(Debug, Clone)]
pub struct GitRepo {
    path: PathBuf,
}

impl GitRepo {
    pub fn open(path: &Path) -> Result<Self> {
        let repo = GitRepo {
            path: path.to_path_buf(),
        };
        repo.run(&["rev-parse", "--git-dir"])?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-c")
            .arg("core.quotePath=false")
            .arg("-c")
            .arg("color.ui=never")
            .arg("-C")
            .arg(&self.path)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("LC_ALL", "C");
        cmd
    }

    pub fn run(&self, args: &[&str]) -> Result<Vec<u8>> {
        let output = self
            .command()
            .args(args)
            .output()
            .map_err(|e| Error::io(&self.path, e))?;
        if !output.status.success() {
            return Err(Error::Git {
                command: args.first().copied().unwrap_or_default().to_string(),
                message: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(output.stdout)
    }

    fn has_head(&self) -> bool {
        self.run(&["rev-parse", "--verify", "-q", "HEAD"]).is_ok()
    }

    /// All first-parent commits, oldest first.
    pub fn first_parent_log(&self) -> Result<Vec<RawCommit>> {
        if !self.has_head() {
            return Ok(Vec::new());
        }
        let out = self.run(&[
            "log",
            "--first-parent",
            "--diff-merges=first-parent",
            "--reverse",
            "--no-color",
            "--no-abbrev",
            "--no-ext-diff",
            "--no-textconv",
            "--raw",
            "-p",
            "-U0",
            "-M",
            "-C",
            "--date=raw",
            "--format=%x1e%H%x1f%an%x1f%ad%x1f%ct%x1f%B%x1f",
        ])?;
        let text = String::from_utf8_lossy(&out);
        let mut commits = Vec::new();
        for chunk in text.split('\u{1e}').filter(|c| !c.is_empty()) {
            commits.push(parse_commit(chunk)?);
        }
        self.attach_blob_stats(&mut commits)?;
        Ok(commits)
    }

    /// Object sizes, via `git cat-file --batch-check`.
    pub fn blob_sizes(&self, ids: &[&str]) -> Result<HashMap<String, u64>> {
        let out = self.batch("--batch-check", ids)?;
        let mut sizes = HashMap::new();
        for line in out.split(|&b| b == b'\n') {
            let line = String::from_utf8_lossy(line);
            let mut parts = line.split_whitespace();
            if let (Some(id), Some(_kind), Some(size)) = (parts.next(), parts.next(), parts.next()) {
                if let Ok(size) = size.parse() {
                    sizes.insert(id.to_string(), size);
                }
            }
        }
        Ok(sizes)
    }

    /// Object contents, via `git cat-file --batch`. Missing ids are absent
    /// from the result.
    pub fn read_blobs(&self, ids: &[&str]) -> Result<HashMap<String, Vec<u8>>> {
        let out = self.batch("--batch", ids)?;
        let mut reader = BufReader::new(out.as_slice());
        let mut blobs = HashMap::new();
        let mut header = String::new();
        loop {
            header.clear();
            if reader
                .read_line(&mut header)
                .map_err(|e| Error::io(&self.path, e))?
                == 0
            {
                break;
            }
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() < 3 {
                // "<id> missing"
                continue;
            }
            let size: usize = parts[2].parse().map_err(|_| Error::Git {
                command: "cat-file".into(),
                message: format!("bad batch header `{}`", header.trim()),
            })?;
            let mut body = vec![0; size + 1];
            reader
                .read_exact(&mut body)
                .map_err(|e| Error::io(&self.path, e))?;
            body.pop();
            blobs.insert(parts[0].to_string(), body);
        }
        Ok(blobs)
    }

    fn batch(&self, mode: &str, ids: &[&str]) -> Result<Vec<u8>> {
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let mut child = self
            .command()
            .args(["cat-file", mode])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(&self.path, e))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input: String = ids.iter().map(|id| format!("{id}\n")).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child
            .wait_with_output()
            .map_err(|e| Error::io(&self.path, e))?;
        writer
            .join()
            .expect("stdin writer thread")
            .map_err(|e| Error::io(&self.path, e))?;
        if !output.status.success() {
            return Err(Error::Git {
                command: "cat-file".into(),
                message: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        Ok(output.stdout)
    }

    /// `(path, blob id)` of every file in the tree of `rev`, sorted by path.
    pub fn tree_files(&self, rev: &str) -> Result<Vec<(String, String)>> {
        if self
            .run(&["rev-parse", "--verify", "-q", &format!("{rev}^{{commit}}")])
            .is_err()
        {
            return Ok(Vec::new());
        }
        let out = self.run(&["ls-tree", "-r", "-z", "--full-tree", rev])?;
        let mut files = Vec::new();
        for entry in out.split(|&b| b == 0).filter(|e| !e.is_empty()) {
            let entry = String::from_utf8_lossy(entry);
            let Some((meta, path)) = entry.split_once('\t') else {
                continue;
            };
            let meta: Vec<&str> = meta.split_whitespace().collect();
            if meta.len() == 3 && meta[1] == "blob" {
                files.push((path.to_string(), meta[2].to_string()));
            }
        }
        files.sort();
        Ok(files)
    }

    /// Mark oversize blobs binary and fill in line counts and similarity.
    fn attach_blob_stats(&self, commits: &mut [RawCommit]) -> Result<()> {
        let mut ids: Vec<&str> = commits
            .iter()
            .flat_map(|c| c.file_changes.iter())
            .filter(|fc| !fc.binary)
            .flat_map(|fc| [fc.old_blob.as_deref(), fc.new_blob.as_deref()])
            .flatten()
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let sizes = self.blob_sizes(&ids)?;
        let small: Vec<&str> = ids
            .iter()
            .copied()
            .filter(|id| sizes.get(*id).is_some_and(|&s| s < LARGE_FILE_BYTES))
            .collect();
        let line_counts: HashMap<String, u32> = self
            .read_blobs(&small)?
            .into_iter()
            .map(|(id, bytes)| (id, count_lines(&bytes)))
            .collect();

        for fc in commits.iter_mut().flat_map(|c| c.file_changes.iter_mut()) {
            let oversize = [&fc.old_blob, &fc.new_blob]
                .into_iter()
                .flatten()
                .any(|id| sizes.get(id).is_some_and(|&s| s >= LARGE_FILE_BYTES));
            if oversize {
                fc.binary = true;
                fc.hunks.clear();
            }
            if !fc.binary {
                fc.old_line_count = fc.old_blob.as_ref().and_then(|id| line_counts.get(id).copied());
                fc.new_line_count = fc.new_blob.as_ref().and_then(|id| line_counts.get(id).copied());
            }
            if matches!(fc.change_type, ChangeType::Modify) {
                fc.similarity = modify_similarity(fc);
            }
        }
        Ok(())
    }
}

fn count_lines(bytes: &[u8]) -> u32 {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count();
    let trailing = usize::from(bytes.last().is_some_and(|&b| b != b'\n'));
    (newlines + trailing) as u32
}

/// Share of retained lines, in percent of the larger side.
fn modify_similarity(fc: &FileChange) -> u8 {
    if fc.old_blob == fc.new_blob {
        return 100;
    }
    let (Some(old), Some(new)) = (fc.old_line_count, fc.new_line_count) else {
        return 0;
    };
    let removed: u32 = fc.hunks.iter().map(|h| h.old_len).sum();
    let larger = old.max(new);
    if larger == 0 {
        return 0;
    }
    let sim = (100 * u64::from(old.saturating_sub(removed)) / u64::from(larger)) as u8;
    sim.min(99)
}

fn git_format_err(message: String) -> Error {
    Error::Git {
        command: "log".into(),
        message,
    }
}

fn parse_commit(chunk: &str) -> Result<RawCommit> {
    let fields: Vec<&str> = chunk.splitn(6, '\u{1f}').collect();
    if fields.len() != 6 {
        return Err(git_format_err(format!(
            "unexpected log record `{}`",
            chunk.chars().take(80).collect::<String>()
        )));
    }
    let (author_time, author_tz_minutes) = parse_raw_date(fields[2])?;
    let commit_time = fields[3]
        .trim()
        .parse()
        .map_err(|_| git_format_err(format!("bad commit time `{}`", fields[3])))?;
    let file_changes = parse_changes(fields[5])?;
    Ok(RawCommit {
        id: fields[0].trim().to_string(),
        author: fields[1].to_string(),
        author_time,
        author_tz_minutes,
        commit_time,
        message: fields[4].trim_end().to_string(),
        file_changes,
    })
}

fn parse_raw_date(s: &str) -> Result<(i64, i32)> {
    let mut parts = s.split_whitespace();
    let ts = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| git_format_err(format!("bad date `{s}`")))?;
    let tz = parts.next().unwrap_or("+0000");
    let sign = if tz.starts_with('-') { -1 } else { 1 };
    let digits = tz.trim_start_matches(['+', '-']);
    let hh: i32 = digits.get(0..2).and_then(|d| d.parse().ok()).unwrap_or(0);
    let mm: i32 = digits.get(2..4).and_then(|d| d.parse().ok()).unwrap_or(0);
    Ok((ts, sign * (hh * 60 + mm)))
}

struct RawEntry {
    old_mode: String,
    new_mode: String,
    old_blob: Option<String>,
    new_blob: Option<String>,
    status: char,
    score: Option<u8>,
    paths: Vec<String>,
}

fn parse_raw_line(line: &str) -> Result<RawEntry> {
    let (meta, paths) = line
        .split_once('\t')
        .ok_or_else(|| git_format_err(format!("bad raw line `{line}`")))?;
    let meta: Vec<&str> = meta.trim_start_matches(':').split_whitespace().collect();
    if meta.len() != 5 {
        return Err(git_format_err(format!("bad raw line `{line}`")));
    }
    let blob = |s: &str| (s != NULL_SHA).then(|| s.to_string());
    let mut status_chars = meta[4].chars();
    let status = status_chars.next().unwrap_or('M');
    let score = status_chars.as_str().parse().ok();
    Ok(RawEntry {
        old_mode: meta[0].to_string(),
        new_mode: meta[1].to_string(),
        old_blob: blob(meta[2]),
        new_blob: blob(meta[3]),
        status,
        score,
        paths: paths.split('\t').map(str::to_string).collect(),
    })
}

#[derive(Default)]
struct PatchSection {
    binary: bool,
    hunks: Vec<Hunk>,
}

fn parse_hunk_header(line: &str) -> Option<(u32, u32, u32, u32)> {
    // @@ -a[,b] +c[,d] @@
    let inner = line.strip_prefix("@@ ")?;
    let inner = &inner[..inner.find(" @@")?];
    let (old, new) = inner.split_once(' ')?;
    let span = |s: &str| -> Option<(u32, u32)> {
        let (start, len) = match s.split_once(',') {
            Some((a, b)) => (a.parse().ok()?, b.parse().ok()?),
            None => (s.parse().ok()?, 1),
        };
        Some((start, len))
    };
    let (os, ol) = span(old.strip_prefix('-')?)?;
    let (ns, nl) = span(new.strip_prefix('+')?)?;
    Some((os, ol, ns, nl))
}

fn parse_patch_sections(lines: &[&str]) -> Result<Vec<PatchSection>> {
    let mut sections: Vec<PatchSection> = Vec::new();
    let mut in_hunk = false;
    for line in lines {
        if line.starts_with("diff --git ") {
            sections.push(PatchSection::default());
            in_hunk = false;
            continue;
        }
        let Some(section) = sections.last_mut() else {
            continue;
        };
        if line.starts_with("@@ ") {
            let (os, ol, ns, nl) = parse_hunk_header(line)
                .ok_or_else(|| git_format_err(format!("bad hunk header `{line}`")))?;
            section.hunks.push(Hunk {
                old_start: os,
                old_len: ol,
                new_start: ns,
                new_len: nl,
                old_lines: Vec::new(),
                new_lines: Vec::new(),
            });
            in_hunk = true;
            continue;
        }
        if !in_hunk {
            if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
                section.binary = true;
            }
            continue;
        }
        let hunk = section.hunks.last_mut().expect("in_hunk implies a hunk");
        if let Some(text) = line.strip_prefix('-') {
            hunk.old_lines.push(text.to_string());
        } else if let Some(text) = line.strip_prefix('+') {
            hunk.new_lines.push(text.to_string());
        }
    }
    for s in &sections {
        for h in &s.hunks {
            if h.old_lines.len() != h.old_len as usize || h.new_lines.len() != h.new_len as usize {
                return Err(git_format_err(format!(
                    "hunk @@ -{},{} +{},{} has {}/{} lines",
                    h.old_start,
                    h.old_len,
                    h.new_start,
                    h.new_len,
                    h.old_lines.len(),
                    h.new_lines.len()
                )));
            }
        }
    }
    Ok(sections)
}

fn parse_changes(body: &str) -> Result<Vec<FileChange>> {
    let lines: Vec<&str> = body.lines().collect();
    let raw: Vec<RawEntry> = lines
        .iter()
        .filter(|l| l.starts_with(':'))
        .map(|l| parse_raw_line(l))
        .collect::<Result<_>>()?;
    let patch_start = lines
        .iter()
        .position(|l| l.starts_with("diff --git "))
        .unwrap_or(lines.len());
    let sections = parse_patch_sections(&lines[patch_start..])?;
    if sections.len() != raw.len() {
        return Err(git_format_err(format!(
            "{} raw entries but {} patch sections",
            raw.len(),
            sections.len()
        )));
    }

    let mut changes: Vec<FileChange> = raw
        .into_iter()
        .zip(sections)
        .map(|(entry, section)| {
            let gitlink = entry.old_mode == "160000" || entry.new_mode == "160000";
            let binary = section.binary || gitlink;
            let (change_type, path_old, path_new) = match entry.status {
                'A' => (ChangeType::Add, None, Some(entry.paths[0].clone())),
                'D' => (ChangeType::Delete, Some(entry.paths[0].clone()), None),
                'R' => (
                    ChangeType::Rename,
                    Some(entry.paths[0].clone()),
                    entry.paths.get(1).cloned(),
                ),
                'C' => (
                    ChangeType::Copy,
                    Some(entry.paths[0].clone()),
                    entry.paths.get(1).cloned(),
                ),
                _ => (
                    ChangeType::Modify,
                    Some(entry.paths[0].clone()),
                    Some(entry.paths[0].clone()),
                ),
            };
            let similarity = match change_type {
                ChangeType::Rename | ChangeType::Copy => entry.score.unwrap_or(0),
                _ => 0,
            };
            FileChange {
                path_old,
                path_new,
                change_type,
                binary,
                similarity,
                old_blob: entry.old_blob,
                new_blob: entry.new_blob,
                old_line_count: None,
                new_line_count: None,
                hunks: if binary { Vec::new() } else { section.hunks },
            }
        })
        .collect();
    changes.sort_by(|a, b| a.path().cmp(b.path()));
    Ok(changes)
}

// SPDX-License-Identifier: Apache-2.0

//! Archive files: one JSON header line, then one line per entry holding its
//! objective vector and canonical ruleset text.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ArchiveEntry, ArchiveSnapshot};
use crate::error::{Error, Result};
use crate::rules::{parse_ruleset, ObjectiveVector, OBJECTIVES};

pub const ARCHIVE_FORMAT: &str = "remark-archive";
const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format: String,
    pub version: u32,
    pub generation: u64,
    pub seed: u64,
    pub iterations: u64,
    pub objectives: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    id: String,
    objectives: ObjectiveVector,
    ruleset: String,
}

pub fn write_archive<W: Write>(
    snapshot: &ArchiveSnapshot,
    seed: u64,
    iterations: u64,
    mut out: W,
) -> Result<()> {
    let io = |e: std::io::Error| Error::io("archive", e);
    let header = ArchiveHeader {
        format: ARCHIVE_FORMAT.into(),
        version: ARCHIVE_VERSION,
        generation: snapshot.generation,
        seed,
        iterations,
        objectives: OBJECTIVES.iter().map(|(n, _)| n.to_string()).collect(),
    };
    writeln!(out, "{}", json(&header)).map_err(io)?;
    for e in &snapshot.entries {
        let line = EntryLine {
            id: e.id.clone(),
            objectives: e.objectives,
            ruleset: e.ruleset.to_text(),
        };
        writeln!(out, "{}", json(&line)).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("archive lines serialize")
}

pub fn read_archive<R: BufRead>(input: R) -> Result<(ArchiveHeader, ArchiveSnapshot)> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, message: String| Error::DatasetFormat { line, message };
    let header: ArchiveHeader = match lines.next() {
        Some((_, l)) => {
            let l = l.map_err(|e| Error::io("archive", e))?;
            serde_json::from_str(&l).map_err(|e| bad(1, e.to_string()))?
        }
        None => return Err(bad(1, "empty archive file".into())),
    };
    if header.format != ARCHIVE_FORMAT || header.version != ARCHIVE_VERSION {
        return Err(bad(1, format!("not a version {ARCHIVE_VERSION} archive")));
    }
    let mut entries = Vec::new();
    for (n, l) in lines {
        let l = l.map_err(|e| Error::io("archive", e))?;
        if l.trim().is_empty() {
            continue;
        }
        let e: EntryLine = serde_json::from_str(&l).map_err(|e| bad(n + 1, e.to_string()))?;
        entries.push(ArchiveEntry {
            id: e.id,
            objectives: e.objectives,
            ruleset: parse_ruleset(&e.ruleset)?,
        });
    }
    Ok((
        header.clone(),
        ArchiveSnapshot {
            generation: header.generation,
            entries,
        },
    ))
}

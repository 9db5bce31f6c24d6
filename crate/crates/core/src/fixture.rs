// SPDX-License-Identifier: Apache-2.0

//! Small real git repositories with controlled dates, authors and ticket
//! events, for tests and demos.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::json;
use tempfile::TempDir;

use crate::content::GitContent;
use crate::error::{Error, Result};
use crate::ingest::{extract, Dataset};
use crate::remarks::{trace_dataset, RemarkConfig, TraceOutcome};

pub const TICKET_PATTERN: &str = r"\b([A-Z]+-[0-9]+)\b";

/// Start of the fixture clock: 2020-01-06, a Monday.
pub const EPOCH: i64 = 1_578_268_800;

pub struct MicroRepo {
    dir: TempDir,
    time: i64,
    events: Vec<serde_json::Value>,
    commits: Vec<String>,
}

impl MicroRepo {
    pub fn new() -> Result<Self> {
        let dir = tempfile::Builder::new()
            .prefix("micro-repo")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let repo = MicroRepo {
            dir,
            time: EPOCH,
            events: Vec::new(),
            commits: Vec::new(),
        };
        repo.git(&["init", "-q", "-b", "main"])?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn now(&self) -> i64 {
        self.time
    }

    /// Move the clock forward.
    pub fn advance(&mut self, seconds: i64) {
        self.time += seconds;
    }

    pub fn commits(&self) -> &[String] {
        &self.commits
    }

    fn git_env(&self, args: &[&str], author: &str) -> Result<String> {
        let date = format!("{} +0000", self.time);
        let out = Command::new("git")
            .args(["-c", "commit.gpgsign=false", "-c", "core.autocrlf=false"])
            .args(args)
            .current_dir(self.path())
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env("GIT_AUTHOR_NAME", author)
            .env("GIT_AUTHOR_EMAIL", format!("{author}@example.com"))
            .env("GIT_COMMITTER_NAME", author)
            .env("GIT_COMMITTER_EMAIL", format!("{author}@example.com"))
            .env("GIT_AUTHOR_DATE", &date)
            .env("GIT_COMMITTER_DATE", &date)
            .output()
            .map_err(|e| Error::io(self.path(), e))?;
        if !out.status.success() {
            return Err(Error::Git {
                command: args.first().copied().unwrap_or_default().into(),
                message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    fn git(&self, args: &[&str]) -> Result<String> {
        self.git_env(args, "fixture")
    }

    pub fn write(&self, path: &str, content: &str) -> Result<()> {
        self.write_bytes(path, content.as_bytes())
    }

    pub fn write_bytes(&self, path: &str, content: &[u8]) -> Result<()> {
        let full = self.path().join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&full, content).map_err(|e| Error::io(&full, e))
    }

    /// Write numbered lines `prefix1` … `prefixN`.
    pub fn write_lines(&self, path: &str, lines: &[&str]) -> Result<()> {
        let mut text = lines.join("\n");
        if !lines.is_empty() {
            text.push('\n');
        }
        self.write(path, &text)
    }

    pub fn remove(&self, path: &str) -> Result<()> {
        self.git(&["rm", "-q", path]).map(|_| ())
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<()> {
        if let Some(parent) = self.path().join(to).parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.git(&["mv", from, to]).map(|_| ())
    }

    /// Commit all changes one minute after the previous step.
    pub fn commit(&mut self, message: &str, author: &str) -> Result<String> {
        self.time += 60;
        self.git(&["add", "-A"])?;
        self.git_env(&["commit", "-q", "--allow-empty", "-m", message], author)?;
        let id = self.git(&["rev-parse", "HEAD"])?;
        self.commits.push(id.clone());
        Ok(id)
    }

    /// Record a ticket state change one minute after the previous step.
    pub fn event(&mut self, ticket: &str, state: &str) {
        self.time += 60;
        self.events.push(json!({ "ticket": ticket, "ts": self.time, "state": state }));
    }

    pub fn event_with_type(&mut self, ticket: &str, state: &str, issue_type: &str) {
        self.time += 60;
        self.events
            .push(json!({ "ticket": ticket, "ts": self.time, "state": state, "issue_type": issue_type }));
    }

    pub fn start_ticket(&mut self, ticket: &str) {
        self.event(ticket, "IN_IMPLEMENTATION");
    }

    /// Ready-for-review followed by the start of the review.
    pub fn start_review(&mut self, ticket: &str) {
        self.event(ticket, "READY_FOR_REVIEW");
        self.event(ticket, "IN_REVIEW");
    }

    /// Back to implementation after review.
    pub fn reject_review(&mut self, ticket: &str) {
        self.event(ticket, "REVIEW_REJECTED");
        self.event(ticket, "IN_IMPLEMENTATION");
    }

    pub fn finish(&mut self, ticket: &str) {
        self.event(ticket, "DONE");
    }

    pub fn ticket_log(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }

    /// Write the ticket log next to (not inside) the work tree.
    pub fn write_ticket_log(&self) -> Result<PathBuf> {
        let path = self.path().join(".git").join("ticket-log.jsonl");
        std::fs::write(&path, self.ticket_log()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn extract(&self) -> Result<Dataset> {
        let log = self.write_ticket_log()?;
        extract(self.path(), &log, TICKET_PATTERN)
    }

    pub fn content(&self) -> Result<GitContent> {
        GitContent::open(self.path())
    }

    /// Extract and trace with default settings.
    pub fn traced(&self) -> Result<(Dataset, TraceOutcome)> {
        let mut ds = self.extract()?;
        let outcome = trace_dataset(&mut ds, &self.content()?, &RemarkConfig::default())?;
        Ok((ds, outcome))
    }
}

fn java_class(name: &str, body: &[String]) -> String {
    let mut s = format!("package demo;\n\nimport java.util.List;\n\npublic class {name} {{\n");
    for line in body {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("}\n");
    s
}

fn method(name: &str, stmt: &str) -> [String; 3] {
    [
        format!("    public int {name}(int x) {{"),
        format!("        {stmt}"),
        "    }".to_string(),
    ]
}

/// A small multi-project history with several reviewed tickets, used by the
/// end-to-end tests and the CLI demo.
pub fn demo_repo() -> Result<MicroRepo> {
    let mut r = MicroRepo::new()?;
    let authors = ["alice", "bob", "carol"];
    let mut bodies: Vec<Vec<String>> = (0..4).map(|_| Vec::new()).collect();
    let classes = ["core/src/Parser.java", "core/src/Lexer.java", "ui/src/View.java", "ui/src/Model.java"];
    let class_name = |p: &str| p.rsplit('/').next().unwrap().trim_end_matches(".java").to_string();
    for (i, path) in classes.iter().enumerate() {
        bodies[i].extend(method("base", "return x;"));
        r.write(path, &java_class(&class_name(path), &bodies[i]))?;
    }
    r.write("README.md", "# demo\n")?;
    r.write("core/test/ParserTest.java", "class ParserTest {\n}\n")?;
    r.commit("initial import", "alice")?;

    for t in 0..8usize {
        let ticket = format!("DEMO-{}", t + 1);
        let author = authors[t % authors.len()];
        let reviewer = authors[(t + 1) % authors.len()];
        r.event_with_type(&ticket, "IN_IMPLEMENTATION", if t % 3 == 0 { "Bug" } else { "Story" });
        let a = t % classes.len();
        let b = (t + 1) % classes.len();
        bodies[a].extend(method(&format!("m{t}"), &format!("return x + {t};")));
        r.write(classes[a], &java_class(&class_name(classes[a]), &bodies[a]))?;
        r.write(&format!("docs/notes{}.txt", t % 3), &format!("note {t}\n"))?;
        r.commit(&format!("{ticket} add m{t}"), author)?;

        bodies[b].extend(method(&format!("n{t}"), &format!("return x * {};", t + 2)));
        r.write(classes[b], &java_class(&class_name(classes[b]), &bodies[b]))?;
        // whitespace-only touch of a third file
        let c = (t + 2) % classes.len();
        let mut ws = java_class(&class_name(classes[c]), &bodies[c]);
        ws = ws.replacen("public class", "public  class", 1);
        r.write(classes[c], &ws)?;
        r.commit(&format!("{ticket} add n{t}"), author)?;

        r.start_review(&ticket);
        if t % 4 != 3 {
            // review fix in the method added first
            let last = bodies[a].len() - 2;
            bodies[a][last] = format!("        return x + {t} + 1;");
            r.write(classes[a], &java_class(&class_name(classes[a]), &bodies[a]))?;
            r.write(classes[c], &java_class(&class_name(classes[c]), &bodies[c]))?;
            r.commit(&format!("{ticket} review fixes"), reviewer)?;
        }
        r.finish(&ticket);
        r.advance(3 * 3600);
    }
    Ok(r)
}

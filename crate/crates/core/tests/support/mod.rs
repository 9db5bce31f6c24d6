// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the integration tests: hand-labeled tracing repos,
//! random in-memory histories and synthetic featured datasets.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use remark_core::content::MemoryContent;
use remark_core::features::{FeatureValue, FeatureVector};
use remark_core::fixture::MicroRepo;
use remark_core::ingest::{
    assemble_dataset, ChangePartRecord, ChangeType, CommitRecord, Dataset, FileChange, Hunk,
    ScanOutput, TicketData, TicketEvent, TicketState, TicketTimeline,
};
use remark_core::remarks::{Remark, TriggerLink};
use remark_core::rules::{Condition, Literal, ObjectiveVector, Op, Rule, RuleSet};
use remark_core::scope::ScopeVariant;
use remark_core::szz::{szz_compare, Category};
use remark_core::Result;

// ---------------------------------------------------------------------------
// Hand-labeled tracing fixtures

/// A change part named by its commit (index into `MicroRepo::commits`),
/// path and hunk.
#[derive(Debug, Clone)]
pub struct Part {
    pub commit: usize,
    pub path: &'static str,
    pub hunk: Option<usize>,
}

pub fn hunk(commit: usize, path: &'static str, hunk: usize) -> Part {
    Part {
        commit,
        path,
        hunk: Some(hunk),
    }
}

pub fn hunkless(commit: usize, path: &'static str) -> Part {
    Part {
        commit,
        path,
        hunk: None,
    }
}

#[derive(Debug, Clone)]
pub enum Expect {
    Triggers(Vec<Part>),
    WholeTicket,
}

/// Expected outcome for one remark, in extraction order.
#[derive(Debug, Clone)]
pub struct Labeled {
    pub file: &'static str,
    pub expect: Expect,
    pub scope: ScopeVariant,
    pub szz: Category,
}

fn label(file: &'static str, expect: Expect, scope: ScopeVariant, szz: Category) -> Labeled {
    Labeled {
        file,
        expect,
        scope,
        szz,
    }
}

pub struct TraceCase {
    pub name: &'static str,
    pub repo: MicroRepo,
    pub ticket: &'static str,
    pub remarks: Vec<Labeled>,
}

impl TraceCase {
    /// Trace the repo and compare every remark with its label.
    pub fn check(&self) -> std::result::Result<(), String> {
        let fail = |m: String| format!("{}: {m}", self.name);
        let (ds, _) = self.repo.traced().map_err(|e| fail(e.to_string()))?;
        let content = self.repo.content().map_err(|e| fail(e.to_string()))?;
        let ticket = ds
            .tickets
            .get(self.ticket)
            .ok_or_else(|| fail(format!("ticket {} missing", self.ticket)))?;
        if ticket.remarks.len() != self.remarks.len() {
            return Err(fail(format!(
                "expected {} remarks, found {}: {:?}",
                self.remarks.len(),
                ticket.remarks.len(),
                ticket.remarks.iter().map(|r| &r.file).collect::<Vec<_>>()
            )));
        }
        let comparisons = szz_compare(&ds, &content, false).map_err(|e| fail(e.to_string()))?;
        for (i, (remark, want)) in ticket.remarks.iter().zip(&self.remarks).enumerate() {
            if remark.file != want.file {
                return Err(fail(format!("remark {i} is in {}, expected {}", remark.file, want.file)));
            }
            let link = ticket
                .trigger_links
                .iter()
                .find(|l| l.remark_id == remark.remark_id)
                .ok_or_else(|| fail(format!("remark {i} has no link")))?;
            match &want.expect {
                Expect::WholeTicket => {
                    if !link.whole_ticket {
                        return Err(fail(format!("remark {i}: expected whole ticket, got {:?}", link.triggers)));
                    }
                }
                Expect::Triggers(parts) => {
                    let expected = parts
                        .iter()
                        .map(|p| self.record_id(&ds, p))
                        .collect::<std::result::Result<BTreeSet<_>, _>>()
                        .map_err(fail)?;
                    if link.whole_ticket || link.triggers != expected {
                        return Err(fail(format!(
                            "remark {i}: expected {expected:?}, got {:?} (whole ticket {})",
                            link.triggers, link.whole_ticket
                        )));
                    }
                }
            }
            if link.found_at_scope != want.scope {
                return Err(fail(format!(
                    "remark {i}: found at {:?}, expected {:?}",
                    link.found_at_scope, want.scope
                )));
            }
            let got = comparisons
                .iter()
                .find(|c| c.remark_id == remark.remark_id)
                .map(|c| c.category)
                .ok_or_else(|| fail(format!("remark {i} has no comparison")))?;
            if got != want.szz {
                return Err(fail(format!("remark {i}: category {got:?}, expected {:?}", want.szz)));
            }
        }
        Ok(())
    }

    fn record_id(&self, ds: &Dataset, p: &Part) -> std::result::Result<String, String> {
        let commit = &self.repo.commits()[p.commit];
        ds.records()
            .find(|r| &r.commit_id == commit && r.path == p.path && r.hunk_index == p.hunk)
            .map(|r| r.id.clone())
            .ok_or_else(|| format!("no record for {p:?}"))
    }
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn put(r: &MicroRepo, path: &str, lines: &[String]) -> Result<()> {
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    r.write_lines(path, &refs)
}

/// Repo with `a.txt` (20 lines) committed without a ticket, and T-1 started.
fn base() -> Result<(MicroRepo, Vec<String>)> {
    let mut r = MicroRepo::new()?;
    let a = numbered("a", 20);
    put(&r, "a.txt", &a)?;
    r.commit("initial import", "base")?;
    r.start_ticket("T-1");
    Ok((r, a))
}

fn review_edit(r: &mut MicroRepo, path: &str, lines: &[String]) -> Result<()> {
    r.start_review("T-1");
    put(r, path, lines)?;
    r.commit("T-1 review fixes", "reviewer")?;
    r.finish("T-1");
    Ok(())
}

use Category::{DifferentNoScope as NoScope, DifferentStuck as Stuck, Incomplete, Same};
use ScopeVariant::{File as FileScope, LineRange as Lines, Structural, WholeTicket as Whole};

fn direct() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[4] = "a5 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "direct",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn continue_past_first_trigger() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 first".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 first", "dev")?;
    a[4] = "a5 second".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 second", "dev")?;
    a[4] = "a5 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "continue past first trigger",
        repo: r,
        ticket: "T-1",
        remarks: vec![label(
            "a.txt",
            Expect::Triggers(vec![hunk(1, "a.txt", 0), hunk(2, "a.txt", 0)]),
            Lines,
            Incomplete,
        )],
    })
}

fn skip_foreign_commit() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[4] = "a5 other".into();
    put(&r, "a.txt", &a)?;
    r.commit("OTHER-1 unrelated", "someone")?;
    a[4] = "a5 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "skip foreign commit",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Stuck)],
    })
}

fn foreign_between_triggers() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    for (msg, text) in [("T-1 first", "a5 one"), ("untracked tweak", "a5 two"), ("T-1 third", "a5 three")] {
        a[4] = text.into();
        put(&r, "a.txt", &a)?;
        r.commit(msg, "dev")?;
    }
    a[4] = "a5 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "foreign commit between triggers",
        repo: r,
        ticket: "T-1",
        remarks: vec![label(
            "a.txt",
            Expect::Triggers(vec![hunk(1, "a.txt", 0), hunk(3, "a.txt", 0)]),
            Lines,
            Incomplete,
        )],
    })
}

fn plain_file_expansion() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[2] = "a3 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[14] = "a15 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "plain file expands to file scope",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), FileScope, Stuck)],
    })
}

fn java_lines(methods: &[(&str, Vec<String>)]) -> Vec<String> {
    let mut out = vec!["package demo;".to_string(), String::new(), "public class A {".to_string()];
    for (name, body) in methods {
        out.push(format!("    public int {name}(int x) {{"));
        out.extend(body.iter().cloned());
        out.push("    }".to_string());
        out.push(String::new());
    }
    out.push("}".to_string());
    out
}

fn stmts(tag: &str) -> Vec<String> {
    vec![
        format!("        int y = x + 1; // {tag}"),
        format!("        int z = y * 2; // {tag}"),
        "        return z;".to_string(),
    ]
}

fn method_expansion() -> Result<TraceCase> {
    let mut r = MicroRepo::new()?;
    let mut foo = stmts("foo");
    let mut bar = stmts("bar");
    put(&r, "A.java", &java_lines(&[("foo", foo.clone()), ("bar", bar.clone())]))?;
    r.commit("initial import", "base")?;
    r.start_ticket("T-1");
    foo[0] = "        int y = x + 10; // foo".into();
    bar[0] = "        int y = x + 20; // bar".into();
    put(&r, "A.java", &java_lines(&[("foo", foo.clone()), ("bar", bar.clone())]))?;
    r.commit("T-1 tune", "dev")?;
    foo[1] = "        int z = y * 3; // foo".into();
    review_edit(&mut r, "A.java", &java_lines(&[("foo", foo), ("bar", bar)]))?;
    Ok(TraceCase {
        name: "method scope expansion",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("A.java", Expect::Triggers(vec![hunk(1, "A.java", 0)]), Structural, Stuck)],
    })
}

fn class_expansion() -> Result<TraceCase> {
    let mut r = MicroRepo::new()?;
    let mut foo = stmts("foo");
    let mut bar = stmts("bar");
    put(&r, "A.java", &java_lines(&[("foo", foo.clone()), ("bar", bar.clone())]))?;
    put(&r, "B.java", &["class B {".to_string(), "}".to_string()])?;
    r.commit("initial import", "base")?;
    r.start_ticket("T-1");
    bar[2] = "        return z + 1;".into();
    put(&r, "A.java", &java_lines(&[("foo", foo.clone()), ("bar", bar.clone())]))?;
    r.commit("T-1 tune bar", "dev")?;
    foo[1] = "        int z = y * 3; // foo".into();
    review_edit(&mut r, "A.java", &java_lines(&[("foo", foo), ("bar", bar)]))?;
    Ok(TraceCase {
        name: "class scope expansion",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("A.java", Expect::Triggers(vec![hunk(1, "A.java", 0)]), Structural, Stuck)],
    })
}

fn block_expansion() -> Result<TraceCase> {
    let mut r = MicroRepo::new()?;
    let body = |a: &str, b: &str, ret: &str| {
        vec![
            "        if (x > 0) {".to_string(),
            format!("            x = {a};"),
            format!("            x = {b};"),
            "        }".to_string(),
            format!("        return {ret};"),
        ]
    };
    put(&r, "A.java", &java_lines(&[("foo", body("x + 1", "x * 2", "x"))]))?;
    r.commit("initial import", "base")?;
    r.start_ticket("T-1");
    put(&r, "A.java", &java_lines(&[("foo", body("x + 5", "x * 2", "x + 0"))]))?;
    r.commit("T-1 tune", "dev")?;
    review_edit(&mut r, "A.java", &java_lines(&[("foo", body("x + 5", "x * 4", "x + 0"))]))?;
    Ok(TraceCase {
        name: "block scope expansion",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("A.java", Expect::Triggers(vec![hunk(1, "A.java", 0)]), Structural, Stuck)],
    })
}

fn markup_expansion() -> Result<TraceCase> {
    let mut r = MicroRepo::new()?;
    let xml = |x: &str, y: &str, z: &str| -> Vec<String> {
        vec![
            "<config>".into(),
            "  <alpha>".into(),
            format!("    <x>{x}</x>"),
            format!("    <y>{y}</y>"),
            "  </alpha>".into(),
            "  <beta>".into(),
            format!("    <z>{z}</z>"),
            "  </beta>".into(),
            "</config>".into(),
        ]
    };
    put(&r, "conf.xml", &xml("1", "2", "3"))?;
    r.commit("initial import", "base")?;
    r.start_ticket("T-1");
    put(&r, "conf.xml", &xml("10", "2", "30"))?;
    r.commit("T-1 settings", "dev")?;
    review_edit(&mut r, "conf.xml", &xml("10", "20", "30"))?;
    Ok(TraceCase {
        name: "markup element expansion",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("conf.xml", Expect::Triggers(vec![hunk(1, "conf.xml", 0)]), Structural, Stuck)],
    })
}

fn added_file_in_review() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    r.start_review("T-1");
    r.write("z.txt", "new helper\n")?;
    r.commit("T-1 add helper", "dev")?;
    r.finish("T-1");
    Ok(TraceCase {
        name: "file added in review",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("z.txt", Expect::WholeTicket, Whole, NoScope)],
    })
}

fn nothing_found() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    put(&r, "b.txt", &numbered("b", 5))?;
    r.commit("add b", "base")?;
    put(&r, "b.txt", &numbered("bb", 5))?;
    r.commit("T-1 rewrite b", "dev")?;
    a[4] = "a5 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "no trigger in any scope",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::WholeTicket, Whole, Stuck)],
    })
}

fn multi_line_hunk() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 five", "dev")?;
    a[5] = "a6 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 six", "dev")?;
    a[4] = "a5 review".into();
    a[5] = "a6 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "multi-line review hunk",
        repo: r,
        ticket: "T-1",
        remarks: vec![label(
            "a.txt",
            Expect::Triggers(vec![hunk(1, "a.txt", 0), hunk(2, "a.txt", 0)]),
            Lines,
            Same,
        )],
    })
}

fn review_insertion() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a.insert(5, "inserted by review".into());
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "pure insertion in review",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn review_insertion_at_top() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[0] = "a1 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a.insert(0, "header from review".into());
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "insertion before the first line",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn review_deletion() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a.remove(4);
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "pure deletion in review",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn shifted_lines() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[9] = "a10 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    for (i, l) in ["top1", "top2", "top3"].iter().enumerate() {
        a.insert(i, l.to_string());
    }
    put(&r, "a.txt", &a)?;
    r.commit("T-1 header", "dev")?;
    a[12] = "a10 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "line numbers shifted by a later insertion",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn hunk_granularity() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[2] = "a3 impl".into();
    a[14] = "a15 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[14] = "a15 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "only the touching hunk",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 1)]), Lines, Same)],
    })
}

fn followed_rename() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    r.rename("a.txt", "b.txt")?;
    r.commit("T-1 rename", "dev")?;
    a[4] = "a5 review".into();
    review_edit(&mut r, "b.txt", &a)?;
    Ok(TraceCase {
        name: "walk follows a rename",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("b.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn second_review_round() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    r.start_review("T-1");
    a[4] = "a5 review one".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 review one", "reviewer")?;
    r.reject_review("T-1");
    a[4] = "a5 review two".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 rework", "dev")?;
    r.start_review("T-1");
    r.finish("T-1");
    Ok(TraceCase {
        name: "review commits are not triggers",
        repo: r,
        ticket: "T-1",
        remarks: vec![
            label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same),
            label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Stuck),
        ],
    })
}

fn merged_remark() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    let mut b = numbered("b", 20);
    put(&r, "b.txt", &b)?;
    r.commit("add b", "base")?;
    a[4] = "shared".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 a", "dev")?;
    b[4] = "shared".into();
    put(&r, "b.txt", &b)?;
    r.commit("T-1 b", "dev")?;
    r.start_review("T-1");
    a[4] = "shared fixed".into();
    b[4] = "shared fixed".into();
    put(&r, "a.txt", &a)?;
    put(&r, "b.txt", &b)?;
    r.commit("T-1 review", "reviewer")?;
    r.finish("T-1");
    Ok(TraceCase {
        name: "identical changes merge into one remark",
        repo: r,
        ticket: "T-1",
        remarks: vec![label(
            "a.txt",
            Expect::Triggers(vec![hunk(2, "a.txt", 0), hunk(3, "b.txt", 0)]),
            Lines,
            Same,
        )],
    })
}

fn whitespace_filtered() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[9] = "a10 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[4] = "    a5".into();
    a[9] = "a10 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "whitespace-only review change is no remark",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), Lines, Same)],
    })
}

fn ticket_created_file() -> Result<TraceCase> {
    let (mut r, _) = base()?;
    put(&r, "n.txt", &numbered("n", 5))?;
    r.commit("T-1 new file", "dev")?;
    let mut n = numbered("n", 5);
    n[1] = "n2 review".into();
    review_edit(&mut r, "n.txt", &n)?;
    Ok(TraceCase {
        name: "file created by the ticket",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("n.txt", Expect::Triggers(vec![hunk(1, "n.txt", 0)]), Lines, Same)],
    })
}

fn file_deleted_in_review() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    r.start_review("T-1");
    r.remove("a.txt")?;
    r.commit("T-1 drop a", "reviewer")?;
    r.finish("T-1");
    Ok(TraceCase {
        name: "file deleted in review",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), FileScope, Same)],
    })
}

fn two_files_two_remarks() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    let mut b = numbered("b", 20);
    put(&r, "b.txt", &b)?;
    r.commit("add b", "base")?;
    a[4] = "a5 impl".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 a", "dev")?;
    b[7] = "b8 impl".into();
    put(&r, "b.txt", &b)?;
    r.commit("T-1 b", "dev")?;
    r.start_review("T-1");
    a[4] = "a5 review".into();
    b[7] = "b8 review".into();
    put(&r, "a.txt", &a)?;
    put(&r, "b.txt", &b)?;
    r.commit("T-1 review", "reviewer")?;
    r.finish("T-1");
    Ok(TraceCase {
        name: "one remark per file",
        repo: r,
        ticket: "T-1",
        remarks: vec![
            label("a.txt", Expect::Triggers(vec![hunk(2, "a.txt", 0)]), Lines, Same),
            label("b.txt", Expect::Triggers(vec![hunk(3, "b.txt", 0)]), Lines, Same),
        ],
    })
}

fn binary_file() -> Result<TraceCase> {
    let (mut r, _) = base()?;
    r.write_bytes("img.bin", b"\x00\x01\x02base")?;
    r.commit("add image", "base")?;
    r.write_bytes("img.bin", b"\x00\x01\x02impl")?;
    r.commit("T-1 new image", "dev")?;
    r.start_review("T-1");
    r.write_bytes("img.bin", b"\x00\x01\x02review")?;
    r.commit("T-1 review image", "reviewer")?;
    r.finish("T-1");
    Ok(TraceCase {
        name: "binary file",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("img.bin", Expect::Triggers(vec![hunkless(2, "img.bin")]), FileScope, Same)],
    })
}

fn other_ticket_interleaved() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    r.start_ticket_other();
    a[4] = "a5 T-1".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-1 change", "dev")?;
    a[4] = "a5 T-2".into();
    a[11] = "a12 T-2".into();
    put(&r, "a.txt", &a)?;
    r.commit("T-2 change", "other")?;
    a[11] = "a12 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "line last changed by another reviewed ticket",
        repo: r,
        ticket: "T-1",
        remarks: vec![label("a.txt", Expect::Triggers(vec![hunk(1, "a.txt", 0)]), FileScope, Stuck)],
    })
}

trait OtherTicket {
    fn start_ticket_other(&mut self);
}

impl OtherTicket for MicroRepo {
    fn start_ticket_other(&mut self) {
        self.start_ticket("T-2");
    }
}

fn added_then_removed() -> Result<TraceCase> {
    let (mut r, mut a) = base()?;
    a.insert(5, "extra impl line".into());
    put(&r, "a.txt", &a)?;
    r.commit("T-1 add line", "dev")?;
    a.remove(5);
    put(&r, "a.txt", &a)?;
    r.commit("T-1 drop line again", "dev")?;
    a[4] = "a5 review".into();
    a[5] = "a6 review".into();
    review_edit(&mut r, "a.txt", &a)?;
    Ok(TraceCase {
        name: "line added and removed again is only seen at file scope",
        repo: r,
        ticket: "T-1",
        remarks: vec![label(
            "a.txt",
            Expect::Triggers(vec![hunk(1, "a.txt", 0), hunk(2, "a.txt", 0)]),
            FileScope,
            Stuck,
        )],
    })
}

/// Every hand-labeled tracing case.
pub fn trace_cases() -> Result<Vec<TraceCase>> {
    let builders: [fn() -> Result<TraceCase>; 25] = [
        direct,
        continue_past_first_trigger,
        skip_foreign_commit,
        foreign_between_triggers,
        plain_file_expansion,
        method_expansion,
        class_expansion,
        block_expansion,
        markup_expansion,
        added_file_in_review,
        nothing_found,
        multi_line_hunk,
        review_insertion,
        review_insertion_at_top,
        review_deletion,
        shifted_lines,
        hunk_granularity,
        followed_rename,
        second_review_round,
        merged_remark,
        whitespace_filtered,
        ticket_created_file,
        file_deleted_in_review,
        two_files_two_remarks,
        binary_file,
    ];
    let mut cases: Vec<TraceCase> = builders.iter().map(|b| b()).collect::<Result<_>>()?;
    cases.push(other_ticket_interleaved()?);
    cases.push(added_then_removed()?);
    Ok(cases)
}

// ---------------------------------------------------------------------------
// Random in-memory histories

struct Builder {
    content: MemoryContent,
    files: BTreeMap<String, (String, Vec<String>)>,
    commits: Vec<CommitRecord>,
    next_blob: usize,
    next_line: usize,
    /// Index of the commit that introduced each line text.
    origin: BTreeMap<String, usize>,
    blobs: BTreeMap<String, Vec<String>>,
}

impl Builder {
    fn blob(&mut self, lines: &[String]) -> String {
        self.next_blob += 1;
        let id = format!("blob{}", self.next_blob);
        let mut text = lines.join("\n");
        text.push('\n');
        self.content.insert_blob(id.clone(), text);
        self.blobs.insert(id.clone(), lines.to_vec());
        id
    }

    fn fresh_line(&mut self) -> String {
        self.next_line += 1;
        let line = format!("line {}", self.next_line);
        self.origin.insert(line.clone(), self.commits.len());
        line
    }

    fn add_file(&mut self, path: &str, n: usize) -> FileChange {
        let lines: Vec<String> = (0..n).map(|_| self.fresh_line()).collect();
        let blob = self.blob(&lines);
        let fc = FileChange {
            path_old: None,
            path_new: Some(path.to_string()),
            change_type: ChangeType::Add,
            binary: false,
            similarity: 0,
            old_blob: None,
            new_blob: Some(blob.clone()),
            old_line_count: Some(0),
            new_line_count: Some(n as u32),
            hunks: vec![Hunk {
                old_start: 0,
                old_len: 0,
                new_start: 1,
                new_len: n as u32,
                old_lines: Vec::new(),
                new_lines: lines.clone(),
            }],
        };
        self.files.insert(path.to_string(), (blob, lines));
        fc
    }

    /// Apply 1..=3 separated random edits and describe them as zero-context hunks.
    fn edit_file<R: Rng>(&mut self, rng: &mut R, path: &str) -> FileChange {
        let (old_blob, old) = self.files[path].clone();
        let n = old.len();
        let mut starts: Vec<usize> = (0..=n).collect();
        starts.shuffle(rng);
        let mut chosen: Vec<usize> = starts.into_iter().take(rng.gen_range(1..=3)).collect();
        chosen.sort_unstable();
        let mut edits: Vec<(usize, usize, usize)> = Vec::new();
        let mut next_free = 0;
        for s in chosen {
            if s < next_free {
                continue;
            }
            let room = n - s;
            let ol = if room == 0 { 0 } else { rng.gen_range(0..=room.min(3)) };
            let nl = if ol == 0 { rng.gen_range(1..=3) } else { rng.gen_range(0..=3) };
            if n - ol + nl == 0 {
                continue;
            }
            edits.push((s, ol, nl));
            // one unchanged line between edits keeps the hunks apart
            next_free = s + ol + 1;
        }
        if edits.is_empty() {
            edits.push((n, 0, 1));
        }
        let mut new = Vec::new();
        let mut hunks = Vec::new();
        let mut pos = 0;
        for &(s, ol, nl) in &edits {
            new.extend_from_slice(&old[pos..s]);
            let new_lines: Vec<String> = (0..nl).map(|_| self.fresh_line()).collect();
            let at = new.len();
            hunks.push(Hunk {
                old_start: if ol > 0 { s as u32 + 1 } else { s as u32 },
                old_len: ol as u32,
                new_start: if nl > 0 { at as u32 + 1 } else { at as u32 },
                new_len: nl as u32,
                old_lines: old[s..s + ol].to_vec(),
                new_lines: new_lines.clone(),
            });
            new.extend(new_lines);
            pos = s + ol;
        }
        new.extend_from_slice(&old[pos..]);
        let new_blob = self.blob(&new);
        let fc = FileChange {
            path_old: Some(path.to_string()),
            path_new: Some(path.to_string()),
            change_type: ChangeType::Modify,
            binary: false,
            similarity: 50,
            old_blob: Some(old_blob),
            new_blob: Some(new_blob.clone()),
            old_line_count: Some(n as u32),
            new_line_count: Some(new.len() as u32),
            hunks,
        };
        self.files.insert(path.to_string(), (new_blob, new));
        fc
    }

    fn commit(&mut self, ticket: Option<&str>, timestamp: i64, mut changes: Vec<FileChange>) {
        changes.sort_by(|a, b| a.path().cmp(b.path()));
        self.commits.push(CommitRecord {
            commit_id: format!("c{:03}", self.commits.len()),
            ticket_id: ticket.map(str::to_string),
            author: "dev".into(),
            timestamp,
            author_timestamp: timestamp,
            author_tz_minutes: 0,
            file_changes: changes,
            phase: None,
        });
    }
}

pub struct RandomHistory {
    pub dataset: Dataset,
    pub content: MemoryContent,
    origin: BTreeMap<String, usize>,
    blobs: BTreeMap<String, Vec<String>>,
}

impl RandomHistory {
    /// Commits that last changed the old-side lines of a remark, found by
    /// looking up which commit introduced each line's text. `None` for
    /// remarks on files added in review.
    pub fn blame(&self, remark: &Remark) -> Option<BTreeSet<String>> {
        let commit = self.dataset.commits.iter().find(|c| c.commit_id == remark.review_commit_id)?;
        let mut found = BTreeSet::new();
        for part in &remark.parts {
            let fc = &commit.file_changes[part.file_index];
            if fc.change_type == ChangeType::Add {
                return None;
            }
            let h = &fc.hunks[part.hunk_index?];
            let old = &self.blobs[fc.old_blob.as_ref()?];
            let lines: Vec<&String> = if h.old_len > 0 {
                h.old_lines.iter().collect()
            } else {
                vec![&old[h.old_start.max(1) as usize - 1]]
            };
            for l in lines {
                found.insert(self.dataset.commits[self.origin[l]].commit_id.clone());
            }
        }
        Some(found)
    }
}

fn event(ticket: &str, timestamp: i64, new_state: TicketState) -> TicketEvent {
    TicketEvent {
        ticket_id: ticket.to_string(),
        timestamp,
        new_state,
        issue_type: None,
    }
}

/// A history of plain-text files where ticket T-1 is implemented between
/// foreign commits and then changed during review. Not yet traced.
pub fn random_history<R: Rng>(rng: &mut R) -> RandomHistory {
    let mut b = Builder {
        content: MemoryContent::new(),
        files: BTreeMap::new(),
        commits: Vec::new(),
        next_blob: 0,
        next_line: 0,
        origin: BTreeMap::new(),
        blobs: BTreeMap::new(),
    };
    let paths = ["a.txt", "b.txt", "c.txt"];
    let n_files = rng.gen_range(1..=paths.len());
    let adds = paths[..n_files]
        .iter()
        .map(|p| {
            let n = rng.gen_range(1..=12);
            b.add_file(p, n)
        })
        .collect();
    let mut t = 1_000;
    b.commit(None, t, adds);
    let mut events = vec![event("T-1", t + 10, TicketState::InImplementation)];
    let impl_commits = rng.gen_range(2..=8);
    for _ in 0..impl_commits {
        t += 100;
        let ticket = match rng.gen_range(0..10) {
            0..=5 => Some("T-1"),
            6..=7 => Some("OTHER-1"),
            _ => None,
        };
        let mut changes = Vec::new();
        let mut touched = paths[..n_files].to_vec();
        touched.shuffle(rng);
        for p in touched.into_iter().take(rng.gen_range(1..=2)) {
            changes.push(b.edit_file(rng, p));
        }
        b.commit(ticket, t, changes);
    }
    events.push(event("T-1", t + 10, TicketState::ReadyForReview));
    events.push(event("T-1", t + 20, TicketState::InReview));
    t += 100;
    for _ in 0..rng.gen_range(1..=2) {
        t += 100;
        let mut changes = Vec::new();
        let mut touched = paths[..n_files].to_vec();
        touched.shuffle(rng);
        for p in touched.into_iter().take(rng.gen_range(1..=2)) {
            changes.push(b.edit_file(rng, p));
        }
        if rng.gen_bool(0.1) && !b.files.contains_key("d.txt") {
            let n = rng.gen_range(1..=4);
            changes.push(b.add_file("d.txt", n));
        }
        b.commit(Some("T-1"), t, changes);
    }
    events.push(event("T-1", t + 10, TicketState::Done));
    let dataset = assemble_dataset(
        ScanOutput {
            commits: b.commits,
            skipped: 0,
        },
        &events,
        None,
    );
    RandomHistory {
        dataset,
        content: b.content,
        origin: b.origin,
        blobs: b.blobs,
    }
}

// ---------------------------------------------------------------------------
// Synthetic featured datasets

/// Features the synthetic generator fills in; all others stay absent.
pub const SYNTH_NUMERIC: [&str; 4] = ["fileCountInCommit", "hunkCountInFile", "changeInHunkSize", "entropyCbMed"];
pub const SYNTH_BOOLEAN: [&str; 2] = ["whitespaceOnly", "binary"];
pub const SYNTH_CATEGORICAL: [(&str, &[&str]); 2] = [
    ("srcdir", &["src", "test", "testdata", "resources"]),
    ("author", &["alice", "bob", "carol"]),
];

fn random_features<R: Rng>(rng: &mut R) -> FeatureVector {
    let mut fv = FeatureVector::new();
    fv.set_num("fileCountInCommit", f64::from(rng.gen_range(1..=150)));
    fv.set_num("hunkCountInFile", f64::from(rng.gen_range(1..=20)));
    fv.set_num("changeInHunkSize", f64::from(rng.gen_range(-10..=10)));
    if rng.gen_bool(0.8) {
        fv.set_num("entropyCbMed", (rng.gen_range(0.0..3.0f64) * 100.0).round() / 100.0);
    }
    fv.set_bool("whitespaceOnly", rng.gen_bool(0.2));
    fv.set_bool("binary", rng.gen_bool(0.1));
    for (name, values) in SYNTH_CATEGORICAL {
        if rng.gen_bool(0.9) {
            fv.set_cat(name, *values.choose(rng).unwrap());
        }
    }
    fv
}

const SYNTH_PATHS: [&str; 4] = ["core/src/A.java", "core/test/BTest.java", "ui/view.txt", "ui/src/C.java"];

/// Attach one commit per ticket whose file changes back the records, so
/// that Java line counts can be looked up.
fn synthetic_ticket<R: Rng>(
    rng: &mut R,
    ticket_id: &str,
    features: Vec<FeatureVector>,
    commits: &mut Vec<CommitRecord>,
) -> TicketData {
    let commit_id = format!("{ticket_id}-commit");
    let mut changes = Vec::new();
    let mut records = Vec::new();
    for (i, fv) in features.into_iter().enumerate() {
        let path = *SYNTH_PATHS.choose(rng).unwrap();
        let hunks = if rng.gen_bool(0.1) {
            Vec::new()
        } else {
            let old_len = rng.gen_range(0..=5);
            let new_len = if old_len == 0 { rng.gen_range(1..=5) } else { rng.gen_range(0..=5) };
            vec![Hunk {
                old_start: 1,
                old_len,
                new_start: 1,
                new_len,
                old_lines: vec!["x".into(); old_len as usize],
                new_lines: vec!["y".into(); new_len as usize],
            }]
        };
        records.push(ChangePartRecord {
            id: format!("{ticket_id}/cp{i}"),
            ticket_id: ticket_id.to_string(),
            commit_id: commit_id.clone(),
            file_index: i,
            hunk_index: (!hunks.is_empty()).then_some(0),
            path: path.to_string(),
            features: Some(fv),
        });
        changes.push(FileChange {
            path_old: Some(path.to_string()),
            path_new: Some(path.to_string()),
            change_type: ChangeType::Modify,
            binary: hunks.is_empty(),
            similarity: 50,
            old_blob: None,
            new_blob: None,
            old_line_count: None,
            new_line_count: None,
            hunks,
        });
    }
    commits.push(CommitRecord {
        commit_id: commit_id.clone(),
        ticket_id: Some(ticket_id.to_string()),
        author: "dev".into(),
        timestamp: commits.len() as i64,
        author_timestamp: commits.len() as i64,
        author_tz_minutes: 0,
        file_changes: changes,
        phase: None,
    });
    TicketData {
        timeline: TicketTimeline {
            ticket_id: ticket_id.to_string(),
            issue_type: None,
            events: Vec::new(),
            split_point: None,
            commit_ids_impl: vec![commit_id],
            commit_ids_review: Vec::new(),
        },
        records,
        remarks: Vec::new(),
        trigger_links: Vec::new(),
    }
}

fn add_remark(ticket: &mut TicketData, triggers: BTreeSet<String>, whole_ticket: bool) {
    let id = format!("{}/rk{}", ticket.timeline.ticket_id, ticket.remarks.len());
    ticket.remarks.push(Remark {
        remark_id: id.clone(),
        ticket_id: ticket.timeline.ticket_id.clone(),
        review_commit_id: String::new(),
        file: "review.txt".into(),
        line_range: None,
        content_key: id.clone(),
        kind_flags: Default::default(),
        merged_count: 1,
        parts: Vec::new(),
    });
    ticket.trigger_links.push(TriggerLink {
        remark_id: id,
        triggers,
        whole_ticket,
        found_at_scope: if whole_ticket { ScopeVariant::WholeTicket } else { ScopeVariant::LineRange },
    });
}

fn finish(commits: Vec<CommitRecord>, tickets: BTreeMap<String, TicketData>) -> Dataset {
    let ds = Dataset {
        schema_version: remark_core::ingest::SCHEMA_VERSION,
        commits,
        tickets,
        traced: true,
        ..Dataset::default()
    };
    ds.validate().expect("synthetic dataset is consistent");
    ds
}

/// Random traced and featured dataset with at most `max_records` records.
pub fn synthetic_dataset<R: Rng>(rng: &mut R, max_records: usize) -> Dataset {
    let n_tickets = rng.gen_range(1..=12);
    let per_ticket = (max_records / n_tickets).max(1);
    let mut commits = Vec::new();
    let mut tickets = BTreeMap::new();
    for t in 0..n_tickets {
        let id = format!("S-{t:03}");
        let n = rng.gen_range(0..=per_ticket.min(16));
        let features = (0..n).map(|_| random_features(rng)).collect();
        let mut ticket = synthetic_ticket(rng, &id, features, &mut commits);
        let ids: Vec<String> = ticket.records.iter().map(|r| r.id.clone()).collect();
        for _ in 0..rng.gen_range(0..=3) {
            let roll = rng.gen_range(0..20);
            if roll == 0 {
                add_remark(&mut ticket, BTreeSet::new(), true);
            } else if roll == 1 || ids.is_empty() {
                // a remark whose trace found nothing and no whole-ticket link
                add_remark(&mut ticket, BTreeSet::new(), false);
            } else {
                let k = rng.gen_range(1..=ids.len().min(3));
                let triggers = ids.choose_multiple(rng, k).cloned().collect();
                add_remark(&mut ticket, triggers, false);
            }
        }
        tickets.insert(id, ticket);
    }
    finish(commits, tickets)
}

/// Whether a record belongs to the planted non-trigger set.
pub fn plantable(fv: &FeatureVector) -> bool {
    matches!(fv.get("whitespaceOnly"), FeatureValue::Bool(true))
        || fv.get("fileCountInCommit").as_num().is_some_and(|v| v >= 100.0)
}

/// Dataset whose non-triggers are exactly the plantable records.
pub fn planted_dataset<R: Rng>(rng: &mut R, n_tickets: usize, records_per_ticket: usize) -> Dataset {
    let mut commits = Vec::new();
    let mut tickets = BTreeMap::new();
    for t in 0..n_tickets {
        let id = format!("P-{t:03}");
        let features = (0..records_per_ticket)
            .map(|_| {
                let mut fv = random_features(rng);
                match rng.gen_range(0..20) {
                    0..=2 => fv.set_bool("whitespaceOnly", true),
                    3..=7 => {
                        fv.set_bool("whitespaceOnly", false);
                        fv.set_num("fileCountInCommit", f64::from(rng.gen_range(100..=250)));
                    }
                    _ => {
                        fv.set_bool("whitespaceOnly", false);
                        fv.set_num("fileCountInCommit", f64::from(rng.gen_range(1..=99)));
                    }
                }
                fv
            })
            .collect();
        let mut ticket = synthetic_ticket(rng, &id, features, &mut commits);
        let mut needed: Vec<String> = ticket
            .records
            .iter()
            .filter(|r| !plantable(r.features.as_ref().unwrap()))
            .map(|r| r.id.clone())
            .collect();
        needed.shuffle(rng);
        while !needed.is_empty() {
            let k = rng.gen_range(1..=needed.len().min(3));
            let group: BTreeSet<String> = needed.drain(..k).collect();
            add_remark(&mut ticket, group, false);
        }
        tickets.insert(id, ticket);
    }
    finish(commits, tickets)
}

// ---------------------------------------------------------------------------
// Random rulesets and a brute-force evaluator

fn random_condition<R: Rng>(rng: &mut R) -> Condition {
    match rng.gen_range(0..3) {
        0 => {
            let f = *SYNTH_NUMERIC.choose(rng).unwrap();
            let op = if rng.gen_bool(0.5) { Op::Leq } else { Op::Geq };
            let v = match f {
                "fileCountInCommit" => f64::from(rng.gen_range(0..=300)) / 2.0,
                "hunkCountInFile" => f64::from(rng.gen_range(0..=42)) / 2.0,
                "changeInHunkSize" => f64::from(rng.gen_range(-22..=22)) / 2.0,
                _ => (rng.gen_range(0.0..3.0f64) * 100.0).round() / 100.0,
            };
            Condition::num(f, op, v)
        }
        1 => {
            let f = *SYNTH_BOOLEAN.choose(rng).unwrap();
            let op = if rng.gen_bool(0.7) { Op::Eq } else { Op::Neq };
            Condition::text(f, op, if rng.gen_bool(0.5) { "true" } else { "false" })
        }
        _ => {
            let (f, values) = *SYNTH_CATEGORICAL.choose(rng).unwrap();
            let op = if rng.gen_bool(0.7) { Op::Eq } else { Op::Neq };
            let v = if rng.gen_bool(0.1) { "elsewhere" } else { *values.choose(rng).unwrap() };
            Condition::text(f, op, v)
        }
    }
}

fn random_rule<R: Rng>(rng: &mut R) -> Rule {
    Rule::new((0..rng.gen_range(1..=3)).map(|_| random_condition(rng)).collect())
}

pub fn random_ruleset<R: Rng>(rng: &mut R) -> RuleSet {
    let incl = (0..rng.gen_range(0..=4)).map(|_| random_rule(rng)).collect();
    let excl = (0..rng.gen_range(0..=2)).map(|_| random_rule(rng)).collect();
    RuleSet::new(incl, excl)
}

fn oracle_condition(c: &Condition, fv: &FeatureVector) -> bool {
    let v = fv.get(&c.feature);
    let text = match v {
        FeatureValue::Cat(s) => Some(s.clone()),
        FeatureValue::Bool(b) => Some(b.to_string()),
        _ => None,
    };
    match (&c.value, c.op, v) {
        (Literal::Num(t), Op::Leq, FeatureValue::Num(x)) => x <= t,
        (Literal::Num(t), Op::Geq, FeatureValue::Num(x)) => x >= t,
        (Literal::Str(s), Op::Eq, _) => text.is_some_and(|x| &x == s),
        (Literal::Str(s), Op::Neq, _) => text.is_some_and(|x| &x != s),
        _ => false,
    }
}

fn oracle_rule(r: &Rule, fv: &FeatureVector) -> bool {
    r.conditions.iter().all(|c| oracle_condition(c, fv))
}

pub fn oracle_skip(rs: &RuleSet, fv: &FeatureVector) -> bool {
    rs.incl.iter().any(|r| oracle_rule(r, fv)) && !rs.excl.iter().any(|r| oracle_rule(r, fv))
}

/// Objectives computed record by record from first principles.
pub fn oracle_objectives(rs: &RuleSet, ds: &Dataset) -> ObjectiveVector {
    let rules = rs.incl.iter().chain(&rs.excl);
    let complexity: usize = rules.clone().map(|r| r.conditions.len()).sum();
    let features: HashSet<&str> = rules.flat_map(|r| r.conditions.iter().map(|c| c.feature.as_str())).collect();
    let mut ov = ObjectiveVector {
        complexity: complexity as f64,
        feature_count: features.len() as f64,
        ..Default::default()
    };
    let commits: BTreeMap<&str, &CommitRecord> = ds.commits.iter().map(|c| (c.commit_id.as_str(), c)).collect();
    let mut per_ticket = Vec::new();
    for ticket in ds.tickets.values() {
        let skipped: HashSet<&str> = ticket
            .records
            .iter()
            .filter(|r| oracle_skip(rs, r.features.as_ref().unwrap()))
            .map(|r| r.id.as_str())
            .collect();
        for r in ticket.records.iter().filter(|r| skipped.contains(r.id.as_str())) {
            if r.path.ends_with(".java") {
                if let Some(h) = r.hunk_index {
                    let hunk = &commits[r.commit_id.as_str()].file_changes[r.file_index].hunks[h];
                    ov.saved_java_loc += f64::from(if hunk.new_len > 0 { hunk.new_len } else { hunk.old_len });
                }
            }
        }
        ov.saved_record_count += skipped.len() as f64;
        per_ticket.push(skipped.len() as f64);
        let weight = ((ticket.remarks.len() + 1) as f64).ln();
        for link in &ticket.trigger_links {
            let targets: Vec<&str> = if link.whole_ticket {
                ticket.records.iter().map(|r| r.id.as_str()).collect()
            } else {
                link.triggers.iter().map(String::as_str).collect()
            };
            if !targets.is_empty() && targets.iter().all(|t| skipped.contains(t)) {
                ov.missed_remark_count += 1.0;
                ov.missed_remark_log += weight;
            }
        }
    }
    per_ticket.sort_by(f64::total_cmp);
    let g = (0.2 * per_ticket.len() as f64).floor() as usize;
    let kept = &per_ticket[g..per_ticket.len() - g];
    if !kept.is_empty() {
        ov.saved_records_trimmed_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    }
    ov
}

/// Trace a random history, then check every remark: the blame walk agrees
/// with the line-origin oracle, and whenever the categories say the walk
/// stayed inside the ticket its hunks are among our triggers. Returns the
/// number of remarks checked.
pub fn check_szz_history(h: &mut RandomHistory) -> std::result::Result<usize, String> {
    use remark_core::remarks::{trace_dataset, RecordMap, RemarkConfig, TraceContext};
    use remark_core::szz::{classify, szz_trace};

    trace_dataset(&mut h.dataset, &h.content, &RemarkConfig::default()).map_err(|e| e.to_string())?;
    let ctx = TraceContext::new(&h.dataset, &h.content);
    let mut checked = 0;
    for ticket in h.dataset.tickets.values() {
        let records = RecordMap::new(ticket, &ctx.commit_pos);
        for remark in &ticket.remarks {
            let link = ticket
                .trigger_links
                .iter()
                .find(|l| l.remark_id == remark.remark_id)
                .ok_or("remark without link")?;
            let ours: BTreeSet<String> = if link.whole_ticket {
                records.all().iter().cloned().collect()
            } else {
                link.triggers.clone()
            };
            let szz = szz_trace(&ctx, &records, remark);
            if let Some(expected) = h.blame(remark) {
                let got: BTreeSet<String> = szz.found_commits.iter().cloned().collect();
                if got != expected {
                    return Err(format!("{}: blame {got:?}, oracle {expected:?}", remark.remark_id));
                }
            }
            let category = classify(&ours, &szz);
            if matches!(category, Category::Same | Category::Incomplete) && !szz.found_hunks.is_subset(&ours) {
                return Err(format!(
                    "{}: {category:?} but {:?} not within {ours:?}",
                    remark.remark_id, szz.found_hunks
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// The ruleset discussed with the development team, as published.
pub const SESSION_RULESET: &str = "skip when one of
  (changetype == 'DELETE')
  or (isNodeModules == 'true')
  or (packageAndImportOnly == 'true')
  or (whitespaceOnly == 'true')
  or (changeInHunkSize >= -0.5 and hunkCountInFile >= 147.5)
  or (filetype == 'jav')
  or (binary == 'true')
  or (fileCountInCommit >= 55.5 and hunkCountInCommit >= 2560.0)
  or (fileCountInCommit >= 274.0)
  or (fileCountInCommit >= 11.5 and srcdir == 'testdata')
  or (gitSimilarity >= 98.5)
  or (project == 'UnitTestRunner')
  or (project == 'TestPlugins')
  or (commitsSinceLastRemarkInFile >= 78.0)
  or (newLineCountInFile >= 12170.0)
  or (entropyCbMed <= 0.0919)
  or (visibilityChangeOnly == 'true')
";

pub const SESSION_THRESHOLDS: [f64; 10] = [-0.5, 147.5, 55.5, 2560.0, 274.0, 11.5, 98.5, 78.0, 12170.0, 0.0919];

/// Trailing whitespace and blank lines removed.
pub fn normalize_text(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Check the published ruleset: verbatim reprint, rule counts, thresholds.
pub fn check_session_ruleset() -> std::result::Result<(), String> {
    let rs = remark_core::rules::parse_ruleset(SESSION_RULESET).map_err(|e| e.to_string())?;
    if normalize_text(&rs.to_text()) != normalize_text(SESSION_RULESET) {
        return Err(format!("reprint differs:\n{}", rs.to_text()));
    }
    if rs.incl.len() != 17 || !rs.excl.is_empty() {
        return Err(format!("{} inclusion and {} exclusion rules", rs.incl.len(), rs.excl.len()));
    }
    let thresholds: Vec<f64> = rs
        .rules()
        .flat_map(|r| &r.conditions)
        .filter_map(|c| match c.value {
            Literal::Num(v) => Some(v),
            Literal::Str(_) => None,
        })
        .collect();
    if thresholds != SESSION_THRESHOLDS {
        return Err(format!("thresholds {thresholds:?}"));
    }
    Ok(())
}

/// Random (ruleset, dataset) pair scored by the library evaluators and the
/// test oracle; all seven objectives must agree exactly.
pub fn check_evaluator_equivalence(seed: u64) -> std::result::Result<(), String> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ds = synthetic_dataset(&mut rng, 200);
    let rs = random_ruleset(&mut rng);
    let fast = remark_core::rules::evaluate(&rs, &ds, "java").map_err(|e| e.to_string())?;
    let naive = remark_core::rules::evaluate_naive(&rs, &ds, "java").map_err(|e| e.to_string())?;
    let oracle = oracle_objectives(&rs, &ds);
    let bits = |ov: &ObjectiveVector| ov.to_array().map(f64::to_bits);
    if bits(&fast) != bits(&oracle) || bits(&naive) != bits(&oracle) {
        return Err(format!(
            "seed {seed}:\n{}\nfast   {fast:?}\nnaive  {naive:?}\noracle {oracle:?}",
            rs.to_text()
        ));
    }
    Ok(())
}

/// Dominance written out from the objective directions.
pub fn oracle_dominates(a: &[f64; 7], b: &[f64; 7]) -> bool {
    use remark_core::rules::OBJECTIVES;
    let mut strict = false;
    for (i, (_, maximize)) in OBJECTIVES.iter().enumerate() {
        let (x, y) = if *maximize { (a[i], b[i]) } else { (-a[i], -b[i]) };
        if x < y {
            return false;
        }
        strict |= x > y;
    }
    strict
}

/// Objective vector with few distinct values per objective, so that ties and
/// duplicates are common.
pub fn random_vector<R: Rng>(rng: &mut R, levels: u32) -> ObjectiveVector {
    let mut a = [0.0; 7];
    for x in &mut a {
        *x = f64::from(rng.gen_range(0..levels));
    }
    ObjectiveVector::from_array(a)
}

/// Insert `n` random vectors; after every insertion the archive must be
/// mutually nondominated, and at the end its vectors must equal the
/// nondominated distinct vectors of everything inserted.
pub fn check_archive(seed: u64, n: usize, levels: u32) -> std::result::Result<(), String> {
    use rand::SeedableRng;
    use remark_core::mining::ParetoArchive;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut archive = ParetoArchive::new();
    let mut inserted: Vec<[f64; 7]> = Vec::with_capacity(n);
    for step in 0..n {
        let ov = random_vector(&mut rng, levels);
        let admitted = archive.admits(&ov);
        let generation = archive.generation();
        if archive.add(RuleSet::default(), ov) != admitted {
            return Err(format!("step {step}: add disagrees with admits"));
        }
        if admitted != (archive.generation() == generation + 1) {
            return Err(format!("step {step}: generation not bumped exactly on change"));
        }
        inserted.push(ov.to_array());
        let current: Vec<[f64; 7]> = archive.entries().iter().map(|e| e.objectives.to_array()).collect();
        for (i, a) in current.iter().enumerate() {
            for (j, b) in current.iter().enumerate() {
                if i != j && (a == b || oracle_dominates(a, b)) {
                    return Err(format!("step {step}: {a:?} and {b:?} both in the archive"));
                }
            }
        }
    }
    let key = |a: &[f64; 7]| a.map(f64::to_bits);
    let mut front: Vec<[u64; 7]> = inserted
        .iter()
        .filter(|a| !inserted.iter().any(|b| oracle_dominates(b, a)))
        .map(key)
        .collect();
    front.sort_unstable();
    front.dedup();
    let mut got: Vec<[u64; 7]> = archive.entries().iter().map(|e| key(&e.objectives.to_array())).collect();
    got.sort_unstable();
    if got != front {
        return Err(format!("archive has {} vectors, brute force {}", got.len(), front.len()));
    }
    Ok(())
}

/// Mine a planted dataset for up to `iterations` rounds. Succeeds with the
/// first iteration after which some archive entry misses no remark and skips
/// at least 95 % of the plantable records.
pub fn check_planted(
    seed: u64,
    tickets: usize,
    per_ticket: usize,
    iterations: u64,
) -> std::result::Result<u64, String> {
    use rand::SeedableRng;
    use remark_core::mining::{Engine, MiningConfig};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ds = planted_dataset(&mut rng, tickets, per_ticket);
    let plantable: Vec<bool> = ds.records().map(|r| plantable(r.features.as_ref().unwrap())).collect();
    let total = plantable.iter().filter(|&&p| p).count();
    let mut engine = Engine::new(ds, MiningConfig { seed, ..MiningConfig::default() }).map_err(|e| e.to_string())?;
    let mut best = 0.0f64;
    for it in 1..=iterations {
        engine.iterate();
        for e in engine.archive().entries() {
            if e.objectives.missed_remark_count != 0.0 {
                continue;
            }
            let skipped = engine.index().skip_mask(&e.ruleset);
            let saved = skipped.ones().filter(|&i| plantable[i]).count();
            let share = saved as f64 / total as f64;
            best = best.max(share);
            if share >= 0.95 {
                return Ok(it);
            }
        }
    }
    Err(format!("best safe entry saves {:.1} % of {total} plantable records", best * 100.0))
}

/// Dataset with the given records per ticket; each remark lists the indices
/// of its triggers within the ticket.
pub fn handmade_dataset(tickets: Vec<(Vec<FeatureVector>, Vec<Vec<usize>>)>) -> Dataset {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut commits = Vec::new();
    let mut out = BTreeMap::new();
    for (t, (features, remarks)) in tickets.into_iter().enumerate() {
        let id = format!("H-{t:03}");
        let mut ticket = synthetic_ticket(&mut rng, &id, features, &mut commits);
        for triggers in remarks {
            let ids = triggers.iter().map(|&i| ticket.records[i].id.clone()).collect();
            add_remark(&mut ticket, ids, false);
        }
        out.insert(id, ticket);
    }
    finish(commits, out)
}

pub fn fcic(v: f64) -> FeatureVector {
    let mut fv = FeatureVector::new();
    fv.set_num("fileCountInCommit", v);
    fv
}

/// Random token stream over a small alphabet.
pub fn random_tokens<R: Rng>(rng: &mut R, n: usize, alphabet: usize) -> Vec<String> {
    (0..n).map(|_| format!("t{}", rng.gen_range(0..alphabet))).collect()
}

/// Train a random model and check that the conditional distribution over
/// the vocabulary plus the unknown slot sums to one for 100 random contexts.
pub fn check_distribution(seed: u64) -> std::result::Result<(), String> {
    use rand::SeedableRng;
    use remark_core::features::ngram::NgramModel;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let order = rng.gen_range(1..=5);
    let alphabet = rng.gen_range(1..=12);
    let mut model = if rng.gen_bool(0.2) {
        NgramModel::unsmoothed(order)
    } else {
        NgramModel::new(order, rng.gen_range(0.05..0.95))
    };
    for _ in 0..rng.gen_range(1..=4) {
        let n = rng.gen_range(0..=60);
        model.add_sequence(&random_tokens(&mut rng, n, alphabet));
    }
    for _ in 0..100 {
        let len = rng.gen_range(0..=6);
        // unknown tokens appear through the wider alphabet
        let ctx = random_tokens(&mut rng, len, alphabet + 3);
        let total: f64 = model.vocabulary().iter().map(|t| model.prob(&ctx, t)).sum::<f64>() + model.prob_unknown(&ctx);
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("seed {seed}, context {ctx:?}: probabilities sum to {total}"));
        }
    }
    Ok(())
}

/// A corpus where every context has exactly one successor scores zero
/// entropy on itself under the unsmoothed model, for every order above one.
pub fn check_deterministic_corpus() -> std::result::Result<(), String> {
    use remark_core::features::ngram::{aggregate, NgramModel};
    // a cycle: every token has exactly one successor
    let cycle = ["int", "x", "=", "y", ";", "return", "x", "+", "1", ";"];
    let tokens: Vec<String> = (0..5)
        .flat_map(|_| cycle.iter().enumerate().map(|(i, t)| format!("{t}{i}")))
        .collect();
    for order in 2..=5 {
        let mut m = NgramModel::unsmoothed(order);
        m.add_sequence(&tokens);
        let e = m.entropies(&tokens, 2.0);
        if e.iter().any(|&x| x != 0.0) {
            return Err(format!("order {order}: entropies {e:?}"));
        }
        let a = aggregate(&e).ok_or("no entropies")?;
        if [a.max, a.upp_quar, a.med, a.sum, a.avg] != [0.0; 5] {
            return Err(format!("order {order}: aggregate {a:?}"));
        }
    }
    Ok(())
}

/// Linear-interpolation quantile of an unsorted list.
pub fn oracle_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] * (1.0 - (pos - lo as f64)) + v[hi] * (pos - lo as f64)
}

/// `max >= uppQuar >= med` and agreement with the interpolation oracle on
/// 1000 random lists.
pub fn check_aggregate_order(seed: u64) -> std::result::Result<(), String> {
    use rand::SeedableRng;
    use remark_core::features::ngram::aggregate;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=40);
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { f64::from(rng.gen_range(0..4)) } else { rng.gen_range(0.0..20.0) })
            .collect();
        let a = aggregate(&values).ok_or("empty")?;
        if !(a.max >= a.upp_quar && a.upp_quar >= a.med) {
            return Err(format!("{values:?}: {a:?}"));
        }
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        if !close(a.med, oracle_quantile(&values, 0.5)) || !close(a.upp_quar, oracle_quantile(&values, 0.75)) {
            return Err(format!("{values:?}: {a:?}"));
        }
        let sum: f64 = values.iter().sum();
        if !close(a.sum, sum) || !close(a.avg, sum / n as f64) {
            return Err(format!("{values:?}: {a:?}"));
        }
    }
    Ok(())
}

// SPDX-License-Identifier: Apache-2.0

//! Multi-objective ruleset search.
//!
//! One iteration labels records by a randomized greedy set cover, induces a
//! ruleset by separate-and-conquer, improves it by local search and relinks
//! it with a random archive member. Every evaluated candidate is offered to
//! a Pareto archive. User feedback constrains later iterations.

mod archive;
mod cover;
mod engine;
mod feedback;
mod induce;
mod io;
mod local;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, CATALOG};
use crate::rules::{cost, Column, EvalIndex, ObjectiveVector, Rule, RuleSet, OBJECTIVES};

pub use archive::{ArchiveEntry, ArchiveSnapshot, ParetoArchive};
pub use cover::{greedy_set_cover, greedy_set_cover_for};
pub use engine::{replay, sample_misclassified, Engine, FeedbackAck, TranscriptEntry};
pub use feedback::{FeedbackCommand, PurgePredicate};
pub use induce::induce_ruleset;
pub use io::{read_archive, write_archive, ARCHIVE_FORMAT};
pub use local::{local_search, path_relink};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    pub seed: u64,
    /// Restricted-candidate-list parameter in `(0, 1]`; 1 is pure greedy.
    pub rcl_alpha: f64,
    pub max_conditions: usize,
    pub max_rules: usize,
    /// Local search stops after this many rounds without improvement.
    pub local_budget: usize,
    /// Random add-condition moves per local search round.
    pub add_samples: usize,
    /// Cost of a missed remark in reviewed records, for the default focus.
    pub cost_factor: f64,
    pub java_ext: String,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            seed: 0,
            rcl_alpha: 0.8,
            max_conditions: 4,
            max_rules: 40,
            local_budget: 8,
            add_samples: 8,
            cost_factor: 1000.0,
            java_ext: "java".into(),
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rcl_alpha > 0.0 && self.rcl_alpha <= 1.0) {
            return Err(Error::Invalid(format!("rcl_alpha {} is outside (0, 1]", self.rcl_alpha)));
        }
        if self.max_conditions == 0 || self.max_rules == 0 {
            return Err(Error::Invalid("max_conditions and max_rules must be positive".into()));
        }
        Ok(())
    }
}

/// Feedback-derived restrictions on every candidate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub pinned: Vec<Rule>,
    pub rejected: Vec<Rule>,
    pub blacklist: BTreeSet<String>,
}

impl Constraints {
    pub fn allows(&self, rule: &Rule) -> bool {
        !rule.conditions.is_empty()
            && !self.rejected.contains(rule)
            && !rule.conditions.iter().any(|c| self.blacklist.contains(&c.feature))
    }

    pub fn allows_ruleset(&self, rs: &RuleSet) -> bool {
        rs.rules().all(|r| self.allows(r)) && self.pinned.iter().all(|p| rs.incl.contains(p))
    }

    /// Drop disallowed and duplicate rules and add missing pinned rules.
    pub fn sanitize(&self, rs: RuleSet) -> RuleSet {
        let clean = |rules: Vec<Rule>| {
            let mut out: Vec<Rule> = Vec::with_capacity(rules.len());
            for r in rules {
                if self.allows(&r) && !out.contains(&r) {
                    out.push(r);
                }
            }
            out
        };
        let mut incl = clean(rs.incl);
        for p in &self.pinned {
            if !incl.contains(p) {
                incl.push(p.clone());
            }
        }
        RuleSet::new(incl, clean(rs.excl))
    }
}

/// How candidates are compared during greedy and local choices. Lower is
/// better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Focus {
    /// `cost_c` per ticket.
    Cost { c: f64 },
    /// Weighted sum over named objectives; maximized ones enter negated.
    Weights { weights: BTreeMap<String, f64> },
}

impl Focus {
    pub fn validate(&self) -> Result<()> {
        if let Focus::Weights { weights } = self {
            for name in weights.keys() {
                if !OBJECTIVES.iter().any(|(n, _)| n == name) {
                    return Err(Error::Invalid(format!("unknown objective `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn score(&self, ov: &ObjectiveVector, tickets: usize) -> f64 {
        let base = match self {
            Focus::Cost { c } => cost(ov, *c, tickets),
            Focus::Weights { weights } => OBJECTIVES
                .iter()
                .filter_map(|(name, maximize)| {
                    let w = weights.get(*name)?;
                    let v = ov.get(name).expect("known objective");
                    Some(if *maximize { -w * v } else { w * v })
                })
                .sum(),
        };
        // prefer simpler rulesets among equals
        base + 1e-6 * (ov.complexity + ov.feature_count)
    }
}

/// Candidate thresholds and categories per feature, plus numeric columns in
/// sorted order for fast split scans.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    /// Midpoints between adjacent distinct values; empty for non-numeric
    /// features.
    pub splits: Vec<Vec<f64>>,
    /// Observed values of non-numeric features.
    pub categories: Vec<Vec<String>>,
    /// Record indices with a value, ascending by value.
    pub sorted: Vec<Vec<u32>>,
}

impl SearchSpace {
    pub fn new(index: &EvalIndex) -> Self {
        let mut space = SearchSpace {
            splits: Vec::with_capacity(CATALOG.len()),
            categories: Vec::with_capacity(CATALOG.len()),
            sorted: Vec::with_capacity(CATALOG.len()),
        };
        for fi in 0..CATALOG.len() {
            match index.column(fi) {
                Column::Num(vals) => {
                    let mut order: Vec<u32> =
                        (0..vals.len() as u32).filter(|&i| !vals[i as usize].is_nan()).collect();
                    order.sort_by(|&a, &b| vals[a as usize].total_cmp(&vals[b as usize]).then(a.cmp(&b)));
                    let mut distinct: Vec<f64> = order.iter().map(|&i| vals[i as usize]).collect();
                    distinct.dedup();
                    space.splits.push(distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect());
                    space.categories.push(Vec::new());
                    space.sorted.push(order);
                }
                Column::Cat { values, .. } => {
                    space.splits.push(Vec::new());
                    space.categories.push(values.clone());
                    space.sorted.push(Vec::new());
                }
            }
        }
        space
    }

    pub fn is_numeric(fi: usize) -> bool {
        CATALOG[fi].1 == FeatureKind::Numeric
    }
}

pub fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

/// Everything needed to evaluate and compare candidates.
pub struct Search<'a> {
    pub index: &'a EvalIndex,
    pub space: &'a SearchSpace,
    pub constraints: &'a Constraints,
    pub focus: &'a Focus,
    pub config: &'a MiningConfig,
}

impl Search<'_> {
    pub fn evaluate(&self, rs: &RuleSet) -> ObjectiveVector {
        self.index.evaluate(rs)
    }

    pub fn score(&self, ov: &ObjectiveVector) -> f64 {
        self.focus.score(ov, self.index.ticket_count())
    }

    /// Sanitize, evaluate and offer a candidate to the archive.
    pub fn offer(&self, archive: &mut ParetoArchive, rs: RuleSet) -> (RuleSet, ObjectiveVector) {
        let rs = self.constraints.sanitize(rs);
        let ov = self.evaluate(&rs);
        archive.add(rs.clone(), ov);
        (rs, ov)
    }
}

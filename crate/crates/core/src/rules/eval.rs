// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use super::{Condition, Literal, Op, Rule, RuleSet};
use crate::error::{Error, Result};
use crate::features::CATALOG;
use crate::ingest::Dataset;
use crate::scope::extension;

/// Share trimmed from each tail for the per-ticket mean.
pub const TRIM_FRACTION: f64 = 0.2;

/// Objective names and whether each is maximized.
pub const OBJECTIVES: [(&str, bool); 7] = [
    ("complexity", false),
    ("feature_count", false),
    ("missed_remark_count", false),
    ("missed_remark_log", false),
    ("saved_record_count", true),
    ("saved_records_trimmed_mean", true),
    ("saved_java_loc", true),
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub complexity: f64,
    pub feature_count: f64,
    pub missed_remark_count: f64,
    pub missed_remark_log: f64,
    pub saved_record_count: f64,
    pub saved_records_trimmed_mean: f64,
    pub saved_java_loc: f64,
}

impl ObjectiveVector {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.complexity,
            self.feature_count,
            self.missed_remark_count,
            self.missed_remark_log,
            self.saved_record_count,
            self.saved_records_trimmed_mean,
            self.saved_java_loc,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        ObjectiveVector {
            complexity: a[0],
            feature_count: a[1],
            missed_remark_count: a[2],
            missed_remark_log: a[3],
            saved_record_count: a[4],
            saved_records_trimmed_mean: a[5],
            saved_java_loc: a[6],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = OBJECTIVES.iter().position(|(n, _)| *n == name)?;
        Some(self.to_array()[i])
    }

    /// At least as good everywhere and strictly better somewhere.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        let (a, b) = (self.to_array(), other.to_array());
        let mut strict = false;
        for ((_, maximize), (x, y)) in OBJECTIVES.iter().zip(a.iter().zip(&b)) {
            let (better, worse) = if *maximize { (x > y, x < y) } else { (x < y, x > y) };
            if worse {
                return false;
            }
            strict |= better;
        }
        strict
    }
}

/// Scalarized cost per ticket: `(r / t)·c − s`.
pub fn cost(ov: &ObjectiveVector, c: f64, tickets: usize) -> f64 {
    ov.missed_remark_log / tickets.max(1) as f64 * c - ov.saved_records_trimmed_mean
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn null_is_infinite<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Cost factors at which skipping stops paying off; infinite when nothing
/// is missed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakEven {
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_is_infinite")]
    pub per_record: f64,
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_is_infinite")]
    pub per_loc: f64,
}

pub fn break_even(ov: &ObjectiveVector, tickets: usize) -> BreakEven {
    let r = ov.missed_remark_log;
    if r > 0.0 {
        BreakEven {
            per_record: ov.saved_records_trimmed_mean * tickets.max(1) as f64 / r,
            per_loc: ov.saved_java_loc / r,
        }
    } else {
        BreakEven {
            per_record: f64::INFINITY,
            per_loc: f64::INFINITY,
        }
    }
}

/// Mean after dropping `floor(fraction·k)` values from each tail; 0 for an
/// empty list.
pub fn trimmed_mean(values: &[f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let g = (fraction * sorted.len() as f64).floor() as usize;
    let kept = &sorted[g..sorted.len() - g];
    kept.iter().sum::<f64>() / kept.len() as f64
}

fn loc_of(dataset: &Dataset, commit_pos: &HashMap<&str, usize>, ticket_record: &crate::ingest::ChangePartRecord, java_ext: &str) -> f64 {
    if !extension(&ticket_record.path).eq_ignore_ascii_case(java_ext) {
        return 0.0;
    }
    let (Some(&ci), Some(hi)) = (commit_pos.get(ticket_record.commit_id.as_str()), ticket_record.hunk_index) else {
        return 0.0;
    };
    let h = &dataset.commits[ci].file_changes[ticket_record.file_index].hunks[hi];
    f64::from(if h.new_len > 0 { h.new_len } else { h.old_len })
}

#[derive(Debug, Clone)]
pub struct RemarkTargets {
    pub remark_id: String,
    pub ticket: usize,
    /// `ln(1 + remarks in the ticket)`.
    pub weight: f64,
    /// Record indices of the potential triggers.
    pub triggers: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Column {
    /// `NaN` marks absent values.
    Num(Vec<f64>),
    /// Codes into `values`; `u32::MAX` marks absent values.
    Cat { codes: Vec<u32>, values: Vec<String> },
}

pub const ABSENT_CODE: u32 = u32::MAX;

/// Column-oriented view of a traced, featured dataset for fast evaluation.
#[derive(Debug)]
pub struct EvalIndex {
    pub record_ids: Vec<String>,
    pub record_ticket: Vec<usize>,
    pub ticket_ids: Vec<String>,
    ticket_starts: Vec<usize>,
    pub remarks: Vec<RemarkTargets>,
    pub java_loc: Vec<f64>,
    columns: Vec<Column>,
    cache: Mutex<HashMap<String, Arc<FixedBitSet>>>,
}

impl EvalIndex {
    pub fn new(dataset: &Dataset, java_ext: &str) -> Result<Self> {
        if !dataset.traced {
            return Err(Error::NotTraced("evaluation needs trigger links".into()));
        }
        let java_ext = java_ext.trim_start_matches('.');
        let commit_pos = dataset.commit_index();
        let mut idx = EvalIndex {
            record_ids: Vec::new(),
            record_ticket: Vec::new(),
            ticket_ids: Vec::new(),
            ticket_starts: vec![0],
            remarks: Vec::new(),
            java_loc: Vec::new(),
            columns: Vec::new(),
            cache: Mutex::new(HashMap::new()),
        };
        let mut raw: Vec<&crate::features::FeatureVector> = Vec::new();
        for (t, (ticket_id, ticket)) in dataset.tickets.iter().enumerate() {
            let start = idx.record_ids.len();
            let mut local: HashMap<&str, usize> = HashMap::new();
            for r in &ticket.records {
                let fv = r.features.as_ref().ok_or_else(|| {
                    Error::Invalid(format!("record {} has no features; run `features` first", r.id))
                })?;
                local.insert(r.id.as_str(), idx.record_ids.len());
                idx.record_ids.push(r.id.clone());
                idx.record_ticket.push(t);
                idx.java_loc.push(loc_of(dataset, &commit_pos, r, java_ext));
                raw.push(fv);
            }
            let end = idx.record_ids.len();
            idx.ticket_ids.push(ticket_id.clone());
            idx.ticket_starts.push(end);
            let weight = (1.0 + ticket.remarks.len() as f64).ln();
            let links: HashMap<&str, _> = ticket
                .trigger_links
                .iter()
                .map(|l| (l.remark_id.as_str(), l))
                .collect();
            for remark in &ticket.remarks {
                let triggers = match links.get(remark.remark_id.as_str()) {
                    Some(l) if l.whole_ticket => (start..end).collect(),
                    Some(l) => l
                        .triggers
                        .iter()
                        .filter_map(|id| local.get(id.as_str()).copied())
                        .collect(),
                    None => Vec::new(),
                };
                idx.remarks.push(RemarkTargets {
                    remark_id: remark.remark_id.clone(),
                    ticket: t,
                    weight,
                    triggers,
                });
            }
        }
        for (fi, (_, kind)) in CATALOG.iter().enumerate() {
            let column = if *kind == crate::features::FeatureKind::Numeric {
                Column::Num(raw.iter().map(|fv| fv.at(fi).as_num().unwrap_or(f64::NAN)).collect())
            } else {
                let mut values: Vec<String> = Vec::new();
                let mut lookup: HashMap<String, u32> = HashMap::new();
                let codes = raw
                    .iter()
                    .map(|fv| match fv.at(fi).as_text() {
                        Some(t) => *lookup.entry(t.to_string()).or_insert_with(|| {
                            values.push(t.to_string());
                            (values.len() - 1) as u32
                        }),
                        None => ABSENT_CODE,
                    })
                    .collect();
                Column::Cat { codes, values }
            };
            idx.columns.push(column);
        }
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.record_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_ids.is_empty()
    }

    pub fn ticket_count(&self) -> usize {
        self.ticket_ids.len()
    }

    pub fn ticket_records(&self, ticket: usize) -> std::ops::Range<usize> {
        self.ticket_starts[ticket]..self.ticket_starts[ticket + 1]
    }

    pub fn column(&self, feature_index: usize) -> &Column {
        &self.columns[feature_index]
    }

    fn compute_mask(&self, c: &Condition) -> FixedBitSet {
        let mut mask = FixedBitSet::with_capacity(self.len());
        let Some(fi) = crate::features::feature_index(&c.feature) else {
            return mask;
        };
        match (&self.columns[fi], &c.value, c.op) {
            (Column::Num(vals), Literal::Num(t), Op::Leq | Op::Geq) => {
                for (i, v) in vals.iter().enumerate() {
                    if (c.op == Op::Leq && *v <= *t) || (c.op == Op::Geq && *v >= *t) {
                        mask.insert(i);
                    }
                }
            }
            (Column::Cat { codes, values }, Literal::Str(s), Op::Eq | Op::Neq) => {
                let target = values.iter().position(|v| v == s).map(|p| p as u32);
                for (i, &code) in codes.iter().enumerate() {
                    let hit = match c.op {
                        Op::Eq => Some(code) == target,
                        _ => code != ABSENT_CODE && Some(code) != target,
                    };
                    if hit {
                        mask.insert(i);
                    }
                }
            }
            _ => {}
        }
        mask
    }

    /// Records matching one condition. Results are cached by condition text.
    pub fn condition_mask(&self, c: &Condition) -> Arc<FixedBitSet> {
        let key = c.to_string();
        if let Some(m) = self.cache.lock().get(&key) {
            return Arc::clone(m);
        }
        let mask = Arc::new(self.compute_mask(c));
        self.cache.lock().insert(key, Arc::clone(&mask));
        mask
    }

    pub fn rule_mask(&self, rule: &Rule) -> FixedBitSet {
        let mut mask = FixedBitSet::with_capacity(self.len());
        mask.insert_range(..);
        for c in &rule.conditions {
            mask.intersect_with(&self.condition_mask(c));
        }
        mask
    }

    pub fn skip_mask(&self, rs: &RuleSet) -> FixedBitSet {
        let mut skip = FixedBitSet::with_capacity(self.len());
        for r in &rs.incl {
            skip.union_with(&self.rule_mask(r));
        }
        for r in &rs.excl {
            skip.difference_with(&self.rule_mask(r));
        }
        skip
    }

    pub fn is_missed(&self, remark: &RemarkTargets, skipped: &FixedBitSet) -> bool {
        !remark.triggers.is_empty() && remark.triggers.iter().all(|&i| skipped.contains(i))
    }

    /// Objectives for a skip mask; complexity and feature count come from the
    /// ruleset that produced it.
    pub fn objectives(&self, skipped: &FixedBitSet, complexity: usize, feature_count: usize) -> ObjectiveVector {
        let (mut missed, mut missed_log) = (0usize, 0.0);
        for remark in &self.remarks {
            if self.is_missed(remark, skipped) {
                missed += 1;
                missed_log += remark.weight;
            }
        }
        let per_ticket: Vec<f64> = (0..self.ticket_count())
            .map(|t| skipped.count_ones(self.ticket_records(t)) as f64)
            .collect();
        let loc = skipped.ones().fold(0.0, |acc, i| acc + self.java_loc[i]);
        ObjectiveVector {
            complexity: complexity as f64,
            feature_count: feature_count as f64,
            missed_remark_count: missed as f64,
            missed_remark_log: missed_log,
            saved_record_count: skipped.count_ones(..) as f64,
            saved_records_trimmed_mean: trimmed_mean(&per_ticket, TRIM_FRACTION),
            saved_java_loc: loc,
        }
    }

    pub fn evaluate(&self, rs: &RuleSet) -> ObjectiveVector {
        self.objectives(&self.skip_mask(rs), rs.complexity(), rs.features().len())
    }

    /// Random skipping of `floor(share·n)` records per ticket, averaged over
    /// seeds `0..n_seeds`.
    pub fn baseline_random(&self, share: f64, n_seeds: usize) -> Result<ObjectiveVector> {
        if !(0.0..=1.0).contains(&share) {
            return Err(Error::Invalid(format!("share {share} is outside [0, 1]")));
        }
        if n_seeds == 0 {
            return Err(Error::Invalid("at least one seed is needed".into()));
        }
        let mut mean = [0.0; 7];
        for seed in 0..n_seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            let mut skipped = FixedBitSet::with_capacity(self.len());
            for t in 0..self.ticket_count() {
                let range = self.ticket_records(t);
                let n = range.len();
                let k = ((share * n as f64).floor() as usize).min(n);
                for i in rand::seq::index::sample(&mut rng, n, k) {
                    skipped.insert(range.start + i);
                }
            }
            let v = self.objectives(&skipped, 0, 0).to_array();
            // running mean stays exact when all seeds agree
            for (m, x) in mean.iter_mut().zip(v) {
                *m += (x - *m) / (seed + 1) as f64;
            }
        }
        Ok(ObjectiveVector::from_array(mean))
    }
}

pub fn evaluate(rs: &RuleSet, dataset: &Dataset, java_ext: &str) -> Result<ObjectiveVector> {
    Ok(EvalIndex::new(dataset, java_ext)?.evaluate(rs))
}

pub fn baseline_random(dataset: &Dataset, share: f64, n_seeds: usize) -> Result<ObjectiveVector> {
    EvalIndex::new(dataset, "java")?.baseline_random(share, n_seeds)
}

/// Reference evaluator: tests every record against the ruleset one by one
/// and every remark against its full trigger set.
pub fn evaluate_naive(rs: &RuleSet, dataset: &Dataset, java_ext: &str) -> Result<ObjectiveVector> {
    if !dataset.traced {
        return Err(Error::NotTraced("evaluation needs trigger links".into()));
    }
    let java_ext = java_ext.trim_start_matches('.');
    let commit_pos = dataset.commit_index();
    let mut ov = ObjectiveVector {
        complexity: rs.complexity() as f64,
        feature_count: rs.features().len() as f64,
        ..Default::default()
    };
    let mut per_ticket = Vec::new();
    for ticket in dataset.tickets.values() {
        let mut skipped = std::collections::HashSet::new();
        for r in &ticket.records {
            let fv = r
                .features
                .as_ref()
                .ok_or_else(|| Error::Invalid(format!("record {} has no features", r.id)))?;
            if rs.skip(fv) {
                skipped.insert(r.id.as_str());
                ov.saved_java_loc += loc_of(dataset, &commit_pos, r, java_ext);
            }
        }
        ov.saved_record_count += skipped.len() as f64;
        per_ticket.push(skipped.len());
        for remark in &ticket.remarks {
            let Some(link) = ticket.trigger_links.iter().find(|l| l.remark_id == remark.remark_id) else {
                continue;
            };
            let potential: Vec<&str> = if link.whole_ticket {
                ticket.records.iter().map(|r| r.id.as_str()).collect()
            } else {
                link.triggers.iter().map(String::as_str).collect()
            };
            if !potential.is_empty() && potential.iter().all(|id| skipped.contains(id)) {
                ov.missed_remark_count += 1.0;
                ov.missed_remark_log += (ticket.remarks.len() as f64 + 1.0).ln();
            }
        }
    }
    per_ticket.sort_unstable();
    let g = per_ticket.len() / 5;
    let kept = &per_ticket[g..per_ticket.len() - g];
    if !kept.is_empty() {
        ov.saved_records_trimmed_mean =
            kept.iter().map(|&n| n as f64).sum::<f64>() / kept.len() as f64;
    }
    Ok(ov)
}

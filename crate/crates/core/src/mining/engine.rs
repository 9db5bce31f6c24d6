// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    greedy_set_cover, induce_ruleset, local_search, path_relink, ArchiveSnapshot, Constraints,
    FeedbackCommand, Focus, MiningConfig, ParetoArchive, Search, SearchSpace,
};
use crate::error::{Error, Result};
use crate::features::feature_index;
use crate::ingest::Dataset;
use crate::remarks::clean_dataset;
use crate::rules::{parse_rule, parse_ruleset, EvalIndex, ObjectiveVector, RuleSet};

/// Salt for the sampling generator, kept apart from the mining stream.
const SAMPLE_SALT: u64 = 0x5a3c_9e17_d2b4_6f01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Number of iterations completed when the command was applied.
    pub iteration: u64,
    pub command: FeedbackCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackAck {
    /// Change in archive size caused by the command.
    pub archive_delta: i64,
    pub generation: u64,
}

/// Records skipped by `rs` that are potential triggers of a remark the
/// ruleset misses; up to `n` of them, uniformly at random.
pub fn sample_misclassified<R: Rng>(index: &EvalIndex, rs: &RuleSet, n: usize, rng: &mut R) -> Vec<usize> {
    let skipped = index.skip_mask(rs);
    let mut harmful = FixedBitSet::with_capacity(index.len());
    for remark in &index.remarks {
        if index.is_missed(remark, &skipped) {
            for &i in &remark.triggers {
                harmful.insert(i);
            }
        }
    }
    let pool: Vec<usize> = harmful.ones().collect();
    let k = n.min(pool.len());
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Mining state for one dataset. Fully determined by the dataset, the
/// config and the feedback transcript.
pub struct Engine {
    dataset: Dataset,
    config: MiningConfig,
    index: EvalIndex,
    space: SearchSpace,
    archive: ParetoArchive,
    constraints: Constraints,
    focus: Focus,
    rng: ChaCha8Rng,
    iteration: u64,
    transcript: Vec<TranscriptEntry>,
}

impl Engine {
    pub fn new(dataset: Dataset, config: MiningConfig) -> Result<Self> {
        config.validate()?;
        let index = EvalIndex::new(&dataset, &config.java_ext)?;
        let space = SearchSpace::new(&index);
        Ok(Engine {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            focus: Focus::Cost { c: config.cost_factor },
            dataset,
            config,
            index,
            space,
            archive: ParetoArchive::new(),
            constraints: Constraints::default(),
            iteration: 0,
            transcript: Vec::new(),
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn config(&self) -> &MiningConfig {
        &self.config
    }

    pub fn index(&self) -> &EvalIndex {
        &self.index
    }

    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    pub fn snapshot(&self) -> Arc<ArchiveSnapshot> {
        self.archive.snapshot()
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn focus(&self) -> &Focus {
        &self.focus
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn evaluate(&self, rs: &RuleSet) -> ObjectiveVector {
        self.index.evaluate(rs)
    }

    pub fn evaluate_text(&self, text: &str) -> Result<ObjectiveVector> {
        Ok(self.index.evaluate(&parse_ruleset(text)?))
    }

    /// One round: set cover, induction, local search, relinking.
    pub fn iterate(&mut self) {
        let search = Search {
            index: &self.index,
            space: &self.space,
            constraints: &self.constraints,
            focus: &self.focus,
            config: &self.config,
        };
        let rng = &mut self.rng;
        let archive = &mut self.archive;
        let labels = greedy_set_cover(&self.index, rng, self.config.rcl_alpha);
        let induced = induce_ruleset(&search, &labels, rng);
        let (start, _) = search.offer(archive, induced);
        let path = local_search(&search, archive, start, self.config.local_budget, rng);
        let best = path.last().expect("path starts with the input").clone();
        if !archive.is_empty() {
            let guide = archive.entries()[rng.gen_range(0..archive.len())].ruleset.clone();
            if guide != best {
                path_relink(&search, archive, &best, &guide);
            }
        }
        self.iteration += 1;
    }

    pub fn run(&mut self, iterations: u64) {
        for _ in 0..iterations {
            self.iterate();
        }
    }

    fn rebuild(&mut self, dataset: Dataset) -> Result<()> {
        self.index = EvalIndex::new(&dataset, &self.config.java_ext)?;
        self.space = SearchSpace::new(&self.index);
        self.dataset = dataset;
        let index = &self.index;
        self.archive.reevaluate(|rs| index.evaluate(rs));
        Ok(())
    }

    pub fn apply_feedback(&mut self, command: FeedbackCommand) -> Result<FeedbackAck> {
        let before = self.archive.len() as i64;
        match &command {
            FeedbackCommand::RejectRule { rule } => {
                let rule = parse_rule(rule)?;
                if self.constraints.pinned.contains(&rule) {
                    return Err(Error::Conflict(format!("rule {rule} is pinned")));
                }
                self.archive.purge(|e| e.ruleset.contains(&rule));
                if !self.constraints.rejected.contains(&rule) {
                    self.constraints.rejected.push(rule);
                }
            }
            FeedbackCommand::PinRule { rule } => {
                let rule = parse_rule(rule)?;
                if self.constraints.rejected.contains(&rule) {
                    return Err(Error::Conflict(format!("rule {rule} was rejected")));
                }
                if let Some(f) = rule.conditions.iter().find(|c| self.constraints.blacklist.contains(&c.feature)) {
                    return Err(Error::Conflict(format!("feature {} is blacklisted", f.feature)));
                }
                if !self.constraints.pinned.contains(&rule) {
                    self.constraints.pinned.push(rule);
                }
            }
            FeedbackCommand::BlacklistFeature { feature } => {
                if feature_index(feature).is_none() {
                    return Err(Error::Invalid(format!("unknown feature `{feature}`")));
                }
                if self.constraints.pinned.iter().any(|r| r.uses(feature)) {
                    return Err(Error::Conflict(format!("a pinned rule uses {feature}")));
                }
                self.archive.purge(|e| e.ruleset.uses(feature));
                self.constraints.blacklist.insert(feature.clone());
            }
            FeedbackCommand::ExcludeTicket { ticket_id, reason } => {
                if !self.dataset.tickets.contains_key(ticket_id) {
                    return Err(Error::Invalid(format!("unknown ticket `{ticket_id}`")));
                }
                let reason = reason.clone().unwrap_or_else(|| "excluded during mining".into());
                let dataset = std::mem::take(&mut self.dataset);
                let cleaned = clean_dataset(dataset, &[(ticket_id.clone(), reason)]);
                self.rebuild(cleaned)?;
            }
            FeedbackCommand::SetFocus { weights, cost_factor } => {
                let focus = if weights.is_empty() {
                    Focus::Cost {
                        c: cost_factor.unwrap_or(self.config.cost_factor),
                    }
                } else {
                    Focus::Weights {
                        weights: weights.clone(),
                    }
                };
                focus.validate()?;
                self.focus = focus;
            }
            FeedbackCommand::PurgeArchive { predicate } => {
                self.archive.purge(|e| predicate.matches(e));
            }
        }
        self.transcript.push(TranscriptEntry {
            iteration: self.iteration,
            command,
        });
        Ok(FeedbackAck {
            archive_delta: self.archive.len() as i64 - before,
            generation: self.archive.generation(),
        })
    }

    /// Deterministic sample: the same request always gets the same records.
    pub fn sample_misclassified(&self, rs: &RuleSet, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ SAMPLE_SALT);
        sample_misclassified(&self.index, rs, n, &mut rng)
    }
}

/// Rebuild an engine by re-running `iterations` rounds with the transcript's
/// feedback applied at the recorded iteration boundaries.
pub fn replay(
    dataset: Dataset,
    config: MiningConfig,
    transcript: &[TranscriptEntry],
    iterations: u64,
) -> Result<Engine> {
    let mut engine = Engine::new(dataset, config)?;
    let mut pending = transcript.iter().peekable();
    for it in 0..=iterations {
        while let Some(entry) = pending.next_if(|e| e.iteration == it) {
            engine.apply_feedback(entry.command.clone())?;
        }
        if it < iterations {
            engine.iterate();
        }
    }
    Ok(engine)
}

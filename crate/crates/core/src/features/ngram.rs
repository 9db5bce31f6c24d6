// SPDX-License-Identifier: Apache-2.0

//! Interpolated n-gram token model and per-token entropies.
//!
//! `p_k(t | c) = λ·ML_k(t | c) + (1 − λ)·p_{k−1}(t | c')` where `c'` drops the
//! oldest context token; a context never seen falls back to `p_{k−1}`
//! entirely. The base case is an add-one unigram over the vocabulary plus one
//! slot for unknown tokens.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Sentence-start padding; used only as context, never predicted.
pub const START: &str = "<s>";

const START_ID: u32 = 0;

#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    lambda: f64,
    ids: HashMap<String, u32>,
    unigram: HashMap<u32, u64>,
    total: u64,
    /// `contexts[k]` holds contexts of length `k + 1`.
    contexts: Vec<HashMap<Vec<u32>, ContextCounts>>,
}

impl NgramModel {
    pub fn new(order: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0, 1)");
        Self::with_lambda(order, lambda)
    }

    /// The `λ = 1` limit: wherever the longest context was seen, its maximum
    /// likelihood estimate is used unchanged, so a corpus in which every
    /// context has a single successor scores zero entropy on itself.
    pub fn unsmoothed(order: usize) -> Self {
        Self::with_lambda(order, 1.0)
    }

    fn with_lambda(order: usize, lambda: f64) -> Self {
        assert!(order >= 1, "n-gram order must be at least 1");
        let mut ids = HashMap::new();
        ids.insert(START.to_string(), START_ID);
        NgramModel {
            order,
            lambda,
            ids,
            unigram: HashMap::new(),
            total: 0,
            contexts: vec![HashMap::new(); order - 1],
        }
    }

    pub fn train<S: AsRef<str>>(tokens: &[S], order: usize, lambda: f64) -> Self {
        let mut m = NgramModel::new(order, lambda);
        m.add_sequence(tokens);
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of distinct known tokens.
    pub fn vocabulary_size(&self) -> usize {
        self.unigram.len()
    }

    pub fn token_count(&self) -> u64 {
        self.total
    }

    /// Known tokens, excluding the start marker.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .ids
            .iter()
            .filter(|(_, &id)| id != START_ID && self.unigram.contains_key(&id))
            .map(|(t, _)| t.as_str())
            .collect();
        v.sort_unstable();
        v
    }

    fn intern(&mut self, token: &str) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(token.to_string()).or_insert(next)
    }

    /// Train on one sequence, padded with start markers.
    pub fn add_sequence<S: AsRef<str>>(&mut self, tokens: &[S]) {
        let ids: Vec<u32> = tokens.iter().map(|t| self.intern(t.as_ref())).collect();
        let mut history = vec![START_ID; self.order - 1];
        for &id in &ids {
            *self.unigram.entry(id).or_default() += 1;
            self.total += 1;
            for k in 1..self.order {
                let ctx = history[history.len() - k..].to_vec();
                let entry = self.contexts[k - 1].entry(ctx).or_default();
                entry.total += 1;
                *entry.next.entry(id).or_default() += 1;
            }
            if self.order > 1 {
                history.remove(0);
                history.push(id);
            }
        }
    }

    fn unigram_prob(&self, id: Option<u32>) -> f64 {
        let denom = (self.total + self.unigram.len() as u64 + 1) as f64;
        let c = id.and_then(|i| self.unigram.get(&i)).copied().unwrap_or(0);
        (c + 1) as f64 / denom
    }

    fn prob_ids(&self, context: &[u32], id: Option<u32>) -> f64 {
        let mut p = self.unigram_prob(id);
        for k in 1..self.order.min(context.len() + 1) {
            let ctx = &context[context.len() - k..];
            if let Some(counts) = self.contexts[k - 1].get(ctx) {
                let c = id.and_then(|i| counts.next.get(&i)).copied().unwrap_or(0);
                p = self.lambda * c as f64 / counts.total as f64 + (1.0 - self.lambda) * p;
            }
        }
        p
    }

    fn lookup(&self, token: &str) -> Option<u32> {
        self.ids
            .get(token)
            .copied()
            .filter(|id| self.unigram.contains_key(id))
    }

    fn context_ids<S: AsRef<str>>(&self, context: &[S]) -> Vec<u32> {
        let want = self.order - 1;
        let mut ids: Vec<u32> = context
            .iter()
            .rev()
            .take(want)
            .map(|t| match t.as_ref() {
                START => START_ID,
                other => self.lookup(other).unwrap_or(u32::MAX),
            })
            .collect();
        ids.reverse();
        let mut padded = vec![START_ID; want - ids.len()];
        padded.extend(ids);
        padded
    }

    /// `p(token | context)`; `context` is the preceding tokens, most recent
    /// last, and is padded with start markers when short.
    pub fn prob<S: AsRef<str>>(&self, context: &[S], token: &str) -> f64 {
        let ctx = self.context_ids(context);
        self.prob_ids(&ctx, self.lookup(token))
    }

    /// Probability of the unknown-token slot after `context`.
    pub fn prob_unknown<S: AsRef<str>>(&self, context: &[S]) -> f64 {
        let ctx = self.context_ids(context);
        self.prob_ids(&ctx, None)
    }

    /// `−log_base p(t_i | t_{i−n+1} … t_{i−1})` for every token of a sequence.
    pub fn entropies<S: AsRef<str>>(&self, tokens: &[S], log_base: f64) -> Vec<f64> {
        let mut history = vec![START_ID; self.order - 1];
        let ln_base = log_base.ln();
        let mut out = Vec::with_capacity(tokens.len());
        for t in tokens {
            let id = self.lookup(t.as_ref());
            let p = self.prob_ids(&history, id);
            let e = -p.ln() / ln_base;
            out.push(if e == 0.0 { 0.0 } else { e });
            if self.order > 1 {
                history.remove(0);
                history.push(id.unwrap_or(u32::MAX));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyAggregate {
    pub max: f64,
    pub upp_quar: f64,
    pub med: f64,
    pub sum: f64,
    pub avg: f64,
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n − 1)·q`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Max, 75 % quantile, median, sum and mean; `None` for an empty list.
pub fn aggregate(values: &[f64]) -> Option<EntropyAggregate> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = values.iter().sum();
    Some(EntropyAggregate {
        max: sorted[sorted.len() - 1],
        upp_quar: quantile(&sorted, 0.75),
        med: quantile(&sorted, 0.5),
        sum,
        avg: sum / values.len() as f64,
    })
}

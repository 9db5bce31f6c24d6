// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;

use fixedbitset::FixedBitSet;
use rand::Rng;

use super::{midpoint, Search};
use crate::features::CATALOG;
use crate::rules::{Column, Condition, Op, Rule, RuleSet, ABSENT_CODE};

const MAX_EXCL_RULES: usize = 5;

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    op: Op,
    threshold: f64,
    code: u32,
    pos: usize,
    neg: usize,
}

impl Split {
    fn condition(&self, search: &Search<'_>) -> Condition {
        let name = CATALOG[self.feature].0;
        match self.op {
            Op::Eq => Condition::text(name, Op::Eq, &search.space.categories[self.feature][self.code as usize]),
            op => Condition::num(name, op, self.threshold),
        }
    }
}

/// `pos / (pos + neg)` compared exactly; higher is better.
fn cmp_precision(a: (usize, usize), b: (usize, usize)) -> Ordering {
    let lhs = a.0 as u128 * (b.0 + b.1) as u128;
    let rhs = b.0 as u128 * (a.0 + a.1) as u128;
    lhs.cmp(&rhs)
}

fn precision(pos: usize, neg: usize) -> f64 {
    pos as f64 / (pos + neg) as f64
}

/// Visit every admissible single-condition refinement of `covered`.
fn for_each_split(
    search: &Search<'_>,
    covered: &FixedBitSet,
    positive: &FixedBitSet,
    mut visit: impl FnMut(Split),
) {
    for (fi, (name, _)) in CATALOG.iter().enumerate() {
        if search.constraints.blacklist.contains(*name) {
            continue;
        }
        match search.index.column(fi) {
            Column::Num(vals) => {
                // runs of equal values among covered records: (value, pos, neg)
                let mut runs: Vec<(f64, usize, usize)> = Vec::new();
                for &i in &search.space.sorted[fi] {
                    let i = i as usize;
                    if !covered.contains(i) {
                        continue;
                    }
                    let v = vals[i];
                    let is_pos = positive.contains(i);
                    match runs.last_mut() {
                        Some(last) if last.0 == v => {
                            if is_pos {
                                last.1 += 1
                            } else {
                                last.2 += 1
                            }
                        }
                        _ => runs.push((v, usize::from(is_pos), usize::from(!is_pos))),
                    }
                }
                let total_pos: usize = runs.iter().map(|r| r.1).sum();
                let total_neg: usize = runs.iter().map(|r| r.2).sum();
                let (mut lp, mut ln) = (0, 0);
                for w in 0..runs.len().saturating_sub(1) {
                    lp += runs[w].1;
                    ln += runs[w].2;
                    let threshold = midpoint(runs[w].0, runs[w + 1].0);
                    let base = Split {
                        feature: fi,
                        op: Op::Leq,
                        threshold,
                        code: 0,
                        pos: lp,
                        neg: ln,
                    };
                    visit(base);
                    visit(Split {
                        op: Op::Geq,
                        pos: total_pos - lp,
                        neg: total_neg - ln,
                        ..base
                    });
                }
            }
            Column::Cat { codes, values } => {
                let mut counts = vec![(0usize, 0usize); values.len()];
                for i in covered.ones() {
                    let code = codes[i];
                    if code != ABSENT_CODE {
                        if positive.contains(i) {
                            counts[code as usize].0 += 1;
                        } else {
                            counts[code as usize].1 += 1;
                        }
                    }
                }
                for (code, (pos, neg)) in counts.into_iter().enumerate() {
                    visit(Split {
                        feature: fi,
                        op: Op::Eq,
                        threshold: 0.0,
                        code: code as u32,
                        pos,
                        neg,
                    });
                }
            }
        }
    }
}

struct Grown {
    rule: Rule,
    covered: FixedBitSet,
    pos: usize,
    neg: usize,
}

/// Grow one rule over `in_play` that separates `positive` records from the
/// rest, adding the most precise condition (coverage breaks ties) drawn from
/// a restricted candidate list until the rule covers no negatives.
fn grow<R: Rng>(
    search: &Search<'_>,
    in_play: &FixedBitSet,
    positive: &FixedBitSet,
    rng: &mut R,
) -> Option<Grown> {
    let alpha = search.config.rcl_alpha;
    let mut covered = in_play.clone();
    let mut conditions: Vec<Condition> = Vec::new();
    loop {
        let pos = covered.intersection_count(positive);
        let neg = covered.count_ones(..) - pos;
        if neg == 0 || conditions.len() >= search.config.max_conditions {
            break;
        }
        let current = (pos, neg);
        let admissible =
            |s: &Split| s.pos > 0 && cmp_precision((s.pos, s.neg), current) == Ordering::Greater;
        let mut best: Option<Split> = None;
        for_each_split(search, &covered, positive, |s| {
            if !admissible(&s) {
                return;
            }
            let better = match &best {
                None => true,
                Some(b) => cmp_precision((s.pos, s.neg), (b.pos, b.neg))
                    .then(s.pos.cmp(&b.pos))
                    == Ordering::Greater,
            };
            if better {
                best = Some(s);
            }
        });
        let Some(best) = best else {
            break;
        };
        let chosen = if alpha >= 1.0 {
            best
        } else {
            let best_prec = precision(best.pos, best.neg);
            let mut rcl = Vec::new();
            for_each_split(search, &covered, positive, |s| {
                if admissible(&s)
                    && precision(s.pos, s.neg) >= alpha * best_prec
                    && s.pos as f64 >= alpha * best.pos as f64
                {
                    rcl.push(s);
                }
            });
            rcl[rng.gen_range(0..rcl.len())]
        };
        let cond = chosen.condition(search);
        covered.intersect_with(&search.index.condition_mask(&cond));
        conditions.push(cond);
    }
    if conditions.is_empty() {
        return None;
    }
    let pos = covered.intersection_count(positive);
    let neg = covered.count_ones(..) - pos;
    Some(Grown {
        rule: Rule::new(conditions),
        covered,
        pos,
        neg,
    })
}

/// Separate-and-conquer induction of a skip ruleset from TRIGGER labels.
/// Inclusion rules are emitted only when they cover no TRIGGER record. When
/// no such rule remains, the next best rule is kept if exclusion rules can
/// remove all of its false positives.
pub fn induce_ruleset<R: Rng>(search: &Search<'_>, trigger: &FixedBitSet, rng: &mut R) -> RuleSet {
    let n = search.index.len();
    let mut remaining = FixedBitSet::with_capacity(n);
    remaining.insert_range(..);
    remaining.difference_with(trigger);
    let mut rs = RuleSet::default();
    let mut leftover = None;
    while remaining.count_ones(..) > 0 && rs.incl.len() < search.config.max_rules {
        let mut in_play = remaining.clone();
        in_play.union_with(trigger);
        match grow(search, &in_play, &remaining, rng) {
            Some(g) if g.neg == 0 => {
                remaining.difference_with(&g.covered);
                rs.incl.push(g.rule);
            }
            Some(g) => {
                leftover = Some(g);
                break;
            }
            None => break,
        }
    }
    if let Some(g) = leftover.filter(|g| g.pos > g.neg) {
        let mut false_pos = g.covered.clone();
        false_pos.intersect_with(trigger);
        let mut pool = g.covered.clone();
        let mut excl = Vec::new();
        while false_pos.count_ones(..) > 0 && excl.len() < MAX_EXCL_RULES {
            match grow(search, &pool, &false_pos, rng) {
                Some(e) if e.neg == 0 => {
                    false_pos.difference_with(&e.covered);
                    pool.difference_with(&e.covered);
                    excl.push(e.rule);
                }
                _ => break,
            }
        }
        if false_pos.count_ones(..) == 0 {
            rs.incl.push(g.rule);
            rs.excl.extend(excl);
        }
    }
    rs
}

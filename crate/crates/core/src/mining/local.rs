// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::{ParetoArchive, Search, SearchSpace};
use crate::features::{feature_index, CATALOG};
use crate::rules::{Condition, Literal, Op, Rule, RuleSet};

/// Neighbor rule that replaces rule `at` of a section.
fn with_rule(rs: &RuleSet, incl: bool, at: usize, rule: Option<Rule>) -> RuleSet {
    let mut out = rs.clone();
    let rules = if incl { &mut out.incl } else { &mut out.excl };
    match rule {
        Some(r) => rules[at] = r,
        None => {
            rules.remove(at);
        }
    }
    out
}

fn adjacent_splits(splits: &[f64], t: f64) -> [Option<f64>; 2] {
    let below = splits.partition_point(|&s| s < t);
    let above = splits.partition_point(|&s| s <= t);
    [below.checked_sub(1).map(|i| splits[i]), splits.get(above).copied()]
}

fn random_condition<R: Rng>(search: &Search<'_>, rng: &mut R) -> Option<Condition> {
    let space: &SearchSpace = search.space;
    let allowed: Vec<usize> = (0..CATALOG.len())
        .filter(|&fi| !search.constraints.blacklist.contains(CATALOG[fi].0))
        .filter(|&fi| !space.splits[fi].is_empty() || !space.categories[fi].is_empty())
        .collect();
    if allowed.is_empty() {
        return None;
    }
    let fi = allowed[rng.gen_range(0..allowed.len())];
    let name = CATALOG[fi].0;
    Some(if SearchSpace::is_numeric(fi) {
        let splits = &space.splits[fi];
        let t = splits[rng.gen_range(0..splits.len())];
        let op = if rng.gen_bool(0.5) { Op::Leq } else { Op::Geq };
        Condition::num(name, op, t)
    } else {
        let cats = &space.categories[fi];
        Condition::text(name, Op::Eq, &cats[rng.gen_range(0..cats.len())])
    })
}

/// Drop-condition, drop-rule, threshold-shift and random add-condition
/// neighbors. Pinned rules are left alone.
fn neighbors<R: Rng>(search: &Search<'_>, rs: &RuleSet, rng: &mut R) -> Vec<RuleSet> {
    let mut out = Vec::new();
    let pinned = &search.constraints.pinned;
    for incl in [true, false] {
        let rules = if incl { &rs.incl } else { &rs.excl };
        for (ri, rule) in rules.iter().enumerate() {
            if incl && pinned.contains(rule) {
                continue;
            }
            out.push(with_rule(rs, incl, ri, None));
            if rule.conditions.len() > 1 {
                for ci in 0..rule.conditions.len() {
                    let mut r = rule.clone();
                    r.conditions.remove(ci);
                    out.push(with_rule(rs, incl, ri, Some(r)));
                }
            }
            for (ci, c) in rule.conditions.iter().enumerate() {
                let (Literal::Num(t), Some(fi)) = (&c.value, feature_index(&c.feature)) else {
                    continue;
                };
                for next in adjacent_splits(&search.space.splits[fi], *t).into_iter().flatten() {
                    let mut r = rule.clone();
                    r.conditions[ci].value = Literal::Num(next);
                    out.push(with_rule(rs, incl, ri, Some(r)));
                }
            }
        }
    }
    let editable: Vec<(bool, usize)> = rs
        .incl
        .iter()
        .enumerate()
        .filter(|(_, r)| !pinned.contains(r))
        .map(|(i, _)| (true, i))
        .chain((0..rs.excl.len()).map(|i| (false, i)))
        .collect();
    if !editable.is_empty() {
        for _ in 0..search.config.add_samples {
            let (incl, ri) = editable[rng.gen_range(0..editable.len())];
            let Some(c) = random_condition(search, rng) else {
                break;
            };
            let mut r = if incl { rs.incl[ri].clone() } else { rs.excl[ri].clone() };
            if r.conditions.len() >= search.config.max_conditions || r.uses(&c.feature) {
                continue;
            }
            r.conditions.push(c);
            out.push(with_rule(rs, incl, ri, Some(r)));
        }
    }
    out
}

/// Hill-climb on the focus score. Every neighbor is offered to the archive.
/// Stops after `budget` consecutive rounds without improvement. Returns the
/// visited states, starting with the input.
pub fn local_search<R: Rng>(
    search: &Search<'_>,
    archive: &mut ParetoArchive,
    start: RuleSet,
    budget: usize,
    rng: &mut R,
) -> Vec<RuleSet> {
    let mut path = vec![start.clone()];
    if budget == 0 {
        return path;
    }
    let mut current = search.constraints.sanitize(start);
    let mut current_score = search.score(&search.evaluate(&current));
    let mut stall = 0;
    while stall < budget {
        let mut best: Option<(f64, RuleSet)> = None;
        for n in neighbors(search, &current, rng) {
            let (rs, ov) = search.offer(archive, n);
            let s = search.score(&ov);
            if best.as_ref().map_or(true, |(b, _)| s < *b) {
                best = Some((s, rs));
            }
        }
        match best {
            Some((s, rs)) if s < current_score => {
                current = rs;
                current_score = s;
                path.push(current.clone());
                stall = 0;
            }
            _ if search.config.add_samples == 0 => break,
            _ => stall += 1,
        }
    }
    path
}

/// Walk from `a` to `b` one rule at a time, removing rules only in `a` or
/// adding rules only in `b`, always taking the best-scoring step. Each step
/// is offered to the archive. Returns the intermediate rulesets.
pub fn path_relink(
    search: &Search<'_>,
    archive: &mut ParetoArchive,
    a: &RuleSet,
    b: &RuleSet,
) -> Vec<RuleSet> {
    #[derive(Clone)]
    enum Move {
        Remove(bool, Rule),
        Add(bool, Rule),
    }
    let mut moves: Vec<Move> = Vec::new();
    for (incl, ra, rb) in [(true, &a.incl, &b.incl), (false, &a.excl, &b.excl)] {
        moves.extend(ra.iter().filter(|r| !rb.contains(r)).map(|r| Move::Remove(incl, r.clone())));
        moves.extend(rb.iter().filter(|r| !ra.contains(r)).map(|r| Move::Add(incl, r.clone())));
    }
    let apply = |rs: &RuleSet, m: &Move| {
        let mut out = rs.clone();
        match m {
            Move::Remove(incl, r) => {
                let rules = if *incl { &mut out.incl } else { &mut out.excl };
                rules.retain(|x| x != r);
            }
            Move::Add(incl, r) => {
                if *incl { &mut out.incl } else { &mut out.excl }.push(r.clone());
            }
        }
        out
    };
    let mut current = a.clone();
    let mut path = Vec::new();
    while !moves.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (i, m) in moves.iter().enumerate() {
            let (_, ov) = search.offer(archive, apply(&current, m));
            let s = search.score(&ov);
            if best.map_or(true, |(b, _)| s < b) {
                best = Some((s, i));
            }
        }
        let (_, i) = best.expect("moves left");
        current = apply(&current, &moves.remove(i));
        if !moves.is_empty() {
            path.push(current.clone());
        }
    }
    path
}

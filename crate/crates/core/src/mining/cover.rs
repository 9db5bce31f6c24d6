// SPDX-License-Identifier: Apache-2.0

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::rules::EvalIndex;

/// Pick a set of records that covers every remark with at least one
/// potential trigger. Sole triggers are always picked. The rest is chosen
/// greedily from a restricted candidate list: records whose count of still
/// uncovered remarks reaches `alpha` times the best count. With `alpha = 1`
/// ties go to the lowest record index; otherwise the pick is uniform.
///
/// Returns the TRIGGER labels; every other record is NO_TRIGGER.
pub fn greedy_set_cover<R: Rng>(index: &EvalIndex, rng: &mut R, alpha: f64) -> FixedBitSet {
    greedy_set_cover_for(index.len(), index.remarks.iter().map(|r| r.triggers.as_slice()), rng, alpha)
}

pub fn greedy_set_cover_for<'a, R: Rng>(
    records: usize,
    remarks: impl Iterator<Item = &'a [usize]>,
    rng: &mut R,
    alpha: f64,
) -> FixedBitSet {
    let remarks: Vec<&[usize]> = remarks.filter(|t| !t.is_empty()).collect();
    let mut selected = FixedBitSet::with_capacity(records);
    for t in &remarks {
        if t.len() == 1 {
            selected.insert(t[0]);
        }
    }
    let mut uncovered: Vec<&[usize]> = remarks
        .into_iter()
        .filter(|t| !t.iter().any(|&i| selected.contains(i)))
        .collect();
    let mut coverage = vec![0usize; records];
    while !uncovered.is_empty() {
        coverage.iter_mut().for_each(|c| *c = 0);
        for t in &uncovered {
            for &i in *t {
                coverage[i] += 1;
            }
        }
        let best = *coverage.iter().max().expect("records exist");
        let bar = alpha * best as f64;
        let rcl: Vec<usize> = (0..records)
            .filter(|&i| coverage[i] > 0 && coverage[i] as f64 >= bar)
            .collect();
        let pick = if alpha >= 1.0 {
            rcl[0]
        } else {
            rcl[rng.gen_range(0..rcl.len())]
        };
        selected.insert(pick);
        uncovered.retain(|t| !t.contains(&pick));
    }
    selected
}

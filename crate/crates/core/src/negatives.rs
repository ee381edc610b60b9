//! Negative sampling by head or tail corruption.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Triple;

/// Resampling attempts before a known-true corruption is kept anyway.
pub const MAX_FILTER_ATTEMPTS: usize = 20;

/// `n_neg` corruptions per positive, grouped by positive. Each corruption
/// replaces the head or the tail (probability 1/2 each) by a uniformly drawn
/// entity. With a filter set, corruptions that are known triples are redrawn
/// up to [`MAX_FILTER_ATTEMPTS`] times; the last draw is kept regardless.
pub fn sample_negatives(
    batch: &[Triple],
    num_entities: usize,
    n_neg: usize,
    rng: &mut ChaCha8Rng,
    filter: Option<&HashSet<Triple>>,
) -> Vec<Triple> {
    let mut out = Vec::with_capacity(batch.len() * n_neg);
    if num_entities == 0 {
        return out;
    }
    for &pos in batch {
        for _ in 0..n_neg {
            let mut neg = corrupt(pos, num_entities, rng);
            if let Some(known) = filter {
                let mut attempts = 1;
                while known.contains(&neg) && attempts < MAX_FILTER_ATTEMPTS {
                    neg = corrupt(pos, num_entities, rng);
                    attempts += 1;
                }
            }
            out.push(neg);
        }
    }
    out
}

#[inline]
fn corrupt(pos: Triple, num_entities: usize, rng: &mut ChaCha8Rng) -> Triple {
    let e = rng.random_range(0..num_entities as u32);
    if rng.random_bool(0.5) {
        Triple { head: e, ..pos }
    } else {
        Triple { tail: e, ..pos }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn single_entity_returns_positive() {
        let t = Triple::new(0, 0, 0);
        let n = sample_negatives(&[t], 1, 3, &mut seed::rng(0), None);
        assert_eq!(n, vec![t; 3]);
    }

    #[test]
    fn deterministic_stream() {
        let batch = [Triple::new(0, 0, 1), Triple::new(2, 1, 3)];
        let a = sample_negatives(&batch, 10, 4, &mut seed::rng(5), None);
        let b = sample_negatives(&batch, 10, 4, &mut seed::rng(5), None);
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for (i, n) in a.iter().enumerate() {
            let p = batch[i / 4];
            assert_eq!(n.relation, p.relation);
            assert!(n.head == p.head || n.tail == p.tail);
        }
    }

    #[test]
    fn filtered_negatives_avoid_known() {
        let known: HashSet<Triple> = [(0, 0, 1), (1, 0, 2), (2, 0, 3), (3, 0, 4), (0, 0, 2)]
            .iter()
            .map(|&(h, r, t)| Triple::new(h, r, t))
            .collect();
        let batch: Vec<Triple> = known.iter().copied().collect();
        for s in 0..50 {
            let negs = sample_negatives(&batch, 10, 16, &mut seed::rng(s), Some(&known));
            assert!(negs.iter().all(|n| !known.contains(n)));
        }
    }
}

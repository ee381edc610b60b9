//! Seeded synthetic graphs for experiments, tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::Triple;
use crate::seed;

/// A generated dataset with a train/valid/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticKg {
    pub num_entities: usize,
    pub num_relations: usize,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl SyntheticKg {
    pub fn all(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

/// Relation rules of the compositional graph: `(source role, target role,
/// community offset)`.
const RULES: [(usize, usize, usize); 8] = [
    (0, 1, 0),
    (1, 2, 0),
    (2, 0, 0),
    (0, 2, 1),
    (1, 0, 1),
    (2, 1, 1),
    (0, 1, 2),
    (1, 2, 3),
];

/// Role sizes inside a community; ten entities each.
const ROLES: [usize; 3] = [4, 3, 3];

/// A graph with hidden structure. Entities live in `communities` ring-ordered
/// groups of ten, split into three roles. Relation `r` links every entity of
/// role `src` in community `c` to every entity of role `dst` in community
/// `c + offset` (mod `communities`). No rule links a role to itself, so a
/// triple never holds in both directions.
///
/// Triples are shuffled and split 70/20/10 into train, valid and test.
pub fn compositional_kg(communities: usize, seed: u64) -> SyntheticKg {
    let size: usize = ROLES.iter().sum();
    let members = |c: usize, role: usize| {
        let start = c * size + ROLES[..role].iter().sum::<usize>();
        (start..start + ROLES[role]).map(|e| e as u32)
    };
    let mut triples = Vec::new();
    for c in 0..communities {
        for (r, &(src, dst, offset)) in RULES.iter().enumerate() {
            let target = (c + offset) % communities;
            for h in members(c, src) {
                for t in members(target, dst) {
                    triples.push(Triple::new(h, r as u32, t));
                }
            }
        }
    }
    triples.sort_unstable();
    triples.dedup();
    let mut rng = seed::rng(seed);
    triples.shuffle(&mut rng);
    let n = triples.len();
    let n_train = n * 7 / 10;
    let n_valid = n * 2 / 10;
    let test = triples.split_off(n_train + n_valid);
    let valid = triples.split_off(n_train);
    SyntheticKg {
        num_entities: communities * size,
        num_relations: RULES.len(),
        train: triples,
        valid,
        test,
    }
}

/// `num_edges` uniformly random triples without self-loops.
pub fn random_triples(num_nodes: usize, num_edges: usize, num_relations: usize, seed: u64) -> Vec<Triple> {
    assert!(num_nodes >= 2 && num_relations >= 1, "need two nodes and one relation");
    let mut rng = seed::rng(seed);
    (0..num_edges)
        .map(|_| {
            let h = rng.random_range(0..num_nodes as u32);
            let mut t = rng.random_range(0..num_nodes as u32 - 1);
            if t >= h {
                t += 1;
            }
            Triple::new(h, rng.random_range(0..num_relations as u32), t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositional_shape() {
        let kg = compositional_kg(20, 1);
        assert_eq!(kg.num_entities, 200);
        let n = kg.all().count();
        assert_eq!(n, kg.train.len() + kg.valid.len() + kg.test.len());
        assert!((1400..2000).contains(&n), "{n}");
        assert_eq!(kg.train.len(), n * 7 / 10);
        assert_eq!(kg, compositional_kg(20, 1));
        assert_ne!(kg.train, compositional_kg(20, 2).train);
        // No rule produces both directions of a pair.
        let set: std::collections::HashSet<_> = kg.all().collect();
        assert!(kg.all().all(|t| !set.contains(&Triple::new(t.tail, t.relation, t.head))));
    }

    #[test]
    fn random_triples_are_in_range() {
        let t = random_triples(5, 200, 3, 7);
        assert_eq!(t.len(), 200);
        assert!(t.iter().all(|t| t.head < 5 && t.tail < 5 && t.relation < 3 && t.head != t.tail));
        assert_eq!(t, random_triples(5, 200, 3, 7));
    }
}

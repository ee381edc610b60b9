//! Filtered ranking evaluation.
//!
//! Every query ranks the true answer against all candidates after removing
//! the other known-true answers. Ties are resolved with the realistic rank,
//! the mean of the optimistic and pessimistic positions, so a constant
//! scorer cannot look good.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::encoder;
use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::params::{ParameterStore, Real};
use crate::seed;
use crate::tokenizer::{EdgeDirection, NewEdge, NodeHash, NodeHashes, Tokenizer};

pub trait Scorer: Sync {
    fn score(&self, head: u32, relation: u32, tail: u32) -> f64;
}

impl<T: Fn(u32, u32, u32) -> f64 + Sync> Scorer for T {
    fn score(&self, head: u32, relation: u32, tail: u32) -> f64 {
        self(head, relation, tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    /// `(?, r, t)`
    Head,
    /// `(h, r, ?)`
    Tail,
    /// `(h, ?, t)`
    Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedQuery {
    pub triple: Triple,
    pub kind: QueryKind,
    pub rank: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mrr: f64,
    #[serde(rename = "hits@1")]
    pub hits_at_1: f64,
    #[serde(rename = "hits@3")]
    pub hits_at_3: f64,
    #[serde(rename = "hits@10")]
    pub hits_at_10: f64,
    pub num_queries: usize,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub queries: Vec<RankedQuery>,
    pub metrics: Metrics,
}

impl RankingReport {
    fn from_queries(queries: Vec<RankedQuery>) -> Result<Self> {
        let ranks: Vec<f64> = queries.iter().map(|q| q.rank).collect();
        let metrics = aggregate_metrics(&ranks)?;
        Ok(Self { queries, metrics })
    }

    /// `head,relation,tail,kind,rank` CSV of every query.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("head,relation,tail,kind,rank\n");
        for q in &self.queries {
            let kind = match q.kind {
                QueryKind::Head => "head",
                QueryKind::Tail => "tail",
                QueryKind::Relation => "relation",
            };
            s.push_str(&format!(
                "{},{},{},{kind},{}\n",
                q.triple.head, q.triple.relation, q.triple.tail, q.rank
            ));
        }
        s
    }
}

/// MRR and Hits@{1,3,10} over (possibly fractional) ranks.
pub fn aggregate_metrics(ranks: &[f64]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty rank list"));
    }
    let n = ranks.len() as f64;
    let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(Metrics {
        mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
        hits_at_1: hits(1.0),
        hits_at_3: hits(3.0),
        hits_at_10: hits(10.0),
        num_queries: ranks.len(),
    })
}

/// Realistic rank of `candidates[target]` among candidates not `excluded`.
pub fn realistic_rank(scores: &[f64], target: usize, excluded: impl Fn(usize) -> bool) -> f64 {
    let truth = scores[target];
    let mut greater = 0usize;
    let mut equal = 0usize;
    for (c, &s) in scores.iter().enumerate() {
        if c == target || excluded(c) {
            continue;
        }
        if truth.is_nan() || s > truth {
            greater += 1;
        } else if s == truth {
            equal += 1;
        }
    }
    let optimistic = greater + 1;
    let pessimistic = greater + equal + 1;
    (optimistic + pessimistic) as f64 / 2.0
}

/// Deduplicated set of every known-true triple.
pub type KnownTriples = HashSet<Triple>;

/// Head and tail queries for every test triple, pooled into one report.
/// Fails on an empty test set.
pub fn filtered_ranks<S: Scorer + ?Sized>(
    scorer: &S,
    test: &[Triple],
    known: &KnownTriples,
    num_entities: usize,
) -> Result<RankingReport> {
    let queries: Vec<RankedQuery> = test
        .par_iter()
        .flat_map_iter(|&t| {
            let mut scores = vec![0.0; num_entities];
            for (c, s) in scores.iter_mut().enumerate() {
                *s = scorer.score(t.head, t.relation, c as u32);
            }
            let tail_rank = realistic_rank(&scores, t.tail as usize, |c| {
                known.contains(&Triple::new(t.head, t.relation, c as u32))
            });
            for (c, s) in scores.iter_mut().enumerate() {
                *s = scorer.score(c as u32, t.relation, t.tail);
            }
            let head_rank = realistic_rank(&scores, t.head as usize, |c| {
                known.contains(&Triple::new(c as u32, t.relation, t.tail))
            });
            [
                RankedQuery {
                    triple: t,
                    kind: QueryKind::Head,
                    rank: head_rank,
                },
                RankedQuery {
                    triple: t,
                    kind: QueryKind::Tail,
                    rank: tail_rank,
                },
            ]
        })
        .collect();
    RankingReport::from_queries(queries)
}

/// Ranks the true relation of each `(h, ?, t)` among `num_relations`
/// candidates, filtering other known relations between the same pair.
pub fn relation_prediction_ranks<S: Scorer + ?Sized>(
    scorer: &S,
    test: &[Triple],
    known: &KnownTriples,
    num_relations: usize,
) -> Result<RankingReport> {
    let queries: Vec<RankedQuery> = test
        .par_iter()
        .map(|&t| {
            let scores: Vec<f64> = (0..num_relations as u32)
                .map(|r| scorer.score(t.head, r, t.tail))
                .collect();
            let rank = realistic_rank(&scores, t.relation as usize, |r| {
                known.contains(&Triple::new(t.head, r as u32, t.tail))
            });
            RankedQuery {
                triple: t,
                kind: QueryKind::Relation,
                rank,
            }
        })
        .collect();
    RankingReport::from_queries(queries)
}

/// Scores triples from materialized entity encodings.
pub struct EmbeddingScorer<'a, F> {
    store: &'a ParameterStore<F>,
    entities: Vec<F>,
    dim: usize,
}

/// Encodes all hashes in eval mode, in chunks.
pub fn encode_all<F: Real>(store: &ParameterStore<F>, hashes: &[NodeHash]) -> Result<Vec<F>> {
    let mut out = Vec::with_capacity(hashes.len() * store.shape.dim);
    for chunk in hashes.chunks(4096) {
        let refs: Vec<&NodeHash> = chunk.iter().collect();
        out.extend(encoder::encode_inference(store, &refs)?.outputs);
    }
    Ok(out)
}

impl<'a, F: Real> EmbeddingScorer<'a, F> {
    pub fn new(store: &'a ParameterStore<F>, hashes: &NodeHashes) -> Result<Self> {
        crate::train::check_compatible(store, hashes)?;
        Ok(Self {
            store,
            entities: encode_all(store, &hashes.hashes)?,
            dim: store.shape.dim,
        })
    }

    pub fn entity(&self, e: u32) -> &[F] {
        &self.entities[e as usize * self.dim..(e as usize + 1) * self.dim]
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn score_vectors(&self, head: &[F], relation: u32, tail: &[F]) -> f64 {
        self.store
            .shape
            .decoder
            .score(head, self.store.relations.row(relation as usize), tail)
            .f64()
    }
}

impl<F: Real> Scorer for EmbeddingScorer<'_, F> {
    fn score(&self, head: u32, relation: u32, tail: u32) -> f64 {
        self.score_vectors(self.entity(head), relation, self.entity(tail))
    }
}

/// Edges of one entity that is absent from the training graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnseenNode {
    pub edges: Vec<NewEdge>,
}

/// Mask-one-edge protocol: for every unseen node and each of its edges, the
/// node is hashed from its remaining edges, and the masked edge's endpoint is
/// ranked among all seen entities. Other edges of the same node with the same
/// relation and direction are filtered. Unseen node `i` appears in the report
/// as entity id `num_entities + i`.
pub fn out_of_sample_eval<F: Real>(
    tokenizer: &Tokenizer<'_>,
    scorer: &EmbeddingScorer<'_, F>,
    unseen: &[UnseenNode],
    seed: u64,
) -> Result<RankingReport> {
    let n = scorer.num_entities();
    let store = scorer.store;
    let per_node: Vec<Result<Vec<RankedQuery>>> = unseen
        .par_iter()
        .enumerate()
        .map(|(i, node)| {
            let id = (n + i) as u32;
            let mut out = Vec::with_capacity(node.edges.len());
            for (j, masked) in node.edges.iter().enumerate() {
                let rest: Vec<NewEdge> = node
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|&(x, _)| x != j)
                    .map(|(_, e)| *e)
                    .collect();
                let hash = tokenizer
                    .tokenize_out_of_sample(&rest, seed::mix(seed::mix(seed, i as u64), j as u64))?;
                let emb = encoder::encode_inference(store, &[&hash])?.outputs;
                let r = masked.relation;
                let scores: Vec<f64> = (0..n as u32)
                    .map(|c| match masked.direction {
                        EdgeDirection::Outgoing => scorer.score_vectors(&emb, r, scorer.entity(c)),
                        EdgeDirection::Incoming => scorer.score_vectors(scorer.entity(c), r, &emb),
                    })
                    .collect();
                let rank = realistic_rank(&scores, masked.neighbor as usize, |c| {
                    rest.iter().any(|e| {
                        e.relation == r && e.direction == masked.direction && e.neighbor == c as u32
                    })
                });
                let (triple, kind) = match masked.direction {
                    EdgeDirection::Outgoing => (Triple::new(id, r, masked.neighbor), QueryKind::Tail),
                    EdgeDirection::Incoming => (Triple::new(masked.neighbor, r, id), QueryKind::Head),
                };
                out.push(RankedQuery { triple, kind, rank });
            }
            Ok(out)
        })
        .collect();
    let mut queries = Vec::new();
    for q in per_node {
        queries.extend(q?);
    }
    RankingReport::from_queries(queries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known(triples: &[(u32, u32, u32)]) -> KnownTriples {
        triples.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect()
    }

    #[test]
    fn metric_arithmetic() {
        let m = aggregate_metrics(&[1.0, 2.0, 4.0]).unwrap();
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-12);
        assert!((m.hits_at_1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.hits_at_3 - 2.0 / 3.0).abs() < 1e-12);
        let m = aggregate_metrics(&[1.0; 4]).unwrap();
        assert_eq!((m.mrr, m.hits_at_1, m.hits_at_3, m.hits_at_10), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(aggregate_metrics(&[11.0, 11.0]).unwrap().hits_at_10, 0.0);
        assert!(aggregate_metrics(&[]).is_err());
    }

    #[test]
    fn metrics_json_keys() {
        let m = aggregate_metrics(&[1.0, 2.0]).unwrap();
        assert_eq!(
            m.to_json(),
            r#"{"mrr":0.75,"hits@1":0.5,"hits@3":1.0,"hits@10":1.0,"num_queries":2}"#
        );
    }

    #[test]
    fn oracle_scorer_ranks_first() {
        let k = known(&[(0, 0, 1), (1, 0, 2), (2, 0, 3)]);
        let scorer = |h: u32, r: u32, t: u32| if k.contains(&Triple::new(h, r, t)) { 1.0 } else { 0.0 };
        let test = [Triple::new(1, 0, 2)];
        let rep = filtered_ranks(&scorer, &test, &k, 4).unwrap();
        assert!(rep.queries.iter().all(|q| q.rank == 1.0));
        assert_eq!(rep.metrics.mrr, 1.0);
        assert_eq!(rep.metrics.num_queries, 2);
    }

    #[test]
    fn constant_scorer_realistic_rank() {
        // Tail query over 4 candidates: the true tail, one filtered tail and
        // two unfiltered ties -> (1 + 3) / 2.
        let k = known(&[(0, 0, 1), (0, 0, 2)]);
        let rep = filtered_ranks(&|_, _, _| 0.5, &[Triple::new(0, 0, 1)], &k, 4).unwrap();
        let tail = rep.queries.iter().find(|q| q.kind == QueryKind::Tail).unwrap();
        assert_eq!(tail.rank, 2.0);
    }

    #[test]
    fn relation_ranks() {
        let k = known(&[(0, 0, 1)]);
        let rep = relation_prediction_ranks(&|_, _, _| 0.0, &[Triple::new(0, 0, 1)], &k, 1).unwrap();
        assert_eq!(rep.queries[0].rank, 1.0);

        let k = known(&[(0, 0, 1), (0, 1, 1), (0, 2, 1)]);
        let oracle = |_h: u32, r: u32, _t: u32| if r == 2 { 1.0 } else { 0.0 };
        let rep = relation_prediction_ranks(&oracle, &[Triple::new(0, 2, 1)], &k, 4).unwrap();
        assert_eq!(rep.metrics.mrr, 1.0);
    }
}

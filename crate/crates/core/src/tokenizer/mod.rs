//! Node tokenization.
//!
//! A node is hashed into `k` anchor tokens with their hop distances and `m`
//! relation tokens drawn from its outgoing relation types:
//!
//! ```text
//! hash(n) = [a_1 .. a_k | z_1 .. z_k | r_1 .. r_m]
//! ```
//!
//! Missing slots are filled with `PAD`. A node that reaches no anchor while
//! anchors exist gets `DISCONNECTED` in its first anchor slot.
//!
//! Distance buckets are hop counts `0..=max_distance`; bucket
//! `max_distance + 1` is the unreachable bucket, shared by every padded
//! anchor slot.

mod distance;
mod io;
mod vocab;

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use crate::anchors::{combination_capacity, Capacity};
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId};
use crate::seed;

pub use distance::{DistanceIndex, UNREACHABLE};
pub use vocab::{Token, Vocabulary};

// Salts separating the per-node random streams.
const CONTEXT_SALT: u64 = 0x636f_6e74_6578_74;
const ANCHOR_SALT: u64 = 0x616e_6368_6f72;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreakPolicy {
    /// Order by `(distance, anchor token id)`.
    Canonical,
    /// Canonical selection, then anchors with equal distance are shuffled
    /// among themselves.
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerConfig {
    /// Anchors per node.
    pub k: usize,
    /// Relational context size.
    pub m: usize,
    pub tie_policy: TieBreakPolicy,
    /// Seed for relational-context sampling.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeHash {
    pub anchors: Vec<u32>,
    pub distances: Vec<u32>,
    pub relations: Vec<u32>,
}

/// Hashes for every node of a graph together with the layout they refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeHashes {
    pub k: usize,
    pub m: usize,
    pub num_anchors: usize,
    /// Relation count including inverses.
    pub num_relations: usize,
    pub max_distance: u32,
    pub hashes: Vec<NodeHash>,
}

impl NodeHashes {
    pub fn vocab(&self) -> Vocabulary {
        Vocabulary::new(self.num_anchors, self.num_relations)
    }

    pub fn unreachable_bucket(&self) -> u32 {
        self.max_distance + 1
    }

    /// Rows of the distance table: observed distances plus the unreachable
    /// bucket.
    pub fn num_distance_buckets(&self) -> usize {
        self.max_distance as usize + 2
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }
}

/// Direction of an edge relative to a node that is not in the base graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeDirection {
    /// `(new, relation, neighbor)`
    Outgoing,
    /// `(neighbor, relation, new)`
    Incoming,
}

/// An edge between an unseen node and an entity of the base graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NewEdge {
    /// Direct relation id.
    pub relation: RelationId,
    pub neighbor: EntityId,
    pub direction: EdgeDirection,
}

pub struct Tokenizer<'g> {
    graph: &'g KnowledgeGraph,
    index: &'g DistanceIndex,
    config: TokenizerConfig,
    vocab: Vocabulary,
}

impl<'g> Tokenizer<'g> {
    pub fn new(
        graph: &'g KnowledgeGraph,
        index: &'g DistanceIndex,
        config: TokenizerConfig,
    ) -> Result<Self> {
        if index.num_nodes() != graph.num_entities() {
            return Err(Error::ShapeMismatch(format!(
                "distance index covers {} nodes, graph has {}",
                index.num_nodes(),
                graph.num_entities()
            )));
        }
        Ok(Self {
            graph,
            index,
            config,
            vocab: Vocabulary::new(index.num_anchors(), graph.num_total_relations()),
        })
    }

    pub fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    fn unreachable_bucket(&self) -> u32 {
        self.index.max_distance() + 1
    }

    /// Hashes a node of the base graph.
    pub fn tokenize_node(&self, node: EntityId) -> Result<NodeHash> {
        if node as usize >= self.graph.num_entities() {
            return Err(Error::OutOfBounds {
                kind: "entity",
                id: u64::from(node),
                limit: self.graph.num_entities() as u64,
            });
        }
        let a = self.index.num_anchors();
        let nearest: Vec<(u32, u32)> = (0..a)
            .filter_map(|i| self.index.distance(i, node).map(|d| (d, i as u32)))
            .collect();
        let relations = self.graph.out_relation_types(node)?;
        Ok(self.assemble(nearest, &relations, seed::mix(self.config.seed, u64::from(node)), node as u64))
    }

    pub fn tokenize_all(&self) -> NodeHashes {
        let hashes = (0..self.graph.num_entities() as u32)
            .into_par_iter()
            .map(|n| self.tokenize_node(n).expect("node in bounds"))
            .collect();
        self.wrap(hashes)
    }

    fn wrap(&self, hashes: Vec<NodeHash>) -> NodeHashes {
        NodeHashes {
            k: self.config.k,
            m: self.config.m,
            num_anchors: self.vocab.num_anchors(),
            num_relations: self.vocab.num_relations(),
            max_distance: self.index.max_distance(),
            hashes,
        }
    }

    /// Exact hop distance from every anchor to a new node attached to the base
    /// graph by `edges`; [`UNREACHABLE`] where no path exists.
    pub fn out_of_sample_distances(&self, edges: &[NewEdge]) -> Result<Vec<u32>> {
        self.check_edges(edges)?;
        Ok((0..self.index.num_anchors())
            .map(|i| {
                edges
                    .iter()
                    .filter_map(|e| self.index.distance(i, e.neighbor))
                    .min()
                    .map_or(UNREACHABLE, |d| d + 1)
            })
            .collect())
    }

    /// Hashes a node that is not part of the base graph from its edges to
    /// known entities. The base graph is not modified. Distances beyond the
    /// largest observed one share its bucket.
    pub fn tokenize_out_of_sample(&self, edges: &[NewEdge], seed: u64) -> Result<NodeHash> {
        let distances = self.out_of_sample_distances(edges)?;
        let max = self.index.max_distance();
        let nearest: Vec<(u32, u32)> = distances
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d != UNREACHABLE)
            .map(|(i, &d)| (d.min(max), i as u32))
            .collect();
        let r = self.graph.num_direct_relations() as u32;
        let mut relations: Vec<RelationId> = edges
            .iter()
            .map(|e| match e.direction {
                EdgeDirection::Outgoing => e.relation,
                EdgeDirection::Incoming => e.relation + r,
            })
            .collect();
        relations.sort_unstable();
        relations.dedup();
        Ok(self.assemble(nearest, &relations, seed, seed))
    }

    fn check_edges(&self, edges: &[NewEdge]) -> Result<()> {
        for e in edges {
            if e.neighbor as usize >= self.graph.num_entities() {
                return Err(Error::OutOfBounds {
                    kind: "entity",
                    id: u64::from(e.neighbor),
                    limit: self.graph.num_entities() as u64,
                });
            }
            if e.relation as usize >= self.graph.num_direct_relations() {
                return Err(Error::OutOfBounds {
                    kind: "relation",
                    id: u64::from(e.relation),
                    limit: self.graph.num_direct_relations() as u64,
                });
            }
        }
        Ok(())
    }

    /// Builds a hash from reachable `(distance, anchor)` pairs and the sorted
    /// unique relation types of a node.
    fn assemble(
        &self,
        mut nearest: Vec<(u32, u32)>,
        relation_types: &[RelationId],
        context_seed: u64,
        tie_salt: u64,
    ) -> NodeHash {
        let TokenizerConfig { k, m, .. } = self.config;
        let unreachable = self.unreachable_bucket();

        if nearest.len() > k {
            if k > 0 {
                nearest.select_nth_unstable(k - 1);
            }
            nearest.truncate(k);
        }
        nearest.sort_unstable();
        if let TieBreakPolicy::Stochastic { seed } = self.config.tie_policy {
            let mut rng = seed::rng(seed::mix(seed, tie_salt));
            for group in nearest.chunk_by_mut(|a, b| a.0 == b.0) {
                group.shuffle(&mut rng);
            }
        }

        let mut anchors = Vec::with_capacity(k);
        let mut distances = Vec::with_capacity(k);
        for &(d, a) in &nearest {
            anchors.push(self.vocab.anchor(a));
            distances.push(d);
        }
        if k > 0 && nearest.is_empty() && self.vocab.num_anchors() > 0 {
            anchors.push(self.vocab.disconnected());
            distances.push(unreachable);
        }
        anchors.resize(k, self.vocab.pad());
        distances.resize(k, unreachable);

        let relations = sample_context(relation_types, m, context_seed)
            .into_iter()
            .map(|r| self.vocab.relation(r))
            .chain(std::iter::repeat(self.vocab.pad()))
            .take(m)
            .collect();

        NodeHash {
            anchors,
            distances,
            relations,
        }
    }
}

/// Up to `m` of the sorted `types`, sampled uniformly without replacement and
/// returned in ascending order.
fn sample_context(types: &[RelationId], m: usize, seed: u64) -> Vec<RelationId> {
    if types.len() <= m {
        return types.to_vec();
    }
    let mut rng = seed::rng(seed::mix(seed, CONTEXT_SALT));
    let mut picked: Vec<RelationId> = index::sample(&mut rng, types.len(), m)
        .into_iter()
        .map(|i| types[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Computes the distance index and hashes every node.
pub fn tokenize_graph(
    graph: &KnowledgeGraph,
    anchors: &crate::anchors::AnchorSet,
    config: TokenizerConfig,
) -> Result<NodeHashes> {
    let index = DistanceIndex::compute(graph, anchors)?;
    Ok(Tokenizer::new(graph, &index, config)?.tokenize_all())
}

#[derive(Debug, Clone)]
pub struct RandomTokenization {
    pub hashes: NodeHashes,
    pub capacity: Capacity,
}

/// Random anchor strategy: each node gets `k` anchors sampled uniformly
/// without replacement, ordered by `(distance, token)`. Anchors that cannot
/// reach the node keep their token with the unreachable bucket.
pub fn random_strategy_tokenize(
    graph: &KnowledgeGraph,
    index: &DistanceIndex,
    config: TokenizerConfig,
) -> Result<RandomTokenization> {
    let a = index.num_anchors();
    let k = config.k;
    if k > a {
        return Err(Error::invalid(format!("k = {k} exceeds the number of anchors {a}")));
    }
    let capacity = combination_capacity(a as u64, k as u64, graph.num_entities() as u64)?;
    let tok = Tokenizer::new(graph, index, config)?;
    let unreachable = index.max_distance() + 1;
    let hashes = (0..graph.num_entities() as u32)
        .into_par_iter()
        .map(|node| {
            let mut rng = seed::rng(seed::mix(seed::mix(config.seed, ANCHOR_SALT), u64::from(node)));
            let mut picked: Vec<(u32, u32)> = index::sample(&mut rng, a, k)
                .into_iter()
                .map(|i| (index.raw(i, node), i as u32))
                .collect();
            picked.sort_unstable();
            let relations = graph.out_relation_types(node).expect("node in bounds");
            let vocab = tok.vocab();
            NodeHash {
                anchors: picked.iter().map(|&(_, i)| vocab.anchor(i)).collect(),
                distances: picked
                    .iter()
                    .map(|&(d, _)| if d == UNREACHABLE { unreachable } else { d })
                    .collect(),
                relations: sample_context(&relations, config.m, seed::mix(config.seed, u64::from(node)))
                    .into_iter()
                    .map(|r| vocab.relation(r))
                    .chain(std::iter::repeat(vocab.pad()))
                    .take(config.m)
                    .collect(),
            }
        })
        .collect();
    Ok(RandomTokenization {
        hashes: tok.wrap(hashes),
        capacity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionStats {
    pub total: usize,
    pub unique_count: usize,
    /// `(total - unique) / total`: share of hashes that duplicate an earlier one.
    pub collision_rate: f64,
    /// Up to 10 `(first, other)` node pairs with identical hashes.
    pub example_colliding_pairs: Vec<(u32, u32)>,
}

/// Two hashes collide when anchors, distances and the sorted relation tokens
/// are all equal.
pub fn hash_collision_stats(hashes: &[NodeHash]) -> CollisionStats {
    let mut first: HashMap<(&[u32], &[u32], Vec<u32>), u32> = HashMap::with_capacity(hashes.len());
    let mut examples = Vec::new();
    for (i, h) in hashes.iter().enumerate() {
        let mut rels = h.relations.clone();
        rels.sort_unstable();
        let key = (h.anchors.as_slice(), h.distances.as_slice(), rels);
        match first.get(&key) {
            Some(&j) => {
                if examples.len() < 10 {
                    examples.push((j, i as u32));
                }
            }
            None => {
                first.insert(key, i as u32);
            }
        }
    }
    let total = hashes.len();
    let unique_count = first.len();
    CollisionStats {
        total,
        unique_count,
        collision_rate: if total == 0 {
            0.0
        } else {
            (total - unique_count) as f64 / total as f64
        },
        example_colliding_pairs: examples,
    }
}

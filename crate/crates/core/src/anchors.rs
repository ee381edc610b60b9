//! Anchor selection.
//!
//! Anchors are a fixed subset of entities whose index in the [`AnchorSet`]
//! doubles as their vocabulary token id. Selection ranks nodes by PageRank,
//! by degree, or samples them uniformly; the mixed strategy fills one bucket
//! per criterion in that order, skipping nodes an earlier bucket already took.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use num_bigint::BigUint;
use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{EntityId, Interner, KnowledgeGraph};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tolerance: 1e-8,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// L1 distance between the last two iterates.
    pub last_delta: f64,
}

/// Uniform-teleport PageRank by power iteration over the adjacency with
/// inverse edges. Rank held by nodes without edges is spread uniformly.
///
/// Each node pulls from its own adjacency list in storage order, so the result
/// does not depend on how rayon splits the work.
pub fn pagerank(graph: &KnowledgeGraph, config: &PageRankConfig) -> Result<PageRankResult> {
    let n = graph.num_entities();
    let d = config.damping;
    if !(0.0..1.0).contains(&d) {
        return Err(Error::invalid(format!("damping must be in [0, 1), got {d}")));
    }
    if n == 0 {
        return Ok(PageRankResult {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
            last_delta: 0.0,
        });
    }
    let uniform = 1.0 / n as f64;
    let inv_degree: Vec<f64> = (0..n as u32)
        .map(|v| match graph.degree(v) {
            0 => 0.0,
            deg => 1.0 / deg as f64,
        })
        .collect();

    let mut x = vec![uniform; n];
    let mut contrib = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_delta = f64::INFINITY;

    while iterations < config.max_iters {
        iterations += 1;
        let dangling: f64 = (0..n)
            .filter(|&v| graph.degree(v as u32) == 0)
            .map(|v| x[v])
            .sum();
        contrib
            .par_iter_mut()
            .enumerate()
            .for_each(|(v, c)| *c = x[v] * inv_degree[v]);
        let base = (1.0 - d) * uniform + d * dangling * uniform;
        let next: Vec<f64> = (0..n as u32)
            .into_par_iter()
            .map(|v| {
                let pulled: f64 = graph
                    .neighbor_nodes(v)
                    .iter()
                    .map(|&u| contrib[u as usize])
                    .sum();
                base + d * pulled
            })
            .collect();
        last_delta = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if last_delta < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(PageRankResult {
        scores: x,
        iterations,
        converged,
        last_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    PageRank,
    Degree,
    Random,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PageRank => "pagerank",
            Provenance::Degree => "degree",
            Provenance::Random => "random",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pagerank" => Ok(Provenance::PageRank),
            "degree" => Ok(Provenance::Degree),
            "random" => Ok(Provenance::Random),
            other => Err(Error::Format(format!("unknown provenance {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectionStrategy {
    Random,
    TopDegree,
    TopPageRank(PageRankConfig),
    Mixed {
        pagerank: f64,
        degree: f64,
        random: f64,
        pagerank_config: PageRankConfig,
    },
}

impl SelectionStrategy {
    /// 40% PageRank, 40% degree, 20% random.
    pub fn default_mixed() -> Self {
        SelectionStrategy::Mixed {
            pagerank: 0.4,
            degree: 0.4,
            random: 0.2,
            pagerank_config: PageRankConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let SelectionStrategy::Mixed {
            pagerank,
            degree,
            random,
            ..
        } = *self
        {
            if pagerank < 0.0 || degree < 0.0 || random < 0.0 {
                return Err(Error::invalid("mixed fractions must be non-negative"));
            }
            if (pagerank + degree + random - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "mixed fractions must sum to 1, got {}",
                    pagerank + degree + random
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    entities: Vec<EntityId>,
    provenance: Vec<Provenance>,
}

impl AnchorSet {
    pub fn new(entities: Vec<EntityId>, provenance: Vec<Provenance>) -> Result<Self> {
        if entities.len() != provenance.len() {
            return Err(Error::invalid("anchor and provenance lengths differ"));
        }
        let mut seen = std::collections::HashSet::with_capacity(entities.len());
        for &e in &entities {
            if !seen.insert(e) {
                return Err(Error::invalid(format!("duplicate anchor entity {e}")));
            }
        }
        Ok(Self {
            entities,
            provenance,
        })
    }

    pub fn empty() -> Self {
        Self {
            entities: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Anchor entity ids; position `i` is anchor token `i`.
    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Writes `token<TAB>label<TAB>provenance` lines.
    pub fn write<W: Write>(&self, mut w: W, entity_labels: &Interner) -> Result<()> {
        for (i, (&e, p)) in self.entities.iter().zip(&self.provenance).enumerate() {
            let label = entity_labels.name(e).ok_or(Error::OutOfBounds {
                kind: "entity",
                id: u64::from(e),
                limit: entity_labels.len() as u64,
            })?;
            writeln!(w, "{i}\t{label}\t{p}")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R, entity_labels: &Interner) -> Result<Self> {
        let mut entities = Vec::new();
        let mut provenance = Vec::new();
        for (idx, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            }
            let token: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad token id {:?}", fields[0])))?;
            if token != entities.len() {
                return Err(parse_err(format!(
                    "anchor tokens must be consecutive, expected {} got {token}",
                    entities.len()
                )));
            }
            let e = entity_labels
                .get(fields[1])
                .ok_or_else(|| parse_err(format!("unknown entity {:?}", fields[1])))?;
            entities.push(e);
            provenance.push(fields[2].parse().map_err(|e: Error| parse_err(e.to_string()))?);
        }
        Self::new(entities, provenance)
    }
}

/// Node ids sorted by descending score, ties by ascending id.
fn ranked_by<F: Fn(usize) -> f64>(n: usize, score: F) -> Vec<EntityId> {
    let mut ids: Vec<EntityId> = (0..n as u32).collect();
    ids.sort_by(|&a, &b| {
        score(b as usize)
            .total_cmp(&score(a as usize))
            .then(a.cmp(&b))
    });
    ids
}

pub fn degree_ranking(graph: &KnowledgeGraph) -> Vec<EntityId> {
    ranked_by(graph.num_entities(), |v| graph.degree(v as u32) as f64)
}

pub fn pagerank_ranking(graph: &KnowledgeGraph, config: &PageRankConfig) -> Result<Vec<EntityId>> {
    let pr = pagerank(graph, config)?;
    Ok(ranked_by(graph.num_entities(), |v| pr.scores[v]))
}

pub fn select_anchors(
    graph: &KnowledgeGraph,
    strategy: &SelectionStrategy,
    num_anchors: usize,
    seed: u64,
) -> Result<AnchorSet> {
    strategy.validate()?;
    let n = graph.num_entities();
    if num_anchors > n {
        return Err(Error::invalid(format!(
            "cannot select {num_anchors} anchors from {n} entities"
        )));
    }

    let (pagerank_quota, degree_quota, pr_config) = match strategy {
        SelectionStrategy::Random => (0, 0, None),
        SelectionStrategy::TopDegree => (0, num_anchors, None),
        SelectionStrategy::TopPageRank(c) => (num_anchors, 0, Some(*c)),
        SelectionStrategy::Mixed {
            pagerank,
            degree,
            pagerank_config,
            ..
        } => {
            // The epsilon keeps exact products such as 0.4 * 10 from flooring to 3.
            let quota = |f: f64| ((f * num_anchors as f64) + 1e-9).floor() as usize;
            let p = quota(*pagerank).min(num_anchors);
            let d = quota(*degree).min(num_anchors - p);
            (p, d, Some(*pagerank_config))
        }
    };

    let mut picker = Picker {
        taken: vec![false; n],
        entities: Vec::with_capacity(num_anchors),
        provenance: Vec::with_capacity(num_anchors),
    };
    if pagerank_quota > 0 {
        let cfg = pr_config.unwrap_or_default();
        picker.fill(&pagerank_ranking(graph, &cfg)?, pagerank_quota, Provenance::PageRank);
    }
    if degree_quota > 0 {
        picker.fill(&degree_ranking(graph), degree_quota, Provenance::Degree);
    }

    let remaining = num_anchors - picker.entities.len();
    if remaining > 0 {
        let pool: Vec<EntityId> = (0..n as u32).filter(|&e| !picker.taken[e as usize]).collect();
        let mut rng = seed::rng(seed);
        let mut picked: Vec<EntityId> = index::sample(&mut rng, pool.len(), remaining)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        picker.fill(&picked, remaining, Provenance::Random);
    }

    AnchorSet::new(picker.entities, picker.provenance)
}

struct Picker {
    taken: Vec<bool>,
    entities: Vec<EntityId>,
    provenance: Vec<Provenance>,
}

impl Picker {
    /// Takes the first `quota` not-yet-selected nodes of `ranking`.
    fn fill(&mut self, ranking: &[EntityId], quota: usize, tag: Provenance) {
        let mut added = 0;
        for &e in ranking {
            if added == quota {
                break;
            }
            if !self.taken[e as usize] {
                self.taken[e as usize] = true;
                self.entities.push(e);
                self.provenance.push(tag);
                added += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capacity {
    /// Exact binomial coefficient C(num_anchors, k).
    pub combinations: BigUint,
    pub covers_nodes: bool,
}

/// Number of distinct unordered k-subsets of the anchors, and whether it is at
/// least `num_nodes`.
pub fn combination_capacity(num_anchors: u64, k: u64, num_nodes: u64) -> Result<Capacity> {
    if k > num_anchors {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of anchors {num_anchors}"
        )));
    }
    let combinations = binomial(num_anchors, k);
    let covers_nodes = combinations >= BigUint::from(num_nodes);
    Ok(Capacity {
        combinations,
        covers_nodes,
    })
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    // acc * (n - i) is always divisible by (i + 1) after i steps.
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

//! Knowledge-graph data model: triple ingestion, label maps and a compressed
//! adjacency with inverse edges materialized.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub const fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Bijective string <-> dense id map, ids assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Self::new();
        for name in names {
            let name = name.into();
            if out.ids.contains_key(&name) {
                return Err(Error::Format(format!("duplicate label {name:?}")));
            }
            out.intern(&name);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMaps {
    pub entities: Interner,
    pub relations: Interner,
}

/// Parses `head<TAB>relation<TAB>tail` lines, extending `labels` in place.
///
/// Blank lines and lines starting with `#` are skipped. Line numbers in errors
/// are 1-based.
pub fn parse_triples<R: Read>(reader: R, labels: &mut LabelMaps) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: idx + 1,
                message: "empty field".into(),
            });
        }
        let head = labels.entities.intern(fields[0]);
        let relation = labels.relations.intern(fields[1]);
        let tail = labels.entities.intern(fields[2]);
        triples.push(Triple::new(head, relation, tail));
    }
    Ok(triples)
}

pub fn parse_triples_str(text: &str, labels: &mut LabelMaps) -> Result<Vec<Triple>> {
    parse_triples(text.as_bytes(), labels)
}

/// Immutable multi-relational graph with inverse edges.
///
/// Relation `r + num_direct_relations` is the inverse of direct relation `r`.
/// Adjacency is stored as an offset array plus packed `(relation, neighbor)`
/// arrays; for every node, edges appear in the order of the input triples.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_direct_relations: usize,
    triples: Vec<Triple>,
    offsets: Vec<usize>,
    adj_relations: Vec<RelationId>,
    adj_nodes: Vec<EntityId>,
}

impl KnowledgeGraph {
    pub fn new(
        triples: Vec<Triple>,
        num_entities: usize,
        num_direct_relations: usize,
    ) -> Result<Self> {
        for t in &triples {
            check_bound("entity", t.head, num_entities)?;
            check_bound("entity", t.tail, num_entities)?;
            check_bound("relation", t.relation, num_direct_relations)?;
        }
        let r = num_direct_relations as u32;

        let mut offsets = vec![0usize; num_entities + 1];
        for t in &triples {
            offsets[t.head as usize + 1] += 1;
            offsets[t.tail as usize + 1] += 1;
        }
        for i in 0..num_entities {
            offsets[i + 1] += offsets[i];
        }
        let total = offsets[num_entities];
        let mut cursor = offsets[..num_entities].to_vec();
        let mut adj_relations = vec![0; total];
        let mut adj_nodes = vec![0; total];
        for t in &triples {
            let c = &mut cursor[t.head as usize];
            adj_relations[*c] = t.relation;
            adj_nodes[*c] = t.tail;
            *c += 1;
            let c = &mut cursor[t.tail as usize];
            adj_relations[*c] = t.relation + r;
            adj_nodes[*c] = t.head;
            *c += 1;
        }

        Ok(Self {
            num_entities,
            num_direct_relations,
            triples,
            offsets,
            adj_relations,
            adj_nodes,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_direct_relations(&self) -> usize {
        self.num_direct_relations
    }

    pub fn num_total_relations(&self) -> usize {
        2 * self.num_direct_relations
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Number of adjacency entries, i.e. twice the number of direct triples.
    pub fn num_adjacency_entries(&self) -> usize {
        self.adj_nodes.len()
    }

    pub fn inverse_relation(&self, relation: RelationId) -> RelationId {
        let r = self.num_direct_relations as u32;
        if relation < r {
            relation + r
        } else {
            relation - r
        }
    }

    /// Out-degree counting inverse edges.
    #[inline]
    pub fn degree(&self, node: EntityId) -> usize {
        let n = node as usize;
        self.offsets[n + 1] - self.offsets[n]
    }

    /// Neighbor ids of `node` (inverse edges included).
    #[inline]
    pub fn neighbor_nodes(&self, node: EntityId) -> &[EntityId] {
        let n = node as usize;
        &self.adj_nodes[self.offsets[n]..self.offsets[n + 1]]
    }

    #[inline]
    pub fn neighbor_relations(&self, node: EntityId) -> &[RelationId] {
        let n = node as usize;
        &self.adj_relations[self.offsets[n]..self.offsets[n + 1]]
    }

    /// `(relation, neighbor)` pairs on the outgoing adjacency of `node`.
    pub fn neighbors(&self, node: EntityId) -> impl Iterator<Item = (RelationId, EntityId)> + '_ {
        self.neighbor_relations(node)
            .iter()
            .copied()
            .zip(self.neighbor_nodes(node).iter().copied())
    }

    /// Sorted, deduplicated outgoing relation types (direct and inverse).
    pub fn out_relation_types(&self, node: EntityId) -> Result<Vec<RelationId>> {
        check_bound("entity", node, self.num_entities)?;
        let mut rels = self.neighbor_relations(node).to_vec();
        rels.sort_unstable();
        rels.dedup();
        Ok(rels)
    }

    /// Component label per node; each component is labelled by its smallest
    /// member id.
    pub fn connected_components(&self) -> Vec<EntityId> {
        const UNSET: u32 = u32::MAX;
        let mut label = vec![UNSET; self.num_entities];
        let mut stack = Vec::new();
        for start in 0..self.num_entities {
            if label[start] != UNSET {
                continue;
            }
            let root = start as u32;
            label[start] = root;
            stack.push(root);
            while let Some(u) = stack.pop() {
                for &v in self.neighbor_nodes(u) {
                    if label[v as usize] == UNSET {
                        label[v as usize] = root;
                        stack.push(v);
                    }
                }
            }
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.connected_components()
            .iter()
            .enumerate()
            .filter(|&(i, &c)| i as u32 == c)
            .count()
    }
}

fn check_bound(kind: &'static str, id: u32, limit: usize) -> Result<()> {
    if (id as usize) < limit {
        Ok(())
    } else {
        Err(Error::OutOfBounds {
            kind,
            id: u64::from(id),
            limit: limit as u64,
        })
    }
}

/// Train/valid/test triples over one shared id space.
#[derive(Debug, Clone, Default)]
pub struct DatasetSplits {
    pub labels: LabelMaps,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl DatasetSplits {
    pub fn load(train: &Path, valid: &Path, test: &Path) -> Result<Self> {
        let mut labels = LabelMaps::default();
        let train = parse_triples(File::open(train)?, &mut labels)?;
        let valid = parse_triples(File::open(valid)?, &mut labels)?;
        let test = parse_triples(File::open(test)?, &mut labels)?;
        Ok(Self {
            labels,
            train,
            valid,
            test,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.labels.entities.len()
    }

    pub fn num_direct_relations(&self) -> usize {
        self.labels.relations.len()
    }

    /// Graph over the training triples; entities that only occur in valid or
    /// test become isolated nodes.
    pub fn train_graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::new(
            self.train.clone(),
            self.num_entities(),
            self.num_direct_relations(),
        )
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(triples: &[(u32, u32, u32)], n: usize, r: usize) -> KnowledgeGraph {
        let triples = triples.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
        KnowledgeGraph::new(triples, n, r).unwrap()
    }

    #[test]
    fn first_seen_ids() {
        let mut labels = LabelMaps::default();
        let t = parse_triples_str("A\tr\tB\nB\tr\tC", &mut labels).unwrap();
        assert_eq!(t, vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)]);
        assert_eq!(labels.entities.len(), 3);
        assert_eq!(labels.relations.len(), 1);
    }

    #[test]
    fn self_loop_accepted() {
        let mut labels = LabelMaps::default();
        let t = parse_triples_str("A\tr\tA", &mut labels).unwrap();
        assert_eq!(t, vec![Triple::new(0, 0, 0)]);
        let g = KnowledgeGraph::new(t, 1, 1).unwrap();
        assert_eq!(g.degree(0), 2);
    }

    #[test]
    fn spaces_are_not_separators() {
        let mut labels = LabelMaps::default();
        let err = parse_triples_str("A r B", &mut labels).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn error_reports_line_number_after_comments() {
        let mut labels = LabelMaps::default();
        let err = parse_triples_str("# header\nA\tr\tB\n\nA\tB\n", &mut labels).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn empty_input_is_empty() {
        let mut labels = LabelMaps::default();
        assert!(parse_triples_str("", &mut labels).unwrap().is_empty());
    }

    #[test]
    fn shared_labels_extend_without_reassigning() {
        let mut labels = LabelMaps::default();
        parse_triples_str("A\tr\tB", &mut labels).unwrap();
        let t = parse_triples_str("C\ts\tA", &mut labels).unwrap();
        assert_eq!(t, vec![Triple::new(2, 1, 0)]);
        let again = parse_triples_str("A\tr\tB", &mut labels).unwrap();
        assert_eq!(again, vec![Triple::new(0, 0, 1)]);
    }

    #[test]
    fn inverse_edges_materialized() {
        let g = graph(&[(0, 0, 1)], 2, 1);
        assert_eq!(g.neighbors(0).collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(g.neighbors(1).collect::<Vec<_>>(), vec![(1, 0)]);
        assert_eq!(g.num_total_relations(), 2);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let err = KnowledgeGraph::new(vec![Triple::new(0, 0, 5)], 2, 1).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { kind: "entity", .. }));
        let err = KnowledgeGraph::new(vec![Triple::new(0, 1, 1)], 2, 1).unwrap_err();
        assert!(matches!(err, Error::OutOfBounds { kind: "relation", .. }));
    }

    #[test]
    fn empty_graph_has_isolated_nodes() {
        let g = graph(&[], 3, 0);
        assert_eq!(g.num_components(), 3);
        assert!((0..3).all(|n| g.degree(n) == 0));
    }

    #[test]
    fn relation_types() {
        let g = graph(&[(0, 0, 1), (0, 0, 2)], 4, 1);
        assert_eq!(g.out_relation_types(0).unwrap(), vec![0]);
        assert_eq!(g.out_relation_types(1).unwrap(), vec![1]);
        assert!(g.out_relation_types(3).unwrap().is_empty());
        assert!(g.out_relation_types(4).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(graph(&[(0, 0, 1), (1, 0, 2)], 3, 1).connected_components(), vec![0, 0, 0]);
        assert_eq!(graph(&[(0, 0, 1)], 3, 1).connected_components(), vec![0, 0, 2]);
        // Edge direction points from the larger id; labelling still uses the
        // smallest member.
        assert_eq!(graph(&[(2, 0, 1)], 3, 1).connected_components(), vec![0, 1, 1]);
    }
}

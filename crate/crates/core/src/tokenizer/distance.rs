use std::collections::VecDeque;

use rayon::prelude::*;

use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};

/// Marker for an anchor that cannot reach a node.
pub const UNREACHABLE: u32 = u32::MAX;

/// Hop distances from every anchor to every node, stored anchor-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceIndex {
    num_nodes: usize,
    anchors: Vec<EntityId>,
    distances: Vec<u32>,
    max_distance: u32,
}

impl DistanceIndex {
    /// One BFS per anchor over the adjacency with inverse edges. Runs in
    /// parallel; every anchor writes its own row, so the result is identical
    /// for any thread count.
    pub fn compute(graph: &KnowledgeGraph, anchors: &AnchorSet) -> Result<Self> {
        let n = graph.num_entities();
        for &a in anchors.entities() {
            if a as usize >= n {
                return Err(Error::OutOfBounds {
                    kind: "entity",
                    id: u64::from(a),
                    limit: n as u64,
                });
            }
        }
        let mut distances = vec![UNREACHABLE; n * anchors.len()];
        if n > 0 {
            distances
                .par_chunks_mut(n)
                .zip(anchors.entities().par_iter())
                .for_each_init(VecDeque::new, |queue, (row, &anchor)| {
                    bfs(graph, anchor, row, queue)
                });
        }
        let max_distance = distances
            .iter()
            .copied()
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0);
        Ok(Self {
            num_nodes: n,
            anchors: anchors.entities().to_vec(),
            distances,
            max_distance,
        })
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn anchors(&self) -> &[EntityId] {
        &self.anchors
    }

    /// Largest finite distance observed between any anchor and any node.
    pub fn max_distance(&self) -> u32 {
        self.max_distance
    }

    /// Distances from anchor `anchor_index` to all nodes.
    pub fn row(&self, anchor_index: usize) -> &[u32] {
        &self.distances[anchor_index * self.num_nodes..(anchor_index + 1) * self.num_nodes]
    }

    #[inline]
    pub fn raw(&self, anchor_index: usize, node: EntityId) -> u32 {
        self.distances[anchor_index * self.num_nodes + node as usize]
    }

    pub fn distance(&self, anchor_index: usize, node: EntityId) -> Option<u32> {
        match self.raw(anchor_index, node) {
            UNREACHABLE => None,
            d => Some(d),
        }
    }
}

fn bfs(graph: &KnowledgeGraph, source: EntityId, dist: &mut [u32], queue: &mut VecDeque<EntityId>) {
    queue.clear();
    dist[source as usize] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u as usize] + 1;
        for &v in graph.neighbor_nodes(u) {
            let slot = &mut dist[v as usize];
            if *slot == UNREACHABLE {
                *slot = next;
                queue.push_back(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::Provenance;
    use crate::graph::Triple;

    fn anchors(ids: &[u32]) -> AnchorSet {
        AnchorSet::new(ids.to_vec(), vec![Provenance::Random; ids.len()]).unwrap()
    }

    #[test]
    fn path_distances() {
        let g = KnowledgeGraph::new((0..3).map(|i| Triple::new(i, 0, i + 1)).collect(), 4, 1).unwrap();
        let idx = DistanceIndex::compute(&g, &anchors(&[0])).unwrap();
        assert_eq!(idx.row(0), &[0, 1, 2, 3]);
        assert_eq!(idx.max_distance(), 3);
    }

    #[test]
    fn edges_traversed_against_direction() {
        let g = KnowledgeGraph::new(vec![Triple::new(1, 0, 0)], 2, 1).unwrap();
        let idx = DistanceIndex::compute(&g, &anchors(&[0])).unwrap();
        assert_eq!(idx.distance(0, 1), Some(1));
    }

    #[test]
    fn other_component_unreachable() {
        let g = KnowledgeGraph::new(vec![Triple::new(0, 0, 1)], 3, 1).unwrap();
        let idx = DistanceIndex::compute(&g, &anchors(&[0])).unwrap();
        assert_eq!(idx.distance(0, 2), None);
        assert_eq!(idx.distance(0, 0), Some(0));
    }
}

use anchorkg::anchors::{select_anchors, AnchorSet, Provenance, SelectionStrategy};
use anchorkg::graph::{KnowledgeGraph, Triple};
use anchorkg::tokenizer::{
    tokenize_graph, DistanceIndex, EdgeDirection, NewEdge, TieBreakPolicy, Tokenizer, TokenizerConfig,
    UNREACHABLE,
};
use proptest::prelude::*;

const INF: u32 = u32::MAX;

/// All-pairs hop distances of the undirected graph by Floyd-Warshall.
fn floyd_warshall(n: usize, triples: &[Triple]) -> Vec<Vec<u32>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for t in triples {
        let (h, t) = (t.head as usize, t.tail as usize);
        if h != t {
            d[h][t] = 1;
            d[t][h] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == INF {
                continue;
            }
            for j in 0..n {
                if d[k][j] != INF && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = (usize, usize, Vec<Triple>)> {
    (2..=max_nodes, 1usize..4).prop_flat_map(|(n, r)| {
        let edge = (0..n as u32, 0..r as u32, 0..n as u32).prop_map(|(h, rel, t)| Triple::new(h, rel, t));
        (Just(n), Just(r), prop::collection::vec(edge, 0..=2 * n))
    })
}

fn config(k: usize, m: usize) -> TokenizerConfig {
    TokenizerConfig {
        k,
        m,
        tie_policy: TieBreakPolicy::Canonical,
        seed: 7,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn distances_match_all_pairs_oracle((n, r, triples) in graph_strategy(200), num_anchors in 0usize..12, seed in any::<u64>()) {
        let g = KnowledgeGraph::new(triples.clone(), n, r).unwrap();
        let anchors = select_anchors(&g, &SelectionStrategy::Random, num_anchors.min(n), seed).unwrap();
        let index = DistanceIndex::compute(&g, &anchors).unwrap();
        let oracle = floyd_warshall(n, &triples);
        for (i, &a) in anchors.entities().iter().enumerate() {
            prop_assert_eq!(index.raw(i, a), 0);
            for v in 0..n {
                prop_assert_eq!(index.raw(i, v as u32), oracle[a as usize][v]);
            }
        }
    }

    #[test]
    fn canonical_hashes_are_sorted((n, r, triples) in graph_strategy(60), k in 0usize..5, m in 0usize..4) {
        let g = KnowledgeGraph::new(triples, n, r).unwrap();
        let num = (k + 2).min(n);
        let anchors = select_anchors(&g, &SelectionStrategy::TopDegree, num, 0).unwrap();
        let hashes = tokenize_graph(&g, &anchors, config(k.min(num), m)).unwrap();
        let vocab = hashes.vocab();
        for h in &hashes.hashes {
            let pairs: Vec<(u32, u32)> = h
                .distances
                .iter()
                .copied()
                .zip(h.anchors.iter().copied())
                .filter(|&(_, a)| (a as usize) < vocab.num_anchors())
                .collect();
            prop_assert!(pairs.windows(2).all(|w| w[0] <= w[1]));
            // Real anchors come first, then at most one DISCONNECTED, then PAD.
            let real = pairs.len();
            prop_assert!(h.anchors[real..].iter().all(|&a| a >= vocab.pad()));
            let rels: Vec<u32> = h.relations.iter().copied().filter(|&t| t != vocab.pad()).collect();
            prop_assert!(rels.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn stochastic_ties_keep_the_multiset((n, r, triples) in graph_strategy(60), seed in any::<u64>()) {
        let g = KnowledgeGraph::new(triples, n, r).unwrap();
        let anchors = select_anchors(&g, &SelectionStrategy::Random, n.min(6), 1).unwrap();
        let canonical = tokenize_graph(&g, &anchors, config(n.min(3), 2)).unwrap();
        let mut cfg = config(n.min(3), 2);
        cfg.tie_policy = TieBreakPolicy::Stochastic { seed };
        let shuffled = tokenize_graph(&g, &anchors, cfg).unwrap();
        for (a, b) in canonical.hashes.iter().zip(&shuffled.hashes) {
            prop_assert_eq!(&a.distances, &b.distances);
            let mut x: Vec<_> = a.anchors.iter().zip(&a.distances).collect();
            let mut y: Vec<_> = b.anchors.iter().zip(&b.distances).collect();
            x.sort();
            y.sort();
            prop_assert_eq!(x, y);
            prop_assert_eq!(&a.relations, &b.relations);
        }
    }

    #[test]
    fn hashes_follow_node_relabelling((n, r, triples) in graph_strategy(40), perm_seed in any::<u64>()) {
        // With m covering every relation type, context sampling is a no-op
        // and hashes depend on structure only.
        let m = 2 * r;
        let g = KnowledgeGraph::new(triples.clone(), n, r).unwrap();
        let num = n.min(5);
        let anchors = select_anchors(&g, &SelectionStrategy::Random, num, perm_seed).unwrap();
        let perm: Vec<u32> = {
            use rand::seq::SliceRandom;
            let mut p: Vec<u32> = (0..n as u32).collect();
            p.shuffle(&mut anchorkg::seed::rng(perm_seed));
            p
        };
        let moved: Vec<Triple> = triples
            .iter()
            .map(|t| Triple::new(perm[t.head as usize], t.relation, perm[t.tail as usize]))
            .collect();
        let g2 = KnowledgeGraph::new(moved, n, r).unwrap();
        let anchors2 = AnchorSet::new(
            anchors.entities().iter().map(|&a| perm[a as usize]).collect(),
            anchors.provenance().to_vec(),
        )
        .unwrap();
        let a = tokenize_graph(&g, &anchors, config(num.min(3), m)).unwrap();
        let b = tokenize_graph(&g2, &anchors2, config(num.min(3), m)).unwrap();
        for v in 0..n {
            prop_assert_eq!(&a.hashes[v], &b.hashes[perm[v] as usize]);
        }
    }

    #[test]
    fn out_of_sample_distances_match_augmented_graph(
        (n, r, triples) in graph_strategy(80),
        raw_edges in prop::collection::vec((any::<u32>(), any::<u32>(), any::<bool>()), 0..5),
        seed in any::<u64>(),
    ) {
        let g = KnowledgeGraph::new(triples.clone(), n, r).unwrap();
        let anchors = select_anchors(&g, &SelectionStrategy::Random, n.min(8), seed).unwrap();
        let index = DistanceIndex::compute(&g, &anchors).unwrap();
        let tok = Tokenizer::new(&g, &index, config(n.min(3), 2)).unwrap();
        let new = n as u32;
        let edges: Vec<NewEdge> = raw_edges
            .iter()
            .map(|&(nb, rel, out)| NewEdge {
                relation: rel % r as u32,
                neighbor: nb % n as u32,
                direction: if out { EdgeDirection::Outgoing } else { EdgeDirection::Incoming },
            })
            .collect();
        let mut augmented = triples.clone();
        for e in &edges {
            augmented.push(match e.direction {
                EdgeDirection::Outgoing => Triple::new(new, e.relation, e.neighbor),
                EdgeDirection::Incoming => Triple::new(e.neighbor, e.relation, new),
            });
        }
        let oracle = floyd_warshall(n + 1, &augmented);
        let got = tok.out_of_sample_distances(&edges).unwrap();
        for (i, &a) in anchors.entities().iter().enumerate() {
            let want = oracle[a as usize][n];
            prop_assert_eq!(got[i], if want == INF { UNREACHABLE } else { want });
        }
    }
}

#[test]
fn unseen_node_matches_its_in_graph_hash() {
    // A node with identical edges hashes the same whether it is in the graph
    // or attached later, as long as its distances do not exceed the graph's.
    let triples = vec![
        Triple::new(0, 0, 1),
        Triple::new(1, 1, 2),
        Triple::new(2, 0, 3),
        Triple::new(3, 1, 0),
        Triple::new(4, 0, 1),
        Triple::new(2, 1, 4),
    ];
    let full = KnowledgeGraph::new(triples.clone(), 5, 2).unwrap();
    let anchors = AnchorSet::new(vec![0, 2], vec![Provenance::Degree; 2]).unwrap();
    let cfg = config(2, 4);
    let full_hash = tokenize_graph(&full, &anchors, cfg).unwrap().hashes[4].clone();

    let without: Vec<Triple> = triples.into_iter().filter(|t| t.head != 4 && t.tail != 4).collect();
    let base = KnowledgeGraph::new(without, 5, 2).unwrap();
    let index = DistanceIndex::compute(&base, &anchors).unwrap();
    let tok = Tokenizer::new(&base, &index, cfg).unwrap();
    let edges = [
        NewEdge {
            relation: 0,
            neighbor: 1,
            direction: EdgeDirection::Outgoing,
        },
        NewEdge {
            relation: 1,
            neighbor: 2,
            direction: EdgeDirection::Incoming,
        },
    ];
    assert_eq!(tok.tokenize_out_of_sample(&edges, 0).unwrap(), full_hash);
}

#[test]
fn mixed_strategy_buckets() {
    let triples: Vec<Triple> = (0..300u32).map(|i| Triple::new(i % 97, i % 3, (i * 7 + 1) % 97)).collect();
    let g = KnowledgeGraph::new(triples, 97, 3).unwrap();
    for num in [10usize, 25, 50, 97] {
        let a = select_anchors(&g, &SelectionStrategy::default_mixed(), num, 3).unwrap();
        let count = |p: Provenance| a.provenance().iter().filter(|&&x| x == p).count();
        let pr = (0.4 * num as f64 + 1e-9).floor() as usize;
        let deg = (0.4 * num as f64 + 1e-9).floor() as usize;
        assert_eq!(count(Provenance::PageRank), pr);
        assert_eq!(count(Provenance::Degree), deg);
        assert_eq!(count(Provenance::Random), num - pr - deg);
        let mut e = a.entities().to_vec();
        e.sort_unstable();
        e.dedup();
        assert_eq!(e.len(), num);
    }
}

//! Trains on a synthetic compositional graph and reports filtered test MRR.
//!
//! `cargo run --release -p anchorkg --example toy_experiment`

use std::time::Instant;

use anchorkg::anchors::{select_anchors, SelectionStrategy};
use anchorkg::decoder::DecoderKind;
use anchorkg::eval::{filtered_ranks, EmbeddingScorer, KnownTriples};
use anchorkg::graph::KnowledgeGraph;
use anchorkg::params::{ModelShape, ParameterStore};
use anchorkg::synth::compositional_kg;
use anchorkg::tokenizer::{tokenize_graph, TieBreakPolicy, TokenizerConfig};
use anchorkg::train::{train, LossConfig, TrainConfig};

fn main() -> anchorkg::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let num_anchors: usize = args.get(1).map_or(20, |s| s.parse().unwrap());
    let epochs: usize = args.get(2).map_or(200, |s| s.parse().unwrap());
    let lr: f64 = args.get(3).map_or(0.01, |s| s.parse().unwrap());
    let margin: f64 = args.get(4).map_or(6.0, |s| s.parse().unwrap());
    let started = Instant::now();
    let kg = compositional_kg(20, 1);
    let graph = KnowledgeGraph::new(kg.train.clone(), kg.num_entities, kg.num_relations)?;
    let anchors = select_anchors(&graph, &SelectionStrategy::default_mixed(), num_anchors, 2)?;
    let k = num_anchors.min(5);
    let hashes = tokenize_graph(
        &graph,
        &anchors,
        TokenizerConfig {
            k,
            m: 4,
            tie_policy: TieBreakPolicy::Canonical,
            seed: 3,
        },
    )?;
    let stats = anchorkg::tokenizer::hash_collision_stats(&hashes.hashes);
    println!("unique hashes {} / {}", stats.unique_count, hashes.len());
    let shape = ModelShape::for_hashes(&hashes, 32, 64, 2, DecoderKind::DistMult);
    let mut store = ParameterStore::<f32>::init(shape, 4)?;
    let known: KnownTriples = kg.all().copied().collect();
    let untrained = filtered_ranks(&EmbeddingScorer::new(&store, &hashes)?, &kg.test, &known, kg.num_entities)?;
    println!("untrained mrr {:.4}", untrained.metrics.mrr);
    let cfg = TrainConfig {
        epochs,
        batch_size: 128,
        lr,
        num_negatives: 16,
        loss: LossConfig::Nssal {
            margin,
            temperature: 1.0,
        },
        dropout: 0.0,
        seed: 5,
        filter_negatives: false,
    };
    let report = train(&kg.train, &hashes, &mut store, &cfg)?;
    println!("final loss {:.4}", report.epochs.last().unwrap().mean_loss);
    let trained = filtered_ranks(&EmbeddingScorer::new(&store, &hashes)?, &kg.test, &known, kg.num_entities)?;
    println!("trained {}", trained.metrics.to_json());
    println!("seconds {:.1}", started.elapsed().as_secs_f64());
    Ok(())
}

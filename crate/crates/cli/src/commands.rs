//! One function per subcommand. Each one reads and checks all of its inputs
//! before writing anything.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use anchorkg::anchors::select_anchors;
use anchorkg::checkpoint::{write_params, CheckpointMeta};
use anchorkg::config::{RunConfig, TiePolicyKind};
use anchorkg::eval::{
    encode_all, filtered_ranks, out_of_sample_eval, relation_prediction_ranks, EmbeddingScorer,
    KnownTriples, RankingReport, UnseenNode,
};
use anchorkg::graph::{parse_triples, DatasetSplits, KnowledgeGraph, LabelMaps};
use anchorkg::memory::memory_estimate;
use anchorkg::params::{ModelShape, ParameterStore};
use anchorkg::seed::sub_seed;
use anchorkg::tokenizer::{
    hash_collision_stats, DistanceIndex, EdgeDirection, NewEdge, NodeHashes, TieBreakPolicy,
    Tokenizer, TokenizerConfig, UNREACHABLE,
};
use anchorkg::train::train;
use serde_json::{json, Value};

use crate::args::{Split, Task};
use crate::error::{CliError, CliResult, WithPath};
use crate::run_dir::{self, RunDir};

/// Parsed configuration plus the effective seed.
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub dir: RunDir,
}

impl Context {
    pub fn new(config_path: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<Self> {
        let config = match config_path {
            Some(p) => RunConfig::load(&run_dir::require(p)?).at(p)?,
            None => RunConfig::default(),
        };
        Ok(Self {
            seed: seed.unwrap_or(config.seed),
            config,
            dir: RunDir::new(out),
        })
    }

    fn tokenizer_config(&self, k: usize, m: usize) -> TokenizerConfig {
        let tie_policy = match self.config.tie_policy {
            TiePolicyKind::Canonical => TieBreakPolicy::Canonical,
            TiePolicyKind::Stochastic => TieBreakPolicy::Stochastic {
                seed: sub_seed(self.seed, "ties"),
            },
        };
        TokenizerConfig {
            k,
            m,
            tie_policy,
            seed: sub_seed(self.seed, "tokenize"),
        }
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn ingest(
    ctx: &Context,
    train: Option<PathBuf>,
    valid: Option<PathBuf>,
    test: Option<PathBuf>,
) -> CliResult<String> {
    let pick = |arg: Option<PathBuf>, conf: &Option<PathBuf>, name: &str| {
        arg.or_else(|| conf.clone())
            .ok_or_else(|| CliError::Usage(format!("no {name} file given (--{name} or {name}_path)")))
            .and_then(|p| run_dir::require(&p))
    };
    let paths = [
        pick(train, &ctx.config.train_path, "train")?,
        pick(valid, &ctx.config.valid_path, "valid")?,
        pick(test, &ctx.config.test_path, "test")?,
    ];
    let mut labels = LabelMaps::default();
    let mut splits = Vec::with_capacity(3);
    for p in &paths {
        splits.push(parse_triples(File::open(p)?, &mut labels).at(p)?);
    }
    let data = DatasetSplits {
        labels,
        test: splits.pop().unwrap_or_default(),
        valid: splits.pop().unwrap_or_default(),
        train: splits.pop().unwrap_or_default(),
    };
    data.train_graph()?;

    let dir = &ctx.dir;
    dir.write(run_dir::ENTITIES, run_dir::labels_text(&data.labels.entities).as_bytes())?;
    dir.write(run_dir::RELATIONS, run_dir::labels_text(&data.labels.relations).as_bytes())?;
    dir.write(run_dir::TRAIN, run_dir::triples_text(&data.train, &data.labels).as_bytes())?;
    dir.write(run_dir::VALID, run_dir::triples_text(&data.valid, &data.labels).as_bytes())?;
    dir.write(run_dir::TEST, run_dir::triples_text(&data.test, &data.labels).as_bytes())?;
    Ok(format!(
        "entities={} relations={} train={} valid={} test={}",
        data.num_entities(),
        data.num_direct_relations(),
        data.train.len(),
        data.valid.len(),
        data.test.len()
    ))
}

pub fn select(ctx: &Context) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let graph = data.train_graph()?;
    let anchors = select_anchors(
        &graph,
        &ctx.config.selection_strategy(),
        ctx.config.num_anchors,
        sub_seed(ctx.seed, "anchors"),
    )?;
    let mut bytes = Vec::new();
    anchors.write(&mut bytes, &data.labels.entities)?;
    ctx.dir.write(run_dir::ANCHORS, &bytes)?;
    Ok(format!("anchors={}", anchors.len()))
}

pub fn tokenize(ctx: &Context) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let graph = data.train_graph()?;
    let anchors = ctx.dir.load_anchors(&data.labels.entities)?;
    let index = DistanceIndex::compute(&graph, &anchors)?;
    let config = ctx.tokenizer_config(ctx.config.anchors_per_node, ctx.config.context_size);
    let hashes = Tokenizer::new(&graph, &index, config)?.tokenize_all();
    let stats = hash_collision_stats(&hashes.hashes);
    let examples: Vec<[&str; 2]> = stats
        .example_colliding_pairs
        .iter()
        .map(|&(a, b)| {
            let name = |id| data.labels.entities.name(id).unwrap_or("?");
            [name(a), name(b)]
        })
        .collect();
    let report = json!({
        "total": stats.total,
        "unique_count": stats.unique_count,
        "collision_rate": stats.collision_rate,
        "example_colliding_pairs": examples,
    });
    ctx.dir.write(run_dir::HASHES, &hashes.to_bytes())?;
    ctx.dir.write(run_dir::COLLISIONS, &pretty(&report))?;
    Ok(format!(
        "hashes={} unique={} collision_rate={:.6}",
        stats.total, stats.unique_count, stats.collision_rate
    ))
}

pub fn train_cmd(ctx: &Context) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let hashes = ctx.dir.load_hashes()?;
    if hashes.len() != data.num_entities() || hashes.num_relations != 2 * data.num_direct_relations() {
        return Err(CliError::Core(anchorkg::Error::ShapeMismatch(format!(
            "hash file covers {} entities and {} relations, dataset has {} and {}",
            hashes.len(),
            hashes.num_relations,
            data.num_entities(),
            2 * data.num_direct_relations()
        ))));
    }
    let c = &ctx.config;
    let mut shape = ModelShape::for_hashes(&hashes, c.dim, c.encoder_hidden, c.encoder_layers, c.decoder);
    shape.use_distances = c.use_distances;
    let mut store = ParameterStore::<f32>::init(shape, sub_seed(ctx.seed, "init"))?;
    let report = train(&data.train, &hashes, &mut store, &c.train_config(sub_seed(ctx.seed, "train")))?;

    let meta = CheckpointMeta::new(&shape, hashes.num_anchors, hashes.max_distance, ctx.seed);
    let mut bytes = Vec::new();
    write_params(&store, &mut bytes)?;
    let params = ctx.dir.path(run_dir::CHECKPOINT);
    run_dir::write_file(&params, &bytes)?;
    run_dir::write_file(&run_dir::sidecar(&params), meta.to_json().as_bytes())?;
    ctx.dir.write(run_dir::LOSS, report.to_csv().as_bytes())?;
    let last = report.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
    Ok(format!("epochs={} final_loss={last:.6} parameters={}", report.epochs.len(), store.num_parameters()))
}

fn checkpoint_path(ctx: &Context, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| ctx.dir.path(run_dir::CHECKPOINT))
}

/// Hashes and checkpoint that agree with each other and the dataset.
fn load_model(
    ctx: &Context,
    data: &DatasetSplits,
    checkpoint: Option<PathBuf>,
) -> CliResult<(CheckpointMeta, ParameterStore<f32>, NodeHashes)> {
    let (meta, store) = run_dir::load_checkpoint(&checkpoint_path(ctx, checkpoint))?;
    let hashes = ctx.dir.load_hashes()?;
    anchorkg::train::check_compatible(&store, &hashes)?;
    if hashes.len() != data.num_entities() {
        return Err(CliError::Core(anchorkg::Error::ShapeMismatch(format!(
            "hash file covers {} entities, dataset has {}",
            hashes.len(),
            data.num_entities()
        ))));
    }
    Ok((meta, store, hashes))
}

fn read_unseen(path: &Path, data: &DatasetSplits) -> CliResult<Vec<UnseenNode>> {
    let path = run_dir::require(path)?;
    let mut labels = data.labels.clone();
    let triples = parse_triples(File::open(&path)?, &mut labels).at(&path)?;
    if labels.relations.len() != data.num_direct_relations() {
        return Err(CliError::File {
            path,
            source: anchorkg::Error::Format("unknown relation in unseen triples".into()),
        });
    }
    let n = data.num_entities() as u32;
    let mut nodes: Vec<UnseenNode> = Vec::new();
    let mut slot: HashMap<u32, usize> = HashMap::new();
    for (i, t) in triples.iter().enumerate() {
        let (new, edge) = match (t.head >= n, t.tail >= n) {
            (true, false) => (
                t.head,
                NewEdge {
                    relation: t.relation,
                    neighbor: t.tail,
                    direction: EdgeDirection::Outgoing,
                },
            ),
            (false, true) => (
                t.tail,
                NewEdge {
                    relation: t.relation,
                    neighbor: t.head,
                    direction: EdgeDirection::Incoming,
                },
            ),
            _ => {
                return Err(CliError::File {
                    path,
                    source: anchorkg::Error::Format(format!(
                        "unseen triple {} must link exactly one new entity to a known one",
                        i + 1
                    )),
                })
            }
        };
        let at = *slot.entry(new).or_insert_with(|| {
            nodes.push(UnseenNode { edges: Vec::new() });
            nodes.len() - 1
        });
        nodes[at].edges.push(edge);
    }
    if nodes.is_empty() {
        return Err(CliError::File {
            path,
            source: anchorkg::Error::Format("no unseen triples".into()),
        });
    }
    Ok(nodes)
}

pub fn eval(
    ctx: &Context,
    task: Task,
    split: Split,
    unseen: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let unseen_nodes = match (task, &unseen) {
        (Task::OutOfSample, Some(p)) => Some(read_unseen(p, &data)?),
        (Task::OutOfSample, None) => {
            return Err(CliError::Usage("the out-of-sample task needs --unseen".into()))
        }
        _ => None,
    };
    let (meta, store, hashes) = load_model(ctx, &data, checkpoint)?;
    let scorer = EmbeddingScorer::new(&store, &hashes)?;
    let known: KnownTriples = data.all_triples().copied().collect();
    let queries = match split {
        Split::Valid => &data.valid,
        Split::Test => &data.test,
    };
    let (task_name, report): (&str, RankingReport) = match task {
        Task::Link => ("link", filtered_ranks(&scorer, queries, &known, data.num_entities())?),
        Task::Relation => (
            "relation",
            relation_prediction_ranks(&scorer, queries, &known, data.num_direct_relations())?,
        ),
        Task::OutOfSample => {
            let graph = data.train_graph()?;
            let anchors = ctx.dir.load_anchors(&data.labels.entities)?;
            if anchors.len() != meta.num_anchors {
                return Err(CliError::Core(anchorkg::Error::ShapeMismatch(format!(
                    "anchor file has {} anchors, checkpoint expects {}",
                    anchors.len(),
                    meta.num_anchors
                ))));
            }
            let index = DistanceIndex::compute(&graph, &anchors)?;
            let tokenizer = Tokenizer::new(&graph, &index, ctx.tokenizer_config(meta.k, meta.m))?;
            let nodes = unseen_nodes.unwrap_or_default();
            (
                "out-of-sample",
                out_of_sample_eval(&tokenizer, &scorer, &nodes, sub_seed(ctx.seed, "out-of-sample"))?,
            )
        }
    };
    let m = report.metrics;
    let split_name = match (task, split) {
        (Task::OutOfSample, _) => "unseen",
        (_, Split::Valid) => "valid",
        (_, Split::Test) => "test",
    };
    let metrics = json!({
        "task": task_name,
        "split": split_name,
        "mrr": m.mrr,
        "hits@1": m.hits_at_1,
        "hits@3": m.hits_at_3,
        "hits@10": m.hits_at_10,
        "num_queries": m.num_queries,
    });
    ctx.dir.write(run_dir::METRICS, &pretty(&metrics))?;
    ctx.dir.write(run_dir::RANKS, report.to_csv().as_bytes())?;
    Ok(format!(
        "task={task_name} mrr={:.6} hits@1={:.6} hits@3={:.6} hits@10={:.6} queries={}",
        m.mrr, m.hits_at_1, m.hits_at_3, m.hits_at_10, m.num_queries
    ))
}

fn histogram<I: IntoIterator<Item = usize>>(values: I) -> Vec<[usize; 2]> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts.into_iter().map(|(v, c)| [v, c]).collect()
}

fn anchor_distance_histogram(ctx: &Context, data: &DatasetSplits, graph: &KnowledgeGraph) -> CliResult<Value> {
    let hashes = if ctx.dir.path(run_dir::HASHES).is_file() {
        ctx.dir.load_hashes()?
    } else if ctx.dir.path(run_dir::ANCHORS).is_file() {
        let anchors = ctx.dir.load_anchors(&data.labels.entities)?;
        let index = DistanceIndex::compute(graph, &anchors)?;
        let k = ctx.config.anchors_per_node.min(anchors.len());
        Tokenizer::new(graph, &index, ctx.tokenizer_config(k, ctx.config.context_size))?.tokenize_all()
    } else {
        return Ok(Value::Null);
    };
    let unreachable = hashes.unreachable_bucket();
    let pad = hashes.vocab().pad();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut reachable: BTreeMap<u32, usize> = BTreeMap::new();
    for h in &hashes.hashes {
        for (&tok, &d) in h.anchors.iter().zip(&h.distances) {
            if tok == pad {
                continue;
            }
            if d == unreachable || d == UNREACHABLE {
                *counts.entry("unreachable".into()).or_default() += 1;
            } else {
                *reachable.entry(d).or_default() += 1;
            }
        }
    }
    let mut out = serde_json::Map::new();
    for (d, c) in reachable {
        out.insert(d.to_string(), json!(c));
    }
    if let Some(c) = counts.get("unreachable") {
        out.insert("unreachable".into(), json!(c));
    }
    Ok(Value::Object(out))
}

pub fn stats(ctx: &Context) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let graph = data.train_graph()?;
    let distances = anchor_distance_histogram(ctx, &data, &graph)?;
    let degrees = histogram((0..graph.num_entities() as u32).map(|e| graph.degree(e)));
    let num_anchors = if ctx.dir.path(run_dir::ANCHORS).is_file() {
        ctx.dir.load_anchors(&data.labels.entities)?.len()
    } else {
        ctx.config.num_anchors
    };
    let vocab = num_anchors + graph.num_total_relations() + 2;
    let dim = ctx.config.dim as u64;
    let value = json!({
        "num_entities": data.num_entities(),
        "num_relations": data.num_direct_relations(),
        "num_relations_with_inverses": graph.num_total_relations(),
        "num_triples": {
            "train": data.train.len(),
            "valid": data.valid.len(),
            "test": data.test.len(),
        },
        "num_components": graph.num_components(),
        "degree_histogram": degrees,
        "anchor_distance_histogram": distances,
        "memory": {
            "dim": dim,
            "bytes_per_param": 4,
            "entity_table": {
                "rows": data.num_entities(),
                "estimate": memory_estimate(data.num_entities() as u64, dim, 4),
            },
            "vocabulary_table": {
                "rows": vocab,
                "estimate": memory_estimate(vocab as u64, dim, 4),
            },
        },
    });
    let bytes = pretty(&value);
    ctx.dir.write(run_dir::STATS, &bytes)?;
    Ok(String::from_utf8(bytes).expect("json is utf-8").trim_end().to_string())
}

pub fn export_embeddings(ctx: &Context, checkpoint: Option<PathBuf>) -> CliResult<String> {
    let data = ctx.dir.load_splits()?;
    let (_, store, hashes) = load_model(ctx, &data, checkpoint)?;
    let encoded = encode_all(&store, &hashes.hashes)?;
    let dim = store.shape.dim;
    let mut s = String::new();
    for (e, row) in encoded.chunks(dim).enumerate() {
        s.push_str(data.labels.entities.name(e as u32).unwrap_or("?"));
        for v in row {
            s.push('\t');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    ctx.dir.write(run_dir::EMBEDDINGS, s.as_bytes())?;
    Ok(format!("entities={} dim={dim}", hashes.len()))
}

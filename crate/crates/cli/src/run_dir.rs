//! Artifact layout of a run directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anchorkg::anchors::AnchorSet;
use anchorkg::checkpoint::{self, CheckpointMeta};
use anchorkg::graph::{parse_triples, DatasetSplits, Interner, LabelMaps, Triple};
use anchorkg::params::ParameterStore;
use anchorkg::tokenizer::NodeHashes;

use crate::error::{CliError, CliResult, WithPath};

pub const ENTITIES: &str = "entities.tsv";
pub const RELATIONS: &str = "relations.tsv";
pub const TRAIN: &str = "train.tsv";
pub const VALID: &str = "valid.tsv";
pub const TEST: &str = "test.tsv";
pub const ANCHORS: &str = "anchors.tsv";
pub const HASHES: &str = "hashes.tsv";
pub const COLLISIONS: &str = "collisions.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const LOSS: &str = "loss.csv";
pub const METRICS: &str = "metrics.json";
pub const RANKS: &str = "ranks.csv";
pub const STATS: &str = "stats.json";
pub const EMBEDDINGS: &str = "embeddings.tsv";

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn require(&self, name: &str) -> CliResult<PathBuf> {
        require(&self.path(name))
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_file(&self.path(name), bytes)
    }

    pub fn load_splits(&self) -> CliResult<DatasetSplits> {
        let entities = read_labels(&self.require(ENTITIES)?)?;
        let relations = read_labels(&self.require(RELATIONS)?)?;
        let mut labels = LabelMaps { entities, relations };
        let (n, r) = (labels.entities.len(), labels.relations.len());
        let mut split = |name: &str| -> CliResult<Vec<Triple>> {
            let path = self.require(name)?;
            let triples = parse_triples(File::open(&path)?, &mut labels).at(&path)?;
            if labels.entities.len() != n || labels.relations.len() != r {
                return Err(CliError::File {
                    path,
                    source: anchorkg::Error::Format("label missing from the id maps".into()),
                });
            }
            Ok(triples)
        };
        let train = split(TRAIN)?;
        let valid = split(VALID)?;
        let test = split(TEST)?;
        Ok(DatasetSplits {
            labels,
            train,
            valid,
            test,
        })
    }

    pub fn load_anchors(&self, entities: &Interner) -> CliResult<AnchorSet> {
        let path = self.require(ANCHORS)?;
        AnchorSet::read(File::open(&path)?, entities).at(&path)
    }

    pub fn load_hashes(&self) -> CliResult<NodeHashes> {
        let path = self.require(HASHES)?;
        NodeHashes::read(BufReader::new(File::open(&path)?)).at(&path)
    }
}

pub fn require(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::MissingFile(path.to_path_buf()))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

/// One label per line, in id order.
pub fn labels_text(labels: &Interner) -> String {
    let mut s = String::new();
    for name in labels.names() {
        s.push_str(name);
        s.push('\n');
    }
    s
}

fn read_labels(path: &Path) -> CliResult<Interner> {
    let text = fs::read_to_string(path)?;
    Interner::from_names(text.lines().filter(|l| !l.is_empty())).at(path)
}

pub fn triples_text(triples: &[Triple], labels: &LabelMaps) -> String {
    let mut s = String::new();
    for t in triples {
        let name = |i: &Interner, id: u32| i.name(id).expect("id from the same label map").to_string();
        s.push_str(&format!(
            "{}\t{}\t{}\n",
            name(&labels.entities, t.head),
            name(&labels.relations, t.relation),
            name(&labels.entities, t.tail)
        ));
    }
    s
}

/// The sidecar of `checkpoint.bin` is `checkpoint.json`.
pub fn sidecar(params: &Path) -> PathBuf {
    params.with_extension("json")
}

pub fn load_checkpoint(params: &Path) -> CliResult<(CheckpointMeta, ParameterStore<f32>)> {
    let params = require(params)?;
    let meta_path = require(&sidecar(&params))?;
    let meta = CheckpointMeta::from_json(&fs::read_to_string(&meta_path)?).at(&meta_path)?;
    let shape = meta.shape().at(&meta_path)?;
    let store = checkpoint::read_params(shape, BufReader::new(File::open(&params)?)).at(&params)?;
    Ok((meta, store))
}

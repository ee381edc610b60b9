//! Mini-batch training of the encoder, tables and decoder relations.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{self, Mode};
use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::loss::{bce_loss_smoothed, nssal_loss_weighted_by};
use crate::negatives::sample_negatives;
use crate::optim::Adam;
use crate::params::{ParameterStore, Real};
use crate::seed;
use crate::tokenizer::{NodeHash, NodeHashes};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossConfig {
    /// Self-adversarial negative sampling loss.
    Nssal { margin: f64, temperature: f64 },
    /// Binary cross-entropy with label smoothing.
    Bce { label_smoothing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub num_negatives: usize,
    pub loss: LossConfig,
    pub dropout: f64,
    pub seed: u64,
    /// Redraw negatives that are known training triples.
    pub filter_negatives: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
}

impl TrainReport {
    /// `epoch,mean_loss,wall_seconds` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,wall_seconds\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{:.3}\n", e.epoch, e.mean_loss, e.wall_seconds));
        }
        s
    }
}

/// Checks that a tokenization fits a parameter store.
pub fn check_compatible<F: Real>(store: &ParameterStore<F>, hashes: &NodeHashes) -> Result<()> {
    let s = &store.shape;
    let ok = s.k == hashes.k
        && s.m == hashes.m
        && s.vocab_size == hashes.vocab().size()
        && s.distance_buckets == hashes.num_distance_buckets()
        && s.num_relations == hashes.num_relations;
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "model expects k={} m={} vocab={} buckets={} relations={}, hashes have k={} m={} vocab={} buckets={} relations={}",
            s.k,
            s.m,
            s.vocab_size,
            s.distance_buckets,
            s.num_relations,
            hashes.k,
            hashes.m,
            hashes.vocab().size(),
            hashes.num_distance_buckets(),
            hashes.num_relations
        )))
    }
}

/// Encoded entities of one batch, addressed by entity id.
struct BatchEntities<F> {
    index: HashMap<u32, usize>,
    encoded: encoder::EncodedBatch<F>,
}

fn encode_entities<F: Real>(
    store: &ParameterStore<F>,
    hashes: &[NodeHash],
    triples: &[Triple],
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<BatchEntities<F>> {
    let mut ids: Vec<u32> = triples.iter().flat_map(|t| [t.head, t.tail]).collect();
    ids.sort_unstable();
    ids.dedup();
    if let Some(&bad) = ids.iter().find(|&&e| e as usize >= hashes.len()) {
        return Err(Error::OutOfBounds {
            kind: "entity",
            id: u64::from(bad),
            limit: hashes.len() as u64,
        });
    }
    let refs: Vec<&NodeHash> = ids.iter().map(|&e| &hashes[e as usize]).collect();
    let encoded = encoder::forward(store, &refs, mode, rng)?;
    let index = ids.into_iter().enumerate().map(|(i, e)| (e, i)).collect();
    Ok(BatchEntities { index, encoded })
}

fn check_relations<F: Real>(store: &ParameterStore<F>, triples: &[Triple]) -> Result<()> {
    let limit = store.relations.rows;
    match triples.iter().find(|t| t.relation as usize >= limit) {
        Some(t) => Err(Error::OutOfBounds {
            kind: "relation",
            id: u64::from(t.relation),
            limit: limit as u64,
        }),
        None => Ok(()),
    }
}

/// Loss of a batch. `negatives` holds the same number of corruptions for
/// every positive, grouped by positive.
pub fn batch_loss<F: Real>(
    store: &ParameterStore<F>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    loss: &LossConfig,
) -> Result<F> {
    let mut rng = seed::rng(0);
    let (value, _, _) = scores_and_loss(store, hashes, positives, negatives, loss, Mode::Eval, None, &mut rng)?;
    Ok(value.loss)
}

/// [`batch_loss`] with the self-adversarial weights computed from the
/// negative scores under `reference` rather than `store`. This is the
/// function whose gradient [`batch_loss_and_grad`] returns at
/// `store == reference`.
pub fn batch_loss_frozen_weights<F: Real>(
    store: &ParameterStore<F>,
    reference: &ParameterStore<F>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    loss: &LossConfig,
) -> Result<F> {
    let mut rng = seed::rng(0);
    let weights = negative_scores(reference, hashes, positives, negatives, &mut rng)?;
    let (value, _, _) = scores_and_loss(
        store,
        hashes,
        positives,
        negatives,
        loss,
        Mode::Eval,
        Some(&weights),
        &mut rng,
    )?;
    Ok(value.loss)
}

fn negative_scores<F: Real>(
    store: &ParameterStore<F>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<F>> {
    let mut all: Vec<Triple> = positives.to_vec();
    all.extend_from_slice(negatives);
    check_relations(store, &all)?;
    let ents = encode_entities(store, hashes, &all, Mode::Eval, rng)?;
    Ok(negatives
        .iter()
        .map(|t| {
            store.shape.decoder.score(
                ents.encoded.row(ents.index[&t.head]),
                store.relations.row(t.relation as usize),
                ents.encoded.row(ents.index[&t.tail]),
            )
        })
        .collect())
}

type Scored<F> = (crate::loss::LossGrad<F>, BatchEntities<F>, Vec<Triple>);

fn scores_and_loss<F: Real>(
    store: &ParameterStore<F>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    loss: &LossConfig,
    mode: Mode,
    frozen: Option<&[F]>,
    rng: &mut ChaCha8Rng,
) -> Result<Scored<F>> {
    if positives.is_empty() || negatives.is_empty() || negatives.len() % positives.len() != 0 {
        return Err(Error::invalid(
            "need a non-empty batch with the same number of negatives per positive",
        ));
    }
    let all: Vec<Triple> = positives.iter().chain(negatives).copied().collect();
    check_relations(store, &all)?;
    let ents = encode_entities(store, hashes, &all, mode, rng)?;
    let decoder = store.shape.decoder;
    let score = |t: &Triple| {
        decoder.score(
            ents.encoded.row(ents.index[&t.head]),
            store.relations.row(t.relation as usize),
            ents.encoded.row(ents.index[&t.tail]),
        )
    };
    let pos: Vec<F> = positives.iter().map(score).collect();
    let neg: Vec<F> = negatives.iter().map(score).collect();
    let n_neg = negatives.len() / positives.len();

    let grads = match *loss {
        LossConfig::Nssal { margin, temperature } => {
            let p = positives.len();
            let scale = F::one() / F::lit(p as f64);
            let mut total = F::zero();
            let mut d_pos = Vec::with_capacity(p);
            let mut d_neg = Vec::with_capacity(neg.len());
            for i in 0..p {
                let group = i * n_neg..(i + 1) * n_neg;
                let g = nssal_loss_weighted_by(
                    pos[i],
                    &neg[group.clone()],
                    &frozen.unwrap_or(&neg)[group],
                    F::lit(margin),
                    F::lit(temperature),
                );
                total += g.loss;
                d_pos.push(g.d_pos[0] * scale);
                d_neg.extend(g.d_neg.into_iter().map(|x| x * scale));
            }
            crate::loss::LossGrad {
                loss: total * scale,
                d_pos,
                d_neg,
            }
        }
        LossConfig::Bce { label_smoothing } => bce_loss_smoothed(&pos, &neg, F::lit(label_smoothing)),
    };
    Ok((grads, ents, all))
}

/// Loss of a batch; gradients are accumulated into `store`.
pub fn batch_loss_and_grad<F: Real>(
    store: &mut ParameterStore<F>,
    hashes: &[NodeHash],
    positives: &[Triple],
    negatives: &[Triple],
    loss: &LossConfig,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<F> {
    let (grads, ents, all) = scores_and_loss(store, hashes, positives, negatives, loss, mode, None, rng)?;
    let decoder = store.shape.decoder;
    let dim = ents.encoded.dim;
    let width = store.relations.cols;
    let mut d_emb = vec![F::zero(); ents.encoded.outputs.len()];
    let mut dh = vec![F::zero(); dim];
    let mut dt = vec![F::zero(); dim];
    let mut drel = vec![F::zero(); width];
    for (t, &g) in all.iter().zip(grads.d_pos.iter().chain(&grads.d_neg)) {
        if g == F::zero() {
            continue;
        }
        let (hi, ti) = (ents.index[&t.head], ents.index[&t.tail]);
        dh.iter_mut().for_each(|x| *x = F::zero());
        dt.iter_mut().for_each(|x| *x = F::zero());
        drel.iter_mut().for_each(|x| *x = F::zero());
        decoder.backward(
            ents.encoded.row(hi),
            store.relations.row(t.relation as usize),
            ents.encoded.row(ti),
            g,
            &mut dh,
            &mut drel,
            &mut dt,
        );
        for (a, b) in d_emb[hi * dim..(hi + 1) * dim].iter_mut().zip(&dh) {
            *a += *b;
        }
        for (a, b) in d_emb[ti * dim..(ti + 1) * dim].iter_mut().zip(&dt) {
            *a += *b;
        }
        for (a, b) in store.relations.grad_row_mut(t.relation as usize).iter_mut().zip(&drel) {
            *a += *b;
        }
    }
    encoder::backward(store, &ents.encoded, &d_emb)?;
    Ok(grads.loss)
}

/// Trains on `triples`; `hashes` must cover every entity they mention.
pub fn train<F: Real>(
    triples: &[Triple],
    hashes: &NodeHashes,
    store: &mut ParameterStore<F>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    train_with(triples, hashes, store, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F: Real>(
    triples: &[Triple],
    hashes: &NodeHashes,
    store: &mut ParameterStore<F>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    check_compatible(store, hashes)?;
    if config.batch_size == 0 || config.num_negatives == 0 {
        return Err(Error::invalid("batch size and negatives per positive must be positive"));
    }
    let num_entities = hashes.len();
    let filter: Option<HashSet<Triple>> = config
        .filter_negatives
        .then(|| triples.iter().copied().collect());
    let mut opt = Adam::new(config.lr);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let started = Instant::now();
    store.zero_grad();

    for epoch in 1..=config.epochs {
        let mut rng = seed::rng(seed::mix(config.seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let positives: Vec<Triple> = chunk.iter().map(|&i| triples[i]).collect();
            let negatives = sample_negatives(
                &positives,
                num_entities,
                config.num_negatives,
                &mut rng,
                filter.as_ref(),
            );
            let loss = batch_loss_and_grad(
                store,
                &hashes.hashes,
                &positives,
                &negatives,
                &config.loss,
                Mode::Train {
                    dropout: config.dropout,
                },
                &mut rng,
            )?
            .f64();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss,
                });
            }
            weighted += loss * positives.len() as f64;
            opt.step(&mut store.params_mut())?;
        }
        let log = EpochLog {
            epoch,
            mean_loss: if triples.is_empty() {
                0.0
            } else {
                weighted / triples.len() as f64
            },
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        report.epochs.push(log);
    }
    Ok(report)
}

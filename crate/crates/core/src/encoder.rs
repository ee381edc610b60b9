//! Hash vectorization and the MLP encoder.
//!
//! A hash becomes a `(k + m) × d` matrix: anchor slot `i` holds
//! `V[anchor_i] + Z[distance_i]`, relation slot `j` holds `V[relation_j]`.
//! `PAD` slots are zero rows and the unreachable bucket adds nothing, so
//! neither table row can influence the output. The matrix is flattened and
//! passed through `Linear -> ReLU -> Dropout -> ... -> Linear`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{ParameterStore, Real};
use crate::tokenizer::NodeHash;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout on every hidden layer.
    Train { dropout: f64 },
    /// Deterministic; still caches activations for `backward`.
    Eval,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
struct ForwardCache<F> {
    hashes: Vec<NodeHash>,
    /// Input of every layer, `batch × in_dim` each.
    inputs: Vec<Vec<F>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<F>>,
    /// Dropout multipliers (0 or 1/(1-p)) of hidden layers, if any.
    masks: Vec<Option<Vec<F>>>,
}

#[derive(Debug, Clone)]
pub struct EncodedBatch<F> {
    pub batch: usize,
    pub dim: usize,
    /// `batch × dim`, row-major.
    pub outputs: Vec<F>,
    cache: Option<ForwardCache<F>>,
}

impl<F: Real> EncodedBatch<F> {
    pub fn row(&self, i: usize) -> &[F] {
        &self.outputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Drops cached activations; `backward` on the result fails.
    pub fn detach(mut self) -> Self {
        self.cache = None;
        self
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

fn check_hash<F: Real>(store: &ParameterStore<F>, hash: &NodeHash) -> Result<()> {
    let s = &store.shape;
    if hash.anchors.len() != s.k || hash.distances.len() != s.k || hash.relations.len() != s.m {
        return Err(Error::ShapeMismatch(format!(
            "hash has {}/{}/{} slots, model expects k={} m={}",
            hash.anchors.len(),
            hash.distances.len(),
            hash.relations.len(),
            s.k,
            s.m
        )));
    }
    let vocab = s.vocab_size as u32;
    if let Some(&t) = hash.anchors.iter().chain(&hash.relations).find(|&&t| t >= vocab) {
        return Err(Error::OutOfBounds {
            kind: "token",
            id: u64::from(t),
            limit: u64::from(vocab),
        });
    }
    let buckets = s.distance_buckets as u32;
    if let Some(&d) = hash.distances.iter().find(|&&d| d >= buckets) {
        return Err(Error::OutOfBounds {
            kind: "distance bucket",
            id: u64::from(d),
            limit: u64::from(buckets),
        });
    }
    Ok(())
}

fn vectorize_into<F: Real>(store: &ParameterStore<F>, hash: &NodeHash, out: &mut [F]) {
    let d = store.shape.dim;
    let pad = store.pad_token();
    let unreachable = store.unreachable_bucket();
    out.iter_mut().for_each(|x| *x = F::zero());
    for (slot, (&tok, &bucket)) in hash.anchors.iter().zip(&hash.distances).enumerate() {
        if tok == pad {
            continue;
        }
        let row = &mut out[slot * d..(slot + 1) * d];
        row.copy_from_slice(store.vocab.row(tok as usize));
        if store.shape.use_distances && bucket != unreachable {
            for (o, z) in row.iter_mut().zip(store.distances.row(bucket as usize)) {
                *o += *z;
            }
        }
    }
    let k = store.shape.k;
    for (j, &tok) in hash.relations.iter().enumerate() {
        if tok != pad {
            out[(k + j) * d..(k + j + 1) * d].copy_from_slice(store.vocab.row(tok as usize));
        }
    }
}

/// `(k + m) × d` row-major matrix for one hash.
pub fn vectorize_hash<F: Real>(store: &ParameterStore<F>, hash: &NodeHash) -> Result<Vec<F>> {
    check_hash(store, hash)?;
    let mut out = vec![F::zero(); store.shape.input_dim()];
    vectorize_into(store, hash, &mut out);
    Ok(out)
}

/// `out[b] = W x[b] + bias`, parallel over batch rows.
fn linear<F: Real>(x: &[F], in_dim: usize, w: &[F], bias: &[F], out_dim: usize) -> Vec<F> {
    let mut out = vec![F::zero(); (x.len() / in_dim.max(1)) * out_dim];
    out.par_chunks_mut(out_dim)
        .zip(x.par_chunks(in_dim))
        .for_each(|(o, xi)| {
            for (r, slot) in o.iter_mut().enumerate() {
                let wr = &w[r * in_dim..(r + 1) * in_dim];
                let mut acc = bias[r];
                for c in 0..in_dim {
                    acc += wr[c] * xi[c];
                }
                *slot = acc;
            }
        });
    out
}

/// Encodes a batch of hashes.
pub fn forward<F: Real>(
    store: &ParameterStore<F>,
    hashes: &[&NodeHash],
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<EncodedBatch<F>> {
    for h in hashes {
        check_hash(store, h)?;
    }
    let batch = hashes.len();
    let in_dim = store.shape.input_dim();
    let mut x = vec![F::zero(); batch * in_dim];
    x.par_chunks_mut(in_dim.max(1))
        .zip(hashes.par_iter())
        .for_each(|(row, h)| vectorize_into(store, h, row));

    let dropout = match mode {
        Mode::Train { dropout } => {
            if !(0.0..1.0).contains(&dropout) {
                return Err(Error::invalid(format!("dropout must be in [0, 1), got {dropout}")));
            }
            dropout
        }
        Mode::Eval => 0.0,
    };

    let n_layers = store.layers.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut masks = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut act = x;
    for (l, layer) in store.layers.iter().enumerate() {
        let out_dim = layer.out_dim();
        let z = linear(&act, layer.in_dim(), &layer.weight.value, &layer.bias.value, out_dim);
        inputs.push(std::mem::take(&mut act));
        if l + 1 == n_layers {
            act = z;
            break;
        }
        let mut a: Vec<F> = z.iter().map(|&v| v.max(F::zero())).collect();
        let mask = if dropout > 0.0 {
            let keep = F::lit(1.0 / (1.0 - dropout));
            let m: Vec<F> = (0..a.len())
                .map(|_| if rng.random::<f64>() < dropout { F::zero() } else { keep })
                .collect();
            a.iter_mut().zip(&m).for_each(|(v, s)| *v *= *s);
            Some(m)
        } else {
            None
        };
        pre.push(z);
        masks.push(mask);
        act = a;
    }

    Ok(EncodedBatch {
        batch,
        dim: store.shape.dim,
        outputs: act,
        cache: Some(ForwardCache {
            hashes: hashes.iter().map(|&h| h.clone()).collect(),
            inputs,
            pre,
            masks,
        }),
    })
}

/// Eval-mode encoding without a cache.
pub fn encode_inference<F: Real>(store: &ParameterStore<F>, hashes: &[&NodeHash]) -> Result<EncodedBatch<F>> {
    let mut rng = crate::seed::rng(0);
    Ok(forward(store, hashes, Mode::Eval, &mut rng)?.detach())
}

/// Single-hash convenience wrapper around [`forward`].
pub fn encode_one<F: Real>(
    store: &ParameterStore<F>,
    hash: &NodeHash,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<F>> {
    Ok(forward(store, &[hash], mode, rng)?.outputs)
}

/// Accumulates parameter gradients for `upstream = d loss / d outputs`
/// (`batch × dim`). Dense gradients are reduced over the batch in index order
/// for each weight row, and table rows are scattered sequentially, so the
/// result does not depend on the thread count.
pub fn backward<F: Real>(store: &mut ParameterStore<F>, batch: &EncodedBatch<F>, upstream: &[F]) -> Result<()> {
    let cache = batch.cache.as_ref().ok_or(Error::NoForwardCache)?;
    if upstream.len() != batch.outputs.len() {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient has {} values, batch output has {}",
            upstream.len(),
            batch.outputs.len()
        )));
    }
    let b = batch.batch;
    let mut g = upstream.to_vec();
    for l in (0..store.layers.len()).rev() {
        let layer = &mut store.layers[l];
        let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
        let x = &cache.inputs[l];

        layer
            .weight
            .grad
            .par_chunks_mut(in_dim.max(1))
            .enumerate()
            .for_each(|(r, gw)| {
                for bi in 0..b {
                    let gr = g[bi * out_dim + r];
                    if gr == F::zero() {
                        continue;
                    }
                    let xi = &x[bi * in_dim..(bi + 1) * in_dim];
                    for c in 0..in_dim {
                        gw[c] += gr * xi[c];
                    }
                }
            });
        for bi in 0..b {
            for r in 0..out_dim {
                layer.bias.grad[r] += g[bi * out_dim + r];
            }
        }

        let w = &layer.weight.value;
        let mut gin = vec![F::zero(); b * in_dim];
        gin.par_chunks_mut(in_dim.max(1))
            .zip(g.par_chunks(out_dim))
            .for_each(|(gi, go)| {
                for r in 0..out_dim {
                    let s = go[r];
                    if s == F::zero() {
                        continue;
                    }
                    let wr = &w[r * in_dim..(r + 1) * in_dim];
                    for c in 0..in_dim {
                        gi[c] += s * wr[c];
                    }
                }
            });
        if l > 0 {
            let z = &cache.pre[l - 1];
            let mask = &cache.masks[l - 1];
            for (i, v) in gin.iter_mut().enumerate() {
                if z[i] <= F::zero() {
                    *v = F::zero();
                } else if let Some(m) = mask {
                    *v *= m[i];
                }
            }
        }
        g = gin;
    }

    let d = store.shape.dim;
    let k = store.shape.k;
    let in_dim = store.shape.input_dim();
    let pad = store.pad_token();
    let unreachable = store.unreachable_bucket();
    let use_distances = store.shape.use_distances;
    for (bi, h) in cache.hashes.iter().enumerate() {
        let gx = &g[bi * in_dim..(bi + 1) * in_dim];
        for (slot, (&tok, &bucket)) in h.anchors.iter().zip(&h.distances).enumerate() {
            if tok == pad {
                continue;
            }
            let gs = &gx[slot * d..(slot + 1) * d];
            add(store.vocab.grad_row_mut(tok as usize), gs);
            if use_distances && bucket != unreachable {
                add(store.distances.grad_row_mut(bucket as usize), gs);
            }
        }
        for (j, &tok) in h.relations.iter().enumerate() {
            if tok != pad {
                add(store.vocab.grad_row_mut(tok as usize), &gx[(k + j) * d..(k + j + 1) * d]);
            }
        }
    }
    store.vocab.grad_row_mut(pad as usize).iter_mut().for_each(|v| *v = F::zero());
    store
        .distances
        .grad_row_mut(unreachable as usize)
        .iter_mut()
        .for_each(|v| *v = F::zero());
    Ok(())
}

#[inline]
fn add<F: Real>(dst: &mut [F], src: &[F]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

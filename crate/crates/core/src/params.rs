//! Trainable tensors and their initialization.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

use crate::decoder::DecoderKind;
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenizer::NodeHashes;

/// Floating-point element type. Training uses `f32`, gradient checks `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Row-major matrix with a gradient buffer of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub rows: usize,
    pub cols: usize,
    pub value: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Real> Param<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            value: vec![F::zero(); rows * cols],
            grad: vec![F::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.value[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.value[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn grad_row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.grad[r * self.cols..(r + 1) * self.cols]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = F::zero());
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn cast<G: Real>(&self) -> Param<G> {
        Param {
            rows: self.rows,
            cols: self.cols,
            value: self.value.iter().map(|&x| G::lit(x.f64())).collect(),
            grad: self.grad.iter().map(|&x| G::lit(x.f64())).collect(),
        }
    }
}

/// Fully connected layer, `y = W x + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
}

impl<F: Real> Dense<F> {
    pub fn in_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows
    }
}

/// Everything needed to allocate a [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    /// Vocabulary rows including `PAD` and `DISCONNECTED`.
    pub vocab_size: usize,
    /// Distance-table rows including the unreachable bucket.
    pub distance_buckets: usize,
    pub k: usize,
    pub m: usize,
    /// Token embedding width; also the encoder output width.
    pub dim: usize,
    pub hidden: usize,
    /// Number of linear maps in the encoder.
    pub layers: usize,
    /// Relations scored by the decoder, inverses included.
    pub num_relations: usize,
    pub decoder: DecoderKind,
    /// Add distance embeddings to anchor slots. Off for the no-distances
    /// ablation.
    pub use_distances: bool,
}

impl ModelShape {
    pub fn for_hashes(
        hashes: &NodeHashes,
        dim: usize,
        hidden: usize,
        layers: usize,
        decoder: DecoderKind,
    ) -> Self {
        Self {
            vocab_size: hashes.vocab().size(),
            distance_buckets: hashes.num_distance_buckets(),
            k: hashes.k,
            m: hashes.m,
            dim,
            hidden,
            layers,
            num_relations: hashes.num_relations,
            decoder,
            use_distances: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        (self.k + self.m) * self.dim
    }

    pub fn relation_width(&self) -> usize {
        self.decoder.relation_width(self.dim)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.layers == 0 || self.k + self.m == 0 {
            return Err(Error::invalid(
                "dim, encoder layers and hash length (k + m) must be positive",
            ));
        }
        if self.layers > 1 && self.hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        if self.vocab_size < 2 || self.distance_buckets < 1 {
            return Err(Error::invalid("vocabulary must include the special tokens"));
        }
        self.decoder.check_dim(self.dim)
    }

    /// `(out, in)` of every encoder layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers);
        let mut inp = self.input_dim();
        for l in 0..self.layers {
            let out = if l + 1 == self.layers { self.dim } else { self.hidden };
            dims.push((out, inp));
            inp = out;
        }
        dims
    }
}

/// Vocabulary table, distance table, encoder layers and decoder relations.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<F> {
    pub shape: ModelShape,
    pub vocab: Param<F>,
    pub distances: Param<F>,
    pub layers: Vec<Dense<F>>,
    pub relations: Param<F>,
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform<F: Real>(p: &mut Param<F>, bound: f64, seed: u64) {
    let mut rng = seed::rng(seed);
    for v in &mut p.value {
        *v = F::lit(rng.random_range(-bound..=bound));
    }
}

impl<F: Real> ParameterStore<F> {
    /// Glorot-uniform init of every matrix (fan-in = columns, fan-out =
    /// rows), zero biases, zero `PAD` row. RotatE phases are uniform in
    /// `[-pi, pi]`.
    pub fn init(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut salt = 0u64;
        let mut next_seed = || {
            salt += 1;
            seed::mix(seed, salt)
        };

        let mut vocab = Param::zeros(shape.vocab_size, shape.dim);
        uniform(&mut vocab, xavier_bound(shape.dim, shape.vocab_size), next_seed());
        let mut distances = Param::zeros(shape.distance_buckets, shape.dim);
        uniform(
            &mut distances,
            xavier_bound(shape.dim, shape.distance_buckets),
            next_seed(),
        );
        let layers = shape
            .layer_dims()
            .into_iter()
            .map(|(out, inp)| {
                let mut weight = Param::zeros(out, inp);
                uniform(&mut weight, xavier_bound(inp, out), next_seed());
                Dense {
                    weight,
                    bias: Param::zeros(out, 1),
                }
            })
            .collect();
        let mut relations = Param::zeros(shape.num_relations, shape.relation_width());
        let bound = match shape.decoder {
            DecoderKind::RotatE => std::f64::consts::PI,
            DecoderKind::DistMult => xavier_bound(relations.cols, relations.rows),
        };
        uniform(&mut relations, bound, next_seed());

        let mut store = Self {
            shape,
            vocab,
            distances,
            layers,
            relations,
        };
        store.zero_inert_rows();
        Ok(store)
    }

    pub fn pad_token(&self) -> u32 {
        self.shape.vocab_size as u32 - 2
    }

    pub fn unreachable_bucket(&self) -> u32 {
        self.shape.distance_buckets as u32 - 1
    }

    /// Zeroes the `PAD` vocabulary row and the unreachable distance row.
    /// Neither is ever read by the encoder; keeping them at zero keeps
    /// checkpoints clean.
    pub fn zero_inert_rows(&mut self) {
        let pad = self.pad_token() as usize;
        let un = self.unreachable_bucket() as usize;
        self.vocab.row_mut(pad).iter_mut().for_each(|x| *x = F::zero());
        self.distances.row_mut(un).iter_mut().for_each(|x| *x = F::zero());
    }

    /// Tensors in checkpoint order.
    pub fn params(&self) -> Vec<&Param<F>> {
        let mut out = vec![&self.vocab, &self.distances];
        for l in &self.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.relations);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut out = vec![&mut self.vocab, &mut self.distances];
        for l in &mut self.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.relations);
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> ParameterStore<G> {
        ParameterStore {
            shape: self.shape,
            vocab: self.vocab.cast(),
            distances: self.distances.cast(),
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            relations: self.relations.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> ModelShape {
        ModelShape {
            vocab_size: 12,
            distance_buckets: 4,
            k: 2,
            m: 1,
            dim: 6,
            hidden: 8,
            layers: 2,
            num_relations: 4,
            decoder: DecoderKind::RotatE,
            use_distances: true,
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        assert!((xavier_bound(4, 8) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_init() {
        let a = ParameterStore::<f32>::init(shape(), 5).unwrap();
        let b = ParameterStore::<f32>::init(shape(), 5).unwrap();
        assert_eq!(a, b);
        let c = ParameterStore::<f32>::init(shape(), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_layout() {
        let s = ParameterStore::<f64>::init(shape(), 1).unwrap();
        assert!(s.vocab.row(s.pad_token() as usize).iter().all(|&x| x == 0.0));
        assert!(s.layers.iter().all(|l| l.bias.value.iter().all(|&b| b == 0.0)));
        assert_eq!(s.layers[0].weight.cols, 18);
        assert_eq!(s.layers[0].weight.rows, 8);
        assert_eq!(s.layers[1].weight.rows, 6);
        assert_eq!(s.relations.cols, 3);
        let bound = xavier_bound(18, 8);
        assert!(s.layers[0].weight.value.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_mean_statistics() {
        // 10^5 draws from U(-b, b): the mean has standard deviation
        // b / sqrt(3 * 10^5).
        let mut sh = shape();
        sh.vocab_size = 100_002;
        sh.dim = 1;
        sh.k = 1;
        sh.m = 0;
        sh.decoder = DecoderKind::DistMult;
        let s = ParameterStore::<f64>::init(sh, 11).unwrap();
        let vals = &s.vocab.value[..100_000];
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let bound = xavier_bound(1, 100_002);
        let sigma = bound / (3.0 * 1e5f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn invalid_dims() {
        let mut sh = shape();
        sh.dim = 0;
        assert!(ParameterStore::<f32>::init(sh, 0).is_err());
        let mut sh = shape();
        sh.dim = 5;
        assert!(ParameterStore::<f32>::init(sh, 0).is_err(), "RotatE needs even dim");
        let mut sh = shape();
        sh.k = 0;
        sh.m = 0;
        assert!(ParameterStore::<f32>::init(sh, 0).is_err());
    }
}

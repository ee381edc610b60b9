use anchorkg::decoder::DecoderKind;
use anchorkg::gradcheck::check_gradients;
use anchorkg::graph::Triple;
use anchorkg::params::{ModelShape, ParameterStore};
use anchorkg::tokenizer::NodeHash;
use anchorkg::train::LossConfig;
use proptest::prelude::*;
use rand::Rng;

/// Random hashes over a vocabulary of `anchors` anchors and `relations`
/// relations, PAD, DISCONNECTED and the unreachable bucket included.
fn random_hashes(shape: &ModelShape, anchors: usize, n: usize, seed: u64) -> Vec<NodeHash> {
    let mut rng = anchorkg::seed::rng(seed);
    let pad = (shape.vocab_size - 2) as u32;
    (0..n)
        .map(|_| NodeHash {
            anchors: (0..shape.k)
                .map(|_| match rng.random_range(0..10) {
                    0 => pad,
                    1 => pad + 1,
                    _ => rng.random_range(0..anchors.max(1) as u32).min(pad),
                })
                .collect(),
            distances: (0..shape.k).map(|_| rng.random_range(0..shape.distance_buckets as u32)).collect(),
            relations: (0..shape.m)
                .map(|_| {
                    if rng.random_range(0..5) == 0 {
                        pad
                    } else {
                        anchors as u32 + rng.random_range(0..shape.num_relations as u32)
                    }
                })
                .collect(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn end_to_end_gradients(
        k in 0usize..=4,
        m in 0usize..=4,
        half in 1usize..=4,
        layers in 1usize..=3,
        hidden in 1usize..=6,
        rotate in any::<bool>(),
        nssal in any::<bool>(),
        seed in any::<u64>(),
    ) {
        prop_assume!(k + m > 0);
        let anchors = 3;
        let num_relations = 4;
        let shape = ModelShape {
            vocab_size: anchors + num_relations + 2,
            distance_buckets: 4,
            k,
            m,
            dim: 2 * half,
            hidden,
            layers,
            num_relations,
            decoder: if rotate { DecoderKind::RotatE } else { DecoderKind::DistMult },
            use_distances: true,
        };
        let mut store = ParameterStore::<f64>::init(shape, seed).unwrap();
        // Zero biases can park a dead unit exactly on the ReLU kink.
        let mut rng = anchorkg::seed::rng(seed ^ 2);
        for layer in &mut store.layers {
            layer.bias.value.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        let hashes = random_hashes(&shape, anchors, 6, seed ^ 1);
        let pos = [Triple::new(0, 1, 2), Triple::new(3, 3, 4)];
        let neg = [
            Triple::new(0, 1, 5), Triple::new(1, 1, 2), Triple::new(0, 1, 3),
            Triple::new(3, 3, 0), Triple::new(2, 3, 4), Triple::new(5, 3, 4),
        ];
        let loss = if nssal {
            LossConfig::Nssal { margin: 1.5, temperature: 0.7 }
        } else {
            LossConfig::Bce { label_smoothing: 0.1 }
        };
        for c in check_gradients(&store, &hashes, &pos, &neg, &loss, 1e-5).unwrap() {
            prop_assert!(c.rel_err <= 1e-4, "tensor {} rel err {}", c.tensor, c.rel_err);
        }
    }
}

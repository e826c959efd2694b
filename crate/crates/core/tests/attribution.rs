mod common;

use common::{columns, random_sequence, rng, scalar_logits, scalar_softmax};
use gama_core::attribution::*;
use gama_core::seqmodel::{encode, init_model, OneHotMatrix, OutputTarget, INPUT_DIM, OUTPUT_DIM};
use ndarray::Array2;

fn scalar_output(p: &gama_core::seqmodel::LstmParameters, x: &Array2<f64>, pos: usize, dim: usize, target: OutputTarget) -> f64 {
    let z = &scalar_logits(p, &columns(x))[pos];
    match target {
        OutputTarget::PreSoftmax => z[dim],
        OutputTarget::PostSoftmax => scalar_softmax(z)[dim],
        OutputTarget::LogSoftmax => scalar_softmax(z)[dim].ln(),
    }
}

#[test]
fn batched_tensor_matches_naive_loop() {
    let mut r = rng(11);
    let params = init_model(8, 5).unwrap();
    let seq = random_sequence(&mut r, 3);
    let input = encode(&seq);
    for target in [OutputTarget::PreSoftmax, OutputTarget::PostSoftmax] {
        let cfg = IgConfig::default().with_steps(25).with_target(target);
        let t4 = ig_tensor(&params, &seq, &cfg).unwrap();
        assert_eq!(t4.0.dim(), (INPUT_DIM, 4, OUTPUT_DIM, 4));
        for p in 0..4 {
            for d in 0..OUTPUT_DIM {
                let naive = integrated_gradients(&params, &input, p, d, &cfg).unwrap();
                for k in 0..INPUT_DIM {
                    for t in 0..4 {
                        let a = t4.0[[k, t, d, p]];
                        let b = naive[[k, t]];
                        assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-6), "{a} vs {b}");
                    }
                }
            }
        }
    }
}

#[test]
fn reduced_route_equals_reduced_tensor() {
    let mut r = rng(12);
    for (h, len) in [(8, 3), (12, 6)] {
        let params = init_model(h, len as u64).unwrap();
        let seq = random_sequence(&mut r, len);
        let cfg = IgConfig::desk().with_steps(30);
        let full = reduce_to_2d(&ig_tensor(&params, &seq, &cfg).unwrap(), &encode(&seq)).unwrap();
        let direct = ig_2d(&params, &seq, &cfg).unwrap();
        for (a, b) in full.0.iter().zip(direct.0.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-6), "{a} vs {b}");
        }
    }
}

#[test]
fn causal_entries_are_zero() {
    let mut r = rng(13);
    let params = init_model(10, 1).unwrap();
    let seq = random_sequence(&mut r, 5);
    let t4 = ig_tensor(&params, &seq, &IgConfig::desk()).unwrap();
    for ((_, t, _, p), v) in t4.0.indexed_iter() {
        if t > p {
            assert!(v.abs() <= 1e-12);
        }
    }
    let r2 = ig_2d(&params, &seq, &IgConfig::desk()).unwrap();
    for ((t, p), v) in r2.0.indexed_iter() {
        if t > p {
            assert!(v.abs() <= 1e-12);
        }
    }
}

#[test]
fn baseline_input_has_zero_attribution() {
    let params = init_model(6, 2).unwrap();
    let zero = OneHotMatrix::from_array(Array2::zeros((INPUT_DIM, 4))).unwrap();
    let ig = integrated_gradients(&params, &zero, 3, 7, &IgConfig::desk()).unwrap();
    assert!(ig.iter().all(|&v| v == 0.0));
}

#[test]
fn completeness_against_scalar_oracle() {
    let mut r = rng(14);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let params = init_model(8 + i, 100 + i as u64).unwrap();
        let seq = random_sequence(&mut r, 3 + i % 3);
        let input = encode(&seq);
        let pos = seq.len();
        let dim = i % OUTPUT_DIM;
        for target in [OutputTarget::PreSoftmax, OutputTarget::PostSoftmax, OutputTarget::LogSoftmax] {
            let cfg = IgConfig::default().with_steps(1000).with_target(target);
            let ig = integrated_gradients(&params, &input, pos, dim, &cfg).unwrap();
            let zero = Array2::zeros(input.values().raw_dim());
            let delta = scalar_output(&params, input.values(), pos, dim, target)
                - scalar_output(&params, &zero, pos, dim, target);
            let err = (ig.sum() - delta).abs() / delta.abs();
            worst = worst.max(err);
        }
    }
    assert!(worst <= 1e-3, "worst relative completeness error {worst}");
}

#[test]
fn non_selected_rows_are_zero_on_trained_model() {
    use gama_core::seqmodel::{train, TrainConfig};
    let mut r = rng(15);
    let data: Vec<_> = (0..40).map(|_| random_sequence(&mut r, 4)).collect();
    let reference = init_model(8, 3).unwrap();
    let cfg = TrainConfig {
        hidden_size: 8,
        learning_rate: 1e-2,
        max_epochs: 20,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let trained = train(&reference, &data, &cfg).unwrap().trained;
    let seq = &data[0];
    let input = encode(seq);
    let selected = input.selected_rows().unwrap();
    let t4 = ig_tensor(&trained, seq, &IgConfig::desk()).unwrap();
    let mut selected_mass = 0.0;
    for ((k, t, _, _), v) in t4.0.indexed_iter() {
        if k == selected[t] {
            selected_mass += v.abs();
        } else {
            assert_eq!(*v, 0.0);
        }
    }
    assert!(selected_mass > 0.0);
    let sim = output_dim_similarity(&t4);
    assert!(sim.max().is_finite());
}

#[test]
fn pooled_counts_and_membership() {
    let mut r = rng(16);
    let params = init_model(6, 9).unwrap();
    let one = vec![random_sequence(&mut r, 3)];
    let d = collect_distributions(&params, &one, &IgConfig::desk()).unwrap();
    assert_eq!(d.len(), 3);
    for t in 1..=3 {
        assert_eq!(d.at(t).len(), 4);
    }
    let ten: Vec<_> = (0..10).map(|_| random_sequence(&mut r, 3)).collect();
    let cfg = IgConfig::desk();
    let mats = attribute_sequences(&params, &ten, &cfg).unwrap();
    let d = IgDistribution::pool(&mats, false).unwrap();
    for t in 1..=3 {
        assert_eq!(d.at(t).len(), 40);
        let expected: Vec<f64> = mats.iter().flat_map(|m| m.0.row(t).to_vec()).collect();
        assert_eq!(d.at(t), expected.as_slice());
    }
    let masked = IgDistribution::pool(&mats, true).unwrap();
    assert_eq!(masked.at(1).len(), 10 * 3);
    assert_eq!(masked.at(3).len(), 10);
    assert!(collect_distributions(&params, &[], &cfg).is_err());
}

#[test]
fn attribution_is_deterministic() {
    let mut r = rng(17);
    let params = init_model(8, 0).unwrap();
    let seqs: Vec<_> = (0..6).map(|_| random_sequence(&mut r, 5)).collect();
    let a = attribute_sequences(&params, &seqs, &IgConfig::desk()).unwrap();
    let b = attribute_sequences(&params, &seqs, &IgConfig::desk()).unwrap();
    assert_eq!(a, b);
}

//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's forward or backward code paths.

#![allow(dead_code)]

use gama_core::seqmodel::{LstmParameters, TokenSequence, AMINO_ACIDS, INPUT_DIM, OUTPUT_DIM};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain scalar-loop LSTM; returns logits `[position][output_dim]` for an
/// arbitrary real-valued input `[position][input_dim]`.
pub fn scalar_logits(p: &LstmParameters, input: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let hs = p.hidden_size();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut h = vec![0.0; hs];
    let mut c = vec![0.0; hs];
    let mut out = Vec::new();
    for x in input {
        let mut pre = vec![0.0; 4 * hs];
        for r in 0..4 * hs {
            let mut acc = p.b_ih[[r, 0]] + p.b_hh[[r, 0]];
            for k in 0..INPUT_DIM {
                acc += p.w_ih[[r, k]] * x[k];
            }
            for k in 0..hs {
                acc += p.w_hh[[r, k]] * h[k];
            }
            pre[r] = acc;
        }
        for j in 0..hs {
            let i = sig(pre[j]);
            let f = sig(pre[hs + j]);
            let g = pre[2 * hs + j].tanh();
            let o = sig(pre[3 * hs + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        let mut z = vec![0.0; OUTPUT_DIM];
        for d in 0..OUTPUT_DIM {
            let mut acc = p.b_out[[d, 0]];
            for k in 0..hs {
                acc += p.w_out[[d, k]] * h[k];
            }
            z[d] = acc;
        }
        out.push(z);
    }
    out
}

pub fn scalar_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Mean next-token cross-entropy via the scalar oracle.
pub fn scalar_loss(p: &LstmParameters, input: &[Vec<f64>], targets: &[usize]) -> f64 {
    let logits = scalar_logits(p, input);
    let mut total = 0.0;
    for (z, &t) in logits.iter().zip(targets) {
        let probs = scalar_softmax(z);
        total -= probs[t].ln();
    }
    total / targets.len() as f64
}

/// Columns of a `22 × T` matrix as rows.
pub fn columns(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.columns().into_iter().map(|c| c.to_vec()).collect()
}

pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize) -> TokenSequence {
    let s: String = (0..len)
        .map(|_| AMINO_ACIDS[rng.gen_range(0..20)])
        .collect();
    s.parse().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative error with a magnitude floor below which the comparison is absolute.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

//! Autoregressive sampling from a trained model.

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lstm::{softmax, LstmParameters};
use super::vocab::{TokenSequence, INPUT_DIM, NUM_AMINO, OUTPUT_DIM, START_INPUT, STOP_OUTPUT};
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoding {
    /// Sample from `softmax(z / temperature)`.
    Temperature(f64),
    /// Zero-temperature limit.
    Greedy,
}

/// Feed START, then one token at a time until STOP or `max_len` tokens.
///
/// STOP is masked at the first step so the result always has at least one token.
pub fn sample(
    params: &LstmParameters,
    decoding: Decoding,
    max_len: usize,
    rng_seed: u64,
) -> Result<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_with(params, decoding, max_len, &mut rng)
}

/// Like [`sample`] but drawing from a caller-owned generator, so many samples
/// can share one seeded stream.
pub fn sample_with(
    params: &LstmParameters,
    decoding: Decoding,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TokenSequence> {
    if let Decoding::Temperature(t) = decoding {
        if !(t > 0.0) {
            return Err(Error::Config(format!("temperature must be > 0, got {t}")));
        }
    }
    if max_len == 0 {
        return Err(Error::Config("max_len must be ≥ 1".into()));
    }
    let mut tokens: Vec<u8> = Vec::with_capacity(max_len);
    let mut xs = vec![start_column()];
    loop {
        let trace = params.run(xs.clone());
        let mut logits: Vec<f64> = trace.logits(trace.steps() - 1).column(0).to_vec();
        if tokens.is_empty() {
            logits[STOP_OUTPUT] = f64::NEG_INFINITY;
        }
        let next = match decoding {
            Decoding::Greedy => argmax(&logits),
            Decoding::Temperature(t) => {
                let scaled: Vec<f64> = logits.iter().map(|z| z / t).collect();
                let probs = softmax(&scaled);
                WeightedIndex::new(&probs)
                    .map_err(|e| Error::Config(format!("degenerate distribution: {e}")))?
                    .sample(rng)
            }
        };
        if next == STOP_OUTPUT {
            break;
        }
        debug_assert!(next < NUM_AMINO && OUTPUT_DIM == NUM_AMINO + 1);
        tokens.push(next as u8);
        if tokens.len() == max_len {
            break;
        }
        let mut x = Array2::zeros((INPUT_DIM, 1));
        x[[next, 0]] = 1.0;
        xs.push(x);
    }
    TokenSequence::from_indices(tokens)
}

fn start_column() -> Array2<f64> {
    let mut x = Array2::zeros((INPUT_DIM, 1));
    x[[START_INPUT, 0]] = 1.0;
    x
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::lstm::init_model;

    #[test]
    fn sampling_is_seeded() {
        let p = init_model(8, 4).unwrap();
        let a = sample(&p, Decoding::Temperature(DEFAULT_TEMPERATURE), 16, 7).unwrap();
        let b = sample(&p, Decoding::Temperature(DEFAULT_TEMPERATURE), 16, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.len() >= 1 && a.len() <= 16);
    }

    #[test]
    fn rejects_non_positive_temperature() {
        let p = init_model(4, 0).unwrap();
        assert!(sample(&p, Decoding::Temperature(0.0), 5, 0).is_err());
        assert!(sample(&p, Decoding::Temperature(-1.0), 5, 0).is_err());
        assert!(sample(&p, Decoding::Greedy, 0, 0).is_err());
    }

    #[test]
    fn greedy_ignores_seed_and_matches_low_temperature() {
        let p = init_model(8, 11).unwrap();
        let g1 = sample(&p, Decoding::Greedy, 12, 1).unwrap();
        let g2 = sample(&p, Decoding::Greedy, 12, 2).unwrap();
        assert_eq!(g1, g2);
        let cold = sample(&p, Decoding::Temperature(1e-6), 12, 3).unwrap();
        assert_eq!(g1, cold);
    }
}

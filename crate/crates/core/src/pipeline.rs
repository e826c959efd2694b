//! End-to-end GAMA run for one dataset: reference snapshot, training,
//! attribution of a seeded sequence sample under both models, and the profile.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute_sequences, Ig2D, IgConfig, IgDistribution, PAPER_IG_STEPS};
use crate::error::{Error, Result};
use crate::gama::{gama_profile, GamaProfile, DEFAULT_EPSILON};
use crate::provenance::derive_seed;
use crate::seqmodel::{
    check_dataset, init_model, sample_with, train_with_progress, Decoding, LstmParameters,
    TokenSequence, TrainConfig, DEFAULT_TEMPERATURE, DESK_HIDDEN_SIZE, PAPER_HIDDEN_SIZE,
    PAPER_LEARNING_RATE,
};

pub const DEFAULT_ATTRIBUTION_SAMPLES: usize = 500;
pub const DESK_LEARNING_RATE: f64 = 1e-5;
pub const DESK_MAX_EPOCHS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

/// Where the sequences fed to attribution come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    /// A seeded subset of the training dataset.
    #[default]
    Dataset,
    /// Sequences sampled from the trained model, kept only at the dataset length.
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub ig: IgConfig,
    pub attribution_samples: usize,
    pub sample_source: SampleSource,
    pub epsilon: f64,
    /// Seeds initialization, shuffling and the attribution sample.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                train: TrainConfig {
                    hidden_size: DESK_HIDDEN_SIZE,
                    learning_rate: DESK_LEARNING_RATE,
                    max_epochs: DESK_MAX_EPOCHS,
                    ..TrainConfig::default()
                },
                ig: IgConfig {
                    mask_causal: true,
                    ..IgConfig::desk()
                },
                attribution_samples: DEFAULT_ATTRIBUTION_SAMPLES,
                sample_source: SampleSource::Dataset,
                epsilon: DEFAULT_EPSILON,
                seed: 0,
            },
            Preset::Paper => Self {
                train: TrainConfig {
                    hidden_size: PAPER_HIDDEN_SIZE,
                    learning_rate: PAPER_LEARNING_RATE,
                    ..TrainConfig::default()
                },
                ig: IgConfig::default().with_steps(PAPER_IG_STEPS),
                attribution_samples: DEFAULT_ATTRIBUTION_SAMPLES,
                sample_source: SampleSource::Dataset,
                epsilon: DEFAULT_EPSILON,
                seed: 0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.ig.validate()?;
        if self.attribution_samples == 0 {
            return Err(Error::Config("attribution_samples must be ≥ 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, "init")
    }

    pub fn shuffle_seed(&self) -> u64 {
        derive_seed(self.seed, "shuffle")
    }

    pub fn sample_seed(&self) -> u64 {
        derive_seed(self.seed, "attribution_sample")
    }
}

/// Up to `n` sequences drawn without replacement, kept in dataset order.
pub fn select_sample(sequences: &[TokenSequence], n: usize, seed: u64) -> Vec<TokenSequence> {
    if n >= sequences.len() {
        return sequences.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample_indices(&mut rng, sequences.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| sequences[i].clone()).collect()
}

/// `n` model samples of exactly `len` tokens.
pub fn generate_sample(params: &LstmParameters, len: usize, n: usize, seed: u64) -> Result<Vec<TokenSequence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let budget = 20 * n;
    for _ in 0..budget {
        let s = sample_with(params, Decoding::Temperature(DEFAULT_TEMPERATURE), len, &mut rng)?;
        if s.len() == len {
            out.push(s);
            if out.len() == n {
                return Ok(out);
            }
        }
    }
    Err(Error::Config(format!(
        "only {} of {n} generated sequences reached length {len} in {budget} draws",
        out.len()
    )))
}

/// Reference and trained attribution matrices over the same sequence sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionPair {
    pub sequences: Vec<TokenSequence>,
    pub reference: Vec<Ig2D>,
    pub trained: Vec<Ig2D>,
}

impl AttributionPair {
    pub fn compute(
        reference: &LstmParameters,
        trained: &LstmParameters,
        sequences: Vec<TokenSequence>,
        ig: &IgConfig,
    ) -> Result<Self> {
        Ok(Self {
            reference: attribute_sequences(reference, &sequences, ig)?,
            trained: attribute_sequences(trained, &sequences, ig)?,
            sequences,
        })
    }

    pub fn profile(&self, ig: &IgConfig, epsilon: f64) -> Result<GamaProfile> {
        let r = IgDistribution::pool(&self.reference, ig.mask_causal)?;
        let t = IgDistribution::pool(&self.trained, ig.mask_causal)?;
        gama_profile(&r, &t, epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamaRun {
    pub reference: LstmParameters,
    pub trained: LstmParameters,
    pub loss_trace: Vec<f64>,
    pub attributions: AttributionPair,
    pub profile: GamaProfile,
}

pub fn attribution_sample(
    trained: &LstmParameters,
    dataset: &[TokenSequence],
    cfg: &PipelineConfig,
) -> Result<Vec<TokenSequence>> {
    let len = check_dataset(dataset)?;
    match cfg.sample_source {
        SampleSource::Dataset => Ok(select_sample(dataset, cfg.attribution_samples, cfg.sample_seed())),
        SampleSource::Generated => generate_sample(trained, len, cfg.attribution_samples, cfg.sample_seed()),
    }
}

/// Full run on a training dataset.
pub fn run_gama(dataset: &[TokenSequence], cfg: &PipelineConfig) -> Result<GamaRun> {
    run_gama_with_progress(dataset, cfg, |_, _| {})
}

pub fn run_gama_with_progress(
    dataset: &[TokenSequence],
    cfg: &PipelineConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<GamaRun> {
    cfg.validate()?;
    check_dataset(dataset)?;
    let reference = init_model(cfg.train.hidden_size, cfg.init_seed())?;
    let train_cfg = TrainConfig {
        rng_seed: cfg.shuffle_seed(),
        ..cfg.train.clone()
    };
    let outcome = train_with_progress(&reference, dataset, &train_cfg, on_epoch)?;
    let sample = attribution_sample(&outcome.trained, dataset, cfg)?;
    let attributions = AttributionPair::compute(&reference, &outcome.trained, sample, &cfg.ig)?;
    let profile = attributions.profile(&cfg.ig, cfg.epsilon)?;
    Ok(GamaRun {
        reference,
        trained: outcome.trained,
        loss_trace: outcome.loss_trace,
        attributions,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let desk = PipelineConfig::preset(Preset::Desk);
        assert_eq!(desk.train.hidden_size, 128);
        assert_eq!(desk.ig.steps, 100);
        assert!(desk.ig.mask_causal);
        let paper = PipelineConfig::preset(Preset::Paper);
        assert_eq!(paper.train.hidden_size, 1024);
        assert_eq!(paper.ig.steps, 1000);
        assert_eq!(paper.train.learning_rate, 1e-5);
        assert!(!paper.ig.mask_causal);
        assert_eq!("paper".parse::<Preset>().unwrap(), Preset::Paper);
        assert!("huge".parse::<Preset>().is_err());
    }

    #[test]
    fn sample_is_seeded_ordered_subset() {
        let seqs: Vec<TokenSequence> = (0..20u8)
            .map(|i| TokenSequence::from_indices(vec![i, i]).unwrap())
            .collect();
        let a = select_sample(&seqs, 5, 3);
        assert_eq!(a, select_sample(&seqs, 5, 3));
        assert_eq!(a.len(), 5);
        let firsts: Vec<u8> = a.iter().map(|s| s.indices()[0]).collect();
        assert!(firsts.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(select_sample(&seqs, 50, 3).len(), 20);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PipelineConfig::preset(Preset::Paper);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
        let partial: PipelineConfig = serde_json::from_str(r#"{"attribution_samples": 7}"#).unwrap();
        assert_eq!(partial.attribution_samples, 7);
        assert_eq!(partial.train.hidden_size, 128);
    }
}

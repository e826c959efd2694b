//! Synthetic motif-implanted datasets with exact ground truth.
//!
//! A condition is a (motif positions, motif logic, signal ratio) triple. Signal
//! sequences are uniform random tokens with the motif enforced; noise sequences
//! are uniform random tokens that do not satisfy the motif.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::derive_seed;
use crate::seqmodel::{TokenSequence, AMINO_ACIDS, NUM_AMINO};

pub const PAPER_SEQUENCE_LENGTH: usize = 16;
pub const PAPER_SIGNAL_COUNT: usize = 10_000;

/// The nine motif position lists: three placements (front, middle, end) for
/// each of the motif lengths 2, 3 and 4.
pub const PAPER_POSITION_SETS: [&[usize]; 9] = [
    &[2, 4],
    &[7, 9],
    &[13, 15],
    &[2, 4, 6],
    &[7, 9, 11],
    &[12, 14, 16],
    &[2, 3, 4, 5],
    &[6, 7, 8, 9],
    &[11, 12, 13, 14],
];

/// Signal ratios 1.0, 0.9, …, 0.1 expressed in tenths.
pub const PAPER_RATIO_TENTHS: [u32; 10] = [10, 9, 8, 7, 6, 5, 4, 3, 2, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Logic {
    And,
    Or,
    Xor,
}

impl Logic {
    pub const ALL: [Logic; 3] = [Logic::And, Logic::Or, Logic::Xor];

    fn accepts(self, active: usize, total: usize) -> bool {
        match self {
            Logic::And => active == total,
            Logic::Or => active >= 1,
            Logic::Xor => active % 2 == 1,
        }
    }
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Logic::And => "AND",
            Logic::Or => "OR",
            Logic::Xor => "XOR",
        })
    }
}

impl FromStr for Logic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AND" => Ok(Logic::And),
            "OR" => Ok(Logic::Or),
            "XOR" => Ok(Logic::Xor),
            _ => Err(Error::Config(format!("unknown motif logic {s:?}"))),
        }
    }
}

/// Where the motif sits in the sequence, for grouped reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionGroup {
    Front,
    Middle,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifSpec {
    /// 1-based, strictly increasing.
    positions: Vec<usize>,
    /// Amino-acid index implanted at each position.
    signal_tokens: Vec<u8>,
    logic: Logic,
}

impl MotifSpec {
    pub fn new(positions: Vec<usize>, signal_tokens: Vec<u8>, logic: Logic) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("motif needs at least one position".into()));
        }
        if positions[0] == 0 || positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "motif positions must be 1-based and strictly increasing: {positions:?}"
            )));
        }
        if signal_tokens.len() != positions.len() {
            return Err(Error::Config(format!(
                "{} signal tokens for {} positions",
                signal_tokens.len(),
                positions.len()
            )));
        }
        if signal_tokens.iter().any(|&t| t as usize >= NUM_AMINO) {
            return Err(Error::Config("signal token out of range".into()));
        }
        Ok(Self {
            positions,
            signal_tokens,
            logic,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn signal_tokens(&self) -> &[u8] {
        &self.signal_tokens
    }

    pub fn signal_letters(&self) -> String {
        self.signal_tokens
            .iter()
            .map(|&t| AMINO_ACIDS[t as usize])
            .collect()
    }

    pub fn logic(&self) -> Logic {
        self.logic
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_position(&self) -> usize {
        *self.positions.last().expect("non-empty")
    }

    /// e.g. `2-4`
    pub fn positions_label(&self) -> String {
        self.positions
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// Logic plus positions, e.g. `AND_2-4`; independent of the signal ratio.
    pub fn key(&self) -> String {
        format!("{}_{}", self.logic, self.positions_label())
    }

    /// Front / middle / end placement on a sequence of `len` tokens.
    pub fn position_group(&self, len: usize) -> PositionGroup {
        let center = self.positions.iter().sum::<usize>() as f64 / self.len() as f64;
        let frac = (center - 1.0) / (len.max(2) - 1) as f64;
        if frac < 1.0 / 3.0 {
            PositionGroup::Front
        } else if frac < 2.0 / 3.0 {
            PositionGroup::Middle
        } else {
            PositionGroup::End
        }
    }
}

/// Draw one signal token per position from a stream seeded by the motif key.
pub fn derive_signal_tokens(positions: &[usize], logic: Logic, base_seed: u64) -> Vec<u8> {
    let key = format!(
        "{}_{}",
        logic,
        positions
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join("-")
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base_seed, &format!("tokens:{key}")));
    positions
        .iter()
        .map(|_| rng.gen_range(0..NUM_AMINO as u8))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCondition {
    pub motif: MotifSpec,
    /// Signal fraction in tenths: 10 means only signal sequences.
    pub ratio_tenths: u32,
    pub signal_count: usize,
    pub sequence_length: usize,
    pub seed: u64,
}

impl DatasetCondition {
    pub fn new(
        motif: MotifSpec,
        ratio_tenths: u32,
        signal_count: usize,
        sequence_length: usize,
        seed: u64,
    ) -> Self {
        Self {
            motif,
            ratio_tenths,
            signal_count,
            sequence_length,
            seed,
        }
    }

    /// One of the paper-grid conditions with seeds and signal tokens derived
    /// from `base_seed`.
    pub fn from_grid(positions: &[usize], logic: Logic, ratio_tenths: u32, base_seed: u64) -> Self {
        let tokens = derive_signal_tokens(positions, logic, base_seed);
        let motif = MotifSpec::new(positions.to_vec(), tokens, logic).expect("grid motif");
        let mut cond = Self::new(
            motif,
            ratio_tenths,
            PAPER_SIGNAL_COUNT,
            PAPER_SEQUENCE_LENGTH,
            0,
        );
        cond.seed = derive_seed(base_seed, &cond.name());
        cond
    }

    pub fn with_signal_count(mut self, signal_count: usize) -> Self {
        self.signal_count = signal_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio_tenths == 0 || self.ratio_tenths > 10 {
            return Err(Error::Config(format!(
                "signal ratio must be in 0.1..=1.0, got {}",
                self.noise_ratio()
            )));
        }
        if self.motif.max_position() > self.sequence_length {
            return Err(Error::Config(format!(
                "motif position {} exceeds sequence length {}",
                self.motif.max_position(),
                self.sequence_length
            )));
        }
        Ok(())
    }

    /// Fraction of signal sequences, `r`.
    pub fn noise_ratio(&self) -> f64 {
        self.ratio_tenths as f64 / 10.0
    }

    /// `round(signal_count · (1 − r) / r)`, computed exactly in integers.
    pub fn noise_count(&self) -> usize {
        let k = self.ratio_tenths as usize;
        let num = 2 * self.signal_count * (10 - k) + k;
        num / (2 * k)
    }

    pub fn total_count(&self) -> usize {
        self.signal_count + self.noise_count()
    }

    /// Canonical name, e.g. `AND_2-4_r1.0`.
    pub fn name(&self) -> String {
        format!("{}_r{:.1}", self.motif.key(), self.noise_ratio())
    }
}

/// All 3 × 9 × 10 = 270 grid conditions, ordered by ratio (descending), logic,
/// then position list.
pub fn enumerate_conditions(base_seed: u64) -> Vec<DatasetCondition> {
    let mut out = Vec::with_capacity(270);
    for &tenths in &PAPER_RATIO_TENTHS {
        for logic in Logic::ALL {
            for positions in PAPER_POSITION_SETS {
                out.push(DatasetCondition::from_grid(positions, logic, tenths, base_seed));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "S")]
    Signal,
    #[serde(rename = "N")]
    Noise,
}

impl Label {
    pub fn code(self) -> &'static str {
        match self {
            Label::Signal => "S",
            Label::Noise => "N",
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Label::Signal),
            "N" => Ok(Label::Noise),
            _ => Err(Error::Config(format!("unknown label {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub sequences: Vec<TokenSequence>,
    pub labels: Vec<Label>,
    pub condition: DatasetCondition,
}

impl SyntheticDataset {
    pub fn signal_sequences(&self) -> impl Iterator<Item = &TokenSequence> {
        self.sequences
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == Label::Signal)
            .map(|(s, _)| s)
    }
}

/// Whether the motif logic holds on `seq`.
pub fn motif_satisfied(seq: &TokenSequence, motif: &MotifSpec) -> Result<bool> {
    if seq.len() < motif.max_position() {
        return Err(Error::Config(format!(
            "sequence of length {} is shorter than motif position {}",
            seq.len(),
            motif.max_position()
        )));
    }
    let active = motif
        .positions
        .iter()
        .zip(&motif.signal_tokens)
        .filter(|(&p, &tok)| seq.at(p) == Some(tok))
        .count();
    Ok(motif.logic.accepts(active, motif.len()))
}

fn uniform_sequence(rng: &mut ChaCha8Rng, len: usize) -> TokenSequence {
    let tokens = (0..len).map(|_| rng.gen_range(0..NUM_AMINO as u8)).collect();
    TokenSequence::from_indices(tokens).expect("len ≥ 1")
}

/// Activation masks admissible under the logic; bit `i` set means motif
/// position `i` carries its signal token.
fn valid_masks(logic: Logic, m: usize) -> Vec<u32> {
    (1u32..(1 << m))
        .filter(|mask| logic.accepts(mask.count_ones() as usize, m))
        .collect()
}

/// Draw a token different from `signal`, uniformly over the other 19.
fn non_signal_token(rng: &mut ChaCha8Rng, signal: u8) -> u8 {
    let t = rng.gen_range(0..(NUM_AMINO as u8 - 1));
    if t >= signal {
        t + 1
    } else {
        t
    }
}

/// Generate a dataset: signal sequences first, then noise sequences, from one
/// seeded stream.
pub fn generate_dataset(cond: &DatasetCondition) -> SyntheticDataset {
    cond.validate().expect("invalid dataset condition");
    let mut rng = ChaCha8Rng::seed_from_u64(cond.seed);
    let motif = &cond.motif;
    let masks = valid_masks(motif.logic, motif.len());
    let total = cond.total_count();
    let mut sequences = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);

    for _ in 0..cond.signal_count {
        let mut seq = uniform_sequence(&mut rng, cond.sequence_length);
        let mask = masks[rng.gen_range(0..masks.len())];
        for (i, (&p, &tok)) in motif.positions.iter().zip(&motif.signal_tokens).enumerate() {
            if mask & (1 << i) != 0 {
                seq.set(p, tok);
            } else {
                seq.set(p, non_signal_token(&mut rng, tok));
            }
        }
        sequences.push(seq);
        labels.push(Label::Signal);
    }
    for _ in 0..cond.noise_count() {
        let seq = loop {
            let s = uniform_sequence(&mut rng, cond.sequence_length);
            if !motif_satisfied(&s, motif).expect("length checked") {
                break s;
            }
        };
        sequences.push(seq);
        labels.push(Label::Noise);
    }
    SyntheticDataset {
        sequences,
        labels,
        condition: cond.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub signal_count: usize,
    pub noise_count: usize,
    pub expected_signal: usize,
    pub expected_noise: usize,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn counts_match(&self) -> bool {
        self.signal_count == self.expected_signal && self.noise_count == self.expected_noise
    }

    pub fn is_clean(&self) -> bool {
        self.counts_match() && self.violations.is_empty()
    }
}

/// Recount labels and re-check the motif on every sequence.
pub fn verify_dataset(ds: &SyntheticDataset) -> VerificationReport {
    let mut violations = Vec::new();
    let mut signal_count = 0;
    let mut noise_count = 0;
    if ds.sequences.len() != ds.labels.len() {
        violations.push(Violation {
            index: ds.sequences.len().min(ds.labels.len()),
            reason: format!(
                "{} sequences but {} labels",
                ds.sequences.len(),
                ds.labels.len()
            ),
        });
    }
    for (index, (seq, label)) in ds.sequences.iter().zip(&ds.labels).enumerate() {
        match label {
            Label::Signal => signal_count += 1,
            Label::Noise => noise_count += 1,
        }
        if seq.len() != ds.condition.sequence_length {
            violations.push(Violation {
                index,
                reason: format!("length {} ≠ {}", seq.len(), ds.condition.sequence_length),
            });
            continue;
        }
        let sat = match motif_satisfied(seq, &ds.condition.motif) {
            Ok(s) => s,
            Err(e) => {
                violations.push(Violation {
                    index,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match (label, sat) {
            (Label::Signal, false) => violations.push(Violation {
                index,
                reason: "signal sequence does not satisfy the motif".into(),
            }),
            (Label::Noise, true) => violations.push(Violation {
                index,
                reason: "noise sequence satisfies the motif".into(),
            }),
            _ => {}
        }
    }
    VerificationReport {
        signal_count,
        noise_count,
        expected_signal: ds.condition.signal_count,
        expected_noise: ds.condition.noise_count(),
        violations,
    }
}

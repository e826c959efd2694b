//! Amino-acid vocabulary, token sequences and one-hot framing.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The twenty standard amino acids in alphabetical one-letter order.
pub const AMINO_ACIDS: [char; 20] = [
    'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L', 'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V', 'W',
    'Y',
];

pub const NUM_AMINO: usize = 20;
/// 20 amino acids + START + STOP.
pub const INPUT_DIM: usize = 22;
/// 20 amino acids + STOP.
pub const OUTPUT_DIM: usize = 21;

pub const START_INPUT: usize = 20;
pub const STOP_INPUT: usize = 21;
pub const STOP_OUTPUT: usize = 20;

pub const START_SYMBOL: &str = "<START>";
pub const STOP_SYMBOL: &str = "<STOP>";

/// Index of an amino-acid letter, if it is one of the twenty.
pub fn amino_index(symbol: char) -> Option<usize> {
    AMINO_ACIDS.iter().position(|&a| a == symbol)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    input_tokens: Vec<String>,
    output_tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let aminos = AMINO_ACIDS.iter().map(|c| c.to_string());
        let input_tokens = aminos
            .clone()
            .chain([START_SYMBOL.to_string(), STOP_SYMBOL.to_string()])
            .collect();
        let output_tokens = aminos.chain([STOP_SYMBOL.to_string()]).collect();
        Self {
            input_tokens,
            output_tokens,
        }
    }

    pub fn input_tokens(&self) -> &[String] {
        &self.input_tokens
    }

    pub fn output_tokens(&self) -> &[String] {
        &self.output_tokens
    }

    pub fn input_index(&self, symbol: &str) -> Option<usize> {
        self.input_tokens.iter().position(|t| t == symbol)
    }

    pub fn output_index(&self, symbol: &str) -> Option<usize> {
        self.output_tokens.iter().position(|t| t == symbol)
    }

    /// One-hot encode a sequence with a leading START column.
    pub fn encode(&self, seq: &TokenSequence) -> OneHotMatrix {
        encode(seq)
    }

    /// Parse and encode in one step; rejects unknown symbols with their position.
    pub fn encode_str(&self, s: &str) -> Result<OneHotMatrix> {
        Ok(encode(&s.parse()?))
    }
}

/// A fixed-length run of amino-acid tokens, without START/STOP framing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TokenSequence(Vec<u8>);

impl TokenSequence {
    pub fn from_indices(indices: Vec<u8>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= NUM_AMINO) {
            return Err(Error::IndexOutOfRange {
                what: "amino acid index",
                index: bad as usize,
                limit: NUM_AMINO,
            });
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Token at a 1-based position.
    pub fn at(&self, position: usize) -> Option<u8> {
        position.checked_sub(1).and_then(|p| self.0.get(p).copied())
    }

    pub(crate) fn set(&mut self, position: usize, token: u8) {
        self.0[position - 1] = token;
    }

    /// Next-token targets over the output vocabulary: tokens 2..L then STOP.
    pub fn targets(&self) -> Vec<usize> {
        self.0
            .iter()
            .map(|&t| t as usize)
            .chain(std::iter::once(STOP_OUTPUT))
            .collect()
    }
}

impl FromStr for TokenSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::EmptySequence);
        }
        s.chars()
            .enumerate()
            .map(|(position, symbol)| {
                amino_index(symbol)
                    .map(|i| i as u8)
                    .ok_or(Error::InvalidToken { symbol, position })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl TryFrom<String> for TokenSequence {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TokenSequence> for String {
    fn from(seq: TokenSequence) -> Self {
        seq.to_string()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &i in &self.0 {
            write!(f, "{}", AMINO_ACIDS[i as usize])?;
        }
        Ok(())
    }
}

/// Model input encoding, `22 × (L+1)`: column 0 is START, column `p` is token `p`.
///
/// Interpolated encodings used by attribution are allowed to hold any real
/// values; [`OneHotMatrix::selected_rows`] checks the strict one-hot form.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotMatrix(Array2<f64>);

impl OneHotMatrix {
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != INPUT_DIM || values.ncols() == 0 {
            return Err(Error::Shape(format!(
                "input encoding must be {INPUT_DIM} × (L+1), got {:?}",
                values.dim()
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    /// Number of model-input positions (L+1).
    pub fn positions(&self) -> usize {
        self.0.ncols()
    }

    /// Row index of the single 1 in each column.
    pub fn selected_rows(&self) -> Result<Vec<usize>> {
        self.0
            .columns()
            .into_iter()
            .enumerate()
            .map(|(column, col)| {
                let mut hot = None;
                for (row, &v) in col.iter().enumerate() {
                    if v == 1.0 && hot.is_none() {
                        hot = Some(row);
                    } else if v != 0.0 {
                        return Err(Error::NotOneHot { column });
                    }
                }
                hot.ok_or(Error::NotOneHot { column })
            })
            .collect()
    }
}

pub fn encode(seq: &TokenSequence) -> OneHotMatrix {
    let mut m = Array2::zeros((INPUT_DIM, seq.len() + 1));
    m[[START_INPUT, 0]] = 1.0;
    for (p, &t) in seq.indices().iter().enumerate() {
        m[[t as usize, p + 1]] = 1.0;
    }
    OneHotMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_sizes_and_bijection() {
        let v = Vocabulary::new();
        assert_eq!(v.input_tokens().len(), INPUT_DIM);
        assert_eq!(v.output_tokens().len(), OUTPUT_DIM);
        for (i, t) in v.input_tokens().iter().enumerate() {
            assert_eq!(v.input_index(t), Some(i));
        }
        for (i, t) in v.output_tokens().iter().enumerate() {
            assert_eq!(v.output_index(t), Some(i));
        }
        assert_eq!(v.input_index(START_SYMBOL), Some(START_INPUT));
        assert_eq!(v.input_index(STOP_SYMBOL), Some(STOP_INPUT));
        assert_eq!(v.output_index(STOP_SYMBOL), Some(STOP_OUTPUT));
    }

    #[test]
    fn encode_frames_with_start() {
        let m = Vocabulary::new().encode_str("AC").unwrap();
        assert_eq!(m.values().dim(), (22, 3));
        let col0: Vec<f64> = m.values().column(0).to_vec();
        assert_eq!(col0.iter().sum::<f64>(), 1.0);
        assert_eq!(col0[START_INPUT], 1.0);
        assert_eq!(m.values()[[0, 1]], 1.0);
        assert_eq!(m.values()[[1, 2]], 1.0);
        for col in m.values().columns() {
            assert_eq!(col.sum(), 1.0);
        }
        assert_eq!(m.selected_rows().unwrap(), vec![START_INPUT, 0, 1]);
    }

    #[test]
    fn encode_rejects_unknown_symbol() {
        match Vocabulary::new().encode_str("ACBD") {
            Err(Error::InvalidToken { symbol, position }) => {
                assert_eq!(symbol, 'B');
                assert_eq!(position, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            "".parse::<TokenSequence>(),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn selected_rows_rejects_interpolated_columns() {
        let m = Vocabulary::new().encode_str("AC").unwrap();
        let half = OneHotMatrix::from_array(m.values() * 0.5).unwrap();
        assert!(matches!(
            half.selected_rows(),
            Err(Error::NotOneHot { column: 0 })
        ));
    }

    #[test]
    fn targets_shift_and_stop() {
        let s: TokenSequence = "ACD".parse().unwrap();
        assert_eq!(s.targets(), vec![0, 1, 2, STOP_OUTPUT]);
        assert_eq!(s.at(1), Some(0));
        assert_eq!(s.at(0), None);
        assert_eq!(s.to_string(), "ACD");
    }
}

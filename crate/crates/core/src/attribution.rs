//! Integrated Gradients over every (input position, input dim, output position,
//! output dim) combination of an autoregressive LSTM, and the reductions used by
//! the GAMA statistic.
//!
//! The baseline is the all-zeros encoding, so the path is `α · x` and the
//! attribution is `x ⊙ mean_α ∇F(α · x)` with `α = i / (steps − 1)`,
//! `i = 0..steps`.

use ndarray::{Array2, Array3, Array4, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqmodel::{
    check_dataset, encode, output_gradient, LstmParameters, OneHotMatrix, OutputTarget,
    TokenSequence, INPUT_DIM, OUTPUT_DIM,
};

pub const PAPER_IG_STEPS: usize = 1000;
pub const DESK_IG_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IgConfig {
    pub steps: usize,
    pub output_target: OutputTarget,
    /// Drop structurally zero entries (input position after output position)
    /// when pooling distributions.
    pub mask_causal: bool,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: PAPER_IG_STEPS,
            output_target: OutputTarget::default(),
            mask_causal: false,
        }
    }
}

impl IgConfig {
    pub fn desk() -> Self {
        Self {
            steps: DESK_IG_STEPS,
            ..Self::default()
        }
    }

    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn with_target(self, output_target: OutputTarget) -> Self {
        Self {
            output_target,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!(
                "integrated gradients needs ≥ 2 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    /// Interpolation coefficients: midpoints of `steps` equal cells of [0, 1].
    pub fn alphas(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }
}

/// Per-sequence attribution tensor indexed `[input dim, input position,
/// output dim, output position]`, shape `[22, L+1, 21, L+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IgTensor4D(pub Array4<f64>);

impl IgTensor4D {
    pub fn positions(&self) -> usize {
        self.0.dim().1
    }
}

/// Attribution reduced to `[input position × output position]`, `(L+1) × (L+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ig2D(pub Array2<f64>);

impl Ig2D {
    pub fn positions(&self) -> usize {
        self.0.nrows()
    }
}

fn check_output_indices(input: &OneHotMatrix, output_pos: usize, output_dim: usize) -> Result<()> {
    if output_pos >= input.positions() {
        return Err(Error::IndexOutOfRange {
            what: "output position",
            index: output_pos,
            limit: input.positions(),
        });
    }
    if output_dim >= OUTPUT_DIM {
        return Err(Error::IndexOutOfRange {
            what: "output dimension",
            index: output_dim,
            limit: OUTPUT_DIM,
        });
    }
    Ok(())
}

/// Integrated gradients of any differentiable scalar function along the
/// straight path from the zero baseline to `x`, given its gradient.
pub fn path_integrated_gradients<F>(x: &Array2<f64>, cfg: &IgConfig, mut gradient: F) -> Result<Array2<f64>>
where
    F: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
{
    cfg.validate()?;
    let mut acc = Array2::<f64>::zeros(x.raw_dim());
    for alpha in cfg.alphas() {
        let grad = gradient(&(x * alpha))?;
        if grad.dim() != x.dim() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} differs from input {:?}",
                grad.dim(),
                x.dim()
            )));
        }
        acc += &grad;
    }
    Ok(acc / cfg.steps as f64 * x)
}

/// Attribution of the single output `y[output_dim, output_pos]` to every entry
/// of the `22 × (L+1)` input encoding.
///
/// One forward and one backward sweep per interpolation step.
pub fn integrated_gradients(
    params: &LstmParameters,
    input: &OneHotMatrix,
    output_pos: usize,
    output_dim: usize,
    cfg: &IgConfig,
) -> Result<Array2<f64>> {
    check_output_indices(input, output_pos, output_dim)?;
    path_integrated_gradients(input.values(), cfg, |xa| {
        let xa = OneHotMatrix::from_array(xa.clone())?;
        output_gradient(params, &xa, output_pos, output_dim, cfg.output_target).map(|(_, g)| g)
    })
}

/// Step inputs with every interpolation point as one batch column.
fn interpolated_batch(x: &Array2<f64>, alphas: &[f64]) -> Vec<Array2<f64>> {
    x.columns()
        .into_iter()
        .map(|col| {
            let mut m = Array2::zeros((INPUT_DIM, alphas.len()));
            for (s, &a) in alphas.iter().enumerate() {
                m.column_mut(s).assign(&(&col * a));
            }
            m
        })
        .collect()
}

/// Mean over interpolation columns of the input gradient for `Σ_d w_d y[d, p]`,
/// for every input position `t ≤ p`; `22 × (p+1)`.
fn path_mean_gradient(
    params: &LstmParameters,
    trace: &crate::seqmodel::Trace,
    probs: &Array2<f64>,
    output_pos: usize,
    weights: &[f64],
    target: OutputTarget,
) -> Vec<ndarray::Array1<f64>> {
    let mut dlogits = vec![None; trace.steps()];
    dlogits[output_pos] = Some(target.logit_seed(probs, weights));
    let (_, dxs) = params.backward(trace, &dlogits, false);
    let n = trace.batch() as f64;
    dxs.into_iter()
        .take(output_pos + 1)
        .map(|d| d.sum_axis(Axis(1)) / n)
        .collect()
}

/// Full 4D attribution tensor for one sequence. One batched forward sweep over
/// all interpolation points is shared by every output.
pub fn ig_tensor(params: &LstmParameters, seq: &TokenSequence, cfg: &IgConfig) -> Result<IgTensor4D> {
    cfg.validate()?;
    let input = encode(seq);
    let x = input.values();
    let positions = input.positions();
    let trace = params.run(interpolated_batch(x, &cfg.alphas()));
    let mut out = Array4::zeros((INPUT_DIM, positions, OUTPUT_DIM, positions));
    for p in 0..positions {
        let probs = trace.probs(p);
        for d in 0..OUTPUT_DIM {
            let mut weights = [0.0; OUTPUT_DIM];
            weights[d] = 1.0;
            let grads = path_mean_gradient(params, &trace, &probs, p, &weights, cfg.output_target);
            for (t, g) in grads.iter().enumerate() {
                for k in 0..INPUT_DIM {
                    out[[k, t, d, p]] = g[k] * x[[k, t]];
                }
            }
        }
    }
    Ok(IgTensor4D(out))
}

/// Keep the row of each input position's own token and average over output dims.
pub fn reduce_to_2d(t4: &IgTensor4D, input: &OneHotMatrix) -> Result<Ig2D> {
    let (d1, d2, d3, d4) = t4.0.dim();
    if d1 != INPUT_DIM || d3 != OUTPUT_DIM || d2 != d4 || d2 != input.positions() {
        return Err(Error::Shape(format!(
            "tensor {:?} incompatible with input of {} positions",
            t4.0.dim(),
            input.positions()
        )));
    }
    let selected = input.selected_rows()?;
    let mut out = Array2::zeros((d2, d4));
    for (t, &row) in selected.iter().enumerate() {
        for p in 0..d4 {
            let mut s = 0.0;
            for d in 0..d3 {
                s += t4.0[[row, t, d, p]];
            }
            out[[t, p]] = s / d3 as f64;
        }
    }
    Ok(Ig2D(out))
}

/// `reduce_to_2d(ig_tensor(..))` computed directly: by linearity of the path
/// integral, the mean over output dims is the attribution of the mean output,
/// which needs one backward sweep per output position instead of 21.
pub fn ig_2d(params: &LstmParameters, seq: &TokenSequence, cfg: &IgConfig) -> Result<Ig2D> {
    cfg.validate()?;
    let input = encode(seq);
    let x = input.values();
    let selected = input.selected_rows()?;
    let positions = input.positions();
    let trace = params.run(interpolated_batch(x, &cfg.alphas()));
    let weights = [1.0 / OUTPUT_DIM as f64; OUTPUT_DIM];
    let mut out = Array2::zeros((positions, positions));
    for p in 0..positions {
        let probs = trace.probs(p);
        let grads = path_mean_gradient(params, &trace, &probs, p, &weights, cfg.output_target);
        for (t, g) in grads.iter().enumerate() {
            out[[t, p]] = g[selected[t]] * x[[selected[t], t]];
        }
    }
    Ok(Ig2D(out))
}

/// Per-position pooled attribution values `D_t`, `t = 1..=L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgDistribution {
    positions: Vec<Vec<f64>>,
}

impl IgDistribution {
    pub fn new(positions: Vec<Vec<f64>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::DistributionMismatch("no positions".into()));
        }
        Ok(Self { positions })
    }

    /// Pool per-sequence matrices in (sequence, output position) order. The
    /// START input row is excluded.
    pub fn pool(matrices: &[Ig2D], mask_causal: bool) -> Result<Self> {
        let first = matrices.first().ok_or(Error::EmptyDataset)?;
        let n = first.positions();
        if n < 2 {
            return Err(Error::Shape("need at least one token position".into()));
        }
        let mut positions = vec![Vec::with_capacity(matrices.len() * n); n - 1];
        for m in matrices {
            if m.0.dim() != (n, n) {
                return Err(Error::Shape(format!(
                    "Ig2D of shape {:?}, expected ({n}, {n})",
                    m.0.dim()
                )));
            }
            for t in 1..n {
                for p in 0..n {
                    if mask_causal && t > p {
                        continue;
                    }
                    positions[t - 1].push(m.0[[t, p]]);
                }
            }
        }
        Ok(Self { positions })
    }

    /// Number of positions, N.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `D_t` for 1-based position `t`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.positions[t - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.iter().map(|v| v.as_slice())
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|v| v.iter().map(|&x| f(x)).collect())
                .collect(),
        }
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            positions: order.iter().map(|&i| self.positions[i].clone()).collect(),
        }
    }
}

/// Reduced attribution matrices for every sequence, in input order.
pub fn attribute_sequences(
    params: &LstmParameters,
    sequences: &[TokenSequence],
    cfg: &IgConfig,
) -> Result<Vec<Ig2D>> {
    check_dataset(sequences)?;
    cfg.validate()?;
    sequences
        .par_iter()
        .map(|s| ig_2d(params, s, cfg))
        .collect()
}

pub fn collect_distributions(
    params: &LstmParameters,
    sequences: &[TokenSequence],
    cfg: &IgConfig,
) -> Result<IgDistribution> {
    let mats = attribute_sequences(params, sequences, cfg)?;
    IgDistribution::pool(&mats, cfg.mask_causal)
}

/// Dispersion across output dims for every `(input dim, input position,
/// output position)` cell: standard deviation over mean absolute value, 0 where
/// every value is equal.
#[derive(Debug, Clone, PartialEq)]
pub struct DimSimilarity {
    pub dispersion: Array3<f64>,
}

impl DimSimilarity {
    /// Median over cells that carry any signal (non-zero mean absolute value).
    pub fn median_nonzero(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.dispersion.iter().cloned().filter(|&d| d > 0.0).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(crate::gama::median_sorted(&v))
    }

    pub fn max(&self) -> f64 {
        self.dispersion.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn output_dim_similarity(t4: &IgTensor4D) -> DimSimilarity {
    let (d1, d2, d3, d4) = t4.0.dim();
    let mut dispersion = Array3::zeros((d1, d2, d4));
    for k in 0..d1 {
        for t in 0..d2 {
            for p in 0..d4 {
                let vals: Vec<f64> = (0..d3).map(|d| t4.0[[k, t, d, p]]).collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let mean_abs = vals.iter().map(|v| v.abs()).sum::<f64>() / n;
                dispersion[[k, t, p]] = if var == 0.0 || mean_abs == 0.0 {
                    0.0
                } else {
                    var.sqrt() / mean_abs
                };
            }
        }
    }
    DimSimilarity { dispersion }
}

//! Single-layer LSTM with a linear output head and hand-written backpropagation
//! through time.
//!
//! Per step, with gates stacked in `[input, forget, candidate, output]` order:
//!
//! ```text
//! pre_t = W_ih x_t + b_ih + W_hh h_{t-1} + b_hh
//! i, f, o = sigmoid(pre_i, pre_f, pre_o);  g = tanh(pre_g)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! z_t = W_out h_t + b_out
//! ```
//!
//! Batches are laid out column-wise: `x_t` is `22 × B`, `h_t` is `H × B`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{OneHotMatrix, TokenSequence, INPUT_DIM, OUTPUT_DIM, START_INPUT};
use crate::error::{Error, Result};

/// Checkpoint block names, in storage order.
pub const BLOCK_NAMES: [&str; 6] = [
    "lstm.weight_ih",
    "lstm.weight_hh",
    "lstm.bias_ih",
    "lstm.bias_hh",
    "head.weight",
    "head.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParameters {
    hidden: usize,
    /// `4H × 22`
    pub w_ih: Array2<f64>,
    /// `4H × H`
    pub w_hh: Array2<f64>,
    /// `4H × 1`
    pub b_ih: Array2<f64>,
    /// `4H × 1`
    pub b_hh: Array2<f64>,
    /// `21 × H`
    pub w_out: Array2<f64>,
    /// `21 × 1`
    pub b_out: Array2<f64>,
}

impl LstmParameters {
    pub fn zeros(hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::ZeroHiddenSize);
        }
        let g = 4 * hidden;
        Ok(Self {
            hidden,
            w_ih: Array2::zeros((g, INPUT_DIM)),
            w_hh: Array2::zeros((g, hidden)),
            b_ih: Array2::zeros((g, 1)),
            b_hh: Array2::zeros((g, 1)),
            w_out: Array2::zeros((OUTPUT_DIM, hidden)),
            b_out: Array2::zeros((OUTPUT_DIM, 1)),
        })
    }

    /// Rebuild from named blocks (checkpoint order), validating every shape.
    pub fn from_blocks(hidden: usize, blocks: Vec<Array2<f64>>) -> Result<Self> {
        let mut p = Self::zeros(hidden)?;
        if blocks.len() != BLOCK_NAMES.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter blocks, got {}",
                BLOCK_NAMES.len(),
                blocks.len()
            )));
        }
        for ((slot, block), name) in p.blocks_mut().into_iter().zip(blocks).zip(BLOCK_NAMES) {
            if slot.dim() != block.dim() {
                return Err(Error::Shape(format!(
                    "{name}: expected {:?}, got {:?}",
                    slot.dim(),
                    block.dim()
                )));
            }
            *slot = block;
        }
        Ok(p)
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn blocks(&self) -> [&Array2<f64>; 6] {
        [
            &self.w_ih,
            &self.w_hh,
            &self.b_ih,
            &self.b_hh,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Array2<f64>; 6] {
        [
            &mut self.w_ih,
            &mut self.w_hh,
            &mut self.b_ih,
            &mut self.b_hh,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

/// Draw every parameter i.i.d. from `U(-√k, √k)` with `k = 1/H`, block by block
/// in checkpoint order.
pub fn init_model(hidden_size: usize, rng_seed: u64) -> Result<LstmParameters> {
    let mut p = LstmParameters::zeros(hidden_size)?;
    let bound = (1.0 / hidden_size as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for block in p.blocks_mut() {
        block.mapv_inplace(|_| rng.gen_range(-bound..=bound));
    }
    Ok(p)
}

/// Which model output the attribution scalar is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTarget {
    /// Softmax probabilities.
    PostSoftmax,
    /// Raw logits of the output head.
    #[default]
    PreSoftmax,
    /// Log-probabilities.
    LogSoftmax,
}

impl OutputTarget {
    /// Value of `Σ_d w_d y_d` for one column of logits.
    pub fn value(&self, logits: &[f64], weights: &[f64]) -> f64 {
        let probs = softmax(logits);
        let lse = log_sum_exp(logits);
        weights
            .iter()
            .enumerate()
            .map(|(d, w)| {
                w * match self {
                    OutputTarget::PostSoftmax => probs[d],
                    OutputTarget::PreSoftmax => logits[d],
                    OutputTarget::LogSoftmax => logits[d] - lse,
                }
            })
            .sum()
    }

    /// Gradient of `Σ_d w_d y_d` with respect to the logits, per batch column.
    pub(crate) fn logit_seed(&self, probs: &Array2<f64>, weights: &[f64]) -> Array2<f64> {
        let w = Array1::from(weights.to_vec());
        let mut seed = Array2::zeros(probs.raw_dim());
        for (mut col, p) in seed.columns_mut().into_iter().zip(probs.columns()) {
            match self {
                OutputTarget::PreSoftmax => col.assign(&w),
                OutputTarget::PostSoftmax => {
                    let wp = w.dot(&p);
                    Zip::from(&mut col)
                        .and(&w)
                        .and(&p)
                        .for_each(|c, &wk, &pk| *c = pk * (wk - wp));
                }
                OutputTarget::LogSoftmax => {
                    let ws = w.sum();
                    Zip::from(&mut col)
                        .and(&w)
                        .and(&p)
                        .for_each(|c, &wk, &pk| *c = wk - pk * ws);
                }
            }
        }
        seed
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Column-wise softmax of a `21 × B` logit matrix.
pub(crate) fn softmax_columns(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut col in out.columns_mut() {
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|z| (z - max).exp());
        let sum = col.sum();
        col.mapv_inplace(|e| e / sum);
    }
    out
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations recorded during a forward sweep, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    xs: Vec<Array2<f64>>,
    /// Activated gates `[i; f; g; o]`, `4H × B`.
    gates: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    tanh_cs: Vec<Array2<f64>>,
    hs: Vec<Array2<f64>>,
    logits: Vec<Array2<f64>>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.xs.len()
    }

    pub fn batch(&self) -> usize {
        self.xs.first().map_or(0, |x| x.ncols())
    }

    /// `21 × B` logits at step `t`.
    pub fn logits(&self, t: usize) -> &Array2<f64> {
        &self.logits[t]
    }

    pub fn probs(&self, t: usize) -> Array2<f64> {
        softmax_columns(&self.logits[t])
    }
}

impl LstmParameters {
    /// Forward sweep over per-step inputs `xs[t]` (each `22 × B`).
    pub fn run(&self, xs: Vec<Array2<f64>>) -> Trace {
        let h = self.hidden;
        let batch = xs.first().map_or(0, |x| x.ncols());
        let bias = &self.b_ih + &self.b_hh;
        let mut trace = Trace {
            gates: Vec::with_capacity(xs.len()),
            cs: Vec::with_capacity(xs.len()),
            tanh_cs: Vec::with_capacity(xs.len()),
            hs: Vec::with_capacity(xs.len()),
            logits: Vec::with_capacity(xs.len()),
            xs: Vec::new(),
        };
        let mut h_prev = Array2::<f64>::zeros((h, batch));
        let mut c_prev = Array2::<f64>::zeros((h, batch));
        for x in &xs {
            let mut pre = self.w_ih.dot(x);
            ndarray::linalg::general_mat_mul(1.0, &self.w_hh, &h_prev, 1.0, &mut pre);
            pre += &bias;
            pre.slice_mut(s![0..2 * h, ..]).mapv_inplace(sigmoid);
            pre.slice_mut(s![2 * h..3 * h, ..]).mapv_inplace(f64::tanh);
            pre.slice_mut(s![3 * h.., ..]).mapv_inplace(sigmoid);
            let gates = pre;
            let i = gates.slice(s![0..h, ..]);
            let f = gates.slice(s![h..2 * h, ..]);
            let g = gates.slice(s![2 * h..3 * h, ..]);
            let o = gates.slice(s![3 * h.., ..]);
            let mut c = Array2::zeros((h, batch));
            Zip::from(&mut c)
                .and(&f)
                .and(&c_prev)
                .and(&i)
                .and(&g)
                .for_each(|c, &f, &cp, &i, &g| *c = f * cp + i * g);
            let tanh_c = c.mapv(f64::tanh);
            let hid = &o * &tanh_c;
            let mut z = self.w_out.dot(&hid);
            z += &self.b_out;
            trace.gates.push(gates);
            trace.logits.push(z);
            trace.tanh_cs.push(tanh_c);
            trace.hs.push(hid.clone());
            trace.cs.push(c.clone());
            h_prev = hid;
            c_prev = c;
        }
        trace.xs = xs;
        trace
    }

    /// Backpropagate logit gradients `dlogits[t]` (each `21 × B`, `None` for
    /// zero) through the sweep. Returns parameter gradients when requested, and
    /// the gradient with respect to every input column.
    pub fn backward(
        &self,
        trace: &Trace,
        dlogits: &[Option<Array2<f64>>],
        with_params: bool,
    ) -> (Option<LstmParameters>, Vec<Array2<f64>>) {
        let h = self.hidden;
        let steps = trace.steps();
        let batch = trace.batch();
        let mut dxs = vec![Array2::zeros((INPUT_DIM, batch)); steps];
        let mut grads = with_params.then(|| LstmParameters::zeros(h).expect("hidden ≥ 1"));
        let last = match dlogits.iter().rposition(Option::is_some) {
            Some(t) => t,
            None => return (grads, dxs),
        };
        let mut dh_next = Array2::<f64>::zeros((h, batch));
        let mut dc_next = Array2::<f64>::zeros((h, batch));
        let zero_state = Array2::<f64>::zeros((h, batch));
        let mut dpre = Array2::<f64>::zeros((4 * h, batch));
        for t in (0..=last).rev() {
            let mut dh = dh_next;
            if let Some(dz) = &dlogits[t] {
                ndarray::linalg::general_mat_mul(1.0, &self.w_out.t(), dz, 1.0, &mut dh);
                if let Some(g) = grads.as_mut() {
                    ndarray::linalg::general_mat_mul(1.0, dz, &trace.hs[t].t(), 1.0, &mut g.w_out);
                    g.b_out += &dz.sum_axis(Axis(1)).insert_axis(Axis(1));
                }
            }
            let gates = &trace.gates[t];
            let (c_prev, h_prev) = if t > 0 {
                (&trace.cs[t - 1], &trace.hs[t - 1])
            } else {
                (&zero_state, &zero_state)
            };
            let tc = &trace.tanh_cs[t];
            let i = gates.slice(s![0..h, ..]);
            let f = gates.slice(s![h..2 * h, ..]);
            let g = gates.slice(s![2 * h..3 * h, ..]);
            let o = gates.slice(s![3 * h.., ..]);
            let mut dc = dc_next;
            Zip::from(&mut dc)
                .and(&dh)
                .and(&o)
                .and(tc)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
            {
                let (mut d_if, mut d_go) = dpre.view_mut().split_at(Axis(0), 2 * h);
                let (mut di, mut df) = d_if.view_mut().split_at(Axis(0), h);
                let (mut dg, mut d_o) = d_go.view_mut().split_at(Axis(0), h);
                Zip::from(&mut di)
                    .and(&dc)
                    .and(&g)
                    .and(&i)
                    .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
                Zip::from(&mut df)
                    .and(&dc)
                    .and(c_prev)
                    .and(&f)
                    .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
                Zip::from(&mut dg)
                    .and(&dc)
                    .and(&i)
                    .and(&g)
                    .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                Zip::from(&mut d_o)
                    .and(&dh)
                    .and(tc)
                    .and(&o)
                    .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
            }
            Zip::from(&mut dc).and(&f).for_each(|dc, &f| *dc *= f);
            dc_next = dc;
            ndarray::linalg::general_mat_mul(1.0, &self.w_ih.t(), &dpre, 0.0, &mut dxs[t]);
            if let Some(gr) = grads.as_mut() {
                ndarray::linalg::general_mat_mul(1.0, &dpre, &trace.xs[t].t(), 1.0, &mut gr.w_ih);
                ndarray::linalg::general_mat_mul(1.0, &dpre, &h_prev.t(), 1.0, &mut gr.w_hh);
                let db = dpre.sum_axis(Axis(1)).insert_axis(Axis(1));
                gr.b_ih += &db;
                gr.b_hh += &db;
            }
            dh_next = if t > 0 {
                self.w_hh.t().dot(&dpre)
            } else {
                Array2::zeros((h, batch))
            };
        }
        (grads, dxs)
    }
}

fn check_input(input: &OneHotMatrix) -> Result<()> {
    if input.values().nrows() != INPUT_DIM {
        return Err(Error::Shape(format!(
            "input has {} rows, expected {INPUT_DIM}",
            input.values().nrows()
        )));
    }
    Ok(())
}

/// Split a `22 × T` encoding into `T` single-column step inputs.
pub(crate) fn step_inputs(values: ArrayView2<f64>) -> Vec<Array2<f64>> {
    values
        .columns()
        .into_iter()
        .map(|c| c.to_owned().insert_axis(Axis(1)))
        .collect()
}

/// Probability matrix `21 × (L+1)`; column `p` predicts the token after input `p`.
pub fn forward(params: &LstmParameters, input: &OneHotMatrix) -> Result<Array2<f64>> {
    check_input(input)?;
    let trace = params.run(step_inputs(input.values().view()));
    let mut out = Array2::zeros((OUTPUT_DIM, input.positions()));
    for t in 0..trace.steps() {
        out.column_mut(t).assign(&trace.probs(t).column(0));
    }
    Ok(out)
}

/// Logit matrix `21 × (L+1)`.
pub fn forward_logits(params: &LstmParameters, input: &OneHotMatrix) -> Result<Array2<f64>> {
    check_input(input)?;
    let trace = params.run(step_inputs(input.values().view()));
    let mut out = Array2::zeros((OUTPUT_DIM, input.positions()));
    for t in 0..trace.steps() {
        out.column_mut(t).assign(&trace.logits(t).column(0));
    }
    Ok(out)
}

/// Gradients of the mean next-token cross-entropy of one sequence.
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub loss: f64,
    pub params: LstmParameters,
    /// `22 × (L+1)`
    pub input: Array2<f64>,
}

fn check_targets(targets: &[usize], positions: usize) -> Result<()> {
    if targets.len() != positions {
        return Err(Error::Shape(format!(
            "expected {positions} targets, got {}",
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= OUTPUT_DIM) {
        return Err(Error::IndexOutOfRange {
            what: "target",
            index: bad,
            limit: OUTPUT_DIM,
        });
    }
    Ok(())
}

/// Mean cross-entropy over positions and the exact gradients with respect to
/// parameters and the input encoding.
pub fn loss_and_gradients(
    params: &LstmParameters,
    input: &OneHotMatrix,
    targets: &[usize],
) -> Result<LossGradients> {
    check_input(input)?;
    check_targets(targets, input.positions())?;
    let trace = params.run(step_inputs(input.values().view()));
    let (loss, dlogits) = cross_entropy_seeds(&trace, &[targets]);
    let (grads, dxs) = params.backward(&trace, &dlogits, true);
    let mut dx = Array2::zeros(input.values().raw_dim());
    for (t, d) in dxs.iter().enumerate() {
        dx.column_mut(t).assign(&d.column(0));
    }
    Ok(LossGradients {
        loss,
        params: grads.expect("requested"),
        input: dx,
    })
}

/// Loss and logit gradients for a batch whose column `b` has targets `targets[b]`.
fn cross_entropy_seeds(trace: &Trace, targets: &[&[usize]]) -> (f64, Vec<Option<Array2<f64>>>) {
    let steps = trace.steps();
    let batch = targets.len();
    let norm = (steps * batch) as f64;
    let mut loss = 0.0;
    let mut seeds = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut p = trace.probs(t);
        for (b, tg) in targets.iter().enumerate() {
            let z = trace.logits(t).column(b);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[tg[t]];
            p[[tg[t], b]] -= 1.0;
        }
        p.mapv_inplace(|v| v / norm);
        seeds.push(Some(p));
    }
    (loss / norm, seeds)
}

/// Build `22 × B` step inputs for a batch of equal-length sequences.
pub(crate) fn batch_inputs(seqs: &[&TokenSequence]) -> Vec<Array2<f64>> {
    let len = seqs.first().map_or(0, |s| s.len());
    let mut xs = vec![Array2::zeros((INPUT_DIM, seqs.len())); len + 1];
    for (b, s) in seqs.iter().enumerate() {
        xs[0][[START_INPUT, b]] = 1.0;
        for (p, &tok) in s.indices().iter().enumerate() {
            xs[p + 1][[tok as usize, b]] = 1.0;
        }
    }
    xs
}

/// Mean cross-entropy over every position of every sequence in the batch,
/// with parameter gradients.
pub fn batch_loss_and_gradients(
    params: &LstmParameters,
    seqs: &[&TokenSequence],
) -> Result<(f64, LstmParameters)> {
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let len = seqs[0].len();
    if let Some((index, s)) = seqs.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(Error::MixedLengths {
            expected: len,
            found: s.len(),
            index,
        });
    }
    let targets: Vec<Vec<usize>> = seqs.iter().map(|s| s.targets()).collect();
    let target_refs: Vec<&[usize]> = targets.iter().map(|t| t.as_slice()).collect();
    let trace = params.run(batch_inputs(seqs));
    let (loss, dlogits) = cross_entropy_seeds(&trace, &target_refs);
    let (grads, _) = params.backward(&trace, &dlogits, true);
    Ok((loss, grads.expect("requested")))
}

/// Mean loss over a dataset, evaluated in fixed-size chunks.
pub fn dataset_loss(params: &LstmParameters, seqs: &[TokenSequence]) -> Result<f64> {
    if seqs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for chunk in seqs.chunks(256) {
        let refs: Vec<&TokenSequence> = chunk.iter().collect();
        let targets: Vec<Vec<usize>> = refs.iter().map(|s| s.targets()).collect();
        let target_refs: Vec<&[usize]> = targets.iter().map(|t| t.as_slice()).collect();
        let trace = params.run(batch_inputs(&refs));
        let (loss, _) = cross_entropy_seeds(&trace, &target_refs);
        total += loss * chunk.len() as f64;
    }
    Ok(total / seqs.len() as f64)
}

/// Value and input gradient of a single output scalar `y[output_dim, output_pos]`.
pub fn output_gradient(
    params: &LstmParameters,
    input: &OneHotMatrix,
    output_pos: usize,
    output_dim: usize,
    target: OutputTarget,
) -> Result<(f64, Array2<f64>)> {
    check_input(input)?;
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
    let mut weights = [0.0; OUTPUT_DIM];
    weights[output_dim] = 1.0;
    let trace = params.run(step_inputs(input.values().view()));
    let logits: Vec<f64> = trace.logits(output_pos).column(0).to_vec();
    let value = target.value(&logits, &weights);
    let mut dlogits = vec![None; trace.steps()];
    dlogits[output_pos] = Some(target.logit_seed(&trace.probs(output_pos), &weights));
    let (_, dxs) = params.backward(&trace, &dlogits, false);
    let mut dx = Array2::zeros(input.values().raw_dim());
    for (t, d) in dxs.iter().enumerate() {
        dx.column_mut(t).assign(&d.column(0));
    }
    Ok((value, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::vocab::encode;
    use approx::assert_relative_eq;

    fn seq(s: &str) -> TokenSequence {
        s.parse().unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_model(4, 0).unwrap();
        let b = init_model(4, 0).unwrap();
        assert_eq!(a, b);
        let c = init_model(4, 1).unwrap();
        assert_ne!(a.w_ih, c.w_ih);
        let big = init_model(100, 3).unwrap();
        for block in big.blocks() {
            assert!(block.iter().all(|v| v.abs() <= 0.1));
        }
        assert!(matches!(init_model(0, 0), Err(Error::ZeroHiddenSize)));
    }

    #[test]
    fn zero_model_is_uniform_with_log21_loss() {
        let p = LstmParameters::zeros(5).unwrap();
        let s = seq("ACDEF");
        let probs = forward(&p, &encode(&s)).unwrap();
        for v in probs.iter() {
            assert_relative_eq!(*v, 1.0 / 21.0, epsilon = 1e-15);
        }
        let lg = loss_and_gradients(&p, &encode(&s), &s.targets()).unwrap();
        assert_eq!(lg.loss, 21f64.ln());
    }

    #[test]
    fn forward_columns_sum_to_one() {
        let p = init_model(7, 2).unwrap();
        let probs = forward(&p, &encode(&seq("WYKLMN"))).unwrap();
        for col in probs.columns() {
            assert!((col.sum() - 1.0).abs() <= 1e-12);
            assert!(col.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        assert!(OneHotMatrix::from_array(Array2::zeros((21, 3))).is_err());
    }

    #[test]
    fn bad_target_rejected() {
        let p = init_model(3, 0).unwrap();
        let s = seq("AC");
        let err = loss_and_gradients(&p, &encode(&s), &[0, 1, 21]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 21, .. }));
        assert!(loss_and_gradients(&p, &encode(&s), &[0, 1]).is_err());
    }

    #[test]
    fn duplicated_batch_element_keeps_mean_loss() {
        let p = init_model(6, 9).unwrap();
        let a = seq("ACDE");
        let b = seq("KLMN");
        let (l1, _) = batch_loss_and_gradients(&p, &[&a, &b]).unwrap();
        let (l2, _) = batch_loss_and_gradients(&p, &[&a, &b, &a, &b]).unwrap();
        assert_relative_eq!(l1, l2, max_relative = 1e-14);
    }

    #[test]
    fn batch_rejects_mixed_lengths() {
        let p = init_model(3, 0).unwrap();
        let a = seq("ACDE");
        let b = seq("KLM");
        assert!(matches!(
            batch_loss_and_gradients(&p, &[&a, &b]),
            Err(Error::MixedLengths { index: 1, .. })
        ));
    }
}

//! Autoregressive single-layer LSTM over amino-acid tokens.

mod lstm;
mod sample;
mod train;
mod vocab;

pub use lstm::{
    batch_loss_and_gradients, dataset_loss, forward, forward_logits, init_model,
    loss_and_gradients, output_gradient, LossGradients, LstmParameters, OutputTarget, Trace,
    BLOCK_NAMES,
};
pub use sample::{sample, sample_with, Decoding, DEFAULT_TEMPERATURE};
pub use train::{
    check_dataset, train, train_with_progress, Adam, TrainConfig, TrainOutcome,
    DESK_HIDDEN_SIZE, PAPER_HIDDEN_SIZE, PAPER_LEARNING_RATE, PLATEAU_TOLERANCE,
};
pub use vocab::{
    amino_index, encode, OneHotMatrix, TokenSequence, Vocabulary, AMINO_ACIDS, INPUT_DIM,
    NUM_AMINO, OUTPUT_DIM, START_INPUT, START_SYMBOL, STOP_INPUT, STOP_OUTPUT, STOP_SYMBOL,
};

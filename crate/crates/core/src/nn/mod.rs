//! From-scratch LSTM encoder-decoder with hand-derived gradients.

mod checkpoint;
mod grad;
pub mod linalg;
mod lstm;
mod model;

pub use checkpoint::{
    checkpoint_bytes, checksum, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use grad::{backward, forward_loss, ForwardCache, Sample};
pub use linalg::Matrix;
pub use lstm::{lstm_step, LstmParams, LstmState};
pub use model::{Gradients, InputNorm, Seq2SeqModel};

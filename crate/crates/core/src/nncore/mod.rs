//! Differentiable building blocks with fixed, hand-written backward passes.
//!
//! All cells work on row-major batches: hidden states are `(batch, hidden)`
//! and weight matrices are stored `(out, in)`. The printed GRU has no bias
//! terms; the output projection does.

mod gru;
mod init;
mod loss;
mod scalar;
mod sequence;

pub use gru::{cond_gru_step, gru_step, CondGruParams, GruParams, OutputProjection};
pub use init::uniform_matrix;
pub use loss::{log_softmax, nll_loss};
pub(crate) use loss::nll_rows_with_grad;
pub use scalar::{sigmoid, Scalar};
pub use sequence::{decode_logits, encode_sequence, Direction};
pub(crate) use sequence::{decode_backward, decode_batch, encode_backward, encode_batch};

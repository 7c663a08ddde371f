//! Dense 64-bit tensor math with hand-written backward passes.

mod checkpoint;
mod gradcheck;
mod gru;
mod layers;
pub mod ops;
mod param;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use gru::{GruCache, GruCell};
pub use layers::{Activation, FeedForward, FeedForwardCache, Linear};
pub use param::{GradBuffer, ParamId, ParamStore, Parameter};
pub use tensor::Tensor;

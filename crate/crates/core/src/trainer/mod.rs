mod loss;
mod optim;
mod segment;
mod train;

pub use loss::{sentence_loss, sentence_loss_and_grad, word_only_loss};
pub use optim::{clip_global_norm, Adadelta};
pub use segment::{segment_reference, Fragment, PreparedExample, SegmentedFragment, SegmentedReference};
pub use train::{evaluate_loss, train, EpochReport, LossMode, TrainConfig, TrainOutcome};

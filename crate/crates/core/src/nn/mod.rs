//! Small numerical substrate: dense layers, softmax, scaled dot-product
//! attention, hand-written reverse passes, Adam and checkpoints. Everything
//! is `f64`.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gradcheck;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use adam::{Adam, AdamHyper};
pub use checkpoint::Checkpoint;
pub use dense::{dense_forward, Dense, DenseCache};
pub use ops::{attention, attention_backward, softmax, Activation, AttentionCache};
pub use rng::RngStream;
pub use tensor::{Mat, ParamTensor, Parameterized};

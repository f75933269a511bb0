//! Dense feed-forward networks with analytic gradients, Adam, and a plain
//! text model format.
//!
//! Hidden layers use `tanh`; the output layer is linear and heads apply their
//! own softmax. Everything is `f64` and single-threaded per model.

mod io;
mod loss;
mod mlp;
mod optim;
mod train;

pub use io::{load_model, parse_model, save_model, write_model, MODEL_MAGIC};
pub use loss::{log_softmax, loss_and_grad, loss_value, softmax, Objective, PpoCoeffs, PpoSample};
pub use mlp::{Grads, Layer, Mlp, Trace};
pub use optim::{clip_grad_norm, Adam};
pub use train::{train_supervised, SupervisedData, TrainHyper, TrainReport};

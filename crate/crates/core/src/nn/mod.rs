//! Minimal dense-array core: tensors, reverse-mode autodiff, MLP layers,
//! Adam, and a checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod init;
pub mod layers;
pub mod params;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use graph::{Graph, Var};
pub use init::xavier_init;
pub use layers::{dropout, Activation, BatchNorm, Dense, ForwardCtx, Mlp, MlpConfig, Mode};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tensor::Tensor;

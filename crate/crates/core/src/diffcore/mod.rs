//! Minimal reverse-mode differentiation for small feed-forward networks.
//!
//! Everything downstream — per-agent value networks, mixing hypernetworks,
//! the joint action-value model, and the observation attacks — is built from
//! the same primitive: an affine chain with elementwise activations, a
//! hand-written backward pass that yields gradients with respect to both
//! parameters and inputs, and plain SGD updates.

mod checkpoint;
mod mlp;
mod tensor;

pub use checkpoint::{load_network, save_network, Checkpoint};
pub use mlp::{
    backward, forward, sgd_step, GradBundle, HiddenActivation, MlpSpec, Network,
    OutputActivation, ParamSet,
};
pub use tensor::Tensor;

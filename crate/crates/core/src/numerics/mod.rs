//! Dense linear algebra, the two-layer mapping network, optimizers and the
//! seeded random stream.

mod matrix;
mod net;
mod ops;
mod optim;
mod rng;

pub use matrix::{dot, matmul, norm, Matrix};
pub use net::{Activation, ForwardCache, MappingNet, NetGradients};
pub use ops::{cosine, cosine_cross_entropy, cosine_matrix, normalize_rows, softmax, Cosine, CrossEntropy};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use rng::{beta_sample, derive_seed, RngStream};

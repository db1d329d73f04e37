//! Architecture parsing, network assembly and SGD training.

pub mod arch;
pub mod checkpoint;
pub mod net;
pub mod train;

pub use arch::{ArchSpec, LayerDesc, Shape};
pub use checkpoint::Checkpoint;
pub use net::{build_network, Mode, Network, Noise, Trace};
pub use train::{evaluate, sgd_momentum_update, EpochMetrics, TrainConfig, Trainer};

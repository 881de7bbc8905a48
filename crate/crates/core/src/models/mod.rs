//! The eight architectures, their target blocks and checkpoints.

mod arch;
mod checkpoint;
mod fit;
mod network;
mod target;

pub use arch::{ArchKind, ArchitectureSpec, OutputShape};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use fit::{evaluate, fit, predict_all};
pub use network::{ForwardPass, Model};
pub use target::{assemble_target, prepare, PreparedSample, TargetBlock};

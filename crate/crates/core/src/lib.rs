//! Tree energy loss for sparsely annotated semantic segmentation.
//!
//! Images and network outputs become 4-connected grid graphs ([`graph`]),
//! reduced to minimum spanning trees ([`mst`]). Tree-path affinities drive a
//! linear-time normalized filter with exact gradients ([`filter`]), which
//! turns predictions into soft pseudo labels for unlabeled pixels
//! ([`losses`]). [`annotations`] synthesizes sparse labels and [`train`] is a
//! small end-to-end self-training harness.

pub mod annotations;
pub mod error;
pub mod filter;
pub mod graph;
pub mod io;
pub mod losses;
pub mod mst;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{DenseTensor, LabelMap, IGNORE_INDEX};

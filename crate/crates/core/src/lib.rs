//! Unsupervised LiDAR auto-labeling.
//!
//! Turns raw point-cloud sequences into amodal 3D bounding-box tracklets
//! without any human annotation. The pipeline runs in four stages:
//!
//! 1. [`preprocess`] — ground-plane removal and static-point identification,
//! 2. [`flow`] — per-cluster scene-flow estimation by runtime optimization
//!    of a small coordinate network,
//! 3. [`autolabel`] — motion-driven object proposals, tracking, and
//!    sequential shape registration that completes partial views into
//!    amodal boxes,
//! 4. [`metrics`] — flow and detection quality evaluation.
//!
//! [`data`] provides sequence I/O and a synthetic scene generator used for
//! self-contained validation; [`geom`] holds the geometric primitives the
//! rest of the crate is built on. [`pipeline`] wires the stages together
//! behind a single TOML configuration and is what the CLI binary calls.

pub mod autolabel;
pub mod data;
pub mod flow;
pub mod geom;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;

/// Derives an independent RNG stream key from a base seed and an index
/// (frame number, cluster id, ...) via a splitmix64 step, so that stages
/// can draw randomness per unit of work without coupling their streams.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

//! Non-binary LDPC codes over the binary erasure channel.
//!
//! The crate covers the whole design loop for codes over GF(2^p) whose
//! codewords are transmitted bit by bit:
//!
//! * [`gfield`]: field arithmetic through companion-matrix powers,
//! * [`ensemble`]: degree distributions and their binary-image conversion,
//! * [`codegraph`]: random labeled Tanner graphs and their binary images,
//! * [`decoders`]: hybrid inverse-operation peeling, plain bit peeling and a
//!   Gaussian-elimination reference decoder,
//! * [`devolution`]: erasure-probability recursion, thresholds and
//!   convergence-speed metrics,
//! * [`optimizer`]: local search for degree distributions that converge faster,
//! * [`harness`]: channel simulation campaigns and the config/CSV surface.

pub mod codegraph;
pub mod decoders;
pub mod devolution;
pub mod ensemble;
pub mod error;
pub mod gfield;
pub mod harness;
pub mod optimizer;

pub use codegraph::{assign_labels, sample_code, BinaryImage, Edge, TannerGraph};
pub use decoders::{decode, DecodeResult, DecoderKind, ErasurePattern};
pub use devolution::{DeParams, DeTrajectory};
pub use ensemble::{design_rate, DegreeDistribution, RowWeightProfile};
pub use error::{Error, Result};
pub use optimizer::{OptimizationProblem, OptimizationResult};
pub use harness::{SimConfig, SimReport};
pub use gfield::{BinaryMatrix, BitVector, Field};



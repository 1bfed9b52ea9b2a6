//! Dynamic graph tracking engine.
//!
//! Ingests per-frame detection streams, builds a spatio-temporal graph per
//! frame, refines node embeddings with a small graph-convolution stack,
//! assigns persistent track identities by gated minimum-cost matching, and
//! ships the surrounding tooling: synthetic scenario generation, detection
//! and trajectory metrics, and activation-map attribution (Grad-CAM,
//! Grad-CAM++, Eigen-CAM) with interpretability scores.

pub mod assign;
pub mod config;
pub mod detect;
pub mod error;
pub mod eval;
pub mod explain;
pub mod gnn;
pub mod graph;
pub mod io;
pub mod mat;
pub mod par;
pub mod render;
pub mod rng;
pub mod synth;
pub mod tracker;

pub use config::RunConfig;
pub use detect::{apply_roi, confidence_gate, iou, nms, BBox, Detection, FrameDetections, Roi};
pub use error::{Error, Result};
pub use graph::{adjacency, edge_factors, edge_weight, node_feature, update_graph, DynamicGraph};
pub use io::{parse_stream, parse_tracked, Format, TrackedBox, TrackedFrame};
pub use mat::Mat;
pub use rng::Rng;

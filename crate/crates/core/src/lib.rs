//! Learner-L1-specific lexical difficulty prediction: resource loading,
//! feature extraction, boosted trees with exact Shapley attributions, and
//! the analyses built on top of them.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod explain;
pub mod features;
pub mod fixtures;
pub mod model;
pub mod pipeline;
pub mod resources;
pub mod stats;
pub mod text;

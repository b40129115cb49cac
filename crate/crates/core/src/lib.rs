//! Agent-guided refinement of dimensionality-reduction hyperparameters.
//!
//! The crate is organised around the refinement loop:
//!
//! * [`dr`] computes 2D embeddings (PCA, exact t-SNE, or an external backend
//!   process speaking a JSON wire protocol).
//! * [`metrics`] scores an embedding against its high-dimensional reference
//!   (rank correlation, stress, distance ratio, trustworthiness, continuity,
//!   silhouette, LOF).
//! * [`hierarchy`] builds UPGMA dendrograms over per-label centroids and
//!   serialises them as Newick strings.
//! * [`agent`] assembles the master prompt, parses the agent's diagnostic
//!   JSON, computes weighted composite scores and applies recommendations.
//! * [`orchestrator`] runs the loop, tracks the trajectory and exports it.
//! * [`render`] draws deterministic SVG scatter plots and dendrograms.

pub mod agent;
pub mod data;
pub mod dr;
pub mod error;
pub mod hierarchy;
pub mod metrics;
pub mod orchestrator;
pub mod render;
pub mod synthetic;

pub use data::DataMatrix;
pub use error::{Error, Result};

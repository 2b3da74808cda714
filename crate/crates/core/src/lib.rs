//! Trust scoring and disaster-level evaluation for crowdsourced
//! annotation of satellite image tiles.
//!
//! Players draw tagged rectangles on image tiles. Per image, pairwise
//! annotation agreement forms a directed rating graph whose dominant
//! eigenvector yields per-player trust values; a new player is accepted
//! when their trust beats the trusted-group mean on enough images of
//! their task. Accepted annotations aggregate into per-region disaster
//! levels. The crate also ships task generation with half-shift tiling,
//! the JSON document stores, and a synthetic honest/malicious player
//! simulation scored with ROC/AUC.

pub mod disaster;
pub mod error;
pub mod geometry;
pub mod ids;
pub mod pipeline;
pub mod rating;
pub mod simulate;
pub mod store;
pub mod taskgen;
pub mod tags;

pub use error::{Error, Result};

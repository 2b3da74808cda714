//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ROI: width and height must be positive (got {width}x{height})")]
    InvalidRoi { width: i64, height: i64 },

    #[error("duplicate tag {tag:?} in ROI tag list")]
    DuplicateTag { tag: String },

    #[error("unknown tag {tag:?}; new tags must go through tag-merge handling first")]
    UnknownTag { tag: String },

    #[error("tag counts are empty; weight vector is undefined")]
    EmptyTagCounts,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("total weight is zero; weighted covariance is undefined")]
    ZeroTotalWeight,

    #[error("rating graph needs at least 2 players with ROIs, got {players}")]
    TooFewPlayers { players: usize },

    #[error("player {player:?} has no ROIs on image {image:?}")]
    EmptyAnnotation { player: String, image: String },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("tagged image {image:?} has no trusted annotations; task generation contract violated")]
    MissingTrustedAnnotations { image: String },

    #[error("{pool} pool too small: need {need}, have {have}")]
    PoolTooSmall {
        pool: &'static str,
        need: usize,
        have: usize,
    },

    #[error("task image pools overlap on image {image:?}")]
    OverlappingPools { image: String },

    #[error("seed group is empty; cold start needs at least one trusted player")]
    EmptySeedGroup,

    #[error("predefined tag list is empty")]
    EmptyPredefinedTags,

    #[error("seed annotations carry no tagged ROIs; system weights are undefined")]
    NoSeedTags,

    #[error("invalid tile size {tile_w}x{tile_h}")]
    InvalidTileSize { tile_w: u32, tile_h: u32 },

    #[error("region has no images; disaster level is undefined")]
    EmptyRegion,

    #[error("region images have zero total area; disaster level is undefined")]
    ZeroRegionArea,

    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },

    #[error("no region owns image {image:?}")]
    UnknownRegion { image: String },

    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },

    #[error("need at least 2 samples for noise estimation, got {got}")]
    TooFewSamples { got: usize },

    #[error("ROC evaluation needs both honest and malicious players")]
    SingleClassPopulation,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported document version {found}, expected {expected}")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Player rating: pairwise annotation agreement, the per-image rating
//! graph, trust values from its dominant eigenvector, and the
//! malicious-player detection built on top.

mod detect;
mod graph;
mod perron;

pub use detect::{
    detect_malicious, merge_new_tags, rate_image, DetectionVerdict, DetectorConfig, ImageCase,
    ImagePass, TagMergeOutcome,
};
pub use graph::{build_rating_graph, edge_weight, RatingGraph, DEFAULT_SMOOTHING};
pub use perron::{stationary_distribution, trust_scores, SolverConfig, StationaryResult, TrustScores};

use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, PlayerId};
use crate::tags::{TagVector, WeightVector};

/// One player's ROI set for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerAnnotation {
    pub player: PlayerId,
    pub image: ImageId,
    pub rois: Vec<Roi>,
}

impl PlayerAnnotation {
    pub fn new(player: PlayerId, image: ImageId, rois: Vec<Roi>) -> Self {
        Self {
            player,
            image,
            rois,
        }
    }
}

/// Asymmetric ROI match ratio: shared area over `a`'s own area, in [0, 1].
/// Not symmetric; `match_ratio(a, b)` reads as how much of `a` lies in `b`.
pub fn match_ratio(a: &Roi, b: &Roi) -> f64 {
    a.intersection_area(b) as f64 / a.area() as f64
}

/// Weighted covariance of `x` and `y` under weights `w`.
///
/// Note the centering term: both means are `(1/n) * sum(w_i * x_i)`, i.e.
/// the weighted sum divided by the dimension, not the conventional
/// weighted mean `sum(w_i x_i) / sum(w_i)`. The bounds that downstream
/// clamping relies on are stated for this exact form, so do not "fix" it.
pub fn weighted_covariance(x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: w.len(),
        });
    }
    if n == 0 {
        return Err(Error::ZeroTotalWeight);
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    let inv_n = 1.0 / n as f64;
    let mx: f64 = inv_n * w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
    let my: f64 = inv_n * w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>();
    let acc: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((wi, xi), yi)| wi * (xi - mx) * (yi - my))
        .sum();
    Ok(acc / total)
}

/// Degenerate self-covariances below this are treated as zero.
pub const TAG_CORRELATION_EPS: f64 = 1e-12;

/// Asymmetric tag correlation between two one-hot tag vectors under the
/// image weight vector: `cov(a, b) / cov(a, a)`, clamped into [-1, 1].
/// Returns 0 when the self-covariance of `a` is degenerate (constant or
/// empty tag vector), so the value is always defined.
pub fn tag_correlation(a: &TagVector, b: &TagVector, weights: &WeightVector) -> f64 {
    if a.dim() == 0 || weights.sum() <= 0.0 {
        return 0.0;
    }
    let denom = match weighted_covariance(a.components(), a.components(), weights.components()) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    if denom.abs() < TAG_CORRELATION_EPS {
        return 0.0;
    }
    let num = match weighted_covariance(a.components(), b.components(), weights.components()) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    (num / denom).clamp(-1.0, 1.0)
}

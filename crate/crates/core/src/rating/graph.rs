//! Per-image player rating graph and its normalized adjacency matrix.

use crate::error::{Error, Result};
use crate::ids::{ImageId, PlayerId};
use crate::rating::{match_ratio, tag_correlation, PlayerAnnotation};
use crate::tags::{tag_vector, TagId, TagVector, WeightVector};

/// Default smoothing added to every raw weight before normalization.
/// Disjoint annotations produce zero edges; the smoothing keeps the matrix
/// strictly positive so the dominant eigenvector is unique. It also sets
/// the weakest transition of the trust chain, and the power iteration
/// needs on the order of 1/smoothing steps to resolve components that are
/// only bridged by smoothed edges, so values much below 1e-4 stall the
/// solver whenever two players share no overlap at all.
pub const DEFAULT_SMOOTHING: f64 = 1e-3;

/// Directed edge weight from `p` to `q` on one image: for every ROI pair,
/// the match ratio times the shifted tag correlation, summed. The `+ 2`
/// shift keeps each factor in [1, 3], so the weight lies in [0, 3mn] for
/// m and n ROIs and the self-weight stays positive.
pub fn edge_weight(
    p: &PlayerAnnotation,
    q: &PlayerAnnotation,
    image_vocab: &[TagId],
    image_weights: &WeightVector,
) -> Result<f64> {
    let p_vecs = roi_tag_vectors(p, image_vocab)?;
    let q_vecs = roi_tag_vectors(q, image_vocab)?;
    Ok(edge_weight_prepared(
        &p.rois,
        &p_vecs,
        &q.rois,
        &q_vecs,
        image_weights,
    ))
}

fn roi_tag_vectors(annotation: &PlayerAnnotation, vocab: &[TagId]) -> Result<Vec<TagVector>> {
    annotation
        .rois
        .iter()
        .map(|r| tag_vector(r.tags().iter(), vocab))
        .collect()
}

fn edge_weight_prepared(
    p_rois: &[crate::geometry::Roi],
    p_vecs: &[TagVector],
    q_rois: &[crate::geometry::Roi],
    q_vecs: &[TagVector],
    weights: &WeightVector,
) -> f64 {
    let mut total = 0.0;
    for (p_roi, p_vec) in p_rois.iter().zip(p_vecs) {
        for (q_roi, q_vec) in q_rois.iter().zip(q_vecs) {
            let ratio = match_ratio(p_roi, q_roi);
            if ratio == 0.0 {
                continue;
            }
            total += ratio * (tag_correlation(p_vec, q_vec, weights) + 2.0);
        }
    }
    total
}

/// The rating graph for one image: raw pairwise weights plus the
/// row-normalized adjacency matrix, both in row-major order over the
/// player list.
#[derive(Debug, Clone)]
pub struct RatingGraph {
    image: ImageId,
    players: Vec<PlayerId>,
    raw: Vec<f64>,
    normalized: Vec<f64>,
}

impl RatingGraph {
    pub fn image(&self) -> &ImageId {
        &self.image
    }

    pub fn players(&self) -> &[PlayerId] {
        &self.players
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn raw(&self, p: usize, q: usize) -> f64 {
        self.raw[p * self.players.len() + q]
    }

    pub fn normalized(&self, p: usize, q: usize) -> f64 {
        self.normalized[p * self.players.len() + q]
    }

    pub fn normalized_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.normalized.chunks(self.players.len())
    }
}

/// Builds the rating graph for one image. Every annotation must belong to
/// that image and carry at least one ROI; the pairwise weight of a player
/// with no ROIs is undefined, so such players are excluded upstream and
/// auto-fail the image. Raw weights get `smoothing` added to every entry,
/// then each row is divided by its sum, yielding a strictly positive
/// row-stochastic matrix.
pub fn build_rating_graph(
    annotations: &[PlayerAnnotation],
    image_vocab: &[TagId],
    image_weights: &WeightVector,
    smoothing: f64,
) -> Result<RatingGraph> {
    if annotations.len() < 2 {
        return Err(Error::TooFewPlayers {
            players: annotations.len(),
        });
    }
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "smoothing must be a positive finite number, got {smoothing}"
        )));
    }
    let image = annotations[0].image.clone();
    for a in annotations {
        if a.image != image {
            return Err(Error::InvalidParameter(format!(
                "annotations span images {} and {}",
                image, a.image
            )));
        }
        if a.rois.is_empty() {
            return Err(Error::EmptyAnnotation {
                player: a.player.to_string(),
                image: a.image.to_string(),
            });
        }
    }
    let n = annotations.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if annotations[i].player == annotations[j].player {
                return Err(Error::InvalidParameter(format!(
                    "player {} appears twice on image {}",
                    annotations[i].player, image
                )));
            }
        }
    }

    let vecs: Vec<Vec<TagVector>> = annotations
        .iter()
        .map(|a| roi_tag_vectors(a, image_vocab))
        .collect::<Result<_>>()?;

    let mut raw = vec![0.0; n * n];
    for (p, (from, from_vecs)) in annotations.iter().zip(&vecs).enumerate() {
        for (q, (to, to_vecs)) in annotations.iter().zip(&vecs).enumerate() {
            raw[p * n + q] =
                edge_weight_prepared(&from.rois, from_vecs, &to.rois, to_vecs, image_weights);
        }
    }

    let mut normalized = vec![0.0; n * n];
    for p in 0..n {
        let row = &raw[p * n..(p + 1) * n];
        let sum: f64 = row.iter().map(|w| w + smoothing).sum();
        for q in 0..n {
            normalized[p * n + q] = (row[q] + smoothing) / sum;
        }
    }

    let graph = RatingGraph {
        image,
        players: annotations.iter().map(|a| a.player.clone()).collect(),
        raw,
        normalized,
    };
    debug_assert!(graph_invariants_hold(&graph, annotations));
    Ok(graph)
}

#[cfg(debug_assertions)]
fn graph_invariants_hold(g: &RatingGraph, annotations: &[PlayerAnnotation]) -> bool {
    let n = g.len();
    for (p, annotation) in annotations.iter().enumerate() {
        let m = annotation.rois.len() as f64;
        if g.raw(p, p) < m {
            return false;
        }
        let mut row_sum = 0.0;
        for q in 0..n {
            let a = g.normalized(p, q);
            if !(a.is_finite() && a > 0.0) {
                return false;
            }
            if !g.raw(p, q).is_finite() || g.raw(p, q) < 0.0 {
                return false;
            }
            row_sum += a;
        }
        if (row_sum - 1.0).abs() > 1e-12 {
            return false;
        }
    }
    true
}

#[cfg(not(debug_assertions))]
fn graph_invariants_hold(_: &RatingGraph, _: &[PlayerAnnotation]) -> bool {
    true
}

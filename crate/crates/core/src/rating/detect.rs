//! Malicious-player detection.
//!
//! A candidate is rated image by image against the trusted players who
//! annotated the same image: build the rating graph, solve for trust
//! values, and pass the image when the candidate's trust is at least the
//! mean trust of the trusted players present. The candidate is reliable
//! when the number of passed images reaches the acceptance threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, PlayerId};
use crate::rating::{build_rating_graph, trust_scores, PlayerAnnotation, SolverConfig};
use crate::tags::{TagId, TagRegistry};

/// Detection knobs. `theta_accept` is the number of tagged images a
/// candidate must pass; with a task of n tagged images, 1 keeps the gate
/// as loose as possible and n demands a pass on every image.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub theta_accept: usize,
    pub smoothing: f64,
    pub solver: SolverConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta_accept: 1,
            smoothing: crate::rating::DEFAULT_SMOOTHING,
            solver: SolverConfig::default(),
        }
    }
}

/// One tagged image of a task: the trusted annotations on it plus the
/// candidate's annotation, if any.
#[derive(Debug, Clone)]
pub struct ImageCase {
    pub image: ImageId,
    pub trusted: Vec<PlayerAnnotation>,
    pub candidate: Option<PlayerAnnotation>,
}

/// Outcome for a single tagged image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImagePass {
    pub image_id: ImageId,
    pub pass: bool,
    /// Candidate trust value; `None` when the candidate had no ROIs on the
    /// image and auto-failed it.
    pub trust: Option<f64>,
    /// Mean trust of the trusted players present on the image.
    pub trusted_mean: Option<f64>,
}

/// Verdict over a whole task round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionVerdict {
    pub player_id: PlayerId,
    pub reliable: bool,
    pub counter: usize,
    pub theta_accept: usize,
    pub images: Vec<ImagePass>,
}

impl DetectionVerdict {
    fn new(player_id: PlayerId, images: Vec<ImagePass>, theta_accept: usize) -> Self {
        let counter = images.iter().filter(|p| p.pass).count();
        Self {
            player_id,
            reliable: counter >= theta_accept,
            counter,
            theta_accept,
            images,
        }
    }
}

/// Drops candidate tags that are not in the vocabulary, so rating runs on
/// known tags only. New tags are handled afterwards by [`merge_new_tags`].
fn project_known_tags(annotation: &PlayerAnnotation, registry: &TagRegistry) -> PlayerAnnotation {
    let rois = annotation
        .rois
        .iter()
        .map(|r| {
            let kept = r.tags().iter().filter(|t| registry.contains(t)).cloned();
            Roi::new(r.x(), r.y(), r.width(), r.height(), kept)
                .expect("projection preserves dimensions")
        })
        .collect();
    PlayerAnnotation::new(annotation.player.clone(), annotation.image.clone(), rois)
}

/// Rates the candidate on one tagged image. Trusted players with no ROIs
/// on the image are skipped; a candidate with no ROIs auto-fails.
pub fn rate_image(
    case: &ImageCase,
    registry: &TagRegistry,
    config: &DetectorConfig,
) -> Result<ImagePass> {
    let trusted: Vec<&PlayerAnnotation> = case
        .trusted
        .iter()
        .filter(|a| !a.rois.is_empty())
        .collect();
    if trusted.is_empty() {
        return Err(Error::MissingTrustedAnnotations {
            image: case.image.to_string(),
        });
    }

    let candidate = match &case.candidate {
        Some(c) if !c.rois.is_empty() => project_known_tags(c, registry),
        _ => {
            return Ok(ImagePass {
                image_id: case.image.clone(),
                pass: false,
                trust: None,
                trusted_mean: None,
            })
        }
    };

    for t in &trusted {
        for roi in &t.rois {
            for tag in roi.tags() {
                if !registry.contains(tag) {
                    return Err(Error::UnknownTag {
                        tag: tag.as_str().to_owned(),
                    });
                }
            }
        }
    }

    let mut participants = Vec::with_capacity(trusted.len() + 1);
    participants.push(candidate);
    participants.extend(trusted.iter().map(|a| (*a).clone()));

    let image_vocab = image_vocabulary(&participants, registry);
    let image_weights = registry.image_weights(&image_vocab)?;
    let graph = build_rating_graph(&participants, &image_vocab, &image_weights, config.smoothing)?;
    let scores = trust_scores(&graph, &config.solver)?;

    let candidate_trust = scores.values()[0];
    let trusted_mean =
        scores.values()[1..].iter().sum::<f64>() / (scores.values().len() - 1) as f64;

    Ok(ImagePass {
        image_id: case.image.clone(),
        pass: candidate_trust >= trusted_mean,
        trust: Some(candidate_trust),
        trusted_mean: Some(trusted_mean),
    })
}

/// Distinct known tags used on the image, in vocabulary order.
fn image_vocabulary(annotations: &[PlayerAnnotation], registry: &TagRegistry) -> Vec<TagId> {
    registry.known_tags_in_order(
        annotations
            .iter()
            .flat_map(|a| a.rois.iter())
            .flat_map(|r| r.tags().iter()),
    )
}

/// Runs detection over every tagged image of a task round.
pub fn detect_malicious(
    player_id: &PlayerId,
    cases: &[ImageCase],
    registry: &TagRegistry,
    config: &DetectorConfig,
) -> Result<DetectionVerdict> {
    let mut images = Vec::with_capacity(cases.len());
    for case in cases {
        images.push(rate_image(case, registry, config)?);
    }
    Ok(DetectionVerdict::new(
        player_id.clone(),
        images,
        config.theta_accept,
    ))
}

/// What happened to a player's tags after the verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "added")]
pub enum TagMergeOutcome {
    /// Every tag was already known; the verdict stands as-is.
    NoNewTags,
    /// The player used unknown tags exclusively; the round is dropped and
    /// the player marked unreliable regardless of the verdict.
    AllTagsNew,
    /// Reliable player with a mix of known and new tags: the new tags
    /// joined the vocabulary (counts are tallied at promotion).
    MergedNewTags(Vec<TagId>),
    /// Unreliable player with a mix of known and new tags: dropped.
    DroppedNewTags,
}

impl TagMergeOutcome {
    /// True when the round must not be promoted even if the verdict said
    /// reliable.
    pub fn drops_round(&self) -> bool {
        matches!(self, TagMergeOutcome::AllTagsNew | TagMergeOutcome::DroppedNewTags)
    }
}

/// Applies the new-tag policy after detection. Detection itself only ever
/// sees known tags; here the unknown ones either join the vocabulary (the
/// player proved reliable and also used known tags) or get dropped.
pub fn merge_new_tags(
    verdict: &DetectionVerdict,
    annotations: &[PlayerAnnotation],
    registry: &mut TagRegistry,
) -> TagMergeOutcome {
    let mut known = false;
    let mut new_tags: Vec<TagId> = Vec::new();
    for a in annotations {
        for roi in &a.rois {
            for tag in roi.tags() {
                if registry.contains(tag) {
                    known = true;
                } else if !new_tags.contains(tag) {
                    new_tags.push(tag.clone());
                }
            }
        }
    }

    if new_tags.is_empty() {
        TagMergeOutcome::NoNewTags
    } else if !known {
        TagMergeOutcome::AllTagsNew
    } else if verdict.reliable {
        for tag in &new_tags {
            registry.insert_tag(tag.clone());
        }
        TagMergeOutcome::MergedNewTags(new_tags)
    } else {
        TagMergeOutcome::DroppedNewTags
    }
}

//! Disaster level of a monitored region.
//!
//! The level is a weighted area coverage: per tag, the accumulated area
//! of all reliable ROIs carrying that tag over the total image area of
//! the region, weighted by the tag's share of selections system-wide.
//! Overlapping ROIs accumulate multiply, so the area ratio is clamped at
//! 1; the result always lands in [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, RegionId};
use crate::tags::{TagId, TagRegistry};

/// One image of a region snapshot with its reliable ROIs.
#[derive(Debug, Clone)]
pub struct RegionImage {
    pub image_id: ImageId,
    pub width: u32,
    pub height: u32,
    pub rois: Vec<Roi>,
}

impl RegionImage {
    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// Per-tag share of the disaster level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagContribution {
    pub tag: TagId,
    /// The tag's system weight.
    pub weight: f64,
    /// Accumulated ROI area over total region area, clamped into [0, 1].
    pub area_ratio: f64,
    pub contribution: f64,
}

/// Evaluated disaster level for one region at one point in time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionReport {
    pub region_id: RegionId,
    pub delta: f64,
    pub breakdown: Vec<TagContribution>,
    pub image_ids: Vec<ImageId>,
    pub evaluated_at: String,
}

/// Evaluates the disaster level of a region snapshot. Every tag present
/// on an ROI must be in the registry; the timestamp is caller-supplied so
/// runs stay reproducible.
pub fn disaster_level(
    region_id: RegionId,
    images: &[RegionImage],
    registry: &TagRegistry,
    evaluated_at: impl Into<String>,
) -> Result<RegionReport> {
    if images.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let total_area: u64 = images.iter().map(RegionImage::area).sum();
    if total_area == 0 {
        return Err(Error::ZeroRegionArea);
    }
    let total_area = total_area as f64;

    // Accumulated ROI area per tag, in vocabulary order.
    let vocab = registry.vocabulary();
    let mut areas = vec![0u64; vocab.len()];
    for image in images {
        for roi in &image.rois {
            for tag in roi.tags() {
                let idx = vocab
                    .iter()
                    .position(|v| v == tag)
                    .ok_or_else(|| Error::UnknownTag {
                        tag: tag.as_str().to_owned(),
                    })?;
                areas[idx] += roi.area();
            }
        }
    }

    let weights = registry.system_weights()?;
    let mut breakdown = Vec::new();
    let mut delta = 0.0;
    for (idx, tag) in vocab.iter().enumerate() {
        if areas[idx] == 0 {
            continue;
        }
        let weight = weights.components()[idx];
        let area_ratio = (areas[idx] as f64 / total_area).min(1.0);
        let contribution = weight * area_ratio;
        delta += contribution;
        breakdown.push(TagContribution {
            tag: tag.clone(),
            weight,
            area_ratio,
            contribution,
        });
    }

    debug_assert!((0.0..=1.0 + 1e-12).contains(&delta));
    Ok(RegionReport {
        region_id,
        delta: delta.min(1.0),
        breakdown,
        image_ids: images.iter().map(|i| i.image_id.clone()).collect(),
        evaluated_at: evaluated_at.into(),
    })
}

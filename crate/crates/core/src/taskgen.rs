//! Task generation: region tiling with a half-shift layer, assembly of
//! mixed tagged/fresh tasks, and the trusted-group bootstrap.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{uuid_from_bytes, ImageId, PlayerId, RegionId, TaskId};
use crate::rating::PlayerAnnotation;
use crate::tags::{TagId, TagRegistry};

/// Which tiling layer a tile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileLayer {
    Base,
    HalfShifted,
}

/// One tile cut from a monitoring region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tile {
    pub tile_id: String,
    pub region_id: RegionId,
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub layer: TileLayer,
}

/// Cuts a region into base tiles that partition it exactly, plus a
/// half-shifted layer covering the interior seams so ROIs straddling a
/// cut line still land fully inside some tile. Edge tiles shrink to fit;
/// shifted tiles are clipped to the region and only emitted around
/// interior grid crossings. A tile size at least as large as the region
/// degenerates to a single tile with no shifted layer.
pub fn tile_region(
    region_id: &RegionId,
    region_w: u32,
    region_h: u32,
    tile_w: u32,
    tile_h: u32,
    seed: u64,
) -> Result<Vec<Tile>> {
    if tile_w == 0 || tile_h == 0 || region_w == 0 || region_h == 0 {
        return Err(Error::InvalidTileSize { tile_w, tile_h });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tile = |x: u32, y: u32, w: u32, h: u32, layer: TileLayer| Tile {
        tile_id: uuid_from_bytes(rng.gen()),
        region_id: region_id.clone(),
        x,
        y,
        width: w,
        height: h,
        layer,
    };

    let mut tiles = Vec::new();
    let mut y = 0;
    while y < region_h {
        let h = tile_h.min(region_h - y);
        let mut x = 0;
        while x < region_w {
            let w = tile_w.min(region_w - x);
            tiles.push(tile(x, y, w, h, TileLayer::Base));
            x += tile_w;
        }
        y += tile_h;
    }

    // One shifted tile per interior grid crossing, centered on it.
    let mut cy = tile_h;
    while cy < region_h {
        let mut cx = tile_w;
        while cx < region_w {
            let left = cx - tile_w / 2;
            let top = cy - tile_h / 2;
            let right = (cx + tile_w - tile_w / 2).min(region_w);
            let bottom = (cy + tile_h - tile_h / 2).min(region_h);
            tiles.push(tile(left, top, right - left, bottom - top, TileLayer::HalfShifted));
            cx += tile_w;
        }
        cy += tile_h;
    }

    Ok(tiles)
}

/// Where a task image came from. Never exposed to players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    /// Already reliably tagged; used to rate the player.
    Tagged,
    /// Fresh satellite image with no annotations yet.
    Fresh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskImage {
    pub image_id: ImageId,
    pub source: ImageSource,
}

/// A generated task: 2n images in seeded random order, half tagged and
/// half fresh. The per-image source stays server-side; serialize
/// [`PlayerTask::player_view`] for anything player-facing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlayerTask {
    pub task_id: TaskId,
    pub player_id: PlayerId,
    pub images: Vec<TaskImage>,
}

/// The player-facing payload: image ids only, no provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlayerTaskView {
    pub task_id: TaskId,
    pub images: Vec<ImageId>,
}

impl PlayerTask {
    pub fn player_view(&self) -> PlayerTaskView {
        PlayerTaskView {
            task_id: self.task_id.clone(),
            images: self.images.iter().map(|i| i.image_id.clone()).collect(),
        }
    }

    pub fn tagged_images(&self) -> impl Iterator<Item = &ImageId> {
        self.images
            .iter()
            .filter(|i| i.source == ImageSource::Tagged)
            .map(|i| &i.image_id)
    }
}

/// Samples n tagged and n fresh images without replacement and shuffles
/// them. Deterministic for a fixed seed. Errors name the short pool so a
/// cold start is diagnosable.
pub fn generate_task(
    player_id: &PlayerId,
    tagged_pool: &[ImageId],
    fresh_pool: &[ImageId],
    n: usize,
    seed: u64,
) -> Result<PlayerTask> {
    if n == 0 {
        return Err(Error::InvalidParameter("task half-size n must be >= 1".into()));
    }
    if tagged_pool.len() < n {
        return Err(Error::PoolTooSmall {
            pool: "tagged",
            need: n,
            have: tagged_pool.len(),
        });
    }
    if fresh_pool.len() < n {
        return Err(Error::PoolTooSmall {
            pool: "fresh",
            need: n,
            have: fresh_pool.len(),
        });
    }
    if let Some(dup) = tagged_pool.iter().find(|t| fresh_pool.contains(t)) {
        return Err(Error::OverlappingPools {
            image: dup.to_string(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task_id = TaskId::new(uuid_from_bytes(rng.gen()));
    let mut images: Vec<TaskImage> = Vec::with_capacity(2 * n);
    for idx in rand::seq::index::sample(&mut rng, tagged_pool.len(), n) {
        images.push(TaskImage {
            image_id: tagged_pool[idx].clone(),
            source: ImageSource::Tagged,
        });
    }
    for idx in rand::seq::index::sample(&mut rng, fresh_pool.len(), n) {
        images.push(TaskImage {
            image_id: fresh_pool[idx].clone(),
            source: ImageSource::Fresh,
        });
    }
    images.shuffle(&mut rng);

    Ok(PlayerTask {
        task_id,
        player_id: player_id.clone(),
        images,
    })
}

/// State produced by the cold-start bootstrap: the initial trusted group,
/// their uniform trust value, and the seeded tag registry.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub trusted: Vec<PlayerId>,
    pub initial_trust: f64,
    pub registry: TagRegistry,
}

/// Bootstraps the system from a trusted seed group and a predefined tag
/// list. The group may be as small as one player; trust starts uniform at
/// 1/n. The registry opens with the predefined tags, then tallies every
/// seed selection (seed players are trusted by definition).
pub fn init_trusted_group(
    seed_annotations: &[PlayerAnnotation],
    predefined_tags: &[TagId],
) -> Result<Bootstrap> {
    if predefined_tags.is_empty() {
        return Err(Error::EmptyPredefinedTags);
    }
    let mut trusted: Vec<PlayerId> = Vec::new();
    for a in seed_annotations {
        if !trusted.contains(&a.player) {
            trusted.push(a.player.clone());
        }
    }
    if trusted.is_empty() {
        return Err(Error::EmptySeedGroup);
    }

    let mut registry = TagRegistry::new();
    for tag in predefined_tags {
        registry.insert_tag(tag.clone());
    }
    let mut any_selection = false;
    for a in seed_annotations {
        for roi in &a.rois {
            for tag in roi.tags() {
                registry.insert_tag(tag.clone());
                registry.record_selection(tag)?;
                any_selection = true;
            }
        }
    }
    if !any_selection {
        return Err(Error::NoSeedTags);
    }

    Ok(Bootstrap {
        initial_trust: 1.0 / trusted.len() as f64,
        trusted,
        registry,
    })
}

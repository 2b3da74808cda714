//! Glue between the stores and the rating model: bootstrap, case
//! collection for a task round, the accept/reject flow, and region
//! snapshots for disaster evaluation.

use serde::{Deserialize, Serialize};

use crate::disaster::RegionImage;
use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, PlayerId, RegionId, TaskId};
use crate::rating::{
    detect_malicious, merge_new_tags, DetectionVerdict, DetectorConfig, ImageCase,
    PlayerAnnotation, TagMergeOutcome,
};
use crate::store::{
    promote_reliable, Manifest, PlayerDb, PromotionStats, ResultDb, TaskEntry, TaskLog,
    TrustedFile,
};
use crate::tags::{TagId, TagRegistry};
use crate::taskgen::{init_trusted_group, PlayerTask};

/// Everything the pipeline reads and writes, as one in-memory snapshot.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub playerdb: PlayerDb,
    pub resultdb: ResultDb,
    pub manifest: Manifest,
    pub registry: TagRegistry,
    pub trusted: TrustedFile,
    pub tasks: TaskLog,
}

/// Converts a stored task entry into a rating annotation, clamping every
/// ROI to the image bounds from the manifest. Out-of-bounds parts are the
/// input device's problem, not the model's; fully outside ROIs are
/// dropped with a warning.
pub fn entry_to_annotation(
    entry: &TaskEntry,
    player: &PlayerId,
    manifest: &Manifest,
) -> Result<PlayerAnnotation> {
    let image = ImageId::new(entry.image_id.clone());
    let dims = manifest.get(&image).ok_or_else(|| Error::UnknownId {
        kind: "image",
        id: image.to_string(),
    })?;
    let mut rois = Vec::with_capacity(entry.rois.len());
    for record in &entry.rois {
        let roi = record.to_roi()?;
        match roi.clamp_to(dims.width, dims.height) {
            Some((clamped, changed)) => {
                if changed {
                    log::warn!(
                        "clamped ROI to {}x{} bounds on image {}",
                        dims.width,
                        dims.height,
                        image
                    );
                }
                rois.push(clamped);
            }
            None => log::warn!("dropped ROI fully outside image {}", image),
        }
    }
    Ok(PlayerAnnotation::new(player.clone(), image, rois))
}

/// Bootstraps a system from seed player records and the predefined tag
/// list. Seed players form the trusted group; their annotations are
/// stamped reliable and copied into the result store.
pub fn initialize(
    seed_records: Vec<crate::store::PlayerRecord>,
    predefined_tags: &[TagId],
    manifest: Manifest,
) -> Result<SystemState> {
    let mut playerdb = PlayerDb::default();
    let mut annotations = Vec::new();
    for record in seed_records {
        let player = PlayerId::new(record.player_id.clone());
        for entry in &record.tasks {
            annotations.push(entry_to_annotation(entry, &player, &manifest)?);
        }
        playerdb.upsert(record);
    }
    let bootstrap = init_trusted_group(&annotations, predefined_tags)?;

    let mut resultdb = ResultDb::default();
    for player in &bootstrap.trusted {
        let images: Vec<ImageId> = playerdb
            .get(player)
            .map(|r| r.tasks.iter().map(|t| ImageId::new(t.image_id.clone())).collect())
            .unwrap_or_default();
        promote_reliable(&mut playerdb, &mut resultdb, &manifest, player, &images)?;
    }

    Ok(SystemState {
        playerdb,
        resultdb,
        manifest,
        registry: bootstrap.registry,
        trusted: TrustedFile::new(bootstrap.trusted),
        tasks: TaskLog::default(),
    })
}

/// Builds the detection cases for one task round: for every tagged image,
/// the trusted players' reliable annotations plus the candidate's latest
/// submission, if any.
pub fn collect_cases(
    state: &SystemState,
    player_id: &PlayerId,
    task: &PlayerTask,
) -> Result<Vec<ImageCase>> {
    let mut cases = Vec::new();
    for image in task.tagged_images() {
        let mut trusted = Vec::new();
        for trusted_player in &state.trusted.players {
            if trusted_player == player_id {
                continue;
            }
            if let Some(entry) = state.playerdb.latest_entry(trusted_player, image) {
                if entry.is_reliable() && !entry.rois.is_empty() {
                    trusted.push(entry_to_annotation(entry, trusted_player, &state.manifest)?);
                }
            }
        }
        let candidate = state
            .playerdb
            .latest_entry(player_id, image)
            .map(|entry| entry_to_annotation(entry, player_id, &state.manifest))
            .transpose()?;
        cases.push(ImageCase {
            image: image.clone(),
            trusted,
            candidate,
        });
    }
    Ok(cases)
}

/// Result of rating one task round end to end.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub verdict: DetectionVerdict,
    pub tag_merge: TagMergeOutcome,
    /// Final call after the tag policy; this is what gates promotion.
    pub accepted: bool,
    pub promotion: PromotionStats,
}

/// Rates a player's task round and, on acceptance, merges their new tags,
/// promotes the round, tallies tag counts, and adds the player to the
/// trusted group. A player already in the trusted group is rejected up
/// front: rounds are rated once.
pub fn rate_player_round(
    state: &mut SystemState,
    player_id: &PlayerId,
    task_id: &TaskId,
    config: &DetectorConfig,
) -> Result<RoundOutcome> {
    let task = state
        .tasks
        .get(task_id)
        .ok_or_else(|| Error::UnknownId {
            kind: "task",
            id: task_id.to_string(),
        })?
        .clone();
    if &task.player_id != player_id {
        return Err(Error::InvalidParameter(format!(
            "task {task_id} belongs to player {}, not {player_id}",
            task.player_id
        )));
    }
    if state.trusted.contains(player_id) {
        return Err(Error::InvalidParameter(format!(
            "player {player_id} is already trusted; their rounds are reliable by definition"
        )));
    }
    if state.playerdb.get(player_id).is_none() {
        return Err(Error::UnknownId {
            kind: "player",
            id: player_id.to_string(),
        });
    }

    let cases = collect_cases(state, player_id, &task)?;
    let verdict = detect_malicious(player_id, &cases, &state.registry, config)?;

    let round_images: Vec<ImageId> = task.images.iter().map(|i| i.image_id.clone()).collect();
    let mut round_annotations = Vec::new();
    for image in &round_images {
        if let Some(entry) = state.playerdb.latest_entry(player_id, image) {
            round_annotations.push(entry_to_annotation(entry, player_id, &state.manifest)?);
        }
    }

    let tag_merge = merge_new_tags(&verdict, &round_annotations, &mut state.registry);
    let accepted = verdict.reliable && !tag_merge.drops_round();

    let mut promotion = PromotionStats::default();
    if accepted {
        promotion = promote_reliable(
            &mut state.playerdb,
            &mut state.resultdb,
            &state.manifest,
            player_id,
            &round_images,
        )?;
        for annotation in &round_annotations {
            for roi in &annotation.rois {
                for tag in roi.tags() {
                    state.registry.record_selection(tag)?;
                }
            }
        }
        state.trusted.add(player_id.clone());
    }

    Ok(RoundOutcome {
        verdict,
        tag_merge,
        accepted,
        promotion,
    })
}

/// Snapshot of a region's reliable annotations for disaster evaluation.
pub fn region_snapshot(state: &SystemState, region_id: &RegionId) -> Result<Vec<RegionImage>> {
    let entries = state.manifest.images_of_region(region_id);
    if entries.is_empty() {
        return Err(Error::UnknownId {
            kind: "region",
            id: region_id.to_string(),
        });
    }
    let mut images = Vec::with_capacity(entries.len());
    for entry in entries {
        let image_id = ImageId::new(entry.image_id.clone());
        let mut rois: Vec<Roi> = Vec::new();
        for history in state.resultdb.entries_for_image(&image_id) {
            for record in &history.rois {
                let roi = record.to_roi()?;
                if let Some((clamped, _)) = roi.clamp_to(entry.width, entry.height) {
                    rois.push(clamped);
                }
            }
        }
        images.push(RegionImage {
            image_id,
            width: entry.width,
            height: entry.height,
            rois,
        });
    }
    Ok(images)
}

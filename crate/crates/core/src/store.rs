//! JSON document stores: the player database (raw gaming data), the
//! result database (reliable annotations per region), plus the image
//! manifest, trusted-group and task-log documents the pipeline needs.
//!
//! Each database is one JSON document with a top-level array. Field names
//! are frozen; writes replace the whole file atomically (write to a
//! sibling temp file, then rename). The CLI is the single writer; readers
//! work on plain value snapshots.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, PlayerId, RegionId, TaskId};
use crate::rating::PlayerAnnotation;
use crate::tags::TagId;
use crate::taskgen::PlayerTask;

/// One ROI as stored on disk. Field order matters for readable diffs;
/// names are part of the frozen schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiRecord {
    pub x: i64,
    pub y: i64,
    pub height: u32,
    pub width: u32,
    pub tags: Vec<String>,
}

impl RoiRecord {
    pub fn to_roi(&self) -> Result<Roi> {
        Roi::new(
            self.x,
            self.y,
            self.width,
            self.height,
            self.tags.iter().map(|t| TagId::new(t.clone())),
        )
    }

    pub fn from_roi(roi: &Roi) -> Self {
        Self {
            x: roi.x(),
            y: roi.y(),
            height: roi.height(),
            width: roi.width(),
            tags: roi.tags().iter().map(|t| t.as_str().to_owned()).collect(),
        }
    }
}

/// One image result inside a player record. `reliable` stays absent until
/// the round has been rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub image_id: String,
    pub image_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliable: Option<bool>,
    #[serde(rename = "ROIs")]
    pub rois: Vec<RoiRecord>,
}

impl TaskEntry {
    pub fn is_reliable(&self) -> bool {
        self.reliable.unwrap_or(false)
    }

    pub fn to_annotation(&self, player: &PlayerId) -> Result<PlayerAnnotation> {
        let rois = self
            .rois
            .iter()
            .map(RoiRecord::to_roi)
            .collect::<Result<Vec<_>>>()?;
        Ok(PlayerAnnotation::new(
            player.clone(),
            ImageId::new(self.image_id.clone()),
            rois,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerRecord {
    pub player_id: String,
    pub tasks: Vec<TaskEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryEntry {
    pub image_id: String,
    pub image_at: String,
    #[serde(rename = "ROIs")]
    pub rois: Vec<RoiRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub region_id: String,
    pub history: Vec<HistoryEntry>,
}

/// The player database: a top-level array of player records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlayerDb {
    pub records: Vec<PlayerRecord>,
}

impl PlayerDb {
    pub fn load(path: &Path) -> Result<Self> {
        let value: Value = load_json(path)?;
        let records = validate_player_db(&value)?;
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json_atomic(path, &self.records)
    }

    pub fn get(&self, player_id: &PlayerId) -> Option<&PlayerRecord> {
        self.records.iter().find(|r| r.player_id == player_id.as_str())
    }

    pub fn get_mut(&mut self, player_id: &PlayerId) -> Option<&mut PlayerRecord> {
        self.records
            .iter_mut()
            .find(|r| r.player_id == player_id.as_str())
    }

    /// Validates a record given as JSON and inserts it, replacing any
    /// existing record with the same player id.
    pub fn persist(&mut self, record: &Value) -> Result<()> {
        validate_player_record(record, "")?;
        let record: PlayerRecord = serde_json::from_value(record.clone())?;
        self.upsert(record);
        Ok(())
    }

    pub fn upsert(&mut self, record: PlayerRecord) {
        match self
            .records
            .iter_mut()
            .find(|r| r.player_id == record.player_id)
        {
            Some(existing) => *existing = record,
            None => self.records.push(record),
        }
    }

    /// The latest task entry of a player for an image, if any.
    pub fn latest_entry(&self, player_id: &PlayerId, image_id: &ImageId) -> Option<&TaskEntry> {
        self.get(player_id)?
            .tasks
            .iter()
            .rev()
            .find(|t| t.image_id == image_id.as_str())
    }
}

/// The result database: a top-level array of per-region histories holding
/// only reliable annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultDb {
    pub records: Vec<ResultRecord>,
}

impl ResultDb {
    pub fn load(path: &Path) -> Result<Self> {
        let value: Value = load_json(path)?;
        let records = validate_result_db(&value)?;
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json_atomic(path, &self.records)
    }

    pub fn region(&self, region_id: &RegionId) -> Option<&ResultRecord> {
        self.records
            .iter()
            .find(|r| r.region_id == region_id.as_str())
    }

    /// Distinct image ids with at least one reliable entry, in first
    /// appearance order. This is the tagged pool for task generation.
    pub fn tagged_image_ids(&self) -> Vec<ImageId> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for record in &self.records {
            for entry in &record.history {
                if seen.insert(entry.image_id.as_str()) {
                    out.push(ImageId::new(entry.image_id.clone()));
                }
            }
        }
        out
    }

    pub fn entries_for_image(&self, image_id: &ImageId) -> Vec<&HistoryEntry> {
        self.records
            .iter()
            .flat_map(|r| r.history.iter())
            .filter(|e| e.image_id == image_id.as_str())
            .collect()
    }

    /// Appends a history entry unless an identical one already exists;
    /// returns whether anything was added. Creates the region record on
    /// first use.
    pub fn append_history(&mut self, region_id: &RegionId, entry: HistoryEntry) -> bool {
        let record = match self
            .records
            .iter_mut()
            .find(|r| r.region_id == region_id.as_str())
        {
            Some(r) => r,
            None => {
                self.records.push(ResultRecord {
                    region_id: region_id.as_str().to_owned(),
                    history: Vec::new(),
                });
                self.records.last_mut().unwrap()
            }
        };
        if record.history.contains(&entry) {
            return false;
        }
        record.history.push(entry);
        true
    }
}

/// One image known to the system: where it lives, which region owns it,
/// and its pixel dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    pub region_id: String,
    pub image_at: String,
    pub width: u32,
    pub height: u32,
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            entries: load_json(path)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json_atomic(path, &self.entries)
    }

    pub fn get(&self, image_id: &ImageId) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.image_id == image_id.as_str())
    }

    pub fn region_of(&self, image_id: &ImageId) -> Result<RegionId> {
        self.get(image_id)
            .map(|e| RegionId::new(e.region_id.clone()))
            .ok_or_else(|| Error::UnknownRegion {
                image: image_id.to_string(),
            })
    }

    pub fn image_ids(&self) -> Vec<ImageId> {
        self.entries
            .iter()
            .map(|e| ImageId::new(e.image_id.clone()))
            .collect()
    }

    pub fn images_of_region(&self, region_id: &RegionId) -> Vec<&ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.region_id == region_id.as_str())
            .collect()
    }
}

/// The trusted-player roster, persisted next to the databases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustedFile {
    pub version: u32,
    pub players: Vec<PlayerId>,
}

pub const TRUSTED_FILE_VERSION: u32 = 1;

impl TrustedFile {
    pub fn new(players: Vec<PlayerId>) -> Self {
        Self {
            version: TRUSTED_FILE_VERSION,
            players,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: TrustedFile = load_json(path)?;
        if file.version != TRUSTED_FILE_VERSION {
            return Err(Error::UnsupportedVersion {
                found: file.version,
                expected: TRUSTED_FILE_VERSION,
            });
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json_atomic(path, self)
    }

    pub fn contains(&self, player: &PlayerId) -> bool {
        self.players.contains(player)
    }

    pub fn add(&mut self, player: PlayerId) -> bool {
        if self.contains(&player) {
            return false;
        }
        self.players.push(player);
        true
    }
}

/// Server-side log of generated tasks, including each image's provenance.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskLog {
    pub tasks: Vec<PlayerTask>,
}

impl TaskLog {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self {
            tasks: load_json(path)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_json_atomic(path, &self.tasks)
    }

    pub fn get(&self, task_id: &TaskId) -> Option<&PlayerTask> {
        self.tasks.iter().find(|t| &t.task_id == task_id)
    }

    pub fn push(&mut self, task: PlayerTask) {
        self.tasks.push(task);
    }
}

/// How many store entries a promotion touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromotionStats {
    pub entries_marked: usize,
    pub history_appended: usize,
}

/// Marks a rated round reliable and copies its annotations into the
/// owning regions' histories. One verdict stamps every task entry of the
/// round. Entries without ROIs are stamped but add no history; identical
/// history entries are not duplicated, so promotion is idempotent.
pub fn promote_reliable(
    playerdb: &mut PlayerDb,
    resultdb: &mut ResultDb,
    manifest: &Manifest,
    player_id: &PlayerId,
    round_images: &[ImageId],
) -> Result<PromotionStats> {
    // Resolve regions up front so a bad manifest leaves the stores untouched.
    let mut regions = Vec::with_capacity(round_images.len());
    for image in round_images {
        regions.push(manifest.region_of(image)?);
    }

    let record = playerdb
        .get_mut(player_id)
        .ok_or_else(|| Error::UnknownId {
            kind: "player",
            id: player_id.to_string(),
        })?;

    let mut stats = PromotionStats::default();
    for (image, region) in round_images.iter().zip(&regions) {
        let Some(entry) = record
            .tasks
            .iter_mut()
            .rev()
            .find(|t| t.image_id == image.as_str())
        else {
            continue;
        };
        if entry.reliable != Some(true) {
            entry.reliable = Some(true);
            stats.entries_marked += 1;
        }
        if entry.rois.is_empty() {
            continue;
        }
        let appended = resultdb.append_history(
            region,
            HistoryEntry {
                image_id: entry.image_id.clone(),
                image_at: entry.image_at.clone(),
                rois: entry.rois.clone(),
            },
        );
        if appended {
            stats.history_appended += 1;
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

fn violation(path: &str, message: impl Into<String>) -> Error {
    Error::SchemaViolation {
        path: if path.is_empty() { "<root>".into() } else { path.into() },
        message: message.into(),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| violation(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| violation(path, "expected an array"))
}

fn as_string<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| violation(path, "expected a string"))
}

fn field<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| violation(&join(path, key), "missing required field"))
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_owned()
    } else {
        format!("{path}.{key}")
    }
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<()> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(violation(&join(path, key), "unknown field"));
        }
    }
    Ok(())
}

fn validate_roi(v: &Value, path: &str) -> Result<()> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["x", "y", "height", "width", "tags"])?;
    for key in ["x", "y"] {
        let p = join(path, key);
        field(obj, path, key)?
            .as_i64()
            .ok_or_else(|| violation(&p, "expected an integer"))?;
    }
    for key in ["height", "width"] {
        let p = join(path, key);
        let n = field(obj, path, key)?
            .as_u64()
            .ok_or_else(|| violation(&p, "expected a non-negative integer"))?;
        if n == 0 || n > u64::from(u32::MAX) {
            return Err(violation(&p, "expected a positive 32-bit dimension"));
        }
    }
    let tags_path = join(path, "tags");
    let tags = as_array(field(obj, path, "tags")?, &tags_path)?;
    let mut seen = BTreeSet::new();
    for (i, tag) in tags.iter().enumerate() {
        let p = format!("{tags_path}[{i}]");
        let s = as_string(tag, &p)?;
        if s.is_empty() {
            return Err(violation(&p, "tag must be non-empty"));
        }
        if !seen.insert(s) {
            return Err(violation(&p, format!("duplicate tag {s:?}")));
        }
    }
    Ok(())
}

fn validate_rois(obj: &Map<String, Value>, path: &str) -> Result<()> {
    let rois_path = join(path, "ROIs");
    let rois = as_array(field(obj, path, "ROIs")?, &rois_path)?;
    for (i, roi) in rois.iter().enumerate() {
        validate_roi(roi, &format!("{rois_path}[{i}]"))?;
    }
    Ok(())
}

/// Validates one player record against the frozen schema. `path` prefixes
/// reported violation paths; pass "" when validating a lone record.
pub fn validate_player_record(v: &Value, path: &str) -> Result<()> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["player_id", "tasks"])?;
    let id_path = join(path, "player_id");
    let id = as_string(field(obj, path, "player_id")?, &id_path)?;
    if id.is_empty() {
        return Err(violation(&id_path, "player_id must be non-empty"));
    }
    let tasks_path = join(path, "tasks");
    let tasks = as_array(field(obj, path, "tasks")?, &tasks_path)?;
    for (i, task) in tasks.iter().enumerate() {
        let tpath = format!("{tasks_path}[{i}]");
        let tobj = as_object(task, &tpath)?;
        check_keys(tobj, &tpath, &["image_id", "image_at", "reliable", "ROIs"])?;
        as_string(field(tobj, &tpath, "image_id")?, &join(&tpath, "image_id"))?;
        as_string(field(tobj, &tpath, "image_at")?, &join(&tpath, "image_at"))?;
        if let Some(r) = tobj.get("reliable") {
            if !r.is_boolean() {
                return Err(violation(&join(&tpath, "reliable"), "expected a boolean"));
            }
        }
        validate_rois(tobj, &tpath)?;
    }
    Ok(())
}

/// Validates one result record against the frozen schema.
pub fn validate_result_record(v: &Value, path: &str) -> Result<()> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["region_id", "history"])?;
    let id_path = join(path, "region_id");
    let id = as_string(field(obj, path, "region_id")?, &id_path)?;
    if id.is_empty() {
        return Err(violation(&id_path, "region_id must be non-empty"));
    }
    let hist_path = join(path, "history");
    let history = as_array(field(obj, path, "history")?, &hist_path)?;
    for (i, entry) in history.iter().enumerate() {
        let epath = format!("{hist_path}[{i}]");
        let eobj = as_object(entry, &epath)?;
        check_keys(eobj, &epath, &["image_id", "image_at", "ROIs"])?;
        as_string(field(eobj, &epath, "image_id")?, &join(&epath, "image_id"))?;
        as_string(field(eobj, &epath, "image_at")?, &join(&epath, "image_at"))?;
        validate_rois(eobj, &epath)?;
    }
    Ok(())
}

fn validate_player_db(v: &Value) -> Result<Vec<PlayerRecord>> {
    let records = as_array(v, "")?;
    for (i, record) in records.iter().enumerate() {
        validate_player_record(record, &format!("[{i}]"))?;
    }
    Ok(serde_json::from_value(v.clone())?)
}

fn validate_result_db(v: &Value) -> Result<Vec<ResultRecord>> {
    let records = as_array(v, "")?;
    for (i, record) in records.iter().enumerate() {
        validate_result_record(record, &format!("[{i}]"))?;
    }
    Ok(serde_json::from_value(v.clone())?)
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Serializes to a sibling temp file and renames it over the target, so a
/// crash never leaves a half-written document behind.
pub fn save_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

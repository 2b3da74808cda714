//! Tag vocabulary, one-hot tag vectors, and tag-frequency weight vectors.
//!
//! The registry keeps tags in first-appearance order so vector components
//! stay aligned across runs. Selection counts only grow when a player has
//! been accepted as reliable, which keeps the weights immune to inflation
//! by rejected players.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque tag identifier, e.g. `"burning building"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(String);

impl TagId {
    pub fn new(id: impl Into<String>) -> Self {
        TagId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for TagId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TagId {
    fn from(s: &str) -> Self {
        TagId(s.to_owned())
    }
}

/// One-hot indicator of the tags an ROI carries, over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TagVector(Vec<f64>);

impl TagVector {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Non-negative per-tag weights. A system weight vector sums to 1; an
/// image weight vector is a projection of it and sums to at most 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates that every component lies in `[0, 1]` and the sum does
    /// not exceed 1 (within 1e-12).
    pub fn from_components(components: Vec<f64>) -> Result<Self> {
        for &c in &components {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidParameter(format!(
                    "weight component {c} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = components.iter().sum();
        if sum > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weight components sum to {sum} > 1"
            )));
        }
        Ok(WeightVector(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// One-hot encodes `selected` against `vocab`. Component `l` is 1 iff
/// `vocab[l]` is selected.
pub fn tag_vector<'a>(
    selected: impl IntoIterator<Item = &'a TagId>,
    vocab: &[TagId],
) -> Result<TagVector> {
    let mut components = vec![0.0; vocab.len()];
    for tag in selected {
        match vocab.iter().position(|v| v == tag) {
            Some(idx) => components[idx] = 1.0,
            None => {
                return Err(Error::UnknownTag {
                    tag: tag.as_str().to_owned(),
                })
            }
        }
    }
    Ok(TagVector(components))
}

/// Normalizes ordered selection counts into the system weight vector:
/// component i is `count_i / total`.
pub fn system_weight_vector(counts: &[(TagId, u64)]) -> Result<WeightVector> {
    let total: u64 = counts.iter().map(|(_, c)| *c).sum();
    if total == 0 {
        return Err(Error::EmptyTagCounts);
    }
    let components = counts
        .iter()
        .map(|(_, c)| *c as f64 / total as f64)
        .collect();
    Ok(WeightVector(components))
}

/// Projects the system weight vector onto `image_tags`, preserving their
/// order. Every image tag must exist in the system vocabulary.
pub fn image_weight_vector(
    system: &WeightVector,
    vocab: &[TagId],
    image_tags: &[TagId],
) -> Result<WeightVector> {
    debug_assert_eq!(system.dim(), vocab.len());
    let mut components = Vec::with_capacity(image_tags.len());
    for tag in image_tags {
        let idx = vocab
            .iter()
            .position(|v| v == tag)
            .ok_or_else(|| Error::UnknownTag {
                tag: tag.as_str().to_owned(),
            })?;
        components.push(system.components()[idx]);
    }
    Ok(WeightVector(components))
}

/// Tag vocabulary plus per-tag selection counts, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagRegistry {
    tags: IndexMap<TagId, u64>,
}

impl TagRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tag with count 0 if absent; returns true when it was new.
    pub fn insert_tag(&mut self, tag: TagId) -> bool {
        match self.tags.entry(tag) {
            indexmap::map::Entry::Occupied(_) => false,
            indexmap::map::Entry::Vacant(e) => {
                e.insert(0);
                true
            }
        }
    }

    pub fn contains(&self, tag: &TagId) -> bool {
        self.tags.contains_key(tag)
    }

    pub fn count(&self, tag: &TagId) -> Option<u64> {
        self.tags.get(tag).copied()
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn vocabulary(&self) -> Vec<TagId> {
        self.tags.keys().cloned().collect()
    }

    pub fn counts(&self) -> Vec<(TagId, u64)> {
        self.tags.iter().map(|(t, c)| (t.clone(), *c)).collect()
    }

    /// Counts one selection of `tag`. The tag must already be in the
    /// vocabulary; recording an unknown tag is a merge-policy bug upstream.
    pub fn record_selection(&mut self, tag: &TagId) -> Result<()> {
        match self.tags.get_mut(tag) {
            Some(c) => {
                *c += 1;
                Ok(())
            }
            None => Err(Error::UnknownTag {
                tag: tag.as_str().to_owned(),
            }),
        }
    }

    pub fn system_weights(&self) -> Result<WeightVector> {
        system_weight_vector(&self.counts())
    }

    /// Image weight vector for the given image tags, which must all be
    /// known. Order of `image_tags` is preserved.
    pub fn image_weights(&self, image_tags: &[TagId]) -> Result<WeightVector> {
        let vocab = self.vocabulary();
        let system = self.system_weights()?;
        image_weight_vector(&system, &vocab, image_tags)
    }

    /// Keeps only tags present in the vocabulary, sorted in vocabulary
    /// order and deduplicated. Used to order an image's tag set.
    pub fn known_tags_in_order<'a>(
        &self,
        tags: impl IntoIterator<Item = &'a TagId>,
    ) -> Vec<TagId> {
        let mut positions: Vec<usize> = tags
            .into_iter()
            .filter_map(|t| self.tags.get_index_of(t))
            .collect();
        positions.sort_unstable();
        positions.dedup();
        positions
            .into_iter()
            .map(|i| self.tags.get_index(i).unwrap().0.clone())
            .collect()
    }
}

/// On-disk form of the registry, versioned alongside the result store.
#[derive(Debug, Serialize, Deserialize)]
pub struct TagRegistryFile {
    pub version: u32,
    pub tags: Vec<TagCountEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TagCountEntry {
    pub tag: TagId,
    pub count: u64,
}

pub const TAG_REGISTRY_VERSION: u32 = 1;

impl TagRegistry {
    pub fn to_file(&self) -> TagRegistryFile {
        TagRegistryFile {
            version: TAG_REGISTRY_VERSION,
            tags: self
                .tags
                .iter()
                .map(|(t, c)| TagCountEntry {
                    tag: t.clone(),
                    count: *c,
                })
                .collect(),
        }
    }

    pub fn from_file(file: TagRegistryFile) -> Result<Self> {
        if file.version != TAG_REGISTRY_VERSION {
            return Err(Error::UnsupportedVersion {
                found: file.version,
                expected: TAG_REGISTRY_VERSION,
            });
        }
        let mut tags = IndexMap::new();
        for entry in file.tags {
            if tags.insert(entry.tag.clone(), entry.count).is_some() {
                return Err(Error::DuplicateTag {
                    tag: entry.tag.as_str().to_owned(),
                });
            }
        }
        Ok(TagRegistry { tags })
    }
}

//! Synthetic evaluation: generate honest players (noisy copies of trusted
//! annotations, since pointing scatter around a target is Gaussian) and
//! malicious players (uniform random boxes and tags), run detection over
//! everyone, and score the detector with an ROC curve.
//!
//! The positive class is "malicious": a true positive is a malicious
//! player the detector rejects, a false positive is an honest player it
//! rejects. All generators derive their randomness from per-player
//! streams of one master seed, so results do not depend on evaluation
//! order.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Roi;
use crate::ids::{ImageId, PlayerId};
use crate::pipeline::{entry_to_annotation, initialize, SystemState};
use crate::rating::{detect_malicious, DetectorConfig, ImageCase, PlayerAnnotation};
use crate::store::{Manifest, ManifestEntry, PlayerRecord, RoiRecord, TaskEntry};
use crate::tags::TagId;
use crate::taskgen::generate_task;

/// Gaussian perturbation applied independently to x, y, width and height
/// of a copied ROI. `sigma` is the standard deviation in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }
}

/// Zero-mean Gaussian maximum-likelihood estimate of the noise scale:
/// `sqrt(mean(eps^2))` over observed deviations from the true points.
pub fn estimate_sigma_mle(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            got: samples.len(),
        });
    }
    let mean_sq = samples.iter().map(|e| e * e).sum::<f64>() / samples.len() as f64;
    Ok(mean_sq.sqrt())
}

/// Perturbs every trusted ROI of an image with the noise model and
/// resamples its tags: each trusted tag survives independently with
/// `keep_prob`, and at least one always survives so the copy stays a
/// plausible submission.
pub fn synth_honest_rois(
    trusted: &[Roi],
    noise: &NoiseModel,
    keep_prob: f64,
    rng: &mut impl Rng,
) -> Vec<Roi> {
    let normal = Normal::new(0.0, noise.sigma.max(f64::MIN_POSITIVE)).unwrap();
    let eps = |rng: &mut dyn rand::RngCore| {
        if noise.sigma == 0.0 {
            0.0
        } else {
            normal.sample(rng)
        }
    };
    trusted
        .iter()
        .map(|roi| {
            let x = (roi.x() as f64 + eps(rng)).round() as i64;
            let y = (roi.y() as f64 + eps(rng)).round() as i64;
            let h = (roi.height() as f64 + eps(rng)).round().max(1.0) as u32;
            let w = (roi.width() as f64 + eps(rng)).round().max(1.0) as u32;
            let source: Vec<&TagId> = roi.tags().iter().collect();
            let mut kept: Vec<TagId> = source
                .iter()
                .filter(|_| rng.gen::<f64>() < keep_prob)
                .map(|t| (*t).clone())
                .collect();
            if kept.is_empty() {
                if let Some(tag) = source.choose(rng) {
                    kept.push((*tag).clone());
                }
            }
            Roi::new(x, y, w, h, kept).expect("dimensions floored at 1")
        })
        .collect()
}

/// Uniform random boxes with uniform random tags: the model of a player
/// who ignores the image content entirely.
pub fn synth_malicious_rois(
    image_w: u32,
    image_h: u32,
    vocabulary: &[TagId],
    rng: &mut impl Rng,
) -> Vec<Roi> {
    let count = rng.gen_range(1..=3);
    (0..count)
        .map(|_| {
            let max_w = (image_w / 2).max(9);
            let max_h = (image_h / 2).max(9);
            let w = rng.gen_range(8..=max_w).min(image_w);
            let h = rng.gen_range(8..=max_h).min(image_h);
            let x = rng.gen_range(0..=(image_w - w)) as i64;
            let y = rng.gen_range(0..=(image_h - h)) as i64;
            let tag_count = rng.gen_range(1..=3.min(vocabulary.len()));
            let tags = vocabulary
                .choose_multiple(rng, tag_count)
                .cloned()
                .collect::<Vec<_>>();
            Roi::new(x, y, w, h, tags).expect("positive dimensions")
        })
        .collect()
}

/// Whether a simulated player was generated honest or malicious.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerLabel {
    Honest,
    Malicious,
}

/// Detection outcome for one simulated player.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPlayerResult {
    pub player_id: PlayerId,
    pub label: PlayerLabel,
    /// Number of tagged images passed.
    pub counter: usize,
    /// Number of tagged images in the player's task.
    pub tagged_images: usize,
    /// Mean of (trusted mean trust - player trust) over tagged images;
    /// higher means more suspicious. Auto-failed images count as 1.
    pub margin: f64,
}

/// How the ROC curve sweeps the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocMode {
    /// Sweep the acceptance threshold over 0..=n+1 (the two extremes are
    /// the degenerate accept-all and reject-all detectors).
    ThetaSweep,
    /// Sweep a threshold over the continuous trust margin, for a smoother
    /// curve than the integer counter allows.
    MarginScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocPoint {
    /// The swept parameter: the acceptance threshold or the margin cutoff.
    pub parameter: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocResult {
    /// Always "malicious"; spelled out to keep the rates unambiguous.
    pub positive_class: String,
    pub mode: RocMode,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Builds the ROC curve over a labeled population. Needs both classes.
pub fn roc_curve(results: &[SimPlayerResult], mode: RocMode) -> Result<RocResult> {
    let malicious = results.iter().filter(|r| r.label == PlayerLabel::Malicious).count();
    let honest = results.len() - malicious;
    if malicious == 0 || honest == 0 {
        return Err(Error::SingleClassPopulation);
    }

    let points = match mode {
        RocMode::ThetaSweep => {
            let n = results.iter().map(|r| r.tagged_images).max().unwrap_or(0);
            (0..=n + 1)
                .map(|theta| {
                    rates(results, honest, malicious, theta as f64, |r| {
                        r.counter < theta
                    })
                })
                .collect()
        }
        RocMode::MarginScore => {
            let mut cutoffs: Vec<f64> = results.iter().map(|r| r.margin).collect();
            cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
            cutoffs.dedup();
            let mut points = vec![rates(results, honest, malicious, f64::INFINITY, |_| false)];
            for cutoff in cutoffs {
                points.push(rates(results, honest, malicious, cutoff, |r| {
                    r.margin >= cutoff
                }));
            }
            points
        }
    };

    debug_assert!(points.first().map(|p| p.fpr == 0.0 && p.tpr == 0.0) == Some(true));
    debug_assert!(points.last().map(|p| p.fpr == 1.0 && p.tpr == 1.0) == Some(true));

    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0;
    }

    Ok(RocResult {
        positive_class: "malicious".into(),
        mode,
        points,
        auc,
    })
}

fn rates(
    results: &[SimPlayerResult],
    honest: usize,
    malicious: usize,
    parameter: f64,
    rejects: impl Fn(&SimPlayerResult) -> bool,
) -> RocPoint {
    let mut tp = 0usize;
    let mut fp = 0usize;
    for r in results {
        if rejects(r) {
            match r.label {
                PlayerLabel::Malicious => tp += 1,
                PlayerLabel::Honest => fp += 1,
            }
        }
    }
    RocPoint {
        parameter,
        fpr: fp as f64 / honest as f64,
        tpr: tp as f64 / malicious as f64,
    }
}

/// Shuffled-label AUC baseline: the same scores with labels permuted at
/// random, which should hover around chance level.
pub fn shuffled_baseline_auc(results: &[SimPlayerResult], mode: RocMode, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut labels: Vec<PlayerLabel> = results.iter().map(|r| r.label).collect();
    labels.shuffle(&mut rng);
    let shuffled: Vec<SimPlayerResult> = results
        .iter()
        .zip(labels)
        .map(|(r, label)| SimPlayerResult {
            label,
            ..r.clone()
        })
        .collect();
    Ok(roc_curve(&shuffled, mode)?.auc)
}

/// Parameters of a full synthetic evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub tagged_images: usize,
    pub fresh_images: usize,
    pub seed_players: usize,
    pub rois_per_image: usize,
    pub image_width: u32,
    pub image_height: u32,
    /// Nominal ROI side length; actual sizes jitter around it.
    pub roi_side: u32,
    pub tags_per_roi: usize,
    /// Task half-size n: tasks hold n tagged plus n fresh images.
    pub task_half_size: usize,
    pub honest_players: usize,
    pub malicious_players: usize,
    pub noise: NoiseModel,
    pub keep_prob: f64,
    pub detector: DetectorConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tagged_images: 10,
            fresh_images: 10,
            seed_players: 3,
            rois_per_image: 2,
            image_width: 256,
            image_height: 256,
            roi_side: 64,
            tags_per_roi: 2,
            task_half_size: 5,
            honest_players: 100,
            malicious_players: 100,
            noise: NoiseModel { sigma: 3.2 },
            keep_prob: 0.8,
            detector: DetectorConfig::default(),
            seed: 7,
        }
    }
}

pub fn default_vocabulary() -> Vec<TagId> {
    ["fire", "smoke", "flood", "collapsed building", "explosion", "debris"]
        .iter()
        .map(|t| TagId::from(*t))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub players: Vec<SimPlayerResult>,
    pub roc: RocResult,
    pub shuffled_baseline_auc: f64,
}

/// Builds a synthetic world (trusted seed group over a tagged image pool),
/// simulates the requested players against it, and scores detection.
/// The trusted group is held fixed across players so every player faces
/// the same detector.
pub fn run_scenario(config: &ScenarioConfig, mode: RocMode) -> Result<ScenarioOutcome> {
    let state = build_world(config)?;
    let results = simulate_players(&state, config)?;
    let roc = roc_curve(&results, mode)?;
    let baseline = shuffled_baseline_auc(&results, mode, config.seed)?;
    Ok(ScenarioOutcome {
        players: results,
        roc,
        shuffled_baseline_auc: baseline,
    })
}

const SIM_IMAGE_AT: &str = "2024-01-01 00:00:00";

/// Builds the manifest, ground-truth annotations and seed players, then
/// bootstraps the system from them.
pub fn build_world(config: &ScenarioConfig) -> Result<SystemState> {
    if config.seed_players == 0 {
        return Err(Error::EmptySeedGroup);
    }
    if config.roi_side < 4 || config.image_width < 4 * config.roi_side.max(1) / 2 {
        return Err(Error::InvalidParameter(
            "image must be comfortably larger than the nominal ROI side".into(),
        ));
    }
    let vocabulary = default_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);

    let mut entries = Vec::new();
    for i in 0..config.tagged_images {
        entries.push(ManifestEntry {
            image_id: format!("T{i}"),
            region_id: "SIM-REGION".into(),
            image_at: SIM_IMAGE_AT.into(),
            width: config.image_width,
            height: config.image_height,
            path: format!("tiles/T{i}.png"),
        });
    }
    for i in 0..config.fresh_images {
        entries.push(ManifestEntry {
            image_id: format!("F{i}"),
            region_id: "SIM-REGION".into(),
            image_at: SIM_IMAGE_AT.into(),
            width: config.image_width,
            height: config.image_height,
            path: format!("tiles/F{i}.png"),
        });
    }
    let manifest = Manifest { entries };

    // Ground truth per tagged image.
    let mut truth: HashMap<String, Vec<Roi>> = HashMap::new();
    for i in 0..config.tagged_images {
        let mut rois = Vec::new();
        for _ in 0..config.rois_per_image.max(1) {
            let side = config.roi_side;
            let w = rng.gen_range(side * 3 / 4..=side * 5 / 4);
            let h = rng.gen_range(side * 3 / 4..=side * 5 / 4);
            let x = rng.gen_range(2..=(config.image_width - w - 2)) as i64;
            let y = rng.gen_range(2..=(config.image_height - h - 2)) as i64;
            let tag_count = config.tags_per_roi.clamp(1, vocabulary.len());
            let tags = vocabulary
                .choose_multiple(&mut rng, tag_count)
                .cloned()
                .collect::<Vec<_>>();
            rois.push(Roi::new(x, y, w, h, tags)?);
        }
        truth.insert(format!("T{i}"), rois);
    }

    // Seed players copy the ground truth with a +-2 px per-seed jitter so
    // their stored entries stay distinct.
    let mut seed_records = Vec::new();
    for s in 0..config.seed_players {
        let mut tasks = Vec::new();
        for i in 0..config.tagged_images {
            let image_id = format!("T{i}");
            let rois = truth[&image_id]
                .iter()
                .map(|roi| {
                    let dx = rng.gen_range(-2i64..=2);
                    let dy = rng.gen_range(-2i64..=2);
                    RoiRecord {
                        x: roi.x() + dx,
                        y: roi.y() + dy,
                        height: roi.height(),
                        width: roi.width(),
                        tags: roi.tags().iter().map(|t| t.as_str().to_owned()).collect(),
                    }
                })
                .collect();
            tasks.push(TaskEntry {
                image_id,
                image_at: SIM_IMAGE_AT.into(),
                reliable: None,
                rois,
            });
        }
        seed_records.push(PlayerRecord {
            player_id: format!("SEED-{s}"),
            tasks,
        });
    }

    initialize(seed_records, &vocabulary, manifest)
}

/// Simulates every configured player against the fixed trusted group and
/// rates them. Player i draws from stream i+1 of the master seed.
pub fn simulate_players(
    state: &SystemState,
    config: &ScenarioConfig,
) -> Result<Vec<SimPlayerResult>> {
    let tagged_pool = state.resultdb.tagged_image_ids();
    let tagged_set: std::collections::BTreeSet<&str> =
        tagged_pool.iter().map(|i| i.as_str()).collect();
    let fresh_pool: Vec<ImageId> = state
        .manifest
        .image_ids()
        .into_iter()
        .filter(|i| !tagged_set.contains(i.as_str()))
        .collect();
    let vocabulary = state.registry.vocabulary();

    let total = config.honest_players + config.malicious_players;
    let mut results = Vec::with_capacity(total);
    for idx in 0..total {
        let label = if idx < config.honest_players {
            PlayerLabel::Honest
        } else {
            PlayerLabel::Malicious
        };
        let player_id = PlayerId::new(match label {
            PlayerLabel::Honest => format!("HONEST-{idx}"),
            PlayerLabel::Malicious => format!("MALICIOUS-{idx}"),
        });
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(idx as u64 + 1);

        let task = generate_task(
            &player_id,
            &tagged_pool,
            &fresh_pool,
            config.task_half_size,
            rng.gen(),
        )?;

        let mut cases = Vec::new();
        for image in task.tagged_images() {
            let mut trusted = Vec::new();
            for trusted_player in &state.trusted.players {
                if let Some(entry) = state.playerdb.latest_entry(trusted_player, image) {
                    if entry.is_reliable() && !entry.rois.is_empty() {
                        trusted.push(entry_to_annotation(entry, trusted_player, &state.manifest)?);
                    }
                }
            }
            let trusted_rois: Vec<Roi> = trusted.iter().flat_map(|a| a.rois.clone()).collect();
            let rois = match label {
                PlayerLabel::Honest => {
                    synth_honest_rois(&trusted_rois, &config.noise, config.keep_prob, &mut rng)
                }
                PlayerLabel::Malicious => synth_malicious_rois(
                    config.image_width,
                    config.image_height,
                    &vocabulary,
                    &mut rng,
                ),
            };
            cases.push(ImageCase {
                image: image.clone(),
                trusted,
                candidate: Some(PlayerAnnotation::new(player_id.clone(), image.clone(), rois)),
            });
        }

        let verdict = detect_malicious(&player_id, &cases, &state.registry, &config.detector)?;
        let margin = verdict
            .images
            .iter()
            .map(|img| match (img.trusted_mean, img.trust) {
                (Some(mean), Some(trust)) => mean - trust,
                _ => 1.0,
            })
            .sum::<f64>()
            / verdict.images.len().max(1) as f64;

        results.push(SimPlayerResult {
            player_id,
            label,
            counter: verdict.counter,
            tagged_images: verdict.images.len(),
            margin,
        });
    }
    Ok(results)
}

//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::json;
use skywatch_core::ids::{PlayerId, RegionId, TaskId};
use skywatch_core::pipeline::{initialize, rate_player_round, region_snapshot, SystemState};
use skywatch_core::simulate::{run_scenario, NoiseModel, RocMode, ScenarioConfig};
use skywatch_core::store::{load_json, save_json_atomic, Manifest, PlayerDb, ResultDb, TaskLog, TrustedFile};
use skywatch_core::tags::{TagId, TagRegistry, TagRegistryFile};
use skywatch_core::taskgen::{generate_task, tile_region};

use crate::config::RunConfig;

fn emit(value: &serde_json::Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_state(config: &RunConfig) -> anyhow::Result<SystemState> {
    let p = &config.paths;
    let registry_file: TagRegistryFile =
        load_json(&p.tags).with_context(|| format!("loading {}", p.tags.display()))?;
    Ok(SystemState {
        playerdb: PlayerDb::load(&p.playerdb)
            .with_context(|| format!("loading {}", p.playerdb.display()))?,
        resultdb: ResultDb::load(&p.resultdb)
            .with_context(|| format!("loading {}", p.resultdb.display()))?,
        manifest: Manifest::load(&p.manifest)
            .with_context(|| format!("loading {}", p.manifest.display()))?,
        registry: TagRegistry::from_file(registry_file)?,
        trusted: TrustedFile::load(&p.trusted)
            .with_context(|| format!("loading {}", p.trusted.display()))?,
        tasks: if p.tasks.exists() {
            TaskLog::load(&p.tasks).with_context(|| format!("loading {}", p.tasks.display()))?
        } else {
            TaskLog::default()
        },
    })
}

fn save_state(config: &RunConfig, state: &SystemState) -> anyhow::Result<()> {
    let p = &config.paths;
    state.playerdb.save(&p.playerdb)?;
    state.resultdb.save(&p.resultdb)?;
    save_json_atomic(&p.tags, &state.registry.to_file())?;
    state.trusted.save(&p.trusted)?;
    state.tasks.save(&p.tasks)?;
    Ok(())
}

pub fn cmd_init(
    config: &RunConfig,
    seeds: &Path,
    predefined: &str,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let tags: Vec<TagId> = predefined
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(TagId::from)
        .collect();
    let seed_doc: serde_json::Value =
        load_json(seeds).with_context(|| format!("loading seeds {}", seeds.display()))?;
    let mut playerdb = PlayerDb::default();
    let records = seed_doc
        .as_array()
        .context("seeds document must be a top-level array of player records")?;
    for record in records {
        playerdb.persist(record)?;
    }
    let manifest = Manifest::load(&config.paths.manifest)
        .with_context(|| format!("loading {}", config.paths.manifest.display()))?;

    let state = initialize(playerdb.records, &tags, manifest)?;
    save_state(config, &state)?;

    emit(
        &json!({
            "trusted": state.trusted.players,
            "initial_trust": 1.0 / state.trusted.players.len() as f64,
            "vocabulary_size": state.registry.len(),
            "tagged_images": state.resultdb.tagged_image_ids().len(),
        }),
        out,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_tile(
    region: &str,
    width: u32,
    height: u32,
    tile_width: u32,
    tile_height: u32,
    seed: u64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let tiles = tile_region(
        &RegionId::from(region),
        width,
        height,
        tile_width,
        tile_height,
        seed,
    )?;
    emit(&serde_json::to_value(&tiles)?, out)
}

pub fn cmd_gen_task(
    config: &RunConfig,
    player: &str,
    n: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let mut state = load_state(config)?;
    let n = n.unwrap_or(config.task.n);
    let tagged = state.resultdb.tagged_image_ids();
    let tagged_set: std::collections::BTreeSet<&str> =
        tagged.iter().map(|i| i.as_str()).collect();
    let fresh: Vec<_> = state
        .manifest
        .image_ids()
        .into_iter()
        .filter(|i| !tagged_set.contains(i.as_str()))
        .collect();

    let task = generate_task(&PlayerId::from(player), &tagged, &fresh, n, seed)?;
    let view = task.player_view();
    state.tasks.push(task);
    state.tasks.save(&config.paths.tasks)?;

    emit(&serde_json::to_value(&view)?, out)
}

pub fn cmd_rate(
    config: &RunConfig,
    player: &str,
    task: &str,
    theta: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let mut state = load_state(config)?;
    let detector = config.detector_config(theta);
    let outcome = rate_player_round(
        &mut state,
        &PlayerId::from(player),
        &TaskId::from(task),
        &detector,
    )?;
    save_state(config, &state)?;
    emit(&serde_json::to_value(&outcome)?, out)
}

pub fn cmd_disaster(
    config: &RunConfig,
    region: &str,
    timestamp: Option<&str>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let state = load_state(config)?;
    let region_id = RegionId::from(region);
    let images = region_snapshot(&state, &region_id)?;
    let evaluated_at = match timestamp {
        Some(t) => t.to_owned(),
        None => chrono::Local::now().format("%Y-%m-%d %H:%M:%S").to_string(),
    };
    let report =
        skywatch_core::disaster::disaster_level(region_id, &images, &state.registry, evaluated_at)?;
    emit(&serde_json::to_value(&report)?, out)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    config: &RunConfig,
    honest: usize,
    malicious: usize,
    sigma: f64,
    n: Option<usize>,
    tagged_images: usize,
    fresh_images: usize,
    seed_players: usize,
    mode: &str,
    seed: u64,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let mode = match mode {
        "theta" => RocMode::ThetaSweep,
        "margin" => RocMode::MarginScore,
        other => bail!("unknown roc mode {other:?}; expected \"theta\" or \"margin\""),
    };
    let scenario = ScenarioConfig {
        tagged_images,
        fresh_images,
        seed_players,
        task_half_size: n.unwrap_or(config.task.n),
        honest_players: honest,
        malicious_players: malicious,
        noise: NoiseModel::new(sigma)?,
        detector: config.detector_config(None),
        seed,
        ..ScenarioConfig::default()
    };
    let outcome = run_scenario(&scenario, mode)?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("roc.csv");
    let mut csv = String::from("parameter,fpr,tpr\n");
    for point in &outcome.roc.points {
        csv.push_str(&format!("{},{},{}\n", point.parameter, point.fpr, point.tpr));
    }
    std::fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;

    let summary = json!({
        "auc": outcome.roc.auc,
        "shuffled_baseline_auc": outcome.shuffled_baseline_auc,
        "positive_class": outcome.roc.positive_class,
        "mode": outcome.roc.mode,
        "players": outcome.players.len(),
        "config": scenario,
        "roc_csv": csv_path,
    });
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

pub fn output_path(out: &Option<PathBuf>) -> Option<&Path> {
    out.as_deref()
}

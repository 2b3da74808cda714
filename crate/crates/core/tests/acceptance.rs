//! Acceptance suite: one test per release criterion, each printing a
//! PASS line when its checks hold. Run with
//! `cargo test -p skywatch-core --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skywatch_core::disaster::{disaster_level, RegionImage};
use skywatch_core::geometry::Roi;
use skywatch_core::ids::{ImageId, PlayerId, RegionId, TaskId};
use skywatch_core::pipeline::{initialize, rate_player_round, SystemState};
use skywatch_core::rating::{
    build_rating_graph, match_ratio, stationary_distribution, tag_correlation, DetectorConfig,
    PlayerAnnotation, SolverConfig, DEFAULT_SMOOTHING,
};
use skywatch_core::simulate::{run_scenario, RocMode, ScenarioConfig};
use skywatch_core::store::{
    validate_player_record, validate_result_record, Manifest, ManifestEntry, PlayerRecord,
    RoiRecord, TaskEntry,
};
use skywatch_core::tags::{
    image_weight_vector, system_weight_vector, tag_vector, TagId, TagRegistry, WeightVector,
};
use skywatch_core::taskgen::{generate_task, tile_region, TileLayer};

fn ids(names: &[&str]) -> Vec<TagId> {
    names.iter().map(|n| TagId::from(*n)).collect()
}

/// Criterion 1: the worked tag-count example reproduces exactly.
#[test]
fn criterion_1_worked_weight_vectors() {
    let start = Instant::now();

    let vocab = ids(&["g1", "g2", "g3", "g4", "g5"]);
    let counts: Vec<(TagId, u64)> = vocab.iter().cloned().zip([3u64, 4, 1, 2, 4]).collect();
    let system = system_weight_vector(&counts).unwrap();
    let expected = [3.0 / 14.0, 2.0 / 7.0, 1.0 / 14.0, 1.0 / 7.0, 2.0 / 7.0];
    for (got, want) in system.components().iter().zip(expected) {
        assert!((got - want).abs() <= 1e-15, "{got} != {want}");
    }

    let first_image = image_weight_vector(&system, &vocab, &ids(&["g1", "g2", "g5"])).unwrap();
    let expected = [3.0 / 14.0, 2.0 / 7.0, 2.0 / 7.0];
    for (got, want) in first_image.components().iter().zip(expected) {
        assert!((got - want).abs() <= 1e-15);
    }

    let second_image = image_weight_vector(&system, &vocab, &vocab).unwrap();
    assert_eq!(second_image.components(), system.components());

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 PASS: worked weight vectors exact in {elapsed:?}");
}

/// Criterion 2: range bounds hold over >= 10 000 randomized cases.
#[test]
fn criterion_2_range_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = 0usize;

    for _ in 0..4_000 {
        // Weight-vector bounds: components in [0,1], system sums to 1,
        // image projections sum to at most 1.
        let n = rng.gen_range(1..10);
        let counts: Vec<(TagId, u64)> = (0..n)
            .map(|i| (TagId::new(format!("t{i}")), rng.gen_range(0..50)))
            .collect();
        if counts.iter().map(|(_, c)| *c).sum::<u64>() == 0 {
            continue;
        }
        let system = system_weight_vector(&counts).unwrap();
        assert!(system.components().iter().all(|c| (0.0..=1.0).contains(c)));
        assert!((system.sum() - 1.0).abs() <= 1e-12);
        let vocab: Vec<TagId> = counts.iter().map(|(t, _)| t.clone()).collect();
        let subset: Vec<TagId> = vocab.iter().filter(|_| rng.gen()).cloned().collect();
        let image = image_weight_vector(&system, &vocab, &subset).unwrap();
        assert!(image.components().iter().all(|c| (0.0..=1.0).contains(c)));
        assert!(image.sum() <= 1.0 + 1e-12);
        cases += 1;
    }

    for _ in 0..4_000 {
        // Match ratio stays in [0, 1].
        let a = Roi::new(
            rng.gen_range(-30..30),
            rng.gen_range(-30..30),
            rng.gen_range(1..40),
            rng.gen_range(1..40),
            [],
        )
        .unwrap();
        let b = Roi::new(
            rng.gen_range(-30..30),
            rng.gen_range(-30..30),
            rng.gen_range(1..40),
            rng.gen_range(1..40),
            [],
        )
        .unwrap();
        let r = match_ratio(&a, &b);
        assert!((0.0..=1.0).contains(&r), "match ratio {r} out of bounds");
        cases += 1;
    }

    for _ in 0..4_000 {
        // Clamped tag correlation stays in [-1, 1].
        let n = rng.gen_range(1..9);
        let vocab: Vec<TagId> = (0..n).map(|i| TagId::new(format!("t{i}"))).collect();
        let pick = |rng: &mut ChaCha8Rng| {
            let sel: Vec<&TagId> = vocab.iter().filter(|_| rng.gen()).collect();
            tag_vector(sel, &vocab).unwrap()
        };
        let ta = pick(&mut rng);
        let tb = pick(&mut rng);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0 / n as f64)).collect();
        let w = WeightVector::from_components(weights).unwrap();
        let c = tag_correlation(&ta, &tb, &w);
        assert!((-1.0..=1.0).contains(&c), "correlation {c} out of bounds");
        cases += 1;
    }

    assert!(cases >= 10_000, "only {cases} cases exercised");
    println!("ACCEPTANCE 2 PASS: range bounds held over {cases} randomized cases");
}

fn random_annotations(rng: &mut ChaCha8Rng, vocab: &[TagId]) -> Vec<PlayerAnnotation> {
    let players = rng.gen_range(2..=8);
    (0..players)
        .map(|p| {
            let rois = (0..rng.gen_range(1..=4))
                .map(|_| {
                    let tags: Vec<TagId> = vocab.iter().filter(|_| rng.gen()).cloned().collect();
                    Roi::new(
                        rng.gen_range(0..200),
                        rng.gen_range(0..200),
                        rng.gen_range(1..64),
                        rng.gen_range(1..64),
                        tags,
                    )
                    .unwrap()
                })
                .collect();
            PlayerAnnotation::new(
                PlayerId::new(format!("p{p}")),
                ImageId::from("img"),
                rois,
            )
        })
        .collect()
}

/// Criterion 3: normalized rating matrices satisfy the soundness
/// properties over >= 1 000 randomized player sets.
#[test]
fn criterion_3_matrix_soundness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut reg = TagRegistry::new();
    for (i, count) in [7u64, 3, 5, 2].iter().enumerate() {
        let tag = TagId::new(format!("t{i}"));
        reg.insert_tag(tag.clone());
        for _ in 0..*count {
            reg.record_selection(&tag).unwrap();
        }
    }
    let vocab = reg.vocabulary();
    let vk = reg.image_weights(&vocab).unwrap();

    let mut matrices = 0usize;
    while matrices < 1_000 {
        let annotations = random_annotations(&mut rng, &vocab);
        let graph = build_rating_graph(&annotations, &vocab, &vk, DEFAULT_SMOOTHING).unwrap();
        let n = graph.len();
        for (p, annotation) in annotations.iter().enumerate() {
            let m = annotation.rois.len() as f64;
            assert!(graph.raw(p, p) >= m, "diagonal below ROI count");
            let mut row_sum = 0.0;
            for q in 0..n {
                let raw = graph.raw(p, q);
                let a = graph.normalized(p, q);
                assert!(raw.is_finite() && raw >= 0.0);
                assert!(a.is_finite() && a > 0.0, "entry not strictly positive");
                row_sum += a;
            }
            assert!((row_sum - 1.0).abs() <= 1e-12, "row sum {row_sum}");
        }
        matrices += 1;
    }
    println!("ACCEPTANCE 3 PASS: soundness held for {matrices} randomized matrices");
}

/// Dense direct oracle for the stationary vector: solve (A' - I) x = 0
/// with the last equation replaced by sum(x) = 1, via LU.
fn stationary_oracle(matrix: &[f64], n: usize) -> Vec<f64> {
    let a = nalgebra::DMatrix::from_row_slice(n, n, matrix);
    let mut system = a.transpose() - nalgebra::DMatrix::identity(n, n);
    for q in 0..n {
        system[(n - 1, q)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let solution = system.lu().solve(&rhs).expect("stationary system solvable");
    solution.iter().copied().collect()
}

/// Criterion 4: power iteration matches the dense oracle within 1e-8 on
/// >= 500 random positive stochastic matrices of dimension <= 6.
#[test]
fn criterion_4_eigen_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let solver = SolverConfig::default();

    for round in 0..500 {
        let n = rng.gen_range(2..=6);
        let mut matrix = vec![0.0f64; n * n];
        for row in matrix.chunks_mut(n) {
            for v in row.iter_mut() {
                *v = rng.gen_range(0.05..1.0);
            }
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }

        let got = stationary_distribution(&matrix, n, &solver).unwrap();
        let want = stationary_oracle(&matrix, n);
        let l1: f64 = got
            .values
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 <= 1e-8, "round {round}: L1 distance {l1}");
        assert!(got.values.iter().all(|&v| v > 0.0));
        assert!((got.values.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        assert!(got.residual <= solver.tolerance);

        // Spectral radius against a dense eigenvalue decomposition.
        let eig = nalgebra::DMatrix::from_row_slice(n, n, &matrix).complex_eigenvalues();
        let radius = eig.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        assert!((got.spectral_radius - radius).abs() <= 1e-8);
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 4 PASS: 500 matrices matched the dense oracle in {elapsed:?}");
}

const AT: &str = "2017-07-31 11:28:40";

fn flat_manifest(images: &[&str]) -> Manifest {
    Manifest {
        entries: images
            .iter()
            .map(|image| ManifestEntry {
                image_id: (*image).into(),
                region_id: "R".into(),
                image_at: AT.into(),
                width: 128,
                height: 128,
                path: format!("{image}.png"),
            })
            .collect(),
    }
}

fn roi_record(x: i64, y: i64, w: u32, h: u32, tags: &[&str]) -> RoiRecord {
    RoiRecord {
        x,
        y,
        height: h,
        width: w,
        tags: tags.iter().map(|t| (*t).to_string()).collect(),
    }
}

fn entry(image: &str, rois: Vec<RoiRecord>) -> TaskEntry {
    TaskEntry {
        image_id: image.into(),
        image_at: AT.into(),
        reliable: None,
        rois,
    }
}

/// One seeded world with n tagged and n fresh images and one trusted
/// player, plus a fixed task for the candidate.
fn algorithm_world(n: usize) -> (SystemState, TaskId) {
    let tagged: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    let fresh: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
    let all: Vec<&str> = tagged.iter().chain(&fresh).map(String::as_str).collect();
    let seed = PlayerRecord {
        player_id: "seed".into(),
        tasks: tagged
            .iter()
            .map(|img| entry(img, vec![roi_record(20, 20, 60, 40, &["fire", "smoke"])]))
            .collect(),
    };
    let mut state = initialize(
        vec![seed],
        &ids(&["fire", "smoke"]),
        flat_manifest(&all),
    )
    .unwrap();

    let task = generate_task(
        &PlayerId::from("candidate"),
        &state.resultdb.tagged_image_ids(),
        &fresh.iter().map(|f| ImageId::new(f.clone())).collect::<Vec<_>>(),
        n,
        99,
    )
    .unwrap();
    let task_id = task.task_id.clone();
    state.tasks.push(task);
    (state, task_id)
}

fn submit(state: &mut SystemState, player: &str, entries: Vec<TaskEntry>) {
    state.playerdb.upsert(PlayerRecord {
        player_id: player.into(),
        tasks: entries,
    });
}

fn rate_fresh(
    state: &SystemState,
    task_id: &TaskId,
    theta: usize,
) -> skywatch_core::pipeline::RoundOutcome {
    let mut fresh = state.clone();
    let config = DetectorConfig {
        theta_accept: theta,
        ..DetectorConfig::default()
    };
    rate_player_round(&mut fresh, &PlayerId::from("candidate"), task_id, &config).unwrap()
}

/// Criterion 5: detection end to end. An identical replay passes at every
/// threshold, a no-show fails, and theta = n demands a pass on every
/// tagged image.
#[test]
fn criterion_5_detection_end_to_end() {
    let n = 3;
    let (mut state, task_id) = algorithm_world(n);
    let task = state.tasks.get(&task_id).unwrap().clone();

    // Identical replay of the trusted annotations on tagged images.
    let replay: Vec<TaskEntry> = task
        .images
        .iter()
        .map(|img| {
            let tagged = task.tagged_images().any(|t| t == &img.image_id);
            if tagged {
                let seed = state
                    .playerdb
                    .latest_entry(&PlayerId::from("seed"), &img.image_id)
                    .unwrap();
                entry(img.image_id.as_str(), seed.rois.clone())
            } else {
                entry(img.image_id.as_str(), vec![roi_record(0, 0, 10, 10, &["fire"])])
            }
        })
        .collect();
    submit(&mut state, "candidate", replay.clone());
    for theta in 1..=n {
        let outcome = rate_fresh(&state, &task_id, theta);
        assert_eq!(outcome.verdict.counter, n);
        assert!(outcome.verdict.reliable, "replay rejected at theta={theta}");
        assert!(outcome.accepted);
        for img in &outcome.verdict.images {
            assert!((img.trust.unwrap() - 0.5).abs() < 1e-9, "exact tie expected");
        }
    }

    // A candidate with zero ROIs everywhere fails every image.
    let empty: Vec<TaskEntry> = task
        .images
        .iter()
        .map(|img| entry(img.image_id.as_str(), vec![]))
        .collect();
    submit(&mut state, "candidate", empty);
    let outcome = rate_fresh(&state, &task_id, 1);
    assert_eq!(outcome.verdict.counter, 0);
    assert!(!outcome.verdict.reliable);
    assert!(!outcome.accepted);

    // Passing n-1 images: accepted at theta = n-1, rejected at theta = n.
    let mut partial = replay;
    let failing_image = task.tagged_images().next().unwrap().clone();
    for e in &mut partial {
        if e.image_id == failing_image.as_str() {
            // A smaller box strictly inside the trusted one scores below it.
            e.rois = vec![roi_record(20, 20, 30, 40, &["fire", "smoke"])];
        }
    }
    submit(&mut state, "candidate", partial);
    let outcome = rate_fresh(&state, &task_id, n - 1);
    assert_eq!(outcome.verdict.counter, n - 1);
    assert!(outcome.verdict.reliable);
    let outcome = rate_fresh(&state, &task_id, n);
    assert!(!outcome.verdict.reliable, "theta=n must require all images");

    println!("ACCEPTANCE 5 PASS: replay accepted at all thresholds, no-show rejected, theta=n strict");
}

/// Criterion 6: disaster level over >= 1 000 randomized regions.
#[test]
fn criterion_6_disaster_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut reg = TagRegistry::new();
    let vocab = ids(&["fire", "smoke", "flood"]);
    for (i, tag) in vocab.iter().enumerate() {
        reg.insert_tag(tag.clone());
        for _ in 0..=i {
            reg.record_selection(tag).unwrap();
        }
    }

    for round in 0..1_000 {
        let images: Vec<RegionImage> = (0..rng.gen_range(1..4))
            .map(|i| {
                let width = rng.gen_range(30..120);
                let height = rng.gen_range(30..120);
                let rois = (0..rng.gen_range(0..6))
                    .map(|_| {
                        let tag = &vocab[rng.gen_range(0..vocab.len())];
                        Roi::new(
                            rng.gen_range(0..width as i64),
                            rng.gen_range(0..height as i64),
                            rng.gen_range(1..width),
                            rng.gen_range(1..height),
                            [tag.clone()],
                        )
                        .unwrap()
                    })
                    .collect();
                RegionImage {
                    image_id: ImageId::new(format!("k{i}")),
                    width,
                    height,
                    rois,
                }
            })
            .collect();

        let before = disaster_level(RegionId::from("r"), &images, &reg, AT).unwrap();
        assert!(
            (0.0..=1.0).contains(&before.delta),
            "round {round}: delta {}",
            before.delta
        );

        // Adding one more tagged ROI never lowers the level.
        let mut grown = images.clone();
        let tag = &vocab[rng.gen_range(0..vocab.len())];
        grown[0].rois.push(
            Roi::new(0, 0, rng.gen_range(1..30), rng.gen_range(1..30), [tag.clone()]).unwrap(),
        );
        let after = disaster_level(RegionId::from("r"), &grown, &reg, AT).unwrap();
        assert!(after.delta + 1e-12 >= before.delta, "round {round}: shrank");
    }

    // Infimum: no ROIs at all.
    let bare = RegionImage {
        image_id: ImageId::from("k"),
        width: 100,
        height: 100,
        rois: vec![],
    };
    let report = disaster_level(RegionId::from("r"), &[bare], &reg, AT).unwrap();
    assert_eq!(report.delta, 0.0);

    // Supremum: full coverage by the only tag of a one-tag system.
    let mut single = TagRegistry::new();
    single.insert_tag(TagId::from("fire"));
    single.record_selection(&TagId::from("fire")).unwrap();
    let covered = RegionImage {
        image_id: ImageId::from("k"),
        width: 100,
        height: 100,
        rois: vec![Roi::new(0, 0, 100, 100, [TagId::from("fire")]).unwrap()],
    };
    let report = disaster_level(RegionId::from("r"), &[covered], &single, AT).unwrap();
    assert_eq!(report.delta, 1.0);

    println!("ACCEPTANCE 6 PASS: disaster level bounded and monotone over 1000 regions");
}

/// Criterion 7: the synthetic honest/malicious populations separate.
#[test]
fn criterion_7_simulation_separation() {
    let start = Instant::now();
    // Honest noise is 5% of the nominal ROI side (64 px -> sigma 3.2).
    let config = ScenarioConfig {
        honest_players: 100,
        malicious_players: 100,
        seed: 7,
        ..ScenarioConfig::default()
    };
    assert!((config.noise.sigma - 0.05 * config.roi_side as f64).abs() < 1e-12);

    let outcome = run_scenario(&config, RocMode::ThetaSweep).unwrap();
    let auc = outcome.roc.auc;
    let baseline = outcome.shuffled_baseline_auc;
    let elapsed = start.elapsed();

    assert!(auc >= 0.9, "AUC {auc} below 0.9");
    assert!(
        auc - baseline >= 0.4,
        "AUC {auc} not 0.4 above shuffled baseline {baseline}"
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 7 PASS: AUC {auc:.4} vs shuffled baseline {baseline:.4} in {elapsed:?}"
    );
}

/// Criterion 8: the reference documents round-trip bit-identically.
#[test]
fn criterion_8_store_round_trip() {
    let player_doc: serde_json::Value = serde_json::json!({
        "player_id": "E3A6F124-4A6C-4C6E-B7F1-F8BC9A7381CC",
        "tasks": [{
            "image_id": "3A21E99E-F074-454B-A590-8D8C5ABD8E77",
            "image_at": "2017-07-31 11:28:40",
            "reliable": true,
            "ROIs": [{ "x": 103, "y": 121, "height": 56, "width": 78,
                "tags": ["burning building", "explosion"]
            }]
        }]
    });
    validate_player_record(&player_doc, "").unwrap();
    let typed: PlayerRecord = serde_json::from_value(player_doc.clone()).unwrap();
    let back = serde_json::to_value(&typed).unwrap();
    assert_eq!(back, player_doc, "player record must round-trip");
    let text = serde_json::to_string(&typed).unwrap();
    for field in ["player_id", "tasks", "image_id", "image_at", "reliable", "ROIs", "x", "y", "height", "width", "tags"] {
        assert!(text.contains(&format!("\"{field}\"")), "missing field {field}");
    }
    assert_eq!(typed.tasks[0].rois[0].to_roi().unwrap().area(), 4368);

    let result_doc: serde_json::Value = serde_json::json!({
        "region_id": "FBEB6204-0B94-4811-94F0-9DDC5FBBE6D8",
        "history": [{
            "image_id": "3A21E99E-F074-454B-A590-8D8C5ABD8E77",
            "image_at": "2017-07-31 11:28:40",
            "ROIs": [{
                "x": 103, "y": 121, "height": 56, "width": 78,
                "tags": ["burning building", "explosion"]
            }]
        }]
    });
    validate_result_record(&result_doc, "").unwrap();
    let typed: skywatch_core::store::ResultRecord =
        serde_json::from_value(result_doc.clone()).unwrap();
    assert_eq!(serde_json::to_value(&typed).unwrap(), result_doc);

    println!("ACCEPTANCE 8 PASS: reference documents validate and round-trip identically");
}

/// Criterion 9: base tiles partition randomized regions exactly and every
/// interior seam crossing sits strictly inside a half-shifted tile.
#[test]
fn criterion_9_tiling() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for round in 0..500 {
        let w = rng.gen_range(2..200);
        let h = rng.gen_range(2..200);
        let tw = rng.gen_range(2..80);
        let th = rng.gen_range(2..80);
        let tiles = tile_region(&RegionId::from("r"), w, h, tw, th, round).unwrap();

        let mut painted = vec![0u32; (w * h) as usize];
        for t in tiles.iter().filter(|t| t.layer == TileLayer::Base) {
            for y in t.y..t.y + t.height {
                for x in t.x..t.x + t.width {
                    painted[(y * w + x) as usize] += 1;
                }
            }
        }
        assert!(
            painted.iter().all(|&c| c == 1),
            "round {round}: base layer is not an exact partition"
        );

        let shifted: Vec<_> = tiles
            .iter()
            .filter(|t| t.layer == TileLayer::HalfShifted)
            .collect();
        let mut cy = th;
        while cy < h {
            let mut cx = tw;
            while cx < w {
                let covered = shifted.iter().any(|t| {
                    t.x < cx && cx < t.x + t.width && t.y < cy && cy < t.y + t.height
                });
                assert!(covered, "round {round}: crossing ({cx},{cy}) uncovered");
                cx += tw;
            }
            cy += th;
        }
    }
    println!("ACCEPTANCE 9 PASS: 500 randomized regions partitioned with covered seams");
}

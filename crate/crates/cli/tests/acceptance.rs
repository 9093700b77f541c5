//! Acceptance suite: one test per release criterion, each printing a
//! PASS line. Everything runs offline against the in-repo mock server;
//! criteria that name a CLI command drive the built `qvid` binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use qvid_core::cache::short_digest;
use qvid_core::client::{CaptionRequest, EndpointConfig, ModelClient};
use qvid_core::datasets::{
    self, fixture_sentinel, load_normalized, synthesize_fixture, FixtureSpec, NormalizedDataset,
};
use qvid_core::eval::{AblationMatrix, EvalReport};
use qvid_core::mock::{rig_answers, serve, MockHandle, RigRule, ServeOptions};
use qvid_core::pipeline::{parse_answer, PREDICTIONS_FILE};
use qvid_core::sampler::{plan_indices, SamplerConfig};
use qvid_core::templates::{CaptionJoiner, TemplateRegistry};
use qvid_core::types::{letter_for_index, Caption, CaptionSet, DecodeParams, Prediction, QARecord};

const QVID: &str = env!("CARGO_BIN_EXE_qvid");

fn run_qvid(args: &[&str]) -> std::process::Output {
    Command::new(QVID)
        .args(args)
        .env_remove("QVID_AUTH_TOKEN")
        .output()
        .expect("qvid binary runs")
}

fn assert_success(out: &std::process::Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Writes the fixture dataset plus media under `root` and returns the
/// dataset (paths resolved) and the saved JSONL path.
fn write_fixture(
    root: &Path,
    records: usize,
    ms: Vec<usize>,
    seed: u64,
) -> (NormalizedDataset, PathBuf) {
    let mut spec = FixtureSpec::new(records, ms, seed);
    spec.min_frames = 6;
    spec.max_frames = 10;
    let dataset = synthesize_fixture(root, &spec).unwrap();
    let path = root.join("dataset.jsonl");
    datasets::save_normalized(&dataset, &path, Some(root)).unwrap();
    (dataset, path)
}

async fn spawn_mock(rig: Vec<RigRule>, delay_ms: u64) -> MockHandle {
    serve(ServeOptions {
        rig,
        fixed_delay_ms: delay_ms,
        ..ServeOptions::default()
    })
    .await
    .expect("mock server starts")
}

/// `qvid run` against a mock, with a fixed worker/frame shape shared by the
/// whole suite.
fn cli_run(dataset: &Path, media: &Path, out: &Path, cache: &Path, mock_url: &str, extra: &[&str]) {
    let mut args = vec![
        "run",
        "--dataset",
        dataset.to_str().unwrap(),
        "--media-root",
        media.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--cache-dir",
        cache.to_str().unwrap(),
        "--captioner-url",
        mock_url,
        "--reasoner-url",
        mock_url,
        "--image-format",
        "png",
        "--n-frames",
        "4",
        "--workers",
        "4",
    ];
    args.extend_from_slice(extra);
    let out = run_qvid(&args);
    assert_success(&out, "qvid run");
}

fn cli_eval_json(predictions: &Path, dataset: &Path) -> EvalReport {
    let out = run_qvid(&[
        "eval",
        "--predictions",
        predictions.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_success(&out, "qvid eval");
    serde_json::from_slice(&out.stdout).expect("eval emits a report document")
}

// -------------------------------------------------------------------------
// 1. Sampling oracle

#[test]
fn acceptance_01_sampling_oracle() {
    let started = Instant::now();
    for total in 1usize..=200 {
        for n in [1, 4, 64, total, total + 5] {
            let expected: Vec<usize> = if total <= n {
                (0..total).collect()
            } else {
                (0..n)
                    .map(|i| ((i as f64 + 0.5) * total as f64 / n as f64).floor() as usize)
                    .collect()
            };
            assert_eq!(
                plan_indices(total, n).unwrap(),
                expected,
                "total={total} n={n}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("ACCEPTANCE 1 (sampling oracle, {elapsed:?}): PASS");
}

// -------------------------------------------------------------------------
// 2. Prompt goldens

const CANONICAL_CAPTION_INSTRUCTION: &str =
    "Provide a detailed description of the image related to the question:";
const CANONICAL_QA_TAIL: &str = "select the correct answer in one letter from the options (A,B,C)";
const EXAMPLE_QUESTION: &str = "Why did the man in white held tightly to the boy in white?";

#[test]
fn acceptance_02_prompt_goldens() {
    let registry = TemplateRegistry::with_builtins();

    let rendered = registry
        .render_caption_instruction("dependent_base", EXAMPLE_QUESTION)
        .unwrap();
    assert_eq!(
        rendered.text,
        format!("{CANONICAL_CAPTION_INSTRUCTION} {EXAMPLE_QUESTION}")
    );

    let captions = CaptionSet::new(
        vec![
            Caption::new(0, "a man in white stands near a boy", false),
            Caption::new(1, "the man holds the boy by the arm", false),
        ],
        "v1",
        EXAMPLE_QUESTION,
    )
    .unwrap();
    let record = QARecord {
        record_id: "golden".into(),
        video: qvid_core::types::VideoRef::new(
            "v1",
            qvid_core::types::VideoSource::FrameDir {
                path: "frames".into(),
            },
        ),
        question: EXAMPLE_QUESTION.into(),
        options: vec![
            "to play with him".into(),
            "to keep him safe".into(),
            "to push him away".into(),
        ],
        gold_index: Some(1),
        question_type: None,
        dataset: "golden".into(),
    };
    let prompt = registry
        .render_qa_prompt("qa_base", &captions, &record, &CaptionJoiner::default())
        .unwrap();
    let expected = "Captions: a man in white stands near a boy. the man holds the boy by the arm. \
                    Question: Why did the man in white held tightly to the boy in white?. \
                    Option A: to play with him. Option B: to keep him safe. Option C: to push him away. \
                    Considering the information presented in the captions, \
                    select the correct answer in one letter from the options (A,B,C)";
    assert_eq!(prompt.text, expected);
    assert!(prompt.text.ends_with(CANONICAL_QA_TAIL));

    // the CLI prints the stored body byte-exactly
    let shown = run_qvid(&["templates", "show", "dependent_base"]);
    assert_success(&shown, "templates show");
    assert_eq!(
        String::from_utf8_lossy(&shown.stdout),
        format!("{CANONICAL_CAPTION_INSTRUCTION} {{Q}}\n")
    );
    println!("ACCEPTANCE 2 (prompt goldens): PASS");
}

// -------------------------------------------------------------------------
// 3. Answer-parser suite

#[test]
fn acceptance_03_answer_parser_suite() {
    let started = Instant::now();
    let garage = vec![
        "a garage".to_string(),
        "a kitchen".to_string(),
        "a park".to_string(),
    ];
    let plain: Vec<String> = (0..5).map(|i| format!("choice {i}")).collect();
    // (raw, m, options, expected) — each expectation hand-traced through the
    // documented rule order
    let fixtures: Vec<(&str, usize, &[String], Option<usize>)> = vec![
        // tier 1: bare letter
        ("A", 3, &plain, Some(0)),
        ("B", 3, &plain, Some(1)),
        ("c", 3, &plain, Some(2)),
        (" b ", 3, &plain, Some(1)),
        ("\tA\n", 3, &plain, Some(0)),
        ("E", 5, &plain, Some(4)),
        ("(B)", 3, &plain, Some(1)),
        ("[C]", 3, &plain, Some(2)),
        ("(a)", 3, &plain, Some(0)),
        ("B.", 3, &plain, Some(1)),
        ("B:", 3, &plain, Some(1)),
        ("A.", 5, &plain, Some(0)),
        ("(C).", 4, &plain, Some(2)),
        ("[b].", 3, &plain, Some(1)),
        ("D", 3, &plain, None), // letter beyond m
        ("Z", 5, &plain, None),
        ("F.", 5, &plain, None),
        // tier 2: letter inside prose
        ("The correct answer is (C).", 4, &plain, Some(2)),
        ("Option B", 4, &plain, Some(1)),
        ("option d", 4, &plain, Some(3)),
        ("I would pick Option A here.", 4, &plain, Some(0)),
        ("Answer: C", 4, &plain, Some(2)),
        ("answer:b", 4, &plain, Some(1)),
        ("Answer: (D)", 4, &plain, Some(3)),
        ("The answer is Option C.", 4, &plain, Some(2)),
        ("Based on the captions, (B) fits best.", 4, &plain, Some(1)),
        ("Answer: A, though Option B also fits", 4, &plain, Some(0)), // earliest wins
        ("(B) then Answer: C", 4, &plain, Some(1)),
        ("Option Z is invalid so Option A", 4, &plain, Some(0)), // invalid skipped
        ("Option E", 4, &plain, None),                           // only an out-of-range mention
        ("the adoption agency opened", 4, &plain, None),         // no word-boundary hit
        ("Answer: Because of the rain", 4, &plain, None),        // letter must stand alone
        // tier 3: verbatim option text
        ("a kitchen", 3, &garage, Some(1)),
        ("A GARAGE", 3, &garage, Some(0)),
        ("  a park  ", 3, &garage, Some(2)),
        ("choice 3", 5, &plain, Some(3)),
        ("a courtyard", 3, &garage, None), // not an option
        // tier 4: unparsed
        ("I cannot tell.", 5, &plain, None),
        ("", 3, &plain, None),
        ("   ", 3, &plain, None),
        ("The captions are inconclusive.", 5, &plain, None),
        ("AB", 3, &plain, None), // two letters is not a letter
        ("A B", 3, &plain, None),
        ("1", 3, &plain, None),
        ("no options present in prompt", 4, &plain, None),
    ];
    assert!(
        fixtures.len() >= 40,
        "need >= 40 fixtures, have {}",
        fixtures.len()
    );
    for (raw, m, options, expected) in &fixtures {
        assert_eq!(
            parse_answer(raw, *m, options),
            *expected,
            "raw={raw:?} m={m}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "ACCEPTANCE 3 (answer parser, {} fixtures, {elapsed:?}): PASS",
        fixtures.len()
    );
}

// -------------------------------------------------------------------------
// 4. End-to-end determinism

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_04_end_to_end_determinism() {
    let root = tempfile::tempdir().unwrap();
    let (_dataset, dataset_path) = write_fixture(root.path(), 50, vec![3, 4, 5], 7);
    let mock = spawn_mock(vec![], 0).await;

    let started = Instant::now();
    for run in ["one", "two"] {
        cli_run(
            &dataset_path,
            root.path(),
            &root.path().join(format!("out-{run}")),
            &root.path().join(format!("cache-{run}")),
            &mock.base_url(),
            &[],
        );
    }
    let elapsed = started.elapsed();

    let a = std::fs::read(root.path().join("out-one").join(PREDICTIONS_FILE)).unwrap();
    let b = std::fs::read(root.path().join("out-two").join(PREDICTIONS_FILE)).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "independent cold runs must be byte-identical");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    mock.shutdown().await;
    println!("ACCEPTANCE 4 (end-to-end determinism, {elapsed:?}): PASS");
}

// -------------------------------------------------------------------------
// 5. Rigged accuracy

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_05_rigged_accuracy() {
    let root = tempfile::tempdir().unwrap();
    let (dataset, dataset_path) = write_fixture(root.path(), 50, vec![3, 4, 5], 7);

    // 37 records answer gold, 10 answer a wrong letter, 3 emit prose
    let mut mapping = Vec::new();
    for (i, record) in dataset.records.iter().enumerate() {
        let gold = record.gold_index.unwrap();
        let m = record.options.len();
        let response = if i < 37 {
            letter_for_index(gold).unwrap().to_string()
        } else if i < 47 {
            letter_for_index((gold + 1) % m).unwrap().to_string()
        } else {
            "The captions describe scenery without naming any marker.".to_string()
        };
        mapping.push((fixture_sentinel(i), response));
    }
    let rig = rig_answers(&mapping).unwrap();
    let mock = spawn_mock(rig, 0).await;

    let out_dir = root.path().join("out");
    cli_run(
        &dataset_path,
        root.path(),
        &out_dir,
        &root.path().join("cache"),
        &mock.base_url(),
        &[],
    );
    let report = cli_eval_json(&out_dir.join(PREDICTIONS_FILE), &dataset_path);

    assert_eq!(report.n_total, 50);
    assert_eq!(report.n_correct, 37);
    assert!((report.accuracy - 0.74).abs() < 1e-12);
    assert_eq!(report.accuracy, 37.0 / 50.0);
    assert_eq!(report.n_unparsed, 3);

    // independent one-pass recount of the per-type buckets
    let predictions: Vec<Prediction> =
        qvid_core::pipeline::load_predictions(&out_dir.join(PREDICTIONS_FILE)).unwrap();
    let by_id: BTreeMap<&str, &Prediction> = predictions
        .iter()
        .map(|p| (p.record_id.as_str(), p))
        .collect();
    let mut oracle: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for record in &dataset.records {
        let qtype = record.question_type.clone().unwrap();
        let pred = by_id[record.record_id.as_str()];
        let bucket = oracle.entry(qtype).or_insert((0, 0));
        bucket.0 += 1;
        if pred.answer_index == record.gold_index {
            bucket.1 += 1;
        }
    }
    assert_eq!(report.per_type.len(), oracle.len());
    for (qtype, (n, correct)) in &oracle {
        let stats = &report.per_type[qtype];
        assert_eq!(stats.n, *n, "bucket {qtype}");
        assert_eq!(stats.correct, *correct, "bucket {qtype}");
        assert_eq!(stats.accuracy, *correct as f64 / *n as f64);
    }
    mock.shutdown().await;
    println!("ACCEPTANCE 5 (rigged accuracy 0.74, 3 unparsed): PASS");
}

// -------------------------------------------------------------------------
// 6. Cache effectiveness

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_06_cache_effectiveness() {
    let root = tempfile::tempdir().unwrap();
    let (_dataset, dataset_path) = write_fixture(root.path(), 50, vec![3, 4, 5], 7);
    let mock = spawn_mock(vec![], 0).await;
    let cache = root.path().join("cache");

    let out_one = root.path().join("out-one");
    cli_run(
        &dataset_path,
        root.path(),
        &out_one,
        &cache,
        &mock.base_url(),
        &[],
    );
    let after_first = mock.stats().caption_requests;
    assert!(after_first > 0);

    let out_two = root.path().join("out-two");
    cli_run(
        &dataset_path,
        root.path(),
        &out_two,
        &cache,
        &mock.base_url(),
        &[],
    );
    let after_second = mock.stats().caption_requests;

    assert_eq!(
        after_second - after_first,
        0,
        "second run must issue zero caption requests"
    );
    let a = std::fs::read(out_one.join(PREDICTIONS_FILE)).unwrap();
    let b = std::fs::read(out_two.join(PREDICTIONS_FILE)).unwrap();
    assert_eq!(a, b);
    mock.shutdown().await;
    println!("ACCEPTANCE 6 (cache effectiveness, zero re-captions): PASS");
}

// -------------------------------------------------------------------------
// 7. Ablation economy

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_07_ablation_economy() {
    let root = tempfile::tempdir().unwrap();
    let (_dataset, dataset_path) = write_fixture(root.path(), 50, vec![3, 4, 5], 7);
    let mock = spawn_mock(vec![], 0).await;

    // single-run captioner cost, measured cold
    let baseline = mock.stats().caption_requests;
    cli_run(
        &dataset_path,
        root.path(),
        &root.path().join("single-out"),
        &root.path().join("single-cache"),
        &mock.base_url(),
        &[],
    );
    let single_run = mock.stats().caption_requests - baseline;
    assert!(single_run > 0);

    let caption_ids = ["dependent_base", "general_v1_reconstructed"];
    let qa_ids = ["qa_base", "qa_v1_reconstructed", "qa_v2_reconstructed"];
    let ablate_out = root.path().join("ablate");
    let before_ablate = mock.stats().caption_requests;
    let out = run_qvid(&[
        "ablate",
        "--dataset",
        dataset_path.to_str().unwrap(),
        "--media-root",
        root.path().to_str().unwrap(),
        "--out",
        ablate_out.to_str().unwrap(),
        "--cache-dir",
        root.path().join("ablate-cache").to_str().unwrap(),
        "--captioner-url",
        &mock.base_url(),
        "--reasoner-url",
        &mock.base_url(),
        "--image-format",
        "png",
        "--n-frames",
        "4",
        "--workers",
        "4",
        "--caption-templates",
        &caption_ids.join(","),
        "--qa-templates",
        &qa_ids.join(","),
    ]);
    assert_success(&out, "qvid ablate");
    let ablate_requests = mock.stats().caption_requests - before_ablate;
    assert_eq!(
        ablate_requests,
        2 * single_run,
        "2 captioning x 3 QA templates must pay the captioner exactly twice"
    );

    let matrix: AblationMatrix =
        serde_json::from_slice(&std::fs::read(ablate_out.join("ablation.json")).unwrap()).unwrap();
    assert_eq!(matrix.cells.len(), 6);

    // every cell equals a cold run of the same template pair
    for cell in &matrix.cells {
        let tag = format!("{}__{}", cell.caption_template_id, cell.qa_template_id);
        let cold_out = root.path().join(format!("cold-{tag}"));
        cli_run(
            &dataset_path,
            root.path(),
            &cold_out,
            &root.path().join(format!("cold-cache-{tag}")),
            &mock.base_url(),
            &[
                "--caption-template",
                &cell.caption_template_id,
                "--qa-template",
                &cell.qa_template_id,
            ],
        );
        let cold_report = cli_eval_json(&cold_out.join(PREDICTIONS_FILE), &dataset_path);
        assert_eq!(cell.report, cold_report, "cell {tag} differs from cold run");
        let cell_predictions =
            std::fs::read(ablate_out.join("cells").join(&tag).join(PREDICTIONS_FILE)).unwrap();
        let cold_predictions = std::fs::read(cold_out.join(PREDICTIONS_FILE)).unwrap();
        assert_eq!(
            cell_predictions, cold_predictions,
            "cell {tag} predictions differ"
        );
    }
    mock.shutdown().await;
    println!("ACCEPTANCE 7 (ablation economy, 6 cells, 2x captioner cost): PASS");
}

// -------------------------------------------------------------------------
// 8. Concurrency bound

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_08_concurrency_bound() {
    let root = tempfile::tempdir().unwrap();
    // a 64-frame video as a frame directory
    let frames_dir = root.path().join("frames64");
    std::fs::create_dir_all(&frames_dir).unwrap();
    for i in 0..64u32 {
        let img = image::RgbImage::from_pixel(48, 32, image::Rgb([(i * 3) as u8, 7, 99]));
        let mut bytes = Vec::new();
        image::DynamicImage::ImageRgb8(img)
            .write_to(
                &mut std::io::Cursor::new(&mut bytes),
                image::ImageFormat::Png,
            )
            .unwrap();
        std::fs::write(frames_dir.join(format!("f{i:03}.png")), bytes).unwrap();
    }
    let video = qvid_core::types::VideoRef::new(
        "v64",
        qvid_core::types::VideoSource::FrameDir {
            path: frames_dir.clone(),
        },
    );
    let cfg = SamplerConfig {
        n_frames: 64,
        image_format: qvid_core::sampler::ImageFormat::Png,
        ..SamplerConfig::default()
    };
    let indices = plan_indices(64, 64).unwrap();
    let frames = qvid_core::sampler::extract(&video, &indices, &cfg).unwrap();
    assert_eq!(frames.len(), 64);

    let mock = spawn_mock(vec![], 15).await;
    let mut endpoint = EndpointConfig::new(mock.base_url(), "captioner");
    endpoint.max_in_flight = 8;
    let client = ModelClient::new(endpoint).unwrap();
    let expected_digests: Vec<String> = frames
        .iter()
        .map(|f| short_digest(&f.image_bytes))
        .collect();
    let requests: Vec<CaptionRequest> = frames
        .into_iter()
        .map(|f| CaptionRequest {
            image_bytes: f.image_bytes,
            instruction: "Provide a detailed description of the image.".into(),
            decode: DecodeParams::caption_default(),
        })
        .collect();
    let results = client.caption_batch(&requests).await;

    let stats = mock.stats();
    assert!(
        stats.high_water_in_flight <= 8,
        "high water {} exceeds max_in_flight 8",
        stats.high_water_in_flight
    );
    assert_eq!(stats.caption_requests, 64);
    for (i, result) in results.iter().enumerate() {
        let text = &result.as_ref().unwrap().text;
        assert!(
            text.contains(&expected_digests[i]),
            "slot {i} out of order: {text}"
        );
    }
    mock.shutdown().await;
    println!(
        "ACCEPTANCE 8 (concurrency bound, high water {} <= 8, order kept): PASS",
        stats.high_water_in_flight
    );
}

// -------------------------------------------------------------------------
// 9. Resume invariance

#[tokio::test(flavor = "multi_thread")]
async fn acceptance_09_resume_invariance() {
    let root = tempfile::tempdir().unwrap();
    let (_dataset, dataset_path) = write_fixture(root.path(), 30, vec![3], 11);
    // fixed delay makes the run slow enough to kill mid-flight
    let mock = spawn_mock(vec![], 50).await;
    let cache = root.path().join("cache");
    let out_resumed = root.path().join("out-resumed");

    let mut child = Command::new(QVID)
        .args([
            "run",
            "--dataset",
            dataset_path.to_str().unwrap(),
            "--media-root",
            root.path().to_str().unwrap(),
            "--out",
            out_resumed.to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
            "--captioner-url",
            &mock.base_url(),
            "--reasoner-url",
            &mock.base_url(),
            "--image-format",
            "png",
            "--n-frames",
            "4",
            "--workers",
            "4",
        ])
        .env_remove("QVID_AUTH_TOKEN")
        .spawn()
        .unwrap();

    // kill (SIGKILL) once roughly half the records are durably logged
    let partial = out_resumed.join(qvid_core::pipeline::PARTIAL_FILE);
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        let done = std::fs::read_to_string(&partial)
            .map(|t| t.lines().count())
            .unwrap_or(0);
        if done >= 15 {
            break;
        }
        if let Some(status) = child.try_wait().unwrap() {
            panic!("run finished before the kill landed (status {status}); partial {done}");
        }
        assert!(Instant::now() < deadline, "run never reached 15 records");
        std::thread::sleep(Duration::from_millis(10));
    }
    child.kill().unwrap();
    let status = child.wait().unwrap();
    assert!(!status.success());
    assert!(
        !out_resumed.join(PREDICTIONS_FILE).exists(),
        "kill landed after the run finished; nothing was interrupted"
    );

    // resume to completion
    cli_run(
        &dataset_path,
        root.path(),
        &out_resumed,
        &cache,
        &mock.base_url(),
        &["--resume"],
    );

    // uninterrupted reference run: fresh cache, fresh output
    let out_reference = root.path().join("out-reference");
    cli_run(
        &dataset_path,
        root.path(),
        &out_reference,
        &root.path().join("cache-reference"),
        &mock.base_url(),
        &[],
    );

    let resumed = std::fs::read(out_resumed.join(PREDICTIONS_FILE)).unwrap();
    let reference = std::fs::read(out_reference.join(PREDICTIONS_FILE)).unwrap();
    assert_eq!(resumed, reference, "resumed run must be byte-identical");
    mock.shutdown().await;
    println!("ACCEPTANCE 9 (resume invariance after kill): PASS");
}

// -------------------------------------------------------------------------
// 10. Adapter validation

#[test]
fn acceptance_10_adapter_validation() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/adapters");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures.join("manifest.json")).unwrap())
            .unwrap();

    for (format, expected) in manifest.as_object().unwrap() {
        let root = tempfile::tempdir().unwrap();
        let media = root.path().join("media");
        std::fs::create_dir_all(&media).unwrap();
        let normalized = root.path().join("normalized.jsonl");
        let input = fixtures.join(expected["file"].as_str().unwrap());

        let out = run_qvid(&[
            "ingest",
            "--format",
            format,
            "--input",
            input.to_str().unwrap(),
            "--media-root",
            media.to_str().unwrap(),
            "--out",
            normalized.to_str().unwrap(),
        ]);
        assert_success(&out, &format!("qvid ingest {format}"));
        // clean fixtures drop nothing
        assert!(
            !root.path().join("normalized.jsonl.drops.jsonl").exists(),
            "{format}: unexpected drop log"
        );

        // create stub media for every referenced path, then validate
        let text = std::fs::read_to_string(&normalized).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let rel = v["video"]["path"].as_str().unwrap();
            let path = media.join(rel);
            match v["video"]["kind"].as_str().unwrap() {
                "frame_dir" => std::fs::create_dir_all(&path).unwrap(),
                _ => {
                    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                    std::fs::write(&path, b"stub").unwrap();
                }
            }
        }
        let dataset = load_normalized(&normalized, Some(&media))
            .unwrap_or_else(|e| panic!("{format}: adapter output failed validation: {e}"));

        assert_eq!(
            dataset.len(),
            expected["records"].as_u64().unwrap() as usize,
            "{format}: record count"
        );
        let mut counted: BTreeMap<String, usize> = BTreeMap::new();
        for record in &dataset.records {
            if let Some(t) = &record.question_type {
                *counted.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let expected_types: BTreeMap<String, usize> = expected["per_type"]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.as_u64().unwrap() as usize))
            .collect();
        assert_eq!(counted, expected_types, "{format}: per-type counts");
    }
    println!("ACCEPTANCE 10 (adapter validation, 5 formats): PASS");
}

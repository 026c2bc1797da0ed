use cova::blob::BlobNetModel;
use cova::bbox::BBox;
use cova::meta::write_stream;
use cova::pipeline::{run_pipeline, run_pipeline_on, train_model, PipelineConfig};
use cova::query::{evaluate, ground_truth, run_query, Query, QueryKind, QueryResult};
use cova::scene::{encode_metadata, generate_scene, render_background, GroundTruthObject, ObjectState, Scene, SceneConfig};
use cova::CovaError;

fn tiny() -> Scene {
    generate_scene(&SceneConfig::preset("tiny").unwrap()).unwrap()
}

/// One car crossing the frame left to right at 2 px/frame.
fn single_mover() -> Scene {
    let config = SceneConfig { num_frames: 150, gop_length: 30, object_spawn_rate: 0.0, ..SceneConfig::preset("tiny").unwrap() };
    let states: Vec<ObjectState> =
        (0..95).map(|k| ObjectState { bbox: BBox::new(4.0 + 2.0 * k as f64, 48.0, 56.0, 48.0), velocity: [2, 0] }).collect();
    let car = GroundTruthObject {
        object_id: 0,
        label: "car".into(),
        is_static: false,
        first_frame: 20,
        last_frame: 20 + states.len() - 1,
        intensity: 220,
        states,
    };
    Scene { background: Some(render_background(&config)), config, objects: vec![car] }
}

#[test]
fn empty_scene_filters_everything() {
    let config = SceneConfig { object_spawn_rate: 0.0, static_object_count: 0, ..SceneConfig::preset("tiny").unwrap() };
    let scene = generate_scene(&config).unwrap();
    let stream = encode_metadata(&scene).unwrap();
    let model = BlobNetModel::zeros(2);
    let out = run_pipeline_on(&scene, &stream, &model, &PipelineConfig::default()).unwrap();
    assert_eq!(out.report.confirmed_tracks, 0);
    assert_eq!(out.report.selection.decode_filtration_rate, 1.0);
    assert_eq!(out.report.selection.inference_filtration_rate, 1.0);
    assert_eq!(run_query(&out.analysis, &Query::global(QueryKind::Bp, "car")).unwrap(), QueryResult::Frames(Default::default()));
    assert_eq!(run_query(&out.analysis, &Query::global(QueryKind::Cnt, "car")).unwrap(), QueryResult::Count(0.0));
}

#[test]
fn single_object_labels_follow_ground_truth() {
    let scene = single_mover();
    let stream = encode_metadata(&scene).unwrap();
    let cfg = PipelineConfig { chunk_count: 1, ..PipelineConfig::default() };
    let (model, _) = train_model(&scene, &stream, &cfg).unwrap();
    let out = run_pipeline_on(&scene, &stream, &model, &cfg).unwrap();
    let car = &scene.objects[0];
    let hits = (car.first_frame..=car.last_frame)
        .filter(|&t| {
            let labels: Vec<&str> = out.analysis.frames[t].iter().map(|o| o.label.as_str()).collect();
            labels == ["car"]
        })
        .count();
    let share = hits as f64 / car.states.len() as f64;
    assert!(share >= 0.95, "labels match on {share:.3} of the frames");
}

#[test]
fn worker_count_does_not_change_results() {
    let scene = tiny();
    let stream = encode_metadata(&scene).unwrap();
    let cfg = PipelineConfig { chunk_count: 3, ..PipelineConfig::default() };
    let (model, _) = train_model(&scene, &stream, &cfg).unwrap();
    let runs: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&w| {
            let out = run_pipeline_on(&scene, &stream, &model, &PipelineConfig { worker_count: w, ..cfg.clone() }).unwrap();
            (serde_json::to_string(&out.analysis).unwrap(), serde_json::to_string(&out.report.without_runtime()).unwrap())
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn one_gop_stream_equals_single_chunk() {
    let config = SceneConfig { num_frames: 50, gop_length: 50, ..SceneConfig::preset("tiny").unwrap() };
    let scene = generate_scene(&config).unwrap();
    let stream = encode_metadata(&scene).unwrap();
    let model = BlobNetModel::init(2, 4);
    let a = run_pipeline_on(&scene, &stream, &model, &PipelineConfig { chunk_count: 1, ..PipelineConfig::default() }).unwrap();
    let b = run_pipeline_on(&scene, &stream, &model, &PipelineConfig { chunk_count: 8, worker_count: 3, ..PipelineConfig::default() }).unwrap();
    assert_eq!(a.analysis, b.analysis);
    assert_eq!(a.report.chunks, 1);
}

#[test]
fn speedup_identity_and_counts() {
    let scene = tiny();
    let stream = encode_metadata(&scene).unwrap();
    let cfg = PipelineConfig::default();
    let (model, _) = train_model(&scene, &stream, &cfg).unwrap();
    let r = run_pipeline_on(&scene, &stream, &model, &cfg).unwrap().report;
    let s = &r.selection;
    assert!(s.decoded_frames >= s.anchor_frames);
    assert!(s.inference_filtration_rate >= s.decode_filtration_rate);
    if s.decoded_frames > 0 {
        let identity = 1.0 / (1.0 - s.decode_filtration_rate);
        assert!((r.effective_decode_speedup - identity).abs() <= 1e-12 * identity);
    }
}

#[test]
fn local_queries_on_pipeline_output() {
    let scene = tiny();
    let stream = encode_metadata(&scene).unwrap();
    let cfg = PipelineConfig::default();
    let (model, _) = train_model(&scene, &stream, &cfg).unwrap();
    let out = run_pipeline_on(&scene, &stream, &model, &cfg).unwrap();
    let gt = ground_truth(&scene);
    for label in &scene.config.label_set {
        let acc = evaluate(&out.analysis, &gt, &Query::global(QueryKind::Bp, label)).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn config_files_and_errors() {
    let cfg = PipelineConfig::from_toml_str(
        "worker_count = 3\nseed = 9\n[sort]\nmax_age = 5\n[propagation]\niou_threshold = 0.4\n",
    )
    .unwrap();
    assert_eq!((cfg.worker_count, cfg.seed, cfg.sort.max_age, cfg.sort.min_hits), (3, 9, 5, 2));
    assert_eq!(cfg.propagation.iou_threshold, 0.4);
    assert!(PipelineConfig::from_toml_str("worker_count = 0").unwrap_err().is_config());
    assert!(PipelineConfig::from_toml_str("no_such_key = [").unwrap_err().is_config());

    let dir = tempfile::tempdir().unwrap();
    let scene = tiny();
    scene.save_json(dir.path().join("scene.json")).unwrap();
    write_stream(&encode_metadata(&scene).unwrap(), dir.path().join("meta.jsonl")).unwrap();
    let cfg = PipelineConfig {
        stream_path: Some(dir.path().join("meta.jsonl")),
        scene_path: Some(dir.path().join("scene.json")),
        model_path: Some(dir.path().join("model.bin")),
        ..PipelineConfig::default()
    };
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, CovaError::Config(_)), "{err}");

    let trained = PipelineConfig { train_if_missing: true, output_dir: Some(dir.path().join("out")), ..cfg };
    let out = run_pipeline(&trained).unwrap();
    assert!(dir.path().join("model.bin").exists());
    assert!(dir.path().join("out/video.report.json").exists());
    // the saved model is reused and gives the same hash
    let again = run_pipeline(&PipelineConfig { train_if_missing: false, ..trained }).unwrap();
    assert_eq!(out.report.config_hash, again.report.config_hash);
    assert_eq!(out.analysis, again.analysis);
}

//! End-to-end tests of the `cranio` binary on a miniature geometry:
//! 32-cubed volumes, an 8-cubed coarse grid and a 16-cubed fine canvas,
//! so every command finishes in seconds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cranio_cli::checkpoint::{load_model, save_model};
use cranio_cli::config::{save_config, ConfigFile};
use cranio_core::nn::train::TrainConfig;
use cranio_core::nn::{Model, NetworkConfig};
use cranio_core::nrrd::{read_nrrd, write_nrrd};
use cranio_core::pipeline::{Mode, PipelineConfig};
use cranio_core::{GridKind, VoxelGrid};
use tempfile::TempDir;

fn cranio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cranio"))
        .args(args)
        .output()
        .expect("spawn cranio")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn tiny_pipeline() -> PipelineConfig {
    PipelineConfig {
        coarse_dims: [8, 8, 8],
        // whole-volume canvas: localization of a barely-trained coarse
        // net can produce boxes up to the full extent
        fine_canvas_dims: [32, 32, 32],
        margin: 2,
        z_extent: 16,
        binarize_threshold: 0.5,
        mode: Mode::DirectImplant,
        fallback_whole_volume: true,
    }
}

fn tiny_coarse_config() -> ConfigFile {
    ConfigFile {
        pipeline: tiny_pipeline(),
        network: NetworkConfig::encoder_decoder(3, &[4, 8], [8, 8, 8]),
        train: TrainConfig {
            steps: 30,
            learning_rate: 1e-2,
            seed: 11,
            log_interval: 10,
        },
    }
}

fn tiny_fine_config() -> ConfigFile {
    ConfigFile {
        network: NetworkConfig::encoder_decoder(3, &[4, 8], [32, 32, 32]),
        ..tiny_coarse_config()
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Dataset + coarse/fine training artifacts shared by several tests.
fn trained_setup(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let ds = dir.join("ds");
    assert_ok(&cranio(&[
        "synth-data",
        "--n",
        "4",
        "--seed",
        "5",
        "--out",
        &path_str(&ds),
        "--dims",
        "32",
        "32",
        "32",
    ]));
    let coarse_cfg = dir.join("coarse.json");
    save_config(&coarse_cfg, &tiny_coarse_config()).unwrap();
    let fine_cfg = dir.join("fine.json");
    save_config(&fine_cfg, &tiny_fine_config()).unwrap();

    let n1 = dir.join("n1.bin");
    assert_ok(&cranio(&[
        "train",
        "--stage",
        "coarse",
        "--data",
        &path_str(&ds),
        "--config",
        &path_str(&coarse_cfg),
        "--out",
        &path_str(&n1),
    ]));
    let n2 = dir.join("n2.bin");
    assert_ok(&cranio(&[
        "train",
        "--stage",
        "fine",
        "--data",
        &path_str(&ds),
        "--config",
        &path_str(&fine_cfg),
        "--out",
        &path_str(&n2),
        "--coarse-model",
        &path_str(&n1),
    ]));
    (ds, n1, n2)
}

#[test]
fn synth_data_is_deterministic_and_rejects_n_zero() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        assert_ok(&cranio(&[
            "synth-data",
            "--n",
            "2",
            "--seed",
            "9",
            "--out",
            &path_str(out),
            "--dims",
            "24",
            "24",
            "24",
        ]));
    }
    // identical trees, byte for byte (manifest timing aside)
    for name in ["manifest.json", "case_000/complete.nrrd", "case_000/defective.nrrd",
        "case_000/implant.nrrd", "case_000/case.json", "case_001/implant.nrrd"]
    {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let out = cranio(&["synth-data", "--n", "0", "--out", &path_str(&tmp.path().join("z"))]);
    assert_eq!(out.status.code(), Some(1), "usage error expected");
}

#[test]
fn robustness_distribution_writes_non_sphere_shapes() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    assert_ok(&cranio(&[
        "synth-data",
        "--n",
        "3",
        "--seed",
        "2",
        "--distribution",
        "robustness",
        "--out",
        &path_str(&ds),
        "--dims",
        "32",
        "32",
        "32",
    ]));
    for i in 0..3 {
        let text = std::fs::read_to_string(ds.join(format!("case_{i:03}/case.json"))).unwrap();
        assert!(
            text.contains("\"box\"") || text.contains("\"cylinder\""),
            "robustness case {i} should not be a sphere: {text}"
        );
    }
}

#[test]
fn extract_skull_thresholds_and_keeps_largest_component() {
    let tmp = TempDir::new().unwrap();
    // a 6x6x6 CT: a 3-cubed bone block at 700 HU plus a far-away speck
    let dims = [6, 6, 6];
    let mut ct = VoxelGrid::zeros(dims, [1.0; 3], GridKind::Hu).unwrap();
    for z in 0..3 {
        for y in 0..3 {
            for x in 0..3 {
                let i = ct.index(x, y, z);
                ct.data_mut()[i] = 700.0;
            }
        }
    }
    let speck = ct.index(5, 5, 5);
    ct.data_mut()[speck] = 900.0;
    let ct_path = tmp.path().join("ct.nrrd");
    std::fs::write(&ct_path, write_nrrd(&ct).unwrap()).unwrap();
    let out_path = tmp.path().join("skull.nrrd");
    assert_ok(&cranio(&[
        "extract-skull",
        "--in",
        &path_str(&ct_path),
        "--out",
        &path_str(&out_path),
    ]));
    let skull = read_nrrd(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(skull.kind(), GridKind::Mask);
    assert_eq!(skull.foreground_count(), 27, "speck must be dropped");
}

#[test]
fn train_predict_evaluate_roundtrip() {
    let tmp = TempDir::new().unwrap();
    let (ds, n1, n2) = trained_setup(tmp.path());

    // loss CSV exists with a monotone step column
    let curve = std::fs::read_to_string(tmp.path().join("n1.loss.csv")).unwrap();
    let steps: Vec<usize> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!steps.is_empty());
    assert!(steps.windows(2).all(|w| w[0] < w[1]), "steps {steps:?}");

    // checkpoints round-trip exactly
    let m = load_model(&n1).unwrap();
    let copy = tmp.path().join("n1copy.bin");
    save_model(&copy, &m).unwrap();
    assert_eq!(std::fs::read(&n1).unwrap(), std::fs::read(&copy).unwrap());

    // dataset-mode predict writes one implant per case, deterministically
    let pred_a = tmp.path().join("pred_a");
    let pred_b = tmp.path().join("pred_b");
    for pred in [&pred_a, &pred_b] {
        assert_ok(&cranio(&[
            "predict",
            "--n1",
            &path_str(&n1),
            "--n2",
            &path_str(&n2),
            "--in",
            &path_str(&ds),
            "--out",
            &path_str(pred),
            "--config",
            &path_str(&tmp.path().join("coarse.json")),
        ]));
    }
    for i in 0..4 {
        let name = format!("case_{i:03}_implant.nrrd");
        let x = std::fs::read(pred_a.join(&name)).unwrap();
        let y = std::fs::read(pred_b.join(&name)).unwrap();
        assert_eq!(x, y, "{name} not deterministic");
        let g = read_nrrd(&x).unwrap();
        assert_eq!(g.dims(), [32, 32, 32], "dims preserved");
    }

    // evaluating predictions against ground truth produces both report files
    let report = tmp.path().join("report");
    assert_ok(&cranio(&[
        "evaluate",
        "--pred",
        &path_str(&pred_a),
        "--gt",
        &path_str(&ds),
        "--out",
        &path_str(&report),
    ]));
    let csv = std::fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with("case_id,dsc,hd_mm,re\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);

    // evaluating ground truth against itself scores DSC 1 everywhere
    let self_pred = tmp.path().join("self");
    std::fs::create_dir_all(&self_pred).unwrap();
    for i in 0..4 {
        std::fs::copy(
            ds.join(format!("case_{i:03}/implant.nrrd")),
            self_pred.join(format!("case_{i:03}_implant.nrrd")),
        )
        .unwrap();
    }
    let report2 = tmp.path().join("self_report");
    assert_ok(&cranio(&[
        "evaluate",
        "--pred",
        &path_str(&self_pred),
        "--gt",
        &path_str(&ds),
        "--out",
        &path_str(&report2),
    ]));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("self_report.json")).unwrap())
            .unwrap();
    assert_eq!(json["dsc_aggregate"]["mean"].as_f64().unwrap(), 1.0);
    assert_eq!(json["re_aggregate"]["max"].as_f64().unwrap(), 0.0);
}

#[test]
fn fine_stage_without_coarse_model_is_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    save_config(&cfg, &tiny_fine_config()).unwrap();
    let out = cranio(&[
        "train",
        "--stage",
        "fine",
        "--data",
        "nowhere",
        "--config",
        &path_str(&cfg),
        "--out",
        &path_str(&tmp.path().join("m.bin")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--coarse-model"));
}

#[test]
fn missing_dataset_is_data_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    save_config(&cfg, &tiny_coarse_config()).unwrap();
    let out = cranio(&[
        "train",
        "--stage",
        "coarse",
        "--data",
        &path_str(&tmp.path().join("missing")),
        "--config",
        &path_str(&cfg),
        "--out",
        &path_str(&tmp.path().join("m.bin")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn param_count_prints_configured_total() {
    let tmp = TempDir::new().unwrap();
    // single conv layer, kernel 3, 1 -> 8 channels: 3^3 * 8 + 8 = 224
    let cfg_path = tmp.path().join("cfg.json");
    let mut cfg = tiny_coarse_config();
    cfg.network = NetworkConfig {
        layers: vec![cranio_core::nn::LayerSpec::conv(3, 1, 8)],
        input_dims: [8, 8, 8],
    };
    save_config(&cfg_path, &cfg).unwrap();
    let out = cranio(&["param-count", "--config", &path_str(&cfg_path)]);
    assert_ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "224");

    // an empty ladder counts zero
    cfg.network.layers.clear();
    save_config(&cfg_path, &cfg).unwrap();
    let out = cranio(&["param-count", "--config", &path_str(&cfg_path)]);
    assert_ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");
}

#[test]
fn same_training_inputs_give_identical_checkpoints() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    assert_ok(&cranio(&[
        "synth-data",
        "--n",
        "2",
        "--seed",
        "3",
        "--out",
        &path_str(&ds),
        "--dims",
        "24",
        "24",
        "24",
    ]));
    let mut cfg = tiny_coarse_config();
    cfg.train.steps = 10;
    let cfg_path = tmp.path().join("cfg.json");
    save_config(&cfg_path, &cfg).unwrap();
    let mut bins = Vec::new();
    for name in ["m1.bin", "m2.bin"] {
        let out = tmp.path().join(name);
        assert_ok(&cranio(&[
            "train",
            "--stage",
            "coarse",
            "--data",
            &path_str(&ds),
            "--config",
            &path_str(&cfg_path),
            "--out",
            &path_str(&out),
        ]));
        bins.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bins[0], bins[1]);

    // a model trained at these dims must round-trip through the checkpoint
    let model = Model::init(cfg.network.clone(), 1).unwrap();
    let p = tmp.path().join("fresh.bin");
    save_model(&p, &model).unwrap();
    let back = load_model(&p).unwrap();
    assert_eq!(back.config, model.config);
    assert_eq!(back.weights, model.weights);
    assert_eq!(back.biases, model.biases);
    assert_eq!(back.seed, model.seed);
}

//! `cranio`: dataset synthesis, skull extraction, training, prediction and
//! evaluation for the coarse-to-fine cranial implant pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 pipeline failure.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use cranio_core::cases::{extract_skull, make_dataset, DatasetConfig, Distribution};
use cranio_core::nn::param_count;
use cranio_core::pipeline::{run_pipeline, train_stage, Mode, PipelineConfig, Stage};

use cranio_cli::checkpoint::{load_model, save_model};
use cranio_cli::config::load_config;
use cranio_cli::dataset::{load_dataset, read_manifest, write_dataset};
use cranio_cli::io::{read_grid, write_grid};
use cranio_cli::manifest::ManifestBuilder;
use cranio_cli::report::{loss_curve_csv, write_report};
use cranio_cli::CliError;

#[derive(Parser)]
#[command(name = "cranio", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistributionArg {
    InDistribution,
    Robustness,
}

impl From<DistributionArg> for Distribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::InDistribution => Distribution::InDistribution,
            DistributionArg::Robustness => Distribution::Robustness,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Coarse,
    Fine,
    Completion,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Completion,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom dataset.
    SynthData {
        /// Number of cases; must be at least 1.
        #[arg(long)]
        n: usize,
        /// Split label recorded in the manifest.
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long, value_enum, default_value = "in-distribution")]
        distribution: DistributionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Grid dims; defaults to the desk-scale 128 128 128.
        #[arg(long, num_args = 3)]
        dims: Option<Vec<usize>>,
    },
    /// Threshold a CT volume and keep the largest connected component.
    ExtractSkull {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bone threshold in Hounsfield units.
        #[arg(long, default_value_t = 150.0)]
        hu: f32,
    },
    /// Train one stage of the pipeline.
    Train {
        #[arg(long, value_enum)]
        stage: StageArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Coarse checkpoint; required for --stage fine.
        #[arg(long)]
        coarse_model: Option<PathBuf>,
    },
    /// Run the two-stage pipeline on one volume or a dataset directory.
    Predict {
        #[arg(long)]
        n1: PathBuf,
        #[arg(long)]
        n2: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Pipeline geometry; defaults to desk scale.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predicted implants against ground truth.
    Evaluate {
        /// Directory of `<case>_implant.nrrd` predictions.
        #[arg(long)]
        pred: PathBuf,
        /// Dataset directory with ground-truth implants.
        #[arg(long)]
        gt: PathBuf,
        /// Report stem; writes `<stem>.csv` and `<stem>.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the trainable parameter count of the configured network.
    ParamCount {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn command_line() -> Vec<String> {
    std::env::args().collect()
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::SynthData {
            n,
            split,
            distribution,
            seed,
            out,
            dims,
        } => synth_data(n, &split, distribution.into(), seed, &out, dims),
        Command::ExtractSkull { input, out, hu } => extract_skull_cmd(&input, &out, hu),
        Command::Train {
            stage,
            data,
            config,
            out,
            coarse_model,
        } => train_cmd(stage, &data, &config, &out, coarse_model.as_deref()),
        Command::Predict {
            n1,
            n2,
            input,
            out,
            mode,
            config,
        } => predict_cmd(&n1, &n2, &input, &out, mode, config.as_deref()),
        Command::Evaluate { pred, gt, out } => evaluate_cmd(&pred, &gt, &out),
        Command::ParamCount { config } => {
            // no structural validation here: an empty ladder legitimately
            // counts zero parameters
            let bytes = std::fs::read(&config)
                .map_err(|e| CliError::data(&format!("reading {}", config.display()), e))?;
            let parsed: cranio_cli::config::ConfigFile = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::data(&format!("parsing {}", config.display()), e))?;
            println!("{}", param_count(&parsed.network));
            Ok(())
        }
    }
}

fn synth_data(
    n: usize,
    split: &str,
    distribution: Distribution,
    seed: u64,
    out: &Path,
    dims: Option<Vec<usize>>,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let mut manifest = ManifestBuilder::new(command_line());
    manifest.seed(seed).output(out);
    let config = match dims {
        Some(d) => DatasetConfig::tiny([d[0], d[1], d[2]]),
        None => DatasetConfig::desk_scale(),
    };
    let cases = make_dataset(n, distribution, &config, seed)
        .map_err(|e| CliError::data("generating dataset", e))?;
    write_dataset(out, &cases, split, distribution, seed, &config)?;
    manifest.write(out)
}

fn extract_skull_cmd(input: &Path, out: &Path, hu: f32) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(command_line());
    manifest.input(input).output(out);
    let ct = read_grid(input)?;
    let skull = extract_skull(&ct, hu).map_err(|e| CliError::data("extracting skull", e))?;
    write_grid(out, &skull)?;
    manifest.write(out.parent().unwrap_or(Path::new(".")))
}

fn train_cmd(
    stage: StageArg,
    data: &Path,
    config_path: &Path,
    out: &Path,
    coarse_model: Option<&Path>,
) -> Result<(), CliError> {
    let stage = match stage {
        StageArg::Coarse => Stage::Coarse,
        StageArg::Fine => Stage::Fine,
        StageArg::Completion => Stage::Completion,
    };
    if stage == Stage::Fine && coarse_model.is_none() {
        return Err(CliError::Usage(
            "--stage fine requires --coarse-model".into(),
        ));
    }
    let loaded = load_config(config_path)?;
    let mut manifest = ManifestBuilder::new(command_line());
    manifest
        .config(config_path, &loaded.sha256)
        .seed(loaded.config.train.seed)
        .input(data)
        .output(out);
    let cases = load_dataset(data)?;
    let n1 = coarse_model.map(load_model).transpose()?;
    let (model, curve) = train_stage(
        stage,
        &cases,
        &loaded.config.pipeline,
        loaded.config.network.clone(),
        &loaded.config.train,
        n1.as_ref(),
    )?;
    save_model(out, &model)?;
    let curve_path = out.with_extension("loss.csv");
    std::fs::write(&curve_path, loss_curve_csv(&curve))?;
    manifest.output(&curve_path);
    manifest.write(out.parent().unwrap_or(Path::new(".")))
}

fn predict_cmd(
    n1_path: &Path,
    n2_path: &Path,
    input: &Path,
    out: &Path,
    mode: Option<ModeArg>,
    config_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(command_line());
    manifest.input(input).output(out);
    let mut cfg: PipelineConfig = match config_path {
        Some(p) => {
            let loaded = load_config(p)?;
            manifest.config(p, &loaded.sha256);
            loaded.config.pipeline
        }
        None => PipelineConfig::desk_scale(),
    };
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Direct => Mode::DirectImplant,
            ModeArg::Completion => Mode::Completion,
        };
    }
    let n1 = load_model(n1_path)?;
    let n2 = load_model(n2_path)?;

    if input.is_dir() {
        let dataset_manifest = read_manifest(input)?;
        std::fs::create_dir_all(out)?;
        for id in &dataset_manifest.ids {
            let defective = read_grid(&input.join(id).join("defective.nrrd"))?;
            let output = run_pipeline(&n1, &n2, &defective, &cfg)?;
            write_grid(&out.join(format!("{id}_implant.nrrd")), &output.implant)?;
        }
        manifest.write(out)
    } else {
        let defective = read_grid(input)?;
        let output = run_pipeline(&n1, &n2, &defective, &cfg)?;
        write_grid(out, &output.implant)?;
        manifest.write(out.parent().unwrap_or(Path::new(".")))
    }
}

fn evaluate_cmd(pred: &Path, gt: &Path, out: &Path) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new(command_line());
    manifest.input(pred).input(gt).output(out);
    let gts = cranio_cli::dataset::load_implants(gt)?;
    let mut cases = Vec::with_capacity(gts.len());
    for (id, gt_mask) in gts {
        let pred_path = pred.join(format!("{id}_implant.nrrd"));
        if !pred_path.exists() {
            return Err(CliError::Data(format!(
                "missing prediction for case {id}: {}",
                pred_path.display()
            )));
        }
        let pred_mask = read_grid(&pred_path)?;
        cases.push((id, pred_mask, gt_mask));
    }
    let report = cranio_core::metrics::evaluate_set(&cases)
        .map_err(|e| CliError::data("evaluating", e))?;
    write_report(out, &report)?;
    manifest.write(out.parent().unwrap_or(Path::new(".")))
}

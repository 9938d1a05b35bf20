//! The coarse-to-fine workflow: coarse implant prediction on a downsampled
//! skull, defect localization via bounding box + margin + zero-padding,
//! fine prediction on the cropped high-resolution region, restoration to
//! full resolution. Also the indirect mode that completes the skull first
//! and takes the implant as the set difference against the input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbox::{bbox_xy, crop, expand_margin, restore, zero_pad_center, BBox, Placement};
use crate::cases::{CaseError, CaseTriple};
use crate::error::GridError;
use crate::grid::VoxelGrid;
use crate::nn::tensor::Tensor;
use crate::nn::train::{train, LossCurve, TrainConfig};
use crate::nn::{Model, NetworkConfig, NnError};
use crate::resample::{binarize, downsample, upsample_spline2};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("coarse prediction is empty after binarization; localization failed")]
    LocalizationFailed,
    #[error("crop {bbox:?} does not fit the fine canvas {canvas:?}")]
    CropExceedsCanvas { bbox: BBox, canvas: [usize; 3] },
    #[error("model input dims {model:?} do not match configured dims {expected:?}")]
    ModelDimsMismatch {
        model: [usize; 3],
        expected: [usize; 3],
    },
    #[error("fine stage requires a trained coarse model")]
    MissingCoarseModel,
    #[error("the coarse model localized none of the training cases")]
    NoLocalizableCases,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Case(#[from] CaseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Networks predict the implant itself.
    DirectImplant,
    /// Networks predict the complete skull; the implant is the difference
    /// against the defective input.
    Completion,
}

/// Geometry and policy of the two-stage pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub coarse_dims: [usize; 3],
    pub fine_canvas_dims: [usize; 3],
    /// x/y margin added around the tight bounding box.
    pub margin: usize,
    /// Fixed z window length of the bounding box.
    pub z_extent: usize,
    pub binarize_threshold: f32,
    pub mode: Mode,
    /// On localization failure, fall back to the whole-volume box instead
    /// of erroring (the crop must still fit the fine canvas).
    pub fallback_whole_volume: bool,
}

impl PipelineConfig {
    /// Quarter-scale analog of the published geometry: 128^3 volumes,
    /// 32x32x16 coarse grid, 64x64x32 fine canvas, margin 5, z window 32.
    pub fn desk_scale() -> Self {
        Self {
            coarse_dims: [32, 32, 16],
            fine_canvas_dims: [64, 64, 32],
            margin: 5,
            z_extent: 32,
            binarize_threshold: 0.5,
            mode: Mode::DirectImplant,
            fallback_whole_volume: false,
        }
    }

    /// The published geometry: 512^2 x Z volumes, 128^2 x 64 coarse grid,
    /// 256^2 x 128 fine canvas, margin 20, z window 128.
    pub fn paper_scale() -> Self {
        Self {
            coarse_dims: [128, 128, 64],
            fine_canvas_dims: [256, 256, 128],
            margin: 20,
            z_extent: 128,
            binarize_threshold: 0.5,
            mode: Mode::DirectImplant,
            fallback_whole_volume: false,
        }
    }
}

/// Default network ladders.
pub mod configs {
    use super::NetworkConfig;

    /// Desk-scale coarse network: a single wide-kernel level. At the coarse
    /// grid the implant spans only a handful of cells, so one stride-2 stage
    /// with a large kernel localizes better than a deeper ladder.
    pub fn desk_n1(coarse_dims: [usize; 3]) -> NetworkConfig {
        NetworkConfig::encoder_decoder(7, &[16], coarse_dims)
    }

    /// Desk-scale fine network: kernel three, reduced channels.
    pub fn desk_n2(canvas_dims: [usize; 3]) -> NetworkConfig {
        NetworkConfig::encoder_decoder(3, &[8, 16, 32], canvas_dims)
    }

    /// Paper-scale coarse ladder (kernel five); tens of millions of
    /// parameters, mirroring the published budget contrast.
    pub fn paper_n1() -> NetworkConfig {
        NetworkConfig::encoder_decoder(5, &[32, 64, 128, 256, 512], [128, 128, 64])
    }

    /// Paper-scale fine ladder (kernel three, reduced feature maps).
    pub fn paper_n2() -> NetworkConfig {
        NetworkConfig::encoder_decoder(3, &[16, 32, 64, 128], [256, 256, 128])
    }
}

fn with_spacing(grid: VoxelGrid, spacing: [f64; 3]) -> Result<VoxelGrid, GridError> {
    VoxelGrid::new(grid.dims(), spacing, grid.kind(), grid.data().to_vec())
}

/// Coarse prediction at full resolution: downsample, run the coarse
/// network, spline-upsample the probabilities back to the input dims.
pub fn predict_coarse(
    n1: &Model,
    defective: &VoxelGrid,
    cfg: &PipelineConfig,
) -> Result<VoxelGrid, PipelineError> {
    if n1.config.input_dims != cfg.coarse_dims {
        return Err(PipelineError::ModelDimsMismatch {
            model: n1.config.input_dims,
            expected: cfg.coarse_dims,
        });
    }
    let down = downsample(defective, cfg.coarse_dims)?;
    let out = n1.forward(&Tensor::from_grid(&down))?;
    let prob = out.to_probability_grid(down.spacing())?;
    let up = upsample_spline2(&prob, defective.dims())?;
    Ok(with_spacing(up, defective.spacing())?)
}

/// Margin-expanded bounding box of a binarized coarse prediction.
pub fn localize(coarse: &VoxelGrid, cfg: &PipelineConfig) -> Result<BBox, PipelineError> {
    let mask = binarize(coarse, cfg.binarize_threshold)?;
    localize_from_mask(&mask, cfg)
}

/// Same as [`localize`] but starting from an already-binary implant estimate.
pub fn localize_from_mask(mask: &VoxelGrid, cfg: &PipelineConfig) -> Result<BBox, PipelineError> {
    match bbox_xy(mask, cfg.z_extent) {
        Ok(b) => Ok(expand_margin(b, cfg.margin, mask.dims())),
        Err(GridError::EmptyMask) => {
            if cfg.fallback_whole_volume {
                let [nx, ny, nz] = mask.dims();
                let w = cfg.z_extent.min(nz);
                let start = (nz - w) / 2;
                Ok(BBox::new([0, 0, start], [nx, ny, start + w])?)
            } else {
                Err(PipelineError::LocalizationFailed)
            }
        }
        Err(e) => Err(e.into()),
    }
}

/// The fine network's input for one defective skull: crop at the localized
/// box, zero-padded into the fine canvas. Built from the defective skull
/// and the coarse model only; ground truth never flows in here.
pub fn fine_input(
    n1: &Model,
    defective: &VoxelGrid,
    cfg: &PipelineConfig,
) -> Result<(VoxelGrid, Placement, BBox), PipelineError> {
    let coarse = predict_coarse(n1, defective, cfg)?;
    let b = match cfg.mode {
        Mode::DirectImplant => localize(&coarse, cfg)?,
        Mode::Completion => {
            let est = binarize(&coarse, cfg.binarize_threshold)?.mask_minus(defective)?;
            localize_from_mask(&est, cfg)?
        }
    };
    let (canvas, placement) = pad_crop(defective, b, cfg)?;
    Ok((canvas, placement, b))
}

fn pad_crop(
    grid: &VoxelGrid,
    b: BBox,
    cfg: &PipelineConfig,
) -> Result<(VoxelGrid, Placement), PipelineError> {
    let block = crop(grid, b)?;
    let d = block.dims();
    if (0..3).any(|a| d[a] > cfg.fine_canvas_dims[a]) {
        return Err(PipelineError::CropExceedsCanvas {
            bbox: b,
            canvas: cfg.fine_canvas_dims,
        });
    }
    Ok(zero_pad_center(&block, cfg.fine_canvas_dims, b, grid.dims())?)
}

/// Fine prediction restored to the full-resolution frame of `defective`.
pub fn predict_fine(
    n2: &Model,
    defective: &VoxelGrid,
    b: BBox,
    cfg: &PipelineConfig,
) -> Result<VoxelGrid, PipelineError> {
    if n2.config.input_dims != cfg.fine_canvas_dims {
        return Err(PipelineError::ModelDimsMismatch {
            model: n2.config.input_dims,
            expected: cfg.fine_canvas_dims,
        });
    }
    let (canvas, placement) = pad_crop(defective, b, cfg)?;
    let out = n2.forward(&Tensor::from_grid(&canvas))?;
    let prob = out.to_probability_grid(defective.spacing())?;
    let mask = binarize(&prob, cfg.binarize_threshold)?;
    Ok(restore(&mask, &placement)?)
}

/// End-to-end pipeline output.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Predicted implant, full resolution, disjoint from the input skull.
    pub implant: VoxelGrid,
    /// Completion mode only: the completed skull (prediction OR input).
    pub completed: Option<VoxelGrid>,
    pub bbox: BBox,
}

/// Coarse prediction, localization, fine prediction, restoration.
pub fn run_pipeline(
    n1: &Model,
    n2: &Model,
    defective: &VoxelGrid,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let (canvas, placement, b) = fine_input(n1, defective, cfg)?;
    let out = n2.forward(&Tensor::from_grid(&canvas))?;
    let prob = out.to_probability_grid(defective.spacing())?;
    let mask = binarize(&prob, cfg.binarize_threshold)?;
    let restored = restore(&mask, &placement)?;
    match cfg.mode {
        Mode::DirectImplant => {
            // implants must not intersect remaining bone
            let implant = restored.mask_minus(defective)?;
            Ok(PipelineOutput {
                implant,
                completed: None,
                bbox: b,
            })
        }
        Mode::Completion => {
            let completed = restored.mask_or(defective)?;
            let implant = completed.mask_minus(defective)?;
            Ok(PipelineOutput {
                implant,
                completed: Some(completed),
                bbox: b,
            })
        }
    }
}

/// Which network a training run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Coarse network, implant targets, downsampled grids.
    Coarse,
    /// Fine network; inputs are crops at boxes predicted by the supplied
    /// coarse model, mirroring the consecutive training procedure.
    Fine,
    /// Coarse network with complete skulls as targets.
    Completion,
}

/// Trains one stage over a case set.
pub fn train_stage(
    stage: Stage,
    dataset: &[CaseTriple],
    cfg: &PipelineConfig,
    net: NetworkConfig,
    tc: &TrainConfig,
    coarse_model: Option<&Model>,
) -> Result<(Model, LossCurve), PipelineError> {
    let mut pairs: Vec<(Tensor, Tensor)> = Vec::with_capacity(dataset.len());
    match stage {
        Stage::Coarse | Stage::Completion => {
            let expected = cfg.coarse_dims;
            if net.input_dims != expected {
                return Err(PipelineError::ModelDimsMismatch {
                    model: net.input_dims,
                    expected,
                });
            }
            for case in dataset {
                let input = downsample(&case.defective, cfg.coarse_dims)?;
                let target_full = match stage {
                    Stage::Coarse => &case.implant,
                    _ => &case.complete,
                };
                let target = downsample(target_full, cfg.coarse_dims)?;
                pairs.push((Tensor::from_grid(&input), Tensor::from_grid(&target)));
            }
        }
        Stage::Fine => {
            let n1 = coarse_model.ok_or(PipelineError::MissingCoarseModel)?;
            if net.input_dims != cfg.fine_canvas_dims {
                return Err(PipelineError::ModelDimsMismatch {
                    model: net.input_dims,
                    expected: cfg.fine_canvas_dims,
                });
            }
            let mut jrng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0xB0C5_0FF5E7);
            for case in dataset {
                // Cases the coarse model cannot localize (or whose crop
                // overflows the canvas) contribute nothing to the fine
                // stage; skip them rather than aborting the whole run.
                let (canvas, _placement, b) = match fine_input(n1, &case.defective, cfg) {
                    Ok(t) => t,
                    Err(
                        PipelineError::LocalizationFailed
                        | PipelineError::CropExceedsCanvas { .. },
                    ) => continue,
                    Err(e) => return Err(e),
                };
                let target_full = match cfg.mode {
                    Mode::DirectImplant => &case.implant,
                    Mode::Completion => &case.complete,
                };
                let (target, _) = pad_crop(target_full, b, cfg)?;
                pairs.push((Tensor::from_grid(&canvas), Tensor::from_grid(&target)));
                // Augment with one translated copy of the box per case: the
                // fine model must tolerate the localization error of the
                // coarse model, which the clean crops alone do not teach.
                let jb = jitter_box(b, cfg.margin.max(1), case.defective.dims(), &mut jrng);
                let (jcanvas, _) = pad_crop(&case.defective, jb, cfg)?;
                let (jtarget, _) = pad_crop(target_full, jb, cfg)?;
                pairs.push((Tensor::from_grid(&jcanvas), Tensor::from_grid(&jtarget)));
            }
            if pairs.is_empty() {
                return Err(PipelineError::NoLocalizableCases);
            }
        }
    }
    let model = Model::init(net, tc.seed)?;
    Ok(train(model, &pairs, tc)?)
}

/// Translate `b` by a uniform offset of at most `amp` voxels per axis,
/// clamped so the box keeps its size and stays inside `dims`.
fn jitter_box(b: BBox, amp: usize, dims: [usize; 3], rng: &mut ChaCha8Rng) -> BBox {
    let a = amp as i64;
    let mut min = [0usize; 3];
    let mut max = [0usize; 3];
    for axis in 0..3 {
        let d = rng.gen_range(-a..=a);
        let size = (b.max[axis] - b.min[axis]) as i64;
        let hi = dims[axis] as i64 - size;
        let lo = (b.min[axis] as i64 + d).clamp(0, hi);
        min[axis] = lo as usize;
        max[axis] = (lo + size) as usize;
    }
    BBox { min, max }
}

//! Evaluation metrics: Dice similarity, symmetric Hausdorff distance in
//! millimeters and the false-voxel reconstruction error, plus per-set
//! aggregation with quartile statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("grid dims mismatch: {a:?} vs {b:?}")]
    DimsMismatch { a: [usize; 3], b: [usize; 3] },
    #[error("Hausdorff distance undefined: {side} mask is empty")]
    HausdorffUndefined { side: &'static str },
    #[error("prediction and ground-truth lists differ in length: {preds} vs {gts}")]
    ListLengthMismatch { preds: usize, gts: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn require_masks(p: &VoxelGrid, g: &VoxelGrid) -> Result<(), MetricError> {
    if p.dims() != g.dims() {
        return Err(MetricError::DimsMismatch {
            a: p.dims(),
            b: g.dims(),
        });
    }
    for m in [p, g] {
        if m.kind() != GridKind::Mask {
            return Err(MetricError::Grid(GridError::KindMismatch {
                expected: GridKind::Mask,
                got: m.kind(),
            }));
        }
    }
    Ok(())
}

fn overlap_counts(p: &VoxelGrid, g: &VoxelGrid) -> (usize, usize, usize) {
    let mut np = 0;
    let mut ng = 0;
    let mut ni = 0;
    for (&a, &b) in p.data().iter().zip(g.data()) {
        let fa = a != 0.0;
        let fb = b != 0.0;
        np += fa as usize;
        ng += fb as usize;
        ni += (fa && fb) as usize;
    }
    (np, ng, ni)
}

/// Dice similarity `2|P∩G| / (|P|+|G|)`. Both masks empty scores 1,
/// exactly one empty scores 0.
pub fn dsc(p: &VoxelGrid, g: &VoxelGrid) -> Result<f64, MetricError> {
    require_masks(p, g)?;
    let (np, ng, ni) = overlap_counts(p, g);
    if np + ng == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * ni as f64 / (np + ng) as f64)
}

/// Symmetric Hausdorff distance between foreground voxel centers in
/// physical coordinates (`index * spacing`), Euclidean metric.
pub fn hausdorff_mm(p: &VoxelGrid, g: &VoxelGrid, spacing: [f64; 3]) -> Result<f64, MetricError> {
    require_masks(p, g)?;
    let pts = |m: &VoxelGrid| -> Vec<[f64; 3]> {
        m.foreground_indices()
            .iter()
            .map(|&i| {
                let [x, y, z] = m.coords(i);
                [
                    x as f64 * spacing[0],
                    y as f64 * spacing[1],
                    z as f64 * spacing[2],
                ]
            })
            .collect()
    };
    let a = pts(p);
    let b = pts(g);
    if a.is_empty() {
        return Err(MetricError::HausdorffUndefined { side: "prediction" });
    }
    if b.is_empty() {
        return Err(MetricError::HausdorffUndefined {
            side: "ground-truth",
        });
    }
    Ok(directed_hd(&a, &b).max(directed_hd(&b, &a)).sqrt())
}

/// Squared directed Hausdorff distance from `a` to `b`.
fn directed_hd(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.par_iter()
        .map(|pa| {
            b.iter()
                .map(|pb| {
                    let dx = pa[0] - pb[0];
                    let dy = pa[1] - pb[1];
                    let dz = pa[2] - pb[2];
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

/// Reconstruction error: fraction of voxels where the masks disagree.
pub fn reconstruction_error(p: &VoxelGrid, g: &VoxelGrid) -> Result<f64, MetricError> {
    require_masks(p, g)?;
    let wrong = p
        .data()
        .iter()
        .zip(g.data())
        .filter(|(&a, &b)| (a != 0.0) != (b != 0.0))
        .count();
    Ok(wrong as f64 / p.voxel_count() as f64)
}

/// One evaluated case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRow {
    pub case_id: String,
    pub dsc: f64,
    /// None when either mask was empty and HD is undefined.
    pub hd_mm: Option<f64>,
    pub re: f64,
}

/// Min, quartiles and mean of one metric column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Aggregate {
    /// Linear-interpolation (inclusive) quantiles over the finite values.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| -> f64 {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        };
        Some(Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median: quantile(0.5),
            q1: quantile(0.25),
            q3: quantile(0.75),
            min: sorted[0],
            max: *sorted.last().unwrap(),
            count: sorted.len(),
        })
    }
}

/// Per-case rows plus per-metric aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<CaseRow>,
    pub dsc_aggregate: Option<Aggregate>,
    pub hd_aggregate: Option<Aggregate>,
    pub re_aggregate: Option<Aggregate>,
    /// Cases where HD was undefined (excluded from the HD aggregate).
    pub hd_undefined_cases: usize,
    /// How the HD point sets were chosen, for the report metadata.
    pub hd_point_set: String,
}

/// Evaluates aligned (case id, prediction, ground truth) lists. Rows are
/// ordered by case id; HD-undefined cases are kept as rows with a missing
/// HD value and counted.
pub fn evaluate_set(
    cases: &[(String, VoxelGrid, VoxelGrid)],
) -> Result<EvalReport, MetricError> {
    let mut rows = Vec::with_capacity(cases.len());
    let mut hd_undefined = 0usize;
    for (id, pred, gt) in cases {
        let d = dsc(pred, gt)?;
        let re = reconstruction_error(pred, gt)?;
        let hd = match hausdorff_mm(pred, gt, gt.spacing()) {
            Ok(v) => Some(v),
            Err(MetricError::HausdorffUndefined { .. }) => {
                hd_undefined += 1;
                None
            }
            Err(e) => return Err(e),
        };
        rows.push(CaseRow {
            case_id: id.clone(),
            dsc: d,
            hd_mm: hd,
            re,
        });
    }
    rows.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    let dscs: Vec<f64> = rows.iter().map(|r| r.dsc).collect();
    let hds: Vec<f64> = rows.iter().filter_map(|r| r.hd_mm).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.re).collect();
    Ok(EvalReport {
        dsc_aggregate: Aggregate::from_values(&dscs),
        hd_aggregate: Aggregate::from_values(&hds),
        re_aggregate: Aggregate::from_values(&res),
        hd_undefined_cases: hd_undefined,
        hd_point_set: "all foreground voxel centers".to_string(),
        rows,
    })
}

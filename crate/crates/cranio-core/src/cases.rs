//! Case generation: skull extraction from intensity volumes, artificial
//! defect injection, synthetic skull phantoms and dataset assembly.
//!
//! A case is the triple (defective skull, implant, complete skull) with
//! `defective OR implant = complete` and `defective AND implant = empty`
//! holding voxelwise by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::components::{largest_component, Connectivity};
use crate::error::GridError;
use crate::grid::{GridKind, VoxelGrid};
use crate::resample::threshold;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("no bone voxels above the threshold")]
    EmptySkull,
    #[error("defect region does not intersect the skull")]
    DefectMissesSkull,
    #[error("degenerate phantom parameters: {0}")]
    BadPhantomParams(String),
    #[error("case invariant violated: {0}")]
    InvariantViolated(&'static str),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Geometric primitive removed from a complete skull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DefectShape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    /// Axis-aligned (z) cylinder.
    Cylinder { radius: f64, half_height: f64 },
}

/// A defect: a shape placed at a real voxel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    #[serde(flatten)]
    pub shape: DefectShape,
    pub center: [f64; 3],
    pub seed: u64,
}

impl DefectSpec {
    pub fn contains(&self, v: [usize; 3]) -> bool {
        let d = [
            v[0] as f64 - self.center[0],
            v[1] as f64 - self.center[1],
            v[2] as f64 - self.center[2],
        ];
        match self.shape {
            DefectShape::Sphere { radius } => {
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius
            }
            DefectShape::Box { half_extents } => {
                (0..3).all(|a| d[a].abs() <= half_extents[a])
            }
            DefectShape::Cylinder {
                radius,
                half_height,
            } => d[0] * d[0] + d[1] * d[1] <= radius * radius && d[2].abs() <= half_height,
        }
    }

    fn validate(&self, dims: [usize; 3]) -> Result<(), CaseError> {
        let positive = match self.shape {
            DefectShape::Sphere { radius } => radius > 0.0,
            DefectShape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            DefectShape::Cylinder {
                radius,
                half_height,
            } => radius > 0.0 && half_height > 0.0,
        };
        if !positive {
            return Err(CaseError::BadPhantomParams("non-positive defect size".into()));
        }
        for a in 0..3 {
            if self.center[a] < 0.0 || self.center[a] >= dims[a] as f64 {
                return Err(CaseError::BadPhantomParams(format!(
                    "defect center {:?} outside dims {:?}",
                    self.center, dims
                )));
            }
        }
        Ok(())
    }
}

/// Defective skull, implant and complete skull for one case.
#[derive(Debug, Clone)]
pub struct CaseTriple {
    pub id: String,
    pub defective: VoxelGrid,
    pub implant: VoxelGrid,
    pub complete: VoxelGrid,
    pub spec: DefectSpec,
}

impl CaseTriple {
    /// Checks the triple invariants voxelwise.
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.defective.dims() != self.complete.dims()
            || self.implant.dims() != self.complete.dims()
        {
            return Err(CaseError::InvariantViolated("dims mismatch"));
        }
        let mut implant_nonempty = false;
        for i in 0..self.complete.voxel_count() {
            let d = self.defective.data()[i] != 0.0;
            let im = self.implant.data()[i] != 0.0;
            let c = self.complete.data()[i] != 0.0;
            if d && im {
                return Err(CaseError::InvariantViolated("defective AND implant nonempty"));
            }
            if (d || im) != c {
                return Err(CaseError::InvariantViolated("defective OR implant != complete"));
            }
            implant_nonempty |= im;
        }
        if !implant_nonempty {
            return Err(CaseError::InvariantViolated("implant empty"));
        }
        Ok(())
    }
}

/// Threshold at `hu_lo` then keep the largest connected component,
/// dropping CT-table structures that survive thresholding.
pub fn extract_skull(ct: &VoxelGrid, hu_lo: f32) -> Result<VoxelGrid, CaseError> {
    let mask = threshold(ct, hu_lo)?;
    if mask.foreground_count() == 0 {
        return Err(CaseError::EmptySkull);
    }
    Ok(largest_component(&mask, Connectivity::TwentySix)?)
}

/// Removes the spec region from a complete skull, returning the case triple.
pub fn inject_defect(
    complete: &VoxelGrid,
    spec: DefectSpec,
    id: impl Into<String>,
) -> Result<CaseTriple, CaseError> {
    if complete.kind() != GridKind::Mask {
        return Err(CaseError::Grid(GridError::KindMismatch {
            expected: GridKind::Mask,
            got: complete.kind(),
        }));
    }
    spec.validate(complete.dims())?;
    let dims = complete.dims();
    let mut implant = VoxelGrid::zeros(dims, complete.spacing(), GridKind::Mask)?;
    let mut defective = VoxelGrid::zeros(dims, complete.spacing(), GridKind::Mask)?;
    let mut implant_count = 0usize;
    for idx in 0..complete.voxel_count() {
        if complete.data()[idx] == 0.0 {
            continue;
        }
        if spec.contains(complete.coords(idx)) {
            implant.data_mut()[idx] = 1.0;
            implant_count += 1;
        } else {
            defective.data_mut()[idx] = 1.0;
        }
    }
    if implant_count == 0 {
        return Err(CaseError::DefectMissesSkull);
    }
    Ok(CaseTriple {
        id: id.into(),
        defective,
        implant,
        complete: complete.clone(),
        spec,
    })
}

/// Phantom skull parameters: a hollow ellipsoidal shell.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhantomParams {
    /// Outer radii in voxels.
    pub radii: [f64; 3],
    /// Shell thickness in voxels.
    pub thickness: f64,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub seed: u64,
}

/// Hollow ellipsoidal shell mask: foreground where the normalized ellipsoid
/// radius lies in `[1 - t/r_min, 1]`. Radii get a seeded perturbation of at
/// most 5% for case diversity.
pub fn synth_skull_phantom(params: &PhantomParams) -> Result<VoxelGrid, CaseError> {
    if params.thickness < 1.0 {
        return Err(CaseError::BadPhantomParams("thickness < 1".into()));
    }
    let rmax = params.radii.iter().cloned().fold(0.0, f64::max);
    let rmin = params.radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_dim = *params.dims.iter().min().unwrap();
    if rmin <= 0.0 || 2.0 * rmax >= min_dim as f64 {
        return Err(CaseError::BadPhantomParams(format!(
            "radii {:?} do not fit dims {:?}",
            params.radii, params.dims
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let radii = params.radii.map(|r| r * rng.gen_range(0.95..=1.05));
    let rmin = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let inner = (1.0 - params.thickness / rmin).max(0.0);
    let center = params.dims.map(|d| (d as f64 - 1.0) / 2.0);
    let mut g = VoxelGrid::zeros(params.dims, params.spacing, GridKind::Mask)?;
    let [nx, ny, nz] = params.dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let rho = (((x as f64 - center[0]) / radii[0]).powi(2)
                    + ((y as f64 - center[1]) / radii[1]).powi(2)
                    + ((z as f64 - center[2]) / radii[2]).powi(2))
                .sqrt();
                if rho >= inner && rho <= 1.0 {
                    let idx = g.index(x, y, z);
                    g.data_mut()[idx] = 1.0;
                }
            }
        }
    }
    Ok(g)
}

/// Which defect family a dataset draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Spherical defects on the superior shell surface.
    InDistribution,
    /// Box/cylinder defects, different size range, lateral/posterior
    /// positions. Disjoint from the in-distribution family by construction.
    Robustness,
}

/// Geometry ranges for phantom skulls and defects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Outer radii as a fraction of the half-extent per axis, sampled per case.
    pub radius_frac: [f64; 2],
    /// Shell thickness in voxels, sampled per case.
    pub thickness: [f64; 2],
    /// In-distribution sphere radius as a fraction of the mean outer radius.
    pub defect_frac_in: [f64; 2],
    /// Robustness-family size fraction (box half-extents, cylinder radius).
    pub defect_frac_robust: [f64; 2],
}

impl DatasetConfig {
    /// Desk-scale default: 128^3 analog of the 512^2 x Z volumes.
    pub fn desk_scale() -> Self {
        Self {
            dims: [128, 128, 128],
            spacing: [1.0, 1.0, 1.0],
            radius_frac: [0.72, 0.82],
            thickness: [5.0, 7.0],
            defect_frac_in: [0.17, 0.23],
            defect_frac_robust: [0.14, 0.26],
        }
    }

    /// Smaller grids for fast tests, same structure.
    pub fn tiny(dims: [usize; 3]) -> Self {
        Self {
            dims,
            spacing: [1.0, 1.0, 1.0],
            radius_frac: [0.70, 0.80],
            thickness: [2.0, 3.0],
            defect_frac_in: [0.30, 0.45],
            defect_frac_robust: [0.20, 0.35],
        }
    }
}

fn split_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 of seed xor a case-index stride
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_defect(
    rng: &mut ChaCha8Rng,
    distribution: Distribution,
    cfg: &DatasetConfig,
    radii: [f64; 3],
    thickness: f64,
    center: [f64; 3],
    seed: u64,
) -> DefectSpec {
    let mean_r = (radii[0] + radii[1] + radii[2]) / 3.0;
    let mid = 1.0 - 0.5 * thickness / mean_r; // mid-shell scale
    let (theta, phi, shape) = match distribution {
        Distribution::InDistribution => {
            // superior surface: small polar angle from +z
            let theta: f64 = rng.gen_range(0.0..0.6);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = mean_r * rng.gen_range(cfg.defect_frac_in[0]..cfg.defect_frac_in[1]);
            (theta, phi, DefectShape::Sphere { radius: r })
        }
        Distribution::Robustness => {
            // lateral/posterior band
            let theta = rng.gen_range(1.2..1.9);
            let phi = rng.gen_range(std::f64::consts::FRAC_PI_2..3.0 * std::f64::consts::FRAC_PI_2);
            let use_box = rng.gen_bool(0.5);
            let mut f =
                || mean_r * rng.gen_range(cfg.defect_frac_robust[0]..cfg.defect_frac_robust[1]);
            let shape = if use_box {
                DefectShape::Box {
                    half_extents: [f(), f(), f()],
                }
            } else {
                DefectShape::Cylinder {
                    radius: f(),
                    half_height: f(),
                }
            };
            (theta, phi, shape)
        }
    };
    let dir = [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ];
    let c = [
        center[0] + dir[0] * radii[0] * mid,
        center[1] + dir[1] * radii[1] * mid,
        center[2] + dir[2] * radii[2] * mid,
    ];
    DefectSpec {
        shape,
        center: c,
        seed,
    }
}

/// Generates `n` deterministic cases. Case `i` depends only on
/// `(seed, i, distribution, config)`, so generation order or parallelism
/// cannot change the output.
pub fn make_dataset(
    n: usize,
    distribution: Distribution,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<Vec<CaseTriple>, CaseError> {
    if n == 0 {
        return Err(CaseError::BadPhantomParams("n must be >= 1".into()));
    }
    (0..n).map(|i| make_case(i, distribution, cfg, seed)).collect()
}

/// Generates the i-th case of a dataset.
pub fn make_case(
    index: usize,
    distribution: Distribution,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<CaseTriple, CaseError> {
    let case_seed = split_seed(seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
    let half = cfg.dims.map(|d| d as f64 / 2.0);
    let radii = [
        half[0] * rng.gen_range(cfg.radius_frac[0]..cfg.radius_frac[1]),
        half[1] * rng.gen_range(cfg.radius_frac[0]..cfg.radius_frac[1]),
        half[2] * rng.gen_range(cfg.radius_frac[0]..cfg.radius_frac[1]),
    ];
    let thickness = rng.gen_range(cfg.thickness[0]..cfg.thickness[1]);
    let params = PhantomParams {
        radii,
        thickness,
        dims: cfg.dims,
        spacing: cfg.spacing,
        seed: rng.gen(),
    };
    let complete = synth_skull_phantom(&params)?;
    let center = cfg.dims.map(|d| (d as f64 - 1.0) / 2.0);
    // re-draw until the defect actually removes bone; bounded and seeded
    for attempt in 0..16 {
        let spec = sample_defect(
            &mut rng,
            distribution,
            cfg,
            radii,
            thickness,
            center,
            case_seed.wrapping_add(attempt),
        );
        match inject_defect(&complete, spec, format!("case_{index:03}")) {
            Ok(triple) => return Ok(triple),
            Err(CaseError::DefectMissesSkull) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CaseError::DefectMissesSkull)
}

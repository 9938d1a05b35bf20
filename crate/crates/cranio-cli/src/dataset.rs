//! On-disk dataset layout: one directory per case holding the three
//! volumes and a `case.json` with the defect spec and provenance, plus a
//! top-level `manifest.json` listing case ids and the split.

use std::path::Path;

use cranio_core::cases::{CaseTriple, DatasetConfig, DefectSpec, Distribution};
use serde::{Deserialize, Serialize};

use crate::io::{read_grid, write_grid};
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub ids: Vec<String>,
    pub split: String,
    pub distribution: Distribution,
    pub seed: u64,
    pub config: DatasetConfig,
}

/// Defect spec plus enough provenance to regenerate the case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub index: usize,
    pub spec: DefectSpec,
    pub distribution: Distribution,
    pub dataset_seed: u64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::data("serializing json", e))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::data(&format!("writing {}", path.display()), e))?;
    Ok(())
}

fn read_json<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(&format!("reading {}", path.display()), e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::data(&format!("parsing {}", path.display()), e))
}

pub fn write_dataset(
    dir: &Path,
    cases: &[CaseTriple],
    split: &str,
    distribution: Distribution,
    seed: u64,
    config: &DatasetConfig,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut ids = Vec::with_capacity(cases.len());
    for (index, case) in cases.iter().enumerate() {
        let case_dir = dir.join(&case.id);
        std::fs::create_dir_all(&case_dir)?;
        write_grid(&case_dir.join("complete.nrrd"), &case.complete)?;
        write_grid(&case_dir.join("defective.nrrd"), &case.defective)?;
        write_grid(&case_dir.join("implant.nrrd"), &case.implant)?;
        write_json(
            &case_dir.join("case.json"),
            &CaseRecord {
                id: case.id.clone(),
                index,
                spec: case.spec,
                distribution,
                dataset_seed: seed,
            },
        )?;
        ids.push(case.id.clone());
    }
    write_json(
        &dir.join("manifest.json"),
        &DatasetManifest {
            ids,
            split: split.to_string(),
            distribution,
            seed,
            config: config.clone(),
        },
    )
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, CliError> {
    read_json(&dir.join("manifest.json"))
}

/// Loads and re-validates every case listed in the manifest.
pub fn load_dataset(dir: &Path) -> Result<Vec<CaseTriple>, CliError> {
    let manifest = read_manifest(dir)?;
    let mut cases = Vec::with_capacity(manifest.ids.len());
    for id in &manifest.ids {
        let case_dir = dir.join(id);
        let record: CaseRecord = read_json(&case_dir.join("case.json"))?;
        let case = CaseTriple {
            id: id.clone(),
            defective: read_grid(&case_dir.join("defective.nrrd"))?,
            implant: read_grid(&case_dir.join("implant.nrrd"))?,
            complete: read_grid(&case_dir.join("complete.nrrd"))?,
            spec: record.spec,
        };
        case.validate()
            .map_err(|e| CliError::data(&format!("case {id}"), e))?;
        cases.push(case);
    }
    Ok(cases)
}

/// Loads ground-truth implants only, as (id, mask) pairs in manifest order.
pub fn load_implants(dir: &Path) -> Result<Vec<(String, cranio_core::VoxelGrid)>, CliError> {
    let manifest = read_manifest(dir)?;
    manifest
        .ids
        .iter()
        .map(|id| Ok((id.clone(), read_grid(&dir.join(id).join("implant.nrrd"))?)))
        .collect()
}

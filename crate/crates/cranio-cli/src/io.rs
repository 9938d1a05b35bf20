//! Volume file IO.

use std::path::Path;

use cranio_core::nrrd::{read_nrrd, write_nrrd};
use cranio_core::VoxelGrid;

use crate::CliError;

pub fn read_grid(path: &Path) -> Result<VoxelGrid, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(&format!("reading {}", path.display()), e))?;
    read_nrrd(&bytes).map_err(|e| CliError::data(&format!("parsing {}", path.display()), e))
}

pub fn write_grid(path: &Path, grid: &VoxelGrid) -> Result<(), CliError> {
    let bytes =
        write_nrrd(grid).map_err(|e| CliError::data(&format!("encoding {}", path.display()), e))?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::data(&format!("writing {}", path.display()), e))?;
    Ok(())
}

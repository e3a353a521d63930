use std::fs;
use std::io::Write;
use std::path::Path;

use cxrnet_core::model::Model;
use cxrnet_core::{weights, Scalar};

use crate::error::AppError;

/// Writes through a temporary file in the target directory, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

pub fn save_weights<T: Scalar>(path: &Path, model: &Model<T>) -> Result<(), AppError> {
    write_atomic(path, &weights::encode(model))
}

/// Loads a weights file into `model`; every failure maps to the weights exit code.
pub fn load_weights<T: Scalar>(path: &Path, model: &mut Model<T>) -> Result<(), AppError> {
    let bytes = fs::read(path).map_err(|e| AppError::Weights(format!("cannot read {}: {e}", path.display())))?;
    weights::load_into(model, &bytes).map_err(|e| AppError::Weights(format!("{}: {e}", path.display())))
}

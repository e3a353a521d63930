//! `<root>/normal/*` and `<root>/covid/*` corpora.

use std::fs;
use std::path::{Path, PathBuf};

use cxrnet_core::{Dataset, Label, Sample};

use crate::error::AppError;
use crate::image_io::{encode_pgm, load_image, ImageError};
use crate::persist::write_atomic;

/// A file that was listed but could not be decoded.
#[derive(Debug)]
pub struct Skipped {
    pub path: PathBuf,
    pub error: ImageError,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pgm"))
}

/// Loads every `.png`/`.pgm` file under the two class directories in
/// lexicographic order. Undecodable files are skipped and reported.
pub fn load_dataset(root: &Path) -> Result<(Dataset, Vec<Skipped>), AppError> {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for label in Label::ALL {
        let dir = root.join(label.dir_name());
        if !dir.is_dir() {
            return Err(AppError::Data(format!("missing class directory {}", dir.display())));
        }
        let entries = fs::read_dir(&dir)
            .map_err(|e| AppError::Data(format!("class directory {} is unreadable: {e}", dir.display())))?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| AppError::Data(format!("listing {}: {e}", dir.display())))?.path();
            if path.is_file() && is_image(&path) {
                paths.push(path);
            }
        }
        paths.sort();
        let before = samples.len();
        for path in paths {
            match load_image(&path) {
                Ok(image) => samples.push(Sample { image, label, source: path.display().to_string() }),
                Err(error) => skipped.push(Skipped { path, error }),
            }
        }
        if samples.len() == before {
            return Err(AppError::Data(format!(
                "class {label} has no decodable images in {}",
                dir.display()
            )));
        }
    }
    Ok((Dataset::new(samples), skipped))
}

/// Writes each sample as `<root>/<class>/<index>.pgm`, numbered per class.
pub fn write_dataset(root: &Path, dataset: &Dataset) -> Result<(), AppError> {
    for label in Label::ALL {
        let dir = root.join(label.dir_name());
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        for (i, s) in dataset.samples.iter().filter(|s| s.label == label).enumerate() {
            write_atomic(&dir.join(format!("{i:05}.pgm")), &encode_pgm(&s.image))?;
        }
    }
    Ok(())
}

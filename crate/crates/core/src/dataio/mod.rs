//! Dataset ingestion, split protocols and the synthetic generator.

mod dataset;
pub mod matrix_csv;
mod split;
mod synth;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use dataset::{format_dataset, load_dataset, parse_dataset, read_dataset, save_dataset, DatasetFile, UNLABELED};
pub use split::{partition_pools, split, Protocol, Split, SplitSpec};
pub use synth::{generate_synthetic, GroundTruth, Session, SynthSpec, SyntheticData};

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes).map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

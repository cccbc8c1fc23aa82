use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, NormalizationStats};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "seqids-dataset";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    stats: Option<NormalizationStats>,
    dataset: Dataset,
}

pub fn write_dataset<W: Write>(
    writer: W,
    dataset: &Dataset,
    stats: Option<&NormalizationStats>,
) -> Result<()> {
    let file = CacheFile {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_FORMAT_VERSION,
        stats: stats.cloned(),
        dataset: dataset.clone(),
    };
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<(Dataset, Option<NormalizationStats>)> {
    let file: CacheFile = serde_json::from_reader(reader)?;
    if file.format != DATASET_FORMAT {
        return Err(Error::Format(format!("not a dataset cache: `{}`", file.format)));
    }
    if file.version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset cache version {} (expected {})",
            file.version, DATASET_FORMAT_VERSION
        )));
    }
    file.dataset.schema.validate()?;
    Ok((file.dataset, file.stats))
}

pub fn save_dataset(
    path: &Path,
    dataset: &Dataset,
    stats: Option<&NormalizationStats>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, dataset, stats)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(Dataset, Option<NormalizationStats>)> {
    read_dataset(BufReader::new(File::open(path)?))
}

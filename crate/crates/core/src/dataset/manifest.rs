use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layer::NUM_CLASSES;

/// One depth frame of the dataset, possibly a rotated view of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    /// 1-based person id.
    pub person: u32,
    /// Class index in `0..10`.
    pub gesture: usize,
    /// 1-based repetition number.
    pub repetition: u32,
    pub depth_path: PathBuf,
    /// 0 for original frames.
    pub rotation_deg: i32,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    person: u32,
    gesture: usize,
    repetition: u32,
    depth_path: String,
}

/// Reads a `person,gesture,repetition,depth_path` CSV. Relative depth paths
/// are resolved against the manifest's directory and must exist. Row
/// numbers in errors count the header as row 1.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for (i, record) in reader.deserialize::<Row>().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Manifest {
            row,
            reason: e.to_string(),
        })?;
        let reject = |reason: String| Error::Manifest { row, reason };
        if record.person == 0 {
            return Err(reject("person ids start at 1".into()));
        }
        if record.gesture >= NUM_CLASSES {
            return Err(reject(format!("gesture {} outside 0..{NUM_CLASSES}", record.gesture)));
        }
        if record.repetition == 0 {
            return Err(reject("repetitions start at 1".into()));
        }
        let depth_path = base.join(&record.depth_path);
        if !depth_path.is_file() {
            return Err(reject(format!("depth file {} not found", depth_path.display())));
        }
        samples.push(Sample {
            person: record.person,
            gesture: record.gesture,
            repetition: record.repetition,
            depth_path,
            rotation_deg: 0,
        });
    }
    if samples.is_empty() {
        warn!("manifest {} lists no samples", path.display());
    }
    Ok(samples)
}

/// Writes original samples as a manifest; depth paths are written relative
/// to the manifest directory when possible.
pub fn write_manifest(path: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_io)?;
    for s in samples {
        let rel = s.depth_path.strip_prefix(base).unwrap_or(&s.depth_path);
        writer
            .serialize(Row {
                person: s.person,
                gesture: s.gesture,
                repetition: s.repetition,
                depth_path: rel.to_string_lossy().replace('\\', "/"),
            })
            .map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("{other:?}")),
    }
}

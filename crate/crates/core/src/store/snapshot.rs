//! Binary snapshot of a whole graph.
//!
//! Layout: the 8-byte magic `EKGSNAP\0`, a little-endian `u32` format
//! version, then the bincode encoding of the node and relationship payload.
//! Indexes are stored as declarations and rebuilt on load. Every collection
//! in the payload is ordered, so equal graphs encode to equal bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{GraphData, GraphError, LabeledPropertyGraph};

pub const MAGIC: &[u8; 8] = b"EKGSNAP\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a graph snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot payload: {0}")]
    Decode(String),
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(#[from] GraphError),
}

impl LabeledPropertyGraph {
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), SnapshotError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut w, self.data())
            .map_err(|e| SnapshotError::Decode(e.to_string()))?;
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, SnapshotError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let data: GraphData =
            bincode::deserialize_from(r).map_err(|e| SnapshotError::Decode(e.to_string()))?;
        Ok(LabeledPropertyGraph::from_data(data)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        self.write_snapshot(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SnapshotError> {
        Self::read_snapshot(BufReader::new(File::open(path)?))
    }
}

use std::fs;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::topology::Topology;

use super::{Lpdo, LpdoDims, LpdoError};

pub const CHECKPOINT_FORMAT: &str = "lpdo-checkpoint/1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    topology: Topology,
    kraus_dims: Vec<usize>,
    bond_dims: Vec<usize>,
    /// Site arrays as `[re, im]` pairs in `[τ, σ, ν, bonds...]` order.
    sites: Vec<Vec<[f64; 2]>>,
}

impl Lpdo {
    pub fn to_checkpoint_json(&self) -> String {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            topology: self.topology.clone(),
            kraus_dims: self.dims.kraus.clone(),
            bond_dims: self.dims.bond.clone(),
            sites: self
                .sites
                .iter()
                .map(|s| s.data().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, LpdoError> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| LpdoError::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(LpdoError::Checkpoint(format!(
                "unsupported format `{}`",
                file.format
            )));
        }
        let dims = LpdoDims {
            kraus: file.kraus_dims,
            bond: file.bond_dims,
        };
        let data = file
            .sites
            .into_iter()
            .map(|s| s.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        Lpdo::from_site_data(file.topology, dims, data)
            .map_err(|e| LpdoError::Checkpoint(e.to_string()))
    }
}

pub fn save_checkpoint(lpdo: &Lpdo, path: &Path) -> Result<(), LpdoError> {
    fs::write(path, lpdo.to_checkpoint_json())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Lpdo, LpdoError> {
    Lpdo::from_checkpoint_json(&fs::read_to_string(path)?)
}

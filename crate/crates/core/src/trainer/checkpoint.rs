//! JSON checkpoints. Floats are written with round-trip precision, so a
//! reloaded state is bitwise identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainState;
use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: RunConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: RunConfig, state: TrainState) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            state,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let probe: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => return Err(Error::Checkpoint(format!("unsupported checkpoint version {v}"))),
            None => return Err(Error::Checkpoint(format!("{}: missing version", path.display()))),
        }
        let ck: Checkpoint =
            serde_json::from_value(probe).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        ck.config.validate()?;
        if !ck.state.params.is_finite() {
            return Err(Error::Checkpoint("checkpoint contains non-finite parameters".into()));
        }
        Ok(ck)
    }
}

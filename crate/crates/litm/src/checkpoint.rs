//! Checkpoint files.
//!
//! ```text
//! litm-checkpoint 1\n
//! <model configuration as one line of JSON>\n
//! params <count>\n
//! <count> × f64 LE in the model's parameter enumeration order
//! ```

use std::path::Path;

use litm_core::model::{ModelConfig, ModelParams};

use crate::atomic::write_atomic;
use crate::dataset_file::{check_magic, header_line};
use crate::error::{FormatError, LitmError};

pub const MAGIC: &str = "litm-checkpoint";
pub const VERSION: u32 = 1;

pub fn encode(cfg: &ModelConfig, params: &ModelParams) -> Vec<u8> {
    let flat = params.flatten();
    let mut out = format!(
        "{MAGIC} {VERSION}\n{}\nparams {}\n",
        serde_json::to_string(cfg).expect("model config serializes"),
        flat.len()
    )
    .into_bytes();
    for v in flat {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(ModelConfig, ModelParams), FormatError> {
    let (line, rest) = header_line(bytes)?;
    check_magic(&mut line.split_whitespace(), MAGIC, VERSION)?;
    let (cfg_line, rest) = header_line(rest)?;
    let cfg: ModelConfig =
        serde_json::from_str(cfg_line).map_err(|e| FormatError::Malformed(format!("model config: {e}")))?;
    cfg.validate().map_err(|e| FormatError::Inconsistent(e.to_string()))?;
    let (count_line, body) = header_line(rest)?;
    let count: usize = count_line
        .strip_prefix("params ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| FormatError::Malformed(format!("bad parameter count line '{count_line}'")))?;
    let expected = ModelParams::zeros(&cfg).map_err(|e| FormatError::Inconsistent(e.to_string()))?.param_count();
    if count != expected {
        return Err(FormatError::Inconsistent(format!("{count} parameters declared, configuration needs {expected}")));
    }
    if body.len() < 8 * count {
        return Err(FormatError::Truncated { expected: 8 * count, found: body.len() });
    }
    if body.len() > 8 * count {
        return Err(FormatError::Inconsistent(format!("{} trailing bytes", body.len() - 8 * count)));
    }
    let flat: Vec<f64> = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::Inconsistent("non-finite parameter".into()));
    }
    let params = ModelParams::from_flat(&cfg, &flat).map_err(|e| FormatError::Inconsistent(e.to_string()))?;
    Ok((cfg, params))
}

pub fn save(path: &Path, cfg: &ModelConfig, params: &ModelParams) -> Result<(), LitmError> {
    write_atomic(path, &encode(cfg, params))
}

pub fn load(path: &Path) -> Result<(ModelConfig, ModelParams), LitmError> {
    let bytes = std::fs::read(path).map_err(|e| LitmError::io(path, e))?;
    decode(&bytes).map_err(|e| LitmError::format(path, e))
}

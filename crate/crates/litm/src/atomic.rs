use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::LitmError;

/// Write `bytes` next to `path` and rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LitmError> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes).map_err(|e| LitmError::io(path, e))?;
    persist(tmp, path)
}

pub(crate) fn temp_beside(path: &Path) -> Result<NamedTempFile, LitmError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    NamedTempFile::new_in(dir).map_err(|e| LitmError::io(path, e))
}

pub(crate) fn persist(tmp: NamedTempFile, path: &Path) -> Result<(), LitmError> {
    tmp.persist(path).map_err(|e| LitmError::io(path, e.error))?;
    Ok(())
}

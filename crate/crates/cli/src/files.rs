//! Output plumbing: atomic writes and the rotation-state lock.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Write via a sibling temp file plus rename, so interrupted runs never leave
/// a half-written file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("output path {} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

/// Exclusive-access guard for a rotation state file. The lock is a sibling
/// `.lock` file created with `create_new`; it is removed on drop.
pub struct StateLock {
    path: PathBuf,
}

impl StateLock {
    pub fn acquire(state_path: &Path) -> Result<Self> {
        let name = state_path
            .file_name()
            .with_context(|| format!("state path {} has no file name", state_path.display()))?;
        let path = state_path.with_file_name(format!("{}.lock", name.to_string_lossy()));
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => bail!(
                "rotation state {} is locked by another process (remove {} if stale)",
                state_path.display(),
                path.display()
            ),
            Err(e) => {
                Err(anyhow::Error::new(e).context(format!("cannot create lock {}", path.display())))
            }
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

//! All-or-nothing output: files and directories are written under a hidden
//! temporary name next to their destination and renamed into place.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

fn temp_sibling(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

fn ensure_parent(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p),
        _ => Ok(()),
    }
}

pub fn write_file_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    ensure_parent(path)?;
    let tmp = temp_sibling(path);
    if let Err(e) = fs::write(&tmp, contents) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// A directory assembled in a temporary location. Dropped without
/// [`StagedDir::commit`], it is removed.
pub struct StagedDir {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl StagedDir {
    pub fn new(dest: &Path) -> io::Result<Self> {
        ensure_parent(dest)?;
        let tmp = temp_sibling(dest);
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        Ok(Self {
            tmp,
            dest: dest.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    /// Replace the destination with the staged contents.
    pub fn commit(mut self) -> io::Result<()> {
        if self.dest.exists() {
            if self.dest.is_dir() {
                fs::remove_dir_all(&self.dest)?;
            } else {
                fs::remove_file(&self.dest)?;
            }
        }
        fs::rename(&self.tmp, &self.dest)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_dir_is_removed_unless_committed() {
        let root = tempfile::tempdir().unwrap();
        let dest = root.path().join("out");
        {
            let s = StagedDir::new(&dest).unwrap();
            fs::write(s.path().join("a"), "x").unwrap();
        }
        assert!(!dest.exists());
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
        let s = StagedDir::new(&dest).unwrap();
        fs::write(s.path().join("a"), "x").unwrap();
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(dest.join("a")).unwrap(), "x");
    }

    #[test]
    fn atomic_file() {
        let root = tempfile::tempdir().unwrap();
        let p = root.path().join("sub/report.json");
        write_file_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "{}");
        assert_eq!(fs::read_dir(root.path().join("sub")).unwrap().count(), 1);
    }
}

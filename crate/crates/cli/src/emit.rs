use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Staged output directory. Files land in dot-prefixed temporaries and only
/// move into place on commit, so a failing run leaves nothing behind.
pub struct OutDir {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl OutDir {
    pub fn new(dir: &Path) -> io::Result<OutDir> {
        fs::create_dir_all(dir)?;
        Ok(OutDir { dir: dir.to_path_buf(), staged: Vec::new() })
    }

    pub fn stage(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        self.staged.push((tmp, self.dir.join(name)));
        Ok(())
    }

    /// Renames every staged file into place. Rename within one directory is
    /// atomic, so readers never observe a truncated file.
    pub fn commit(&mut self) -> io::Result<()> {
        for (tmp, fin) in self.staged.drain(..) {
            fs::rename(&tmp, &fin)?;
        }
        Ok(())
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

/// Full-precision, locale-free float cell.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV accumulator: seed comment first, then the header row.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(seed: u64, header: &str) -> Csv {
        Csv { buf: format!("# seed={seed}\n{header}\n") }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        self.buf.push_str("# ");
        self.buf.push_str(line);
        self.buf.push('\n');
    }

    pub fn bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

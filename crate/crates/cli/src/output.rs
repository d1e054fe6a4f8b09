use std::path::{Path, PathBuf};

use crate::error::CliError;

/// The one place files get written. Names are bare file names, so nothing
/// lands outside the chosen directory.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let bare = Path::new(name).file_name().is_some_and(|f| f == name);
        if !bare || name == ".." {
            return Err(CliError::Input(format!(
                "refusing to write `{name}` outside the output directory"
            )));
        }
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(&self.root).map_err(io(&self.root))?;
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_paths() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::new(dir.path());
        assert!(out.write("../x.csv", "").is_err());
        assert!(out.write("a/b.csv", "").is_err());
        assert!(out.write("..", "").is_err());
        let p = out.write("ok.csv", "1\n").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "1\n");
    }
}

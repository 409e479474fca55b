//! Output files, committed together at the end of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn add_json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.add(name, text);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file to a temporary sibling and renames it into place.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", target.display()));
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(contents).map_err(io)?;
            f.sync_all().map_err(io)?;
            fs::rename(&tmp, &target).map_err(io)?;
            written.push(target);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add("a.csv", "x,u\n");
        out.add_json("b.json", &serde_json::json!({"k": 1}));
        let written = out.commit(&dir.path().join("sub")).unwrap();
        assert_eq!(written.len(), 2);
        let names: Vec<_> = fs::read_dir(dir.path().join("sub"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(names.iter().all(|n| !n.ends_with(".tmp")));
        assert_eq!(fs::read_to_string(dir.path().join("sub/a.csv")).unwrap(), "x,u\n");
    }
}

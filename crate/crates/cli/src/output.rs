use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

/// An output directory whose files are written atomically.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through a temporary file in the same directory, renamed
    /// into place only once `fill` succeeds.
    pub fn write<F>(&self, name: &str, fill: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> anyhow::Result<()>,
    {
        let dest = self.path(name);
        let tmp = tempfile::NamedTempFile::new_in(&self.root)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w).with_context(|| format!("writing {}", dest.display()))?;
            w.flush()?;
        }
        tmp.persist(&dest).with_context(|| format!("renaming into {}", dest.display()))?;
        log::info!("wrote {}", dest.display());
        Ok(())
    }

    pub fn write_str(&self, name: &str, text: &str) -> anyhow::Result<()> {
        self.write(name, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

/// Key/value summary written as a two-column CSV.
#[derive(Default)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    pub fn add(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn write(&self, out: &OutDir, name: &str) -> anyhow::Result<()> {
        out.write(name, |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["key", "value"])?;
            for (k, v) in &self.0 {
                wtr.write_record([k, v])?;
            }
            wtr.flush()?;
            Ok(())
        })
    }

    pub fn print(&self) {
        for (k, v) in &self.0 {
            println!("{k}: {v}");
        }
    }
}

//! Class-per-directory corpora: `<root>/<label>/*.pgm`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mfs_core::gray_image::{load_image, save_image, GrayImage};

/// A labeled tile set as read from disk, classes and files in name order.
pub struct Corpus {
    pub classes: Vec<(String, Vec<GrayImage>)>,
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .with_context(|| format!("cannot list {}", dir.display()))?;
    entries.sort();
    Ok(entries)
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Self> {
        let mut classes = Vec::new();
        for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
            let label = dir
                .file_name()
                .and_then(|n| n.to_str())
                .with_context(|| format!("class directory {} is not valid UTF-8", dir.display()))?
                .to_string();
            let tiles = sorted_entries(&dir)?
                .into_iter()
                .filter(|p| p.is_file() && is_pgm(p))
                .map(|p| load_image(&p).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            if tiles.is_empty() {
                bail!("class {label:?} ({}) contains no .pgm tiles", dir.display());
            }
            classes.push((label, tiles));
        }
        if classes.is_empty() {
            bail!("corpus {} has no class directories", root.display());
        }
        Ok(Self { classes })
    }

    /// Common side length of every tile; errors on mixed or non-square tiles.
    pub fn tile_size(&self) -> Result<usize> {
        let mut size = None;
        for (label, tiles) in &self.classes {
            for (k, t) in tiles.iter().enumerate() {
                if t.width() != t.height() {
                    bail!(
                        "class {label:?}: tile {k} is {}x{}, not square",
                        t.width(),
                        t.height()
                    );
                }
                match size {
                    None => size = Some(t.width()),
                    Some(s) if s != t.width() => {
                        bail!("mixed tile sizes: class {label:?} has a {0}x{0} tile, expected {s}x{s}", t.width())
                    }
                    Some(_) => {}
                }
            }
        }
        size.context("corpus has no tiles")
    }
}

/// Writes `classes` as `<root>/<label>/<label>_<k>.pgm`.
pub fn write_corpus(root: &Path, classes: &[(String, Vec<GrayImage>)]) -> Result<usize> {
    let mut written = 0;
    for (label, tiles) in classes {
        let dir = root.join(label);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (k, tile) in tiles.iter().enumerate() {
            let path = dir.join(format!("{label}_{k:03}.pgm"));
            save_image(tile, &path).with_context(|| format!("writing {}", path.display()))?;
            written += 1;
        }
    }
    Ok(written)
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::pipeline::config::Mode;
use crate::raster::Raster;
use crate::sample::LabeledSample;

/// A file that could not be turned into a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub reason: String,
}

/// Samples found under a root directory plus per-file failures.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub samples: Vec<LabeledSample>,
    pub errors: Vec<FileError>,
}

impl Dataset {
    /// Path of `sample` relative to the dataset root, `/`-separated.
    pub fn relative_path(&self, sample: &LabeledSample) -> String {
        relative(&self.root, &sample.image_path)
    }
}

pub(crate) fn relative(root: &Path, path: &Path) -> String {
    let rel = if root.is_file() {
        path.file_name().map(PathBuf::from).unwrap_or_default()
    } else {
        path.strip_prefix(root).unwrap_or(path).to_path_buf()
    };
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn collect_pngs(dir: &Path, skip: Option<&Path>, out: &mut Vec<PathBuf>) -> Result<()> {
    let walk = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| skip.is_none_or(|s| e.path() != s));
    for entry in walk {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).to_path_buf();
            Error::Io {
                path,
                source: e.into(),
            }
        })?;
        if entry.file_type().is_file() && is_png(entry.path()) {
            out.push(entry.into_path());
        }
    }
    Ok(())
}

/// Loads every PNG under `root` (or `root` itself when it is a file).
///
/// * classify: the class label is the name of the image's parent directory
///   below the root; images directly in the root have no class and are reported.
/// * segment / detect: each image is paired with the mask at the same relative
///   path under `masks` (default `<root>/masks`), matched by file stem. A nested
///   parent directory, if any, becomes the class label.
///
/// Samples are sorted by path. Unreadable files, missing masks and size
/// mismatches are collected as [`FileError`]s and do not abort the load.
pub fn load_dataset(root: &Path, masks: Option<&Path>, mode: Mode) -> Result<Dataset> {
    if !root.exists() {
        return Err(Error::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input path does not exist"),
        });
    }
    let default_masks = root.join("masks");
    let mask_root = masks.map(Path::to_path_buf).unwrap_or(default_masks);
    let mut files = Vec::new();
    if root.is_file() {
        files.push(root.to_path_buf());
    } else {
        collect_pngs(
            root,
            mode.uses_mask().then_some(mask_root.as_path()),
            &mut files,
        )?;
    }
    files.sort();

    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for path in files {
        match load_one(root, &path, &mask_root, mode) {
            Ok(s) => samples.push(s),
            Err(e) => errors.push(FileError {
                path: relative(root, &path),
                reason: e.to_string(),
            }),
        }
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        samples,
        errors,
    })
}

fn parent_label(root: &Path, path: &Path) -> Option<String> {
    if root.is_file() {
        return path
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned());
    }
    let rel = path.strip_prefix(root).ok()?;
    let parent = rel.parent()?;
    parent.file_name().map(|n| n.to_string_lossy().into_owned())
}

fn find_mask(root: &Path, path: &Path, mask_root: &Path) -> Option<PathBuf> {
    let rel_parent = if root.is_file() {
        PathBuf::new()
    } else {
        path.strip_prefix(root).ok()?.parent()?.to_path_buf()
    };
    let stem = path.file_stem()?;
    let dir = mask_root.join(rel_parent);
    let candidates = [
        dir.join(stem).with_extension("png"),
        dir.join(format!("{}_mask.png", stem.to_string_lossy())),
    ];
    candidates.into_iter().find(|c| c.is_file())
}

fn load_one(root: &Path, path: &Path, mask_root: &Path, mode: Mode) -> Result<LabeledSample> {
    let image = Raster::load(path)?;
    let mut sample = LabeledSample::new(path, image);
    let label = parent_label(root, path);
    match mode {
        Mode::Classify => {
            let label = label.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{} is not inside a class directory",
                    path.display()
                ))
            })?;
            sample = sample.with_label(label);
        }
        Mode::Segment | Mode::Detect => {
            let mask_path = find_mask(root, path, mask_root)
                .ok_or_else(|| Error::MissingMask(path.to_path_buf()))?;
            let mask = Raster::load_mask(&mask_path)?;
            sample = sample.with_mask(mask)?;
            sample.mask_path = Some(mask_path);
            if let Some(l) = label {
                sample = sample.with_label(l);
            }
        }
    }
    Ok(sample)
}

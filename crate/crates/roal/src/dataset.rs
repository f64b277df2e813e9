//! Omniglot ingestion, the on-disk dataset cache and `--data` resolution.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use roal_core::data::{self, ClassId, ClassSamples, Dataset, IMAGE_LEN, IMAGE_SIDE};
use walkdir::WalkDir;

use crate::container::Container;
use crate::{Error, FormatError, Result};

pub const CACHE_KIND: &str = "dataset";

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "gif"];

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Decodes one image into a 20x20 tensor with ink = 1 and background = 0.
pub fn load_image(path: &Path) -> Result<Vec<f32>> {
    let img = image::open(path).map_err(|e| Error::data(path, e.to_string()))?.to_luma32f();
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::data(path, "empty image"));
    }
    let small = data::downscale_area(img.as_raw(), w as usize, h as usize, IMAGE_SIDE);
    Ok(small.into_iter().map(|v| (1.0 - v).clamp(0.0, 1.0)).collect())
}

/// Every directory that directly contains image files is one class, ordered
/// by path. Alphabet/character/sample is the expected layout, but any depth works.
pub fn class_directories(root: &Path) -> Result<Vec<(PathBuf, Vec<PathBuf>)>> {
    if !root.is_dir() {
        return Err(Error::data(root, "not a directory"));
    }
    let mut classes: Vec<(PathBuf, Vec<PathBuf>)> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::data(&path, e.to_string())
        })?;
        if entry.file_type().is_file() && is_image(entry.path()) {
            let dir = entry.path().parent().unwrap_or(root).to_path_buf();
            match classes.last_mut() {
                Some((d, files)) if *d == dir => files.push(entry.into_path()),
                _ => classes.push((dir, vec![entry.into_path()])),
            }
        }
    }
    if classes.is_empty() {
        return Err(Error::data(root, "no image files found"));
    }
    Ok(classes)
}

/// Drawings per character in the standard release.
pub const OMNIGLOT_SAMPLES: usize = 20;

/// Loads an Omniglot-style tree. With `rotations`, each class gets three
/// rotated copies (90, 180, 270 degrees) as new classes: for `n` base classes,
/// rotation `r` of base class `i` has id `r * n + i`.
pub fn load_omniglot(root: &Path, rotations: bool) -> Result<Dataset> {
    let dirs = class_directories(root)?;
    let base: Vec<(String, Vec<f32>)> = dirs
        .par_iter()
        .map(|(dir, files)| {
            let mut pixels = Vec::with_capacity(files.len() * IMAGE_LEN);
            for f in files {
                pixels.extend(load_image(f)?);
            }
            let name = dir.strip_prefix(root).unwrap_or(dir).to_string_lossy().replace('\\', "/");
            Ok((name, pixels))
        })
        .collect::<Result<_>>()?;
    let short = base.iter().filter(|(_, p)| p.len() / IMAGE_LEN < OMNIGLOT_SAMPLES).count();
    if short > 0 {
        log::warn!("{short} classes under {} have fewer than {OMNIGLOT_SAMPLES} samples", root.display());
    }
    let n = base.len();
    let turns = if rotations { 4 } else { 1 };
    let mut classes = Vec::with_capacity(n * turns);
    for r in 0..turns {
        for (i, (name, pixels)) in base.iter().enumerate() {
            let id = ClassId((r * n + i) as u32);
            let (name, pixels) = if r == 0 {
                (name.clone(), pixels.clone())
            } else {
                let rotated = pixels.chunks_exact(IMAGE_LEN).flat_map(|img| data::rotate_quarter(img, IMAGE_SIDE, r)).collect();
                (format!("{name}@rot{}", 90 * r), rotated)
            };
            classes.push(ClassSamples::new(id, name, pixels).map_err(|e| Error::data(&dirs[i].0, e.to_string()))?);
        }
    }
    Dataset::new(classes).map_err(|e| Error::data(root, e.to_string()))
}

pub fn dataset_to_container(ds: &Dataset) -> Container {
    let mut c = Container::new(CACHE_KIND);
    c.set("image_side", IMAGE_SIDE);
    c.set("classes", ds.num_classes());
    for class in ds.classes() {
        c.set(&format!("name.{}", class.id.0), &class.name);
        c.push_array(&format!("class.{}", class.id.0), &[class.len(), IMAGE_LEN], class.pixels().to_vec());
    }
    c
}

pub fn dataset_from_container(c: &Container) -> Result<Dataset, FormatError> {
    let kind = c.require("kind")?;
    if kind != CACHE_KIND {
        return Err(FormatError::WrongKind { expected: CACHE_KIND.into(), found: kind.into() });
    }
    let side: usize = c.parse("image_side")?;
    if side != IMAGE_SIDE {
        return Err(FormatError::BadValue { key: "image_side".into(), value: side.to_string() });
    }
    let count: usize = c.parse("classes")?;
    let mut classes = Vec::with_capacity(count);
    for a in c.arrays() {
        let id: u32 = a
            .name
            .strip_prefix("class.")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FormatError::Header(format!("unexpected array {:?}", a.name)))?;
        if a.shape.len() != 2 || a.shape[1] != IMAGE_LEN {
            return Err(FormatError::Header(format!("class {id} has shape {:?}", a.shape)));
        }
        let name = c.get(&format!("name.{id}")).unwrap_or_default();
        classes.push(ClassSamples::new(ClassId(id), name, a.data.clone()).map_err(|e| FormatError::Header(e.to_string()))?);
    }
    if classes.len() != count {
        return Err(FormatError::Header(format!("header promises {count} classes, found {}", classes.len())));
    }
    Dataset::new(classes).map_err(|e| FormatError::Header(e.to_string()))
}

pub fn save_cache(ds: &Dataset, path: &Path) -> Result<()> {
    dataset_to_container(ds).save(path)
}

pub fn load_cache(path: &Path) -> Result<Dataset> {
    let c = Container::load(path)?;
    dataset_from_container(&c).map_err(|e| e.at(path))
}

/// A parsed `--data` argument.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth { classes: usize, samples: usize, noise: f32, seed: u64 },
    Omniglot(PathBuf),
    Cache(PathBuf),
}

impl DataSource {
    pub const SYNTH_DEFAULT: DataSource = DataSource::Synth { classes: 80, samples: 20, noise: 0.1, seed: 7 };

    /// `synth[:classes[:samples[:noise[:seed]]]]`, a directory, or a cache file.
    pub fn parse(spec: &str) -> Result<Self> {
        if let Some(rest) = spec.strip_prefix("synth") {
            let DataSource::Synth { mut classes, mut samples, mut noise, mut seed } = Self::SYNTH_DEFAULT else {
                unreachable!()
            };
            let bad = || Error::Config(format!("bad synthetic data spec {spec:?}"));
            let fields: Vec<&str> = match rest.strip_prefix(':') {
                Some(f) => f.split(':').collect(),
                None if rest.is_empty() => Vec::new(),
                None => return Err(bad()),
            };
            if fields.len() > 4 {
                return Err(bad());
            }
            for (i, f) in fields.iter().enumerate() {
                match i {
                    0 => classes = f.parse().map_err(|_| bad())?,
                    1 => samples = f.parse().map_err(|_| bad())?,
                    2 => noise = f.parse().map_err(|_| bad())?,
                    _ => seed = f.parse().map_err(|_| bad())?,
                }
            }
            return Ok(DataSource::Synth { classes, samples, noise, seed });
        }
        let path = PathBuf::from(spec);
        if path.is_dir() {
            Ok(DataSource::Omniglot(path))
        } else if path.is_file() {
            Ok(DataSource::Cache(path))
        } else {
            Err(Error::data(&path, "no such file or directory"))
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            &DataSource::Synth { classes, samples, noise, seed } => Ok(data::synth_glyphs(classes, samples, noise, seed)?),
            DataSource::Omniglot(dir) => load_omniglot(dir, false),
            DataSource::Cache(file) => load_cache(file),
        }
    }
}

/// Default number of training classes: the usual 1200 of 1623 Omniglot
/// classes (4800 of 6492 with rotations), otherwise three quarters.
pub fn default_train_classes(total: usize) -> usize {
    match total {
        1623 => 1200,
        6492 => 4800,
        n => (n * 3 / 4).max(1),
    }
}

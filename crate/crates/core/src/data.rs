//! Image datasets: class-indexed 20x20 grayscale samples, class splits, and
//! a procedural glyph generator used as a stand-in for Omniglot in tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{self, Domain};
use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 20;
pub const IMAGE_LEN: usize = IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl core::fmt::Display for ClassId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// All samples of one class, stored as consecutive `IMAGE_LEN` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSamples {
    pub id: ClassId,
    pub name: String,
    pixels: Vec<f32>,
}

impl ClassSamples {
    pub fn new(id: ClassId, name: impl Into<String>, pixels: Vec<f32>) -> Result<Self> {
        if pixels.is_empty() || pixels.len() % IMAGE_LEN != 0 {
            return Err(Error::Data(format!("class {id}: {} pixels is not a whole number of images", pixels.len())));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("class {id}: pixel value {bad} outside [0, 1]")));
        }
        Ok(ClassSamples { id, name: name.into(), pixels })
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / IMAGE_LEN
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, k: usize) -> &[f32] {
        &self.pixels[k * IMAGE_LEN..(k + 1) * IMAGE_LEN]
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }
}

/// Immutable set of classes; shareable across rollouts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    classes: Vec<ClassSamples>,
    index: BTreeMap<ClassId, usize>,
}

impl Dataset {
    pub fn new(classes: Vec<ClassSamples>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, c) in classes.iter().enumerate() {
            if index.insert(c.id, i).is_some() {
                return Err(Error::Data(format!("duplicate class id {}", c.id)));
            }
        }
        Ok(Dataset { classes, index })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[ClassSamples] {
        &self.classes
    }

    pub fn class_ids(&self) -> Vec<ClassId> {
        self.classes.iter().map(|c| c.id).collect()
    }

    pub fn class(&self, id: ClassId) -> Result<&ClassSamples> {
        self.index.get(&id).map(|&i| &self.classes[i]).ok_or_else(|| Error::Data(format!("unknown class {id}")))
    }

    pub fn min_samples(&self) -> usize {
        self.classes.iter().map(ClassSamples::len).min().unwrap_or(0)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.index.contains_key(&id)
    }
}

/// Seeded shuffle of the classes, then the first `train_count` go to the
/// training split and the rest to the test split.
pub fn split_classes(dataset: &Dataset, train_count: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let total = dataset.num_classes();
    if train_count == 0 || train_count >= total {
        return Err(Error::Data(format!("train_count {train_count} must lie in 1..{total}")));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng::stream(seed, Domain::Split, 0, 0));
    let pick = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| dataset.classes[i].clone()).collect());
    Ok((pick(&order[..train_count])?, pick(&order[train_count..])?))
}

/// Area-average downscaling of a row-major `width x height` image to
/// `side x side`. Each output pixel averages the source area it covers,
/// with fractional overlap at the borders.
pub fn downscale_area(src: &[f32], width: usize, height: usize, side: usize) -> Vec<f32> {
    debug_assert_eq!(src.len(), width * height);
    let sx = width as f64 / side as f64;
    let sy = height as f64 / side as f64;
    let mut out = vec![0f32; side * side];
    for oy in 0..side {
        let (y0, y1) = (oy as f64 * sy, (oy + 1) as f64 * sy);
        for ox in 0..side {
            let (x0, x1) = (ox as f64 * sx, (ox + 1) as f64 * sx);
            let mut acc = 0.0;
            let mut area = 0.0;
            for y in y0.floor() as usize..(y1.ceil() as usize).min(height) {
                let wy = (y1.min(y as f64 + 1.0) - y0.max(y as f64)).max(0.0);
                for x in x0.floor() as usize..(x1.ceil() as usize).min(width) {
                    let wx = (x1.min(x as f64 + 1.0) - x0.max(x as f64)).max(0.0);
                    acc += wx * wy * src[y * width + x] as f64;
                    area += wx * wy;
                }
            }
            out[oy * side + ox] = if area > 0.0 { (acc / area) as f32 } else { 0.0 };
        }
    }
    out
}

/// Rotates a square image counter-clockwise by `quarter_turns * 90` degrees.
pub fn rotate_quarter(img: &[f32], side: usize, quarter_turns: usize) -> Vec<f32> {
    let mut cur = img.to_vec();
    for _ in 0..quarter_turns % 4 {
        let mut next = vec![0f32; side * side];
        for y in 0..side {
            for x in 0..side {
                // (x, y) -> (y, side - 1 - x)
                next[(side - 1 - x) * side + y] = cur[y * side + x];
            }
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy)]
enum Stroke {
    Bar { cx: f64, cy: f64, angle: f64, half_len: f64, width: f64 },
    Blob { cx: f64, cy: f64, sigma: f64 },
    Ring { cx: f64, cy: f64, radius: f64, width: f64 },
}

impl Stroke {
    fn random<R: Rng>(kind: usize, rng: &mut R) -> Self {
        let c = |rng: &mut R| rng.gen_range(5.0..15.0);
        match kind % 3 {
            0 => Stroke::Bar {
                cx: c(rng),
                cy: c(rng),
                angle: rng.gen_range(0.0..core::f64::consts::PI),
                half_len: rng.gen_range(3.0..8.0),
                width: rng.gen_range(0.8..1.6),
            },
            1 => Stroke::Blob { cx: c(rng), cy: c(rng), sigma: rng.gen_range(1.2..2.5) },
            _ => Stroke::Ring { cx: c(rng), cy: c(rng), radius: rng.gen_range(2.5..6.0), width: rng.gen_range(0.6..1.2) },
        }
    }

    fn intensity(&self, x: f64, y: f64) -> f64 {
        match *self {
            Stroke::Bar { cx, cy, angle, half_len, width } => {
                let (s, c) = (angle.sin(), angle.cos());
                let (dx, dy) = (x - cx, y - cy);
                let along = (dx * c + dy * s).clamp(-half_len, half_len);
                let (px, py) = (dx - along * c, dy - along * s);
                let d = (px * px + py * py).sqrt();
                (1.0 - d / width).clamp(0.0, 1.0)
            }
            Stroke::Blob { cx, cy, sigma } => {
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                Float::exp(-d2 / (2.0 * sigma * sigma))
            }
            Stroke::Ring { cx, cy, radius, width } => {
                let d = ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt();
                Float::exp(-(d - radius) * (d - radius) / (2.0 * width * width))
            }
        }
    }
}

/// Clean prototype image for synthetic class `class` under `seed`.
pub fn glyph_prototype(class: u32, seed: u64) -> Vec<f32> {
    let mut rng = rng::stream(seed, Domain::Init, 1 + class as u64, 0);
    let strokes: Vec<Stroke> = (0..3).map(|k| Stroke::random(class as usize + k, &mut rng)).collect();
    let mut img = vec![0f32; IMAGE_LEN];
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let v = strokes.iter().map(|s| s.intensity(fx, fy)).fold(0.0, f64::max);
            img[y * IMAGE_SIDE + x] = v as f32;
        }
    }
    img
}

/// Deterministic synthetic dataset: each class is a fixed composition of
/// bars, blobs and rings; samples add uniform pixel noise of amplitude
/// `noise`, clamped to [0, 1].
pub fn synth_glyphs(num_classes: usize, samples_per_class: usize, noise: f32, seed: u64) -> Result<Dataset> {
    if num_classes == 0 || samples_per_class == 0 {
        return Err(Error::Data(String::from("synthetic dataset needs at least one class and one sample")));
    }
    let noise = noise.clamp(0.0, 1.0);
    let mut classes = Vec::with_capacity(num_classes);
    for c in 0..num_classes as u32 {
        let proto = glyph_prototype(c, seed);
        let mut rng = rng::stream(seed, Domain::Init, 1 + c as u64, 1);
        let mut pixels = Vec::with_capacity(samples_per_class * IMAGE_LEN);
        for _ in 0..samples_per_class {
            pixels.extend(proto.iter().map(|&p| {
                let jitter = if noise > 0.0 { rng.gen_range(-noise..=noise) } else { 0.0 };
                (p + jitter).clamp(0.0, 1.0)
            }));
        }
        classes.push(ClassSamples::new(ClassId(c), format!("glyph{c}"), pixels)?);
    }
    Dataset::new(classes)
}

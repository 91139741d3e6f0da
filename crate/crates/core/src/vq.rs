//! Patch vector quantizer: a small image tokenizer built on k-means.
//!
//! Images are grayscale with samples in `[0, 1]`. Each `patch × patch` tile
//! becomes one token, the index of its nearest codebook centroid.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tokens::{CodecConfig, TokenSequence};

pub const DEFAULT_IMAGE_SIZE: usize = 64;
pub const DEFAULT_PATCH: usize = 8;
pub const DEFAULT_K: usize = 256;
pub const DEFAULT_MAX_ITER: usize = 50;

const CODEBOOK_MAGIC: &[u8; 4] = b"UWVQ";
const CODEBOOK_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::WrongLength {
                what: "image pixels",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteSample(i));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mse(&self, other: &GrayImage) -> Result<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::InconsistentLength(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(mean_sq(&self.pixels, &other.pixels))
    }
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    sq_dist(a, b) / a.len() as f64
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Tiles in raster order, each flattened row by row.
pub fn extract_patches(img: &GrayImage, patch: usize) -> Result<Vec<Vec<f64>>> {
    if patch == 0 || img.width % patch != 0 || img.height % patch != 0 {
        return Err(Error::InvalidCodec(format!(
            "{}x{} image is not divisible into {patch}x{patch} patches",
            img.width, img.height
        )));
    }
    let mut out = Vec::with_capacity(img.width * img.height / (patch * patch));
    for py in (0..img.height).step_by(patch) {
        for px in (0..img.width).step_by(patch) {
            let mut tile = Vec::with_capacity(patch * patch);
            for y in py..py + patch {
                tile.extend_from_slice(&img.pixels[y * img.width + px..y * img.width + px + patch]);
            }
            out.push(tile);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    patch: usize,
    centroids: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(patch: usize, centroids: Vec<Vec<f64>>) -> Result<Self> {
        if patch == 0 || centroids.is_empty() {
            return Err(Error::InvalidCodec("codebook needs a patch size and entries".into()));
        }
        if centroids.iter().any(|c| c.len() != patch * patch) {
            return Err(Error::InvalidCodec("centroid size does not match the patch".into()));
        }
        Ok(Self { patch, centroids })
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// Nearest centroid; ties go to the lowest index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(v, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Binary layout, little endian: magic `UWVQ`, version `u32`, `k u32`,
    /// `patch u32`, then `k · patch²` `f32` values, centroid by centroid.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CODEBOOK_MAGIC)?;
        for v in [CODEBOOK_VERSION, self.k() as u32, self.patch as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.centroids {
            for &v in c {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CODEBOOK_MAGIC {
            return Err(Error::Format("not a codebook file".into()));
        }
        let mut word = || -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = word()?;
        if version != CODEBOOK_VERSION {
            return Err(Error::Format(format!("unsupported codebook version {version}")));
        }
        let (k, patch) = (word()? as usize, word()? as usize);
        if k == 0 || patch == 0 || k.saturating_mul(patch * patch) > 1 << 26 {
            return Err(Error::Format(format!("implausible codebook header k={k} patch={patch}")));
        }
        let mut centroids = Vec::with_capacity(k);
        let mut buf = [0u8; 4];
        for _ in 0..k {
            let mut c = Vec::with_capacity(patch * patch);
            for _ in 0..patch * patch {
                r.read_exact(&mut buf)?;
                c.push(f32::from_le_bytes(buf) as f64);
            }
            centroids.push(c);
        }
        Self::new(patch, centroids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Total within-cluster squared distance after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// k-means++ seeding followed by Lloyd iterations, at most `max_iter`.
pub fn fit_codebook(patches: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<(Codebook, FitReport)> {
    if k == 0 || patches.len() < k {
        return Err(Error::InvalidCodec(format!(
            "k-means needs at least k = {k} patches, got {}",
            patches.len()
        )));
    }
    let dim = patches[0].len();
    let patch = (dim as f64).sqrt().round() as usize;
    if patch * patch != dim || patches.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidCodec("patches must be square and equal in size".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![patches[rng.gen_range(0..patches.len())].clone()];
    let mut nearest: Vec<f64> = patches.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..patches.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = patches.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        centroids.push(patches[next].clone());
        let c = centroids.last().expect("just pushed");
        for (n, p) in nearest.iter_mut().zip(patches) {
            *n = n.min(sq_dist(p, c));
        }
    }

    let mut book = Codebook::new(patch, centroids)?;
    let mut objective = Vec::new();
    let mut assignment: Vec<usize> = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let next: Vec<usize> = patches.par_iter().map(|p| book.nearest(p)).collect();
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in patches.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), n) in book.centroids.iter_mut().zip(sums).zip(&counts) {
            // An empty cluster keeps its centroid.
            if *n > 0 {
                *c = s.into_iter().map(|v| v / *n as f64).collect();
            }
        }
        objective.push(patches.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &book.centroids[a])).sum());
    }
    let iterations = objective.len();
    Ok((
        book,
        FitReport {
            objective,
            iterations,
            converged,
        },
    ))
}

pub fn vq_encode(img: &GrayImage, book: &Codebook) -> Result<TokenSequence> {
    let patches = extract_patches(img, book.patch)?;
    let cfg = CodecConfig::new(patches.len(), book.k() as u32)?;
    TokenSequence::new(patches.iter().map(|p| book.nearest(p) as u32).collect(), &cfg)
}

pub fn vq_decode(seq: &TokenSequence, book: &Codebook, width: usize, height: usize) -> Result<GrayImage> {
    let p = book.patch;
    if width % p != 0 || height % p != 0 || seq.len() != (width / p) * (height / p) {
        return Err(Error::InvalidCodec(format!(
            "{} tokens do not tile a {width}x{height} image with {p}x{p} patches",
            seq.len()
        )));
    }
    let mut pixels = vec![0.0; width * height];
    let cols = width / p;
    for (i, &t) in seq.tokens().iter().enumerate() {
        let c = book.centroids.get(t as usize).ok_or(Error::TokenOutOfRange {
            token: t,
            k: book.k() as u32,
        })?;
        let (px, py) = ((i % cols) * p, (i / cols) * p);
        for y in 0..p {
            pixels[(py + y) * width + px..(py + y) * width + px + p].copy_from_slice(&c[y * p..(y + 1) * p]);
        }
    }
    GrayImage::new(width, height, pixels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilization {
    pub used: usize,
    pub k: usize,
}

impl Utilization {
    pub fn fraction(&self) -> f64 {
        self.used as f64 / self.k as f64
    }

    pub fn unused(&self) -> usize {
        self.k - self.used
    }
}

/// How many codebook entries the given encodings touch.
pub fn utilization<'a>(encodings: impl IntoIterator<Item = &'a TokenSequence>, k: usize) -> Utilization {
    let mut seen = vec![false; k];
    for seq in encodings {
        for &t in seq.tokens() {
            if let Some(s) = seen.get_mut(t as usize) {
                *s = true;
            }
        }
    }
    Utilization {
        used: seen.iter().filter(|&&s| s).count(),
        k,
    }
}

/// Synthetic seabed-like scene: a vertical light gradient, a textured floor,
/// a few soft blobs and sensor noise. Deterministic per seed.
pub fn synthetic_scene(size: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("finite scale");
    let horizon = rng.gen_range(0.45..0.75) * size as f64;
    let surface = rng.gen_range(0.55..0.85);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(2..6))
        .map(|_| {
            (
                rng.gen_range(0.0..size as f64),
                rng.gen_range(0.0..size as f64),
                rng.gen_range(2.0..size as f64 / 5.0),
                rng.gen_range(-0.35..0.35),
            )
        })
        .collect();
    let (fx, fy, phase) = (rng.gen_range(0.15..0.5), rng.gen_range(0.1..0.4), rng.gen_range(0.0..std::f64::consts::TAU));
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = surface * (1.0 - 0.6 * yf / size as f64);
            if yf > horizon {
                v = 0.35 + 0.08 * (fx * xf + fy * yf + phase).sin() + 0.05 * (0.7 * fx * xf - 1.3 * fy * yf).cos();
            }
            for &(bx, by, r, amp) in &blobs {
                let d2 = ((xf - bx).powi(2) + (yf - by).powi(2)) / (r * r);
                v += amp * (-d2).exp();
            }
            v += noise.sample(&mut rng);
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(size, size, pixels).expect("dimensions match")
}

/// Patches from `count` synthetic scenes, for fitting a desk-scale codebook.
pub fn training_patches(count: usize, size: usize, patch: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for i in 0..count {
        out.extend(extract_patches(&synthetic_scene(size, seed.wrapping_add(i as u64)), patch)?);
    }
    Ok(out)
}

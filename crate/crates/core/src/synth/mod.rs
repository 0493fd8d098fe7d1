//! Synthetic imbalanced segmentation data and PGM ingestion.
//!
//! Each sample is a union of axis-aligned filled ellipses over a flat
//! background. Intensities follow `0.2 + 0.6·mask + N(0, σ²)`, clamped to
//! `[0, 1]`. Sample `i` draws from its own stream keyed by `(seed, i)`, so
//! datasets can be generated in parallel without changing a single bit.

pub mod pgm;
pub mod rng;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::{BinMask, ProbMap};
use crate::report::fmt_num;

use self::pgm::Gray8;
use self::rng::Stream;

const MAX_ATTEMPTS: usize = 500;
const FRACTION_TOLERANCE: f64 = 0.2;
const BACKGROUND_LEVEL: f64 = 0.2;
const FOREGROUND_CONTRAST: f64 = 0.6;
const SPLIT_TAG: u64 = 0x0053_504c_4954; // "SPLIT"

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub fg_fraction_target: f64,
    pub n_images: usize,
    pub noise_sigma: f64,
    /// Inclusive range of ellipses per image.
    pub blob_count_range: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            fg_fraction_target: 0.05,
            n_images: 80,
            noise_sigma: 0.1,
            blob_count_range: (1, 3),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::invalid(
                "width/height",
                format!("need at least 16x16, got {}x{}", self.width, self.height),
            ));
        }
        if !(self.fg_fraction_target > 0.0 && self.fg_fraction_target <= 0.5) {
            return Err(Error::invalid(
                "fg_fraction",
                format!("must lie in (0, 0.5], got {}", self.fg_fraction_target),
            ));
        }
        if self.n_images == 0 {
            return Err(Error::invalid("n_images", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        let (lo, hi) = self.blob_count_range;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(
                "blob_count_range",
                format!("need 1 <= min <= max, got {lo}..={hi}"),
            ));
        }
        Ok(())
    }

    fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// An image with intensities in `[0, 1]` and its ground-truth mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ProbMap,
    pub mask: BinMask,
}

impl Sample {
    pub fn new(image: ProbMap, mask: BinMask) -> Result<Self> {
        if image.dims() != mask.dims() {
            return Err(Error::DimensionMismatch {
                expected: mask.dims(),
                found: image.dims(),
            });
        }
        Ok(Self { image, mask })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    /// Image quantized to bytes, `round(v · 255)`.
    pub fn image_gray8(&self) -> Gray8 {
        let (w, h) = self.dims();
        Gray8::new(
            w,
            h,
            self.image
                .values()
                .iter()
                .map(|v| (v * 255.0).round() as u8)
                .collect(),
        )
    }

    /// Mask as 0 / 255 bytes.
    pub fn mask_gray8(&self) -> Gray8 {
        let (w, h) = self.dims();
        Gray8::new(w, h, self.mask.values().iter().map(|&v| v * 255).collect())
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let target = spec.fg_fraction_target * spec.pixel_count() as f64;
    let lo = ((1.0 - FRACTION_TOLERANCE) * target).ceil().max(1.0) as usize;
    let hi = ((1.0 + FRACTION_TOLERANCE) * target).floor() as usize;
    if lo > hi {
        return Err(Error::GenerationFailed {
            sample: 0,
            target: spec.fg_fraction_target,
            attempts: 0,
        });
    }
    (0..spec.n_images)
        .into_par_iter()
        .map(|i| generate_one(spec, i, lo..=hi))
        .collect()
}

fn generate_one(
    spec: &SynthSpec,
    index: usize,
    accept: std::ops::RangeInclusive<usize>,
) -> Result<Sample> {
    let mut rng = Stream::derived(spec.seed, &[index as u64]);
    let (w, h) = (spec.width, spec.height);
    let target = spec.fg_fraction_target * spec.pixel_count() as f64;
    let (bmin, bmax) = spec.blob_count_range;
    let mut mask = vec![false; w * h];
    for _ in 0..MAX_ATTEMPTS {
        mask.iter_mut().for_each(|m| *m = false);
        let blobs = bmin + rng.below((bmax - bmin + 1) as u64) as usize;
        let share = target / blobs as f64;
        for _ in 0..blobs {
            paint_ellipse(&mut mask, w, h, share, &mut rng);
        }
        let count = mask.iter().filter(|&&m| m).count();
        if accept.contains(&count) {
            let mask = BinMask::from_bools(w, h, &mask)?;
            let image = mask
                .values()
                .iter()
                .map(|&m| {
                    let clean = BACKGROUND_LEVEL + FOREGROUND_CONTRAST * m as f64;
                    (clean + spec.noise_sigma * rng.normal()).clamp(0.0, 1.0)
                })
                .collect();
            return Sample::new(ProbMap::new(w, h, image)?, mask);
        }
    }
    Err(Error::GenerationFailed {
        sample: index,
        target: spec.fg_fraction_target,
        attempts: MAX_ATTEMPTS,
    })
}

fn paint_ellipse(mask: &mut [bool], w: usize, h: usize, area: f64, rng: &mut Stream) {
    let aspect = rng
        .uniform_in(-std::f64::consts::LN_2, std::f64::consts::LN_2)
        .exp();
    let rx = (area * aspect / std::f64::consts::PI).sqrt();
    let ry = (area / (aspect * std::f64::consts::PI)).sqrt();
    let mx = rx.min(w as f64 / 2.0);
    let my = ry.min(h as f64 / 2.0);
    let cx = rng.uniform_in(mx, w as f64 - mx);
    let cy = rng.uniform_in(my, h as f64 - my);
    // the pixel under the center is always painted
    let (px, py) = ((cx as usize).min(w - 1), (cy as usize).min(h - 1));
    mask[py * w + px] = true;
    let x0 = (cx - rx).floor().max(0.0) as usize;
    let x1 = ((cx + rx).ceil() as usize).min(w);
    let y0 = (cy - ry).floor().max(0.0) as usize;
    let y1 = ((cy + ry).ceil() as usize).min(h);
    for y in y0..y1 {
        let dy = (y as f64 + 0.5 - cy) / ry;
        for x in x0..x1 {
            let dx = (x as f64 + 0.5 - cx) / rx;
            if dx * dx + dy * dy <= 1.0 {
                mask[y * w + x] = true;
            }
        }
    }
}

/// Deterministic shuffle, then the first `round(ratio · n)` samples train.
/// Both halves must be non-empty.
pub fn train_val_split<T>(mut samples: Vec<T>, ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(
            "split ratio",
            format!("must lie in (0, 1) so both sets are non-empty, got {ratio}"),
        ));
    }
    let n = samples.len();
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(
            "split ratio",
            format!("{ratio} of {n} samples leaves one side empty"),
        ));
    }
    Stream::derived(seed, &[SPLIT_TAG]).shuffle(&mut samples);
    let val = samples.split_off(n_train);
    Ok((samples, val))
}

fn pgm_error(path: &Path) -> impl FnOnce(pgm::PgmError) -> Error + '_ {
    move |source| Error::Pgm {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads an 8-bit image / mask pair. Intensities are divided by the maxval
/// (255 for ordinary files); mask pixels at or above 128/255 of full scale
/// are foreground.
pub fn load_pgm_pair(image_path: impl AsRef<Path>, mask_path: impl AsRef<Path>) -> Result<Sample> {
    let (image_path, mask_path) = (image_path.as_ref(), mask_path.as_ref());
    let img = pgm::read_pgm(image_path).map_err(pgm_error(image_path))?;
    let msk = pgm::read_pgm(mask_path).map_err(pgm_error(mask_path))?;
    if (img.width, img.height) != (msk.width, msk.height) {
        return Err(Error::DimensionMismatch {
            expected: (img.width, img.height),
            found: (msk.width, msk.height),
        });
    }
    let scale = img.maxval as f64;
    let image = ProbMap::new(
        img.width,
        img.height,
        img.pixels.iter().map(|&v| v as f64 / scale).collect(),
    )?;
    let cut = msk.maxval as u32 * 128;
    let mask = BinMask::new(
        msk.width,
        msk.height,
        msk.pixels
            .iter()
            .map(|&v| (v as u32 * 255 >= cut) as u8)
            .collect(),
    )?;
    Sample::new(image, mask)
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub fg_fraction: f64,
}

pub const MANIFEST_HEADER: [&str; 4] = ["index", "image_path", "mask_path", "fg_fraction"];
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes `img_NNNN.pgm`, `mask_NNNN.pgm` and `manifest.csv` into `out_dir`.
/// Manifest paths are relative to `out_dir`.
pub fn write_dataset(samples: &[Sample], out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (index, s) in samples.iter().enumerate() {
        let image_path = PathBuf::from(format!("img_{index:04}.pgm"));
        let mask_path = PathBuf::from(format!("mask_{index:04}.pgm"));
        for (rel, gray) in [(&image_path, s.image_gray8()), (&mask_path, s.mask_gray8())] {
            let full = out_dir.join(rel);
            pgm::write_pgm(&full, &gray).map_err(pgm_error(&full))?;
        }
        entries.push(ManifestEntry {
            index,
            image_path,
            mask_path,
            fg_fraction: s.mask.foreground_fraction(),
        });
    }
    let mut w = csv::Writer::from_path(out_dir.join(MANIFEST_FILE))?;
    w.write_record(MANIFEST_HEADER)?;
    for e in &entries {
        w.write_record([
            e.index.to_string(),
            e.image_path.display().to_string(),
            e.mask_path.display().to_string(),
            fmt_num(e.fg_fraction),
        ])?;
    }
    w.flush()?;
    Ok(entries)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Manifest(format!(
            "expected header {}",
            MANIFEST_HEADER.join(",")
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            Ok(ManifestEntry {
                index: field(0)
                    .parse()
                    .map_err(|_| Error::Manifest(format!("bad index `{}`", field(0))))?,
                image_path: field(1).into(),
                mask_path: field(2).into(),
                fg_fraction: field(3)
                    .parse()
                    .map_err(|_| Error::Manifest(format!("bad fg_fraction `{}`", field(3))))?,
            })
        })
        .collect()
}

/// Loads every pair listed in a manifest; relative paths resolve against
/// the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    read_manifest(path)?
        .iter()
        .map(|e| load_pgm_pair(base.join(&e.image_path), base.join(&e.mask_path)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            width: 24,
            height: 20,
            fg_fraction_target: 0.1,
            n_images: 6,
            noise_sigma: 0.1,
            blob_count_range: (1, 3),
            seed,
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small(9)).unwrap(), generate(&small(9)).unwrap());
        assert_ne!(generate(&small(9)).unwrap(), generate(&small(10)).unwrap());
    }

    #[test]
    fn fraction_within_tolerance_and_non_degenerate() {
        for s in generate(&small(1)).unwrap() {
            let f = s.mask.foreground_fraction();
            assert!((0.08..=0.12).contains(&f), "{f}");
            assert!(s.mask.foreground_count() >= 1);
            assert!(s.mask.foreground_count() < s.mask.len());
        }
    }

    #[test]
    fn noiseless_images_have_two_levels() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            ..small(4)
        };
        for s in generate(&spec).unwrap() {
            for (&v, &m) in s.image.values().iter().zip(s.mask.values()) {
                assert_eq!(v, if m == 1 { 0.8 } else { 0.2 });
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(generate(&SynthSpec {
            width: 8,
            ..small(0)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            fg_fraction_target: 0.6,
            ..small(0)
        })
        .is_err());
        assert!(generate(&SynthSpec {
            blob_count_range: (0, 2),
            ..small(0)
        })
        .is_err());
    }

    #[test]
    fn unreachable_fraction_fails_explicitly() {
        let spec = SynthSpec {
            width: 16,
            height: 16,
            fg_fraction_target: 0.001,
            ..small(0)
        };
        assert!(matches!(
            generate(&spec),
            Err(Error::GenerationFailed { .. })
        ));
        // one pixel is the smallest blob, so twenty blobs cannot land near 2 pixels
        let crowded = SynthSpec {
            width: 16,
            height: 16,
            fg_fraction_target: 0.008,
            blob_count_range: (20, 20),
            ..small(0)
        };
        assert!(matches!(
            generate(&crowded),
            Err(Error::GenerationFailed { .. })
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b) = train_val_split(items.clone(), 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(train_val_split(items.clone(), 0.8, 3).unwrap(), (a, b));
        assert!(train_val_split(items.clone(), 1.0, 3).is_err());
        assert!(train_val_split(items, 0.01, 3).is_err());
    }

    #[test]
    fn pgm_pair_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples = generate(&small(2)).unwrap();
        let entries = write_dataset(&samples[..2], dir.path()).unwrap();
        let e = &entries[1];
        let loaded = load_pgm_pair(
            dir.path().join(&e.image_path),
            dir.path().join(&e.mask_path),
        )
        .unwrap();
        assert_eq!(loaded.mask, samples[1].mask);
        let original = fs::read(dir.path().join(&e.image_path)).unwrap();
        assert_eq!(pgm::encode(&loaded.image_gray8()), original);
        assert_eq!(
            load_manifest(dir.path().join(MANIFEST_FILE)).unwrap().len(),
            2
        );
    }

    #[test]
    fn full_scale_mask_is_all_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("i.pgm");
        let msk = dir.path().join("m.pgm");
        pgm::write_pgm(&img, &Gray8::new(2, 2, vec![0, 51, 204, 255])).unwrap();
        pgm::write_pgm(&msk, &Gray8::new(2, 2, vec![255; 4])).unwrap();
        let s = load_pgm_pair(&img, &msk).unwrap();
        assert_eq!(s.mask.values(), &[1, 1, 1, 1]);
        assert_eq!(s.image.values(), &[0.0, 0.2, 0.8, 1.0]);
    }

    #[test]
    fn pgm_pair_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("i.pgm");
        let msk = dir.path().join("m.pgm");
        pgm::write_pgm(&img, &Gray8::new(2, 2, vec![0; 4])).unwrap();
        pgm::write_pgm(&msk, &Gray8::new(4, 1, vec![0; 4])).unwrap();
        assert!(matches!(
            load_pgm_pair(&img, &msk),
            Err(Error::DimensionMismatch { .. })
        ));
        fs::write(&msk, b"P2\n2 2\n255\n0 0 0 0").unwrap();
        assert!(matches!(
            load_pgm_pair(&img, &msk),
            Err(Error::Pgm {
                source: pgm::PgmError::UnsupportedFormat(_),
                ..
            })
        ));
    }
}

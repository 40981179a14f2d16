//! Dataset ingestion: IDX image files, feature-vector CSV, synthetic Gaussian
//! blobs, and the private/auxiliary split.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{Dataset, Sample};
use crate::seeding::stream_rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently gunzipping it when it starts with the gzip
/// magic bytes.
fn read_maybe_gzipped(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxReader<'a> {
    name: &'a str,
    bytes: &'a [u8],
}

impl IdxReader<'_> {
    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.name.to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32_at(&self, offset: usize) -> Result<u32> {
        let chunk = self.bytes.get(offset..offset + 4).ok_or_else(|| {
            self.error(
                offset,
                format!(
                    "header truncated: need {} bytes, file has {}",
                    offset + 4,
                    self.bytes.len()
                ),
            )
        })?;
        Ok(u32::from_be_bytes(chunk.try_into().unwrap()))
    }

    fn expect_magic(&self, magic: u32) -> Result<()> {
        let found = self.u32_at(0)?;
        if found != magic {
            return Err(self.error(0, format!("bad magic 0x{found:08x}, expected 0x{magic:08x}")));
        }
        Ok(())
    }

    fn payload(&self, start: usize, len: usize) -> Result<&[u8]> {
        let expected = start + len;
        if self.bytes.len() < expected {
            return Err(self.error(
                self.bytes.len(),
                format!(
                    "payload truncated: expected {expected} bytes, found {}",
                    self.bytes.len()
                ),
            ));
        }
        Ok(&self.bytes[start..expected])
    }
}

/// Parses an IDX image file: pixels scaled to `[0, 1]`, images flattened
/// row-major. Returns `(rows, cols, images)`.
pub fn parse_idx_images(name: &str, bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let r = IdxReader { name, bytes };
    r.expect_magic(IDX_IMAGES_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    let rows = r.u32_at(8)? as usize;
    let cols = r.u32_at(12)? as usize;
    let dim = rows * cols;
    let pixels = r.payload(16, count * dim)?;
    let images = if dim == 0 {
        vec![Vec::new(); count]
    } else {
        pixels
            .chunks_exact(dim)
            .map(|img| img.iter().map(|&p| f64::from(p) / 255.0).collect())
            .collect()
    };
    Ok((rows, cols, images))
}

/// Parses an IDX label file.
pub fn parse_idx_labels(name: &str, bytes: &[u8]) -> Result<Vec<u8>> {
    let r = IdxReader { name, bytes };
    r.expect_magic(IDX_LABELS_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    Ok(r.payload(8, count)?.to_vec())
}

/// Loads an IDX image/label pair (optionally gzip-compressed) as a 10-class
/// dataset.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    load_idx_with_classes(images, labels, 10)
}

pub fn load_idx_with_classes(images: &Path, labels: &Path, num_classes: usize) -> Result<Dataset> {
    let img_name = images.display().to_string();
    let lbl_name = labels.display().to_string();
    let (rows, cols, pixels) = parse_idx_images(&img_name, &read_maybe_gzipped(images)?)?;
    let labels = parse_idx_labels(&lbl_name, &read_maybe_gzipped(labels)?)?;
    if pixels.len() != labels.len() {
        return Err(Error::Parse {
            path: lbl_name,
            offset: 4,
            message: format!("{} labels for {} images", labels.len(), pixels.len()),
        });
    }
    let samples = pixels
        .into_iter()
        .zip(labels)
        .map(|(f, l)| Sample::new(f, usize::from(l)))
        .collect();
    Dataset::new(rows * cols, num_classes, samples)
}

/// Encodes images (`rows × cols` bytes each) in IDX format.
pub fn encode_idx_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IDX_IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        debug_assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    rows: usize,
    cols: usize,
    images: &[Vec<u8>],
    labels: &[u8],
) -> Result<()> {
    File::create(images_path)?.write_all(&encode_idx_images(rows, cols, images))?;
    File::create(labels_path)?.write_all(&encode_idx_labels(labels))?;
    Ok(())
}

/// Loads feature vectors from CSV: each row is the features followed by an
/// integer label. No header.
pub fn load_feature_csv(path: &Path, num_classes: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let name = path.display().to_string();
    let mut samples = Vec::new();
    let mut dim = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let offset = record.position().map_or(0, |p| p.byte());
        let bad = |message: String| Error::Parse {
            path: name.clone(),
            offset,
            message: format!("row {}: {message}", row + 1),
        };
        if record.len() < 2 {
            return Err(bad("need at least one feature and a label".into()));
        }
        let (label_field, feature_fields) = (record.get(record.len() - 1).unwrap(), record.len() - 1);
        let label: usize = label_field
            .parse()
            .map_err(|_| bad(format!("label {label_field:?} is not a class index")))?;
        let features = (0..feature_fields)
            .map(|i| {
                let field = record.get(i).unwrap();
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("feature {field:?} is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(bad(format!("{} features, earlier rows have {d}", features.len())))
            }
            _ => {}
        }
        samples.push(Sample::new(features, label));
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        path: name.clone(),
        offset: 0,
        message: "no rows".into(),
    })?;
    Dataset::new(dim, num_classes, samples)
}

/// Isotropic unit-variance Gaussian blobs, `per_class` samples per class.
///
/// Class `k` is centred at `separation · u_k`: the k-th basis vector when
/// `classes ≤ dim`, otherwise a seeded random unit direction.
pub fn synth_blobs(
    classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes < 2 || per_class == 0 || dim == 0 {
        return Err(Error::domain("blobs need ≥ 2 classes, ≥ 1 sample per class and dim ≥ 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            if classes <= dim {
                let mut c = vec![0.0; dim];
                c[k] = separation;
                c
            } else {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = crate::nncore::l2_norm(&v);
                v.into_iter().map(|x| separation * x / norm).collect()
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for (k, centre) in centres.iter().enumerate() {
            let features = centre
                .iter()
                .map(|c| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    c + e
                })
                .collect();
            samples.push(Sample::new(features, k));
        }
    }
    Dataset::new(dim, classes, samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of samples that go to the private side.
    pub fraction: f64,
    pub seed: u64,
    /// Optional subsample size of the private side.
    pub subsample: Option<usize>,
}

/// Seeded shuffle, then split into `(private, aux)` at `fraction`. The private
/// half is optionally subsampled to `subsample` samples.
pub fn split_private_aux(full: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::domain(format!("split fraction {} outside (0, 1)", spec.fraction)));
    }
    let n = full.len();
    let cut = (spec.fraction * n as f64).round() as usize;
    if cut == 0 || cut == n {
        return Err(Error::domain(format!(
            "splitting {n} samples at {} leaves one side empty",
            spec.fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(spec.seed, 0));
    let mut private_idx = order[..cut].to_vec();
    let aux_idx = &order[cut..];
    if let Some(m) = spec.subsample {
        if m == 0 || m > private_idx.len() {
            return Err(Error::domain(format!(
                "subsample of {m} requested from a private half of {}",
                private_idx.len()
            )));
        }
        // The shuffle already randomised the order; keep a prefix.
        private_idx.truncate(m);
    }
    let pick = |idx: &[usize]| {
        Dataset::new(
            full.dim(),
            full.num_classes(),
            idx.iter().map(|&i| full.samples()[i].clone()).collect(),
        )
    };
    Ok((pick(&private_idx)?, pick(aux_idx)?))
}

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::interpret::Decoder;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learner::DomainModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

fn spread(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n == 1 {
        (lo + hi) / 2.0
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// Row-major grid over `bbox`: the first axis varies along columns, the
/// second along rows, and any further axes sit at the box center. A single
/// row or column sits at the center of its axis.
pub fn grid_points(bbox: &[[f64; 2]], spec: GridSpec) -> Result<Vec<Vec<f64>>> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::invalid("grid needs at least one row and one column"));
    }
    if bbox.is_empty() {
        return Err(Error::invalid("grid over an empty box"));
    }
    let mut points = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let p = bbox
                .iter()
                .enumerate()
                .map(|(k, &[lo, hi])| match k {
                    0 => spread(lo, hi, c, spec.cols),
                    1 => spread(lo, hi, r, spec.rows),
                    _ => (lo + hi) / 2.0,
                })
                .collect();
            points.push(p);
        }
    }
    Ok(points)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decodes the grid and writes one binary graymap (one channel) or pixmap
/// (three channels) per point, named `grid_r{row}_c{col}`.
pub fn decode_grid<D: Decoder + ?Sized>(
    decoder: &D,
    bbox: &[[f64; 2]],
    spec: GridSpec,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let shape = decoder.image_shape();
    let [h, w, c] = shape[..] else {
        return Err(Error::shape(format!("decoded samples of shape {shape:?} are not images")));
    };
    let (magic, ext) = match c {
        1 => ("P5", "pgm"),
        3 => ("P6", "ppm"),
        _ => return Err(Error::shape(format!("cannot write {c}-channel images"))),
    };
    let images = decoder.decode_points(&grid_points(bbox, spec)?)?;
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(images.len());
    for (i, img) in images.iter().enumerate() {
        let path = dir.join(format!("grid_r{}_c{}.{ext}", i / spec.cols, i % spec.cols));
        let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
        bytes.extend(img.iter().map(|&v| to_byte(v)));
        fs::write(&path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub semantic_bits: u64,
    pub raw_bits: u64,
    /// `1 - semantic / raw`.
    pub reduction: f64,
}

/// Bits needed to send a domain point versus the raw sample it stands for.
pub fn rate_report(n: u64, bits_per_value: u64, h: u64, w: u64, c: u64, bits_per_channel: u64) -> Result<RateReport> {
    if [n, bits_per_value, h, w, c, bits_per_channel].contains(&0) {
        return Err(Error::invalid("rate arguments must be positive"));
    }
    let semantic_bits = n * bits_per_value;
    let raw_bits = h * w * c * bits_per_channel;
    Ok(RateReport { semantic_bits, raw_bits, reduction: 1.0 - semantic_bits as f64 / raw_bits as f64 })
}

/// Writes `sample_id,q_1..q_N,label,predicted`, one row per sample in
/// dataset order. Coordinates use the shortest representation that reads
/// back to the same value.
pub fn export_features<T: Scalar>(model: &DomainModel<T>, dataset: &Dataset<T>, path: &Path) -> Result<()> {
    let points = model.encode_dataset(dataset)?;
    let predicted = model.classify_points(&points)?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    let names: Vec<String> = (1..=model.domain_dim()).map(|k| format!("q_{k}")).collect();
    writeln!(out, "sample_id,{},label,predicted", names.join(","))?;
    for (i, q) in points.iter().enumerate() {
        let coords: Vec<String> = q.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{i},{},{},{}", coords.join(","), dataset.labels()[i], predicted[i])?;
    }
    out.flush()?;
    Ok(())
}

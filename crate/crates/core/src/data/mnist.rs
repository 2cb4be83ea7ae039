use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{Dataset, PropertyTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Reads a file, transparently inflating it when it carries the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]])).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        expected: at + 4,
        found: bytes.len(),
    })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(Error::BadMagic { path: path.to_path_buf(), found, expected });
    }
    Ok(())
}

/// Loads an IDX image file and its label file (raw or gzipped).
///
/// Pixels are scaled by 1/255; the label byte is the property index and the
/// property table is the ten digits.
pub fn load_mnist_idx<T: Scalar>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read_maybe_gz(ip)?;
    let labels = read_maybe_gz(lp)?;

    check_magic(&images, IMAGE_MAGIC, ip)?;
    let count = be_u32(&images, 4, ip)? as usize;
    let rows = be_u32(&images, 8, ip)? as usize;
    let cols = be_u32(&images, 12, ip)? as usize;
    let pixels = count * rows * cols;
    if images.len() < 16 + pixels {
        return Err(Error::Truncated { path: ip.to_path_buf(), expected: 16 + pixels, found: images.len() });
    }

    check_magic(&labels, LABEL_MAGIC, lp)?;
    let label_count = be_u32(&labels, 4, lp)? as usize;
    if label_count != count {
        return Err(Error::CountMismatch { images: count, labels: label_count });
    }
    if labels.len() < 8 + count {
        return Err(Error::Truncated { path: lp.to_path_buf(), expected: 8 + count, found: labels.len() });
    }

    let scale = T::lit(1.0 / 255.0);
    let samples = images[16..16 + pixels].iter().map(|&b| T::lit(b as f64) * scale).collect();
    let labels: Vec<usize> = labels[8..8 + count].iter().map(|&b| b as usize).collect();
    if let Some(bad) = labels.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!("{}: label {bad} is not a digit", lp.display())));
    }
    let properties = PropertyTable { names: (0..10).map(|d| d.to_string()).collect(), attributes: None };
    Dataset::new(vec![rows, cols, 1], samples, labels, properties)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for x in [IMAGE_MAGIC, count, rows, cols] {
            v.extend(x.to_be_bytes());
        }
        v.extend(pixels);
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend(LABEL_MAGIC.to_be_bytes());
        v.extend((labels.len() as u32).to_be_bytes());
        v.extend(labels);
        v
    }

    #[test]
    fn parses_raw_and_gzipped() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 3 * 2).map(|i| (i * 20) as u8).collect();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab.gz");
        fs::write(&ip, idx_images(2, 3, 2, &pixels)).unwrap();
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&idx_labels(&[7, 0])).unwrap();
        fs::write(&lp, gz.finish().unwrap()).unwrap();

        let d: Dataset<f32> = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.sample_shape(), &[3, 2, 1]);
        assert_eq!(d.labels(), &[7, 0]);
        assert_eq!(d.num_properties(), 10);
        assert_eq!(d.sample(0)[1], 20.0 / 255.0);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        let good_images = idx_images(2, 2, 2, &[0; 8]);

        let mut bad = good_images.clone();
        bad[3] = 0x01;
        fs::write(&ip, &bad).unwrap();
        fs::write(&lp, idx_labels(&[1, 2])).unwrap();
        assert!(matches!(load_mnist_idx::<f32>(&ip, &lp), Err(Error::BadMagic { found: 0x801, .. })));

        fs::write(&ip, &good_images[..20]).unwrap();
        assert!(matches!(load_mnist_idx::<f32>(&ip, &lp), Err(Error::Truncated { .. })));

        fs::write(&ip, &good_images).unwrap();
        fs::write(&lp, idx_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(load_mnist_idx::<f32>(&ip, &lp), Err(Error::CountMismatch { images: 2, labels: 3 })));
    }
}

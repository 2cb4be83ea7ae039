//! Single-file dataset container.
//!
//! Layout, all integers little-endian:
//! `magic (8 bytes) | manifest length (u32) | manifest JSON | labels (u32 each)
//! | sample values (f32 each) | latent qualities (size, brightness as f64 pairs)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LatentQualities, PropertyTable, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CONTAINER_MAGIC: &[u8; 8] = b"CSDSET\0\0";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    count: usize,
    sample_shape: Vec<usize>,
    properties: PropertyTable,
    split: Split,
    seed: Option<u64>,
    has_latents: bool,
}

pub fn write_container<T: Scalar>(dataset: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let manifest = Manifest {
        format_version: CONTAINER_VERSION,
        count: dataset.len(),
        sample_shape: dataset.sample_shape().to_vec(),
        properties: dataset.properties().clone(),
        split: dataset.split(),
        seed: dataset.seed(),
        has_latents: dataset.latents().is_some(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + dataset.samples().len() * 4);
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend((json.len() as u32).to_le_bytes());
    out.extend(&json);
    for &l in dataset.labels() {
        out.extend((l as u32).to_le_bytes());
    }
    for v in dataset.samples() {
        out.extend((v.as_f64() as f32).to_le_bytes());
    }
    if let Some(latents) = dataset.latents() {
        for q in latents {
            out.extend(q.size.to_le_bytes());
            out.extend(q.brightness.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("container truncated: need {n} bytes at offset {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_container<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(8)? != CONTAINER_MAGIC {
        return Err(Error::Format("not a dataset container".into()));
    }
    let len = r.u32()? as usize;
    let manifest: Manifest =
        serde_json::from_slice(r.take(len)?).map_err(|e| Error::Format(format!("container manifest: {e}")))?;
    if manifest.format_version != CONTAINER_VERSION {
        return Err(Error::Format(format!(
            "container version {} is not supported (expected {CONTAINER_VERSION})",
            manifest.format_version
        )));
    }
    let per: usize = manifest.sample_shape.iter().product();
    let labels = (0..manifest.count).map(|_| r.u32().map(|l| l as usize)).collect::<Result<Vec<_>>>()?;
    let samples = (0..manifest.count * per).map(|_| r.f32().map(|v| T::lit(v as f64))).collect::<Result<Vec<_>>>()?;
    let latents = if manifest.has_latents {
        Some(
            (0..manifest.count)
                .map(|_| Ok(LatentQualities { size: r.f64()?, brightness: r.f64()? }))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    if r.at != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes in container", bytes.len() - r.at)));
    }
    let mut d = Dataset::new(manifest.sample_shape, samples, labels, manifest.properties)?
        .with_split(manifest.split)
        .with_seed(manifest.seed);
    if let Some(l) = latents {
        d = d.with_latents(l)?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_shapes, SyntheticConfig};

    #[test]
    fn round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig { count: 50, seed: 4, ..Default::default() };
        let d: Dataset<f32> = synthetic_shapes(&cfg).unwrap();
        let a = dir.path().join("a.csd");
        let b = dir.path().join("b.csd");
        write_container(&d, &a).unwrap();
        write_container(&synthetic_shapes::<f32>(&cfg).unwrap(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back: Dataset<f32> = read_container(&a).unwrap();
        assert_eq!(back, d);

        let bytes = fs::read(&a).unwrap();
        fs::write(&b, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_container::<f32>(&b), Err(Error::Format(_))));
    }
}

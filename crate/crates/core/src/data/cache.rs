//! Packed binary image cache.
//!
//! Layout: `DONNIMG1`, u32 count, u32 side (little-endian), then each image as
//! row-major bits packed MSB-first and padded to a whole byte, then one u16
//! label per image.

use std::fs;
use std::path::Path;

use super::{DataError, LabeledImageDataset, Result, SplitTag};

pub const CACHE_MAGIC: &[u8; 8] = b"DONNIMG1";

fn image_bytes(side: usize) -> usize {
    (side * side).div_ceil(8)
}

pub fn encode_cache(data: &LabeledImageDataset) -> Result<Vec<u8>> {
    let count = u32::try_from(data.len()).map_err(|_| DataError::Cache("too many images".into()))?;
    let side = u32::try_from(data.side()).map_err(|_| DataError::Cache("image side too large".into()))?;
    let per = image_bytes(data.side());
    let mut out = Vec::with_capacity(16 + data.len() * (per + 2));
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&side.to_le_bytes());
    for image in data.images() {
        let mut packed = vec![0u8; per];
        for (i, &bit) in image.iter().enumerate() {
            if bit != 0 {
                packed[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    for &label in data.labels() {
        let l = u16::try_from(label).map_err(|_| DataError::Cache(format!("label {label} exceeds u16")))?;
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cache(bytes: &[u8], class_names: Vec<String>, split: SplitTag, seed: u64) -> Result<LabeledImageDataset> {
    if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
        return Err(DataError::Cache("missing DONNIMG1 header".into()));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let side = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let per = image_bytes(side);
    let expected = 16 + count * per + count * 2;
    if bytes.len() != expected {
        return Err(DataError::Cache(format!(
            "expected {expected} bytes for {count} images of side {side}, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[16..];
    let images = (0..count)
        .map(|k| {
            let packed = &body[k * per..(k + 1) * per];
            (0..side * side)
                .map(|i| u8::from(packed[i / 8] & (0x80 >> (i % 8)) != 0))
                .collect()
        })
        .collect();
    let labels = body[count * per..]
        .chunks_exact(2)
        .map(|c| usize::from(u16::from_le_bytes([c[0], c[1]])))
        .collect();
    LabeledImageDataset::new(side, images, labels, class_names, split, seed)
}

pub fn write_cache(path: impl AsRef<Path>, data: &LabeledImageDataset) -> Result<()> {
    fs::write(path, encode_cache(data)?)?;
    Ok(())
}

pub fn read_cache(path: impl AsRef<Path>, class_names: Vec<String>, split: SplitTag, seed: u64) -> Result<LabeledImageDataset> {
    decode_cache(&fs::read(path)?, class_names, split, seed)
}

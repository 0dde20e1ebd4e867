//! The `SFSV` binary container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SFSV"
//! 4       4     version (u32 LE) = 1
//! 8       4     frames   (u32 LE)
//! 12      4     height   (u32 LE)
//! 16      4     width    (u32 LE)
//! 20      4     channels (u32 LE)
//! 24      1     dtype code, 0x01 = f32 LE
//! 25      7     reserved, zero
//! 32      ...   payload, channel-major, then frame-major, then row-major
//! ```

use std::fs;
use std::path::Path;

use super::{FeatureVolume, Role, VolumeShape};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SFSV";
pub const HEADER_LEN: usize = 32;
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0x01;

fn dim_u32(v: usize, name: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Shape(format!("{name} = {v} does not fit in u32")))
}

fn encode(volumes: &[FeatureVolume]) -> Result<Vec<u8>> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::Parameter("container needs at least one channel".into()))?;
    let shape = first.shape();
    for v in volumes {
        first.ensure_same_shape(v)?;
        if let Some(bad) = v.as_slice().iter().find(|x| !x.is_finite()) {
            return Err(Error::Validation(format!(
                "refusing to save non-finite value {bad}"
            )));
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * shape.len() * volumes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32(shape.frames, "frames")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(shape.height, "height")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(shape.width, "width")?.to_le_bytes());
    out.extend_from_slice(&dim_u32(volumes.len(), "channels")?.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0u8; 7]);
    debug_assert_eq!(out.len(), HEADER_LEN);
    for v in volumes {
        for x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn decode(bytes: &[u8]) -> Result<Vec<FeatureVolume>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        let got = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
        return Err(Error::Format(format!(
            "bad magic {got:?}, expected \"SFSV\""
        )));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corruption(format!(
            "header truncated at {} bytes",
            bytes.len()
        )));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let frames = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let width = read_u32(bytes, 16) as usize;
    let channels = read_u32(bytes, 20) as usize;
    if bytes[24] != DTYPE_F32 {
        return Err(Error::Format(format!(
            "unsupported dtype code {:#04x}",
            bytes[24]
        )));
    }
    if bytes[25..HEADER_LEN].iter().any(|&b| b != 0) {
        return Err(Error::Format("reserved header bytes are not zero".into()));
    }
    if channels == 0 {
        return Err(Error::Format("channel count is zero".into()));
    }
    let shape = VolumeShape::new(frames, height, width)?;
    let n = shape.len();
    let expected = n
        .checked_mul(channels)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Corruption("payload size overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Corruption(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    payload
        .chunks_exact(4 * n)
        .map(|chunk| {
            let data = chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
                .collect();
            FeatureVolume::new(shape, data, Role::Generic)
        })
        .collect()
}

/// Writes a single-channel container.
pub fn save_volume(v: &FeatureVolume, path: impl AsRef<Path>) -> Result<()> {
    save_volumes(std::slice::from_ref(v), path)
}

/// Writes a multi-channel container; all volumes must share a shape.
pub fn save_volumes(volumes: &[FeatureVolume], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(volumes)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a single-channel container. Loaded volumes carry [`Role::Generic`].
pub fn load_volume(path: impl AsRef<Path>) -> Result<FeatureVolume> {
    let path = path.as_ref();
    let mut vols = load_volumes(path)?;
    if vols.len() != 1 {
        return Err(Error::Format(format!(
            "{} holds {} channels, expected 1",
            path.display(),
            vols.len()
        )));
    }
    Ok(vols.remove(0))
}

pub fn load_volumes(path: impl AsRef<Path>) -> Result<Vec<FeatureVolume>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(shape: (usize, usize, usize), f: impl Fn(usize) -> f32) -> FeatureVolume {
        let s = VolumeShape::new(shape.0, shape.1, shape.2).unwrap();
        FeatureVolume::new(s, (0..s.len()).map(f).collect(), Role::Generic).unwrap()
    }

    #[test]
    fn round_trip_half_volume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.sfsv");
        let v = vol((2, 3, 4), |_| 0.5);
        save_volume(&v, &p).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back, v);
        // 32-byte header + 24 voxels * 4 bytes
        assert_eq!(fs::metadata(&p).unwrap().len(), 32 + 24 * 4);
    }

    #[test]
    fn single_voxel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.sfsv");
        save_volume(&vol((1, 1, 1), |_| 7.25), &p).unwrap();
        let back = load_volume(&p).unwrap();
        assert_eq!(back.as_slice(), &[7.25]);
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = encode(&[vol((2, 3, 4), |i| i as f32)]).unwrap();
        assert_eq!(&bytes[0..4], b"SFSV");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &4u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1u32.to_le_bytes());
        assert_eq!(bytes[24], 0x01);
        assert!(bytes[25..32].iter().all(|&b| b == 0));
        assert_eq!(&bytes[32 + 4 * 23..], &23f32.to_le_bytes());
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = encode(&[vol((1, 1, 1), |_| 1.0)]).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_corruption() {
        let bytes = encode(&[vol((2, 3, 4), |_| 1.0)]).unwrap();
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1]),
            Err(Error::Corruption(_))
        ));
        assert!(matches!(decode(&bytes[..20]), Err(Error::Corruption(_))));
    }

    #[test]
    fn nan_payload_is_validation_error() {
        let mut bytes = encode(&[vol((1, 1, 2), |_| 1.0)]).unwrap();
        bytes[32..36].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn multi_channel_is_channel_major() {
        let a = vol((1, 2, 2), |i| i as f32);
        let b = vol((1, 2, 2), |i| 10.0 + i as f32);
        let bytes = encode(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(&bytes[32 + 16..32 + 20], &10f32.to_le_bytes());
        let back = decode(&bytes).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn saves_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let v = vol((3, 5, 7), |i| (i as f32).sin());
        save_volume(&v, dir.path().join("a")).unwrap();
        save_volume(&v, dir.path().join("b")).unwrap();
        assert_eq!(
            fs::read(dir.path().join("a")).unwrap(),
            fs::read(dir.path().join("b")).unwrap()
        );
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let v = vol((1, 1, 1), |_| 0.0);
        let err = save_volume(&v, "/nonexistent-dir/for/sure/v.sfsv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}

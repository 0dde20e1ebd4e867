//! Grayscale PGM frame sequences, one file per frame.

use std::fs;
use std::path::Path;

use super::{FeatureVolume, Role, VolumeShape};
use crate::error::{Error, Result};

struct PgmFrame {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

/// Skips whitespace and `#` comments, then reads one ASCII unsigned integer.
fn next_uint(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("expected an integer in PGM header".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .expect("ascii digits")
        .parse()
        .map_err(|_| Error::Format("PGM header integer out of range".into()))
}

fn parse_pgm(bytes: &[u8]) -> Result<PgmFrame> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::Format("not a PGM file (missing P2/P5 magic)".into())),
    };
    let mut pos = 2;
    let width = next_uint(bytes, &mut pos)?;
    let height = next_uint(bytes, &mut pos)?;
    let maxval = next_uint(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(Error::Format("PGM frame has a zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let n = width * height;
    let scale = 1.0 / maxval as f64;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        pos += 1;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::Corruption("PGM raster truncated".into()))?;
        if wide {
            for b in raster.chunks_exact(2) {
                let u = u16::from_be_bytes([b[0], b[1]]) as usize;
                pixels.push(u);
            }
        } else {
            pixels.extend(raster.iter().map(|&u| u as usize));
        }
    } else {
        for _ in 0..n {
            pixels.push(next_uint(bytes, &mut pos)?);
        }
    }
    if let Some(&u) = pixels.iter().find(|&&u| u > maxval) {
        return Err(Error::Corruption(format!(
            "pixel {u} exceeds maxval {maxval}"
        )));
    }
    Ok(PgmFrame {
        width,
        height,
        pixels: pixels
            .into_iter()
            .map(|u| (u as f64 * scale) as f32)
            .collect(),
    })
}

/// Reads every file in `dir`, in lexicographic name order, as one frame.
///
/// Pixel value `u` maps to `u / maxval`.
pub fn import_pgm_sequence(dir: impl AsRef<Path>) -> Result<FeatureVolume> {
    let dir = dir.as_ref();
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Shape(format!("no frames in {}", dir.display())));
    }
    let mut data = Vec::new();
    let mut dims = None;
    for p in &paths {
        let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
        let frame =
            parse_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
        match dims {
            None => dims = Some((frame.height, frame.width)),
            Some(d) if d != (frame.height, frame.width) => {
                return Err(Error::Shape(format!(
                    "{} is {}x{}, earlier frames are {}x{}",
                    p.display(),
                    frame.height,
                    frame.width,
                    d.0,
                    d.1
                )));
            }
            Some(_) => {}
        }
        data.extend(frame.pixels);
    }
    let (height, width) = dims.expect("at least one frame");
    FeatureVolume::new(
        VolumeShape::new(paths.len(), height, width)?,
        data,
        Role::Generic,
    )
}

/// Writes each frame as a 16-bit binary PGM `frame_NNNNN.pgm`, quantizing
/// `round(v * 65535)`. Values must lie in `[0, 1]`.
pub fn export_pgm_sequence(v: &FeatureVolume, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if let Some(bad) = v.as_slice().iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Validation(format!(
            "PGM export needs values in [0, 1], found {bad}"
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shape = v.shape();
    for t in 0..shape.frames {
        let mut out = format!("P5\n{} {}\n65535\n", shape.width, shape.height).into_bytes();
        for &x in v.frames(t, t + 1) {
            let q = (f64::from(x) * 65535.0).round() as u16;
            out.extend_from_slice(&q.to_be_bytes());
        }
        let path = dir.join(format!("frame_{t:05}.pgm"));
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_p5_8bit(path: &Path, w: usize, h: usize, value: u8) {
        let mut b = format!("P5\n# comment\n{w} {h}\n255\n").into_bytes();
        b.extend(std::iter::repeat_n(value, w * h));
        fs::write(path, b).unwrap();
    }

    #[test]
    fn white_frames_map_to_one() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_p5_8bit(&dir.path().join(format!("f{i}.pgm")), 4, 4, 255);
        }
        let v = import_pgm_sequence(dir.path()).unwrap();
        assert_eq!(v.shape(), VolumeShape::new(3, 4, 4).unwrap());
        assert!(v.as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn export_import_within_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let s = VolumeShape::new(2, 1, 3).unwrap();
        let v = FeatureVolume::new(s, vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0], Role::Generic).unwrap();
        export_pgm_sequence(&v, dir.path()).unwrap();
        let back = import_pgm_sequence(dir.path()).unwrap();
        for (a, b) in v.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 1.0 / 65535.0, "{a} vs {b}");
        }
    }

    #[test]
    fn ascii_pgm_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.pgm"), "P2\n2 1\n4\n0 4\n").unwrap();
        let v = import_pgm_sequence(dir.path()).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn frames_are_read_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        write_p5_8bit(&dir.path().join("b.pgm"), 1, 1, 255);
        write_p5_8bit(&dir.path().join("a.pgm"), 1, 1, 0);
        let v = import_pgm_sequence(dir.path()).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn empty_directory_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            import_pgm_sequence(dir.path()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn mixed_sizes_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        write_p5_8bit(&dir.path().join("a.pgm"), 4, 4, 1);
        write_p5_8bit(&dir.path().join("b.pgm"), 4, 5, 1);
        assert!(matches!(
            import_pgm_sequence(dir.path()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn non_pgm_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "hello").unwrap();
        assert!(matches!(
            import_pgm_sequence(dir.path()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn export_rejects_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let s = VolumeShape::new(1, 1, 1).unwrap();
        let v = FeatureVolume::new(s, vec![1.5], Role::Generic).unwrap();
        assert!(matches!(
            export_pgm_sequence(&v, dir.path()),
            Err(Error::Validation(_))
        ));
    }
}

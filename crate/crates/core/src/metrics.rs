//! Vector angles, Jaccard overlap and per-iteration convergence tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{FeatureVolume, Role, VolumeShape};

/// One boolean per voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    shape: VolumeShape,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(shape: VolumeShape, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != shape.len() {
            return Err(Error::Shape(format!(
                "mask has {} bits, shape {shape} needs {}",
                bits.len(),
                shape.len()
            )));
        }
        Ok(Self { shape, bits })
    }

    pub fn empty(shape: VolumeShape) -> Self {
        Self {
            shape,
            bits: vec![false; shape.len()],
        }
    }

    /// Voxels strictly above `threshold`.
    pub fn from_threshold(v: &FeatureVolume, threshold: f32) -> Self {
        Self {
            shape: v.shape(),
            bits: v.as_slice().iter().map(|&x| x > threshold).collect(),
        }
    }

    /// Reads a 0/1 volume; anything above one half counts as set.
    pub fn from_volume(v: &FeatureVolume) -> Self {
        Self::from_threshold(v, 0.5)
    }

    pub fn to_volume(&self) -> FeatureVolume {
        FeatureVolume::from_parts_unchecked(
            self.shape,
            self.bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
            Role::Generic,
        )
    }

    pub fn shape(&self) -> VolumeShape {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Angle between two vectors in degrees, in `[0, 180]`.
pub fn angle_degrees(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "angle between vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Parameter("angle with a zero vector".into()));
    }
    // 2 atan2(|u - v|, |u + v|) on the unit vectors keeps full precision
    // near 0 and 180 degrees, where acos of the cosine does not
    let (mut diff, mut sum) = (0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees())
}

/// Same as [`angle_degrees`] for two volumes.
pub fn volume_angle_degrees(a: &FeatureVolume, b: &FeatureVolume) -> Result<f64> {
    a.ensure_same_shape(b)?;
    angle_degrees(&a.to_f64(), &b.to_f64())
}

/// `|a ∩ b| / |a ∪ b|`, with two empty masks scoring 1.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch {
            expected: a.shape,
            actual: b.shape,
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub angle_deg: Option<f64>,
    pub iou: Option<f64>,
}

/// Formats `v` with `digits` significant digits in scientific notation.
pub fn format_sig(v: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), v)
}

/// CSV with header `iter,angle_deg,iou`; absent values are left empty.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iter,angle_deg,iou\n");
    let cell = |v: Option<f64>| v.map(|x| format_sig(x, 9)).unwrap_or_default();
    for r in rows {
        writeln!(out, "{},{},{}", r.iter, cell(r.angle_deg), cell(r.iou)).expect("string write");
    }
    out
}

pub fn write_trace_csv(rows: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, trace_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        let x = [1.0, 2.0, 3.0];
        assert!(angle_degrees(&x, &x).unwrap().abs() < 1e-6);
        assert!((angle_degrees(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!((angle_degrees(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 45.0).abs() < 1e-12);
        assert!((angle_degrees(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 180.0).abs() < 1e-12);
        assert!(matches!(
            angle_degrees(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Parameter(_))
        ));
        assert!(angle_degrees(&[1.0], &[1.0, 0.0]).is_err());
    }

    fn mask(bits: &[u8]) -> BinaryMask {
        let s = VolumeShape::new(1, 1, bits.len()).unwrap();
        BinaryMask::new(s, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn jaccard_cases() {
        let a = mask(&[1, 1, 0, 0, 0, 0, 0, 0]);
        let b = mask(&[1, 1, 1, 1, 1, 1, 0, 0]);
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        let c = mask(&[0, 0, 1, 1, 0, 0, 0, 0]);
        assert_eq!(jaccard(&a, &c).unwrap(), 0.0);
        let e = mask(&[0; 8]);
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
        assert!(jaccard(&a, &mask(&[1])).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = [
            TraceRow {
                iter: 1,
                angle_deg: Some(70.123456789),
                iou: None,
            },
            TraceRow {
                iter: 2,
                angle_deg: None,
                iou: Some(0.5),
            },
        ];
        let csv = trace_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "iter,angle_deg,iou");
        assert_eq!(lines[1], "1,7.01234568e1,");
        assert_eq!(lines[2], "2,,5.00000000e-1");
        let back: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((back - 70.123456789).abs() < 1e-6);
    }

    #[test]
    fn mask_volume_round_trip() {
        let m = mask(&[1, 0, 1]);
        assert_eq!(BinaryMask::from_volume(&m.to_volume()), m);
        assert_eq!(m.count(), 2);
    }
}

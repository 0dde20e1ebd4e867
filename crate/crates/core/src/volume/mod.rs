//! Dense space-time volumes.
//!
//! A [`FeatureVolume`] stores one `f32` per voxel in frame-major, then
//! row-major order: voxel `(t, y, x)` lives at `t * H * W + y * W + x`.
//! Every other module (convolution, engine, oracle) agrees on this layout,
//! so a flat volume slice doubles as the node vector of the pixel graph.

mod container;
mod pgm;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use container::{load_volume, load_volumes, save_volume, save_volumes, HEADER_LEN, MAGIC};
pub use pgm::{export_pgm_sequence, import_pgm_sequence};

/// Extent of a volume: frames × height × width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VolumeShape {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl VolumeShape {
    pub fn new(frames: usize, height: usize, width: usize) -> Result<Self> {
        let shape = Self {
            frames,
            height,
            width,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Shape(format!(
                "all dimensions must be >= 1, got {self}"
            )));
        }
        self.frames
            .checked_mul(self.height)
            .and_then(|n| n.checked_mul(self.width))
            .ok_or_else(|| Error::Shape(format!("voxel count of {self} overflows")))?;
        Ok(())
    }

    /// Number of voxels (graph nodes).
    #[inline]
    pub fn len(&self) -> usize {
        self.frames * self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn frame_len(&self) -> usize {
        self.height * self.width
    }

    /// Linear index of voxel `(t, y, x)`.
    #[inline]
    pub fn index(&self, t: usize, y: usize, x: usize) -> usize {
        debug_assert!(t < self.frames && y < self.height && x < self.width);
        (t * self.height + y) * self.width + x
    }

    /// Inverse of [`VolumeShape::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.width;
        let y = (idx / self.width) % self.height;
        let t = idx / self.frame_len();
        (t, y, x)
    }

    /// Same spatial extent with a different number of frames.
    pub fn with_frames(&self, frames: usize) -> Self {
        Self { frames, ..*self }
    }
}

impl fmt::Display for VolumeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.frames, self.height, self.width)
    }
}

/// What a volume represents. Unary maps and solutions must be nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Role {
    Unary,
    Pairwise,
    Solution,
    #[default]
    Generic,
}

impl Role {
    fn requires_nonnegative(self) -> bool {
        matches!(self, Role::Unary | Role::Solution)
    }
}

/// A dense, immutable `f32` grid over a [`VolumeShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    shape: VolumeShape,
    data: Vec<f32>,
    role: Role,
}

impl FeatureVolume {
    /// Builds a volume, checking length, finiteness and the role's sign constraint.
    pub fn new(shape: VolumeShape, data: Vec<f32>, role: Role) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "payload has {} values but shape {shape} needs {}",
                data.len(),
                shape.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value {} at voxel {:?}",
                data[i],
                shape.coords(i)
            )));
        }
        if role.requires_nonnegative() {
            if let Some(i) = data.iter().position(|&v| v < 0.0) {
                return Err(Error::Validation(format!(
                    "{role:?} volume must be nonnegative, found {} at voxel {:?}",
                    data[i],
                    shape.coords(i)
                )));
            }
        }
        Ok(Self { shape, data, role })
    }

    /// Wraps data the caller has already validated.
    pub(crate) fn from_parts_unchecked(shape: VolumeShape, data: Vec<f32>, role: Role) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { shape, data, role }
    }

    pub fn filled(shape: VolumeShape, value: f32, role: Role) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()], role)
    }

    pub fn zeros(shape: VolumeShape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
            role: Role::Generic,
        }
    }

    /// Builds a volume by evaluating `f(t, y, x)` at every voxel.
    pub fn from_fn(
        shape: VolumeShape,
        role: Role,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for t in 0..shape.frames {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    data.push(f(t, y, x));
                }
            }
        }
        Self::new(shape, data, role)
    }

    #[inline]
    pub fn shape(&self) -> VolumeShape {
        self.shape
    }

    #[inline]
    pub fn role(&self) -> Role {
        self.role
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize, x: usize) -> f32 {
        self.data[self.shape.index(t, y, x)]
    }

    /// Contiguous slice holding frames `start..end`.
    pub fn frames(&self, start: usize, end: usize) -> &[f32] {
        let fl = self.shape.frame_len();
        &self.data[start * fl..end * fl]
    }

    /// Re-tags the volume, re-running the role's validation.
    pub fn with_role(self, role: Role) -> Result<Self> {
        Self::new(self.shape, self.data, role)
    }

    /// Element-wise map into a new generic volume.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.shape,
            self.data.iter().map(|&v| f(v)).collect(),
            Role::Generic,
        )
    }

    /// Element-wise combination of two same-shape volumes.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f32, f32) -> f32) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Self::new(
            self.shape,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            Role::Generic,
        )
    }

    pub fn scale(&self, c: f32) -> Result<Self> {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                actual: other.shape,
            });
        }
        Ok(())
    }

    /// L2 norm accumulated in `f64`.
    pub fn l2_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    /// Values widened to `f64`, in linear order.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    /// Rounds an `f64` node vector into a volume.
    pub fn from_f64(shape: VolumeShape, values: &[f64], role: Role) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| v as f32).collect(), role)
    }

    /// Linear min-max rescale into `[0, 1]`; constant volumes map to 0.
    pub fn rescaled_unit(&self) -> Result<Self> {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        let out = if span > 0.0 {
            self.data
                .iter()
                .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
                .collect()
        } else {
            vec![0.0; self.data.len()]
        };
        Self::new(self.shape, out, self.role)
    }
}

/// Unary map `S` plus one or more pairwise channels `F_c`, all the same shape.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    unary: FeatureVolume,
    pairwise: Vec<FeatureVolume>,
}

impl FeatureSet {
    pub fn new(unary: FeatureVolume, pairwise: Vec<FeatureVolume>) -> Result<Self> {
        if pairwise.is_empty() {
            return Err(Error::Parameter(
                "feature set needs at least one pairwise channel".into(),
            ));
        }
        let unary = unary.with_role(Role::Unary)?;
        let pairwise = pairwise
            .into_iter()
            .map(|f| {
                unary.ensure_same_shape(&f)?;
                f.with_role(Role::Pairwise)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { unary, pairwise })
    }

    #[inline]
    pub fn shape(&self) -> VolumeShape {
        self.unary.shape()
    }

    #[inline]
    pub fn unary(&self) -> &FeatureVolume {
        &self.unary
    }

    #[inline]
    pub fn pairwise(&self) -> &[FeatureVolume] {
        &self.pairwise
    }

    /// Whether every pairwise channel already lies in `[0, 1]`.
    pub fn pairwise_in_unit_range(&self) -> bool {
        self.pairwise
            .iter()
            .all(|f| f.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)))
    }

    /// Min-max rescales every pairwise channel that leaves `[0, 1]`.
    pub fn with_unit_pairwise(self) -> Result<Self> {
        let pairwise = self
            .pairwise
            .into_iter()
            .map(|f| {
                if f.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)) {
                    Ok(f)
                } else {
                    f.rescaled_unit()
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            unary: self.unary,
            pairwise,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_frame_major_row_major() {
        let s = VolumeShape::new(2, 3, 4).unwrap();
        assert_eq!(s.index(0, 0, 1), 1);
        assert_eq!(s.index(0, 1, 0), 4);
        assert_eq!(s.index(1, 0, 0), 12);
        assert_eq!(s.index(1, 2, 3), 23);
        for i in 0..s.len() {
            let (t, y, x) = s.coords(i);
            assert_eq!(s.index(t, y, x), i);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(VolumeShape::new(0, 3, 3), Err(Error::Shape(_))));
        assert!(matches!(VolumeShape::new(1, 3, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn nan_and_sign_validation() {
        let s = VolumeShape::new(1, 1, 2).unwrap();
        assert!(matches!(
            FeatureVolume::new(s, vec![0.0, f32::NAN], Role::Generic),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            FeatureVolume::new(s, vec![0.0, -1.0], Role::Unary),
            Err(Error::Validation(_))
        ));
        assert!(FeatureVolume::new(s, vec![0.0, -1.0], Role::Pairwise).is_ok());
        assert!(matches!(
            FeatureVolume::new(s, vec![0.0], Role::Generic),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn feature_set_requires_channels_and_matching_shapes() {
        let a = VolumeShape::new(1, 2, 2).unwrap();
        let b = VolumeShape::new(1, 2, 3).unwrap();
        let s = FeatureVolume::filled(a, 1.0, Role::Unary).unwrap();
        assert!(matches!(
            FeatureSet::new(s.clone(), vec![]),
            Err(Error::Parameter(_))
        ));
        let f = FeatureVolume::zeros(b);
        assert!(matches!(
            FeatureSet::new(s, vec![f]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rescale_into_unit_range() {
        let s = VolumeShape::new(1, 1, 3).unwrap();
        let v = FeatureVolume::new(s, vec![-2.0, 0.0, 2.0], Role::Pairwise).unwrap();
        assert_eq!(v.rescaled_unit().unwrap().as_slice(), &[0.0, 0.5, 1.0]);
    }
}

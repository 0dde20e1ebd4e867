//! Separable 3D Gaussian filtering over space-time volumes.
//!
//! The kernel is the outer product of three 1D tap vectors (time, vertical,
//! horizontal). A `3x7x7` support therefore costs 17 multiply-adds per voxel
//! when applied as three 1D passes instead of the 147 a full 3D stencil
//! needs. [`convolve_direct`] evaluates the full triple sum and exists as a
//! correctness reference and benchmark baseline.
//!
//! Voxels outside the volume are treated as zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{FeatureVolume, Role, VolumeShape};

/// How the raw Gaussian taps are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelNormalization {
    /// Full 3D kernel sums to one.
    #[default]
    UnitSum,
    /// Centre tap is one (unnormalized Gaussian).
    Peak,
}

/// Per-axis Gaussian widths and support radii, ordered `(t, y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigmas: [f64; 3],
    pub radii: [usize; 3],
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            sigmas: [0.5, 1.5, 1.5],
            radii: [1, 3, 3],
        }
    }
}

impl KernelParams {
    pub fn build(&self) -> Result<SeparableKernel3D> {
        make_gaussian_kernel(self.sigmas, self.radii)
    }

    /// Number of 3D offsets in the support, the neighbourhood size `k`.
    pub fn support_len(&self) -> usize {
        self.radii.iter().map(|r| 2 * r + 1).product()
    }
}

/// A 3D Gaussian stored as three 1D tap vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableKernel3D {
    taps: [Vec<f64>; 3],
    taps32: [Vec<f32>; 3],
    sigmas: [f64; 3],
    radii: [usize; 3],
    normalization: KernelNormalization,
}

/// Builds a unit-sum Gaussian with `tap[i] ∝ exp(-(i - r)^2 / (2 sigma^2))`.
pub fn make_gaussian_kernel(sigmas: [f64; 3], radii: [usize; 3]) -> Result<SeparableKernel3D> {
    SeparableKernel3D::with_normalization(sigmas, radii, KernelNormalization::UnitSum)
}

impl SeparableKernel3D {
    pub fn with_normalization(
        sigmas: [f64; 3],
        radii: [usize; 3],
        normalization: KernelNormalization,
    ) -> Result<Self> {
        if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Parameter(format!(
                "kernel sigmas must be positive and finite, got {s}"
            )));
        }
        let mut taps: [Vec<f64>; 3] = std::array::from_fn(|a| {
            let (sigma, r) = (sigmas[a], radii[a] as f64);
            (0..=2 * radii[a])
                .map(|i| {
                    let d = i as f64 - r;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        });
        if normalization == KernelNormalization::UnitSum {
            // normalizing each axis separately makes the product sum to one,
            // the whole factor is folded into the time taps
            let total: f64 = taps.iter().map(|t| t.iter().sum::<f64>()).product();
            taps[0].iter_mut().for_each(|w| *w /= total);
        }
        let taps32 = std::array::from_fn(|a| taps[a].iter().map(|&w| w as f32).collect());
        Ok(Self {
            taps,
            taps32,
            sigmas,
            radii,
            normalization,
        })
    }

    /// The `β`-style parameterization: `sigma_a = 1 / sqrt(2 beta_a)`.
    pub fn from_betas(betas: [f64; 3], radii: [usize; 3]) -> Result<Self> {
        if let Some(b) = betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Parameter(format!("beta must be positive, got {b}")));
        }
        make_gaussian_kernel(betas.map(|b| 1.0 / (2.0 * b).sqrt()), radii)
    }

    pub fn identity() -> Self {
        make_gaussian_kernel([1.0; 3], [0; 3]).expect("valid identity kernel")
    }

    pub fn taps(&self, axis: usize) -> &[f64] {
        &self.taps[axis]
    }

    pub fn sigmas(&self) -> [f64; 3] {
        self.sigmas
    }

    pub fn radii(&self) -> [usize; 3] {
        self.radii
    }

    pub fn normalization(&self) -> KernelNormalization {
        self.normalization
    }

    /// Stored tap count, `sum(2r + 1)`.
    pub fn tap_count(&self) -> usize {
        self.taps.iter().map(Vec::len).sum()
    }

    /// Materialized 3D weight count, `prod(2r + 1)`.
    pub fn support_len(&self) -> usize {
        self.taps.iter().map(Vec::len).product()
    }

    /// Weight at offset `(dt, dy, dx)`; zero outside the support.
    pub fn weight(&self, dt: isize, dy: isize, dx: isize) -> f64 {
        let d = [dt, dy, dx];
        let mut w = 1.0;
        for a in 0..3 {
            let r = self.radii[a] as isize;
            if d[a].abs() > r {
                return 0.0;
            }
            w *= self.taps[a][(d[a] + r) as usize];
        }
        w
    }

    /// Dense `f32` weights in `(t, y, x)` order over the full support.
    pub fn dense_weights(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.support_len());
        for wt in &self.taps[0] {
            for wy in &self.taps[1] {
                for wx in &self.taps[2] {
                    out.push((wt * wy * wx) as f32);
                }
            }
        }
        out
    }
}

/// Horizontal pass over one row: `pad` holds the row with `r` zeros on
/// each side, `out` receives `w` values.
#[inline]
fn filter_row(pad: &[f32], out: &mut [f32], taps: &[f32]) {
    let w = out.len();
    out.fill(0.0);
    for (k, &wt) in taps.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(&pad[k..k + w]) {
            *o += wt * v;
        }
    }
}

/// Horizontal then vertical pass over each frame of `src`, into `dst`.
/// Both passes run as row-wise multiply-adds so they vectorize.
fn spatial_passes(src: &[f32], dst: &mut [f32], shape: VolumeShape, k: &SeparableKernel3D) {
    let (h, w) = (shape.height, shape.width);
    let fl = shape.frame_len();
    let tx = &k.taps32[2];
    let ty = &k.taps32[1];
    let rx = tx.len() / 2;
    let ry = ty.len() / 2;
    dst.par_chunks_mut(fl)
        .zip(src.par_chunks(fl))
        .for_each_init(
            || (vec![0.0f32; fl], vec![0.0f32; w + 2 * rx]),
            |(tmp, pad), (out, frame)| {
                for (row, trow) in frame.chunks_exact(w).zip(tmp.chunks_exact_mut(w)) {
                    pad[rx..rx + w].copy_from_slice(row);
                    filter_row(pad, trow, tx);
                }
                for y in 0..h {
                    let orow = &mut out[y * w..(y + 1) * w];
                    orow.fill(0.0);
                    let k_lo = ry.saturating_sub(y);
                    let k_hi = (h - 1 + ry - y).min(2 * ry);
                    for kk in k_lo..=k_hi {
                        let wt = ty[kk];
                        let sy = y + kk - ry;
                        for (o, &v) in orow.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                            *o += wt * v;
                        }
                    }
                }
            },
        );
}

/// Temporal pass: output frame `t` mixes input frames `t - r..=t + r`.
fn temporal_pass(src: &[f32], dst: &mut [f32], shape: VolumeShape, k: &SeparableKernel3D) {
    let fl = shape.frame_len();
    let nf = shape.frames;
    let taps = &k.taps32[0];
    let r = taps.len() / 2;
    dst.par_chunks_mut(fl).enumerate().for_each(|(t, out)| {
        out.fill(0.0);
        let k_lo = r.saturating_sub(t);
        let k_hi = (nf - 1 + r - t).min(2 * r);
        for kk in k_lo..=k_hi {
            let wgt = taps[kk];
            let s = t + kk - r;
            let frame = &src[s * fl..(s + 1) * fl];
            for (o, &v) in out.iter_mut().zip(frame) {
                *o += wgt * v;
            }
        }
    });
}

/// Separable convolution of a raw buffer; `out` and `src` have `shape.len()` values.
pub(crate) fn separable_into(
    src: &[f32],
    shape: VolumeShape,
    k: &SeparableKernel3D,
    out: &mut [f32],
    scratch: &mut Vec<f32>,
) {
    debug_assert_eq!(src.len(), shape.len());
    scratch.resize(shape.len(), 0.0);
    spatial_passes(src, scratch, shape, k);
    temporal_pass(scratch, out, shape, k);
}

/// Applies the kernel as three sequential 1D passes.
pub fn convolve_separable(v: &FeatureVolume, k: &SeparableKernel3D) -> FeatureVolume {
    let shape = v.shape();
    let mut out = vec![0.0; shape.len()];
    let mut scratch = Vec::new();
    separable_into(v.as_slice(), shape, k, &mut out, &mut scratch);
    FeatureVolume::from_parts_unchecked(shape, out, Role::Generic)
}

/// Applies the kernel as a full 3D triple sum over the support.
pub fn convolve_direct(v: &FeatureVolume, k: &SeparableKernel3D) -> FeatureVolume {
    let shape = v.shape();
    let (nf, h, w) = (shape.frames, shape.height, shape.width);
    let [rt, ry, rx] = k.radii;
    let (kh, kw) = (2 * ry + 1, 2 * rx + 1);
    let weights = k.dense_weights();
    let src = v.as_slice();
    let fl = shape.frame_len();
    let mut out = vec![0.0f32; shape.len()];
    out.par_chunks_mut(fl)
        .enumerate()
        .for_each(|(t, frame_out)| {
            let (t_lo, t_hi) = (rt.saturating_sub(t), (nf - 1 + rt - t).min(2 * rt));
            for y in 0..h {
                let (y_lo, y_hi) = (ry.saturating_sub(y), (h - 1 + ry - y).min(2 * ry));
                for x in 0..w {
                    let (x_lo, x_hi) = (rx.saturating_sub(x), (w - 1 + rx - x).min(2 * rx));
                    let mut acc = 0.0f32;
                    for kt in t_lo..=t_hi {
                        let st = t + kt - rt;
                        for ky in y_lo..=y_hi {
                            let sy = y + ky - ry;
                            let row = &src[st * fl + sy * w..];
                            let wrow = &weights[(kt * kh + ky) * kw..];
                            for kx in x_lo..=x_hi {
                                acc += wrow[kx] * row[x + kx - rx];
                            }
                        }
                    }
                    frame_out[y * w + x] = acc;
                }
            }
        });
    FeatureVolume::from_parts_unchecked(shape, out, Role::Generic)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(f: usize, h: usize, w: usize) -> VolumeShape {
        VolumeShape::new(f, h, w).unwrap()
    }

    fn pseudo_random(s: VolumeShape, seed: u32) -> FeatureVolume {
        let mut state = seed.wrapping_mul(2654435761).wrapping_add(1);
        let data = (0..s.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 17;
                state ^= state << 5;
                (state % 10_000) as f32 / 10_000.0
            })
            .collect();
        FeatureVolume::new(s, data, Role::Generic).unwrap()
    }

    fn max_abs_diff(a: &FeatureVolume, b: &FeatureVolume) -> f32 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f32::max)
    }

    #[test]
    fn default_support_is_3x7x7_with_17_taps() {
        let k = KernelParams::default().build().unwrap();
        assert_eq!(k.support_len(), 147);
        assert_eq!(k.tap_count(), 17);
    }

    #[test]
    fn radius_zero_is_identity() {
        let k = make_gaussian_kernel([0.7, 2.0, 3.0], [0, 0, 0]).unwrap();
        assert_eq!(k.tap_count(), 3);
        assert!((k.weight(0, 0, 0) - 1.0).abs() < 1e-15);
        let v = pseudo_random(shape(3, 4, 5), 1);
        assert_eq!(convolve_separable(&v, &k), v);
        assert_eq!(convolve_direct(&v, &k), v);
    }

    #[test]
    fn wide_sigma_flattens_taps() {
        let k = make_gaussian_kernel([1e6; 3], [1, 1, 1]).unwrap();
        for a in 1..3 {
            for &w in k.taps(a) {
                assert!((w - 1.0).abs() < 1e-9);
            }
        }
        // per-axis normalized view
        let w = k.weight(1, -1, 0);
        assert!((w - 1.0 / 27.0).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        assert!(matches!(
            make_gaussian_kernel([0.0, 1.0, 1.0], [1, 1, 1]),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            make_gaussian_kernel([1.0, -1.0, 1.0], [1, 1, 1]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn taps_symmetric_positive_unit_sum() {
        let k = make_gaussian_kernel([0.8, 1.3, 2.1], [2, 3, 4]).unwrap();
        for a in 0..3 {
            let t = k.taps(a);
            assert!(t.iter().all(|&w| w > 0.0));
            for i in 0..t.len() {
                assert_eq!(t[i], t[t.len() - 1 - i]);
            }
        }
        let total: f64 = k.dense_weights().iter().map(|&w| f64::from(w)).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn beta_parameterization() {
        let k = SeparableKernel3D::from_betas([2.0, 0.5, 0.5], [1, 1, 1]).unwrap();
        assert!((k.sigmas()[0] - 0.5).abs() < 1e-12);
        assert!((k.sigmas()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impulse_response_is_kernel() {
        let s = shape(5, 9, 9);
        let k = KernelParams::default().build().unwrap();
        let mut data = vec![0.0; s.len()];
        data[s.index(2, 4, 4)] = 1.0;
        let v = FeatureVolume::new(s, data, Role::Generic).unwrap();
        for out in [convolve_separable(&v, &k), convolve_direct(&v, &k)] {
            for t in 0..5 {
                for y in 0..9 {
                    for x in 0..9 {
                        let expect = k.weight(t as isize - 2, y as isize - 4, x as isize - 4);
                        assert!((f64::from(out.get(t, y, x)) - expect).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn ones_interior_stays_one() {
        let s = shape(4, 10, 11);
        let k = KernelParams::default().build().unwrap();
        let v = FeatureVolume::filled(s, 1.0, Role::Generic).unwrap();
        let out = convolve_separable(&v, &k);
        for t in 1..3 {
            for y in 3..7 {
                for x in 3..8 {
                    assert!((out.get(t, y, x) - 1.0).abs() <= 1e-6);
                }
            }
        }
        // zero padding loses mass at the faces
        assert!(out.get(0, 0, 0) < 0.5);
    }

    #[test]
    fn separable_matches_direct() {
        let k = KernelParams::default().build().unwrap();
        for (i, s) in [
            shape(4, 8, 8),
            shape(1, 1, 1),
            shape(2, 3, 2),
            shape(6, 5, 13),
        ]
        .into_iter()
        .enumerate()
        {
            let v = pseudo_random(s, i as u32 + 3);
            let d = max_abs_diff(&convolve_separable(&v, &k), &convolve_direct(&v, &k));
            assert!(d <= 1e-5, "{s}: {d}");
        }
    }

    #[test]
    fn peak_normalization_has_unit_centre() {
        let k = SeparableKernel3D::with_normalization(
            [0.5, 1.5, 1.5],
            [1, 3, 3],
            KernelNormalization::Peak,
        )
        .unwrap();
        assert_eq!(k.weight(0, 0, 0), 1.0);
    }
}

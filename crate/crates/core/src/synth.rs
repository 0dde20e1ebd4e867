//! Seeded toy videos with known ground truth: a box or ball moving on a
//! straight line, a noisy unary map derived from its mask, and a lightly
//! blurred rendering of the object as the pairwise channel.
//!
//! Randomness comes from `Xoshiro256PlusPlus` seeded with `seed`. Flip
//! decisions compare raw `u64` draws against an integer threshold, and
//! Gaussian noise is drawn in `f64` and rounded to `f32`, so output is
//! identical across platforms.

use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::conv::{convolve_separable, make_gaussian_kernel};
use crate::error::{Error, Result};
use crate::metrics::BinaryMask;
use crate::volume::{FeatureSet, FeatureVolume, Role, VolumeShape};

/// The moving foreground object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectSpec {
    /// Axis-aligned `size = [h, w]` box whose top-left corner is at
    /// `top_left + t * velocity` in frame `t`.
    Box {
        size: [usize; 2],
        top_left: [isize; 2],
        velocity: [isize; 2],
    },
    /// Disc of `radius` centred at `center + t * velocity`; pixel `(y, x)`
    /// is inside when `(y - cy)^2 + (x - cx)^2 <= radius^2`.
    Ball {
        radius: f64,
        center: [f64; 2],
        velocity: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Each voxel of the mask is inverted with probability `noise_level`.
    Flip,
    /// Additive `N(0, noise_level^2)` noise, clamped to `[0, 1]`.
    Gaussian,
}

fn default_blur() -> f64 {
    1.0
}

fn default_scale() -> f32 {
    1.0
}

/// Everything needed to regenerate an instance; archived as JSON next to
/// generated volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub shape: VolumeShape,
    pub object: ObjectSpec,
    pub noise_kind: NoiseKind,
    pub noise_level: f64,
    pub seed: u64,
    /// Value background voxels of the unary map take before noise; the
    /// unary becomes `floor + (1 - floor) * noisy_mask`.
    #[serde(default)]
    pub unary_floor: f32,
    /// Spatial sigma of the blur applied to the rendered object to form
    /// the pairwise channel; zero disables it.
    #[serde(default = "default_blur")]
    pub feature_blur: f64,
    /// Multiplier on the pairwise channel.
    #[serde(default = "default_scale")]
    pub feature_scale: f32,
}

impl SynthSpec {
    /// A noisy box filling roughly the centre third of each frame, drifting
    /// one pixel right per frame when there is room.
    pub fn moving_box(
        shape: VolumeShape,
        noise_kind: NoiseKind,
        noise_level: f64,
        seed: u64,
    ) -> Self {
        let h = (shape.height / 2).max(1);
        let w = (shape.width / 2).max(1);
        let room = shape.width - w;
        let vx = isize::from(room >= 2 * shape.frames);
        let x0 = ((room as isize) - vx * (shape.frames as isize - 1)) / 2;
        Self {
            shape,
            object: ObjectSpec::Box {
                size: [h, w],
                top_left: [((shape.height - h) / 2) as isize, x0.max(0)],
                velocity: [0, vx],
            },
            noise_kind,
            noise_level,
            seed,
            unary_floor: 0.0,
            feature_blur: 1.0,
            feature_scale: 1.0,
        }
    }

    /// A noisy disc of radius `0.3 * min(height, width)` drifting one pixel
    /// right per frame when there is room, centred over the sequence.
    pub fn moving_ball(
        shape: VolumeShape,
        noise_kind: NoiseKind,
        noise_level: f64,
        seed: u64,
    ) -> Self {
        let (h, w) = (shape.height as f64, shape.width as f64);
        let radius = 0.3 * h.min(w);
        let travel = (shape.frames - 1) as f64;
        let vx = if w - 1.0 - 2.0 * radius >= travel + 2.0 {
            1.0
        } else {
            0.0
        };
        Self {
            shape,
            object: ObjectSpec::Ball {
                radius,
                center: [(h - 1.0) / 2.0, (w - 1.0) / 2.0 - vx * travel / 2.0],
                velocity: [0.0, vx],
            },
            noise_kind,
            noise_level,
            seed,
            unary_floor: 0.0,
            feature_blur: 1.0,
            feature_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape
            .validate()
            .map_err(|e| Error::Spec(format!("shape: {e}")))?;
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::Spec(format!(
                "noise_level must lie in [0, 1], got {}",
                self.noise_level
            )));
        }
        if !(0.0..1.0).contains(&self.unary_floor) {
            return Err(Error::Spec(format!(
                "unary_floor must lie in [0, 1), got {}",
                self.unary_floor
            )));
        }
        if !(self.feature_blur.is_finite() && self.feature_blur >= 0.0) {
            return Err(Error::Spec(format!(
                "feature_blur must be >= 0, got {}",
                self.feature_blur
            )));
        }
        if !(self.feature_scale.is_finite() && self.feature_scale >= 0.0) {
            return Err(Error::Spec(format!(
                "feature_scale must be >= 0, got {}",
                self.feature_scale
            )));
        }
        let (h, w) = (self.shape.height as f64, self.shape.width as f64);
        for t in 0..self.shape.frames {
            let fits = match &self.object {
                ObjectSpec::Box {
                    size,
                    top_left,
                    velocity,
                } => {
                    if size[0] == 0 || size[1] == 0 {
                        return Err(Error::Spec("box size must be >= 1".into()));
                    }
                    let y0 = top_left[0] + velocity[0] * t as isize;
                    let x0 = top_left[1] + velocity[1] * t as isize;
                    y0 >= 0
                        && x0 >= 0
                        && y0 + size[0] as isize <= h as isize
                        && x0 + size[1] as isize <= w as isize
                }
                ObjectSpec::Ball {
                    radius,
                    center,
                    velocity,
                } => {
                    if !(radius.is_finite() && *radius > 0.0) {
                        return Err(Error::Spec("ball radius must be positive".into()));
                    }
                    let cy = center[0] + velocity[0] * t as f64;
                    let cx = center[1] + velocity[1] * t as f64;
                    cy - radius >= 0.0
                        && cx - radius >= 0.0
                        && cy + radius <= h - 1.0
                        && cx + radius <= w - 1.0
                }
            };
            if !fits {
                return Err(Error::Spec(format!(
                    "object must fit inside the frame at every time step; it leaves the \
                     {}x{} frame at t = {t}",
                    self.shape.height, self.shape.width
                )));
            }
        }
        Ok(())
    }

    fn inside(&self, t: usize, y: usize, x: usize) -> bool {
        match &self.object {
            ObjectSpec::Box {
                size,
                top_left,
                velocity,
            } => {
                let y0 = top_left[0] + velocity[0] * t as isize;
                let x0 = top_left[1] + velocity[1] * t as isize;
                let (y, x) = (y as isize, x as isize);
                y >= y0 && y < y0 + size[0] as isize && x >= x0 && x < x0 + size[1] as isize
            }
            ObjectSpec::Ball {
                radius,
                center,
                velocity,
            } => {
                let cy = center[0] + velocity[0] * t as f64;
                let cx = center[1] + velocity[1] * t as f64;
                (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2) <= radius * radius
            }
        }
    }

    /// Clean indicator of the object.
    pub fn ground_truth(&self) -> Result<BinaryMask> {
        self.validate()?;
        let s = self.shape;
        let mut bits = Vec::with_capacity(s.len());
        for t in 0..s.frames {
            for y in 0..s.height {
                for x in 0..s.width {
                    bits.push(self.inside(t, y, x));
                }
            }
        }
        BinaryMask::new(s, bits)
    }
}

/// Generated features plus the mask they were derived from.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub features: FeatureSet,
    pub ground_truth: BinaryMask,
}

fn noisy_unary(spec: &SynthSpec, gt: &BinaryMask) -> Vec<f32> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let floor = spec.unary_floor;
    let lift = |v: f32| floor + (1.0 - floor) * v;
    match spec.noise_kind {
        NoiseKind::Flip => {
            // flip iff draw < level * 2^64
            let threshold = (spec.noise_level * 2f64.powi(64)) as u128;
            gt.bits()
                .iter()
                .map(|&b| {
                    let flip = u128::from(rng.next_u64()) < threshold;
                    lift(if b ^ flip { 1.0 } else { 0.0 })
                })
                .collect()
        }
        NoiseKind::Gaussian => gt
            .bits()
            .iter()
            .map(|&b| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = (if b { 1.0 } else { 0.0 }) + spec.noise_level * z;
                lift(v.clamp(0.0, 1.0) as f32)
            })
            .collect(),
    }
}

fn pairwise_rendering(spec: &SynthSpec, gt: &BinaryMask) -> Result<FeatureVolume> {
    let rendered = gt.to_volume();
    let blurred = if spec.feature_blur > 0.0 {
        let r = (2.0 * spec.feature_blur).ceil() as usize;
        let k = make_gaussian_kernel([1.0, spec.feature_blur, spec.feature_blur], [0, r, r])?;
        convolve_separable(&rendered, &k)
    } else {
        rendered
    };
    let scale = spec.feature_scale;
    blurred.map(|v| (v.clamp(0.0, 1.0) * scale).max(0.0))
}

/// Builds the instance described by `spec`. Same spec, same bits.
pub fn generate(spec: &SynthSpec) -> Result<SynthInstance> {
    let ground_truth = spec.ground_truth()?;
    let unary = FeatureVolume::new(spec.shape, noisy_unary(spec, &ground_truth), Role::Unary)?;
    let pairwise = pairwise_rendering(spec, &ground_truth)?;
    Ok(SynthInstance {
        features: FeatureSet::new(unary, vec![pairwise])?,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(f: usize, h: usize, w: usize) -> VolumeShape {
        VolumeShape::new(f, h, w).unwrap()
    }

    #[test]
    fn noise_free_unary_equals_ground_truth() {
        for kind in [NoiseKind::Flip, NoiseKind::Gaussian] {
            let spec = SynthSpec::moving_box(shape(4, 12, 12), kind, 0.0, 3);
            let inst = generate(&spec).unwrap();
            assert_eq!(
                inst.features.unary().as_slice(),
                inst.ground_truth.to_volume().as_slice()
            );
        }
    }

    #[test]
    fn same_seed_same_output() {
        let spec = SynthSpec::moving_box(shape(3, 10, 10), NoiseKind::Gaussian, 0.3, 99);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.features.unary(), b.features.unary());
        assert_eq!(a.features.pairwise(), b.features.pairwise());
        let other = generate(&SynthSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.features.unary(), other.features.unary());
    }

    #[test]
    fn flip_count_within_three_sigma() {
        let spec = SynthSpec::moving_box(shape(6, 16, 16), NoiseKind::Flip, 0.3, 7);
        let inst = generate(&spec).unwrap();
        let n = 1536.0;
        let flips = inst
            .features
            .unary()
            .as_slice()
            .iter()
            .zip(inst.ground_truth.bits())
            .filter(|(&s, &g)| (s > 0.5) != g)
            .count() as f64;
        let sigma = (n * 0.3 * 0.7f64).sqrt();
        assert!((flips - 0.3 * n).abs() <= 3.0 * sigma, "{flips}");
    }

    #[test]
    fn box_area_is_exact_per_frame() {
        let spec = SynthSpec {
            object: ObjectSpec::Box {
                size: [3, 5],
                top_left: [1, 0],
                velocity: [1, 2],
            },
            ..SynthSpec::moving_box(shape(4, 10, 12), NoiseKind::Flip, 0.0, 0)
        };
        let gt = spec.ground_truth().unwrap();
        for t in 0..4 {
            let fl = 120;
            let c = gt.bits()[t * fl..(t + 1) * fl]
                .iter()
                .filter(|&&b| b)
                .count();
            assert_eq!(c, 15);
        }
    }

    #[test]
    fn ball_area_tracks_pi_r_squared() {
        let r = 6.0;
        let spec = SynthSpec {
            object: ObjectSpec::Ball {
                radius: r,
                center: [10.0, 8.0],
                velocity: [0.0, 0.5],
            },
            ..SynthSpec::moving_box(shape(5, 21, 24), NoiseKind::Flip, 0.0, 0)
        };
        let gt = spec.ground_truth().unwrap();
        let fl = 21 * 24;
        for t in 0..5 {
            let c = gt.bits()[t * fl..(t + 1) * fl]
                .iter()
                .filter(|&&b| b)
                .count() as f64;
            let area = std::f64::consts::PI * r * r;
            // lattice-point error is bounded by the perimeter
            assert!(
                (c - area).abs() <= 2.0 * std::f64::consts::PI * r,
                "{c} vs {area}"
            );
        }
    }

    #[test]
    fn escaping_object_is_spec_error() {
        let spec = SynthSpec {
            object: ObjectSpec::Box {
                size: [4, 4],
                top_left: [0, 5],
                velocity: [0, 1],
            },
            ..SynthSpec::moving_box(shape(4, 8, 8), NoiseKind::Flip, 0.1, 0)
        };
        let err = generate(&spec).unwrap_err();
        assert!(
            matches!(err, Error::Spec(ref m) if m.contains("fit inside the frame")),
            "{err}"
        );
    }

    #[test]
    fn pairwise_is_smoothed_object() {
        let spec = SynthSpec::moving_box(shape(2, 16, 16), NoiseKind::Flip, 0.3, 1);
        let inst = generate(&spec).unwrap();
        let f = &inst.features.pairwise()[0];
        assert!(f.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(f.get(0, 8, 8) > 0.95);
        assert!(f.get(0, 0, 0) < 0.05);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = SynthSpec::moving_box(shape(2, 8, 8), NoiseKind::Gaussian, 0.2, 5);
        let json = serde_json::to_string(&spec).unwrap();
        let back: SynthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}

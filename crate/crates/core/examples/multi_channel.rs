//! Two pairwise channels, and a temporal hook that shifts neighbouring
//! frames to undo a known horizontal motion before each update.
//!
//!     cargo run --release --example multi_channel

use sfseg::engine::{run, RunInputs, SfsegConfig, TemporalTransform};
use sfseg::metrics::jaccard;
use sfseg::synth::{generate, NoiseKind, ObjectSpec, SynthSpec};
use sfseg::{FeatureSet, VolumeShape};

/// Moves frame `t` of each window by `(center - t) * vx` pixels along x so
/// the object lines up with the centre frame. Uncovered columns become 0.
struct ShiftCompensation {
    width: usize,
    vx: isize,
}

impl ShiftCompensation {
    fn shift(&self, buf: &mut [f32], lo: usize, hi: usize, center: usize) {
        let w = self.width;
        let frame_len = buf.len() / (hi - lo);
        for (k, frame) in buf.chunks_exact_mut(frame_len).enumerate() {
            let d = (center as isize - (lo + k) as isize) * self.vx;
            if d == 0 {
                continue;
            }
            for row in frame.chunks_exact_mut(w) {
                let src = row.to_vec();
                for (x, v) in row.iter_mut().enumerate() {
                    let sx = x as isize - d;
                    *v = if (0..w as isize).contains(&sx) {
                        src[sx as usize]
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}

impl TemporalTransform for ShiftCompensation {
    fn warp(
        &self,
        center: usize,
        lo: usize,
        hi: usize,
        unary_pow: &mut [f32],
        solution: &mut [f32],
        pairwise: &mut [Vec<f32>],
    ) {
        self.shift(unary_pow, lo, hi, center);
        self.shift(solution, lo, hi, center);
        for f in pairwise {
            self.shift(f, lo, hi, center);
        }
    }
}

fn main() -> sfseg::Result<()> {
    let shape = VolumeShape::new(8, 48, 64)?;
    let mut spec = SynthSpec::moving_box(shape, NoiseKind::Flip, 0.3, 21);
    spec.unary_floor = 0.05;
    spec.feature_scale = 0.7;
    // fast mover: 3 px per frame
    spec.object = ObjectSpec::Box {
        size: [20, 20],
        top_left: [14, 8],
        velocity: [0, 3],
    };
    let inst = generate(&spec)?;

    // second channel: the same rendering, sharper and dimmer
    let sharp = generate(&SynthSpec {
        feature_blur: 0.0,
        feature_scale: 0.5,
        ..spec.clone()
    })?;
    let two = FeatureSet::new(
        inst.features.unary().clone(),
        vec![
            inst.features.pairwise()[0].clone(),
            sharp.features.pairwise()[0].clone(),
        ],
    )?;

    let cfg = SfsegConfig {
        threshold_frac: 0.35,
        ..SfsegConfig::default()
    };
    let hook = ShiftCompensation {
        width: shape.width,
        vx: 3,
    };
    for (label, features, transform) in [
        ("one channel", &inst.features, None),
        ("two channels", &two, None),
        (
            "two channels + shift",
            &two,
            Some(&hook as &dyn TemporalTransform),
        ),
    ] {
        let out = run(
            features,
            &cfg,
            RunInputs {
                transform,
                ..RunInputs::default()
            },
        )?;
        println!(
            "{label:>22}: IoU {:.4}",
            jaccard(&out.mask, &inst.ground_truth)?
        );
    }
    Ok(())
}

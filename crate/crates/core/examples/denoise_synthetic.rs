//! Cleans a noisy moving disc and reports IoU before and after.
//!
//!     cargo run --release --example denoise_synthetic [-- OUT_DIR]
//!
//! With `OUT_DIR`, the noisy input and the result are also written as
//! 16-bit PGM frames.

use sfseg::engine::{run, RunInputs, SfsegConfig};
use sfseg::metrics::{jaccard, BinaryMask};
use sfseg::synth::{generate, NoiseKind, SynthSpec};
use sfseg::volume::export_pgm_sequence;
use sfseg::VolumeShape;

fn main() -> sfseg::Result<()> {
    let shape = VolumeShape::new(6, 64, 64)?;
    let mut spec = SynthSpec::moving_ball(shape, NoiseKind::Flip, 0.3, 7);
    spec.unary_floor = 0.05;
    spec.feature_scale = 0.7;
    let inst = generate(&spec)?;

    let cfg = SfsegConfig {
        threshold_frac: 0.35,
        ..SfsegConfig::default()
    };
    let out = run(
        &inst.features,
        &cfg,
        RunInputs {
            ground_truth: Some(&inst.ground_truth),
            ..RunInputs::default()
        },
    )?;

    let noisy = BinaryMask::from_threshold(inst.features.unary(), 0.5);
    println!("input IoU  {:.4}", jaccard(&noisy, &inst.ground_truth)?);
    for r in &out.trace.records {
        println!("iter {}    {:.4}", r.iter, r.iou_to_ground_truth.unwrap());
    }

    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        export_pgm_sequence(inst.features.unary(), dir.join("input"))?;
        export_pgm_sequence(&out.mask.to_volume(), dir.join("mask"))?;
        println!("frames written under {}", dir.display());
    }
    Ok(())
}

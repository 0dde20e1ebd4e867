//! Round trips through the SFSV container and 16-bit PGM frame folders.
//!
//!     cargo run --release --example volume_io [-- DIR]

use sfseg::volume::{
    export_pgm_sequence, import_pgm_sequence, load_volume, load_volumes, save_volume, save_volumes,
};
use sfseg::{FeatureVolume, Role, VolumeShape};

fn main() -> sfseg::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("sfseg_volume_io"));
    let shape = VolumeShape::new(3, 24, 32)?;
    let ramp = FeatureVolume::from_fn(shape, Role::Generic, |t, y, x| {
        ((t + y + x) as f32 / (shape.frames + shape.height + shape.width) as f32).min(1.0)
    })?;

    let single = dir.join("ramp.sfsv");
    std::fs::create_dir_all(&dir).map_err(|e| sfseg::Error::io(&dir, e))?;
    save_volume(&ramp, &single)?;
    assert_eq!(load_volume(&single)?, ramp);
    println!(
        "{}: {} bytes",
        single.display(),
        std::fs::metadata(&single).map_or(0, |m| m.len())
    );

    let inverted = ramp.map(|v| 1.0 - v)?;
    let multi = dir.join("channels.sfsv");
    save_volumes(&[ramp.clone(), inverted], &multi)?;
    println!(
        "{}: {} channels",
        multi.display(),
        load_volumes(&multi)?.len()
    );

    let frames = dir.join("frames");
    export_pgm_sequence(&ramp, &frames)?;
    let back = import_pgm_sequence(&frames)?;
    let worst = ramp
        .as_slice()
        .iter()
        .zip(back.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!(
        "{}: {} frames, max quantization error {worst:.2e}",
        frames.display(),
        back.shape().frames
    );
    Ok(())
}

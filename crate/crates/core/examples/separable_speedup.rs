//! Separable (17 taps) versus direct (147 taps) filtering with the default
//! 3x7x7 kernel.
//!
//!     cargo run --release --example separable_speedup

use sfseg::bench::compare_convolutions;
use sfseg::conv::KernelParams;
use sfseg::VolumeShape;

fn main() -> sfseg::Result<()> {
    let kernel = KernelParams::default();
    println!("shape          separable_ms  direct_ms  speedup  max_abs_diff");
    for (f, h, w) in [(8, 32, 32), (16, 64, 64), (64, 128, 128)] {
        let shape = VolumeShape::new(f, h, w)?;
        let c = compare_convolutions(shape, &kernel, 3)?;
        println!(
            "{:<13}  {:>12.3}  {:>9.3}  {:>6.1}x  {:.2e}",
            shape.to_string(),
            c.separable_s * 1e3,
            c.direct_s * 1e3,
            c.speedup(),
            c.max_abs_diff
        );
    }
    Ok(())
}

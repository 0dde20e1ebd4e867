//! Per-iteration cost of matrix power iteration and of the engine, then the
//! engine's growth over a 16x range of node counts.
//!
//!     cargo run --release --example scaling_benchmark

use sfseg::bench::{
    default_sizes, run_scaling_benchmark, scaling_exponent, BenchMode, BenchSettings,
};
use sfseg::engine::SfsegConfig;
use sfseg::VolumeShape;

fn main() -> sfseg::Result<()> {
    let cfg = SfsegConfig::default();
    let settings = BenchSettings {
        iters: 50,
        ..BenchSettings::default()
    };
    let report = run_scaling_benchmark(&default_sizes(), &settings, &cfg)?;
    for n in &report.notices {
        eprintln!("{n}");
    }
    print!("{}", report.to_csv());

    let sweep: Vec<VolumeShape> = [20, 40, 80]
        .into_iter()
        .map(|s| VolumeShape::new(10, s, s))
        .collect::<sfseg::Result<_>>()?;
    let conv_only = BenchSettings {
        oracle_modes: false,
        ..settings
    };
    let sweep_report = run_scaling_benchmark(&sweep, &conv_only, &cfg)?;
    let exponent = scaling_exponent(sweep_report.records_for(BenchMode::Convolution));
    println!(
        "# engine scaling exponent over 4000..64000 nodes: {:.3}",
        exponent.unwrap_or(f64::NAN)
    );
    Ok(())
}

//! How far the first-order affinity drifts from the Gaussian one as the
//! feature contrast grows: largest entry gap and eigenvector angle.
//!
//!     cargo run --release --example taylor_fidelity

use sfseg::engine::SfsegConfig;
use sfseg::metrics::angle_degrees;
use sfseg::oracle::{build_affinity_exact, build_affinity_taylor, reference_eigenvector};
use sfseg::synth::{generate, NoiseKind, SynthSpec};
use sfseg::VolumeShape;

fn main() -> sfseg::Result<()> {
    let shape = VolumeShape::new(4, 16, 16)?;
    let cfg = SfsegConfig::default();
    println!("scale  max a*df^2  max |exact-taylor|  negative  angle_deg");
    for scale in [0.1f32, 0.2, 0.3, 0.44, 0.6, 0.8, 1.0] {
        let mut spec = SynthSpec::moving_box(shape, NoiseKind::Gaussian, 0.2, 5);
        spec.unary_floor = 0.1;
        spec.feature_scale = scale;
        let inst = generate(&spec)?;
        let exact = build_affinity_exact(&inst.features, &cfg)?;
        let taylor = build_affinity_taylor(&inst.features, &cfg)?;
        let f = inst.features.pairwise()[0].as_slice();
        let mut max_u = 0.0f64;
        let mut max_gap = 0.0f64;
        for (i, j, e) in exact.entries() {
            let df = f64::from(f[i] - f[j]);
            max_u = max_u.max(cfg.alpha * df * df);
            max_gap = max_gap.max((e - taylor.get(i, j)).abs());
        }
        let start = inst.features.unary().to_f64();
        let ve = reference_eigenvector(&exact, &start)?;
        let vt = reference_eigenvector(&taylor, &start)?;
        println!(
            "{scale:>5}  {max_u:>10.3}  {max_gap:>18.3e}  {:>8}  {:>9.4}",
            taylor.negative_entries(),
            angle_degrees(&ve.eigvec, &vt.eigvec)?
        );
    }
    Ok(())
}

//! Tracks how fast the engine approaches the dominant eigenvector of the
//! explicit affinity matrix, starting from a flat initialization.
//! Prints the `iter,angle_deg,iou` table as CSV.
//!
//!     cargo run --release --example eigenvector_convergence > trace.csv

use sfseg::engine::{run, RunInputs, SfsegConfig};
use sfseg::metrics::volume_angle_degrees;
use sfseg::oracle::{build_affinity_taylor, reference_eigenvector};
use sfseg::synth::{generate, NoiseKind, SynthSpec};
use sfseg::{FeatureVolume, Role, VolumeShape};

fn main() -> sfseg::Result<()> {
    let shape = VolumeShape::new(6, 20, 20)?;
    let inst = generate(&SynthSpec::moving_box(shape, NoiseKind::Gaussian, 0.2, 11))?;
    let cfg = SfsegConfig {
        iterations: 60,
        ..SfsegConfig::default()
    }
    .without_binarization();

    let m = build_affinity_taylor(&inst.features, &cfg)?;
    let eig = reference_eigenvector(&m, &inst.features.unary().to_f64())?;
    let reference = FeatureVolume::from_f64(shape, &eig.eigvec, Role::Generic)?;
    let x0 = FeatureVolume::filled(shape, 1.0, Role::Solution)?;
    eprintln!(
        "oracle: {} nodes, {} nonzeros, eigenvalue {:.6}, {} power iterations; start is {:.1} deg away",
        m.n(),
        m.nnz(),
        eig.eigval,
        eig.iters_used,
        volume_angle_degrees(&x0, &reference)?
    );

    let out = run(
        &inst.features,
        &cfg,
        RunInputs {
            x0: Some(&x0),
            reference: Some(&reference),
            ground_truth: Some(&inst.ground_truth),
            ..RunInputs::default()
        },
    )?;
    print!("{}", out.trace.to_csv());
    Ok(())
}

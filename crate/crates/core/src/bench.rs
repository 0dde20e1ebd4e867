//! Wall-clock comparison of explicit-matrix power iteration against the
//! convolutional engine, and of separable against direct filtering.

use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use crate::conv::{convolve_direct, convolve_separable, KernelParams};
use crate::engine::{run, threshold_final, RunInputs, SfsegConfig};
use crate::error::{Error, Result};
use crate::metrics::{format_sig, jaccard, BinaryMask};
use crate::oracle::{
    build_affinity_exact, build_affinity_taylor, power_iteration, MAX_ORACLE_NODES,
};
use crate::synth::{generate, NoiseKind, SynthInstance, SynthSpec};
use crate::volume::{FeatureVolume, VolumeShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMode {
    /// Power iteration on the Gaussian-affinity matrix.
    ExactMatrix,
    /// Power iteration on the first-order affinity matrix.
    TaylorMatrix,
    /// Convolutional engine, no matrix.
    Convolution,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::ExactMatrix => "exact",
            BenchMode::TaylorMatrix => "taylor",
            BenchMode::Convolution => "conv",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub mode: BenchMode,
    pub shape: VolumeShape,
    /// Median matrix build time; zero for the convolutional mode.
    pub build_s: f64,
    pub per_iter_s: f64,
    /// `build_s + iters * per_iter_s`.
    pub total_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Skipped modes and other remarks, one line each.
    pub notices: Vec<String>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("mode,frames,height,width,nodes,build_s,per_iter_s,total_s,threads\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.mode,
                r.shape.frames,
                r.shape.height,
                r.shape.width,
                r.shape.len(),
                format_sig(r.build_s, 9),
                format_sig(r.per_iter_s, 9),
                format_sig(r.total_s, 9),
                r.threads
            )
            .expect("string write");
        }
        out
    }

    pub fn records_for(&self, mode: BenchMode) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(move |r| r.mode == mode)
    }

    pub fn find(&self, mode: BenchMode, shape: VolumeShape) -> Option<&BenchRecord> {
        self.records
            .iter()
            .find(|r| r.mode == mode && r.shape == shape)
    }
}

/// Timing schedule for [`run_scaling_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub iters: usize,
    pub warmup: usize,
    pub repeats: usize,
    /// Matrix modes to include when within oracle capacity.
    pub oracle_modes: bool,
    /// Minimum mask IoU between the engine and each matrix mode before any
    /// timing is recorded.
    pub gate_iou: f64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            iters: 100,
            warmup: 1,
            repeats: 5,
            oracle_modes: true,
            gate_iou: 0.99,
        }
    }
}

/// The default sweep: 10 frames at 10x10 up to 20x20 (1000 to 4000 nodes).
pub fn default_sizes() -> Vec<VolumeShape> {
    [10, 14, 20]
        .into_iter()
        .map(|s| VolumeShape::new(10, s, s).expect("static shape"))
        .collect()
}

/// Instance used for timing: a drifting box under light Gaussian noise.
pub fn bench_instance(shape: VolumeShape) -> Result<SynthInstance> {
    let mut spec = SynthSpec::moving_box(shape, NoiseKind::Gaussian, 0.2, 42);
    spec.unary_floor = 0.05;
    generate(&spec)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

struct Sample {
    build_s: f64,
    iter_s: f64,
    mask: BinaryMask,
}

fn sample_mode(
    mode: BenchMode,
    inst: &SynthInstance,
    cfg: &SfsegConfig,
    iters: usize,
) -> Result<Sample> {
    let shape = inst.features.shape();
    match mode {
        BenchMode::Convolution => {
            let run_cfg = SfsegConfig {
                iterations: iters,
                ..cfg.clone()
            }
            .without_binarization();
            let (out, s) = timed(|| run(&inst.features, &run_cfg, RunInputs::default()))?;
            Ok(Sample {
                build_s: 0.0,
                iter_s: s,
                mask: out.mask,
            })
        }
        BenchMode::ExactMatrix | BenchMode::TaylorMatrix => {
            let (m, build_s) = timed(|| {
                if mode == BenchMode::ExactMatrix {
                    build_affinity_exact(&inst.features, cfg)
                } else {
                    build_affinity_taylor(&inst.features, cfg)
                }
            })?;
            let x0 = inst.features.unary().to_f64();
            let (res, iter_s) = timed(|| power_iteration(&m, &x0, iters, 0.0))?;
            let v = FeatureVolume::from_f64(shape, &res.eigvec, crate::volume::Role::Generic)?;
            Ok(Sample {
                build_s,
                iter_s,
                mask: threshold_final(&v, cfg.final_threshold),
            })
        }
    }
}

/// Times every mode on a synthetic instance of each size.
///
/// Before timing, the Taylor matrix must segment the instance like the
/// engine (mask IoU at least `settings.gate_iou`), otherwise the sweep
/// aborts. Disagreement of the exact matrix is reported as a notice.
pub fn run_scaling_benchmark(
    sizes: &[VolumeShape],
    settings: &BenchSettings,
    cfg: &SfsegConfig,
) -> Result<BenchReport> {
    if settings.iters == 0 || settings.repeats == 0 {
        return Err(Error::Parameter("iters and repeats must be >= 1".into()));
    }
    let mut report = BenchReport::default();
    if settings.repeats < 5 {
        report.notices.push(format!(
            "warning: {} repeat(s) give unstable medians; use at least 5",
            settings.repeats
        ));
    }
    let threads = rayon::current_num_threads();
    for &shape in sizes {
        let inst = bench_instance(shape)?;
        let mut modes = vec![BenchMode::Convolution];
        if settings.oracle_modes {
            if shape.len() <= MAX_ORACLE_NODES {
                modes.extend([BenchMode::ExactMatrix, BenchMode::TaylorMatrix]);
            } else {
                report.notices.push(format!(
                    "skipping matrix modes for {shape}: {} nodes exceeds the oracle limit of {MAX_ORACLE_NODES}",
                    shape.len()
                ));
            }
        }

        let reference = sample_mode(BenchMode::Convolution, &inst, cfg, settings.iters)?.mask;
        for &mode in &modes[1..] {
            let mask = sample_mode(mode, &inst, cfg, settings.iters)?.mask;
            let iou = jaccard(&reference, &mask)?;
            if iou >= settings.gate_iou {
                continue;
            }
            // The exact exponential is a different operator; only the Taylor
            // matrix has to agree with the engine.
            if mode == BenchMode::ExactMatrix {
                report.notices.push(format!(
                    "note: exact-affinity segmentation differs from the engine on {shape}: IoU {iou:.4}"
                ));
            } else {
                return Err(Error::Validation(format!(
                    "{mode} segmentation disagrees with the engine on {shape}: IoU {iou:.4}"
                )));
            }
        }

        for &mode in &modes {
            for _ in 0..settings.warmup {
                sample_mode(mode, &inst, cfg, settings.iters)?;
            }
            let mut builds = Vec::with_capacity(settings.repeats);
            let mut iters = Vec::with_capacity(settings.repeats);
            for _ in 0..settings.repeats {
                let s = sample_mode(mode, &inst, cfg, settings.iters)?;
                builds.push(s.build_s);
                iters.push(s.iter_s / settings.iters as f64);
            }
            let build_s = median(&mut builds);
            let per_iter_s = median(&mut iters);
            report.records.push(BenchRecord {
                mode,
                shape,
                build_s,
                per_iter_s,
                total_s: build_s + per_iter_s * settings.iters as f64,
                threads,
            });
        }
    }
    Ok(report)
}

/// Least-squares slope of `log(per_iter_s)` against `log(nodes)`.
pub fn scaling_exponent<'a>(records: impl IntoIterator<Item = &'a BenchRecord>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .into_iter()
        .map(|r| ((r.shape.len() as f64).ln(), r.per_iter_s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone)]
pub struct ConvComparison {
    pub shape: VolumeShape,
    pub separable_s: f64,
    pub direct_s: f64,
    pub max_abs_diff: f32,
    /// Materialized weights over stored taps, e.g. 147 / 17.
    pub tap_ratio: f64,
}

impl ConvComparison {
    pub fn speedup(&self) -> f64 {
        self.direct_s / self.separable_s
    }
}

/// Median timings of separable and direct filtering on a seeded volume.
pub fn compare_convolutions(
    shape: VolumeShape,
    kernel: &KernelParams,
    repeats: usize,
) -> Result<ConvComparison> {
    let k = kernel.build()?;
    let v = crate::oracle::random_probe(shape, 17);
    let sep = convolve_separable(&v, &k);
    let dir = convolve_direct(&v, &k);
    let max_abs_diff = sep
        .as_slice()
        .iter()
        .zip(dir.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    let mut ts = Vec::new();
    let mut td = Vec::new();
    for _ in 0..repeats.max(1) {
        ts.push(timed(|| Ok(convolve_separable(&v, &k)))?.1);
        td.push(timed(|| Ok(convolve_direct(&v, &k)))?.1);
    }
    Ok(ConvComparison {
        shape,
        separable_s: median(&mut ts),
        direct_s: median(&mut td),
        max_abs_diff,
        tap_ratio: k.support_len() as f64 / k.tap_count() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exponent_of_linear_series() {
        let mk = |n: usize, t: f64| BenchRecord {
            mode: BenchMode::Convolution,
            shape: VolumeShape::new(1, 1, n).unwrap(),
            build_s: 0.0,
            per_iter_s: t,
            total_s: t,
            threads: 1,
        };
        let recs = [mk(100, 1.0), mk(200, 2.0), mk(400, 4.0)];
        assert!((scaling_exponent(&recs).unwrap() - 1.0).abs() < 1e-12);
        assert!(scaling_exponent(&recs[..1]).is_none());
    }

    #[test]
    fn small_sweep_produces_three_modes_per_size() {
        let sizes = [
            VolumeShape::new(3, 8, 8).unwrap(),
            VolumeShape::new(3, 10, 10).unwrap(),
        ];
        let settings = BenchSettings {
            iters: 20,
            warmup: 0,
            repeats: 1,
            ..BenchSettings::default()
        };
        let report = run_scaling_benchmark(&sizes, &settings, &SfsegConfig::default()).unwrap();
        assert_eq!(report.records.len(), 6);
        assert!(report.notices.iter().any(|n| n.contains("unstable")));
        let csv = report.to_csv();
        assert!(
            csv.starts_with("mode,frames,height,width,nodes,build_s,per_iter_s,total_s,threads\n")
        );
        assert_eq!(csv.lines().count(), 7);
        for r in report.records_for(BenchMode::Convolution) {
            assert_eq!(r.build_s, 0.0);
        }
    }

    #[test]
    fn oversized_oracle_modes_are_skipped() {
        let big = VolumeShape::new(1, 1001, 1000).unwrap();
        let settings = BenchSettings {
            iters: 1,
            warmup: 0,
            repeats: 1,
            ..BenchSettings::default()
        };
        let report = run_scaling_benchmark(&[big], &settings, &SfsegConfig::default()).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].mode, BenchMode::Convolution);
        assert!(report
            .notices
            .iter()
            .any(|n| n.contains("skipping matrix modes")));
    }
}

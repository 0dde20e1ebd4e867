//! Matrix-free power iteration on the space-time pixel graph.
//!
//! The affinity between voxels `i` and `j` is
//! `s_i^p s_j^p [1 - alpha (f_i - f_j)^2] G(i - j)`, a first-order expansion
//! of a Gaussian feature kernel times a spatial Gaussian `G`. Expanding the
//! square splits one matrix-vector product into three Gaussian filterings of
//! the volume:
//!
//! ```text
//! A     = S^p . X
//! X_new = S^p . [ (1/alpha - F^2) . (G * A)  -  G * (F^2 . A)  +  2 F . (G * (F . A)) ]
//! ```
//!
//! where `.` is element-wise and `*` is the separable 3D convolution from
//! [`crate::conv`]. With several pairwise channels the per-channel results
//! are summed. Each outer iteration rescales the result to unit L2 norm and,
//! once the binarization schedule kicks in, squashes it through a sigmoid.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::{separable_into, KernelParams, SeparableKernel3D};
use crate::error::{Error, Result};
use crate::metrics::{angle_degrees, jaccard, trace_csv, BinaryMask, TraceRow};
use crate::volume::{FeatureSet, FeatureVolume, Role, VolumeShape};

/// How the sigmoid projection measures distance from the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// `sigmoid(lambda (X - theta) / max X)`: the slope acts on values
    /// relative to the max, so it binarizes at any volume size.
    #[default]
    Relative,
    /// `sigmoid(lambda (X - theta))` on the unit-norm values as they are.
    Absolute,
}

/// Knobs for [`run`]. Defaults follow the unsupervised setup: `alpha = 1`,
/// `p = 0.1`, five iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfsegConfig {
    pub alpha: f64,
    /// Exponent on the unary map.
    pub p: f64,
    pub kernel: KernelParams,
    pub iterations: usize,
    /// Frames on each side of the current frame fed to one update.
    pub temporal_window: usize,
    /// First (1-based) iteration whose result is projected through the
    /// sigmoid. Anything past `iterations` disables binarization.
    pub binarize_start: usize,
    pub sigmoid_slope0: f64,
    pub slope_growth: f64,
    pub threshold_frac: f64,
    pub final_threshold: f64,
    pub projection: Projection,
    /// Lift the `alpha <= 1`, `F in [0, 1]` guard that keeps every affinity
    /// nonnegative.
    pub allow_negative_affinity: bool,
}

impl Default for SfsegConfig {
    fn default() -> Self {
        let kernel = KernelParams::default();
        Self {
            alpha: 1.0,
            p: 0.1,
            temporal_window: kernel.radii[0],
            kernel,
            iterations: 5,
            binarize_start: 3,
            sigmoid_slope0: 10.0,
            slope_growth: 2.0,
            threshold_frac: 0.5,
            final_threshold: 0.5,
            projection: Projection::Relative,
            allow_negative_affinity: false,
        }
    }
}

impl SfsegConfig {
    /// Same config with the sigmoid projection switched off.
    pub fn without_binarization(mut self) -> Self {
        self.binarize_start = self.iterations + 1;
        self
    }

    pub fn binarization_enabled(&self) -> bool {
        self.binarize_start <= self.iterations
    }

    pub fn validate(&self) -> Result<()> {
        let param = |msg: String| Err(Error::Parameter(msg));
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return param(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.p.is_finite() && self.p >= 0.0) {
            return param(format!("p must be nonnegative, got {}", self.p));
        }
        if self.iterations == 0 {
            return param("iterations must be >= 1".into());
        }
        if self.binarize_start == 0 {
            return param("binarize_start is 1-based and must be >= 1".into());
        }
        if self.temporal_window < self.kernel.radii[0] {
            return param(format!(
                "temporal window {} is smaller than the kernel time radius {}",
                self.temporal_window, self.kernel.radii[0]
            ));
        }
        if !(self.sigmoid_slope0.is_finite() && self.sigmoid_slope0 > 0.0) {
            return param(format!(
                "sigmoid_slope0 must be positive, got {}",
                self.sigmoid_slope0
            ));
        }
        if !(self.slope_growth.is_finite() && self.slope_growth >= 1.0) {
            return param(format!(
                "slope_growth must be >= 1, got {}",
                self.slope_growth
            ));
        }
        for (name, v) in [
            ("threshold_frac", self.threshold_frac),
            ("final_threshold", self.final_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return param(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        self.kernel.build().map(|_| ())
    }

    /// The nonnegative-affinity guard: `alpha <= 1` and every pairwise
    /// channel in `[0, 1]`, so `1 - alpha (f_i - f_j)^2 >= 0`.
    pub fn check_guard(&self, features: &FeatureSet) -> Result<()> {
        if self.allow_negative_affinity {
            return Ok(());
        }
        if self.alpha > 1.0 {
            return Err(Error::Parameter(format!(
                "alpha = {} > 1 can produce negative affinities; \
                 set allow_negative_affinity to proceed",
                self.alpha
            )));
        }
        if !features.pairwise_in_unit_range() {
            return Err(Error::Parameter(
                "pairwise channels must lie in [0, 1] (rescale them first) \
                 or set allow_negative_affinity"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Raw buffers shared by every step of one run.
struct Prepared<'a> {
    shape: VolumeShape,
    s_pow: Vec<f32>,
    pairwise: Vec<&'a [f32]>,
    inv_alpha: f32,
}

fn unary_power(s: &[f32], p: f64) -> Vec<f32> {
    s.iter().map(|&v| f64::from(v).powf(p) as f32).collect()
}

impl<'a> Prepared<'a> {
    fn new(features: &'a FeatureSet, cfg: &SfsegConfig) -> Self {
        Self {
            shape: features.shape(),
            s_pow: unary_power(features.unary().as_slice(), cfg.p),
            pairwise: features.pairwise().iter().map(|f| f.as_slice()).collect(),
            inv_alpha: (1.0 / cfg.alpha) as f32,
        }
    }
}

/// Scratch space so a step does not allocate per convolution.
#[derive(Default)]
struct Workspace {
    a: Vec<f32>,
    tmp: Vec<f32>,
    g_a: Vec<f32>,
    g_b: Vec<f32>,
    g_c: Vec<f32>,
}

/// Adds one channel's term into `out`, given `g_a = G * (S^p . X)`.
#[allow(clippy::too_many_arguments)]
fn accumulate_channel(
    shape: VolumeShape,
    s_pow: &[f32],
    f: &[f32],
    inv_alpha: f32,
    a: &[f32],
    g_a: &[f32],
    ws_tmp: &mut Vec<f32>,
    g_b: &mut Vec<f32>,
    g_c: &mut Vec<f32>,
    conv: &mut dyn FnMut(&[f32], &mut [f32]),
    out: &mut [f32],
) {
    let n = shape.len();
    ws_tmp.resize(n, 0.0);
    g_b.resize(n, 0.0);
    g_c.resize(n, 0.0);
    // G * (F^2 . A)
    for ((t, &fi), &ai) in ws_tmp.iter_mut().zip(f).zip(a) {
        *t = fi * fi * ai;
    }
    conv(ws_tmp, g_b);
    // G * (F . A)
    for ((t, &fi), &ai) in ws_tmp.iter_mut().zip(f).zip(a) {
        *t = fi * ai;
    }
    conv(ws_tmp, g_c);
    for i in 0..n {
        let fi = f[i];
        let t1 = (inv_alpha - fi * fi) * g_a[i];
        let t3 = 2.0 * fi * g_c[i];
        out[i] += s_pow[i] * (t1 - g_b[i] + t3);
    }
}

/// One multi-channel step on raw buffers; `out` is overwritten.
#[allow(clippy::too_many_arguments)]
fn step_raw(
    prep: &Prepared<'_>,
    shape: VolumeShape,
    s_pow: &[f32],
    pairwise: &[&[f32]],
    x: &[f32],
    conv: &mut dyn FnMut(&[f32], &mut [f32]),
    ws: &mut Workspace,
    out: &mut [f32],
) {
    let n = shape.len();
    ws.a.clear();
    ws.a.extend(s_pow.iter().zip(x).map(|(&s, &v)| s * v));
    ws.g_a.resize(n, 0.0);
    conv(&ws.a, &mut ws.g_a);
    out.fill(0.0);
    for &f in pairwise {
        accumulate_channel(
            shape,
            s_pow,
            f,
            prep.inv_alpha,
            &ws.a,
            &ws.g_a,
            &mut ws.tmp,
            &mut ws.g_b,
            &mut ws.g_c,
            conv,
            out,
        );
    }
}

fn kernel_conv<'k>(
    k: &'k SeparableKernel3D,
    shape: VolumeShape,
    scratch: &'k mut Vec<f32>,
) -> impl FnMut(&[f32], &mut [f32]) + 'k {
    move |src, dst| separable_into(src, shape, k, dst, scratch)
}

fn check_step_inputs(x: &FeatureVolume, s: &FeatureVolume, cfg: &SfsegConfig) -> Result<()> {
    s.ensure_same_shape(x)?;
    if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
        return Err(Error::Parameter(format!(
            "alpha must be positive, got {}",
            cfg.alpha
        )));
    }
    Ok(())
}

fn finish(shape: VolumeShape, out: Vec<f32>) -> Result<FeatureVolume> {
    FeatureVolume::new(shape, out, Role::Generic)
}

/// One convolutional power-iteration step for a single pairwise channel.
/// No normalization is applied.
pub fn sfseg_step_channel(
    x: &FeatureVolume,
    s: &FeatureVolume,
    f: &FeatureVolume,
    cfg: &SfsegConfig,
) -> Result<FeatureVolume> {
    let k = cfg.kernel.build()?;
    let mut scratch = Vec::new();
    let mut conv = kernel_conv(&k, x.shape(), &mut scratch);
    step_channel_with(x, s, f, cfg, &mut conv)
}

/// [`sfseg_step_channel`] with a caller-supplied filter in place of the
/// Gaussian convolution.
pub fn step_channel_with(
    x: &FeatureVolume,
    s: &FeatureVolume,
    f: &FeatureVolume,
    cfg: &SfsegConfig,
    conv: &mut dyn FnMut(&[f32], &mut [f32]),
) -> Result<FeatureVolume> {
    check_step_inputs(x, s, cfg)?;
    s.ensure_same_shape(f)?;
    let shape = x.shape();
    let s_pow = unary_power(s.as_slice(), cfg.p);
    let mut ws = Workspace {
        a: s_pow
            .iter()
            .zip(x.as_slice())
            .map(|(&a, &b)| a * b)
            .collect(),
        ..Workspace::default()
    };
    ws.g_a.resize(shape.len(), 0.0);
    conv(&ws.a, &mut ws.g_a);
    let mut out = vec![0.0; shape.len()];
    accumulate_channel(
        shape,
        &s_pow,
        f.as_slice(),
        (1.0 / cfg.alpha) as f32,
        &ws.a,
        &ws.g_a,
        &mut ws.tmp,
        &mut ws.g_b,
        &mut ws.g_c,
        conv,
        &mut out,
    );
    finish(shape, out)
}

/// Sum of [`sfseg_step_channel`] over every pairwise channel.
pub fn sfseg_step(
    x: &FeatureVolume,
    features: &FeatureSet,
    cfg: &SfsegConfig,
) -> Result<FeatureVolume> {
    check_step_inputs(x, features.unary(), cfg)?;
    let k = cfg.kernel.build()?;
    let prep = Prepared::new(features, cfg);
    let shape = x.shape();
    let mut scratch = Vec::new();
    let mut conv = kernel_conv(&k, shape, &mut scratch);
    let mut ws = Workspace::default();
    let mut out = vec![0.0; shape.len()];
    step_raw(
        &prep,
        shape,
        &prep.s_pow,
        &prep.pairwise,
        x.as_slice(),
        &mut conv,
        &mut ws,
        &mut out,
    );
    finish(shape, out)
}

/// Scales to unit L2 norm, returning the norm it had before.
pub fn normalize_l2(x: &FeatureVolume) -> Result<(FeatureVolume, f64)> {
    let norm = x.l2_norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot normalize a volume with L2 norm {norm}"
        )));
    }
    let data = x
        .as_slice()
        .iter()
        .map(|&v| (f64::from(v) / norm) as f32)
        .collect();
    Ok((
        FeatureVolume::from_parts_unchecked(x.shape(), data, x.role()),
        norm,
    ))
}

fn normalize_in_place(x: &mut [f32]) -> Result<f64> {
    let norm = x
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Degenerate(format!(
            "iteration collapsed to L2 norm {norm}"
        )));
    }
    x.iter_mut()
        .for_each(|v| *v = (f64::from(*v) / norm) as f32);
    Ok(norm)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Slope of the sigmoid at 1-based iteration `iter`.
pub fn sigmoid_slope(iter: usize, cfg: &SfsegConfig) -> f64 {
    let steps = iter.saturating_sub(cfg.binarize_start) as i32;
    cfg.sigmoid_slope0 * cfg.slope_growth.powi(steps)
}

fn project_in_place(x: &mut [f32], iter: usize, cfg: &SfsegConfig) {
    if iter < cfg.binarize_start {
        return;
    }
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if max <= 0.0 {
        return;
    }
    let theta = cfg.threshold_frac * f64::from(max);
    let scale = match cfg.projection {
        Projection::Relative => f64::from(max),
        Projection::Absolute => 1.0,
    };
    let slope = sigmoid_slope(iter, cfg);
    x.iter_mut()
        .for_each(|v| *v = sigmoid(slope * (f64::from(*v) - theta) / scale) as f32);
}

/// Pulls the solution toward `{0, 1}`:
/// `sigmoid(lambda_k (X - theta) / max X)` with `theta = threshold_frac * max X`
/// and `lambda_k = slope0 * growth^(iter - binarize_start)`. Identity before
/// `binarize_start`.
pub fn project_binary(x: &FeatureVolume, iter: usize, cfg: &SfsegConfig) -> FeatureVolume {
    let mut data = x.as_slice().to_vec();
    project_in_place(&mut data, iter, cfg);
    FeatureVolume::from_parts_unchecked(x.shape(), data, x.role())
}

/// `X > frac * max(X)`; ties go to background. An all-zero volume yields
/// an empty mask.
pub fn threshold_final(x: &FeatureVolume, frac: f64) -> BinaryMask {
    let max = x.max();
    BinaryMask::from_threshold(x, (frac * f64::from(max)) as f32)
}

/// Per-window hook applied before each frame update, e.g. to warp
/// neighbouring frames toward the centre frame along motion.
///
/// The buffers hold frames `lo..hi` of the unary map, the current solution
/// and each pairwise channel; `center` is the absolute index of the frame
/// being updated.
pub trait TemporalTransform: Sync {
    fn warp(
        &self,
        center: usize,
        lo: usize,
        hi: usize,
        unary_pow: &mut [f32],
        solution: &mut [f32],
        pairwise: &mut [Vec<f32>],
    );
}

/// Leaves every window untouched. Passing it to [`run`] forces the
/// frame-by-frame windowed update, which matches the fused whole-volume
/// update whenever `temporal_window >= kernel time radius`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransform;

impl TemporalTransform for IdentityTransform {
    fn warp(&self, _: usize, _: usize, _: usize, _: &mut [f32], _: &mut [f32], _: &mut [Vec<f32>]) {
    }
}

/// Diagnostics for one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub l2_norm_pre_normalize: f64,
    pub angle_to_reference_deg: Option<f64>,
    pub iou_to_ground_truth: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn rows(&self) -> Vec<TraceRow> {
        self.records
            .iter()
            .map(|r| TraceRow {
                iter: r.iter,
                angle_deg: r.angle_to_reference_deg,
                iou: r.iou_to_ground_truth,
            })
            .collect()
    }

    /// `iter,angle_deg,iou` table.
    pub fn to_csv(&self) -> String {
        trace_csv(&self.rows())
    }

    pub fn angles(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.angle_to_reference_deg)
            .collect()
    }
}

/// Optional inputs to [`run`].
#[derive(Default, Clone, Copy)]
pub struct RunInputs<'a> {
    /// Initial solution; defaults to the unary map.
    pub x0: Option<&'a FeatureVolume>,
    /// Eigenvector to measure angles against.
    pub reference: Option<&'a FeatureVolume>,
    pub ground_truth: Option<&'a BinaryMask>,
    /// When set, frames are updated one window at a time through this hook.
    pub transform: Option<&'a dyn TemporalTransform>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub soft: FeatureVolume,
    pub mask: BinaryMask,
    pub trace: RunTrace,
}

fn windowed_step(
    prep: &Prepared<'_>,
    k: &SeparableKernel3D,
    w: usize,
    x: &[f32],
    transform: &dyn TemporalTransform,
    out: &mut [f32],
) {
    let shape = prep.shape;
    let fl = shape.frame_len();
    let nf = shape.frames;
    out.par_chunks_mut(fl)
        .enumerate()
        .for_each(|(i, out_frame)| {
            let lo = i.saturating_sub(w);
            let hi = (i + w + 1).min(nf);
            let win_shape = shape.with_frames(hi - lo);
            let span = lo * fl..hi * fl;
            let mut s_w = prep.s_pow[span.clone()].to_vec();
            let mut x_w = x[span.clone()].to_vec();
            let mut f_w: Vec<Vec<f32>> = prep
                .pairwise
                .iter()
                .map(|f| f[span.clone()].to_vec())
                .collect();
            transform.warp(i, lo, hi, &mut s_w, &mut x_w, &mut f_w);
            let f_refs: Vec<&[f32]> = f_w.iter().map(Vec::as_slice).collect();
            let mut scratch = Vec::new();
            let mut conv = kernel_conv(k, win_shape, &mut scratch);
            let mut ws = Workspace::default();
            let mut win_out = vec![0.0; win_shape.len()];
            step_raw(
                prep,
                win_shape,
                &s_w,
                &f_refs,
                &x_w,
                &mut conv,
                &mut ws,
                &mut win_out,
            );
            let c = i - lo;
            out_frame.copy_from_slice(&win_out[c * fl..(c + 1) * fl]);
        });
}

/// The full iteration: initialize, then per outer iteration update every
/// frame from the previous iterate, normalize globally, and project.
/// Afterwards the soft result is thresholded at `final_threshold * max`.
pub fn run(features: &FeatureSet, cfg: &SfsegConfig, inputs: RunInputs<'_>) -> Result<RunOutput> {
    cfg.validate()?;
    cfg.check_guard(features)?;
    let shape = features.shape();
    for v in [inputs.x0, inputs.reference].into_iter().flatten() {
        features.unary().ensure_same_shape(v)?;
    }
    if let Some(gt) = inputs.ground_truth {
        if gt.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: gt.shape(),
            });
        }
    }
    let x0 = inputs.x0.unwrap_or(features.unary());
    if !cfg.allow_negative_affinity && x0.as_slice().iter().any(|&v| v < 0.0) {
        return Err(Error::Validation(
            "initial solution must be nonnegative".into(),
        ));
    }
    let reference = inputs.reference.map(FeatureVolume::to_f64);

    let k = cfg.kernel.build()?;
    let prep = Prepared::new(features, cfg);
    let mut x = x0.as_slice().to_vec();
    let mut next = vec![0.0f32; shape.len()];
    let mut ws = Workspace::default();
    let mut scratch = Vec::new();
    let mut records = Vec::with_capacity(cfg.iterations);

    for iter in 1..=cfg.iterations {
        let start = Instant::now();
        match inputs.transform {
            Some(tr) => windowed_step(&prep, &k, cfg.temporal_window, &x, tr, &mut next),
            None => {
                let mut conv = kernel_conv(&k, shape, &mut scratch);
                step_raw(
                    &prep,
                    shape,
                    &prep.s_pow,
                    &prep.pairwise,
                    &x,
                    &mut conv,
                    &mut ws,
                    &mut next,
                );
            }
        }
        if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "iteration {iter} produced {bad}"
            )));
        }
        let norm = normalize_in_place(&mut next)?;
        project_in_place(&mut next, iter, cfg);
        std::mem::swap(&mut x, &mut next);
        let wall_time_s = start.elapsed().as_secs_f64();

        let angle = match &reference {
            Some(r) => {
                let xv: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
                Some(angle_degrees(&xv, r)?)
            }
            None => None,
        };
        let iou = match inputs.ground_truth {
            Some(gt) => {
                let soft = FeatureVolume::from_parts_unchecked(shape, x.clone(), Role::Generic);
                Some(jaccard(&threshold_final(&soft, cfg.final_threshold), gt)?)
            }
            None => None,
        };
        records.push(IterationRecord {
            iter,
            l2_norm_pre_normalize: norm,
            angle_to_reference_deg: angle,
            iou_to_ground_truth: iou,
            wall_time_s,
        });
    }

    let role = if x.iter().all(|&v| v >= 0.0) {
        Role::Solution
    } else {
        Role::Generic
    };
    let soft = FeatureVolume::from_parts_unchecked(shape, x, role);
    let mask = threshold_final(&soft, cfg.final_threshold);
    Ok(RunOutput {
        soft,
        mask,
        trace: RunTrace { records },
    })
}

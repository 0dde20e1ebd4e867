//! Explicit sparse affinity matrices and classical power iteration.
//!
//! This is the desk-scale reference the convolutional engine is certified
//! against. Everything here accumulates in `f64`; the engine runs in `f32`.
//!
//! Node `i` is the voxel at linear index `i` of the volume. Two nodes are
//! linked when their offset `(dt, dy, dx)` lies inside the kernel support,
//! the zero offset included, so every row carries a self-edge that matches
//! the centre tap of the convolution.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::conv::{KernelNormalization, SeparableKernel3D};
use crate::engine::{run, sfseg_step, RunInputs, SfsegConfig};
use crate::error::{Error, Result};
use crate::metrics::angle_degrees;
use crate::volume::{FeatureSet, FeatureVolume, Role, VolumeShape};

/// Largest graph the oracle will materialize.
pub const MAX_ORACLE_NODES: usize = 1_000_000;

/// Which pairwise function fills the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffinityKind {
    /// `s_i^p s_j^p exp(-alpha sum_c (f_ci - f_cj)^2) G`.
    Exact,
    /// `s_i^p s_j^p [1 - alpha sum_c (f_ci - f_cj)^2] G`, the first-order
    /// expansion of [`AffinityKind::Exact`].
    Taylor,
    /// `s_i^p s_j^p G sum_c [1/alpha - (f_ci - f_cj)^2]`: the operator one
    /// multi-channel convolutional step applies. With a single channel it
    /// is the Taylor matrix divided by `alpha`.
    EngineOperator,
}

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseAffinity {
    shape: VolumeShape,
    radii: [usize; 3],
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    negative_entries: usize,
}

impl SparseAffinity {
    /// Node count `N`.
    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> VolumeShape {
        self.shape
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Neighbourhood offsets `(dt, dy, dx)`, zero offset included.
    pub fn neighborhood(&self) -> Vec<[isize; 3]> {
        let [rt, ry, rx] = self.radii.map(|r| r as isize);
        let mut out = Vec::new();
        for dt in -rt..=rt {
            for dy in -ry..=ry {
                for dx in -rx..=rx {
                    out.push([dt, dy, dx]);
                }
            }
        }
        out
    }

    /// Number of strictly negative stored weights.
    pub fn negative_entries(&self) -> usize {
        self.negative_entries
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// All `(i, j, w)` triples in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n()).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    /// Stored weight at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Text export: one `i j w` line per entry, `w` to 17 significant digits.
    pub fn to_triples(&self) -> String {
        let mut out = String::new();
        for (i, j, w) in self.entries() {
            writeln!(out, "{i} {j} {w:.16e}").expect("string write");
        }
        out
    }

    pub fn write_triples(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_triples()).map_err(|e| Error::io(path, e))
    }

    /// Builds from dense row-major data, keeping nonzeros. Intended for
    /// small hand-written test matrices.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::Shape(format!(
                "dense matrix has {} values, expected {}",
                dense.len(),
                n * n
            )));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = dense[i * n + j];
                if w != 0.0 {
                    cols.push(j as u32);
                    vals.push(w);
                }
            }
            row_ptr.push(cols.len());
        }
        let negative_entries = vals.iter().filter(|&&w| w < 0.0).count();
        Ok(Self {
            shape: VolumeShape::new(1, 1, n)?,
            radii: [0, 0, n.saturating_sub(1)],
            row_ptr,
            cols,
            vals,
            negative_entries,
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.entries()
            .all(|(i, j, w)| (self.get(j, i) - w).abs() <= tol)
    }
}

fn pair_weight(kind: AffinityKind, alpha: f64, channels: usize, sq_diff: f64) -> f64 {
    match kind {
        AffinityKind::Exact => (-alpha * sq_diff).exp(),
        AffinityKind::Taylor => 1.0 - alpha * sq_diff,
        AffinityKind::EngineOperator => channels as f64 / alpha - sq_diff,
    }
}

/// Fills a matrix with the requested pairwise function and kernel.
pub fn build_affinity(
    features: &FeatureSet,
    cfg: &SfsegConfig,
    kind: AffinityKind,
    kernel: &SeparableKernel3D,
) -> Result<SparseAffinity> {
    let shape = features.shape();
    let n = shape.len();
    if n > MAX_ORACLE_NODES {
        return Err(Error::Capacity {
            nodes: n,
            limit: MAX_ORACLE_NODES,
        });
    }
    if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
        return Err(Error::Parameter(format!(
            "alpha must be positive, got {}",
            cfg.alpha
        )));
    }
    let s_pow: Vec<f64> = features
        .unary()
        .as_slice()
        .iter()
        .map(|&s| f64::from(s).powf(cfg.p))
        .collect();
    let channels: Vec<Vec<f64>> = features
        .pairwise()
        .iter()
        .map(FeatureVolume::to_f64)
        .collect();
    let radii = kernel.radii();
    let [rt, ry, rx] = radii.map(|r| r as isize);
    let (nf, h, w) = (
        shape.frames as isize,
        shape.height as isize,
        shape.width as isize,
    );

    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let (t, y, x) = shape.coords(i);
            let (t, y, x) = (t as isize, y as isize, x as isize);
            let mut cols = Vec::new();
            let mut vals = Vec::new();
            for dt in -rt..=rt {
                let tt = t + dt;
                if !(0..nf).contains(&tt) {
                    continue;
                }
                for dy in -ry..=ry {
                    let yy = y + dy;
                    if !(0..h).contains(&yy) {
                        continue;
                    }
                    for dx in -rx..=rx {
                        let xx = x + dx;
                        if !(0..w).contains(&xx) {
                            continue;
                        }
                        let j = ((tt * h + yy) * w + xx) as usize;
                        let sq: f64 = channels.iter().map(|f| (f[i] - f[j]).powi(2)).sum();
                        let wgt = s_pow[i]
                            * s_pow[j]
                            * pair_weight(kind, cfg.alpha, channels.len(), sq)
                            * kernel.weight(dt, dy, dx);
                        cols.push(j as u32);
                        vals.push(wgt);
                    }
                }
            }
            (cols, vals)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let nnz = rows.iter().map(|r| r.0.len()).sum();
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for (c, v) in rows {
        cols.extend(c);
        vals.extend(v);
        row_ptr.push(cols.len());
    }
    let negative_entries = vals.iter().filter(|&&w| w < 0.0).count();
    Ok(SparseAffinity {
        shape,
        radii,
        row_ptr,
        cols,
        vals,
        negative_entries,
    })
}

/// Gaussian-affinity matrix with the engine's normalized kernel.
pub fn build_affinity_exact(features: &FeatureSet, cfg: &SfsegConfig) -> Result<SparseAffinity> {
    build_affinity(features, cfg, AffinityKind::Exact, &cfg.kernel.build()?)
}

/// First-order expansion of [`build_affinity_exact`]; entries may be negative.
pub fn build_affinity_taylor(features: &FeatureSet, cfg: &SfsegConfig) -> Result<SparseAffinity> {
    build_affinity(features, cfg, AffinityKind::Taylor, &cfg.kernel.build()?)
}

/// The matrix a single [`sfseg_step`] multiplies by.
pub fn build_engine_operator(features: &FeatureSet, cfg: &SfsegConfig) -> Result<SparseAffinity> {
    build_affinity(
        features,
        cfg,
        AffinityKind::EngineOperator,
        &cfg.kernel.build()?,
    )
}

/// `M x` with per-row `f64` accumulation in column order.
pub fn matvec(m: &SparseAffinity, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.n() {
        return Err(Error::Parameter(format!(
            "matvec dimension mismatch: matrix is {}, vector is {}",
            m.n(),
            x.len()
        )));
    }
    let mut out = vec![0.0; m.n()];
    matvec_into(m, x, &mut out);
    Ok(out)
}

fn matvec_into(m: &SparseAffinity, x: &[f64], out: &mut [f64]) {
    out.par_iter_mut()
        .with_min_len(256)
        .enumerate()
        .for_each(|(i, o)| {
            let span = m.row_ptr[i]..m.row_ptr[i + 1];
            let mut acc = 0.0;
            for (&j, &w) in m.cols[span.clone()].iter().zip(&m.vals[span]) {
                acc += w * x[j as usize];
            }
            *o = acc;
        });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x^T M x / x^T x`.
pub fn cluster_score(m: &SparseAffinity, x: &[f64]) -> Result<f64> {
    let xx = dot(x, x);
    if xx == 0.0 {
        return Err(Error::Parameter("cluster score of a zero vector".into()));
    }
    Ok(dot(x, &matvec(m, x)?) / xx)
}

#[derive(Debug, Clone)]
pub struct PowerIterationResult {
    /// Unit-norm eigenvector estimate.
    pub eigvec: Vec<f64>,
    /// Rayleigh quotient of `eigvec`.
    pub eigval: f64,
    pub iters_used: usize,
}

/// Classical power iteration `x <- M x / |M x|`, stopping once successive
/// iterates differ by less than `tol` in L2 or after `max_iters` steps.
pub fn power_iteration(
    m: &SparseAffinity,
    x0: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<PowerIterationResult> {
    if x0.len() != m.n() {
        return Err(Error::Parameter(format!(
            "start vector has length {}, matrix is {}",
            x0.len(),
            m.n()
        )));
    }
    let n0 = norm(x0);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::Parameter(
            "power iteration needs a nonzero start vector".into(),
        ));
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / n0).collect();
    let mut y = vec![0.0; x.len()];
    let mut iters_used = 0;
    for _ in 0..max_iters {
        matvec_into(m, &x, &mut y);
        let ny = norm(&y);
        if ny == 0.0 || !ny.is_finite() {
            return Err(Error::Degenerate(format!("M x has norm {ny}")));
        }
        let mut diff = 0.0;
        for (xi, yi) in x.iter_mut().zip(&y) {
            let v = yi / ny;
            diff += (v - *xi).powi(2);
            *xi = v;
        }
        iters_used += 1;
        if diff.sqrt() < tol {
            break;
        }
    }
    let eigval = cluster_score(m, &x)?;
    Ok(PowerIterationResult {
        eigvec: x,
        eigval,
        iters_used,
    })
}

/// Tight-tolerance dominant eigenvector, the reference for angle checks.
pub fn reference_eigenvector(m: &SparseAffinity, x0: &[f64]) -> Result<PowerIterationResult> {
    power_iteration(m, x0, 100_000, 1e-12)
}

/// Settings for [`certify`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Max allowed `|conv step - M x|`.
    pub tol: f64,
    /// Max allowed angle between engine output and oracle eigenvector.
    pub max_angle_deg: f64,
    /// Engine iterations for the eigenvector check.
    pub engine_iters: usize,
    /// Random probe vectors for the matvec check, besides `S` itself.
    pub probes: usize,
    pub seed: u64,
    /// Kernel scaling used by the oracle; anything but the engine's
    /// unit-sum scaling is a deliberate mismatch.
    pub oracle_normalization: KernelNormalization,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_angle_deg: 1.0,
            engine_iters: 500,
            probes: 3,
            seed: 0,
            oracle_normalization: KernelNormalization::UnitSum,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub nodes: usize,
    pub max_matvec_diff: f64,
    pub angle_deg: f64,
    pub oracle_iters: usize,
    pub matvec_pass: bool,
    pub angle_pass: bool,
}

impl CertifyReport {
    pub fn pass(&self) -> bool {
        self.matvec_pass && self.angle_pass
    }
}

/// Max absolute difference between one convolutional step and the oracle
/// matvec over the given probe volumes.
pub fn max_step_discrepancy(
    m: &SparseAffinity,
    features: &FeatureSet,
    cfg: &SfsegConfig,
    probes: &[FeatureVolume],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in probes {
        let step = sfseg_step(x, features, cfg)?;
        let mx = matvec(m, &x.to_f64())?;
        for (a, b) in step.as_slice().iter().zip(&mx) {
            worst = worst.max((f64::from(*a) - b).abs());
        }
    }
    Ok(worst)
}

/// Seeded uniform `[0, 1)` probe volume.
pub fn random_probe(shape: VolumeShape, seed: u64) -> FeatureVolume {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let data = (0..shape.len()).map(|_| rng.random::<f32>()).collect();
    FeatureVolume::from_parts_unchecked(shape, data, Role::Solution)
}

/// Checks the engine against the explicit matrix: one-step matvec
/// equivalence and convergence to the same dominant eigenvector.
pub fn certify(
    features: &FeatureSet,
    cfg: &SfsegConfig,
    opts: &CertifyOptions,
) -> Result<CertifyReport> {
    let shape = features.shape();
    let kernel = SeparableKernel3D::with_normalization(
        cfg.kernel.sigmas,
        cfg.kernel.radii,
        opts.oracle_normalization,
    )?;
    let m = build_affinity(features, cfg, AffinityKind::EngineOperator, &kernel)?;

    let mut probes = vec![features.unary().clone()];
    probes.extend((0..opts.probes).map(|k| random_probe(shape, opts.seed.wrapping_add(k as u64))));
    let max_matvec_diff = max_step_discrepancy(&m, features, cfg, &probes)?;

    let start = features.unary().to_f64();
    let oracle = reference_eigenvector(&m, &start)?;
    let engine_cfg = SfsegConfig {
        iterations: opts.engine_iters,
        ..cfg.clone()
    }
    .without_binarization();
    let engine = run(features, &engine_cfg, RunInputs::default())?;
    let angle_deg = angle_degrees(&engine.soft.to_f64(), &oracle.eigvec)?;

    Ok(CertifyReport {
        nodes: shape.len(),
        max_matvec_diff,
        angle_deg,
        oracle_iters: oracle.iters_used,
        matvec_pass: max_matvec_diff <= opts.tol,
        angle_pass: angle_deg < opts.max_angle_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::KernelParams;

    fn two_by_two() -> SparseAffinity {
        SparseAffinity::from_dense(2, &[2.0, 1.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn textbook_power_iteration() {
        let r = power_iteration(&two_by_two(), &[1.0, 0.0], 1000, 1e-14).unwrap();
        let h = 0.5f64.sqrt();
        assert!((r.eigvec[0] - h).abs() < 1e-9 && (r.eigvec[1] - h).abs() < 1e-9);
        assert!((r.eigval - 3.0).abs() < 1e-12);
    }

    #[test]
    fn identity_converges_in_one_step() {
        let m = SparseAffinity::from_dense(3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let r = power_iteration(&m, &[3.0, 4.0, 0.0], 100, 1e-12).unwrap();
        assert_eq!(r.iters_used, 1);
        assert_eq!(r.eigvec, vec![0.6, 0.8, 0.0]);
        assert!((r.eigval - 1.0).abs() < 1e-15);
        assert_eq!(matvec(&m, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn dense_ones_matvec_sums() {
        let m = SparseAffinity::from_dense(3, &[1.0; 9]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 2.0, 4.0]).unwrap(), vec![7.0; 3]);
        assert!(matvec(&m, &[1.0]).is_err());
    }

    #[test]
    fn power_iteration_errors() {
        let m = two_by_two();
        assert!(matches!(
            power_iteration(&m, &[0.0, 0.0], 10, 1e-9),
            Err(Error::Parameter(_))
        ));
        let nil = SparseAffinity::from_dense(2, &[0.0; 4]).unwrap();
        assert!(matches!(
            power_iteration(&nil, &[1.0, 0.0], 10, 1e-9),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            cluster_score(&m, &[0.0, 0.0]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn score_of_unit_vector() {
        assert_eq!(cluster_score(&two_by_two(), &[1.0, 0.0]).unwrap(), 2.0);
    }

    fn features(s: &[f32], f: &[f32], shape: VolumeShape) -> FeatureSet {
        FeatureSet::new(
            FeatureVolume::new(shape, s.to_vec(), Role::Unary).unwrap(),
            vec![FeatureVolume::new(shape, f.to_vec(), Role::Pairwise).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn four_node_hand_enumeration() {
        // 1x2x2 video, s = 1, f = (0, 0, 1, 1): rows y=0 and y=1 differ by 1
        let shape = VolumeShape::new(1, 2, 2).unwrap();
        let fs = features(&[1.0; 4], &[0.0, 0.0, 1.0, 1.0], shape);
        let cfg = SfsegConfig {
            kernel: KernelParams {
                sigmas: [1.0, 1.0, 1.0],
                radii: [0, 1, 1],
            },
            temporal_window: 0,
            ..SfsegConfig::default()
        };
        let m = build_affinity_exact(&fs, &cfg).unwrap();
        let k = cfg.kernel.build().unwrap();
        let e = (-1.0f64).exp();
        let g = |dy: isize, dx: isize| k.weight(0, dy, dx);
        let want = [
            [g(0, 0), g(0, 1), g(1, 0) * e, g(1, 1) * e],
            [g(0, -1), g(0, 0), g(1, -1) * e, g(1, 0) * e],
            [g(-1, 0) * e, g(-1, 1) * e, g(0, 0), g(0, 1)],
            [g(-1, -1) * e, g(-1, 0) * e, g(0, -1), g(0, 0)],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.get(i, j) - want[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
        assert_eq!(m.nnz(), 16);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn diagonal_and_equal_features() {
        let shape = VolumeShape::new(2, 3, 3).unwrap();
        let fs = features(&[0.5; 18], &[0.2; 18], shape);
        let cfg = SfsegConfig::default();
        let k = cfg.kernel.build().unwrap();
        let ex = build_affinity_exact(&fs, &cfg).unwrap();
        let ta = build_affinity_taylor(&fs, &cfg).unwrap();
        let sp2 = 0.5f64.powf(0.2);
        assert!((ex.get(4, 4) - sp2 * k.weight(0, 0, 0)).abs() < 1e-15);
        let j = shape.index(1, 2, 1);
        assert!((ex.get(4, j) - sp2 * k.weight(1, 1, 0)).abs() < 1e-15);
        for (i, j, w) in ex.entries() {
            assert!((ta.get(i, j) - w).abs() < 1e-15);
        }
    }

    #[test]
    fn taylor_zero_crossing_and_gap() {
        let shape = VolumeShape::new(1, 1, 2).unwrap();
        let cfg = SfsegConfig {
            alpha: 1.0,
            allow_negative_affinity: true,
            ..SfsegConfig::default()
        };
        let ta = build_affinity_taylor(&features(&[1.0, 1.0], &[0.0, 1.0], shape), &cfg).unwrap();
        assert_eq!(ta.get(0, 1), 0.0);

        let d = 0.1f64.sqrt() as f32;
        let fs = features(&[1.0, 1.0], &[0.0, d], shape);
        let ta = build_affinity_taylor(&fs, &cfg).unwrap();
        let ex = build_affinity_exact(&fs, &cfg).unwrap();
        let u = f64::from(d).powi(2);
        let base = cfg.kernel.build().unwrap().weight(0, 0, 1);
        assert!((ta.get(0, 1) - (1.0 - u) * base).abs() < 1e-15);
        assert!((ex.get(0, 1) / base - 0.904837).abs() < 1e-6);
        assert!((ex.get(0, 1) - ta.get(0, 1)) / ex.get(0, 1) < 0.006);
    }

    #[test]
    fn negative_entries_are_counted() {
        let shape = VolumeShape::new(1, 1, 2).unwrap();
        let cfg = SfsegConfig {
            alpha: 2.0,
            ..SfsegConfig::default()
        };
        let ta = build_affinity_taylor(&features(&[1.0, 1.0], &[0.0, 1.0], shape), &cfg).unwrap();
        assert_eq!(ta.negative_entries(), 2);
    }

    #[test]
    fn capacity_guard() {
        let shape = VolumeShape::new(1, 1001, 1000).unwrap();
        let unary = FeatureVolume::zeros(shape);
        let fs = FeatureSet::new(unary.clone(), vec![unary]).unwrap();
        assert!(matches!(
            build_affinity_exact(&fs, &SfsegConfig::default()),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn triples_have_17_significant_digits() {
        let txt = two_by_two().to_triples();
        let lines: Vec<_> = txt.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0 1 1.0000000000000000e0");
        let w: f64 = lines[0].split(' ').nth(2).unwrap().parse().unwrap();
        assert_eq!(w, 2.0);
    }

    #[test]
    fn engine_operator_is_taylor_over_alpha_for_one_channel() {
        let shape = VolumeShape::new(2, 4, 4).unwrap();
        let s: Vec<f32> = (0..32).map(|i| (i % 5) as f32 / 4.0).collect();
        let f: Vec<f32> = (0..32).map(|i| (i % 7) as f32 / 6.0).collect();
        let fs = features(&s, &f, shape);
        let cfg = SfsegConfig {
            alpha: 0.7,
            ..SfsegConfig::default()
        };
        let ta = build_affinity_taylor(&fs, &cfg).unwrap();
        let op = build_engine_operator(&fs, &cfg).unwrap();
        for (i, j, w) in ta.entries() {
            assert!((op.get(i, j) - w / 0.7).abs() < 1e-12);
        }
    }
}

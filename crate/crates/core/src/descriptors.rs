//! Multi-scale statistics of a binary image: the entropic descriptor
//! triplet `S_Δ·γ^α` (α = 0, 1, 2) over sliding `k × k` windows with hard
//! walls, the orthogonal two-point correlation `S₂` with periodic wrap, and
//! the orthogonal lineal-path function `L` with hard walls.
//!
//! Entropies are sums of log-binomials `ln C(k², n)`. Actual entropies are
//! always accumulated from an integer histogram of window occupancies, in
//! increasing `n`, so the full and incremental paths agree bit for bit.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Result, TsrError};
use crate::grid::{BinaryImage, ClusterShape};

/// Ordered window sizes `k`, each in `2..=side`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleSet {
    scales: Vec<usize>,
}

impl ScaleSet {
    pub fn new(scales: Vec<usize>, side: usize) -> Result<Self> {
        if scales.is_empty() {
            return Err(TsrError::InvalidParameter("empty scale set".into()));
        }
        for w in scales.windows(2) {
            if w[0] >= w[1] {
                return Err(TsrError::InvalidParameter(
                    "scales must be strictly increasing".into(),
                ));
            }
        }
        for &k in &scales {
            if k < 2 || k > side {
                return Err(TsrError::ScaleOutOfRange { k, side });
            }
        }
        Ok(Self { scales })
    }

    /// `stride, 2·stride, … ≤ side`, skipping `k = 1`.
    pub fn with_stride(side: usize, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(TsrError::InvalidParameter("scale stride must be ≥ 1".into()));
        }
        let scales: Vec<usize> = (1..=side / stride)
            .map(|i| i * stride)
            .filter(|&k| k >= 2)
            .collect();
        Self::new(scales, side)
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.scales.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveKind {
    /// `S_Δ`
    SDelta,
    /// `S_Δ·γ`, the statistical complexity
    SDeltaGamma,
    /// `S_Δ·γ²`
    SDeltaGamma2,
    /// Two-point correlation, periodic
    TwoPoint,
    /// Orthogonal lineal path, hard walls
    LinealPath,
}

impl CurveKind {
    pub const ALL: [CurveKind; 5] = [
        CurveKind::SDelta,
        CurveKind::SDeltaGamma,
        CurveKind::SDeltaGamma2,
        CurveKind::TwoPoint,
        CurveKind::LinealPath,
    ];

    /// Stable short name, used for file names.
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::SDelta => "sdelta",
            CurveKind::SDeltaGamma => "sdelta_gamma",
            CurveKind::SDeltaGamma2 => "sdelta_gamma2",
            CurveKind::TwoPoint => "s2",
            CurveKind::LinealPath => "lineal",
        }
    }
}

/// Per-scale values of one statistical function.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorCurve {
    pub kind: CurveKind,
    pub points: Vec<(usize, f64)>,
}

impl DescriptorCurve {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn max_value(&self) -> f64 {
        self.values().fold(0.0, f64::max)
    }

    /// `k,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,value\n");
        for &(k, v) in &self.points {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// `ln C(m, n)` for fixed `m = k²` and every `n ∈ 0..=m`.
#[derive(Clone, Debug)]
pub struct LnChoose {
    cells: usize,
    values: Vec<f64>,
}

impl LnChoose {
    pub fn new(cells: usize) -> Self {
        let lf = log_factorials(cells);
        let values = (0..=cells)
            .map(|n| {
                if n == 0 || n == cells {
                    0.0
                } else {
                    lf[cells] - lf[n] - lf[cells - n]
                }
            })
            .collect();
        Self { cells, values }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }
}

/// `ln i!` for `i ∈ 0..=max`, compensated accumulation.
fn log_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    out.push(0.0);
    for i in 1..=max {
        let x = (i as f64).ln();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// Number of window positions `(L − k + 1)²`.
pub fn window_count(side: usize, k: usize) -> usize {
    let w = side + 1 - k;
    w * w
}

/// Black-pixel count of every `k × k` window, unit stride, row-major over
/// window anchors.
pub fn window_occupancies(image: &BinaryImage, k: usize) -> Result<Vec<u32>> {
    let n = image.side();
    if k == 0 || k > n {
        return Err(TsrError::ScaleOutOfRange { k, side: n });
    }
    let prefix = prefix_sums(image);
    Ok(occupancies_from_prefix(&prefix, n, k))
}

fn prefix_sums(image: &BinaryImage) -> Vec<u32> {
    let n = image.side();
    let w = n + 1;
    let mut p = vec![0u32; w * w];
    for r in 0..n {
        let mut row = 0u32;
        for c in 0..n {
            row += image.get(r, c) as u32;
            p[(r + 1) * w + c + 1] = p[r * w + c + 1] + row;
        }
    }
    p
}

fn occupancies_from_prefix(p: &[u32], n: usize, k: usize) -> Vec<u32> {
    let w = n + 1;
    let span = n + 1 - k;
    let mut out = Vec::with_capacity(span * span);
    for r in 0..span {
        for c in 0..span {
            let s = p[(r + k) * w + c + k] + p[r * w + c] - p[r * w + c + k] - p[(r + k) * w + c];
            out.push(s);
        }
    }
    out
}

fn occupancy_histogram(occupancies: &[u32], cells: usize) -> Result<Vec<u64>> {
    let mut hist = vec![0u64; cells + 1];
    for &n in occupancies {
        let n = n as usize;
        if n > cells {
            return Err(TsrError::OccupancyOutOfRange { n, cells });
        }
        hist[n] += 1;
    }
    Ok(hist)
}

fn entropy_from_histogram(hist: &[u64], table: &LnChoose) -> f64 {
    hist.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(n, &c)| c as f64 * table.get(n))
        .sum()
}

/// `S = Σᵢ ln C(k², nᵢ)`.
pub fn entropy_actual(occupancies: &[u32], k: usize) -> Result<f64> {
    let table = LnChoose::new(k * k);
    let hist = occupancy_histogram(occupancies, k * k)?;
    Ok(entropy_from_histogram(&hist, &table))
}

/// Entropy of the most uniform macrostate: `λ − r₀` windows hold `n₀`
/// pixels, `r₀` windows hold `n₀ + 1`.
pub fn entropy_max(total: usize, lambda: usize, k: usize) -> Result<f64> {
    check_total(total, lambda, k)?;
    Ok(entropy_max_with(total, lambda, &LnChoose::new(k * k)))
}

/// Entropy of the most clustered macrostate: full windows, empty windows,
/// and at most one window holding the remainder `N mod k²`.
pub fn entropy_min(total: usize, lambda: usize, k: usize) -> Result<f64> {
    check_total(total, lambda, k)?;
    Ok(entropy_min_with(total, &LnChoose::new(k * k)))
}

fn check_total(total: usize, lambda: usize, k: usize) -> Result<()> {
    let max = lambda * k * k;
    if lambda == 0 || total > max {
        return Err(TsrError::TotalOutOfRange { total, max });
    }
    Ok(())
}

fn entropy_max_with(total: usize, lambda: usize, table: &LnChoose) -> f64 {
    let r0 = total % lambda;
    let n0 = total / lambda;
    let mut s = (lambda - r0) as f64 * table.get(n0);
    if r0 > 0 {
        s += r0 as f64 * table.get(n0 + 1);
    }
    s
}

fn entropy_min_with(total: usize, table: &LnChoose) -> f64 {
    table.get(total % table.cells())
}

/// Entropies and derived descriptors at one scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyProfile {
    pub k: usize,
    pub lambda: usize,
    pub occupancy_total: usize,
    pub s: f64,
    pub s_max: f64,
    pub s_min: f64,
    pub s_delta: f64,
    pub gamma: f64,
}

impl EntropyProfile {
    fn from_histogram(k: usize, hist: &[u64], total: usize, table: &LnChoose) -> Self {
        let lambda = hist.iter().sum::<u64>() as usize;
        let s = entropy_from_histogram(hist, table);
        let s_max = entropy_max_with(total, lambda, table);
        let s_min = entropy_min_with(total, table);
        let s_delta = ((s_max - s) / lambda as f64).max(0.0);
        let gamma = if s_max > s_min {
            ((s - s_min) / (s_max - s_min)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Self {
            k,
            lambda,
            occupancy_total: total,
            s,
            s_max,
            s_min,
            s_delta,
            gamma,
        }
    }

    /// `[S_Δ, S_Δ·γ, S_Δ·γ²]`; all zero on a degenerate scale.
    pub fn triplet(&self) -> [f64; 3] {
        if self.s_max <= self.s_min {
            return [0.0; 3];
        }
        let g = self.gamma;
        [self.s_delta, self.s_delta * g, self.s_delta * g * g]
    }
}

pub fn entropy_profile(image: &BinaryImage, k: usize) -> Result<EntropyProfile> {
    let occ = window_occupancies(image, k)?;
    let table = LnChoose::new(k * k);
    let hist = occupancy_histogram(&occ, k * k)?;
    let total = occ.iter().map(|&n| n as usize).sum();
    Ok(EntropyProfile::from_histogram(k, &hist, total, &table))
}

/// The three curves `S_Δ·γ^α`, α = 0, 1, 2.
pub fn ed_triplet(image: &BinaryImage, scales: &ScaleSet) -> Result<[DescriptorCurve; 3]> {
    if scales.max() > image.side() {
        return Err(TsrError::ScaleOutOfRange {
            k: scales.max(),
            side: image.side(),
        });
    }
    let prefix = prefix_sums(image);
    let n = image.side();
    let values: Vec<(usize, [f64; 3])> = scales
        .scales()
        .par_iter()
        .map(|&k| {
            let occ = occupancies_from_prefix(&prefix, n, k);
            let table = LnChoose::new(k * k);
            let hist = occupancy_histogram(&occ, k * k).expect("window within k²");
            let total = occ.iter().map(|&v| v as usize).sum();
            (k, EntropyProfile::from_histogram(k, &hist, total, &table).triplet())
        })
        .collect();
    Ok(triplet_curves(&values))
}

pub(crate) fn triplet_curves(values: &[(usize, [f64; 3])]) -> [DescriptorCurve; 3] {
    let kinds = [CurveKind::SDelta, CurveKind::SDeltaGamma, CurveKind::SDeltaGamma2];
    kinds.map(|kind| {
        let a = kind as usize;
        DescriptorCurve {
            kind,
            points: values.iter().map(|&(k, t)| (k, t[a])).collect(),
        }
    })
}

/// Orthogonal two-point correlation with periodic wrap, averaged over the
/// x and y directions, for `k ∈ 0..=max_k`.
pub fn two_point_s2(image: &BinaryImage, max_k: usize) -> Result<DescriptorCurve> {
    let n = image.side();
    if max_k > n {
        return Err(TsrError::ScaleOutOfRange { k: max_k, side: n });
    }
    let samples = (2 * n * n) as f64;
    let points = (0..=max_k)
        .map(|k| {
            let mut hits = 0u64;
            for r in 0..n {
                for c in 0..n {
                    if image.get(r, c) {
                        hits += image.get(r, (c + k) % n) as u64;
                        hits += image.get((r + k) % n, c) as u64;
                    }
                }
            }
            (k, hits as f64 / samples)
        })
        .collect();
    Ok(DescriptorCurve {
        kind: CurveKind::TwoPoint,
        points,
    })
}

/// Orthogonal lineal path with hard walls for `k ∈ 1..=max_k`: the fraction
/// of in-domain horizontal and vertical `k`-pixel segments that are all black.
pub fn lineal_path(image: &BinaryImage, max_k: usize) -> Result<DescriptorCurve> {
    let n = image.side();
    if max_k > n {
        return Err(TsrError::ScaleOutOfRange { k: max_k, side: n });
    }
    let mut runs = Vec::new();
    for r in 0..n {
        collect_runs((0..n).map(|c| image.get(r, c)), &mut runs);
    }
    for c in 0..n {
        collect_runs((0..n).map(|r| image.get(r, c)), &mut runs);
    }
    Ok(lineal_from_runs(&runs, n, max_k))
}

/// Lineal path of any non-touching arrangement of `shapes` in a domain of
/// side `side`; it does not depend on where the shapes sit.
pub fn lineal_path_of_shapes(
    shapes: &[ClusterShape],
    side: usize,
    max_k: usize,
) -> Result<DescriptorCurve> {
    if max_k > side {
        return Err(TsrError::ScaleOutOfRange { k: max_k, side });
    }
    let mut runs = Vec::new();
    for shape in shapes {
        let h = shape.height();
        let w = shape.width();
        let mut mask = vec![false; h * w];
        for &(r, c) in shape.offsets() {
            mask[r * w + c] = true;
        }
        for r in 0..h {
            collect_runs((0..w).map(|c| mask[r * w + c]), &mut runs);
        }
        for c in 0..w {
            collect_runs((0..h).map(|r| mask[r * w + c]), &mut runs);
        }
    }
    Ok(lineal_from_runs(&runs, side, max_k))
}

fn collect_runs(line: impl Iterator<Item = bool>, runs: &mut Vec<usize>) {
    let mut len = 0;
    for b in line {
        if b {
            len += 1;
        } else if len > 0 {
            runs.push(len);
            len = 0;
        }
    }
    if len > 0 {
        runs.push(len);
    }
}

fn lineal_from_runs(runs: &[usize], n: usize, max_k: usize) -> DescriptorCurve {
    let points = (1..=max_k)
        .map(|k| {
            let hits: u64 = runs.iter().filter(|&&r| r >= k).map(|&r| (r + 1 - k) as u64).sum();
            (k, hits as f64 / (2 * n * (n + 1 - k)) as f64)
        })
        .collect();
    DescriptorCurve {
        kind: CurveKind::LinealPath,
        points,
    }
}

/// Window occupancies for every scale, kept current under pixel flips.
///
/// Only windows overlapping the bounding box of the flipped pixels are
/// touched. Single owner; not meant to be shared.
#[derive(Clone, Debug)]
pub struct OccupancyCache {
    side: usize,
    levels: Vec<Level>,
}

#[derive(Clone, Debug)]
struct Level {
    k: usize,
    span: usize,
    occupancy: Vec<u32>,
    histogram: Vec<u64>,
    total: usize,
    table: LnChoose,
}

impl OccupancyCache {
    pub fn new(image: &BinaryImage, scales: &ScaleSet) -> Result<Self> {
        let n = image.side();
        if scales.max() > n {
            return Err(TsrError::ScaleOutOfRange {
                k: scales.max(),
                side: n,
            });
        }
        let prefix = prefix_sums(image);
        let levels = scales
            .scales()
            .iter()
            .map(|&k| {
                let occupancy = occupancies_from_prefix(&prefix, n, k);
                let histogram = occupancy_histogram(&occupancy, k * k).expect("window within k²");
                let total = occupancy.iter().map(|&v| v as usize).sum();
                Level {
                    k,
                    span: n + 1 - k,
                    occupancy,
                    histogram,
                    total,
                    table: LnChoose::new(k * k),
                }
            })
            .collect();
        Ok(Self { side: n, levels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Applies pixel changes: `+1` turns a white pixel black, `-1` the reverse.
    /// The caller guarantees the changes are consistent with the image.
    pub fn apply(&mut self, changes: &[((usize, usize), i32)]) {
        if changes.is_empty() {
            return;
        }
        let r0 = changes.iter().map(|c| c.0 .0).min().unwrap();
        let r1 = changes.iter().map(|c| c.0 .0).max().unwrap();
        let c0 = changes.iter().map(|c| c.0 .1).min().unwrap();
        let c1 = changes.iter().map(|c| c.0 .1).max().unwrap();
        let (h, w) = (r1 - r0 + 1, c1 - c0 + 1);
        let pw = w + 1;
        let mut prefix = vec![0i32; (h + 1) * pw];
        for &((r, c), d) in changes {
            prefix[(r - r0 + 1) * pw + c - c0 + 1] += d;
        }
        for r in 1..=h {
            for c in 1..=w {
                prefix[r * pw + c] +=
                    prefix[(r - 1) * pw + c] + prefix[r * pw + c - 1] - prefix[(r - 1) * pw + c - 1];
            }
        }
        // sum of the delta over bbox-relative rows [a, b) and cols [x, y)
        let rect = |a: usize, b: usize, x: usize, y: usize| -> i32 {
            prefix[b * pw + y] - prefix[a * pw + y] - prefix[b * pw + x] + prefix[a * pw + x]
        };
        for level in &mut self.levels {
            let k = level.k;
            let ar0 = (r0 + 1).saturating_sub(k);
            let ar1 = r1.min(level.span - 1);
            let ac0 = (c0 + 1).saturating_sub(k);
            let ac1 = c1.min(level.span - 1);
            let mut total = level.total as i64;
            for ar in ar0..=ar1 {
                let ra = ar.max(r0) - r0;
                let rb = (ar + k).min(r1 + 1) - r0;
                for ac in ac0..=ac1 {
                    let xa = ac.max(c0) - c0;
                    let xb = (ac + k).min(c1 + 1) - c0;
                    let d = rect(ra, rb, xa, xb);
                    if d != 0 {
                        let slot = &mut level.occupancy[ar * level.span + ac];
                        level.histogram[*slot as usize] -= 1;
                        *slot = (*slot as i32 + d) as u32;
                        level.histogram[*slot as usize] += 1;
                        total += d as i64;
                    }
                }
            }
            level.total = total as usize;
        }
    }

    pub fn profiles(&self) -> Vec<EntropyProfile> {
        self.levels
            .iter()
            .map(|l| EntropyProfile::from_histogram(l.k, &l.histogram, l.total, &l.table))
            .collect()
    }

    pub fn triplets(&self) -> Vec<(usize, [f64; 3])> {
        self.profiles().iter().map(|p| (p.k, p.triplet())).collect()
    }

    /// Occupancies of scale index `i`, for consistency checks.
    pub fn occupancies(&self, i: usize) -> &[u32] {
        &self.levels[i].occupancy
    }
}

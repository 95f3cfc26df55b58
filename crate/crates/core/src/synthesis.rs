//! Stage one: for every target inclusion, grow a random-shape surrogate with
//! the same area and interface.
//!
//! A synthetic cluster starts as a column-filled quasi-rectangle and is then
//! reshaped by swapping a black surface pixel with a white pixel next to the
//! cluster. Both central pixels must see exactly two black/white walls on
//! their Moore ring, which keeps the cluster 4-connected and pore-free.
//! Swaps are scored by the interface mismatch `f1` and the edge-distance
//! histogram mismatch `f2`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, TsrError};
use crate::grid::{ring_walls, ClusterShape, Pixel};
use crate::rng::{self, Purpose};

/// What the synthesizer has to match for one inclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetStats {
    pub area: usize,
    pub interface: usize,
    pub bins: usize,
    pub histogram: Vec<u64>,
    pub max_h: u64,
}

impl TargetStats {
    /// Bin count is twice the floor of the largest edge-pixel distance plus one.
    pub fn from_shape(shape: &ClusterShape) -> Self {
        let edges = shape.edge_pixels();
        let mut max_d2 = 0u64;
        for (i, a) in edges.iter().enumerate() {
            for b in &edges[i + 1..] {
                let dr = a.0.abs_diff(b.0) as u64;
                let dc = a.1.abs_diff(b.1) as u64;
                max_d2 = max_d2.max(dr * dr + dc * dc);
            }
        }
        let bins = 2 * (max_d2.isqrt() as usize + 1);
        let histogram = shape.distance_histogram(bins);
        let max_h = histogram.iter().copied().max().unwrap_or(0);
        Self {
            area: shape.area(),
            interface: shape.interface(),
            bins,
            histogram,
            max_h,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.area == 0 {
            return Err(TsrError::InvalidTarget("area must be ≥ 1".into()));
        }
        if self.interface < 4 || self.interface > 4 * self.area || !self.interface.is_multiple_of(2) {
            return Err(TsrError::InvalidTarget(format!(
                "interface {} impossible for area {}",
                self.interface, self.area
            )));
        }
        if self.histogram.len() != self.bins || self.bins == 0 {
            return Err(TsrError::InvalidTarget("histogram length != bins".into()));
        }
        Ok(())
    }
}

/// Column-filled seed: the smallest `(n+1) × (n+1)` square holding `area`,
/// filled top to bottom, left to right.
pub fn init_quasi_rectangle(area: usize) -> Result<ClusterShape> {
    if area == 0 {
        return Err(TsrError::InvalidTarget("area must be ≥ 1".into()));
    }
    let mut side = 1;
    while side * side < area {
        side += 1;
    }
    ClusterShape::from_pixels((0..area).map(|i| ((i % side) as isize, (i / side) as isize)))
}

/// `(1 − I/I_target)²`.
pub fn f1(interface: usize, target_interface: usize) -> Result<f64> {
    if target_interface == 0 {
        return Err(TsrError::ZeroInterface);
    }
    // from the integer gap so equal gaps on either side give equal values
    let x = interface.abs_diff(target_interface) as f64 / target_interface as f64;
    Ok(x * x)
}

/// Mean squared histogram difference, normalized by the largest target count.
pub fn f2(histogram: &[u64], target: &TargetStats) -> Result<f64> {
    if target.max_h == 0 {
        return Err(TsrError::DegenerateHistogram);
    }
    if histogram.len() != target.bins {
        return Err(TsrError::InvalidParameter(format!(
            "histogram has {} bins, target {}",
            histogram.len(),
            target.bins
        )));
    }
    Ok(sum_sq_diff(histogram, &target.histogram) as f64 / norm_f2(target))
}

fn norm_f2(target: &TargetStats) -> f64 {
    target.bins as f64 * (target.max_h as f64).powi(2)
}

fn sum_sq_diff(h: &[u64], t: &[u64]) -> i64 {
    h.iter()
        .zip(t)
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            d * d
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthesisOptions {
    /// Attempts budget is `budget_factor × Q_max`.
    pub budget_factor: usize,
    /// `Q_max = q_factor × surface pixels`.
    pub q_factor: usize,
    /// Central-pixel draws per selection, times the surface-pixel count.
    pub selection_factor: usize,
    /// Extra runs allowed when the interface is still off at budget expiry.
    pub max_restarts: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            budget_factor: 3000,
            q_factor: 3,
            selection_factor: 64,
            max_restarts: 5,
        }
    }
}

/// Result of one proposed pixel swap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SwapProposal {
    Candidate(ClusterShape),
    /// No admissible central pixel within the draw bound.
    SelectionExhausted,
}

/// Draws one admissible (black, white) central pair and returns the swapped
/// shape. The cluster is considered alone on a blank canvas.
pub fn propose_swap<R: Rng>(
    shape: &ClusterShape,
    rng: &mut R,
    selection_factor: usize,
) -> Result<SwapProposal> {
    if shape.area() < 2 {
        return Err(TsrError::AreaTooSmall(shape.area()));
    }
    let mut canvas = Canvas::new(shape, None);
    Ok(match canvas.select_pair(rng, selection_factor) {
        Some((black, white)) => {
            canvas.flip(black);
            canvas.flip(white);
            SwapProposal::Candidate(canvas.to_shape())
        }
        None => SwapProposal::SelectionExhausted,
    })
}

/// Everything a finished synthesis run produced.
#[derive(Clone, Debug)]
pub struct SynthesisOutcome {
    pub shape: ClusterShape,
    pub f1: f64,
    pub f2: f64,
    /// `f1` after the seed shape and after every accepted swap.
    pub f1_trace: Vec<f64>,
    pub attempts: usize,
    pub accepted: usize,
    pub restarts: usize,
}

/// One synthesis run from the quasi-rectangle seed until the attempt budget
/// is spent. The interface may still differ from the target.
pub fn synthesize_once<R: Rng>(
    target: &TargetStats,
    rng: &mut R,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome> {
    target.validate()?;
    let seed = init_quasi_rectangle(target.area)?;
    if target.area <= 2 {
        let f1v = f1(seed.interface(), target.interface)?;
        let f2v = if target.max_h == 0 {
            0.0
        } else {
            f2(&seed.distance_histogram(target.bins), target)?
        };
        return Ok(SynthesisOutcome {
            shape: seed,
            f1: f1v,
            f2: f2v,
            f1_trace: vec![f1v],
            attempts: 0,
            accepted: 0,
            restarts: 0,
        });
    }

    let mut canvas = Canvas::new(&seed, Some(target));
    let mut f1_trace = vec![f1(canvas.interface, target.interface)?];
    let mut q = 0usize;
    let mut attempts = 0usize;
    let mut accepted = 0usize;
    let mut q_max = opts.q_factor * canvas.edges.len();
    while attempts <= opts.budget_factor * q_max {
        attempts += 1;
        let Some((black, white)) = canvas.select_pair(rng, opts.selection_factor) else {
            q += 1;
            continue;
        };
        let old_gap = canvas.interface.abs_diff(target.interface);
        let new_interface = canvas.interface_after_swap(black, white);
        if new_interface.abs_diff(target.interface) > old_gap {
            q += 1;
            continue;
        }
        let old_sq = canvas.sum_sq;
        canvas.flip(black);
        canvas.flip(white);
        if canvas.sum_sq <= old_sq || q > q_max {
            q = 0;
            accepted += 1;
            f1_trace.push(f1(canvas.interface, target.interface)?);
            canvas.regrow_if_needed();
            q_max = opts.q_factor * canvas.edges.len();
        } else {
            canvas.flip(white);
            canvas.flip(black);
            q += 1;
        }
    }
    Ok(SynthesisOutcome {
        f1: f1(canvas.interface, target.interface)?,
        f2: canvas.sum_sq as f64 / norm_f2(target),
        shape: canvas.to_shape(),
        f1_trace,
        attempts,
        accepted,
        restarts: 0,
    })
}

/// Runs synthesis for library member `index`, restarting on a fresh stream
/// while the interface is unmatched.
pub fn synthesize_cluster(
    target: &TargetStats,
    master_seed: u64,
    index: usize,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome> {
    let mut last = None;
    for attempt in 0..=opts.max_restarts {
        let mut rng = rng::stream(master_seed, Purpose::Library, index as u64, attempt as u64);
        let mut out = synthesize_once(target, &mut rng, opts)?;
        out.restarts = attempt;
        if out.shape.interface() == target.interface {
            return Ok(out);
        }
        last = Some(out.shape.interface());
    }
    Err(TsrError::SynthesisFailed {
        index,
        interface: last.unwrap_or(0),
        target: target.interface,
    })
}

/// One surrogate per target, in order. Members are independent and run in
/// parallel on per-index streams, so the result does not depend on scheduling.
pub fn synthesize_library(
    targets: &[TargetStats],
    master_seed: u64,
    opts: &SynthesisOptions,
) -> Result<Vec<SynthesisOutcome>> {
    if targets.is_empty() {
        return Err(TsrError::InvalidTarget("no target clusters".into()));
    }
    targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| synthesize_cluster(t, master_seed, i, opts))
        .collect()
}

/// Mean shape index.
pub fn mean_shape_index(shapes: &[ClusterShape]) -> f64 {
    if shapes.is_empty() {
        return 0.0;
    }
    shapes.iter().map(|s| s.shape_index()).sum::<f64>() / shapes.len() as f64
}

/// Checks that every surrogate has its target's area and interface.
pub fn audit_library(targets: &[ClusterShape], library: &[ClusterShape]) -> Result<()> {
    if targets.len() != library.len() {
        return Err(TsrError::Library(format!(
            "{} clusters in library, {} in target",
            library.len(),
            targets.len()
        )));
    }
    for (i, (t, s)) in targets.iter().zip(library).enumerate() {
        if t.area() != s.area() || t.interface() != s.interface() {
            return Err(TsrError::Library(format!(
                "cluster {i}: area/interface {}/{} vs target {}/{}",
                s.area(),
                s.interface(),
                t.area(),
                t.interface()
            )));
        }
    }
    Ok(())
}

/// Text form: a seed comment, then per cluster a
/// `cluster <i> area <A> interface <I>` header and `row,col` lines, with
/// clusters separated by blank lines.
pub fn format_library(shapes: &[ClusterShape], seed: u64) -> String {
    let mut out = format!("# tsr library seed {seed}\n");
    for (i, s) in shapes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "cluster {i} area {} interface {}", s.area(), s.interface()).unwrap();
        for &(r, c) in s.offsets() {
            writeln!(out, "{r},{c}").unwrap();
        }
    }
    out
}

/// Parsed library file: the recorded seed, shapes, and optional anchors.
#[derive(Clone, Debug, Default)]
pub struct LibraryFile {
    pub seed: Option<u64>,
    pub shapes: Vec<ClusterShape>,
    pub anchors: Vec<Option<Pixel>>,
}

/// Reads the library format; headers may carry a trailing `anchor <r> <c>`.
pub fn parse_library(text: &str) -> Result<LibraryFile> {
    let mut file = LibraryFile::default();
    // area, interface, anchor, offsets of the cluster being read
    type Pending = (usize, usize, Option<Pixel>, Vec<(isize, isize)>);
    let mut current: Option<Pending> = None;

    fn finish(
        file: &mut LibraryFile,
        cur: Option<Pending>,
    ) -> Result<()> {
        if let Some((area, interface, anchor, pixels)) = cur {
            let idx = file.shapes.len();
            let shape = ClusterShape::from_pixels(pixels)
                .map_err(|e| TsrError::Library(format!("cluster {idx}: {e}")))?;
            if shape.area() != area || shape.interface() != interface {
                return Err(TsrError::Library(format!(
                    "cluster {idx}: header says area {area} interface {interface}, offsets give {} {}",
                    shape.area(),
                    shape.interface()
                )));
            }
            file.shapes.push(shape);
            file.anchors.push(anchor);
        }
        Ok(())
    }

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let bad = |what: &str| TsrError::Library(format!("line {}: {what}", lineno + 1));
        if let Some(rest) = line.strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if let ["tsr", "library", "seed", s] = words.as_slice() {
                file.seed = s.parse().ok();
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if line.starts_with("cluster") {
            finish(&mut file, current.take())?;
            let w: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<usize> {
                w.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("malformed cluster header"))
            };
            if w.len() < 6 || w[2] != "area" || w[4] != "interface" {
                return Err(bad("malformed cluster header"));
            }
            if num(1)? != file.shapes.len() {
                return Err(bad("cluster index out of sequence"));
            }
            let anchor = match w.len() {
                6 => None,
                9 if w[6] == "anchor" => Some((num(7)?, num(8)?)),
                _ => return Err(bad("malformed cluster header")),
            };
            current = Some((num(3)?, num(5)?, anchor, Vec::new()));
            continue;
        }
        let Some(cur) = current.as_mut() else {
            return Err(bad("offset before any cluster header"));
        };
        let (r, c) = line.split_once(',').ok_or_else(|| bad("expected row,col"))?;
        let r: isize = r.trim().parse().map_err(|_| bad("bad row"))?;
        let c: isize = c.trim().parse().map_err(|_| bad("bad col"))?;
        if r < 0 || c < 0 {
            return Err(bad("negative offset"));
        }
        cur.3.push((r, c));
    }
    finish(&mut file, current)?;
    Ok(file)
}

/// Swap-friendly representation of one cluster on a padded square canvas.
///
/// Keeps the surface (edge) pixels and the white shell as indexable sets,
/// the interface, and, when a target is attached, the edge-distance
/// histogram together with its squared distance to the target histogram.
struct Canvas<'t> {
    side: usize,
    black: Vec<bool>,
    black_nbrs: Vec<u8>,
    edges: IndexSet,
    shell: IndexSet,
    interface: usize,
    target: Option<&'t TargetStats>,
    hist: Vec<u64>,
    sum_sq: i64,
    /// distance bin by `dr * side + dc`
    bin_of: Vec<u32>,
}

const MARGIN: usize = 2;

impl<'t> Canvas<'t> {
    fn new(shape: &ClusterShape, target: Option<&'t TargetStats>) -> Self {
        let extent = shape.height().max(shape.width());
        let side = 2 * extent + 2 + 2 * MARGIN;
        let top = (side - shape.height()) / 2;
        let left = (side - shape.width()) / 2;
        let mut canvas = Canvas {
            side,
            black: vec![false; side * side],
            black_nbrs: vec![0; side * side],
            edges: IndexSet::new(side * side),
            shell: IndexSet::new(side * side),
            interface: 0,
            target,
            hist: vec![0; target.map_or(0, |t| t.bins)],
            sum_sq: target.map_or(0, |t| t.histogram.iter().map(|&v| (v * v) as i64).sum()),
            bin_of: Vec::new(),
        };
        if let Some(t) = target {
            canvas.bin_of = (0..side * side)
                .map(|i| {
                    let (dr, dc) = ((i / side) as u64, (i % side) as u64);
                    ((dr * dr + dc * dc).isqrt() as usize).min(t.bins - 1) as u32
                })
                .collect();
        }
        for &(r, c) in shape.offsets() {
            canvas.flip((top + r) * side + left + c);
        }
        canvas
    }

    fn to_shape(&self) -> ClusterShape {
        let side = self.side;
        ClusterShape::from_pixels(
            (0..side * side)
                .filter(|&i| self.black[i])
                .map(|i| ((i / side) as isize, (i % side) as isize)),
        )
        .expect("swaps keep the cluster connected")
    }

    /// Rebuilds on a larger canvas once a black pixel nears the border.
    fn regrow_if_needed(&mut self) {
        let side = self.side;
        let near = self.edges.items.iter().any(|&i| {
            let (r, c) = (i as usize / side, i as usize % side);
            r < MARGIN || c < MARGIN || r >= side - MARGIN || c >= side - MARGIN
        });
        if near {
            let shape = self.to_shape();
            *self = Canvas::new(&shape, self.target);
        }
    }

    fn neighbors(&self, i: usize) -> [usize; 4] {
        [i - self.side, i + 1, i + self.side, i - 1]
    }

    fn is_edge(&self, i: usize) -> bool {
        self.black[i] && self.black_nbrs[i] < 4
    }

    fn walls(&self, i: usize) -> usize {
        let side = self.side as isize;
        let i = i as isize;
        ring_walls(|dr, dc| self.black[(i + dr * side + dc) as usize])
    }

    /// Toggles one pixel and updates every derived quantity.
    fn flip(&mut self, i: usize) {
        let nbrs = self.neighbors(i);
        let touched = [i, nbrs[0], nbrs[1], nbrs[2], nbrs[3]];
        let before = touched.map(|j| self.is_edge(j));

        let now_black = !self.black[i];
        self.black[i] = now_black;
        let b = self.black_nbrs[i] as usize;
        if now_black {
            self.interface = self.interface + 4 - 2 * b;
        } else {
            self.interface = self.interface + 2 * b - 4;
        }
        for &j in &nbrs {
            if now_black {
                self.black_nbrs[j] += 1;
            } else {
                self.black_nbrs[j] -= 1;
            }
        }

        for (slot, &j) in touched.iter().enumerate() {
            let after = self.is_edge(j);
            if after != before[slot] {
                if after {
                    self.add_edge(j);
                } else {
                    self.remove_edge(j);
                }
            }
            let in_shell = !self.black[j] && self.black_nbrs[j] > 0;
            if in_shell {
                self.shell.insert(j);
            } else {
                self.shell.remove(j);
            }
        }
    }

    /// Adds or removes the histogram contributions of edge pixel `i`
    /// against every current edge pixel, plus its self-count in bin 0.
    fn account_pairs(&mut self, i: usize, up: bool) {
        let Some(t) = self.target else { return };
        let side = self.side;
        let (r, c) = (i / side, i % side);
        let hist = &mut self.hist;
        let sum_sq = &mut self.sum_sq;
        let mut bump = |bin: usize| {
            let old = hist[bin] as i64 - t.histogram[bin] as i64;
            if up {
                hist[bin] += 1;
            } else {
                hist[bin] -= 1;
            }
            let new = hist[bin] as i64 - t.histogram[bin] as i64;
            *sum_sq += new * new - old * old;
        };
        for &j in &self.edges.items {
            let (jr, jc) = (j as usize / side, j as usize % side);
            bump(self.bin_of[r.abs_diff(jr) * side + c.abs_diff(jc)] as usize);
        }
        bump(0);
    }

    fn add_edge(&mut self, i: usize) {
        self.account_pairs(i, true);
        self.edges.insert(i);
    }

    fn remove_edge(&mut self, i: usize) {
        self.edges.remove(i);
        self.account_pairs(i, false);
    }

    /// Interface after removing `black` and adding `white`, without mutating.
    fn interface_after_swap(&self, black: usize, white: usize) -> usize {
        let b = self.black_nbrs[black] as usize;
        let adjacent = self.neighbors(white).contains(&black);
        let b_white = self.black_nbrs[white] as usize - adjacent as usize;
        self.interface + 2 * b + 4 - 4 - 2 * b_white
    }

    /// Picks a black surface pixel and then a white shell pixel, each with
    /// exactly two ring walls; the white one is judged with the black one
    /// already removed and must share a side with the remaining cluster.
    fn select_pair<R: Rng>(&mut self, rng: &mut R, factor: usize) -> Option<(usize, usize)> {
        let tries = factor * self.edges.len().max(1);
        let black = (0..tries).find_map(|_| {
            let i = self.edges.items[rng.gen_range(0..self.edges.len())] as usize;
            (self.walls(i) == 2).then_some(i)
        })?;
        self.black[black] = false;
        let white = (0..tries).find_map(|_| {
            let i = self.shell.items[rng.gen_range(0..self.shell.len())] as usize;
            let joined = self.neighbors(i).iter().any(|&j| self.black[j]);
            (i != black && joined && self.walls(i) == 2).then_some(i)
        });
        self.black[black] = true;
        white.map(|w| (black, w))
    }
}

/// Vec-backed set of cell indices with O(1) insert/remove/sample.
struct IndexSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

impl IndexSet {
    const NONE: u32 = u32::MAX;

    fn new(capacity: usize) -> Self {
        Self {
            items: Vec::new(),
            slot: vec![Self::NONE; capacity],
        }
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn insert(&mut self, i: usize) {
        if self.slot[i] == Self::NONE {
            self.slot[i] = self.items.len() as u32;
            self.items.push(i as u32);
        }
    }

    fn remove(&mut self, i: usize) {
        let s = self.slot[i];
        if s == Self::NONE {
            return;
        }
        let last = *self.items.last().unwrap();
        self.items.swap_remove(s as usize);
        if last as usize != i {
            self.slot[last as usize] = s;
        }
        self.slot[i] = Self::NONE;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(px: &[(isize, isize)]) -> ClusterShape {
        ClusterShape::from_pixels(px.iter().copied()).unwrap()
    }

    #[test]
    fn quasi_rectangle_examples() {
        assert_eq!(init_quasi_rectangle(1).unwrap().offsets(), &[(0, 0)]);
        assert_eq!(
            init_quasi_rectangle(9).unwrap(),
            ClusterShape::rectangle(3, 3).unwrap()
        );
        assert_eq!(
            init_quasi_rectangle(5).unwrap(),
            shape(&[(0, 0), (1, 0), (2, 0), (0, 1), (1, 1)])
        );
        assert!(init_quasi_rectangle(0).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(10, 10).unwrap(), 0.0);
        assert_eq!(f1(20, 10).unwrap(), 1.0);
        assert!((f1(76, 95).unwrap() - 0.04).abs() < 1e-15);
        assert!(f1(3, 0).is_err());
    }

    #[test]
    fn f2_examples() {
        let t = TargetStats {
            area: 4,
            interface: 8,
            bins: 2,
            histogram: vec![4, 6],
            max_h: 6,
        };
        assert_eq!(f2(&[4, 6], &t).unwrap(), 0.0);
        assert_eq!(f2(&[4, 0], &t).unwrap(), 0.5);
        assert_eq!(f2(&[0, 0], &t).unwrap(), (16.0 + 36.0) / 2.0 / 36.0);
        let zero = TargetStats { max_h: 0, ..t };
        assert!(matches!(f2(&[0, 0], &zero), Err(TsrError::DegenerateHistogram)));
    }

    #[test]
    fn target_stats_bins() {
        let t = TargetStats::from_shape(&ClusterShape::rectangle(2, 2).unwrap());
        // max edge distance √2 → floor 1 → N = 4
        assert_eq!(t.bins, 4);
        assert_eq!(t.histogram, vec![4, 6, 0, 0]);
        assert_eq!(t.max_h, 6);
    }

    #[test]
    fn domino_swaps_stay_connected() {
        let domino = shape(&[(0, 0), (0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            match propose_swap(&domino, &mut rng, 64).unwrap() {
                SwapProposal::Candidate(s) => {
                    assert_eq!(s.area(), 2);
                    assert_eq!(s.interface(), 6);
                }
                SwapProposal::SelectionExhausted => panic!("domino always has a swap"),
            }
        }
    }

    #[test]
    fn unit_pixel_cannot_swap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            propose_swap(&shape(&[(0, 0)]), &mut rng, 64),
            Err(TsrError::AreaTooSmall(1))
        ));
    }

    #[test]
    fn bar_middle_never_removed() {
        let bar = shape(&[(0, 0), (0, 1), (0, 2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            if let SwapProposal::Candidate(s) = propose_swap(&bar, &mut rng, 64).unwrap() {
                assert_eq!(s.area(), 3);
                assert_eq!(s.pore_count(), 0);
            }
        }
    }

    #[test]
    fn square_corner_selectable_center_not() {
        let sq = ClusterShape::rectangle(3, 3).unwrap();
        let canvas = Canvas::new(&sq, None);
        let s = canvas.side;
        let center = (0..s * s).find(|&i| canvas.black[i] && canvas.black_nbrs[i] == 4).unwrap();
        assert!(!canvas.edges.items.contains(&(center as u32)));
        let corner = (0..s * s).find(|&i| canvas.black[i] && canvas.black_nbrs[i] == 2).unwrap();
        assert_eq!(canvas.walls(corner), 2);
    }

    #[test]
    fn canvas_bookkeeping_matches_recompute() {
        let start = init_quasi_rectangle(30).unwrap();
        let target = TargetStats::from_shape(&shape(
            &(0..15).map(|c| (0, c)).chain((0..15).map(|c| (1, c))).collect::<Vec<_>>(),
        ));
        let mut canvas = Canvas::new(&start, Some(&target));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            if let Some((b, w)) = canvas.select_pair(&mut rng, 64) {
                let predicted = canvas.interface_after_swap(b, w);
                canvas.flip(b);
                canvas.flip(w);
                assert_eq!(canvas.interface, predicted);
                canvas.regrow_if_needed();
            }
            let s = canvas.to_shape();
            assert_eq!(s.area(), 30);
            assert_eq!(s.interface(), canvas.interface);
            assert_eq!(s.pore_count(), 0);
            assert_eq!(s.edge_pixels().len(), canvas.edges.len());
            assert_eq!(s.distance_histogram(target.bins), canvas.hist);
            assert_eq!(sum_sq_diff(&canvas.hist, &target.histogram), canvas.sum_sq);
        }
    }

    #[test]
    fn square_target_matches_interface() {
        let target = TargetStats::from_shape(&ClusterShape::rectangle(4, 4).unwrap());
        let out = synthesize_cluster(&target, 1, 0, &SynthesisOptions::default()).unwrap();
        assert_eq!(out.shape.area(), 16);
        assert_eq!(out.shape.interface(), 16);
    }

    #[test]
    fn elongated_target_reached_and_f1_monotone() {
        let target = TargetStats::from_shape(&shape(
            &(0..12).map(|c| (0, c)).chain([(1, 0), (2, 0), (1, 11)]).collect::<Vec<_>>(),
        ));
        let out = synthesize_cluster(&target, 9, 0, &SynthesisOptions::default()).unwrap();
        assert_eq!(out.shape.interface(), target.interface);
        assert_eq!(out.shape.area(), target.area);
        assert_eq!(out.shape.pore_count(), 0);
        assert!(out.f1_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn unit_and_domino_bypass() {
        let opts = SynthesisOptions::default();
        let t1 = TargetStats::from_shape(&shape(&[(0, 0)]));
        let out = synthesize_cluster(&t1, 0, 0, &opts).unwrap();
        assert_eq!(out.shape.area(), 1);
        assert_eq!((out.f1, out.f2, out.attempts), (0.0, 0.0, 0));
        let t2 = TargetStats::from_shape(&shape(&[(0, 0), (1, 0)]));
        assert_eq!(synthesize_cluster(&t2, 0, 0, &opts).unwrap().shape.interface(), 6);
    }

    #[test]
    fn library_of_unit_pixel() {
        let t = TargetStats::from_shape(&shape(&[(0, 0)]));
        let lib = synthesize_library(&[t], 4, &SynthesisOptions::default()).unwrap();
        let shapes: Vec<_> = lib.into_iter().map(|o| o.shape).collect();
        assert_eq!(mean_shape_index(&shapes), 0.25);
        assert!(synthesize_library(&[], 4, &SynthesisOptions::default()).is_err());
    }

    #[test]
    fn library_text_roundtrip() {
        let shapes = vec![
            ClusterShape::rectangle(2, 3).unwrap(),
            shape(&[(0, 1), (1, 0), (1, 1)]),
        ];
        let text = format_library(&shapes, 42);
        assert!(text.starts_with("# tsr library seed 42\ncluster 0 area 6 interface 10\n0,0\n"));
        let parsed = parse_library(&text).unwrap();
        assert_eq!(parsed.seed, Some(42));
        assert_eq!(parsed.shapes, shapes);
        assert!(parse_library("cluster 0 area 2 interface 6\n0,0\n").is_err());
        assert!(parse_library("0,0\n").is_err());
    }

    #[test]
    fn audit_detects_mismatch() {
        let a = vec![ClusterShape::rectangle(2, 2).unwrap()];
        let b = vec![ClusterShape::rectangle(1, 4).unwrap()];
        assert!(audit_library(&a, &a).is_ok());
        assert!(audit_library(&a, &b).is_err());
        assert!(audit_library(&a, &[]).is_err());
    }
}

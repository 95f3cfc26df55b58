//! Stage two: place the synthetic clusters in the domain and optimize their
//! positions by Metropolis simulated annealing with whole-cluster moves.
//!
//! Clusters never overlap or touch, not even diagonally, so every move keeps
//! the set of extracted components equal to the library.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::descriptors::{ed_triplet, DescriptorCurve, OccupancyCache, ScaleSet};
use crate::error::{Result, TsrError};
use crate::grid::{BinaryImage, ClusterShape, Pixel};
use crate::rng::{self, Purpose};

/// Anchor draws per cluster before random placement gives up.
pub const PLACEMENT_TRIES: usize = 20_000;

/// Clusters placed in a square domain.
#[derive(Clone, Debug)]
pub struct Configuration {
    side: usize,
    shapes: Vec<ClusterShape>,
    anchors: Vec<Pixel>,
    /// cluster index + 1 per pixel, 0 for matrix
    owner: Vec<u32>,
    image: BinaryImage,
}

impl Configuration {
    /// Validates and builds a configuration from explicit anchors.
    pub fn from_placements(side: usize, shapes: Vec<ClusterShape>, anchors: Vec<Pixel>) -> Result<Self> {
        if shapes.len() != anchors.len() {
            return Err(TsrError::InvalidParameter(format!(
                "{} shapes but {} anchors",
                shapes.len(),
                anchors.len()
            )));
        }
        let mut config = Self::empty(side, shapes)?;
        for (i, &a) in anchors.iter().enumerate() {
            if !config.fits(i, a.0 as isize, a.1 as isize) {
                return Err(TsrError::PackingFailure { cluster: i });
            }
            config.place(i, a);
        }
        Ok(config)
    }

    fn empty(side: usize, shapes: Vec<ClusterShape>) -> Result<Self> {
        let image = BinaryImage::new(side)?;
        Ok(Self {
            side,
            anchors: vec![(usize::MAX, usize::MAX); shapes.len()],
            shapes,
            owner: vec![0; side * side],
            image,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn shapes(&self) -> &[ClusterShape] {
        &self.shapes
    }

    pub fn anchors(&self) -> &[Pixel] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Occupancy image, the union of the placed shapes.
    pub fn image(&self) -> &BinaryImage {
        &self.image
    }

    /// Whether cluster `i` could sit at `(row, col)`: inside the domain and
    /// 8-separated from every other cluster.
    pub fn fits(&self, i: usize, row: isize, col: isize) -> bool {
        let shape = &self.shapes[i];
        let n = self.side as isize;
        if row < 0 || col < 0 || row + shape.height() as isize > n || col + shape.width() as isize > n {
            return false;
        }
        let me = i as u32 + 1;
        for &(r, c) in shape.offsets() {
            let (pr, pc) = (row + r as isize, col + c as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (qr, qc) = (pr + dr, pc + dc);
                    if qr < 0 || qc < 0 || qr >= n || qc >= n {
                        continue;
                    }
                    let o = self.owner[qr as usize * self.side + qc as usize];
                    if o != 0 && o != me {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn place(&mut self, i: usize, anchor: Pixel) {
        self.anchors[i] = anchor;
        for &(r, c) in self.shapes[i].offsets() {
            let (pr, pc) = (anchor.0 + r, anchor.1 + c);
            self.owner[pr * self.side + pc] = i as u32 + 1;
            self.image.set(pr, pc, true);
        }
    }

    fn lift(&mut self, i: usize) {
        let anchor = self.anchors[i];
        for &(r, c) in self.shapes[i].offsets() {
            let (pr, pc) = (anchor.0 + r, anchor.1 + c);
            self.owner[pr * self.side + pc] = 0;
            self.image.set(pr, pc, false);
        }
    }

    /// Moves cluster `i` to `anchor` and returns the pixel changes
    /// (`-1` vacated, `+1` filled). The caller checks feasibility.
    pub fn relocate(&mut self, i: usize, anchor: Pixel) -> Vec<(Pixel, i32)> {
        let old = self.anchors[i];
        let mut changes: Vec<(Pixel, i32)> = self.shapes[i]
            .offsets()
            .iter()
            .flat_map(|&(r, c)| [((old.0 + r, old.1 + c), -1), ((anchor.0 + r, anchor.1 + c), 1)])
            .collect();
        changes.sort_unstable();
        let mut merged: Vec<(Pixel, i32)> = Vec::with_capacity(changes.len());
        for (p, d) in changes {
            match merged.last_mut() {
                Some(last) if last.0 == p => last.1 += d,
                _ => merged.push((p, d)),
            }
        }
        merged.retain(|c| c.1 != 0);
        self.lift(i);
        self.place(i, anchor);
        merged
    }

    /// Full invariant check: containment, 8-separation, occupancy consistency.
    pub fn check(&self) -> Result<()> {
        let mut rebuilt = Self::empty(self.side, self.shapes.clone())?;
        for (i, &a) in self.anchors.iter().enumerate() {
            if !rebuilt.fits(i, a.0 as isize, a.1 as isize) {
                return Err(TsrError::PackingFailure { cluster: i });
            }
            rebuilt.place(i, a);
        }
        if rebuilt.image != self.image || rebuilt.owner != self.owner {
            return Err(TsrError::InvalidParameter("occupancy grid out of sync".into()));
        }
        Ok(())
    }

    /// Library text with an `anchor r c` suffix on each cluster header.
    pub fn to_text(&self, seed: u64) -> String {
        let mut out = format!("# tsr configuration seed {seed} side {}\n", self.side);
        for (i, (s, a)) in self.shapes.iter().zip(&self.anchors).enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(
                out,
                "cluster {i} area {} interface {} anchor {} {}",
                s.area(),
                s.interface(),
                a.0,
                a.1
            )
            .unwrap();
            for &(r, c) in s.offsets() {
                writeln!(out, "{r},{c}").unwrap();
            }
        }
        out
    }
}

/// Places clusters one at a time at uniformly random anchors, redrawing
/// anchors that break containment or separation. Larger clusters go first.
pub fn random_configuration<R: Rng>(
    shapes: &[ClusterShape],
    side: usize,
    rng: &mut R,
) -> Result<Configuration> {
    let mut config = Configuration::empty(side, shapes.to_vec())?;
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(shapes[i].area()));
    for i in order {
        let s = &shapes[i];
        if s.height() > side || s.width() > side {
            return Err(TsrError::PackingFailure { cluster: i });
        }
        let (rows, cols) = (side - s.height() + 1, side - s.width() + 1);
        let anchor = (0..PLACEMENT_TRIES).find_map(|_| {
            let a = (rng.gen_range(0..rows), rng.gen_range(0..cols));
            config.fits(i, a.0 as isize, a.1 as isize).then_some(a)
        });
        match anchor {
            Some(a) => config.place(i, a),
            None => return Err(TsrError::PackingFailure { cluster: i }),
        }
    }
    Ok(config)
}

/// Target descriptor curves and their normalizers for the cost function.
#[derive(Clone, Debug)]
pub struct CostContext {
    side: usize,
    scales: ScaleSet,
    target: [DescriptorCurve; 3],
    normalizers: [f64; 3],
}

impl CostContext {
    pub fn new(target: &BinaryImage, scales: ScaleSet) -> Result<Self> {
        let black = target.black_count();
        if black == 0 || black == target.side() * target.side() {
            return Err(TsrError::InvalidTarget("target has a single phase".into()));
        }
        let curves = ed_triplet(target, &scales)?;
        let normalizers = [0, 1, 2].map(|a| curves[a].max_value());
        Ok(Self {
            side: target.side(),
            scales,
            target: curves,
            normalizers,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn scales(&self) -> &ScaleSet {
        &self.scales
    }

    pub fn target_curves(&self) -> &[DescriptorCurve; 3] {
        &self.target
    }

    /// Mean squared normalized difference over scales and the curves whose
    /// target maximum is non-zero.
    pub fn energy_from_triplets(&self, values: &[(usize, [f64; 3])]) -> f64 {
        let mut sum = 0.0;
        let mut curves = 0;
        for a in 0..3 {
            let norm = self.normalizers[a];
            if norm <= 0.0 {
                continue;
            }
            curves += 1;
            for (i, &(_, v)) in values.iter().enumerate() {
                let d = (v[a] - self.target[a].points[i].1) / norm;
                sum += d * d;
            }
        }
        if curves == 0 {
            return 0.0;
        }
        sum / (curves * values.len()) as f64
    }

    pub fn energy_of_image(&self, image: &BinaryImage) -> Result<f64> {
        if image.side() != self.side {
            return Err(TsrError::ScaleMismatch);
        }
        let curves = ed_triplet(image, &self.scales)?;
        let values: Vec<(usize, [f64; 3])> = (0..self.scales.len())
            .map(|i| {
                (
                    curves[0].points[i].0,
                    [curves[0].points[i].1, curves[1].points[i].1, curves[2].points[i].1],
                )
            })
            .collect();
        Ok(self.energy_from_triplets(&values))
    }
}

/// Cost of `config` against the target, computed from scratch.
pub fn energy(config: &Configuration, ctx: &CostContext) -> Result<f64> {
    if config.side() != ctx.side {
        return Err(TsrError::ScaleMismatch);
    }
    ctx.energy_of_image(config.image())
}

/// Best of `m` random starts by energy; ties go to the earliest. Candidate
/// `j` uses its own stream, so the result does not depend on scheduling.
/// Returns the chosen configuration and every candidate's energy.
pub fn select_initial(
    shapes: &[ClusterShape],
    side: usize,
    m: usize,
    ctx: &CostContext,
    master_seed: u64,
) -> Result<(Configuration, Vec<f64>)> {
    if m == 0 {
        return Err(TsrError::InvalidParameter("M must be ≥ 1".into()));
    }
    let candidates: Vec<(Configuration, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut last = None;
            for attempt in 0..3 {
                let mut rng = rng::stream(master_seed, Purpose::Start, j as u64, attempt);
                match random_configuration(shapes, side, &mut rng) {
                    Ok(c) => {
                        let e = energy(&c, ctx)?;
                        return Ok((c, e));
                    }
                    Err(e) => last = Some(e),
                }
            }
            Err(last.unwrap())
        })
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    let mut best = 0;
    for (j, &e) in energies.iter().enumerate() {
        if e < energies[best] {
            best = j;
        }
    }
    let chosen = candidates.into_iter().nth(best).unwrap().0;
    Ok((chosen, energies))
}

/// A proposed whole-cluster translation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveProposal {
    pub cluster: usize,
    pub displacement: (isize, isize),
    pub feasible: bool,
}

impl MoveProposal {
    fn target_anchor(&self, config: &Configuration) -> (isize, isize) {
        let a = config.anchors[self.cluster];
        (a.0 as isize + self.displacement.0, a.1 as isize + self.displacement.1)
    }
}

/// Uniform cluster, uniform non-zero displacement in `[-max_step, max_step]²`.
pub fn propose_move<R: Rng>(config: &Configuration, rng: &mut R, max_step: usize) -> Result<MoveProposal> {
    if config.is_empty() {
        return Err(TsrError::InvalidParameter("empty configuration".into()));
    }
    if max_step == 0 {
        return Err(TsrError::InvalidParameter("max_step must be ≥ 1".into()));
    }
    let cluster = rng.gen_range(0..config.len());
    let s = max_step as isize;
    let displacement = loop {
        let d = (rng.gen_range(-s..=s), rng.gen_range(-s..=s));
        if d != (0, 0) {
            break d;
        }
    };
    let mut mv = MoveProposal {
        cluster,
        displacement,
        feasible: false,
    };
    let (r, c) = mv.target_anchor(config);
    mv.feasible = config.fits(cluster, r, c);
    Ok(mv)
}

/// Metropolis rule: accept with probability `min(1, exp(−ΔE/T))`.
pub fn metropolis_accept<R: Rng>(delta_e: f64, temperature: f64, rng: &mut R) -> Result<bool> {
    if temperature <= 0.0 || temperature.is_nan() {
        return Err(TsrError::NonPositiveTemperature(temperature));
    }
    if delta_e <= 0.0 {
        return Ok(true);
    }
    Ok(rng.gen::<f64>() < (-delta_e / temperature).exp())
}

/// Configuration plus incrementally maintained descriptors and energy.
#[derive(Clone, Debug)]
pub struct Annealer<'c> {
    config: Configuration,
    cache: OccupancyCache,
    ctx: &'c CostContext,
    energy: f64,
}

/// What one Metropolis step did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    pub delta_e: f64,
}

impl<'c> Annealer<'c> {
    pub fn new(config: Configuration, ctx: &'c CostContext) -> Result<Self> {
        if config.side() != ctx.side {
            return Err(TsrError::ScaleMismatch);
        }
        let cache = OccupancyCache::new(config.image(), ctx.scales())?;
        let energy = ctx.energy_from_triplets(&cache.triplets());
        Ok(Self {
            config,
            cache,
            ctx,
            energy,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    fn shift(&mut self, cluster: usize, anchor: Pixel) {
        let changes = self.config.relocate(cluster, anchor);
        self.cache.apply(&changes);
    }

    /// Evaluates a feasible move and keeps it with the Metropolis probability.
    /// A rejected move leaves the state exactly as it was.
    pub fn metropolis_step<R: Rng>(&mut self, mv: &MoveProposal, temperature: f64, rng: &mut R) -> Result<StepOutcome> {
        if temperature <= 0.0 || temperature.is_nan() {
            return Err(TsrError::NonPositiveTemperature(temperature));
        }
        if !mv.feasible {
            return Err(TsrError::InvalidParameter("move is not feasible".into()));
        }
        let old_anchor = self.config.anchors[mv.cluster];
        let (r, c) = mv.target_anchor(&self.config);
        self.shift(mv.cluster, (r as usize, c as usize));
        let new_energy = self.ctx.energy_from_triplets(&self.cache.triplets());
        let delta_e = new_energy - self.energy;
        let accepted = metropolis_accept(delta_e, temperature, rng)?;
        if accepted {
            self.energy = new_energy;
            debug_assert!(self.config.check().is_ok());
        } else {
            self.shift(mv.cluster, old_anchor);
        }
        Ok(StepOutcome { accepted, delta_e })
    }
}

/// Cooling schedule and stopping rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub ratio: f64,
    /// Attempts in loop `l` are `loop_c × (1 + l) × clusters`.
    pub loop_c: usize,
    pub max_loops: usize,
    pub tolerance: f64,
    pub max_step: usize,
    pub seed: u64,
}

impl AnnealSchedule {
    /// Defaults for a domain of side `side`.
    pub fn for_side(side: usize) -> Self {
        Self {
            t0: 5e-5,
            ratio: 0.82,
            loop_c: 4,
            max_loops: 60,
            tolerance: 7e-5,
            max_step: (side / 4).max(1),
            seed: 0,
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TsrError::InvalidParameter(m.into()));
        if !(self.t0 > 0.0) {
            return bad("T0 must be > 0");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("cooling ratio must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if self.max_step == 0 || self.loop_c == 0 {
            return bad("max_step and loop_c must be ≥ 1");
        }
        Ok(())
    }

    pub fn temperature(&self, l: usize) -> f64 {
        self.t0 * self.ratio.powi(l as i32)
    }

    pub fn loop_length(&self, l: usize, clusters: usize) -> usize {
        self.loop_c * (1 + l) * clusters
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub accepted_step: usize,
    pub loop_index: usize,
    pub temperature: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct AnnealResult {
    pub config: Configuration,
    /// Start row (step 0) followed by one row per accepted move.
    pub trace: Vec<TraceRow>,
    pub start_energy: f64,
    pub final_energy: f64,
    pub converged: bool,
    pub accepted: usize,
    pub attempts: usize,
    pub loops: usize,
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("accepted_step,loop,temperature,energy\n");
    for row in trace {
        writeln!(
            out,
            "{},{},{:e},{:e}",
            row.accepted_step, row.loop_index, row.temperature, row.energy
        )
        .unwrap();
    }
    out
}

/// Runs the cooling schedule from `start` until the energy drops below the
/// tolerance or the loop budget is spent.
pub fn anneal(start: Configuration, ctx: &CostContext, schedule: &AnnealSchedule) -> Result<AnnealResult> {
    schedule.validate()?;
    let mut rng = rng::stream(schedule.seed, Purpose::Anneal, 0, 0);
    let mut state = Annealer::new(start, ctx)?;
    let start_energy = state.energy();
    let mut trace = vec![TraceRow {
        accepted_step: 0,
        loop_index: 0,
        temperature: schedule.t0,
        energy: start_energy,
    }];
    let mut accepted = 0;
    let mut attempts = 0;
    let mut loops = 0;
    let mut converged = start_energy < schedule.tolerance;
    let clusters = state.config().len();

    if !converged && clusters > 0 {
        'outer: for l in 0..schedule.max_loops {
            loops = l + 1;
            let t = schedule.temperature(l);
            for _ in 0..schedule.loop_length(l, clusters) {
                attempts += 1;
                let mv = propose_move(state.config(), &mut rng, schedule.max_step)?;
                if !mv.feasible {
                    continue;
                }
                if state.metropolis_step(&mv, t, &mut rng)?.accepted {
                    accepted += 1;
                    trace.push(TraceRow {
                        accepted_step: accepted,
                        loop_index: l,
                        temperature: t,
                        energy: state.energy(),
                    });
                    if state.energy() < schedule.tolerance {
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    let final_energy = state.energy();
    Ok(AnnealResult {
        config: state.into_config(),
        trace,
        start_energy,
        final_energy,
        converged,
        accepted,
        attempts,
        loops,
    })
}

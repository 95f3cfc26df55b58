//! End-to-end workflow behind the `tsr` command: analyze a target, build
//! surrogate libraries, anneal their arrangement, and compare results.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::annealing::{self, AnnealResult, AnnealSchedule, Configuration, CostContext};
use crate::descriptors::{self, CurveKind, DescriptorCurve, ScaleSet};
use crate::error::{Result, TsrError};
use crate::grid::{label_clusters, BinaryImage, ClusterShape, Pixel};
use crate::pbm;
use crate::rng::{self, Purpose};
use crate::synthesis::{self, SynthesisOptions, TargetStats};

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Converged = 0,
    Failure = 1,
    BudgetExhausted = 2,
    InputError = 3,
    PackingFailure = 4,
}

impl ExitStatus {
    pub fn for_error(e: &TsrError) -> Self {
        match e {
            TsrError::PackingFailure { .. } => ExitStatus::PackingFailure,
            TsrError::SynthesisFailed { .. } => ExitStatus::Failure,
            _ => ExitStatus::InputError,
        }
    }
}

/// Tunables for every stage. Bounds follow the owning modules.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub m: usize,
    pub t0: f64,
    pub ratio: f64,
    pub delta: f64,
    /// `None` means a quarter of the domain side.
    pub max_step: Option<usize>,
    pub max_loops: usize,
    pub scale_stride: usize,
    pub loop_c: usize,
    pub library_seeds: Vec<u64>,
    pub max_restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            m: 16,
            t0: 5e-5,
            ratio: 0.82,
            delta: 7e-5,
            max_step: None,
            max_loops: 60,
            scale_stride: 2,
            loop_c: 4,
            library_seeds: Vec::new(),
            max_restarts: 5,
        }
    }
}

impl RunConfig {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| TsrError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| TsrError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| TsrError::Config(format!("bad value {v:?} for {key}")))
        }
        match key {
            "seed" | "master_seed" => self.master_seed = parse(key, value)?,
            "m" | "M" => self.m = parse(key, value)?,
            "t0" | "T0" => self.t0 = parse(key, value)?,
            "ratio" => self.ratio = parse(key, value)?,
            "delta" | "tolerance" => self.delta = parse(key, value)?,
            "max_step" => self.max_step = Some(parse(key, value)?),
            "max_loops" => self.max_loops = parse(key, value)?,
            "scale_stride" => self.scale_stride = parse(key, value)?,
            "loop_c" => self.loop_c = parse(key, value)?,
            "max_restarts" => self.max_restarts = parse(key, value)?,
            "library_seeds" => self.library_seeds = parse_seed_list(value)?,
            _ => return Err(TsrError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(TsrError::Config("M must be ≥ 1".into()));
        }
        if self.scale_stride == 0 {
            return Err(TsrError::Config("scale_stride must be ≥ 1".into()));
        }
        self.schedule(64).validate()
    }

    pub fn schedule(&self, side: usize) -> AnnealSchedule {
        AnnealSchedule {
            t0: self.t0,
            ratio: self.ratio,
            loop_c: self.loop_c,
            max_loops: self.max_loops,
            tolerance: self.delta,
            max_step: self.max_step.unwrap_or((side / 4).max(1)),
            seed: self.master_seed,
        }
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            max_restarts: self.max_restarts,
            ..SynthesisOptions::default()
        }
    }

    pub fn scales(&self, side: usize) -> Result<ScaleSet> {
        ScaleSet::with_stride(side, self.scale_stride)
    }
}

pub fn parse_seed_list(value: &str) -> Result<Vec<u64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| TsrError::Config(format!("bad seed {s:?}")))
        })
        .collect()
}

/// All five curves of an image: the entropic triplet on the configured
/// scales, `S₂` up to half the side, and `L` up to the full side.
pub fn all_curves(image: &BinaryImage, cfg: &RunConfig) -> Result<Vec<DescriptorCurve>> {
    let n = image.side();
    let mut curves: Vec<DescriptorCurve> = if n >= 2 {
        descriptors::ed_triplet(image, &cfg.scales(n)?)?.into()
    } else {
        Vec::new()
    };
    curves.push(descriptors::two_point_s2(image, n / 2)?);
    curves.push(descriptors::lineal_path(image, n)?);
    Ok(curves)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn fmt_mean_q(shapes: &[ClusterShape]) -> String {
    format!("{:.6}", synthesis::mean_shape_index(shapes))
}

// ---------------------------------------------------------------- analyze

#[derive(Clone, Debug)]
pub struct AnalyzeReport {
    pub side: usize,
    pub volume_fraction: f64,
    pub clusters: Vec<(ClusterShape, Pixel)>,
    pub mean_q: f64,
    pub curves: Vec<DescriptorCurve>,
}

impl AnalyzeReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        writeln!(out, "side {}", self.side).unwrap();
        writeln!(out, "volume_fraction {}", self.volume_fraction).unwrap();
        writeln!(out, "clusters {}", self.clusters.len()).unwrap();
        writeln!(out, "mean_q {}", self.mean_q).unwrap();
        out
    }

    pub fn clusters_csv(&self) -> String {
        let mut out = String::from("index,row,col,area,interface,q\n");
        for (i, (s, a)) in self.clusters.iter().enumerate() {
            writeln!(out, "{i},{},{},{},{},{}", a.0, a.1, s.area(), s.interface(), s.shape_index()).unwrap();
        }
        out
    }
}

pub fn analyze(target: &BinaryImage, cfg: &RunConfig) -> Result<AnalyzeReport> {
    let clusters = label_clusters(target);
    let shapes: Vec<ClusterShape> = clusters.iter().map(|c| c.0.clone()).collect();
    Ok(AnalyzeReport {
        side: target.side(),
        volume_fraction: target.volume_fraction(),
        mean_q: synthesis::mean_shape_index(&shapes),
        clusters,
        curves: all_curves(target, cfg)?,
    })
}

pub fn cmd_analyze(target_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<AnalyzeReport> {
    let target = pbm::read_image(target_path)?;
    let report = analyze(&target, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    write(&out_dir.join("analyze_report.txt"), &report.summary())?;
    write(&out_dir.join("clusters.csv"), &report.clusters_csv())?;
    for c in &report.curves {
        write(&out_dir.join(format!("target_{}.csv", c.kind.name())), &c.to_csv())?;
    }
    Ok(report)
}

// ----------------------------------------------------------------- stage 1

#[derive(Clone, Debug)]
pub struct LibraryReport {
    pub seed: u64,
    pub shapes: Vec<ClusterShape>,
    pub mean_q: f64,
    /// `Σ_k [L*(k) − L_target(k)]²`
    pub lineal_score: f64,
}

#[derive(Clone, Debug)]
pub struct Stage1Report {
    pub target_mean_q: f64,
    pub libraries: Vec<LibraryReport>,
    /// Index of the library with the smallest lineal score; ties to the first.
    pub preferred: usize,
}

pub fn target_stats(target: &BinaryImage) -> Vec<TargetStats> {
    label_clusters(target).iter().map(|c| TargetStats::from_shape(&c.0)).collect()
}

pub fn stage1(target: &BinaryImage, seeds: &[u64], cfg: &RunConfig) -> Result<Stage1Report> {
    if seeds.is_empty() {
        return Err(TsrError::Config("at least one library seed is required".into()));
    }
    let clusters = label_clusters(target);
    let target_shapes: Vec<ClusterShape> = clusters.iter().map(|c| c.0.clone()).collect();
    let stats: Vec<TargetStats> = target_shapes.iter().map(TargetStats::from_shape).collect();
    let n = target.side();
    let target_lineal = descriptors::lineal_path(target, n)?;
    let opts = cfg.synthesis_options();
    let mut libraries = Vec::new();
    for &seed in seeds {
        let shapes: Vec<ClusterShape> = synthesis::synthesize_library(&stats, seed, &opts)?
            .into_iter()
            .map(|o| o.shape)
            .collect();
        synthesis::audit_library(&target_shapes, &shapes)?;
        let lineal = descriptors::lineal_path_of_shapes(&shapes, n, n)?;
        let lineal_score = lineal
            .values()
            .zip(target_lineal.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        libraries.push(LibraryReport {
            seed,
            mean_q: synthesis::mean_shape_index(&shapes),
            shapes,
            lineal_score,
        });
    }
    let mut preferred = 0;
    for (i, l) in libraries.iter().enumerate() {
        if l.lineal_score < libraries[preferred].lineal_score {
            preferred = i;
        }
    }
    Ok(Stage1Report {
        target_mean_q: synthesis::mean_shape_index(&target_shapes),
        libraries,
        preferred,
    })
}

pub fn library_file_name(seed: u64) -> String {
    format!("library_seed{seed}.txt")
}

pub fn cmd_stage1(target_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Stage1Report> {
    let target = pbm::read_image(target_path)?;
    let report = stage1(&target, &cfg.library_seeds, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut summary = String::new();
    writeln!(summary, "target_mean_q {:.6}", report.target_mean_q).unwrap();
    writeln!(summary, "seed,clusters,mean_q,lineal_score").unwrap();
    for lib in &report.libraries {
        write(
            &out_dir.join(library_file_name(lib.seed)),
            &synthesis::format_library(&lib.shapes, lib.seed),
        )?;
        writeln!(
            summary,
            "{},{},{},{}",
            lib.seed,
            lib.shapes.len(),
            fmt_mean_q(&lib.shapes),
            lib.lineal_score
        )
        .unwrap();
    }
    writeln!(summary, "preferred_seed {}", report.libraries[report.preferred].seed).unwrap();
    write(&out_dir.join("stage1_report.txt"), &summary)?;
    Ok(report)
}

// ----------------------------------------------------------------- stage 2

/// `(k, [target, initial, final])`.
pub type OverlayRow = (usize, [f64; 3]);

#[derive(Clone, Debug)]
pub struct Stage2Report {
    pub initial: Configuration,
    pub start_energies: Vec<f64>,
    pub result: AnnealResult,
    pub overlays: Vec<(CurveKind, Vec<OverlayRow>)>,
}

impl Stage2Report {
    pub fn status(&self) -> ExitStatus {
        if self.result.converged {
            ExitStatus::Converged
        } else {
            ExitStatus::BudgetExhausted
        }
    }
}

pub fn stage2(target: &BinaryImage, library: &[ClusterShape], cfg: &RunConfig) -> Result<Stage2Report> {
    cfg.validate()?;
    let n = target.side();
    let target_shapes: Vec<ClusterShape> = label_clusters(target).into_iter().map(|c| c.0).collect();
    synthesis::audit_library(&target_shapes, library)?;
    let ctx = CostContext::new(target, cfg.scales(n)?)?;
    let (initial, start_energies) = annealing::select_initial(library, n, cfg.m, &ctx, cfg.master_seed)?;
    let result = annealing::anneal(initial.clone(), &ctx, &cfg.schedule(n))?;

    let t = all_curves(target, cfg)?;
    let i = all_curves(initial.image(), cfg)?;
    let f = all_curves(result.config.image(), cfg)?;
    let overlays = t
        .iter()
        .zip(&i)
        .zip(&f)
        .map(|((t, i), f)| {
            let rows = t
                .points
                .iter()
                .zip(&i.points)
                .zip(&f.points)
                .map(|((a, b), c)| (a.0, [a.1, b.1, c.1]))
                .collect();
            (t.kind, rows)
        })
        .collect();
    Ok(Stage2Report {
        initial,
        start_energies,
        result,
        overlays,
    })
}

pub fn cmd_stage2(target_path: &Path, library_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Stage2Report> {
    let target = pbm::read_image(target_path)?;
    let library = synthesis::parse_library(&std::fs::read_to_string(library_path)?)?;
    let report = stage2(&target, &library.shapes, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    pbm::write_pbm(&out_dir.join("initial.pbm"), report.initial.image())?;
    pbm::write_pbm(&out_dir.join("final.pbm"), report.result.config.image())?;
    write(&out_dir.join("trace.csv"), &annealing::trace_csv(&report.result.trace))?;
    write(
        &out_dir.join("final_configuration.txt"),
        &report.result.config.to_text(cfg.master_seed),
    )?;
    for (kind, rows) in &report.overlays {
        let mut csv = String::from("k,target,initial,final\n");
        for (k, v) in rows {
            writeln!(csv, "{k},{},{},{}", v[0], v[1], v[2]).unwrap();
        }
        write(&out_dir.join(format!("overlay_{}.csv", kind.name())), &csv)?;
    }
    let r = &report.result;
    let mut summary = String::new();
    writeln!(summary, "start_candidates {}", report.start_energies.len()).unwrap();
    writeln!(summary, "start_energy {:e}", r.start_energy).unwrap();
    writeln!(summary, "final_energy {:e}", r.final_energy).unwrap();
    writeln!(summary, "accepted_steps {}", r.accepted).unwrap();
    writeln!(summary, "attempts {}", r.attempts).unwrap();
    writeln!(summary, "loops {}", r.loops).unwrap();
    writeln!(summary, "converged {}", r.converged).unwrap();
    write(&out_dir.join("stage2_report.txt"), &summary)?;
    Ok(report)
}

// --------------------------------------------------------------- validate

#[derive(Clone, Debug)]
pub struct CurveDeviation {
    pub kind: CurveKind,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub rows: Vec<(usize, f64, f64)>,
}

/// Paired curves of target and reconstruction with max/mean absolute
/// differences, normalized by the target curve maximum (1 when that is 0).
pub fn validate(target: &BinaryImage, recon: &BinaryImage, cfg: &RunConfig) -> Result<Vec<CurveDeviation>> {
    if target.side() != recon.side() {
        return Err(TsrError::SizeMismatch(target.side(), recon.side()));
    }
    let t = all_curves(target, cfg)?;
    let r = all_curves(recon, cfg)?;
    Ok(t.iter()
        .zip(&r)
        .map(|(t, r)| {
            let norm = match t.max_value() {
                m if m > 0.0 => m,
                _ => 1.0,
            };
            let rows: Vec<(usize, f64, f64)> =
                t.points.iter().zip(&r.points).map(|(a, b)| (a.0, a.1, b.1)).collect();
            let diffs: Vec<f64> = rows.iter().map(|&(_, a, b)| (a - b).abs() / norm).collect();
            CurveDeviation {
                kind: t.kind,
                max_abs: diffs.iter().copied().fold(0.0, f64::max),
                mean_abs: diffs.iter().sum::<f64>() / diffs.len().max(1) as f64,
                rows,
            }
        })
        .collect())
}

pub fn cmd_validate(target_path: &Path, recon_path: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<Vec<CurveDeviation>> {
    let target = pbm::read_image(target_path)?;
    let recon = pbm::read_image(recon_path)?;
    let devs = validate(&target, &recon, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let mut summary = String::from("curve,max_abs_normalized,mean_abs_normalized\n");
    for d in &devs {
        writeln!(summary, "{},{},{}", d.kind.name(), d.max_abs, d.mean_abs).unwrap();
        let mut csv = String::from("k,target,reconstruction\n");
        for (k, a, b) in &d.rows {
            writeln!(csv, "{k},{a},{b}").unwrap();
        }
        write(&out_dir.join(format!("compare_{}.csv", d.kind.name())), &csv)?;
    }
    write(&out_dir.join("validate_report.csv"), &summary)?;
    Ok(devs)
}

// ------------------------------------------------------------- self-test

/// Random 4-connected shape of `area` pixels grown one frontier cell at a
/// time. With probability `branching` the new cell is taken next to the most
/// recently added one, which yields ramified shapes; otherwise the frontier
/// cell is uniform, which yields compact ones.
pub fn random_shape<R: Rng>(area: usize, branching: f64, rng: &mut R) -> Result<ClusterShape> {
    if area == 0 {
        return Err(TsrError::EmptyPixelSet);
    }
    let mut cells = std::collections::HashSet::from([(0isize, 0isize)]);
    let mut order = vec![(0isize, 0isize)];
    let four = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    while order.len() < area {
        let fresh = |p: (isize, isize), cells: &std::collections::HashSet<(isize, isize)>| {
            four.iter()
                .map(|d| (p.0 + d.0, p.1 + d.1))
                .filter(|q| !cells.contains(q))
                .collect::<Vec<_>>()
        };
        let last = *order.last().unwrap();
        let near = fresh(last, &cells);
        let next = if !near.is_empty() && rng.gen::<f64>() < branching {
            near[rng.gen_range(0..near.len())]
        } else {
            loop {
                let p = order[rng.gen_range(0..order.len())];
                let f = fresh(p, &cells);
                if !f.is_empty() {
                    break f[rng.gen_range(0..f.len())];
                }
            }
        };
        cells.insert(next);
        order.push(next);
    }
    ClusterShape::from_pixels(order)
}

/// A target built from a known library: `clusters` random shapes totalling
/// about `fraction` of a `side × side` domain, placed at random without
/// contact. Returns the image and the shapes in label order.
pub fn self_test_target(
    side: usize,
    clusters: usize,
    fraction: f64,
    seed: u64,
) -> Result<(BinaryImage, Vec<ClusterShape>)> {
    let mut rng = rng::stream(seed, Purpose::Fixture, 0, 0);
    let mean_area = (fraction * (side * side) as f64 / clusters.max(1) as f64).max(1.0);
    let shapes: Vec<ClusterShape> = (0..clusters)
        .map(|_| {
            let area = rng.gen_range((mean_area * 0.5) as usize..=(mean_area * 1.5) as usize).max(1);
            random_shape(area, 0.3, &mut rng)
        })
        .collect::<Result<_>>()?;
    let config = annealing::random_configuration(&shapes, side, &mut rng)?;
    let image = config.image().clone();
    let labelled = label_clusters(&image).into_iter().map(|c| c.0).collect();
    Ok((image, labelled))
}

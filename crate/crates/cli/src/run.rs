//! Mode dispatch. Every mode writes its data files plus `metadata.json`,
//! which alone carries wall-clock times.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;
use serde_json::json;
use vibratrak_core::analysis::{
    apriori_sweep, comparison_metric, summarize_level, LevelSummary,
};
use vibratrak_core::{trace_frc, vprnm_backbone, Backbone, ContinuationConfig, Frc, SolveStats};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::output::{apriori_table, backbone_table, frc_table, peaks_table, OutputDir};
use crate::validate;

/// Command-line settings that are not part of the configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads for independent force levels; `None` lets the pool
    /// decide.
    pub threads: Option<usize>,
    /// Multiplier applied to every continuation step.
    pub step_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threads: None,
            step_scale: 1.0,
        }
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: Mode,
    pub files: Vec<PathBuf>,
}

/// Result of one level of a frequency-response grid.
pub type LevelResult<T> = Result<T, String>;

pub fn thread_pool(threads: Option<usize>) -> Result<ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(format!("threads: {e}")))
}

/// Trace the response curve of every force level on `pool`, in input order.
pub fn frc_grid(
    cfg: &RunConfig,
    cont: &ContinuationConfig,
    pool: &ThreadPool,
) -> Vec<LevelResult<Frc>> {
    let sys = cfg.system();
    let range = cfg.omega_range();
    pool.install(|| {
        cfg.forces
            .par_iter()
            .map(|&f| trace_frc(sys, f, range, cont).map_err(|e| e.to_string()))
            .collect()
    })
}

/// Response curves with their superharmonic peaks, a backbone over the same
/// force range and the accuracy metric between them.
#[derive(Debug)]
pub struct Comparison {
    pub levels: Vec<LevelResult<LevelSummary>>,
    pub backbone: LevelResult<Backbone>,
    pub metric: LevelResult<f64>,
}

pub fn force_span(forces: &[f64]) -> (f64, f64) {
    forces
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)))
}

pub fn compare(cfg: &RunConfig, cont: &ContinuationConfig, pool: &ThreadPool) -> Comparison {
    let sys = cfg.system();
    let n = cfg.harmonic();
    let range = cfg.omega_range();
    let levels: Vec<LevelResult<LevelSummary>> = pool.install(|| {
        cfg.forces
            .par_iter()
            .map(|&f| {
                summarize_level(sys, n, f, range, cfg.window, cont, cfg.normalized)
                    .map_err(|e| e.to_string())
            })
            .collect()
    });
    let backbone = vprnm_backbone(sys, n, force_span(&cfg.forces), cont).map_err(|e| e.to_string());
    let metric = match &backbone {
        Ok(bb) => {
            let ok: Vec<LevelSummary> = levels.iter().filter_map(|l| l.as_ref().ok().cloned()).collect();
            comparison_metric(&ok, bb, cfg.normalized, cfg.axis).map_err(|e| e.to_string())
        }
        Err(e) => Err(format!("no backbone: {e}")),
    };
    Comparison {
        levels,
        backbone,
        metric,
    }
}

/// Work of a response-curve grid against a backbone over the same force
/// range, both traced sequentially with the same continuation settings.
#[derive(Debug, Clone, Serialize)]
pub struct Bench {
    pub hbm: SolveStats,
    pub vprnm: SolveStats,
    pub hbm_levels: usize,
    pub hbm_failed_levels: usize,
    pub backbone_points: usize,
    /// HBM Newton iterations over VPRNM Newton iterations.
    pub newton_ratio: f64,
    #[serde(skip)]
    pub hbm_seconds: f64,
    #[serde(skip)]
    pub vprnm_seconds: f64,
}

pub fn bench(cfg: &RunConfig, cont: &ContinuationConfig) -> Result<Bench, CliError> {
    let sys = cfg.system();
    let t = Instant::now();
    let mut hbm = SolveStats::default();
    let mut failed = 0;
    for &f in &cfg.forces {
        match trace_frc(sys, f, cfg.omega_range(), cont) {
            Ok(frc) => hbm += frc.stats,
            Err(_) => failed += 1,
        }
    }
    let hbm_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let bb = vprnm_backbone(sys, cfg.harmonic(), force_span(&cfg.forces), cont)?;
    let vprnm_seconds = t.elapsed().as_secs_f64();
    Ok(Bench {
        hbm,
        vprnm: bb.stats,
        hbm_levels: cfg.forces.len(),
        hbm_failed_levels: failed,
        backbone_points: bb.points.len(),
        newton_ratio: hbm.newton_iterations as f64 / bb.stats.newton_iterations.max(1) as f64,
        hbm_seconds,
        vprnm_seconds,
    })
}

fn level_file(i: usize) -> String {
    format!("frc_{i:03}.csv")
}

fn backbone_summary(bb: &Backbone) -> serde_json::Value {
    json!({
        "n": bb.n,
        "points": bb.points.len(),
        "termination": bb.termination,
        "stats": bb.stats,
    })
}

/// What a mode produced besides its files.
struct Outcome {
    failures: Vec<String>,
    failure_kind: fn(String) -> CliError,
    timings: serde_json::Map<String, serde_json::Value>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            failure_kind: CliError::Solver,
            timings: Default::default(),
        }
    }
}

/// Run one configuration and persist its results under `cfg.out_dir`.
///
/// Failures of independent levels are recorded and the remaining levels
/// still run; the error is returned after everything has been written.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    if !(opts.step_scale.is_finite() && opts.step_scale > 0.0) {
        return Err(CliError::Config(format!(
            "step scale must be positive, got {}",
            opts.step_scale
        )));
    }
    let cont = cfg.continuation.scaled_steps(opts.step_scale);
    let pool = thread_pool(opts.threads)?;
    let mut out = OutputDir::create(&cfg.out_dir)?;
    let start = Instant::now();
    let outcome = match cfg.mode {
        Mode::Apriori => run_apriori(cfg, &mut out),
        Mode::Frc => run_frc(cfg, &cont, &pool, &mut out),
        Mode::Vprnm => run_vprnm(cfg, &cont, &mut out),
        Mode::Compare => run_compare(cfg, &cont, &pool, &mut out),
        Mode::Bench => run_bench(cfg, &cont, &mut out),
        Mode::Validate => run_validate(&mut out),
    };
    let wall = start.elapsed().as_secs_f64();
    let (outcome, fatal) = match outcome {
        Ok(o) => (o, None),
        Err(e) => {
            let mut o = Outcome::new();
            o.failures.push(e.to_string());
            (o, Some(e))
        }
    };
    out.json(
        "metadata.json",
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "mode": cfg.mode,
            "config": cfg,
            "step_scale": opts.step_scale,
            "threads": pool.current_num_threads(),
            "wall_time_s": wall,
            "timings_s": outcome.timings,
            "failures": outcome.failures,
        }),
    )?;
    if let Some(e) = fatal {
        return Err(e);
    }
    if !outcome.failures.is_empty() {
        return Err((outcome.failure_kind)(outcome.failures.join("; ")));
    }
    Ok(RunReport {
        mode: cfg.mode,
        files: out.written().to_vec(),
    })
}

fn run_apriori(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let omega = cfg.omega.unwrap_or_else(|| sys.omega0());
    let samples = apriori_sweep(sys, cfg.harmonic(), &cfg.amplitudes, omega, cfg.third_ratio)?;
    out.csv("apriori.csv", &apriori_table(&samples, omega))?;
    Ok(Outcome::new())
}

fn run_frc(
    cfg: &RunConfig,
    cont: &ContinuationConfig,
    pool: &ThreadPool,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let t = Instant::now();
    let grid = frc_grid(cfg, cont, pool);
    o.timings.insert("frc".into(), json!(t.elapsed().as_secs_f64()));
    let n = cfg.n.unwrap_or(1);
    let mut levels = Vec::new();
    for (i, (level, &force)) in grid.iter().zip(&cfg.forces).enumerate() {
        match level {
            Ok(frc) => {
                out.csv(&level_file(i), &frc_table(frc, n))?;
                levels.push(json!({
                    "index": i, "force": force, "file": level_file(i),
                    "points": frc.points.len(), "termination": frc.termination, "stats": frc.stats,
                }));
            }
            Err(e) => {
                o.failures.push(format!("level {i} (force {force:e}): {e}"));
                levels.push(json!({"index": i, "force": force, "error": e}));
            }
        }
    }
    out.json("summary.json", &json!({"phase_harmonic": n, "levels": levels}))?;
    Ok(o)
}

fn run_vprnm(cfg: &RunConfig, cont: &ContinuationConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let t = Instant::now();
    let bb = vprnm_backbone(cfg.system(), cfg.harmonic(), force_span(&cfg.forces), cont)?;
    o.timings.insert("vprnm".into(), json!(t.elapsed().as_secs_f64()));
    out.csv("vprnm.csv", &backbone_table(&bb.points))?;
    out.json("summary.json", &backbone_summary(&bb))?;
    Ok(o)
}

fn run_compare(
    cfg: &RunConfig,
    cont: &ContinuationConfig,
    pool: &ThreadPool,
    out: &mut OutputDir,
) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let t = Instant::now();
    let c = compare(cfg, cont, pool);
    o.timings.insert("compare".into(), json!(t.elapsed().as_secs_f64()));
    let n = cfg.harmonic();
    let mut levels = Vec::new();
    let mut ok = Vec::new();
    for (i, (level, &force)) in c.levels.iter().zip(&cfg.forces).enumerate() {
        match level {
            Ok(l) => {
                out.csv(&level_file(i), &frc_table(&l.frc, n))?;
                let sel = l.selected_peak();
                levels.push(json!({
                    "index": i, "force": force, "file": level_file(i),
                    "peaks": l.peaks.len(),
                    "selected_frequency": sel.map(|p| p.omega_peak),
                    "x_super": sel.map(|p| p.x_super),
                    "x_nom": sel.map(|p| p.x_nom),
                    "band": l.band,
                    "termination": l.frc.termination,
                    "stats": l.frc.stats,
                }));
                ok.push(l.clone());
            }
            Err(e) => {
                o.failures.push(format!("level {i} (force {force:e}): {e}"));
                levels.push(json!({"index": i, "force": force, "error": e}));
            }
        }
    }
    out.csv("peaks.csv", &peaks_table(&ok, cfg.normalized))?;
    let backbone = match &c.backbone {
        Ok(bb) => {
            out.csv("vprnm.csv", &backbone_table(&bb.points))?;
            backbone_summary(bb)
        }
        Err(e) => {
            o.failures.push(format!("backbone: {e}"));
            json!({"error": e})
        }
    };
    if let (Ok(_), Err(e)) = (&c.backbone, &c.metric) {
        o.failures.push(format!("metric: {e}"));
    }
    out.json(
        "compare.json",
        &json!({
            "n": n,
            "normalized": cfg.normalized,
            "axis": cfg.axis,
            "metric_percent": c.metric.as_ref().ok(),
            "metric_error": c.metric.as_ref().err(),
            "levels": levels,
            "backbone": backbone,
        }),
    )?;
    Ok(o)
}

fn run_bench(cfg: &RunConfig, cont: &ContinuationConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    let b = bench(cfg, cont)?;
    o.timings.insert("hbm".into(), json!(b.hbm_seconds));
    o.timings.insert("vprnm".into(), json!(b.vprnm_seconds));
    o.timings.insert(
        "wall_ratio".into(),
        json!(b.hbm_seconds / b.vprnm_seconds.max(f64::MIN_POSITIVE)),
    );
    if b.hbm_failed_levels > 0 {
        o.failures.push(format!("{} response curves failed", b.hbm_failed_levels));
    }
    out.json("bench.json", &b)?;
    Ok(o)
}

fn run_validate(out: &mut OutputDir) -> Result<Outcome, CliError> {
    let mut o = Outcome::new();
    o.failure_kind = CliError::Validation;
    let t = Instant::now();
    let checks = validate::run_suite();
    o.timings.insert("suite".into(), json!(t.elapsed().as_secs_f64()));
    for c in checks.iter().filter(|c| !c.passed) {
        o.failures.push(format!("{}: {:.3e} > {:.1e}", c.name, c.value, c.tolerance));
    }
    out.json(
        "validate.json",
        &json!({
            "passed": checks.iter().all(|c| c.passed),
            "checks": checks,
        }),
    )?;
    Ok(o)
}

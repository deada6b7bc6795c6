//! `sme` command line: `run`, `compare` and `analyze`.
//!
//! Exit codes: 0 success, 2 configuration or missing-artifact errors, 3 I/O
//! failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    controller_trace, explored_joint_trajectories, exploration_trace, non_neighbor_overlap,
    parse_grid, reward_landscape, ring_neighbors, update_directions,
};
use crate::config::{experiment_from, grid_from, grid_manifest, manifest, preset, KeyValues};
use crate::controller::ControllerKind;
use crate::error::{Error, Result};
use crate::experiment::{
    comparison_matrix, curve_of, default_threshold, env_config, repetition_rng, run_experiment,
    run_repetition, sample_batch, ComparisonRow, ExperimentConfig,
};
use crate::export::{
    curve_svg, landscape_svg, save_checkpoint, write_curve, write_curve_stats, write_exploration,
    write_file, write_interference, write_landscape, write_summary, write_trajectories,
};
use crate::learners::read_checkpoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// File name of the resolved configuration written beside every output.
pub const MANIFEST: &str = "manifest.cfg";
pub const CHECKPOINT: &str = "checkpoint.txt";
/// Moving-average window of the exploration trace.
pub const TRACE_WINDOW: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "sme", version, about = "SME locomotion learning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one controller/learner/schedule cell.
    Run(RunArgs),
    /// Run a grid of cells and write a summary table.
    Compare(RunArgs),
    /// Post-hoc analyses.
    #[command(subcommand)]
    Analyze(Analyze),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Analyze {
    /// Non-neighbour co-activation share of a default controller.
    Interference {
        #[arg(long, default_value = "sme")]
        controller: String,
        #[arg(long, default_value_t = 200)]
        warmup: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Reward along an update direction rebuilt at a checkpoint.
    Landscape {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Direction::Agol)]
        direction: Direction,
        #[arg(long, default_value = "-1:1:0.05", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Explored joint trajectories and exploration-rate traces of one run.
    Traces {
        /// Repetition directory such as `results/r0`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direction {
    Agol,
    Pgpe,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Analyze(a) => cmd_analyze(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn io_ctx(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    write_file(path, f).map_err(io_ctx(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_ctx(path))
}

/// preset < config file < `SME_*` environment < flags.
fn layered(a: &RunArgs) -> Result<KeyValues> {
    let mut kv = match &a.preset {
        Some(p) => preset(p)?,
        None => KeyValues::new(),
    };
    if let Some(path) = &a.config {
        if !path.exists() {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        let text = fs::read_to_string(path).map_err(io_ctx(path))?;
        kv.merge(&KeyValues::parse(&text)?);
    }
    kv.merge(&KeyValues::from_env(std::env::vars())?);
    let mut flags = KeyValues::new();
    if let Some(s) = a.seed {
        flags.set("seed", s.to_string())?;
    }
    if let Some(e) = a.episodes {
        flags.set("episodes", e.to_string())?;
    }
    if let Some(r) = a.repetitions {
        flags.set("repetitions", r.to_string())?;
    }
    for item in &a.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{item}`")))?;
        flags.set(k, v.trim())?;
    }
    kv.merge(&flags);
    Ok(kv)
}

fn summary_row(cfg: &ExperimentConfig, curve: crate::experiment::LearningCurve) -> Result<ComparisonRow> {
    let threshold = default_threshold(cfg.controller)?;
    Ok(ComparisonRow {
        controller: cfg.controller,
        learner: cfg.learner,
        schedule: cfg.schedule,
        final_reward_median: curve.final_reward(),
        episodes_to_threshold_median: curve.episodes_to_threshold(threshold),
        curve,
    })
}

fn print_row(row: &ComparisonRow) {
    let ett = row
        .episodes_to_threshold_median
        .map_or("never".to_string(), |e| format!("{e}"));
    println!(
        "{}-{}-{}\tfinal_reward_median={:.6}\tepisodes_to_threshold_median={ett}",
        row.controller, row.learner, row.schedule, row.final_reward_median
    );
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let kv = layered(a)?;
    if kv.is_grid() {
        return Err(Error::Config("grid configuration given to `run`; use `compare`".into()));
    }
    let cfg = experiment_from(&kv)?;
    create_dir(&a.out)?;
    let results = run_experiment(&cfg, a.jobs)?;
    let curve = curve_of(&results);
    let row = summary_row(&cfg, curve.clone())?;
    let threshold = default_threshold(cfg.controller)?;
    let text = manifest(&cfg).render();
    write_out(&a.out.join(MANIFEST), |w| w.write_all(text.as_bytes()))?;
    write_out(&a.out.join("curve.csv"), |w| write_curve(w, &curve))?;
    write_out(&a.out.join("curve_stats.csv"), |w| write_curve_stats(w, &curve))?;
    write_out(&a.out.join("summary.csv"), |w| {
        write_summary(w, std::slice::from_ref(&row), threshold)
    })?;
    let svg = curve_svg(&cfg.label(), &[(&cfg.label(), &curve)]);
    write_out(&a.out.join("curve.svg"), |w| w.write_all(svg.as_bytes()))?;
    for (rep, r) in results.iter().enumerate() {
        let dir = a.out.join(format!("r{rep}"));
        create_dir(&dir)?;
        save_checkpoint(&dir.join(CHECKPOINT), &r.final_state)?;
    }
    print_row(&row);
    Ok(())
}

fn cmd_compare(a: &RunArgs) -> Result<()> {
    let mut kv = layered(a)?;
    if !kv.is_grid() {
        // A single cell is a 1×1 grid.
        let cfg = experiment_from(&kv)?;
        kv.set("cells", format!("{}/{}/{}", cfg.controller, cfg.learner, cfg.schedule))?;
    }
    let spec = grid_from(&kv)?;
    let threshold = match spec.threshold {
        Some(t) => t,
        None => default_threshold(spec.cells[0].controller)?,
    };
    create_dir(&a.out)?;
    let rows = comparison_matrix(&spec.cells, threshold, a.jobs)?;
    let text = grid_manifest(&kv, &spec).render();
    write_out(&a.out.join(MANIFEST), |w| w.write_all(text.as_bytes()))?;
    write_out(&a.out.join("summary.csv"), |w| write_summary(w, &rows, threshold))?;
    let curves_dir = a.out.join("curves");
    create_dir(&curves_dir)?;
    let labels: Vec<String> = rows
        .iter()
        .map(|r| format!("{}-{}-{}", r.controller, r.learner, r.schedule))
        .collect();
    for (row, label) in rows.iter().zip(&labels) {
        write_out(&curves_dir.join(format!("{label}.csv")), |w| write_curve(w, &row.curve))?;
        print_row(row);
    }
    let series: Vec<(&str, &crate::experiment::LearningCurve)> =
        labels.iter().map(String::as_str).zip(rows.iter().map(|r| &r.curve)).collect();
    let svg = curve_svg("median episodic reward", &series);
    write_out(&a.out.join("compare.svg"), |w| w.write_all(svg.as_bytes()))?;
    Ok(())
}

/// Manifest in `dir` or its parent.
fn find_manifest(dir: &Path) -> Option<PathBuf> {
    [Some(dir), dir.parent()]
        .into_iter()
        .flatten()
        .map(|d| d.join(MANIFEST))
        .find(|p| p.exists())
}

fn load_manifest(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_ctx(path))?;
    experiment_from(&KeyValues::parse(&text)?)
}

/// Repetition index from a directory named `r<N>`.
fn repetition_of(dir: &Path) -> Result<usize> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix('r'))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| {
            Error::Config(format!(
                "run directory {} is not named r<repetition>",
                dir.display()
            ))
        })
}

fn cmd_analyze(a: Analyze) -> Result<()> {
    match a {
        Analyze::Interference { controller, warmup, steps, out } => {
            let kind: ControllerKind = controller.parse()?;
            let trace = controller_trace(kind, warmup, steps)?;
            let neighbors = ring_neighbors(trace[0].len());
            let (start, flags) = non_neighbor_overlap(&trace, &neighbors)?;
            let fraction = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
            create_dir(&out)?;
            let covered = &trace[start..start + flags.len()];
            write_out(&out.join(format!("interference_{kind}.csv")), |w| {
                write_interference(w, covered, &flags)
            })?;
            println!("{fraction:.6}");
            Ok(())
        }
        Analyze::Landscape { checkpoint, direction, grid, controller, seed, out } => {
            if !checkpoint.exists() {
                return Err(Error::Config(format!(
                    "checkpoint {} not found",
                    checkpoint.display()
                )));
            }
            let file = fs::File::open(&checkpoint).map_err(io_ctx(&checkpoint))?;
            let ck = read_checkpoint(std::io::BufReader::new(file))?;
            let dir = checkpoint.parent().unwrap_or(Path::new("."));
            let mut cfg = match find_manifest(dir) {
                Some(m) => load_manifest(&m)?,
                None => ExperimentConfig::new(
                    ControllerKind::Sme,
                    crate::learners::LearnerKind::Agol,
                    crate::experiment::Schedule::Online,
                ),
            };
            if let Some(c) = controller {
                cfg.controller = c.parse()?;
            }
            let scales = parse_grid(&grid)?;
            let env = env_config(&cfg);
            let mut rng = repetition_rng(seed, 0);
            let batch = sample_batch(
                cfg.controller,
                &env,
                &ck.theta,
                &ck.sigma,
                cfg.batch_window,
                cfg.steps_per_episode,
                &mut rng,
            )?;
            let dirs = update_directions(&batch, cfg.schedule, &ck.baseline)?;
            let (name, d) = match direction {
                Direction::Agol => ("agol", &dirs.agol),
                Direction::Pgpe => ("pgpe", &dirs.pgpe),
            };
            let points = reward_landscape(&ck.theta, d, cfg.controller, &env, &scales, cfg.steps_per_episode)?;
            let out = out.unwrap_or_else(|| dir.to_path_buf());
            create_dir(&out)?;
            write_out(&out.join(format!("landscape_{name}.csv")), |w| write_landscape(w, &points))?;
            let svg = landscape_svg(&format!("{} {name} direction", cfg.controller), &points);
            write_out(&out.join(format!("landscape_{name}.svg")), |w| w.write_all(svg.as_bytes()))?;
            Ok(())
        }
        Analyze::Traces { run, out } => {
            if !run.is_dir() {
                return Err(Error::Config(format!("run directory {} not found", run.display())));
            }
            let manifest_path = find_manifest(&run).ok_or_else(|| {
                Error::Config(format!("no {MANIFEST} in {} or its parent", run.display()))
            })?;
            let cfg = load_manifest(&manifest_path)?;
            let rep = repetition_of(&run)?;
            let result = run_repetition(&cfg, rep)?;
            let rows = exploration_trace(&result.sigma_history, TRACE_WINDOW)?;
            let points = explored_joint_trajectories(&result.recorded);
            let out = out.unwrap_or(run);
            create_dir(&out)?;
            write_out(&out.join("exploration.csv"), |w| write_exploration(w, &rows))?;
            write_out(&out.join("trajectories.csv"), |w| write_trajectories(w, &points))?;
            Ok(())
        }
    }
}

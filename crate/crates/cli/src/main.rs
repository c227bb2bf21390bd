//! `prf`: train agents on perceptual rewards and inspect the results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prf_core::config::ExperimentConfig;
use prf_core::experiment::{self, EVAL_HEADER};
use prf_core::hog::{HogNorm, HogParams};
use prf_core::motion::{DeltaSchedule, MotionTemplateParams};
use prf_core::prf::{PrfParams, TaskDescriptor};
use prf_core::{pgm, Image, Reward};

#[derive(Parser)]
#[command(name = "prf", version, about = "Perceptual reward functions: training and inspection tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write train.csv, eval.csv, q.bin and frame dumps.
    Run(RunArgs),
    /// Evaluate a saved network with the greedy policy.
    Eval(EvalArgs),
    /// Score a directory of frames and write a ranked report with best/worst frames.
    RewardReport(ReportArgs),
    /// Per-episode distance between recorded agent templates and the goal.
    DistanceTrace(TraceArgs),
    /// Motion template of a directory of frames.
    Mt(MtArgs),
    /// HOG glyph rendering of an image.
    Hog(HogArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides run.out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Dump the frames of every Nth training episode.
    #[arg(long, value_name = "N")]
    frames_every: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// Goal from a config's descriptor section, or a direct goal image given inline.
#[derive(Args)]
struct GoalArgs {
    #[arg(long, conflicts_with = "goal")]
    config: Option<PathBuf>,
    /// Direct goal image (PGM).
    #[arg(long)]
    goal: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    cell_fraction: f64,
    #[arg(long, default_value_t = 9)]
    bins: usize,
    #[arg(long, default_value = "global-l2")]
    norm: HogNorm,
}

impl GoalArgs {
    fn reward(&self) -> Result<Reward> {
        match (&self.config, &self.goal) {
            (Some(path), None) => {
                let cfg = ExperimentConfig::load(path)?;
                let section = cfg
                    .reward
                    .descriptor
                    .as_ref()
                    .context("config has no [reward.descriptor] section")?;
                let desc = cfg.descriptor()?.expect("section present");
                Ok(Reward::new(desc, section.prf_params())?)
            }
            (None, Some(goal)) => {
                let image: Image = pgm::read(goal)?;
                let params = PrfParams {
                    cell_fraction: self.cell_fraction,
                    num_bins: self.bins,
                    norm: self.norm,
                };
                Ok(Reward::new(TaskDescriptor::Direct { goal: image }, params)?)
            }
            _ => bail!("give either --config or --goal"),
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    goal: GoalArgs,
    /// Directory of PGM frames to score.
    #[arg(long)]
    frames: PathBuf,
    /// Where report.csv, best.pgm and worst.pgm go.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    goal: GoalArgs,
    /// Run directory (with frames/) or a directory of episode subdirectories.
    #[arg(long)]
    run: PathBuf,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MtArgs {
    /// Directory of PGM frames, in file-name order.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    tau0: f64,
    #[arg(long, default_value_t = 0.3)]
    tau_increment: f64,
    /// inf, a number, or (t+K)/D.
    #[arg(long, default_value = "(t+1)/4")]
    delta: DeltaSchedule,
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
}

#[derive(Args)]
struct HogArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    cell: usize,
    #[arg(long, default_value_t = 9)]
    bins: usize,
    #[arg(long, default_value = "global-l2")]
    norm: HogNorm,
    /// Glyph side in pixels per cell.
    #[arg(long, default_value_t = 15)]
    glyph: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::RewardReport(a) => reward_report(a),
        Command::DistanceTrace(a) => distance_trace(a),
        Command::Mt(a) => mt(a),
        Command::Hog(a) => hog(a),
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    Ok(if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    })
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &a.out {
        cfg.run.out_dir = absolute(out)?;
    }
    if let Some(n) = a.frames_every {
        cfg.run.frames_every = n;
    }
    let report = experiment::run(&cfg, a.force)?;
    let last = report.evals.last().expect("at least one evaluation");
    println!(
        "{} episodes; final greedy mean score {} (goal rate {}); output in {}",
        report.episodes.len(),
        last.mean_score,
        last.goal_rate,
        report.out_dir.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.run.seed = seed;
    }
    let r = experiment::eval(&cfg, &a.checkpoint, a.episodes)?;
    println!("{EVAL_HEADER}");
    println!("{}", experiment::eval_row(&r));
    Ok(())
}

fn reward_report(a: ReportArgs) -> Result<()> {
    let prf = a.goal.reward()?;
    let rows = experiment::reward_report(&prf, &a.frames, &a.out)?;
    let best = &rows[0];
    let worst = rows.last().expect("non-empty");
    println!(
        "{} frames; best {} (reward {}), worst {} (reward {})",
        rows.len(),
        best.file,
        best.reward,
        worst.file,
        worst.reward
    );
    Ok(())
}

fn distance_trace(a: TraceArgs) -> Result<()> {
    let prf = a.goal.reward()?;
    let csv = experiment::trace_csv(&experiment::distance_trace(&prf, &a.run)?);
    match a.out {
        Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn mt(a: MtArgs) -> Result<()> {
    let params = MotionTemplateParams {
        tau0: a.tau0,
        tau_increment: a.tau_increment,
        delta: a.delta,
        silhouette_threshold: a.threshold,
    };
    let img = experiment::motion_template_image(&a.frames, &params)?;
    pgm::write(&a.out, &img)?;
    Ok(())
}

fn hog(a: HogArgs) -> Result<()> {
    let img: Image = pgm::read(&a.image)?;
    let params = HogParams::new(a.cell, a.bins)?.with_norm(a.norm);
    pgm::write(&a.out, &experiment::hog_glyph_image(&img, &params, a.glyph)?)?;
    Ok(())
}

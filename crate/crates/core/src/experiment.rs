//! Training runs and the inspection tools built on them.
//!
//! Output files of [`run`]:
//!
//! * `train.csv` — `episode,mode,total_reward,score,epsilon,loss_mean,distance_D`
//! * `eval.csv` — `episode,mean_score,mean_vrf,goal_rate,mean_distance_D`
//! * `q.bin` — final network (layout in [`crate::agent::mlp`])
//! * `config.toml` — the resolved configuration
//! * `frames/epNNNNN/NNNN.pgm` — mirror states of every `frames_every`-th episode,
//!   plus `ta.pgm` (final agent template) when a descriptor is configured
//!
//! Empty cells in a CSV mean "not applicable" (no update ran, no descriptor).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::agent::episode::EpisodeSpec;
use crate::agent::{run_episode, EpisodeMode, EpisodeSummary, InputKind, Learner, Mlp};
use crate::config::ExperimentConfig;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::hog::{hog_features, render_glyphs, HogParams};
use crate::motion::{compute_mt, MotionTemplateParams};
use crate::prf::{reward_from_distance, PerceptualTemplate};
use crate::{pgm, Image, Reward};

pub const TRAIN_HEADER: &str = "episode,mode,total_reward,score,epsilon,loss_mean,distance_D";
pub const EVAL_HEADER: &str = "episode,mean_score,mean_vrf,goal_rate,mean_distance_D";
pub const REPORT_HEADER: &str = "rank,file,reward,distance_D";
pub const TRACE_HEADER: &str = "episode,frames,distance_D";

const STREAM_TRAIN: u64 = 1;
const STREAM_EVAL: u64 = 2;
const STREAM_LEARNER: u64 = 3;

/// Deterministic per-purpose seed derivation (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based.
    pub episode: usize,
    pub epsilon: f64,
    pub summary: EpisodeSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// Training episodes completed before this evaluation.
    pub episode: usize,
    pub episodes: usize,
    pub mean_score: f64,
    pub mean_vrf: f64,
    /// Fraction of episodes that reached the goal (GridNav; 0 elsewhere).
    pub goal_rate: f64,
    pub mean_distance: Option<f64>,
}

/// One environment, one reward, one learner.
pub struct Trainer {
    config: ExperimentConfig,
    env: Box<dyn Environment>,
    prf: Option<Reward>,
    learner: Learner<f64>,
    input: InputKind,
    episode: usize,
}

impl Trainer {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = config.build_env()?;
        let learner = Learner::new(
            config.learner.clone(),
            env.action_count(),
            derive_seed(config.run.seed, STREAM_LEARNER, 0),
        )?;
        Self::assemble(config, env, learner)
    }

    /// A trainer around a saved network, for evaluation.
    pub fn with_network(config: ExperimentConfig, q: Mlp<f64>) -> Result<Self> {
        config.validate()?;
        let env = config.build_env()?;
        if q.output_len() != env.action_count() {
            return Err(Error::Checkpoint(format!(
                "network has {} outputs, {} has {} actions",
                q.output_len(),
                config.env.name,
                env.action_count()
            )));
        }
        let learner = Learner::from_network(
            config.learner.clone(),
            q,
            derive_seed(config.run.seed, STREAM_LEARNER, 0),
        )?;
        Self::assemble(config, env, learner)
    }

    fn assemble(config: ExperimentConfig, env: Box<dyn Environment>, learner: Learner<f64>) -> Result<Self> {
        let prf = match (config.descriptor()?, &config.reward.descriptor) {
            (Some(desc), Some(section)) => Some(Reward::new(desc, section.prf_params())?),
            _ => None,
        };
        Ok(Self {
            input: config.input_kind(),
            config,
            env,
            prf,
            learner,
            episode: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn learner(&self) -> &Learner<f64> {
        &self.learner
    }

    pub fn prf(&self) -> Option<&Reward> {
        self.prf.as_ref()
    }

    /// Training episodes completed.
    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    fn play(&mut self, mode: EpisodeMode, seed: u64, record_frames: bool) -> Result<EpisodeSummary> {
        let spec = EpisodeSpec {
            reward_mode: self.config.reward.mode,
            prf: self.prf.as_ref(),
            input: self.input,
            ema_lambda: self.config.state.ema_lambda,
            mode,
            seed,
            record_frames,
        };
        run_episode(self.env.as_mut(), &mut self.learner, &spec)
    }

    pub fn train_episode(&mut self, record_frames: bool) -> Result<EpisodeRecord> {
        let epsilon = self.config.learner.epsilon(self.episode);
        let seed = derive_seed(self.config.run.seed, STREAM_TRAIN, self.episode as u64);
        let summary = self.play(EpisodeMode::Train { epsilon }, seed, record_frames)?;
        self.episode += 1;
        Ok(EpisodeRecord {
            episode: self.episode,
            epsilon,
            summary,
        })
    }

    /// Runs `episodes` evaluation episodes on a fixed seed set. `epsilon = 0`
    /// is the greedy policy; `epsilon = 1` is the uniform random policy.
    pub fn evaluate_with(&mut self, episodes: usize, epsilon: f64) -> Result<EvalRecord> {
        let mut summaries = Vec::with_capacity(episodes);
        for i in 0..episodes {
            let seed = derive_seed(self.config.run.seed, STREAM_EVAL, i as u64);
            summaries.push(self.play(EpisodeMode::Eval { epsilon }, seed, false)?);
        }
        Ok(aggregate(self.episode, &summaries))
    }

    pub fn evaluate(&mut self, episodes: usize) -> Result<EvalRecord> {
        self.evaluate_with(episodes, 0.0)
    }
}

fn aggregate(episode: usize, summaries: &[EpisodeSummary]) -> EvalRecord {
    let n = summaries.len().max(1) as f64;
    let distances: Vec<f64> = summaries.iter().filter_map(|s| s.final_distance).collect();
    EvalRecord {
        episode,
        episodes: summaries.len(),
        mean_score: summaries.iter().map(|s| s.score).sum::<f64>() / n,
        mean_vrf: summaries.iter().map(|s| s.vrf_total).sum::<f64>() / n,
        goal_rate: summaries.iter().filter(|s| s.goal_reached).count() as f64 / n,
        mean_distance: (!distances.is_empty()).then(|| distances.iter().sum::<f64>() / distances.len() as f64),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn train_row(r: &EpisodeRecord, mode: &str) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.episode,
        mode,
        r.summary.total_reward,
        r.summary.score,
        r.epsilon,
        opt(r.summary.loss_mean),
        opt(r.summary.final_distance)
    )
}

pub fn eval_row(r: &EvalRecord) -> String {
    format!(
        "{},{},{},{},{}",
        r.episode,
        r.mean_score,
        r.mean_vrf,
        r.goal_rate,
        opt(r.mean_distance)
    )
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalRecord>,
}

const OWNED: [&str; 5] = ["train.csv", "eval.csv", "q.bin", "config.toml", "frames"];

/// Prepares `dir` for a run: refuses a non-empty directory unless `force`, in
/// which case previous run artifacts are removed.
fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::config(
                "run.out_dir",
                format!("{} is not empty; pass --force to overwrite", dir.display()),
            ));
        }
        for name in OWNED {
            let p = dir.join(name);
            let res = if p.is_dir() {
                fs::remove_dir_all(&p)
            } else if p.exists() {
                fs::remove_file(&p)
            } else {
                Ok(())
            };
            res.map_err(|e| Error::io(&p, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trains per the config and writes the run artifacts.
pub fn run(config: &ExperimentConfig, force: bool) -> Result<RunReport> {
    let out = config.out_dir();
    let mut trainer = Trainer::new(config.clone())?;
    prepare_out_dir(&out, force)?;
    let resolved = toml::to_string(config).map_err(|e| Error::config("<config>", e.to_string()))?;
    write_file(&out.join("config.toml"), &resolved)?;

    let mode = config.reward.mode.to_string();
    let mut train_csv = format!("{TRAIN_HEADER}\n");
    let mut eval_csv = format!("{EVAL_HEADER}\n");
    let mut episodes = Vec::with_capacity(config.run.episodes);
    let mut evals = Vec::new();
    let every = config.run.frames_every;
    for e in 1..=config.run.episodes {
        let record_frames = every > 0 && e % every == 0;
        let rec = trainer.train_episode(record_frames)?;
        writeln!(train_csv, "{}", train_row(&rec, &mode)).expect("string write");
        if record_frames {
            dump_frames(&out.join("frames").join(format!("ep{e:05}")), &rec.summary.frames, trainer.prf())?;
        }
        episodes.push(EpisodeRecord {
            summary: EpisodeSummary {
                frames: Vec::new(),
                ..rec.summary
            },
            ..rec
        });
        if e % config.run.eval_every == 0 || e == config.run.episodes {
            let ev = trainer.evaluate(config.run.eval_episodes)?;
            writeln!(eval_csv, "{}", eval_row(&ev)).expect("string write");
            evals.push(ev);
        }
    }
    write_file(&out.join("train.csv"), &train_csv)?;
    write_file(&out.join("eval.csv"), &eval_csv)?;
    trainer.learner().network().save(out.join("q.bin"))?;
    Ok(RunReport {
        out_dir: out,
        episodes,
        evals,
    })
}

fn dump_frames(dir: &Path, frames: &[Image], prf: Option<&Reward>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, f) in frames.iter().enumerate() {
        pgm::write(dir.join(format!("{t:04}.pgm")), f)?;
    }
    if let Some(p) = prf {
        let last = frames.last().expect("episodes record the reset frame");
        let ta = crate::prf::agent_template(p.descriptor(), last, frames)?;
        pgm::write(dir.join("ta.pgm"), &ta.image)?;
    }
    Ok(())
}

/// Evaluates a saved network with the greedy policy.
pub fn eval(config: &ExperimentConfig, checkpoint: &Path, episodes: usize) -> Result<EvalRecord> {
    let q = Mlp::load(checkpoint)?;
    Trainer::with_network(config.clone(), q)?.evaluate(episodes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub rank: usize,
    pub file: String,
    pub reward: f64,
    pub distance: f64,
}

/// Scores every PGM frame in `frames_dir` and writes `report.csv`,
/// `best.pgm` and `worst.pgm` into `out_dir`. Rows are ranked by reward,
/// highest first; ties keep file-name order.
pub fn reward_report(prf: &Reward, frames_dir: &Path, out_dir: &Path) -> Result<Vec<ReportRow>> {
    if prf.descriptor().is_motion() {
        return Err(Error::config(
            "reward.descriptor.kind",
            "reward-report scores single frames; use distance-trace for motion descriptors",
        ));
    }
    let paths = pgm::list_frames(frames_dir)?;
    if paths.is_empty() {
        return Err(Error::InvalidImage(format!("no .pgm frames in {}", frames_dir.display())));
    }
    let mut rows = Vec::with_capacity(paths.len());
    for p in &paths {
        let img: Image = pgm::read(p)?;
        let distance = prf.frame_distance(&img)?;
        rows.push(ReportRow {
            rank: 0,
            file: p.file_name().expect("listed file").to_string_lossy().into_owned(),
            reward: reward_from_distance(distance),
            distance,
        });
    }
    // Stable sort keeps name order among equal rewards.
    rows.sort_by(|a, b| b.reward.total_cmp(&a.reward));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut csv = format!("{REPORT_HEADER}\n");
    for r in &rows {
        writeln!(csv, "{},{},{},{}", r.rank, r.file, r.reward, r.distance).expect("string write");
    }
    write_file(&out_dir.join("report.csv"), &csv)?;
    for (name, row) in [("best.pgm", rows.first()), ("worst.pgm", rows.last())] {
        let src = frames_dir.join(&row.expect("non-empty").file);
        let dst = out_dir.join(name);
        fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: String,
    pub frames: usize,
    pub distance: f64,
}

/// Per-episode distance between the agent template of each recorded episode
/// and the goal. `root` is a run directory (its `frames/` is used) or a
/// directory of episode subdirectories, each holding numbered PGM frames.
pub fn distance_trace(prf: &Reward, root: &Path) -> Result<Vec<TraceRow>> {
    let base = if root.join("frames").is_dir() {
        root.join("frames")
    } else {
        root.to_path_buf()
    };
    let mut dirs: Vec<PathBuf> = fs::read_dir(&base)
        .map_err(|e| Error::io(&base, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut rows = Vec::new();
    for dir in dirs {
        let frames: Vec<Image> = pgm::list_frames(&dir)?
            .into_iter()
            .filter(|p| p.file_stem().is_some_and(|s| s != "ta"))
            .map(pgm::read)
            .collect::<Result<_>>()?;
        let Some(last) = frames.last() else {
            continue;
        };
        let ta = crate::prf::agent_template(prf.descriptor(), last, &frames)?;
        let name = dir.file_name().expect("listed dir").to_string_lossy();
        rows.push(TraceRow {
            episode: name.strip_prefix("ep").unwrap_or(&name).trim_start_matches('0').to_string(),
            frames: frames.len(),
            distance: prf.distance(&ta)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidImage(format!(
            "no recorded episodes under {}; run with frames_every > 0",
            base.display()
        )));
    }
    Ok(rows)
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut csv = format!("{TRACE_HEADER}\n");
    for r in rows {
        let ep = if r.episode.is_empty() { "0" } else { &r.episode };
        writeln!(csv, "{ep},{},{}", r.frames, r.distance).expect("string write");
    }
    csv
}

/// Motion template of a directory of frames, exported to `[0,1]`.
pub fn motion_template_image(frames_dir: &Path, params: &MotionTemplateParams) -> Result<Image> {
    let frames: Vec<Image> = pgm::read_frames(frames_dir)?;
    Ok(compute_mt(&frames, params)?.export())
}

/// HOG glyph rendering of an image, `glyph_px` pixels per cell.
pub fn hog_glyph_image(img: &Image, params: &HogParams, glyph_px: usize) -> Result<Image> {
    Ok(render_glyphs(&hog_features(img, params)?, glyph_px))
}

/// Convenience for the agent side of a comparison.
pub fn template_distance(prf: &Reward, image: Image) -> Result<f64> {
    prf.distance(&PerceptualTemplate::agent(image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GridNav, GridNavConfig, MiniBreakout};
    use crate::prf::{PrfParams, TaskDescriptor};

    fn smoke(out: &Path) -> ExperimentConfig {
        let text = format!(
            "[env]\nname = \"gridnav\"\n[reward]\nmode = \"prf\"\n[reward.descriptor]\nkind = \"direct\"\nbuiltin = \"gridnav-goal\"\ncell_fraction = 0.5\n[learner]\nlearning_starts = 20\nbatch_size = 8\nhidden = [16]\n[run]\nepisodes = 10\neval_every = 5\neval_episodes = 2\nseed = 3\nout_dir = \"{}\"\nframes_every = 5\n",
            out.display()
        );
        ExperimentConfig::parse(&text, "", Vec::new()).unwrap()
    }

    #[test]
    fn seeds_differ_by_stream_and_index() {
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 2, 0));
        assert_ne!(derive_seed(1, 1, 0), derive_seed(1, 1, 1));
        assert_eq!(derive_seed(5, 1, 9), derive_seed(5, 1, 9));
    }

    #[test]
    fn smoke_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let cfg = smoke(&out);
        let rep = run(&cfg, false).unwrap();
        let train = fs::read_to_string(out.join("train.csv")).unwrap();
        let lines: Vec<&str> = train.lines().collect();
        assert_eq!(lines[0], TRAIN_HEADER);
        assert_eq!(lines.len(), 11);
        assert!(lines[1].starts_with("1,prf,"));
        let eval_csv = fs::read_to_string(out.join("eval.csv")).unwrap();
        assert_eq!(eval_csv.lines().count(), 3);
        assert_eq!(rep.evals.len(), 2);
        assert!(out.join("q.bin").exists());
        assert!(out.join("frames/ep00005/0000.pgm").exists());
        assert!(out.join("frames/ep00010/ta.pgm").exists());

        // Non-empty output directory is refused without force.
        assert!(run(&cfg, false).is_err());
        run(&cfg, true).unwrap();
        assert_eq!(fs::read_to_string(out.join("train.csv")).unwrap(), train);

        let ev = eval(&cfg, &out.join("q.bin"), 2).unwrap();
        assert_eq!(ev.episodes, 2);
        assert_eq!(ev, rep.evals.last().map(|e| EvalRecord { episode: 0, ..e.clone() }).unwrap());

        let prf = Trainer::new(cfg).unwrap().prf().unwrap().clone();
        let trace = distance_trace(&prf, &out).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace[0].episode, "5");
        let recorded: f64 = rep.episodes[4].summary.final_distance.unwrap();
        assert!((trace[0].distance - recorded).abs() < 1e-2, "{} vs {recorded}", trace[0].distance);
    }

    #[test]
    fn report_ranks_goal_first() {
        let dir = tempfile::tempdir().unwrap();
        let frames = dir.path().join("frames");
        fs::create_dir(&frames).unwrap();
        let mut b = MiniBreakout::new(Default::default());
        b.reset(0);
        pgm::write(frames.join("a_twenty.pgm"), &b.with_bricks_left(20)).unwrap();
        pgm::write(frames.join("b_zero.pgm"), &b.with_bricks_left(0)).unwrap();
        let prf = Reward::new(
            TaskDescriptor::Direct {
                goal: Image::zeros(84, 84),
            },
            PrfParams {
                norm: crate::hog::HogNorm::SqrtArea,
                ..Default::default()
            },
        )
        .unwrap();
        let rows = reward_report(&prf, &frames, dir.path()).unwrap();
        assert_eq!(rows[0].file, "b_zero.pgm");
        assert_eq!(fs::read(dir.path().join("best.pgm")).unwrap(), fs::read(frames.join("b_zero.pgm")).unwrap());
        assert_eq!(fs::read(dir.path().join("worst.pgm")).unwrap(), fs::read(frames.join("a_twenty.pgm")).unwrap());

        let g = GridNav::new(GridNavConfig::default());
        let goal = g.goal_frame();
        pgm::write(frames.join("c_goal.pgm"), &goal).unwrap();
        let prf = Reward::new(TaskDescriptor::Direct { goal: pgm::read(frames.join("c_goal.pgm")).unwrap() }, PrfParams::default()).unwrap();
        let rows = reward_report(&prf, &frames, dir.path()).unwrap();
        assert_eq!(rows[0].file, "c_goal.pgm");
        assert_eq!(rows[0].reward, 1.0);

        let empty = dir.path().join("empty");
        fs::create_dir(&empty).unwrap();
        assert!(reward_report(&prf, &empty, dir.path()).is_err());
    }
}

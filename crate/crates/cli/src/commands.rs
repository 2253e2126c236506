//! Subcommand implementations. Each returns its in-memory results as well as
//! writing artifacts, so scripts and tests can use either.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use learnpath_core::agent::{rollout, ActionSelection, ActorCriticNet, EpisodeRecord, Rollout, Trainer, Variant};
use learnpath_core::akt::{next_response_accuracy, train_akt as fit_akt, AccuracyReport, AktLiteModel};
use learnpath_core::knowledge::{ExerciseCatalog, InteractionLog, KnowledgeState};
use learnpath_core::metrics::{area_mastery_matrix, div, LearningPath};
use learnpath_core::nn::{Checkpoint, RngStream};

use crate::config::{sha256_hex, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::history::{self, format_path, history_row, read_history, update_row, HISTORY_HEADER, UPDATES_HEADER};
use crate::logs::{generate_logs, read_logs, write_logs, StudentLog};

pub const HISTORY_FILE: &str = "history.csv";
pub const UPDATES_FILE: &str = "updates.csv";
pub const CURVES_FILE: &str = "curves.csv";
pub const HISTOGRAM_FILE: &str = "initial_apr_histogram.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const FAILURE_CHECKPOINT_FILE: &str = "failure.ckpt";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";

/// Evaluation students draw from streams clear of training episodes.
pub const EVAL_STREAM_BASE: u64 = 1 << 61;
pub const AKT_INIT_STREAM: u64 = 5 << 60;
pub const AKT_TRAIN_STREAM: u64 = (5 << 60) + 1;

/// Episodes per seed that make up the "final window" in comparisons.
pub const FINAL_WINDOW: usize = 100;

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> CliResult<()> {
    // write-then-rename so an interruption never leaves a torn checkpoint
    let tmp = path.with_extension("tmp");
    ckpt.save(&tmp).map_err(|e| CliError::from(e).context(&tmp.display().to_string()))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::load(path).map_err(|e| CliError::from(e).context(&path.display().to_string()))
}

/// Keeps the header plus the first `rows` data lines.
fn truncate_rows(path: &Path, rows: usize) -> CliResult<()> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let lines: Vec<&str> = text.lines().take(rows + 1).collect();
    if lines.len() < rows + 1 {
        return Err(CliError::new(
            "checkpoint",
            format!("{} holds {} rows but the checkpoint expects {rows}", path.display(), lines.len().saturating_sub(1)),
        ));
    }
    let mut out = lines.join("\n");
    out.push('\n');
    write_file(path, &out)
}

fn catalog_sha(catalog: &ExerciseCatalog) -> String {
    sha256_hex(catalog.to_delimited().as_bytes())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Continue from each seed's last checkpoint instead of starting over.
    pub resume: bool,
    /// Suppress progress lines on stderr.
    pub quiet: bool,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub history: Vec<EpisodeRecord>,
}

#[derive(serde::Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    fingerprint: String,
    catalog_sha256: String,
    variant: String,
    episodes: usize,
    seeds: Vec<ManifestSeed>,
}

#[derive(serde::Serialize)]
struct ManifestSeed {
    seed: u64,
    episodes: usize,
    history_sha256: String,
    checkpoint: String,
}

/// Trains every configured seed, writing per-seed artifacts under
/// `run.out_dir/seed-N/` and a manifest at the top.
pub fn train(cfg: &ExperimentConfig, opts: TrainOptions) -> CliResult<Vec<SeedRun>> {
    let cfg = cfg.resolved()?;
    let root = cfg.out_dir();
    fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
    write_file(&root.join(RESOLVED_CONFIG_FILE), &cfg.canonical_toml())?;
    let fingerprint = cfg.fingerprint()?;
    let catalog = cfg.catalog()?;

    let mut runs = Vec::new();
    let mut seeds = Vec::new();
    for &seed in &cfg.run.seeds {
        let run = train_seed(&cfg, seed, &fingerprint, opts)?;
        let bytes = fs::read(run.dir.join(HISTORY_FILE)).map_err(|e| CliError::io(&run.dir, e))?;
        seeds.push(ManifestSeed {
            seed,
            episodes: run.history.len(),
            history_sha256: sha256_hex(&bytes),
            checkpoint: format!("seed-{seed}/{CHECKPOINT_FILE}"),
        });
        runs.push(run);
    }
    let manifest = Manifest {
        tool: "learnpath",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.sha256(),
        fingerprint,
        catalog_sha256: catalog_sha(&catalog),
        variant: cfg.variant().to_string(),
        episodes: cfg.run.episodes,
        seeds,
    };
    write_file(&root.join(MANIFEST_FILE), &toml::to_string(&manifest).expect("manifest serializes"))?;
    Ok(runs)
}

fn train_seed(cfg: &ExperimentConfig, seed: u64, fingerprint: &str, opts: TrainOptions) -> CliResult<SeedRun> {
    let dir = seed_dir(&cfg.out_dir(), seed);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let (history_path, updates_path, ckpt_path) = (dir.join(HISTORY_FILE), dir.join(UPDATES_FILE), dir.join(CHECKPOINT_FILE));
    let env = cfg.env()?;
    let cat_sha = catalog_sha(env.catalog());
    let hyper = cfg.agent.hyper();

    let mut trainer = if opts.resume && ckpt_path.exists() {
        let ckpt = load_checkpoint(&ckpt_path)?;
        if ckpt.meta("fingerprint")? != fingerprint {
            return Err(CliError::config(format!(
                "{} was written under a different catalog/environment/goal/agent configuration; remove it or train without --resume",
                ckpt_path.display()
            )));
        }
        let t = Trainer::from_checkpoint(env, hyper, &ckpt)?;
        if t.variant() != cfg.variant() || t.seed() != seed {
            return Err(CliError::config(format!("{} belongs to {} seed {}", ckpt_path.display(), t.variant(), t.seed())));
        }
        truncate_rows(&history_path, t.episodes_done())?;
        truncate_rows(&updates_path, t.updates() as usize)?;
        t
    } else {
        for stale in [&ckpt_path, &dir.join(FAILURE_CHECKPOINT_FILE)] {
            if stale.exists() {
                fs::remove_file(stale).map_err(|e| CliError::io(stale, e))?;
            }
        }
        write_file(&history_path, &format!("{HISTORY_HEADER}\n"))?;
        write_file(&updates_path, &format!("{UPDATES_HEADER}\n"))?;
        Trainer::new(env, cfg.variant(), hyper, seed)?
    }
    .with_parallel(cfg.run.parallel);

    let total = cfg.run.episodes;
    if trainer.episodes_done() > total {
        return Err(CliError::config(format!(
            "checkpoint has {} episodes but run.episodes is {total}",
            trainer.episodes_done()
        )));
    }
    let append = |p: &Path| -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(OpenOptions::new().append(true).open(p).map_err(|e| CliError::io(p, e))?))
    };
    let mut history_out = append(&history_path)?;
    let mut updates_out = append(&updates_path)?;
    let tag = |mut c: Checkpoint| {
        c.set_meta("fingerprint", fingerprint);
        c.set_meta("catalog_sha256", &cat_sha);
        c
    };

    let block = cfg.run.checkpoint_every * hyper.episodes_per_update;
    loop {
        let done = trainer.episodes_done();
        if done >= total {
            break;
        }
        let end = ((done / block + 1) * block).min(total);
        let mut io_err = None;
        let result = trainer.run_with(end - done, |rec| {
            if io_err.is_none() {
                io_err = writeln!(history_out, "{}", history_row(rec)).err();
            }
        });
        if let Some(e) = io_err {
            return Err(CliError::io(&history_path, e));
        }
        let updates = match &result {
            Ok(h) => &h.updates,
            Err(f) => &f.history.updates,
        };
        for u in updates {
            writeln!(updates_out, "{}", update_row(u)).map_err(|e| CliError::io(&updates_path, e))?;
        }
        history_out.flush().map_err(|e| CliError::io(&history_path, e))?;
        updates_out.flush().map_err(|e| CliError::io(&updates_path, e))?;
        match result {
            Ok(_) => save_checkpoint(&tag(trainer.to_checkpoint()), &ckpt_path)?,
            Err(failure) => {
                let path = dir.join(FAILURE_CHECKPOINT_FILE);
                save_checkpoint(&tag(failure.checkpoint.clone()), &path)?;
                return Err(CliError::from(failure.error)
                    .context(&format!("seed {seed}: {}; state saved to {}", failure.diagnostics, path.display())));
            }
        }
        if !opts.quiet {
            eprintln!("{} seed {seed}: {}/{total} episodes", cfg.variant(), trainer.episodes_done());
        }
    }
    if !ckpt_path.exists() {
        save_checkpoint(&tag(trainer.to_checkpoint()), &ckpt_path)?;
    }
    drop((history_out, updates_out));

    let file = File::open(&history_path).map_err(|e| CliError::io(&history_path, e))?;
    let records = read_history(file).map_err(|e| e.context(&history_path.display().to_string()))?;
    write_file(&dir.join(CURVES_FILE), &history::render_curves(&records, cfg.run.curve_window))?;
    let initial: Vec<f64> = records.iter().map(|r| r.initial_apr).collect();
    write_file(&dir.join(HISTOGRAM_FILE), &history::render_histogram(&initial)?)?;
    Ok(SeedRun {
        seed,
        dir,
        history: records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSummary {
    pub final_apr: f64,
    pub path_length: f64,
    pub cumulative_reward: f64,
    /// Undefined when the window holds fewer than two paths.
    pub div: Option<f64>,
}

/// Means over the last `window` episodes, plus DIV of their paths.
pub fn window_summary(history: &[EpisodeRecord], window: usize, exercise_count: usize) -> CliResult<WindowSummary> {
    if history.is_empty() {
        return Err(CliError::config("cannot summarize a run with no episodes"));
    }
    let tail = &history[history.len().saturating_sub(window.max(1))..];
    let n = tail.len() as f64;
    let paths: Vec<LearningPath> = tail
        .iter()
        .map(|r| LearningPath::new(r.path.clone(), exercise_count))
        .collect::<Result<_, _>>()?;
    Ok(WindowSummary {
        final_apr: tail.iter().map(|r| r.final_apr).sum::<f64>() / n,
        path_length: tail.iter().map(|r| r.path_length as f64).sum::<f64>() / n,
        cumulative_reward: tail.iter().map(|r| r.cumulative_reward).sum::<f64>() / n,
        div: if paths.len() >= 2 { Some(div(&paths)?) } else { None },
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ComparedRun {
    pub label: String,
    pub variant: Variant,
    pub seeds: Vec<(u64, WindowSummary)>,
    pub histories: Vec<Vec<EpisodeRecord>>,
}

impl ComparedRun {
    fn column(&self, f: impl Fn(&WindowSummary) -> Option<f64>) -> Option<(f64, f64)> {
        let v: Option<Vec<f64>> = self.seeds.iter().map(|(_, s)| f(s)).collect();
        v.filter(|v| !v.is_empty()).map(|v| mean_std(&v))
    }

    pub fn final_apr(&self) -> (f64, f64) {
        self.column(|s| Some(s.final_apr)).expect("non-empty")
    }

    pub fn path_length(&self) -> (f64, f64) {
        self.column(|s| Some(s.path_length)).expect("non-empty")
    }

    pub fn cumulative_reward(&self) -> (f64, f64) {
        self.column(|s| Some(s.cumulative_reward)).expect("non-empty")
    }

    pub fn div(&self) -> Option<(f64, f64)> {
        self.column(|s| s.div)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    pub out: Option<PathBuf>,
    pub window: Option<usize>,
    pub quiet: bool,
}

/// Trains (or resumes to completion) each configuration, then writes per-seed
/// rows, mean±std summaries with deltas against the first run, and
/// seed-averaged curves aligned by episode.
pub fn compare(cfgs: &[ExperimentConfig], opts: &CompareOptions) -> CliResult<Vec<ComparedRun>> {
    if cfgs.len() < 2 {
        return Err(CliError::new("usage", "compare needs at least two configurations"));
    }
    let catalogs: Vec<String> = cfgs.iter().map(|c| Ok(c.catalog()?.to_delimited())).collect::<CliResult<_>>()?;
    if let Some(i) = catalogs.iter().position(|c| c != &catalogs[0]) {
        return Err(CliError::new("catalog", format!("configuration {} uses a different exercise catalog than configuration 0", i)));
    }
    let exercise_count = cfgs[0].catalog()?.len();
    let window = opts.window.unwrap_or(FINAL_WINDOW);

    let mut runs = Vec::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        let seed_runs = train(cfg, TrainOptions { resume: true, quiet: opts.quiet })?;
        let mut seeds = Vec::new();
        let mut histories = Vec::new();
        for r in seed_runs {
            seeds.push((r.seed, window_summary(&r.history, window, exercise_count)?));
            histories.push(r.history);
        }
        runs.push(ComparedRun {
            label: format!("{i}-{}", cfg.variant()),
            variant: cfg.variant(),
            seeds,
            histories,
        });
    }

    let out = match &opts.out {
        Some(p) => p.clone(),
        None => cfgs[0].out_dir().join("compare"),
    };
    write_file(&out.join("compare_seeds.csv"), &render_compare_seeds(&runs))?;
    write_file(&out.join("compare_summary.csv"), &render_compare_summary(&runs))?;
    let curve_window = cfgs[0].run.curve_window;
    write_file(&out.join("compare_curves.csv"), &render_compare_curves(&runs, curve_window))?;
    Ok(runs)
}

fn render_compare_seeds(runs: &[ComparedRun]) -> String {
    let mut out = String::from("run,variant,seed,final_apr,path_length,cumulative_reward,div\n");
    for r in runs {
        for (seed, s) in &r.seeds {
            let _ = writeln!(
                out,
                "{},{},{seed},{},{},{},{}",
                r.label,
                r.variant,
                s.final_apr,
                s.path_length,
                s.cumulative_reward,
                fmt_opt(s.div)
            );
        }
    }
    out
}

fn render_compare_summary(runs: &[ComparedRun]) -> String {
    let mut out = String::from(
        "run,variant,seeds,final_apr_mean,final_apr_std,path_length_mean,path_length_std,cumulative_reward_mean,\
         cumulative_reward_std,div_mean,div_std,d_final_apr,d_path_length,d_cumulative_reward,d_div\n",
    );
    let base = &runs[0];
    for r in runs {
        let (a, b, c, d) = (r.final_apr(), r.path_length(), r.cumulative_reward(), r.div());
        let delta_div = match (d, base.div()) {
            (Some(x), Some(y)) => Some(x.0 - y.0),
            _ => None,
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.variant,
            r.seeds.len(),
            a.0,
            a.1,
            b.0,
            b.1,
            c.0,
            c.1,
            fmt_opt(d.map(|x| x.0)),
            fmt_opt(d.map(|x| x.1)),
            a.0 - base.final_apr().0,
            b.0 - base.path_length().0,
            c.0 - base.cumulative_reward().0,
            fmt_opt(delta_div)
        );
    }
    out
}

fn render_compare_curves(runs: &[ComparedRun], window: usize) -> String {
    let mut out = String::from("episode");
    for r in runs {
        let _ = write!(out, ",{0}_final_apr_ma,{0}_path_length_ma,{0}_cumulative_reward_ma", r.label);
    }
    out.push('\n');
    // per run: seed-averaged moving averages, defined while every seed has the episode
    let curves: Vec<[Vec<f64>; 3]> = runs
        .iter()
        .map(|r| {
            let len = r.histories.iter().map(Vec::len).min().unwrap_or(0);
            let mut acc = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
            for h in &r.histories {
                let c = learnpath_core::metrics::training_curves(&h[..len], window);
                for (dst, src) in acc.iter_mut().zip([&c.final_apr, &c.path_length, &c.cumulative_reward]) {
                    for (d, s) in dst.iter_mut().zip(&src.smoothed) {
                        *d += s / r.histories.len() as f64;
                    }
                }
            }
            acc
        })
        .collect();
    let rows = curves.iter().map(|c| c[0].len()).max().unwrap_or(0);
    for t in 0..rows {
        let _ = write!(out, "{t}");
        for c in &curves {
            for col in c {
                let _ = write!(out, ",{}", fmt_opt(col.get(t).copied()));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Defaults to `run.out_dir/seed-N/checkpoint.ckpt`.
    pub checkpoint: Option<PathBuf>,
    pub students: Option<usize>,
    /// Defaults to the first configured seed.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rollouts: Vec<Rollout>,
    /// Undefined for fewer than two students.
    pub div: Option<f64>,
    pub out_dir: PathBuf,
}

/// Rolls out a frozen policy on fresh students and writes trajectories,
/// per-student summaries, per-area mastery over time and cohort DIV.
pub fn eval(cfg: &ExperimentConfig, opts: &EvalOptions) -> CliResult<EvalReport> {
    let seed = opts.seed.unwrap_or(cfg.run.seeds[0]);
    let ckpt_path = match &opts.checkpoint {
        Some(p) => p.clone(),
        None => seed_dir(&cfg.out_dir(), seed).join(CHECKPOINT_FILE),
    };
    let ckpt = load_checkpoint(&ckpt_path)?;
    let env = cfg.env()?;
    let catalog = env.catalog().clone();
    if let Ok(sha) = ckpt.meta("catalog_sha256") {
        if sha != catalog_sha(&catalog) {
            return Err(CliError::new(
                "catalog",
                format!("{} was trained on a different exercise catalog", ckpt_path.display()),
            ));
        }
    }
    let net = ActorCriticNet::from_checkpoint(&ckpt).map_err(|e| CliError::from(e).context(&ckpt_path.display().to_string()))?;
    if net.action_count() != catalog.len() {
        return Err(CliError::new(
            "catalog",
            format!("checkpoint policy has {} actions but the catalog has {} exercises", net.action_count(), catalog.len()),
        ));
    }
    let selection = if cfg.eval.greedy {
        ActionSelection::Greedy
    } else {
        ActionSelection::Sample
    };
    let students = opts.students.unwrap_or(cfg.eval.students);
    let rollouts: Vec<Rollout> = (0..students)
        .map(|i| rollout(&env, &net, &mut RngStream::new(seed, EVAL_STREAM_BASE + i as u64), selection))
        .collect::<Result<_, _>>()?;

    let paths: Vec<LearningPath> = rollouts
        .iter()
        .map(|r| LearningPath::new(r.path(), catalog.len()))
        .collect::<Result<_, _>>()?;
    let cohort_div = if paths.len() >= 2 { Some(div(&paths)?) } else { None };

    let out_dir = opts.out.clone().unwrap_or_else(|| seed_dir(&cfg.out_dir(), seed).join("eval"));
    let mut traj = String::from("student,step,action,correct,apr,reward,lg,d,lambda,n_action,branch,done\n");
    let mut summary = String::from("student,initial_apr,final_apr,path_length,cumulative_reward,reached_goal,path\n");
    let mut areas = String::from("student,step,area,mastery\n");
    for (i, r) in rollouts.iter().enumerate() {
        for (s, t) in r.steps.iter().zip(&r.transitions) {
            let f = &s.info;
            let _ = writeln!(
                traj,
                "{i},{},{},{},{},{},{},{},{},{},{},{}",
                f.step,
                f.action,
                s.correct as u8,
                f.apr,
                s.reward,
                f.learning_gain,
                f.distance,
                f.lambda,
                f.n_action,
                f.branch.as_str(),
                t.done as u8
            );
        }
        let _ = writeln!(
            summary,
            "{i},{},{},{},{},{},{}",
            r.initial_apr,
            r.final_apr,
            r.transitions.len(),
            r.cumulative_reward(),
            r.reached_goal as u8,
            format_path(&r.path())
        );
        let mut states = Vec::with_capacity(r.transitions.len() + 1);
        if let Some(first) = r.transitions.first() {
            states.push(KnowledgeState::from_probs(first.state.clone())?);
        }
        for t in &r.transitions {
            states.push(KnowledgeState::from_probs(t.next_state.clone())?);
        }
        let matrix = area_mastery_matrix(&states, &catalog)?;
        for step in 0..states.len() {
            for (area, row) in matrix.iter().enumerate() {
                let _ = writeln!(areas, "{i},{step},{area},{}", fmt_opt(row[step]));
            }
        }
    }
    let n = rollouts.len().max(1) as f64;
    let cohort = format!(
        "students,div,mean_final_apr,mean_path_length,mean_cumulative_reward,goal_rate\n{},{},{},{},{},{}\n",
        rollouts.len(),
        fmt_opt(cohort_div),
        rollouts.iter().map(|r| r.final_apr).sum::<f64>() / n,
        rollouts.iter().map(|r| r.transitions.len() as f64).sum::<f64>() / n,
        rollouts.iter().map(Rollout::cumulative_reward).sum::<f64>() / n,
        rollouts.iter().filter(|r| r.reached_goal).count() as f64 / n
    );
    write_file(&out_dir.join("eval_trajectories.csv"), &traj)?;
    write_file(&out_dir.join("eval_students.csv"), &summary)?;
    write_file(&out_dir.join("eval_area_mastery.csv"), &areas)?;
    write_file(&out_dir.join("eval_summary.csv"), &cohort)?;
    Ok(EvalReport {
        rollouts,
        div: cohort_div,
        out_dir,
    })
}

#[derive(Debug, Clone, Default)]
pub struct GenLogsOptions {
    pub students: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    /// Defaults to `run.out_dir/logs.csv`.
    pub out: Option<PathBuf>,
}

pub fn gen_logs(cfg: &ExperimentConfig, opts: &GenLogsOptions) -> CliResult<(PathBuf, Vec<StudentLog>)> {
    let catalog = cfg.catalog()?;
    let env = cfg.env()?;
    let logs = generate_logs(
        &catalog,
        &env.config().profile,
        env.config().dynamics,
        opts.students.unwrap_or(cfg.logs.students),
        opts.steps.unwrap_or(cfg.logs.steps),
        opts.seed.unwrap_or(cfg.run.seeds[0]),
    )?;
    let path = opts.out.clone().unwrap_or_else(|| cfg.out_dir().join("logs.csv"));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_logs(BufWriter::new(file), &logs)?;
    Ok((path, logs))
}

pub fn ingest_logs(cfg: &ExperimentConfig, path: &Path) -> CliResult<Vec<StudentLog>> {
    let catalog = cfg.catalog()?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_logs(std::io::BufReader::new(file), &catalog).map_err(|e| e.context(&path.display().to_string()))
}

#[derive(Debug, Clone, Default)]
pub struct TrainAktOptions {
    pub seed: Option<u64>,
    /// Defaults to `run.out_dir/akt`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AktRun {
    pub curve: Vec<f64>,
    /// Held-out accuracy; absent when `akt.holdout` leaves no held-out logs.
    pub accuracy: Option<AccuracyReport>,
    pub checkpoint: PathBuf,
    pub model: AktLiteModel,
}

/// Fits akt-lite on the leading logs and scores next-response prediction on
/// the trailing `akt.holdout` share against the majority-class baseline.
pub fn train_akt(cfg: &ExperimentConfig, logs: &[StudentLog], opts: &TrainAktOptions) -> CliResult<AktRun> {
    let catalog = cfg.catalog()?;
    let seed = opts.seed.unwrap_or(cfg.run.seeds[0]);
    let all: Vec<InteractionLog> = logs.iter().map(|s| s.log.clone()).filter(|l| !l.is_empty()).collect();
    let held = (all.len() as f64 * cfg.akt.holdout).round() as usize;
    let (train, test) = all.split_at(all.len() - held);
    if train.is_empty() {
        return Err(CliError::config("train-akt needs at least one non-empty training log"));
    }
    let mut model = AktLiteModel::new(catalog.len(), cfg.akt.width, &mut RngStream::new(seed, AKT_INIT_STREAM))?;
    let curve = fit_akt(&mut model, train, cfg.akt_hyper(), &mut RngStream::new(seed, AKT_TRAIN_STREAM))?;
    let accuracy = if test.is_empty() {
        None
    } else {
        Some(next_response_accuracy(&model, train, test)?)
    };

    let out = opts.out.clone().unwrap_or_else(|| cfg.out_dir().join("akt"));
    let mut ckpt = model.to_checkpoint();
    ckpt.set_meta("catalog_sha256", catalog_sha(&catalog));
    let checkpoint = out.join("akt.ckpt");
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    save_checkpoint(&ckpt, &checkpoint)?;
    let mut loss = String::from("epoch,loss\n");
    for (e, l) in curve.iter().enumerate() {
        let _ = writeln!(loss, "{e},{l}");
    }
    write_file(&out.join("akt_loss.csv"), &loss)?;
    let mut report = String::from("train_logs,held_out_logs,positions,accuracy,majority_class,majority_accuracy\n");
    match &accuracy {
        Some(a) => {
            let _ = writeln!(
                report,
                "{},{},{},{},{},{}",
                train.len(),
                test.len(),
                a.positions,
                a.accuracy,
                a.majority as u8,
                a.baseline
            );
        }
        None => {
            let _ = writeln!(report, "{},0,0,NA,NA,NA", train.len());
        }
    }
    write_file(&out.join("akt_eval.csv"), &report)?;
    Ok(AktRun {
        curve,
        accuracy,
        checkpoint,
        model,
    })
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs without the libtest harness so the
//! lines are always visible.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use learnpath_cli::commands::{self, EvalOptions, GenLogsOptions, SeedRun, TrainAktOptions, TrainOptions, HISTORY_FILE};
use learnpath_cli::config::VariantName;
use learnpath_cli::logs::{generate_logs, read_logs};
use learnpath_cli::ExperimentConfig;
use learnpath_core::agent::objective::objective_with_grad;
use learnpath_core::agent::*;
use learnpath_core::akt::{train_akt, AktLiteModel, AktTrainHyper};
use learnpath_core::env::{AnalyticStudent, EnvConfig, StudentDynamics, StudentEnv};
use learnpath_core::knowledge::{
    apr, distance_to_goal, goal_reached, learning_gain, ExerciseCatalog, GoalConfig, Interaction, InteractionLog, KnowledgeState,
};
use learnpath_core::metrics::{area_mastery_matrix, div, initial_state_histogram, moving_average, training_curves, LearningPath};
use learnpath_core::nn::gradcheck::{central_difference, max_relative_error, param_gradients, FD_STEP};
use learnpath_core::nn::ops::{entropy_from_log_probs, log_softmax, softmax, softmax_backward};
use learnpath_core::nn::{attention, attention_backward, Activation, Adam, AdamHyper, Dense, Mat, ParamTensor, Parameterized, RngStream};
use learnpath_core::reward::{penalty_lambda, step_reward, RewardParams};

/// Seeds for the learning criteria. Hyperparameters in configs/desk.toml were
/// chosen on seeds 100–104, never on these.
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EPISODES: usize = 3000;
const WINDOW: usize = 100;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn default_env() -> StudentEnv {
    let catalog = Arc::new(ExerciseCatalog::synthetic(20, 10, 7).unwrap());
    StudentEnv::new(catalog, EnvConfig::default(), GoalConfig::default()).unwrap()
}

fn random_vec(rng: &mut RngStream, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.uniform() * 2.0 - 1.0) * scale).collect()
}

fn record(state: Vec<f64>, action: usize, reward: f64, value: f64) -> TransitionRecord {
    TransitionRecord {
        next_state: state.clone(),
        state,
        action,
        reward,
        done: false,
        log_prob: 0.0,
        entropy: 0.0,
        value,
    }
}

fn samples<'a>(recs: &'a [TransitionRecord], targets: &[(f64, f64)]) -> Vec<Sample<'a>> {
    recs.iter()
        .zip(targets)
        .map(|(r, &(advantage, value_target))| Sample {
            record: r,
            advantage,
            value_target,
        })
        .collect()
}

// ---------------------------------------------------------------- criterion 1

fn exact_arithmetic(tmp: &Path) -> Check {
    let mut n = 0;
    let mut ok = |cond: bool, what: &str| -> Result<(), String> {
        n += 1;
        if cond {
            Ok(())
        } else {
            Err(format!("example failed: {what}"))
        }
    };
    let state = |v: &[f64]| KnowledgeState::from_probs(v.to_vec()).unwrap();

    // knowledge quantities
    ok(close(apr(&state(&[0.5; 4])), 0.5), "apr symmetric")?;
    ok(close(apr(&state(&[0.2, 0.4, 0.6, 0.8])), 0.5), "apr mean")?;
    ok(close(apr(&state(&[0.9])), 0.9), "apr J=1")?;
    ok(close(learning_gain(0.60, 0.55), 0.05), "lg 0.05")?;
    ok(learning_gain(0.5, 0.5) == 0.0, "lg 0")?;
    ok(close(learning_gain(0.40, 0.50), -0.10), "lg -0.1")?;
    ok(close(distance_to_goal(0.8, 0.3), 0.5), "d 0.5")?;
    ok(distance_to_goal(0.8, 0.8) == 0.0, "d 0")?;
    ok(close(distance_to_goal(0.8, 0.9), -0.1), "d -0.1")?;
    ok(goal_reached(0.80, 0.80) && !goal_reached(0.79, 0.80) && goal_reached(0.99, 0.80), "goal inclusive")?;

    // numerical substrate
    let mut rng = RngStream::new(1, 1);
    let mut layer = Dense::new("d", 3, 3, Activation::Identity, &mut rng);
    layer.weight.values.iter_mut().for_each(|w| *w = 0.0);
    layer.bias.values.iter_mut().for_each(|b| *b = 0.0);
    ok(layer.forward(&[0.3, -2.0, 5.0]).unwrap().output == vec![0.0; 3], "dense zero")?;
    for i in 0..3 {
        layer.weight.values[i * 3 + i] = 1.0;
    }
    ok(layer.forward(&[0.3, -2.0, 5.0]).unwrap().output == vec![0.3, -2.0, 5.0], "dense identity")?;
    ok(softmax(&[0.0; 4]).iter().all(|&p| close(p, 0.25)), "softmax uniform")?;
    let x = [0.3, -1.2, 2.5, 0.0];
    let shifted: Vec<f64> = x.iter().map(|v| v + 7.5).collect();
    ok(softmax(&x).iter().zip(softmax(&shifted)).all(|(a, b)| close(*a, b)), "softmax shift")?;
    let v = Mat::from_vec(1, 2, vec![0.7, -0.4]);
    let (out, _) = attention(&Mat::from_vec(1, 3, vec![1.0, 2.0, 3.0]), &Mat::from_vec(1, 3, vec![0.5, 0.1, -2.0]), &v, 0.5, false).unwrap();
    ok(out.data.iter().zip(&v.data).all(|(a, b)| close(*a, *b)), "attention single pair")?;
    let keys = Mat::from_vec(3, 2, vec![0.4, 0.9, 0.4, 0.9, 0.4, 0.9]);
    let vals = Mat::from_vec(3, 1, vec![1.0, 2.0, 6.0]);
    let (out, _) = attention(&Mat::from_vec(1, 2, vec![-1.0, 3.0]), &keys, &vals, 1.0, false).unwrap();
    ok(close(out.data[0], 3.0), "attention identical keys")?;
    let mut p = ParamTensor::from_values("x", &[1], vec![1.25]).unwrap();
    Adam::new(AdamHyper::default()).step(&mut [&mut p]).unwrap();
    ok(p.values[0] == 1.25, "adam zero grad")?;
    let mut p = ParamTensor::from_values("x", &[1], vec![0.0]).unwrap();
    p.grad[0] = 1.0;
    let hyper = AdamHyper::default();
    Adam::new(hyper).step(&mut [&mut p]).unwrap();
    ok((p.values[0].abs() - hyper.lr).abs() <= hyper.lr * hyper.eps * 10.0, "adam first step")?;

    // reward
    ok(close(penalty_lambda(0.5, 10, 50), 0.1), "lambda 0.1")?;
    ok(close(penalty_lambda(0.8, 722, 100), 5.776), "lambda 5.776")?;
    ok(penalty_lambda(0.0, 20, 100) == 0.0, "lambda 0")?;
    ok(close(step_reward(0.01, 0.2, &RewardParams::new(0.1, 10, 1e-3).unwrap(), 1), 0.4), "reward 0.4")?;
    ok(close(step_reward(-0.02, 0.4, &RewardParams::new(0.3, 10, 1e-3).unwrap(), 3), -0.5), "reward -0.5")?;
    ok(close(step_reward(0.0, 0.3, &RewardParams::new(0.5, 10, 1e-3).unwrap(), 2), -0.25), "reward -0.25")?;

    // policy quantities
    ok(close(entropy_from_log_probs(&log_softmax(&[0.0; 20])), 20f64.ln()), "entropy uniform")?;
    let mut peaked = vec![0.0; 20];
    peaked[3] = 50.0;
    ok(entropy_from_log_probs(&log_softmax(&peaked)) < 0.01, "entropy peaked")?;
    let net = ActorCriticNet::new(6, 8, &mut RngStream::new(2, 0)).unwrap();
    let seq = |s| {
        let mut r = RngStream::new(s, 3);
        (0..30).map(|_| act(&net, &[0.5; 6], &mut r).unwrap().action).collect::<Vec<_>>()
    };
    ok(seq(9) == seq(9), "action determinism")?;
    let ep: Vec<TransitionRecord> = (0..3).map(|_| record(vec![], 0, 1.0, 0.0)).collect();
    ok(discounted_advantages(&ep, 0.5) == vec![1.75, 1.5, 1.0], "advantages geometric")?;
    let ep: Vec<TransitionRecord> = [(2.0, 0.5), (-1.0, 0.25), (3.0, 1.0)].iter().map(|&(r, v)| record(vec![], 0, r, v)).collect();
    ok(discounted_advantages(&ep, 0.0) == vec![1.5, -1.25, 2.0], "advantages myopic")?;
    ok(prob_ratio(-1.3, -1.3) == 1.0, "ratio 1")?;
    ok(close(prob_ratio(2f64.ln() - 1.0, -1.0), 2.0), "ratio 2")?;
    ok(close(prob_ratio(-(4f64.ln()) - 1.0, -1.0), 0.25), "ratio 0.25")?;
    ok(clipped_surrogate(1.0, -0.7, 0.2) == -0.7, "clip on-policy")?;
    ok(close(clipped_surrogate(1.5, 2.0, 0.2), 2.4), "clip 2.4")?;
    ok(close(clipped_surrogate(0.5, -1.0, 0.2), -0.8), "clip -0.8")?;

    // objectives
    let mut zero = ActorCriticNet::new(3, 4, &mut RngStream::new(0, 0)).unwrap();
    for p in zero.params_mut() {
        p.values.iter_mut().for_each(|v| *v = 0.0);
    }
    let rec = TransitionRecord {
        state: vec![0.2, 0.4, 0.6],
        action: 1,
        reward: 0.0,
        next_state: vec![0.2, 0.4, 0.6],
        done: true,
        log_prob: -(3f64.ln()),
        entropy: 1.0,
        value: 0.0,
    };
    let batch = [Sample {
        record: &rec,
        advantage: 0.4,
        value_target: 0.3,
    }];
    let h = AgentHyper {
        alpha: 0.01,
        ..AgentHyper::default()
    };
    ok(close(eppo_objective(&batch, &mut zero, &h).unwrap().objective, 0.365), "objective 0.365")?;
    let (net, recs, targets) = random_batch(4, 5, 12);
    let batch = samples(&recs, &targets);
    let h0 = AgentHyper {
        alpha: 0.0,
        ..AgentHyper::default()
    };
    let e = evaluate_objective(ObjectiveKind::Eppo, &batch, &net, &h0).unwrap().objective;
    let p = evaluate_objective(ObjectiveKind::Ppo, &batch, &net, &h0).unwrap().objective;
    ok(e == p, "alpha 0 equality")?;
    let zeros = vec![(0.0, 0.0); recs.len()];
    let zb = samples(&recs, &zeros);
    let mut g = net.clone();
    g.zero_grads();
    let hz = AgentHyper {
        alpha: 0.0,
        vf_coef: 0.0,
        ..AgentHyper::default()
    };
    objective_with_grad(ObjectiveKind::Ppo, &zb, &mut g, &hz).unwrap();
    ok(g.params().iter().all(|p| p.grad.iter().all(|&x| x == 0.0)), "zero advantages zero gradient")?;

    // training loop
    let tiny = || {
        let catalog = Arc::new(ExerciseCatalog::synthetic(5, 3, 2).unwrap());
        StudentEnv::new(catalog, EnvConfig::default(), GoalConfig::new(0.8, 15).unwrap()).unwrap()
    };
    let mut t = Trainer::new(tiny(), Variant::Eppo, AgentHyper::default(), 3).unwrap();
    let before = t.net().clone();
    ok(t.run(0).unwrap().episodes.is_empty() && t.net() == &before, "zero episodes")?;
    let run = |v| {
        let mut t = Trainer::new(tiny(), v, AgentHyper::default(), 3).unwrap();
        let h = t.run(16).unwrap();
        (h.episodes, t.net().clone())
    };
    ok(run(Variant::Eppo) == run(Variant::Eppo), "trainer determinism")?;
    ok(run(Variant::A2c) == run(Variant::A2c), "a2c determinism")?;

    // environment
    let env = default_env();
    let s1 = |seed| env.reset(&mut RngStream::new(seed, 0)).unwrap().state().clone();
    ok(s1(5) == s1(5), "reset determinism")?;
    let noiseless = |eta_correct, eta_wrong| StudentDynamics {
        eta_correct,
        eta_wrong,
        kappa: 0.0,
        slip: 0.0,
        guess: 0.0,
    };
    let small_env = |j: usize, dynamics: StudentDynamics, goal: GoalConfig| {
        let catalog = Arc::new(ExerciseCatalog::synthetic(j, j.min(2), j.min(2)).unwrap());
        let config = EnvConfig {
            dynamics,
            ..EnvConfig::default()
        };
        StudentEnv::new(catalog, config, goal).unwrap()
    };
    let d = noiseless(0.2, 0.0);
    let e2 = small_env(4, d, GoalConfig::new(0.99, 100).unwrap());
    let mut ep = e2.start_episode(AnalyticStudent::new(vec![0.5; 4], d).unwrap(), &mut RngStream::new(0, 0)).unwrap();
    ok(ep.state().as_slice() == [0.5; 4], "noise-free s1")?;
    let saved = ep.clone();
    let next = e2.transition(&mut ep, 1, true).unwrap().clone();
    ok(close(next.as_slice()[1], 0.6), "transition 0.6")?;
    let mut again = saved.clone();
    ok(e2.transition(&mut again, 1, true).unwrap() == &next, "transition replay")?;
    let mut wrong = saved;
    ok(e2.transition(&mut wrong, 2, false).unwrap().as_slice() == [0.5; 4], "eta_w 0 unchanged")?;
    let seq = |seed| {
        let ep = e2.reset(&mut RngStream::new(seed, 1)).unwrap();
        let mut r = RngStream::new(seed, 2);
        (0..10).map(|k| e2.respond(&ep, k % 4, &mut r).unwrap()).collect::<Vec<_>>()
    };
    ok(seq(4) == seq(4), "response determinism")?;
    let d = noiseless(0.5, 0.5);
    let e3 = small_env(1, d, GoalConfig::new(0.75, 100).unwrap());
    let mut ep = e3.start_episode(AnalyticStudent::new(vec![0.5], d).unwrap(), &mut RngStream::new(0, 0)).unwrap();
    let s = e3.step(&mut ep, 0, &mut RngStream::new(0, 1)).unwrap();
    ok(s.info.apr == 0.75 && s.done && s.info.goal_reached && !s.info.truncated, "goal reached exactly")?;
    let d = noiseless(0.0, 0.0);
    let e4 = small_env(4, d, GoalConfig::new(0.9, 1).unwrap());
    let mut ep = e4.start_episode(AnalyticStudent::new(vec![0.5; 4], d).unwrap(), &mut RngStream::new(0, 0)).unwrap();
    let s = e4.step(&mut ep, 0, &mut RngStream::new(0, 1)).unwrap();
    ok(s.done && s.info.truncated && !s.info.goal_reached, "t_max truncation")?;

    // akt-lite
    let m = AktLiteModel::new(6, 4, &mut RngStream::new(1, 0)).unwrap();
    ok(m.predict_state(&InteractionLog::new()).unwrap() == m.predict_state(&InteractionLog::new()).unwrap(), "akt empty log")?;
    let entries = vec![Interaction { exercise: 1, correct: true }, Interaction { exercise: 3, correct: false }];
    let l1 = InteractionLog::from_entries(entries.clone(), 6).unwrap();
    let l2 = InteractionLog::from_entries(entries, 6).unwrap();
    ok(m.predict_state(&l1).unwrap() == m.predict_state(&l2).unwrap(), "akt identical logs")?;
    let mut m0 = m.clone();
    let single = [InteractionLog::from_entries(vec![Interaction { exercise: 2, correct: true }], 6).unwrap()];
    let curve = train_akt(&mut m0, &single, AktTrainHyper { epochs: 0, ..AktTrainHyper::default() }, &mut RngStream::new(1, 1)).unwrap();
    ok(curve.len() == 1 && m0.params().iter().zip(m.params()).all(|(a, b)| a.values == b.values), "akt zero epochs")?;
    let curve = train_akt(&mut m0, &single, AktTrainHyper { epochs: 5, ..AktTrainHyper::default() }, &mut RngStream::new(1, 1)).unwrap();
    ok(curve.iter().all(|l| l.is_finite()), "akt finite loss")?;

    // metrics
    let path = |v: &[usize]| LearningPath::new(v.to_vec(), 10).unwrap();
    ok(div(&[path(&[1, 2, 3]), path(&[1, 2, 3])]).unwrap() == 0.0, "div identical")?;
    ok(div(&[path(&[1, 2]), path(&[3, 4])]).unwrap() == 1.0, "div disjoint")?;
    ok(close(div(&[path(&[1, 2, 3]), path(&[1, 2, 4]), path(&[5, 6, 7])]).unwrap(), 7.0 / 9.0), "div 7/9")?;
    let one_area = ExerciseCatalog::new(&[(0, 0), (1, 0), (2, 0)], 3, 1).unwrap();
    let states = vec![state(&[0.1, 0.2, 0.3]), state(&[0.5, 0.5, 0.8])];
    let m1 = area_mastery_matrix(&states, &one_area).unwrap();
    ok(m1[0].iter().zip(&states).all(|(a, s)| close(a.unwrap(), apr(s))), "area single")?;
    let two = ExerciseCatalog::new(&[(0, 0), (0, 0), (1, 1), (1, 1)], 2, 2).unwrap();
    let constant = vec![state(&[0.2, 0.4, 0.6, 0.9]); 3];
    let m2 = area_mastery_matrix(&constant, &two).unwrap();
    ok(m2.iter().all(|row| row.iter().all(|v| *v == row[0])), "area constant")?;
    ok(close(m2[0][0].unwrap(), 0.3) && close(m2[1][0].unwrap(), 0.75), "area fixture")?;
    let rec = EpisodeRecord {
        episode: 0,
        seed: 0,
        variant: Variant::Eppo,
        initial_apr: 0.3,
        final_apr: 0.8,
        path_length: 12,
        cumulative_reward: 4.5,
        reached_goal: true,
        path: vec![1; 12],
    };
    let c = training_curves(std::slice::from_ref(&rec), 50);
    ok(c.final_apr.values == [0.8] && c.path_length.smoothed == [12.0] && c.cumulative_reward.values == [4.5], "curves single")?;
    ok(moving_average(&[0.7; 9], 4).iter().all(|&v| close(v, 0.7)), "moving average constant")?;
    ok(moving_average(&[0.0, 1.0, 1.0], 2) == vec![0.0, 0.5, 1.0], "moving average window 2")?;
    let hist = initial_state_histogram(&[0.05, 0.05, 0.15], 0.1).unwrap();
    ok(hist[0] == 2 && hist[1] == 1 && hist[2..].iter().all(|&c| c == 0), "histogram")?;
    ok(initial_state_histogram(&[], 0.1).unwrap().iter().all(|&c| c == 0), "histogram empty")?;

    // experiment commands
    let cfg_text = "[run]\nepisodes = 8\nseeds = [1]\nout_dir = \"ex\"\n";
    fs::write(tmp.join("ex.toml"), cfg_text).unwrap();
    let cfg = ExperimentConfig::load(&tmp.join("ex.toml")).unwrap();
    let gen = |students, file: &str| {
        let opts = GenLogsOptions {
            students: Some(students),
            steps: Some(50),
            seed: Some(1),
            out: Some(tmp.join(file)),
        };
        commands::gen_logs(&cfg, &opts).unwrap().0
    };
    ok(fs::read_to_string(gen(0, "l0.csv")).unwrap().lines().count() == 1, "gen-logs header only")?;
    let (a, b) = (gen(100, "la.csv"), gen(100, "lb.csv"));
    ok(fs::read(&a).unwrap() == fs::read(&b).unwrap(), "gen-logs bytes")?;
    let text = fs::read_to_string(&a).unwrap();
    ok(
        text.lines().count() == 5001 && text.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap() < 20),
        "gen-logs 5000 rows",
    )?;
    let catalog = cfg.catalog().unwrap();
    let three = read_logs("student_id,step,exercise_id,correctness\nx,1,0,1\nx,2,5,0\nx,3,1,1\n".as_bytes(), &catalog).unwrap();
    ok(three.len() == 1 && three[0].log.len() == 3, "ingest 3 rows")?;
    let bad = read_logs("student_id,step,exercise_id,correctness\nx,1,0,1\nx,2,5,2\n".as_bytes(), &catalog);
    ok(bad.is_err_and(|e| e.message.contains("line 3")), "ingest correctness 2")?;
    commands::train(&cfg, TrainOptions { resume: false, quiet: true }).unwrap();
    let h1 = fs::read(cfg.out_dir().join("seed-1").join(HISTORY_FILE)).unwrap();
    commands::train(&cfg, TrainOptions { resume: false, quiet: true }).unwrap();
    ok(h1 == fs::read(cfg.out_dir().join("seed-1").join(HISTORY_FILE)).unwrap(), "train bytes")?;
    let mut empty = cfg.clone();
    empty.run.episodes = 0;
    empty.run.out_dir = tmp.join("ex0");
    ok(commands::train(&empty, TrainOptions { resume: false, quiet: true }).unwrap()[0].history.is_empty(), "train 0 episodes")?;
    let cmp = commands::compare(
        &[cfg.clone(), cfg.clone()],
        &commands::CompareOptions {
            out: Some(tmp.join("cmp")),
            window: None,
            quiet: true,
        },
    )
    .unwrap();
    ok(
        cmp[0].final_apr() == cmp[1].final_apr() && cmp[0].cumulative_reward() == cmp[1].cumulative_reward() && cmp[0].div() == cmp[1].div(),
        "compare self",
    )?;
    let mut other = cfg.clone();
    other.run.seeds = vec![7];
    other.agent.variant = VariantName::Ppo;
    other.run.out_dir = tmp.join("ex-ppo");
    let cmp = commands::compare(&[cfg.clone(), other], &commands::CompareOptions { out: Some(tmp.join("cmp2")), window: None, quiet: true }).unwrap();
    ok(cmp[0].seeds[0].0 == 1 && cmp[1].seeds[0].0 == 7, "compare disjoint seeds")?;
    let ev = |students, out: &str| {
        let o = EvalOptions {
            students: Some(students),
            out: Some(tmp.join(out)),
            ..EvalOptions::default()
        };
        commands::eval(&cfg, &o).unwrap()
    };
    let one = ev(1, "ev1");
    let steps: Vec<usize> = one.rollouts[0].steps.iter().map(|s| s.info.step).collect();
    ok(one.rollouts.len() == 1 && steps == (1..=steps.len()).collect::<Vec<_>>(), "eval one student")?;
    ev(5, "eva");
    ev(5, "evb");
    let same = ["eval_trajectories.csv", "eval_students.csv", "eval_area_mastery.csv", "eval_summary.csv"]
        .iter()
        .all(|f| fs::read(tmp.join("eva").join(f)).unwrap() == fs::read(tmp.join("evb").join(f)).unwrap());
    ok(same, "eval determinism")?;

    Ok(format!("{n} examples"))
}

// ---------------------------------------------------------------- criterion 2

fn random_batch(case: u64, j: usize, n: usize) -> (ActorCriticNet, Vec<TransitionRecord>, Vec<(f64, f64)>) {
    let mut rng = RngStream::new(case, 200);
    let net = ActorCriticNet::new(j, 5, &mut rng).unwrap();
    let mut recs = Vec::new();
    let mut targets = Vec::new();
    for i in 0..n {
        let state: Vec<f64> = (0..j).map(|_| rng.uniform()).collect();
        let out = act(&net, &state, &mut rng).unwrap();
        // move some behaviour log-probs into the clipped region
        let shift = [0.0, 0.5, -0.5, 0.05][i % 4];
        let mut r = record(state, out.action, 0.0, out.value);
        r.log_prob = out.log_prob + shift;
        r.entropy = out.entropy;
        recs.push(r);
        targets.push((rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0));
    }
    (net, recs, targets)
}

fn gradient_oracle() -> Check {
    let mut worst = [0.0f64; 6];
    let mut counts = [0usize; 6];
    let mut note = |k: usize, err: f64| {
        worst[k] = worst[k].max(err);
        counts[k] += 1;
    };

    for case in 0..24u64 {
        let act_fn = [Activation::Identity, Activation::Tanh, Activation::Relu][case as usize % 3];
        let mut rng = RngStream::new(case, 11);
        let (n_in, n_out) = (2 + case as usize % 4, 1 + case as usize % 5);
        let mut layer = Dense::new("d", n_in, n_out, act_fn, &mut rng);
        layer.bias.values.iter_mut().for_each(|b| *b = rng.uniform() - 0.5);
        let x = random_vec(&mut rng, n_in, 1.0);
        let w = random_vec(&mut rng, n_out, 1.0);
        let cache = layer.forward(&x).unwrap();
        if act_fn == Activation::Relu && cache.pre.iter().any(|p| p.abs() < 1e-3) {
            continue;
        }
        let loss = |l: &Dense, x: &[f64]| l.forward(x).unwrap().output.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        layer.zero_grads();
        let gx = layer.backward(&cache, &w);
        note(0, max_relative_error(&gx, &central_difference(&x, FD_STEP, |xp| loss(&layer, xp))));
        for (p, num) in layer.params().iter().zip(param_gradients(&layer, FD_STEP, |l| loss(l, &x))) {
            note(0, max_relative_error(&p.grad, &num));
        }
    }

    for case in 0..20u64 {
        let mut rng = RngStream::new(case, 12);
        let n = 2 + case as usize % 6;
        let x = random_vec(&mut rng, n, 3.0);
        let w = random_vec(&mut rng, n, 1.0);
        let analytic = softmax_backward(&softmax(&x), &w);
        let numeric = central_difference(&x, FD_STEP, |xp| softmax(xp).iter().zip(&w).map(|(a, b)| a * b).sum());
        note(1, max_relative_error(&analytic, &numeric));
    }

    for case in 0..24u64 {
        let mut rng = RngStream::new(case, 13);
        let causal = case % 2 == 0;
        let (nq, nk) = (1 + case as usize % 4, 1 + (case as usize / 2) % 4);
        let nk = if causal { nk.max(nq) } else { nk };
        let (d, dv) = (3, 2);
        let q = Mat::from_vec(nq, d, random_vec(&mut rng, nq * d, 1.0));
        let k = Mat::from_vec(nk, d, random_vec(&mut rng, nk * d, 1.0));
        let v = Mat::from_vec(nk, dv, random_vec(&mut rng, nk * dv, 1.0));
        let w = Mat::from_vec(nq, dv, random_vec(&mut rng, nq * dv, 1.0));
        let loss = |q: &Mat, k: &Mat, v: &Mat| attention(q, k, v, 0.7, causal).unwrap().0.data.iter().zip(&w.data).map(|(a, b)| a * b).sum::<f64>();
        let (_, cache) = attention(&q, &k, &v, 0.7, causal).unwrap();
        let g = attention_backward(&q, &k, &v, &cache, 0.7, &w).unwrap();
        let with = |m: &Mat, x: &[f64]| Mat::from_vec(m.rows, m.cols, x.to_vec());
        note(2, max_relative_error(&g.queries.data, &central_difference(&q.data, FD_STEP, |x| loss(&with(&q, x), &k, &v))));
        note(2, max_relative_error(&g.keys.data, &central_difference(&k.data, FD_STEP, |x| loss(&q, &with(&k, x), &v))));
        note(2, max_relative_error(&g.values.data, &central_difference(&v.data, FD_STEP, |x| loss(&q, &k, &with(&v, x)))));
    }

    // policy: clipped/unclipped surrogate plus entropy, value term disabled
    let policy_hyper = AgentHyper {
        alpha: 0.3,
        vf_coef: 0.0,
        ..AgentHyper::default()
    };
    for case in 0..21u64 {
        let kind = [ObjectiveKind::Eppo, ObjectiveKind::Ppo, ObjectiveKind::A2c][case as usize % 3];
        let (mut net, recs, targets) = random_batch(case, 4, 6);
        let batch = samples(&recs, &targets);
        net.zero_grads();
        objective_with_grad(kind, &batch, &mut net, &policy_hyper).unwrap();
        let numeric = param_gradients(&net, FD_STEP, |m| -evaluate_objective(kind, &batch, m, &policy_hyper).unwrap().objective);
        for (p, n) in net.params().iter().zip(&numeric) {
            note(3, max_relative_error(&p.grad, n));
        }
    }

    // value: squared error only
    let value_hyper = AgentHyper {
        alpha: 0.0,
        vf_coef: 0.5,
        ..AgentHyper::default()
    };
    for case in 0..20u64 {
        let (mut net, recs, targets) = random_batch(case + 90, 3, 5);
        let targets: Vec<(f64, f64)> = targets.iter().map(|&(_, v)| (0.0, v)).collect();
        let batch = samples(&recs, &targets);
        net.zero_grads();
        objective_with_grad(ObjectiveKind::A2c, &batch, &mut net, &value_hyper).unwrap();
        let numeric = param_gradients(&net, FD_STEP, |m| 0.5 * evaluate_objective(ObjectiveKind::A2c, &batch, m, &value_hyper).unwrap().value_loss);
        for (p, n) in net.params().iter().zip(&numeric) {
            note(4, max_relative_error(&p.grad, n));
        }
    }

    for case in 0..20u64 {
        let mut rng = RngStream::new(case, 14);
        let mut model = AktLiteModel::new(5, 4, &mut rng).unwrap();
        let seqs: Vec<Vec<Interaction>> = (0..3)
            .map(|_| {
                let len = 1 + rng.below(6);
                (0..len)
                    .map(|_| Interaction {
                        exercise: rng.below(5),
                        correct: rng.bernoulli(0.5),
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[Interaction]> = seqs.iter().map(Vec::as_slice).collect();
        model.zero_grads();
        model.loss_and_grad(&refs).unwrap();
        let numeric = param_gradients(&model, FD_STEP, |m| m.loss(&refs).unwrap());
        for (p, n) in model.params().iter().zip(&numeric) {
            note(5, max_relative_error(&p.grad, n));
        }
    }

    let names = ["dense", "softmax", "attention", "policy", "value", "akt-lite"];
    let tol = [1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-3];
    let summary: Vec<String> = (0..6).map(|k| format!("{} {:.1e}", names[k], worst[k])).collect();
    for k in 0..6 {
        ensure!(worst[k] < tol[k], "{} max rel err {:e} ≥ {:e}", names[k], worst[k], tol[k]);
    }
    // instances: dense drops relu kinks, so count what actually ran
    ensure!(counts[0] >= 20 * 2, "too few dense instances");
    Ok(format!("max rel err: {}", summary.join(", ")))
}

// ---------------------------------------------------------------- criterion 3

fn advantage_oracle() -> Check {
    let mut rng = RngStream::new(1, 100);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let gamma = [0.0, 0.5, 0.99, 1.0][rng.below(4)];
        let len = 1 + rng.below(100);
        let rewards: Vec<f64> = (0..len).map(|_| rng.uniform() * 20.0 - 10.0).collect();
        let values: Vec<f64> = (0..len).map(|_| rng.uniform() * 5.0).collect();
        let ep: Vec<TransitionRecord> = rewards.iter().zip(&values).map(|(&r, &v)| record(vec![], 0, r, v)).collect();
        let fast = discounted_advantages(&ep, gamma);
        for t in 0..len {
            let mut g = 0.0;
            for (k, r) in rewards[t..].iter().enumerate() {
                g += gamma.powi(k as i32) * r;
            }
            let slow = g - values[t];
            worst = worst.max((fast[t] - slow).abs() / slow.abs().max(1.0));
        }
    }
    ensure!(worst <= 1e-10, "max scaled error {worst:e}");
    Ok(format!("1000 episodes, max scaled error {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 4

fn eppo_property() -> Check {
    let env = default_env();
    let hyper = AgentHyper {
        minibatch_size: 1 << 20,
        update_epochs: 1,
        lr: 1e-2,
        ..AgentHyper::default()
    };
    let mut net = ActorCriticNet::new(20, 16, &mut RngStream::new(21, 0)).unwrap();
    let mut buffer = ReplayBuffer::new(64).unwrap();
    for i in 0..4 {
        buffer.push_episode(rollout(&env, &net, &mut RngStream::new(21, i + 1), ActionSelection::Sample).unwrap().transitions);
    }
    let stored_before: Vec<f64> = buffer.episodes().flatten().map(|t| t.entropy).collect();
    let batch = build_samples(buffer.episodes(), &hyper);
    let e = evaluate_objective(ObjectiveKind::Eppo, &batch, &net, &hyper).unwrap().objective;
    let p = evaluate_objective(ObjectiveKind::Ppo, &batch, &net, &hyper).unwrap().objective;
    let gap = (e - p).abs();
    ensure!(gap <= 1e-12, "epoch-1 objectives differ by {gap:e}");

    let mut adam = Adam::new(AdamHyper::with_lr(hyper.lr));
    clipped_update(ObjectiveKind::Eppo, &buffer, &mut net, &mut adam, &hyper, &mut RngStream::new(21, 99)).unwrap();
    let stored_after: Vec<f64> = buffer.episodes().flatten().map(|t| t.entropy).collect();
    ensure!(
        stored_before.iter().zip(&stored_after).all(|(a, b)| a.to_bits() == b.to_bits()),
        "stored entropy changed"
    );
    let live: Vec<f64> = buffer.episodes().flatten().map(|t| net.forward(&t.state).unwrap().entropy()).collect();
    let moved = stored_after.iter().zip(&live).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(moved > 1e-9, "live entropy moved only {moved:e}");
    Ok(format!("{} transitions; epoch-1 gap {gap:.1e}; max live-vs-stored entropy gap {moved:.2e}", stored_after.len()))
}

// ---------------------------------------------------------------- criterion 5

fn determinism(tmp: &Path) -> Check {
    let mut base = ExperimentConfig::load(&repo_root().join("configs/desk.toml")).map_err(|e| e.to_string())?;
    base.run.seeds = vec![11];
    base.run.episodes = 96;
    base.run.checkpoint_every = 3;
    let mut files = Vec::new();
    for (name, parallel) in [("serial-a", false), ("serial-b", false), ("parallel-a", true), ("parallel-b", true)] {
        let mut cfg = base.clone();
        cfg.run.parallel = parallel;
        cfg.run.out_dir = tmp.join(name);
        commands::train(&cfg, TrainOptions { resume: false, quiet: true }).map_err(|e| e.to_string())?;
        files.push(fs::read(cfg.out_dir().join("seed-11").join(HISTORY_FILE)).unwrap());
    }
    ensure!(files[0] == files[1], "serial runs differ");
    ensure!(files[2] == files[3], "parallel runs differ");
    ensure!(files[0] == files[2], "parallel and serial runs differ");
    Ok(format!("4 runs × 96 episodes, history {} bytes, identical", files[0].len()))
}

// ---------------------------------------------------------------- criteria 6 and 7

struct Trained {
    runs: Vec<SeedRun>,
    cfg: ExperimentConfig,
    per_seed: Vec<Duration>,
}

fn train_seeds(config: &str, variant: VariantName, tmp: &Path) -> Result<Trained, String> {
    let base = ExperimentConfig::load(&repo_root().join(config)).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    let mut per_seed = Vec::new();
    let mut cfg = base.clone();
    cfg.agent.variant = variant;
    cfg.run.episodes = EPISODES;
    cfg.run.parallel = false;
    cfg.run.out_dir = tmp.join(format!("{}-{variant:?}", config.replace('/', "-")));
    for seed in SEEDS {
        cfg.run.seeds = vec![seed];
        let start = Instant::now();
        runs.extend(commands::train(&cfg, TrainOptions { resume: false, quiet: true }).map_err(|e| e.to_string())?);
        per_seed.push(start.elapsed());
    }
    cfg.run.seeds = SEEDS.to_vec();
    Ok(Trained { runs, cfg, per_seed })
}

fn mean<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).sum::<f64>() / items.len() as f64
}

fn desk_learning(eppo: &Trained) -> Check {
    let mut apr_hits = 0;
    let mut detail = Vec::new();
    let (mut first_len, mut last_len) = (0.0, 0.0);
    for r in &eppo.runs {
        let h = &r.history;
        let tail_apr = mean(&h[h.len() - WINDOW..], |e| e.final_apr);
        let first = mean(&h[..WINDOW], |e| e.path_length as f64);
        let last = mean(&h[h.len() - WINDOW..], |e| e.path_length as f64);
        apr_hits += (tail_apr >= 0.78) as usize;
        first_len += first / eppo.runs.len() as f64;
        last_len += last / eppo.runs.len() as f64;
        detail.push(format!("s{} apr {tail_apr:.3} len {first:.1}→{last:.1}", r.seed));
    }
    let reduction = 1.0 - last_len / first_len;
    let slowest = eppo.per_seed.iter().max().unwrap().as_secs_f64();
    let summary = format!(
        "{apr_hits}/5 seeds with trailing APR ≥ 0.78; path length {first_len:.1}→{last_len:.1} ({:.1}% shorter); slowest seed {slowest:.0} s [{}]",
        reduction * 100.0,
        detail.join("; ")
    );
    ensure!(apr_hits >= 4, "{summary}");
    ensure!(reduction >= 0.15, "{summary}");
    ensure!(slowest < 15.0 * 60.0, "{summary}");
    Ok(summary)
}

fn directional(eppo: &Trained, ppo: &Trained) -> Check {
    let reward = |t: &Trained| mean(&t.runs, |r| mean(&r.history[r.history.len() - WINDOW..], |e| e.cumulative_reward));
    let (re, rp) = (reward(eppo), reward(ppo));
    let floor = rp - 0.05 * rp.abs();
    let mut divs = Vec::new();
    for r in &eppo.runs {
        let opts = EvalOptions {
            seed: Some(r.seed),
            students: Some(50),
            out: Some(r.dir.join("eval")),
            ..EvalOptions::default()
        };
        let report = commands::eval(&eppo.cfg, &opts).map_err(|e| e.to_string())?;
        divs.push(report.div.unwrap());
    }
    let mean_div = divs.iter().sum::<f64>() / divs.len() as f64;
    let summary = format!(
        "EPPO last-100 reward {re:.1} vs PPO {rp:.1} (floor {floor:.1}); DIV over 50 rollouts {mean_div:.3} [{}] vs ≥ 0.85",
        divs.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>().join(", ")
    );
    ensure!(re >= floor, "{summary}");
    ensure!(mean_div >= 0.85, "{summary}");
    Ok(summary)
}

// ---------------------------------------------------------------- criterion 8

fn environment_invariants() -> Check {
    let env = default_env();
    let goal = env.goal();
    let mut steps = 0usize;
    for i in 0..10_000u64 {
        let mut rng = RngStream::new(8, i);
        let mut ep = env.reset(&mut rng).unwrap();
        let start = ep.clone();
        let mut trace = Vec::new();
        while !ep.is_done() {
            let a = rng.below(env.action_count());
            let s = env.step(&mut ep, a, &mut rng).unwrap();
            ensure!(s.next_state.as_slice().iter().all(|&p| p > 0.0 && p < 1.0), "episode {i}: state left (0,1)");
            let expect_done = apr(&s.next_state) >= goal.beta || s.info.step == goal.t_max;
            ensure!(s.done == expect_done, "episode {i} step {}: done {} but expected {expect_done}", s.info.step, s.done);
            trace.push((a, s.correct, s.next_state));
        }
        ensure!(ep.steps() <= goal.t_max, "episode {i}: {} steps", ep.steps());
        steps += ep.steps();
        let mut replay = start;
        for (a, c, s) in &trace {
            let next = env.transition(&mut replay, *a, *c).unwrap();
            ensure!(
                next.as_slice().iter().zip(s.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()),
                "episode {i}: replay diverged"
            );
        }
    }
    Ok(format!("10000 episodes, {steps} steps, no violations"))
}

// ---------------------------------------------------------------- criterion 9

fn akt_sanity(tmp: &Path) -> Check {
    let cfg = ExperimentConfig::default();
    let catalog = cfg.catalog().unwrap();
    let env = cfg.env().unwrap();
    let logs = generate_logs(&catalog, &env.config().profile, env.config().dynamics, 500, cfg.logs.steps, 9).map_err(|e| e.to_string())?;
    let run = commands::train_akt(
        &cfg,
        &logs,
        &TrainAktOptions {
            seed: Some(9),
            out: Some(tmp.join("akt")),
        },
    )
    .map_err(|e| e.to_string())?;
    let acc = run.accuracy.ok_or("no held-out logs")?;
    let margin = acc.accuracy - acc.baseline;

    let model = &run.model;
    let mut rng = RngStream::new(9, 1);
    for k in 0..100 {
        let len = 2 + rng.below(60);
        let log: Vec<Interaction> = (0..len)
            .map(|_| Interaction {
                exercise: rng.below(20),
                correct: rng.bernoulli(0.5),
            })
            .collect();
        let base = model.predict_next(&log).unwrap();
        let t = rng.below(len);
        let mut flipped = log.clone();
        flipped[t].correct = !flipped[t].correct;
        let p = model.predict_next(&flipped).unwrap();
        ensure!(p[..=t].iter().zip(&base[..=t]).all(|(a, b)| a.to_bits() == b.to_bits()), "log {k}: response flip at {t} leaked backwards");
        let mut swapped = log.clone();
        swapped[t].exercise = (swapped[t].exercise + 1 + rng.below(19)) % 20;
        let p = model.predict_next(&swapped).unwrap();
        ensure!(p[..t].iter().zip(&base[..t]).all(|(a, b)| a.to_bits() == b.to_bits()), "log {k}: exercise change at {t} leaked backwards");
    }
    let summary = format!(
        "held-out accuracy {:.3} vs majority {:.3} (+{:.1} pp over {} positions); causality holds on 100 logs",
        acc.accuracy,
        acc.baseline,
        margin * 100.0,
        acc.positions
    );
    ensure!(margin >= 0.05, "{summary}");
    Ok(summary)
}

// ---------------------------------------------------------------- driver

fn report(number: usize, name: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = match (outcome, budget) {
        (Ok(d), Some(b)) if elapsed > b => Err(format!("{d}; took {:.1} s, budget {:.0} s", elapsed.as_secs_f64(), b.as_secs_f64())),
        (o, _) => o,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {number} [{name}] {tag} ({:.1} s): {detail}", elapsed.as_secs_f64());
    outcome.is_ok()
}

fn main() {
    // `cargo test -- --list` from the workspace runner; numeric arguments select criteria
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let mut passed = Vec::new();
    let mut run = |n: usize, name: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Check| {
        if wanted(n) {
            passed.push(report(n, name, budget, f));
        }
    };
    run(1, "exact arithmetic", Some(Duration::from_secs(1)), &mut || exact_arithmetic(t));
    run(2, "gradient oracle", Some(Duration::from_secs(60)), &mut gradient_oracle);
    run(3, "advantage oracle", Some(Duration::from_secs(10)), &mut advantage_oracle);
    run(4, "EPPO stored entropy", None, &mut eppo_property);
    run(5, "determinism", None, &mut || determinism(t));
    if wanted(6) || wanted(7) {
        let eppo = train_seeds("configs/desk.toml", VariantName::Eppo, t);
        run(6, "desk-scale learning", None, &mut || desk_learning(eppo.as_ref()?));
        if wanted(7) {
            let ppo = train_seeds("configs/desk.toml", VariantName::Ppo, t);
            run(7, "directional comparison", None, &mut || directional(eppo.as_ref()?, ppo.as_ref()?));
        }
    }
    run(8, "environment invariants", None, &mut environment_invariants);
    run(9, "akt-lite sanity", None, &mut || akt_sanity(t));

    // context for criterion 6: the same check under the stock agent hyperparameters
    if wanted(6) {
        if let Ok(stock) = train_seeds("configs/default.toml", VariantName::Eppo, t).map(|s| s.runs) {
            let lens: Vec<String> = stock
                .iter()
                .map(|r| {
                    let h = &r.history;
                    format!(
                        "s{} {:.1}→{:.1}",
                        r.seed,
                        mean(&h[..WINDOW], |e| e.path_length as f64),
                        mean(&h[h.len() - WINDOW..], |e| e.path_length as f64)
                    )
                })
                .collect();
            println!("note: configs/default.toml (gamma 0.99, vf_coef 0.5, lr 3e-4) path length first→last 100: {}", lens.join("; "));
        }
    }

    let failed = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

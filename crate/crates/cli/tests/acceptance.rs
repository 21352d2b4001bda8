//! The seven acceptance checks for this project. Each test prints one
//! `ACCEPTANCE <n> PASS: ...` line on success (run with `--nocapture` to see
//! them); a failed assert is the corresponding FAIL.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use mentor_core::feedback_loop::{run_episode, verify_trace, LoopState};
use mentor_core::gridworld::{
    relative_goal, DistanceBucket, GridConfig, GridWorld, Heading, RelativeGoal,
};
use mentor_core::harness::{
    run_experiment, Condition, ExperimentConfig, StudentParams, TeacherSetup,
};
use mentor_core::protocol::{decode_request, decode_response, encode, Request, Response};
use mentor_core::rng::{derive_seed, SplitMix64};
use mentor_core::student::{EpsilonSchedule, StateKey, StudentPolicy};
use mentor_core::teacher::{
    oracle_token, FeedbackSignal, OracleTeacher, TeacherContext, TeacherPolicy, Token,
};
use tempfile::TempDir;

/// Shared hyperparameters for the learning-curve criteria: default 8x8 grid,
/// tabular teacher (temperature 1, beta 0.1), alpha 0.1, gamma 0.99, epsilon
/// annealed 1.0 -> 0.1 over the run.
fn curve_config(condition: Condition, episodes: u64, eval_every: u64) -> ExperimentConfig {
    ExperimentConfig {
        condition,
        episodes,
        seeds: (1..=10).collect(),
        eval_every,
        grid: GridConfig::default(),
        env_seed: 0,
        teacher: TeacherSetup::Tabular {
            temperature: 1.0,
            beta: 0.1,
        },
        student: StudentParams {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
        },
        record_trace: false,
    }
}

#[test]
fn acceptance_1_bidirectional_outpaces_no_feedback() {
    let start = Instant::now();
    let bi = run_experiment(&curve_config(Condition::Bidirectional, 2000, 50)).unwrap();
    let nf = run_experiment(&curve_config(Condition::NoFeedback, 2000, 50)).unwrap();
    let elapsed = start.elapsed();

    let bi_final = bi.metrics.final_aggregate().unwrap().success_mean;
    let nf_final = nf.metrics.final_aggregate().unwrap().success_mean;
    let gap = bi_final - nf_final;
    assert!(
        gap >= 0.05,
        "final success gap {gap:.4} below 5 percentage points \
         (bidirectional {bi_final:.4}, no_feedback {nf_final:.4})"
    );

    let bi_reach = bi
        .metrics
        .episodes_to_reach(0.5)
        .expect("bidirectional reaches 50% success");
    let nf_reach = nf.metrics.episodes_to_reach(0.5);
    if let Some(nf_reach) = nf_reach {
        assert!(
            bi_reach < nf_reach,
            "bidirectional hit 50% at episode {bi_reach}, not sooner than \
             no_feedback at {nf_reach}"
        );
    }
    assert!(
        elapsed < Duration::from_secs(300),
        "runtime budget blown: {elapsed:?}"
    );

    let nf_reach_text = nf_reach
        .map(|e| e.to_string())
        .unwrap_or_else(|| "never".to_string());
    println!(
        "ACCEPTANCE 1 PASS: final success {bi_final:.3} vs {nf_final:.3} \
         (gap {:.1}pp >= 5pp), 50% reached at episode {bi_reach} vs {nf_reach_text}, \
         {:.1}s of a 300s budget",
        gap * 100.0,
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_2_small_budget_paired_returns() {
    let bi = run_experiment(&curve_config(Condition::Bidirectional, 40, 40)).unwrap();
    let nf = run_experiment(&curve_config(Condition::NoFeedback, 40, 40)).unwrap();
    let mut wins = 0;
    for seed in 1..=10 {
        let bi_return = bi.metrics.final_row_for_seed(seed).unwrap().mean_return;
        let nf_return = nf.metrics.final_row_for_seed(seed).unwrap().mean_return;
        if bi_return >= nf_return {
            wins += 1;
        }
    }
    assert!(
        wins >= 8,
        "bidirectional return >= no_feedback return in only {wins}/10 paired seeds"
    );
    println!(
        "ACCEPTANCE 2 PASS: at a 40-episode budget, bidirectional mean return >= \
         no_feedback in {wins}/10 paired seeds (needed 8)"
    );
}

#[test]
fn acceptance_3_replay_verifies_recorded_steps_across_conditions() {
    let mut total_records = 0usize;
    let mut total_feedback = 0usize;
    for condition in Condition::ALL {
        let mut cfg = curve_config(condition, 60, 60);
        cfg.seeds = vec![1, 2];
        cfg.record_trace = true;
        if condition == Condition::OracleTeacher {
            cfg.teacher = TeacherSetup::Oracle;
        }
        if condition == Condition::NoTeacher {
            cfg.teacher = TeacherSetup::Constant(Token::GO_FORWARD);
        }
        let out = run_experiment(&cfg).unwrap();
        for artifact in &out.artifacts {
            let stats = verify_trace(&artifact.trace).unwrap_or_else(|v| {
                panic!("{} trace failed replay: {v}", condition.name())
            });
            assert_eq!(stats.records, artifact.trace.len());
            if condition.feedback_enabled() {
                assert_eq!(stats.feedback_checked, stats.records);
            } else {
                assert_eq!(stats.feedback_checked, 0);
            }
            total_records += stats.records;
            total_feedback += stats.feedback_checked;
        }
    }
    assert!(
        total_records >= 10_000,
        "only {total_records} recorded steps; need at least 10^4"
    );
    println!(
        "ACCEPTANCE 3 PASS: {total_records} recorded steps across all four conditions \
         replayed with zero violations ({total_feedback} feedback signs re-derived)"
    );
}

#[test]
fn acceptance_4_teacher_concentrates_on_the_rewarded_token() {
    let ctx = TeacherContext::new(RelativeGoal {
        heading: Heading::Left,
        distance: DistanceBucket::Near,
    });
    let mut converged = 0;
    for seed in 0..20u64 {
        let mut policy = TeacherPolicy::new(1.0, 0.1);
        let mut rng = SplitMix64::new(derive_seed(0x7EAC, seed));
        let target = Token::from_index((seed % 5) as usize).unwrap();
        for _ in 0..500 {
            let token = policy.sample(ctx, &mut rng);
            let signal = if token == target {
                FeedbackSignal::Positive
            } else {
                FeedbackSignal::Negative
            };
            policy.update(ctx, token, signal);
            if policy.probabilities(ctx)[target.index()] > 0.9 {
                converged += 1;
                break;
            }
        }
    }
    assert!(
        converged >= 18,
        "P(target) > 0.9 within 500 rounds in only {converged}/20 seeds"
    );
    println!(
        "ACCEPTANCE 4 PASS: positive-iff-target feedback pushed P(t*) past 0.9 \
         within 500 rounds in {converged}/20 seeds (needed 18)"
    );
}

/// Discounted return of the student's greedy, oracle-token policy started
/// from `s` with a fresh step counter. Independent of the TD machinery: it
/// just walks the deterministic environment and sums discounted rewards.
fn greedy_rollout_value(student: &StudentPolicy, cfg: GridConfig, s: StateKey) -> f64 {
    let mut env =
        GridWorld::with_poses(cfg, s.agent_pos, s.agent_dir, s.goal_pos).expect("state is valid");
    let mut value = 0.0;
    let mut disc = 1.0;
    while !env.episode_over() {
        let obs = env.observe();
        let key = StateKey::from(&obs);
        let token = oracle_token(TeacherContext::new(relative_goal(&obs)));
        let out = env
            .step(student.greedy_action(&key, token))
            .expect("episode is live");
        value += disc * out.reward;
        disc *= student.gamma;
    }
    value
}

#[test]
fn acceptance_5_oracle_equivalence() {
    // Part one: learned V on a 5x5 grid vs a brute-force rollout oracle.
    // Explore with annealed epsilon, then polish the surviving greedy policy
    // with a larger step size until the value table is stationary.
    let cfg = GridConfig {
        width: 5,
        height: 5,
        max_steps: 400,
    };
    let mut env = GridWorld::new(cfg).unwrap();
    let mut teacher = OracleTeacher;
    let mut student = StudentPolicy::new(0.1, 0.99, 1.0);
    let mut state = LoopState::new(false);
    let mut rng = SplitMix64::new(derive_seed(5, 0));
    let schedule = EpsilonSchedule {
        start: 1.0,
        end: 0.05,
        total_episodes: 2000,
    };
    for ep in 0..2000 {
        student.epsilon = schedule.at(ep);
        run_episode(
            &mut env,
            &mut teacher,
            &mut student,
            &mut state,
            &mut rng,
            derive_seed(100, ep),
        )
        .unwrap();
    }
    student.epsilon = 0.0;
    student.alpha = 0.2;
    for ep in 0..10_000 {
        run_episode(
            &mut env,
            &mut teacher,
            &mut student,
            &mut state,
            &mut rng,
            derive_seed(200, ep),
        )
        .unwrap();
    }

    let mut sup_norm = 0.0f64;
    let mut states = 0usize;
    for (s, v) in student.v_entries() {
        let oracle = greedy_rollout_value(&student, cfg, s);
        sup_norm = sup_norm.max((v - oracle).abs());
        states += 1;
    }
    assert!(states > 0, "value table is empty");
    assert!(
        sup_norm <= 0.05,
        "|V - oracle|_inf = {sup_norm:.4} over {states} states exceeds 0.05"
    );

    // Part two: the OracleTeacher condition masters the default 8x8 grid.
    let mut cfg = curve_config(Condition::OracleTeacher, 3000, 3000);
    cfg.teacher = TeacherSetup::Oracle;
    cfg.student = StudentParams {
        alpha: 0.25,
        gamma: 0.99,
        epsilon_start: 1.0,
        epsilon_end: 0.25,
    };
    let out = run_experiment(&cfg).unwrap();
    let success = out.metrics.final_aggregate().unwrap().success_mean;
    assert!(
        success >= 0.95,
        "oracle-teacher success {success:.4} below 0.95 after 3000 episodes"
    );

    println!(
        "ACCEPTANCE 5 PASS: |V - oracle|_inf = {sup_norm:.4} over {states} states \
         (tolerance 0.05); oracle-teacher success {success:.3} >= 0.95 after 3000 episodes"
    );
}

fn train_into(out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mentor"))
        .args([
            "train",
            "--out",
            out_dir.to_str().unwrap(),
            "--episodes",
            "50",
            "--seeds",
            "1,2",
            "--set",
            "env.grid_width=6",
            "--set",
            "env.grid_height=6",
            "--set",
            "env.max_steps=24",
            "--set",
            "experiment.eval_every=25",
            "--set",
            "experiment.write_trace=true",
        ])
        .output()
        .expect("mentor runs")
}

#[test]
fn acceptance_6_identical_configs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let dir_a = dir.path().join("a");
    let dir_b = dir.path().join("b");
    let out_a = train_into(&dir_a);
    let out_b = train_into(&dir_b);
    assert!(out_a.status.success(), "first run failed");
    assert!(out_b.status.success(), "second run failed");
    assert_eq!(out_a.stdout, out_b.stdout, "run summaries differ");

    let files = [
        "manifest.json",
        "metrics.csv",
        "plot_data.csv",
        "checkpoint_seed1.txt",
        "checkpoint_seed2.txt",
        "trace_seed1.jsonl",
        "trace_seed2.jsonl",
    ];
    for name in files {
        let a = fs::read(dir_a.join(name)).unwrap();
        let b = fs::read(dir_b.join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs between the two runs");
    }
    println!(
        "ACCEPTANCE 6 PASS: two runs of one config produced byte-identical \
         artifacts ({} files compared)",
        files.len()
    );
}

struct StubGuard {
    child: Child,
    addr: String,
}

impl StubGuard {
    fn spawn(extra_args: &[&str]) -> StubGuard {
        let mut child = Command::new(env!("CARGO_BIN_EXE_stub-teacher"))
            .args(extra_args)
            .stdout(Stdio::piped())
            .spawn()
            .expect("stub-teacher spawns");
        let stdout = child.stdout.take().expect("stdout piped");
        let mut line = String::new();
        BufReader::new(stdout)
            .read_line(&mut line)
            .expect("stub announces its address");
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected stub banner: {line:?}"))
            .to_string();
        StubGuard { child, addr }
    }
}

impl Drop for StubGuard {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn acceptance_7_protocol_conformance() {
    // Codec identity for every message type.
    let requests = [
        Request::Emit {
            ctx: RelativeGoal {
                heading: Heading::Behind,
                distance: DistanceBucket::Adjacent,
            },
            episode: 7,
            t: 3,
        },
        Request::Feedback {
            signal: FeedbackSignal::Negative,
            ctx: RelativeGoal {
                heading: Heading::Right,
                distance: DistanceBucket::Far,
            },
            token: "turn_right".to_string(),
        },
        Request::Shutdown,
    ];
    for r in &requests {
        assert_eq!(&decode_request(&encode(r)).unwrap(), r, "request round-trip");
    }
    let responses = [
        Response::Token {
            name: "explore".to_string(),
        },
        Response::Ack,
    ];
    for r in &responses {
        assert_eq!(
            &decode_response(&encode(r)).unwrap(),
            r,
            "response round-trip"
        );
    }

    // serve-check against the bundled stub exits 0.
    let good = StubGuard::spawn(&[]);
    let ok = Command::new(env!("CARGO_BIN_EXE_mentor"))
        .args(["serve-check", "--addr", &good.addr])
        .output()
        .expect("mentor runs");
    assert_eq!(ok.status.code(), Some(0), "serve-check against stub");

    // An out-of-vocabulary token answer produces exit code 3.
    let bad = StubGuard::spawn(&["--token-name", "jump"]);
    let rejected = Command::new(env!("CARGO_BIN_EXE_mentor"))
        .args(["serve-check", "--addr", &bad.addr])
        .output()
        .expect("mentor runs");
    assert_eq!(
        rejected.status.code(),
        Some(3),
        "out-of-vocabulary token must exit 3"
    );

    println!(
        "ACCEPTANCE 7 PASS: all 5 message types round-trip the codec, serve-check \
         exits 0 against the stub, an out-of-vocabulary answer exits 3"
    );
}

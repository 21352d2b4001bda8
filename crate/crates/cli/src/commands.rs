//! Subcommand implementations over the core harness.

use std::fs;
use std::path::Path;
use std::time::Duration;

use mentor_core::checkpoint::{read_checkpoint, write_checkpoint};
use mentor_core::config::{RunConfig, TeacherKind};
use mentor_core::feedback_loop::verify_trace;
use mentor_core::gridworld::{DistanceBucket, GridWorld, Heading, RelativeGoal};
use mentor_core::harness::{
    emit_plot_data, evaluate_policy, read_manifest, read_trace, run_experiment, write_csv,
    write_manifest, write_trace, AnyTeacher, ExperimentConfig, ExperimentOutput, HarnessError,
};
use mentor_core::remote::{RemoteTeacher, TimeoutFallback};
use mentor_core::rng::SplitMix64;
use mentor_core::teacher::{FeedbackSignal, Teacher, TeacherContext, TeacherPolicy};

use crate::args::{EvaluateArgs, ReplayArgs, ServeCheckArgs, TrainArgs};
use crate::error::CliError;

/// Builds the effective run config: defaults, then the config file, then the
/// shorthand flags, then `--set` overrides in the order given.
pub fn build_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut run = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &args.condition {
        run.apply_override("experiment.condition", name)?;
    }
    if let Some(n) = args.episodes {
        run.experiment.episodes = n;
    }
    if let Some(list) = &args.seeds {
        run.apply_override("experiment.seeds", list)?;
    }
    if let Some(flag) = &args.teacher {
        apply_teacher_flag(&mut run, flag)?;
    }
    for assignment in &args.set {
        run.apply_assignment(assignment)?;
    }
    Ok(run)
}

fn apply_teacher_flag(run: &mut RunConfig, flag: &str) -> Result<(), CliError> {
    if let Some(addr) = flag.strip_prefix("remote:") {
        run.teacher.kind = TeacherKind::Remote;
        run.teacher.remote_addr = addr.to_string();
        return Ok(());
    }
    match TeacherKind::from_name(flag) {
        Some(TeacherKind::Remote) | None => Err(CliError::Usage(format!(
            "--teacher expects oracle, tabular, or remote:HOST:PORT, got {flag:?}"
        ))),
        Some(kind) => {
            run.teacher.kind = kind;
            Ok(())
        }
    }
}

pub fn train(args: &TrainArgs) -> Result<i32, CliError> {
    let run = build_config(args)?;
    let cfg = ExperimentConfig::resolve(&run)?;
    match run_experiment(&cfg) {
        Ok(output) => {
            write_artifacts(&args.out, &run, &output)?;
            print_train_summary(&run, &output);
            Ok(0)
        }
        Err(HarnessError::SeedFailed {
            seed,
            source,
            partial,
        }) => {
            // Flush what the completed seeds produced before reporting.
            write_artifacts(&args.out, &run, &partial)?;
            eprintln!(
                "warning: wrote partial artifacts for {} completed seed(s) to {}",
                partial.artifacts.len(),
                args.out.display()
            );
            Err(CliError::Harness(HarnessError::SeedFailed {
                seed,
                source,
                partial: Box::new(ExperimentOutput {
                    metrics: Default::default(),
                    artifacts: Vec::new(),
                }),
            }))
        }
        Err(e) => Err(CliError::Harness(e)),
    }
}

fn write_artifacts(
    out: &Path,
    run: &RunConfig,
    output: &ExperimentOutput,
) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    write_manifest(run, &out.join("manifest.json"))?;
    write_csv(&output.metrics, &out.join("metrics.csv"))?;
    emit_plot_data(&output.metrics, &out.join("plot_data.csv"))?;
    for artifact in &output.artifacts {
        let checkpoint = out.join(format!("checkpoint_seed{}.txt", artifact.seed));
        write_checkpoint(&checkpoint, &artifact.student, artifact.teacher.as_ref())?;
        if run.experiment.write_trace {
            let trace = out.join(format!("trace_seed{}.jsonl", artifact.seed));
            write_trace(&artifact.trace, &trace)?;
        }
    }
    Ok(())
}

fn print_train_summary(run: &RunConfig, output: &ExperimentOutput) {
    println!(
        "trained {}: {} seeds x {} episodes",
        run.experiment.condition.name(),
        run.experiment.seeds.len(),
        run.experiment.episodes
    );
    if let Some(last) = output.metrics.final_aggregate() {
        println!(
            "final eval at episode {}: success_rate {:.4} (std {:.4}), mean_return {:.4}, mean_length {:.2}",
            last.episode, last.success_mean, last.success_std, last.return_mean, last.length_mean
        );
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<i32, CliError> {
    let run = read_manifest(&args.dir.join("manifest.json"))?;
    let cfg = ExperimentConfig::resolve(&run)?;
    let mut env = GridWorld::new(cfg.grid).map_err(HarnessError::from)?;
    let mut total_success = 0.0;
    for &seed in &cfg.seeds {
        let path = args.dir.join(format!("checkpoint_seed{seed}.txt"));
        let data = read_checkpoint(&path)?;
        let logits = data.teacher_logits;
        let student = data.into_student(cfg.student.alpha, cfg.student.gamma, 0.0);
        let mut teacher = cfg.teacher.build()?;
        // Trained tabular teachers evaluate with their checkpointed logits.
        if let (AnyTeacher::Tabular(policy), Some(logits)) = (&mut teacher, logits) {
            *policy = TeacherPolicy::from_logits(logits, policy.temperature, policy.beta);
        }
        let summary =
            evaluate_policy(&mut env, &student, &mut teacher).map_err(HarnessError::from)?;
        println!(
            "seed {seed}: success_rate {} mean_return {} mean_length {}",
            summary.success_rate, summary.mean_return, summary.mean_length
        );
        total_success += summary.success_rate;
    }
    println!(
        "mean success_rate {} over {} seeds",
        total_success / cfg.seeds.len() as f64,
        cfg.seeds.len()
    );
    Ok(0)
}

pub fn replay(args: &ReplayArgs) -> Result<i32, CliError> {
    for path in &args.traces {
        let records = read_trace(path)?;
        let stats = verify_trace(&records).map_err(|violation| CliError::Replay {
            path: path.clone(),
            violation,
        })?;
        println!(
            "{}: ok ({} records, {} episodes, {} feedback signals verified)",
            path.display(),
            stats.records,
            stats.episodes,
            stats.feedback_checked
        );
    }
    Ok(0)
}

pub fn serve_check(args: &ServeCheckArgs) -> Result<i32, CliError> {
    let mut client = RemoteTeacher::connect(
        &args.addr,
        Duration::from_millis(args.timeout_ms),
        TimeoutFallback::Abort,
    )?;
    let ctx = TeacherContext::new(RelativeGoal {
        heading: Heading::Ahead,
        distance: DistanceBucket::Far,
    });
    let mut rng = SplitMix64::new(0);
    let token = client.emit(ctx, &mut rng, 0, 0)?;
    client.apply_feedback(ctx, token, FeedbackSignal::Positive)?;
    // No shutdown: the probe must leave the server running for real clients.
    println!(
        "serve-check ok: emit answered {} and feedback was acknowledged",
        token.name()
    );
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::args::TrainArgs;
    use mentor_core::harness::Condition;

    fn base_args() -> TrainArgs {
        TrainArgs {
            config: None,
            set: Vec::new(),
            out: std::path::PathBuf::from("out"),
            condition: None,
            episodes: None,
            seeds: None,
            teacher: None,
        }
    }

    #[test]
    fn flags_layer_between_file_and_set_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "[experiment]\nepisodes = 500\neval_every = 10\n").unwrap();
        let args = TrainArgs {
            config: Some(path),
            episodes: Some(300),
            condition: Some("no_feedback".to_string()),
            seeds: Some("4,5".to_string()),
            set: vec!["experiment.episodes=100".to_string()],
            ..base_args()
        };
        let run = build_config(&args).unwrap();
        assert_eq!(run.experiment.episodes, 100, "--set outranks --episodes");
        assert_eq!(run.experiment.condition, Condition::NoFeedback);
        assert_eq!(run.experiment.seeds, vec![4, 5]);
    }

    #[test]
    fn teacher_flag_parses_remote_addresses() {
        let mut run = RunConfig::default();
        apply_teacher_flag(&mut run, "remote:127.0.0.1:7777").unwrap();
        assert_eq!(run.teacher.kind, TeacherKind::Remote);
        assert_eq!(run.teacher.remote_addr, "127.0.0.1:7777");

        apply_teacher_flag(&mut run, "oracle").unwrap();
        assert_eq!(run.teacher.kind, TeacherKind::Oracle);
        apply_teacher_flag(&mut run, "tabular").unwrap();
        assert_eq!(run.teacher.kind, TeacherKind::Tabular);

        let err = apply_teacher_flag(&mut run, "remote").unwrap_err();
        assert_eq!(err.code(), 2, "bare remote needs an address");
        let err = apply_teacher_flag(&mut run, "scripted").unwrap_err();
        assert_eq!(err.code(), 2);
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let args = TrainArgs {
            config: Some(std::path::PathBuf::from("/nonexistent/run.toml")),
            ..base_args()
        };
        let err = build_config(&args).unwrap_err();
        assert_eq!(err.code(), 2);
    }
}

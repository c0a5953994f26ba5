//! The `hdma` command line front end.
//!
//! Four subcommands cover the pipeline at different depths: `run` drives the
//! full service workflow, `emit-circuits` stops after compilation and writes
//! one `.hqc` document per point-centroid pair, `simulate` executes a single
//! document on the embedded simulator, and `report` tabulates determined
//! against analytically expected marked frequencies.
//!
//! Everything funnels through [`execute_command`], which takes an argv slice
//! and a writer and returns the process exit code, so the whole surface is
//! testable without spawning a binary. Exit codes: 0 on success, 1 when the
//! pipeline itself fails (unreadable table, backend trouble), 2 for usage or
//! configuration errors (the message names the offending flag).
//!
//! Output is deterministic: the same argv with the same seed produces byte
//! identical output. When `--seed` is absent the `HDMA_SEED` environment
//! variable supplies the base seed, and 0 is the final fallback.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datastore::Table;
use crate::distance::{build_pair_circuit, p_one, PairSpec};
use crate::encode::{angle_embed, Profile};
use crate::orchestra::backend::run_meta;
use crate::orchestra::{
    watch, BackendAdapter, HttpBackendClient, LocalSimBackend, MockRemoteBackend,
    MockRemoteServer, Orchestra, OrchestraConfig, ProblemRequest, Route, RunParams, Sinks,
    WatchOutcome, WorkflowOutcome,
};
use crate::qcir::QuantumCircuit;
use crate::qsim;

/// Environment variable consulted for the base seed when `--seed` is absent.
pub const SEED_ENV: &str = "HDMA_SEED";

/// Parses `argv` (program name included) and runs the selected subcommand,
/// writing all output to `out`. Returns the exit code.
pub fn execute_command(argv: &[&str], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(out, "{}", err.render());
            // Help and version requests land here too; they are not errors.
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, out),
        Command::EmitCircuits(args) => cmd_emit_circuits(args, out),
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Report(args) => cmd_report(args, out),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Run(message)) => {
            let _ = writeln!(out, "error: {message}");
            1
        }
        Err(CliError::Usage(message)) => {
            let _ = writeln!(out, "error: {message}");
            2
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hdma",
    version,
    about = "Hybrid data management: quantum-assisted clustering over CSV tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full decide/extract/compile/execute/write-back workflow.
    Run(RunArgs),
    /// Compile one .hqc circuit document per point-centroid pair.
    EmitCircuits(EmitCircuitsArgs),
    /// Execute one .hqc circuit document and print its counts.
    Simulate(SimulateArgs),
    /// Tabulate determined vs expected marked frequencies per pair.
    Report(ReportArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// CSV table with ID, Feature1, Feature2, Cluster and Role columns.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Extraction profile; built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,

    /// Where circuits execute.
    #[arg(long, value_enum, default_value_t = BackendKind::Sim)]
    backend: BackendKind,

    /// Shots per pair circuit; overrides the profile's value.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    shots: Option<u64>,

    /// Base seed for sampling; defaults to $HDMA_SEED, then 0.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,

    /// Result delivery: application, datastore or both.
    #[arg(long, default_value = "application")]
    sinks: Sinks,

    /// Keep polling the table's change token and rerun when it moves.
    #[arg(long)]
    watch: bool,

    /// Milliseconds between change-token polls under --watch.
    #[arg(long, value_name = "MS", default_value_t = 1000)]
    watch_interval_ms: u64,

    /// Stop --watch after this many polls; 0 keeps watching forever.
    #[arg(long, value_name = "N", default_value_t = 0)]
    watch_ticks: u64,
}

#[derive(Args)]
struct EmitCircuitsArgs {
    /// CSV table with ID, Feature1, Feature2, Cluster and Role columns.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Extraction profile; built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,

    /// Directory that receives the .hqc files.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Circuit document to execute.
    #[arg(value_name = "FILE")]
    file: PathBuf,

    /// Overrides the document's shots metadata.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    shots: Option<u64>,

    /// Overrides the document's seed metadata; defaults to $HDMA_SEED.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Embedded statevector simulator.
    Sim,
    /// In-process HTTP job service wrapping the simulator.
    MockRemote,
}

impl BackendKind {
    fn label(self) -> &'static str {
        match self {
            BackendKind::Sim => "sim",
            BackendKind::MockRemote => "mock-remote",
        }
    }
}

enum CliError {
    /// The pipeline failed; exit code 1.
    Run(String),
    /// The invocation or configuration is wrong; exit code 2.
    Usage(String),
}

fn run_failure(err: impl std::fmt::Display) -> CliError {
    CliError::Run(err.to_string())
}

/// Resolves an explicit `--seed`, falling back to `HDMA_SEED`. `None` means
/// neither was given; callers pick their own default.
fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => match raw.trim().parse() {
            Ok(seed) => Ok(Some(seed)),
            Err(_) => Err(CliError::Usage(format!(
                "{SEED_ENV} must be an unsigned integer, not '{raw}'"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn load_profile_flag(path: &Option<PathBuf>) -> Result<Profile, CliError> {
    match path {
        Some(path) => Profile::load(path).map_err(|err| CliError::Usage(format!("--profile: {err}"))),
        None => Ok(Profile::default()),
    }
}

/// A backend adapter plus whatever keeps it alive. Dropping the mock remote
/// server tears its endpoint down, so it rides along for the command's
/// lifetime.
struct BackendChoice {
    adapter: Arc<dyn BackendAdapter>,
    _server: Option<MockRemoteServer>,
}

fn make_backend(kind: BackendKind) -> Result<BackendChoice, CliError> {
    match kind {
        BackendKind::Sim => {
            Ok(BackendChoice { adapter: Arc::new(LocalSimBackend::new()), _server: None })
        }
        BackendKind::MockRemote => {
            let server = MockRemoteServer::start(Arc::new(MockRemoteBackend::new(2)))
                .map_err(|err| CliError::Run(format!("cannot start mock remote backend: {err}")))?;
            let adapter: Arc<dyn BackendAdapter> = Arc::new(HttpBackendClient::new(server.addr()));
            Ok(BackendChoice { adapter, _server: Some(server) })
        }
    }
}

struct PipelineRun {
    orchestra: Arc<Orchestra>,
    outcome: WorkflowOutcome,
    problem: ProblemRequest,
    params: RunParams,
    _backend: BackendChoice,
}

/// Shared front half of `run` and `report`: validate flags, start an
/// orchestra over the chosen backend, and drive one workflow to completion.
fn run_pipeline(pipeline: &PipelineArgs, sinks: Sinks) -> Result<PipelineRun, CliError> {
    // Surface configuration problems as usage errors before any service runs.
    load_profile_flag(&pipeline.profile)?;
    let seed = seed_override(pipeline.seed)?.unwrap_or(0);
    let backend = make_backend(pipeline.backend)?;

    let mut config = OrchestraConfig::with_backend(backend.adapter.clone());
    config.poll_interval = Duration::from_millis(10);
    let orchestra = Orchestra::start(config);

    let mut problem = ProblemRequest::cluster_assignment(&pipeline.data);
    if let Some(path) = &pipeline.profile {
        problem = problem.with_profile(path);
    }
    let mut params = RunParams::default().with_seed(seed).with_sinks(sinks);
    if let Some(shots) = pipeline.shots {
        params = params.with_shots(shots);
    }

    let outcome = orchestra.run_workflow(problem.clone(), params.clone()).map_err(run_failure)?;
    Ok(PipelineRun { orchestra, outcome, problem, params, _backend: backend })
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let run = run_pipeline(&args.pipeline, args.sinks)?;
    render_outcome(&run.orchestra, &run.outcome, args.sinks, &args.pipeline.data, out);

    if args.watch {
        let interval = Duration::from_millis(args.watch_interval_ms.max(1));
        let max_ticks = (args.watch_ticks > 0).then_some(args.watch_ticks);
        let reruns = watch(
            &run.orchestra,
            &run.problem,
            &run.params,
            interval,
            max_ticks,
            |tick, outcome| {
                if let WatchOutcome::Reran { correlation_id } = outcome {
                    let _ = writeln!(out, "tick {tick}: table changed, ran workflow {correlation_id}");
                }
            },
        )
        .map_err(run_failure)?;
        let _ = writeln!(out, "watch: {reruns} rerun(s)");
    }
    Ok(())
}

fn render_outcome(
    orchestra: &Orchestra,
    outcome: &WorkflowOutcome,
    sinks: Sinks,
    data_path: &Path,
    out: &mut dyn Write,
) {
    let _ = writeln!(out, "route: {}", outcome.route);
    for estimate in &outcome.estimates {
        let _ = writeln!(
            out,
            "pair point={} centroid={} marked={} shots={}",
            estimate.point_id, estimate.centroid_id, estimate.marked_count, estimate.shots
        );
    }
    for assignment in &outcome.assignments {
        let _ = writeln!(out, "assigned: {} -> {}", assignment.point_id, assignment.cluster_label);
    }
    let kinds: Vec<&str> =
        orchestra.trace().kinds_for(outcome.correlation_id).iter().map(|k| k.label()).collect();
    let _ = writeln!(out, "trace: {}", kinds.join(","));
    if sinks.includes_datastore() {
        let _ = writeln!(out, "table written: {}", data_path.display());
    }
}

fn cmd_emit_circuits(args: EmitCircuitsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profile = load_profile_flag(&args.profile)?;
    let table = Table::load(&args.data).map_err(run_failure)?;
    let max_id = table.rows().iter().map(|row| row.id).max().unwrap_or(0);
    let profile = profile.with_resolved_id_width(max_id);
    let (centroids, points) = table.extract(&profile).map_err(run_failure)?;

    fs::create_dir_all(&args.out)
        .map_err(|err| CliError::Run(format!("cannot create {}: {err}", args.out.display())))?;
    let mut emitted = 0u64;
    for point in &points {
        for centroid in &centroids {
            let spec = PairSpec { point: point.clone(), centroid: centroid.clone() };
            let circuit = build_pair_circuit(&spec, &profile).map_err(run_failure)?;
            let path = args.out.join(format!("pair-{}-{}.hqc", point.id, centroid.id));
            fs::write(&path, circuit.serialize())
                .map_err(|err| CliError::Run(format!("cannot write {}: {err}", path.display())))?;
            let _ = writeln!(out, "wrote {}", path.display());
            emitted += 1;
        }
    }
    let _ = writeln!(out, "emitted {emitted} circuit(s)");
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.file)
        .map_err(|err| CliError::Run(format!("cannot read {}: {err}", args.file.display())))?;
    let mut circuit = QuantumCircuit::parse(&text).map_err(run_failure)?;
    if let Some(shots) = args.shots {
        circuit.set_meta("shots", &shots.to_string()).map_err(run_failure)?;
    }
    if let Some(seed) = seed_override(args.seed)? {
        circuit.set_meta("seed", &seed.to_string()).map_err(run_failure)?;
    }
    let (shots, seed) = run_meta(&circuit).map_err(run_failure)?;
    let counts = qsim::sample_counts(&circuit, shots, seed).map_err(run_failure)?;
    let _ = write!(out, "{}", counts.to_lines());
    Ok(())
}

fn cmd_report(args: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    // Load the same inputs the services will see, for the analytic columns.
    let profile = load_profile_flag(&args.pipeline.profile)?;
    let table = Table::load(&args.pipeline.data).map_err(run_failure)?;
    let max_id = table.rows().iter().map(|row| row.id).max().unwrap_or(0);
    let resolved = profile.with_resolved_id_width(max_id);
    let (centroids, points) = table.extract(&resolved).map_err(run_failure)?;

    let run = run_pipeline(&args.pipeline, Sinks::Application)?;
    let shots_used = args.pipeline.shots.unwrap_or(resolved.shots);

    let _ = writeln!(out, "backend: {}", args.pipeline.backend.label());
    let _ = writeln!(out, "shots: {shots_used}");
    let _ = writeln!(out, "seed: {}", run.params.seed);
    if let Route::Classical = run.outcome.route {
        let _ = writeln!(out, "route: classical; no sampled frequencies");
        return Ok(());
    }

    let _ = writeln!(
        out,
        "{:<6} {:<9} {:<9} {:<9} {:<11} {}",
        "point", "centroid", "cluster", "sequence", "determined", "expected"
    );
    for estimate in &run.outcome.estimates {
        let point = points
            .iter()
            .find(|p| p.id == estimate.point_id)
            .ok_or_else(|| CliError::Run(format!("unknown point id {}", estimate.point_id)))?;
        let centroid = centroids
            .iter()
            .find(|c| c.id == estimate.centroid_id)
            .ok_or_else(|| CliError::Run(format!("unknown centroid id {}", estimate.centroid_id)))?;
        let expected = estimate.shots as f64
            * p_one(
                angle_embed(point.features).map_err(run_failure)?,
                angle_embed(centroid.features).map_err(run_failure)?,
            );
        let width = resolved.effective_id_width(estimate.point_id);
        let sequence = format!("1{}", qsim::bitstring(estimate.point_id, width));
        let _ = writeln!(
            out,
            "{:<6} {:<9} {:<9} {:<9} {:<11} {}",
            estimate.point_id,
            estimate.centroid_id,
            centroid.cluster_label,
            sequence,
            estimate.marked_count,
            expected.round() as u64
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_CSV: &str = "ID,Feature1,Feature2,Cluster,Role\n\
                             0,-0.5,0.5,blue,centroid\n\
                             1,0.2,-0.2,green,centroid\n\
                             2,0.15,-0.15,,point\n\
                             3,-0.45,0.45,,point\n";

    const ASSIGNED_CSV: &str = "ID,Feature1,Feature2,Cluster,Role\n\
                                0,-0.5,0.5,blue,centroid\n\
                                1,0.2,-0.2,green,centroid\n\
                                2,0.15,-0.15,green,point\n\
                                3,-0.45,0.45,blue,point\n";

    fn fixture_table(dir: &tempfile::TempDir) -> PathBuf {
        let path = dir.path().join("table1.csv");
        fs::write(&path, TABLE_CSV).unwrap();
        path
    }

    fn execute(argv: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = execute_command(argv, &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn run_assigns_clusters_and_writes_the_table_back() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let data = data.to_str().unwrap();
        let (code, output) = execute(&[
            "hdma", "run", "--data", data, "--backend", "sim", "--seed", "7", "--sinks", "both",
        ]);
        assert_eq!(code, 0, "output:\n{output}");
        assert!(output.starts_with("route: quantum\n"), "output:\n{output}");
        assert!(output.contains("assigned: 2 -> green\n"), "output:\n{output}");
        assert!(output.contains("assigned: 3 -> blue\n"), "output:\n{output}");
        assert!(output.contains("trace: M1,M1r,M2,M2r,M3,M3r,M4,M6,M8\n"), "output:\n{output}");
        assert!(output.contains(&format!("table written: {data}\n")), "output:\n{output}");
        assert_eq!(fs::read_to_string(data).unwrap(), ASSIGNED_CSV);
    }

    #[test]
    fn run_leaves_the_table_alone_without_a_datastore_sink() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let (code, output) = execute(&[
            "hdma", "run", "--data", data.to_str().unwrap(), "--seed", "7",
        ]);
        assert_eq!(code, 0, "output:\n{output}");
        assert!(!output.contains("table written"), "output:\n{output}");
        assert_eq!(fs::read_to_string(&data).unwrap(), TABLE_CSV);
    }

    #[test]
    fn same_argv_and_seed_give_byte_identical_output() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let argv =
            ["hdma", "run", "--data", data.to_str().unwrap(), "--seed", "11", "--shots", "500"];
        let (first_code, first) = execute(&argv);
        let (second_code, second) = execute(&argv);
        assert_eq!(first_code, 0);
        assert_eq!(second_code, 0);
        assert_eq!(first, second);
    }

    #[test]
    fn mock_remote_backend_prints_the_same_counts_as_sim() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let data = data.to_str().unwrap();
        let (sim_code, sim) =
            execute(&["hdma", "run", "--data", data, "--backend", "sim", "--seed", "4"]);
        let (remote_code, remote) =
            execute(&["hdma", "run", "--data", data, "--backend", "mock-remote", "--seed", "4"]);
        assert_eq!(sim_code, 0, "output:\n{sim}");
        assert_eq!(remote_code, 0, "output:\n{remote}");
        assert_eq!(sim, remote);
    }

    #[test]
    fn zero_shots_is_a_usage_error_naming_the_flag() {
        let (code, output) = execute(&["hdma", "run", "--data", "table.csv", "--shots", "0"]);
        assert_eq!(code, 2, "output:\n{output}");
        assert!(output.contains("--shots"), "output:\n{output}");
    }

    #[test]
    fn seed_env_var_is_the_default_seed() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let data = data.to_str().unwrap();
        let (explicit_code, explicit) = execute(&["hdma", "run", "--data", data, "--seed", "7"]);
        assert_eq!(explicit_code, 0);

        std::env::set_var(SEED_ENV, "7");
        let (env_code, env) = execute(&["hdma", "run", "--data", data]);
        std::env::set_var(SEED_ENV, "not-a-number");
        let (bad_code, bad) = execute(&["hdma", "run", "--data", data]);
        std::env::remove_var(SEED_ENV);

        assert_eq!(env_code, 0, "output:\n{env}");
        assert_eq!(env, explicit);
        assert_eq!(bad_code, 2, "output:\n{bad}");
        assert!(bad.contains(SEED_ENV), "output:\n{bad}");
    }

    #[test]
    fn missing_table_is_a_run_failure() {
        let dir = tempfile::tempdir().unwrap();
        let gone = dir.path().join("missing.csv");
        let (code, output) = execute(&["hdma", "run", "--data", gone.to_str().unwrap()]);
        assert_eq!(code, 1, "output:\n{output}");
        assert!(output.starts_with("error:"), "output:\n{output}");
    }

    #[test]
    fn malformed_table_is_a_run_failure() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("broken.csv");
        fs::write(&data, "ID,Feature1\n0,nope\n").unwrap();
        let (code, output) = execute(&["hdma", "run", "--data", data.to_str().unwrap()]);
        assert_eq!(code, 1, "output:\n{output}");
    }

    #[test]
    fn unreadable_profile_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let profile = dir.path().join("bad.profile");
        fs::write(&profile, "max_points=lots\n").unwrap();
        let (code, output) = execute(&[
            "hdma",
            "run",
            "--data",
            data.to_str().unwrap(),
            "--profile",
            profile.to_str().unwrap(),
        ]);
        assert_eq!(code, 2, "output:\n{output}");
        assert!(output.contains("--profile"), "output:\n{output}");
    }

    #[test]
    fn watch_with_a_stable_table_reports_zero_reruns() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let (code, output) = execute(&[
            "hdma",
            "run",
            "--data",
            data.to_str().unwrap(),
            "--seed",
            "1",
            "--watch",
            "--watch-interval-ms",
            "5",
            "--watch-ticks",
            "3",
        ]);
        assert_eq!(code, 0, "output:\n{output}");
        assert!(output.ends_with("watch: 0 rerun(s)\n"), "output:\n{output}");
    }

    #[test]
    fn emit_circuits_writes_one_parseable_file_per_pair() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let out_dir = dir.path().join("circuits");
        let (code, output) = execute(&[
            "hdma",
            "emit-circuits",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "output:\n{output}");
        assert!(output.ends_with("emitted 4 circuit(s)\n"), "output:\n{output}");
        for name in ["pair-2-0.hqc", "pair-2-1.hqc", "pair-3-0.hqc", "pair-3-1.hqc"] {
            let text = fs::read_to_string(out_dir.join(name)).unwrap();
            let circuit = QuantumCircuit::parse(&text).unwrap();
            assert_eq!(circuit.serialize(), text);
        }
    }

    #[test]
    fn simulate_prints_the_counts_for_the_requested_shots_and_seed() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let out_dir = dir.path().join("circuits");
        let (emit_code, _) = execute(&[
            "hdma",
            "emit-circuits",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(emit_code, 0);

        let file = out_dir.join("pair-2-0.hqc");
        let (code, output) = execute(&[
            "hdma", "simulate", file.to_str().unwrap(), "--shots", "400", "--seed", "3",
        ]);
        assert_eq!(code, 0, "output:\n{output}");

        let circuit = QuantumCircuit::parse(&fs::read_to_string(&file).unwrap()).unwrap();
        let expected = qsim::sample_counts(&circuit, 400, 3).unwrap().to_lines();
        assert_eq!(output, expected);
        let total: u64 = output
            .lines()
            .map(|line| line.split_whitespace().nth(1).unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 400);
    }

    #[test]
    fn report_rows_carry_the_marked_sequence_and_analytic_expectation() {
        let dir = tempfile::tempdir().unwrap();
        let data = fixture_table(&dir);
        let (code, output) =
            execute(&["hdma", "report", "--data", data.to_str().unwrap(), "--seed", "9"]);
        assert_eq!(code, 0, "output:\n{output}");

        let rows: Vec<Vec<&str>> = output
            .lines()
            .skip_while(|line| !line.starts_with("point"))
            .skip(1)
            .map(|line| line.split_whitespace().collect())
            .collect();
        assert_eq!(rows.len(), 4, "output:\n{output}");

        let want = [
            ("2", "0", "blue", "110"),
            ("2", "1", "green", "110"),
            ("3", "0", "blue", "111"),
            ("3", "1", "green", "111"),
        ];
        for (row, (point, centroid, cluster, sequence)) in rows.iter().zip(want.iter()) {
            assert_eq!(&row[0], point);
            assert_eq!(&row[1], centroid);
            assert_eq!(&row[2], cluster);
            assert_eq!(&row[3], sequence);
        }
        // Expected column: round(1000 * analytic marked probability).
        let expected: Vec<u64> = rows.iter().map(|row| row[5].parse().unwrap()).collect();
        assert_eq!(expected, vec![201, 1, 1, 206]);

        // The determined column is the sampled marked count; close and far
        // pairs must be separated by an order of magnitude at 1000 shots.
        let determined: Vec<u64> = rows.iter().map(|row| row[4].parse().unwrap()).collect();
        assert!(determined[0] > 100 && determined[3] > 100, "output:\n{output}");
        assert!(determined[1] <= 10 && determined[2] <= 10, "output:\n{output}");

        // Table untouched: report never writes back.
        assert_eq!(fs::read_to_string(&data).unwrap(), TABLE_CSV);
    }

    #[test]
    fn help_exits_zero() {
        let (code, output) = execute(&["hdma", "--help"]);
        assert_eq!(code, 0);
        assert!(output.contains("emit-circuits"), "output:\n{output}");
    }
}

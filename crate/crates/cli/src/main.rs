//! `oblmp` command-line tool.
//!
//! Exit codes: 0 ok, 1 usage, 2 I/O or parse failure, 3 numerical failure,
//! 4 verification failure, 5 dimension mismatch, 6 empty dictionary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oblmp::dictionaries::{background_family, bspline_dictionary, GridSpec, SplineSpec};
use oblmp::experiment::{
    run_experiment, run_experiment_with_plots, BackgroundMode, ExperimentConfig,
    BACKGROUND_CAP, BACKGROUND_EXPONENT_STEP, BACKGROUND_SOURCES, KNOT_STEP,
};
use oblmp::io;
use oblmp::linalg::DEFAULT_REDUNDANCY_TOL;
use oblmp::oblique::Fault;
use oblmp::pursuit::{Threshold, DEFAULT_DELTA_RTOL};
use oblmp::verify::{run_all, VerifyConfig};
use oblmp::{oblmp, BackgroundModel, Error, PursuitConfig};

#[derive(Parser)]
#[command(name = "oblmp", version, about = "Oblique matching pursuit: separate a sparse signal from a known background")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Separate one signal given a dictionary and background sources.
    Separate(SeparateArgs),
    /// Run one of the two spline experiments and write a JSON report.
    Experiment(ExperimentArgs),
    /// Write a sampled dictionary or background family as CSV.
    DictGen(DictGenArgs),
    /// Run the randomized property suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DeltaMode {
    Relative,
    Absolute,
}

#[derive(Args)]
struct PursuitArgs {
    /// Stopping tolerance on the selection functional.
    #[arg(long, env = "OBLMP_DELTA", default_value_t = DEFAULT_DELTA_RTOL)]
    delta: f64,
    /// Whether --delta is relative to the first step's best score.
    #[arg(long, env = "OBLMP_DELTA_MODE", value_enum, default_value = "relative")]
    delta_mode: DeltaMode,
    #[arg(long, env = "OBLMP_MAX_ITERS")]
    max_iters: Option<usize>,
    /// Candidates with a remaining norm below this fraction of the largest
    /// background-free atom are skipped.
    #[arg(long, env = "OBLMP_GAMMA_ZERO_TOL")]
    gamma_zero_tol: Option<f64>,
    #[arg(long, env = "OBLMP_SIGNAL_FLOOR")]
    signal_floor: Option<f64>,
}

impl PursuitArgs {
    fn apply(&self, base: PursuitConfig) -> PursuitConfig {
        PursuitConfig {
            delta: match self.delta_mode {
                DeltaMode::Relative => Threshold::Relative(self.delta),
                DeltaMode::Absolute => Threshold::Absolute(self.delta),
            },
            max_iters: self.max_iters.or(base.max_iters),
            gamma_zero_tol: self
                .gamma_zero_tol
                .map(Threshold::Relative)
                .unwrap_or(base.gamma_zero_tol),
            signal_floor: self.signal_floor.unwrap_or(base.signal_floor),
            tie_break: base.tie_break,
        }
    }
}

#[derive(Args)]
struct SeparateArgs {
    /// CSV file with the signal column.
    #[arg(long, env = "OBLMP_SIGNAL")]
    signal: PathBuf,
    /// CSV file with one column per atom.
    #[arg(long = "dict", env = "OBLMP_DICT")]
    dict: PathBuf,
    /// CSV file with one column per background source function.
    #[arg(long, env = "OBLMP_BACKGROUND")]
    background: Option<PathBuf>,
    /// Keep at most this many orthonormal background functions.
    #[arg(long, env = "OBLMP_M_CAP")]
    m_cap: Option<usize>,
    #[arg(long, env = "OBLMP_REDUNDANCY_TOL", default_value_t = DEFAULT_REDUNDANCY_TOL)]
    redundancy_tol: f64,
    #[command(flatten)]
    pursuit: PursuitArgs,
    /// Output file (default: stdout).
    #[arg(long, env = "OBLMP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BgMode {
    Modeled,
    Raw,
}

#[derive(Args)]
struct ExperimentArgs {
    /// 1: B-spline basis, 2: double-support spline dictionary.
    #[arg(long = "test", env = "OBLMP_TEST", value_parser = clap::value_parser!(u8).range(1..=2))]
    test_id: u8,
    #[arg(long, env = "OBLMP_N_SIGNALS", default_value_t = 100)]
    n_signals: usize,
    #[arg(long, env = "OBLMP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "OBLMP_GRID_POINTS", default_value_t = GridSpec::DEFAULT_POINTS)]
    grid_points: usize,
    #[arg(long, env = "OBLMP_M_CAP", default_value_t = BACKGROUND_CAP)]
    m_cap: usize,
    #[arg(long, env = "OBLMP_SUCCESS_THRESHOLD", default_value_t = oblmp::experiment::SUCCESS_THRESHOLD)]
    success_threshold: f64,
    /// Draw backgrounds from the modeled span or from all source functions.
    #[arg(long, env = "OBLMP_BACKGROUND_MODE", value_enum, default_value = "modeled")]
    background_mode: BgMode,
    /// Background norm relative to the sparse component.
    #[arg(long, env = "OBLMP_BACKGROUND_AMPLITUDE", default_value_t = 1.0)]
    background_amplitude: f64,
    /// Use the atoms as sampled instead of scaling them to unit norm.
    #[arg(long, env = "OBLMP_NO_NORMALIZE")]
    no_normalize: bool,
    /// Skip the full-dictionary oblique projection.
    #[arg(long, env = "OBLMP_NO_BASELINE")]
    no_baseline: bool,
    /// Check the propositions after every selection.
    #[arg(long, env = "OBLMP_CHECK_PROPOSITIONS")]
    check_propositions: bool,
    #[command(flatten)]
    pursuit: PursuitArgs,
    /// Directory for per-signal plot data.
    #[arg(long, env = "OBLMP_PLOT_DATA")]
    plot_data: Option<PathBuf>,
    /// Report file (default: stdout).
    #[arg(long, env = "OBLMP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DictKind {
    Bspline,
    Bspline2x,
    Background,
}

#[derive(Args)]
struct DictGenArgs {
    #[arg(long, env = "OBLMP_KIND", value_enum)]
    kind: DictKind,
    #[arg(long, env = "OBLMP_GRID_POINTS", default_value_t = GridSpec::DEFAULT_POINTS)]
    grid_points: usize,
    #[arg(long, env = "OBLMP_KNOT_STEP", default_value_t = KNOT_STEP)]
    knot_step: f64,
    /// Number of background functions.
    #[arg(long, env = "OBLMP_N_BACKGROUND", default_value_t = BACKGROUND_SOURCES)]
    n_background: usize,
    /// Scale atoms to unit norm.
    #[arg(long, env = "OBLMP_NORMALIZE")]
    normalize: bool,
    /// Output file (default: stdout).
    #[arg(long, env = "OBLMP_OUT")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    FlipDualSign,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "OBLMP_SEED", default_value_t = 0)]
    seed: u64,
    /// Multiplies the default number of cases of every suite.
    #[arg(long, env = "OBLMP_SCALE", default_value_t = 1.0)]
    scale: f64,
    /// Test hook: corrupt the dual update.
    #[arg(long, env = "OBLMP_INJECT_FAULT", value_enum, default_value = "none", hide = true)]
    inject_fault: FaultArg,
    /// JSON summary file.
    #[arg(long, env = "OBLMP_OUT")]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::InvalidGrid(_) => 1,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse(_) | Error::EmptySignal => 2,
        Error::DegenerateAtom { .. } | Error::DependentAtom { .. } | Error::SingularGram { .. } => 3,
        Error::DimensionMismatch { .. } | Error::LengthMismatch { .. } => 5,
        Error::EmptyDictionary => 6,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Separate(a) => separate(a),
        Command::Experiment(a) => experiment(a),
        Command::DictGen(a) => dict_gen(a),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(4)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}


fn separate(a: SeparateArgs) -> Result<(), Failure> {
    let f = io::read_signal(&a.signal)?;
    let atoms = io::read_atoms(&a.dict)?;
    let bg = match &a.background {
        Some(p) => BackgroundModel::from_sources(&io::read_atoms(p)?, a.redundancy_tol, a.m_cap)?,
        None => BackgroundModel::empty(),
    };
    let cfg = a.pursuit.apply(PursuitConfig::default());
    let result = oblmp(&atoms, &bg, &f, &cfg)?;
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n"))?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let base = ExperimentConfig::standard(a.test_id)?;
    let cfg = ExperimentConfig {
        n_signals: a.n_signals,
        seed: a.seed,
        grid: GridSpec {
            n_points: a.grid_points,
            ..GridSpec::default()
        },
        m_cap: Some(a.m_cap),
        success_threshold: a.success_threshold,
        background_mode: match a.background_mode {
            BgMode::Modeled => BackgroundMode::Modeled,
            BgMode::Raw => BackgroundMode::Raw,
        },
        background_amplitude: a.background_amplitude,
        normalize_atoms: !a.no_normalize,
        run_baseline: !a.no_baseline,
        check_propositions: a.check_propositions,
        pursuit: a.pursuit.apply(base.pursuit),
        ..base
    };
    let report = match &a.plot_data {
        Some(dir) => run_experiment_with_plots(&cfg, dir)?,
        None => run_experiment(&cfg)?,
    };
    eprintln!(
        "test {}: {}/{} separated (dictionary {} atoms, rank {}, coherence {:.4}){}",
        report.test_id,
        report.n_success,
        report.n_signals,
        report.dictionary.atoms,
        report.dictionary.rank,
        report.dictionary.coherence,
        report
            .baseline_failures
            .map(|b| format!("; full-dictionary projection failed on {b}"))
            .unwrap_or_default()
    );
    emit(a.out.as_deref(), &(report.to_json()? + "\n"))?;
    Ok(())
}

fn dict_gen(a: DictGenArgs) -> Result<(), Failure> {
    let gs = GridSpec {
        n_points: a.grid_points,
        ..GridSpec::default()
    };
    let grid = gs.grid()?;
    let mut meta = BTreeMap::new();
    let atoms = match a.kind {
        DictKind::Bspline | DictKind::Bspline2x => {
            let spec = match a.kind {
                DictKind::Bspline => SplineSpec::basis(a.knot_step),
                _ => SplineSpec::double_support(a.knot_step),
            };
            let mut d = bspline_dictionary(&gs, &spec)?;
            if a.normalize {
                d = d.normalized();
            }
            meta.insert("kind".into(), d.label().to_string());
            meta.insert("knot_step".into(), a.knot_step.to_string());
            meta.insert("support_scale".into(), spec.support_scale.to_string());
            meta.insert("stride".into(), a.knot_step.to_string());
            meta.insert("normalized".into(), a.normalize.to_string());
            d.atoms().to_vec()
        }
        DictKind::Background => {
            meta.insert("kind".into(), "background".into());
            meta.insert("function".into(), format!("(x+1)^(-{BACKGROUND_EXPONENT_STEP}*i)"));
            background_family(&gs, a.n_background, BACKGROUND_EXPONENT_STEP)?
        }
    };
    let table = io::atoms_table(&atoms, Some(&grid), meta)?;
    match &a.out {
        Some(p) => io::write_table(p, &table)?,
        None => io::write_table_to(std::io::stdout().lock(), &table)?,
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if !(a.scale > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {}", a.scale)).into());
    }
    let d = VerifyConfig::default();
    let n = |c: usize| ((c as f64 * a.scale).ceil() as usize).max(1);
    let cfg = VerifyConfig {
        seed: a.seed,
        oracle_cases: n(d.oracle_cases),
        projector_cases: n(d.projector_cases),
        proposition_cases: n(d.proposition_cases),
        oomp_cases: n(d.oomp_cases),
        criterion_steps: n(d.criterion_steps),
        biorthogonality_cases: n(d.biorthogonality_cases),
        fault: match a.inject_fault {
            FaultArg::None => Fault::None,
            FaultArg::FlipDualSign => Fault::FlipDualUpdateSign,
        },
    };
    let outcomes = run_all(&cfg)?;
    for o in &outcomes {
        println!(
            "{} {} cases={} worst={:.3e} tol={:.0e}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.cases,
            o.worst,
            o.tolerance
        );
    }
    if let Some(p) = &a.out {
        io::write_json(p, &outcomes)?;
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| {
            format!(
                "{} (seed {}, case {})",
                o.name,
                o.seed,
                o.failing_case.unwrap_or_default()
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}

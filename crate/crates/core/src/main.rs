use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hazyard::experiment::{
    self, emit_batch, emit_sweep, generate_instance, parse_dims, parse_sweep_csv, ExperimentError, ExperimentSpec,
    OutputFormat, SweepAxis, SweepValue, TypeMix,
};
use hazyard::oracle::verify_trace;
use hazyard::strategy::{self, RunStatus, Strategy, StrategyParams};
use hazyard::trace::{export_trace, parse_trace};
use hazyard::yard::{load_snapshot, save_snapshot, YardDimensions};
use hazyard::{SeparationRuleMatrix, WeightingPolicy};

const EXIT_UNSAFE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "hazyard", version, about = "Dangerous-container placement in a yard block")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one random instance as a snapshot.
    Generate {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Run index within the seed's stream.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Directory for `instance.snap`; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repair one snapshot and write its move trace.
    Run {
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Directory for `trace.txt`; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a seeded batch of random instances.
    Batch {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// One batch per value of a parameter.
    Sweep {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// fill, dims or t1_pct.
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values, e.g. `50,70,90` or `10x10x2,40x10x2`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Output formats; may be repeated.
        #[arg(long, value_delimiter = ',', default_value = "csv")]
        format: Vec<OutputFormat>,
    },
    /// Replay a trace file and check every move.
    Verify {
        /// Trace written by `run`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Turn a sweep CSV into plot data or SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "svg")]
        format: OutputFormat,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Block size as rows x slots x tiers.
    #[arg(long, default_value = "10x10x4")]
    dims: String,
    /// Row, slot and tier pitch in metres.
    #[arg(long, default_value = "4.5,6.5,2.6")]
    pitch: String,
    /// Occupied percentage of the block.
    #[arg(long, default_value_t = 75.0)]
    fill: f64,
    /// Percentage of occupied cells per dangerous type; T5 gets the rest.
    #[arg(long, default_value = "t1=1,t2=7,t3=7,t4=20")]
    mix: TypeMix,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "cabs")]
    strategy: Strategy,
    /// Solver seed for `run`; batches derive one per run from `--seed`.
    #[arg(long = "solver-seed", default_value_t = 0)]
    solver_seed: u64,
    /// Movement budget; 1000 for cabs and 10000 for schelling by default.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 5)]
    tabu: usize,
    #[arg(long, default_value_t = 10)]
    candidates: usize,
    #[arg(long, default_value = "inverse_neighbourhood")]
    weighting: WeightingPolicy,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write runtime columns as 0 so repeated batches compare byte for byte.
    #[arg(long)]
    comparison: bool,
}

/// Failure mapped to a process exit code.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.to_string(),
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::Verification { .. } => EXIT_VERIFY,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl SolverArgs {
    fn params(&self) -> Result<StrategyParams, Failure> {
        let mut p = StrategyParams::new(self.strategy, self.solver_seed);
        if let Some(b) = self.budget {
            p.movement_budget = b;
        }
        p.tabu_capacity = self.tabu;
        p.candidate_set_size = self.candidates;
        p.weighting = self.weighting;
        p.validate().map_err(usage)?;
        Ok(p)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_rules(path: Option<&Path>) -> Result<SeparationRuleMatrix, Failure> {
    match path {
        Some(p) => SeparationRuleMatrix::parse(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => Ok(SeparationRuleMatrix::standard()),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn experiment_spec(instance: &InstanceArgs, params: StrategyParams, runs: usize) -> Result<ExperimentSpec, Failure> {
    let (rows, slots, tiers) = parse_dims(&instance.dims).map_err(usage)?;
    let pitch: Vec<f64> = instance
        .pitch
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad --pitch `{}`", instance.pitch)))?;
    let [r, s, t] = pitch.as_slice() else {
        return Err(usage("--pitch takes three comma-separated values"));
    };
    let spec = ExperimentSpec {
        dims: YardDimensions::with_pitch(rows, slots, tiers, [*r, *s, *t]).map_err(usage)?,
        fill: instance.fill / 100.0,
        mix: instance.mix.clone(),
        params,
        runs,
        master_seed: instance.seed,
        matrix: load_rules(instance.rules.as_deref())?,
    };
    spec.validate()?;
    Ok(spec)
}

fn print_stats(label: &str, stats: &experiment::RunStatistics) {
    let movements = match stats.movements {
        Some(m) => format!("min {} max {} avg {:.2}", m.min, m.max, m.avg),
        None => "no successful runs".to_string(),
    };
    let statuses: Vec<String> = stats.status_counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!(
        "{label}: {} runs, success {:.1}%, {movements}; {}",
        stats.runs,
        stats.success_rate,
        statuses.join(" ")
    );
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Generate { instance, index, out } => {
            let spec = experiment_spec(&instance, StrategyParams::new(Strategy::Cabs, 0), 1)?;
            let cfg = generate_instance(&spec, index)?;
            let text = save_snapshot(&cfg);
            match out {
                Some(dir) => {
                    let path = write(&dir, "instance.snap", &text)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Run {
            snapshot,
            solver,
            rules,
            out,
        } => {
            let params = solver.params()?;
            let m = load_rules(rules.as_deref())?;
            let initial =
                load_snapshot(&read(&snapshot)?).map_err(|e| usage(format!("{}: {e}", snapshot.display())))?;
            m.check_configuration(&initial).map_err(usage)?;
            let mut cfg = initial.clone();
            let outcome = strategy::run(&mut cfg, &m, &params).map_err(usage)?;
            let report = verify_trace(&initial, &outcome.trace, Some(&(&outcome).into()), &m);
            if !report.passed() {
                return Err(Failure {
                    code: EXIT_VERIFY,
                    message: format!("trace verification failed\n{report}"),
                });
            }
            let text = export_trace(&initial, &outcome);
            match out {
                Some(dir) => {
                    write(&dir, "trace.txt", &text)?;
                    write(&dir, "final.snap", &save_snapshot(&cfg))?;
                }
                None => print!("{text}"),
            }
            eprintln!(
                "{}: {} after {} movements (worst {}, sum {})",
                params.strategy, outcome.status, outcome.movements, outcome.final_worst, outcome.final_sum
            );
            Ok(if outcome.status == RunStatus::Safe {
                0
            } else {
                EXIT_UNSAFE
            })
        }
        Command::Batch {
            instance,
            solver,
            output,
            runs,
        } => {
            let spec = experiment_spec(&instance, solver.params()?, runs)?;
            let batch = experiment::run_batch(&spec)?;
            emit_batch(&batch, &spec, &output.out, !output.comparison)?;
            print_stats(spec.params.strategy.name(), &batch.stats);
            for (run, audit) in batch.audits.iter().filter(|(_, a)| a.confirmed_failure()) {
                println!("run {run}: {} although a safe placement exists", audit.status);
            }
            Ok(0)
        }
        Command::Sweep {
            instance,
            solver,
            output,
            runs,
            axis,
            values,
            format,
        } => {
            let spec = experiment_spec(&instance, solver.params()?, runs)?;
            let values: Vec<SweepValue> = values
                .iter()
                .map(|v| SweepValue::parse(axis, v))
                .collect::<Result<_, _>>()
                .map_err(usage)?;
            let table = experiment::sweep(&spec, axis, &values)?;
            for p in &table.points {
                print_stats(&format!("{}={}", axis.name(), p.value.label()), &p.stats);
            }
            for f in format {
                for path in emit_sweep(&table, f, &output.out, !output.comparison)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            Ok(0)
        }
        Command::Verify { input, rules } => {
            let m = load_rules(rules.as_deref())?;
            let doc = parse_trace(&read(&input)?).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            let report = verify_trace(&doc.initial, &doc.moves, doc.claim.as_ref(), &m);
            println!("{report}");
            Ok(if report.passed() { 0 } else { EXIT_VERIFY })
        }
        Command::Plot { input, format, out } => {
            let table = parse_sweep_csv(&read(&input)?).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            for path in emit_sweep(&table, format, &out, true)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

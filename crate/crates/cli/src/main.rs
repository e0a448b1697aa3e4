use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use speccalc::counterexamples::{
    dominated_continuity_violation_report, locality_violation_report, OpNormEvaluator, TailEvaluator,
};
use speccalc::evaluator::{audit_axioms, calibrate_profile, AuditSuite, Evaluator, TraceFormEvaluator};
use speccalc::falsify::{run_all, run_f1, run_f2, run_f3, run_f4, Control, Report, RunConfig};
use speccalc::growth::{
    classify_growth, classify_spectrum, default_grid, tensor_growth_bound_check, GrowthConfig,
};
use speccalc::ingestion::{
    gen_model, graph_laplacian_spectrum, parse_samples, parse_spectrum, AdjacencyMatrix, ModelKind,
};
use speccalc::numeric::geomspace;
use speccalc::{DiscreteSpectrum, FunctionSpec};

#[derive(Parser)]
#[command(name = "speccalc", version, about = "Spectral calculus checks on discrete spectra")]
struct Cli {
    /// Seed for every randomized check.
    #[arg(long, global = true, default_value_t = 1729)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative tolerance for floating-point comparisons.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of random instances.
    #[arg(long, global = true)]
    instances: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a growth class to a spectrum or to counting samples.
    Classify {
        #[command(flatten)]
        input: SpectrumInput,
        /// CSV with header `lambda,count`.
        #[arg(long, conflicts_with_all = ["spectrum", "graph", "model"])]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = 48)]
        grid_points: usize,
    },
    /// Evaluate a trace-form evaluator, optionally after a functional-calculus transform.
    Evaluate {
        #[command(flatten)]
        input: SpectrumInput,
        /// Profile JSON (file or inline): a function spec with optional `c`, or `{"table": .., "c": ..}`.
        #[arg(long)]
        evaluator: String,
        /// Function spec JSON (file or inline) applied before evaluating.
        #[arg(long)]
        transform: Option<String>,
    },
    /// Recover the profile table of an evaluator from rank-one inputs.
    Calibrate {
        #[arg(long)]
        evaluator: String,
        /// Comma-separated positive, increasing grid.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Audit the axioms on randomized inputs.
    Audit {
        /// `trace`, `opnorm`, `tail`, or a profile JSON (file or inline).
        #[arg(long, default_value = "trace")]
        evaluator: String,
    },
    /// Count a tensor product two ways and bound its growth.
    Tensor {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        d1: f64,
        #[arg(long, default_value_t = 1.0)]
        d2: f64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long)]
        grid_lo: f64,
        #[arg(long)]
        grid_hi: f64,
        #[arg(long, default_value_t = 32)]
        grid_points: usize,
        #[arg(long, default_value_t = 2.0)]
        fit_decades: f64,
    },
    /// Reproduce the axiom-independence counterexamples.
    Counterexample {
        #[command(subcommand)]
        which: CounterexampleKind,
    },
    /// Run the falsification tests.
    Falsify {
        #[arg(value_enum)]
        test: FalsifyTest,
        /// Replace the run's input with a known-bad control.
        #[arg(long, value_enum)]
        control: Option<ControlArg>,
    },
}

#[derive(Subcommand)]
enum CounterexampleKind {
    /// Tail limit along `P_k -> I`.
    Dominated {
        #[arg(long, default_value_t = 10)]
        k_max: usize,
    },
    /// Operator norm on `c I_N` split into rank-one blocks.
    Locality {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FalsifyTest {
    F1,
    F2,
    F3,
    F4,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControlArg {
    Sabotage,
    MixedClasses,
    TailEvaluator,
}

#[derive(Args)]
struct SpectrumInput {
    /// Spectrum JSON file.
    #[arg(long, conflicts_with_all = ["graph", "model"])]
    spectrum: Option<PathBuf>,
    /// Adjacency JSON file; the spectrum is that of the graph Laplacian.
    #[arg(long, conflicts_with = "model")]
    graph: Option<PathBuf>,
    /// Model JSON such as `{"kind":"poly"}`, with `--size` atoms.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 1000)]
    size: u64,
}

impl SpectrumInput {
    fn given(&self) -> bool {
        self.spectrum.is_some() || self.graph.is_some() || self.model.is_some()
    }

    fn load(&self, tol: f64) -> Result<DiscreteSpectrum> {
        if let Some(p) = &self.spectrum {
            return Ok(parse_spectrum(&read(p)?).with_context(|| format!("parsing {}", p.display()))?);
        }
        if let Some(p) = &self.graph {
            let a = AdjacencyMatrix::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?;
            return Ok(graph_laplacian_spectrum(&a, tol)?);
        }
        if let Some(m) = &self.model {
            let kind: ModelKind = serde_json::from_str(&inline_or_file(m)?).context("parsing model")?;
            return Ok(gen_model(&kind, self.size)?);
        }
        bail!("one of --spectrum, --graph or --model is required")
    }
}

fn read(p: &PathBuf) -> Result<Vec<u8>> {
    fs::read(p).with_context(|| format!("reading {}", p.display()))
}

/// Arguments starting with `{` are JSON; anything else names a file.
fn inline_or_file(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}

fn load_evaluator(arg: &str) -> Result<TraceFormEvaluator> {
    Ok(TraceFormEvaluator::from_json(&inline_or_file(arg)?).context("parsing evaluator")?)
}

fn emit(out: &Option<PathBuf>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns whether everything checked passed.
fn run(cli: Cli) -> Result<bool> {
    let tol = cli.tol.unwrap_or(1e-9);
    if !(tol > 0.0 && tol.is_finite()) {
        bail!("--tol must be finite and > 0");
    }
    let out = &cli.out;
    match cli.command {
        Command::Classify {
            input,
            samples,
            grid_points,
        } => {
            let cfg = GrowthConfig::default();
            let fit = match samples {
                Some(p) => classify_growth(&parse_samples(&read(&p)?)?, &cfg)?,
                None if input.given() => {
                    let s = input.load(1e-12)?;
                    classify_spectrum(&s, &default_grid(&s, grid_points)?, &cfg)?
                }
                None => bail!("one of --spectrum, --graph, --model or --samples is required"),
            };
            emit(out, &fit)?;
            Ok(true)
        }
        Command::Evaluate {
            input,
            evaluator,
            transform,
        } => {
            let e = load_evaluator(&evaluator)?;
            let mut s = input.load(1e-12)?;
            let f: Option<FunctionSpec> = match transform {
                Some(t) => Some(serde_json::from_str(&inline_or_file(&t)?).context("parsing transform")?),
                None => None,
            };
            if let Some(f) = &f {
                s = s.apply_calculus(f)?;
            }
            let value = e.evaluate(&s)?;
            emit(
                out,
                &json!({ "evaluator": e.to_json(), "transform": f, "atoms": s.atoms().len(), "value": value }),
            )?;
            Ok(true)
        }
        Command::Calibrate { evaluator, grid } => {
            let e = load_evaluator(&evaluator)?;
            let profile = calibrate_profile(&e, &grid)?;
            emit(out, &json!({ "source": e.to_json(), "profile": profile, "c": 1.0 }))?;
            Ok(true)
        }
        Command::Audit { evaluator } => {
            let suite = AuditSuite {
                seed: cli.seed,
                instances: cli.instances.unwrap_or(AuditSuite::default().instances),
                tol,
                ..AuditSuite::default()
            };
            let report = match evaluator.as_str() {
                "trace" => audit_axioms(&TraceFormEvaluator::trace(), &suite),
                "opnorm" => audit_axioms(&OpNormEvaluator, &suite),
                "tail" => audit_axioms(&TailEvaluator, &suite),
                other => audit_axioms(&load_evaluator(other)?, &suite),
            };
            emit(out, &report)?;
            Ok(report.failed().is_empty())
        }
        Command::Tensor {
            left,
            right,
            d1,
            d2,
            epsilon,
            grid_lo,
            grid_hi,
            grid_points,
            fit_decades,
        } => {
            if !(grid_lo > 0.0 && grid_hi > grid_lo && grid_points >= 2) {
                bail!("need 0 < --grid-lo < --grid-hi and --grid-points >= 2");
            }
            let a = parse_spectrum(&read(&left)?)?;
            let b = parse_spectrum(&read(&right)?)?;
            let grid = geomspace(grid_lo, grid_hi, grid_points);
            let report = tensor_growth_bound_check(&a, &b, d1, d2, epsilon, &grid, fit_decades)?;
            emit(out, &report)?;
            Ok(report.holds)
        }
        Command::Counterexample { which } => match which {
            CounterexampleKind::Dominated { k_max } => {
                let r = dominated_continuity_violation_report(k_max)?;
                emit(out, &r)?;
                Ok(r.violated)
            }
            CounterexampleKind::Locality { n, c } => {
                let r = locality_violation_report(n, c)?;
                emit(out, &r)?;
                Ok(r.violated)
            }
        },
        Command::Falsify { test, control } => {
            let config = RunConfig {
                seed: cli.seed,
                tol,
                instances: cli.instances.unwrap_or(RunConfig::default().instances),
                control: control.map(|c| match c {
                    ControlArg::Sabotage => Control::SabotagedEvaluator,
                    ControlArg::MixedClasses => Control::MixedClasses,
                    ControlArg::TailEvaluator => Control::TailEvaluator,
                }),
                ..RunConfig::default()
            };
            config.validate()?;
            let reports: Vec<Report> = match test {
                FalsifyTest::F1 => vec![run_f1(&config)],
                FalsifyTest::F2 => vec![run_f2(&config)],
                FalsifyTest::F3 => vec![run_f3(&config)],
                FalsifyTest::F4 => vec![run_f4(&config)],
                FalsifyTest::All => run_all(&config),
            };
            let passed = reports.iter().all(|r| r.passed);
            if reports.len() == 1 {
                emit(out, &reports[0])?;
            } else {
                emit(out, &json!({ "passed": passed, "reports": reports }))?;
            }
            Ok(passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

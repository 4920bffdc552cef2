//! Command-line front end. Every command loads its inputs, runs one
//! operation and prints a JSON report.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::clogic::sexpr::parse_formula;
use crate::clogic::{EvalConfig, Evaluator, Structures, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::matrix::{CMatrix, Tolerance};
use crate::opsystem::{
    is_product_closed_exact, random_with_norm, unitary_defect, OperatorSystem, MEMBERSHIP_TOL,
};
use crate::predicates::{
    product_closure_defect, unitary_average_decompose, unitary_average_generators, unitary_detect,
    walter_matrix, PSI_UNITARY_PLATEAU,
};
use crate::ucp::{pisier_check, population_suite, weyl_unitaries, UcpMap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "opsys", version, about = "Numerical checks for operator systems and u.c.p. maps")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, global = true, default_value_t = 16)]
    pub multistart: usize,

    #[arg(long, global = true, default_value_t = 2000)]
    pub max_iter: usize,

    #[arg(long, global = true, default_value_t = 1e-3)]
    pub opt_tol: f64,

    /// Exit with status 1 when the command's checked quantity exceeds this.
    #[arg(long = "assert", global = true, value_name = "THRESHOLD")]
    pub assert_threshold: Option<f64>,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Product-closure defect of a system inside a C*-algebra, next to the exact verdict.
    CheckClosure {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        ambient: PathBuf,
    },
    /// Evaluate a sentence against named structures.
    Eval {
        #[arg(long)]
        sentence: PathBuf,
        /// NAME=path, repeatable.
        #[arg(long = "structure", value_name = "NAME=PATH")]
        structures: Vec<String>,
    },
    /// Decide unitarity of a contraction through ψ_1..ψ_n.
    DetectUnitary {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 2)]
        n_max: usize,
    },
    /// Positivity of the 3×3 block matrix [[1,u,x],[u*,1,v],[x*,v*,1]].
    Walter {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        x: PathBuf,
    },
    /// Write a contraction as the average of four unitaries (times two).
    Decompose {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Kadison–Schwarz and Cauchy–Schwarz checks over random u.c.p. maps.
    UcpSuite {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        max_dim: usize,
    },
    /// Unitary preservation against multiplicativity for one map.
    Pisier {
        #[arg(long)]
        map: PathBuf,
        /// Random contraction pairs tested for multiplicativity.
        #[arg(long, default_value_t = 20)]
        pairs: usize,
    },
}

#[derive(Serialize, Debug)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<String>,
    pub config: EvalConfig,
    pub result: Value,
    pub elapsed_ms: f64,
    pub seed: u64,
}

struct Outcome {
    inputs: Vec<String>,
    result: Value,
    /// Compared against --assert.
    checked: f64,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Parse(e.to_string()))
}

fn run_command(command: &Command, config: &EvalConfig) -> Result<Outcome> {
    match command {
        Command::CheckClosure { system, ambient } => {
            let a: OperatorSystem = read_json(system)?;
            let b: OperatorSystem = read_json(ambient)?;
            let report = product_closure_defect(&a, &b, config)?;
            let (closed, exact_defect) = is_product_closed_exact(&a, MEMBERSHIP_TOL);
            Ok(Outcome {
                inputs: vec![show(system), show(ambient)],
                checked: report.defect,
                result: json!({
                    "closure": to_value(&report)?,
                    "oracle": { "closed": closed, "defect": exact_defect },
                }),
            })
        }
        Command::Eval { sentence, structures } => {
            let f = parse_formula(&read_json::<Value>(sentence)?)?;
            let mut inputs = vec![show(sentence)];
            let mut named = Structures::new();
            for spec in structures {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected NAME=PATH, got {spec}")))?;
                named.insert(name.to_string(), read_json(Path::new(path))?);
                inputs.push(path.to_string());
            }
            let r = Evaluator::new(&named, *config).evaluate(&f)?;
            Ok(Outcome { inputs, checked: r.value, result: to_value(&r)? })
        }
        Command::DetectUnitary { matrix, n_max } => {
            let u: CMatrix = read_json(matrix)?;
            let r = unitary_detect(&u, *n_max, config)?;
            let lowest = r.psi_values.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(Outcome {
                inputs: vec![show(matrix)],
                checked: PSI_UNITARY_PLATEAU - lowest,
                result: to_value(&r)?,
            })
        }
        Command::Walter { u, v, x } => {
            let (mu, mv, mx): (CMatrix, CMatrix, CMatrix) = (read_json(u)?, read_json(v)?, read_json(x)?);
            let tol = Tolerance::default();
            let m = walter_matrix(&mu, &mv, &mx)?;
            let dist = m.dist_to_psd(&tol)?;
            Ok(Outcome {
                inputs: vec![show(u), show(v), show(x)],
                checked: dist,
                result: json!({
                    "dist_to_psd": dist,
                    "lambda_min": m.lambda_min(&tol)?,
                    "product_gap": (&mu * &mv - &mx).op_norm(),
                }),
            })
        }
        Command::Decompose { matrix } => {
            let x: CMatrix = read_json(matrix)?;
            let us = unitary_average_decompose(&x)?;
            let gens = unitary_average_generators(&x)?;
            let sum = us.iter().fold(CMatrix::zeros(x.rows(), x.cols()), |acc, u| acc + u);
            let err = (sum.scale_real(0.5) - &x).op_norm();
            let mut worst = 0.0_f64;
            for u in &us {
                worst = worst.max(unitary_defect(u)?);
            }
            Ok(Outcome {
                inputs: vec![show(matrix)],
                checked: err,
                result: json!({
                    "unitaries": to_value(&us)?,
                    "generators": to_value(&gens)?,
                    "reconstruction_error": err,
                    "max_unitary_defect": worst,
                }),
            })
        }
        Command::UcpSuite { samples, max_dim } => {
            let r = population_suite(*samples, *max_dim, config.rng_seed)?;
            Ok(Outcome {
                inputs: vec![],
                checked: (-r.min_kadison_schwarz).max(-r.min_cs_residual),
                result: to_value(&r)?,
            })
        }
        Command::Pisier { map, pairs } => {
            let phi: UcpMap = read_json(map)?;
            let d = phi.dom_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let trial_pairs: Vec<(CMatrix, CMatrix)> = (0..*pairs)
                .map(|_| (random_with_norm(d, d, 1.0, &mut rng), random_with_norm(d, d, 1.0, &mut rng)))
                .collect();
            let r = pisier_check(&phi, &weyl_unitaries(d), &trial_pairs)?;
            Ok(Outcome { inputs: vec![show(map)], checked: r.hom_defect, result: to_value(&r)? })
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckClosure { .. } => "check-closure",
        Command::Eval { .. } => "eval",
        Command::DetectUnitary { .. } => "detect-unitary",
        Command::Walter { .. } => "walter",
        Command::Decompose { .. } => "decompose",
        Command::UcpSuite { .. } => "ucp-suite",
        Command::Pisier { .. } => "pisier",
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) => EXIT_PARSE,
        Error::InvalidInput(_) | Error::NotPsd { .. } | Error::Unsupported(_) => EXIT_PRECONDITION,
    }
}

/// Runs a parsed invocation and returns the report with the exit status it
/// calls for.
pub fn execute(cli: &Cli) -> Result<(RunReport, i32)> {
    let config = EvalConfig {
        multistart: cli.common.multistart,
        max_iter: cli.common.max_iter,
        opt_tol: cli.common.opt_tol,
        rng_seed: cli.common.seed,
    };
    config.validate()?;
    let start = Instant::now();
    let outcome = run_command(&cli.command, &config)?;
    let failed = cli.common.assert_threshold.is_some_and(|t| outcome.checked.is_nan() || outcome.checked > t);
    let report = RunReport {
        command: command_name(&cli.command).to_string(),
        inputs: outcome.inputs,
        config,
        result: outcome.result,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        seed: cli.common.seed,
    };
    Ok((report, if failed { EXIT_CHECK_FAILED } else { EXIT_OK }))
}

/// Entry point shared by the binary and tests.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok((report, code)) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match &cli.common.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, text + "\n") {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_PARSE;
                    }
                }
                None => println!("{text}"),
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! The `markov-dsep` command-line tool.
//!
//! Exit codes are part of the contract so the tool scripts cleanly:
//! 0 means valid / separated / compatible, 1 means invalid / connected /
//! incompatible, 2 means the question could not be decided either way, and
//! 3 means the request itself failed (usage, IO, parse, or an
//! inapplicable method).

pub mod dot;
pub mod format;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::dsep::{
    d_separated_by_cutting, d_separated_categorical, d_separated_classical,
    enumerate_dsep_triples, DSepQuery, DEFAULT_TRIPLE_BUDGET,
};
use crate::markov::{decide_compatibility, MarkovOptions, Verdict, EQUALITY_TOL};
use crate::normalize::{normalize, CausalModel};

use format::{parse_kernel, parse_model, to_model_json, AnyInterp, AnyKernel, LoadedModel};

/// Environment variable consulted for the numerical tolerance when no
/// `--tol` flag is given.
pub const TOL_ENV: &str = "MARKOV_DSEP_TOL";

#[derive(Parser, Debug)]
#[command(
    name = "markov-dsep",
    version,
    about = "Causal hypergraph models: d-separation, implied independences, compatibility"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check that a model file is well-formed; report its shape.
    Validate { file: PathBuf },
    /// Drop boxes whose outputs are never observed or consumed.
    Normalize {
        file: PathBuf,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Observe every wire (the bloom of the model's mechanisms).
    Purebloom {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Restrict observation to the named wires.
    Marginalize {
        file: PathBuf,
        /// Comma-separated wire names to keep observing.
        #[arg(long, value_delimiter = ',', required = true)]
        keep: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide whether X and Y are d-separated given Z.
    Dsep {
        file: PathBuf,
        /// Comma-separated wire names.
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        z: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        method: Method,
    },
    /// List conditional independences implied by the structure.
    ListCi {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampling budget when the output leg is too large to enumerate.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Decide whether a concrete kernel is compatible with the model.
    Check {
        file: PathBuf,
        /// Kernel file holding the candidate joint.
        #[arg(long)]
        kernel: PathBuf,
        /// Numerical tolerance (falls back to MARKOV_DSEP_TOL, then 1e-9).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Render the diagram in Graphviz DOT form.
    ExportDot {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
enum Method {
    /// Marginalize, cut the conditioning wires, test connectivity.
    #[default]
    Categorical,
    /// The same criterion, via the literal marginalize-and-cut pipeline.
    Cutting,
    /// Bayes-ball on the underlying DAG (closed single-output blooms only).
    Classical,
}

/// Run the tool on the given arguments (argv[0] included) and return the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 3;
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(Failure { code, msg }) => {
            eprintln!("{msg}");
            code
        }
    }
}

struct Failure {
    code: i32,
    msg: String,
}

fn fail(code: i32, msg: impl Into<String>) -> Failure {
    Failure { code, msg: msg.into() }
}

fn read_model(path: &Path) -> Result<LoadedModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| fail(e.exit_code(), format!("{}: {e}", path.display())))
}

fn as_causal_model(loaded: &LoadedModel) -> Result<CausalModel, Failure> {
    CausalModel::new(loaded.diagram.clone())
        .map_err(|e| fail(1, format!("not a causal model: {e}")))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text)
            .map_err(|e| fail(3, format!("{}: {e}", p.display()))),
    }
}

fn resolve_tol(flag: Option<f64>) -> Result<f64, Failure> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(TOL_ENV) {
        Ok(v) => v
            .parse::<f64>()
            .map_err(|_| fail(3, format!("{TOL_ENV} is not a number: \"{v}\""))),
        Err(_) => Ok(EQUALITY_TOL),
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, Failure> {
    match cmd {
        Cmd::Validate { file } => validate(&file),
        Cmd::Normalize { file, output } => {
            let loaded = read_model(&file)?;
            let d = normalize(&loaded.diagram);
            emit(&output, &to_model_json(&d, loaded.interpretation.as_ref()))?;
            Ok(0)
        }
        Cmd::Purebloom { file, output } => {
            let loaded = read_model(&file)?;
            let m = as_causal_model(&loaded)?;
            let d = m.pure_bloom_version().into_diagram();
            emit(&output, &to_model_json(&d, loaded.interpretation.as_ref()))?;
            Ok(0)
        }
        Cmd::Marginalize { file, keep, output } => {
            let loaded = read_model(&file)?;
            let m = as_causal_model(&loaded)?;
            let m = m
                .marginalize_by_name(keep.iter())
                .map_err(|e| fail(3, e.to_string()))?;
            emit(&output, &to_model_json(m.diagram(), loaded.interpretation.as_ref()))?;
            Ok(0)
        }
        Cmd::Dsep { file, x, y, z, method } => {
            let loaded = read_model(&file)?;
            let m = as_causal_model(&loaded)?;
            let q = DSepQuery::from_names(m.diagram(), x.iter(), y.iter(), z.iter())
                .map_err(|e| fail(3, e.to_string()))?;
            let sep = match method {
                Method::Categorical => {
                    d_separated_categorical(&m, &q).map_err(|e| fail(3, e.to_string()))?
                }
                Method::Cutting => {
                    d_separated_by_cutting(&m, &q).map_err(|e| fail(3, e.to_string()))?
                }
                Method::Classical => d_separated_classical(&m, &q)
                    .map_err(|e| fail(3, format!("classical criterion: {e}")))?,
            };
            if sep {
                println!("separated");
                Ok(0)
            } else {
                println!("connected");
                Ok(1)
            }
        }
        Cmd::ListCi { file, seed, budget } => {
            let loaded = read_model(&file)?;
            let m = as_causal_model(&loaded)?;
            let list =
                enumerate_dsep_triples(&m, seed, budget.unwrap_or(DEFAULT_TRIPLE_BUDGET));
            let d = m.diagram();
            let names = |s: &std::collections::BTreeSet<usize>| {
                if s.is_empty() {
                    "∅".to_string()
                } else {
                    s.iter()
                        .map(|&w| d.wires()[w].name().to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                }
            };
            let sep_count = list.items.iter().filter(|(_, s)| *s).count();
            println!(
                "# {} independences among {} admissible triples ({})",
                sep_count,
                list.items.len(),
                if list.exhaustive { "exhaustive" } else { "sampled" }
            );
            for (q, sep) in &list.items {
                if *sep {
                    println!("{} ⊥ {} | {}", names(&q.x), names(&q.y), names(&q.z));
                }
            }
            Ok(0)
        }
        Cmd::Check { file, kernel, tol, seed, budget } => {
            let loaded = read_model(&file)?;
            let m = as_causal_model(&loaded)?;
            let ktext = std::fs::read_to_string(&kernel)
                .map_err(|e| fail(3, format!("{}: {e}", kernel.display())))?;
            let k = parse_kernel(&ktext)
                .map_err(|e| fail(e.exit_code(), format!("{}: {e}", kernel.display())))?;
            let opts = MarkovOptions {
                tol: resolve_tol(tol)?,
                seed,
                budget: budget.unwrap_or(DEFAULT_TRIPLE_BUDGET),
            };
            let verdict = match k {
                AnyKernel::Fin(k) => {
                    decide_compatibility(&crate::finstoch::FinStoch, &m, &k, &opts)
                        .map_err(|e| fail(3, e.to_string()))?
                        .verdict
                }
                AnyKernel::Gauss(k) => {
                    decide_compatibility(&crate::gauss::Gauss, &m, &k, &opts)
                        .map_err(|e| fail(3, e.to_string()))?
                        .verdict
                }
            };
            match verdict {
                Verdict::Compatible => {
                    println!("compatible");
                    Ok(0)
                }
                Verdict::Incompatible(w) => {
                    println!("incompatible: violated independence {w}");
                    Ok(1)
                }
                Verdict::Unknown(r) => {
                    println!("unknown: {r}");
                    Ok(2)
                }
            }
        }
        Cmd::ExportDot { file, output } => {
            let loaded = read_model(&file)?;
            emit(&output, &dot::to_dot(&loaded.diagram))?;
            Ok(0)
        }
    }
}

fn validate(file: &Path) -> Result<i32, Failure> {
    let loaded = read_model(file)?;
    let d = &loaded.diagram;
    match &loaded.interpretation {
        Some(AnyInterp::Fin(i)) => {
            i.validate(d).map_err(|e| fail(1, format!("interpretation: {e}")))?;
        }
        Some(AnyInterp::Gauss(i)) => {
            i.validate(d).map_err(|e| fail(1, format!("interpretation: {e}")))?;
        }
        None => {}
    }
    let normalized = crate::normalize::is_normalized(d);
    let model = CausalModel::new(d.clone());
    println!(
        "valid: {} wires, {} boxes, {} inputs, {} outputs",
        d.wires().len(),
        d.boxes().len(),
        d.inputs().len(),
        d.outputs().len()
    );
    println!("normalized: {}", if normalized { "yes" } else { "no" });
    match &model {
        Ok(m) => println!("pure bloom: {}", if m.is_pure_bloom() { "yes" } else { "no" }),
        Err(e) => println!("causal model: no ({e})"),
    }
    println!(
        "interpretation: {}",
        match &loaded.interpretation {
            Some(AnyInterp::Fin(_)) => "finstoch",
            Some(AnyInterp::Gauss(_)) => "gauss",
            None => "none",
        }
    );
    Ok(0)
}

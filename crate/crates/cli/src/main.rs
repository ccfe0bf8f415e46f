//! `nodal`: command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O, 2 unmet hypotheses, 3 numerical
//! disagreement or breakdown.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nodal::io::{self as files, HybridFile, Input, RecoveryFile};
use nodal::rank::{verify_rank_of_matrix, verify_rank_via_augmentation_with, verify_rank_with};
use nodal::suites::{run_suite, Suite};
use nodal::ybus::assemble_with;
use nodal::{
    generate, hybrid_parameters, kron_eliminate, validate, AdmittanceMatrix, AssemblyMethod, BlockView, Error, GenSpec,
    Network, NodeId, Partition, PhasePolicy, DEFAULT_ZERO_TOL,
};

const EXIT_IO: u8 = 1;
const EXIT_PRECONDITION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "nodal", version, about = "Nodal admittance matrix toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankMethodArg {
    Direct,
    VirtualGround,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum AssemblyArg {
    Stamping,
    TripleProduct,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    RePositive,
    Arbitrary,
    PureImaginary,
}

#[derive(Subcommand)]
enum Command {
    /// Report connectivity and admittance hypotheses of a network file.
    Validate {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        zero_tol: f64,
    },
    /// Assemble the nodal admittance matrix and write it as a matrix file.
    Ybus {
        path: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "stamping")]
        method: AssemblyArg,
    },
    /// Compare predicted and measured rank.
    Rank {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        method: RankMethodArg,
        #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
        zero_tol: f64,
    },
    /// Kron-reduce a set of zero-injection nodes.
    Kron {
        path: PathBuf,
        /// Comma-separated node ids to eliminate.
        #[arg(long, conflicts_with = "retain", required_unless_present = "retain")]
        eliminate: Option<String>,
        /// Comma-separated node ids to keep; everything else is eliminated.
        #[arg(long)]
        retain: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
        /// Defaults to `<out>.recovery.json`.
        #[arg(long)]
        recovery_out: Option<PathBuf>,
    },
    /// Hybrid parameters for one class of a partition.
    Hybrid {
        path: PathBuf,
        /// Per-node class labels, e.g. "0,0,1,1,2".
        #[arg(long, conflicts_with = "class", required_unless_present = "class")]
        partition: Option<String>,
        /// One class as comma-separated node ids; repeat for each class.
        #[arg(long)]
        class: Vec<String>,
        #[arg(long)]
        solve_class: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the seeded property suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Emit a random connected network file.
    Randgen {
        #[arg(long, default_value_t = 5)]
        nodes_min: usize,
        #[arg(long, default_value_t = 50)]
        nodes_max: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, default_value_t = 0.0)]
        shunt_prob: f64,
        #[arg(long)]
        require_shunt: bool,
        #[arg(long, default_value_t = 1e-2)]
        mag_min: f64,
        #[arg(long, default_value_t = 1e2)]
        mag_max: f64,
        #[arg(long, value_enum, default_value = "re-positive")]
        phase: PhaseArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse(_) | Error::Structural(_) | Error::Dimension(_) => EXIT_IO,
            Error::Precondition(_) | Error::Hypothesis(_) => EXIT_PRECONDITION,
            Error::Singular { .. } | Error::SvdNotConverged { .. } | Error::NotReducible(_) | Error::NotSolvable(_) => {
                EXIT_NUMERICAL
            }
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn fail<T>(code: u8, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure {
        code,
        message: message.into(),
    })
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_input(path: &Path) -> Result<Input, Failure> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok(Input::Network(files::network_from_csv(&text, None)?));
    }
    Ok(files::input_from_json(&text)?)
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    match load_input(path)? {
        Input::Network(n) => Ok(n),
        Input::Matrix(_) => fail(EXIT_IO, format!("{}: expected a network file", path.display())),
    }
}

fn load_matrix(path: &Path) -> Result<AdmittanceMatrix, Failure> {
    Ok(match load_input(path)? {
        Input::Network(n) => nodal::assemble(&n)?,
        Input::Matrix(m) => m,
    })
}

fn write_text(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("{}: {e}", p.display()),
        }),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_ids(s: &str) -> Result<Vec<NodeId>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>().map(NodeId).map_err(|_| Failure {
                code: EXIT_IO,
                message: format!("'{t}' is not a node id"),
            })
        })
        .collect()
}

fn cmd_validate(path: &Path, zero_tol: f64) -> Result<u8, Failure> {
    let net = load_network(path)?;
    let r = validate(&net, zero_tol)?;
    println!("nodes: {}", net.node_count());
    println!("branches: {}", net.branches().len());
    println!("shunts: {}", net.shunts().len());
    println!("connected: {}", r.connected);
    println!("nonzero branch admittances: {}", r.hypothesis1_ok);
    println!("positive branch conductances: {}", r.theorem2_preconditions_ok);
    println!("passive shunts: {}", r.shunt_passivity_ok);
    for m in &r.messages {
        println!("  - {m}");
    }
    Ok(if r.connected && r.hypothesis1_ok {
        0
    } else {
        EXIT_PRECONDITION
    })
}

fn cmd_ybus(path: &Path, out: Option<&Path>, method: AssemblyArg) -> Result<u8, Failure> {
    let net = load_network(path)?;
    let method = match method {
        AssemblyArg::Stamping => AssemblyMethod::Stamping,
        AssemblyArg::TripleProduct => AssemblyMethod::TripleProduct,
    };
    let y = assemble_with(&net, method, DEFAULT_ZERO_TOL)?;
    write_text(out, &files::matrix_to_json(&y)?)?;
    Ok(0)
}

fn cmd_rank(path: &Path, method: RankMethodArg, zero_tol: f64) -> Result<u8, Failure> {
    let input = load_input(path)?;
    let (direct, vg_net) = match &input {
        Input::Network(net) => (verify_rank_with(net, zero_tol)?, net.clone()),
        Input::Matrix(y) => (verify_rank_of_matrix(y, zero_tol)?, y.implied_network(zero_tol)?),
    };
    let mut agrees = true;
    if matches!(method, RankMethodArg::Direct | RankMethodArg::Both) {
        println!("{direct}");
        agrees &= direct.agrees;
    }
    if matches!(method, RankMethodArg::VirtualGround | RankMethodArg::Both) {
        match verify_rank_via_augmentation_with(&vg_net, zero_tol) {
            Ok(v) => {
                println!("{v}");
                agrees &= v.agrees;
            }
            Err(Error::Precondition(_)) if matches!(method, RankMethodArg::Both) => {
                println!("virtual-ground: not applicable (no shunts)");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(if agrees { 0 } else { EXIT_NUMERICAL })
}

fn recovery_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.recovery.json"))
}

fn cmd_kron(
    path: &Path,
    eliminate: Option<&str>,
    retain: Option<&str>,
    out: &Path,
    recovery_out: Option<&Path>,
) -> Result<u8, Failure> {
    let y = load_matrix(path)?;
    let elim = match (eliminate, retain) {
        (Some(e), _) => parse_ids(e)?,
        (None, Some(r)) => {
            let keep = parse_ids(r)?;
            if let Some(bad) = keep.iter().find(|k| y.position_of(**k).is_none()) {
                return fail(EXIT_IO, format!("node {bad} is not in the matrix"));
            }
            y.node_order().iter().copied().filter(|n| !keep.contains(n)).collect()
        }
        (None, None) => return fail(EXIT_IO, "either --eliminate or --retain is required"),
    };
    let r = kron_eliminate(&y, &elim)?;
    write_text(Some(out), &files::matrix_to_json(&r.reduced)?)?;
    let side = recovery_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| recovery_path(out));
    write_text(Some(&side), &files::to_json(&RecoveryFile::from_reduction(&r))?)?;
    Ok(0)
}

fn cmd_hybrid(path: &Path, labels: Option<&str>, classes: &[String], p: usize, out: &Path) -> Result<u8, Failure> {
    let y = load_matrix(path)?;
    let part = match labels {
        Some(l) => {
            let labels: Vec<usize> = parse_ids(l)?.into_iter().map(|n| n.0).collect();
            if labels.len() != y.dim() {
                return fail(EXIT_IO, format!("{} labels for {} nodes", labels.len(), y.dim()));
            }
            let by_position = Partition::from_labels(&labels)?;
            // Labels are per matrix position; map positions to node ids.
            Partition::new(
                by_position
                    .classes()
                    .iter()
                    .map(|c| c.iter().map(|k| y.node_order()[k.0]).collect())
                    .collect(),
            )?
        }
        None => Partition::new(classes.iter().map(|c| parse_ids(c)).collect::<Result<_, _>>()?)?,
    };
    let view = BlockView::new(&y, &part)?;
    let h = hybrid_parameters(&view, p)?;
    write_text(Some(out), &files::to_json(&HybridFile::from_hybrid(&h))?)?;
    Ok(0)
}

fn cmd_verify(suite: &str, samples: usize, seed: u64) -> Result<u8, Failure> {
    let suites = Suite::parse_list(suite)?;
    let mut ok = true;
    for s in suites {
        let r = run_suite(s, samples, seed);
        println!("{r}");
        for f in r.failures.iter().take(10) {
            println!("  {f}");
        }
        ok &= r.passed();
    }
    Ok(if ok { 0 } else { EXIT_NUMERICAL })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { path, zero_tol } => cmd_validate(&path, zero_tol),
        Command::Ybus { path, out, method } => cmd_ybus(&path, out.as_deref(), method),
        Command::Rank { path, method, zero_tol } => cmd_rank(&path, method, zero_tol),
        Command::Kron {
            path,
            eliminate,
            retain,
            out,
            recovery_out,
        } => cmd_kron(
            &path,
            eliminate.as_deref(),
            retain.as_deref(),
            &out,
            recovery_out.as_deref(),
        ),
        Command::Hybrid {
            path,
            partition,
            class,
            solve_class,
            out,
        } => cmd_hybrid(&path, partition.as_deref(), &class, solve_class, &out),
        Command::Verify { suite, samples, seed } => cmd_verify(&suite, samples, seed),
        Command::Randgen {
            nodes_min,
            nodes_max,
            density,
            shunt_prob,
            require_shunt,
            mag_min,
            mag_max,
            phase,
            seed,
            out,
        } => {
            let spec = GenSpec {
                nodes: (nodes_min, nodes_max),
                edge_density: density,
                shunt_probability: shunt_prob,
                require_shunt,
                magnitude: (mag_min, mag_max),
                phase: match phase {
                    PhaseArg::RePositive => PhasePolicy::RePositive,
                    PhaseArg::Arbitrary => PhasePolicy::Arbitrary,
                    PhaseArg::PureImaginary => PhasePolicy::PureImaginary,
                },
                seed,
            };
            let net = generate(&spec)?;
            write_text(out.as_deref(), &files::network_to_json(&net)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

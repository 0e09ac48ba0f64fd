//! Command-line front end: convergence certificates, majorizing sequences,
//! the transport-theory Riccati solver, table benchmarks, and convergence
//! order estimation.
//!
//! Exit codes: 0 success, 1 usage error, 2 certificate criterion failed,
//! 3 non-convergence.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tsnewton::majorant::{
    certify, majorizing_sequence, AverageLipschitzModel, ConvergenceCertificate,
};
use tsnewton::riccati::{
    build_data, solve_with_data, RiccatiError, RiccatiSolveOptions, TransportParameters,
};
use tsnewton::solver::estimate_order;

const EXIT_USAGE: u8 = 1;
const EXIT_CRITERION: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;

/// The six benchmark parameter pairs as exact rationals, so decimal flags
/// cannot introduce 1/3-rounding discrepancies.
const BENCH_PAIRS: [(f64, f64, f64); 6] = [
    (0.5, 1.0, 3.0),
    (0.5, 2.0, 9.0),
    (0.5, 1.0, 9.0),
    (0.25, 2.0, 5.0),
    (0.25, 1.0, 3.0),
    (0.25, 1.0, 10.0),
];

#[derive(Parser)]
#[command(
    name = "tsnewton",
    version,
    about = "Two-step Newton solvers with semilocal convergence certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Constant,
    Gamma,
    Selfconcordant,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a semilocal convergence certificate for (model, beta).
    Certify {
        #[arg(long, value_enum)]
        model: ModelKind,
        /// Lipschitz constant for the constant model.
        #[arg(long = "L")]
        l: Option<f64>,
        /// Weight parameter for the gamma model.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Print the scalar majorizing sequence (t_k, s_k) as CSV.
    Majorize {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        beta: f64,
        /// Maximum number of recorded steps.
        #[arg(long, default_value_t = 100)]
        k: usize,
        /// Absolute tolerance on t* - t_k.
        #[arg(long, default_value_t = 1e-15)]
        tol: f64,
    },
    /// Solve the transport-theory Riccati instance for (alpha, c, n).
    SolveRiccati {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        n: usize,
        /// Use the one-step Newton update instead of the two-step one.
        #[arg(long)]
        plain_newton: bool,
        /// Write the solution matrix X as CSV to this path.
        #[arg(long)]
        dump_x: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        max_iterations: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run the six benchmark pairs per size and write table + history CSVs.
    Bench {
        /// Comma-separated problem sizes, e.g. 1024,2048,4096.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the convergence order of a decreasing error sequence.
    Order {
        /// Comma-separated positive errors, e.g. 1e-1,1e-3,1e-9.
        #[arg(long, value_delimiter = ',', required = true)]
        errors: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(command: Command) -> Result<u8, String> {
    match command {
        Command::Certify {
            model,
            l,
            gamma,
            beta,
            format,
        } => {
            let model = build_model(model, l, gamma)?;
            let cert = certify(beta, model).map_err(|e| e.to_string())?;
            match format {
                Format::Json => println!("{}", cert.to_json()),
                Format::Text => print!("{}", certificate_text(&cert)),
            }
            Ok(if cert.criterion_holds() {
                0
            } else {
                EXIT_CRITERION
            })
        }
        Command::Majorize {
            model,
            l,
            gamma,
            beta,
            k,
            tol,
        } => {
            let model = build_model(model, l, gamma)?;
            let cert = certify(beta, model).map_err(|e| e.to_string())?;
            if !cert.criterion_holds() {
                eprintln!(
                    "criterion violated: beta = {} exceeds b = {}",
                    cert.beta(),
                    cert.b()
                );
                return Ok(EXIT_CRITERION);
            }
            let trace = majorizing_sequence(&cert, k, tol).map_err(|e| e.to_string())?;
            println!("k,t,s");
            for (i, (t, s)) in trace.steps().iter().enumerate() {
                println!("{i},{t:?},{s:?}");
            }
            Ok(0)
        }
        Command::SolveRiccati {
            alpha,
            c,
            n,
            plain_newton,
            dump_x,
            max_iterations,
            format,
        } => {
            let params = TransportParameters::new(alpha, c, n).map_err(|e| e.to_string())?;
            let data = build_data(&params).map_err(|e| e.to_string())?;
            let opts = RiccatiSolveOptions {
                max_iterations,
                plain_newton,
            };
            let solution = match solve_with_data(&data, &opts) {
                Ok(solution) => solution,
                Err(RiccatiError::MaxIterations {
                    max_iterations,
                    last_res,
                    ..
                }) => {
                    eprintln!(
                        "no convergence within {max_iterations} iterations (last Res {last_res:e})"
                    );
                    return Ok(EXIT_NO_CONVERGENCE);
                }
                Err(other) => return Err(other.to_string()),
            };
            if let Some(path) = dump_x {
                write_atomic(&path, &matrix_csv(&solution.x))?;
            }
            match format {
                Format::Json => println!("{}", solution.to_json()),
                Format::Text => {
                    println!("alpha = {alpha}, c = {c}, n = {n}");
                    println!("L*beta = {:?}", params.l_beta());
                    println!("iterations = {}", solution.iterations);
                    println!("final Res = {:e}", solution.res_history.last().unwrap());
                    println!("riccati residual = {:e}", solution.riccati_residual);
                    match solution.t_star {
                        Some(t) => println!("t_star = {t:?}"),
                        None => println!("t_star = n/a (criterion fails)"),
                    }
                    println!("wall time = {:.3} s", solution.wall_time_s);
                }
            }
            Ok(0)
        }
        Command::Bench { sizes, out } => {
            if sizes.is_empty() {
                return Err("at least one size is required".to_string());
            }
            for &n in &sizes {
                if n == 0 || n % 4 != 0 {
                    return Err(format!("size {n} is not a positive multiple of 4"));
                }
            }
            fs::create_dir_all(&out)
                .map_err(|e| format!("cannot create {}: {e}", out.display()))?;
            for &n in &sizes {
                bench_size(n, &out)?;
            }
            Ok(0)
        }
        Command::Order { errors } => match estimate_order(&errors) {
            Ok(order) => {
                println!("{order:?}");
                Ok(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                Ok(EXIT_USAGE)
            }
        },
    }
}

fn build_model(
    kind: ModelKind,
    l: Option<f64>,
    gamma: Option<f64>,
) -> Result<AverageLipschitzModel, String> {
    match kind {
        ModelKind::Constant => {
            let l = l.ok_or("--L is required for the constant model")?;
            AverageLipschitzModel::constant(l).map_err(|e| e.to_string())
        }
        ModelKind::Gamma => {
            let gamma = gamma.ok_or("--gamma is required for the gamma model")?;
            AverageLipschitzModel::gamma_type(gamma).map_err(|e| e.to_string())
        }
        ModelKind::Selfconcordant => Ok(AverageLipschitzModel::self_concordant()),
    }
}

fn certificate_text(cert: &ConvergenceCertificate) -> String {
    let mut out = String::new();
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:?}"));
    let _ = writeln!(out, "model: {}", cert.model().label());
    let _ = writeln!(out, "beta: {:?}", cert.beta());
    let _ = writeln!(out, "r0: {:?}", cert.r0());
    let _ = writeln!(out, "b: {:?}", cert.b());
    let _ = writeln!(out, "R: {:?}", cert.r_max());
    let _ = writeln!(out, "t_star: {}", opt(cert.t_star()));
    let _ = writeln!(out, "t_star2: {}", opt(cert.t_star2()));
    let _ = writeln!(out, "criterion_holds: {}", cert.criterion_holds());
    let _ = writeln!(out, "cubic_holds: {}", cert.cubic_holds());
    let _ = writeln!(out, "H_star: {}", opt(cert.h_star()));
    let _ = writeln!(out, "cubic_coefficient: {}", opt(cert.cubic_coefficient()));
    let _ = writeln!(out, "q: {}", opt(cert.q()));
    out
}

fn bench_size(n: usize, out: &Path) -> Result<(), String> {
    let mut table = String::from("pair,L_beta,iter,res,cpu_time_s\n");
    for (alpha, num, den) in BENCH_PAIRS {
        let c = num / den;
        let params = TransportParameters::new(alpha, c, n).map_err(|e| e.to_string())?;
        let data = build_data(&params).map_err(|e| e.to_string())?;
        let solution = solve_with_data(&data, &RiccatiSolveOptions::default())
            .map_err(|e| format!("bench pair (alpha={alpha}, c={num}/{den}, n={n}) failed: {e}"))?;
        let final_res = solution.res_history.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            table,
            "\"({alpha}, {num:.0}/{den:.0})\",{:.6e},{},{final_res:.6e},{:.6e}",
            params.l_beta(),
            solution.iterations,
            solution.wall_time_s,
        );
        let mut history = String::from("k,res\n");
        for (k, res) in solution.res_history.iter().enumerate() {
            let _ = writeln!(history, "{},{res:.6e}", k + 1);
        }
        let history_name = format!("res_history_a{alpha}_c{num:.0}-{den:.0}_n{n}.csv");
        write_atomic(&out.join(history_name), &history)?;
        eprintln!(
            "bench n={n} (alpha={alpha}, c={num:.0}/{den:.0}): {} iterations, Res {final_res:.4e}, {:.2} s",
            solution.iterations, solution.wall_time_s
        );
    }
    write_atomic(&out.join(format!("table_n{n}.csv")), &table)
}

fn matrix_csv(x: &tsnewton::linalg::DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.rows() {
        let mut first = true;
        for value in x.row(i) {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{value:.16e}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Writes through a temporary sibling and renames, so partially written
/// files never appear under the final name.
fn write_atomic(path: &Path, contents: &str) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    {
        let mut file =
            fs::File::create(&tmp).map_err(|e| format!("cannot create {}: {e}", tmp.display()))?;
        file.write_all(contents.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    }
    fs::rename(&tmp, path).map_err(|e| format!("cannot move into {}: {e}", path.display()))
}

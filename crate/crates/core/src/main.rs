#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use greennet::bench::{run_bench, to_csv, BenchConfig};
use greennet::green::{effective_resistance, kirchhoff_index, penrose_deviations};
use greennet::io::{load_network, LoadOptions, MatrixFile, NetworkFormat};
use greennet::network::schrodinger_matrix;
use greennet::selfcheck::{run_selfcheck, SelfcheckConfig};
use greennet::tol::solve_tol_from_env;
use greennet::vertex_addition::{added_vertex_pinv, attached_network};
use greennet::{green_direct, pinv_oracle, Error, NetworkSpec, VertexAttachment};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DEVIATION: u8 = 3;

/// Green operators of Schrödinger operators on weighted networks.
#[derive(Debug, Parser)]
#[command(name = "greennet", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Override the lambda stored in the network file.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Rescale the vertex weight to unit norm.
    #[arg(long, global = true)]
    normalize: bool,
    /// Input network format: json or txt (edge list).
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "txt"])]
    format: String,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the Green kernel of a network.
    Green { network: PathBuf },
    /// Attach a new vertex and print the pseudoinverse of the new Schrödinger matrix.
    AddVertex {
        network: PathBuf,
        /// Anchors and conductances, `x1:a1,x2:a2,...`.
        #[arg(long)]
        attach: String,
        /// Weight of the new vertex before renormalization.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        /// Label of the new vertex.
        #[arg(long, default_value = "new")]
        name: String,
        /// Skip the projection onto the complement of the new weight (lambda = 0 only).
        #[arg(long)]
        raw: bool,
        /// Compare against a pseudoinverse recomputed from scratch.
        #[arg(long)]
        verify: bool,
    },
    /// Effective resistance between two vertices.
    Resistance {
        network: PathBuf,
        x: String,
        y: String,
    },
    /// Kirchhoff index (lambda = 0 only).
    Kirchhoff { network: PathBuf },
    /// Time the closed-form update against full recomputation.
    Bench {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [50, 100, 200])]
        sizes: Vec<usize>,
        #[arg(long = "m", value_delimiter = ',', default_values_t = [1, 5])]
        anchors: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Run the built-in invariant suite.
    Selfcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

enum Failure {
    Lib(Error),
    Deviation(String),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::Lib(err)
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(err)) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
        Err(Failure::Deviation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DEVIATION)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Green { network } => {
            let spec = load(common, &network)?;
            let g = green_direct(&schrodinger_matrix(&spec), spec.lambda(), spec.weight())?;
            let file = MatrixFile::new(spec.vertices().labels().to_vec(), &g.kernel)?;
            emit(common, &file.to_json())?;
        }
        Command::AddVertex {
            network,
            attach,
            weight,
            name,
            raw,
            verify,
        } => {
            let spec = load(common, &network)?;
            let att = VertexAttachment::parse(&name, weight, &attach)?;
            let g = green_direct(&schrodinger_matrix(&spec), spec.lambda(), spec.weight())?;
            let update = added_vertex_pinv(&g, &spec, &att, !raw)?;
            info!(
                "update condition number {:.3e}",
                update.coefficients.condition
            );
            let file = MatrixFile::new(update.order.labels().to_vec(), &update.kernel)?;
            emit(common, &file.to_json())?;
            if verify {
                let tol = 10.0 * solve_tol_from_env();
                let scratch = schrodinger_matrix(&attached_network(&spec, &att)?);
                let dev = update.kernel.max_abs_diff(&pinv_oracle(&scratch)?)?;
                let pen = penrose_deviations(&scratch, &update.kernel)?;
                eprintln!(
                    "verify: max deviation from recomputed pseudoinverse {dev:.3e}; Penrose residuals {:.3e} {:.3e} {:.3e} {:.3e}",
                    pen[0], pen[1], pen[2], pen[3]
                );
                if !(dev <= tol) {
                    return Err(Failure::Deviation(format!(
                        "deviation {dev:.3e} exceeds {tol:.0e}"
                    )));
                }
            }
        }
        Command::Resistance { network, x, y } => {
            let spec = load(common, &network)?;
            let g = green_direct(&schrodinger_matrix(&spec), spec.lambda(), spec.weight())?;
            let (x, y) = (spec.vertices().id(&x)?, spec.vertices().id(&y)?);
            let r = effective_resistance(&g, &x, &y)?;
            if r.generalized {
                warn!("lambda > 0: reporting the generalized effective resistance");
            }
            emit(common, &format!("{:.16e}\n", r.value))?;
        }
        Command::Kirchhoff { network } => {
            let spec = load(common, &network)?;
            let g = green_direct(&schrodinger_matrix(&spec), spec.lambda(), spec.weight())?;
            emit(common, &format!("{:.16e}\n", kirchhoff_index(&g)?))?;
        }
        Command::Bench {
            sizes,
            anchors,
            trials,
            seed,
        } => {
            let cfg = BenchConfig {
                sizes,
                anchors,
                trials,
                seed,
                lambda: common.lambda.unwrap_or(0.0),
            };
            let rows = run_bench(&cfg)?;
            emit(common, &to_csv(&rows))?;
        }
        Command::Selfcheck { seed, cases } => {
            let cfg = SelfcheckConfig {
                seed,
                cases,
                solve_tol: solve_tol_from_env(),
                ..Default::default()
            };
            let report = run_selfcheck(&cfg);
            let mut text = String::new();
            for outcome in &report.outcomes {
                text.push_str(&outcome.to_string());
                text.push('\n');
            }
            let failed = report.failures().count();
            text.push_str(&format!(
                "{} checks, {failed} failed\n",
                report.outcomes.len()
            ));
            emit(common, &text)?;
            if failed > 0 {
                let first = report.failures().next().expect("at least one failure");
                return Err(Failure::Deviation(format!(
                    "selfcheck failed; first failure in fixture {} ({}); replay random fixtures with --seed",
                    first.fixture, first.property
                )));
            }
        }
    }
    Ok(())
}

fn load(common: &Common, path: &Path) -> Result<NetworkSpec, Error> {
    let format: NetworkFormat = common.format.parse()?;
    load_network(
        path,
        &LoadOptions {
            format,
            lambda: common.lambda,
            normalize: common.normalize,
        },
    )
}

fn emit(common: &Common, text: &str) -> Result<(), Error> {
    match &common.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

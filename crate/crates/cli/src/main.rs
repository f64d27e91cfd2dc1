use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use wstokes::fem::TaylorHoodSpace;
use wstokes::harness::{run_study, StudyConfig, CASE_NAMES};
use wstokes::mesh::{build_cube_mesh, read_mesh, write_mesh};
use wstokes::stokes::discrete_infsup;
use wstokes::weights::{estimate_aq, WeightField, WeightSpec};

#[derive(Parser)]
#[command(name = "wstokes", version, about = "Taylor-Hood Stokes and non-Newtonian studies in weighted norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence studies.
    Study {
        #[command(subcommand)]
        action: StudyAction,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Weight utilities.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
    /// Discrete inf-sup constant of the Taylor-Hood pair on a mesh.
    Infsup {
        #[arg(long)]
        mesh: PathBuf,
    },
}

#[derive(Subcommand)]
enum StudyAction {
    /// Run the study described by a JSON config; prints CSV to stdout
    /// unless --out is given.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List the built-in manufactured cases.
    ListCases,
}

#[derive(Subcommand)]
enum MeshAction {
    /// Structured tetrahedral mesh of the unit cube.
    MakeCube {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum WeightsAction {
    /// Lower bound on the A_q characteristic over dyadic cubes.
    Aq {
        /// JSON weight spec, e.g. {"kind":"power_point","alpha":1,"center":[0.5,0.5,0.5]}.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 4)]
        depth: u32,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Study { action: StudyAction::ListCases } => {
            for name in CASE_NAMES {
                println!("{name}");
            }
        }
        Command::Study { action: StudyAction::Run { config, out, json } } => {
            let file = File::open(&config).with_context(|| format!("cannot open {}", config.display()))?;
            let cfg: StudyConfig = serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("invalid study config {}", config.display()))?;
            let report = match run_study(&cfg) {
                Ok(r) => r,
                Err(wstokes::Error::Study { level, source, partial }) => {
                    eprint!("{}", partial.to_csv());
                    anyhow::bail!("study failed at level {level}: {source}");
                }
                Err(e) => return Err(e.into()),
            };
            match out {
                Some(path) => report.write_csv(BufWriter::new(File::create(&path)?))?,
                None => print!("{}", report.to_csv()),
            }
            if let Some(path) = json {
                report.write_json(BufWriter::new(File::create(&path)?))?;
            }
        }
        Command::Mesh { action: MeshAction::MakeCube { n, out } } => {
            let mesh = build_cube_mesh(n)?;
            let mut w = BufWriter::new(File::create(&out)?);
            write_mesh(&mesh, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} vertices, {} tetrahedra to {}", mesh.n_vertices(), mesh.n_tets(), out.display());
        }
        Command::Weights { action: WeightsAction::Aq { spec, q, depth } } => {
            let file = File::open(&spec).with_context(|| format!("cannot open {}", spec.display()))?;
            let spec: WeightSpec = serde_json::from_reader(BufReader::new(file))?;
            let w = spec.build()?;
            let est = estimate_aq(&w, q, depth)?;
            let (center, side) = est.argmax_cube;
            println!(
                "{}",
                json!({"q": est.q, "depth": est.depth, "value": est.value, "argmax_center": center, "argmax_side": side})
            );
        }
        Command::Infsup { mesh } => {
            let file = File::open(&mesh).with_context(|| format!("cannot open {}", mesh.display()))?;
            let mesh = read_mesh(BufReader::new(file))?;
            let space = Arc::new(TaylorHoodSpace::new(Arc::new(mesh)));
            let report = discrete_infsup(&space, &WeightField::constant(), 2.0)?;
            println!(
                "{}",
                json!({
                    "beta": report.beta,
                    "method": format!("{:?}", report.method),
                    "iterations": report.iterations,
                    "converged": report.converged,
                })
            );
        }
    }
    Ok(())
}

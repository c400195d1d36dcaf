use clap::{Parser, Subcommand};
use richards_cli::run::{self, write_sweep_csv, RunError, RunOptions};
use richards_cli::{builtins, Scenario, ScenarioConfig};
use richards_core::schemes::Scheme;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "richards", version, about = "P1 finite element solver for the Richards equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// override the time step
    #[arg(long)]
    tau: Option<f64>,
    /// override the scheme (explicit | implicit)
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or builtin
    Run {
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        /// write a VTK snapshot every k steps (0 = never)
        #[arg(long)]
        vtk_every: Option<usize>,
    },
    /// Mesh-refinement sweep of a 1D scenario
    Sweep {
        scenario: String,
        /// comma-separated point counts; defaults to the scenario's [sweep] list
        #[arg(long, value_delimiter = ',')]
        meshes: Vec<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List builtin scenarios
    List,
    /// Weakly-acute and Peclet checks on the initial state
    CheckMesh { scenario: String },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).ok_or_else(|| format!("unknown scheme `{s}` (explicit | implicit)"))
}

fn load(arg: &str) -> Result<ScenarioConfig, RunError> {
    Ok(builtins::load(arg)?)
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::List => {
            for (name, desc) in builtins::list() {
                println!("{name:<24} {desc}");
            }
        }
        Command::Run { scenario, overrides, vtk_every } => {
            let cfg = load(&scenario)?;
            let s = Scenario::build(&cfg)?.with_overrides(overrides.tau, overrides.scheme)?;
            let opts = RunOptions { out_dir: overrides.out, vtk_every };
            let files = run::run_scenario(&s, &opts)?;
            println!("{}: {} steps -> {}", cfg.name, files.steps, files.csv.display());
        }
        Command::Sweep { scenario, meshes, overrides } => {
            let cfg = load(&scenario)?;
            let meshes = if meshes.is_empty() {
                cfg.sweep.as_ref().map(|s| s.meshes.clone()).unwrap_or_default()
            } else {
                meshes
            };
            let rows = run::run_sweep(&cfg, &meshes, overrides.tau, overrides.scheme)?;
            let dir = &overrides.out;
            std::fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
            let name = cfg.sweep.as_ref().and_then(|s| s.csv.clone()).unwrap_or_else(|| format!("{}_sweep.csv", cfg.name));
            let path = dir.join(name);
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows).expect("writing to memory");
            std::fs::write(&path, &buf).map_err(|source| RunError::Io { path: path.clone(), source })?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
        Command::CheckMesh { scenario } => {
            let cfg = load(&scenario)?;
            let s = Scenario::build(&cfg)?;
            let c = run::check_mesh(&s).map_err(|source| RunError::Solver { t: 0.0, source })?;
            println!("vertices            {}", c.n_vertices);
            println!("elements            {}", c.n_elements);
            println!("weakly acute        {}", c.weakly_acute);
            if !c.weakly_acute {
                println!("  violations        {} (worst dot {:e})", c.acute_violations, c.worst_dot);
            }
            println!("peclet condition    {}", c.peclet_ok);
            println!("  max Pe_T          {}", c.peclet_max);
            println!("  failing elements  {}", c.peclet_failing_elements);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

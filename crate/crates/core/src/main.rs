use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdsde::experiments::{
    load_config, run_convergence, run_table, solve_once, write_sweep, write_table, ExperimentConfig, GChoice,
};
use bdsde::model::NoiseBundle;
use bdsde::oracles::{forward_contract_oracle, midpoint_lattice, spde_error, spde_field, SpdeField};
use bdsde::solver::SolverMode;
use bdsde::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Regression Monte Carlo solver for doubly stochastic BSDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve; prints Y0, Z0 and regression diagnostics.
    Run(Common),
    /// Mean/std of the reported values over M × mode × time.
    Table(Common),
    /// Refinement sweep over j = 1..j_max.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        j_max: Option<usize>,
    },
    /// u^N and v^N on a lattice of start points sharing one backward path.
    SpdeGrid(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted fields take the reference values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; changes speed only, never results.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        if let Some(threads) = self.threads {
            if threads == 0 {
                return Err(Error::Config("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        }
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(reps) = self.reps {
            config.reps = reps;
        }
        if self.out.is_some() {
            config.out = self.out.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn output(config: &ExperimentConfig, default: &str) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(config: &ExperimentConfig) -> Result<()> {
    let solution = solve_once(config, 0)?;
    println!("mode       {}", config.mode);
    println!("g          {}", config.g_choice);
    println!("N={} M={} delta={} I={}", config.steps, config.paths, config.delta, config.picard_iterations);
    println!("Y0         {}", solution.y0()[0]);
    println!("Z0         {}", solution.z0()[0]);
    println!("exited     {:.6}", solution.paths().exit_fraction());
    println!("empty      {}", solution.total_empty_cells());
    if let Some(first) = solution.diagnostics().first() {
        println!("picard n=0 {:?}", first.picard_residuals);
    }
    if let Some(path) = &config.paths_csv {
        solution.paths().write_csv(path)?;
    }
    if let Some(path) = config.diagnostics_csv.as_ref().or(config.out.as_ref()) {
        solution.write_diagnostics_csv(path)?;
        println!("diagnostics -> {}", path.display());
    }
    Ok(())
}

fn table(config: &ExperimentConfig) -> Result<()> {
    let rows = run_table(config)?;
    let path = output(config, "table.csv");
    write_table(&rows, &path)?;
    for r in &rows {
        println!(
            "t_{:<3} {:<22} M={:<6} {:.4} ({:.4})",
            r.time_index, r.mode, r.paths, r.stats.mean, r.stats.std
        );
    }
    println!("table -> {}", path.display());
    Ok(())
}

fn converge(config: &ExperimentConfig, j_max: usize) -> Result<()> {
    let rows = run_convergence(config, j_max)?;
    let path = output(config, "convergence.csv");
    write_sweep(&rows, &path)?;
    for r in &rows {
        println!(
            "j={} N={:<3} M={:<6} delta={:<8.4} {:<22} {:.4} ({:.4})",
            r.j, r.steps, r.paths, r.delta, r.mode, r.stats.mean, r.stats.std
        );
    }
    println!("sweep -> {}", path.display());
    Ok(())
}

fn spde_grid(config: &ExperimentConfig) -> Result<()> {
    let grid = config.grid()?;
    let w = NoiseBundle::sample_backward(config.backward_seed.unwrap_or(config.seed), &grid, 1);
    let times: Vec<usize> = config
        .spde_time_indices
        .clone()
        .unwrap_or_else(|| (0..=grid.steps()).collect());
    let (points, weights) = midpoint_lattice(config.spde_lower, config.spde_upper, config.spde_points)?;
    let field = spde_field(
        &config.coefficients(),
        &grid,
        &config.domain()?,
        &w,
        &times,
        &points,
        config.spde_paths,
        &config.basis(),
        &config.solver(),
        config.seed,
    )?;
    let path = output(config, "spde_field.csv");
    field.write_csv(&path)?;
    println!("{} times × {} points -> {}", field.times.len(), points.len(), path.display());
    if config.mode == SolverMode::Bsde || config.g_choice == GChoice::None {
        let m = config.market();
        let oracle = forward_contract_oracle(m.strike, m.r, m.horizon, move |x| m.sigma * x);
        let exact = SpdeField::from_maps(field.times.clone(), points, 1, 1, &*oracle.u, &*oracle.z);
        let err = spde_error(std::slice::from_ref(&field), &exact, &weights, &vec![1.0; weights.len()])?;
        println!("error vs forward-contract solution: {err}");
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(c) => run(&c.load()?),
        Command::Table(c) => table(&c.load()?),
        Command::Converge { common, j_max } => {
            let config = common.load()?;
            converge(&config, j_max.unwrap_or(config.j_max))
        }
        Command::SpdeGrid(c) => spde_grid(&c.load()?),
    }
}

fn report(err: &Error, config: Option<&Path>) {
    match config {
        Some(p) => eprintln!("error ({}): {err}", p.display()),
        None => eprintln!("error: {err}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let config = match &cli.command {
                Command::Run(c) | Command::Table(c) | Command::SpdeGrid(c) => c.config.as_deref(),
                Command::Converge { common, .. } => common.config.as_deref(),
            };
            report(&err, config);
            if err.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

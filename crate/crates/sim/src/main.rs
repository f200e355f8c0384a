use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use perigee_core::latency::RegionMatrix;
use perigee_sim::error::{Result, SimError};
use perigee_sim::stretch::{format_stretch_csv, run_stretch, StretchConfig, StretchTopology};
use perigee_sim::{compare, files, harness, scenario};

#[derive(Parser)]
#[command(name = "perigee", version, about = "Block propagation simulator with adaptive neighbor selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, seed) pair of a scenario file.
    Simulate {
        scenario: PathBuf,
        /// Output root; artifacts go to `<out>/<scenario name>/`.
        #[arg(long, env = "PERIGEE_OUT", default_value = "perigee-out")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Run a single seed instead of the scenario's list.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Also dump per-round block traces and neighbor scores.
        #[arg(long)]
        verbose: bool,
    },
    /// Tabulate rank-wise mean λ90 of artifact directories.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
    /// Stretch of geometric and random graphs on the unit hypercube.
    Stretch {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Topologies to measure (repeatable; default both).
        #[arg(long, value_enum)]
        topology: Vec<TopologyArg>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        /// Far-pair samples per topology and seed.
        #[arg(long, default_value_t = 500)]
        pairs: usize,
        /// Write `stretch.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a generated node-profile file (the bundled sample is n=1000, seed 2019).
    Profiles {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = files::BUNDLED_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Random,
    Geometric,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario: path,
            out,
            jobs,
            seed_override,
            verbose,
        } => {
            let mut sc = scenario::load_scenario(&path)?;
            if let Some(s) = seed_override {
                sc = sc.with_seeds(vec![s]);
            }
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(SimError::config("--jobs must be positive"));
                }
                pool = pool.num_threads(j);
            }
            let pool = pool
                .build()
                .map_err(|e| SimError::Runtime(e.to_string()))?;
            let dir = pool.install(|| harness::simulate(&sc, &out, verbose))?;
            println!("{}", dir.display());
            let rows = compare::compare_dirs(&[dir.as_path()])?;
            print!("{}", compare::format_table(&rows));
        }
        Command::Compare { dirs } => {
            let refs: Vec<&std::path::Path> = dirs.iter().map(PathBuf::as_path).collect();
            print!("{}", compare::format_table(&compare::compare_dirs(&refs)?));
        }
        Command::Stretch {
            n,
            dim,
            topology,
            seeds,
            pairs,
            out,
        } => {
            let kinds: Vec<StretchTopology> = if topology.is_empty() {
                vec![StretchTopology::Geometric, StretchTopology::Random]
            } else {
                topology
                    .iter()
                    .map(|t| match t {
                        TopologyArg::Random => StretchTopology::Random,
                        TopologyArg::Geometric => StretchTopology::Geometric,
                    })
                    .collect()
            };
            if n < 2 {
                return Err(SimError::config("--n must be at least 2"));
            }
            let cfg = StretchConfig {
                n,
                dim,
                pairs,
                ..StretchConfig::default()
            };
            let rows = run_stretch(&cfg, &kinds, &seeds)?;
            for r in &rows {
                if r.summary.disconnected > 0 {
                    log::warn!(
                        "{} seed {}: {} sampled pairs disconnected",
                        r.topology.name(),
                        r.seed,
                        r.summary.disconnected
                    );
                }
            }
            let text = format_stretch_csv(&rows);
            match out {
                Some(p) => {
                    std::fs::create_dir_all(&p).map_err(|e| SimError::io(&p, e))?;
                    files::write_file(&p.join("stretch.csv"), &text)?;
                }
                None => print!("{text}"),
            }
        }
        Command::Profiles { n, seed } => {
            let m = RegionMatrix::default_seven();
            print!("{}", files::format_profiles(&files::generate_profiles(n, seed), &m));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { perigee_sim::error::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

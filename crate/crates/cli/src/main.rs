use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heatgraph::heat::HeatParams;

mod fmt;
mod spec;
mod suite;

use spec::{CliError, CliResult, GraphConfig, GraphSource};
use suite::{CheckKind, SuiteConfig};

#[derive(Parser)]
#[command(name = "heatgraph", version, about = "Heat flow and functional inequalities on metric graphs")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HEATGRAPH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Copy, Clone, ValueEnum)]
enum GenType {
    Star,
    Lattice,
    Tree,
}

#[derive(Args)]
struct GraphArg {
    /// Graph JSON as written by `gen`.
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct Steps {
    #[arg(long, default_value_t = 0.02)]
    h: f64,
    #[arg(long, default_value_t = 2e-4)]
    dt: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph and print it as JSON.
    Gen {
        #[arg(long = "type", value_enum)]
        kind: GenType,
        #[arg(long, default_value_t = 3)]
        rays: usize,
        #[arg(long, default_value_t = 1.0)]
        len: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        side: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Random piecewise-constant conductances in [1/Λ, Λ].
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Path (or intrinsic, with --weighted) distance between two points.
    Dist {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        weighted: bool,
    },
    /// Exact ball coverage and volume.
    Ball {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
    },
    /// Volume doubling scan; prints CSV.
    Doubling {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long, value_delimiter = ',')]
        centers: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Neumann gap of a ball and the Poincaré comparison.
    Poincare {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, default_value_t = 20)]
        tests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sobolev displays on random test functions.
    Sobolev {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Support center on truncated graphs.
        #[arg(long)]
        center: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Nash ratio on random compactly supported functions.
    Nash {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Heat kernel columns; prints CSV (t, edge_id, offset, value).
    Kernel {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        source: String,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[command(flatten)]
        steps: Steps,
    },
    /// Parabolic Harnack ratios; prints the report as JSON.
    HarnackParabolic {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        center: String,
        #[arg(long)]
        r: f64,
        /// `kernel:<point>`, `bump:<point>:<radius>` or `const:<value>`.
        #[arg(long = "seed", required = true)]
        seeds: Vec<String>,
        #[command(flatten)]
        steps: Steps,
    },
    /// Elliptic Harnack ratios for per-edge boundary samples.
    HarnackElliptic {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        center: String,
        #[arg(long)]
        r: f64,
        /// Comma-separated values by edge index; repeat for more samples.
        #[arg(long = "sample", value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Append, required = true)]
        samples: Vec<f64>,
        #[arg(long, default_value_t = 0.02)]
        h: f64,
    },
    /// Two-sided Gaussian bound fit; prints the CSV table.
    GaussianFit {
        #[command(flatten)]
        g: GraphArg,
        #[arg(long)]
        x: String,
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[command(flatten)]
        steps: Steps,
    },
    /// Run a TOML suite and write its reports.
    Suite {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(g: &GraphArg) -> CliResult<GraphConfig> {
    Ok(GraphConfig {
        source: GraphSource::File { path: g.graph.clone() },
        weights: None,
        compact: false,
    })
}

fn heat(h: f64, dt: f64, theta: f64) -> CliResult<HeatParams> {
    if !(h > 0.0 && dt > 0.0) {
        return Err(CliError::Config("h and dt must be positive".into()));
    }
    Ok(HeatParams {
        theta,
        ..HeatParams::new(h, dt)
    })
}

fn run_kind(g: &GraphArg, kind: CheckKind, p: HeatParams, seed: u64) -> CliResult<suite::CheckOutput> {
    let graph = load(g)?.build()?;
    let p = HeatParams {
        weighted: graph.is_weighted(),
        ..p
    };
    suite::execute(&graph, &kind, &p, seed)
}

fn print_rows(out: &suite::CheckOutput) {
    for row in &out.rows {
        println!("{}", fmt::json(row));
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    let default = HeatParams::default();
    match cli.cmd {
        Cmd::Gen {
            kind,
            rays,
            len,
            dim,
            side,
            branching,
            depth,
            lambda,
            seed,
        } => {
            let source = match kind {
                GenType::Star => GraphSource::Star { rays, len },
                GenType::Lattice => GraphSource::Lattice {
                    dim,
                    side,
                    lo: None,
                    hi: None,
                    seed,
                },
                GenType::Tree => GraphSource::Tree { branching, depth, len },
            };
            let weights = lambda.map(|lambda| spec::WeightSpec { lambda, pieces: 3, seed });
            let g = GraphConfig {
                source,
                weights,
                compact: false,
            }
            .build()?;
            println!("{}", g.to_json()?);
        }
        Cmd::Dist { g, from, to, weighted } => {
            let out = run_kind(&g, CheckKind::Distance { from, to, weighted }, default, 0)?;
            println!("{}", out.summary);
        }
        Cmd::Ball { g, center, radius } => print_rows(&run_kind(&g, CheckKind::Ball { center, radius }, default, 0)?),
        Cmd::Doubling { g, centers, radii } => {
            let out = run_kind(&g, CheckKind::Doubling { centers, radii }, default, 0)?;
            print!("{}", out.csv.unwrap_or_default());
        }
        Cmd::Poincare {
            g,
            center,
            radius,
            h,
            tests,
            seed,
        } => {
            let out = run_kind(&g, CheckKind::Poincare { center, radius, tests }, heat(h, default.dt, 0.5)?, seed)?;
            println!("{}", fmt::json(&out.rows[0]));
        }
        Cmd::Sobolev {
            g,
            p,
            q,
            samples,
            center,
            radius,
            h,
            seed,
        } => {
            let kind = CheckKind::Sobolev {
                p,
                q,
                samples,
                center,
                radius,
            };
            let out = run_kind(&g, kind, heat(h, default.dt, 0.5)?, seed)?;
            print_rows(&out);
            return Ok(if out.pass { 0 } else { 1 });
        }
        Cmd::Nash {
            g,
            center,
            radius,
            samples,
            h,
            seed,
        } => {
            let out = run_kind(&g, CheckKind::Nash { center, radius, samples }, heat(h, default.dt, 0.5)?, seed)?;
            print_rows(&out);
            return Ok(if out.pass { 0 } else { 1 });
        }
        Cmd::Kernel { g, source, t, steps } => {
            let out = run_kind(&g, CheckKind::Kernel { source, times: t }, heat(steps.h, steps.dt, steps.theta)?, 0)?;
            print!("{}", out.csv.unwrap_or_default());
        }
        Cmd::HarnackParabolic {
            g,
            center,
            r,
            seeds,
            steps,
        } => {
            let kind = CheckKind::HarnackParabolic { center, r, seeds };
            print_rows(&run_kind(&g, kind, heat(steps.h, steps.dt, steps.theta)?, 0)?);
        }
        Cmd::HarnackElliptic {
            g,
            center,
            r,
            samples,
            h,
        } => {
            let graph = load(&g)?.build()?;
            let m = graph.edge_count();
            if samples.len() % m != 0 {
                return Err(CliError::Config(format!("each sample needs {m} values (one per edge)")));
            }
            let samples = samples.chunks(m).map(|c| c.to_vec()).collect();
            let kind = CheckKind::HarnackElliptic { center, r, samples };
            print_rows(&suite::execute(&graph, &kind, &heat(h, default.dt, 0.5)?, 0)?);
        }
        Cmd::GaussianFit { g, x, y, t, steps } => {
            let pairs = y.into_iter().map(|y| [x.clone(), y]).collect();
            let out = run_kind(&g, CheckKind::GaussianFit { pairs, times: t }, heat(steps.h, steps.dt, steps.theta)?, 0)?;
            eprintln!("{}", out.summary);
            print!("{}", out.csv.unwrap_or_default());
        }
        Cmd::Suite { config, out, seed } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = SuiteConfig::parse(&text)?;
            let seed = seed.unwrap_or(cfg.seed);
            let hash = suite::config_hash(&text);
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let dir = out.unwrap_or_else(|| base.join(cfg.output.clone().unwrap_or_else(|| format!("{}-report", cfg.name).into())));
            let res = suite::run_suite(&cfg, seed);
            suite::write_reports(&dir, &cfg, &hash, seed, &res)
                .map_err(|e| CliError::Solver(format!("writing reports to {}: {e}", dir.display())))?;
            print!("{}", suite::summary_table(&res));
            println!("reports in {}", dir.display());
            return Ok(res.exit_code());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}

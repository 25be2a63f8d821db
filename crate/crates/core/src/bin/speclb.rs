use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use speclb::analytic::NetworkConfig;
use speclb::fluid::{drain, write_trajectory_csv, ClassId, Exo, FluidNetwork, FluidState};
use speclb::harness::{self, plot, ExperimentSpec, TauChoice};
use speclb::sim::{Discipline, Scheme};
use speclb::{Error, Result};

#[derive(Parser)]
#[command(
    name = "speclb",
    version,
    about = "Speculative load balancing: loads, timeouts, fluid drain and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load per unit arrival rate and load reduction at one timeout.
    Load {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        tau: TauChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load-optimal timeout.
    Timeout {
        #[arg(long)]
        model_file: PathBuf,
        /// Search interval as `lo:hi`.
        #[arg(long)]
        interval: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load reduction over a timeout grid.
    Lcurve {
        #[arg(long)]
        model_file: PathBuf,
        /// Comma list, or `lo:hi:n` for a log-spaced grid.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean response times of several schemes over a load grid.
    Sweep(ExperimentArgs),
    /// Simulated SLB response time against the mean-field estimate.
    Conjecture(ExperimentArgs),
    /// Fluid trajectory and Lyapunov drain of a network.
    Fluid {
        /// Network configuration file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        /// Euler step; defaults to 1e-3 of the smallest class service mean.
        #[arg(long)]
        step: Option<f64>,
        /// Initial mass, split evenly over the exogenous classes.
        #[arg(long, default_value_t = 1.0)]
        initial_mass: f64,
        #[arg(long, default_value_t = 100)]
        record_every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Comma list of offered loads `λE[η₁]`.
    #[arg(long)]
    grid: Option<String>,
    /// Comma list such as `slb,rnd,coc-2`.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long)]
    tau: Option<TauChoice>,
    #[arg(short = 'N', long)]
    queues: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_discipline)]
    discipline: Option<Discipline>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_discipline(s: &str) -> std::result::Result<Discipline, String> {
    match s {
        "fcfs" => Ok(Discipline::Fcfs),
        "fresh-first" => Ok(Discipline::PriorityFreshFirst),
        "retry-first" => Ok(Discipline::PriorityRetryFirst),
        _ => Err(format!(
            "unknown discipline {s:?}; use fcfs, fresh-first or retry-first"
        )),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Parse(format!("bad list entry {p:?}")))
        })
        .collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return parse_list(s);
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid {s:?}")))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid {s:?}")))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid {s:?}")))?;
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::Parse(format!(
            "log grid needs 0 < lo < hi and n >= 2, got {s:?}"
        )));
    }
    Ok((0..n)
        .map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp())
        .collect())
}

fn experiment(args: &ExperimentArgs, default_schemes: &[Scheme]) -> Result<ExperimentSpec> {
    let mut spec = match (&args.spec, &args.model_file) {
        (Some(path), _) => harness::read_json5::<ExperimentSpec>(path)?,
        (None, Some(path)) => ExperimentSpec {
            name: String::new(),
            model: harness::read_model(path)?,
            schemes: default_schemes.to_vec(),
            lambda_grid: Vec::new(),
            tau: TauChoice::Auto,
            n: 50,
            n_jobs: 100_000,
            replications: 10,
            seed: 0,
            discipline: Discipline::Fcfs,
            output: None,
        },
        (None, None) => return Err(Error::InvalidConfig("need --spec or --model-file".into())),
    };
    if let Some(g) = &args.grid {
        spec.lambda_grid = parse_list(g)?;
    }
    if let Some(s) = &args.schemes {
        spec.schemes = parse_list(s)?;
    }
    if spec.schemes.is_empty() {
        spec.schemes = default_schemes.to_vec();
    }
    if let Some(t) = args.tau {
        spec.tau = t;
    }
    if let Some(n) = args.queues {
        spec.n = n;
    }
    if let Some(j) = args.jobs {
        spec.n_jobs = j;
    }
    if let Some(r) = args.reps {
        spec.replications = r;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(d) = args.discipline {
        spec.discipline = d;
    }
    if let Some(o) = &args.out {
        spec.output = Some(o.display().to_string());
    }
    spec.validate()?;
    Ok(spec)
}

/// Runs `write` against the output file, or stdout, and adds a plot script.
fn emit<F>(out: Option<&Path>, kind: Option<plot::PlotKind>, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            write(&mut f)?;
            f.flush()?;
            if let Some(kind) = kind {
                let name = path
                    .file_name()
                    .map_or("out.csv".into(), |n| n.to_string_lossy().into_owned());
                std::fs::write(path.with_extension("plot.py"), plot::script(kind, &name))?;
            }
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Load {
            model_file,
            tau,
            out,
        } => {
            let model = harness::read_model(&model_file)?;
            let tau = tau.resolve(&model)?;
            let report = harness::cmd_load(&model, tau)?;
            emit(out.as_deref(), None, |w| harness::write_load(w, &report))
        }
        Command::Timeout {
            model_file,
            interval,
            out,
        } => {
            let model = harness::read_model(&model_file)?;
            let interval = match interval {
                Some(s) => {
                    let v: Vec<f64> = s
                        .split(':')
                        .map(|p| {
                            p.trim()
                                .parse()
                                .map_err(|_| Error::Parse(format!("bad interval {s:?}")))
                        })
                        .collect::<Result<_>>()?;
                    if v.len() != 2 {
                        return Err(Error::Parse(format!("interval must be lo:hi, got {s:?}")));
                    }
                    Some((v[0], v[1]))
                }
                None => None,
            };
            let sol = harness::cmd_timeout(&model, interval)?;
            if sol.diagnostics.flat {
                eprintln!("flat: every timeout gives the same load");
            }
            emit(out.as_deref(), None, |w| harness::write_timeout(w, &sol))
        }
        Command::Lcurve {
            model_file,
            grid,
            out,
        } => {
            let model = harness::read_model(&model_file)?;
            let rows = harness::cmd_lcurve(&model, &parse_grid(&grid)?)?;
            emit(out.as_deref(), Some(plot::PlotKind::LoadCurve), |w| {
                harness::write_lcurve(w, &rows)
            })
        }
        Command::Sweep(args) => {
            let spec = experiment(
                &args,
                &[
                    Scheme::Slb,
                    Scheme::Rnd,
                    Scheme::CoC(2),
                    Scheme::CoS(2),
                    Scheme::Riq(2),
                ],
            )?;
            let rows = harness::cmd_sweep(&spec)?;
            let out = spec.output.as_ref().map(PathBuf::from);
            emit(out.as_deref(), Some(plot::PlotKind::Sweep), |w| {
                harness::write_sweep(w, &rows)
            })
        }
        Command::Conjecture(args) => {
            let spec = experiment(&args, &[Scheme::Slb])?;
            let rows = harness::cmd_conjecture(&spec)?;
            let out = spec.output.as_ref().map(PathBuf::from);
            emit(out.as_deref(), Some(plot::PlotKind::Conjecture), |w| {
                harness::write_conjecture(w, &rows)
            })
        }
        Command::Fluid {
            config,
            horizon,
            step,
            initial_mass,
            record_every,
            out,
        } => {
            let cfg: NetworkConfig = harness::read_json5(&config)?;
            let net = FluidNetwork::new(&cfg)?;
            let step = step.unwrap_or(1e-3 * net.min_service_mean());
            let share = initial_mass / (2 * cfg.n) as f64;
            let masses: Vec<(ClassId, f64)> = (0..cfg.n)
                .flat_map(|i| {
                    [Exo::Completes, Exo::Uncompleted]
                        .map(|kind| (ClassId::Exo { kind, queue: i }, share))
                })
                .collect();
            let initial = FluidState::with_mass(cfg.n, &masses);
            let (report, rows) = drain(&cfg, &initial, horizon, step, record_every)?;
            eprintln!(
                "drain: G0={} G_end={} empty_time={} max_step_increase={} max_rho={}",
                report.g0,
                report.g_end,
                report.empty_time.map_or("none".into(), |t| t.to_string()),
                report.max_increase,
                report.max_rho
            );
            emit(out.as_deref(), Some(plot::PlotKind::Fluid), |w| {
                write_trajectory_csv(w, &rows)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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

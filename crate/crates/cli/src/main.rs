use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randcoef::svd::WeightKind;
use randcoef::{Error, Result};
use randcoef_cli::commands;
use randcoef_cli::config::RunConfig;
use randcoef_cli::thread_budget;

#[derive(Parser)]
#[command(
    name = "randcoef",
    version,
    about = "Random coefficient density estimation"
)]
struct Cli {
    /// Parallelism budget (falls back to RC_DENSITY_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prolate spheroidal wave functions.
    Pswf {
        #[command(subcommand)]
        action: PswfAction,
    },
    /// Singular systems of the truncated Fourier operator.
    Svd {
        #[command(subcommand)]
        action: SvdAction,
    },
    /// Estimate the joint density from a y,x1..xp CSV.
    Estimate {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Select N and T from the data.
        #[arg(long)]
        adaptive: bool,
        /// Write the selection diagnostics to this CSV.
        #[arg(long)]
        dump_selection: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo risk of the estimator on a simulation design.
    Simulate {
        #[arg(long)]
        case: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write mean, quantile and true density grids into this directory.
        #[arg(long)]
        emit_density: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Pick kappa_sigma minimizing mean data-driven MISE over a grid.
    Calibrate {
        #[arg(long)]
        case: Option<u32>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated grid of kappa_sigma values.
        #[arg(long)]
        kappas: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum PswfAction {
    /// Eigenvalues and endpoint values as CSV on stdout.
    Dump {
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 10)]
        orders: usize,
    },
}

#[derive(Subcommand)]
enum SvdAction {
    /// Singular values as CSV on stdout.
    Dump {
        #[arg(long, value_parser = ["indicator", "cosh"])]
        weight: String,
        #[arg(long = "R", alias = "r")]
        r: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = 10)]
        orders: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Override any configuration key, e.g. --set eps=0.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long = "R", alias = "r")]
    r: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    kappa_sigma: Option<f64>,
    #[arg(long)]
    n_cut: Option<usize>,
    #[arg(long)]
    t_cut: Option<f64>,
}

impl CommonArgs {
    fn flags(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("weight", self.weight.clone());
        push("r", self.r.map(|v| v.to_string()));
        push("x0", self.x0.map(|v| v.to_string()));
        push("eps", self.eps.map(|v| v.to_string()));
        push("p", self.p.map(|v| v.to_string()));
        push("q", self.q.clone());
        push("kappa_sigma", self.kappa_sigma.map(|v| v.to_string()));
        push("n_cut", self.n_cut.map(|v| v.to_string()));
        push("t_cut", self.t_cut.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::Config(format!("flag --set: expected KEY=VALUE, got `{kv}`"))
            })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn load(&self, extra: Vec<(String, String)>) -> Result<RunConfig> {
        let text = match &self.config {
            Some(path) => Some(
                std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?,
            ),
            None => None,
        };
        let mut flags = self.flags()?;
        flags.extend(extra);
        Ok(RunConfig::load(text.as_deref(), &flags)?)
    }
}

fn opt<T: ToString>(key: &str, v: Option<T>) -> Option<(String, String)> {
    v.map(|v| (key.to_string(), v.to_string()))
}

fn required(flag: &str, v: Option<PathBuf>) -> Result<PathBuf> {
    v.ok_or_else(|| Error::Config(format!("flag --{flag}: required")))
}

fn init_threads(explicit: Option<usize>) -> Result<()> {
    let env = std::env::var("RC_DENSITY_THREADS").ok();
    if let Some(n) = thread_budget(explicit, env.as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        log::info!("parallelism budget {n}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::Pswf {
            action: PswfAction::Dump { c, orders },
        } => {
            init_threads(cli.threads)?;
            commands::pswf_dump(c, orders, stdout.lock())
        }
        Command::Svd {
            action:
                SvdAction::Dump {
                    weight,
                    r,
                    c,
                    orders,
                },
        } => {
            init_threads(cli.threads)?;
            let w = match weight.as_str() {
                "cosh" => WeightKind::Cosh { r },
                _ => WeightKind::Indicator { r },
            };
            commands::svd_dump(w, c, orders, 6.0 * r, 0.05, stdout.lock())
        }
        Command::Estimate {
            data,
            out,
            adaptive,
            dump_selection,
            common,
        } => {
            let extra: Vec<_> = [opt("adaptive", adaptive.then_some(true))]
                .into_iter()
                .flatten()
                .collect();
            let cfg = common.load(extra)?;
            if common.print_config {
                print!("{}", cfg.render());
                return Ok(());
            }
            init_threads(cli.threads.or(cfg.threads))?;
            let data = required("data", data)?;
            let out = required("out", out)?;
            let s = commands::run_estimate(&cfg, &data, &out, dump_selection.as_deref())?;
            log::info!(
                "estimated on n = {} (dropped {}), eps = {}, T = {}, N in {:?}, imaginary residual {:e}",
                s.n,
                s.dropped,
                s.eps,
                s.t_cut,
                s.n_range,
                s.imag_residual
            );
            Ok(())
        }
        Command::Simulate {
            case,
            n,
            reps,
            mode,
            seed,
            out,
            emit_density,
            common,
        } => {
            let extra: Vec<_> = [
                opt("case", case),
                opt("n", n),
                opt("reps", reps),
                opt("mode", mode),
                opt("seed", seed),
            ]
            .into_iter()
            .flatten()
            .collect();
            let cfg = common.load(extra)?;
            if common.print_config {
                print!("{}", cfg.render());
                return Ok(());
            }
            init_threads(cli.threads.or(cfg.threads))?;
            let out = required("out", out)?;
            let report = commands::run_simulate(&cfg, &out, emit_density.as_deref())?;
            println!(
                "case {} {} n = {} reps = {}: mean MISE {:.6} (se {}) in {:.1}s",
                cfg.case,
                cfg.mode.name(),
                cfg.n,
                report.reps,
                report.mean,
                report.se.map_or("n/a".to_string(), |s| format!("{s:.6}")),
                report.runtime_secs
            );
            Ok(())
        }
        Command::Calibrate {
            case,
            n,
            reps,
            seed,
            kappas,
            out,
            common,
        } => {
            let extra: Vec<_> = [
                opt("case", case.or(Some(1))),
                opt("n", n.or(Some(500))),
                opt("reps", reps.or(Some(100))),
                opt("seed", seed),
                opt("kappas", kappas),
            ]
            .into_iter()
            .flatten()
            .collect();
            let cfg = common.load(extra)?;
            if common.print_config {
                print!("{}", cfg.render());
                return Ok(());
            }
            init_threads(cli.threads.or(cfg.threads))?;
            let best = match out {
                Some(path) => {
                    let f = std::fs::File::create(&path)
                        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
                    commands::run_calibrate(&cfg, f)?
                }
                None => commands::run_calibrate(&cfg, stdout.lock())?,
            };
            eprintln!("best kappa_sigma = {best}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

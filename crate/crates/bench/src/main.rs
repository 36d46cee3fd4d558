use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ahpe_bench::{cmd_compare, cmd_run, BenchError, ExperimentSpec, Method, Report};

#[derive(Parser)]
#[command(name = "ahpe-bench", version, about = "Run and certify optimal tensor methods on built-in problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method and write <out>.csv and <out>.json.
    Run(RunArgs),
    /// Run several methods on one problem and write aligned gap columns.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportArg {
    Potential,
    Rate,
    Bisect,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AtsArg {
    Auto,
    Generic,
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in problem: logistic, logsumexp, lasso, quartic.
    #[arg(long)]
    problem: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Order of the method.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    sigma_hat: Option<f64>,
    #[arg(long)]
    sigma_l: Option<f64>,
    #[arg(long)]
    sigma_u: Option<f64>,
    /// Regularization weight.
    #[arg(long = "M")]
    reg: Option<f64>,
    #[arg(long)]
    rho_bar: Option<f64>,
    #[arg(long)]
    eps_bar: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    max_bisect: Option<usize>,
    #[arg(long, hide = true)]
    max_inner: Option<usize>,
    #[arg(long, hide = true)]
    kappa: Option<f64>,
    /// Stopping accuracy of the subproblem solver, overriding sigma_hat (fault injection).
    #[arg(long, hide = true)]
    inner_sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "auto", hide = true)]
    ats: AtsArg,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// optimal[-dN], gd, agd, basic[-dN].
    #[arg(long, default_value = "optimal")]
    method: String,
    /// Fail with exit code 3 if any per-iteration certificate is violated.
    #[arg(long)]
    check_certificates: bool,
    #[arg(long, value_enum)]
    report: Vec<ReportArg>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Methods to compare, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    /// Gap tolerance for the iterations-to-tolerance summary.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

fn spec_from(c: &Common, method: Method) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(c.problem.clone(), method);
    s.n = c.n;
    s.m = c.m;
    s.seed = c.seed;
    s.sigma_hat = c.sigma_hat;
    s.sigma_l = c.sigma_l;
    s.sigma_u = c.sigma_u;
    s.reg = c.reg;
    s.rho_bar = c.rho_bar;
    s.eps_bar = c.eps_bar;
    s.max_outer = c.max_outer;
    s.max_bisect = c.max_bisect;
    s.max_inner = c.max_inner;
    s.kappa = c.kappa;
    s.inner_sigma = c.inner_sigma;
    s.generic_ats = c.ats == AtsArg::Generic;
    s.out = c.out.clone();
    s
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(a) => {
            let method = Method::parse(&a.method, a.common.d)?;
            let mut spec = spec_from(&a.common, method);
            spec.check_certificates = a.check_certificates;
            spec.reports = a
                .report
                .iter()
                .map(|r| match r {
                    ReportArg::Potential => Report::Potential,
                    ReportArg::Rate => Report::Rate,
                    ReportArg::Bisect => Report::Bisect,
                })
                .collect();
            cmd_run(&spec, &mut io::stdout())?;
        }
        Command::Compare(a) => {
            let specs = a
                .method
                .iter()
                .map(|m| Method::parse(m, a.common.d).map(|m| spec_from(&a.common, m)))
                .collect::<Result<Vec<_>, _>>()?;
            let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("ahpe_compare"));
            let s = cmd_compare(&specs, a.tol, &out)?;
            for (m, k) in s.methods.iter().zip(&s.iterations_to_tol) {
                match k {
                    Some(k) => println!("{m}: {k} iterations to gap {:.1e}", s.tol),
                    None => println!("{m}: gap {:.1e} not reached", s.tol),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use permapprox::approx::{ApproxConfig, ApproxOrder, TSquaredMode};
use permapprox::error::Error;
use permapprox::exact::{permanent_ryser, MAX_RYSER_ORDER};
use permapprox::matrix::{fmt17, SquareMatrix};
use permapprox::oracle::{run_identity_suite, SuiteOptions};
use permapprox::simulation::{
    default_plan, plot_csv, records_to_csv, records_to_jsonl, run_simulation, summarize, summary_to_csv,
};
use permapprox::sinkhorn::{approximate_log_permanent, project, SinkhornConfig};
use permapprox::tables::{
    table1, table1_csv, table1_pretty, table2, table2_csv, table2_pretty, RhoSpec, TABLE1_ORDERS,
    TABLE1_RHOS, TABLE2_ORDERS,
};

const EXIT_FLAGS: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "permapprox", version, about = "Exact and determinantal permanents of scalable matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Matrix file in the text format; stdin when absent.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Orders: comma list of `N`, `A..B` or `A..B:STEP` (inclusive).
    #[arg(long = "n", global = true)]
    n_list: Option<String>,
    /// Comma list of numbers or `c/n`.
    #[arg(long, global = true)]
    rho: Option<String>,
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,
    #[arg(long, global = true, value_enum, default_value_t = T2::Modified)]
    t2: T2,
    /// Sinkhorn marginal tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    /// Sinkhorn sweep limit.
    #[arg(long, global = true, default_value_t = 10_000)]
    max_iters: usize,
    /// Largest order accepted by exact evaluation.
    #[arg(long, global = true, default_value_t = 26)]
    max_n: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sinkhorn projection of a non-negative matrix.
    Project,
    /// Exact log permanent by Ryser's formula.
    Exact,
    /// Determinantal estimate of the log permanent.
    Approx,
    /// Exponential kernel table.
    Table1,
    /// Two-block table at large order.
    Table2,
    /// Seeded replicate study.
    Simulate {
        /// Also write plot columns to this file.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Write the per-order summary here instead of stderr.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Partition-lattice identity suite.
    #[command(hide = true)]
    Oracle {
        /// Perturb m(12|34) by one; the generator identity should then fail.
        #[arg(long, hide = true)]
        mutate_m: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum T2 {
    Unit,
    Modified,
}

enum Failure {
    Flags(String),
    Compute(Error),
    Oracle(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(Error::Io(e))
    }
}

fn parse_orders(spec: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || format!("bad order `{item}` in --n");
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            let step: usize = step.parse().map_err(|_| bad())?;
            if step == 0 || b < a {
                return Err(bad());
            }
            out.extend((a..=b).step_by(step));
        } else {
            out.push(item.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err("--n lists no orders".into());
    }
    Ok(out)
}

fn parse_rhos(spec: &str) -> Result<Vec<RhoSpec>, String> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<RhoSpec>().map_err(|e| e.to_string()))
        .collect()
}

fn fixed_rhos(specs: &[RhoSpec]) -> Result<Vec<f64>, String> {
    specs
        .iter()
        .map(|s| match s {
            RhoSpec::Fixed(r) => Ok(*r),
            RhoSpec::PerOrder(_) => Err("table1 takes fixed rho values only".to_string()),
        })
        .collect()
}

fn read_matrix(cli: &Cli) -> Result<SquareMatrix, Failure> {
    let text = match &cli.input {
        Some(p) => fs::read_to_string(p)?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    Ok(SquareMatrix::parse(&text)?)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json_text(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Compute(Error::InvalidParameter(e.to_string())))
}

fn sinkhorn_cfg(cli: &Cli) -> Result<SinkhornConfig, Failure> {
    let cfg = SinkhornConfig {
        tol: cli.tol,
        max_iters: cli.max_iters,
        ..SinkhornConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Flags(e.to_string()))?;
    Ok(cfg)
}

fn approx_cfg(cli: &Cli) -> ApproxConfig {
    ApproxConfig::new(
        match cli.t2 {
            T2::Unit => TSquaredMode::Unit,
            T2::Modified => TSquaredMode::Modified,
        },
        if cli.order == 1 {
            ApproxOrder::First
        } else {
            ApproxOrder::Second
        },
    )
}

fn check_max_n(cli: &Cli, orders: &[usize]) -> Result<(), Failure> {
    if cli.max_n > MAX_RYSER_ORDER {
        return Err(Failure::Flags(format!("--max-n cannot exceed {MAX_RYSER_ORDER}")));
    }
    match orders.iter().find(|&&n| n > cli.max_n) {
        Some(n) => Err(Failure::Flags(format!("order {n} exceeds --max-n {}", cli.max_n))),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let sinkhorn = sinkhorn_cfg(cli)?;
    match &cli.command {
        Command::Project => {
            let y = read_matrix(cli)?;
            let r = project(&y, &sinkhorn)?;
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json_text(&r.to_json())?,
                Format::Csv => {
                    let mut out = String::from("kind,index,values\n");
                    for (i, row) in r.a.matrix().rows().enumerate() {
                        let vals: Vec<String> = row.iter().map(|x| fmt17(*x)).collect();
                        out += &format!("A,{i},{}\n", vals.join(" "));
                    }
                    for (i, b) in r.beta.iter().enumerate() {
                        out += &format!("beta,{i},{}\n", fmt17(*b));
                    }
                    for (i, g) in r.gamma.iter().enumerate() {
                        out += &format!("gamma,{i},{}\n", fmt17(*g));
                    }
                    out += &format!(
                        "iterations,,{}\nmarginal_error,,{}\nconverged,,{}\n",
                        r.iterations,
                        fmt17(r.final_marginal_error),
                        r.converged
                    );
                    out
                }
            };
            emit(cli, &text)
        }
        Command::Exact | Command::Approx => {
            let y = read_matrix(cli)?;
            let est = if matches!(cli.command, Command::Exact) {
                check_max_n(cli, &[y.n()])?;
                permanent_ryser(&y)?
            } else {
                approximate_log_permanent(&y, &sinkhorn, &approx_cfg(cli))?
            };
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json_text(&est.to_json(y.n()))?,
                Format::Csv => {
                    let v = est.to_json(y.n());
                    format!(
                        "method,basis,log_value,n\n{},{},{},{}\n",
                        est.method.as_str(),
                        v["basis"].as_str().unwrap_or_default(),
                        fmt17(est.log_value),
                        y.n()
                    )
                }
            };
            emit(cli, &text)
        }
        Command::Table1 => {
            let orders = match &cli.n_list {
                Some(s) => parse_orders(s).map_err(Failure::Flags)?,
                None => TABLE1_ORDERS.to_vec(),
            };
            let rhos = match &cli.rho {
                Some(s) => fixed_rhos(&parse_rhos(s).map_err(Failure::Flags)?).map_err(Failure::Flags)?,
                None => TABLE1_RHOS.to_vec(),
            };
            check_max_n(cli, &orders)?;
            let order = approx_cfg(cli).order;
            let rows = table1(&orders, &rhos, &sinkhorn, order);
            eprint!("{}", table1_pretty(&rows));
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => table1_csv(&rows),
                Format::Json => json_text(&rows)?,
            };
            emit(cli, &text)
        }
        Command::Table2 => {
            let orders = match &cli.n_list {
                Some(s) => parse_orders(s).map_err(Failure::Flags)?,
                None => TABLE2_ORDERS.to_vec(),
            };
            let specs = match &cli.rho {
                Some(s) => parse_rhos(s).map_err(Failure::Flags)?,
                None => vec![RhoSpec::Fixed(0.1), RhoSpec::Fixed(0.05), RhoSpec::PerOrder(5.0)],
            };
            let rows = table2(&orders, &specs);
            eprint!("{}", table2_pretty(&rows));
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => table2_csv(&rows),
                Format::Json => json_text(&rows)?,
            };
            emit(cli, &text)
        }
        Command::Simulate { plot, summary } => {
            let orders = match &cli.n_list {
                Some(s) => parse_orders(s).map_err(Failure::Flags)?,
                None => (10..=14).collect(),
            };
            if let Some(&n) = orders.iter().find(|&&n| n < 2) {
                return Err(Failure::Flags(format!("order {n} is below 2")));
            }
            check_max_n(cli, &orders)?;
            let reps = cli.reps.unwrap_or(200);
            let records = run_simulation(&default_plan(&orders), reps, cli.seed, &sinkhorn)?;
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => records_to_csv(&records),
                Format::Json => records_to_jsonl(&records)?,
            };
            emit(cli, &text)?;
            let summary_text = summary_to_csv(&summarize(&records));
            match summary {
                Some(p) => fs::write(p, summary_text)?,
                None => eprint!("{summary_text}"),
            }
            if let Some(p) = plot {
                fs::write(p, plot_csv(&records))?;
            }
            Ok(())
        }
        Command::Oracle { mutate_m } => {
            let checks = run_identity_suite(SuiteOptions {
                seed: cli.seed,
                mutate_m: *mutate_m,
            })?;
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json_text(&json!({
                    "passed": checks.iter().all(|c| c.passed),
                    "checks": checks,
                }))?,
                Format::Csv => {
                    let mut out = String::from("name,passed,max_error,detail\n");
                    for c in &checks {
                        out += &format!(
                            "{},{},{},\"{}\"\n",
                            c.name,
                            c.passed,
                            fmt17(c.max_error),
                            c.detail.replace('"', "'")
                        );
                    }
                    out
                }
            };
            emit(cli, &text)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Oracle(failed.join(", ")))
            }
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PERMAPPROX_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("PERMAPPROX_THREADS must be a positive integer, got `{v}`"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_FLAGS);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Flags(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FLAGS)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_domain() { EXIT_DOMAIN } else { EXIT_FLAGS })
        }
        Err(Failure::Oracle(names)) => {
            eprintln!("error: identities failed: {names}");
            ExitCode::from(EXIT_ORACLE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_lists() {
        assert_eq!(parse_orders("8,10").unwrap(), vec![8, 10]);
        assert_eq!(parse_orders("10..14").unwrap(), vec![10, 11, 12, 13, 14]);
        assert_eq!(parse_orders("8..24:2").unwrap().len(), 9);
        assert!(parse_orders("x").is_err());
        assert!(parse_orders("5..3").is_err());
        assert!(parse_orders("").is_err());
    }

    #[test]
    fn rho_lists() {
        assert_eq!(parse_rhos("0.1, 5/n").unwrap(), vec![RhoSpec::Fixed(0.1), RhoSpec::PerOrder(5.0)]);
        assert!(fixed_rhos(&parse_rhos("5/n").unwrap()).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

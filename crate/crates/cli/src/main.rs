use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use optdesign::report::{
    matrix_csv, simulation_table, to_json, FisherReport, OptimizeReport, RoundReport, UniformReport,
};
use optdesign::sim::rmse_experiment;
use optdesign::workflow::{information, optimal_weights, round, uniform_allocation, Criterion};
use optdesign::{Error, Matrix, Scenario};

#[derive(Parser)]
#[command(name = "optdesign", version, about = "Constrained D-optimal sampling allocations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Fisher information matrix of an allocation and its determinant.
    Fisher(Common),
    /// Find the (constrained) D-optimal approximate allocation.
    Optimize(Common),
    /// Round an approximate allocation to an exact one.
    Round(Common),
    /// The most even feasible exact allocation.
    Uniform(Common),
    /// Compare sampling strategies by simulated estimation RMSE.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Respect the configured bounds and constraints.
    #[arg(long)]
    constrained: bool,
    /// Use expected information weights under the configured prior.
    #[arg(long)]
    ew: bool,
    /// Also round the optimum to an exact allocation of n units.
    #[arg(long)]
    exact: bool,
    /// Override the solver seed, or the simulation seed for `simulate`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of simulation replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Comma-separated weights or counts; overrides the configured allocation.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    allocation: Option<Vec<f64>>,
    /// Write the output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

fn criterion(args: &Common) -> Criterion {
    if args.ew {
        Criterion::ExpectedWeights
    } else {
        Criterion::Local
    }
}

fn pointwise_csv(header: &[&str], labels: &[String], cols: &[Vec<String>]) -> String {
    let mut out = header.join(",") + "\n";
    for (i, l) in labels.iter().enumerate() {
        let mut row = vec![l.clone()];
        row.extend(cols.iter().map(|c| c[i].clone()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn full<T: std::fmt::Debug>(v: &[T]) -> Vec<String> {
    v.iter().map(|x| format!("{x:?}")).collect()
}

fn allocation_of(args: &Common, scenario: &Scenario) -> Vec<f64> {
    args.allocation
        .clone()
        .or_else(|| scenario.allocation.clone())
        .unwrap_or_else(|| vec![1.0 / scenario.m() as f64; scenario.m()])
}

fn run(cli: Cli) -> optdesign::Result<String> {
    let (args, which) = match &cli.command {
        Command::Fisher(a) => (a, "fisher"),
        Command::Optimize(a) => (a, "optimize"),
        Command::Round(a) => (a, "round"),
        Command::Uniform(a) => (a, "uniform"),
        Command::Simulate(a) => (a, "simulate"),
    };
    let mut scenario = Scenario::load(&args.config)?;
    if let (Some(seed), false) = (args.seed, which == "simulate") {
        scenario.solver.seed = seed;
    }
    let labels = scenario.labels();
    let format = args.format.unwrap_or(Format::Table);
    Ok(match cli.command {
        Command::Fisher(ref a) => {
            let c = allocation_of(a, &scenario);
            if c.len() != scenario.m() {
                return Err(Error::Dimension(format!(
                    "allocation has {} entries for {} design points",
                    c.len(),
                    scenario.m()
                )));
            }
            let info = information(&scenario, criterion(a))?;
            let rep = FisherReport::new(&info, labels, &c)?;
            match format {
                Format::Table => rep.to_table(),
                Format::Json => to_json(&rep),
                Format::Csv => {
                    let p = rep.matrix.len();
                    let m = Matrix::new(p, p, rep.matrix.concat())?;
                    matrix_csv(&m)
                }
            }
        }
        Command::Optimize(ref a) => {
            let result = optimal_weights(&scenario, criterion(a), a.constrained)?;
            let exact = if a.exact { Some(round(&scenario, &result.w, a.constrained)?) } else { None };
            let rep = OptimizeReport {
                criterion: if a.ew { "ew-D" } else { "D" }.into(),
                constrained: a.constrained,
                labels,
                allocation: exact.as_ref().map(|(e, _)| e.counts().to_vec()),
                det_maximum: exact.map(|(_, d)| d),
                result,
            };
            match format {
                Format::Table => rep.to_table(),
                Format::Json => to_json(&rep),
                Format::Csv => {
                    let r = &rep.result;
                    let mut cols = vec![full(&r.w), full(&r.w0), full(&r.deriv)];
                    let mut header = vec!["point", "w", "w0", "deriv"];
                    if let Some(al) = &rep.allocation {
                        cols.push(full(al));
                        header.push("allocation");
                    }
                    pointwise_csv(&header, &rep.labels, &cols)
                }
            }
        }
        Command::Round(ref a) => {
            let w = allocation_of(a, &scenario);
            let (e, det) = round(&scenario, &w, a.constrained)?;
            let rep = RoundReport { labels, w, allocation: e.counts().to_vec(), det };
            match format {
                Format::Table => rep.to_table(),
                Format::Json => to_json(&rep),
                Format::Csv => pointwise_csv(
                    &["point", "w", "allocation"],
                    &rep.labels,
                    &[full(&rep.w), full(&rep.allocation)],
                ),
            }
        }
        Command::Uniform(_) => {
            let (e, det_unif) = uniform_allocation(&scenario)?;
            let rep = UniformReport { labels, allocation: e.counts().to_vec(), det_unif };
            match format {
                Format::Table => rep.to_table(),
                Format::Json => to_json(&rep),
                Format::Csv => pointwise_csv(&["point", "allocation"], &rep.labels, &[full(&rep.allocation)]),
            }
        }
        Command::Simulate(ref a) => {
            let sim = scenario
                .simulation
                .clone()
                .ok_or_else(|| Error::Config("simulate needs a simulation section".into()))?;
            let reps = a.replications.unwrap_or(sim.replications);
            let rep = rmse_experiment(&scenario, reps, a.seed.unwrap_or(sim.seed))?;
            match format {
                Format::Table => simulation_table(&rep),
                Format::Json => to_json(&rep),
                Format::Csv => rep.to_csv(),
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("OPTDESIGN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = match &cli.command {
        Command::Fisher(a)
        | Command::Optimize(a)
        | Command::Round(a)
        | Command::Uniform(a)
        | Command::Simulate(a) => a.out.clone(),
    };
    match run(cli) {
        Ok(text) => {
            if let Some(path) = out {
                if let Err(e) = std::fs::write(&path, text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}

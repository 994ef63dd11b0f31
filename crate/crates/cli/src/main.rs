//! Command-line front end: verification suites, the path runner, and the
//! benchmark experiments, all writing deterministic CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use hadamard_sparse_cli::csvout::{Cell, CsvTable};
use hadamard_sparse_cli::{config, gd_failure, highdim, mlp_demo, pathrun, synth, verify};

#[derive(Parser)]
#[command(
    name = "hadamard-sparse",
    about = "Smooth (S)GD optimization of lq / lpq sparse-regularized problems via Hadamard parametrizations",
    version
)]
struct Cli {
    /// Experiment configuration file (required by `path`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    /// Global seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel experiment cells (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SvfCheckArgs {
    /// Comma-separated kinds, or `all`.
    #[arg(long, default_value = "all")]
    kinds: String,
    /// Factorization depth for the depth-parametrized kinds.
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    /// Within-group depth for the mixed kinds (defaults to k - 1).
    #[arg(long)]
    k1: Option<f64>,
    /// Coefficient dimension (desk scale, at most 8).
    #[arg(long, default_value_t = 4)]
    dims: usize,
    /// Random draws of beta per kind.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Fiber-minimizer restarts per draw.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the closed-form induced regularizers against the numeric
    /// fiber minimizer; prints a per-kind table.
    SvfCheck(SvfCheckArgs),
    /// Run a regularization path from a config file; writes path.csv.
    Path,
    /// Reproduce the direct-(sub)GD failure benchmark; writes gd_failure.csv.
    GdFailure {
        /// Lambda grid size per problem.
        #[arg(long, default_value_t = 12)]
        num_lambdas: usize,
    },
    /// Depth comparison on synthetic sparse regression; writes highdim.csv.
    Highdim {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 400)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        s: usize,
        /// Comma-separated correlation settings.
        #[arg(long, default_value = "0.0,0.5")]
        rhos: String,
        /// Comma-separated factorization depths.
        #[arg(long, default_value = "2,3,4,6")]
        depths: String,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long, default_value_t = 12)]
        num_lambdas: usize,
        #[arg(long, default_value_t = 2000)]
        epochs: usize,
    },
    /// Network sparsification sweep; writes mlp_demo.csv.
    MlpDemo {
        #[arg(long, default_value_t = 16)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 800)]
        epochs: usize,
    },
    /// Finite-difference check of all analytic gradients; prints a table.
    Gradcheck {
        /// Comma-separated kinds, or `all`.
        #[arg(long, default_value = "all")]
        kinds: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

/// Exit with 2 when the failure is numerical (a failed certificate, gradient
/// check, or a diverged run), 1 for validation problems.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(lib) = cause.downcast_ref::<hadamard_sparse::Error>() {
            if matches!(lib, hadamard_sparse::Error::NonFiniteLoss { .. }) {
                return 2;
            }
        }
    }
    1
}

#[derive(Debug)]
struct NumericalFailure(String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage text on stderr, validation exit code
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<NumericalFailure>().is_some() {
                2
            } else {
                classify(&err)
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SvfCheck(args) => {
            let kinds = verify::parse_kinds(&args.kinds)?;
            if args.dims == 0 || args.dims > 8 {
                return Err(anyhow!("--dims must be between 1 and 8"));
            }
            let report = verify::svf_check(
                &kinds,
                args.dims,
                args.k,
                args.k1,
                args.trials,
                args.restarts,
                cli.seed.unwrap_or(0),
            )?;
            print!("{}", report.render());
            if !report.all_pass() {
                return Err(NumericalFailure("certificate exceeded tolerance".into()).into());
            }
            Ok(())
        }
        Command::Gradcheck { kinds, trials } => {
            let kinds = verify::parse_kinds(kinds)?;
            let report = verify::gradcheck(&kinds, *trials, cli.seed.unwrap_or(0))?;
            print!("{}", report.render());
            if !report.all_pass() {
                return Err(NumericalFailure("gradient check exceeded tolerance".into()).into());
            }
            Ok(())
        }
        Command::Path => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| anyhow!("`path` requires --config <file>"))?;
            let mut cfg = config::load(path)?;
            if let Some(seed) = cli.seed {
                cfg.data.seed = seed;
                cfg.optim.seed = seed;
            }
            run_path_command(&cfg, &cli.out)
        }
        Command::GdFailure { num_lambdas } => {
            let records =
                gd_failure::experiment_gd_failure(cli.seed.unwrap_or(0), *num_lambdas)?;
            let table = gd_failure::to_table(&records);
            let file = cli.out.join("gd_failure.csv");
            table.write_to(&file)?;
            println!("wrote {} rows to {}", records.len(), file.display());
            Ok(())
        }
        Command::Highdim {
            n,
            d,
            s,
            rhos,
            depths,
            repetitions,
            num_lambdas,
            epochs,
        } => {
            let cfg = highdim::HighdimConfig {
                n: *n,
                d: *d,
                s: *s,
                rhos: parse_list(rhos, "rhos")?,
                depths: parse_list(depths, "depths")?,
                repetitions: *repetitions,
                num_lambdas: *num_lambdas,
                epochs: *epochs,
                seed: cli.seed.unwrap_or(0),
                ..highdim::HighdimConfig::default()
            };
            let cells = highdim::experiment_highdim(&cfg)?;
            let file = cli.out.join("highdim.csv");
            highdim::to_table(&cells).write_to(&file)?;
            for (label, rho, med) in highdim::summarize(&cells) {
                println!("median est_err  {label:<10} rho={rho}: {med:.4}");
            }
            println!("wrote {} rows to {}", cells.len(), file.display());
            Ok(())
        }
        Command::MlpDemo { width, k, epochs } => {
            let cfg = mlp_demo::MlpDemoConfig {
                width: *width,
                k: *k,
                epochs: *epochs,
                seed: cli.seed.unwrap_or(0),
                ..mlp_demo::MlpDemoConfig::default()
            };
            let rows = mlp_demo::experiment_mlp_sparsity(&cfg)?;
            let file = cli.out.join("mlp_demo.csv");
            mlp_demo::to_table(&rows).write_to(&file)?;
            for row in &rows {
                println!(
                    "lambda {:>8.4}: accuracy {:.3}, sparsity {:.3}",
                    row.lambda, row.test_accuracy, row.sparsity_fraction
                );
            }
            println!("wrote {} rows to {}", rows.len(), file.display());
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(arg: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow!("bad --{what} entry '{s}': {e}"))
        })
        .collect()
}

/// Documented header of `path.csv` (wall time is intentionally excluded so
/// identical runs stay byte-identical).
const PATH_HEADER: [&str; 9] = [
    "lambda",
    "nnz",
    "l1_norm",
    "p_value",
    "q_value",
    "train_loss",
    "val_loss",
    "test_loss",
    "epochs",
];

fn run_path_command(cfg: &config::ExperimentConfig, out: &std::path::Path) -> Result<()> {
    let data = synth::gen_synthetic(&cfg.data)?;
    let spec = cfg.param.to_spec(cfg.data.d)?;
    let lambda_max = match cfg.path.lambda_max {
        Some(v) => v,
        None => pathrun::default_lambda_max(&data.train, &spec)?,
    };
    let grid = pathrun::lambda_grid(lambda_max, cfg.path.lambda_min_ratio, cfg.path.num_lambdas);
    let runner = pathrun::PathRunner {
        train: &data.train,
        val: Some(&data.val),
        test: Some(&data.test),
        spec,
        optim: cfg.optim.clone(),
        init: cfg.init.scheme,
        warm_start: cfg.path.warm_start,
        threshold: cfg.path.threshold,
    };
    let result = pathrun::run_path(&runner, &grid)?;

    let mut table = CsvTable::new(&PATH_HEADER);
    for r in &result.records {
        table.push(vec![
            Cell::from(r.lambda),
            Cell::from(r.nnz),
            Cell::from(hadamard_sparse::linalg::norm_l1(&r.beta)),
            Cell::from(r.p_value),
            Cell::from(r.q_value),
            Cell::from(r.train_loss),
            match r.val_loss {
                Some(v) => Cell::from(v),
                None => Cell::from(""),
            },
            match r.test_loss {
                Some(v) => Cell::from(v),
                None => Cell::from(""),
            },
            Cell::from(r.epochs_run),
        ]);
    }
    let file = out.join("path.csv");
    table.write_to(&file).context("writing path.csv")?;
    let failed = result.records.iter().filter(|r| r.failed).count();
    println!(
        "wrote {} records ({failed} failed) to {}",
        result.records.len(),
        file.display()
    );
    if failed == result.records.len() {
        return Err(NumericalFailure("every path segment failed".into()).into());
    }
    Ok(())
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use narx_mss::bench::{run_experiment, BenchMethod, ExperimentConfig, ExperimentReport, DEFAULT_RUNS, DEFAULT_SAMPLES};
use narx_mss::dictionary::{count_terms, search_space_size};
use narx_mss::{
    run_frols, run_meta_mss, run_meta_mss_classifier, systems, ClassifierConfig, CsvOptions, Dataset,
    DictionaryConfig, Error, FrolsStop, MetaMssConfig, RunReport, SwarmConfig, SystemId,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "metamss", version, about = "Polynomial NARX structure selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a regression model for a `u1,...,ur,y` CSV.
    Identify {
        csv: PathBuf,
        #[arg(long, default_value = "meta-mss")]
        method: BenchMethod,
        /// Number of terms FROLS selects; AIC decides when omitted.
        #[arg(long)]
        frols_terms: Option<usize>,
        #[command(flatten)]
        dict: DictArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Select a logistic model for a CSV whose last column holds 0/1 labels.
    Classify {
        csv: PathBuf,
        /// Leading fraction of the record used for training.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[command(flatten)]
        dict: DictArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Repeated seeded identification of a simulated system.
    Benchmark {
        system: SystemId,
        #[arg(default_value = "meta-mss")]
        method: BenchMethod,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[command(flatten)]
        dict: DictArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Path prefix for `<prefix>.json` and `<prefix>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Write a simulated record as CSV.
    #[command(alias = "bench-gen")]
    Generate {
        system: SystemId,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the dictionary size and search space for a configuration.
    Dictionary {
        #[command(flatten)]
        dict: DictArgs,
        /// Number of input channels.
        #[arg(long, default_value_t = 1)]
        inputs: usize,
        /// List every term.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args, Clone)]
struct DictArgs {
    /// Maximum output lag (0 drops lagged outputs).
    #[arg(long)]
    ny: Option<usize>,
    /// Input lags, one value per channel or a single value for all.
    #[arg(long, value_delimiter = ',')]
    nx: Option<Vec<usize>>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value_t = 1)]
    delay: usize,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// Significance level of the coefficient tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    g0: f64,
    #[arg(long, default_value_t = 23.0)]
    gsa_alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; above 1 evaluations run in parallel without changing results.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Clone)]
struct IoArgs {
    /// Centre and scale input columns to unit variance.
    #[arg(long)]
    standardize: bool,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

impl DictArgs {
    fn config(&self, defaults: DictionaryConfig, n_inputs: usize) -> DictionaryConfig {
        let mut cfg = defaults;
        if let Some(ny) = self.ny {
            cfg.ny = ny;
            cfg.autoregressive = ny > 0;
        }
        if let Some(d) = self.degree {
            cfg.degree = d;
        }
        let nx = self.nx.clone().unwrap_or_else(|| cfg.nx.clone());
        cfg.nx = if nx.len() == 1 { vec![nx[0]; n_inputs.max(1)] } else { nx };
        cfg.delay = self.delay;
        cfg
    }
}

impl SearchArgs {
    fn swarm(&self, defaults: SwarmConfig) -> SwarmConfig {
        SwarmConfig {
            n_agents: self.agents.unwrap_or(defaults.n_agents),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            g0: self.g0,
            gsa_alpha: self.gsa_alpha,
            seed: self.seed,
            parallel: self.jobs > 1,
            ..defaults
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::Io(_) => EXIT_USAGE,
            Error::InvalidData(_)
            | Error::InvalidLabels(_)
            | Error::DegenerateClasses
            | Error::DegenerateTarget
            | Error::EmptyModel => EXIT_DATA,
            Error::SingularModel | Error::Diverged(_) | Error::Aborted(_) => EXIT_NUMERICAL,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn setup_pool(jobs: usize) -> Result<(), Failure> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| usage(format!("thread pool: {e}")))
}

fn load(csv: &Path, standardize: bool) -> Result<Dataset, Failure> {
    if !csv.exists() {
        return Err(usage(format!("{}: no such file", csv.display())));
    }
    Ok(Dataset::from_csv_path(csv, CsvOptions { standardize })?)
}

fn finish(mut report: RunReport, io: &IoArgs) -> Result<(), Failure> {
    if !io.timing {
        report.strip_timing();
    }
    emit(&report.to_json(), io.out.as_deref())
}

fn identify(
    csv: &Path,
    method: BenchMethod,
    frols_terms: Option<usize>,
    dict: &DictArgs,
    search: &SearchArgs,
    io: &IoArgs,
) -> Result<(), Failure> {
    setup_pool(search.jobs)?;
    let data = load(csv, io.standardize)?;
    let defaults = MetaMssConfig::default();
    let config = MetaMssConfig {
        dictionary: dict.config(defaults.dictionary, data.n_inputs()),
        alpha: search.alpha,
        swarm: search.swarm(defaults.swarm),
    };
    config.validate()?;
    let report = match method {
        BenchMethod::MetaMss => run_meta_mss(&data, &config)?.1,
        BenchMethod::Frols => {
            let stop = frols_terms.map_or(FrolsStop::Aic, FrolsStop::Fixed);
            run_frols(&data, &config.dictionary, stop, search.seed)?.1
        }
    };
    finish(report, io)
}

fn classify(csv: &Path, split: f64, dict: &DictArgs, search: &SearchArgs, io: &IoArgs) -> Result<(), Failure> {
    setup_pool(search.jobs)?;
    let data = load(csv, io.standardize)?;
    let defaults = ClassifierConfig::default();
    let config = ClassifierConfig {
        dictionary: dict.config(defaults.dictionary.clone(), data.n_inputs()),
        alpha: search.alpha,
        swarm: search.swarm(defaults.swarm.clone()),
        train_fraction: split,
        ..defaults
    };
    config.validate()?;
    let report = run_meta_mss_classifier(&data, &config)?.1;
    if let Some(c) = &report.classification {
        eprintln!("model terms      {}", report.structure.len());
        eprintln!("biserial r       {:.4}", c.biserial);
        eprintln!("train accuracy   {:.4}  ({} samples)", c.train_accuracy, c.train_samples);
        eprintln!("test accuracy    {:.4}  ({} samples)", c.test_accuracy, c.test_samples);
    }
    finish(report, io)
}

#[allow(clippy::too_many_arguments)]
fn benchmark(
    system: SystemId,
    method: BenchMethod,
    runs: usize,
    samples: usize,
    dict: &DictArgs,
    search: &SearchArgs,
    out: Option<&Path>,
    timing: bool,
) -> Result<(), Failure> {
    setup_pool(search.jobs)?;
    let defaults = MetaMssConfig::default();
    let config = ExperimentConfig {
        runs,
        base_seed: search.seed,
        n_samples: samples,
        meta: MetaMssConfig {
            dictionary: dict.config(defaults.dictionary, 1),
            alpha: search.alpha,
            swarm: search.swarm(defaults.swarm),
        },
        parallel: search.jobs > 1,
        ..ExperimentConfig::new(system, method)
    };
    let mut report: ExperimentReport = run_experiment(&config)?;
    if !timing {
        report.strip_timing();
    }
    let prefix = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(format!("{system}-{method}")));
    let json = prefix.with_extension("json");
    let csv = prefix.with_extension("csv");
    fs::write(&json, format!("{}\n", report.to_json())).map_err(|e| usage(format!("{}: {e}", json.display())))?;
    let file = fs::File::create(&csv).map_err(|e| usage(format!("{}: {e}", csv.display())))?;
    report.write_csv(file)?;
    eprintln!(
        "{system} {method}: {}/{} exact ({:.0}%), wrote {} and {}",
        report.correct,
        report.runs,
        100.0 * report.correct_pct,
        json.display(),
        csv.display()
    );
    Ok(())
}

fn generate(system: SystemId, samples: usize, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let data = systems::generate(system, samples, seed)?;
    match out {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            data.write_csv(file)?;
        }
        None => data.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn dictionary(dict: &DictArgs, inputs: usize, list: bool) -> Result<(), Failure> {
    let config = dict.config(MetaMssConfig::default().dictionary, inputs);
    let n = count_terms(&config)?;
    println!("terms         {n}");
    println!("search space  {}", search_space_size(n));
    if list {
        for t in narx_mss::Dictionary::build(&config)?.terms() {
            println!("{t}");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Identify { csv, method, frols_terms, dict, search, io } => {
            identify(csv, *method, *frols_terms, dict, search, io)
        }
        Command::Classify { csv, split, dict, search, io } => classify(csv, *split, dict, search, io),
        Command::Benchmark { system, method, runs, samples, dict, search, out, timing } => {
            benchmark(*system, *method, *runs, *samples, dict, search, out.as_deref(), *timing)
        }
        Command::Generate { system, samples, seed, out } => generate(*system, *samples, *seed, out.as_deref()),
        Command::Dictionary { dict, inputs, list } => dictionary(dict, *inputs, *list),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

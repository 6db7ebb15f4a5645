//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::alignment::LabeledSpdDataset;
use crate::error::{Error, Result};
use crate::experiment::{bench_toy, gradient_check_trials, BenchRow, Column};
use crate::geometry::{dist_airm, dist_euclid, dist_logeuclid_g, karcher_mean, KarcherConfig};
use crate::learnkit::{
    dataset_read, dataset_write, evaluate_accuracy, matrix_read, matrix_write, toy_generate, whiten_with, MetricSpec,
    NoiseBasis, Reference, SpreadParam, ToyConfig,
};
use crate::optimize::{learn_metric, OptimizerConfig};
use crate::symmat::SpdMatrix;

#[derive(Debug, Parser)]
#[command(name = "spdml", version, about = "Reference-point learning for LogEuclidean distances on SPD matrices")]
struct Cli {
    /// Worker threads for parallel sections; 1 gives bit-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic train/test pair.
    Toygen(ToygenArgs),
    /// Karcher mean of a dataset.
    Mean {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recenter a dataset at the identity.
    Whiten {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Whiten with this matrix instead of the dataset's own mean.
        #[arg(long)]
        mean: Option<PathBuf>,
        /// Where to write the mean that was used.
        #[arg(long)]
        mean_out: Option<PathBuf>,
    },
    /// Learn a reference point by maximizing kernel-target alignment.
    Learn {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        epsilon: f64,
        /// `mean`, `identity` or `file:<path>`.
        #[arg(long, default_value = "mean")]
        init: String,
        #[arg(long, default_value_t = OptimizerConfig::default().max_iter)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// 1-NN accuracy on a test set.
    Eval {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricKind,
        /// `identity`, `mean` or `file:<path>`; LogEuclidean only.
        #[arg(long = "ref", default_value = "identity")]
        reference: String,
    },
    /// Pairwise distance matrix as CSV.
    Distmat {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricKind,
        #[arg(long = "ref", default_value = "identity")]
        reference: String,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic alignment gradient with finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Synthetic benchmark over several matrix sizes.
    BenchToy(BenchArgs),
}

#[derive(Debug, clap::Args)]
struct ToygenArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    test: usize,
    #[arg(long)]
    mu_lo: f64,
    #[arg(long)]
    mu_hi: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_test: PathBuf,
    #[command(flatten)]
    gen: GenOptions,
}

#[derive(Debug, clap::Args)]
struct GenOptions {
    /// Reading of the second parameter of the class normals.
    #[arg(long, value_enum, default_value_t = SpreadArg::Sd)]
    spread: SpreadArg,
    #[arg(long, value_enum, default_value_t = NoiseArg::PerSample)]
    noise_basis: NoiseArg,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    /// Matrix sizes (even), comma separated.
    #[arg(long, value_delimiter = ',', default_value = "6,8,16,20")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    train: usize,
    #[arg(long, default_value_t = 500)]
    test: usize,
    #[arg(long, default_value_t = 1.0)]
    mu_lo: f64,
    #[arg(long, default_value_t = 6.0)]
    mu_hi: f64,
    #[arg(long, default_value_t = 10.0)]
    epsilon: f64,
    #[arg(long, default_value_t = OptimizerConfig::default().max_iter)]
    max_iters: usize,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
    #[command(flatten)]
    gen: GenOptions,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricKind {
    Euclid,
    Airm,
    Logeuclid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SpreadArg {
    Sd,
    Var,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    PerSample,
    Fixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

impl GenOptions {
    fn apply(&self, cfg: ToyConfig) -> ToyConfig {
        ToyConfig {
            spread: match self.spread {
                SpreadArg::Sd => SpreadParam::StdDev,
                SpreadArg::Var => SpreadParam::Variance,
            },
            noise_basis: match self.noise_basis {
                NoiseArg::PerSample => NoiseBasis::PerSample,
                NoiseArg::Fixed => NoiseBasis::Fixed,
            },
            ..cfg
        }
    }
}

/// Six significant digits, without trailing zeros.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float");
    format!("{rounded}")
}

/// Parses `identity`, `mean` or `file:<path>`.
fn parse_reference(s: &str) -> Result<Reference> {
    match s {
        "identity" => Ok(Reference::Identity),
        "mean" => Ok(Reference::RiemannianMean),
        _ => match s.strip_prefix("file:") {
            Some(path) => Ok(Reference::Explicit(matrix_read(path)?)),
            None => Err(Error::InvalidConfig(format!(
                "reference must be identity, mean or file:<path>, got `{s}`"
            ))),
        },
    }
}

fn metric_spec(kind: MetricKind, reference: &str) -> Result<MetricSpec> {
    Ok(match kind {
        MetricKind::Euclid => MetricSpec::Euclid,
        MetricKind::Airm => MetricSpec::Airm,
        MetricKind::Logeuclid => MetricSpec::LogEuclid(parse_reference(reference)?),
    })
}

fn mean_of(ds: &LabeledSpdDataset) -> Result<SpdMatrix> {
    Ok(karcher_mean(ds.samples(), KarcherConfig::default())?.mean)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `argv` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let stdout = io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    let stdout = Path::new("<stdout>");
    match cmd {
        Command::Toygen(a) => {
            let cfg = a.gen.apply(ToyConfig::new(a.r, a.train, a.test, a.mu_lo, a.mu_hi, a.seed));
            let (train, test) = toy_generate(&cfg)?;
            dataset_write(&train, &a.out_train)?;
            dataset_write(&test, &a.out_test)?;
        }
        Command::Mean { input, out: path } => {
            let ds = dataset_read(&input)?;
            let km = karcher_mean(ds.samples(), KarcherConfig::default())?;
            log::info!("Karcher mean: {} iterations, residual {:e}", km.iterations, km.residual);
            matrix_write(&km.mean, &path)?;
        }
        Command::Whiten {
            input,
            out: path,
            mean,
            mean_out,
        } => {
            let ds = dataset_read(&input)?;
            let m = match mean {
                Some(p) => matrix_read(p)?,
                None => mean_of(&ds)?,
            };
            dataset_write(&whiten_with(&ds, &m)?, &path)?;
            if let Some(p) = mean_out {
                matrix_write(&m, p)?;
            }
        }
        Command::Learn {
            train,
            epsilon,
            init,
            max_iters,
            out: path,
            trace,
        } => {
            let ds = dataset_read(&train)?;
            let g0 = match parse_reference(&init)? {
                Reference::Identity => SpdMatrix::identity(ds.dim()),
                Reference::RiemannianMean => mean_of(&ds)?,
                Reference::Explicit(g) => g,
            };
            let cfg = OptimizerConfig {
                epsilon,
                max_iter: max_iters,
                ..OptimizerConfig::default()
            };
            let (g, tr) = learn_metric(&ds, &g0, &cfg)?;
            matrix_write(&g, &path)?;
            if let Some(p) = trace {
                let mut w = create(&p)?;
                tr.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&p))?;
            }
            writeln!(
                out,
                "f: {} -> {} in {} iterations ({:?})",
                sig6(tr.initial_f),
                sig6(tr.final_f()),
                tr.records.len(),
                tr.termination
            )
            .map_err(io_err(stdout))?;
        }
        Command::Eval {
            train,
            test,
            metric,
            reference,
        } => {
            let spec = metric_spec(metric, &reference)?;
            let acc = evaluate_accuracy(&dataset_read(&train)?, &dataset_read(&test)?, &spec)?;
            writeln!(out, "{}", sig6(acc)).map_err(io_err(stdout))?;
        }
        Command::Distmat {
            input,
            metric,
            reference,
            out: path,
        } => {
            let ds = dataset_read(&input)?;
            let csv = distance_csv(&ds, metric, &reference)?;
            match path {
                Some(p) => std::fs::write(&p, csv).map_err(io_err(&p))?,
                None => out.write_all(csv.as_bytes()).map_err(io_err(stdout))?,
            }
        }
        Command::Gradcheck { trials, dim, n, seed } => {
            let checks = gradient_check_trials(dim, n, trials, seed)?;
            let worst = checks.iter().map(|c| c.rel_error).fold(0.0, f64::max);
            let failed = checks.iter().filter(|c| !(c.rel_error < 1e-5)).count();
            writeln!(
                out,
                "{trials} trials, d={dim}, n={n}: max relative error {}, {failed} above 1e-5",
                sig6(worst)
            )
            .map_err(io_err(stdout))?;
            return Ok(if failed > 0 { 2 } else { 0 });
        }
        Command::BenchToy(a) => {
            let opt = OptimizerConfig {
                epsilon: a.epsilon,
                max_iter: a.max_iters,
                ..OptimizerConfig::default()
            };
            let mut rows = Vec::new();
            for &d in &a.sizes {
                if d < 2 || d % 2 != 0 {
                    return Err(Error::InvalidConfig(format!("sizes must be even and at least 2, got {d}")));
                }
                let cfg = a.gen.apply(ToyConfig::new(d / 2, a.train, a.test, a.mu_lo, a.mu_hi, 0));
                rows.push(bench_toy(&cfg, a.reps, a.seed, &opt)?);
            }
            let table = match a.format {
                Format::Md => bench_markdown(&rows),
                Format::Csv => bench_csv(&rows),
            };
            out.write_all(table.as_bytes()).map_err(io_err(stdout))?;
        }
    }
    Ok(0)
}

fn distance_csv(ds: &LabeledSpdDataset, metric: MetricKind, reference: &str) -> Result<String> {
    let xs = ds.samples();
    let g = match metric_spec(metric, reference)? {
        MetricSpec::LogEuclid(Reference::Identity) => Some(SpdMatrix::identity(ds.dim())),
        MetricSpec::LogEuclid(Reference::RiemannianMean) => Some(mean_of(ds)?),
        MetricSpec::LogEuclid(Reference::Explicit(g)) => Some(g),
        _ => None,
    };
    let mut csv = String::new();
    for a in xs {
        let row = xs
            .iter()
            .map(|b| match (&g, metric) {
                (Some(g), _) => dist_logeuclid_g(g, a, b),
                (None, MetricKind::Airm) => dist_airm(a, b),
                (None, _) => dist_euclid(a, b),
            })
            .map(|d| d.map(|v| format!("{v:?}")))
            .collect::<Result<Vec<_>>>()?;
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    Ok(csv)
}

fn bench_markdown(rows: &[BenchRow]) -> String {
    let mut s = String::from("| size |");
    for c in Column::ALL {
        s.push_str(&format!(" {} |", c.name()));
    }
    s.push_str("\n|---|");
    s.push_str(&"---|".repeat(Column::ALL.len()));
    s.push('\n');
    for row in rows {
        s.push_str(&format!("| {0}x{0} |", row.dim));
        for v in row.mean() {
            s.push_str(&format!(" {} |", sig6(100.0 * v)));
        }
        s.push('\n');
    }
    s
}

fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("size");
    for c in Column::ALL {
        s.push(',');
        s.push_str(c.name());
    }
    s.push('\n');
    for row in rows {
        s.push_str(&row.dim.to_string());
        for v in row.mean() {
            s.push_str(&format!(",{v:?}"));
        }
        s.push('\n');
    }
    s
}

//! `cchr`: fit, select, bootstrap, simulate and sweep from the command line.
//!
//! Exit codes: 0 success, 1 error, 2 the optimiser did not converge (the
//! report is still written).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cchr_core::data::{infer_schema, load_dataset, CovariateSchema, Dataset, REQUIRED_COLUMNS};
use cchr_core::fit::{bootstrap_from, fit, select_model, BootstrapResult};
use cchr_core::sim::{generate_dataset, run_mc, sweep, sweep_csv, Estimator, Group, SimDesign, SweepAxis};
use cchr_core::{
    CensoringFamily, CopulaFamily, FitOptions, FitResult, KernelConfig, OptimizerConfig, WeightScheme, WeightVector,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "cchr", version, about = "Complier causal hazard ratio estimation under dependent censoring")]
struct Cli {
    /// Worker threads. Defaults to 1 when neither the flag nor CCHR_THREADS is set.
    #[arg(long, global = true, env = "CCHR_THREADS", default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (fit, select, bootstrap, sweep) or directory (simulate).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one copula / censoring combination.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit all 21 combinations and rank them by log-likelihood.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Fit, then bootstrap standard errors and p-values.
    Bootstrap {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "boot", default_value_t = 200)]
        b: usize,
    },
    /// Monte Carlo run of a design.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        /// Draw one bootstrap resample per replicate for coverage.
        #[arg(long)]
        warp_speed: bool,
        /// Write one generated dataset (with a `complier` column) and exit.
        #[arg(long)]
        emit_dataset: Option<PathBuf>,
    },
    /// Monte Carlo runs along the complier-ratio or sample-size axis.
    Sweep {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, value_enum, default_value_t = AxisArg::ComplierRatio)]
        axis: AxisArg,
        /// Axis values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [WeightsArg::Naive, WeightsArg::Proposed, WeightsArg::Oracle])]
        estimators: Vec<WeightsArg>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// CSV with columns y, delta1, delta2, z, w and covariates.
    #[arg(long)]
    input: PathBuf,
    /// Covariates as `name:kind,...` with kind discrete or continuous;
    /// inferred from the file when omitted.
    #[arg(long)]
    schema: Option<String>,
    /// 0/1 column holding the complier indicator for `--weights oracle`.
    #[arg(long, default_value = "complier")]
    oracle_column: String,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "frank")]
    copula: CopulaFamily,
    #[arg(long, default_value = "weibull")]
    censoring: CensoringFamily,
    #[arg(long, value_enum, default_value_t = WeightsArg::Proposed)]
    weights: WeightsArg,
    #[command(flatten)]
    tuning: TuningArgs,
    /// End of the estimation window.
    #[arg(long)]
    tau_bar: Option<f64>,
}

#[derive(Args)]
struct TuningArgs {
    /// Optimiser starts.
    #[arg(long)]
    starts: Option<usize>,
    /// Fixed bandwidth for the instrument propensity; cross-validated otherwise.
    #[arg(long)]
    h1: Option<f64>,
    /// Fixed bandwidth for the treatment regressions; cross-validated otherwise.
    #[arg(long)]
    h2: Option<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Cap on profile-likelihood alternations.
    #[arg(long)]
    max_outer_iters: Option<usize>,
}

impl TuningArgs {
    fn kernel(&self, seed: u64) -> KernelConfig {
        KernelConfig {
            fixed_h1: self.h1,
            fixed_h2: self.h2,
            cv_folds: self.folds,
            cv_seed: seed,
            ..KernelConfig::default()
        }
    }

    fn optimizer(&self, seed: u64) -> OptimizerConfig {
        let mut o = OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        };
        if let Some(j) = self.starts {
            o.n_starts = j;
        }
        if let Some(k) = self.max_outer_iters {
            o.max_outer_iters = k;
        }
        o
    }
}

#[derive(Args)]
struct DesignArgs {
    /// lowdep, highdep, lowdep-clayton90-lognormal or lowdep-clayton180-loglogistic.
    #[arg(long, default_value = "lowdep", conflicts_with = "design")]
    preset: String,
    /// JSON design file.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Estimator variant.
    #[arg(long, value_enum)]
    weights: Option<WeightsArg>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    complier_prob: Option<f64>,
    #[arg(long)]
    fit_copula: Option<CopulaFamily>,
    #[arg(long)]
    fit_censoring: Option<CensoringFamily>,
    #[command(flatten)]
    tuning: TuningArgs,
}

impl DesignArgs {
    fn load(&self, seed: u64) -> Result<SimDesign> {
        let mut d = match &self.design {
            Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing design {}", p.display()))?,
            None => SimDesign::preset(&self.preset)?,
        };
        if let Some(w) = self.weights {
            d.estimator = w.estimator();
        }
        if let Some(r) = self.replications {
            d.replications = r;
        }
        if let Some(n) = self.n {
            d.n = n;
        }
        if let Some(p) = self.complier_prob {
            d.complier_prob = p;
        }
        d.fit_copula = self.fit_copula.or(d.fit_copula);
        d.fit_censoring = self.fit_censoring.or(d.fit_censoring);
        let t = &self.tuning;
        if let Some(j) = t.starts {
            d.optimizer.n_starts = j;
        }
        if let Some(k) = t.max_outer_iters {
            d.optimizer.max_outer_iters = k;
        }
        d.kernel.fixed_h1 = t.h1.or(d.kernel.fixed_h1);
        d.kernel.fixed_h2 = t.h2.or(d.kernel.fixed_h2);
        d.kernel.cv_folds = t.folds;
        d.kernel.cv_seed = seed;
        d.validate()?;
        Ok(d)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightsArg {
    Proposed,
    Naive,
    Oracle,
}

impl WeightsArg {
    fn estimator(self) -> Estimator {
        match self {
            WeightsArg::Proposed => Estimator::Proposed,
            WeightsArg::Naive => Estimator::Naive,
            WeightsArg::Oracle => Estimator::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    ComplierRatio,
    SampleSize,
}

#[derive(Serialize)]
struct Parameter {
    name: String,
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
}

#[derive(Serialize)]
struct HazardArrays<'a> {
    time: &'a [f64],
    increment: &'a [f64],
}

#[derive(Serialize)]
struct FitReport<'a> {
    command: &'static str,
    input: String,
    n: usize,
    copula: CopulaFamily,
    censoring: CensoringFamily,
    weights: Estimator,
    seed: u64,
    parameters: Vec<Parameter>,
    cchr: f64,
    loglik: f64,
    converged: bool,
    n_outer: usize,
    hazard: HazardArrays<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<&'a BootstrapResult>,
    fit: &'a FitResult,
}

fn fit_report<'a>(
    command: &'static str,
    input: &Path,
    n: usize,
    weights: WeightsArg,
    seed: u64,
    f: &'a FitResult,
    boot: Option<&'a BootstrapResult>,
) -> FitReport<'a> {
    let values = f.theta.to_vec();
    let parameters = f
        .theta
        .names()
        .into_iter()
        .zip(&values)
        .enumerate()
        .map(|(j, (name, &estimate))| Parameter {
            name,
            estimate,
            se: boot.map(|b| b.se[j]),
            p_value: boot.map(|b| b.p_values[j]),
        })
        .collect();
    FitReport {
        command,
        input: input.display().to_string(),
        n,
        copula: f.theta.copula.family,
        censoring: f.theta.cens.family,
        weights: weights.estimator(),
        seed,
        parameters,
        cchr: f.theta.ph.cchr(),
        loglik: f.loglik,
        converged: f.converged,
        n_outer: f.n_outer,
        hazard: HazardArrays {
            time: f.hazard.times(),
            increment: f.hazard.increments(),
        },
        bootstrap: boot,
        fit: f,
    }
}

#[derive(Serialize)]
struct SelectRow {
    rank: Option<usize>,
    copula: CopulaFamily,
    censoring: CensoringFamily,
    loglik: Option<f64>,
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct SelectReport<'a> {
    command: &'static str,
    input: String,
    n: usize,
    weights: Estimator,
    seed: u64,
    table: Vec<SelectRow>,
    best: Option<FitReport<'a>>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

struct Loaded {
    data: Dataset,
    oracle: Option<WeightVector>,
}

fn load(args: &DataArgs, need_oracle: bool) -> Result<Loaded> {
    let text = read(&args.input)?;
    let schema: CovariateSchema = match &args.schema {
        Some(s) => s.parse().context("parsing --schema")?,
        None => {
            let inferred = infer_schema(text.as_bytes(), 10)?;
            let keep: Vec<usize> = (0..inferred.names.len())
                .filter(|&i| inferred.names[i] != args.oracle_column)
                .collect();
            CovariateSchema::new(
                keep.iter().map(|&i| inferred.names[i].clone()).collect(),
                keep.iter().map(|&i| inferred.kinds[i]).collect(),
            )?
        }
    };
    let data = load_dataset(text.as_bytes(), &schema).with_context(|| format!("loading {}", args.input.display()))?;
    let oracle = if need_oracle {
        Some(oracle_column(&text, &args.oracle_column)?)
    } else {
        None
    };
    Ok(Loaded { data, oracle })
}

fn oracle_column(text: &str, column: &str) -> Result<WeightVector> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .with_context(|| format!("--weights oracle needs a '{column}' column"))?;
    let mut kappa = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let v: f64 = rec?
            .get(idx)
            .unwrap_or("")
            .parse()
            .with_context(|| format!("row {}: '{column}' is not numeric", i + 1))?;
        if v != 0.0 && v != 1.0 {
            bail!("row {}: '{column}' must be 0 or 1, got {v}", i + 1);
        }
        kappa.push(v);
    }
    Ok(WeightVector::new(kappa)?)
}

fn options(model: &ModelArgs, loaded: &Loaded, seed: u64) -> FitOptions {
    let weights = match model.weights {
        WeightsArg::Proposed => WeightScheme::Proposed(model.tuning.kernel(seed)),
        WeightsArg::Naive => WeightScheme::Naive,
        WeightsArg::Oracle => WeightScheme::Given(loaded.oracle.clone().expect("oracle weights loaded")),
    };
    let mut o = FitOptions::new(model.copula, model.censoring, weights);
    o.optimizer = model.tuning.optimizer(seed);
    o.tau_bar = model.tau_bar;
    o
}

fn status(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        log::warn!("optimiser did not converge; report written anyway");
        ExitCode::from(2)
    }
}

fn write_sample_csv(path: &Path, design: &SimDesign, seed: u64) -> Result<()> {
    let s = generate_dataset(design, seed)?;
    let mut wtr = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = REQUIRED_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend(s.data.schema().names.iter().cloned());
    header.push("complier".into());
    wtr.write_record(&header)?;
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for (o, g) in s.data.observations().iter().zip(&s.groups) {
        let mut rec = vec![o.y.to_string(), flag(o.delta1), flag(o.delta2), flag(o.z), flag(o.w)];
        rec.extend(o.x.iter().map(f64::to_string));
        rec.push(flag(*g == Group::Complier));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Fit { data, model } => {
            let loaded = load(&data, model.weights == WeightsArg::Oracle)?;
            let f = fit(&loaded.data, &options(&model, &loaded, seed))?;
            let report = fit_report("fit", &data.input, loaded.data.n(), model.weights, seed, &f, None);
            emit(out, &json(&report)?)?;
            Ok(status(f.converged))
        }
        Command::Bootstrap { data, model, b } => {
            let loaded = load(&data, model.weights == WeightsArg::Oracle)?;
            let opts = options(&model, &loaded, seed);
            let f = fit(&loaded.data, &opts)?;
            let boot = bootstrap_from(&loaded.data, &opts, &f, b, seed, None)?;
            let report = fit_report("bootstrap", &data.input, loaded.data.n(), model.weights, seed, &f, Some(&boot));
            emit(out, &json(&report)?)?;
            Ok(status(f.converged))
        }
        Command::Select { data, model } => {
            let loaded = load(&data, model.weights == WeightsArg::Oracle)?;
            let sel = select_model(&loaded.data, &options(&model, &loaded, seed), None)?;
            let table = sel
                .candidates
                .iter()
                .map(|c| SelectRow {
                    rank: c.rank,
                    copula: c.copula,
                    censoring: c.censoring,
                    loglik: c.loglik,
                    converged: c.fit.as_ref().map(|f| f.converged),
                    error: c.error.clone(),
                })
                .collect();
            let best = sel.best().and_then(|c| c.fit.as_ref());
            let report = SelectReport {
                command: "select",
                input: data.input.display().to_string(),
                n: loaded.data.n(),
                weights: model.weights.estimator(),
                seed,
                table,
                best: best.map(|f| fit_report("select", &data.input, loaded.data.n(), model.weights, seed, f, None)),
            };
            emit(out, &json(&report)?)?;
            match best {
                Some(f) => Ok(status(f.converged)),
                None => bail!("every combination failed"),
            }
        }
        Command::Simulate {
            design,
            warp_speed,
            emit_dataset,
        } => {
            let mut d = design.load(seed)?;
            if let Some(path) = emit_dataset {
                write_sample_csv(&path, &d, seed)?;
                return Ok(ExitCode::SUCCESS);
            }
            d.warp_speed = warp_speed;
            let mc = run_mc(&d, seed)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    fs::write(dir.join("metrics.csv"), mc.report.to_csv())?;
                    fs::write(dir.join("replicates.csv"), mc.replicates_csv())?;
                    fs::write(dir.join("run.json"), json(&mc)?)?;
                    fs::write(dir.join("design.json"), json(&d)?)?;
                }
                None => emit(None, &mc.report.to_csv())?,
            }
            if mc.report.failures > 0 {
                log::warn!("{} of {} replicates failed", mc.report.failures, d.replications);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            design,
            axis,
            values,
            estimators,
        } => {
            let d = design.load(seed)?;
            let axis = match (axis, values) {
                (AxisArg::ComplierRatio, None) => SweepAxis::complier_ratio(),
                (AxisArg::SampleSize, None) => SweepAxis::sample_size(),
                (AxisArg::ComplierRatio, Some(v)) => SweepAxis::ComplierRatio(v),
                (AxisArg::SampleSize, Some(v)) => SweepAxis::SampleSize(v.iter().map(|&x| x as usize).collect()),
            };
            let est: Vec<Estimator> = estimators.iter().map(|w| w.estimator()).collect();
            let rows = sweep(&d, &axis, &est, seed)?;
            emit(out, &sweep_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

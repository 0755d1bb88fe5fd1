//! `suds`: simulate swimmer trials, fit SUDS models and score them.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use suds::io::{read_json, read_trajectory, write_atomic, write_json, write_trajectory};
use suds::phase::{DeviationSet, NominalGait};
use suds::pipeline::{
    deviations_from_csv, fit_trajectory, is_deviation_csv, residuals_to_csv, simulate_pair,
    trajectory_deviations, FitReport, RunConfig,
};
use suds::simulate::Trajectory;
use suds::sysid::{coefficient_rms_error, evaluate, fit, EvaluationReport, FitConfig, SudsModel};
use suds::{Result, SudsError};

#[derive(Parser, Debug)]
#[command(
    name = "suds",
    version,
    about = "Simulate swimmers and fit data-driven SUDS models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate train and test trials and write them as CSV + JSON.
    Simulate(RunArgs),
    /// Fit a SUDS model to a training trajectory or deviation set.
    Fit(FitArgs),
    /// Score a model against its template on held-out data.
    Evaluate(EvalArgs),
    /// Simulate, fit and evaluate in one go.
    Pipeline(RunArgs),
}

/// Settings shared by every subcommand that builds a run configuration.
#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped configuration: linear_passive, pushmepullyou, purcell3, purcell9.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "INT")]
    cycles_train: Option<usize>,
    #[arg(long, value_name = "INT")]
    cycles_test: Option<usize>,
    #[arg(long, value_name = "INT")]
    samples_per_cycle: Option<usize>,
    /// OU diffusion σ of the drive noise.
    #[arg(long, value_name = "FLOAT")]
    sigma: Option<f64>,
    /// OU attraction rate λ.
    #[arg(long, value_name = "FLOAT")]
    lambda: Option<f64>,
    #[arg(long, value_name = "INT")]
    fourier_order: Option<usize>,
    #[arg(long, value_name = "INT")]
    bins: Option<usize>,
    /// Kernel bandwidth in radians.
    #[arg(long, value_name = "FLOAT")]
    bandwidth: Option<f64>,
    #[arg(long, value_name = "FLOAT")]
    ridge: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Training trajectory CSV (with JSON sidecar) or deviation CSV.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Known model JSON; prints the coefficient recovery error.
    #[arg(long, value_name = "PATH")]
    truth: Option<PathBuf>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// Nominal gait JSON; defaults to the one stored in the model.
    #[arg(long, value_name = "PATH")]
    nominal: Option<PathBuf>,
    /// Held-out trajectory CSV or deviation CSV.
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn has_base(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    /// Base configuration with command-line overrides applied.
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => {
                return Err(SudsError::Config(
                    "pass --config PATH or --preset NAME".into(),
                ));
            }
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.cycles_train {
            cfg.cycles_train = v;
        }
        if let Some(v) = self.cycles_test {
            cfg.cycles_test = v;
        }
        if let Some(v) = self.samples_per_cycle {
            cfg.samples_per_cycle = v;
        }
        if let Some(v) = self.lambda {
            cfg.noise.attraction_rate = v;
        }
        if let Some(v) = self.sigma {
            cfg.noise.diffusion = Some(v);
        }
        if let Some(v) = self.fourier_order {
            cfg.fourier_order = v;
        }
        self.apply_fit(&mut cfg.fit);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_fit(&self, fit: &mut FitConfig) {
        if let Some(v) = self.bins {
            fit.bins = v;
        }
        if let Some(v) = self.bandwidth {
            fit.bandwidth = v;
        }
        if let Some(v) = self.ridge {
            fit.ridge = v;
        }
    }

    /// Fit settings and Fourier order; a base config is optional here.
    fn fit_settings(&self) -> Result<(FitConfig, usize)> {
        if self.has_base() {
            let cfg = self.run_config()?;
            return Ok((cfg.fit, cfg.fourier_order));
        }
        let mut fit = FitConfig::default();
        self.apply_fit(&mut fit);
        fit.validate()?;
        let order = self
            .fourier_order
            .unwrap_or(suds::phase::DEFAULT_FOURIER_ORDER);
        Ok((fit, order))
    }
}

fn print_trial(label: &str, traj: &Trajectory) {
    println!(
        "{label}: {} records, displacement per cycle {:+.6e}, deviation std {:.3e}",
        traj.len(),
        traj.displacement_per_cycle(),
        traj.deviation_std()
    );
}

fn print_fit(model: &SudsModel, samples: usize) {
    println!(
        "fit: {samples} samples, {} bins, feature count {} (n = {}, n_a = {})",
        model.bins(),
        model.n_features,
        model.n,
        model.n_a
    );
    let weak = model.rank_deficient_bins();
    if weak.is_empty() {
        println!("rank-deficient bins: none");
    } else {
        println!("rank-deficient bins ({}): {weak:?}", weak.len());
    }
}

fn gamma_text(g: Option<&suds::sysid::GammaGroup>) -> String {
    g.map_or_else(|| "n/a".to_string(), |g| format!("{:.4}", g.aggregate))
}

fn print_report(label: &str, report: &EvaluationReport) {
    println!(
        "{label}: {} samples, Γ_ghat = {}, Γ_rdot = {}",
        report.samples,
        gamma_text(Some(&report.gamma_ghat)),
        gamma_text(report.gamma_rdot.as_ref())
    );
}

fn write_report(dir: &Path, stem: &str, report: &EvaluationReport) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report)?;
    write_atomic(
        &dir.join(format!("{stem}_residuals.csv")),
        residuals_to_csv(report).as_bytes(),
    )
}

fn cmd_simulate(args: &RunArgs) -> Result<()> {
    let cfg = args.config.run_config()?;
    let (train, test) = simulate_pair(&cfg)?;
    write_trajectory(&args.out.join("train.csv"), &train)?;
    write_trajectory(&args.out.join("test.csv"), &test)?;
    print_trial("train", &train);
    print_trial("test", &test);
    Ok(())
}

enum Data {
    Trajectory(Box<Trajectory>),
    Deviations(DeviationSet),
}

fn read_data(path: &Path) -> Result<Data> {
    let text = std::fs::read_to_string(path)?;
    if is_deviation_csv(&text) {
        Ok(Data::Deviations(deviations_from_csv(&text)?))
    } else {
        Ok(Data::Trajectory(Box::new(read_trajectory(path)?)))
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let (fit_cfg, order) = args.config.fit_settings()?;
    let (model, samples) = match read_data(&args.train)? {
        Data::Trajectory(traj) => {
            let fitted = fit_trajectory(&traj, order, &fit_cfg)?;
            write_json(&args.out.join("nominal.json"), &fitted.nominal)?;
            (fitted.model, fitted.deviations.len())
        }
        Data::Deviations(set) => (fit(&set, &fit_cfg, None)?, set.len()),
    };
    let mut report = FitReport::new(&model, samples);
    if let Some(path) = &args.truth {
        let truth: SudsModel = read_json(path)?;
        let err = coefficient_rms_error(&model, &truth)?;
        report.recovery_error = Some(err);
        println!("recovery error: {err:.3e}");
    }
    write_json(&args.out.join("model.json"), &model)?;
    write_json(&args.out.join("fit_report.json"), &report)?;
    print_fit(&model, samples);
    Ok(())
}

fn cmd_evaluate(args: &EvalArgs) -> Result<()> {
    let model: SudsModel = read_json(&args.model)?;
    let nominal: NominalGait = match &args.nominal {
        Some(path) => read_json(path)?,
        None => model
            .nominal
            .clone()
            .ok_or_else(|| SudsError::Config("model has no nominal gait; pass --nominal".into()))?,
    };
    let test = match read_data(&args.test)? {
        Data::Trajectory(traj) => {
            let dims = traj.meta.dims;
            if dims.n != model.n || dims.n_a != model.n_a || dims.group_dim != model.group_dim {
                return Err(SudsError::DimensionMismatch(format!(
                    "model is (n = {}, n_a = {}), test trajectory is (n = {}, n_a = {})",
                    model.n, model.n_a, dims.n, dims.n_a
                )));
            }
            trajectory_deviations(&traj, &nominal)?
        }
        Data::Deviations(set) => set,
    };
    let report = evaluate(&model, &nominal, &test)?;
    write_report(&args.out, "report", &report)?;
    print_report("test", &report);
    Ok(())
}

fn cmd_pipeline(args: &RunArgs) -> Result<()> {
    let cfg = args.config.run_config()?;
    let out = suds::pipeline::run_pipeline(&cfg)?;
    let dir = &args.out;
    write_trajectory(&dir.join("train.csv"), &out.train)?;
    write_trajectory(&dir.join("test.csv"), &out.test)?;
    print_trial("train", &out.train);
    print_trial("test", &out.test);
    let model = &out.fitted.model;
    write_json(&dir.join("nominal.json"), &out.fitted.nominal)?;
    write_json(&dir.join("model.json"), model)?;
    write_json(
        &dir.join("fit_report.json"),
        &FitReport::new(model, out.fitted.deviations.len()),
    )?;
    print_fit(model, out.fitted.deviations.len());
    write_report(dir, "train_report", &out.train_report)?;
    write_report(dir, "report", &out.test_report)?;
    print_report("train", &out.train_report);
    print_report("test", &out.test_report);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

//! End-to-end runs: configuration, train/test simulation, fitting and
//! scoring, plus the CSV formats for deviation sets and residual series.

use crate::error::{Result, SudsError};
use crate::io::{fmt_f64, parse_f64};
use crate::mechanics::{SwimmerParams, Variant};
use crate::phase::{
    deviations, estimate_phase, fit_nominal, DeviationSample, DeviationSet, NominalGait,
    PhaseSeries,
};
use crate::simulate::{simulate_trial, GaitSpec, NoiseSpec, Trajectory, TrialConfig};
use crate::sysid::{evaluate, feature_count, fit, EvaluationReport, FitConfig, SudsModel};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Preset run configurations, one per shipped swimmer.
pub const PRESETS: [(&str, &str); 4] = [
    (
        "linear_passive",
        include_str!("../presets/linear_passive.toml"),
    ),
    (
        "pushmepullyou",
        include_str!("../presets/pushmepullyou.toml"),
    ),
    ("purcell3", include_str!("../presets/purcell3.toml")),
    ("purcell9", include_str!("../presets/purcell9.toml")),
];

/// OU drive noise as written in a config file.
///
/// `diffusion` sets σ directly; otherwise σ is chosen so the stationary
/// deviation std is `deviation_fraction` of the largest joint amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_rate")]
    pub attraction_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation_fraction: Option<f64>,
}

fn default_rate() -> f64 {
    NoiseSpec::DEFAULT_RATE
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            attraction_rate: NoiseSpec::DEFAULT_RATE,
            diffusion: None,
            deviation_fraction: Some(0.07),
        }
    }
}

impl NoiseConfig {
    pub fn resolve(&self, gait: &GaitSpec, seed: u64) -> Result<NoiseSpec> {
        let lambda = self.attraction_rate;
        let sigma = match (self.diffusion, self.deviation_fraction) {
            (Some(s), _) => s,
            (None, Some(frac)) => frac * gait.max_amplitude() * (2.0 * lambda).sqrt(),
            (None, None) => 0.0,
        };
        let spec = NoiseSpec {
            attraction_rate: lambda,
            diffusion: sigma,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn default_seed() -> u64 {
    42
}
fn default_cycles() -> usize {
    30
}
fn default_spc() -> usize {
    100
}
fn default_warmup() -> usize {
    2
}
fn default_order() -> usize {
    crate::phase::DEFAULT_FOURIER_ORDER
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_cycles")]
    pub cycles_train: usize,
    #[serde(default = "default_cycles")]
    pub cycles_test: usize,
    #[serde(default = "default_spc")]
    pub samples_per_cycle: usize,
    #[serde(default = "default_warmup")]
    pub warmup_cycles: usize,
    /// Harmonics in the nominal-gait Fourier fit.
    #[serde(default = "default_order")]
    pub fourier_order: usize,
    pub system: SwimmerParams,
    pub gait: GaitSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SudsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(name, _)| *name)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = Self::preset_names().collect();
            SudsError::Config(format!(
                "unknown preset `{name}` (choose from {})",
                names.join(", ")
            ))
        })?;
        Self::from_toml(text)
    }

    pub fn for_variant(variant: Variant) -> Self {
        let name = match variant {
            Variant::LinearPassive => "linear_passive",
            Variant::Pushmepullyou => "pushmepullyou",
            Variant::Purcell3 => "purcell3",
            Variant::Purcell9 => "purcell9",
        };
        Self::preset(name).expect("shipped presets parse")
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.gait.validate(self.system.actuated.len())?;
        if self.cycles_train == 0 || self.cycles_test == 0 || self.samples_per_cycle == 0 {
            return Err(SudsError::Config(
                "cycle counts and samples per cycle must be positive".into(),
            ));
        }
        if self.fourier_order == 0 {
            return Err(SudsError::Config("fourier_order must be positive".into()));
        }
        self.fit.validate()?;
        self.noise_spec().map(|_| ())
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        self.noise.resolve(&self.gait, self.seed)
    }

    /// Trial settings for RNG stream 0 (train) or 1 (test).
    pub fn trial(&self, n_cycles: usize, stream: u64) -> TrialConfig {
        TrialConfig {
            n_cycles,
            samples_per_cycle: self.samples_per_cycle,
            warmup_cycles: self.warmup_cycles,
            stream,
            ..TrialConfig::default()
        }
    }

    pub fn feature_count(&self) -> usize {
        feature_count(self.system.n_shape(), self.system.actuated.len())
    }
}

pub const TRAIN_STREAM: u64 = 0;
pub const TEST_STREAM: u64 = 1;

/// Train and test trials from one seed on distinct RNG streams.
pub fn simulate_pair(cfg: &RunConfig) -> Result<(Trajectory, Trajectory)> {
    let noise = cfg.noise_spec()?;
    let train = simulate_trial(
        &cfg.system,
        &cfg.gait,
        &noise,
        &cfg.trial(cfg.cycles_train, TRAIN_STREAM),
    )?;
    let test = simulate_trial(
        &cfg.system,
        &cfg.gait,
        &noise,
        &cfg.trial(cfg.cycles_test, TEST_STREAM),
    )?;
    Ok((train, test))
}

/// Intermediate products of fitting one training trajectory.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub phases: PhaseSeries,
    pub nominal: NominalGait,
    pub deviations: DeviationSet,
    pub model: SudsModel,
}

/// Phase estimation, nominal gait, deviations and the kernel fit, taken
/// relative to the nominal template.
pub fn fit_trajectory(
    train: &Trajectory,
    fourier_order: usize,
    cfg: &FitConfig,
) -> Result<FitOutcome> {
    let phases = estimate_phase(&train.shapes(), &train.times())?;
    let nominal = fit_nominal(train, &phases, fourier_order)?;
    let devs = deviations(train, &nominal, &phases)?;
    let model = fit(&devs, cfg, Some(&nominal))?;
    Ok(FitOutcome {
        phases,
        nominal,
        deviations: devs,
        model,
    })
}

/// Deviations of a held-out trajectory, phased in the training coordinates.
pub fn trajectory_deviations(traj: &Trajectory, nominal: &NominalGait) -> Result<DeviationSet> {
    let phases = nominal.phase_of(traj)?;
    deviations(traj, nominal, &phases)
}

/// Γ of `model` on `traj` against the template of `nominal`.
pub fn evaluate_trajectory(
    model: &SudsModel,
    nominal: &NominalGait,
    traj: &Trajectory,
) -> Result<EvaluationReport> {
    let dims = traj.meta.dims;
    if dims.n != model.n || dims.n_a != model.n_a || dims.group_dim != model.group_dim {
        return Err(SudsError::DimensionMismatch(format!(
            "model is (n = {}, n_a = {}), trajectory is (n = {}, n_a = {})",
            model.n, model.n_a, dims.n, dims.n_a
        )));
    }
    let devs = trajectory_deviations(traj, nominal)?;
    evaluate(model, nominal, &devs)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub train: Trajectory,
    pub test: Trajectory,
    pub fitted: FitOutcome,
    pub train_report: EvaluationReport,
    pub test_report: EvaluationReport,
}

/// Simulate, fit on the train trial, score on both trials.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let (train, test) = simulate_pair(cfg)?;
    let fitted = fit_trajectory(&train, cfg.fourier_order, &cfg.fit)?;
    let train_report = evaluate(&fitted.model, &fitted.nominal, &fitted.deviations)?;
    let test_report = evaluate_trajectory(&fitted.model, &fitted.nominal, &test)?;
    Ok(PipelineOutcome {
        train,
        test,
        fitted,
        train_report,
        test_report,
    })
}

/// Per-bin summary written next to a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub samples: usize,
    pub group_dim: usize,
    pub n: usize,
    pub n_a: usize,
    pub feature_count: usize,
    pub bins: usize,
    pub bandwidth: f64,
    pub ridge: f64,
    pub rank_deficient_bins: Vec<usize>,
    pub per_bin: Vec<BinReport>,
    /// Nominal-gait Fourier residuals, when the fit used a trajectory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nominal_residual_rms: Option<crate::phase::NominalResiduals>,
    /// Coefficient RMS error against a known model, when one was supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub bin: usize,
    pub center: f64,
    pub weight_mass: f64,
    pub effective_samples: f64,
    pub condition: f64,
    pub rank_deficient: bool,
    pub weak_columns: Vec<usize>,
    pub residual_rms: Vec<f64>,
}

impl FitReport {
    pub fn new(model: &SudsModel, samples: usize) -> Self {
        let per_bin = model
            .diagnostics
            .iter()
            .enumerate()
            .map(|(b, d)| BinReport {
                bin: b,
                center: model.centers[b],
                weight_mass: d.weight_mass,
                effective_samples: d.effective_samples,
                condition: d.condition,
                rank_deficient: d.rank_deficient,
                weak_columns: d.weak_columns.clone(),
                residual_rms: d.residual_rms.clone(),
            })
            .collect();
        Self {
            samples,
            group_dim: model.group_dim,
            n: model.n,
            n_a: model.n_a,
            feature_count: model.n_features,
            bins: model.bins(),
            bandwidth: model.config.bandwidth,
            ridge: model.config.ridge,
            rank_deficient_bins: model.rank_deficient_bins(),
            per_bin,
            nominal_residual_rms: model.nominal.as_ref().map(|n| n.residual_rms.clone()),
            recovery_error: None,
        }
    }
}

/// Column names of a deviation-set CSV.
pub fn deviation_header(group_dim: usize, n: usize, n_a: usize) -> Vec<String> {
    let mut cols = vec!["phi".to_string()];
    cols.extend((0..n).map(|i| format!("delta.{i}")));
    cols.extend((0..n).map(|i| format!("deltadot.{i}")));
    cols.extend((0..n_a).map(|i| format!("deltadota.{i}")));
    cols.extend((0..group_dim).map(|i| format!("ghat.{i}")));
    cols.extend((0..n - n_a).map(|i| format!("rdotp.{i}")));
    cols
}

pub fn deviations_to_csv(set: &DeviationSet) -> String {
    let mut out = deviation_header(set.group_dim, set.n, set.n_a).join(",");
    out.push('\n');
    for s in &set.samples {
        let mut fields = vec![s.phi];
        fields.extend(s.delta.iter());
        fields.extend(s.delta_dot.iter());
        fields.extend(s.delta_dot_a.iter());
        fields.extend(s.target.iter());
        let line: Vec<String> = fields.into_iter().map(fmt_f64).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Whether `text` starts with a deviation-set header rather than a trajectory one.
pub fn is_deviation_csv(text: &str) -> bool {
    text.lines().next().is_some_and(|h| h.starts_with("phi,"))
}

/// Parses a deviation CSV; dimensions are read off the header.
pub fn deviations_from_csv(text: &str) -> Result<DeviationSet> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| SudsError::Parse("empty deviation file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let count = |prefix: &str| header.iter().filter(|c| c.starts_with(prefix)).count();
    let n = count("delta.");
    let n_a = count("deltadota.");
    let group_dim = count("ghat.");
    if n_a > n || header != deviation_header(group_dim, n, n_a) {
        return Err(SudsError::Parse("malformed deviation header".into()));
    }
    let width = header.len();
    let q = group_dim + n - n_a;
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| parse_f64(f, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != width {
            return Err(SudsError::Parse(format!(
                "line {lineno}: expected {width} fields, found {}",
                vals.len()
            )));
        }
        let seg = |start: usize, len: usize| DVector::from_column_slice(&vals[start..start + len]);
        samples.push(DeviationSample {
            phi: vals[0],
            delta: seg(1, n),
            delta_dot: seg(1 + n, n),
            delta_dot_a: seg(1 + 2 * n, n_a),
            target: seg(1 + 2 * n + n_a, q),
        });
    }
    Ok(DeviationSet {
        group_dim,
        n,
        n_a,
        samples,
    })
}

/// Residual series for plotting: target, data-driven and template
/// predictions, and both residuals for every output.
pub fn residuals_to_csv(report: &EvaluationReport) -> String {
    let q = report.residuals.first().map_or(0, |r| r.target.len());
    let gd = report.group_dim;
    let name = |k: usize| {
        if k < gd {
            format!("ghat.{k}")
        } else {
            format!("rdotp.{}", k - gd)
        }
    };
    let mut cols = vec!["phi".to_string()];
    for k in 0..q {
        let o = name(k);
        cols.extend([
            format!("{o}.target"),
            format!("{o}.data"),
            format!("{o}.template"),
            format!("{o}.data_residual"),
            format!("{o}.template_residual"),
        ]);
    }
    let mut out = cols.join(",");
    out.push('\n');
    for r in &report.residuals {
        let mut fields = vec![fmt_f64(r.phi)];
        for k in 0..q {
            let (y, d, t) = (r.target[k], r.data_driven[k], r.template[k]);
            fields.extend([y, d, t, d - y, t - y].map(fmt_f64));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

//! Noise-perturbed periodic gait trials.
//!
//! The actuated shape follows `r_a(t) = r_ref(t) + δ_a(t)` where `δ_a` is an
//! Ornstein–Uhlenbeck deviation, stepped once per sample by Euler–Maruyama.
//! Within a sample interval `δ_a` is held fixed; the passive shape is
//! advanced by classical RK4 and the pose by the fourth-order
//! commutator-free Lie-group scheme built on the same stages.

use crate::error::{Result, SudsError};
use crate::geometry::{BodyVelocity, GroupElement};
use crate::mechanics::{
    suds_velocity, Dimensions, ShapeState, SudsSystem, Swimmer, SwimmerParams, Variant,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `offset + amplitude · sin(freq · (t − lag))` for one actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWave {
    pub offset: f64,
    pub amplitude: f64,
    /// Time lag in seconds.
    #[serde(default)]
    pub lag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSpec {
    /// Angular frequency `f`, rad/s.
    pub freq: f64,
    pub joints: Vec<JointWave>,
}

impl GaitSpec {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.freq
    }

    pub fn validate(&self, n_a: usize) -> Result<()> {
        if !(self.freq > 0.0) || !self.freq.is_finite() {
            return Err(SudsError::Config("gait frequency must be > 0".into()));
        }
        if self.joints.len() != n_a {
            return Err(SudsError::Config(format!(
                "gait drives {} joints but the system has {n_a} actuated coordinates",
                self.joints.len()
            )));
        }
        Ok(())
    }

    /// Drive used for each preset system at 1 Hz.
    pub fn preset(variant: Variant) -> Self {
        let freq = 2.0 * PI;
        let wave = |offset, amplitude, lag| JointWave {
            offset,
            amplitude,
            lag,
        };
        let joints = match variant {
            Variant::LinearPassive => vec![wave(1.0, -0.5, 0.0)],
            Variant::Pushmepullyou => vec![wave(PI / 2.0, PI / 3.0, 0.0)],
            Variant::Purcell3 => vec![wave(0.0, 1.4, 0.0)],
            Variant::Purcell9 => (1..=4)
                .map(|i| wave(0.0, 1.4, i as f64 * PI / 4.0))
                .collect(),
        };
        Self { freq, joints }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.joints
            .iter()
            .map(|j| j.amplitude.abs())
            .fold(0.0, f64::max)
    }
}

/// Reference actuated shape and its analytic rate at time `t`.
pub fn reference(spec: &GaitSpec, t: f64) -> (DVector<f64>, DVector<f64>) {
    let n = spec.joints.len();
    let mut r = DVector::zeros(n);
    let mut rdot = DVector::zeros(n);
    for (i, j) in spec.joints.iter().enumerate() {
        let (s, c) = (spec.freq * (t - j.lag)).sin_cos();
        r[i] = j.offset + j.amplitude * s;
        rdot[i] = j.amplitude * spec.freq * c;
    }
    (r, rdot)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Attraction rate λ toward the reference, 1/s.
    pub attraction_rate: f64,
    /// Diffusion σ, units/√s.
    pub diffusion: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const DEFAULT_RATE: f64 = 5.0;

    /// λ = 5/s with σ set so the stationary deviation std is `fraction` of
    /// the gait amplitude.
    pub fn for_gait(gait: &GaitSpec, fraction: f64, seed: u64) -> Self {
        let lambda = Self::DEFAULT_RATE;
        let std = fraction * gait.max_amplitude();
        Self {
            attraction_rate: lambda,
            diffusion: std * (2.0 * lambda).sqrt(),
            seed,
        }
    }

    pub fn stationary_std(&self) -> f64 {
        self.diffusion / (2.0 * self.attraction_rate).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.attraction_rate > 0.0) || !(self.diffusion >= 0.0) {
            return Err(SudsError::Config("noise needs λ > 0 and σ ≥ 0".into()));
        }
        Ok(())
    }
}

/// One Euler–Maruyama step of `dδ = −λ δ dt + σ dW`.
pub fn ou_step<R: Rng + ?Sized>(
    delta: &DVector<f64>,
    dt: f64,
    noise: &NoiseSpec,
    rng: &mut R,
) -> DVector<f64> {
    let decay = 1.0 - noise.attraction_rate * dt;
    let kick = noise.diffusion * dt.sqrt();
    DVector::from_iterator(
        delta.len(),
        delta.iter().map(|d| {
            let w: f64 = rng.sample(StandardNormal);
            d * decay + kick * w
        }),
    )
}

/// Per-trial integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub n_cycles: usize,
    pub samples_per_cycle: usize,
    /// Cycles simulated and discarded before recording starts.
    pub warmup_cycles: usize,
    /// Pose at the first recorded sample.
    pub initial_pose: GroupElement,
    /// RNG stream, so train and test trials from one seed differ.
    pub stream: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            n_cycles: 30,
            samples_per_cycle: 100,
            warmup_cycles: 2,
            initial_pose: GroupElement::identity(),
            stream: 0,
        }
    }
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub g: GroupElement,
    pub ghat: BodyVelocity,
    pub r: DVector<f64>,
    pub rdot: DVector<f64>,
    /// Actuated reference and its rate.
    pub r_ref: DVector<f64>,
    pub rdot_ref: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub system: SwimmerParams,
    pub gait: GaitSpec,
    pub noise: NoiseSpec,
    pub dims: Dimensions,
    pub actuated: Vec<usize>,
    pub passive: Vec<usize>,
    pub dt: f64,
    pub samples_per_cycle: usize,
    pub n_cycles: usize,
    pub warmup_cycles: usize,
    pub stream: u64,
    /// How recorded ṙ_a relates to the drive.
    pub velocity_convention: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub samples: Vec<Sample>,
}

pub const VELOCITY_CONVENTION: &str =
    "rdot_a = rdot_ref - lambda * delta_a (OU drift only; the Wiener increment enters through r_a)";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn shapes(&self) -> Vec<DVector<f64>> {
        self.samples.iter().map(|s| s.r.clone()).collect()
    }

    /// Mean world-frame x advance per cycle over the recording.
    pub fn displacement_per_cycle(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) if self.samples.len() > 1 => {
                let cycles = (self.samples.len() - 1) as f64 / self.meta.samples_per_cycle as f64;
                (b.g.x - a.g.x) / cycles
            }
            _ => 0.0,
        }
    }

    /// Standard deviation of the actuated deviation from the reference.
    pub fn deviation_std(&self) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for s in &self.samples {
            for (k, &i) in self.meta.actuated.iter().enumerate() {
                let d = s.r[i] - s.r_ref[k];
                acc += d * d;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            (acc / count as f64).sqrt()
        }
    }
}

struct Stepper<'a, S: SudsSystem + ?Sized> {
    system: &'a S,
    gait: &'a GaitSpec,
    lambda: f64,
}

impl<S: SudsSystem + ?Sized> Stepper<'_, S> {
    /// Drive at time `t` with the deviation frozen at `delta`.
    fn drive(
        &self,
        t: f64,
        delta: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let (r_ref, rdot_ref) = reference(self.gait, t);
        let r_a = &r_ref + delta;
        let rdot_a = &rdot_ref - delta * self.lambda;
        (r_a, rdot_a, r_ref, rdot_ref)
    }

    fn velocity(
        &self,
        t: f64,
        delta: &DVector<f64>,
        r_p: &DVector<f64>,
    ) -> Result<(BodyVelocity, DVector<f64>)> {
        let (r_a, rdot_a, _, _) = self.drive(t, delta);
        let st = ShapeState::at(r_a, r_p.clone());
        let sol = suds_velocity(self.system, &st, &rdot_a)?;
        Ok((sol.ghat, sol.rdot_p))
    }

    /// Advances `(g, r_p)` over `[t, t + h]`, given the stage-1 velocity.
    fn step(
        &self,
        t: f64,
        h: f64,
        delta: &DVector<f64>,
        g: &GroupElement,
        r_p: &DVector<f64>,
        k1: (BodyVelocity, DVector<f64>),
    ) -> Result<(GroupElement, DVector<f64>)> {
        let (f1, p1) = k1;
        let (f2, p2) = self.velocity(t + 0.5 * h, delta, &(r_p + &p1 * (0.5 * h)))?;
        let (f3, p3) = self.velocity(t + 0.5 * h, delta, &(r_p + &p2 * (0.5 * h)))?;
        let (f4, p4) = self.velocity(t + h, delta, &(r_p + &p3 * h))?;
        let r_next = r_p + (&p1 + &p2 * 2.0 + &p3 * 2.0 + &p4) * (h / 6.0);
        // commutator-free order-4 update, earlier-weighted factor first
        let first =
            f1.scaled(0.25) + f2.scaled(1.0 / 6.0) + f3.scaled(1.0 / 6.0) + f4.scaled(-1.0 / 12.0);
        let second =
            f1.scaled(-1.0 / 12.0) + f2.scaled(1.0 / 6.0) + f3.scaled(1.0 / 6.0) + f4.scaled(0.25);
        let g_next = g.exp_step(&first, h).exp_step(&second, h);
        Ok((g_next, r_next))
    }
}

/// Runs one trial of any [`SudsSystem`]; `meta` is attached verbatim.
pub fn simulate_system<S: SudsSystem + ?Sized>(
    system: &S,
    gait: &GaitSpec,
    noise: &NoiseSpec,
    cfg: &TrialConfig,
    meta_system: SwimmerParams,
) -> Result<Trajectory> {
    let dims = system.dims();
    gait.validate(dims.n_a)?;
    noise.validate()?;
    if cfg.n_cycles == 0 || cfg.samples_per_cycle == 0 {
        return Err(SudsError::Config(
            "cycle and sample counts must be positive".into(),
        ));
    }
    let partition = system.partition().clone();
    let dt = gait.period() / cfg.samples_per_cycle as f64;
    let stepper = Stepper {
        system,
        gait,
        lambda: noise.attraction_rate,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(cfg.stream);

    let mut r_p = DVector::from_column_slice(&system.passive_elements().rest);
    let mut delta = DVector::zeros(dims.n_a);
    let mut g = GroupElement::identity();
    let warm = cfg.warmup_cycles * cfg.samples_per_cycle;
    let total = warm + cfg.n_cycles * cfg.samples_per_cycle;
    let mut samples = Vec::with_capacity(total - warm);

    for step in 0..total {
        let t = step as f64 * dt;
        if step == warm {
            g = cfg.initial_pose;
        }
        let (r_a, rdot_a, r_ref, rdot_ref) = stepper.drive(t, &delta);
        let st = ShapeState::at(r_a.clone(), r_p.clone());
        let sol = suds_velocity(system, &st, &rdot_a)?;
        if step >= warm {
            samples.push(Sample {
                t,
                g,
                ghat: sol.ghat,
                r: partition.assemble(&r_a, &r_p),
                rdot: partition.assemble(&rdot_a, &sol.rdot_p),
                r_ref,
                rdot_ref,
            });
        }
        if step + 1 < total {
            let (g_next, r_next) = stepper.step(t, dt, &delta, &g, &r_p, (sol.ghat, sol.rdot_p))?;
            g = g_next;
            r_p = r_next;
            delta = ou_step(&delta, dt, noise, &mut rng);
        }
    }

    Ok(Trajectory {
        meta: TrajectoryMeta {
            system: meta_system,
            gait: gait.clone(),
            noise: *noise,
            dims,
            actuated: partition.actuated.clone(),
            passive: partition.passive.clone(),
            dt,
            samples_per_cycle: cfg.samples_per_cycle,
            n_cycles: cfg.n_cycles,
            warmup_cycles: cfg.warmup_cycles,
            stream: cfg.stream,
            velocity_convention: VELOCITY_CONVENTION.into(),
        },
        samples,
    })
}

/// Builds the swimmer from `params` and runs one trial.
pub fn simulate_trial(
    params: &SwimmerParams,
    gait: &GaitSpec,
    noise: &NoiseSpec,
    cfg: &TrialConfig,
) -> Result<Trajectory> {
    let system = Swimmer::from_params(params)?;
    simulate_system(&system, gait, noise, cfg, params.clone())
}

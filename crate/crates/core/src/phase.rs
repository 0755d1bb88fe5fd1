//! Phase estimation, the Fourier nominal gait, and deviation coordinates.
//!
//! The phase estimator works in two steps. The protophase is the polar angle
//! of the shape series projected onto its first two principal components.
//! The two projections are scaled to unit variance first, so an elongated
//! loop still yields a nearly uniform angle. The protophase is then
//! uniformized by the Fourier series of its own empirical cumulative
//! distribution, which makes the phase advance uniformly in time on
//! average. The projection and the transform are kept in a [`PhaseMap`], so
//! held-out trials are phased in the same coordinates as the training trial.

use crate::error::{Result, SudsError};
use crate::simulate::Trajectory;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Harmonics of the empirical protophase distribution kept when
/// uniformizing.
pub const UNIFORMIZE_ORDER: usize = 16;
pub const DEFAULT_FOURIER_ORDER: usize = 7;
pub const MIN_CYCLES: usize = 5;
/// Condition-number ceiling for the Fourier design matrix.
pub const MAX_CONDITION: f64 = 1e8;

/// Projection and uniformizing transform that turn shapes into phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub mean: Vec<f64>,
    pub axis_1: Vec<f64>,
    pub axis_2: Vec<f64>,
    /// +1 if the raw protophase already increases, −1 if it was flipped.
    pub orientation: f64,
    /// `S_n = ⟨e^{−inψ}⟩` for n = 1..=order, as (re, im).
    pub harmonics: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    /// Unwrapped phase per sample, radians.
    pub phi: Vec<f64>,
    /// Least-squares mean rate dφ/dt, rad/s.
    pub rate: f64,
    pub map: PhaseMap,
}

impl PhaseSeries {
    /// Total phase advance in cycles, counting the final sample interval.
    pub fn winding(&self) -> f64 {
        let n = self.phi.len();
        if n < 2 {
            return 0.0;
        }
        let span = self.phi[n - 1] - self.phi[0];
        span / (2.0 * PI) * n as f64 / (n - 1) as f64
    }
}

fn unwrap(angles: &mut [f64]) {
    let mut shift = 0.0;
    for i in 1..angles.len() {
        let raw = angles[i] + shift;
        let jump = raw - angles[i - 1];
        if jump > PI {
            shift -= 2.0 * PI * ((jump + PI) / (2.0 * PI)).floor();
        } else if jump < -PI {
            shift += 2.0 * PI * ((-jump + PI) / (2.0 * PI)).floor();
        }
        angles[i] += shift;
    }
}

fn slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in t.iter().zip(y) {
        num += (a - tm) * (b - ym);
        den += (a - tm) * (a - tm);
    }
    num / den
}

impl PhaseMap {
    fn protophase(&self, shapes: &[DVector<f64>]) -> Result<Vec<f64>> {
        let n = self.mean.len();
        let mut psi = Vec::with_capacity(shapes.len());
        for r in shapes {
            if r.len() != n {
                return Err(SudsError::DimensionMismatch(format!(
                    "phase map expects {n} shape coordinates, got {}",
                    r.len()
                )));
            }
            let (mut p1, mut p2) = (0.0, 0.0);
            for i in 0..n {
                let d = r[i] - self.mean[i];
                p1 += d * self.axis_1[i];
                p2 += d * self.axis_2[i];
            }
            psi.push(p2.atan2(p1));
        }
        unwrap(&mut psi);
        if self.orientation < 0.0 {
            psi.iter_mut().for_each(|p| *p = -*p);
        }
        Ok(psi)
    }

    /// φ = ψ + Σₙ 2 Re[Sₙ (e^{inψ} − 1) / (in)].
    pub fn uniformize(&self, psi: f64) -> f64 {
        let mut phi = psi;
        for (k, s) in self.harmonics.iter().enumerate() {
            let n = (k + 1) as f64;
            let (sn, cn) = (n * psi).sin_cos();
            let re = s[0] * sn + s[1] * (cn - 1.0);
            phi += 2.0 * re / n;
        }
        phi
    }

    /// Phases of new shapes in this map's coordinates.
    pub fn apply(&self, shapes: &[DVector<f64>], times: &[f64]) -> Result<PhaseSeries> {
        if shapes.len() != times.len() || shapes.len() < 2 {
            return Err(SudsError::DimensionMismatch(
                "phase needs ≥ 2 samples with one time stamp each".into(),
            ));
        }
        let phi: Vec<f64> = self
            .protophase(shapes)?
            .into_iter()
            .map(|p| self.uniformize(p))
            .collect();
        let rate = slope(times, &phi);
        Ok(PhaseSeries {
            phi,
            rate,
            map: self.clone(),
        })
    }
}

/// Estimates phase from a shape series sampled at `times`.
pub fn estimate_phase(shapes: &[DVector<f64>], times: &[f64]) -> Result<PhaseSeries> {
    estimate_phase_with_order(shapes, times, UNIFORMIZE_ORDER)
}

pub fn estimate_phase_with_order(
    shapes: &[DVector<f64>],
    times: &[f64],
    order: usize,
) -> Result<PhaseSeries> {
    if shapes.len() != times.len() || shapes.len() < 3 {
        return Err(SudsError::DimensionMismatch(
            "phase needs ≥ 3 samples with one time stamp each".into(),
        ));
    }
    let n = shapes[0].len();
    if n < 2 {
        return Err(SudsError::DegenerateOscillation {
            first: 0.0,
            second: 0.0,
        });
    }
    let count = shapes.len() as f64;
    let mut mean = DVector::zeros(n);
    for r in shapes {
        mean += r;
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for r in shapes {
        let d = r - &mean;
        cov.ger(1.0 / count, &d, &d, 1.0);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order_idx[0]], eig.eigenvalues[order_idx[1]]);
    if !(l1 > 0.0) || !(l2 >= 1e-10 * l1) {
        return Err(SudsError::DegenerateOscillation {
            first: l1,
            second: l2,
        });
    }
    // unit-variance projections: axis k scaled by 1/√λ_k
    let axis = |k: usize| {
        let scale = 1.0 / eig.eigenvalues[order_idx[k]].sqrt();
        let v: Vec<f64> = eig
            .eigenvectors
            .column(order_idx[k])
            .iter()
            .map(|x| x * scale)
            .collect();
        // deterministic sign: largest-magnitude entry positive
        let big = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if big < 0.0 {
            v.into_iter().map(|x| -x).collect()
        } else {
            v
        }
    };
    let mut map = PhaseMap {
        mean: mean.iter().copied().collect(),
        axis_1: axis(0),
        axis_2: axis(1),
        orientation: 1.0,
        harmonics: Vec::new(),
    };
    let mut psi = map.protophase(shapes)?;
    if psi[psi.len() - 1] < psi[0] {
        map.orientation = -1.0;
        psi.iter_mut().for_each(|p| *p = -*p);
    }
    let cycles = (psi[psi.len() - 1] - psi[0]) / (2.0 * PI);
    if cycles < MIN_CYCLES as f64 - 0.5 {
        return Err(SudsError::TooFewCycles {
            cycles,
            required: MIN_CYCLES,
        });
    }
    map.harmonics = (1..=order)
        .map(|k| {
            let kf = k as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for p in &psi {
                let (s, c) = (kf * p).sin_cos();
                re += c;
                im -= s;
            }
            [re / count, im / count]
        })
        .collect();
    let phi: Vec<f64> = psi.iter().map(|&p| map.uniformize(p)).collect();
    let rate = slope(times, &phi);
    Ok(PhaseSeries { phi, rate, map })
}

/// Fourier series in φ for several outputs:
/// `coeffs[j] = [a₀, a₁, b₁, …, a_K, b_K]` for output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    pub order: usize,
    pub coeffs: Vec<Vec<f64>>,
}

fn fourier_basis(order: usize, phi: f64, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=order {
        let (s, c) = (k as f64 * phi).sin_cos();
        out[2 * k - 1] = c;
        out[2 * k] = s;
    }
}

fn fourier_basis_deriv(order: usize, phi: f64, out: &mut [f64]) {
    out[0] = 0.0;
    for k in 1..=order {
        let kf = k as f64;
        let (s, c) = (kf * phi).sin_cos();
        out[2 * k - 1] = -kf * s;
        out[2 * k] = kf * c;
    }
}

impl FourierTable {
    pub fn outputs(&self) -> usize {
        self.coeffs.len()
    }

    fn apply(&self, basis: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs
                .iter()
                .map(|c| c.iter().zip(basis).map(|(a, b)| a * b).sum()),
        )
    }

    pub fn eval(&self, phi: f64) -> DVector<f64> {
        let mut basis = vec![0.0; 2 * self.order + 1];
        fourier_basis(self.order, phi, &mut basis);
        self.apply(&basis)
    }

    /// Derivative with respect to φ.
    pub fn deriv(&self, phi: f64) -> DVector<f64> {
        let mut basis = vec![0.0; 2 * self.order + 1];
        fourier_basis_deriv(self.order, phi, &mut basis);
        self.apply(&basis)
    }
}

/// Least-squares Fourier fit of each column of `values` against `phi`.
/// Returns the table and per-output residual RMS.
pub fn fit_fourier(
    phi: &[f64],
    values: &DMatrix<f64>,
    order: usize,
) -> Result<(FourierTable, Vec<f64>)> {
    let m = phi.len();
    let p = 2 * order + 1;
    if values.nrows() != m {
        return Err(SudsError::DimensionMismatch(
            "one row of values per phase sample".into(),
        ));
    }
    if m < p {
        return Err(SudsError::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let mut x = DMatrix::zeros(m, p);
    let mut row = vec![0.0; p];
    for (i, &ph) in phi.iter().enumerate() {
        fourier_basis(order, ph, &mut row);
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(SudsError::IllConditioned { condition });
    }
    let beta = svd
        .solve(values, 0.0)
        .map_err(|e| SudsError::IllConditioned {
            condition: if e.is_empty() {
                condition
            } else {
                f64::INFINITY
            },
        })?;
    let resid = values - &x * &beta;
    let rms = (0..values.ncols())
        .map(|j| (resid.column(j).norm_squared() / m as f64).sqrt())
        .collect();
    let coeffs = (0..values.ncols())
        .map(|j| beta.column(j).iter().copied().collect())
        .collect();
    Ok((FourierTable { order, coeffs }, rms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalResiduals {
    pub shape: Vec<f64>,
    pub ghat: Vec<f64>,
    pub rdot_p: Vec<f64>,
}

/// θ(φ) plus the phase-averaged ĝ and ṙ_p, anchored to a phase map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalGait {
    pub order: usize,
    /// Base frequency, rad/s.
    pub frequency: f64,
    pub group_dim: usize,
    pub actuated: Vec<usize>,
    pub passive: Vec<usize>,
    pub shape: FourierTable,
    pub ghat: FourierTable,
    pub rdot_p: FourierTable,
    pub residual_rms: NominalResiduals,
    pub phase_map: PhaseMap,
}

impl NominalGait {
    pub fn n(&self) -> usize {
        self.shape.outputs()
    }

    pub fn theta(&self, phi: f64) -> DVector<f64> {
        self.shape.eval(phi)
    }

    /// dθ/dφ.
    pub fn theta_prime(&self, phi: f64) -> DVector<f64> {
        self.shape.deriv(phi)
    }

    /// θ̇ = (dθ/dφ) · frequency.
    pub fn theta_dot(&self, phi: f64) -> DVector<f64> {
        self.shape.deriv(phi) * self.frequency
    }

    /// Phase-averaged (ĝ, ṙ_p) stacked.
    pub fn template(&self, phi: f64) -> DVector<f64> {
        let g = self.ghat.eval(phi);
        let p = self.rdot_p.eval(phi);
        DVector::from_iterator(g.len() + p.len(), g.iter().chain(p.iter()).copied())
    }

    /// Phases of another trajectory in this gait's phase coordinates.
    pub fn phase_of(&self, traj: &Trajectory) -> Result<PhaseSeries> {
        self.phase_map.apply(&traj.shapes(), &traj.times())
    }
}

/// Fits θ(φ), ĝ_T(φ), ṙ_T(φ) at Fourier order `order`.
pub fn fit_nominal(traj: &Trajectory, phases: &PhaseSeries, order: usize) -> Result<NominalGait> {
    if !(1..=15).contains(&order) {
        return Err(SudsError::Config(format!(
            "Fourier order must be 1–15, got {order}"
        )));
    }
    let m = traj.len();
    if phases.phi.len() != m {
        return Err(SudsError::DimensionMismatch(format!(
            "{} phases for {m} samples",
            phases.phi.len()
        )));
    }
    let span = (phases.phi[m - 1] - phases.phi[0]) / (2.0 * PI);
    if span < MIN_CYCLES as f64 - 0.5 {
        return Err(SudsError::TooFewCycles {
            cycles: span,
            required: MIN_CYCLES,
        });
    }
    let dims = traj.meta.dims;
    let passive = &traj.meta.passive;
    let shape = DMatrix::from_fn(m, dims.n, |i, j| traj.samples[i].r[j]);
    let ghat = DMatrix::from_fn(m, dims.group_dim, |i, j| traj.samples[i].ghat.to_array()[j]);
    let rdot_p = DMatrix::from_fn(m, dims.n_p, |i, j| traj.samples[i].rdot[passive[j]]);
    let (shape_t, shape_rms) = fit_fourier(&phases.phi, &shape, order)?;
    let (ghat_t, ghat_rms) = fit_fourier(&phases.phi, &ghat, order)?;
    let (rdot_t, rdot_rms) = fit_fourier(&phases.phi, &rdot_p, order)?;
    Ok(NominalGait {
        order,
        frequency: phases.rate,
        group_dim: dims.group_dim,
        actuated: traj.meta.actuated.clone(),
        passive: passive.clone(),
        shape: shape_t,
        ghat: ghat_t,
        rdot_p: rdot_t,
        residual_rms: NominalResiduals {
            shape: shape_rms,
            ghat: ghat_rms,
            rdot_p: rdot_rms,
        },
        phase_map: phases.map.clone(),
    })
}

/// One regression sample in deviation coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSample {
    pub phi: f64,
    pub delta: DVector<f64>,
    pub delta_dot: DVector<f64>,
    pub delta_dot_a: DVector<f64>,
    /// Stacked targets (ĝ, ṙ_p).
    pub target: DVector<f64>,
}

/// A set of deviation samples with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSet {
    pub group_dim: usize,
    pub n: usize,
    pub n_a: usize,
    pub samples: Vec<DeviationSample>,
}

impl DeviationSet {
    pub fn n_outputs(&self) -> usize {
        self.target_len()
    }

    pub fn target_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.target.len())
    }

    pub fn n_p(&self) -> usize {
        self.n - self.n_a
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// δ = r − θ(φ), δ̇ = ṙ − θ̇(φ), with targets copied from the trajectory.
pub fn deviations(
    traj: &Trajectory,
    nominal: &NominalGait,
    phases: &PhaseSeries,
) -> Result<DeviationSet> {
    let dims = traj.meta.dims;
    if phases.phi.len() != traj.len() {
        return Err(SudsError::DimensionMismatch(format!(
            "{} phases for {} samples",
            phases.phi.len(),
            traj.len()
        )));
    }
    if nominal.n() != dims.n
        || nominal.group_dim != dims.group_dim
        || nominal.actuated != traj.meta.actuated
    {
        return Err(SudsError::DimensionMismatch(format!(
            "nominal gait has n = {}, group dim {}; trajectory has n = {}, group dim {}",
            nominal.n(),
            nominal.group_dim,
            dims.n,
            dims.group_dim
        )));
    }
    let act = &traj.meta.actuated;
    let pas = &traj.meta.passive;
    let samples = traj
        .samples
        .iter()
        .zip(&phases.phi)
        .map(|(s, &phi)| {
            let delta = &s.r - nominal.theta(phi);
            let delta_dot = &s.rdot - nominal.theta_dot(phi);
            let delta_dot_a = DVector::from_iterator(act.len(), act.iter().map(|&i| delta_dot[i]));
            let g = s.ghat.to_array();
            let target = DVector::from_iterator(
                dims.group_dim + pas.len(),
                g[..dims.group_dim]
                    .iter()
                    .copied()
                    .chain(pas.iter().map(|&i| s.rdot[i])),
            );
            DeviationSample {
                phi,
                delta,
                delta_dot,
                delta_dot_a,
                target,
            }
        })
        .collect();
    Ok(DeviationSet {
        group_dim: dims.group_dim,
        n: dims.n,
        n_a: dims.n_a,
        samples,
    })
}

/// Velocities by centered differences, one-sided second order at the ends.
/// For ingested data that carries no velocity channel.
pub fn finite_difference_velocities(times: &[f64], values: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = values.len();
    if m < 3 {
        return vec![DVector::zeros(values.first().map_or(0, |v| v.len())); m];
    }
    (0..m)
        .map(|i| {
            if i == 0 {
                let h = times[1] - times[0];
                (&values[1] * 4.0 - &values[0] * 3.0 - &values[2]) / (2.0 * h)
            } else if i == m - 1 {
                let h = times[m - 1] - times[m - 2];
                (&values[m - 1] * 3.0 - &values[m - 2] * 4.0 + &values[m - 3]) / (2.0 * h)
            } else {
                (&values[i + 1] - &values[i - 1]) / (times[i + 1] - times[i - 1])
            }
        })
        .collect()
}

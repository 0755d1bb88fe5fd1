//! Per-phase affine regression of body and passive-shape velocity.
//!
//! At each of `N` phase-bin centres the model is
//! `y ≈ C + C_r δ + B δ̇_a + B_r (δ ⊗ δ̇_a)` with `y = (ĝ, ṙ_p)`, fitted by
//! weighted ridge least squares with a wrapped-Gaussian phase kernel.
//! When a nominal gait is supplied, the phase-averaged template is
//! subtracted before the kernel fit and added back on prediction, so the
//! kernel only smooths the deviation response, not the cycle itself.

use crate::error::{Result, SudsError};
use crate::geometry::wrap_angle;
use crate::phase::{DeviationSample, DeviationSet, NominalGait};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `1 + n + n_a + n·n_a`.
pub fn feature_count(n: usize, n_a: usize) -> usize {
    1 + n + n_a + n * n_a
}

/// Writes `[1, δ, δ̇_a, vec(δ ⊗ δ̇_a)]` (row-major in (δ, δ̇_a)) into `out`.
pub fn fill_regressors(delta: &DVector<f64>, delta_dot_a: &DVector<f64>, out: &mut [f64]) {
    let (n, n_a) = (delta.len(), delta_dot_a.len());
    debug_assert_eq!(out.len(), feature_count(n, n_a));
    out[0] = 1.0;
    out[1..1 + n].copy_from_slice(delta.as_slice());
    out[1 + n..1 + n + n_a].copy_from_slice(delta_dot_a.as_slice());
    let base = 1 + n + n_a;
    for i in 0..n {
        for j in 0..n_a {
            out[base + i * n_a + j] = delta[i] * delta_dot_a[j];
        }
    }
}

pub fn build_regressors(sample: &DeviationSample) -> DVector<f64> {
    let mut out = vec![0.0; feature_count(sample.delta.len(), sample.delta_dot_a.len())];
    fill_regressors(&sample.delta, &sample.delta_dot_a, &mut out);
    DVector::from_vec(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub bins: usize,
    /// Kernel bandwidth h, radians.
    pub bandwidth: f64,
    /// Ridge ε added to the weighted normal matrix `XᵀWX`.
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bins: 64,
            bandwidth: 2.0 * PI / 16.0,
            ridge: 1e-8,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 || !(self.bandwidth > 0.0) || !(self.ridge >= 0.0) {
            return Err(SudsError::Config(
                "fit needs ≥ 2 bins, bandwidth > 0 and ridge ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficient blocks at one bin; rows are outputs `(ĝ, ṙ_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCoefficients {
    pub c: Vec<f64>,
    pub c_r: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub b_r: Vec<Vec<f64>>,
}

impl BinCoefficients {
    fn from_matrix(w: &DMatrix<f64>, n: usize, n_a: usize) -> Self {
        let rows = |start: usize, len: usize| -> Vec<Vec<f64>> {
            (0..w.nrows())
                .map(|o| (start..start + len).map(|k| w[(o, k)]).collect())
                .collect()
        };
        Self {
            c: w.column(0).iter().copied().collect(),
            c_r: rows(1, n),
            b: rows(1 + n, n_a),
            b_r: rows(1 + n + n_a, n * n_a),
        }
    }

    /// Outputs × features.
    pub fn matrix(&self) -> DMatrix<f64> {
        let q = self.c.len();
        let n = self.c_r.first().map_or(0, Vec::len);
        let n_a = self.b.first().map_or(0, Vec::len);
        let p = feature_count(n, n_a);
        DMatrix::from_fn(q, p, |o, k| {
            if k == 0 {
                self.c[o]
            } else if k <= n {
                self.c_r[o][k - 1]
            } else if k <= n + n_a {
                self.b[o][k - 1 - n]
            } else {
                self.b_r[o][k - 1 - n - n_a]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDiagnostics {
    pub weight_mass: f64,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub effective_samples: f64,
    pub residual_rms: Vec<f64>,
    /// Largest over smallest eigenvalue of the weighted normal matrix.
    pub condition: f64,
    pub rank_deficient: bool,
    /// Feature columns dominating the poorly determined directions.
    pub weak_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SudsModel {
    pub group_dim: usize,
    pub n: usize,
    pub n_a: usize,
    pub n_features: usize,
    pub config: FitConfig,
    /// Bin centres `2π b / N`.
    pub centers: Vec<f64>,
    pub coefficients: Vec<BinCoefficients>,
    pub diagnostics: Vec<BinDiagnostics>,
    /// Template the kernel fit was taken relative to, if any.
    pub nominal: Option<NominalGait>,
}

impl SudsModel {
    pub fn n_outputs(&self) -> usize {
        self.group_dim + self.n - self.n_a
    }

    pub fn bins(&self) -> usize {
        self.centers.len()
    }

    pub fn rank_deficient_bins(&self) -> Vec<usize> {
        self.diagnostics
            .iter()
            .enumerate()
            .filter(|(_, d)| d.rank_deficient)
            .map(|(i, _)| i)
            .collect()
    }

    fn check_dims(&self, delta: &DVector<f64>, delta_dot_a: &DVector<f64>) -> Result<()> {
        if delta.len() != self.n || delta_dot_a.len() != self.n_a {
            return Err(SudsError::DimensionMismatch(format!(
                "model expects δ of length {} and δ̇_a of length {}, got {} and {}",
                self.n,
                self.n_a,
                delta.len(),
                delta_dot_a.len()
            )));
        }
        Ok(())
    }

    /// Bins bracketing φ and the interpolation weight of the upper one.
    fn bracket(&self, phi: f64) -> (usize, usize, f64) {
        let nb = self.bins();
        let spacing = 2.0 * PI / nb as f64;
        let u = phi.rem_euclid(2.0 * PI) / spacing;
        let lo = (u.floor() as usize) % nb;
        (lo, (lo + 1) % nb, u - u.floor())
    }

    /// Offset the bin stores beyond the template.
    fn baseline(&self, bin: usize) -> Option<DVector<f64>> {
        self.nominal
            .as_ref()
            .map(|nom| nom.template(self.centers[bin]))
    }

    /// `(ĝ_D, ṙ_D)` stacked.
    pub fn predict(
        &self,
        phi: f64,
        delta: &DVector<f64>,
        delta_dot_a: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        self.check_dims(delta, delta_dot_a)?;
        let mut x = vec![0.0; self.n_features];
        fill_regressors(delta, delta_dot_a, &mut x);
        let x = DVector::from_vec(x);
        let (lo, hi, t) = self.bracket(phi);
        let at = |bin: usize| {
            let mut y = self.coefficients[bin].matrix() * &x;
            if let Some(base) = self.baseline(bin) {
                y -= base;
            }
            y
        };
        let mut y = at(lo) * (1.0 - t) + at(hi) * t;
        if let Some(nom) = &self.nominal {
            y += nom.template(phi);
        }
        Ok(y)
    }

    /// Coefficient blocks at φ, periodic-linearly interpolated.
    pub fn coefficients_at(&self, phi: f64) -> DMatrix<f64> {
        let (lo, hi, t) = self.bracket(phi);
        self.coefficients[lo].matrix() * (1.0 - t) + self.coefficients[hi].matrix() * t
    }
}

/// Fits the per-bin regression. With `nominal`, the fit is taken relative
/// to its template and the gait is attached to the model.
pub fn fit(
    data: &DeviationSet,
    cfg: &FitConfig,
    nominal: Option<&NominalGait>,
) -> Result<SudsModel> {
    cfg.validate()?;
    let (n, n_a) = (data.n, data.n_a);
    let q = data.group_dim + n - n_a;
    let p = feature_count(n, n_a);
    let m = data.len();
    if m == 0 {
        return Err(SudsError::TooFewCycles {
            cycles: 0.0,
            required: 5,
        });
    }
    if let Some(nom) = nominal {
        if nom.n() != n || nom.group_dim != data.group_dim {
            return Err(SudsError::DimensionMismatch(
                "nominal gait does not match the dataset layout".into(),
            ));
        }
    }
    let (lo, hi) = data
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
            (a.min(s.phi), b.max(s.phi))
        });
    let cycles = (hi - lo) / (2.0 * PI);
    if cycles < 4.5 {
        return Err(SudsError::TooFewCycles {
            cycles,
            required: 5,
        });
    }

    let mut x = DMatrix::zeros(m, p);
    let mut y = DMatrix::zeros(m, q);
    let mut row = vec![0.0; p];
    for (i, s) in data.samples.iter().enumerate() {
        if s.delta.len() != n || s.delta_dot_a.len() != n_a || s.target.len() != q {
            return Err(SudsError::DimensionMismatch(format!(
                "sample {i} has the wrong layout"
            )));
        }
        fill_regressors(&s.delta, &s.delta_dot_a, &mut row);
        for k in 0..p {
            x[(i, k)] = row[k];
        }
        let base = nominal.map(|nom| nom.template(s.phi));
        for o in 0..q {
            y[(i, o)] = s.target[o] - base.as_ref().map_or(0.0, |b| b[o]);
        }
    }

    let nb = cfg.bins;
    let centers: Vec<f64> = (0..nb).map(|b| 2.0 * PI * b as f64 / nb as f64).collect();
    let two_h2 = 2.0 * cfg.bandwidth * cfg.bandwidth;
    let mut coefficients = Vec::with_capacity(nb);
    let mut diagnostics = Vec::with_capacity(nb);
    let mut starved = Vec::new();

    for (b, &center) in centers.iter().enumerate() {
        let w: Vec<f64> = data
            .samples
            .iter()
            .map(|s| {
                let d = wrap_angle(s.phi - center);
                (-d * d / two_h2).exp()
            })
            .collect();
        let mass: f64 = w.iter().sum();
        let mass2: f64 = w.iter().map(|v| v * v).sum();
        let n_eff = if mass2 > 0.0 {
            mass * mass / mass2
        } else {
            0.0
        };
        // kernel weights are ≤ 1, so the mass bounds n_eff from below
        if !(mass.min(n_eff) >= 3.0 * p as f64) {
            starved.push(b);
            coefficients.push(BinCoefficients::from_matrix(&DMatrix::zeros(q, p), n, n_a));
            diagnostics.push(BinDiagnostics {
                weight_mass: mass,
                effective_samples: n_eff,
                residual_rms: vec![f64::NAN; q],
                condition: f64::INFINITY,
                rank_deficient: true,
                weak_columns: (0..p).collect(),
            });
            continue;
        }
        let mut xw = x.clone();
        for (i, wi) in w.iter().enumerate() {
            xw.row_mut(i).scale_mut(*wi);
        }
        let g = x.tr_mul(&xw);
        let g = (&g + g.transpose()) * 0.5;
        let r = xw.tr_mul(&y);
        let eig = SymmetricEigen::new(g);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        let mu = cfg.ridge;
        let proj = eig.eigenvectors.tr_mul(&r);
        let mut scaled = proj.clone();
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            scaled.row_mut(k).scale_mut(1.0 / (lam.max(0.0) + mu));
        }
        let beta = &eig.eigenvectors * scaled; // p × q

        let floor = 1e3 * cfg.ridge * lmax;
        let mut loading = vec![0.0; p];
        let mut deficient = false;
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            if *lam < floor {
                deficient = true;
                for (j, l) in loading.iter_mut().enumerate() {
                    *l += eig.eigenvectors[(j, k)].powi(2);
                }
            }
        }
        let weak_columns = (0..p).filter(|&j| loading[j] > 0.1).collect();

        let resid = &y - &x * &beta;
        let residual_rms = (0..q)
            .map(|o| {
                let ss: f64 = resid
                    .column(o)
                    .iter()
                    .zip(&w)
                    .map(|(e, wi)| wi * e * e)
                    .sum();
                (ss / mass).sqrt()
            })
            .collect();

        let mut wt = beta.transpose(); // q × p
        if let Some(nom) = nominal {
            let base = nom.template(center);
            for o in 0..q {
                wt[(o, 0)] += base[o];
            }
        }
        coefficients.push(BinCoefficients::from_matrix(&wt, n, n_a));
        diagnostics.push(BinDiagnostics {
            weight_mass: mass,
            effective_samples: n_eff,
            residual_rms,
            condition: if lmin > 0.0 {
                lmax / lmin
            } else {
                f64::INFINITY
            },
            rank_deficient: deficient,
            weak_columns,
        });
    }
    if !starved.is_empty() {
        return Err(SudsError::InsufficientCoverage { bins: starved });
    }
    Ok(SudsModel {
        group_dim: data.group_dim,
        n,
        n_a,
        n_features: p,
        config: *cfg,
        centers,
        coefficients,
        diagnostics,
        nominal: nominal.cloned(),
    })
}

/// Γ over one group of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGroup {
    /// Pooled over all components of the group.
    pub aggregate: f64,
    /// Per component; `None` where the template error is zero.
    pub per_component: Vec<Option<f64>>,
    pub data_error: f64,
    pub template_error: f64,
}

/// One test sample's target and both predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub phi: f64,
    pub target: Vec<f64>,
    pub data_driven: Vec<f64>,
    pub template: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub samples: usize,
    pub group_dim: usize,
    pub gamma_ghat: GammaGroup,
    /// `None` when the system has no passive coordinates.
    pub gamma_rdot: Option<GammaGroup>,
    pub residuals: Vec<ResidualRow>,
}

/// `Γ = 1 − Σ|D − y| / Σ|T − y|` over the listed components.
pub fn gamma_group(rows: &[ResidualRow], components: std::ops::Range<usize>) -> Result<GammaGroup> {
    let mut per = Vec::new();
    let (mut d_all, mut t_all) = (0.0, 0.0);
    for k in components {
        let (mut d, mut t) = (0.0, 0.0);
        for r in rows {
            d += (r.data_driven[k] - r.target[k]).abs();
            t += (r.template[k] - r.target[k]).abs();
        }
        per.push(if t > 0.0 { Some(1.0 - d / t) } else { None });
        d_all += d;
        t_all += t;
    }
    if !(t_all > 0.0) {
        return Err(SudsError::DegenerateTemplate);
    }
    Ok(GammaGroup {
        aggregate: 1.0 - d_all / t_all,
        per_component: per,
        data_error: d_all,
        template_error: t_all,
    })
}

/// Phase-only prediction `(ĝ_T, ṙ_T)`.
pub fn template_predict(nominal: &NominalGait, phi: f64) -> DVector<f64> {
    nominal.template(phi)
}

/// Scores `model` against the template of `nominal` on `test`.
pub fn evaluate(
    model: &SudsModel,
    nominal: &NominalGait,
    test: &DeviationSet,
) -> Result<EvaluationReport> {
    if test.n != model.n || test.n_a != model.n_a || test.group_dim != model.group_dim {
        return Err(SudsError::DimensionMismatch(format!(
            "model is (n = {}, n_a = {}, group dim {}), test data is (n = {}, n_a = {}, group dim {})",
            model.n, model.n_a, model.group_dim, test.n, test.n_a, test.group_dim
        )));
    }
    if nominal.n() != model.n || nominal.group_dim != model.group_dim {
        return Err(SudsError::DimensionMismatch(
            "nominal gait does not match the model".into(),
        ));
    }
    let mut rows = Vec::with_capacity(test.len());
    for s in &test.samples {
        let d = model.predict(s.phi, &s.delta, &s.delta_dot_a)?;
        let t = template_predict(nominal, s.phi);
        rows.push(ResidualRow {
            phi: s.phi,
            target: s.target.iter().copied().collect(),
            data_driven: d.iter().copied().collect(),
            template: t.iter().copied().collect(),
        });
    }
    let gd = model.group_dim;
    let q = model.n_outputs();
    let gamma_ghat = gamma_group(&rows, 0..gd)?;
    let gamma_rdot = if q > gd {
        Some(gamma_group(&rows, gd..q)?)
    } else {
        None
    };
    Ok(EvaluationReport {
        samples: rows.len(),
        group_dim: gd,
        gamma_ghat,
        gamma_rdot,
        residuals: rows,
    })
}

/// A random ground-truth model whose blocks vary smoothly with phase.
pub fn random_planted_model(
    group_dim: usize,
    n: usize,
    n_a: usize,
    bins: usize,
    seed: u64,
) -> SudsModel {
    let q = group_dim + n - n_a;
    let p = feature_count(n, n_a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let a0 = DMatrix::from_fn(q, p, |_, _| draw());
    let a1 = DMatrix::from_fn(q, p, |_, _| 0.5 * draw());
    let a2 = DMatrix::from_fn(q, p, |_, _| 0.5 * draw());
    let centers: Vec<f64> = (0..bins)
        .map(|b| 2.0 * PI * b as f64 / bins as f64)
        .collect();
    let coefficients = centers
        .iter()
        .map(|&c| BinCoefficients::from_matrix(&(&a0 + &a1 * c.cos() + &a2 * c.sin()), n, n_a))
        .collect();
    SudsModel {
        group_dim,
        n,
        n_a,
        n_features: p,
        config: FitConfig {
            bins,
            ..FitConfig::default()
        },
        centers,
        coefficients,
        diagnostics: Vec::new(),
        nominal: None,
    }
}

/// Samples drawn exactly at bin centres from `truth`, `per_bin` per bin
/// spread over `cycles` cycles, with unit-variance deviations and Gaussian
/// output noise of standard deviation `noise`.
pub fn planted_dataset(
    truth: &SudsModel,
    per_bin: usize,
    cycles: usize,
    noise: f64,
    seed: u64,
) -> DeviationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_noise = Normal::new(0.0, noise.max(0.0)).expect("finite noise level");
    let (n, n_a) = (truth.n, truth.n_a);
    let mut samples = Vec::with_capacity(per_bin * truth.bins());
    let cycles = cycles.max(1);
    for k in 0..per_bin {
        let turn = (k % cycles) as f64 * 2.0 * PI;
        for (b, &center) in truth.centers.iter().enumerate() {
            let delta = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let delta_dot_a: DVector<f64> =
                DVector::from_fn(n_a, |_, _| StandardNormal.sample(&mut rng));
            let mut x = vec![0.0; truth.n_features];
            fill_regressors(&delta, &delta_dot_a, &mut x);
            let mut target = truth.coefficients[b].matrix() * DVector::from_vec(x);
            if noise > 0.0 {
                for v in target.iter_mut() {
                    *v += out_noise.sample(&mut rng);
                }
            }
            let mut delta_dot = DVector::zeros(n);
            for (j, v) in delta_dot_a.iter().enumerate() {
                delta_dot[j] = *v;
            }
            samples.push(DeviationSample {
                phi: center + turn,
                delta,
                delta_dot,
                delta_dot_a,
                target,
            });
        }
    }
    DeviationSet {
        group_dim: truth.group_dim,
        n,
        n_a,
        samples,
    }
}

/// RMS difference over all coefficients of two models on the same grid.
pub fn coefficient_rms_error(a: &SudsModel, b: &SudsModel) -> Result<f64> {
    if a.bins() != b.bins() || a.n_features != b.n_features || a.n_outputs() != b.n_outputs() {
        return Err(SudsError::DimensionMismatch(
            "models have different layouts".into(),
        ));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
        let d = ca.matrix() - cb.matrix();
        acc += d.norm_squared();
        count += d.len();
    }
    Ok((acc / count as f64).sqrt())
}

/// Bandwidth that keeps the kernel inside one bin, for data sampled at
/// bin centres.
pub fn bin_local_bandwidth(bins: usize) -> f64 {
    2.0 * PI / bins as f64 / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted_fit(truth: &SudsModel, noise: f64, ridge: f64) -> SudsModel {
        let data = planted_dataset(truth, 60, 8, noise, 17);
        let cfg = FitConfig {
            bins: truth.bins(),
            bandwidth: bin_local_bandwidth(truth.bins()),
            ridge,
        };
        fit(&data, &cfg, None).unwrap()
    }

    #[test]
    fn feature_counts() {
        assert_eq!(feature_count(2, 1), 6);
        assert_eq!(feature_count(8, 4), 45);
        for (n_a, n_p) in [(1, 1), (4, 4), (4, 20)] {
            let n = n_a + n_p;
            assert_eq!(feature_count(n, n_a), 1 + n + n_a + n * n_a);
        }
        // linear in n_p at fixed n_a
        let d1 = feature_count(4 + 5, 4) - feature_count(4 + 4, 4);
        let d2 = feature_count(4 + 21, 4) - feature_count(4 + 20, 4);
        assert_eq!(d1, d2);
    }

    #[test]
    fn regressor_layout() {
        let s = DeviationSample {
            phi: 0.0,
            delta: DVector::from_vec(vec![2.0, 3.0]),
            delta_dot: DVector::zeros(2),
            delta_dot_a: DVector::from_vec(vec![5.0]),
            target: DVector::zeros(2),
        };
        assert_eq!(
            build_regressors(&s).as_slice(),
            &[1.0, 2.0, 3.0, 5.0, 10.0, 15.0]
        );
        let two = DVector::from_vec(vec![5.0, 7.0]);
        let mut out = vec![0.0; feature_count(2, 2)];
        fill_regressors(&s.delta, &two, &mut out);
        assert_eq!(&out[5..], &[10.0, 14.0, 15.0, 21.0]);
        let zero = DeviationSample {
            delta: DVector::zeros(2),
            delta_dot_a: DVector::zeros(1),
            ..s
        };
        assert_eq!(
            build_regressors(&zero).as_slice(),
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn planted_model_is_recovered_exactly() {
        let truth = random_planted_model(3, 4, 2, 16, 1);
        let model = planted_fit(&truth, 0.0, 1e-8);
        assert!(coefficient_rms_error(&model, &truth).unwrap() < 1e-6);
        let data = planted_dataset(&truth, 3, 1, 0.0, 99);
        for s in &data.samples {
            let got = model.predict(s.phi, &s.delta, &s.delta_dot_a).unwrap();
            assert!((got - &s.target).amax() < 1e-6);
        }
    }

    #[test]
    fn planted_model_with_output_noise() {
        let truth = random_planted_model(1, 2, 1, 16, 2);
        let model = planted_fit(&truth, 1e-3, 1e-8);
        assert!(coefficient_rms_error(&model, &truth).unwrap() < 1e-2);
    }

    #[test]
    fn ridge_limit_converges() {
        let truth = random_planted_model(1, 2, 1, 16, 3);
        let a = planted_fit(&truth, 0.0, 1e-8);
        let b = planted_fit(&truth, 0.0, 1e-10);
        let diff = a
            .coefficients
            .iter()
            .zip(&b.coefficients)
            .map(|(x, y)| (x.matrix() - y.matrix()).amax())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn on_cycle_prediction_is_the_offset_and_affine_in_rate() {
        let truth = random_planted_model(3, 3, 1, 16, 4);
        let phi = 0.9;
        let zero_d = DVector::zeros(3);
        let zero_a = DVector::zeros(1);
        let c = truth.coefficients_at(phi).column(0).into_owned();
        let y0 = truth.predict(phi, &zero_d, &zero_a).unwrap();
        assert!((y0 - c).amax() < 1e-14);

        let d = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let ys: Vec<_> = [-1.0, 0.5, 2.0]
            .iter()
            .map(|v| {
                truth
                    .predict(phi, &d, &DVector::from_element(1, *v))
                    .unwrap()
            })
            .collect();
        // collinear: (y2 − y0) = (y1 − y0)·(3 / 1.5)
        let lhs = &ys[2] - &ys[0];
        let rhs = (&ys[1] - &ys[0]) * 2.0;
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn unexcited_data_flags_deviation_columns() {
        let truth = random_planted_model(1, 2, 1, 16, 5);
        let mut data = planted_dataset(&truth, 60, 8, 0.0, 6);
        for s in &mut data.samples {
            s.delta.fill(0.0);
            s.delta_dot_a.fill(0.0);
            s.delta_dot.fill(0.0);
            s.target = truth.coefficients_at(s.phi).column(0).into_owned();
        }
        let cfg = FitConfig {
            bins: 16,
            bandwidth: bin_local_bandwidth(16),
            ridge: 1e-8,
        };
        let model = fit(&data, &cfg, None).unwrap();
        for (d, (fitted, t)) in model
            .diagnostics
            .iter()
            .zip(model.coefficients.iter().zip(&truth.coefficients))
        {
            assert!(d.rank_deficient);
            assert_eq!(d.weak_columns, vec![1, 2, 3, 4, 5]);
            for o in 0..fitted.c.len() {
                assert!((fitted.c[o] - t.c[o]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sparse_bins_are_reported() {
        let truth = random_planted_model(1, 2, 1, 16, 7);
        let mut data = planted_dataset(&truth, 60, 8, 0.0, 8);
        let gap = 2.0 * PI * 5.0 / 16.0;
        data.samples
            .retain(|s| (s.phi.rem_euclid(2.0 * PI) - gap).abs() > 1e-9);
        let cfg = FitConfig {
            bins: 16,
            bandwidth: bin_local_bandwidth(16),
            ridge: 1e-8,
        };
        match fit(&data, &cfg, None) {
            Err(SudsError::InsufficientCoverage { bins }) => assert_eq!(bins, vec![5]),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn grid_shift_equivariance() {
        let truth = random_planted_model(1, 2, 1, 32, 9);
        let data = planted_dataset(&truth, 60, 6, 1e-3, 10);
        let cfg = FitConfig {
            bins: 32,
            ..FitConfig::default()
        };
        let a = fit(&data, &cfg, None).unwrap();
        let shift = 5.0 * 2.0 * PI / 32.0;
        let mut moved = data.clone();
        for s in &mut moved.samples {
            s.phi += shift;
        }
        let b = fit(&moved, &cfg, None).unwrap();
        let d = DVector::from_vec(vec![0.4, -0.7]);
        let v = DVector::from_element(1, 0.3);
        for phi in [0.0, 0.77, 2.5, 4.1, 6.0] {
            let ya = a.predict(phi, &d, &v).unwrap();
            let yb = b.predict(phi + shift, &d, &v).unwrap();
            assert!((ya - yb).amax() < 1e-6);
        }
    }

    fn rows(target: &[f64], d: &[f64], t: &[f64]) -> Vec<ResidualRow> {
        target
            .iter()
            .zip(d)
            .zip(t)
            .map(|((y, d), t)| ResidualRow {
                phi: 0.0,
                target: vec![*y],
                data_driven: vec![*d],
                template: vec![*t],
            })
            .collect()
    }

    #[test]
    fn gamma_definition_cases() {
        let y = [1.0, -2.0, 0.5, 3.0];
        let t = [1.5, -1.0, 0.0, 2.0];
        let perfect = gamma_group(&rows(&y, &y, &t), 0..1).unwrap();
        assert_eq!(perfect.aggregate, 1.0);
        let same = gamma_group(&rows(&y, &t, &t), 0..1).unwrap();
        assert_eq!(same.aggregate, 0.0);
        let half: Vec<f64> = y.iter().zip(&t).map(|(y, t)| y + 0.5 * (t - y)).collect();
        let g = gamma_group(&rows(&y, &half, &t), 0..1).unwrap();
        assert!((g.aggregate - 0.5).abs() < 1e-15);
        assert!(matches!(
            gamma_group(&rows(&y, &t, &y), 0..1),
            Err(SudsError::DegenerateTemplate)
        ));
    }

    #[test]
    fn gamma_swap_identity() {
        let y = [0.2, -0.4, 1.1, 0.0, 0.7];
        let d = [0.3, -0.1, 1.0, 0.2, 0.9];
        let t = [0.0, -0.9, 1.5, -0.3, 0.1];
        let fwd = gamma_group(&rows(&y, &d, &t), 0..1).unwrap();
        let swapped = gamma_group(&rows(&y, &t, &d), 0..1).unwrap();
        let expect = 1.0 - fwd.template_error / fwd.data_error;
        assert!((swapped.aggregate - expect).abs() < 1e-15);
        assert!(fwd.aggregate <= 1.0);
    }

    #[test]
    fn model_json_round_trip() {
        let truth = random_planted_model(1, 2, 1, 8, 11);
        let model = planted_fit(&truth, 1e-3, 1e-8);
        let text = serde_json::to_string(&model).unwrap();
        let back: SudsModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn prediction_rejects_wrong_dimensions() {
        let truth = random_planted_model(1, 2, 1, 8, 12);
        assert!(matches!(
            truth.predict(0.0, &DVector::zeros(3), &DVector::zeros(1)),
            Err(SudsError::DimensionMismatch(_))
        ));
    }
}

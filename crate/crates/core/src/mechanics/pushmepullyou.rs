//! Symmetric pushmepullyou swimmer: a central body with two link pairs that
//! open symmetrically about the centre line, so the body only translates
//! along x. `r[0] = r₁` is the sprung (passive) pair, `r[1] = r₂` the
//! driven pair.

use super::{Dimensions, Partition, PassiveElementSet, ShapeState, SudsSystem, SwimmerParams};
use crate::error::{Result, SudsError};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

#[derive(Debug, Clone)]
pub struct Pushmepullyou {
    pub link_length: f64,
    pub drag: f64,
    pub drag_ratio: f64,
    partition: Partition,
    elements: PassiveElementSet,
}

/// Intermediates of one pushmepullyou solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushmepullyouDiagnostics {
    pub alpha: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub sin: [f64; 2],
    pub cos: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct Terms {
    alpha: f64,
    /// x-coupling of each pair in the translation row, `(ρ/2) L sᵢ`.
    coupling: [f64; 2],
    /// Joint-row coefficient on ẋ, `ρ c L² s`, per pair.
    gamma_1: [f64; 2],
    /// Joint-row coefficient on the pair's own rate, `−c(ρ − 1/12) L³`.
    gamma_2: f64,
    sin: [f64; 2],
    cos: [f64; 2],
}

fn terms(l: f64, c: f64, rho: f64, r1: f64, r2: f64) -> Terms {
    let (s1, c1) = r1.sin_cos();
    let (s2, c2) = r2.sin_cos();
    let alpha = 1.0 / (0.5 + c1 * c1 + rho * s1 * s1 + c2 * c2 + rho * s2 * s2);
    Terms {
        alpha,
        coupling: [0.5 * rho * l * s1, 0.5 * rho * l * s2],
        gamma_1: [rho * c * l * l * s1, rho * c * l * l * s2],
        gamma_2: -c * (rho - 1.0 / 12.0) * l.powi(3),
        sin: [s1, s2],
        cos: [c1, c2],
    }
}

impl Pushmepullyou {
    pub fn new(params: &SwimmerParams) -> Result<Self> {
        let partition = Partition::new(2, &params.actuated)?;
        if partition.actuated != [1] {
            return Err(SudsError::Config(
                "pushmepullyou drives the second pair r₂ (index 1)".into(),
            ));
        }
        params.passive.validate(1)?;
        Ok(Self {
            link_length: params.link_length,
            drag: params.drag,
            drag_ratio: params.drag_ratio,
            partition,
            elements: params.passive.clone(),
        })
    }

    fn terms(&self, r: &DVector<f64>) -> Terms {
        terms(self.link_length, self.drag, self.drag_ratio, r[0], r[1])
    }
}

impl SudsSystem for Pushmepullyou {
    fn dims(&self) -> Dimensions {
        Dimensions {
            n_a: 1,
            n_p: 1,
            n: 2,
            group_dim: 1,
        }
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn passive_elements(&self) -> &PassiveElementSet {
        &self.elements
    }

    /// `α⁻¹ ẋ + L s₁ ṙ₁ − L s₂ ṙ₂ = 0` (at ρ = 2), scaled by `c`.
    fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let t = self.terms(r);
        let c = self.drag;
        Ok((
            DMatrix::from_element(1, 1, c / t.alpha),
            DMatrix::from_row_slice(1, 2, &[c * t.coupling[0], -c * t.coupling[1]]),
        ))
    }

    /// Joint rows `τᵢ = γ₁ ẋ + γ₂ ṙᵢ` with ẋ eliminated through the
    /// connection; the driven pair mirrors the sprung one.
    fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        let t = self.terms(r);
        // ẋ = a₁ ṙ₁ + a₂ ṙ₂
        let a1 = -t.alpha * t.coupling[0];
        let a2 = t.alpha * t.coupling[1];
        // mirrored pair: its ẋ coupling enters with the opposite sign
        let m11 = -(t.gamma_1[0] * a1 + t.gamma_2);
        let m12 = -t.gamma_1[0] * a2;
        let m22 = -(-t.gamma_1[1] * a2 + t.gamma_2);
        let m21 = t.gamma_1[1] * a1;
        Ok(DMatrix::from_row_slice(2, 2, &[m11, m12, m21, m22]))
    }
}

/// Solves the stacked 2×2 system in `(ẋ, ṙ₁)`:
///
/// ```text
/// [ α⁻¹  L s₁     ] [ẋ ]   [ L s₂ ṙ₂    ]
/// [ γ₁   γ₂ − d   ] [ṙ₁] = [ k(r₁ − r_k) ]
/// ```
/// with `γ₁ = 2L² s₁`, `γ₂ = −2L³ + L³/12` at unit drag and ratio 2.
pub fn pushmepullyou_solve(
    params: &SwimmerParams,
    r: &ShapeState,
    rdot_2: f64,
) -> Result<(f64, f64, PushmepullyouDiagnostics)> {
    let (r1, r2) = (r.r_p[0], r.r_a[0]);
    let t = terms(params.link_length, params.drag, params.drag_ratio, r1, r2);
    let k = params.passive.stiffness[0];
    let rk = params.passive.rest[0];
    let d = params.passive.damping[0];
    let lhs = Matrix2::new(1.0 / t.alpha, t.coupling[0], t.gamma_1[0], t.gamma_2 - d);
    let rhs = Vector2::new(t.coupling[1] * rdot_2, k * (r1 - rk));
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SudsError::SingularConstraint {
            shape: vec![r1, r2],
            detail: "pushmepullyou system matrix is singular".into(),
        })?;
    let diag = PushmepullyouDiagnostics {
        alpha: t.alpha,
        gamma_1: t.gamma_1[0],
        gamma_2: t.gamma_2,
        sin: t.sin,
        cos: t.cos,
    };
    Ok((sol[0], sol[1], diag))
}

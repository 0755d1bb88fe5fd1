//! T-paddle swimmer on a spring-damper tether, moving along x only.
//!
//! Shape coordinates: `r[0] = r₁` (tether length, passive) and
//! `r[1] = r₂` (paddle width, actuated). The vertical bar has height
//! `L − r₂`, so valid shapes have `0 < r₂ < L`.

use super::{Dimensions, Partition, PassiveElementSet, ShapeState, SudsSystem, SwimmerParams};
use crate::error::{Result, SudsError};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

#[derive(Debug, Clone)]
pub struct LinearPassiveSwimmer {
    pub bar_length: f64,
    pub stem_length: f64,
    pub drag: f64,
    partition: Partition,
    elements: PassiveElementSet,
}

impl LinearPassiveSwimmer {
    pub fn new(params: &SwimmerParams) -> Result<Self> {
        let partition = Partition::new(2, &params.actuated)?;
        if partition.actuated != [1] {
            return Err(SudsError::Config(
                "linear passive swimmer drives the paddle width r₂ (index 1)".into(),
            ));
        }
        params.passive.validate(1)?;
        Ok(Self {
            bar_length: params.link_length,
            stem_length: params.stem_length.unwrap_or(0.5),
            drag: params.drag,
            partition,
            elements: params.passive.clone(),
        })
    }

    fn width(&self, r: &DVector<f64>) -> Result<f64> {
        let r2 = r[1];
        if !(r2 > 0.0 && r2 < self.bar_length) {
            return Err(SudsError::Config(format!(
                "paddle width r₂ = {r2} outside (0, {})",
                self.bar_length
            )));
        }
        Ok(r2)
    }
}

impl SudsSystem for LinearPassiveSwimmer {
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

    fn check_shape(&self, r: &DVector<f64>) -> Result<()> {
        self.width(r).map(|_| ())
    }

    /// `c(l + r₂) ẋ + c r₂ (ṙ₁ − ṙ₂) = 0`.
    fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (c, l, r2) = (self.drag, self.stem_length, self.width(r)?);
        let omega_g = DMatrix::from_element(1, 1, c * (l + r2));
        let omega_r = DMatrix::from_row_slice(1, 2, &[c * r2, -c * r2]);
        Ok((omega_g, omega_r))
    }

    /// Drag on the paddle face after eliminating ẋ, plus the axial drag of
    /// the horizontal bar extending symmetrically along its own length
    /// (`c r₂ / 12`, acting on the actuated coordinate only).
    fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (c, l, r2) = (self.drag, self.stem_length, self.width(r)?);
        let m = c * r2 * l / (l + r2);
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[m, -m, -m, m + c * r2 / 12.0],
        ))
    }
}

/// Solution of the stacked 3×3 tether system in `(ẋ, ω, ṙ₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSwimmerSolution {
    pub xdot: f64,
    /// World wrench along x.
    pub omega_w: f64,
    pub rdot_1: f64,
}

/// Direct solve of the payload/paddle balance:
///
/// ```text
/// [ c(l+r₂)  0   c r₂     ] [ẋ ]   [c r₂]       [ 0          ]
/// [ c l     −1  −d        ] [ω ] = [ 0  ] ṙ₂ +  [ k(r₁−l_k)  ]
/// [ c r₂    −1   d + c r₂ ] [ṙ₁]   [c r₂]       [−k(r₁−l_k)  ]
/// ```
pub fn linear_passive_swimmer_solve(
    params: &SwimmerParams,
    r: &ShapeState,
    rdot_2: f64,
) -> Result<LinearSwimmerSolution> {
    let c = params.drag;
    let l = params.stem_length.unwrap_or(0.5);
    let (r1, r2) = (r.r_p[0], r.r_a[0]);
    if !(r2 > 0.0 && r2 < params.link_length) {
        return Err(SudsError::Config(format!(
            "paddle width r₂ = {r2} outside (0, {})",
            params.link_length
        )));
    }
    let k = params.passive.stiffness[0];
    let lk = params.passive.rest[0];
    let d = params.passive.damping[0];
    let lhs = Matrix3::new(
        c * l + c * r2,
        0.0,
        c * r2,
        c * l,
        -1.0,
        -d,
        c * r2,
        -1.0,
        d + c * r2,
    );
    let spring = k * (r1 - lk);
    let rhs = Vector3::new(c * r2 * rdot_2, spring, c * r2 * rdot_2 - spring);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SudsError::SingularConstraint {
            shape: vec![r1, r2],
            detail: "tether system matrix is singular".into(),
        })?;
    Ok(LinearSwimmerSolution {
        xdot: sol[0],
        omega_w: sol[1],
        rdot_1: sol[2],
    })
}

//! SUDS mechanics: local connection, shape metric, passive elements and the
//! quasi-static force balance that makes `(ĝ, ṙ_p)` affine in `ṙ_a`.
//!
//! Sign conventions used throughout:
//!
//! * `τ = −M(r)ṙ` is the resistive wrench the environment exerts along the
//!   shape coordinates, so `τ·ṙ ≤ 0`.
//! * [`passive_force`] returns the wrench the spring/damper elements exert
//!   on their joints, `f_o = −k(r_p − r_rest)` and `F = −d` on the passive
//!   diagonal. Quasi-static balance on a passive joint reads
//!   `τ_p + f_o + F ṙ = 0`.

mod chain;
mod linear;
mod params;
mod pushmepullyou;

pub use chain::{build_link_chain, LinkChain};
pub use linear::{linear_passive_swimmer_solve, LinearPassiveSwimmer, LinearSwimmerSolution};
pub use params::{PassiveElementSet, SwimmerParams, Variant};
pub use pushmepullyou::{pushmepullyou_solve, Pushmepullyou, PushmepullyouDiagnostics};

use crate::error::{Result, SudsError};
use crate::geometry::BodyVelocity;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Reciprocal condition number below which `omega_g` counts as singular.
const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub n_a: usize,
    pub n_p: usize,
    pub n: usize,
    pub group_dim: usize,
}

impl Dimensions {
    pub fn new(n_a: usize, n_p: usize, group_dim: usize) -> Result<Self> {
        if group_dim != 1 && group_dim != 3 {
            return Err(SudsError::Config(format!(
                "group dimension must be 1 or 3, got {group_dim}"
            )));
        }
        Ok(Self {
            n_a,
            n_p,
            n: n_a + n_p,
            group_dim,
        })
    }

    /// Number of regression outputs, `group_dim + n_p`.
    pub fn n_outputs(&self) -> usize {
        self.group_dim + self.n_p
    }
}

/// Which shape coordinates are actuated and which are passive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub actuated: Vec<usize>,
    pub passive: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, actuated: &[usize]) -> Result<Self> {
        let mut act = actuated.to_vec();
        act.sort_unstable();
        act.dedup();
        if act.len() != actuated.len() || act.iter().any(|&i| i >= n) {
            return Err(SudsError::Config(format!(
                "actuated indices {actuated:?} invalid for {n} shape coordinates"
            )));
        }
        let passive = (0..n).filter(|i| !act.contains(i)).collect();
        Ok(Self {
            actuated: act,
            passive,
        })
    }

    pub fn n(&self) -> usize {
        self.actuated.len() + self.passive.len()
    }

    pub fn assemble(&self, a: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.n());
        for (k, &i) in self.actuated.iter().enumerate() {
            full[i] = a[k];
        }
        for (k, &i) in self.passive.iter().enumerate() {
            full[i] = p[k];
        }
        full
    }

    pub fn actuated_of(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.actuated.len(), self.actuated.iter().map(|&i| full[i]))
    }

    pub fn passive_of(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.passive.len(), self.passive.iter().map(|&i| full[i]))
    }

    fn block(&self, m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
    }
}

/// Shape split into actuated and passive blocks with their velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeState {
    pub r_a: DVector<f64>,
    pub r_p: DVector<f64>,
    pub rdot_a: DVector<f64>,
    pub rdot_p: DVector<f64>,
}

impl ShapeState {
    /// Shape at rest velocities.
    pub fn at(r_a: DVector<f64>, r_p: DVector<f64>) -> Self {
        let (na, np) = (r_a.len(), r_p.len());
        Self {
            r_a,
            r_p,
            rdot_a: DVector::zeros(na),
            rdot_p: DVector::zeros(np),
        }
    }

    pub fn from_full(partition: &Partition, r: &DVector<f64>, rdot: &DVector<f64>) -> Self {
        Self {
            r_a: partition.actuated_of(r),
            r_p: partition.passive_of(r),
            rdot_a: partition.actuated_of(rdot),
            rdot_p: partition.passive_of(rdot),
        }
    }

    pub fn full_r(&self, partition: &Partition) -> DVector<f64> {
        partition.assemble(&self.r_a, &self.r_p)
    }

    pub fn full_rdot(&self, partition: &Partition) -> DVector<f64> {
        partition.assemble(&self.rdot_a, &self.rdot_p)
    }

    fn check(&self, dims: &Dimensions) -> Result<()> {
        if self.r_a.len() != dims.n_a
            || self.r_p.len() != dims.n_p
            || self.rdot_a.len() != dims.n_a
            || self.rdot_p.len() != dims.n_p
        {
            return Err(SudsError::DimensionMismatch(format!(
                "shape state ({}, {}) does not match n_a = {}, n_p = {}",
                self.r_a.len(),
                self.r_p.len(),
                dims.n_a,
                dims.n_p
            )));
        }
        let finite = self
            .r_a
            .iter()
            .chain(self.r_p.iter())
            .chain(self.rdot_a.iter())
            .chain(self.rdot_p.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(SudsError::Config(
                "shape state has non-finite entries".into(),
            ));
        }
        Ok(())
    }
}

/// Pfaffian blocks of the environmental force balance and the local
/// connection they induce, `A = −omega_g⁻¹ omega_r`.
#[derive(Debug, Clone)]
pub struct ConnectionEval {
    pub a: DMatrix<f64>,
    pub omega_g: DMatrix<f64>,
    pub omega_r: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ShapeMetric {
    pub m: DMatrix<f64>,
    pub m_aa: DMatrix<f64>,
    pub m_ap: DMatrix<f64>,
    pub m_pa: DMatrix<f64>,
    pub m_pp: DMatrix<f64>,
}

impl ShapeMetric {
    fn split(m: DMatrix<f64>, partition: &Partition) -> Self {
        let (a, p) = (&partition.actuated, &partition.passive);
        Self {
            m_aa: partition.block(&m, a, a),
            m_ap: partition.block(&m, a, p),
            m_pa: partition.block(&m, p, a),
            m_pp: partition.block(&m, p, p),
            m,
        }
    }

    /// Smallest eigenvalue of the (symmetrized) metric.
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.m)
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Output of the affine SUDS solve at one shape.
#[derive(Debug, Clone)]
pub struct SudsVelocity {
    pub ghat: BodyVelocity,
    pub rdot_p: DVector<f64>,
    /// Offset `C̃(r)`, length `group_dim + n_p`.
    pub c_tilde: DVector<f64>,
    /// Gain `B(r)`, `(group_dim + n_p) × n_a`.
    pub b: DMatrix<f64>,
}

impl SudsVelocity {
    /// `(ĝ, ṙ_p)` stacked as one vector of length `group_dim + n_p`.
    pub fn stacked(&self, group_dim: usize) -> DVector<f64> {
        let g = self.ghat.components(group_dim);
        DVector::from_iterator(
            group_dim + self.rdot_p.len(),
            g.into_iter().chain(self.rdot_p.iter().copied()),
        )
    }
}

/// A simulatable shape-underactuated dissipative system.
///
/// Implementors work on the full shape vector `r` in their own coordinate
/// order; the [`Partition`] says which entries are actuated.
pub trait SudsSystem {
    fn dims(&self) -> Dimensions;
    fn partition(&self) -> &Partition;
    fn passive_elements(&self) -> &PassiveElementSet;

    /// Rejects shapes outside the system's geometric range.
    fn check_shape(&self, _r: &DVector<f64>) -> Result<()> {
        Ok(())
    }

    /// `(omega_g, omega_r)` such that `omega_g ĝ + omega_r ṙ = 0`.
    fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)>;

    /// Full `n × n` shape metric.
    fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Connection and metric together; chains override this to share work.
    fn connection_and_metric(&self, r: &DVector<f64>) -> Result<(ConnectionEval, DMatrix<f64>)> {
        Ok((
            connection_from_pfaffian(r, self.pfaffian(r)?)?,
            self.metric(r)?,
        ))
    }
}

pub(crate) fn connection_from_pfaffian(
    r: &DVector<f64>,
    (omega_g, omega_r): (DMatrix<f64>, DMatrix<f64>),
) -> Result<ConnectionEval> {
    let singular = |detail: String| SudsError::SingularConstraint {
        shape: r.iter().copied().collect(),
        detail,
    };
    let sv = omega_g.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin.is_finite() && smax > 0.0) || smin < SINGULAR_RCOND * smax {
        return Err(singular(format!(
            "omega_g singular values span [{smin:e}, {smax:e}]"
        )));
    }
    let lu = omega_g.clone().lu();
    let a = lu
        .solve(&(-&omega_r))
        .ok_or_else(|| singular("LU solve failed".into()))?;
    Ok(ConnectionEval {
        a,
        omega_g,
        omega_r,
    })
}

fn full_shape<S: SudsSystem + ?Sized>(system: &S, state: &ShapeState) -> Result<DVector<f64>> {
    state.check(&system.dims())?;
    let r = state.full_r(system.partition());
    system.check_shape(&r)?;
    Ok(r)
}

/// Local connection `A(r)` with its Pfaffian blocks.
pub fn connection<S: SudsSystem + ?Sized>(
    system: &S,
    state: &ShapeState,
) -> Result<ConnectionEval> {
    let r = full_shape(system, state)?;
    connection_from_pfaffian(&r, system.pfaffian(&r)?)
}

/// Shape metric `M(r)` split by the actuated/passive partition.
pub fn shape_metric<S: SudsSystem + ?Sized>(system: &S, state: &ShapeState) -> Result<ShapeMetric> {
    let r = full_shape(system, state)?;
    // the metric is only meaningful where the connection exists
    connection_from_pfaffian(&r, system.pfaffian(&r)?)?;
    Ok(ShapeMetric::split(system.metric(&r)?, system.partition()))
}

/// Spring/damper wrench on the joints, `f = f_o + F ṙ`.
///
/// `f_o = −k ⊙ (r_p − r_rest)` on passive rows and `F = −diag(d)` on the
/// passive diagonal; actuated rows are zero.
pub fn passive_force(
    elements: &PassiveElementSet,
    partition: &Partition,
    state: &ShapeState,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = partition.n();
    let mut f_o = DVector::zeros(n);
    let mut f = DMatrix::zeros(n, n);
    for (k, &i) in partition.passive.iter().enumerate() {
        f_o[i] = -elements.stiffness[k] * (state.r_p[k] - elements.rest[k]);
        f[(i, i)] = -elements.damping[k];
    }
    (f_o, f)
}

/// Solves the quasi-static balance for `(ĝ, ṙ_p)` given the shape and `ṙ_a`.
///
/// `ṙ_p = −(M_pp + D_p)⁻¹ [κ + (D_pa + M_pa) ṙ_a]` where `κ = −f_o` and
/// `D = −F` are the joint reactions to the passive elements, then
/// `ĝ = A (ṙ_a ⊕ ṙ_p)`.
pub fn suds_velocity<S: SudsSystem + ?Sized>(
    system: &S,
    state: &ShapeState,
    rdot_a: &DVector<f64>,
) -> Result<SudsVelocity> {
    let dims = system.dims();
    if rdot_a.len() != dims.n_a {
        return Err(SudsError::DimensionMismatch(format!(
            "ṙ_a has length {}, expected {}",
            rdot_a.len(),
            dims.n_a
        )));
    }
    let r = full_shape(system, state)?;
    let partition = system.partition();
    let (conn, m) = system.connection_and_metric(&r)?;
    let metric = ShapeMetric::split(m, partition);
    let (act, pas) = (&partition.actuated, &partition.passive);
    let a_a = partition.block(&conn.a, &(0..dims.group_dim).collect::<Vec<_>>(), act);
    let a_p = partition.block(&conn.a, &(0..dims.group_dim).collect::<Vec<_>>(), pas);

    let (c_p, b_p) = if dims.n_p == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, dims.n_a))
    } else {
        let (f_o, f) = passive_force(system.passive_elements(), partition, state);
        let kappa = -partition.passive_of(&f_o);
        let d_pp = -partition.block(&f, pas, pas);
        let d_pa = -partition.block(&f, pas, act);
        let h = &metric.m_pp + d_pp;
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| SudsError::NonDissipative {
                shape: r.iter().copied().collect(),
            })?;
        let c_p = -chol.solve(&kappa);
        let b_p = -chol.solve(&(d_pa + &metric.m_pa));
        (c_p, b_p)
    };

    let c_g = &a_p * &c_p;
    let b_g = &a_a + &a_p * &b_p;
    let no = dims.n_outputs();
    let mut c_tilde = DVector::zeros(no);
    let mut b = DMatrix::zeros(no, dims.n_a);
    c_tilde.rows_mut(0, dims.group_dim).copy_from(&c_g);
    c_tilde.rows_mut(dims.group_dim, dims.n_p).copy_from(&c_p);
    b.rows_mut(0, dims.group_dim).copy_from(&b_g);
    b.rows_mut(dims.group_dim, dims.n_p).copy_from(&b_p);

    let out = &c_tilde + &b * rdot_a;
    let ghat = BodyVelocity::from_slice(out.rows(0, dims.group_dim).as_slice());
    let rdot_p = out.rows(dims.group_dim, dims.n_p).into_owned();
    Ok(SudsVelocity {
        ghat,
        rdot_p,
        c_tilde,
        b,
    })
}

/// Actuator wrench `τ_a = −M_ap ṙ_p − M_aa ṙ_a` along the solved motion.
pub fn actuated_torque<S: SudsSystem + ?Sized>(
    system: &S,
    state: &ShapeState,
    rdot_a: &DVector<f64>,
) -> Result<DVector<f64>> {
    let sol = suds_velocity(system, state, rdot_a)?;
    let metric = shape_metric(system, state)?;
    Ok(-(&metric.m_ap * &sol.rdot_p) - &metric.m_aa * rdot_a)
}

/// Any of the four shipped swimmers, built from [`SwimmerParams`].
#[derive(Debug, Clone)]
pub enum Swimmer {
    LinearPassive(LinearPassiveSwimmer),
    Pushmepullyou(Pushmepullyou),
    Chain(LinkChain),
}

impl Swimmer {
    pub fn from_params(params: &SwimmerParams) -> Result<Self> {
        params.validate()?;
        Ok(match params.variant {
            Variant::LinearPassive => Swimmer::LinearPassive(LinearPassiveSwimmer::new(params)?),
            Variant::Pushmepullyou => Swimmer::Pushmepullyou(Pushmepullyou::new(params)?),
            Variant::Purcell3 | Variant::Purcell9 => {
                Swimmer::Chain(build_link_chain(params.link_count(), params)?)
            }
        })
    }

    fn inner(&self) -> &dyn SudsSystem {
        match self {
            Swimmer::LinearPassive(s) => s,
            Swimmer::Pushmepullyou(s) => s,
            Swimmer::Chain(s) => s,
        }
    }
}

impl SudsSystem for Swimmer {
    fn dims(&self) -> Dimensions {
        self.inner().dims()
    }
    fn partition(&self) -> &Partition {
        self.inner().partition()
    }
    fn passive_elements(&self) -> &PassiveElementSet {
        self.inner().passive_elements()
    }
    fn check_shape(&self, r: &DVector<f64>) -> Result<()> {
        self.inner().check_shape(r)
    }
    fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.inner().pfaffian(r)
    }
    fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.inner().metric(r)
    }
    fn connection_and_metric(&self, r: &DVector<f64>) -> Result<(ConnectionEval, DMatrix<f64>)> {
        self.inner().connection_and_metric(r)
    }
}

#[cfg(test)]
mod tests;

//! Planar chains of equal slender links in resistive-force-theory drag.
//!
//! The body frame sits on the middle link. Each link contributes
//! longitudinal drag `c L`, lateral drag `ρ c L` and rotational drag
//! `ρ c L³/12` about its centre; stacking the per-link maps from
//! `(ĝ, ṙ)` to link-frame twists gives a dissipation matrix `K` whose group
//! rows are the Pfaffian constraint and whose Schur complement is `M(r)`.

use super::{
    connection_from_pfaffian, ConnectionEval, Dimensions, Partition, PassiveElementSet, SudsSystem,
    SwimmerParams,
};
use crate::error::{Result, SudsError};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LinkChain {
    pub n_links: usize,
    pub link_length: f64,
    pub drag: f64,
    pub drag_ratio: f64,
    /// Index of the link carrying the body frame.
    pub body_link: usize,
    partition: Partition,
    elements: PassiveElementSet,
}

/// Pose of one link's centre in the body frame and its shape derivatives.
#[derive(Debug, Clone)]
pub struct LinkKinematics {
    pub angle: f64,
    pub pos: [f64; 2],
    pub d_angle: DVector<f64>,
    pub d_pos: [DVector<f64>; 2],
}

/// Assembles a chain of `n_links` links joined by `n_links − 1` joints.
pub fn build_link_chain(n_links: usize, params: &SwimmerParams) -> Result<LinkChain> {
    if n_links < 2 {
        return Err(SudsError::Config(format!(
            "a chain needs ≥ 2 links, got {n_links}"
        )));
    }
    if n_links.is_multiple_of(2) {
        return Err(SudsError::Config(format!(
            "chains need an odd link count so a middle link exists, got {n_links}"
        )));
    }
    if !(params.link_length > 0.0) || !(params.drag > 0.0) || !(params.drag_ratio >= 1.0) {
        return Err(SudsError::Config(
            "link length and drag must be > 0, drag ratio ≥ 1".into(),
        ));
    }
    let n = n_links - 1;
    let partition = Partition::new(n, &params.actuated)?;
    params.passive.validate(partition.passive.len())?;
    Ok(LinkChain {
        n_links,
        link_length: params.link_length,
        drag: params.drag,
        drag_ratio: params.drag_ratio,
        body_link: n_links / 2,
        partition,
        elements: params.passive.clone(),
    })
}

impl LinkChain {
    /// Link poses relative to the body link; joint `j` sits between links
    /// `j` and `j + 1` and measures the relative angle of link `j + 1`.
    pub fn kinematics(&self, r: &DVector<f64>) -> Vec<LinkKinematics> {
        let n = self.n_links - 1;
        let half = 0.5 * self.link_length;
        let m = self.body_link;
        let zero = || DVector::<f64>::zeros(n);
        let mut links: Vec<Option<LinkKinematics>> = vec![None; self.n_links];
        links[m] = Some(LinkKinematics {
            angle: 0.0,
            pos: [0.0, 0.0],
            d_angle: zero(),
            d_pos: [zero(), zero()],
        });

        // half-link offset from a centre along angle β, and its derivative
        let step =
            |k: &LinkKinematics, sign: f64, pos: &mut [f64; 2], dpos: &mut [DVector<f64>; 2]| {
                let (s, c) = k.angle.sin_cos();
                pos[0] += sign * half * c;
                pos[1] += sign * half * s;
                dpos[0] -= &k.d_angle * (sign * half * s);
                dpos[1] += &k.d_angle * (sign * half * c);
            };

        for i in m + 1..self.n_links {
            let prev = links[i - 1].clone().unwrap();
            let mut d_angle = prev.d_angle.clone();
            d_angle[i - 1] += 1.0;
            let mut next = LinkKinematics {
                angle: prev.angle + r[i - 1],
                pos: prev.pos,
                d_angle,
                d_pos: prev.d_pos.clone(),
            };
            let (mut pos, mut dpos) = (next.pos, next.d_pos.clone());
            step(&prev, 1.0, &mut pos, &mut dpos);
            step(&next, 1.0, &mut pos, &mut dpos);
            next.pos = pos;
            next.d_pos = dpos;
            links[i] = Some(next);
        }
        for i in (0..m).rev() {
            let prev = links[i + 1].clone().unwrap();
            let mut d_angle = prev.d_angle.clone();
            d_angle[i] -= 1.0;
            let mut next = LinkKinematics {
                angle: prev.angle - r[i],
                pos: prev.pos,
                d_angle,
                d_pos: prev.d_pos.clone(),
            };
            let (mut pos, mut dpos) = (next.pos, next.d_pos.clone());
            step(&prev, -1.0, &mut pos, &mut dpos);
            step(&next, -1.0, &mut pos, &mut dpos);
            next.pos = pos;
            next.d_pos = dpos;
            links[i] = Some(next);
        }
        links.into_iter().map(Option::unwrap).collect()
    }

    /// Dissipation matrix over `(ĝ, ṙ)`, size `(3 + n) × (3 + n)`.
    pub fn dissipation(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n_links - 1;
        let l = self.link_length;
        let c = self.drag;
        let rho = self.drag_ratio;
        let weights = [c * l, rho * c * l, rho * c * l.powi(3) / 12.0];
        let mut k = DMatrix::zeros(3 + n, 3 + n);
        let mut jac = DMatrix::zeros(3, 3 + n);
        for link in self.kinematics(r) {
            let (s, co) = link.angle.sin_cos();
            let [px, py] = link.pos;
            // link-frame twist = R(−β) · (body-point velocity, ω)
            jac[(0, 0)] = co;
            jac[(0, 1)] = s;
            jac[(0, 2)] = -co * py + s * px;
            jac[(1, 0)] = -s;
            jac[(1, 1)] = co;
            jac[(1, 2)] = s * py + co * px;
            jac[(2, 0)] = 0.0;
            jac[(2, 1)] = 0.0;
            jac[(2, 2)] = 1.0;
            for j in 0..n {
                let (dx, dy) = (link.d_pos[0][j], link.d_pos[1][j]);
                jac[(0, 3 + j)] = co * dx + s * dy;
                jac[(1, 3 + j)] = -s * dx + co * dy;
                jac[(2, 3 + j)] = link.d_angle[j];
            }
            for (row, w) in weights.iter().enumerate() {
                let jr = jac.row(row);
                k.ger(*w, &jr.transpose(), &jr.transpose(), 1.0);
            }
        }
        k
    }

    fn blocks(&self, r: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_links - 1;
        let k = self.dissipation(r);
        (
            k.view((0, 0), (3, 3)).into_owned(),
            k.view((0, 3), (3, n)).into_owned(),
            k.view((3, 3), (n, n)).into_owned(),
        )
    }
}

impl SudsSystem for LinkChain {
    fn dims(&self) -> Dimensions {
        let n_a = self.partition.actuated.len();
        let n_p = self.partition.passive.len();
        Dimensions {
            n_a,
            n_p,
            n: n_a + n_p,
            group_dim: 3,
        }
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn passive_elements(&self) -> &PassiveElementSet {
        &self.elements
    }

    fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (kgg, kgr, _) = self.blocks(r);
        Ok((kgg, kgr))
    }

    fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.connection_and_metric(r)?.1)
    }

    fn connection_and_metric(&self, r: &DVector<f64>) -> Result<(ConnectionEval, DMatrix<f64>)> {
        let (kgg, kgr, krr) = self.blocks(r);
        let conn = connection_from_pfaffian(r, (kgg, kgr))?;
        // M = K_rr − K_rg K_gg⁻¹ K_gr = K_rr + K_rg A
        let m = &krr + conn.omega_r.transpose() * &conn.a;
        let m = (&m + m.transpose()) * 0.5;
        Ok((conn, m))
    }
}

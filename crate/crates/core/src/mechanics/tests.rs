use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn state(sys: &dyn SudsSystem, r: &[f64]) -> ShapeState {
    let r = DVector::from_column_slice(r);
    ShapeState::from_full(sys.partition(), &r, &DVector::zeros(r.len()))
}

fn systems() -> Vec<(SwimmerParams, Swimmer)> {
    [
        SwimmerParams::linear_passive(),
        SwimmerParams::pushmepullyou(),
        SwimmerParams::purcell3(),
        SwimmerParams::purcell9(),
    ]
    .into_iter()
    .map(|p| {
        let s = Swimmer::from_params(&p).unwrap();
        (p, s)
    })
    .collect()
}

/// Random in-range shape for each preset.
fn random_shape(p: &SwimmerParams, rng: &mut impl Rng) -> Vec<f64> {
    match p.variant {
        Variant::LinearPassive => vec![rng.random_range(0.3..1.7), rng.random_range(0.05..1.95)],
        Variant::Pushmepullyou => vec![rng.random_range(0.0..PI), rng.random_range(0.0..PI)],
        _ => (0..p.n_shape())
            .map(|_| rng.random_range(-1.6..1.6))
            .collect(),
    }
}

fn random_vec(n: usize, scale: f64, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

// ---------------------------------------------------------------------------
// Independent drag oracle for link chains: finite-difference kinematics of
// material points plus Gauss–Legendre quadrature of the RFT force density.
// ---------------------------------------------------------------------------

/// World position of arclength `s` on link `i`, body frame on link `n/2` at
/// the origin. Built from joint positions rather than link centres.
fn material_point(n_links: usize, l: f64, g: [f64; 3], r: &[f64], i: usize, s: f64) -> [f64; 2] {
    let m = n_links / 2;
    let mut angle = vec![0.0; n_links];
    for k in m + 1..n_links {
        angle[k] = angle[k - 1] + r[k - 1];
    }
    for k in (0..m).rev() {
        angle[k] = angle[k + 1] - r[k];
    }
    // joint positions: front end of link k is joint k
    let mut front = vec![[0.0f64; 2]; n_links];
    front[m] = [0.5 * l, 0.0];
    for k in m + 1..n_links {
        front[k] = [
            front[k - 1][0] + l * angle[k].cos(),
            front[k - 1][1] + l * angle[k].sin(),
        ];
    }
    for k in (0..m).rev() {
        front[k] = [
            front[k + 1][0] - l * angle[k + 1].cos(),
            front[k + 1][1] - l * angle[k + 1].sin(),
        ];
    }
    let centre = [
        front[i][0] - 0.5 * l * angle[i].cos(),
        front[i][1] - 0.5 * l * angle[i].sin(),
    ];
    let local = [
        centre[0] + s * angle[i].cos(),
        centre[1] + s * angle[i].sin(),
    ];
    let (sg, cg) = g[2].sin_cos();
    [
        g[0] + cg * local[0] - sg * local[1],
        g[1] + sg * local[0] + cg * local[1],
    ]
}

fn link_angle(n_links: usize, g: [f64; 3], r: &[f64], i: usize) -> f64 {
    let m = n_links / 2;
    let mut a = 0.0;
    if i > m {
        a = r[m..i].iter().sum();
    } else if i < m {
        a = -r[i..m].iter().sum::<f64>();
    }
    a + g[2]
}

/// Velocity of a material point for generalized velocity direction `q`
/// (0..3 body twist, 3.. joint rates), by central differences.
fn point_velocity(n_links: usize, l: f64, r: &[f64], q: usize, i: usize, s: f64) -> [f64; 2] {
    let h = 1e-3;
    let eval = |eps: f64| {
        let mut rr = r.to_vec();
        let mut g = [0.0; 3];
        if q < 3 {
            // body twist about identity: exp(eps e_q)
            let xi = match q {
                0 => crate::geometry::BodyVelocity::new(1.0, 0.0, 0.0),
                1 => crate::geometry::BodyVelocity::new(0.0, 1.0, 0.0),
                _ => crate::geometry::BodyVelocity::new(0.0, 0.0, 1.0),
            };
            let e = crate::geometry::exp(&xi, eps);
            g = [e.x, e.y, e.heading];
        } else {
            rr[q - 3] += eps;
        }
        material_point(n_links, l, g, &rr, i, s)
    };
    // fourth-order central stencil
    let (p1, m1, p2, m2) = (eval(h), eval(-h), eval(2.0 * h), eval(-2.0 * h));
    let d = |k: usize| (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h);
    [d(0), d(1)]
}

/// Dissipation matrix by quadrature: `K_ab = Σ_i ∫ V_aᵀ D(s) V_b ds`.
fn oracle_dissipation(n_links: usize, l: f64, c: f64, rho: f64, r: &[f64]) -> DMatrix<f64> {
    let dim = 3 + r.len();
    // 3-point Gauss–Legendre on [−1, 1]; integrands are quadratic in s
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut k = DMatrix::zeros(dim, dim);
    for i in 0..n_links {
        let ang = link_angle(n_links, [0.0; 3], r, i);
        let t = [ang.cos(), ang.sin()];
        let nrm = [-ang.sin(), ang.cos()];
        for (x, w) in nodes.iter().zip(weights) {
            let s = 0.5 * l * x;
            let ds = 0.5 * l * w;
            let vel: Vec<[f64; 2]> = (0..dim)
                .map(|q| point_velocity(n_links, l, r, q, i, s))
                .collect();
            for a in 0..dim {
                for b in 0..dim {
                    let ta = vel[a][0] * t[0] + vel[a][1] * t[1];
                    let tb = vel[b][0] * t[0] + vel[b][1] * t[1];
                    let na = vel[a][0] * nrm[0] + vel[a][1] * nrm[1];
                    let nb = vel[b][0] * nrm[0] + vel[b][1] * nrm[1];
                    k[(a, b)] += ds * (c * ta * tb + rho * c * na * nb);
                }
            }
        }
    }
    k
}

// ---------------------------------------------------------------------------
// connection
// ---------------------------------------------------------------------------

#[test]
fn linear_swimmer_connection_closed_form() {
    let sys = Swimmer::from_params(&SwimmerParams::linear_passive()).unwrap();
    let conn = connection(&sys, &state(&sys, &[1.0, 0.5])).unwrap();
    // −c r₂ / (c (l + r₂)) · [1, −1] with l = r₂ = 0.5
    assert!((conn.a[(0, 0)] + 0.5).abs() < 1e-15);
    assert!((conn.a[(0, 1)] - 0.5).abs() < 1e-15);
    let resid = -(&conn.omega_g * &conn.a) - &conn.omega_r;
    assert!(resid.amax() < 1e-10);
}

#[test]
fn linear_swimmer_rejects_out_of_range_width() {
    let sys = Swimmer::from_params(&SwimmerParams::linear_passive()).unwrap();
    for r2 in [0.0, -0.1, 2.0, 2.5] {
        let err = connection(&sys, &state(&sys, &[1.0, r2])).unwrap_err();
        assert!(matches!(err, SudsError::Config(_)));
    }
}

#[test]
fn pushmepullyou_straight_links_give_no_thrust() {
    let sys = Swimmer::from_params(&SwimmerParams::pushmepullyou()).unwrap();
    let conn = connection(&sys, &state(&sys, &[0.0, 0.0])).unwrap();
    assert_eq!(conn.a[(0, 0)], 0.0);
    assert_eq!(conn.a[(0, 1)], 0.0);
}

#[test]
fn pushmepullyou_connection_matches_alpha_row() {
    let p = SwimmerParams::pushmepullyou();
    let sys = Swimmer::from_params(&p).unwrap();
    let (r1, r2) = (0.9, 2.1);
    let conn = connection(&sys, &state(&sys, &[r1, r2])).unwrap();
    let (s1, c1, s2, c2) = (r1.sin(), r1.cos(), r2.sin(), r2.cos());
    let alpha = 1.0 / (0.5 + c1 * c1 + 2.0 * s1 * s1 + c2 * c2 + 2.0 * s2 * s2);
    assert!((conn.a[(0, 0)] - (-alpha * s1)).abs() < 1e-14);
    assert!((conn.a[(0, 1)] - alpha * s2).abs() < 1e-14);
}

#[test]
fn purcell3_connection_matches_brute_force_wrench_balance() {
    let mut p = SwimmerParams::purcell3();
    for r in [[0.0, 0.0], [0.3, -0.2], [1.1, 0.7]] {
        for act in [vec![0], vec![0, 1]] {
            p.actuated = act.clone();
            p.passive =
                PassiveElementSet::springs(vec![2.0; 2 - act.len()], vec![0.0; 2 - act.len()]);
            let sys = Swimmer::from_params(&p).unwrap();
            let conn = connection(&sys, &state(&sys, &r)).unwrap();
            let k = oracle_dissipation(3, 1.0, 1.0, 2.0, &r);
            let kgg = k.view((0, 0), (3, 3)).into_owned();
            let kgr = k.view((0, 3), (3, 2)).into_owned();
            let a_oracle = -kgg.lu().solve(&kgr).unwrap();
            assert!(
                (&conn.a - &a_oracle).amax() < 1e-8,
                "r = {r:?}\n{}\n{}",
                conn.a,
                a_oracle
            );
        }
    }
}

#[test]
fn purcell3_straight_chain_has_no_forward_connection() {
    let mut p = SwimmerParams::purcell3();
    p.actuated = vec![0, 1];
    p.passive = PassiveElementSet::springs(vec![], vec![]);
    let sys = Swimmer::from_params(&p).unwrap();
    let conn = connection(&sys, &state(&sys, &[0.0, 0.0])).unwrap();
    assert!(conn.a.row(0).amax() < 1e-15);
    // reversing the chain maps joint 1 ↔ joint 2 with a sign flip on the
    // lateral and rotational rows; the x row is antisymmetric under it
    let (r1, r2) = (0.4, -0.9);
    let fwd = connection(&sys, &state(&sys, &[r1, r2])).unwrap().a;
    let rev = connection(&sys, &state(&sys, &[r2, r1])).unwrap().a;
    assert!((fwd[(0, 0)] + rev[(0, 1)]).abs() < 1e-12);
    assert!((fwd[(0, 1)] + rev[(0, 0)]).abs() < 1e-12);
}

#[test]
fn chain_pfaffian_identity_holds() {
    let (_, sys) = systems().pop().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let r: Vec<f64> = (0..8).map(|_| rng.random_range(-1.5..1.5)).collect();
        let conn = connection(&sys, &state(&sys, &r)).unwrap();
        let resid = -(&conn.omega_g * &conn.a) - &conn.omega_r;
        assert!(resid.amax() < 1e-10);
    }
}

#[test]
fn singular_constraint_is_reported() {
    struct Degenerate(Partition, PassiveElementSet);
    impl SudsSystem for Degenerate {
        fn dims(&self) -> Dimensions {
            Dimensions::new(1, 0, 1).unwrap()
        }
        fn partition(&self) -> &Partition {
            &self.0
        }
        fn passive_elements(&self) -> &PassiveElementSet {
            &self.1
        }
        fn pfaffian(&self, _r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            Ok((DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0)))
        }
        fn metric(&self, _r: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::identity(1, 1))
        }
    }
    let sys = Degenerate(
        Partition::new(1, &[0]).unwrap(),
        PassiveElementSet::springs(vec![], vec![]),
    );
    let st = ShapeState::at(DVector::from_element(1, 0.3), DVector::zeros(0));
    assert!(matches!(
        connection(&sys, &st),
        Err(SudsError::SingularConstraint { .. })
    ));
    assert!(matches!(
        suds_velocity(&sys, &st, &DVector::from_element(1, 1.0)),
        Err(SudsError::SingularConstraint { .. })
    ));
}

// ---------------------------------------------------------------------------
// shape metric
// ---------------------------------------------------------------------------

#[test]
fn metric_is_symmetric_positive_definite_and_dissipative() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (p, sys) in systems() {
        for _ in 0..200 {
            let st = state(&sys, &random_shape(&p, &mut rng));
            let met = shape_metric(&sys, &st).unwrap();
            assert!((&met.m - met.m.transpose()).amax() < 1e-10);
            assert!(met.min_eigenvalue() > 0.0, "{:?}", p.variant);
            assert!((&met.m_pa - met.m_ap.transpose()).amax() < 1e-12);
            let rdot = random_vec(p.n_shape(), 2.0, &mut rng);
            let tau = -(&met.m * &rdot);
            assert!(tau.dot(&rdot) <= 0.0);
        }
    }
}

#[test]
fn purcell3_metric_reproduces_quadrature_joint_torques() {
    let p = SwimmerParams::purcell3();
    let sys = Swimmer::from_params(&p).unwrap();
    let r = [0.3, -0.2];
    let met = shape_metric(&sys, &state(&sys, &r)).unwrap();
    let k = oracle_dissipation(3, 1.0, 1.0, 2.0, &r);
    let kgg = k.view((0, 0), (3, 3)).into_owned();
    let kgr = k.view((0, 3), (3, 2)).into_owned();
    let krg = k.view((3, 0), (2, 3)).into_owned();
    let krr = k.view((3, 3), (2, 2)).into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let rdot = random_vec(2, 1.0, &mut rng);
        let ghat = -kgg.clone().lu().solve(&(&kgr * &rdot)).unwrap();
        let tau_oracle = -(&krg * &ghat + &krr * &rdot);
        let tau = -(&met.m * &rdot);
        assert!((tau - tau_oracle).amax() < 1e-8);
    }
}

#[test]
fn pushmepullyou_metric_reproduces_torque_row() {
    let p = SwimmerParams::pushmepullyou();
    let sys = Swimmer::from_params(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let r = random_shape(&p, &mut rng);
        let st = state(&sys, &r);
        let met = shape_metric(&sys, &st).unwrap();
        let conn = connection(&sys, &st).unwrap();
        let rdot = random_vec(2, 1.0, &mut rng);
        let xdot = (&conn.a * &rdot)[0];
        // γ₁ ẋ + γ₂ ṙ₁ with γ₁ = 2L² s₁, γ₂ = −2L³ + L³/12 at L = 1
        let row = 2.0 * r[0].sin() * xdot + (-2.0 + 1.0 / 12.0) * rdot[0];
        let tau = -(&met.m * &rdot);
        assert!((tau[0] - row).abs() < 1e-9);
    }
}

#[test]
fn linear_swimmer_metric_reproduces_paddle_balance() {
    let p = SwimmerParams::linear_passive();
    let sys = Swimmer::from_params(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let r = random_shape(&p, &mut rng);
        let st = state(&sys, &r);
        let met = shape_metric(&sys, &st).unwrap();
        let conn = connection(&sys, &st).unwrap();
        let rdot = random_vec(2, 1.0, &mut rng);
        let xdot = (&conn.a * &rdot)[0];
        // fluid force on the tether coordinate: −c r₂ (ẋ + ṙ₁ − ṙ₂)
        let row = -r[1] * (xdot + rdot[0] - rdot[1]);
        assert!((-(&met.m * &rdot)[0] - row).abs() < 1e-9);
    }
}

// ---------------------------------------------------------------------------
// passive force
// ---------------------------------------------------------------------------

#[test]
fn passive_force_examples() {
    let p = SwimmerParams::linear_passive();
    let part = Partition::new(2, &p.actuated).unwrap();
    let at_rest = ShapeState::at(DVector::from_element(1, 0.8), DVector::from_element(1, 1.0));
    let (f_o, f) = passive_force(&p.passive, &part, &at_rest);
    assert_eq!(f_o.amax(), 0.0);
    assert_eq!(f.amax(), 0.0);

    let stretched = ShapeState::at(DVector::from_element(1, 0.8), DVector::from_element(1, 1.2));
    let (f_o, _) = passive_force(&p.passive, &part, &stretched);
    assert!((f_o[0] + 0.2 * p.passive.stiffness[0]).abs() < 1e-15);
    assert_eq!(f_o[1], 0.0);

    let p9 = SwimmerParams::purcell9();
    let part9 = Partition::new(8, &p9.actuated).unwrap();
    let st = ShapeState::at(DVector::zeros(4), DVector::from_element(4, 0.1));
    let (f_o, _) = passive_force(&p9.passive, &part9, &st);
    let expect = [-2.0, -1.5, -1.0, -0.5];
    for (k, e) in expect.iter().enumerate() {
        assert!((f_o[4 + k] - e).abs() < 1e-14);
    }
    assert!(f_o.rows(0, 4).amax() == 0.0);

    let mut damped = p9.passive.clone();
    damped.damping = vec![0.5; 4];
    let (_, f) = passive_force(&damped, &part9, &st);
    assert_eq!(f[(5, 5)], -0.5);
    assert_eq!(f[(0, 0)], 0.0);
}

// ---------------------------------------------------------------------------
// suds velocity
// ---------------------------------------------------------------------------

#[test]
fn equilibrium_is_stationary() {
    for (p, sys) in systems() {
        let n = p.n_shape();
        let part = sys.partition().clone();
        let mut r = DVector::zeros(n);
        for (k, &i) in part.passive.iter().enumerate() {
            r[i] = p.passive.rest[k];
        }
        for &i in &part.actuated {
            r[i] = if p.variant == Variant::LinearPassive {
                0.8
            } else {
                0.4
            };
        }
        let st = ShapeState::from_full(&part, &r, &DVector::zeros(n));
        let sol = suds_velocity(&sys, &st, &DVector::zeros(part.actuated.len())).unwrap();
        assert!(sol.rdot_p.amax() < 1e-15);
        assert!(sol.ghat.to_array().iter().all(|v| v.abs() < 1e-15));
        let tau = actuated_torque(&sys, &st, &DVector::zeros(part.actuated.len())).unwrap();
        assert!(tau.amax() < 1e-15);
    }
}

#[test]
fn springs_restore_toward_rest() {
    for (p, sys) in systems() {
        let part = sys.partition().clone();
        let n = p.n_shape();
        let mut r = DVector::from_element(n, 0.3);
        if p.variant == Variant::LinearPassive {
            r[1] = 0.8;
        }
        for (k, &i) in part.passive.iter().enumerate() {
            r[i] = p.passive.rest[k] + 0.2;
        }
        let st = ShapeState::from_full(&part, &r, &DVector::zeros(n));
        let sol = suds_velocity(&sys, &st, &DVector::zeros(part.actuated.len())).unwrap();
        // spring energy rate −Σ k (r_p − rest) ṙ_p must be negative
        let power: f64 = (0..part.passive.len())
            .map(|k| p.passive.stiffness[k] * 0.2 * sol.rdot_p[k])
            .sum();
        assert!(power < 0.0, "{:?}: {}", p.variant, power);
    }
}

#[test]
fn generic_solve_matches_stacked_tether_system() {
    let p = SwimmerParams::linear_passive();
    let sys = Swimmer::from_params(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let st = state(&sys, &random_shape(&p, &mut rng));
        let rdot2 = rng.random_range(-2.0..2.0);
        let sol = suds_velocity(&sys, &st, &DVector::from_element(1, rdot2)).unwrap();
        let direct = linear_passive_swimmer_solve(&p, &st, rdot2).unwrap();
        assert!((sol.ghat.vx - direct.xdot).abs() < 1e-8);
        assert!((sol.rdot_p[0] - direct.rdot_1).abs() < 1e-8);
        assert!(direct.omega_w.abs() < 1e-12);
    }
}

#[test]
fn generic_solve_matches_pushmepullyou_system() {
    let mut p = SwimmerParams::pushmepullyou();
    for d in [0.0, 0.7] {
        p.passive.damping = vec![d];
        let sys = Swimmer::from_params(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let st = state(&sys, &random_shape(&p, &mut rng));
            let rdot2 = rng.random_range(-3.0..3.0);
            let sol = suds_velocity(&sys, &st, &DVector::from_element(1, rdot2)).unwrap();
            let (xdot, rdot1, _) = pushmepullyou_solve(&p, &st, rdot2).unwrap();
            assert!((sol.ghat.vx - xdot).abs() < 1e-8);
            assert!((sol.rdot_p[0] - rdot1).abs() < 1e-8);
        }
    }
}

#[test]
fn outputs_are_affine_in_actuated_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (p, sys) in systems() {
        let gd = sys.dims().group_dim;
        let na = sys.dims().n_a;
        for _ in 0..100 {
            let st = state(&sys, &random_shape(&p, &mut rng));
            let u = random_vec(na, 2.0, &mut rng);
            let v = random_vec(na, 2.0, &mut rng);
            let out = |x: &DVector<f64>| suds_velocity(&sys, &st, x).unwrap().stacked(gd);
            let resid = out(&(&u + &v)) - out(&u) - out(&v) + out(&DVector::zeros(na));
            assert!(resid.amax() < 1e-9);
            // collinear probes
            let (o0, o1, o2) = (out(&u), out(&(&u + &v)), out(&(&u + &v * 2.0)));
            assert!((&o2 - &o1 * 2.0 + &o0).amax() < 1e-10);
            // stored offset and gain reproduce the output
            let sol = suds_velocity(&sys, &st, &u).unwrap();
            assert!((&sol.c_tilde + &sol.b * &u - sol.stacked(gd)).amax() < 1e-10);
        }
    }
}

#[test]
fn fully_actuated_chain_reduces_to_connection() {
    let mut p = SwimmerParams::purcell3();
    p.actuated = vec![0, 1];
    p.passive = PassiveElementSet::springs(vec![], vec![]);
    let sys = Swimmer::from_params(&p).unwrap();
    let st = state(&sys, &[0.5, -0.3]);
    let rdot = DVector::from_column_slice(&[0.7, 1.1]);
    let sol = suds_velocity(&sys, &st, &rdot).unwrap();
    let conn = connection(&sys, &st).unwrap();
    let g = &conn.a * &rdot;
    assert_eq!(sol.ghat.to_array().to_vec(), g.as_slice().to_vec());
    assert_eq!(sol.rdot_p.len(), 0);
}

#[test]
fn chain_world_wrench_vanishes_at_solved_velocity() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let p = SwimmerParams::purcell3();
    let sys = Swimmer::from_params(&p).unwrap();
    for _ in 0..20 {
        let r = random_shape(&p, &mut rng);
        let st = state(&sys, &r);
        let rdot_a = random_vec(1, 2.0, &mut rng);
        let sol = suds_velocity(&sys, &st, &rdot_a).unwrap();
        let rdot = sys.partition().assemble(&rdot_a, &sol.rdot_p);
        let k = oracle_dissipation(3, 1.0, 1.0, 2.0, &r);
        let q = DVector::from_iterator(
            5,
            sol.ghat.to_array().into_iter().chain(rdot.iter().copied()),
        );
        let wrench = (k * q).rows(0, 3).into_owned();
        assert!(wrench.amax() < 1e-9, "{}", wrench);
    }
}

#[test]
fn excessive_negative_damping_is_non_dissipative() {
    // a negative damper is rejected at configuration time ...
    let mut p = SwimmerParams::purcell3();
    p.passive.damping = vec![-100.0];
    assert!(Swimmer::from_params(&p).is_err());
    // ... and a system that smuggles one in is caught by the solve
    struct Leaky(LinkChain, PassiveElementSet);
    impl SudsSystem for Leaky {
        fn dims(&self) -> Dimensions {
            self.0.dims()
        }
        fn partition(&self) -> &Partition {
            self.0.partition()
        }
        fn passive_elements(&self) -> &PassiveElementSet {
            &self.1
        }
        fn pfaffian(&self, r: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            self.0.pfaffian(r)
        }
        fn metric(&self, r: &DVector<f64>) -> Result<DMatrix<f64>> {
            self.0.metric(r)
        }
    }
    let chain = build_link_chain(3, &SwimmerParams::purcell3()).unwrap();
    let sys = Leaky(
        chain,
        PassiveElementSet::new(vec![2.0], vec![0.0], vec![-100.0]),
    );
    let st = state(&sys, &[0.1, 0.1]);
    assert!(matches!(
        suds_velocity(&sys, &st, &DVector::from_element(1, 0.0)),
        Err(SudsError::NonDissipative { .. })
    ));
}

// ---------------------------------------------------------------------------
// actuated torque
// ---------------------------------------------------------------------------

#[test]
fn actuated_torque_matches_metric_rows_and_dissipates() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (p, sys) in systems() {
        for _ in 0..50 {
            let st = state(&sys, &random_shape(&p, &mut rng));
            let na = sys.dims().n_a;
            let rdot_a = random_vec(na, 2.0, &mut rng);
            let tau_a = actuated_torque(&sys, &st, &rdot_a).unwrap();
            let sol = suds_velocity(&sys, &st, &rdot_a).unwrap();
            let met = shape_metric(&sys, &st).unwrap();
            let rdot = sys.partition().assemble(&rdot_a, &sol.rdot_p);
            let tau = -(&met.m * &rdot);
            let tau_rows = sys.partition().actuated_of(&tau);
            assert!((&tau_a - &tau_rows).amax() < 1e-10);
            assert!(tau.dot(&rdot) <= 0.0);
        }
    }
}

#[test]
fn actuated_torque_is_affine() {
    let p = SwimmerParams::purcell9();
    let sys = Swimmer::from_params(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let st = state(&sys, &random_shape(&p, &mut rng));
    let u = random_vec(4, 1.0, &mut rng);
    let v = random_vec(4, 1.0, &mut rng);
    let t = |x: &DVector<f64>| actuated_torque(&sys, &st, x).unwrap();
    let resid = t(&(&u + &v)) - t(&u) - t(&v) + t(&DVector::zeros(4));
    assert!(resid.amax() < 1e-9);
}

// ---------------------------------------------------------------------------
// closed-form solvers
// ---------------------------------------------------------------------------

#[test]
fn tether_system_examples() {
    let p = SwimmerParams::linear_passive();
    let sys = Swimmer::from_params(&p).unwrap();
    let eq = linear_passive_swimmer_solve(&p, &state(&sys, &[1.0, 0.75]), 0.0).unwrap();
    assert_eq!((eq.xdot, eq.omega_w, eq.rdot_1), (0.0, 0.0, 0.0));

    // elimination by hand: ω = 0, 0.5 ẋ = k (r₁ − l_k) = 0.1, then the
    // first row gives 0.75 ṙ₁ = 0.225 − 1.25·0.2
    let sol = linear_passive_swimmer_solve(&p, &state(&sys, &[1.1, 0.75]), 0.3).unwrap();
    assert!((sol.xdot - 0.2).abs() < 1e-14);
    assert!(sol.omega_w.abs() < 1e-14);
    assert!((sol.rdot_1 + 1.0 / 30.0).abs() < 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let r = random_shape(&p, &mut rng);
        let rdot2 = rng.random_range(-1.0..1.0);
        let s = linear_passive_swimmer_solve(&p, &state(&sys, &r), rdot2).unwrap();
        let (l, c, r2) = (0.5, 1.0, r[1]);
        let resid = l * c * s.xdot + c * r2 * (s.xdot + s.rdot_1 - rdot2);
        assert!(resid.abs() < 1e-12);
    }
}

#[test]
fn pushmepullyou_solver_examples() {
    let p = SwimmerParams::pushmepullyou();
    let sys = Swimmer::from_params(&p).unwrap();
    let (_, _, diag) = pushmepullyou_solve(&p, &state(&sys, &[PI / 2.0, PI / 2.0]), 0.0).unwrap();
    assert!((diag.alpha - 2.0 / 9.0).abs() < 1e-15);
    assert!((diag.gamma_2 - (-2.0 + 1.0 / 12.0)).abs() < 1e-15);

    let (xdot, rdot1, _) = pushmepullyou_solve(&p, &state(&sys, &[PI / 2.0, 1.0]), 0.0).unwrap();
    assert_eq!((xdot, rdot1), (0.0, 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..100 {
        let r = random_shape(&p, &mut rng);
        let rdot2 = rng.random_range(-1.0..1.0);
        let (xdot, rdot1, d) = pushmepullyou_solve(&p, &state(&sys, &r), rdot2).unwrap();
        let row1 = xdot / d.alpha + d.sin[0] * rdot1 - d.sin[1] * rdot2;
        let row2 = d.gamma_1 * xdot + d.gamma_2 * rdot1 - 10.0 * (r[0] - PI / 2.0);
        assert!(row1.abs() < 1e-12 && row2.abs() < 1e-12);
    }
}

#[test]
fn link_chain_dimensions_and_errors() {
    let sys = Swimmer::from_params(&SwimmerParams::purcell9()).unwrap();
    assert_eq!(
        sys.dims(),
        Dimensions {
            n: 8,
            n_a: 4,
            n_p: 4,
            group_dim: 3
        }
    );
    let mut p = SwimmerParams::purcell3();
    assert!(build_link_chain(4, &p).is_err());
    p.link_length = -1.0;
    assert!(matches!(build_link_chain(3, &p), Err(SudsError::Config(_))));
    let mut p = SwimmerParams::purcell3();
    p.drag = 0.0;
    assert!(matches!(build_link_chain(3, &p), Err(SudsError::Config(_))));
    // odd counts beyond the presets are fine
    let mut p = SwimmerParams::purcell3();
    p.actuated = vec![0, 1];
    p.passive = PassiveElementSet::springs(vec![1.0; 2], vec![0.0; 2]);
    let c5 = build_link_chain(5, &p).unwrap();
    assert_eq!(c5.dims().n, 4);
    assert_eq!(c5.body_link, 2);
}

#[test]
fn shape_state_dimension_mismatch() {
    let sys = Swimmer::from_params(&SwimmerParams::purcell3()).unwrap();
    let st = ShapeState::at(DVector::zeros(2), DVector::zeros(1));
    assert!(matches!(
        connection(&sys, &st),
        Err(SudsError::DimensionMismatch(_))
    ));
}

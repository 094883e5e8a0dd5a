use super::*;
use crate::cases::{CaseName, ManufacturedCase};
use crate::fem::interpolate;
use crate::harness::random_state;
use crate::mesh::uniform_split_mesh;
use proptest::prelude::*;

fn setup(
    n: usize,
    order: SchemeOrder,
    dt: f64,
    alpha: f64,
    steps: usize,
) -> (CoupledMesh, SchemeParams, Operators) {
    let mesh = uniform_split_mesh(n).unwrap();
    let params = SchemeParams::new(order, dt, alpha, 1.0, 1.0, dt * steps as f64).unwrap();
    let ops = Operators::new(&mesh, &params);
    (mesh, params, ops)
}

/// Dense element-by-element assembly over a dof map, written without the
/// sparse machinery.
fn dense_matrices(mesh: &CoupledMesh, dofs: &DofMap) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = dofs.n_dofs();
    let mut m = vec![vec![0.0; n]; n];
    let mut k = vec![vec![0.0; n]; n];
    for tri in mesh.triangles(dofs.subdomain) {
        let p = tri.map(|i| mesh.nodes[i]);
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|a| {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                [
                    (p[b][1] - p[c][1]) / (2.0 * area),
                    (p[c][0] - p[b][0]) / (2.0 * area),
                ]
            })
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                let (Some(i), Some(j)) = (dofs.dof(tri[a]), dofs.dof(tri[b])) else {
                    continue;
                };
                m[i][j] += area * if a == b { 1.0 / 6.0 } else { 1.0 / 12.0 };
                k[i][j] += area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
            }
        }
    }
    (m, k)
}

/// Dense interface mass restricted to the dofs of one side.
fn dense_interface(mesh: &CoupledMesh, dofs: &DofMap) -> Vec<Vec<f64>> {
    let n = dofs.n_dofs();
    let mut s = vec![vec![0.0; n]; n];
    for &[a, b] in &mesh.interface_segments {
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        for (x, y, v) in [
            (a, a, len / 3.0),
            (b, b, len / 3.0),
            (a, b, len / 6.0),
            (b, a, len / 6.0),
        ] {
            if let (Some(i), Some(j)) = (dofs.dof(x), dofs.dof(y)) {
                s[i][j] += v;
            }
        }
    }
    s
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            let pivot_row = a[c].clone();
            for (ark, ack) in a[r][c..].iter_mut().zip(&pivot_row[c..]) {
                *ark -= f * ack;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn mv(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[test]
fn difference_operators() {
    assert_eq!(ddt(&[3.0], &[1.0], 0.5).unwrap(), vec![4.0]);
    assert_eq!(avg(&[3.0], &[1.0]).unwrap(), vec![2.0]);
    assert_eq!(ddt2(&[1.0], &[0.0], &[1.0], 1.0).unwrap(), vec![2.0]);
    assert!(matches!(
        ddt(&[1.0, 2.0], &[1.0], 1.0),
        Err(SchemeError::LengthMismatch { left: 2, right: 1 })
    ));
}

#[test]
fn params_validation() {
    assert!(SchemeParams::new(SchemeOrder::BackwardEuler, 0.1, 1.0, 1.0, 1.0, 0.25).is_err());
    assert!(SchemeParams::new(SchemeOrder::BackwardEuler, 0.05, -1.0, 1.0, 1.0, 0.25).is_err());
    let p = SchemeParams::new(SchemeOrder::Newmark, 0.0625, 1.0, 1.0, 1.0, 0.25).unwrap();
    assert_eq!(p.n_steps, 4);
    assert_eq!(SchemeOrder::from_k(2).unwrap(), SchemeOrder::Newmark);
    assert!(SchemeOrder::from_k(3).is_err());
}

#[test]
fn zero_state_stays_zero() {
    for order in [SchemeOrder::BackwardEuler, SchemeOrder::Newmark] {
        let (mesh, params, ops) = setup(4, order, 0.25, 1.0, 1);
        let zero = SchemeState::zeros(&ops);
        let next = advance(&params, &mesh, &ops, &zero, &ZeroSources).unwrap();
        assert!(next
            .u
            .values
            .iter()
            .chain(&next.w.values)
            .chain(&next.q.values)
            .all(|v| *v == 0.0));
        assert!(next.lambda.values.iter().all(|v| *v == 0.0));
        assert_eq!(next.step_index, 1);
    }
}

#[test]
fn half_steps_match_dense_reference() {
    for order in [SchemeOrder::BackwardEuler, SchemeOrder::Newmark] {
        for alpha in [0.1, 1.0, 10.0] {
            let (mesh, params, ops) = setup(4, order, 0.125, alpha, 2);
            let state = random_state(&ops, order, 3);
            // homogeneous data so the reference needs no load vectors
            let (w, q) = solid_step(&params, &mesh, &ops, &state, &ZeroSources, 0.125).unwrap();
            let (u, lambda) =
                fluid_step(&params, &mesh, &ops, &state, &w, &q, &ZeroSources, 0.125).unwrap();

            let dt = params.dt;
            let (ms, ks) = dense_matrices(&mesh, &ops.dofs_s);
            let ss = dense_interface(&mesh, &ops.dofs_s);
            let (mf, kf) = dense_matrices(&mesh, &ops.dofs_f);
            let sf = dense_interface(&mesh, &ops.dofs_f);
            let ns = ms.len();
            let nf = mf.len();

            // lambda at end points lives off the solid dofs; its interface
            // coupling to neighbours still enters the right-hand side
            let full_lam: Vec<f64> = mv(&dense_full_sigma(&mesh), &state.lambda.values);
            let full_u: Vec<f64> = mv(
                &dense_full_sigma(&mesh),
                &trace_restrict(&state.u, &ops.dofs_f).values,
            );

            let (a_coef, k_coef, s_coef) = match order {
                SchemeOrder::BackwardEuler => (1.0 / dt, 1.0, alpha),
                SchemeOrder::Newmark => (2.0 / (dt * dt), 0.5, alpha / dt),
            };
            let lhs: Vec<Vec<f64>> = (0..ns)
                .map(|i| {
                    (0..ns)
                        .map(|j| a_coef * ms[i][j] + k_coef * ks[i][j] + s_coef * ss[i][j])
                        .collect()
                })
                .collect();
            let mw = mv(&ms, &state.w.values);
            let mut rhs: Vec<f64> = match order {
                SchemeOrder::BackwardEuler => mw.iter().map(|v| v / dt).collect(),
                SchemeOrder::Newmark => {
                    let mq = mv(&ms, &state.q.values);
                    let kw = mv(&ks, &state.w.values);
                    let sw = mv(&ss, &state.w.values);
                    (0..ns)
                        .map(|i| {
                            2.0 / (dt * dt) * mw[i] + 2.0 / dt * mq[i] - 0.5 * kw[i]
                                + alpha / dt * sw[i]
                        })
                        .collect()
                }
            };
            for (t, d) in ops.dofs_s.interface_dofs().iter().enumerate() {
                if let Some(d) = d {
                    rhs[*d] += alpha * full_u[t] - full_lam[t];
                }
            }
            let w_ref = gauss_solve(lhs, rhs);
            assert!(
                max_diff(&w.values, &w_ref) < 1e-9 * max_abs(&w_ref).max(1.0),
                "{order} alpha {alpha}"
            );

            // fluid: velocity trace from the reference solid values
            let w_trace =
                trace_restrict(&Field::new(Subdomain::Solid, w_ref.clone()), &ops.dofs_s).values;
            let vel: Vec<f64> = match order {
                SchemeOrder::BackwardEuler => w_trace,
                SchemeOrder::Newmark => {
                    let prev = trace_restrict(&state.w, &ops.dofs_s).values;
                    w_trace
                        .iter()
                        .zip(&prev)
                        .map(|(a, b)| (a - b) / dt)
                        .collect()
                }
            };
            let coupling: Vec<f64> = state
                .lambda
                .values
                .iter()
                .zip(&vel)
                .map(|(l, v)| l + alpha * v)
                .collect();
            let coupling = mv(&dense_full_sigma(&mesh), &coupling);
            let lhs: Vec<Vec<f64>> = (0..nf)
                .map(|i| {
                    (0..nf)
                        .map(|j| mf[i][j] / dt + kf[i][j] + alpha * sf[i][j])
                        .collect()
                })
                .collect();
            let mut rhs: Vec<f64> = mv(&mf, &state.u.values).iter().map(|v| v / dt).collect();
            for (t, d) in ops.dofs_f.interface_dofs().iter().enumerate() {
                if let Some(d) = d {
                    rhs[*d] += coupling[t];
                }
            }
            let u_ref = gauss_solve(lhs, rhs);
            assert!(
                max_diff(&u.values, &u_ref) < 1e-9 * max_abs(&u_ref).max(1.0),
                "{order} alpha {alpha}"
            );

            let u_trace = trace_restrict(&Field::new(Subdomain::Fluid, u_ref), &ops.dofs_f).values;
            let lam_ref: Vec<f64> = (0..vel.len())
                .map(|i| state.lambda.values[i] - alpha * (u_trace[i] - vel[i]))
                .collect();
            assert!(max_diff(&lambda.values, &lam_ref) < 1e-9 * max_abs(&lam_ref).max(1.0));
        }
    }
}

/// Interface mass over all trace nodes, in trace order.
fn dense_full_sigma(mesh: &CoupledMesh) -> Vec<Vec<f64>> {
    let n = mesh.interface_nodes.len();
    let pos = |node: usize| {
        mesh.interface_nodes
            .iter()
            .position(|&m| m == node)
            .unwrap()
    };
    let mut s = vec![vec![0.0; n]; n];
    for &[a, b] in &mesh.interface_segments {
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let (i, j) = (pos(a), pos(b));
        s[i][i] += len / 3.0;
        s[j][j] += len / 3.0;
        s[i][j] += len / 6.0;
        s[j][i] += len / 6.0;
    }
    s
}

#[test]
fn multiplier_update_holds_coefficientwise() {
    for (order, name) in [
        (SchemeOrder::BackwardEuler, CaseName::PpUniform),
        (SchemeOrder::Newmark, CaseName::PhUniform),
    ] {
        let (mesh, params, ops) = setup(8, order, 0.05, 1.0, 5);
        let sources = ManufacturedCase::new(name);
        let mut state = random_state(&ops, order, 5);
        for _ in 0..5 {
            let t_next = params.time(state.step_index + 1);
            let next = advance(&params, &mesh, &ops, &state, &sources).unwrap();
            let g_d = interpolate_trace(&mesh, |x, t| sources.kinematic_data(x, t), t_next).values;
            let u_tr = trace_restrict(&next.u, &ops.dofs_f).values;
            let w_tr = trace_restrict(&next.w, &ops.dofs_s).values;
            let w_prev = trace_restrict(&state.w, &ops.dofs_s).values;
            for i in 0..ops.n_trace() {
                let vel = match order {
                    SchemeOrder::BackwardEuler => w_tr[i],
                    SchemeOrder::Newmark => (w_tr[i] - w_prev[i]) / params.dt,
                };
                let expected = state.lambda.values[i] - params.alpha * (u_tr[i] - vel + g_d[i]);
                assert!((next.lambda.values[i] - expected).abs() < 1e-12);
            }
            state = next;
        }
    }
}

#[test]
fn newmark_velocity_is_midpoint_difference() {
    let (mesh, params, ops) = setup(8, SchemeOrder::Newmark, 0.1, 1.0, 5);
    let outcome = run(
        &params,
        &mesh,
        &ops,
        &ZeroSources,
        random_state(&ops, SchemeOrder::Newmark, 9),
        |_, _| {},
    )
    .unwrap();
    let mut state = random_state(&ops, SchemeOrder::Newmark, 9);
    for _ in 0..5 {
        let next = advance(&params, &mesh, &ops, &state, &ZeroSources).unwrap();
        let lhs = ddt(&next.w.values, &state.w.values, params.dt).unwrap();
        let rhs = avg(&next.q.values, &state.q.values).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-9 * max_abs(&rhs).max(1.0));
        state = next;
    }
    assert_eq!(outcome.final_state, state);
}

#[test]
fn energy_balance_closes() {
    for order in [SchemeOrder::BackwardEuler, SchemeOrder::Newmark] {
        for alpha in [0.1, 1.0, 10.0] {
            let (mesh, params, ops) = setup(4, order, 0.1, alpha, 10);
            let out = run(
                &params,
                &mesh,
                &ops,
                &ZeroSources,
                random_state(&ops, order, 1),
                |_, _| {},
            )
            .unwrap();
            assert_eq!(out.ledger.z.len(), 11);
            assert!(
                out.ledger.max_relative_defect(1e-300) < 1e-10,
                "{order} {alpha}"
            );
            assert!(out.ledger.s.iter().all(|s| *s >= 0.0));
        }
    }
}

#[test]
fn stored_energy_never_grows() {
    for order in [SchemeOrder::BackwardEuler, SchemeOrder::Newmark] {
        for dt in [0.5, 0.1, 0.01] {
            let (mesh, params, ops) = setup(4, order, dt, 1.0, 10);
            let out = run(
                &params,
                &mesh,
                &ops,
                &ZeroSources,
                random_state(&ops, order, 2),
                |_, _| {},
            )
            .unwrap();
            let z0 = out.ledger.z[0];
            assert!(
                out.ledger.z.iter().all(|z| *z <= z0 * (1.0 + 1e-12)),
                "{order} dt {dt}"
            );
        }
    }
}

#[test]
fn ledger_csv() {
    let ledger = EnergyLedger {
        z: vec![2.0, 1.5],
        s: vec![0.5],
    };
    assert_eq!(ledger.defects(), vec![0.0, 0.0]);
    let mut buf = Vec::new();
    ledger.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("n,Z,S,Z_plus_cumS\n0,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn first_order_requires_equal_displacement_and_velocity() {
    let (mesh, params, ops) = setup(4, SchemeOrder::BackwardEuler, 0.25, 1.0, 1);
    let mut s = SchemeState::zeros(&ops);
    s.q.values[0] = 1.0;
    assert!(run(&params, &mesh, &ops, &ZeroSources, s, |_, _| {}).is_err());
}

#[test]
fn mismatched_operators_are_rejected() {
    let (mesh, params, ops) = setup(4, SchemeOrder::BackwardEuler, 0.25, 1.0, 1);
    let other = SchemeParams {
        alpha: 2.0,
        ..params
    };
    let s = SchemeState::zeros(&ops);
    assert!(matches!(
        advance(&other, &mesh, &ops, &s, &ZeroSources),
        Err(SchemeError::InvalidParams(_))
    ));
}

#[test]
fn monolithic_zero_and_constraint() {
    for order in [SchemeOrder::BackwardEuler, SchemeOrder::Newmark] {
        let (mesh, params, ops) = setup(8, order, 0.125, 1.0, 2);
        let mono = MonolithicStepper::new(&ops, &params).unwrap();
        let zero = SchemeState::zeros(&ops);
        let next = mono
            .step(&params, &mesh, &ops, &zero, &ZeroSources)
            .unwrap();
        assert!(max_abs(&next.u.values) == 0.0 && max_abs(&next.w.values) == 0.0);

        let state = random_state(&ops, order, 4);
        let next = mono
            .step(&params, &mesh, &ops, &state, &ZeroSources)
            .unwrap();
        let res = mono.constraint_residual(&next);
        assert!(max_abs(&res) < 1e-12, "{order}: {}", max_abs(&res));
        let endpoints = [0, ops.n_trace() - 1];
        assert!(endpoints.iter().all(|&i| next.lambda.values[i] == 0.0));
    }
}

#[test]
fn monolithic_tracks_exact_solution() {
    let case = ManufacturedCase::new(CaseName::PpConforming);
    let (mesh, params, ops) = setup(16, SchemeOrder::BackwardEuler, 1.0 / 16.0, 1.0, 4);
    let mut state = SchemeState {
        step_index: 0,
        u: interpolate(&mesh, &ops.dofs_f, |x, t| case.u(x, t), 0.0),
        w: interpolate(&mesh, &ops.dofs_s, |x, t| case.w(x, t), 0.0),
        q: interpolate(&mesh, &ops.dofs_s, |x, t| case.w(x, t), 0.0),
        lambda: lambda0_from_exact(|x, t| case.l_consistent(x, t), &mesh),
    };
    let mono = MonolithicStepper::new(&ops, &params).unwrap();
    for _ in 0..4 {
        state = mono.step(&params, &mesh, &ops, &state, &case).unwrap();
    }
    let exact = interpolate(&mesh, &ops.dofs_f, |x, t| case.u(x, t), 0.25);
    assert!(max_diff(&state.u.values, &exact.values) < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn energy_identity_for_any_coefficients(
        k in 1u8..=2,
        alpha in 0.05f64..20.0,
        nu_f in 0.1f64..5.0,
        nu_s in 0.1f64..5.0,
        dt in 0.01f64..0.5,
        seed in 0u64..1000,
    ) {
        let order = SchemeOrder::from_k(k).unwrap();
        let mesh = uniform_split_mesh(4).unwrap();
        let params = SchemeParams::new(order, dt, alpha, nu_f, nu_s, 5.0 * dt).unwrap();
        let ops = Operators::new(&mesh, &params);
        let out = run(&params, &mesh, &ops, &ZeroSources, random_state(&ops, order, seed), |_, _| {}).unwrap();
        prop_assert!(out.ledger.max_relative_defect(1e-300) < 1e-10);
    }
}

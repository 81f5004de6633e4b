use super::*;
use crate::dynamics::{hover_command, step_rk4_timed, PlanarState, QuadParams};
use approx::assert_abs_diff_eq;

fn p() -> QuadParams {
    QuadParams::default()
}

fn small_cfg(num_nodes: usize) -> OcpConfig {
    OcpConfig {
        num_nodes,
        x0: PlanarState::new(-1.0, 0.5, 0.3, -0.2, 0.1, 0.05),
        ..Default::default()
    }
}

/// Fills a decision vector with a smooth, strictly interior profile so
/// finite differences are well behaved.
fn interior_point(prob: &NlpProblem) -> Vec<f64> {
    let k = prob.cfg.num_nodes;
    let mut z = prob.initial_guess();
    for i in 0..k {
        let w = i as f64 / (k - 1) as f64;
        z[prob.uidx(i)] = 0.3 + 0.2 * (3.0 * w).sin().abs();
        z[prob.uidx(i) + 1] = 0.4 + 0.15 * (2.0 * w).cos().abs();
        let s = prob.sidx(i);
        z[s + 2] += 0.1 * (5.0 * w).sin();
        z[s + 4] += 0.05 * (4.0 * w).cos();
    }
    for s in 0..k - 1 {
        let w = s as f64 / (k - 1) as f64;
        z[prob.midx(s)] = 0.35 + 0.1 * (7.0 * w).sin().abs();
        z[prob.midx(s) + 1] = 0.45 + 0.1 * (6.0 * w).cos().abs();
    }
    z[prob.tf_idx()] = 1.7;
    z
}

#[test]
fn structure_counts_k3() {
    let prob = transcribe(&small_cfg(3), &p()).unwrap();
    assert_eq!(prob.num_defect_rows(), 12);
    assert_eq!(prob.num_boundary_rows(), 12);
    assert_eq!(prob.num_vars(), 18 + 6 + 4 + 1);
}

#[test]
fn transcribe_rejects_bad_configs() {
    let mut cfg = small_cfg(5);
    cfg.epsilon = 1.5;
    assert!(matches!(transcribe(&cfg, &p()), Err(OcpError::InvalidConfig(_))));
    let mut cfg = small_cfg(2);
    cfg.epsilon = 0.2;
    assert!(transcribe(&cfg, &p()).is_err());
    let mut cfg = small_cfg(5);
    cfg.tf_bounds = (0.0, 2.0);
    assert!(transcribe(&cfg, &p()).is_err());
}

#[test]
fn eval_cost_layout_mismatch() {
    let prob = transcribe(&small_cfg(5), &p()).unwrap();
    let z = vec![0.0; prob.num_vars() - 1];
    assert!(matches!(prob.eval_cost(&z), Err(OcpError::LayoutMismatch { .. })));
}

#[test]
fn eval_cost_pure_time() {
    let mut cfg = small_cfg(5);
    cfg.epsilon = 0.0;
    let prob = transcribe(&cfg, &p()).unwrap();
    let mut z = interior_point(&prob);
    z[prob.tf_idx()] = 2.0;
    assert_abs_diff_eq!(prob.eval_cost(&z).unwrap(), 2.0, epsilon = 1e-12);
}

#[test]
fn eval_cost_constant_controls() {
    // ε=0.2, u1=u2=0.25121 everywhere, tf=2:
    // J = 0.8*2 + 0.2*2*(2*0.25121^2)
    let mut cfg = small_cfg(9);
    cfg.epsilon = 0.2;
    let prob = transcribe(&cfg, &p()).unwrap();
    let mut z = prob.initial_guess();
    for i in 0..9 {
        z[prob.uidx(i)] = 0.25121;
        z[prob.uidx(i) + 1] = 0.25121;
    }
    for s in 0..8 {
        z[prob.midx(s)] = 0.25121;
        z[prob.midx(s) + 1] = 0.25121;
    }
    z[prob.tf_idx()] = 2.0;
    assert_abs_diff_eq!(prob.eval_cost(&z).unwrap(), 1.650_485, epsilon = 1e-4);
}

#[test]
fn eval_cost_pure_power_zero_controls() {
    let mut cfg = small_cfg(7);
    cfg.epsilon = 1.0;
    let prob = transcribe(&cfg, &p()).unwrap();
    let mut z = prob.initial_guess();
    for i in 0..7 {
        z[prob.uidx(i)] = 0.0;
        z[prob.uidx(i) + 1] = 0.0;
    }
    for s in 0..6 {
        z[prob.midx(s)] = 0.0;
        z[prob.midx(s) + 1] = 0.0;
    }
    assert_eq!(prob.eval_cost(&z).unwrap(), 0.0);
}

#[test]
fn cost_gradient_matches_central_differences() {
    let prob = transcribe(&small_cfg(7), &p()).unwrap();
    let z = interior_point(&prob);
    let mut grad = vec![0.0; prob.num_vars()];
    prob.eval_cost_grad(&z, &mut grad).unwrap();

    let h = 1e-6;
    for i in 0..prob.num_vars() {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[i] += h;
        zm[i] -= h;
        let fd = (prob.eval_cost(&zp).unwrap() - prob.eval_cost(&zm).unwrap()) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs()).max(1e-8);
        assert!(
            (grad[i] - fd).abs() / scale < 1e-6,
            "cost grad mismatch at {i}: analytic {} vs fd {}",
            grad[i],
            fd
        );
    }
}

#[test]
fn al_gradient_matches_central_differences() {
    for tie in [false, true] {
        let mut cfg = small_cfg(6);
        cfg.tie_controls = tie;
        let prob = transcribe(&cfg, &p()).unwrap();
        let z = interior_point(&prob);
        let rows = prob.num_rows();
        let lambda: Vec<f64> = (0..rows).map(|i| 0.1 * ((i as f64 * 0.7).sin())).collect();
        let mu = 7.3;

        let mut ws = Workspace::new();
        let mut grad = vec![0.0; prob.num_vars()];
        prob.al_eval(&z, &lambda, mu, Some(&mut grad), &mut ws);

        let h = 1e-6;
        for i in 0..prob.num_vars() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let fp = prob.al_eval(&zp, &lambda, mu, None, &mut ws);
            let fm = prob.al_eval(&zm, &lambda, mu, None, &mut ws);
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(
                (grad[i] - fd).abs() / scale < 1e-5,
                "AL grad mismatch (tie={tie}) at {i}: analytic {} vs fd {}",
                grad[i],
                fd
            );
        }
    }
}

#[test]
fn analytic_jacobian_blocks_match_dynamics_fd() {
    // A = ∂f/∂x and B = ∂f/∂u at a generic point, probed through Aᵀv / Bᵀv.
    let params = p();
    let consts = PlantConsts::from(&params);
    let y = StateVec::new(0.3, -0.8, 1.2, -0.4, 0.6, 0.9);
    let (u1, u2) = (0.3, 0.7);
    let pt = Pt::eval(&y, u1, u2, &consts);

    let h = 1e-7;
    for unit in 0..6 {
        let mut v = StateVec::zeros();
        v[unit] = 1.0;
        let atv = pt.at_v(&v, consts.beta);
        // row `unit` of A via FD on f
        for j in 0..6 {
            let mut yp = y;
            let mut ym = y;
            yp[j] += h;
            ym[j] -= h;
            let fp = Pt::eval(&yp, u1, u2, &consts).f;
            let fm = Pt::eval(&ym, u1, u2, &consts).f;
            let a_ij = (fp[unit] - fm[unit]) / (2.0 * h);
            assert_abs_diff_eq!(atv[j], a_ij, epsilon = 1e-6);
        }
        let btv = pt.bt_v(&v, &consts);
        for (col, b) in [btv.0, btv.1].iter().enumerate() {
            let (mut up, mut um) = ((u1, u2), (u1, u2));
            if col == 0 {
                up.0 += h;
                um.0 -= h;
            } else {
                up.1 += h;
                um.1 -= h;
            }
            let fp = Pt::eval(&y, up.0, up.1, &consts).f;
            let fm = Pt::eval(&y, um.0, um.1, &consts).f;
            let b_ij = (fp[unit] - fm[unit]) / (2.0 * h);
            assert_abs_diff_eq!(*b, b_ij, epsilon = 1e-6);
        }
    }
}

#[test]
fn jac_vec_matches_fd_of_residuals() {
    for tie in [false, true] {
        let mut cfg = small_cfg(6);
        cfg.tie_controls = tie;
        let prob = transcribe(&cfg, &p()).unwrap();
        let z = interior_point(&prob);
        let mut ws = Workspace::new();
        let n = prob.num_vars();
        let rows = prob.num_rows();

        let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin()).collect();
        let mut jv = vec![0.0; rows];
        prob.jac_vec(&z, &v, &mut jv, &mut ws);

        let h = 1e-7;
        let mut zp = z.clone();
        let mut zm = z.clone();
        for i in 0..n {
            zp[i] = z[i] + h * v[i];
            zm[i] = z[i] - h * v[i];
        }
        let mut rp = vec![0.0; rows];
        let mut rm = vec![0.0; rows];
        prob.residuals(&zp, &mut rp);
        prob.residuals(&zm, &mut rm);
        for r in 0..rows {
            let fd = (rp[r] - rm[r]) / (2.0 * h);
            assert!(
                (jv[r] - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                "jac_vec mismatch (tie={tie}) row {r}: {} vs fd {}",
                jv[r],
                fd
            );
        }
    }
}

#[test]
fn grad_weighted_matches_al_at_zero_mu() {
    let prob = transcribe(&small_cfg(6), &p()).unwrap();
    let z = interior_point(&prob);
    let rows = prob.num_rows();
    let y: Vec<f64> = (0..rows).map(|i| 0.3 * ((i as f64) * 0.9).cos()).collect();
    let mut ws = Workspace::new();
    let mut g1 = vec![0.0; prob.num_vars()];
    let mut g2 = vec![0.0; prob.num_vars()];
    prob.grad_weighted(&z, &y, &mut g1, &mut ws);
    prob.al_eval(&z, &y, 0.0, Some(&mut g2), &mut ws);
    for i in 0..g1.len() {
        assert_abs_diff_eq!(g1[i], g2[i], epsilon = 1e-10);
    }
}

#[test]
fn jac_t_vec_is_adjoint_of_jac_vec() {
    let prob = transcribe(&small_cfg(6), &p()).unwrap();
    let z = interior_point(&prob);
    let n = prob.num_vars();
    let rows = prob.num_rows();
    let mut ws = Workspace::new();
    let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.61).cos()).collect();
    let w: Vec<f64> = (0..rows).map(|i| ((i as f64) * 0.23).sin()).collect();
    let mut jv = vec![0.0; rows];
    let mut jtw = vec![0.0; n];
    prob.jac_vec(&z, &v, &mut jv, &mut ws);
    prob.jac_t_vec(&z, &w, &mut jtw, &mut ws);
    let lhs: f64 = jv.iter().zip(&w).map(|(a, b)| a * b).sum();
    let rhs: f64 = jtw.iter().zip(&v).map(|(a, b)| a * b).sum();
    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10 * (1.0 + lhs.abs()));
}

#[test]
fn assembled_hessian_matches_fd_of_al_gradient() {
    // Moderate mu so that plain finite differences of the AL gradient are
    // trustworthy; the assembled Hessian must reproduce them.
    let prob = transcribe(&small_cfg(5), &p()).unwrap();
    let z = interior_point(&prob);
    let n = prob.num_vars();
    let rows = prob.num_rows();
    let mu = 47.3;
    let lambda: Vec<f64> = (0..rows).map(|i| 0.2 * ((i as f64) * 1.3).sin()).collect();
    let mut ws = Workspace::new();

    // y = lambda + mu*c(z)
    let mut resid = vec![0.0; rows];
    prob.residuals(&z, &mut resid);
    let y: Vec<f64> = (0..rows).map(|r| lambda[r] + mu * resid[r]).collect();

    // assemble H = B_fd + mu J^T J exactly as the solver does
    let mut g_base = vec![0.0; n];
    prob.grad_weighted(&z, &y, &mut g_base, &mut ws);
    let mut hess = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut zp = z.clone();
    let mut g_pert = vec![0.0; n];
    for j in 0..n {
        let eps = 1e-6 * (1.0 + z[j].abs());
        zp[j] = z[j] + eps;
        prob.grad_weighted(&zp, &y, &mut g_pert, &mut ws);
        zp[j] = z[j];
        for i in 0..n {
            hess[(i, j)] = (g_pert[i] - g_base[i]) / eps;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (hess[(i, j)] + hess[(j, i)]);
            hess[(i, j)] = s;
            hess[(j, i)] = s;
        }
    }
    prob.add_jtj(&z, mu, &mut hess);

    // compare H v against central differences of the AL gradient
    let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.53).sin()).collect();
    let mut hv = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            hv[i] += hess[(i, j)] * v[j];
        }
    }
    let h = 1e-6;
    let mut zp = z.clone();
    let mut zm = z.clone();
    for i in 0..n {
        zp[i] = z[i] + h * v[i];
        zm[i] = z[i] - h * v[i];
    }
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    prob.al_eval(&zp, &lambda, mu, Some(&mut gp), &mut ws);
    prob.al_eval(&zm, &lambda, mu, Some(&mut gm), &mut ws);
    for i in 0..n {
        let fd = (gp[i] - gm[i]) / (2.0 * h);
        assert!(
            (hv[i] - fd).abs() < 2e-3 * (1.0 + fd.abs()),
            "hessian mismatch at {i}: {} vs fd {}",
            hv[i],
            fd
        );
    }
}

#[test]
fn dense_integration_satisfies_defects_to_high_order() {
    // Densely integrate a smooth control profile, resample onto the grid and
    // evaluate the defects. They should be tiny and shrink ~2^5 when the grid
    // is refined 2x.
    let params = p();
    let tf = 1.6;
    let u_of_t = |t: f64| (0.3 + 0.15 * (2.0 * t).sin(), 0.35 + 0.1 * (3.0 * t).cos());

    let defect_for = |k: usize| -> f64 {
        let mut cfg = small_cfg(k);
        cfg.x0 = PlanarState::new(0.0, 0.0, 0.5, 0.0, 0.05, 0.0);
        let prob = transcribe(&cfg, &params).unwrap();
        let mut z = vec![0.0; prob.num_vars()];
        z[prob.tf_idx()] = tf;

        // integrate densely, recording states at node times
        let dt = 1e-5;
        let mut y = cfg.x0.to_vector();
        let mut t = 0.0;
        let node_times: Vec<f64> = (0..k).map(|i| tf * i as f64 / (k - 1) as f64).collect();
        let mut next = 0;
        while next < k {
            if t >= node_times[next] - dt / 2.0 {
                z[prob.sidx(next)..prob.sidx(next) + 6].copy_from_slice(y.as_slice());
                next += 1;
            }
            if next >= k {
                break;
            }
            y = step_rk4_timed(&y, &params, t, dt, &u_of_t);
            t += dt;
        }
        for i in 0..k {
            let (u1, u2) = u_of_t(node_times[i]);
            z[prob.uidx(i)] = u1;
            z[prob.uidx(i) + 1] = u2;
        }
        for s in 0..k - 1 {
            let tm = 0.5 * (node_times[s] + node_times[s + 1]);
            let (u1, u2) = u_of_t(tm);
            z[prob.midx(s)] = u1;
            z[prob.midx(s) + 1] = u2;
        }
        let mut resid = vec![0.0; prob.num_rows()];
        prob.residuals(&z, &mut resid);
        resid[..prob.num_defect_rows()].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };

    let coarse = defect_for(11);
    let fine = defect_for(21);
    assert!(coarse < 1e-3, "coarse defect too large: {coarse:.3e}");
    let ratio = coarse / fine;
    assert!(ratio > 16.0, "expected at least O(h^4) defect decay, got ratio {ratio:.1}");
}

#[test]
fn zero_state_hover_grid_is_feasible() {
    // x0 = 0: the all-zero state grid with hover controls satisfies every
    // defect row for any tf.
    let mut cfg = small_cfg(9);
    cfg.x0 = PlanarState::zero();
    let prob = transcribe(&cfg, &p()).unwrap();
    let mut z = prob.initial_guess();
    z[prob.tf_idx()] = 0.8;
    let hover = hover_command(&p()).unwrap().u1;
    for i in 0..9 {
        assert_abs_diff_eq!(z[prob.uidx(i)], hover, epsilon = 1e-12);
    }
    assert!(prob.defect_norm(&z) < 1e-12);
}

#[test]
fn solve_trivial_already_at_target() {
    let mut cfg = small_cfg(21);
    cfg.x0 = PlanarState::zero();
    let prob = transcribe(&cfg, &p()).unwrap();
    let sol = solve(&prob, None, &SolveOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.defect_norm <= DEFECT_TOL);
    // tf should sit at (or very near) its lower bound
    assert!(sol.tf < cfg.tf_bounds.0 + 1e-6, "tf = {}", sol.tf);
    let hover = hover_command(&p()).unwrap().u1;
    let power_hover = 2.0 * hover * hover;
    let expected = 0.8 * sol.tf + 0.2 * power_hover * sol.tf;
    assert_abs_diff_eq!(sol.cost, expected, epsilon = 1e-4);
}

#[test]
fn solve_short_hop_converges_and_verifies() {
    let mut cfg = small_cfg(41);
    cfg.x0 = PlanarState::new(-1.0, -0.5, 0.0, 0.0, 0.0, 0.0);
    let prob = transcribe(&cfg, &p()).unwrap();
    let sol = solve(&prob, None, &SolveOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.defect_norm <= DEFECT_TOL);
    let report = verify(&sol, &p(), cfg.epsilon);
    assert!(report.terminal_pos_err <= 1e-2, "pos err {}", report.terminal_pos_err);
    assert!(report.terminal_vel_err <= 1e-2, "vel err {}", report.terminal_vel_err);
    assert!(report.cost_rel_err <= 1e-3, "cost rel err {}", report.cost_rel_err);
    assert!(report.control_violation <= 1e-9);
    // times strictly increasing from 0 to tf
    assert_eq!(sol.nodes[0].t, 0.0);
    for w in sol.nodes.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    assert_abs_diff_eq!(sol.nodes.last().unwrap().t, sol.tf, epsilon = 1e-12);
}

#[test]
fn verify_trivial_hover_solution() {
    let mut cfg = small_cfg(11);
    cfg.x0 = PlanarState::zero();
    let prob = transcribe(&cfg, &p()).unwrap();
    let sol = solve(&prob, None, &SolveOptions::default()).unwrap();
    let report = verify(&sol, &p(), cfg.epsilon);
    assert!(report.terminal_pos_err <= 1e-9);
    assert!(report.terminal_vel_err <= 1e-9);
}

#[test]
fn translation_reuse() {
    // Shifting x0 and the terminal state by the same (dx, dz) must leave
    // controls and tf unchanged.
    let base = OcpConfig {
        x0: PlanarState::new(-2.0, -1.0, 0.5, 0.0, 0.1, 0.0),
        num_nodes: 31,
        ..Default::default()
    };
    let shifted = OcpConfig {
        x0: PlanarState::new(-2.0 + 3.0, -1.0 - 2.0, 0.5, 0.0, 0.1, 0.0),
        terminal: PlanarState::new(3.0, -2.0, 0.0, 0.0, 0.0, 0.0),
        ..base
    };
    let p1 = transcribe(&base, &p()).unwrap();
    let p2 = transcribe(&shifted, &p()).unwrap();
    let s1 = solve(&p1, None, &SolveOptions::default()).unwrap();
    let s2 = solve(&p2, None, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(s1.tf, s2.tf, epsilon = 1e-6);
    for (a, b) in s1.nodes.iter().zip(&s2.nodes) {
        assert_abs_diff_eq!(a.control.u1, b.control.u1, epsilon = 1e-5);
        assert_abs_diff_eq!(a.control.u2, b.control.u2, epsilon = 1e-5);
    }
}

#[test]
fn solution_csv_round_trip() {
    let mut cfg = small_cfg(11);
    cfg.x0 = PlanarState::new(-0.5, 0.2, 0.0, 0.0, 0.0, 0.0);
    let prob = transcribe(&cfg, &p()).unwrap();
    let sol = solve(&prob, None, &SolveOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    io::write_solution_csv(&sol, &path).unwrap();
    let nodes = io::read_trajectory_csv(&path).unwrap();
    assert_eq!(nodes.len(), sol.nodes.len());
    for (a, b) in nodes.iter().zip(&sol.nodes) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.state, b.state);
        assert_eq!(a.control, b.control);
    }
}

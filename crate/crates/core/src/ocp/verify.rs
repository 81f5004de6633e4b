//! Independent audit of a collocation solution.
//!
//! The solution's control profile (piecewise linear through node and midpoint
//! controls) is re-integrated from x₀ with a fine-step RK4 that samples the
//! profile at the stage times. The report carries the terminal error against
//! the target state, control-bound violations, and the cost recomputed by
//! fine quadrature — none of which reuse the collocation machinery.

use super::OcpSolution;
use crate::dynamics::{step_rk4_timed, PlanarState, QuadParams};
use serde::{Deserialize, Serialize};

const REINTEGRATION_DT: f64 = 1e-4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    /// ‖(x,z)(t_f) - target position‖ from the re-integrated trajectory [m].
    pub terminal_pos_err: f64,
    /// ‖(vx,vz)(t_f) - target velocity‖ [m/s].
    pub terminal_vel_err: f64,
    /// |θ(t_f) - θ_target| [rad].
    pub terminal_theta_err: f64,
    /// Worst amount by which any profile control leaves [0,1].
    pub control_violation: f64,
    /// (1-ε)·t_f + ε·∫(u₁²+u₂²)dt by trapezoid quadrature at the fine step.
    pub recomputed_cost: f64,
    /// |recomputed - solution cost| / max(1, |solution cost|).
    pub cost_rel_err: f64,
    /// Final re-integrated state.
    pub final_state: PlanarState,
}

/// Re-integrates `sol` under `epsilon` cost weighting and compares against
/// its stated terminal state and cost.
pub fn verify(sol: &OcpSolution, p: &QuadParams, epsilon: f64) -> VerifyReport {
    let profile = sol.control_profile();
    let u_of_t = |t: f64| -> (f64, f64) { interp(&profile, t) };

    let mut y = sol.x0().to_vector();
    let mut t = 0.0;
    let mut quad = 0.0;
    let power = |(u1, u2): (f64, f64)| u1 * u1 + u2 * u2;
    while t < sol.tf {
        let dt = REINTEGRATION_DT.min(sol.tf - t);
        quad += 0.5 * dt * (power(u_of_t(t)) + power(u_of_t(t + dt)));
        y = step_rk4_timed(&y, p, t, dt, &u_of_t);
        t += dt;
    }

    let target = sol.terminal_state().to_vector();
    let pos = ((y[0] - target[0]).powi(2) + (y[1] - target[1]).powi(2)).sqrt();
    let vel = ((y[2] - target[2]).powi(2) + (y[3] - target[3]).powi(2)).sqrt();
    let theta = (y[4] - target[4]).abs();

    let mut violation = 0.0f64;
    for &(_, u1, u2) in &profile {
        for u in [u1, u2] {
            violation = violation.max(-u).max(u - 1.0);
        }
    }

    let recomputed = (1.0 - epsilon) * sol.tf + epsilon * quad;
    VerifyReport {
        terminal_pos_err: pos,
        terminal_vel_err: vel,
        terminal_theta_err: theta,
        control_violation: violation.max(0.0),
        recomputed_cost: recomputed,
        cost_rel_err: (recomputed - sol.cost).abs() / sol.cost.abs().max(1.0),
        final_state: PlanarState::from_vector(&y),
    }
}

fn interp(pts: &[(f64, f64, f64)], t: f64) -> (f64, f64) {
    if t <= pts[0].0 {
        return (pts[0].1, pts[0].2);
    }
    let last = pts[pts.len() - 1];
    if t >= last.0 {
        return (last.1, last.2);
    }
    let idx = pts.partition_point(|pt| pt.0 <= t);
    let (t0, a1, a2) = pts[idx - 1];
    let (t1, b1, b2) = pts[idx];
    let w = (t - t0) / (t1 - t0);
    (a1 + w * (b1 - a1), a2 + w * (b2 - a2))
}

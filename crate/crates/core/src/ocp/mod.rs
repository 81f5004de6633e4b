//! Free-final-time optimal control of the planar quadrotor.
//!
//! The continuous problem — minimize (1-ε)·t_f + ε·∫(u₁²+u₂²)dt subject to
//! the plant dynamics, x(0) = x₀ and x(t_f) = x_terminal — is transcribed by
//! Hermite-Simpson collocation on a uniform grid of `num_nodes` points. The
//! final time is a decision variable; the grid lives on [0, 1] and the
//! dynamics are scaled by t_f. Each segment carries an independent midpoint
//! control. The resulting NLP is solved by an augmented-Lagrangian method
//! with a projected L-BFGS inner loop (see [`solver`]).

mod solver;
mod verify;

pub use solver::{solve, SolveOptions};
pub use verify::{verify, VerifyReport};

use crate::dynamics::{PlanarState, QuadParams, RotorCommand, StateVec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Collocation defects at a converged solution must fall below this.
pub const DEFECT_TOL: f64 = 1e-6;
/// Projected-gradient stationarity of the augmented Lagrangian at a solution.
pub const STATIONARITY_TOL: f64 = 1e-5;
/// Boundary condition residual bound (endpoints are pinned through variable
/// bounds, so in practice these are exact).
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("invalid OCP config: {0}")]
    InvalidConfig(String),
    #[error("decision vector layout mismatch: expected {expected} entries, got {got}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("solver did not converge: {reason} (best defect {defect:.3e})")]
    NotConverged {
        best: Box<OcpSolution>,
        reason: String,
        defect: f64,
    },
}

/// Problem description for one optimal-control solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OcpConfig {
    /// Hybridisation weight ε ∈ [0,1]: 0 = pure time cost, 1 = pure power.
    pub epsilon: f64,
    /// Number of collocation nodes K (K-1 segments).
    pub num_nodes: usize,
    /// Initial state.
    pub x0: PlanarState,
    /// Terminal state (zero for the standard go-to-origin problem).
    pub terminal: PlanarState,
    /// Bounds on the free final time [s].
    pub tf_bounds: (f64, f64),
    /// Per-throttle bounds.
    pub control_bounds: (f64, f64),
    /// Force u₂ = u₁ everywhere (symmetric-throttle reduction; with θ₀ = 0
    /// this freezes the pitch axis).
    pub tie_controls: bool,
    /// Compressed Hermite-Simpson: the midpoint control is the average of the
    /// adjacent node controls instead of a free variable. This removes the
    /// Simpson null mode that otherwise leaves the midpoint controls nearly
    /// indeterminate and stalls the solver in a flat valley.
    pub compressed: bool,
}

impl Default for OcpConfig {
    fn default() -> Self {
        OcpConfig {
            epsilon: 0.2,
            num_nodes: 81,
            x0: PlanarState::zero(),
            terminal: PlanarState::zero(),
            tf_bounds: (0.05, 20.0),
            control_bounds: (0.0, 1.0),
            tie_controls: false,
            compressed: true,
        }
    }
}

impl OcpConfig {
    pub fn with_x0(x0: PlanarState) -> Self {
        OcpConfig { x0, ..Default::default() }
    }
}

/// One grid point of a converged trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    pub t: f64,
    pub state: PlanarState,
    pub control: RotorCommand,
}

/// A (possibly non-converged) solution of the transcribed problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcpSolution {
    pub nodes: Vec<TrajectoryNode>,
    /// Midpoint controls, one per segment, at times (t_k + t_{k+1})/2.
    pub mid_controls: Vec<RotorCommand>,
    pub tf: f64,
    pub cost: f64,
    pub converged: bool,
    /// Max-abs Hermite-Simpson defect over all segments and components.
    pub defect_norm: f64,
}

impl OcpSolution {
    pub fn x0(&self) -> PlanarState {
        self.nodes[0].state
    }

    pub fn terminal_state(&self) -> PlanarState {
        self.nodes[self.nodes.len() - 1].state
    }

    /// Piecewise-linear control value through node and midpoint controls.
    pub fn control_at(&self, t: f64) -> (f64, f64) {
        let pts = self.control_profile();
        if t <= pts[0].0 {
            return (pts[0].1, pts[0].2);
        }
        if t >= pts[pts.len() - 1].0 {
            let last = pts[pts.len() - 1];
            return (last.1, last.2);
        }
        let idx = pts.partition_point(|pt| pt.0 <= t);
        let (t0, a1, a2) = pts[idx - 1];
        let (t1, b1, b2) = pts[idx];
        let w = (t - t0) / (t1 - t0);
        (a1 + w * (b1 - a1), a2 + w * (b2 - a2))
    }

    /// Ordered (time, u1, u2) knots: nodes interleaved with segment midpoints.
    pub fn control_profile(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::with_capacity(2 * self.nodes.len() - 1);
        for (k, node) in self.nodes.iter().enumerate() {
            pts.push((node.t, node.control.u1, node.control.u2));
            if k + 1 < self.nodes.len() {
                let tm = 0.5 * (node.t + self.nodes[k + 1].t);
                let um = self.mid_controls[k];
                pts.push((tm, um.u1, um.u2));
            }
        }
        pts
    }
}

/// Precomputed plant constants for the collocation hot path.
#[derive(Debug, Clone, Copy)]
struct PlantConsts {
    /// ΔF/m
    kt: f64,
    /// 2F̲/m
    base: f64,
    /// L·ΔF/I_xx
    kq: f64,
    beta: f64,
    g0: f64,
}

impl PlantConsts {
    fn from(p: &QuadParams) -> Self {
        PlantConsts {
            kt: p.delta_f / p.mass,
            base: 2.0 * p.f_min / p.mass,
            kq: p.arm_len * p.delta_f / p.inertia_xx,
            beta: p.beta,
            g0: p.g0,
        }
    }
}

/// Dynamics evaluation at one collocation point, with the pieces needed for
/// analytic Jacobian-transpose products.
#[derive(Debug, Clone, Copy)]
struct Pt {
    f: StateVec,
    /// Total specific thrust u_Σ·ΔF/m + 2F̲/m.
    acc: f64,
    sin: f64,
    cos: f64,
    u1: f64,
    u2: f64,
}

impl Pt {
    #[inline]
    fn eval(y: &StateVec, u1: f64, u2: f64, c: &PlantConsts) -> Pt {
        let acc = (u1 + u2) * c.kt + c.base;
        let (sin, cos) = y[4].sin_cos();
        let f = StateVec::new(
            y[2],
            y[3],
            -acc * sin - c.beta * y[2],
            acc * cos - c.g0 - c.beta * y[3],
            y[5],
            c.kq * (u2 - u1),
        );
        Pt { f, acc, sin, cos, u1, u2 }
    }

    /// (∂f/∂x)ᵀ v
    #[inline]
    fn at_v(&self, v: &StateVec, beta: f64) -> StateVec {
        StateVec::new(
            0.0,
            0.0,
            v[0] - beta * v[2],
            v[1] - beta * v[3],
            -self.acc * self.cos * v[2] - self.acc * self.sin * v[3],
            v[4],
        )
    }

    /// (∂f/∂u)ᵀ v for the two throttle columns.
    #[inline]
    fn bt_v(&self, v: &StateVec, c: &PlantConsts) -> (f64, f64) {
        let common = -c.kt * self.sin * v[2] + c.kt * self.cos * v[3];
        (common - c.kq * v[5], common + c.kq * v[5])
    }

    /// (∂f/∂x)·δx + (∂f/∂u)·δu — forward tangent of the dynamics.
    #[inline]
    fn fwd(&self, dx: &StateVec, du1: f64, du2: f64, c: &PlantConsts) -> StateVec {
        let du_sum = du1 + du2;
        StateVec::new(
            dx[2],
            dx[3],
            -c.beta * dx[2] - self.acc * self.cos * dx[4] - c.kt * self.sin * du_sum,
            -c.beta * dx[3] - self.acc * self.sin * dx[4] + c.kt * self.cos * du_sum,
            dx[5],
            c.kq * (du2 - du1),
        )
    }
}

/// The transcribed NLP: decision-vector layout, bounds and evaluators.
///
/// Decision vector (length 6K + 2K + 2(K-1) + 1):
///
/// ```text
/// [ x_0 .. x_{K-1} | u_0 .. u_{K-1} | um_0 .. um_{K-2} | t_f ]
/// ```
///
/// Equality rows: 6(K-1) Hermite-Simpson defects followed by 12 boundary
/// rows (x(0) - x₀ and x(1) - x_terminal). The boundary rows are also pinned
/// through equal lower/upper variable bounds, which keeps them exact.
#[derive(Debug, Clone)]
pub struct NlpProblem {
    pub cfg: OcpConfig,
    pub params: QuadParams,
    consts: PlantConsts,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Builds the NLP for a config and plant. Fails on invalid configs.
pub fn transcribe(cfg: &OcpConfig, p: &QuadParams) -> Result<NlpProblem, OcpError> {
    let bad = |m: String| Err(OcpError::InvalidConfig(m));
    if !(0.0..=1.0).contains(&cfg.epsilon) {
        return bad(format!("epsilon must be in [0,1], got {}", cfg.epsilon));
    }
    if cfg.num_nodes < 3 {
        return bad(format!("need at least 3 nodes, got {}", cfg.num_nodes));
    }
    if !(cfg.tf_bounds.0 > 0.0 && cfg.tf_bounds.0 <= cfg.tf_bounds.1) {
        return bad(format!("invalid tf bounds {:?}", cfg.tf_bounds));
    }
    if !(cfg.control_bounds.0 < cfg.control_bounds.1) {
        return bad(format!("invalid control bounds {:?}", cfg.control_bounds));
    }
    if !cfg.x0.is_finite() || !cfg.terminal.is_finite() {
        return bad("non-finite boundary state".to_string());
    }

    let mut prob = NlpProblem {
        cfg: *cfg,
        params: *p,
        consts: PlantConsts::from(p),
        lower: Vec::new(),
        upper: Vec::new(),
    };
    let n = prob.num_vars();
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];

    // Pin the endpoint states exactly.
    let x0 = cfg.x0.to_vector();
    let xf = cfg.terminal.to_vector();
    for i in 0..6 {
        lower[prob.sidx(0) + i] = x0[i];
        upper[prob.sidx(0) + i] = x0[i];
        lower[prob.sidx(cfg.num_nodes - 1) + i] = xf[i];
        upper[prob.sidx(cfg.num_nodes - 1) + i] = xf[i];
    }
    // Throttle boxes; tied u₂ slots are inert and frozen mid-range.
    let (ulo, uhi) = cfg.control_bounds;
    for k in 0..cfg.num_nodes {
        lower[prob.uidx(k)] = ulo;
        upper[prob.uidx(k)] = uhi;
        let (l2, u2) = if cfg.tie_controls { (0.5, 0.5) } else { (ulo, uhi) };
        lower[prob.uidx(k) + 1] = l2;
        upper[prob.uidx(k) + 1] = u2;
    }
    for s in 0..cfg.num_nodes - 1 {
        let pin_first = cfg.compressed;
        let pin_second = cfg.compressed || cfg.tie_controls;
        let (l1, u1) = if pin_first { (0.5, 0.5) } else { (ulo, uhi) };
        lower[prob.midx(s)] = l1;
        upper[prob.midx(s)] = u1;
        let (l2, u2) = if pin_second { (0.5, 0.5) } else { (ulo, uhi) };
        lower[prob.midx(s) + 1] = l2;
        upper[prob.midx(s) + 1] = u2;
    }
    lower[prob.tf_idx()] = cfg.tf_bounds.0;
    upper[prob.tf_idx()] = cfg.tf_bounds.1;

    prob.lower = lower;
    prob.upper = upper;
    Ok(prob)
}

impl NlpProblem {
    pub fn num_nodes(&self) -> usize {
        self.cfg.num_nodes
    }

    pub fn num_vars(&self) -> usize {
        let k = self.cfg.num_nodes;
        6 * k + 2 * k + 2 * (k - 1) + 1
    }

    pub fn num_defect_rows(&self) -> usize {
        6 * (self.cfg.num_nodes - 1)
    }

    pub fn num_boundary_rows(&self) -> usize {
        12
    }

    pub fn num_rows(&self) -> usize {
        self.num_defect_rows() + self.num_boundary_rows()
    }

    #[inline]
    pub fn sidx(&self, k: usize) -> usize {
        6 * k
    }

    #[inline]
    pub fn uidx(&self, k: usize) -> usize {
        6 * self.cfg.num_nodes + 2 * k
    }

    #[inline]
    pub fn midx(&self, seg: usize) -> usize {
        8 * self.cfg.num_nodes + 2 * seg
    }

    #[inline]
    pub fn tf_idx(&self) -> usize {
        self.num_vars() - 1
    }

    #[inline]
    fn state_at(&self, z: &[f64], k: usize) -> StateVec {
        let i = self.sidx(k);
        StateVec::new(z[i], z[i + 1], z[i + 2], z[i + 3], z[i + 4], z[i + 5])
    }

    /// Effective throttle pair at a control slot, honoring `tie_controls`.
    #[inline]
    fn ctrl(&self, z: &[f64], idx: usize) -> (f64, f64) {
        let u1 = z[idx];
        let u2 = if self.cfg.tie_controls { u1 } else { z[idx + 1] };
        (u1, u2)
    }

    /// Effective midpoint control of a segment: the stored slot, or the
    /// node average in compressed mode.
    #[inline]
    fn mid_ctrl(&self, z: &[f64], seg: usize) -> (f64, f64) {
        if self.cfg.compressed {
            let a = self.ctrl(z, self.uidx(seg));
            let b = self.ctrl(z, self.uidx(seg + 1));
            (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
        } else {
            self.ctrl(z, self.midx(seg))
        }
    }

    /// Adds a gradient contribution belonging to a segment midpoint control,
    /// splitting it onto the node slots in compressed mode.
    #[inline]
    fn add_mid_grad(&self, grad: &mut [f64], seg: usize, v: (f64, f64)) {
        if self.cfg.compressed {
            self.add_ctrl_grad(grad, self.uidx(seg), (0.5 * v.0, 0.5 * v.1));
            self.add_ctrl_grad(grad, self.uidx(seg + 1), (0.5 * v.0, 0.5 * v.1));
        } else {
            self.add_ctrl_grad(grad, self.midx(seg), v);
        }
    }

    /// Tangent of the effective midpoint control.
    #[inline]
    fn mid_ctrl_tangent(&self, v: &[f64], seg: usize) -> (f64, f64) {
        if self.cfg.compressed {
            let a = self.ctrl_tangent(v, self.uidx(seg));
            let b = self.ctrl_tangent(v, self.uidx(seg + 1));
            (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1))
        } else {
            self.ctrl_tangent(v, self.midx(seg))
        }
    }

    fn check_layout(&self, z: &[f64]) -> Result<(), OcpError> {
        if z.len() != self.num_vars() {
            return Err(OcpError::LayoutMismatch { expected: self.num_vars(), got: z.len() });
        }
        Ok(())
    }

    /// Linear state interpolation, hover throttles, distance-based t_f.
    pub fn initial_guess(&self) -> Vec<f64> {
        let k = self.cfg.num_nodes;
        let mut z = vec![0.0; self.num_vars()];
        let x0 = self.cfg.x0.to_vector();
        let xf = self.cfg.terminal.to_vector();
        for i in 0..k {
            let w = i as f64 / (k - 1) as f64;
            let s = (1.0 - w) * x0 + w * xf;
            z[self.sidx(i)..self.sidx(i) + 6].copy_from_slice(s.as_slice());
        }
        let hover = crate::dynamics::hover_command(&self.params)
            .map(|u| u.u1)
            .unwrap_or(0.5);
        for i in 0..k {
            z[self.uidx(i)] = hover;
            z[self.uidx(i) + 1] = if self.cfg.tie_controls { 0.5 } else { hover };
        }
        for s in 0..k - 1 {
            z[self.midx(s)] = if self.cfg.compressed { 0.5 } else { hover };
            z[self.midx(s) + 1] =
                if self.cfg.compressed || self.cfg.tie_controls { 0.5 } else { hover };
        }
        let dx = self.cfg.x0.x - self.cfg.terminal.x;
        let dz = self.cfg.x0.z - self.cfg.terminal.z;
        let dist = (dx * dx + dz * dz).sqrt();
        z[self.tf_idx()] = (2.0 * dist / 5.0).clamp(self.cfg.tf_bounds.0, self.cfg.tf_bounds.1);
        self.project(&mut z);
        z
    }

    pub fn project(&self, z: &mut [f64]) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Cost J = (1-ε)·t_f + ε·Simpson(u₁²+u₂²) with layout validation.
    pub fn eval_cost(&self, z: &[f64]) -> Result<f64, OcpError> {
        self.check_layout(z)?;
        Ok(self.cost_unchecked(z))
    }

    fn cost_unchecked(&self, z: &[f64]) -> f64 {
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let h = tf / (k - 1) as f64;
        let power = |(u1, u2): (f64, f64)| u1 * u1 + u2 * u2;
        let mut quad = 0.0;
        for seg in 0..k - 1 {
            let gk = power(self.ctrl(z, self.uidx(seg)));
            let gm = power(self.mid_ctrl(z, seg));
            let gk1 = power(self.ctrl(z, self.uidx(seg + 1)));
            quad += h / 6.0 * (gk + 4.0 * gm + gk1);
        }
        (1.0 - self.cfg.epsilon) * tf + self.cfg.epsilon * quad
    }

    /// Analytic cost gradient (for the finite-difference property check and
    /// the solver).
    pub fn eval_cost_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64, OcpError> {
        self.check_layout(z)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let k = self.cfg.num_nodes;
        let eps = self.cfg.epsilon;
        let tf = z[self.tf_idx()];
        let h = tf / (k - 1) as f64;
        let power = |(u1, u2): (f64, f64)| u1 * u1 + u2 * u2;
        let mut quad = 0.0;
        for seg in 0..k - 1 {
            let uk = self.ctrl(z, self.uidx(seg));
            let um = self.mid_ctrl(z, seg);
            let uk1 = self.ctrl(z, self.uidx(seg + 1));
            quad += h / 6.0 * (power(uk) + 4.0 * power(um) + power(uk1));
            self.add_power_grad(grad, self.uidx(seg), uk, eps * h / 3.0);
            self.add_mid_power_grad(grad, seg, um, eps * 4.0 * h / 3.0);
            self.add_power_grad(grad, self.uidx(seg + 1), uk1, eps * h / 3.0);
        }
        if tf > 0.0 {
            grad[self.tf_idx()] = (1.0 - eps) + eps * quad / tf;
        } else {
            grad[self.tf_idx()] = 1.0 - eps;
        }
        Ok((1.0 - eps) * tf + eps * quad)
    }

    /// Adds scale·u to the control-slot gradient (scale already carries the
    /// Simpson weight times ∂(u²)/∂u / 2).
    #[inline]
    fn add_power_grad(&self, grad: &mut [f64], idx: usize, u: (f64, f64), scale: f64) {
        if self.cfg.tie_controls {
            grad[idx] += scale * (u.0 + u.1);
        } else {
            grad[idx] += scale * u.0;
            grad[idx + 1] += scale * u.1;
        }
    }

    /// Midpoint power-cost gradient, split onto node slots when compressed.
    #[inline]
    fn add_mid_power_grad(&self, grad: &mut [f64], seg: usize, u: (f64, f64), scale: f64) {
        if self.cfg.compressed {
            self.add_power_grad(grad, self.uidx(seg), u, 0.5 * scale);
            self.add_power_grad(grad, self.uidx(seg + 1), u, 0.5 * scale);
        } else {
            self.add_power_grad(grad, self.midx(seg), u, scale);
        }
    }

    /// Equality residuals: defect rows (segment-major) then boundary rows.
    pub fn residuals(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_rows());
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let h = tf / (k - 1) as f64;
        let c = &self.consts;

        let mut pts = Vec::with_capacity(k);
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }
        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let (fk, fk1) = (pts[seg].f, pts[seg + 1].f);
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (fk - fk1);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);
            let d = xk1 - xk - h / 6.0 * (fk + 4.0 * pm.f + fk1);
            out[6 * seg..6 * seg + 6].copy_from_slice(d.as_slice());
        }
        let base = self.num_defect_rows();
        let x_first = self.state_at(z, 0) - self.cfg.x0.to_vector();
        let x_last = self.state_at(z, k - 1) - self.cfg.terminal.to_vector();
        out[base..base + 6].copy_from_slice(x_first.as_slice());
        out[base + 6..base + 12].copy_from_slice(x_last.as_slice());
    }

    /// Max-abs defect residual (collocation rows only).
    pub fn defect_norm(&self, z: &[f64]) -> f64 {
        let mut r = vec![0.0; self.num_rows()];
        self.residuals(z, &mut r);
        r[..self.num_defect_rows()].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Augmented-Lagrangian value Φ = J + λᵀc + (μ/2)‖c‖², optionally with its
    /// gradient. This is the solver hot path; Jacobian-transpose products use
    /// the analytic sparsity of the plant.
    pub(crate) fn al_eval(
        &self,
        z: &[f64],
        lambda: &[f64],
        mu: f64,
        mut grad: Option<&mut [f64]>,
        ws: &mut Workspace,
    ) -> f64 {
        let k = self.cfg.num_nodes;
        let eps = self.cfg.epsilon;
        let tf = z[self.tf_idx()];
        let hs = 1.0 / (k - 1) as f64;
        let h = tf * hs;
        let c = &self.consts;

        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }

        ws.pts.clear();
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            ws.pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }

        let power = |u1: f64, u2: f64| u1 * u1 + u2 * u2;
        let mut quad = 0.0;
        let mut phi = 0.0;
        let mut grad_tf_defect = 0.0;

        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let pk = ws.pts[seg];
            let pk1 = ws.pts[seg + 1];
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (pk.f - pk1.f);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);
            let sum_f = pk.f + 4.0 * pm.f + pk1.f;
            let d = xk1 - xk - h / 6.0 * sum_f;

            // power quadrature
            quad += h / 6.0 * (power(pk.u1, pk.u2) + 4.0 * power(um1, um2) + power(pk1.u1, pk1.u2));

            // penalty terms and row weights
            let mut w = StateVec::zeros();
            for i in 0..6 {
                let ci = d[i];
                let li = lambda[6 * seg + i];
                phi += li * ci + 0.5 * mu * ci * ci;
                w[i] = li + mu * ci;
            }

            if let Some(g) = grad.as_deref_mut() {
                let wm = pm.at_v(&w, c.beta);
                // d/dx_k and d/dx_{k+1}
                let ak = pk.at_v(&(h / 6.0 * w + h * h / 12.0 * wm), c.beta);
                let ak1 = pk1.at_v(&(h / 6.0 * w - h * h / 12.0 * wm), c.beta);
                let gxk = -w - ak - h / 3.0 * wm;
                let gxk1 = w - ak1 - h / 3.0 * wm;
                for i in 0..6 {
                    g[self.sidx(seg) + i] += gxk[i];
                    g[self.sidx(seg + 1) + i] += gxk1[i];
                }
                // d/du at nodes and midpoint
                let bk = pk.bt_v(&(h / 6.0 * w + h * h / 12.0 * wm), c);
                let bk1 = pk1.bt_v(&(h / 6.0 * w - h * h / 12.0 * wm), c);
                let bm = pm.bt_v(&w, c);
                self.add_ctrl_grad(g, self.uidx(seg), (-bk.0, -bk.1));
                self.add_ctrl_grad(g, self.uidx(seg + 1), (-bk1.0, -bk1.1));
                self.add_mid_grad(g, seg, (-2.0 * h / 3.0 * bm.0, -2.0 * h / 3.0 * bm.1));
                // d/dtf
                grad_tf_defect += -(hs / 6.0) * w.dot(&sum_f)
                    - h * hs / 12.0 * wm.dot(&(pk.f - pk1.f));
                // cost gradient on controls
                self.add_power_grad(g, self.uidx(seg), (pk.u1, pk.u2), eps * h / 3.0);
                self.add_mid_power_grad(g, seg, (um1, um2), eps * 4.0 * h / 3.0);
                self.add_power_grad(g, self.uidx(seg + 1), (pk1.u1, pk1.u2), eps * h / 3.0);
            }
        }

        // boundary rows (pinned by bounds; residuals are zero up to projection)
        let x_first = self.state_at(z, 0) - self.cfg.x0.to_vector();
        let x_last = self.state_at(z, k - 1) - self.cfg.terminal.to_vector();
        let nb = self.num_defect_rows();
        for i in 0..6 {
            let (c1, l1) = (x_first[i], lambda[nb + i]);
            let (c2, l2) = (x_last[i], lambda[nb + 6 + i]);
            phi += l1 * c1 + 0.5 * mu * c1 * c1 + l2 * c2 + 0.5 * mu * c2 * c2;
            if let Some(g) = grad.as_deref_mut() {
                g[self.sidx(0) + i] += l1 + mu * c1;
                g[self.sidx(k - 1) + i] += l2 + mu * c2;
            }
        }

        let cost = (1.0 - eps) * tf + eps * quad;
        if let Some(g) = grad.as_deref_mut() {
            let dtf = if tf > 0.0 { eps * quad / tf } else { 0.0 };
            g[self.tf_idx()] += (1.0 - eps) + dtf + grad_tf_defect;
        }
        phi + cost
    }

    #[inline]
    fn add_ctrl_grad(&self, grad: &mut [f64], idx: usize, v: (f64, f64)) {
        if self.cfg.tie_controls {
            grad[idx] += v.0 + v.1;
        } else {
            grad[idx] += v.0;
            grad[idx + 1] += v.1;
        }
    }

    /// Effective control tangent at a slot, honoring `tie_controls`.
    #[inline]
    fn ctrl_tangent(&self, v: &[f64], idx: usize) -> (f64, f64) {
        let d1 = v[idx];
        let d2 = if self.cfg.tie_controls { d1 } else { v[idx + 1] };
        (d1, d2)
    }

    /// J(z)·v — forward directional derivative of the equality residuals.
    pub(crate) fn jac_vec(&self, z: &[f64], v: &[f64], out: &mut [f64], ws: &mut Workspace) {
        debug_assert_eq!(out.len(), self.num_rows());
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let hs = 1.0 / (k - 1) as f64;
        let h = tf * hs;
        let dtf = v[self.tf_idx()];
        let dh = dtf * hs;
        let c = &self.consts;

        ws.pts.clear();
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            ws.pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }
        let dstate = |v: &[f64], i: usize| {
            let s = self.sidx(i);
            StateVec::new(v[s], v[s + 1], v[s + 2], v[s + 3], v[s + 4], v[s + 5])
        };

        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let (pk, pk1) = (ws.pts[seg], ws.pts[seg + 1]);
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (pk.f - pk1.f);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);

            let dxk = dstate(v, seg);
            let dxk1 = dstate(v, seg + 1);
            let (du1k, du2k) = self.ctrl_tangent(v, self.uidx(seg));
            let (du1k1, du2k1) = self.ctrl_tangent(v, self.uidx(seg + 1));
            let (du1m, du2m) = self.mid_ctrl_tangent(v, seg);

            let dfk = pk.fwd(&dxk, du1k, du2k, c);
            let dfk1 = pk1.fwd(&dxk1, du1k1, du2k1, c);
            let dxm = 0.5 * (dxk + dxk1)
                + dh / 8.0 * (pk.f - pk1.f)
                + h / 8.0 * (dfk - dfk1);
            let dfm = pm.fwd(&dxm, du1m, du2m, c);

            let sum_f = pk.f + 4.0 * pm.f + pk1.f;
            let dd = dxk1 - dxk - dh / 6.0 * sum_f - h / 6.0 * (dfk + 4.0 * dfm + dfk1);
            out[6 * seg..6 * seg + 6].copy_from_slice(dd.as_slice());
        }
        let base = self.num_defect_rows();
        out[base..base + 6].copy_from_slice(dstate(v, 0).as_slice());
        out[base + 6..base + 12].copy_from_slice(dstate(v, k - 1).as_slice());
    }

    /// ∇J(z) + J(z)ᵀ·y for a fixed row weight y, written into `grad`.
    /// With y frozen this function is independent of the penalty size, which
    /// makes it safe to difference for Hessian information.
    pub(crate) fn grad_weighted(&self, z: &[f64], y: &[f64], grad: &mut [f64], ws: &mut Workspace) {
        debug_assert_eq!(y.len(), self.num_rows());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let k = self.cfg.num_nodes;
        let eps = self.cfg.epsilon;
        let tf = z[self.tf_idx()];
        let hs = 1.0 / (k - 1) as f64;
        let h = tf * hs;
        let c = &self.consts;

        ws.pts.clear();
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            ws.pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }

        let power = |u1: f64, u2: f64| u1 * u1 + u2 * u2;
        let mut quad = 0.0;
        let mut grad_tf = 0.0;
        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let (pk, pk1) = (ws.pts[seg], ws.pts[seg + 1]);
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (pk.f - pk1.f);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);
            let sum_f = pk.f + 4.0 * pm.f + pk1.f;

            let w = StateVec::from_row_slice(&y[6 * seg..6 * seg + 6]);
            let wm = pm.at_v(&w, c.beta);
            let ak = pk.at_v(&(h / 6.0 * w + h * h / 12.0 * wm), c.beta);
            let ak1 = pk1.at_v(&(h / 6.0 * w - h * h / 12.0 * wm), c.beta);
            let gxk = -w - ak - h / 3.0 * wm;
            let gxk1 = w - ak1 - h / 3.0 * wm;
            for i in 0..6 {
                grad[self.sidx(seg) + i] += gxk[i];
                grad[self.sidx(seg + 1) + i] += gxk1[i];
            }
            let bk = pk.bt_v(&(h / 6.0 * w + h * h / 12.0 * wm), c);
            let bk1 = pk1.bt_v(&(h / 6.0 * w - h * h / 12.0 * wm), c);
            let bm = pm.bt_v(&w, c);
            self.add_ctrl_grad(grad, self.uidx(seg), (-bk.0, -bk.1));
            self.add_ctrl_grad(grad, self.uidx(seg + 1), (-bk1.0, -bk1.1));
            self.add_mid_grad(grad, seg, (-2.0 * h / 3.0 * bm.0, -2.0 * h / 3.0 * bm.1));
            grad_tf +=
                -(hs / 6.0) * w.dot(&sum_f) - h * hs / 12.0 * wm.dot(&(pk.f - pk1.f));

            quad += h / 6.0 * (power(pk.u1, pk.u2) + 4.0 * power(um1, um2) + power(pk1.u1, pk1.u2));
            self.add_power_grad(grad, self.uidx(seg), (pk.u1, pk.u2), eps * h / 3.0);
            self.add_mid_power_grad(grad, seg, (um1, um2), eps * 4.0 * h / 3.0);
            self.add_power_grad(grad, self.uidx(seg + 1), (pk1.u1, pk1.u2), eps * h / 3.0);
        }
        let nb = self.num_defect_rows();
        for i in 0..6 {
            grad[self.sidx(0) + i] += y[nb + i];
            grad[self.sidx(k - 1) + i] += y[nb + 6 + i];
        }
        let dtf = if tf > 0.0 { eps * quad / tf } else { 0.0 };
        grad[self.tf_idx()] += (1.0 - eps) + dtf + grad_tf;
    }

    /// Adds mu·JᵀJ (Gauss-Newton penalty curvature) into the dense Hessian.
    /// The per-segment Jacobian blocks are assembled explicitly from the
    /// plant Jacobians and the Hermite midpoint chain rule.
    pub(crate) fn add_jtj(&self, z: &[f64], mu: f64, h_mat: &mut nalgebra::DMatrix<f64>) {
        use nalgebra::{Matrix6, Matrix6x2, SMatrix};
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let hs = 1.0 / (k - 1) as f64;
        let h = tf * hs;
        let c = &self.consts;

        let a_mat = |pt: &Pt| -> Matrix6<f64> {
            let mut a = Matrix6::zeros();
            a[(0, 2)] = 1.0;
            a[(1, 3)] = 1.0;
            a[(2, 2)] = -c.beta;
            a[(2, 4)] = -pt.acc * pt.cos;
            a[(3, 3)] = -c.beta;
            a[(3, 4)] = -pt.acc * pt.sin;
            a[(4, 5)] = 1.0;
            a
        };
        let b_mat = |pt: &Pt| -> Matrix6x2<f64> {
            let mut b = Matrix6x2::zeros();
            b[(2, 0)] = -c.kt * pt.sin;
            b[(2, 1)] = -c.kt * pt.sin;
            b[(3, 0)] = c.kt * pt.cos;
            b[(3, 1)] = c.kt * pt.cos;
            b[(5, 0)] = -c.kq;
            b[(5, 1)] = c.kq;
            b
        };

        let mut pts = Vec::with_capacity(k);
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }

        // local column layout: x_k(6) x_{k+1}(6) u_k(2) u_{k+1}(2) u_m(2) tf(1)
        let mut gidx = [0usize; 19];
        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let (pk, pk1) = (pts[seg], pts[seg + 1]);
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (pk.f - pk1.f);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);

            let (ak, ak1, am) = (a_mat(&pk), a_mat(&pk1), a_mat(&pm));
            let (bk, bk1, bm) = (b_mat(&pk), b_mat(&pk1), b_mat(&pm));
            let eye = Matrix6::identity();

            let dxk = -eye - ak * (h / 6.0) - am * (h / 3.0) - am * ak * (h * h / 12.0);
            let dxk1 = eye - ak1 * (h / 6.0) - am * (h / 3.0) + am * ak1 * (h * h / 12.0);
            let mut duk = -bk * (h / 6.0) - am * bk * (h * h / 12.0);
            let mut duk1 = -bk1 * (h / 6.0) + am * bk1 * (h * h / 12.0);
            let mut dum = -bm * (2.0 * h / 3.0);
            if self.cfg.compressed {
                duk += dum * 0.5;
                duk1 += dum * 0.5;
                dum = nalgebra::Matrix6x2::zeros();
            }
            if self.cfg.tie_controls {
                for b in [&mut duk, &mut duk1, &mut dum] {
                    let merged = b.column(0) + b.column(1);
                    b.set_column(0, &merged);
                    b.set_column(1, &nalgebra::Vector6::zeros());
                }
            }
            let sum_f = pk.f + 4.0 * pm.f + pk1.f;
            let dtf = -(hs / 6.0) * sum_f - (h * hs / 12.0) * (am * (pk.f - pk1.f));

            let mut loc: SMatrix<f64, 6, 19> = SMatrix::zeros();
            loc.view_mut((0, 0), (6, 6)).copy_from(&dxk);
            loc.view_mut((0, 6), (6, 6)).copy_from(&dxk1);
            loc.view_mut((0, 12), (6, 2)).copy_from(&duk);
            loc.view_mut((0, 14), (6, 2)).copy_from(&duk1);
            loc.view_mut((0, 16), (6, 2)).copy_from(&dum);
            loc.view_mut((0, 18), (6, 1)).copy_from(&dtf);

            for i in 0..6 {
                gidx[i] = self.sidx(seg) + i;
                gidx[6 + i] = self.sidx(seg + 1) + i;
            }
            gidx[12] = self.uidx(seg);
            gidx[13] = self.uidx(seg) + 1;
            gidx[14] = self.uidx(seg + 1);
            gidx[15] = self.uidx(seg + 1) + 1;
            gidx[16] = self.midx(seg);
            gidx[17] = self.midx(seg) + 1;
            gidx[18] = self.tf_idx();

            let local = loc.transpose() * loc;
            for i in 0..19 {
                for j in 0..19 {
                    h_mat[(gidx[i], gidx[j])] += mu * local[(i, j)];
                }
            }
        }
        // boundary rows: identity on the pinned endpoint states
        for i in 0..6 {
            let a = self.sidx(0) + i;
            let b = self.sidx(k - 1) + i;
            h_mat[(a, a)] += mu;
            h_mat[(b, b)] += mu;
        }
    }

    /// J(z)ᵀ·w written into `out` (zeroed first).
    pub(crate) fn jac_t_vec(&self, z: &[f64], w_rows: &[f64], out: &mut [f64], ws: &mut Workspace) {
        debug_assert_eq!(w_rows.len(), self.num_rows());
        out.iter_mut().for_each(|g| *g = 0.0);
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let hs = 1.0 / (k - 1) as f64;
        let h = tf * hs;
        let c = &self.consts;

        ws.pts.clear();
        for i in 0..k {
            let (u1, u2) = self.ctrl(z, self.uidx(i));
            ws.pts.push(Pt::eval(&self.state_at(z, i), u1, u2, c));
        }
        let mut grad_tf = 0.0;
        for seg in 0..k - 1 {
            let xk = self.state_at(z, seg);
            let xk1 = self.state_at(z, seg + 1);
            let (pk, pk1) = (ws.pts[seg], ws.pts[seg + 1]);
            let xm = 0.5 * (xk + xk1) + h / 8.0 * (pk.f - pk1.f);
            let (um1, um2) = self.mid_ctrl(z, seg);
            let pm = Pt::eval(&xm, um1, um2, c);
            let sum_f = pk.f + 4.0 * pm.f + pk1.f;

            let w = StateVec::from_row_slice(&w_rows[6 * seg..6 * seg + 6]);
            let wm = pm.at_v(&w, c.beta);
            let ak = pk.at_v(&(h / 6.0 * w + h * h / 12.0 * wm), c.beta);
            let ak1 = pk1.at_v(&(h / 6.0 * w - h * h / 12.0 * wm), c.beta);
            let gxk = -w - ak - h / 3.0 * wm;
            let gxk1 = w - ak1 - h / 3.0 * wm;
            for i in 0..6 {
                out[self.sidx(seg) + i] += gxk[i];
                out[self.sidx(seg + 1) + i] += gxk1[i];
            }
            let bk = pk.bt_v(&(h / 6.0 * w + h * h / 12.0 * wm), c);
            let bk1 = pk1.bt_v(&(h / 6.0 * w - h * h / 12.0 * wm), c);
            let bm = pm.bt_v(&w, c);
            self.add_ctrl_grad(out, self.uidx(seg), (-bk.0, -bk.1));
            self.add_ctrl_grad(out, self.uidx(seg + 1), (-bk1.0, -bk1.1));
            self.add_mid_grad(out, seg, (-2.0 * h / 3.0 * bm.0, -2.0 * h / 3.0 * bm.1));
            grad_tf +=
                -(hs / 6.0) * w.dot(&sum_f) - h * hs / 12.0 * wm.dot(&(pk.f - pk1.f));
        }
        let nb = self.num_defect_rows();
        for i in 0..6 {
            out[self.sidx(0) + i] += w_rows[nb + i];
            out[self.sidx(k - 1) + i] += w_rows[nb + 6 + i];
        }
        out[self.tf_idx()] += grad_tf;
    }

    /// Extracts a trajectory from a decision vector. Controls are clamped to
    /// their bounds (the projection keeps them inside up to roundoff).
    pub fn extract(&self, z: &[f64], converged: bool) -> OcpSolution {
        let k = self.cfg.num_nodes;
        let tf = z[self.tf_idx()];
        let (lo, hi) = self.cfg.control_bounds;
        let clamp = |(u1, u2): (f64, f64)| RotorCommand::new(u1.clamp(lo, hi), u2.clamp(lo, hi));
        let mut nodes = Vec::with_capacity(k);
        for i in 0..k {
            nodes.push(TrajectoryNode {
                t: tf * i as f64 / (k - 1) as f64,
                state: PlanarState::from_vector(&self.state_at(z, i)),
                control: clamp(self.ctrl(z, self.uidx(i))),
            });
        }
        let mid_controls = (0..k - 1).map(|s| clamp(self.mid_ctrl(z, s))).collect();
        OcpSolution {
            nodes,
            mid_controls,
            tf,
            cost: self.cost_unchecked(z),
            converged,
            defect_norm: self.defect_norm(z),
        }
    }
}

/// Scratch space reused across solver iterations.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    pts: Vec<Pt>,
}

impl Workspace {
    pub(crate) fn new() -> Self {
        Workspace { pts: Vec::new() }
    }
}

pub mod io;

#[cfg(test)]
mod tests;

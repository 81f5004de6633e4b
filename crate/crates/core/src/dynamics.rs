//! Planar quadrotor dynamics.
//!
//! State is x = [x, z, v_x, v_z, θ, q] restricted to the vertical plane, with
//! two normalized throttles u₁ (left) and u₂ (right). Each rotor produces a
//! force F̲ + uᵢ·ΔF, so with u_Σ = u₁ + u₂ the model is
//!
//! ```text
//! ẋ   = v_x
//! ż   = v_z
//! v̇_x = -(u_Σ·ΔF/m + 2F̲/m)·sin θ - β·v_x
//! v̇_z =  (u_Σ·ΔF/m + 2F̲/m)·cos θ - g₀ - β·v_z
//! θ̇   = q
//! q̇   = (L/I_xx)·ΔF·(u₂ - u₁)
//! ```
//!
//! All quantities are SI. The model is exact in x and z translation, which the
//! rest of the toolkit exploits by working in target-relative coordinates.

use nalgebra::Vector6;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Raw 6-vector view of the planar state, ordered (x, z, vx, vz, theta, q).
pub type StateVec = Vector6<f64>;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("hover infeasible: weight {weight:.4} N outside rotor range [{lo:.4}, {hi:.4}] N")]
    HoverInfeasible { weight: f64, lo: f64, hi: f64 },
    #[error("invalid quadrotor parameters: {0}")]
    InvalidParams(String),
    #[error("parameter file error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parameter file parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Physical parameters of the planar quadrotor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadParams {
    /// Maximum rotor force F̄ [N].
    pub f_max: f64,
    /// Minimum rotor force F̲ [N].
    pub f_min: f64,
    /// Rotor force range ΔF = F̄ - F̲ [N].
    pub delta_f: f64,
    /// Linear drag coefficient β [1/s].
    pub beta: f64,
    /// Vehicle mass m [kg].
    pub mass: f64,
    /// Arm length L [m].
    pub arm_len: f64,
    /// Pitch-axis moment of inertia I_xx [kg m²].
    pub inertia_xx: f64,
    /// Gravitational acceleration g₀ [m/s²].
    pub g0: f64,
}

impl Default for QuadParams {
    /// Bebop-class planar model used throughout.
    fn default() -> Self {
        let f_max = 2.35;
        let f_min = 1.76;
        QuadParams {
            f_max,
            f_min,
            delta_f: f_max - f_min,
            beta: 0.5,
            mass: 0.389,
            arm_len: 0.08,
            inertia_xx: 0.001242,
            g0: 9.81,
        }
    }
}

impl QuadParams {
    /// Validates invariants and re-derives `delta_f` so the identity
    /// ΔF = F̄ - F̲ holds exactly in floating point.
    pub fn validated(mut self) -> Result<Self, DynamicsError> {
        let err = |m: String| Err(DynamicsError::InvalidParams(m));
        if !(self.f_max > self.f_min && self.f_min >= 0.0) {
            return err(format!("need f_max > f_min >= 0, got {} / {}", self.f_max, self.f_min));
        }
        let span = self.f_max - self.f_min;
        if (self.delta_f - span).abs() > 1e-9 * span.max(1.0) {
            return err(format!("delta_f {} inconsistent with f_max - f_min = {}", self.delta_f, span));
        }
        self.delta_f = span;
        if !(self.mass > 0.0 && self.arm_len > 0.0 && self.inertia_xx > 0.0 && self.g0 > 0.0) {
            return err("mass, arm_len, inertia_xx, g0 must all be positive".to_string());
        }
        if self.beta < 0.0 {
            return err(format!("drag coefficient must be nonnegative, got {}", self.beta));
        }
        Ok(self)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, DynamicsError> {
        let text = std::fs::read_to_string(path)?;
        let params: QuadParams = serde_json::from_str(&text)?;
        params.validated()
    }

    pub fn to_json_file(&self, path: &Path) -> Result<(), DynamicsError> {
        let text = serde_json::to_string_pretty(self)?;
        Ok(std::fs::write(path, text)?)
    }
}

/// Planar state (x, z, vx, vz, theta, q); SI units, theta in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
    pub theta: f64,
    pub q: f64,
}

impl PlanarState {
    pub fn new(x: f64, z: f64, vx: f64, vz: f64, theta: f64, q: f64) -> Self {
        PlanarState { x, z, vx, vz, theta, q }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> StateVec {
        StateVec::new(self.x, self.z, self.vx, self.vz, self.theta, self.q)
    }

    pub fn from_vector(v: &StateVec) -> Self {
        PlanarState::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }

    /// State expressed relative to a target position (translation in x, z).
    pub fn relative_to(&self, target: (f64, f64)) -> Self {
        PlanarState { x: self.x - target.0, z: self.z - target.1, ..*self }
    }
}

/// Normalized rotor throttles, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotorCommand {
    pub u1: f64,
    pub u2: f64,
}

impl RotorCommand {
    pub fn new(u1: f64, u2: f64) -> Self {
        RotorCommand { u1, u2 }
    }

    pub fn u_sigma(&self) -> f64 {
        self.u1 + self.u2
    }

    pub fn clamped(&self) -> Self {
        RotorCommand::new(self.u1.clamp(0.0, 1.0), self.u2.clamp(0.0, 1.0))
    }

    pub fn in_bounds(&self, tol: f64) -> bool {
        let ok = |u: f64| u >= -tol && u <= 1.0 + tol;
        ok(self.u1) && ok(self.u2)
    }
}

/// Thrust / pitch-acceleration commands equivalent to a throttle pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actuation {
    /// Commanded specific thrust (u₁+u₂)·ΔF/m [m/s²].
    pub thrust_cmd: f64,
    /// Commanded pitch acceleration (L/I_xx)·ΔF·(u₂-u₁) [rad/s²].
    pub qdot_cmd: f64,
}

/// State derivative at (s, u); see the module equations.
pub fn dynamics_deriv(s: &PlanarState, u: &RotorCommand, p: &QuadParams) -> StateVec {
    deriv_vec(&s.to_vector(), u.u1, u.u2, p)
}

/// Derivative on the raw 6-vector; the hot path used by integrators and the
/// collocation solver.
#[inline]
pub fn deriv_vec(y: &StateVec, u1: f64, u2: f64, p: &QuadParams) -> StateVec {
    let thrust_acc = ((u1 + u2) * p.delta_f + 2.0 * p.f_min) / p.mass;
    let (sin_t, cos_t) = y[4].sin_cos();
    StateVec::new(
        y[2],
        y[3],
        -thrust_acc * sin_t - p.beta * y[2],
        thrust_acc * cos_t - p.g0 - p.beta * y[3],
        y[5],
        p.arm_len / p.inertia_xx * p.delta_f * (u2 - u1),
    )
}

/// One classical RK4 step with the command held constant (zero-order hold).
pub fn step_rk4(s: &PlanarState, u: &RotorCommand, p: &QuadParams, dt: f64) -> PlanarState {
    let y = s.to_vector();
    let k1 = deriv_vec(&y, u.u1, u.u2, p);
    let k2 = deriv_vec(&(y + 0.5 * dt * k1), u.u1, u.u2, p);
    let k3 = deriv_vec(&(y + 0.5 * dt * k2), u.u1, u.u2, p);
    let k4 = deriv_vec(&(y + dt * k3), u.u1, u.u2, p);
    PlanarState::from_vector(&(y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)))
}

/// RK4 step with a time-varying command, sampled at the stage times.
/// Used by replay/verification paths where the control profile is known as a
/// function of time.
pub fn step_rk4_timed<F>(s: &StateVec, p: &QuadParams, t: f64, dt: f64, u_of_t: &F) -> StateVec
where
    F: Fn(f64) -> (f64, f64),
{
    let (u1a, u2a) = u_of_t(t);
    let (u1b, u2b) = u_of_t(t + 0.5 * dt);
    let (u1c, u2c) = u_of_t(t + dt);
    let k1 = deriv_vec(s, u1a, u2a, p);
    let k2 = deriv_vec(&(s + 0.5 * dt * k1), u1b, u2b, p);
    let k3 = deriv_vec(&(s + 0.5 * dt * k2), u1b, u2b, p);
    let k4 = deriv_vec(&(s + dt * k3), u1c, u2c, p);
    s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// The symmetric throttle that exactly cancels gravity at rest:
/// u_hover = (m·g₀ - 2F̲)/(2ΔF).
pub fn hover_command(p: &QuadParams) -> Result<RotorCommand, DynamicsError> {
    let weight = p.mass * p.g0;
    let (lo, hi) = (2.0 * p.f_min, 2.0 * p.f_max);
    if weight < lo || weight > hi {
        return Err(DynamicsError::HoverInfeasible { weight, lo, hi });
    }
    let u = (weight - lo) / (2.0 * p.delta_f);
    Ok(RotorCommand::new(u, u))
}

/// Throttles mapped to the equivalent thrust / pitch-acceleration commands.
///
/// The pitch-acceleration sign follows the plant model (q̇ ∝ u₂ - u₁) so the
/// conversion is consistent with `dynamics_deriv`.
pub fn command_to_actuation(u: &RotorCommand, p: &QuadParams) -> Actuation {
    Actuation {
        thrust_cmd: u.u_sigma() * p.delta_f / p.mass,
        qdot_cmd: p.arm_len / p.inertia_xx * p.delta_f * (u.u2 - u.u1),
    }
}

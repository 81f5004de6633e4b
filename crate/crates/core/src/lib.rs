//! Planar quadrotor guidance-and-control toolkit.
//!
//! The crate covers the full pipeline:
//!
//! * [`dynamics`] — the planar quadrotor model, RK4 integration and command
//!   conversions shared by everything else.
//! * [`ocp`] — free-final-time optimal control via Hermite-Simpson direct
//!   collocation, solved with an augmented-Lagrangian / projected L-BFGS
//!   method, plus an independent re-integration audit.
//! * [`dataset`] — mass production of converged optimal trajectories and the
//!   state-control pair database used for training.
//! * [`net`] — a small fully connected policy network trained with Adam to
//!   imitate the optimal state-to-throttle mapping.
//! * [`sim`] — closed-loop flight of the policy against the plant, with an
//!   actuation delay line and an empirical stability-margin search.
//! * [`diffgc`] — the minimum-snap differential-flatness benchmark controller.
//! * [`bench`] — head-to-head arrival-time comparison grids and flight
//!   statistics.

pub mod bench;
pub mod dataset;
pub mod diffgc;
pub mod dynamics;
pub mod net;
pub mod ocp;
pub mod sim;

pub use dynamics::{PlanarState, QuadParams, RotorCommand};

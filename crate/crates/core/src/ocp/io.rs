//! Trajectory serialization: CSV node table plus a JSON metadata sidecar.

use super::{OcpSolution, TrajectoryNode};
use crate::dynamics::{PlanarState, RotorCommand};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const TRAJECTORY_HEADER: &str = "t,x,z,vx,vz,theta,q,u1,u2";

#[derive(Debug, Error)]
pub enum TrajIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },
}

/// Sidecar metadata stored next to the node CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub epsilon: f64,
    pub tf: f64,
    pub cost: f64,
    pub converged: bool,
    pub defect_norm: f64,
    pub num_nodes: usize,
}

pub fn write_solution_csv(sol: &OcpSolution, path: &Path) -> Result<(), TrajIoError> {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for n in &sol.nodes {
        push_node_row(&mut out, n);
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_solution_meta(sol: &OcpSolution, epsilon: f64, path: &Path) -> Result<(), TrajIoError> {
    let meta = SolutionMeta {
        epsilon,
        tf: sol.tf,
        cost: sol.cost,
        converged: sol.converged,
        defect_norm: sol.defect_norm,
        num_nodes: sol.nodes.len(),
    };
    Ok(std::fs::write(path, serde_json::to_string_pretty(&meta)?)?)
}

pub(crate) fn push_node_row(out: &mut String, n: &TrajectoryNode) {
    let s = &n.state;
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        n.t, s.x, s.z, s.vx, s.vz, s.theta, s.q, n.control.u1, n.control.u2
    ));
}

pub(crate) fn parse_node_row(fields: &[&str], line: usize) -> Result<TrajectoryNode, TrajIoError> {
    if fields.len() != 9 {
        return Err(TrajIoError::Schema {
            line,
            msg: format!("expected 9 fields, got {}", fields.len()),
        });
    }
    let mut v = [0.0f64; 9];
    for (i, f) in fields.iter().enumerate() {
        v[i] = f.parse().map_err(|_| TrajIoError::Schema {
            line,
            msg: format!("bad number in field {}: {f:?}", i + 1),
        })?;
    }
    Ok(TrajectoryNode {
        t: v[0],
        state: PlanarState::new(v[1], v[2], v[3], v[4], v[5], v[6]),
        control: RotorCommand::new(v[7], v[8]),
    })
}

/// Reads back a node CSV written by [`write_solution_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryNode>, TrajIoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRAJECTORY_HEADER => {}
        other => {
            return Err(TrajIoError::Schema {
                line: 1,
                msg: format!("bad header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut nodes = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        nodes.push(parse_node_row(&fields, i + 1)?);
    }
    Ok(nodes)
}

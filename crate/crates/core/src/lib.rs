//! Continuum deformation cooperative control for a leader–follower
//! quadrotor team.
//!
//! Three leaders define a planar homogeneous (affine) transformation of the
//! team's initial configuration; followers acquire it by taking fixed
//! barycentric combinations of their three in-neighbors. The crate covers:
//!
//! - [`formation`]: transforms, leader inversion, communication weights,
//!   local and global desired positions.
//! - [`safety`]: the deviation/contraction safety certificate and the
//!   bounding triangle.
//! - [`guidance`]: quintic spline leader trajectories and the reference
//!   contraction / square / expansion mission.
//! - [`vehicle`]: a planar double-integrator quadrotor with a cascaded
//!   position/velocity PID loop, delayed measurements and wind.
//! - [`netsim`]: the 60 Hz ground-station broadcast with latency and loss.
//! - [`monitor`]: the four in-flight constraints and error statistics.
//! - [`sim`]: the deterministic closed-loop simulation tying it together.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod formation;
pub mod geom;
pub mod guidance;
mod linalg;
pub mod monitor;
pub mod netsim;
pub mod safety;
pub mod sim;
pub mod trace;
pub mod vehicle;

pub use error::{Error, Result};
pub use formation::{AgentId, FormationSpec, HomogeneousTransform, TimedTransform, Weights};
pub use geom::{Mat2, Vec2};

//! Capsizing-aware trajectory planning for wheeled robots on uneven 2.5D terrain.
//!
//! The crate is organised bottom-up:
//!
//! - [`terrain`]: grid maps, per-cell SVD normals, synthetic terrain and ASCII grid I/O
//! - [`gnf`]: the continuous ground-normal field (ordinary Kriging over 3×3 windows)
//! - [`stability`]: stability-pyramid tip-over test and the traversable-orientation set
//! - [`lift`]: SE(2) → SE(3) lifting of planar states onto the terrain surface
//! - [`optimizer`]: time-elastic-band trajectories, penalty factors and a dense LM solver
//! - [`planner`]: initialisation, warm start, replanning and infeasibility reseeding
//! - [`sim`]: differential-drive kinematic simulation with a rollout tracker
//! - [`report`]: navigation metrics, benchmark tables and CSV/SVG emitters
//!
//! Batch workloads (map classification, benchmark trials, field dumps) run on rayon
//! when the `parallel` feature is enabled and fall back to plain iterators otherwise.

pub mod angle;
pub mod config;
pub mod error;
pub mod gnf;
pub mod lift;
pub mod optimizer;
pub mod par;
pub mod planner;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod stability;
pub mod terrain;

pub use error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

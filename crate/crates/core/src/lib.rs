//! Simulator for quantum-counting ray tracing.
//!
//! A pixel's color is the mean of a table of path colors indexed by a
//! discrete path id. The table mean is rewritten as the number of
//! (path, comparator) pairs that a boolean oracle marks, and that count
//! is estimated with simulated quantum counting. A Monte Carlo path
//! tracer over the same scene format serves as the classical baseline.

pub mod classical;
pub mod counting;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod image;
pub mod paths;
pub mod pipeline;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{Frame, Vec3};
pub use image::{Image, Rgb};
pub use scene::{load_scene, parse_scene, Camera, Material, Ray, Scene, Triangle};

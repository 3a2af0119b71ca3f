//! Two-loop architecture: reconstructed feedforward level, flat reference
//! planning, outer correction on the regulated point and the inner
//! model-free loop on the near-actuator level.

mod controller;
pub mod outer;
pub mod reconstruction;
pub mod trajectory;

pub use controller::{CascadeController, CascadeInit, CascadeSample, CascadeSettings};
pub use outer::{OuterGains, OuterLoop};
pub use reconstruction::{calibrate_reconstruction, Calibration, ReconstructionLaw, ReconstructionRow, Trend};
pub use trajectory::{plan_trajectory, Knot, QuinticSegment, RefPoint, ReferenceTrajectory};

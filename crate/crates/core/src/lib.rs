//! Model-free water-level control of a hydroelectric reach.
//!
//! * [`signals`]: sampled traces, sensor quantization, algebraic slope filter.
//! * [`mfc`]: ultra-local model, intelligent PI/PID, saturation, anti-windup.
//! * [`plant`]: Saint-Venant reference reach and a delayed-integrator surrogate.
//! * [`cascade`]: level reconstruction, reference planning, outer correction
//!   and the complete two-loop controller.
//! * [`scenarios`]: exogenous inputs, perturbations and band metrics.
//! * [`cli`]: configuration, experiment runners and file export.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod mfc;
pub mod plant;
pub mod scenarios;
pub mod signals;
pub mod units;

pub use error::{Error, Result};

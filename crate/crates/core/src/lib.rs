//! Energy-aware selection of the maximum D2D transmission range per content
//! class in D2D-assisted cellular content delivery.
//!
//! The crate pairs a closed-form model of the per-delivery D2D and I2D
//! energies (valid for non-delay-tolerant classes) with a discrete-event
//! Monte Carlo simulator of the offloading protocol that also covers delay
//! tolerant classes. The optimizer picks the range minimizing
//! `w·E_D2D + (1 − w)·E_I2D`, and the experiment drivers compare a per-class
//! (selective) range choice with a single common range.

pub mod analytic;
pub mod config;
pub mod error;
pub mod experiments;
pub mod layout;
pub mod optimizer;
pub mod quadrature;
pub mod radio;
pub mod sim;
pub mod spatial;
pub mod special;
pub mod traffic;

pub use analytic::{AnalyticModel, EnergyBreakdown};
pub use error::{Error, Result};
pub use layout::{NetworkLayout, Point, UEField};
pub use optimizer::{OptimizationResult, OptimizerSettings};
pub use quadrature::QuadratureSettings;
pub use radio::{LinkType, PathLossModel, RadioConfig};
pub use traffic::{ContentClass, MixEntry, TrafficMix};

//! Positive-unlabeled learning with an instance-dependent labeling
//! propensity, fitted by joint empirical risk minimization.
//!
//! The posterior `y(x) = P(y = 1 | x)` and the propensity
//! `e(x) = P(s = 1 | y = 1, x)` are both logistic. Only their product is
//! observed through `s`; [`jerm::fit`] separates them with a spy-based
//! estimate of the positive set.

pub mod bench;
pub mod config;
pub mod data;
pub mod error;
pub mod glm;
pub mod jerm;
pub mod mm;
pub mod model_io;
pub mod scenarios;
pub mod spy;
pub mod synthetic;

pub use data::{PUDataset, Standardizer};
pub use error::{Error, Result};
pub use glm::{LinearModel, Theta};
pub use jerm::{BetaStart, JermConfig, JermFit};
pub use mm::MMConfig;
pub use scenarios::{ScenarioSpec, Strategy};

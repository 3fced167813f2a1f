//! Constrained D-optimal sampling allocations for generalised linear models
//! and multinomial logit models.

pub mod allocation;
pub mod config;
pub mod error;
pub mod ew;
pub mod feasible;
pub mod glm;
pub mod information;
pub mod mlm;
pub mod numkernel;
pub mod optimizer;
pub mod rounding;
pub mod report;
pub mod seed;
pub mod sim;
pub mod workflow;

pub use allocation::{ApproximateAllocation, DesignProblem, ExactAllocation, Model};
pub use error::{Error, Result};
pub use feasible::{ConstraintRow, Direction, Interval, LinearConstraintSet};
pub use glm::Link;
pub use information::InformationSet;
pub use mlm::MlmKind;
pub use numkernel::{Matrix, Polynomial};
pub use config::{ProblemConfig, Scenario};
pub use optimizer::{OptimOptions, OptimResult};
pub use sim::{RmseReport, Strategy};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/information.md")]
    mod information {}
    #[doc = include_str!("../../../book/src/regions.md")]
    mod regions {}
    #[doc = include_str!("../../../book/src/liftone.md")]
    mod liftone {}
    #[doc = include_str!("../../../book/src/rounding.md")]
    mod rounding {}
    #[doc = include_str!("../../../book/src/ew.md")]
    mod ew {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Market making under latency.
//!
//! The mid-price moves by single ticks at Poisson times. A maker sends
//! limit quotes on a fixed decision grid, and each instruction reaches the
//! exchange after a fixed latency. The crate computes order values, solves
//! the resulting finite-horizon control problem on the reduced state
//! `(q, r_ask, r_bid)`, simulates strategies with exact half-tick cash and
//! estimates model rates from LOBSTER-style event data.
//!
//! Numerical kernels are generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`.

pub mod ctmc;
pub mod dpsolver;
pub mod error;
pub mod estimation;
pub mod fillmodel;
pub mod increments;
pub mod ordervalue;
pub mod params;
pub mod profitability;
pub mod relprice;
pub mod scalar;
pub mod simulator;

pub use dpsolver::{
    admissible_actions, ActionGrid, ActionPair, Policy, Solver, State, StateSpace, Truncation,
};
pub use error::{Error, Result};
pub use fillmodel::{FillModel, FillType, KernelCell};
pub use increments::{edge_per_fill, price_increment_dist};
pub use params::{ModelParams, ParamsConfig, Side};
pub use profitability::{ProfitabilityReport, QuotePair, Regime};
pub use relprice::{Leg, RelPrice};
pub use scalar::Scalar;

pub type PriceIncrementDist = increments::PriceIncrementDist<f64>;
pub type PhaseKernel = fillmodel::PhaseKernel<f64>;
pub type PeriodOutcome = fillmodel::PeriodOutcome<f64>;
pub type ValueSurface = dpsolver::ValueSurface<f64>;
pub type Model = FillModel<f64>;

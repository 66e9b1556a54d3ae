//! Rate estimation from LOBSTER-style order-event logs.

pub mod estimators;
pub mod lobster;
pub mod replay;
pub mod synthetic;

pub use estimators::{estimate_lambda, estimate_uninformed_rates, one_tick_filter, SpreadFilter};
pub use lobster::{parse_lobster, write_lobster, BookSnapshot, Direction, EventType, OrderEvent, PRICE_SCALE};
pub use replay::{replay_artificial_orders, Injection, Outcome, ReplayResult};
pub use synthetic::{generate, SyntheticConfig, SyntheticCounts, SyntheticData};

//! Massive-MIMO downlink simulator: multi-cell-aware RZF precoding, max-min
//! power allocation through uplink/downlink duality, and the large-system
//! deterministic equivalents that drive it from statistical CSI only.

pub mod channel;
pub mod error;
pub mod linalg;
pub mod power;
pub mod precoder;
pub mod rmt;
pub mod scenario;
pub mod sim;

pub use error::{Error, ErrorKind, Result};
pub use scenario::SystemConfig;
pub use sim::{run_experiment, ExperimentResult, SchemeId, Sweep};

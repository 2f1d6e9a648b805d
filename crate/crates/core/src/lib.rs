//! Deterministic, epoch-driven simulator of a non-inclusive last-level
//! cache with DCA ways and directory-coupled inclusive ways, synthetic I/O
//! and memory workloads, and a runtime LLC-management controller that
//! partitions ways by priority, detects antagonists, and selectively
//! disables DCA.

pub mod builtins;
pub mod cache;
pub mod controller;
pub mod device;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod report;
pub mod scenario;
pub mod telemetry;
pub mod workload;

pub use cache::{AccessKind, AccessLevel, CacheModel, ModelConfig};
pub use error::{ConfigError, ParseError, SimAssertion};
pub use geometry::{CacheGeometry, ClassId, DeviceId, LineAddr, WayMask};

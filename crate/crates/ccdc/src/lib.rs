//! Bit-exact simulator for MapReduce-style distributed computation with
//! linear aggregation.
//!
//! A run executes `J` jobs, each mapping `N` input files into `T`-bit
//! intermediate values and reducing `Q` output functions as group sums of
//! those values, on `K` nodes that each store an `r/K` fraction of the data.
//! Four shuffle schemes move the intermediate values around:
//!
//! * [`SchemeKind::Uncoded`] — unicast every missing value raw;
//! * [`SchemeKind::Compression`] — pre-combine values of the same function
//!   at the sender, one value-sized unicast per batch;
//! * [`SchemeKind::Cdc`] — coded multicast within node subsets, recovering
//!   every value individually;
//! * [`SchemeKind::CompressedCdc`] — pre-combine per batch, then coded
//!   multicast across nodes and across jobs in two stages.
//!
//! Every broadcast is logged with exact bit accounting, the measured
//! communication load is an exact rational, and each run's reduced outputs
//! are compared bitwise against a centralized oracle.
//!
//! ```
//! use ccdc::{formula_load, oracle_outputs, schemes, SchemeKind, SystemConfig, Workload};
//! use ccdc::{AggregationGroup, WorkloadFamily};
//!
//! let cfg = SystemConfig {
//!     k: 4, r: 2, n: 6, q: 4, t: 1024, gamma: 1, seed: 7,
//!     group: AggregationGroup::Add8,
//!     workload: WorkloadFamily::Prf,
//!     scheme: SchemeKind::CompressedCdc,
//! };
//! let outcome = schemes::run(&cfg)?;
//! assert_eq!(outcome.load, formula_load(cfg.scheme, cfg.k, cfg.r, cfg.n)?);
//! let oracle = oracle_outputs(&cfg, &Workload::from_config(&cfg))?;
//! assert_eq!(outcome.outputs, oracle);
//! # Ok::<(), ccdc::Error>(())
//! ```

pub mod analysis;
pub mod config;
pub mod error;
pub mod load;
pub mod model;
pub mod net;
pub mod schemes;
pub mod subsets;
pub mod value;
pub mod workload;

#[cfg(doctest)]
pub mod book;

pub use analysis::{formula_load, oracle_outputs, verify, Fraction, LoadReport};
pub use config::{AggregationGroup, SchemeKind, SystemConfig, WorkloadFamily};
pub use error::{Error, Result};
pub use load::Load;
pub use model::{FileRef, FunctionRef, NodeId, NodeSubset, Placement, ReduceAssignment};
pub use net::{FaultSpec, MsgTag, Multicast, TraceLog};
pub use schemes::Outcome;
pub use value::Value;
pub use workload::{MapWork, Workload};

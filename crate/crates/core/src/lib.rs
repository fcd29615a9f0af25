//! Online embedding of multi-VNF services onto a layered edge/aggregation/cloud
//! infrastructure.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the static system description (topology, catalog, parameters).
//! * [`allocation`] computes the highest feasible layer of a request and splits its
//!   processing budget across the jobs of the service chain.
//! * [`ranges`] maps per-job delay budgets onto geometric latency ranges.
//! * [`engine`] is the range-pure best-fit packing engine (c-REShare).
//! * [`shadow`] keeps the fractional shadow assignment whose full-VM cost
//!   lower-bounds the optimum.
//! * [`adaptive`] is the REShare controller that moves epsilon with the load.
//! * [`baselines`] has the exhaustive optimum for tiny instances and the greedy
//!   relaxation proxy.
//! * [`workload`], [`scenario`] and [`sim`] turn scenario files into event streams
//!   and drive a strategy through them.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod allocation;
pub mod baselines;
pub mod cli;
pub mod engine;
pub mod error;
pub mod model;
pub mod ranges;
pub mod scenario;
pub mod shadow;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
pub use model::{
    Catalog, Job, LayerSpec, NodeId, Request, RequestId, ServiceId, ServiceSpec, SystemModel,
    SystemParams, Topology, VmId, VnfId, VnfSpec,
};
pub use scenario::Scenario;
pub use sim::{run, RunOptions, RunOutput, StrategyKind};

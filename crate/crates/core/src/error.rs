use thiserror::Error;

use crate::model::{RequestId, VmId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("job cannot be served even alone at full speed (theta*load = {demand}, mu_bar = {mu_bar})")]
    InfeasibleJob { demand: f64, mu_bar: f64 },

    #[error("request {0} is infeasible at every layer")]
    InfeasibleRequest(RequestId),

    #[error("range index {index} outside the scheme (last index {max_index})")]
    IndexOutOfScheme { index: u32, max_index: u32 },

    #[error("delay budget {budget} is below the smallest range endpoint {minimum}")]
    BudgetBelowMinimum { budget: f64, minimum: f64 },

    #[error("delay budget {budget} exceeds the last range endpoint {maximum}")]
    BudgetAboveScheme { budget: f64, maximum: f64 },

    #[error("no latency range fits: lambda_min*(1+eps) = {capacity} >= mu_bar = {mu_bar}")]
    NoValidRange { capacity: f64, mu_bar: f64 },

    #[error("unknown request {0}")]
    UnknownRequest(RequestId),

    #[error("vm {0} hosts no jobs")]
    EmptyVm(VmId),

    #[error("oracle instance has {jobs} jobs, limit is {limit}")]
    InstanceTooLarge { jobs: usize, limit: usize },

    #[error("instance has no feasible assignment")]
    Infeasible,

    #[error("invalid workload plan: {0}")]
    InvalidPlan(String),

    #[error("trace row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("trace row {row}: load {load} below lambda_min {lambda_min}")]
    LoadBelowMinimum { row: u64, load: f64, lambda_min: f64 },

    #[error("invalid scenario:\n{}", .0.join("\n"))]
    Scenario(Vec<String>),

    #[error("invariant breach: {0}")]
    Invariant(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

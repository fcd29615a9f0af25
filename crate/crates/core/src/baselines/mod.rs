//! Comparison strategies: the exhaustive optimum for tiny instances and the
//! greedy relaxation proxy.

pub mod oracle;
pub mod relax;

pub use oracle::{oracle_optimal_cost, OracleBlock, OracleInstance, OracleJob, OracleSolution};
pub use relax::relax_sota_place;

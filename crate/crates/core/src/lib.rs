//! Minimum-loss reconfiguration of radial distribution networks.
//!
//! A feeder is modeled as a graph of buses and switchable lines. Every
//! spanning tree rooted at the substation is a feasible radial configuration;
//! the crate searches for the one with least resistive loss by branch
//! exchange, checks results against exhaustive enumeration, and validates the
//! approximate loss model with an exact radial power flow.
//!
//! Batch work (tree enumeration, multistart search, candidate scoring) runs on
//! rayon when the default `parallel` feature is on; see [`Exec`].

pub mod cases;
pub mod enumerate;
pub mod error;
pub mod gadget;
pub mod generate;
pub mod loss;
pub mod network;
pub mod par;
pub mod powerflow;
pub mod search;
pub mod tree;

pub use enumerate::{count_trees_kirchhoff, enumerate_trees, global_optimum, rank_comparison, TreeTable};
pub use error::{DnrError, Result};
pub use gadget::{build_gadget, c_min, decide_partition, PartitionInstance};
pub use loss::{f_super, line_loss, path_counts, total_loss, unit_demand_cost, LossBreakdown, PathCounts};
pub use network::{load_case, save_case, validate, BusId, LineId, Network};
pub use par::Exec;
pub use powerflow::{assumption_report, exact_loss, solve_radial, PfOptions, PowerFlowSolution};
pub use search::{branch_exchange, check_bound, random_spanning_tree, PivotRule, SearchParams, SearchTrace};
pub use tree::{default_tree, fundamental_cycle, is_spanning_tree, orient, swap, RootedOrientation, TreeConfig};

//! Events, execution graphs and the relation algebra over them.

mod event;
mod execution;
mod export;
mod order;
mod relation;

pub use event::{EventId, EventLabel, Kind, Loc, ThreadId, Value};
pub use execution::{from_read, Behavior, EventSet, ExecutionGraph, GraphIndex, ThreadEvent};
pub use export::{graph_from_json, graph_to_dot, graph_to_json, GraphJson, JsonEvent};
pub use order::{check_n_total, check_prefix_finite_bounded, PrefixFiniteReport};
pub use relation::Relation;

//! Dual consensus ADMM for the issuance auction over a simulated network of a
//! manager and `N` user nodes, and the decentralised auction protocol built on
//! it.

mod io;
mod network;
mod nodes;
mod protocol;
pub(crate) mod run;

pub use io::{read_trace_csv, write_trace_csv};
pub use network::{sample_active_sets, ActiveSets, NetworkModel, Topology};
pub use nodes::{exchange, manager_step, user_step, ManagerState, UserNodeState};
pub use protocol::{
    faithfulness_probe, run_protocol_hooked, run_protocol_one, run_protocol_with, ProtocolRun, VERIFY_TOLERANCE,
};
pub use run::{
    run_dual_consensus, run_dual_consensus_hooked, ConsensusResult, ConsensusSettings, Deviation, RoundHooks,
    RoundRecord,
};

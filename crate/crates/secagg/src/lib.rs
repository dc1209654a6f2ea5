//! Secure, energy-aware distributed max-aggregation for wireless sensor
//! networks.
//!
//! Every node keeps a running estimate of the network-wide maximum as a
//! `(mean, covariance)` pair and refines it from two sources:
//!
//! * its own readings, folded in with a step-weighted mixture of bounded
//!   Gaussians that is moment-matched back to a Gaussian ([`fusion`]);
//! * estimates broadcast by neighbors, folded in with covariance
//!   intersection ([`estimate`]), which needs no cross-correlation
//!   knowledge.
//!
//! Broadcasts are suppressed unless they would change a neighbor's view by
//! more than a threshold, and two-hop neighborhood tables avoid re-flooding
//! information the neighborhood already has. A statistical security layer
//! challenges estimates that deviate by more than `k` standard deviations,
//! puts them to a majority vote among the neighbors, and isolates nodes
//! voted compromised ([`protocol`]).
//!
//! The [`sim`] module drives all of this in a deterministic discrete-event
//! simulation with a disc-radio broadcast channel, per-message energy
//! accounting, and configurable attacker behaviors; [`metrics`] and
//! [`report`] compute and serialize detection/energy/delivery statistics.
//!
//! Start with the runnable programs under `examples/` — there is one per
//! major capability — or with the `secagg` binary (`run` / `compare`
//! subcommands).

pub mod cli;
pub mod config;
pub mod estimate;
pub mod fusion;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod sim;

pub use config::{AttackConfig, AttackMode, ConfigError, ScenarioConfig};
pub use estimate::{ci_fuse, ci_fuse_optimal, ci_optimal_omega, CiObjective, Estimate, Omega};
pub use fusion::{
    case1_threshold, case2_threshold, fuse_local, truncated_moments, FusionConfig, Gaussian1D,
    StepWeight, TruncatedMoments,
};
pub use metrics::{detection_stats, overhead_report, Metrics, OverheadReport};
pub use protocol::{Message, MessageKind, NodeId, NodeState, ProtocolConfig, Verdict};
pub use sim::{run, run_traced, EventTrace, Topology};

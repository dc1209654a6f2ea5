//! Evaluation quantities for a simulation run: detection effectiveness,
//! energy, delivery ratio, and aggregation accuracy.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::protocol::NodeId;

/// Broadcast transmissions by message type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MessageCounts {
    pub estimate: u64,
    pub challenge_request: u64,
    pub challenge_response: u64,
    pub isolation: u64,
}

impl MessageCounts {
    pub fn total(&self) -> u64 {
        self.estimate + self.challenge_request + self.challenge_response + self.isolation
    }
}

/// Outcome of the compromised-node detection scheme over a whole run.
///
/// A compromised node counts as detected when at least one honest node ends
/// the run with it blacklisted; honest nodes blacklisting each other are
/// false positives; compromised nodes flagged by other compromised nodes do
/// not count.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionStats {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub detection_rate: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
}

/// Computes detection statistics from per-node final blacklists.
///
/// `blacklists` must contain one entry per node in the network; honest nodes
/// are the keys not in `compromised`.
pub fn detection_stats(
    blacklists: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    compromised: &BTreeSet<NodeId>,
) -> DetectionStats {
    let honest: BTreeSet<NodeId> =
        blacklists.keys().copied().filter(|id| !compromised.contains(id)).collect();
    let mut flagged_by_honest: BTreeSet<NodeId> = BTreeSet::new();
    for (id, blacklist) in blacklists {
        if honest.contains(id) {
            flagged_by_honest.extend(blacklist.iter().copied());
        }
    }
    let true_positives = compromised.iter().filter(|c| flagged_by_honest.contains(c)).count();
    let false_negatives = compromised.len() - true_positives;
    let false_positives = honest.iter().filter(|h| flagged_by_honest.contains(h)).count();
    let rate = |count: usize, denom: usize| if denom == 0 { 0.0 } else { count as f64 / denom as f64 };
    DetectionStats {
        true_positives,
        false_positives,
        false_negatives,
        detection_rate: rate(true_positives, compromised.len()),
        fp_rate: rate(false_positives, honest.len()),
        fn_rate: rate(false_negatives, compromised.len()),
    }
}

/// One sample of the accuracy trace: distance of the nodes' estimates from
/// the running true maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPoint {
    pub t_s: f64,
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    pub true_max: f64,
    pub alive_nodes: usize,
}

/// Per-node final report.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    /// Total energy consumed, exactly `tx_j + rx_j + sense_j`.
    pub energy_j: f64,
    pub tx_j: f64,
    pub rx_j: f64,
    pub sense_j: f64,
    pub remaining_j: f64,
    pub alive: bool,
    pub compromised: bool,
    /// How many honest nodes ended the run with this node blacklisted.
    pub flagged_by: usize,
    pub est_mean: Option<f64>,
    pub est_std: Option<f64>,
}

/// Everything measured over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub seed: u64,
    pub n_nodes: usize,
    pub security_enabled: bool,
    pub sim_time_s: f64,
    pub compromised_count: usize,
    pub per_node: Vec<NodeReport>,
    pub messages: MessageCounts,
    pub packets_sent: u64,
    pub packets_received: u64,
    pub packets_lost: u64,
    pub buffer_dropped: u64,
    pub dead_dropped: u64,
    pub unknown_dropped: u64,
    /// Received over sent, per intended recipient; 1 when nothing was sent.
    pub delivery_ratio: f64,
    pub detection: DetectionStats,
    pub challenges_issued: u64,
    pub verdicts_malicious: u64,
    pub verdicts_innocent: u64,
    pub verdicts_inconclusive: u64,
    pub accuracy_trace: Vec<AccuracyPoint>,
    /// First probe time at which at least 95% of alive nodes sat within
    /// 1 degC of the running true maximum.
    pub convergence_time_s: Option<f64>,
    /// Running maximum of honest sensed values at the end of the run.
    pub true_max: f64,
    pub total_energy_j: f64,
    pub mean_energy_j: f64,
    pub alive_nodes: usize,
    pub mean_degree: f64,
    pub largest_component_fraction: f64,
}

impl Metrics {
    /// Every scalar metric, in the stable order used by the summary file and
    /// the seed-sweep aggregates.
    pub fn scalar_fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("seed", self.seed as f64),
            ("n_nodes", self.n_nodes as f64),
            ("security_enabled", if self.security_enabled { 1.0 } else { 0.0 }),
            ("sim_time_s", self.sim_time_s),
            ("compromised_count", self.compromised_count as f64),
            ("messages_estimate", self.messages.estimate as f64),
            ("messages_challenge_request", self.messages.challenge_request as f64),
            ("messages_challenge_response", self.messages.challenge_response as f64),
            ("messages_isolation", self.messages.isolation as f64),
            ("messages_total", self.messages.total() as f64),
            ("packets_sent", self.packets_sent as f64),
            ("packets_received", self.packets_received as f64),
            ("packets_lost", self.packets_lost as f64),
            ("buffer_dropped", self.buffer_dropped as f64),
            ("dead_dropped", self.dead_dropped as f64),
            ("unknown_dropped", self.unknown_dropped as f64),
            ("delivery_ratio", self.delivery_ratio),
            ("detection_true_positives", self.detection.true_positives as f64),
            ("detection_false_positives", self.detection.false_positives as f64),
            ("detection_false_negatives", self.detection.false_negatives as f64),
            ("detection_rate", self.detection.detection_rate),
            ("fp_rate", self.detection.fp_rate),
            ("fn_rate", self.detection.fn_rate),
            ("challenges_issued", self.challenges_issued as f64),
            ("verdicts_malicious", self.verdicts_malicious as f64),
            ("verdicts_innocent", self.verdicts_innocent as f64),
            ("verdicts_inconclusive", self.verdicts_inconclusive as f64),
            ("convergence_time_s", self.convergence_time_s.unwrap_or(f64::NAN)),
            ("true_max", self.true_max),
            ("total_energy_j", self.total_energy_j),
            ("mean_energy_j", self.mean_energy_j),
            ("alive_nodes", self.alive_nodes as f64),
            ("mean_degree", self.mean_degree),
            ("largest_component_fraction", self.largest_component_fraction),
        ]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OverheadError {
    #[error("runs are not paired: seeds {0} and {1} differ")]
    SeedMismatch(u64, u64),
    #[error("runs are not paired: node counts {0} and {1} differ")]
    SizeMismatch(usize, usize),
}

/// Secure-versus-baseline comparison of two paired runs.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    /// Mean over nodes of `100 * (E_secure - E_baseline) / E_baseline`.
    pub energy_overhead_pct: f64,
    pub delivery_ratio_delta: f64,
    pub secure_mean_energy_j: f64,
    pub baseline_mean_energy_j: f64,
    pub secure_messages: u64,
    pub baseline_messages: u64,
}

/// Compares a security-enabled run against its baseline. Both runs must use
/// the same seed and node count so topology and field draws are identical.
pub fn overhead_report(secure: &Metrics, baseline: &Metrics) -> Result<OverheadReport, OverheadError> {
    if secure.seed != baseline.seed {
        return Err(OverheadError::SeedMismatch(secure.seed, baseline.seed));
    }
    if secure.n_nodes != baseline.n_nodes {
        return Err(OverheadError::SizeMismatch(secure.n_nodes, baseline.n_nodes));
    }
    let per_node_pct: Vec<f64> = secure
        .per_node
        .iter()
        .zip(baseline.per_node.iter())
        .map(|(s, b)| 100.0 * (s.energy_j - b.energy_j) / b.energy_j)
        .collect();
    let energy_overhead_pct = per_node_pct.iter().sum::<f64>() / per_node_pct.len() as f64;
    Ok(OverheadReport {
        energy_overhead_pct,
        delivery_ratio_delta: secure.delivery_ratio - baseline.delivery_ratio,
        secure_mean_energy_j: secure.mean_energy_j,
        baseline_mean_energy_j: baseline.mean_energy_j,
        secure_messages: secure.messages.total(),
        baseline_messages: baseline.messages.total(),
    })
}

//! Per-node protocol state machine.
//!
//! Each node owns a [`NodeState`] and is driven by three inputs: its own
//! sensor readings, messages heard from one-hop neighbors, and challenge
//! deadlines. Handlers mutate the state and return the broadcasts to
//! transmit; all transitions are deterministic functions of
//! `(state, input, config)`.
//!
//! A received estimate that deviates from the node's own by more than
//! `deviation_sigma` standard deviations is quarantined as a possible attack:
//! it is held out of fusion while the node asks its other neighbors for their
//! estimates and majority-votes on the suspect. A suspect voted compromised
//! is blacklisted and announced to the neighborhood; an acquitted estimate is
//! fused late. Quarantining (rather than fusing and later "ignoring") is
//! deliberate: covariance intersection is not invertible, so a bad estimate
//! could never be backed out again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::estimate::ci_fuse_optimal;
use crate::fusion::{fuse_local, FusionConfig, Gaussian1D};

/// Identifier of a sensor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// How the broadcast threshold compares estimate means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// `|new - old| > threshold`.
    Absolute,
    /// `|new - old| > threshold * |old|`.
    #[default]
    Relative,
}

/// Protocol thresholds and switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Run the deviation test / challenge / isolation machinery. When off,
    /// every received estimate is fused and security messages are ignored.
    pub security_enabled: bool,
    /// Minimum change that justifies a broadcast, per [`ThresholdMode`].
    pub broadcast_threshold: f64,
    pub broadcast_mode: ThresholdMode,
    /// Deviation test multiplier: suspect if
    /// `|mean difference| > deviation_sigma * sensing_std`.
    pub deviation_sigma: f64,
    /// Spread of honest sensing results in a neighborhood, the yardstick of
    /// the deviation test and of the majority vote. The global estimate's
    /// own standard deviation is no yardstick: mixture fusion inflates it,
    /// which would widen the window exactly when the network is noisy.
    pub sensing_std: f64,
    /// Sharp-fall threshold as a multiple of the global estimate's standard
    /// deviation.
    pub sharp_fall_sigmas: f64,
    /// How long a challenger collects responses before voting.
    pub challenge_window_s: f64,
    /// Fewer responders than this leaves a challenge inconclusive.
    pub min_responders: usize,
    /// Restrict mixture components to their 3-sigma supports in local fusion.
    pub hard_truncate: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            security_enabled: true,
            broadcast_threshold: 0.02,
            broadcast_mode: ThresholdMode::Relative,
            deviation_sigma: 3.0,
            sensing_std: 1.0,
            sharp_fall_sigmas: 3.0,
            challenge_window_s: 0.5,
            min_responders: 2,
            hard_truncate: false,
        }
    }
}

impl ProtocolConfig {
    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            sharp_fall_sigmas: self.sharp_fall_sigmas,
            hard_truncate: self.hard_truncate,
        }
    }
}

/// A broadcast on the wireless medium. Every message carries its transmitter
/// and send time.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: NodeId,
    pub sent_at: f64,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageKind {
    EstimateBroadcast { origin: NodeId, est: Gaussian1D },
    ChallengeRequest { challenger: NodeId, suspect: NodeId },
    ChallengeResponse { responder: NodeId, suspect: NodeId, est: Gaussian1D },
    IsolationAnnouncement { announcer: NodeId, suspect: NodeId },
}

impl MessageKind {
    pub fn label(&self) -> &'static str {
        match self {
            MessageKind::EstimateBroadcast { .. } => "estimate",
            MessageKind::ChallengeRequest { .. } => "challenge-request",
            MessageKind::ChallengeResponse { .. } => "challenge-response",
            MessageKind::IsolationAnnouncement { .. } => "isolation",
        }
    }
}

/// An open majority vote about one suspect.
#[derive(Debug, Clone, PartialEq)]
pub struct Challenge {
    pub suspect: NodeId,
    /// The deviant estimate, held out of fusion until the verdict.
    pub quarantined_est: Gaussian1D,
    pub responses: BTreeMap<NodeId, Gaussian1D>,
    pub deadline: f64,
}

/// Outcome of a resolved challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Malicious,
    Innocent,
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Malicious => "malicious",
            Verdict::Innocent => "innocent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Battery bookkeeping. Consumption is tracked per category so that
/// `consumed = tx + rx + sense` holds exactly; the remaining charge is
/// derived, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMeter {
    initial_j: f64,
    tx_j: f64,
    rx_j: f64,
    sense_j: f64,
}

impl EnergyMeter {
    pub fn new(initial_j: f64) -> Self {
        Self { initial_j, tx_j: 0.0, rx_j: 0.0, sense_j: 0.0 }
    }

    pub fn initial_j(&self) -> f64 {
        self.initial_j
    }

    pub fn tx_j(&self) -> f64 {
        self.tx_j
    }

    pub fn rx_j(&self) -> f64 {
        self.rx_j
    }

    pub fn sense_j(&self) -> f64 {
        self.sense_j
    }

    pub fn consumed_j(&self) -> f64 {
        self.tx_j + self.rx_j + self.sense_j
    }

    pub fn remaining_j(&self) -> f64 {
        (self.initial_j - self.consumed_j()).max(0.0)
    }

    pub fn is_alive(&self) -> bool {
        self.remaining_j() > 0.0
    }

    fn clamp(&self, cost: f64) -> f64 {
        cost.min(self.remaining_j())
    }

    /// Debits at most the remaining charge; returns what was actually drawn.
    pub fn debit_tx(&mut self, cost: f64) -> f64 {
        let actual = self.clamp(cost);
        self.tx_j += actual;
        actual
    }

    pub fn debit_rx(&mut self, cost: f64) -> f64 {
        let actual = self.clamp(cost);
        self.rx_j += actual;
        actual
    }

    pub fn debit_sense(&mut self, cost: f64) -> f64 {
        let actual = self.clamp(cost);
        self.sense_j += actual;
        actual
    }
}

/// Full protocol state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: NodeId,
    /// Current belief about the network-wide maximum. Absent until the first
    /// reading or received estimate.
    pub global_est: Option<Gaussian1D>,
    /// Most recent local reading; drives the sharp-fall rule.
    pub prev_local: Option<Gaussian1D>,
    /// Last estimate received from or attributed to each live neighbor.
    pub neighbor_table: BTreeMap<NodeId, Gaussian1D>,
    pub one_hop: BTreeSet<NodeId>,
    /// For each neighbor, that neighbor's own one-hop set.
    pub two_hop: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub blacklist: BTreeSet<NodeId>,
    /// Open challenges keyed by suspect.
    pub pending: BTreeMap<NodeId, Challenge>,
    pub energy: EnergyMeter,
    /// Messages dropped because the sender is not a known neighbor.
    pub unknown_drops: u64,
}

impl NodeState {
    pub fn new(
        id: NodeId,
        one_hop: BTreeSet<NodeId>,
        two_hop: BTreeMap<NodeId, BTreeSet<NodeId>>,
        initial_energy_j: f64,
    ) -> Self {
        Self {
            id,
            global_est: None,
            prev_local: None,
            neighbor_table: BTreeMap::new(),
            one_hop,
            two_hop,
            blacklist: BTreeSet::new(),
            pending: BTreeMap::new(),
            energy: EnergyMeter::new(initial_energy_j),
            unknown_drops: 0,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.energy.is_alive()
    }

    fn live_neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.one_hop.iter().copied().filter(move |n| !self.blacklist.contains(n))
    }

    /// True if the new estimate would change some neighbor's view of this
    /// node by more than the threshold. Neighbors with no table entry know
    /// nothing yet and always count as exceeding.
    pub fn decide_broadcast(&self, new_est: &Gaussian1D, cfg: &ProtocolConfig) -> bool {
        self.live_neighbors().any(|n| match self.neighbor_table.get(&n) {
            None => true,
            Some(last) => {
                let diff = (new_est.mean() - last.mean()).abs();
                match cfg.broadcast_mode {
                    ThresholdMode::Absolute => diff > cfg.broadcast_threshold,
                    ThresholdMode::Relative => diff > cfg.broadcast_threshold * last.mean().abs(),
                }
            }
        })
    }

    /// Records that every intended recipient now knows `est` and builds the
    /// broadcast message.
    fn broadcast_estimate(&mut self, est: Gaussian1D, now: f64) -> Message {
        let recipients: Vec<NodeId> = self.live_neighbors().collect();
        for n in recipients {
            self.neighbor_table.insert(n, est);
        }
        Message {
            sender: self.id,
            sent_at: now,
            kind: MessageKind::EstimateBroadcast { origin: self.id, est },
        }
    }

    /// Folds a new reading into the global estimate and decides whether to
    /// broadcast. The very first reading becomes the estimate and is always
    /// announced.
    pub fn on_sense(&mut self, reading: Gaussian1D, now: f64, cfg: &ProtocolConfig) -> Vec<Message> {
        if !self.is_alive() {
            return Vec::new();
        }
        let Some(global) = self.global_est else {
            self.global_est = Some(reading);
            self.prev_local = Some(reading);
            return vec![self.broadcast_estimate(reading, now)];
        };
        let fused = fuse_local(&reading, &global, self.prev_local.as_ref(), &cfg.fusion_config())
            .expect("high component keeps the mixture mass positive");
        self.global_est = Some(fused);
        self.prev_local = Some(reading);
        if self.decide_broadcast(&fused, cfg) {
            vec![self.broadcast_estimate(fused, now)]
        } else {
            Vec::new()
        }
    }

    /// Writes `est` into the table rows of every neighbor that also heard
    /// this broadcast (the sender appears in their one-hop set). This is the
    /// suppression mechanism: the node will not rebroadcast what the
    /// neighborhood provably already has.
    fn attribute_two_hop(&mut self, from: NodeId, est: Gaussian1D) {
        let heard: Vec<NodeId> = self
            .live_neighbors()
            .filter(|n| {
                *n != from
                    && self.two_hop.get(n).is_some_and(|their_one_hop| their_one_hop.contains(&from))
            })
            .collect();
        for n in heard {
            self.neighbor_table.insert(n, est);
        }
    }

    /// Handles an estimate broadcast heard from `from`.
    pub fn on_receive_estimate(
        &mut self,
        from: NodeId,
        est: Gaussian1D,
        now: f64,
        cfg: &ProtocolConfig,
    ) -> Vec<Message> {
        if !self.is_alive() || self.blacklist.contains(&from) {
            return Vec::new();
        }
        if !self.one_hop.contains(&from) {
            self.unknown_drops += 1;
            return Vec::new();
        }
        let Some(global) = self.global_est else {
            // Nothing to compare against yet: adopt.
            self.global_est = Some(est);
            self.neighbor_table.insert(from, est);
            self.attribute_two_hop(from, est);
            return if self.decide_broadcast(&est, cfg) {
                vec![self.broadcast_estimate(est, now)]
            } else {
                Vec::new()
            };
        };

        let deviant = cfg.security_enabled
            && (est.mean() - global.mean()).abs() > cfg.deviation_sigma * cfg.sensing_std;
        if deviant {
            if self.pending.contains_key(&from) {
                // Already under challenge; the quarantined estimate stands.
                return Vec::new();
            }
            self.pending.insert(
                from,
                Challenge {
                    suspect: from,
                    quarantined_est: est,
                    responses: BTreeMap::new(),
                    deadline: now + cfg.challenge_window_s,
                },
            );
            return vec![Message {
                sender: self.id,
                sent_at: now,
                kind: MessageKind::ChallengeRequest { challenger: self.id, suspect: from },
            }];
        }

        let fused = Gaussian1D::from_estimate(
            &ci_fuse_optimal(&global.to_estimate(), &est.to_estimate())
                .expect("valid scalar estimates fuse"),
        )
        .expect("scalar fusion result");
        self.global_est = Some(fused);
        self.neighbor_table.insert(from, est);
        self.attribute_two_hop(from, est);
        if self.decide_broadcast(&fused, cfg) {
            vec![self.broadcast_estimate(fused, now)]
        } else {
            Vec::new()
        }
    }

    /// Answers a neighbor's challenge with this node's current estimate.
    /// The suspect itself never votes.
    pub fn on_challenge_request(
        &mut self,
        challenger: NodeId,
        suspect: NodeId,
        now: f64,
        cfg: &ProtocolConfig,
    ) -> Vec<Message> {
        if !self.is_alive() || !cfg.security_enabled || self.blacklist.contains(&challenger) {
            return Vec::new();
        }
        if !self.one_hop.contains(&challenger) {
            self.unknown_drops += 1;
            return Vec::new();
        }
        if suspect == self.id {
            return Vec::new();
        }
        let Some(global) = self.global_est else {
            return Vec::new();
        };
        vec![Message {
            sender: self.id,
            sent_at: now,
            kind: MessageKind::ChallengeResponse { responder: self.id, suspect, est: global },
        }]
    }

    /// Collects a response for an open challenge. Responses from the suspect
    /// or from blacklisted nodes are discarded.
    pub fn on_challenge_response(
        &mut self,
        responder: NodeId,
        suspect: NodeId,
        est: Gaussian1D,
        cfg: &ProtocolConfig,
    ) {
        if !self.is_alive() || !cfg.security_enabled || self.blacklist.contains(&responder) {
            return;
        }
        if !self.one_hop.contains(&responder) {
            self.unknown_drops += 1;
            return;
        }
        if responder == suspect {
            return;
        }
        if let Some(challenge) = self.pending.get_mut(&suspect) {
            challenge.responses.insert(responder, est);
        }
    }

    /// Votes on a suspect once its challenge window closes.
    ///
    /// A response votes "deviant" if the quarantined estimate differs from
    /// it by more than `deviation_sigma * sensing_std`. A strict majority
    /// finding the suspect too HIGH convicts: inflated estimates are the
    /// values that, once fused anywhere, propagate without bound through
    /// max aggregation. A strict majority of agreeing votes acquits and
    /// fuses the held-out estimate. Everything else, including a majority
    /// finding the suspect too low, is inconclusive: the quarantined
    /// estimate is discarded, which already neutralizes low outliers, and a
    /// single cold raw reading is indistinguishable from a low liar, so
    /// convicting on the low side mostly isolates honest nodes.
    pub fn resolve_challenge(
        &mut self,
        suspect: NodeId,
        now: f64,
        cfg: &ProtocolConfig,
    ) -> (Vec<Message>, Option<Verdict>) {
        if !self.is_alive() {
            return (Vec::new(), None);
        }
        let Some(challenge) = self.pending.remove(&suspect) else {
            // Resolved elsewhere (for example by a neighbor's isolation
            // announcement) before the deadline fired.
            return (Vec::new(), None);
        };
        let responses: Vec<&Gaussian1D> = challenge
            .responses
            .iter()
            .filter(|(responder, _)| !self.blacklist.contains(responder))
            .map(|(_, est)| est)
            .collect();
        if responses.len() < cfg.min_responders {
            return (Vec::new(), Some(Verdict::Inconclusive));
        }
        let scale = cfg.deviation_sigma * cfg.sensing_std;
        let quarantined_mean = challenge.quarantined_est.mean();
        let too_high =
            responses.iter().filter(|resp| quarantined_mean - resp.mean() > scale).count();
        let agreeing = responses
            .iter()
            .filter(|resp| (resp.mean() - quarantined_mean).abs() <= scale)
            .count();
        if 2 * too_high > responses.len() {
            self.blacklist.insert(suspect);
            self.neighbor_table.remove(&suspect);
            let announcement = Message {
                sender: self.id,
                sent_at: now,
                kind: MessageKind::IsolationAnnouncement { announcer: self.id, suspect },
            };
            (vec![announcement], Some(Verdict::Malicious))
        } else if 2 * agreeing <= responses.len() {
            (Vec::new(), Some(Verdict::Inconclusive))
        } else {
            if let Some(global) = self.global_est {
                let fused = Gaussian1D::from_estimate(
                    &ci_fuse_optimal(
                        &global.to_estimate(),
                        &challenge.quarantined_est.to_estimate(),
                    )
                    .expect("valid scalar estimates fuse"),
                )
                .expect("scalar fusion result");
                self.global_est = Some(fused);
            } else {
                self.global_est = Some(challenge.quarantined_est);
            }
            self.neighbor_table.insert(suspect, challenge.quarantined_est);
            (Vec::new(), Some(Verdict::Innocent))
        }
    }

    /// Honors a neighborhood isolation announcement. Idempotent; ignored when
    /// the announcer is blacklisted or the suspect is this node.
    pub fn on_isolation(&mut self, announcer: NodeId, suspect: NodeId, cfg: &ProtocolConfig) {
        if !self.is_alive() || !cfg.security_enabled || self.blacklist.contains(&announcer) {
            return;
        }
        if !self.one_hop.contains(&announcer) {
            self.unknown_drops += 1;
            return;
        }
        if suspect == self.id {
            return;
        }
        self.blacklist.insert(suspect);
        self.neighbor_table.remove(&suspect);
        self.pending.remove(&suspect);
    }

    /// Dispatches a delivered message to the matching handler.
    pub fn handle_message(&mut self, msg: &Message, now: f64, cfg: &ProtocolConfig) -> Vec<Message> {
        match &msg.kind {
            MessageKind::EstimateBroadcast { origin, est } => {
                self.on_receive_estimate(*origin, *est, now, cfg)
            }
            MessageKind::ChallengeRequest { challenger, suspect } => {
                self.on_challenge_request(*challenger, *suspect, now, cfg)
            }
            MessageKind::ChallengeResponse { responder, suspect, est } => {
                self.on_challenge_response(*responder, *suspect, *est, cfg);
                Vec::new()
            }
            MessageKind::IsolationAnnouncement { announcer, suspect } => {
                self.on_isolation(*announcer, *suspect, cfg);
                Vec::new()
            }
        }
    }
}

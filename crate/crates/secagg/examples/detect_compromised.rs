//! Challenge, majority vote, and isolation of compromised nodes.
//!
//! Runs a small network where 15% of nodes report the field mean plus ten
//! standard deviations, then walks the security events from the trace:
//! deviation challenges, verdicts, and isolation announcements.
//!
//! Run with: `cargo run --example detect_compromised`

use secagg::config::AttackMode;
use secagg::sim::{run_traced, TraceEntry};
use secagg::ScenarioConfig;

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_nodes = 40;
    cfg.sim_time_s = 20.0;
    cfg.attack.compromised_fraction = 0.15;
    cfg.attack.mode = AttackMode::ConstantOffset;
    cfg.attack.offset_sigmas = 10.0;

    let (metrics, trace) = run_traced(&cfg).unwrap();

    let compromised: Vec<String> = metrics
        .per_node
        .iter()
        .filter(|n| n.compromised)
        .map(|n| n.id.to_string())
        .collect();
    println!(
        "{} nodes, {} compromised (reporting {:.0}): [{}]\n",
        cfg.n_nodes,
        metrics.compromised_count,
        cfg.field_mean + cfg.attack.offset_sigmas * cfg.field_std,
        compromised.join(", ")
    );

    println!("security events:");
    let mut shown = 0;
    for record in &trace.records {
        let line = match &record.entry {
            TraceEntry::Send { node, kind: "challenge-request", about: Some(suspect), .. } => {
                Some(format!("node {node} challenges node {suspect}"))
            }
            TraceEntry::Verdict { node, suspect, verdict } => {
                Some(format!("node {node} votes node {suspect}: {verdict}"))
            }
            TraceEntry::Send { node, kind: "isolation", about: Some(suspect), .. } => {
                Some(format!("node {node} announces isolation of node {suspect}"))
            }
            _ => None,
        };
        if let Some(line) = line {
            println!("  t={:7.3}s  {line}", record.time);
            shown += 1;
            if shown >= 25 {
                println!("  ... ({} challenges issued in total)", metrics.challenges_issued);
                break;
            }
        }
    }

    println!("\nverdicts: {} malicious, {} innocent, {} inconclusive",
        metrics.verdicts_malicious, metrics.verdicts_innocent, metrics.verdicts_inconclusive);
    println!(
        "detection rate {:.2}, false positives {}, false negatives {}",
        metrics.detection.detection_rate,
        metrics.detection.false_positives,
        metrics.detection.false_negatives
    );
    for report in metrics.per_node.iter().filter(|n| n.compromised) {
        println!(
            "  attacker {} blacklisted by {} honest node(s)",
            report.id, report.flagged_by
        );
    }
}

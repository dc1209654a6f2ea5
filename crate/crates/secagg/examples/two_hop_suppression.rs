//! Broadcast suppression from two-hop neighborhood knowledge.
//!
//! In a triangle, when A broadcasts a new estimate, B knows that C (also a
//! neighbor of A) heard the same broadcast, so B does not forward it. In a
//! chain, B is C's only link to A and must forward.
//!
//! Run with: `cargo run --example two_hop_suppression`

use std::collections::{BTreeMap, BTreeSet};

use secagg::{Gaussian1D, NodeId, NodeState, ProtocolConfig};

fn ids(v: &[u32]) -> BTreeSet<NodeId> {
    v.iter().copied().map(NodeId).collect()
}

fn main() {
    let cfg = ProtocolConfig::default();
    let g = |m, s| Gaussian1D::new(m, s).unwrap();
    let shared = g(25.0, 1.0);

    // Triangle: A(0), B(1), C(2) all mutually adjacent.
    let clique = |own: u32| {
        let others: Vec<u32> = [0u32, 1, 2].into_iter().filter(|m| *m != own).collect();
        let two_hop: BTreeMap<_, _> = others
            .iter()
            .map(|o| {
                let theirs: Vec<u32> = [0u32, 1, 2].into_iter().filter(|m| m != o).collect();
                (NodeId(*o), ids(&theirs))
            })
            .collect();
        NodeState::new(NodeId(own), ids(&others), two_hop, 5.0)
    };
    let mut a = clique(0);
    let mut b = clique(1);
    let mut c = clique(2);
    for node in [&mut a, &mut b, &mut c] {
        node.on_sense(shared, 0.0, &cfg);
    }

    let broadcasts = a.on_sense(g(26.5, 0.25), 0.5, &cfg);
    println!("A senses a precise record and emits {} broadcast(s)", broadcasts.len());
    for (name, node) in [("B", &mut b), ("C", &mut c)] {
        let replies = node.handle_message(&broadcasts[0], 0.502, &cfg);
        println!(
            "triangle {name}: adopts ({:.3}, s {:.3}), rebroadcasts: {}",
            node.global_est.unwrap().mean(),
            node.global_est.unwrap().std(),
            replies.len()
        );
    }

    // Chain: A(0) - B(1) - C(2); B's table shows C never heard A.
    let mut chain_b = NodeState::new(
        NodeId(1),
        ids(&[0, 2]),
        BTreeMap::from([(NodeId(0), ids(&[1])), (NodeId(2), ids(&[1]))]),
        5.0,
    );
    chain_b.on_sense(shared, 0.0, &cfg);
    let replies = chain_b.handle_message(&broadcasts[0], 0.502, &cfg);
    println!("chain B: rebroadcasts: {} (C has not heard A)", replies.len());
}

//! Disc-radio topologies over uniform random placements.
//!
//! Samples the reference deployment (160 nodes, 120 m x 120 m, 15 m range)
//! across seeds and reports degree and connectivity statistics against the
//! analytic expectation n * pi * r^2 / area.
//!
//! Run with: `cargo run --example topology_stats`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use secagg::protocol::NodeId;
use secagg::{ScenarioConfig, Topology};

fn main() {
    let cfg = ScenarioConfig::default();
    let expected = cfg.n_nodes as f64 * std::f64::consts::PI * cfg.tx_range_m.powi(2)
        / (cfg.area_width_m * cfg.area_height_m);
    println!(
        "expected mean degree = n pi r^2 / area = {expected:.2} (border effects pull it lower)\n"
    );

    println!("seed | mean degree | components | largest");
    let mut degrees = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = Topology::generate(&cfg, &mut rng);
        let sizes = topo.component_sizes();
        println!(
            "{seed:>4} | {:>11.2} | {:>10} | {:>6.1}%",
            topo.mean_degree(),
            sizes.len(),
            100.0 * topo.largest_component_fraction()
        );
        degrees.push(topo.mean_degree());
    }
    let mean = degrees.iter().sum::<f64>() / degrees.len() as f64;
    println!("\nsample mean degree over 10 seeds: {mean:.2}");

    // Pinned corner placement: a 10 m square is a clique at 15 m range.
    let square = Topology::from_positions(
        vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)],
        15.0,
    );
    println!(
        "\npinned 10 m square, 15 m range: every node has degree {} (diagonal ~14.14 m)",
        square.neighbors(NodeId(0)).len()
    );
}

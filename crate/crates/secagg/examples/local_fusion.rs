//! Folding a local reading into the global maximum estimate.
//!
//! The reading and the estimate are combined as a step-weighted mixture of
//! bounded Gaussians and moment-matched back to a Gaussian. The branch taken
//! depends on which mean is higher and on whether the node was recently the
//! maximum holder (the sharp-fall rule).
//!
//! Run with: `cargo run --example local_fusion`

use secagg::fusion::{fuse_local_detailed, FusionCase};
use secagg::{case1_threshold, case2_threshold, truncated_moments, FusionConfig, Gaussian1D};

fn show(label: &str, local: Gaussian1D, global: Gaussian1D, prev: Option<Gaussian1D>) {
    let cfg = FusionConfig::default();
    let (fused, case) = fuse_local_detailed(&local, &global, prev.as_ref(), &cfg).unwrap();
    let branch = match case {
        FusionCase::LocalHigh => "local high",
        FusionCase::GlobalHigh => "global high",
        FusionCase::SharpFall => "sharp fall",
    };
    println!(
        "{label}:\n  local ({:.2}, s {:.2}) + global ({:.2}, s {:.2}) [{branch}] -> ({:.4}, s {:.4})",
        local.mean(),
        local.std(),
        global.mean(),
        global.std(),
        fused.mean(),
        fused.std()
    );
}

fn main() {
    let g = |m, s| Gaussian1D::new(m, s).unwrap();

    // The step weight zeroes the lower distribution below a support-derived
    // threshold.
    let local = g(26.0, 1.0);
    let global = g(24.0, 1.0);
    println!(
        "step thresholds: local-high cut at {}, global-high cut at {}",
        case1_threshold(&local).threshold(),
        case2_threshold(&g(24.0, 1.0), &g(26.0, 1.0)).threshold()
    );

    // Truncated moments drive the moment matching.
    let tail = truncated_moments(&g(25.0, 1.0), 26.0);
    println!(
        "N(25,1) above 26: mass {:.4}, conditional mean {:.4}\n",
        tail.mass, tail.mean
    );

    // A higher reading lifts the estimate toward the observation.
    show("record reading", local, global, None);

    // A clearly lower reading barely moves an established maximum.
    show("routine low reading", g(25.0, 0.25), g(29.0, 0.5), None);

    // A reading just below the estimate drags it: the node cannot yet rule
    // out that the maximum is near its own value.
    show("ambiguous reading", g(24.0, 1.0), g(26.0, 1.0), None);

    // Sharp fall: the previous reading sat on the global mean, so this node
    // plausibly WAS the maximum; a falling reading is believed.
    show(
        "sharp fall at the maximum holder",
        g(24.0, 1.0),
        g(29.0, 1.0),
        Some(g(29.0, 1.0)),
    );

    // Min aggregation is max aggregation on negated values.
    let low_reading = g(18.0, 0.5).negated();
    let min_est = g(19.5, 0.5).negated();
    let (fused, _) =
        fuse_local_detailed(&low_reading, &min_est, None, &FusionConfig::default()).unwrap();
    println!(
        "min aggregation via negation: min estimate becomes {:.4}",
        fused.negated().mean()
    );
}

//! Covariance-intersection fusion of estimates.
//!
//! Shows the scalar endpoint behavior (the tighter estimate wins outright)
//! and the matrix case, where the optimal weight balances the two
//! information matrices.
//!
//! Run with: `cargo run --example ci_fusion`

use nalgebra::{DMatrix, DVector};
use secagg::{ci_fuse, ci_fuse_optimal, ci_optimal_omega, Estimate, Omega};

fn main() {
    // Two scalar estimates of the same maximum: 5.0 with variance 2 against
    // 7.0 with variance 1.
    let a = Estimate::scalar(5.0, 2.0).unwrap();
    let b = Estimate::scalar(7.0, 1.0).unwrap();

    println!("scalar inputs: A = (5.0, var 2.0), B = (7.0, var 1.0)");
    for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let fused = ci_fuse(&a, &b, Omega::new(w).unwrap()).unwrap();
        println!(
            "  w = {w:.2} -> C = ({:.4}, var {:.4})",
            fused.scalar_mean(),
            fused.scalar_variance()
        );
    }

    let omega = ci_optimal_omega(&a, &b).unwrap();
    let best = ci_fuse_optimal(&a, &b).unwrap();
    println!(
        "optimal w = {} -> C = ({}, var {}): the smaller variance wins outright",
        omega.value(),
        best.scalar_mean(),
        best.scalar_variance()
    );

    // An exact variance tie cannot be decided by the objective; the larger
    // mean wins, consistent with max aggregation.
    let lo = Estimate::scalar(5.0, 1.0).unwrap();
    let hi = Estimate::scalar(9.0, 1.0).unwrap();
    let tie = ci_fuse_optimal(&lo, &hi).unwrap();
    println!(
        "variance tie (5.0, 1.0) vs (9.0, 1.0) -> keeps mean {}",
        tie.scalar_mean()
    );

    // Two-dimensional estimates with complementary confidence: each input is
    // precise on a different axis, so the optimum sits between the
    // endpoints.
    let a2 = Estimate::new(
        DVector::from_vec(vec![1.0, 0.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
    )
    .unwrap();
    let b2 = Estimate::new(
        DVector::from_vec(vec![0.0, 1.0]),
        DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
    )
    .unwrap();
    let omega2 = ci_optimal_omega(&a2, &b2).unwrap();
    let fused2 = ci_fuse(&a2, &b2, omega2).unwrap();
    println!("\n2x2 inputs with diag(1,4) and diag(4,1) covariances:");
    println!("  optimal w = {:.6}", omega2.value());
    println!(
        "  fused mean = ({:.4}, {:.4}), trace(P_CC) = {:.4}",
        fused2.mean()[0],
        fused2.mean()[1],
        fused2.cov().trace()
    );
}

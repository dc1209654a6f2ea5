//! Fusing a local observation with the current global estimate for max
//! aggregation.
//!
//! Readings and estimates are Gaussians whose effective support is
//! `[mean - 3*std, mean + 3*std]`. The two densities are combined into an
//! unnormalized mixture `f(x) = HIGH(x) + w(x) * LOW(x)`, where HIGH is the
//! distribution with the larger mean (unit weight) and `w` is a step weight
//! that zeroes the lower distribution below a support-derived threshold:
//!
//! * local mean above the global mean: `w` steps at the local support floor
//!   ([`case1_threshold`]);
//! * local mean below the global mean: `w` steps at the larger of the two
//!   support floors ([`case2_threshold`]);
//! * sharp fall: if the previous local reading was within a threshold of the
//!   global mean, the node was plausibly the maximum holder, so a falling
//!   reading is trusted and the local distribution takes the HIGH role.
//!
//! The mixture is then normalized and moment-matched back to a Gaussian so
//! estimates stay closed under fusion.

use statrs::function::erf::erfc;
use thiserror::Error;

use crate::estimate::Estimate;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FusionError {
    #[error("standard deviation must be positive and finite, got {0}")]
    InvalidStd(f64),
    #[error("mean must be finite, got {0}")]
    InvalidMean(f64),
    #[error("total mixture mass {0:e} is below 1e-12")]
    VanishingMass(f64),
    #[error("expected a one-dimensional estimate, got dimension {0}")]
    NotScalar(usize),
}

/// A one-dimensional Gaussian with effective support `mean ± 3*std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    mean: f64,
    std: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, std: f64) -> Result<Self, FusionError> {
        if !mean.is_finite() {
            return Err(FusionError::InvalidMean(mean));
        }
        if !(std.is_finite() && std > 0.0) {
            return Err(FusionError::InvalidStd(std));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }

    /// Lower support bound, `mean - 3*std`.
    pub fn support_lo(&self) -> f64 {
        self.mean - 3.0 * self.std
    }

    /// Upper support bound, `mean + 3*std`.
    pub fn support_hi(&self) -> f64 {
        self.mean + 3.0 * self.std
    }

    pub fn to_estimate(&self) -> Estimate {
        Estimate::scalar(self.mean, self.variance()).expect("positive variance")
    }

    pub fn from_estimate(est: &Estimate) -> Result<Self, FusionError> {
        if est.dim() != 1 {
            return Err(FusionError::NotScalar(est.dim()));
        }
        Self::new(est.scalar_mean(), est.scalar_variance().sqrt())
    }

    /// Mirror image around zero. Min aggregation is max aggregation on
    /// negated inputs; negate results back with the same helper.
    pub fn negated(&self) -> Self {
        Self { mean: -self.mean, std: self.std }
    }
}

/// Indicator-style weight: `w(x) = 0` for `x <= threshold`, `1` above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepWeight {
    threshold: f64,
}

impl StepWeight {
    pub fn new(threshold: f64) -> Self {
        Self { threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x > self.threshold {
            1.0
        } else {
            0.0
        }
    }
}

/// Step threshold when the local mean is the larger one: the local support
/// floor.
pub fn case1_threshold(local: &Gaussian1D) -> StepWeight {
    StepWeight::new(local.support_lo())
}

/// Step threshold when the global mean is the larger one: the larger of the
/// two support floors.
pub fn case2_threshold(local: &Gaussian1D, global: &Gaussian1D) -> StepWeight {
    StepWeight::new(local.support_lo().max(global.support_lo()))
}

/// Mass and conditional moments of a Gaussian restricted to an interval.
///
/// `mean` and `second_moment` are conditional on the restriction; when the
/// restricted mass underflows to zero they are placeholders and must not be
/// used unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mass: f64,
    pub mean: f64,
    pub second_moment: f64,
}

fn std_pdf(z: f64) -> f64 {
    if z.is_finite() {
        (-0.5 * z * z).exp() / SQRT_2PI
    } else {
        0.0
    }
}

/// Upper-tail mass of the standard normal, `1 - Phi(z)`, accurate in the far
/// tail.
fn std_upper_tail(z: f64) -> f64 {
    if z.is_finite() {
        0.5 * erfc(z / SQRT_2)
    } else if z > 0.0 {
        0.0
    } else {
        1.0
    }
}

/// Moments of `g` restricted to `(t, +inf)` with exact Gaussian tails.
pub fn truncated_moments(g: &Gaussian1D, t: f64) -> TruncatedMoments {
    truncated_moments_between(g, t, f64::INFINITY)
}

/// Moments of `g` restricted to `(lo, hi)`.
pub fn truncated_moments_between(g: &Gaussian1D, lo: f64, hi: f64) -> TruncatedMoments {
    let alpha = (lo - g.mean) / g.std;
    let beta = (hi - g.mean) / g.std;
    let mass = std_upper_tail(alpha) - std_upper_tail(beta);
    if !(mass > 1e-300) || beta <= alpha {
        return TruncatedMoments { mass: 0.0, mean: lo, second_moment: lo * lo };
    }
    let pdf_lo = std_pdf(alpha);
    let pdf_hi = std_pdf(beta);
    // z*pdf(z) -> 0 at infinite bounds.
    let zpdf_lo = if alpha.is_finite() { alpha * pdf_lo } else { 0.0 };
    let zpdf_hi = if beta.is_finite() { beta * pdf_hi } else { 0.0 };
    let lambda = (pdf_lo - pdf_hi) / mass;
    let mean = g.mean + g.std * lambda;
    let variance = g.variance() * (1.0 + (zpdf_lo - zpdf_hi) / mass - lambda * lambda);
    let variance = variance.max(0.0);
    TruncatedMoments { mass: mass.min(1.0), mean, second_moment: variance + mean * mean }
}

/// Options for [`fuse_local`].
///
/// `sharp_fall_sigmas` scales the global estimate's standard deviation into
/// the sharp-fall threshold. `hard_truncate` restricts each mixture component
/// to its `mean ± 3*std` support instead of using exact Gaussian tails (the
/// difference is below 0.3% of the mass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub sharp_fall_sigmas: f64,
    pub hard_truncate: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { sharp_fall_sigmas: 3.0, hard_truncate: false }
    }
}

/// Which branch [`fuse_local`] took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionCase {
    /// Local mean at or above the global mean; local is HIGH.
    LocalHigh,
    /// Local mean below the global mean; global is HIGH.
    GlobalHigh,
    /// Local mean below the global mean, but the previous local reading was
    /// close enough to the global mean that the falling reading is trusted;
    /// local is HIGH.
    SharpFall,
}

/// Fuses a local observation with the global estimate and moment-matches the
/// resulting mixture back to a Gaussian.
pub fn fuse_local(
    local: &Gaussian1D,
    global: &Gaussian1D,
    prev_local: Option<&Gaussian1D>,
    cfg: &FusionConfig,
) -> Result<Gaussian1D, FusionError> {
    fuse_local_detailed(local, global, prev_local, cfg).map(|(g, _)| g)
}

/// [`fuse_local`] that also reports which branch was taken.
pub fn fuse_local_detailed(
    local: &Gaussian1D,
    global: &Gaussian1D,
    prev_local: Option<&Gaussian1D>,
    cfg: &FusionConfig,
) -> Result<(Gaussian1D, FusionCase), FusionError> {
    let case = if local.mean >= global.mean {
        FusionCase::LocalHigh
    } else {
        let sharp_fall = prev_local.is_some_and(|prev| {
            (prev.mean - global.mean).abs() <= cfg.sharp_fall_sigmas * global.std
        });
        if sharp_fall {
            FusionCase::SharpFall
        } else {
            FusionCase::GlobalHigh
        }
    };
    let (high, low, step) = match case {
        FusionCase::LocalHigh | FusionCase::SharpFall => (local, global, case1_threshold(local)),
        FusionCase::GlobalHigh => (global, local, case2_threshold(local, global)),
    };
    let fused = moment_match(high, low, step.threshold(), cfg.hard_truncate)?;
    Ok((fused, case))
}

/// Normalizes `HIGH + step * LOW` and returns the Gaussian with its mean and
/// variance.
fn moment_match(
    high: &Gaussian1D,
    low: &Gaussian1D,
    threshold: f64,
    hard_truncate: bool,
) -> Result<Gaussian1D, FusionError> {
    // Work in coordinates centered on the HIGH mean; large absolute means
    // otherwise lose the variance to cancellation in E[X^2] - E[X]^2.
    let center = high.mean;
    let shifted = |g: &Gaussian1D| Gaussian1D { mean: g.mean - center, std: g.std };
    let high_c = shifted(high);
    let low_c = shifted(low);
    let t_c = threshold - center;

    let (high_m, low_m) = if hard_truncate {
        (
            truncated_moments_between(&high_c, high_c.support_lo(), high_c.support_hi()),
            truncated_moments_between(&low_c, t_c.max(low_c.support_lo()), low_c.support_hi()),
        )
    } else {
        (
            TruncatedMoments {
                mass: 1.0,
                mean: high_c.mean,
                second_moment: high_c.variance() + high_c.mean * high_c.mean,
            },
            truncated_moments_between(&low_c, t_c, f64::INFINITY),
        )
    };

    let mass = high_m.mass + low_m.mass;
    if mass < 1e-12 {
        return Err(FusionError::VanishingMass(mass));
    }
    let mean = (high_m.mass * high_m.mean + low_m.mass * low_m.mean) / mass;
    let second = (high_m.mass * high_m.second_moment + low_m.mass * low_m.second_moment) / mass;
    let variance = second - mean * mean;
    Gaussian1D::new(center + mean, variance.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(mean: f64, std: f64) -> Gaussian1D {
        Gaussian1D::new(mean, std).unwrap()
    }

    #[test]
    fn support_bounds_are_three_sigma() {
        let x = g(26.0, 1.0);
        assert_eq!(x.support_lo(), 23.0);
        assert_eq!(x.support_hi(), 29.0);
        assert!(x.support_lo() < x.mean() && x.mean() < x.support_hi());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert_eq!(Gaussian1D::new(0.0, 0.0), Err(FusionError::InvalidStd(0.0)));
        assert_eq!(Gaussian1D::new(0.0, -1.0), Err(FusionError::InvalidStd(-1.0)));
        assert!(Gaussian1D::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn case1_threshold_is_local_support_floor() {
        assert_eq!(case1_threshold(&g(26.0, 1.0)).threshold(), 23.0);
        assert_eq!(case1_threshold(&g(25.0, 0.5)).threshold(), 23.5);
        assert_eq!(case1_threshold(&g(0.0, 1.0)).threshold(), -3.0);
    }

    #[test]
    fn case2_threshold_is_larger_support_floor() {
        assert_eq!(case2_threshold(&g(24.0, 1.0), &g(26.0, 1.0)).threshold(), 23.0);
        assert_eq!(case2_threshold(&g(24.0, 1.0), &g(24.5, 3.0)).threshold(), 21.0);
        assert_eq!(case2_threshold(&g(25.0, 1.0), &g(25.0, 1.0)).threshold(), 22.0);
    }

    #[test]
    fn step_weight_is_an_indicator() {
        let w = StepWeight::new(23.0);
        assert_eq!(w.eval(23.0), 0.0);
        assert_eq!(w.eval(22.9), 0.0);
        assert_eq!(w.eval(23.1), 1.0);
    }

    #[test]
    fn untruncated_moments_match_the_gaussian() {
        let m = truncated_moments(&g(25.0, 1.0), -1e6);
        assert!((m.mass - 1.0).abs() < 1e-12);
        assert!((m.mean - 25.0).abs() < 1e-10);
        assert!((m.second_moment - 626.0).abs() < 1e-8);
    }

    #[test]
    fn half_normal_moments() {
        // E[X | X > 0] = sqrt(2/pi), Var = 1 - 2/pi for a standard normal;
        // verified against quadrature below.
        let m = truncated_moments(&g(0.0, 1.0), 0.0);
        assert!((m.mass - 0.5).abs() < 1e-15);
        assert!((m.mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let var = m.second_moment - m.mean * m.mean;
        assert!((var - (1.0 - 2.0 / std::f64::consts::PI)).abs() < 1e-12);

        let (q_mass, q_mean, q_second) = quadrature_tail_moments(0.0, 1.0, 0.0);
        assert!((m.mass - q_mass).abs() < 1e-9);
        assert!((m.mean - q_mean).abs() < 1e-9);
        assert!((m.second_moment - q_second).abs() < 1e-9);
    }

    #[test]
    fn far_tail_mass_vanishes() {
        let m = truncated_moments(&g(25.0, 1.0), 40.0);
        assert!(m.mass < 1e-10);
    }

    #[test]
    fn underflowed_tail_is_zero_mass() {
        let m = truncated_moments(&g(0.0, 1.0), 60.0);
        assert_eq!(m.mass, 0.0);
    }

    #[test]
    fn mass_never_exceeds_one_and_variance_nonnegative() {
        for t in [-10.0, -3.0, 0.0, 1.5, 3.0, 5.0] {
            let m = truncated_moments(&g(0.0, 1.0), t);
            assert!(m.mass <= 1.0 && m.mass >= 0.0);
            if m.mass > 0.0 {
                assert!(m.second_moment >= m.mean * m.mean - 1e-12);
            }
        }
    }

    #[test]
    fn equal_inputs_fuse_to_frozen_oracle_values() {
        // Mixture of (26,1) with itself step-cut at 23; frozen from an
        // independent high-precision quadrature.
        let fused = fuse_local(&g(26.0, 1.0), &g(26.0, 1.0), None, &FusionConfig::default()).unwrap();
        assert!((fused.mean() - 26.002_217_420_851_99).abs() < 1e-11);
        assert!((fused.variance() - 0.993_342_820_488_793).abs() < 1e-11);
    }

    #[test]
    fn disjoint_supports_keep_the_local_observation() {
        let fused = fuse_local(&g(30.0, 1.0), &g(20.0, 1.0), None, &FusionConfig::default()).unwrap();
        assert!((fused.mean() - 30.0).abs() < 1e-9);
        assert!((fused.variance() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lower_local_reading_pulls_estimate_between_means() {
        // Frozen from an independent high-precision quadrature of the
        // (24,1)/(26,1) mixture cut at 23.
        let (fused, case) =
            fuse_local_detailed(&g(24.0, 1.0), &g(26.0, 1.0), None, &FusionConfig::default())
                .unwrap();
        assert_eq!(case, FusionCase::GlobalHigh);
        assert!(fused.mean() > 24.0);
        assert!((fused.mean() - 25.217_572_499_286_72).abs() < 1e-11);
        assert!((fused.variance() - 1.558_432_840_616_01).abs() < 1e-10);
    }

    #[test]
    fn sharp_fall_trusts_the_falling_reading() {
        // Previous reading sat on the global mean, so the node was the
        // maximum holder; the new low reading takes the HIGH role.
        let cfg = FusionConfig::default();
        let prev = g(29.0, 1.0);
        let (fused, case) =
            fuse_local_detailed(&g(24.0, 1.0), &g(29.0, 1.0), Some(&prev), &cfg).unwrap();
        assert_eq!(case, FusionCase::SharpFall);
        // Frozen oracle values for HIGH=(24,1), LOW=(29,1), cut at 21.
        assert!((fused.mean() - 26.5).abs() < 1e-9);
        assert!((fused.variance() - 7.25).abs() < 1e-8);

        // A distant previous reading leaves the ordinary branch in place.
        let far_prev = g(24.5, 1.0);
        let (_, case) =
            fuse_local_detailed(&g(24.0, 1.0), &g(29.0, 1.0), Some(&far_prev), &cfg).unwrap();
        assert_eq!(case, FusionCase::GlobalHigh);
    }

    #[test]
    fn equal_means_take_the_local_high_branch() {
        let (_, case) =
            fuse_local_detailed(&g(25.0, 1.0), &g(25.0, 2.0), None, &FusionConfig::default())
                .unwrap();
        assert_eq!(case, FusionCase::LocalHigh);
    }

    #[test]
    fn fusion_is_deterministic() {
        let cfg = FusionConfig::default();
        let a = fuse_local(&g(24.3, 1.2), &g(26.1, 0.8), Some(&g(25.0, 1.0)), &cfg).unwrap();
        let b = fuse_local(&g(24.3, 1.2), &g(26.1, 0.8), Some(&g(25.0, 1.0)), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_means_keep_precision() {
        // Centered computation: the same shape far from zero fuses to the
        // same variance.
        let near = fuse_local(&g(24.0, 1.0), &g(26.0, 1.0), None, &FusionConfig::default()).unwrap();
        let far = fuse_local(&g(1e6 + 24.0, 1.0), &g(1e6 + 26.0, 1.0), None, &FusionConfig::default())
            .unwrap();
        assert!((far.mean() - 1e6 - near.mean()).abs() < 1e-6);
        assert!((far.variance() - near.variance()).abs() < 1e-6);
    }

    /// Simpson quadrature of the upper tail of a Gaussian, split at the
    /// truncation point; independent of the closed forms above.
    fn quadrature_tail_moments(mu: f64, sigma: f64, t: f64) -> (f64, f64, f64) {
        let pdf = |x: f64| {
            let z = (x - mu) / sigma;
            (-0.5 * z * z).exp() / (SQRT_2PI * sigma)
        };
        let hi = mu + 9.0 * sigma;
        let n = 200_000;
        let h = (hi - t) / n as f64;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..n {
            let a = t + i as f64 * h;
            let xm = a + 0.5 * h;
            let b = a + h;
            let w = |f: &dyn Fn(f64) -> f64| (f(a) + 4.0 * f(xm) + f(b)) * h / 6.0;
            m0 += w(&|x| pdf(x));
            m1 += w(&|x| x * pdf(x));
            m2 += w(&|x| x * x * pdf(x));
        }
        (m0, m1 / m0, m2 / m0)
    }

    proptest! {
        #[test]
        fn fused_mean_is_bounded_by_inputs(
            ml in 15.0f64..35.0, sl in 0.3f64..3.0,
            mg in 15.0f64..35.0, sg in 0.3f64..3.0,
        ) {
            let local = g(ml, sl);
            let global = g(mg, sg);
            let fused = fuse_local(&local, &global, None, &FusionConfig::default()).unwrap();
            prop_assert!(fused.mean() >= ml.min(mg) - 1e-9);
            prop_assert!(fused.mean() <= ml.max(mg) + 3.0 * sl.max(sg) + 1e-9);
            prop_assert!(fused.std() > 0.0);
        }

        #[test]
        fn hard_truncate_stays_close_to_exact_tails(
            ml in 20.0f64..30.0, sl in 0.5f64..2.0,
            mg in 20.0f64..30.0, sg in 0.5f64..2.0,
        ) {
            let local = g(ml, sl);
            let global = g(mg, sg);
            let exact = fuse_local(&local, &global, None, &FusionConfig::default()).unwrap();
            let hard = fuse_local(
                &local,
                &global,
                None,
                &FusionConfig { hard_truncate: true, ..FusionConfig::default() },
            )
            .unwrap();
            // Truncating at 3 sigma removes ~0.27% of each component's mass.
            prop_assert!((exact.mean() - hard.mean()).abs() < 0.05 * (sl + sg));
            prop_assert!((exact.variance() - hard.variance()).abs() < 0.1 * (sl + sg).powi(2));
        }
    }
}

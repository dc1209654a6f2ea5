//! Independent oracles shared by the integration tests: brute-force grid
//! search for the CI weight and piecewise Simpson quadrature for mixture
//! moments. Nothing here calls into the closed forms it checks.

#![allow(dead_code)]

use secagg::Gaussian1D;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Scalar CI fused variance at a fixed weight, by direct arithmetic.
pub fn scalar_ci_variance(pa: f64, pb: f64, w: f64) -> f64 {
    1.0 / (w / pa + (1.0 - w) / pb)
}

/// Grid search for the scalar CI weight minimizing the fused variance.
/// Returns `(best_w, best_variance)`.
pub fn scalar_grid_search(pa: f64, pb: f64, points: usize) -> (f64, f64) {
    let mut best_w = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..=points {
        let w = i as f64 / points as f64;
        let variance = if w == 0.0 {
            pb
        } else if w == 1.0 {
            pa
        } else {
            scalar_ci_variance(pa, pb, w)
        };
        if variance < best {
            best = variance;
            best_w = w;
        }
    }
    (best_w, best)
}

fn gauss_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (SQRT_2PI * std)
}

/// Composite Simpson of the zeroth, first, and second moments of `f` over
/// one smooth segment, sharing density evaluations across the three.
fn simpson_moments(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> (f64, f64, f64) {
    if b <= a {
        return (0.0, 0.0, 0.0);
    }
    let h = (b - a) / panels as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let mid = lo + 0.5 * h;
        let hi = lo + h;
        let (fl, fm, fh) = (f(lo), f(mid), f(hi));
        m0 += (fl + 4.0 * fm + fh) * h / 6.0;
        m1 += (lo * fl + 4.0 * mid * fm + hi * fh) * h / 6.0;
        m2 += (lo * lo * fl + 4.0 * mid * mid * fm + hi * hi * fh) * h / 6.0;
    }
    (m0, m1, m2)
}

/// Moments of the normalized mixture `HIGH + 1[x > t] * LOW` by quadrature.
///
/// The integration range covers both supports plus four of the larger
/// standard deviations on each side, split at every density breakpoint so
/// each Simpson segment is smooth; `panels` is the total panel budget. The
/// integral runs in coordinates centered on the HIGH mean so the variance
/// does not drown in `E[X^2] - E[X]^2` cancellation.
pub fn mixture_quadrature(
    high: &Gaussian1D,
    low: &Gaussian1D,
    t: f64,
    hard_truncate: bool,
    panels: usize,
) -> (f64, f64) {
    let center = high.mean();
    let pad = 4.0 * high.std().max(low.std());
    let lo = (high.support_lo().min(low.support_lo())) - pad - center;
    let hi = (high.support_hi().max(low.support_hi())) + pad - center;
    let t_c = t - center;

    let mut breaks = vec![lo, hi, t_c];
    if hard_truncate {
        breaks.extend([
            high.support_lo() - center,
            high.support_hi() - center,
            low.support_lo() - center,
            low.support_hi() - center,
        ]);
    }
    breaks.retain(|x| *x >= lo && *x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let total_len = hi - lo;
    let mut mass = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        // Decide which components are live on this segment once, by its
        // midpoint, so the integrand handed to Simpson is smooth on the
        // closed segment (segment endpoints evaluate one-sided limits).
        let mid = 0.5 * (a + b);
        let high_live = !hard_truncate
            || (mid >= high.support_lo() - center && mid <= high.support_hi() - center);
        let low_live = mid > t_c
            && (!hard_truncate
                || (mid >= low.support_lo() - center && mid <= low.support_hi() - center));
        if !high_live && !low_live {
            continue;
        }
        let density = |x: f64| -> f64 {
            let mut f = 0.0;
            if high_live {
                f += gauss_pdf(x, high.mean() - center, high.std());
            }
            if low_live {
                f += gauss_pdf(x, low.mean() - center, low.std());
            }
            f
        };
        let seg_panels = ((panels as f64 * (b - a) / total_len).ceil() as usize).max(64);
        let (m0, m1, m2) = simpson_moments(&density, a, b, seg_panels);
        mass += m0;
        first += m1;
        second += m2;
    }
    let mean = first / mass;
    (center + mean, second / mass - mean * mean)
}

/// Deterministic xorshift generator for test-case sampling, independent of
/// the crate's RNG plumbing.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

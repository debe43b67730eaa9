//! Asymptotic secret key rates and the coherent-state advantage boundary.
//!
//! The WCP limit is the infinite-decoy BB84 rate optimised over the mean
//! photon number. The SPS rate is the two-photon-truncated BB84 rate without
//! decoys; its second branch is the first branch optimised over the effective
//! (pre-attenuated) mean photon number. All rates are bits per pulse.

use rayon::prelude::*;

use crate::channel::db_to_transmittance;
use crate::error::{Error, Result};

/// Best asymptotic WCP rate at transmittance `eta`: `eta / e`.
pub fn wcp_asymptotic_rate(eta: f64) -> f64 {
    eta * (-1.0f64).exp()
}

/// Transmittance below which pre-attenuation pays off.
///
/// With `x = g2·<n>` the threshold is `(1 − sqrt(1 − 4x²)) / 2x`; for
/// `x > 1/2` the discriminant is negative and the threshold saturates at 1.
pub fn eta_threshold(n_mean: f64, g2: f64) -> f64 {
    let x = g2 * n_mean;
    if x <= 0.0 {
        0.0
    } else if x <= 0.5 {
        // 1 - sqrt(1 - 4x²) rewritten to avoid cancellation for small x
        let s = 4.0 * x * x;
        s / (1.0 + (1.0 - s).sqrt()) / (2.0 * x)
    } else {
        1.0
    }
}

/// Rate at the source's own mean photon number.
pub fn sps_rate_unattenuated(eta: f64, n_mean: f64, g2: f64) -> f64 {
    -0.5 * g2 * n_mean * n_mean * (eta * eta + 1.0) + n_mean * eta
}

/// Rate after optimal pre-attenuation.
pub fn sps_rate_attenuated(eta: f64, g2: f64) -> f64 {
    eta * eta / (2.0 * g2 * (eta * eta + 1.0))
}

/// Effective mean photon number maximising [`sps_rate_unattenuated`].
pub fn optimal_effective_mean(eta: f64, g2: f64) -> f64 {
    eta / (g2 * (eta * eta + 1.0))
}

/// Asymptotic SPS rate, choosing the branch by [`eta_threshold`].
pub fn sps_asymptotic_rate(eta: f64, n_mean: f64, g2: f64) -> f64 {
    if eta > eta_threshold(n_mean, g2) {
        sps_rate_unattenuated(eta, n_mean, g2)
    } else {
        sps_rate_attenuated(eta, g2)
    }
}

/// Zero-loss advantage bounds `(1/e, e/4)`: the smallest mean photon number
/// and the largest g2 for which an SPS can beat coherent light.
pub fn fundamental_bounds() -> (f64, f64) {
    let e = std::f64::consts::E;
    (1.0 / e, e / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub mean_photon_number: f64,
    pub g2: f64,
}

/// Locus of equal SPS and WCP rates at one channel loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub loss_db: f64,
    /// Ordered by mean photon number. The first point is the `g2 = 0`
    /// endpoint when one exists inside the grid range.
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryCurve {
    /// Smallest mean photon number on the curve.
    pub fn min_mean_photon_number(&self) -> Option<f64> {
        self.points.first().map(|p| p.mean_photon_number)
    }

    /// Largest g2 reached anywhere on the curve (the plateau).
    pub fn max_g2(&self) -> Option<f64> {
        self.points.iter().map(|p| p.g2).reduce(f64::max)
    }
}

/// Physically allowed g2 interval for a two-photon-truncated source.
pub fn physical_g2_range(n_mean: f64) -> (f64, f64) {
    let lo = (2.0 * (n_mean - 1.0) / (n_mean * n_mean)).max(0.0);
    (lo, 1.0 / n_mean)
}

/// Bisection on a predicate that holds at `lo` and fails at `hi`. Returns
/// the last point where it held. `tol = 0` runs to floating-point resolution.
pub(crate) fn bisect_last_true(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    holds: impl Fn(f64) -> bool,
) -> f64 {
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Shared boundary tracer. `advantage(n, g2)` must be decreasing in `g2`
/// and increasing in `n` at `g2 = 0`; the curve is where it crosses zero.
pub(crate) fn trace_boundary<F>(
    loss_db: f64,
    grid: &[f64],
    tol: f64,
    advantage: F,
) -> Result<BoundaryCurve>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    for &n in grid {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid(
                "grid",
                format!("mean photon number {n} must be positive"),
            ));
        }
    }
    let wins = |n: f64, g: f64| advantage(n, g) >= 0.0;

    let mut points: Vec<BoundaryPoint> = grid
        .par_iter()
        .filter_map(|&n| {
            let (g_lo, g_hi) = physical_g2_range(n);
            if g_lo > g_hi || !wins(n, g_lo) || wins(n, g_hi) {
                return None;
            }
            let g2 = bisect_last_true(g_lo, g_hi, tol, |g| wins(n, g));
            Some(BoundaryPoint {
                mean_photon_number: n,
                g2,
            })
        })
        .collect();

    // g2 = 0 endpoint, only meaningful for <n> <= 1
    let n_hi = grid.iter().copied().fold(0.0, f64::max).min(1.0);
    let n_lo = 1e-9;
    if n_hi > n_lo && wins(n_hi, 0.0) && !wins(n_lo, 0.0) {
        // bisect on "fails" so the endpoint sits on the winning side
        let n_min = {
            let mut lo = n_lo;
            let mut hi = n_hi;
            for _ in 0..400 {
                if hi - lo <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if wins(mid, 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        points.retain(|p| p.mean_photon_number > n_min);
        points.insert(
            0,
            BoundaryPoint {
                mean_photon_number: n_min,
                g2: 0.0,
            },
        );
    }
    points.sort_by(|a, b| a.mean_photon_number.total_cmp(&b.mean_photon_number));

    if points.is_empty() {
        return Err(Error::EmptyCurve { loss_db });
    }
    Ok(BoundaryCurve { loss_db, points })
}

/// Advantage boundary of the ideal asymptotic model at `loss_db`.
///
/// For every grid mean photon number, returns the largest g2 at which the
/// SPS still matches the WCP limit. Grid points where no physical g2 gives
/// equality are omitted.
pub fn advantage_boundary(loss_db: f64, grid: &[f64]) -> Result<BoundaryCurve> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::invalid(
            "loss_db",
            format!("{loss_db} must be non-negative"),
        ));
    }
    let eta = db_to_transmittance(loss_db);
    let target = wcp_asymptotic_rate(eta);
    trace_boundary(loss_db, grid, 0.0, |n, g| {
        sps_asymptotic_rate(eta, n, g) - target
    })
}

/// Evenly spaced grid over `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

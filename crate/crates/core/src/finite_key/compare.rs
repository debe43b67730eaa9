use rayon::prelude::*;

use super::sps::{sps_expected_rate, SpsSetup};
use super::wcp::{wcp_finite_key_rate, DecoySettings, WcpSetup};
use super::KeyReport;
use crate::asymptotic::{bisect_last_true, trace_boundary, BoundaryCurve};
use crate::error::{Error, Result};
use crate::optimizer::{optimize, GaSettings, Point, SearchSpace};
use crate::photon_source::SourceSpec;

/// `10·log10(r_sps / r_wcp)`. Infinite when exactly one rate is zero, NaN
/// when both are.
pub fn advantage_db(r_sps: f64, r_wcp: f64) -> f64 {
    10.0 * (r_sps / r_wcp).log10()
}

/// Free SPS parameters: transmitter basis bias and pre-attenuation.
pub fn sps_search_space() -> SearchSpace {
    SearchSpace::new()
        .bounded("q_z_tx", 0.5, 0.99)
        .log_bounded("pre_attenuation", 1e-3, 1.0)
}

/// Free WCP parameters. The decoy intensity is a fraction of the signal
/// intensity so `mu_d < mu_s` holds everywhere in the box.
pub fn wcp_search_space() -> SearchSpace {
    SearchSpace::new()
        .bounded("mu_s", 0.05, 1.0)
        .bounded("mu_d_ratio", 0.01, 0.99)
        .simplex("intensity", &["p_s", "p_d", "p_v"], 0.01)
        .bounded("q_z_tx", 0.5, 0.99)
}

fn sps_at(base: &SpsSetup, p: &Point) -> SpsSetup {
    let mut s = *base;
    s.protocol.q_z_tx = p["q_z_tx"];
    s.protocol.pre_attenuation = p["pre_attenuation"];
    s
}

fn wcp_at(base: &WcpSetup, p: &Point) -> WcpSetup {
    WcpSetup {
        decoy: DecoySettings {
            mu_signal: p["mu_s"],
            mu_decoy: p["mu_s"] * p["mu_d_ratio"],
            p_signal: p["p_s"],
            p_decoy: p["p_d"],
            q_z_tx: p["q_z_tx"],
        },
        ..*base
    }
}

fn sps_rate(s: &SpsSetup) -> f64 {
    sps_expected_rate(s)
        .map(|r| r.rate_per_pulse)
        .unwrap_or(0.0)
}

fn wcp_rate(s: &WcpSetup) -> f64 {
    wcp_finite_key_rate(s)
        .map(|r| r.rate_per_pulse)
        .unwrap_or(0.0)
}

/// Best setup found by the optimizer with its key report.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedRate<S> {
    pub setup: S,
    pub report: KeyReport,
    pub rate: f64,
    pub evaluations: usize,
}

fn tuned<S>(setup: S, report: Result<KeyReport>, evaluations: usize) -> TunedRate<S> {
    let report = report.unwrap_or_else(|_| KeyReport::zero(0.0, 0.0));
    TunedRate {
        setup,
        rate: report.rate_per_pulse,
        report,
        evaluations,
    }
}

/// Maximises the SPS rate over [`sps_search_space`]. The configured
/// operating point is kept if the search does not beat it.
pub fn optimize_sps(base: &SpsSetup, ga: &GaSettings) -> Result<TunedRate<SpsSetup>> {
    base.validate()?;
    let space = sps_search_space();
    let res = optimize(|p| sps_rate(&sps_at(base, p)), &space, ga)?;
    let best = if sps_rate(base) > res.best_rate {
        *base
    } else {
        sps_at(base, &res.best)
    };
    Ok(tuned(best, sps_expected_rate(&best), res.evaluations))
}

/// Maximises the decoy-state WCP rate over [`wcp_search_space`]. The
/// configured intensities are kept if the search does not beat them.
pub fn optimize_wcp(base: &WcpSetup, ga: &GaSettings) -> Result<TunedRate<WcpSetup>> {
    let space = wcp_search_space();
    let res = optimize(|p| wcp_rate(&wcp_at(base, p)), &space, ga)?;
    let best = if wcp_rate(base) > res.best_rate {
        *base
    } else {
        wcp_at(base, &res.best)
    };
    Ok(tuned(best, wcp_finite_key_rate(&best), res.evaluations))
}

/// Loss range scanned for the crossover and the peak advantage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossScan {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tolerance_db: f64,
}

impl Default for LossScan {
    fn default() -> Self {
        Self {
            min_db: 0.0,
            max_db: 40.0,
            step_db: 1.0,
            tolerance_db: 0.01,
        }
    }
}

impl LossScan {
    pub fn losses(&self) -> Result<Vec<f64>> {
        if !(self.min_db >= 0.0 && self.max_db > self.min_db && self.step_db > 0.0) {
            return Err(Error::invalid(
                "loss_scan",
                format!("need 0 <= min < max and step > 0, got {self:?}"),
            ));
        }
        let steps = ((self.max_db - self.min_db) / self.step_db).round() as usize;
        Ok((0..=steps)
            .map(|i| (self.min_db + i as f64 * self.step_db).min(self.max_db))
            .collect())
    }
}

/// SPS and WCP setups sharing channel and security parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSetup {
    pub sps: SpsSetup,
    pub wcp: WcpSetup,
    pub ga: GaSettings,
    pub scan: LossScan,
}

impl ComparisonSetup {
    /// SPS and WCP rates at `loss_db`, each tuned by the optimizer.
    pub fn tuned_rates(&self, loss_db: f64) -> Result<(f64, f64)> {
        let s = optimize_sps(&self.sps.with_loss(loss_db), &self.ga)?;
        let w = optimize_wcp(&self.wcp.with_loss(loss_db), &self.ga)?;
        Ok((s.rate, w.rate))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub loss_db: f64,
    /// SPS rate at the configured operating point.
    pub r_sps: f64,
    /// Optimised WCP rate.
    pub r_wcp: f64,
    pub advantage_db: f64,
    /// Loss at which the tuned SPS stops beating the tuned WCP.
    pub crossover_loss_db: f64,
    pub peak_advantage_db: f64,
    pub peak_loss_db: f64,
    /// `(loss_db, r_sps, r_wcp)` along the scan, both tuned.
    pub scan: Vec<(f64, f64, f64)>,
}

fn sps_ahead(r_sps: f64, r_wcp: f64) -> bool {
    r_sps > 0.0 && r_sps > r_wcp
}

/// Advantage at the configured loss and crossover of the tuned rates.
///
/// The advantage compares the SPS as configured against the optimised
/// WCP. The crossover re-optimises both sides at every loss, locates the
/// first scan interval where the SPS falls behind and bisects inside it.
pub fn compare(setup: &ComparisonSetup) -> Result<Comparison> {
    setup.sps.validate()?;
    let loss_db = setup.sps.channel.channel_loss_db;
    let r_sps = sps_rate(&setup.sps);
    let r_wcp = optimize_wcp(&setup.wcp.with_loss(loss_db), &setup.ga)?.rate;

    let losses = setup.scan.losses()?;
    let scan: Vec<(f64, f64, f64)> = losses
        .par_iter()
        .map(|&l| setup.tuned_rates(l).map(|(s, w)| (l, s, w)))
        .collect::<Result<_>>()?;

    let (peak_loss_db, peak_advantage_db) = scan
        .iter()
        .map(|&(l, s, w)| (l, advantage_db(s, w)))
        .filter(|(_, a)| !a.is_nan())
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });

    let no_crossover = |reason: &str| Error::NoCrossover {
        min_loss_db: setup.scan.min_db,
        max_loss_db: setup.scan.max_db,
        reason: reason.to_string(),
    };
    if !scan.iter().any(|&(_, s, w)| sps_ahead(s, w)) {
        return Err(no_crossover(
            "the single-photon source never beats the decoy-state laser",
        ));
    }
    let idx = scan
        .windows(2)
        .position(|w| sps_ahead(w[0].1, w[0].2) && !sps_ahead(w[1].1, w[1].2))
        .ok_or_else(|| no_crossover("the single-photon source stays ahead over the whole scan"))?;
    let ahead_at = |l: f64| {
        setup
            .tuned_rates(l)
            .map(|(s, w)| sps_ahead(s, w))
            .unwrap_or(false)
    };
    let crossover_loss_db = bisect_last_true(
        scan[idx].0,
        scan[idx + 1].0,
        setup.scan.tolerance_db,
        ahead_at,
    );

    Ok(Comparison {
        loss_db,
        r_sps,
        r_wcp,
        advantage_db: advantage_db(r_sps, r_wcp),
        crossover_loss_db,
        peak_advantage_db,
        peak_loss_db,
        scan,
    })
}

/// Finite-key advantage boundary at `loss_db`.
///
/// For each grid mean photon number, the largest g2 at which the SPS,
/// tuned over basis bias and pre-attenuation, still matches the tuned
/// decoy-state WCP. The source in `setup.sps` is replaced point by point.
pub fn finite_boundary(
    loss_db: f64,
    grid: &[f64],
    setup: &ComparisonSetup,
) -> Result<BoundaryCurve> {
    if !(loss_db >= 0.0) || !loss_db.is_finite() {
        return Err(Error::invalid(
            "loss_db",
            format!("{loss_db} must be non-negative"),
        ));
    }
    let target = optimize_wcp(&setup.wcp.with_loss(loss_db), &setup.ga)?.rate;
    let base = setup.sps.with_loss(loss_db);
    let sps_space = sps_search_space();
    trace_boundary(loss_db, grid, 1e-6, |n, g2| {
        let s = SpsSetup {
            source: SourceSpec::Sps {
                mean_photon_number: n,
                g2,
            },
            ..base
        };
        let best = optimize(|p| sps_rate(&sps_at(&s, p)), &sps_space, &setup.ga)
            .map(|r| r.best_rate)
            .unwrap_or(0.0)
            .max(sps_rate(&s));
        if best > 0.0 {
            best - target
        } else {
            -1.0
        }
    })
}

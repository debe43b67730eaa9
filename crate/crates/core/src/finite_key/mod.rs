//! Finite-key secure key lengths.
//!
//! The single-photon source runs the three-state protocol without decoys: the
//! key is distilled from Z-basis detections after removing a Chernoff cap on
//! multi-photon emissions, with the phase error taken from the X basis. The
//! coherent-state comparator uses vacuum + weak decoy bounds on the
//! single-photon contributions. Both share the Chernoff machinery and the
//! ε-budget defined here.

mod compare;
mod sps;
mod wcp;

pub use compare::{
    advantage_db, compare, finite_boundary, optimize_sps, optimize_wcp, sps_search_space,
    wcp_search_space, Comparison, ComparisonSetup, LossScan, TunedRate,
};
pub use sps::{
    sps_expected_rate, sps_expected_tallies, sps_key_length, SpsSetup, SPS_ESTIMATION_USES,
};
pub use wcp::{wcp_finite_key_rate, DecoySettings, WcpSetup, WCP_ESTIMATION_USES};

use std::cell::Cell;

use crate::error::{Error, Result};

/// Shannon entropy of a Bernoulli(p) variable, in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Entropy for rates already known to sit in [0, 1/2].
fn h(p: f64) -> f64 {
    binary_entropy(p.clamp(0.0, 1.0)).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

/// Multiplicative Chernoff inversion with `β = ln(1/ε)`:
/// upper `x + β + sqrt(2βx + β²)`, lower `max(0, x − sqrt(2βx))`.
pub fn chernoff_bound(x: f64, eps: f64, direction: Direction) -> f64 {
    let beta = (1.0 / eps).ln();
    match direction {
        Direction::Upper => x + beta + (2.0 * beta * x + beta * beta).sqrt(),
        Direction::Lower => (x - (2.0 * beta * x).sqrt()).max(0.0),
    }
}

/// Failure budgets and error-correction efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    /// Parameter estimation, shared equally among Chernoff invocations.
    pub eps_pe: f64,
    pub eps_pa: f64,
    pub eps_ec: f64,
    pub eps_cor: f64,
    pub f_ec: f64,
}

impl SecurityParams {
    /// Budgets used in the free-space field trial.
    pub fn field_trial() -> Self {
        Self {
            eps_pe: 11e-10 / 12.0,
            eps_pa: 1e-10 / 24.0,
            eps_ec: 1e-10 / 24.0,
            eps_cor: 1e-15,
            f_ec: 1.16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_pe", self.eps_pe),
            ("eps_pa", self.eps_pa),
            ("eps_ec", self.eps_ec),
            ("eps_cor", self.eps_cor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("{v} lies outside (0, 1)")));
            }
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::invalid(
                "f_ec",
                format!("{} must be at least 1", self.f_ec),
            ));
        }
        Ok(())
    }

    /// Total secrecy budget: estimation + privacy amplification + error correction.
    pub fn total_secrecy(&self) -> f64 {
        self.eps_pe + self.eps_pa + self.eps_ec
    }

    /// Fixed privacy-amplification and correctness cost in bits.
    pub fn fixed_overhead_bits(&self) -> f64 {
        2.0 * (1.0 / (2.0 * self.eps_pa)).log2() + (2.0 / self.eps_cor).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeyMode {
    /// `block_size` counts received key-basis (Z) detections.
    Finite { block_size: f64 },
    /// Infinite block: no statistical fluctuations, no fixed overheads.
    Asymptotic,
}

/// Free protocol parameters shared by both source types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Transmitter's Z-basis probability.
    pub q_z_tx: f64,
    /// Receiver's Z-basis probability (passive beam splitter ratio).
    pub q_z_rx: f64,
    /// Transmittance of the adjustable attenuator before the channel.
    pub pre_attenuation: f64,
    pub mode: KeyMode,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("q_z_tx", self.q_z_tx), ("q_z_rx", self.q_z_rx)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("{v} lies outside (0, 1)")));
            }
        }
        if !(self.pre_attenuation > 0.0 && self.pre_attenuation <= 1.0) {
            return Err(Error::invalid(
                "pre_attenuation",
                format!("{} lies outside (0, 1]", self.pre_attenuation),
            ));
        }
        if let KeyMode::Finite { block_size } = self.mode {
            if !(block_size >= 1.0) || !block_size.is_finite() {
                return Err(Error::invalid(
                    "block_size",
                    format!("{block_size} must be at least 1"),
                ));
            }
        }
        Ok(())
    }
}

/// Observed (or expected) counts for one block.
///
/// Counts are `f64` so the analytic pipeline can carry fractional
/// expectations; sampled tallies are always integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TallySet {
    pub pulses_sent: f64,
    pub z_detections: f64,
    pub x_detections: f64,
    pub z_errors: f64,
    pub x_errors: f64,
}

impl TallySet {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("pulses_sent", self.pulses_sent),
            ("z_detections", self.z_detections),
            ("x_detections", self.x_detections),
            ("z_errors", self.z_errors),
            ("x_errors", self.x_errors),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    name,
                    format!("{v} must be a non-negative count"),
                ));
            }
        }
        if self.z_errors > self.z_detections {
            return Err(Error::invalid("z_errors", "exceeds z_detections"));
        }
        if self.x_errors > self.x_detections {
            return Err(Error::invalid("x_errors", "exceeds x_detections"));
        }
        if self.z_detections + self.x_detections > self.pulses_sent {
            return Err(Error::invalid(
                "pulses_sent",
                "fewer pulses than sifted detections",
            ));
        }
        Ok(())
    }

    pub fn z_qber(&self) -> f64 {
        if self.z_detections > 0.0 {
            self.z_errors / self.z_detections
        } else {
            0.0
        }
    }
}

/// Secure key length together with the bounds that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyReport {
    /// Bits, clamped at zero. Per pulse in asymptotic mode.
    pub key_length: f64,
    pub rate_per_pulse: f64,
    pub pulses_sent: f64,
    /// Upper bound on Z-basis multi-photon emissions (SPS only).
    pub multi_photon_cap: Option<f64>,
    /// Lower bound on key-basis detections from which secrecy is extracted:
    /// non-multi-photon detections for the SPS, single-photon detections for
    /// the decoy comparator.
    pub secure_detections: f64,
    /// Vacuum contributions counted separately (decoy comparator only).
    pub vacuum_detections: f64,
    pub phase_error_bound: f64,
    pub lambda_ec: f64,
    pub qber_z: f64,
    /// Failure probability spent by this evaluation.
    pub eps_consumed: f64,
}

impl KeyReport {
    pub(crate) fn zero(pulses_sent: f64, eps_consumed: f64) -> Self {
        Self {
            key_length: 0.0,
            rate_per_pulse: 0.0,
            pulses_sent,
            multi_photon_cap: None,
            secure_detections: 0.0,
            vacuum_detections: 0.0,
            phase_error_bound: 0.5,
            lambda_ec: 0.0,
            qber_z: 0.0,
            eps_consumed,
        }
    }
}

/// Chernoff bounds with an equal share of ε_PE per invocation. In
/// asymptotic mode the bounds collapse to the expectations.
pub(crate) struct Estimator {
    eps_each: f64,
    finite: bool,
    calls: Cell<usize>,
}

impl Estimator {
    pub(crate) fn new(mode: KeyMode, eps_pe: f64, uses: usize) -> Self {
        Self {
            eps_each: eps_pe / uses as f64,
            finite: matches!(mode, KeyMode::Finite { .. }),
            calls: Cell::new(0),
        }
    }

    pub(crate) fn upper(&self, x: f64) -> f64 {
        self.calls.set(self.calls.get() + 1);
        if self.finite {
            chernoff_bound(x, self.eps_each, Direction::Upper)
        } else {
            x
        }
    }

    pub(crate) fn lower(&self, x: f64) -> f64 {
        self.calls.set(self.calls.get() + 1);
        if self.finite {
            chernoff_bound(x, self.eps_each, Direction::Lower)
        } else {
            x
        }
    }

    /// Upper bound on a count whose expectation is exactly zero; it cannot
    /// fluctuate, but the share is still spent.
    pub(crate) fn upper_or_zero(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.upper(x)
        } else {
            self.calls.set(self.calls.get() + 1);
            0.0
        }
    }

    pub(crate) fn consumed(&self) -> f64 {
        self.eps_each * self.calls.get() as f64
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.finite
    }
}

//! Channel and threshold-detector model.
//!
//! Turns a photon-number distribution and a link transmittance into the
//! per-photon-number yields, the overall gain and the error rate seen by the
//! receiver. Dark counts are aggregated across the receiver's detectors into
//! a single probability per gate; a dark count alone yields a random bit.

use crate::error::{Error, Result};
use crate::photon_source::PhotonNumberDistribution;

/// Loss, efficiencies and noise of the free-space link and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDetectorModel {
    /// Channel loss in dB (positive number).
    pub channel_loss_db: f64,
    /// Coupling/fiber optics efficiency at the receiver.
    pub fiber_optics_efficiency: f64,
    pub detection_efficiency: f64,
    /// Total dark counts over all detectors, counts per second.
    pub dark_count_rate: f64,
    /// Temporal filtering gate, seconds.
    pub gate_width: f64,
    /// Probability that an arriving photon lands in the wrong detector.
    pub misalignment_prob: f64,
}

impl ChannelDetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.channel_loss_db >= 0.0) || !self.channel_loss_db.is_finite() {
            return Err(Error::invalid(
                "channel_loss_db",
                format!(
                    "{} must be a finite non-negative dB value",
                    self.channel_loss_db
                ),
            ));
        }
        for (name, v) in [
            ("fiber_optics_efficiency", self.fiber_optics_efficiency),
            ("detection_efficiency", self.detection_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} lies outside [0, 1]")));
            }
        }
        if !(self.dark_count_rate >= 0.0) {
            return Err(Error::invalid(
                "dark_count_rate",
                format!("{} must be non-negative", self.dark_count_rate),
            ));
        }
        if !(self.gate_width > 0.0) {
            return Err(Error::invalid(
                "gate_width",
                format!("{} must be positive", self.gate_width),
            ));
        }
        if !(0.0..=0.5).contains(&self.misalignment_prob) {
            return Err(Error::invalid(
                "misalignment_prob",
                format!("{} lies outside [0, 0.5]", self.misalignment_prob),
            ));
        }
        self.dark_count_prob().map(|_| ())
    }

    /// Overall single-photon transmittance from the channel input to a click.
    pub fn link_transmittance(&self) -> f64 {
        db_to_transmittance(self.channel_loss_db)
            * self.fiber_optics_efficiency
            * self.detection_efficiency
    }

    /// Dark count probability within one gate.
    pub fn dark_count_prob(&self) -> Result<f64> {
        let p = self.dark_count_rate * self.gate_width;
        if p >= 1.0 {
            return Err(Error::RateTooHigh(p));
        }
        Ok(p)
    }

    pub fn with_loss(&self, channel_loss_db: f64) -> Self {
        Self {
            channel_loss_db,
            ..*self
        }
    }
}

pub fn db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Expected receiver statistics for one source configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionStats {
    /// `Y_n`, probability of a click given `n` photons were sent.
    pub yields: Vec<f64>,
    /// `e_n·Y_n`, probability of an erroneous click given `n` photons.
    pub error_yields: Vec<f64>,
    /// `Q = Σ p_n·Y_n`.
    pub gain: f64,
    /// `QE = Σ p_n·e_n·Y_n`.
    pub error_gain: f64,
    /// `E = QE / Q`; 1/2 if nothing is ever detected.
    pub qber: f64,
}

/// Threshold-detector statistics for `dist` sent through transmittance `eta`.
pub fn detection_stats(
    dist: &PhotonNumberDistribution,
    eta: f64,
    model: &ChannelDetectorModel,
) -> Result<DetectionStats> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("eta", format!("{eta} lies outside [0, 1]")));
    }
    let p_dc = model.dark_count_prob()?;
    let p_mis = model.misalignment_prob;
    let mut yields = Vec::with_capacity(dist.n_max() + 1);
    let mut error_yields = Vec::with_capacity(dist.n_max() + 1);
    let mut gain = 0.0;
    let mut error_gain = 0.0;
    let mut all_lost = 1.0;
    for &p in dist.probs() {
        let y = p_dc * all_lost + (1.0 - all_lost);
        let ey = 0.5 * p_dc * all_lost + p_mis * (1.0 - all_lost);
        gain += p * y;
        error_gain += p * ey;
        yields.push(y);
        error_yields.push(ey);
        all_lost *= 1.0 - eta;
    }
    let qber = if gain > 0.0 { error_gain / gain } else { 0.5 };
    Ok(DetectionStats {
        yields,
        error_yields,
        gain,
        error_gain,
        qber,
    })
}

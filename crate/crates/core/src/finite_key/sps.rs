use super::{h, Estimator, KeyMode, KeyReport, ProtocolConfig, SecurityParams, TallySet};
use crate::channel::{detection_stats, ChannelDetectorModel, DetectionStats};
use crate::error::{Error, Result};
use crate::photon_source::{PhotonNumberDistribution, SourceSpec};

/// Chernoff invocations charged to ε_PE by [`sps_key_length`]: the two
/// multi-photon caps, the X-basis error count and the X→Z sampling step.
pub const SPS_ESTIMATION_USES: usize = 4;

/// Everything needed to evaluate a single-photon-source key rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpsSetup {
    /// Source as emitted, before pre-attenuation.
    pub source: SourceSpec,
    pub channel: ChannelDetectorModel,
    pub protocol: ProtocolConfig,
    pub security: SecurityParams,
}

impl SpsSetup {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.protocol.validate()?;
        self.security.validate()?;
        self.source.distribution().map(|_| ())
    }

    /// Photon-number distribution leaving the transmitter.
    pub fn launched_distribution(&self) -> Result<PhotonNumberDistribution> {
        self.source
            .distribution()?
            .attenuate(self.protocol.pre_attenuation)
    }

    pub fn with_loss(&self, channel_loss_db: f64) -> Self {
        Self {
            channel: self.channel.with_loss(channel_loss_db),
            ..*self
        }
    }
}

/// Key length from a set of tallies.
///
/// `launched` is the distribution after pre-attenuation. Every multi-photon
/// emission is assumed detected and leaks the full bit, so the key is drawn
/// from `N_Z − cap_Z` detections; the phase error is the X-basis error count
/// charged entirely to the non-multi-photon X detections, then carried over
/// to the Z basis with a sampling deviation.
pub fn sps_key_length(
    tallies: &TallySet,
    launched: &PhotonNumberDistribution,
    protocol: &ProtocolConfig,
    security: &SecurityParams,
) -> Result<KeyReport> {
    tallies.validate()?;
    protocol.validate()?;
    security.validate()?;
    let est = Estimator::new(protocol.mode, security.eps_pe, SPS_ESTIMATION_USES);
    let declared = security.eps_pe + security.eps_pa + security.eps_ec;
    if tallies.z_detections <= 0.0 {
        return Ok(KeyReport::zero(tallies.pulses_sent, declared));
    }

    let p_multi = launched.multi_photon_prob();
    let n_s = tallies.pulses_sent;
    let cap_z = est.upper_or_zero(n_s * protocol.q_z_tx * p_multi);
    let cap_x = est.upper_or_zero(n_s * (1.0 - protocol.q_z_tx) * p_multi);

    let single_z = tallies.z_detections - cap_z;
    if single_z <= 0.0 {
        return Err(Error::InsufficientBlock {
            detections: tallies.z_detections,
            multi_photon_cap: cap_z,
        });
    }
    let single_x = tallies.x_detections - cap_x;
    let x_errors_upper = est.upper(tallies.x_errors);
    let phase_error = if single_x > 0.0 {
        let e_x = (x_errors_upper / single_x).min(0.5);
        (est.upper(single_z * e_x) / single_z).min(0.5)
    } else {
        est.upper(0.0);
        0.5
    };

    let qber_z = tallies.z_qber();
    let lambda_ec = security.f_ec * tallies.z_detections * h(qber_z);
    let overhead = if est.is_finite() {
        security.fixed_overhead_bits()
    } else {
        0.0
    };
    let key_length = (single_z * (1.0 - h(phase_error)) - lambda_ec - overhead).max(0.0);
    Ok(KeyReport {
        key_length,
        rate_per_pulse: if n_s > 0.0 { key_length / n_s } else { 0.0 },
        pulses_sent: n_s,
        multi_photon_cap: Some(cap_z),
        secure_detections: single_z,
        vacuum_detections: 0.0,
        phase_error_bound: phase_error,
        lambda_ec,
        qber_z,
        eps_consumed: est.consumed() + security.eps_pa + security.eps_ec,
    })
}

/// Expected tallies of one block together with the launched distribution
/// and receiver statistics.
///
/// In finite mode the block holds `block_size` Z-basis detections and the
/// number of pulses is inferred from the expected gain; in asymptotic mode
/// one pulse is sent so all counts are per-pulse rates.
pub fn sps_expected_tallies(
    setup: &SpsSetup,
) -> Result<(TallySet, PhotonNumberDistribution, DetectionStats)> {
    setup.validate()?;
    let launched = setup.launched_distribution()?;
    let eta = setup.channel.link_transmittance();
    let stats = detection_stats(&launched, eta, &setup.channel)?;
    let p = &setup.protocol;
    let sift_z = p.q_z_tx * p.q_z_rx;
    let sift_x = (1.0 - p.q_z_tx) * (1.0 - p.q_z_rx);
    let pulses_sent = match p.mode {
        KeyMode::Finite { block_size } => {
            if stats.gain <= 0.0 {
                return Err(Error::invalid("channel", "no detections are ever expected"));
            }
            block_size / (sift_z * stats.gain)
        }
        KeyMode::Asymptotic => 1.0,
    };
    let z = pulses_sent * sift_z * stats.gain;
    let x = pulses_sent * sift_x * stats.gain;
    let tallies = TallySet {
        pulses_sent,
        z_detections: z,
        x_detections: x,
        z_errors: z * stats.qber,
        x_errors: x * stats.qber,
    };
    Ok((tallies, launched, stats))
}

/// Deterministic key rate at the expected statistics of `setup`.
pub fn sps_expected_rate(setup: &SpsSetup) -> Result<KeyReport> {
    let (tallies, launched, _) = sps_expected_tallies(setup)?;
    sps_key_length(&tallies, &launched, &setup.protocol, &setup.security)
}

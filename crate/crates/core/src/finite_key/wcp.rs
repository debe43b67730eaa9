use super::{h, Estimator, KeyMode, KeyReport, SecurityParams};
use crate::asymptotic::wcp_asymptotic_rate;
use crate::channel::{detection_stats, ChannelDetectorModel};
use crate::error::{Error, Result};
use crate::photon_source::{wcp_distribution, WCP_DEFAULT_CUTOFF};

/// Chernoff invocations charged to ε_PE by [`wcp_finite_key_rate`].
///
/// Z basis: decoy lower, signal upper, vacuum upper and lower. X basis:
/// decoy lower, signal upper, vacuum upper, decoy errors upper, vacuum
/// errors lower. One more for the X→Z phase-error sampling step.
pub const WCP_ESTIMATION_USES: usize = 10;

/// Signal / weak-decoy / vacuum intensities and the transmitter basis bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoySettings {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub q_z_tx: f64,
}

impl DecoySettings {
    pub fn p_vacuum(&self) -> f64 {
        1.0 - self.p_signal - self.p_decoy
    }

    /// No light is ever sent.
    pub fn is_vacuum_only(&self) -> bool {
        self.mu_signal <= 0.0 || self.p_signal + self.p_decoy <= 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_signal > self.mu_decoy && self.mu_decoy > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!(
                    "need mu_signal > mu_decoy > 0, got {} and {}",
                    self.mu_signal, self.mu_decoy
                ),
            ));
        }
        for (name, v) in [
            ("p_signal", self.p_signal),
            ("p_decoy", self.p_decoy),
            ("p_vacuum", self.p_vacuum()),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("{v} lies outside (0, 1)")));
            }
        }
        if !(self.q_z_tx > 0.0 && self.q_z_tx < 1.0) {
            return Err(Error::invalid(
                "q_z_tx",
                format!("{} lies outside (0, 1)", self.q_z_tx),
            ));
        }
        Ok(())
    }
}

/// Coherent-state comparator sharing the SPS channel and security settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WcpSetup {
    pub decoy: DecoySettings,
    pub channel: ChannelDetectorModel,
    pub q_z_rx: f64,
    /// Transmitter optics the laser light passes before the channel.
    pub transmitter_efficiency: f64,
    pub mode: KeyMode,
    pub security: SecurityParams,
}

impl WcpSetup {
    pub fn link_transmittance(&self) -> f64 {
        self.channel.link_transmittance() * self.transmitter_efficiency
    }

    pub fn with_loss(&self, channel_loss_db: f64) -> Self {
        Self {
            channel: self.channel.with_loss(channel_loss_db),
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.security.validate()?;
        if !(self.q_z_rx > 0.0 && self.q_z_rx < 1.0) {
            return Err(Error::invalid(
                "q_z_rx",
                format!("{} lies outside (0, 1)", self.q_z_rx),
            ));
        }
        if !(self.transmitter_efficiency > 0.0 && self.transmitter_efficiency <= 1.0) {
            return Err(Error::invalid(
                "transmitter_efficiency",
                format!("{} lies outside (0, 1]", self.transmitter_efficiency),
            ));
        }
        Ok(())
    }
}

struct Intensity {
    mu: f64,
    prob: f64,
    gain: f64,
    error_gain: f64,
}

/// Finite-key rate of vacuum + weak decoy BB84.
///
/// Key bits are drawn from Z detections of every intensity. The number of
/// single-photon Z detections is lower-bounded from the decoy, signal and
/// vacuum counts; their phase error comes from X-basis decoy errors. In
/// asymptotic mode the infinite-decoy ceiling `eta / e` is returned.
pub fn wcp_finite_key_rate(setup: &WcpSetup) -> Result<KeyReport> {
    setup.validate()?;
    let sec = &setup.security;
    let declared = sec.total_secrecy();
    let eta = setup.link_transmittance();
    let block_size = match setup.mode {
        KeyMode::Asymptotic => {
            let r = wcp_asymptotic_rate(eta);
            return Ok(KeyReport {
                key_length: r,
                rate_per_pulse: r,
                pulses_sent: 1.0,
                multi_photon_cap: None,
                secure_detections: r,
                vacuum_detections: 0.0,
                phase_error_bound: 0.0,
                lambda_ec: 0.0,
                qber_z: 0.0,
                eps_consumed: 0.0,
            });
        }
        KeyMode::Finite { block_size } => block_size,
    };
    let d = setup.decoy;
    if d.is_vacuum_only() {
        return Ok(KeyReport::zero(0.0, declared));
    }
    d.validate()?;

    let intensity = |mu: f64, prob: f64| -> Result<Intensity> {
        let s = detection_stats(
            &wcp_distribution(mu, WCP_DEFAULT_CUTOFF)?,
            eta,
            &setup.channel,
        )?;
        Ok(Intensity {
            mu,
            prob,
            gain: s.gain,
            error_gain: s.error_gain,
        })
    };
    let sig = intensity(d.mu_signal, d.p_signal)?;
    let dec = intensity(d.mu_decoy, d.p_decoy)?;
    let vac = intensity(0.0, d.p_vacuum())?;
    let all = [&sig, &dec, &vac];

    let sift_z = d.q_z_tx * setup.q_z_rx;
    let sift_x = (1.0 - d.q_z_tx) * (1.0 - setup.q_z_rx);
    let mean_gain: f64 = all.iter().map(|k| k.prob * k.gain).sum();
    if mean_gain <= 0.0 {
        return Err(Error::invalid("channel", "no detections are ever expected"));
    }
    let n_s = block_size / (sift_z * mean_gain);

    // probability that a pulse holds 0 or 1 photons, averaged over intensities
    let tau0: f64 = all.iter().map(|k| k.prob * (-k.mu).exp()).sum();
    let tau1: f64 = all.iter().map(|k| k.prob * k.mu * (-k.mu).exp()).sum();

    let est = Estimator::new(setup.mode, sec.eps_pe, WCP_ESTIMATION_USES);
    let counts = |k: &Intensity, sift: f64| n_s * k.prob * sift * k.gain;
    let (mu1, mu2) = (sig.mu, dec.mu);

    // lower bound on single-photon detections in one basis
    let single_photon_lower = |sift: f64| -> f64 {
        let dec_lo = est.lower(counts(&dec, sift));
        let sig_hi = est.upper(counts(&sig, sift));
        let vac_hi = est.upper(counts(&vac, sift));
        let vacuum_hi = tau0 * vac_hi / vac.prob;
        tau1 * mu1 / (mu1 * mu2 - mu2 * mu2)
            * (mu2.exp() * dec_lo / dec.prob
                - vac_hi / vac.prob
                - (mu2 * mu2) / (mu1 * mu1) * (mu1.exp() * sig_hi / sig.prob - vacuum_hi / tau0))
    };

    let s1_z = single_photon_lower(sift_z);
    let s0_z = tau0 * est.lower(counts(&vac, sift_z)) / vac.prob;
    let s1_x = single_photon_lower(sift_x);
    if !(s1_z > 0.0) || !(s1_x > 0.0) {
        return Err(Error::DecoyInfeasible(format!(
            "single-photon detection bounds are not positive (Z {s1_z:.3e}, X {s1_x:.3e})"
        )));
    }

    let err_dec_hi = est.upper(n_s * dec.prob * sift_x * dec.error_gain);
    let err_vac_lo = est.lower(n_s * vac.prob * sift_x * vac.error_gain);
    let v1_x = tau1 * (mu2.exp() * err_dec_hi / dec.prob - err_vac_lo / vac.prob) / mu2;
    let e1_x = (v1_x / s1_x).clamp(0.0, 0.5);
    let phase_error = (est.upper(s1_z * e1_x) / s1_z).min(0.5);

    let z_detections: f64 = all.iter().map(|k| counts(k, sift_z)).sum();
    let z_errors: f64 = all
        .iter()
        .map(|k| n_s * k.prob * sift_z * k.error_gain)
        .sum();
    let qber_z = z_errors / z_detections;
    let lambda_ec = sec.f_ec * z_detections * h(qber_z);

    let key_length =
        (s0_z + s1_z * (1.0 - h(phase_error)) - lambda_ec - sec.fixed_overhead_bits()).max(0.0);
    Ok(KeyReport {
        key_length,
        rate_per_pulse: key_length / n_s,
        pulses_sent: n_s,
        multi_photon_cap: None,
        secure_detections: s1_z,
        vacuum_detections: s0_z,
        phase_error_bound: phase_error,
        lambda_ec,
        qber_z,
        eps_consumed: est.consumed() + sec.eps_pa + sec.eps_ec,
    })
}

//! Stochastic realisations of one block.
//!
//! Counts are drawn per basis from binomials around the analytic
//! expectations, then passed through the same key-length calculation as
//! the expected statistics. Each repetition `k` uses a ChaCha8 stream seeded
//! with `seed + k`, so repetitions are independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finite_key::{sps_expected_tallies, sps_key_length, KeyReport, SpsSetup, TallySet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub setup: SpsSetup,
    pub seed: u64,
    pub repetitions: usize,
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions", "must be at least 1"));
        }
        self.setup.validate()
    }
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    let d = Binomial::new(n, p.clamp(0.0, 1.0))
        .map_err(|e| Error::invalid("binomial", e.to_string()))?;
    Ok(d.sample(rng))
}

fn to_trials(x: f64, name: &str) -> Result<u64> {
    if !(x >= 0.0) || x > u64::MAX as f64 {
        return Err(Error::invalid(
            name,
            format!("{x} is not a usable trial count"),
        ));
    }
    Ok(x.round() as u64)
}

/// Samples one block with the RNG seeded by `seed`.
pub fn sample_tallies(setup: &SpsSetup, seed: u64) -> Result<TallySet> {
    let (expected, _, stats) = sps_expected_tallies(setup)?;
    let p = &setup.protocol;
    let pulses = to_trials(expected.pulses_sent, "pulses_sent")?;
    let sifted_z = to_trials(pulses as f64 * p.q_z_tx * p.q_z_rx, "sifted_z")?;
    let sifted_x = to_trials(
        pulses as f64 * (1.0 - p.q_z_tx) * (1.0 - p.q_z_rx),
        "sifted_x",
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_z = binomial(sifted_z, stats.gain, &mut rng)?;
    let m_z = binomial(n_z, stats.qber, &mut rng)?;
    let n_x = binomial(sifted_x, stats.gain, &mut rng)?;
    let m_x = binomial(n_x, stats.qber, &mut rng)?;
    Ok(TallySet {
        pulses_sent: pulses as f64,
        z_detections: n_z as f64,
        x_detections: n_x as f64,
        z_errors: m_z as f64,
        x_errors: m_x as f64,
    })
}

/// One realisation using `spec.seed`.
pub fn simulate_trial(spec: &TrialSpec) -> Result<TallySet> {
    spec.validate()?;
    sample_tallies(&spec.setup, spec.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub tallies: TallySet,
    /// Distiller result; failures such as an insufficient block are kept.
    pub report: Result<KeyReport>,
}

impl TrialOutcome {
    pub fn rate(&self) -> Option<f64> {
        self.report.as_ref().ok().map(|r| r.rate_per_pulse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSummary {
    /// Over successful repetitions only.
    pub mean: f64,
    pub std_dev: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
    pub failures: usize,
    pub outcomes: Vec<TrialOutcome>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

/// Runs `spec.repetitions` blocks in parallel and summarises their rates.
pub fn simulate_rate_distribution(spec: &TrialSpec) -> Result<RateSummary> {
    spec.validate()?;
    let launched = spec.setup.launched_distribution()?;
    let outcomes: Vec<TrialOutcome> = (0..spec.repetitions as u64)
        .into_par_iter()
        .map(|k| {
            let seed = spec.seed.wrapping_add(k);
            let tallies = sample_tallies(&spec.setup, seed)?;
            let report = sps_key_length(
                &tallies,
                &launched,
                &spec.setup.protocol,
                &spec.setup.security,
            );
            Ok(TrialOutcome {
                seed,
                tallies,
                report,
            })
        })
        .collect::<Result<_>>()?;

    let mut rates: Vec<f64> = outcomes.iter().filter_map(TrialOutcome::rate).collect();
    let failures = outcomes.len() - rates.len();
    rates.sort_by(f64::total_cmp);
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let std_dev = if rates.len() > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RateSummary {
        mean,
        std_dev,
        p05: quantile(&rates, 0.05),
        median: quantile(&rates, 0.5),
        p95: quantile(&rates, 0.95),
        failures,
        outcomes,
    })
}

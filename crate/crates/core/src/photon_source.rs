//! Photon-number statistics of single-photon and weak-coherent sources.
//!
//! A [`PhotonNumberDistribution`] is the common currency passed between the
//! source, channel and key-length models. Single-photon sources are truncated
//! at two photons and parameterised by their mean photon number and g2(0);
//! weak coherent pulses are Poissonian with the tail folded into the last bin.

use crate::error::{Error, Result};

/// Default photon-number cutoff for Poissonian distributions.
pub const WCP_DEFAULT_CUTOFF: usize = 20;

const NORMALIZATION_TOL: f64 = 1e-12;

/// Probabilities of emitting `n = 0..=n_max` photons in one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
}

/// First two moments of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub g2: f64,
}

impl PhotonNumberDistribution {
    /// Builds a distribution from explicit probabilities. At least three
    /// entries (n_max >= 2) are required.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 3 {
            return Err(Error::invalid(
                "probs",
                format!("need n_max >= 2, got {} entries", probs.len()),
            ));
        }
        for (n, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::invalid(
                    "probs",
                    format!("p[{n}] = {p} lies outside [0, 1]"),
                ));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(
                "probs",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        Ok(Self { probs })
    }

    /// The vacuum state `{p0 = 1}` with the minimum cutoff.
    pub fn vacuum() -> Self {
        Self {
            probs: vec![1.0, 0.0, 0.0],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Probability of exactly `n` photons; zero beyond the cutoff.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Probability of two or more photons.
    pub fn multi_photon_prob(&self) -> f64 {
        self.probs.iter().skip(2).sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Mean photon number and zero-delay second-order correlation.
    pub fn moments(&self) -> Result<Moments> {
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::UndefinedG2);
        }
        let factorial_moment: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p)
            .sum();
        Ok(Moments {
            mean,
            g2: factorial_moment / (mean * mean),
        })
    }

    /// Binomial thinning of every photon-number component by the
    /// transmittance `t`. The cutoff is preserved.
    pub fn attenuate(&self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(
                "transmittance",
                format!("{t} lies outside [0, 1]"),
            ));
        }
        if t == 1.0 {
            return Ok(self.clone());
        }
        let n_max = self.n_max();
        let loss = 1.0 - t;
        let mut out = vec![0.0; n_max + 1];
        for (n, &p_n) in self.probs.iter().enumerate() {
            if p_n == 0.0 {
                continue;
            }
            let mut binom = 1.0;
            for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
                *slot += p_n * binom * t.powi(k as i32) * loss.powi((n - k) as i32);
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
        }
        Ok(Self { probs: out })
    }
}

/// Two-photon-truncated distribution of a single-photon source with mean
/// photon number `n_mean` and second-order correlation `g2`.
///
/// `p2 = g2·n²/2`, `p1 = n − 2·p2`, `p0 = 1 − p1 − p2`. The boundary
/// `g2·n = 1` (p1 = 0) is accepted.
pub fn sps_distribution(n_mean: f64, g2: f64) -> Result<PhotonNumberDistribution> {
    if !(n_mean > 0.0) || !n_mean.is_finite() {
        return Err(Error::invalid(
            "mean_photon_number",
            format!("{n_mean} must be positive"),
        ));
    }
    if !(g2 >= 0.0) || !g2.is_finite() {
        return Err(Error::invalid("g2", format!("{g2} must be non-negative")));
    }
    let x = g2 * n_mean;
    if x > 1.0 {
        return Err(Error::NonPhysicalSource(format!(
            "g2·<n> = {x} exceeds 1 (p1 would be negative)"
        )));
    }
    let p2 = 0.5 * g2 * n_mean * n_mean;
    let p1 = n_mean * (1.0 - x);
    let mut p0 = 1.0 - p1 - p2;
    if p0 < 0.0 && p0 > -1e-12 {
        // rounding at the lower physical edge of g2 for <n> > 1
        p0 = 0.0;
    }
    for (n, p) in [p0, p1, p2].into_iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::NonPhysicalSource(format!(
                "p{n} = {p} for <n> = {n_mean}, g2 = {g2}"
            )));
        }
    }
    Ok(PhotonNumberDistribution {
        probs: vec![p0, p1, p2],
    })
}

/// Poissonian distribution of mean `mu`, truncated at `n_max` with the tail
/// absorbed into the last entry.
pub fn wcp_distribution(mu: f64, n_max: usize) -> Result<PhotonNumberDistribution> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", format!("{mu} must be non-negative")));
    }
    if n_max < 2 {
        return Err(Error::invalid(
            "n_max",
            format!("{n_max} must be at least 2"),
        ));
    }
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut term = (-mu).exp();
    let mut head = 0.0;
    for k in 0..n_max {
        probs.push(term);
        head += term;
        term *= mu / (k + 1) as f64;
    }
    probs.push((1.0 - head).max(0.0));
    Ok(PhotonNumberDistribution { probs })
}

/// Which kind of transmitter a source describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    /// Quantum-dot style source, characterised by <n> and g2(0).
    Sps { mean_photon_number: f64, g2: f64 },
    /// Phase-randomised weak coherent pulse of mean intensity `mu`.
    Wcp { mu: f64 },
}

impl SourceSpec {
    pub fn mean_photon_number(&self) -> f64 {
        match *self {
            SourceSpec::Sps {
                mean_photon_number, ..
            } => mean_photon_number,
            SourceSpec::Wcp { mu } => mu,
        }
    }

    pub fn distribution(&self) -> Result<PhotonNumberDistribution> {
        match *self {
            SourceSpec::Sps {
                mean_photon_number,
                g2,
            } => sps_distribution(mean_photon_number, g2),
            SourceSpec::Wcp { mu } => wcp_distribution(mu, WCP_DEFAULT_CUTOFF),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lower_g2_edge_has_no_vacuum() {
        for n in [1.05, 1.3, 1.5, 1.77, 1.99] {
            let g2 = 2.0 * (n - 1.0) / (n * n);
            let d = sps_distribution(n, g2).unwrap();
            assert!(d.probs()[0] >= 0.0 && d.probs()[0] < 1e-12);
        }
        assert!(sps_distribution(1.5, 0.4).is_err());
    }

    /// Enumerates every subset of surviving photons explicitly.
    fn attenuate_by_enumeration(dist: &PhotonNumberDistribution, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; dist.n_max() + 1];
        for (n, &p) in dist.probs().iter().enumerate() {
            for mask in 0u32..(1 << n) {
                let survivors = mask.count_ones() as usize;
                let mut weight = 1.0;
                for bit in 0..n {
                    weight *= if mask & (1 << bit) != 0 { t } else { 1.0 - t };
                }
                out[survivors] += p * weight;
            }
        }
        out
    }

    #[test]
    fn sps_table_one_operating_point() {
        let d = sps_distribution(0.292, 0.00698).unwrap();
        assert_relative_eq!(d.prob(2), 2.975714e-4, max_relative = 1e-6);
        assert_relative_eq!(d.prob(1), 0.291404857, max_relative = 1e-9);
        assert_relative_eq!(d.prob(0), 0.708297571, max_relative = 1e-9);
    }

    #[test]
    fn sps_perfect_and_boundary() {
        let d = sps_distribution(1.0, 0.0).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0]);

        let d = sps_distribution(0.5, 2.0).unwrap();
        assert_relative_eq!(d.prob(0), 0.75, epsilon = 1e-15);
        assert_eq!(d.prob(1), 0.0);
        assert_relative_eq!(d.prob(2), 0.25, epsilon = 1e-15);
        let m = d.moments().unwrap();
        assert_relative_eq!(m.mean, 0.5, epsilon = 1e-14);
        assert_relative_eq!(m.g2, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sps_rejects_non_physical_pairs() {
        assert!(matches!(
            sps_distribution(0.5, 2.1),
            Err(Error::NonPhysicalSource(_))
        ));
        // p0 < 0 even though g2·<n> <= 1
        assert!(matches!(
            sps_distribution(1.5, 0.1),
            Err(Error::NonPhysicalSource(_))
        ));
        assert!(sps_distribution(0.0, 0.1).is_err());
        assert!(sps_distribution(0.3, -0.1).is_err());
    }

    #[test]
    fn wcp_poisson_values() {
        let d = wcp_distribution(1.0, 10).unwrap();
        assert_relative_eq!(d.prob(1), (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(d.prob(1), 0.367879, epsilon = 1e-6);

        let d = wcp_distribution(0.0, 10).unwrap();
        assert_eq!(d.prob(0), 1.0);
        assert!(d.probs()[1..].iter().all(|&p| p == 0.0));

        let d = wcp_distribution(0.5, 10).unwrap();
        assert_relative_eq!(d.prob(0), 0.606531, epsilon = 1e-6);
        assert_relative_eq!(d.prob(1), 0.303265, epsilon = 1e-6);
        assert_relative_eq!(d.prob(2), 0.075816, epsilon = 1e-6);
        assert!(wcp_distribution(0.5, 1).is_err());
    }

    #[test]
    fn wcp_g2_is_one() {
        let m = wcp_distribution(0.5, 40).unwrap().moments().unwrap();
        assert!((m.g2 - 1.0).abs() < 1e-9);
        assert!((m.mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vacuum_has_no_g2() {
        assert_eq!(
            PhotonNumberDistribution::vacuum().moments(),
            Err(Error::UndefinedG2)
        );
    }

    #[test]
    fn attenuate_identity_and_blocking() {
        let d = sps_distribution(0.292, 0.00698).unwrap();
        assert_eq!(d.attenuate(1.0).unwrap(), d);
        let blocked = d.attenuate(0.0).unwrap();
        assert_eq!(blocked.prob(0), 1.0);
        assert_eq!(blocked.multi_photon_prob(), 0.0);
        assert!(d.attenuate(1.2).is_err());
    }

    #[test]
    fn attenuate_halves_mean_keeps_g2() {
        let d = sps_distribution(0.292, 0.00698).unwrap();
        let m = d.attenuate(0.5).unwrap().moments().unwrap();
        assert_relative_eq!(m.mean, 0.146, epsilon = 1e-12);
        assert_relative_eq!(m.g2, 0.00698, epsilon = 1e-12);
    }

    #[test]
    fn rejects_malformed_explicit_distributions() {
        assert!(PhotonNumberDistribution::new(vec![0.5, 0.5]).is_err());
        assert!(PhotonNumberDistribution::new(vec![0.5, 0.4, 0.0]).is_err());
        assert!(PhotonNumberDistribution::new(vec![1.5, -0.5, 0.0]).is_err());
        assert!(PhotonNumberDistribution::new(vec![0.5, 0.25, 0.25]).is_ok());
    }

    fn arb_distribution() -> impl Strategy<Value = PhotonNumberDistribution> {
        prop::collection::vec(0.0f64..1.0, 3..=7).prop_filter_map("non-empty", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-3).then(|| {
                let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                let head: f64 = probs[1..].iter().sum();
                probs[0] = 1.0 - head;
                PhotonNumberDistribution { probs }
            })
        })
    }

    proptest! {
        #[test]
        fn sps_normalized_and_round_trips(n in 0.01f64..1.0, frac in 0.0f64..1.0) {
            // g2 ranges over the physical interval for this <n>
            let g_lo = (2.0 * (n - 1.0) / (n * n)).max(0.0);
            let g_hi = 1.0 / n;
            let g = g_lo + frac * (g_hi - g_lo);
            let d = sps_distribution(n, g).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let m = d.moments().unwrap();
            prop_assert!((m.mean - n).abs() <= 1e-12);
            prop_assert!((m.g2 - g).abs() <= 1e-12 * g.max(1.0));
        }

        #[test]
        fn wcp_normalized(mu in 0.0f64..3.0, n_max in 2usize..30) {
            let d = wcp_distribution(mu, n_max).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn attenuation_preserves_g2(d in arb_distribution(), t in 1e-3f64..=1.0) {
            prop_assume!(d.mean() > 1e-3);
            let before = d.moments().unwrap();
            let after = d.attenuate(t).unwrap();
            prop_assert!((after.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let m = after.moments().unwrap();
            prop_assert!((m.g2 - before.g2).abs() <= 1e-9 * before.g2.max(1.0));
            prop_assert!((m.mean - t * before.mean).abs() <= 1e-12);
        }

        #[test]
        fn attenuation_composes(d in arb_distribution(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let two_step = d.attenuate(t1).unwrap().attenuate(t2).unwrap();
            let one_step = d.attenuate(t1 * t2).unwrap();
            for (a, b) in two_step.probs().iter().zip(one_step.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn attenuation_matches_enumeration(d in arb_distribution(), t in 0.0f64..=1.0) {
            let fast = d.attenuate(t).unwrap();
            let slow = attenuate_by_enumeration(&d, t);
            for (a, b) in fast.probs().iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

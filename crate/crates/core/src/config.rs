//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, numbers may be written as
//! fractions (`11e-10/12`). Unknown or repeated keys are rejected. Every
//! validation failure names the offending key and, when the key was present
//! in the file, its line.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::channel::ChannelDetectorModel;
use crate::error::{Error, Result};
use crate::finite_key::{
    ComparisonSetup, DecoySettings, KeyMode, LossScan, ProtocolConfig, SecurityParams, SpsSetup,
    WcpSetup,
};
use crate::optimizer::GaSettings;
use crate::photon_source::SourceSpec;

pub const REQUIRED_KEYS: &[&str] = &[
    "clock_rate_hz",
    "mean_photon_number",
    "g2",
    "channel_loss_db",
    "fiber_optics_efficiency",
    "detection_efficiency",
    "dark_count_rate_cps",
    "gate_width_s",
    "misalignment_prob",
    "eps_pe",
    "eps_pa",
    "eps_ec",
    "eps_cor",
    "f_ec",
];

const OPTIONAL_KEYS: &[&str] = &[
    "source",
    "key_mode",
    "eta_qd",
    "eta_t",
    "q_z_tx",
    "q_z_rx",
    "block_size",
    "pre_attenuation",
    "wcp_mu_s",
    "wcp_mu_d",
    "wcp_p_s",
    "wcp_p_d",
    "wcp_q_z_tx",
    "wcp_transmitter_efficiency",
    "seed",
    "ga_population",
    "ga_generations",
    "ga_stagnation",
    "ga_tournament",
    "ga_crossover",
    "ga_mutation",
    "ga_sigma",
    "ga_elites",
    "scan_min_db",
    "scan_max_db",
    "scan_step_db",
];

/// Everything a run needs, fully validated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub clock_rate_hz: f64,
    pub source: SourceSpec,
    pub channel: ChannelDetectorModel,
    pub protocol: ProtocolConfig,
    pub security: SecurityParams,
    /// Transmitter budget, used only by [`ExperimentConfig::consistency`].
    pub eta_qd: Option<f64>,
    pub eta_t: Option<f64>,
    pub decoy: DecoySettings,
    pub wcp_transmitter_efficiency: f64,
    pub seed: u64,
    pub ga: GaSettings,
    pub scan: LossScan,
}

/// Agreement between the transmitter budget and the mean photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub budget_product: f64,
    pub mean_photon_number: f64,
    pub relative_deviation: f64,
    pub consistent: bool,
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "eta_qd*eta_t = {:.4} vs <n> = {:.4} ({:+.2}%): {}",
            self.budget_product,
            self.mean_photon_number,
            100.0 * self.relative_deviation,
            if self.consistent {
                "consistent"
            } else {
                "INCONSISTENT"
            }
        )
    }
}

impl ExperimentConfig {
    pub fn sps_setup(&self) -> SpsSetup {
        SpsSetup {
            source: self.source,
            channel: self.channel,
            protocol: self.protocol,
            security: self.security,
        }
    }

    pub fn wcp_setup(&self) -> WcpSetup {
        WcpSetup {
            decoy: self.decoy,
            channel: self.channel,
            q_z_rx: self.protocol.q_z_rx,
            transmitter_efficiency: self.wcp_transmitter_efficiency,
            mode: self.protocol.mode,
            security: self.security,
        }
    }

    pub fn comparison_setup(&self) -> ComparisonSetup {
        ComparisonSetup {
            sps: self.sps_setup(),
            wcp: self.wcp_setup(),
            ga: self.ga,
            scan: self.scan,
        }
    }

    /// `eta_qd · eta_t` against `<n>`, agreeing within 1%. `None` unless
    /// both budget entries are given.
    pub fn consistency(&self) -> Option<ConsistencyReport> {
        let product = self.eta_qd? * self.eta_t?;
        let mean = self.source.mean_photon_number();
        let relative_deviation = (product - mean) / mean;
        Some(ConsistencyReport {
            budget_product: product,
            mean_photon_number: mean,
            relative_deviation,
            consistent: relative_deviation.abs() <= 0.01,
        })
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

struct Entry {
    value: String,
    line: usize,
}

struct Entries(HashMap<String, Entry>);

fn parse_number(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((num, den)) => num.trim().parse::<f64>().ok()? / den.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

impl Entries {
    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|e| e.line)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Validation {
            key: key.to_string(),
            line: self.line(key),
            message: message.into(),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => parse_number(&e.value)
                .map(Some)
                .ok_or_else(|| Error::Parse {
                    line: e.line,
                    message: format!("`{key}`: `{}` is not a number", e.value),
                }),
        }
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| self.fail(key, "required key is missing"))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        match self.number(key)? {
            None => Ok(default),
            Some(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(v) => Err(self.fail(key, format!("{v} is not a non-negative integer"))),
        }
    }

    /// Attaches key and line to an error raised by a component validator.
    fn locate(&self, err: Error) -> Error {
        let key = |name: &str| -> String {
            match name {
                "dark_count_rate" => "dark_count_rate_cps",
                "gate_width" => "gate_width_s",
                "mu" | "mu_signal" => "wcp_mu_s",
                "mu_decoy" => "wcp_mu_d",
                "p_signal" => "wcp_p_s",
                "p_decoy" | "p_vacuum" => "wcp_p_d",
                "transmitter_efficiency" => "wcp_transmitter_efficiency",
                "population_size" => "ga_population",
                "tournament_size" => "ga_tournament",
                "crossover_prob" => "ga_crossover",
                "mutation_prob" => "ga_mutation",
                "mutation_sigma_fraction" => "ga_sigma",
                "loss_scan" => "scan_min_db",
                other => other,
            }
            .to_string()
        };
        match err {
            Error::InvalidParameter { name, reason } => {
                let k = key(&name);
                self.fail(&k, reason)
            }
            Error::NonPhysicalSource(msg) => self.fail("g2", format!("NonPhysicalSource: {msg}")),
            Error::RateTooHigh(p) => self.fail(
                "dark_count_rate_cps",
                format!("dark count probability per gate {p} must be below 1"),
            ),
            other => other,
        }
    }
}

/// Parses configuration text; see the module docs for the format.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        }
        if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
            return Err(Error::Validation {
                key,
                line: Some(line),
                message: "unknown key".to_string(),
            });
        }
        if let Some(prev) = map.get(&key).map(|e: &Entry| e.line) {
            return Err(Error::Validation {
                key,
                line: Some(line),
                message: format!("duplicate key, first set on line {prev}"),
            });
        }
        map.insert(key, Entry { value, line });
    }
    let e = Entries(map);

    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !e.0.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Validation {
            key: missing[0].to_string(),
            line: None,
            message: format!("missing required keys: {}", missing.join(", ")),
        });
    }
    build(&e).map_err(|err| e.locate(err))
}

fn build(e: &Entries) -> Result<ExperimentConfig> {
    let clock_rate_hz = e.required("clock_rate_hz")?;
    if !(clock_rate_hz > 0.0) {
        return Err(e.fail("clock_rate_hz", "must be positive"));
    }
    let mean_photon_number = e.required("mean_photon_number")?;
    let g2 = e.required("g2")?;
    let source = match e.text("source").unwrap_or("sps") {
        "sps" => SourceSpec::Sps {
            mean_photon_number,
            g2,
        },
        "wcp" => SourceSpec::Wcp {
            mu: mean_photon_number,
        },
        other => return Err(e.fail("source", format!("`{other}` is neither `sps` nor `wcp`"))),
    };
    source.distribution()?;

    let channel = ChannelDetectorModel {
        channel_loss_db: e.required("channel_loss_db")?,
        fiber_optics_efficiency: e.required("fiber_optics_efficiency")?,
        detection_efficiency: e.required("detection_efficiency")?,
        dark_count_rate: e.required("dark_count_rate_cps")?,
        gate_width: e.required("gate_width_s")?,
        misalignment_prob: e.required("misalignment_prob")?,
    };
    channel.validate()?;

    let mode = match e.text("key_mode").unwrap_or("finite") {
        "finite" => KeyMode::Finite {
            block_size: e.or("block_size", 1e8)?,
        },
        "asymptotic" => KeyMode::Asymptotic,
        other => {
            return Err(e.fail(
                "key_mode",
                format!("`{other}` is neither `finite` nor `asymptotic`"),
            ))
        }
    };
    let protocol = ProtocolConfig {
        q_z_tx: e.or("q_z_tx", 0.9)?,
        q_z_rx: e.or("q_z_rx", 0.9)?,
        pre_attenuation: e.or("pre_attenuation", 1.0)?,
        mode,
    };
    protocol.validate()?;

    let security = SecurityParams {
        eps_pe: e.required("eps_pe")?,
        eps_pa: e.required("eps_pa")?,
        eps_ec: e.required("eps_ec")?,
        eps_cor: e.required("eps_cor")?,
        f_ec: e.required("f_ec")?,
    };
    security.validate()?;

    let decoy = DecoySettings {
        mu_signal: e.or("wcp_mu_s", 0.5)?,
        mu_decoy: e.or("wcp_mu_d", 0.1)?,
        p_signal: e.or("wcp_p_s", 0.8)?,
        p_decoy: e.or("wcp_p_d", 0.15)?,
        q_z_tx: e.or("wcp_q_z_tx", protocol.q_z_tx)?,
    };
    decoy.validate()?;
    let wcp_transmitter_efficiency = e.or("wcp_transmitter_efficiency", 1.0)?;
    if !(wcp_transmitter_efficiency > 0.0 && wcp_transmitter_efficiency <= 1.0) {
        return Err(e.fail("wcp_transmitter_efficiency", "must lie in (0, 1]"));
    }

    let budget = |key: &str| -> Result<Option<f64>> {
        match e.number(key)? {
            Some(v) if !(0.0..=1.0).contains(&v) => {
                Err(e.fail(key, format!("{v} lies outside [0, 1]")))
            }
            v => Ok(v),
        }
    };
    let eta_qd = budget("eta_qd")?;
    let eta_t = budget("eta_t")?;

    let seed = e.count("seed", 1)? as u64;
    let d = GaSettings::default();
    let ga = GaSettings {
        population_size: e.count("ga_population", d.population_size)?,
        max_generations: e.count("ga_generations", d.max_generations)?,
        stagnation_limit: e.count("ga_stagnation", d.stagnation_limit)?,
        tournament_size: e.count("ga_tournament", d.tournament_size)?,
        crossover_prob: e.or("ga_crossover", d.crossover_prob)?,
        mutation_prob: e.or("ga_mutation", d.mutation_prob)?,
        mutation_sigma_fraction: e.or("ga_sigma", d.mutation_sigma_fraction)?,
        elite_count: e.count("ga_elites", d.elite_count)?,
        seed,
    };
    ga.validate()?;

    let ds = LossScan::default();
    let scan = LossScan {
        min_db: e.or("scan_min_db", ds.min_db)?,
        max_db: e.or("scan_max_db", ds.max_db)?,
        step_db: e.or("scan_step_db", ds.step_db)?,
        tolerance_db: ds.tolerance_db,
    };
    scan.losses()?;

    Ok(ExperimentConfig {
        clock_rate_hz,
        source,
        channel,
        protocol,
        security,
        eta_qd,
        eta_t,
        decoy,
        wcp_transmitter_efficiency,
        seed,
        ga,
        scan,
    })
}

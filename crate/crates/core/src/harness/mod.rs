//! Scenario runner behind the command-line tool.
//!
//! A [`ScenarioConfig`] names one scripted protocol run or Monte Carlo game;
//! [`run_scenario`] executes it deterministically from the seed and returns
//! a [`Report`] that serializes to JSON with sorted keys.

mod scenarios;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banknote::NoteParams;
use crate::hashsig::{hash, DIGEST_LEN, MAX_DEPTH};
use crate::otm::OtmParams;
use crate::qsim::QubitStore;
use crate::stats::Frequency;

pub const SCENARIOS: [&str; 9] = [
    "honest-chain",
    "double-spend-classical-copy",
    "premeasure-adversary",
    "otm-both-secrets",
    "forgery-game",
    "qtds-notary",
    "qtds-bet",
    "conjugate-coding-stat",
    "noise-sweep",
];

pub fn list_scenarios() -> Vec<&'static str> {
    SCENARIOS.to_vec()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("scenario aborted: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    pub zeta: usize,
    pub xi: usize,
    pub n_otm: usize,
    pub delta: f64,
    pub noise_p: f64,
    pub kappa_len: usize,
    pub digest_len: usize,
    pub merkle_depth: u8,
    /// Scenario-specific default when absent.
    pub trials: Option<u64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "honest-chain".into(),
            seed: 1,
            zeta: 128,
            xi: 16,
            n_otm: 256,
            delta: 0.2,
            noise_p: 0.05,
            kappa_len: 128,
            digest_len: DIGEST_LEN,
            merkle_depth: 12,
            trials: None,
        }
    }
}

impl ScenarioConfig {
    pub fn for_scenario(name: &str) -> Self {
        Self {
            scenario: name.into(),
            ..Self::default()
        }
    }

    pub fn note_params(&self) -> NoteParams {
        NoteParams {
            zeta: self.zeta,
            xi: self.xi,
            kappa_len: self.kappa_len,
            otm: OtmParams {
                n_otm: self.n_otm,
                delta: self.delta,
                secret_len: self.kappa_len,
            },
        }
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or_else(|| scenarios::default_trials(&self.scenario))
    }

    /// Notes one trial of the scenario draws from the configured mint key.
    fn notes_per_trial(&self) -> u64 {
        match self.scenario.as_str() {
            "honest-chain" => 2,
            "qtds-notary" => scenarios::NOTARY_TOKENS as u64,
            "qtds-bet" => 2 * self.trials(),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(HarnessError::UnknownScenario(self.scenario.clone()));
        }
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.xi == 0 || self.xi >= self.zeta {
            return bad(format!(
                "need 0 < xi < zeta, got xi = {}, zeta = {}",
                self.xi, self.zeta
            ));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return bad(format!("delta = {} must lie in [0, 0.5)", self.delta));
        }
        if !(self.noise_p >= 0.0 && self.noise_p < self.delta) {
            return bad(format!(
                "noise_p = {} must lie in [0, delta = {})",
                self.noise_p, self.delta
            ));
        }
        if self.digest_len != DIGEST_LEN {
            return bad(format!("digest_len must be {DIGEST_LEN}"));
        }
        if self.merkle_depth == 0 || self.merkle_depth > MAX_DEPTH {
            return bad(format!("merkle_depth must lie in 1..={MAX_DEPTH}"));
        }
        if self.trials() == 0 {
            return bad("trials must be positive".into());
        }
        self.note_params().validate().or_else(|e| bad(e.to_string()))?;
        let needed = self.note_params().signatures_per_note() * self.notes_per_trial();
        if needed > 1u64 << self.merkle_depth {
            return bad(format!(
                "scenario needs {needed} mint signatures but depth {} allows {}",
                self.merkle_depth,
                1u64 << self.merkle_depth
            ));
        }
        Ok(())
    }
}

/// An empirical frequency with its 95% Wilson interval and, where known,
/// the exact value it estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyEntry {
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub ci95: (f64, f64),
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QubitAccounting {
    pub prepared: u64,
    pub measured: u64,
    pub live: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub trials: u64,
    pub config: ScenarioConfig,
    pub counts: BTreeMap<String, u64>,
    pub frequencies: BTreeMap<String, FrequencyEntry>,
    pub qubits: QubitAccounting,
    /// Byte-valued outputs, lowercase hex.
    pub values: BTreeMap<String, String>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    pub wall_clock_ms: u64,
}

impl Report {
    fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario: config.scenario.clone(),
            seed: config.seed,
            trials: config.trials(),
            config: config.clone(),
            counts: BTreeMap::new(),
            frequencies: BTreeMap::new(),
            qubits: QubitAccounting::default(),
            values: BTreeMap::new(),
            assertions: Vec::new(),
            passed: true,
            wall_clock_ms: 0,
        }
    }

    pub(crate) fn count(&mut self, key: impl Into<String>, n: u64) {
        *self.counts.entry(key.into()).or_insert(0) += n;
    }

    pub(crate) fn frequency(&mut self, key: impl Into<String>, f: Frequency, expected: Option<f64>) {
        self.frequencies.insert(
            key.into(),
            FrequencyEntry {
                hits: f.hits,
                trials: f.trials,
                rate: f.rate(),
                ci95: f.wilson(1.96),
                expected,
            },
        );
    }

    pub(crate) fn value(&mut self, key: impl Into<String>, bytes: &[u8]) {
        self.values.insert(key.into(), hex::encode(bytes));
    }

    pub(crate) fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub(crate) fn absorb(&mut self, store: &QubitStore) {
        self.qubits.prepared += store.prepared_count();
        self.qubits.measured += store.measurement_count();
        self.qubits.live += store.live_count() as u64;
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is plain data");
        serde_json::to_string_pretty(&value).expect("report is plain data")
    }

    /// JSON without the wall-clock field; identical for identical configs.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("report is plain data");
        value
            .as_object_mut()
            .expect("report is an object")
            .remove("wall_clock_ms");
        serde_json::to_string_pretty(&value).expect("report is plain data")
    }

    pub fn failed_assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

/// Independent per-trial seed.
pub(crate) fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut input = [0u8; 16];
    input[..8].copy_from_slice(&seed.to_be_bytes());
    input[8..].copy_from_slice(&trial.to_be_bytes());
    let d = hash(&input);
    u64::from_be_bytes(d.0[..8].try_into().expect("8 bytes"))
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Report, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut report = Report::new(config);
    scenarios::run(config, &mut report)?;
    report.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ScenarioConfig::default().validate().is_ok());
        let reject = |f: fn(&mut ScenarioConfig)| {
            let mut c = ScenarioConfig::default();
            f(&mut c);
            c.validate().unwrap_err()
        };
        assert!(matches!(reject(|c| c.xi = 128), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.delta = 0.5), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.noise_p = 0.2), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.kappa_len = 100), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.digest_len = 64), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.merkle_depth = 8), HarnessError::InvalidConfig(_)));
        assert!(matches!(reject(|c| c.trials = Some(0)), HarnessError::InvalidConfig(_)));
        assert_eq!(
            reject(|c| c.scenario = "nope".into()),
            HarnessError::UnknownScenario("nope".into())
        );
    }

    #[test]
    fn registry_is_stable() {
        let names = list_scenarios();
        assert!(names.len() >= 9);
        assert_eq!(names, list_scenarios());
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(3, 4), trial_seed(3, 4));
    }
}

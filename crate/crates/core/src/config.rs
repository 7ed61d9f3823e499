//! Run configuration with total validation.

use serde::{Deserialize, Serialize};

use crate::beamselect::ScenarioMode;
use crate::codebook::ArrayDims;
use crate::error::{Error, Result};
use crate::signal::EstimatorModel;

/// Everything a simulation run depends on. Missing JSON keys take the
/// defaults of [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label copied into result tables.
    pub config_id: String,
    pub reference_frequency_hz: f64,
    pub center_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Element spacing in wavelengths at the reference frequency.
    pub element_spacing: f64,
    pub num_subcarriers: usize,
    pub pilot_subcarriers: usize,
    pub training_length: usize,
    pub m_ap: usize,
    pub m_ue: usize,
    pub m_sub: usize,
    pub n_rf: usize,
    pub users: usize,
    /// Relative path powers in dB; the length sets the number of paths.
    pub power_profile_db: Vec<f64>,
    /// Adjacent-element coupling power in dB; `null` disables coupling.
    pub coupling_db: Option<f64>,
    pub snr_db: Vec<f64>,
    /// Channel realizations for BSER and misalignment loss.
    pub realizations: usize,
    /// Leading realizations that also get full-band rate evaluation.
    pub rate_realizations: usize,
    pub seed: u64,
    pub mode: ScenarioMode,
    pub estimator: EstimatorModel,
    /// Build the digital precoder from the true equivalent channel on every
    /// subcarrier instead of pilot estimates.
    pub genie_csi: bool,
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            config_id: "default".into(),
            reference_frequency_hz: 60e9,
            center_frequency_hz: 58.32e9,
            subcarrier_spacing_hz: 5.15625e6,
            element_spacing: 0.5,
            num_subcarriers: 512,
            pilot_subcarriers: 16,
            training_length: 64,
            m_ap: 16,
            m_ue: 16,
            m_sub: 8,
            n_rf: 4,
            users: 1,
            power_profile_db: vec![0.0],
            coupling_db: Some(-20.0),
            snr_db: default_snr_grid(),
            realizations: 10_000,
            rate_realizations: 200,
            seed: 1,
            mode: ScenarioMode::Full,
            estimator: EstimatorModel::SufficientStatistic,
            genie_csi: false,
            output_dir: None,
        }
    }
}

/// `-10, -5, …, 40` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect()
}

/// Parses `start:step:stop` (inclusive stop) or a single value.
pub fn parse_snr_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::config(format!("bad number '{s}' in SNR range '{spec}'")))
    };
    match parts.as_slice() {
        [v] => Ok(vec![num(v)?]),
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if step <= 0.0 || b < a {
                return Err(Error::config(format!(
                    "SNR range '{spec}' needs a positive step and stop ≥ start"
                )));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 10_000 {
                return Err(Error::config(format!("SNR range '{spec}' has too many points")));
            }
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => Err(Error::config(format!(
            "SNR range '{spec}' must be start:step:stop or a single value"
        ))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid configuration JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn dims(&self) -> ArrayDims {
        ArrayDims {
            m_ap: self.m_ap,
            n_rf: self.n_rf,
            m_ue: self.m_ue,
            m_sub: self.m_sub,
        }
    }

    /// Every violated constraint, each as its own message.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                d.push(msg);
            }
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        need(pos(self.reference_frequency_hz), "reference_frequency_hz must be positive".into());
        need(pos(self.center_frequency_hz), "center_frequency_hz must be positive".into());
        need(pos(self.subcarrier_spacing_hz), "subcarrier_spacing_hz must be positive".into());
        need(pos(self.element_spacing), "element_spacing must be positive".into());
        need(self.num_subcarriers >= 1, "num_subcarriers must be at least 1".into());
        let lowest = self.center_frequency_hz - (self.num_subcarriers as f64 / 2.0) * self.subcarrier_spacing_hz;
        need(
            lowest > 0.0 || self.num_subcarriers == 0,
            format!("lowest subcarrier frequency {lowest} Hz must be positive"),
        );
        need(
            (1..=self.num_subcarriers.max(1)).contains(&self.pilot_subcarriers),
            format!(
                "pilot_subcarriers = {} must lie in 1..=num_subcarriers ({})",
                self.pilot_subcarriers, self.num_subcarriers
            ),
        );
        need(self.training_length >= 1, "training_length must be at least 1".into());
        need(self.m_ap >= 1, "m_ap must be at least 1".into());
        need(self.n_rf >= 1, "n_rf must be at least 1".into());
        need(
            self.n_rf == 0 || self.m_ap.is_multiple_of(self.n_rf),
            format!("n_rf = {} must divide m_ap = {}", self.n_rf, self.m_ap),
        );
        need(self.m_ue >= 1, "m_ue must be at least 1".into());
        need(self.users >= 1, "users must be at least 1".into());
        need(
            self.users <= self.n_rf,
            format!("users = {} exceeds n_rf = {}", self.users, self.n_rf),
        );
        need(
            self.users <= self.m_ap,
            format!("users = {} exceeds m_ap = {} (fully digital BD)", self.users, self.m_ap),
        );
        match self.mode {
            ScenarioMode::Full => {
                let ok = self.m_sub >= 1
                    && self.m_sub <= self.m_ue
                    && self.m_ue.is_multiple_of(self.m_sub)
                    && (self.m_ue / self.m_sub).is_multiple_of(2);
                need(
                    ok,
                    format!(
                        "m_ue/m_sub must be a positive even integer in full mode (m_ue = {}, m_sub = {})",
                        self.m_ue, self.m_sub
                    ),
                );
            }
            ScenarioMode::SingleUserExhaustiveSta => {
                need(self.users == 1, format!("{} mode needs users = 1", self.mode.name()));
            }
            ScenarioMode::SingleAntennaSta => {
                need(self.m_ue == 1, format!("{} mode needs m_ue = 1", self.mode.name()));
            }
        }
        need(!self.power_profile_db.is_empty(), "power_profile_db needs at least one path".into());
        need(
            self.power_profile_db.iter().all(|p| p.is_finite()),
            "power_profile_db entries must be finite".into(),
        );
        if let Some(c) = self.coupling_db {
            need(c.is_finite(), "coupling_db must be finite or null".into());
        }
        need(!self.snr_db.is_empty(), "snr_db needs at least one point".into());
        need(self.snr_db.iter().all(|s| s.is_finite()), "snr_db entries must be finite".into());
        need(self.realizations >= 1, "realizations must be at least 1".into());
        need(
            self.rate_realizations <= self.realizations,
            format!(
                "rate_realizations = {} exceeds realizations = {}",
                self.rate_realizations, self.realizations
            ),
        );
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(d))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        assert!(c.validate().is_ok(), "{:?}", c.diagnostics());
        assert_eq!(c.snr_db.len(), 11);
    }

    #[test]
    fn json_round_trip_and_partial_input() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
        let p = RunConfig::from_json(r#"{"m_ap": 32, "mode": "single_antenna_sta", "m_ue": 1}"#).unwrap();
        assert_eq!((p.m_ap, p.m_ue, p.mode), (32, 1, ScenarioMode::SingleAntennaSta));
        assert!(p.validate().is_ok());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn itemized_diagnostics() {
        let c = RunConfig {
            m_sub: 6,
            n_rf: 5,
            users: 6,
            realizations: 0,
            ..RunConfig::default()
        };
        let d = c.diagnostics();
        assert!(d.iter().any(|m| m.contains("n_rf = 5 must divide")));
        assert!(d.iter().any(|m| m.contains("even integer")));
        assert!(d.iter().any(|m| m.contains("users = 6 exceeds n_rf")));
        assert!(d.iter().any(|m| m.contains("realizations must be")));
    }

    #[test]
    fn snr_ranges() {
        assert_eq!(parse_snr_range("-10:5:40").unwrap(), default_snr_grid());
        assert_eq!(parse_snr_range("20").unwrap(), vec![20.0]);
        assert_eq!(parse_snr_range("0:3:10").unwrap(), vec![0.0, 3.0, 6.0, 9.0]);
        assert!(parse_snr_range("0:0:10").is_err());
        assert!(parse_snr_range("a:1:2").is_err());
        assert!(parse_snr_range("1:2").is_err());
    }
}

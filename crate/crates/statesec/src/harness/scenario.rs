//! Scenario files: the single configuration surface for simulations.
//!
//! A scenario is a versioned TOML document:
//!
//! ```toml
//! version = 1
//!
//! [system]
//! a      = [[1.2, 0.0], [0.0, 0.7]]
//! q      = [[1.0, 0.8], [0.8, 1.0]]
//! sigma0 = [[1.0, 0.8], [0.8, 1.0]]
//!
//! [channel]
//! p11 = 0.7   # P(user receives, eavesdropper intercepts)
//! p10 = 0.1   # P(user receives, eavesdropper misses) — the critical event
//! p01 = 0.1
//! p00 = 0.1
//! # ack_mode = "lossy"              # default "reliable"
//! # p_ack = 0.9                     # required when lossy
//! # force_critical_at_zero = true   # default false
//!
//! [code]
//! variant = "full"   # or "diagonal_baseline" / "passthrough"
//!
//! [run]
//! horizon = 120
//! trials = 500
//! base_seed = 7
//! ```
//!
//! Matrices are row-major nested arrays. Loading validates the system, the
//! channel probabilities, and the run parameters; anything malformed is a
//! `BadScenario` with the offending field named.

use std::path::Path;

use serde::Deserialize;

use crate::channel::ChannelModel;
use crate::codec::CodeVariant;
use crate::error::{Error, Result};
use crate::matops::Mat;
use crate::sysmodel::{validate_system, PartitionedSystem};

/// A validated experiment configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sys: PartitionedSystem,
    pub channel: ChannelModel,
    pub variant: CodeVariant,
    pub horizon: usize,
    pub trials: usize,
    pub base_seed: u64,
}

impl Scenario {
    /// Build a scenario programmatically. Unlike file loading, a zero
    /// horizon is allowed (a single-step record is well-defined).
    pub fn new(
        sys: PartitionedSystem,
        channel: ChannelModel,
        variant: CodeVariant,
        horizon: usize,
        trials: usize,
        base_seed: u64,
    ) -> Result<Scenario> {
        channel.validate()?;
        if trials == 0 {
            return Err(Error::BadScenario("trials must be at least 1".into()));
        }
        Ok(Scenario {
            sys,
            channel,
            variant,
            horizon,
            trials,
            base_seed,
        })
    }

    /// Acknowledgments can be lost, so packets resolve their reference time
    /// in-band instead of assuming decoder/sensor synchrony.
    pub fn lossy_acks(&self) -> bool {
        self.channel.p_ack < 1.0
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::BadScenario(format!("parse failure: {e}")))?;
        file.build()
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    system: SystemSection,
    channel: ChannelSection,
    code: CodeSection,
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    a: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    sigma0: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    p11: f64,
    p10: f64,
    p01: f64,
    p00: f64,
    ack_mode: Option<String>,
    p_ack: Option<f64>,
    #[serde(default)]
    force_critical_at_zero: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeSection {
    variant: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    horizon: usize,
    trials: usize,
    base_seed: u64,
}

impl ScenarioFile {
    fn build(self) -> Result<Scenario> {
        if self.version != 1 {
            return Err(Error::BadScenario(format!(
                "unsupported scenario version {} (this build reads version 1)",
                self.version
            )));
        }
        let a = nested_to_mat(&self.system.a, "system.a")?;
        let q = nested_to_mat(&self.system.q, "system.q")?;
        let sigma0 = nested_to_mat(&self.system.sigma0, "system.sigma0")?;
        let sys = validate_system(&a, &q, &sigma0)?;

        let p_ack = match self.channel.ack_mode.as_deref() {
            None | Some("reliable") => {
                if let Some(p) = self.channel.p_ack {
                    if p != 1.0 {
                        return Err(Error::BadScenario(
                            "channel.p_ack below 1 requires ack_mode = \"lossy\"".into(),
                        ));
                    }
                }
                1.0
            }
            Some("lossy") => self.channel.p_ack.ok_or_else(|| {
                Error::BadScenario("ack_mode = \"lossy\" requires channel.p_ack".into())
            })?,
            Some(other) => {
                return Err(Error::BadScenario(format!(
                    "unknown ack_mode {other:?} (expected reliable or lossy)"
                )))
            }
        };
        let channel = ChannelModel {
            p11: self.channel.p11,
            p10: self.channel.p10,
            p01: self.channel.p01,
            p00: self.channel.p00,
            p_ack,
            force_critical_at_zero: self.channel.force_critical_at_zero,
        };
        channel.validate()?;

        let variant: CodeVariant = self
            .code
            .variant
            .parse()
            .map_err(|e: Error| Error::BadScenario(e.to_string()))?;

        if self.run.horizon == 0 {
            return Err(Error::BadScenario("run.horizon must be at least 1".into()));
        }
        if self.run.trials == 0 {
            return Err(Error::BadScenario("run.trials must be at least 1".into()));
        }
        Ok(Scenario {
            sys,
            channel,
            variant,
            horizon: self.run.horizon,
            trials: self.run.trials,
            base_seed: self.run.base_seed,
        })
    }
}

fn nested_to_mat(rows: &[Vec<f64>], field: &str) -> Result<Mat> {
    if rows.is_empty() {
        return Err(Error::BadScenario(format!("{field} is empty")));
    }
    let n = rows.len();
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::BadScenario(format!(
            "{field} rows have uneven lengths"
        )));
    }
    if width != n {
        return Err(Error::BadScenario(format!(
            "{field} is {n}x{width}, expected square"
        )));
    }
    let mut m = Mat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
version = 1

[system]
a      = [[1.2, 0.0], [0.0, 0.7]]
q      = [[1.0, 0.8], [0.8, 1.0]]
sigma0 = [[1.0, 0.8], [0.8, 1.0]]

[channel]
p11 = 0.7
p10 = 0.1
p01 = 0.1
p00 = 0.1

[code]
variant = "full"

[run]
horizon = 120
trials = 500
base_seed = 7
"#;

    #[test]
    fn loads_the_demo_scenario() {
        let s = Scenario::from_toml_str(DEMO).unwrap();
        assert_eq!(s.sys.n(), 2);
        assert_eq!(s.sys.n_u(), 1);
        assert_eq!(s.variant, CodeVariant::Full);
        assert_eq!(s.horizon, 120);
        assert_eq!(s.trials, 500);
        assert!(!s.lossy_acks());
        assert!(!s.channel.force_critical_at_zero);
    }

    #[test]
    fn rejects_wrong_version() {
        let text = DEMO.replace("version = 1", "version = 2");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::BadScenario(_))
        ));
    }

    #[test]
    fn rejects_nonsquare_matrix() {
        let text = DEMO.replace("a      = [[1.2, 0.0], [0.0, 0.7]]", "a      = [[1.2, 0.0]]");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("system.a"), "got {err}");
    }

    #[test]
    fn rejects_bad_probabilities() {
        let text = DEMO.replace("p11 = 0.7", "p11 = 0.9");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::BadProbabilities(_))
        ));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = format!("{DEMO}\n[extra]\nx = 1\n");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::BadScenario(_))
        ));
    }

    #[test]
    fn lossy_mode_requires_and_uses_p_ack() {
        let text = DEMO.replace("p00 = 0.1", "p00 = 0.1\nack_mode = \"lossy\"\np_ack = 0.9");
        let s = Scenario::from_toml_str(&text).unwrap();
        assert!(s.lossy_acks());
        assert_eq!(s.channel.p_ack, 0.9);

        let text = DEMO.replace("p00 = 0.1", "p00 = 0.1\nack_mode = \"lossy\"");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::BadScenario(_))
        ));

        let text = DEMO.replace("p00 = 0.1", "p00 = 0.1\np_ack = 0.9");
        assert!(matches!(
            Scenario::from_toml_str(&text),
            Err(Error::BadScenario(_))
        ));
    }

    #[test]
    fn rejects_zero_horizon_or_trials_in_files() {
        let text = DEMO.replace("horizon = 120", "horizon = 0");
        assert!(Scenario::from_toml_str(&text).is_err());
        let text = DEMO.replace("trials = 500", "trials = 0");
        assert!(Scenario::from_toml_str(&text).is_err());
    }
}

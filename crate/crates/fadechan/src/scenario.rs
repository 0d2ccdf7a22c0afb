//! Scenario files: JSON descriptions of a channel, aperture, model choice,
//! corrections, and sampling plan. Unknown keys are rejected; missing keys
//! fall back to the reference configuration (800 nm, 2 cm transmitter spot,
//! Cn2 = 1e-14 m^{-2/3}, 1 km path, 6-inch Cassegrain radii).

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::aperture::ApertureGeometry;
use crate::error::{Error, Result};
use crate::pdt::{CorrectionSettings, ModelKind};
use crate::turbulence::{ChannelParams, QmcBudget};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Wavelength in meters.
    pub wavelength: f64,
    /// Transmitter beam-spot radius in meters.
    pub w0: f64,
    /// Refractive-index structure constant, m^{-2/3}.
    pub cn2: f64,
    /// Path length in meters.
    pub length: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            wavelength: 800e-9,
            w0: 0.02,
            cn2: 1e-14,
            length: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApertureSection {
    /// Outer aperture radius, meters.
    pub a1: f64,
    /// Inner obscuration radius, meters.
    pub a2: f64,
    /// Aim-point offset magnitude, meters.
    pub d0: f64,
}

impl Default for ApertureSection {
    fn default() -> Self {
        ApertureSection {
            a1: 0.075,
            a2: 0.023,
            d0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionsSection {
    /// Residual-to-free beam-wandering ratio in (0, 1].
    pub tracking_ratio: f64,
    /// Deterministic attenuation in dB (>= 0); converted to a transmission
    /// factor at load time.
    pub loss_db: f64,
}

impl Default for CorrectionsSection {
    fn default() -> Self {
        CorrectionsSection {
            tracking_ratio: 1.0,
            loss_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QmcSection {
    pub n_4d: u64,
    pub n_10d: u64,
    pub replicates: u32,
    pub window_scale: f64,
}

impl Default for QmcSection {
    fn default() -> Self {
        let b = QmcBudget::default();
        QmcSection {
            n_4d: b.n_4d,
            n_10d: b.n_10d,
            replicates: b.replicates,
            window_scale: b.window_scale,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub n_samples: u64,
    pub bins: usize,
    pub seed: u64,
    pub qmc: QmcSection,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            n_samples: 1_000_000,
            bins: 200,
            seed: 1,
            qmc: QmcSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    D0,
    TrackingRatio,
    Length,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

/// A full scenario: everything a run needs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub channel: ChannelSection,
    pub aperture: ApertureSection,
    pub model: Option<ModelKind>,
    pub corrections: CorrectionsSection,
    pub sampling: SamplingSection,
    pub sweep: Option<SweepSection>,
}

/// Scenario components after validation.
#[derive(Debug)]
pub struct ValidatedScenario {
    pub params: ChannelParams,
    pub geom: ApertureGeometry,
    pub corrections: CorrectionSettings,
    pub model: ModelKind,
    pub budget: QmcBudget,
    pub n_samples: u64,
    pub bins: usize,
    pub seed: u64,
    pub sweep: Option<SweepSection>,
    /// Applicability advisories (never fatal).
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Validate all sections, filling warnings for model-applicability
    /// ranges (elliptic: short links; weak-BW: long links).
    pub fn validate(&self) -> Result<ValidatedScenario> {
        let c = &self.channel;
        let params = ChannelParams::new(c.wavelength, c.w0, c.cn2, c.length)?;
        let a = &self.aperture;
        let geom = ApertureGeometry::new(a.a1, a.a2, a.d0)?;
        let corrections = CorrectionSettings::from_db(
            a.d0,
            self.corrections.tracking_ratio,
            self.corrections.loss_db,
        )?;
        let q = &self.sampling.qmc;
        if q.n_4d == 0 || q.n_10d == 0 || q.replicates == 0 || !(q.window_scale > 0.0) {
            return Err(Error::Scenario(
                "sampling.qmc entries must all be positive".into(),
            ));
        }
        if self.sampling.n_samples == 0 || self.sampling.bins == 0 {
            return Err(Error::Scenario(
                "sampling.n_samples and sampling.bins must be positive".into(),
            ));
        }
        let model = self.model.unwrap_or(ModelKind::WeakBw);
        let mut warnings = Vec::new();
        match model {
            ModelKind::Elliptic if c.length > 2000.0 => warnings.push(format!(
                "elliptic-beam model requested for L = {} m; its applicability range is \
                 short links (L < 2 km)",
                c.length
            )),
            ModelKind::WeakBw if c.length < 2000.0 => warnings.push(format!(
                "weak-beam-wandering model requested for L = {} m; its applicability range \
                 is long links (L > 2 km)",
                c.length
            )),
            _ => {}
        }
        if let Some(sw) = &self.sweep {
            if sw.grid.is_empty() {
                return Err(Error::Scenario("sweep.grid must not be empty".into()));
            }
            let ok = match sw.variable {
                SweepVariable::D0 => sw.grid.iter().all(|d| (0.0..=2.0 * a.a1).contains(d)),
                SweepVariable::TrackingRatio => {
                    sw.grid.iter().all(|t| *t > 0.0 && *t <= 1.0)
                }
                SweepVariable::Length => sw.grid.iter().all(|l| *l > 0.0),
            };
            if !ok {
                return Err(Error::Scenario(format!(
                    "sweep.grid values out of range for {:?}",
                    sw.variable
                )));
            }
        }
        Ok(ValidatedScenario {
            params,
            geom,
            corrections,
            model,
            budget: QmcBudget {
                n_4d: q.n_4d,
                n_10d: q.n_10d,
                replicates: q.replicates,
                window_scale: q.window_scale,
            },
            n_samples: self.sampling.n_samples,
            bins: self.sampling.bins,
            seed: self.sampling.seed,
            sweep: self.sweep.clone(),
            warnings,
        })
    }

    /// FNV-1a hash of the canonical serialization; stamped into output
    /// provenance fields.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("scenario serializes");
        let canon = crate::run::canonical_json(&v);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in canon.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Parse a scenario from a JSON value, after applying `--set key=value`
/// overrides on dotted paths.
pub fn scenario_from_value(
    mut value: serde_json::Value,
    sets: &[(String, String)],
) -> Result<Scenario> {
    fn set_path(node: &mut serde_json::Value, parts: &[&str], new: serde_json::Value) -> bool {
        let Some(obj) = node.as_object_mut() else {
            return false;
        };
        if parts.len() == 1 {
            obj.insert(parts[0].to_string(), new);
            true
        } else {
            let child = obj
                .entry(parts[0].to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            set_path(child, &parts[1..], new)
        }
    }
    for (path, raw) in sets {
        let new: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.clone()));
        let parts: Vec<&str> = path.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) || !set_path(&mut value, &parts, new) {
            return Err(Error::Scenario(format!(
                "--set path '{path}' does not address an object field"
            )));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Scenario(e.to_string()))
}

/// Load a scenario file and apply overrides.
pub fn load_scenario(path: &Path, sets: &[(String, String)]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    scenario_from_value(value, sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"model": "weak_bw", "channel": {"length": 3000.0}}"#)
                .unwrap();
        let sc = scenario_from_value(v, &[]).unwrap();
        let val = sc.validate().unwrap();
        assert_eq!(val.params.length, 3000.0);
        assert_eq!(val.params.wavelength, 800e-9);
        assert_eq!(val.geom.a1, 0.075);
        assert_eq!(val.geom.a2, 0.023);
        assert_eq!(val.model, ModelKind::WeakBw);
        assert!(val.warnings.is_empty());
    }

    #[test]
    fn geometry_violation_names_both_fields() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"aperture": {"a1": 0.02, "a2": 0.05}}"#).unwrap();
        let sc = scenario_from_value(v, &[]).unwrap();
        let err = sc.validate().unwrap_err().to_string();
        assert!(err.contains("a1") && err.contains("a2"), "{err}");
    }

    #[test]
    fn negative_wavelength_rejected() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"channel": {"wavelength": -1.0}}"#).unwrap();
        let sc = scenario_from_value(v, &[]).unwrap();
        assert!(sc.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let v: serde_json::Value =
            serde_json::from_str(r#"{"chanel": {"length": 100.0}}"#).unwrap();
        assert!(scenario_from_value(v, &[]).is_err());
        let v: serde_json::Value =
            serde_json::from_str(r#"{"channel": {"lenth": 100.0}}"#).unwrap();
        assert!(scenario_from_value(v, &[]).is_err());
    }

    #[test]
    fn applicability_warnings() {
        let mk = |model: &str, length: f64| -> ValidatedScenario {
            let v = serde_json::json!({"model": model, "channel": {"length": length}});
            scenario_from_value(v, &[]).unwrap().validate().unwrap()
        };
        assert!(!mk("elliptic", 3000.0).warnings.is_empty());
        assert!(mk("elliptic", 1000.0).warnings.is_empty());
        assert!(!mk("weak_bw", 1000.0).warnings.is_empty());
        assert!(mk("weak_bw", 3000.0).warnings.is_empty());
        assert!(mk("beam_wandering", 1000.0).warnings.is_empty());
    }

    #[test]
    fn set_overrides_dotted_paths() {
        let v = serde_json::json!({});
        let sets = vec![
            ("channel.length".to_string(), "2500".to_string()),
            ("sampling.seed".to_string(), "42".to_string()),
            ("model".to_string(), "\"elliptic\"".to_string()),
        ];
        let sc = scenario_from_value(v, &sets).unwrap();
        assert_eq!(sc.channel.length, 2500.0);
        assert_eq!(sc.sampling.seed, 42);
        assert_eq!(sc.model, Some(ModelKind::Elliptic));
    }

    #[test]
    fn loss_conversion_happens_at_validation() {
        let v = serde_json::json!({"corrections": {"loss_db": 2.3}});
        let sc = scenario_from_value(v, &[]).unwrap();
        let val = sc.validate().unwrap();
        assert!((val.corrections.eta_det - 10f64.powf(-0.23)).abs() < 1e-15);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = scenario_from_value(serde_json::json!({}), &[]).unwrap();
        let b = scenario_from_value(serde_json::json!({}), &[]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c =
            scenario_from_value(serde_json::json!({"channel": {"length": 2000.0}}), &[]).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn sweep_grid_validation() {
        let v = serde_json::json!({"sweep": {"variable": "d0", "grid": [0.0, 0.05, 0.098]}});
        assert!(scenario_from_value(v, &[]).unwrap().validate().is_ok());
        let v = serde_json::json!({"sweep": {"variable": "d0", "grid": [0.2]}});
        assert!(scenario_from_value(v, &[]).unwrap().validate().is_err());
    }
}

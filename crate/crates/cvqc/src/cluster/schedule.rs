//! Measurement schedules as data: one JSON object per step with keys
//! {"t", "switch_top", "switch_bottom", "action", "params", "feedforward"}.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::ClusterConfig;
use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::macronode::MeasurementAngles;
use crate::resources::ResourceSpec;

/// Optical switch positions: loop-continue, input-inject, output-readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchState {
    S1,
    S2,
    S3,
}

/// Feedforward policy: after every step, or accumulated until readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedforwardMode {
    F1,
    F2,
}

/// What the detectors on a readout step do.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Photon-number detection of the diverted mode.
    Pnr,
    /// Homodyne detection of the diverted mode (angle in `theta`).
    Homodyne,
    /// Keep the diverted mode as part of the final output state.
    State,
}

/// Step action kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Time advances; nothing is measured.
    None,
    /// Macronode homodyne measurement (2 angles in 1D, 4 in 2D).
    Homodyne,
    /// Inject inputs (per the s₂ switches) and measure the macronode.
    Inject,
    /// Divert the arriving delayed mode to the output wire; optional
    /// homodyne angles implement a final teleported gate first (1D).
    Readout,
    /// Replace one homodyne detector with a resource-state measurement box.
    InjectResource,
    /// Switch a logical mode out, apply a registered off-cluster operator,
    /// and reinsert it.
    SwitchGate,
}

/// Off-cluster operator reference for `SwitchGate` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchGateSpec {
    /// A symbolic gate applied to the designated logical slot(s).
    Gate(Gate),
    /// A named operator supplied in the run's operator registry.
    Named(String),
}

/// Per-step parameters; unused fields stay absent in JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    /// Homodyne angles for the macronode detectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    /// Input names injected this step: [top] or [top, bottom].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
    /// Detector kind for readout steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorKind>,
    /// Homodyne angle for readout-with-homodyne.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Resource construction for `inject_resource` steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resource: Option<ResourceSpec>,
    /// Off-cluster operator for `switch_gate` steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<SwitchGateSpec>,
    /// Which logical slots a switch gate touches: "traveling", "rail", or
    /// "both".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Human-readable row description carried from the source table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// One schedule step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub t: usize,
    pub switch_top: SwitchState,
    pub switch_bottom: Option<SwitchState>,
    pub action: Action,
    #[serde(default)]
    pub params: StepParams,
    pub feedforward: FeedforwardMode,
}

/// An ordered macronode measurement schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MacronodeSchedule {
    pub steps: Vec<ScheduleStep>,
}

/// On-disk schedule format: the machine configuration plus the steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub config: ClusterConfig,
    pub steps: Vec<ScheduleStep>,
}

impl ScheduleFile {
    pub fn schedule(&self) -> MacronodeSchedule {
        MacronodeSchedule {
            steps: self.steps.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScheduleFile = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("schedule parse error: {e}")))?;
        file.config.validate()?;
        file.schedule().validate(&file.config)?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization")
    }
}

/// Input states injectable at s₂ switches (Gaussian preparations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputState {
    Vacuum,
    Coherent { re: f64, im: f64 },
    Squeezed { r: f64, theta: f64 },
    DisplacedSqueezed { re: f64, im: f64, r: f64, theta: f64 },
}

pub type InputMap = BTreeMap<String, InputState>;

impl MacronodeSchedule {
    /// Structural validation against a machine configuration.
    pub fn validate(&self, config: &ClusterConfig) -> Result<()> {
        config.validate()?;
        let expected_angles = match config.dimension {
            super::Dimension::OneD => 2,
            super::Dimension::TwoD => 4,
        };
        let non_gaussian = self.steps.iter().any(|s| {
            matches!(s.action, Action::InjectResource)
                || matches!(
                    &s.params.gate,
                    Some(SwitchGateSpec::Gate(g)) if !g.is_gaussian()
                )
                || matches!(&s.params.gate, Some(SwitchGateSpec::Named(_)))
        });
        let mut last_t: Option<usize> = None;
        for (i, step) in self.steps.iter().enumerate() {
            let fail = |msg: String| -> Result<()> {
                Err(Error::ScheduleValidation { step: i, msg })
            };
            if let Some(prev) = last_t {
                if step.t <= prev {
                    return fail(format!("time index {} not increasing", step.t));
                }
            }
            last_t = Some(step.t);
            if config.dimension == super::Dimension::TwoD && step.switch_bottom.is_none() {
                return fail("2D schedules need a bottom switch state".into());
            }
            match step.action {
                Action::Inject => {
                    let n_inputs = step.params.inputs.as_ref().map(|v| v.len()).unwrap_or(0);
                    if n_inputs == 0 {
                        return fail("inject step without inputs".into());
                    }
                    if step.switch_top != SwitchState::S2
                        && step.switch_bottom != Some(SwitchState::S2)
                    {
                        return fail("inject requires an s2 switch".into());
                    }
                    if step.params.angles.is_none() {
                        return fail("inject step needs homodyne angles".into());
                    }
                }
                Action::Readout => {
                    if step.switch_top != SwitchState::S3
                        && step.switch_bottom != Some(SwitchState::S3)
                    {
                        return fail("readout requires an s3 switch".into());
                    }
                }
                Action::Homodyne => {
                    if step.params.angles.is_none() {
                        return fail("homodyne step needs angles".into());
                    }
                }
                Action::InjectResource => {
                    if step.params.resource.is_none() {
                        return fail("resource injection needs a resource spec".into());
                    }
                    if non_gaussian && step.feedforward == FeedforwardMode::F2 {
                        return fail(
                            "non-Gaussian steps require immediate feedforward (f1)".into(),
                        );
                    }
                }
                Action::SwitchGate => {
                    if step.params.gate.is_none() {
                        return fail("switch gate step needs an operator".into());
                    }
                }
                Action::None => {}
            }
            if let Some(angles) = &step.params.angles {
                if angles.len() != expected_angles {
                    return fail(format!(
                        "expected {expected_angles} angles, got {}",
                        angles.len()
                    ));
                }
                for pair in angles.chunks(2) {
                    if pair.len() == 2 && MeasurementAngles::pair_is_singular(pair[0], pair[1]) {
                        return fail(format!(
                            "singular detector pair ({}, {})",
                            pair[0], pair[1]
                        ));
                    }
                }
            }
            if non_gaussian && step.feedforward == FeedforwardMode::F2 {
                return fail(
                    "schedules with non-Gaussian steps must use f1 feedforward throughout".into(),
                );
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Dimension;

    fn config() -> ClusterConfig {
        ClusterConfig {
            dimension: Dimension::OneD,
            squeeze_r: 10.0,
            depth_m: 1,
            n_timesteps: 4,
            cutoff: 20,
        }
    }

    fn homodyne_step(t: usize, ff: FeedforwardMode) -> ScheduleStep {
        ScheduleStep {
            t,
            switch_top: SwitchState::S1,
            switch_bottom: None,
            action: Action::Homodyne,
            params: StepParams {
                angles: Some(vec![std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4]),
                ..Default::default()
            },
            feedforward: ff,
        }
    }

    #[test]
    fn json_round_trip_preserves_steps() {
        let file = ScheduleFile {
            config: config(),
            steps: vec![homodyne_step(0, FeedforwardMode::F1)],
        };
        let text = file.to_json();
        let back = ScheduleFile::from_json(&text).unwrap();
        assert_eq!(file, back);
        // The step object carries the documented keys.
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let step = &v["steps"][0];
        for key in ["t", "switch_top", "switch_bottom", "action", "params", "feedforward"] {
            assert!(step.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn non_gaussian_with_deferred_feedforward_rejected() {
        let mut steps = vec![homodyne_step(0, FeedforwardMode::F2)];
        steps.push(ScheduleStep {
            t: 1,
            switch_top: SwitchState::S1,
            switch_bottom: None,
            action: Action::InjectResource,
            params: StepParams {
                resource: Some(ResourceSpec {
                    kind: crate::resources::ResourceKind::CubicApprox {
                        gamma: 0.05,
                        base_squeeze: 0.0,
                    },
                    cutoff: 20,
                }),
                theta: Some(0.0),
                ..Default::default()
            },
            feedforward: FeedforwardMode::F1,
        });
        let sched = MacronodeSchedule { steps };
        let err = sched.validate(&config());
        assert!(matches!(err, Err(Error::ScheduleValidation { .. })));
    }

    #[test]
    fn inject_requires_s2_and_readout_requires_s3() {
        let step = ScheduleStep {
            t: 0,
            switch_top: SwitchState::S1,
            switch_bottom: None,
            action: Action::Inject,
            params: StepParams {
                inputs: Some(vec!["in0".into()]),
                angles: Some(vec![0.3, 1.2]),
                ..Default::default()
            },
            feedforward: FeedforwardMode::F1,
        };
        let sched = MacronodeSchedule { steps: vec![step] };
        assert!(sched.validate(&config()).is_err());

        let step = ScheduleStep {
            t: 0,
            switch_top: SwitchState::S1,
            switch_bottom: None,
            action: Action::Readout,
            params: StepParams::default(),
            feedforward: FeedforwardMode::F1,
        };
        let sched = MacronodeSchedule { steps: vec![step] };
        assert!(sched.validate(&config()).is_err());
    }

    #[test]
    fn singular_angles_rejected_at_load() {
        let mut step = homodyne_step(0, FeedforwardMode::F1);
        step.params.angles = Some(vec![0.4, 0.4]);
        let sched = MacronodeSchedule { steps: vec![step] };
        assert!(sched.validate(&config()).is_err());
    }
}

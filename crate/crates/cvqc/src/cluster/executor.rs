//! Schedule execution: step-by-step simulation of the delay-loop machine.
//!
//! The Gaussian phase simulates the optical circuit exactly: every macronode
//! step materializes the fresh entangled pair(s), couples the arriving
//! delayed modes, samples the homodyne outcomes from the exact marginals and
//! applies the feedforward policy. When the first non-Gaussian action
//! arrives, the reduced state of the live logical modes is handed to the
//! Fock backend; from then on macronode steps act through the induced
//! operators of the measurement calculus conditioned on zero outcomes (the
//! infinite-squeezing semantics — finite-squeezing noise is modeled in the
//! Gaussian phase), and non-Gaussian steps apply their resource kernels or
//! registered off-cluster operators.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::schedule::{
    Action, DetectorKind, FeedforwardMode, InputState, MacronodeSchedule, ScheduleStep,
    SwitchGateSpec, SwitchState,
};
use super::{mode, ClusterConfig, Dimension};
use crate::convert::fock_from_gaussian;
use crate::error::{Error, Result};
use crate::fock::{FockState, PositionGrid};
use crate::gates::{Gate, GateOp, ModeId};
use crate::gaussian::GaussianState;
use crate::macronode::{
    general_resource_teleportation, single_macronode, two_mode_macronode, InducedOperator,
};
use crate::resources::build_resource;

/// Named off-cluster Fock operators usable by `switch_gate` steps.
#[derive(Default)]
pub struct OperatorRegistry {
    single: BTreeMap<String, Array2<C64>>,
    pair: BTreeMap<String, Array2<C64>>,
}

impl OperatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_single(&mut self, name: impl Into<String>, op: Array2<C64>) {
        self.single.insert(name.into(), op);
    }

    pub fn register_pair(&mut self, name: impl Into<String>, op: Array2<C64>) {
        self.pair.insert(name.into(), op);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HomodyneRecord {
    pub wire: String,
    pub theta: f64,
    pub outcome: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PnrRecord {
    pub wire: String,
    pub outcome: usize,
}

/// Measurement results of one step, with provenance.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OutcomeRecord {
    pub t: usize,
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub homodyne: Vec<HomodyneRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pnr: Vec<PnrRecord>,
}

/// Final state artifact of a run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FinalState {
    Gaussian {
        modes: Vec<String>,
        mean: Vec<f64>,
        /// Row-major covariance.
        cov: Vec<f64>,
    },
    Fock {
        modes: Vec<String>,
        cutoffs: Vec<usize>,
        /// Flattened amplitudes as (re, im), row-major over the cutoffs.
        amps: Vec<(f64, f64)>,
    },
    Empty,
}

/// Execution record: per-step outcomes, the deferred-feedforward ledger
/// trace, and the final output state.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScheduleTrace {
    pub records: Vec<OutcomeRecord>,
    /// Pending deferred displacement per live slot after the last step
    /// (empty for f1 runs and for completed f2 runs).
    pub ledger: Vec<(String, f64, f64)>,
    pub final_state: FinalState,
}

#[derive(Clone, Debug)]
struct Slot {
    /// Gaussian mode label, or Fock axis index after hand-off.
    gmode: Option<ModeId>,
    axis: Option<usize>,
    pending: (f64, f64),
}

enum Phase {
    Gaussian(GaussianState),
    Fock { state: FockState, names: Vec<ModeId> },
}

struct Executor<'a> {
    config: ClusterConfig,
    inputs: &'a BTreeMap<String, InputState>,
    registry: &'a OperatorRegistry,
    phase: Phase,
    traveling: Option<Slot>,
    rails: Vec<Option<Slot>>,
    /// Output modes held for final reporting (Gaussian phase only).
    state_outputs: Vec<ModeId>,
    /// Deferred PNR readouts: (record index, mode).
    pnr_outputs: Vec<(usize, ModeId)>,
    records: Vec<OutcomeRecord>,
    rng: ChaCha20Rng,
    fresh_counter: usize,
    /// Gaussian remainder holding state outputs after a hand-off.
    gaussian_remainder: Option<GaussianState>,
}

fn input_gates(input: &InputState, target: &ModeId) -> Vec<GateOp> {
    let mut gates = vec![];
    match input {
        InputState::Vacuum => {}
        InputState::Coherent { re, im } => {
            gates.push(
                GateOp::single(Gate::Displace(C64::new(*re, *im)), target.clone()).unwrap(),
            );
        }
        InputState::Squeezed { r, theta } => {
            gates.push(
                GateOp::single(
                    Gate::Squeeze {
                        r: *r,
                        theta: *theta,
                    },
                    target.clone(),
                )
                .unwrap(),
            );
        }
        InputState::DisplacedSqueezed { re, im, r, theta } => {
            gates.push(
                GateOp::single(
                    Gate::Squeeze {
                        r: *r,
                        theta: *theta,
                    },
                    target.clone(),
                )
                .unwrap(),
            );
            gates.push(
                GateOp::single(Gate::Displace(C64::new(*re, *im)), target.clone()).unwrap(),
            );
        }
    }
    gates
}

impl<'a> Executor<'a> {
    fn new(
        config: ClusterConfig,
        inputs: &'a BTreeMap<String, InputState>,
        registry: &'a OperatorRegistry,
        seed: u64,
    ) -> Self {
        Executor {
            config,
            inputs,
            registry,
            phase: Phase::Gaussian(GaussianState::vacuum(vec![])),
            traveling: None,
            rails: vec![None; config.depth_m],
            state_outputs: vec![],
            pnr_outputs: vec![],
            records: vec![],
            rng: ChaCha20Rng::seed_from_u64(seed),
            fresh_counter: 0,
            gaussian_remainder: None,
        }
    }

    fn take_gstate(&mut self) -> GaussianState {
        match &mut self.phase {
            Phase::Gaussian(g) => std::mem::replace(g, GaussianState::vacuum(vec![])),
            Phase::Fock { .. } => unreachable!("gaussian state after hand-off"),
        }
    }

    fn put_gstate(&mut self, g: GaussianState) {
        self.phase = Phase::Gaussian(g);
    }

    fn in_gaussian_phase(&self) -> bool {
        matches!(self.phase, Phase::Gaussian(_))
    }

    /// Materialize an injected or padding input as a new Gaussian mode.
    fn make_input_mode(&mut self, t: usize, tag: &str, input: &InputState) -> Result<ModeId> {
        self.fresh_counter += 1;
        let label = ModeId::new(format!("T{t}:{tag}{}", self.fresh_counter));
        let g = self.take_gstate();
        let mut st = g.append_vacuum(vec![label.clone()]);
        for gate in input_gates(input, &label) {
            st = st.apply_gate(&gate)?;
        }
        self.put_gstate(st);
        Ok(label)
    }

    fn drop_mode(&mut self, dropped: ModeId) -> Result<()> {
        let g = self.take_gstate();
        let keep: Vec<ModeId> = g
            .modes()
            .iter()
            .filter(|m| **m != dropped)
            .cloned()
            .collect();
        let reduced = g.reduced(&keep)?;
        self.put_gstate(reduced);
        Ok(())
    }

    /// Resolve the arriving content of a slot: injected input (dropping the
    /// arriving mode), existing content, or a fresh vacuum pad.
    fn resolve_arrival(
        &mut self,
        t: usize,
        slot_content: Option<Slot>,
        inject: Option<&InputState>,
    ) -> Result<Slot> {
        match inject {
            Some(input) => {
                if let Some(old) = slot_content {
                    if let Some(m) = old.gmode {
                        self.drop_mode(m)?;
                    }
                }
                let label = self.make_input_mode(t, "in", input)?;
                Ok(Slot {
                    gmode: Some(label),
                    axis: None,
                    pending: (0.0, 0.0),
                })
            }
            None => match slot_content {
                Some(s) => Ok(s),
                None => {
                    let label = self.make_input_mode(t, "pad", &InputState::Vacuum)?;
                    Ok(Slot {
                        gmode: Some(label),
                        axis: None,
                        pending: (0.0, 0.0),
                    })
                }
            },
        }
    }

    fn rail_index(&self, t: usize) -> usize {
        t % self.config.depth_m
    }

    fn lookup_input(&self, name: &str) -> Result<&'a InputState> {
        self.inputs
            .get(name)
            .ok_or_else(|| Error::Validation(format!("input `{name}` not provided")))
    }

    /// One macronode teleport step in the Gaussian phase (1D).
    fn gaussian_step_1d(
        &mut self,
        step: &ScheduleStep,
        record: &mut OutcomeRecord,
        inject_top: Option<&InputState>,
    ) -> Result<Slot> {
        let t = step.t;
        let angles = step.params.angles.as_ref().expect("validated angles");
        let (theta1, theta3) = (angles[0], angles[1]);
        let arriving = self.traveling.take();
        let in_slot = self.resolve_arrival(t, arriving, inject_top)?;
        let in_mode = in_slot.gmode.clone().expect("gaussian phase");

        // Fresh pair, coupler, detectors.
        let (a_m, b_m) = (mode(t, "a"), mode(t, "b"));
        let g = self.take_gstate();
        let g = super::fresh_pair(g, self.config.squeeze_r, a_m.clone(), b_m.clone())?;
        let g = g.apply_gate(&GateOp::pair(
            Gate::BeamSplit(std::f64::consts::FRAC_PI_4),
            a_m.clone(),
            in_mode.clone(),
        )?)?;
        let (m1, g) = g.homodyne_sample(&a_m, theta1, &mut self.rng)?;
        let (m3, g) = g.homodyne_sample(&in_mode, theta3, &mut self.rng)?;
        self.put_gstate(g);
        record.homodyne.push(HomodyneRecord {
            wire: a_m.to_string(),
            theta: theta1,
            outcome: m1,
        });
        record.homodyne.push(HomodyneRecord {
            wire: in_mode.to_string(),
            theta: theta3,
            outcome: m3,
        });

        let induced = single_macronode(theta1, theta3, m1, m3)?;
        let disp = induced.outcome_displacement();
        let s_mat = induced.to_symplectic()?;
        let old = nalgebra::DVector::from_column_slice(&[in_slot.pending.0, in_slot.pending.1]);
        let carried = &s_mat * old + disp;
        let mut pending = (carried[0], carried[1]);
        if step.feedforward == FeedforwardMode::F1 {
            let g = self.take_gstate();
            let g = g.displace_mode(&b_m, -pending.0, -pending.1)?;
            self.put_gstate(g);
            pending = (0.0, 0.0);
        }
        Ok(Slot {
            gmode: Some(b_m),
            axis: None,
            pending,
        })
    }

    /// One macronode teleport step in the Gaussian phase (2D).
    fn gaussian_step_2d(
        &mut self,
        step: &ScheduleStep,
        record: &mut OutcomeRecord,
        inject_top: Option<&InputState>,
        inject_bottom: Option<&InputState>,
    ) -> Result<(Slot, Slot)> {
        let t = step.t;
        let angles = step.params.angles.as_ref().expect("validated angles");
        let thetas = [angles[0], angles[1], angles[2], angles[3]];
        let w = self.rail_index(t);

        let arriving_a = self.traveling.take();
        let slot_a = self.resolve_arrival(t, arriving_a, inject_top)?;
        let arriving_c = self.rails[w].take();
        let slot_c = self.resolve_arrival(t, arriving_c, inject_bottom)?;
        let a_in = slot_a.gmode.clone().expect("gaussian phase");
        let c_in = slot_c.gmode.clone().expect("gaussian phase");

        let (d_m, a_m) = (mode(t, "d"), mode(t, "a"));
        let (b_m, c_m) = (mode(t, "b"), mode(t, "c"));
        let g = self.take_gstate();
        let mut st = super::fresh_pair(g, self.config.squeeze_r, d_m.clone(), a_m.clone())?;
        st = super::fresh_pair(st, self.config.squeeze_r, b_m.clone(), c_m.clone())?;
        st = st.apply_gate(&GateOp::pair(
            Gate::BeamSplit(std::f64::consts::FRAC_PI_4),
            d_m.clone(),
            a_in.clone(),
        )?)?;
        st = st.apply_gate(&GateOp::pair(
            Gate::BeamSplit(std::f64::consts::FRAC_PI_4),
            b_m.clone(),
            c_in.clone(),
        )?)?;
        st = st.apply_gate(&GateOp::pair(
            Gate::BeamSplit(-std::f64::consts::FRAC_PI_4),
            d_m.clone(),
            b_m.clone(),
        )?)?;
        st = st.apply_gate(&GateOp::pair(
            Gate::BeamSplit(-std::f64::consts::FRAC_PI_4),
            a_in.clone(),
            c_in.clone(),
        )?)?;
        let wires = [d_m.clone(), b_m.clone(), a_in.clone(), c_in.clone()];
        let mut outcomes = [0.0f64; 4];
        for (i, wire) in wires.iter().enumerate() {
            let (m, next) = st.homodyne_sample(wire, thetas[i], &mut self.rng)?;
            st = next;
            outcomes[i] = m;
            record.homodyne.push(HomodyneRecord {
                wire: wire.to_string(),
                theta: thetas[i],
                outcome: m,
            });
        }
        self.put_gstate(st);

        let induced = two_mode_macronode(thetas, outcomes)?;
        let disp = induced.outcome_displacement();
        let s_mat = induced.to_symplectic()?;
        let old = nalgebra::DVector::from_column_slice(&[
            slot_a.pending.0,
            slot_a.pending.1,
            slot_c.pending.0,
            slot_c.pending.1,
        ]);
        let carried = &s_mat * old + disp;
        let mut pend_a = (carried[0], carried[1]);
        let mut pend_c = (carried[2], carried[3]);
        if step.feedforward == FeedforwardMode::F1 {
            let g = self.take_gstate();
            let g = g.displace_mode(&a_m, -pend_a.0, -pend_a.1)?;
            let g = g.displace_mode(&c_m, -pend_c.0, -pend_c.1)?;
            self.put_gstate(g);
            pend_a = (0.0, 0.0);
            pend_c = (0.0, 0.0);
        }
        Ok((
            Slot {
                gmode: Some(a_m),
                axis: None,
                pending: pend_a,
            },
            Slot {
                gmode: Some(c_m),
                axis: None,
                pending: pend_c,
            },
        ))
    }

    /// Hand the live slot contents to the Fock backend.
    fn hand_off(&mut self) -> Result<()> {
        if !self.in_gaussian_phase() {
            return Ok(());
        }
        let mut live: Vec<ModeId> = vec![];
        if let Some(s) = &self.traveling {
            if let Some(m) = &s.gmode {
                live.push(m.clone());
            }
        }
        for r in self.rails.iter().flatten() {
            if let Some(m) = &r.gmode {
                live.push(m.clone());
            }
        }
        if live.is_empty() {
            return Err(Error::Validation(
                "non-Gaussian action with no live logical modes".into(),
            ));
        }
        let cutoff = self.config.cutoff;
        let g = self.take_gstate();
        let reduced = g.reduced(&live)?;
        let fock = fock_from_gaussian(&reduced, cutoff)?;
        // Any state outputs collected so far stay Gaussian; keep their
        // reduced state for final reporting.
        if !self.state_outputs.is_empty() || !self.pnr_outputs.is_empty() {
            let mut keep = self.state_outputs.clone();
            keep.extend(self.pnr_outputs.iter().map(|(_, m)| m.clone()));
            let remainder = g.reduced(&keep)?;
            self.phase = Phase::Fock {
                state: fock,
                names: live.clone(),
            };
            self.finalize_gaussian_outputs(remainder)?;
        } else {
            self.phase = Phase::Fock {
                state: fock,
                names: live.clone(),
            };
        }
        // Re-point slots at tensor axes.
        let axis_of = |m: &ModeId| live.iter().position(|x| x == m).unwrap();
        if let Some(s) = &mut self.traveling {
            if let Some(m) = s.gmode.take() {
                s.axis = Some(axis_of(&m));
            }
        }
        for r in self.rails.iter_mut().flatten() {
            if let Some(m) = r.gmode.take() {
                r.axis = Some(axis_of(&m));
            }
        }
        Ok(())
    }

    /// Sample deferred PNR outputs and fill their records (Gaussian phase).
    fn finalize_gaussian_outputs(&mut self, remainder: GaussianState) -> Result<()> {
        if self.pnr_outputs.is_empty() {
            self.gaussian_remainder = Some(remainder);
            return Ok(());
        }
        let pnr_modes: Vec<ModeId> = self.pnr_outputs.iter().map(|(_, m)| m.clone()).collect();
        let reduced = remainder.reduced(&pnr_modes)?;
        let fock = fock_from_gaussian(&reduced, self.config.cutoff)?;
        let dist = fock.number_distribution();
        // Sample one joint outcome by inverse CDF over the flattened tensor.
        use rand::Rng;
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        let mut flat_choice = 0usize;
        for (i, p) in dist.iter().enumerate() {
            acc += p;
            if u <= acc {
                flat_choice = i;
                break;
            }
            flat_choice = i;
        }
        // Unflatten.
        let mut rem = flat_choice;
        let mut outcome = vec![0usize; pnr_modes.len()];
        for k in (0..pnr_modes.len()).rev() {
            outcome[k] = rem % self.config.cutoff;
            rem /= self.config.cutoff;
        }
        let taken: Vec<(usize, ModeId)> = std::mem::take(&mut self.pnr_outputs);
        for (slot, (rec_idx, m)) in taken.iter().enumerate() {
            self.records[*rec_idx].pnr.push(PnrRecord {
                wire: m.to_string(),
                outcome: outcome[slot],
            });
        }
        // Keep whatever state outputs remain.
        if !self.state_outputs.is_empty() {
            let keep = self.state_outputs.clone();
            self.gaussian_remainder = Some(remainder.reduced(&keep)?);
        }
        Ok(())
    }

    fn apply_named_operator(
        &mut self,
        name: &str,
        targets: &[usize],
    ) -> Result<()> {
        let Phase::Fock { state, .. } = &mut self.phase else {
            return Err(Error::Validation("named operators need the Fock phase".into()));
        };
        match targets.len() {
            1 => {
                let op = self
                    .registry
                    .single
                    .get(name)
                    .ok_or_else(|| Error::Validation(format!("operator `{name}` not registered")))?;
                *state = state.apply_one(op.view(), targets[0])?;
            }
            2 => {
                let op = self
                    .registry
                    .pair
                    .get(name)
                    .ok_or_else(|| Error::Validation(format!("operator `{name}` not registered")))?;
                *state = state.apply_two(op.view(), targets[0], targets[1])?;
            }
            _ => {
                return Err(Error::Validation(
                    "switch gates act on one or two slots".into(),
                ))
            }
        }
        Ok(())
    }

    fn fock_slot_axes(&self, target: &str) -> Result<Vec<usize>> {
        let mut axes = vec![];
        let want_traveling = target == "traveling" || target == "both";
        let want_rail = target == "rail" || target == "both";
        if want_traveling {
            let s = self
                .traveling
                .as_ref()
                .ok_or_else(|| Error::Validation("no traveling content for switch gate".into()))?;
            axes.push(s.axis.expect("fock phase"));
        }
        if want_rail {
            let s = self
                .rails
                .iter()
                .flatten()
                .next()
                .ok_or_else(|| Error::Validation("no rail content for switch gate".into()))?;
            axes.push(s.axis.expect("fock phase"));
        }
        Ok(axes)
    }

    /// Apply a macronode-calculus operator to Fock-phase slots (zero
    /// outcomes; the Gaussian part is exact at these outcomes).
    fn fock_teleport(&mut self, induced: &InducedOperator, axes: &[usize]) -> Result<()> {
        let Phase::Fock { state, .. } = &mut self.phase else {
            unreachable!("fock phase");
        };
        *state = induced.apply_fock(state, axes, &PositionGrid::standard())?;
        Ok(())
    }

    fn run(mut self, schedule: &MacronodeSchedule) -> Result<ScheduleTrace> {
        for step in &schedule.steps {
            let mut record = OutcomeRecord {
                t: step.t,
                action: format!("{:?}", step.action).to_lowercase(),
                label: step.params.label.clone(),
                homodyne: vec![],
                pnr: vec![],
            };
            match step.action {
                Action::None => {}
                Action::Homodyne | Action::Inject => {
                    let inputs = step.params.inputs.clone().unwrap_or_default();
                    let (top_in, bottom_in) = match step.action {
                        Action::Inject => {
                            let top = if step.switch_top == SwitchState::S2 {
                                Some(self.lookup_input(inputs.first().ok_or_else(|| {
                                    Error::Validation("missing top input name".into())
                                })?)?)
                            } else {
                                None
                            };
                            let bottom = if step.switch_bottom == Some(SwitchState::S2) {
                                let idx = if top.is_some() { 1 } else { 0 };
                                Some(self.lookup_input(inputs.get(idx).ok_or_else(|| {
                                    Error::Validation("missing bottom input name".into())
                                })?)?)
                            } else {
                                None
                            };
                            (top, bottom)
                        }
                        _ => (None, None),
                    };
                    match self.config.dimension {
                        Dimension::OneD => {
                            if self.in_gaussian_phase() {
                                let out = self.gaussian_step_1d(step, &mut record, top_in)?;
                                self.traveling = Some(out);
                            } else {
                                let angles = step.params.angles.as_ref().unwrap();
                                let induced =
                                    single_macronode(angles[0], angles[1], 0.0, 0.0)?;
                                let axes = self.fock_slot_axes("traveling")?;
                                self.fock_teleport(&induced, &axes)?;
                            }
                        }
                        Dimension::TwoD => {
                            if self.in_gaussian_phase() {
                                let (a, c) =
                                    self.gaussian_step_2d(step, &mut record, top_in, bottom_in)?;
                                self.traveling = Some(a);
                                let w = self.rail_index(step.t);
                                self.rails[w] = Some(c);
                            } else {
                                let angles = step.params.angles.as_ref().unwrap();
                                let thetas = [angles[0], angles[1], angles[2], angles[3]];
                                let induced = two_mode_macronode(thetas, [0.0; 4])?;
                                let w = self.rail_index(step.t);
                                let trav = self.traveling.as_ref().and_then(|s| s.axis);
                                let rail = self.rails[w].as_ref().and_then(|s| s.axis);
                                let (Some(ta), Some(ra)) = (trav, rail) else {
                                    return Err(Error::Validation(format!(
                                        "step {}: Fock-phase macronode needs both slots live",
                                        step.t
                                    )));
                                };
                                self.fock_teleport(&induced, &[ta, ra])?;
                            }
                        }
                    }
                }
                Action::Readout => self.readout(step, &mut record)?,
                Action::InjectResource => {
                    self.hand_off()?;
                    let spec = step.params.resource.as_ref().expect("validated");
                    let mut spec = spec.clone();
                    spec.cutoff = self.config.cutoff;
                    let resource = build_resource(&spec)?;
                    let theta = step.params.theta.unwrap_or(0.0);
                    let induced =
                        general_resource_teleportation(&resource, theta, (0.0, 0.0, 0.0))?;
                    let target = step.params.target.as_deref().unwrap_or("rail");
                    let axes = self.fock_slot_axes(target)?;
                    if axes.len() != 1 {
                        return Err(Error::Validation(
                            "resource injection acts on one slot".into(),
                        ));
                    }
                    self.fock_teleport(&induced, &axes)?;
                }
                Action::SwitchGate => {
                    let spec = step.params.gate.as_ref().expect("validated");
                    let target = step.params.target.as_deref().unwrap_or("rail");
                    match spec {
                        SwitchGateSpec::Gate(g) if g.is_gaussian() && self.in_gaussian_phase() => {
                            // Apply directly to the slot's Gaussian mode.
                            let slot_mode = match target {
                                "traveling" => self
                                    .traveling
                                    .as_ref()
                                    .and_then(|s| s.gmode.clone()),
                                _ => self
                                    .rails
                                    .iter()
                                    .flatten()
                                    .next()
                                    .and_then(|s| s.gmode.clone()),
                            };
                            let Some(mlabel) = slot_mode else {
                                return Err(Error::Validation(format!(
                                    "step {}: switch gate on an empty or read-out slot",
                                    step.t
                                )));
                            };
                            let gs = self.take_gstate();
                            let gs = gs.apply_gate(&GateOp::new(*g, vec![mlabel])?)?;
                            self.put_gstate(gs);
                        }
                        SwitchGateSpec::Gate(g) => {
                            self.hand_off()?;
                            let axes = self.fock_slot_axes(target)?;
                            let Phase::Fock { state, .. } = &mut self.phase else {
                                unreachable!()
                            };
                            *state = state.apply_gate(g, &axes)?;
                        }
                        SwitchGateSpec::Named(name) => {
                            self.hand_off()?;
                            let axes = self.fock_slot_axes(target)?;
                            self.apply_named_operator(name, &axes)?;
                        }
                    }
                }
            }
            self.records.push(record);
        }
        self.finalize()
    }

    fn readout(&mut self, step: &ScheduleStep, record: &mut OutcomeRecord) -> Result<()> {
        let detector = step.params.detector.unwrap_or(DetectorKind::State);
        // A 1D readout with angles performs the final teleported gate first.
        if step.params.angles.is_some()
            && self.config.dimension == Dimension::OneD
            && self.in_gaussian_phase()
        {
            let out = self.gaussian_step_1d(step, record, None)?;
            self.traveling = Some(out);
        }
        // Divert the designated slot.
        let slot = if step.switch_bottom == Some(SwitchState::S3) {
            let w = self.rail_index(step.t);
            self.rails[w].take()
        } else {
            self.traveling.take()
        };
        let Some(slot) = slot else {
            return Err(Error::Validation(format!(
                "step {}: readout of an empty slot",
                step.t
            )));
        };
        match &mut self.phase {
            Phase::Gaussian(g) => {
                let m = slot.gmode.expect("gaussian phase");
                // Apply any pending deferred correction at readout.
                let corrected = g.displace_mode(&m, -slot.pending.0, -slot.pending.1)?;
                *g = corrected;
                match detector {
                    DetectorKind::State => self.state_outputs.push(m),
                    DetectorKind::Pnr => self.pnr_outputs.push((self.records.len(), m)),
                    DetectorKind::Homodyne => {
                        let theta = step.params.theta.unwrap_or(std::f64::consts::FRAC_PI_2);
                        let (outcome, st) = g.homodyne_sample(&m, theta, &mut self.rng)?;
                        *g = st;
                        record.homodyne.push(HomodyneRecord {
                            wire: m.to_string(),
                            theta,
                            outcome,
                        });
                    }
                }
            }
            Phase::Fock { state, names } => {
                let axis = slot.axis.expect("fock phase");
                match detector {
                    DetectorKind::State => { /* stays in the final tensor */ }
                    DetectorKind::Pnr => {
                        use rand::Rng;
                        let dist = state.number_distribution();
                        // Marginal over the axis.
                        let d = state.cutoffs()[axis];
                        let mut marg = vec![0.0f64; d];
                        for (idx, p) in dist.indexed_iter() {
                            marg[idx[axis]] += *p;
                        }
                        let u: f64 = self.rng.gen();
                        let mut acc = 0.0;
                        let mut kappa = d - 1;
                        for (k, p) in marg.iter().enumerate() {
                            acc += p;
                            if u <= acc {
                                kappa = k;
                                break;
                            }
                        }
                        let (next, _) = state.pnr_project(axis, kappa)?;
                        record.pnr.push(PnrRecord {
                            wire: names[axis].to_string(),
                            outcome: kappa,
                        });
                        *state = next;
                        names.remove(axis);
                        self.retarget_axes_after_removal(axis);
                    }
                    DetectorKind::Homodyne => {
                        let theta = step.params.theta.unwrap_or(std::f64::consts::FRAC_PI_2);
                        let (outcome, next) = state.homodyne_sample(axis, theta, &mut self.rng)?;
                        record.homodyne.push(HomodyneRecord {
                            wire: names[axis].to_string(),
                            theta,
                            outcome,
                        });
                        *state = next;
                        names.remove(axis);
                        self.retarget_axes_after_removal(axis);
                    }
                }
            }
        }
        Ok(())
    }

    fn retarget_axes_after_removal(&mut self, removed: usize) {
        let fix = |s: &mut Slot| {
            if let Some(a) = s.axis {
                if a > removed {
                    s.axis = Some(a - 1);
                }
            }
        };
        if let Some(s) = &mut self.traveling {
            fix(s);
        }
        for r in self.rails.iter_mut().flatten() {
            fix(r);
        }
    }

    fn finalize(mut self) -> Result<ScheduleTrace> {
        // Deferred PNR sampling in the Gaussian phase.
        if self.in_gaussian_phase() && !self.pnr_outputs.is_empty() {
            let g = match &self.phase {
                Phase::Gaussian(g) => g.clone(),
                Phase::Fock { .. } => unreachable!(),
            };
            self.finalize_gaussian_outputs(g)?;
        }
        let mut ledger = vec![];
        if let Some(s) = &self.traveling {
            if s.pending != (0.0, 0.0) {
                let name = s
                    .gmode
                    .as_ref()
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| "traveling".into());
                ledger.push((name, s.pending.0, s.pending.1));
            }
        }
        for r in self.rails.iter().flatten() {
            if r.pending != (0.0, 0.0) {
                let name = r
                    .gmode
                    .as_ref()
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| "rail".into());
                ledger.push((name, r.pending.0, r.pending.1));
            }
        }
        let final_state = match self.phase {
            Phase::Gaussian(g) => {
                if self.state_outputs.is_empty() {
                    FinalState::Empty
                } else {
                    let out = g.reduced(&self.state_outputs)?;
                    FinalState::Gaussian {
                        modes: out.modes().iter().map(|m| m.to_string()).collect(),
                        mean: out.mean().iter().cloned().collect(),
                        cov: out.cov().iter().cloned().collect(),
                    }
                }
            }
            Phase::Fock { state, names } => {
                // State outputs taken before the hand-off live in the
                // Gaussian remainder; prefer reporting those if present,
                // otherwise the remaining Fock tensor.
                if let Some(g) = &self.gaussian_remainder {
                    if !self.state_outputs.is_empty() {
                        let out = g.reduced(&self.state_outputs)?;
                        FinalState::Gaussian {
                            modes: out.modes().iter().map(|m| m.to_string()).collect(),
                            mean: out.mean().iter().cloned().collect(),
                            cov: out.cov().iter().cloned().collect(),
                        }
                    } else {
                        FinalState::Fock {
                            modes: names.iter().map(|m| m.to_string()).collect(),
                            cutoffs: state.cutoffs().to_vec(),
                            amps: state.amplitudes().iter().map(|z| (z.re, z.im)).collect(),
                        }
                    }
                } else {
                    FinalState::Fock {
                        modes: names.iter().map(|m| m.to_string()).collect(),
                        cutoffs: state.cutoffs().to_vec(),
                        amps: state.amplitudes().iter().map(|z| (z.re, z.im)).collect(),
                    }
                }
            }
        };
        Ok(ScheduleTrace {
            records: self.records,
            ledger,
            final_state,
        })
    }
}

/// Execute a schedule on the delay-loop machine.
///
/// `inputs` supplies the states injected at s₂ switches; `operators` names
/// off-cluster Fock operators for `switch_gate` steps. Runs are deterministic
/// for a fixed seed.
pub fn run_schedule(
    config: &ClusterConfig,
    schedule: &MacronodeSchedule,
    inputs: &BTreeMap<String, InputState>,
    operators: &OperatorRegistry,
    seed: u64,
) -> Result<ScheduleTrace> {
    schedule.validate(config)?;
    let exec = Executor::new(*config, inputs, operators, seed);
    exec.run(schedule)
}

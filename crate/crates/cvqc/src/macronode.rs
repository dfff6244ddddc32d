//! Measurement-induced operators of the macronode calculus: the closed-form
//! Gaussian operator of a two-detector macronode, its two-mode four-detector
//! generalization, and the non-Gaussian teleportation operators obtained by
//! replacing one detector with a resource-state measurement box.
//!
//! Every formula here is validated against circuit oracles: the Gaussian
//! forms against [`crate::gaussian::extract_implemented_symplectic`] on the
//! teleportation circuits built by [`oracle`], the non-Gaussian forms against
//! the exact Fock-space contraction of the same circuits.
//!
//! Resolved conventions (fixed once by the oracles, used throughout):
//! - θ₊ = (θ₃+θ₁)/2 and θ₋ = (θ₁−θ₃)/2;
//! - the formulas' S(s) anti-squeezes x in our convention, i.e. equals
//!   `Squeeze(−s)`;
//! - homodyne outcomes enter the displacement formulas unchanged (unit scale);
//! - the two-mode sandwich beam splitter is our `BeamSplit(−π/4)` applied
//!   first and `BeamSplit(+π/4)` applied last.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{gate_matrix, mult_operator_from_grid, FockState, PositionGrid};
use crate::gates::Gate;
use crate::gaussian::gate_symplectic;
use crate::math::{cmatmul, hermite_functions};

/// Threshold below which |sin(θ₁−θ₃)| marks a singular configuration.
pub const SINGULAR_SIN_THRESHOLD: f64 = 1e-9;

/// Homodyne angles of one macronode, in the p̂(θ) = p̂cosθ + x̂sinθ convention.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementAngles {
    pub thetas: Vec<f64>,
}

impl MeasurementAngles {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite homodyne angle".into()));
        }
        Ok(MeasurementAngles { thetas })
    }

    /// Detector pairs (θ_h, θ_l) with sin(θ_h−θ_l) ≈ 0 are singular.
    pub fn pair_is_singular(theta_h: f64, theta_l: f64) -> bool {
        (theta_h - theta_l).sin().abs() <= SINGULAR_SIN_THRESHOLD
    }
}

/// Which logical mode a step of an induced operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicalMode {
    J,
    K,
}

/// Non-Gaussian multiplication kernel φ_r(a·x̂ + b) from a resource state.
#[derive(Clone, Debug)]
pub struct MultKernel {
    /// Fock amplitudes of the single-mode resource.
    pub resource: Array1<C64>,
    pub arg_scale: f64,
    pub arg_offset: f64,
}

impl MultKernel {
    /// Wavefunction value φ_r(a·x + b).
    pub fn eval(&self, x: f64) -> C64 {
        let y = self.arg_scale * x + self.arg_offset;
        let d = self.resource.len();
        let psis = hermite_functions(y, d - 1);
        (0..d).map(|n| self.resource[n] * psis[n]).sum()
    }

    /// Fock matrix of the multiplication operator on the standard grid.
    pub fn to_fock(&self, d: usize, grid: &PositionGrid) -> Array2<C64> {
        mult_operator_from_grid(|x| self.eval(x), d, grid)
    }

    /// Max |φ_r(a·x+b)| over the grid; a vanishing value means the kernel has
    /// no support where the operator is built.
    pub fn grid_support(&self, grid: &PositionGrid) -> f64 {
        grid.points()
            .iter()
            .map(|&x| self.eval(x).norm())
            .fold(0.0, f64::max)
    }
}

/// One step of an induced operator, in application order.
#[derive(Clone, Debug)]
pub enum InducedStep {
    /// Single-mode gate on one logical mode.
    Gate { gate: Gate, target: LogicalMode },
    /// Two-mode gate on (J, K).
    PairGate { gate: Gate },
    /// Multiplication kernel on one logical mode.
    Kernel {
        kernel: MultKernel,
        target: LogicalMode,
    },
}

/// A measurement-induced operator: symbolic gates (first applied first), so
/// one sequence compiles to either backend and the outcome-dependent
/// displacements stay algebraic.
#[derive(Clone, Debug)]
pub struct InducedOperator {
    pub steps: Vec<InducedStep>,
    /// Number of logical modes (1 or 2).
    pub n_modes: usize,
}

impl InducedOperator {
    pub fn is_gaussian(&self) -> bool {
        self.steps.iter().all(|s| match s {
            InducedStep::Gate { gate, .. } => gate.is_gaussian(),
            InducedStep::PairGate { gate } => gate.is_gaussian(),
            InducedStep::Kernel { .. } => false,
        })
    }

    /// Affine phase-space action (S, t): mean ← S·mean + t.
    /// Errors if any step is non-Gaussian.
    pub fn to_affine(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.n_modes;
        let mut s_total = DMatrix::<f64>::identity(2 * n, 2 * n);
        let mut t_total = DVector::<f64>::zeros(2 * n);
        for step in &self.steps {
            let (s_step, t_step) = match step {
                InducedStep::Gate { gate, target } => {
                    let (s2, d2) = gate_symplectic(gate)?;
                    let idx = match target {
                        LogicalMode::J => 0usize,
                        LogicalMode::K => 1usize,
                    };
                    let mut s = DMatrix::identity(2 * n, 2 * n);
                    let mut t = DVector::zeros(2 * n);
                    s.view_mut((2 * idx, 2 * idx), (2, 2)).copy_from(&s2);
                    t.rows_mut(2 * idx, 2).copy_from(&d2);
                    (s, t)
                }
                InducedStep::PairGate { gate } => {
                    let (s4, d4) = gate_symplectic(gate)?;
                    (s4, d4)
                }
                InducedStep::Kernel { .. } => {
                    return Err(Error::NonGaussianGate("resource kernel"))
                }
            };
            t_total = &s_step * &t_total + t_step;
            s_total = s_step * s_total;
        }
        Ok((s_total, t_total))
    }

    /// Symplectic part alone (displacements dropped).
    pub fn to_symplectic(&self) -> Result<DMatrix<f64>> {
        Ok(self.to_affine()?.0)
    }

    /// Total outcome displacement: the affine offset of the chain.
    ///
    /// For the non-Gaussian chains the displacement steps all commute to the
    /// end through the Gaussian tail; this computes the same thing by zeroing
    /// the kernel/cubic steps (they carry no displacement).
    pub fn outcome_displacement(&self) -> DVector<f64> {
        let n = self.n_modes;
        let mut s_total = DMatrix::<f64>::identity(2 * n, 2 * n);
        let mut t_total = DVector::<f64>::zeros(2 * n);
        for step in &self.steps {
            let (s_step, t_step) = match step {
                InducedStep::Gate { gate, target } => {
                    let idx = match target {
                        LogicalMode::J => 0usize,
                        LogicalMode::K => 1usize,
                    };
                    match gate_symplectic(gate) {
                        Ok((s2, d2)) => {
                            let mut s = DMatrix::identity(2 * n, 2 * n);
                            let mut t = DVector::zeros(2 * n);
                            s.view_mut((2 * idx, 2 * idx), (2, 2)).copy_from(&s2);
                            t.rows_mut(2 * idx, 2).copy_from(&d2);
                            (s, t)
                        }
                        // Non-Gaussian gates are position-diagonal here and
                        // carry no displacement; skip them.
                        Err(_) => (DMatrix::identity(2 * n, 2 * n), DVector::zeros(2 * n)),
                    }
                }
                InducedStep::PairGate { gate } => match gate_symplectic(gate) {
                    Ok((s4, d4)) => (s4, d4),
                    Err(_) => (DMatrix::identity(2 * n, 2 * n), DVector::zeros(2 * n)),
                },
                InducedStep::Kernel { .. } => {
                    (DMatrix::identity(2 * n, 2 * n), DVector::zeros(2 * n))
                }
            };
            t_total = &s_step * &t_total + t_step;
            s_total = s_step * s_total;
        }
        t_total
    }

    /// Compile a single-mode induced operator to a Fock matrix at cutoff `d`.
    pub fn to_fock_matrix(&self, d: usize, grid: &PositionGrid) -> Result<Array2<C64>> {
        if self.n_modes != 1 {
            return Err(Error::ShapeMismatch(
                "to_fock_matrix needs a single-mode operator".into(),
            ));
        }
        let mut m = Array2::<C64>::eye(d);
        for step in &self.steps {
            let g = match step {
                InducedStep::Gate { gate, .. } => gate_matrix(gate, d)?.matrix,
                InducedStep::Kernel { kernel, .. } => kernel.to_fock(d, grid),
                InducedStep::PairGate { .. } => {
                    return Err(Error::ShapeMismatch(
                        "pair gate in single-mode operator".into(),
                    ))
                }
            };
            m = cmatmul(g.view(), m.view());
        }
        Ok(m)
    }

    /// Apply the operator to a Fock state on the given modes (J = modes[0],
    /// K = modes[1] for two-mode operators).
    pub fn apply_fock(
        &self,
        state: &FockState,
        modes: &[usize],
        grid: &PositionGrid,
    ) -> Result<FockState> {
        let mut st = state.clone();
        for step in &self.steps {
            st = match step {
                InducedStep::Gate { gate, target } => {
                    let mode = match target {
                        LogicalMode::J => modes[0],
                        LogicalMode::K => modes[1],
                    };
                    st.apply_gate(gate, &[mode])?
                }
                InducedStep::PairGate { gate } => st.apply_gate(gate, &[modes[0], modes[1]])?,
                InducedStep::Kernel { kernel, target } => {
                    let mode = match target {
                        LogicalMode::J => modes[0],
                        LogicalMode::K => modes[1],
                    };
                    if kernel.grid_support(grid) < 1e-12 {
                        eprintln!(
                            "warning: resource kernel has negligible support on the grid"
                        );
                    }
                    let m = kernel.to_fock(st.cutoffs()[mode], grid);
                    st.apply_one(m.view(), mode)?
                }
            };
        }
        Ok(st)
    }
}

fn check_pair(theta_h: f64, theta_l: f64) -> Result<()> {
    if MeasurementAngles::pair_is_singular(theta_h, theta_l) {
        return Err(Error::SingularConfiguration {
            theta_a: theta_h,
            theta_b: theta_l,
        });
    }
    Ok(())
}

/// Gaussian part of the single-macronode operator as gate steps on one mode:
/// R(θ₊), then S(ln tan θ₋) in the formula's convention (our `Squeeze(−s)`,
/// with tan θ₋ < 0 handled as Squeeze(−ln|tan θ₋|) followed by R(π)), then
/// R(θ₊) again.
fn single_gaussian_steps(theta_h: f64, theta_l: f64, target: LogicalMode) -> Vec<InducedStep> {
    let tp = (theta_h + theta_l) / 2.0;
    let tm = (theta_h - theta_l) / 2.0;
    let t = tm.tan();
    let mut steps = vec![InducedStep::Gate {
        gate: Gate::Rotate(tp),
        target,
    }];
    steps.push(InducedStep::Gate {
        gate: Gate::Squeeze {
            r: -t.abs().ln(),
            theta: 0.0,
        },
        target,
    });
    if t < 0.0 {
        steps.push(InducedStep::Gate {
            gate: Gate::Rotate(std::f64::consts::PI),
            target,
        });
    }
    steps.push(InducedStep::Gate {
        gate: Gate::Rotate(tp),
        target,
    });
    steps
}

/// Outcome displacement D[−i(e^{iθ_h} m_l + e^{iθ_l} m_h)/sin(θ_h−θ_l)].
fn single_displacement(theta_h: f64, theta_l: f64, m_h: f64, m_l: f64) -> Gate {
    let num = C64::from_polar(1.0, theta_h) * m_l + C64::from_polar(1.0, theta_l) * m_h;
    let alpha = C64::new(0.0, -1.0) * num / (theta_h - theta_l).sin();
    Gate::Displace(alpha)
}

/// The Gaussian operator induced by a two-detector macronode measurement at
/// angles (θ₁, θ₃) with outcomes (m₁, m₃):
/// D[−i(e^{iθ₁}m₃ + e^{iθ₃}m₁)/sin(θ₁−θ₃)] · R(θ₊) · S(ln tan θ₋) · R(θ₊),
/// θ± = (θ₁ ± θ₃)/2 up to the resolved sign conventions in the module docs.
pub fn single_macronode(
    theta1: f64,
    theta3: f64,
    m1: f64,
    m3: f64,
) -> Result<InducedOperator> {
    check_pair(theta1, theta3)?;
    let mut steps = single_gaussian_steps(theta1, theta3, LogicalMode::J);
    steps.push(InducedStep::Gate {
        gate: single_displacement(theta1, theta3, m1, m3),
        target: LogicalMode::J,
    });
    Ok(InducedOperator { steps, n_modes: 1 })
}

/// The two-mode Gaussian operator induced by a four-detector macronode:
/// B†(π/4) · Â_j(m₁,m₃,θ₁,θ₃) · Â_k(m₂,m₄,θ₂,θ₄) · B(π/4), where the
/// formula's B(π/4) is our BeamSplit(−π/4) (applied first).
pub fn two_mode_macronode(thetas: [f64; 4], outcomes: [f64; 4]) -> Result<InducedOperator> {
    check_pair(thetas[0], thetas[2])?;
    check_pair(thetas[1], thetas[3])?;
    let mut steps = vec![InducedStep::PairGate {
        gate: Gate::BeamSplit(-std::f64::consts::FRAC_PI_4),
    }];
    steps.extend(single_gaussian_steps(thetas[1], thetas[3], LogicalMode::K));
    steps.push(InducedStep::Gate {
        gate: single_displacement(thetas[1], thetas[3], outcomes[1], outcomes[3]),
        target: LogicalMode::K,
    });
    steps.extend(single_gaussian_steps(thetas[0], thetas[2], LogicalMode::J));
    steps.push(InducedStep::Gate {
        gate: single_displacement(thetas[0], thetas[2], outcomes[0], outcomes[2]),
        target: LogicalMode::J,
    });
    steps.push(InducedStep::PairGate {
        gate: Gate::BeamSplit(std::f64::consts::FRAC_PI_4),
    });
    Ok(InducedOperator { steps, n_modes: 2 })
}

/// Shear and displacement parameters of the cubic teleportation operator.
///
/// τ = 4σ + 4γ(m₃ + √2 m_e);
/// κ = 2m₁√(1+σ²) − 2σ(√2 m₃ + m_e) − √2 γ (m₃ + √2 m_e)².
/// The m₁ coefficient is +2 (the printed −2 corresponds to the opposite
/// detector orientation; the circuit oracle fixed the sign).
pub fn cubic_feedforward_params(gamma: f64, sigma: f64, m3: f64, m1: f64, me: f64) -> (f64, f64) {
    let s2 = std::f64::consts::SQRT_2;
    let tau = 4.0 * sigma + 4.0 * gamma * (m3 + s2 * me);
    let kappa = 2.0 * m1 * (1.0 + sigma * sigma).sqrt()
        - 2.0 * sigma * (s2 * m3 + me)
        - s2 * gamma * (m3 + s2 * me).powi(2);
    (tau, kappa)
}

/// The operator induced by teleportation through an ideal cubic-phase
/// resource: Z(√2 m₃) · X(κ) · R(−π/2) · P(τ) · V(−2√2 γ), with σ = tan θ₁.
pub fn cubic_teleportation(gamma: f64, theta1: f64, m: (f64, f64, f64)) -> Result<InducedOperator> {
    if !gamma.is_finite() || !theta1.is_finite() {
        return Err(Error::InvalidParameter("non-finite cubic parameters".into()));
    }
    let (m3, m1, me) = m;
    let sigma = theta1.tan();
    if !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tan θ₁ diverges at θ₁ = {theta1}"
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    let (tau, kappa) = cubic_feedforward_params(gamma, sigma, m3, m1, me);
    let j = LogicalMode::J;
    let mut steps = Vec::new();
    if gamma != 0.0 {
        steps.push(InducedStep::Gate {
            gate: Gate::Cubic(-2.0 * s2 * gamma),
            target: j,
        });
    }
    steps.extend([
        InducedStep::Gate {
            gate: Gate::Shear(tau),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::Rotate(-std::f64::consts::FRAC_PI_2),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::XShift(kappa),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::ZShift(s2 * m3),
            target: j,
        },
    ]);
    Ok(InducedOperator { steps, n_modes: 1 })
}

/// The operator induced by teleportation through an arbitrary single-mode
/// resource |φ_r⟩ in the measurement box:
///
/// Z(√2 m₃) · R(−π/2) · Z(κ₀) · P(4σ) · φ_r(−√2 x̂ + m₃ + √2 m_e),
/// κ₀ = 2m₁√(1+σ²) − 2σ(√2 m₃ + m_e), σ = tan θ.
///
/// This is the circuit-oracle-resolved equivalent of the printed general
/// teleportation chain; it reduces to [`cubic_teleportation`] for the ideal
/// cubic resource and to the Gaussian macronode at θ₃ = π/2 for the
/// zero-momentum resource.
pub fn general_resource_teleportation(
    phi_r: &FockState,
    theta: f64,
    m: (f64, f64, f64),
) -> Result<InducedOperator> {
    let resource = phi_r.single_mode_amps()?;
    let (m3, m1, me) = m;
    let sigma = theta.tan();
    if !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tan θ diverges at θ = {theta}"
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    let kappa0 = 2.0 * m1 * (1.0 + sigma * sigma).sqrt() - 2.0 * sigma * (s2 * m3 + me);
    let kernel = MultKernel {
        resource,
        arg_scale: -s2,
        arg_offset: m3 + s2 * me,
    };
    if kernel.grid_support(&PositionGrid::standard()) < 1e-12 {
        eprintln!("warning: resource state has negligible support on the standard grid");
    }
    let j = LogicalMode::J;
    let steps = vec![
        InducedStep::Kernel { kernel, target: j },
        InducedStep::Gate {
            gate: Gate::Shear(4.0 * sigma),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::ZShift(kappa0),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::Rotate(-std::f64::consts::FRAC_PI_2),
            target: j,
        },
        InducedStep::Gate {
            gate: Gate::ZShift(s2 * m3),
            target: j,
        },
    ];
    Ok(InducedOperator { steps, n_modes: 1 })
}

pub mod oracle {
    //! Teleportation circuits with the resolved wiring, used as convention
    //! oracles for the closed forms above.

    use super::*;
    use crate::fock::beamsplitter_matrix;
    use crate::gates::{GateOp, ModeId};
    use crate::gaussian::{CircuitSpec, InitialMode};

    fn m(s: &str) -> ModeId {
        ModeId::new(s)
    }

    /// Gate-teleportation circuit: input mode coupled to one arm of a
    /// two-mode squeezed pair, both coupler outputs homodyned.
    ///
    /// Resolved wiring: TMSS = B(π/4) on (x-squeezed `m2`, p-squeezed `m3`)
    /// with R(−π/2) on the delay arm `m3`; coupler B(m2, in); detector θ₁ on
    /// the m2 wire, θ₃ on the in wire. Input mode "in", output mode "m3".
    pub fn teleport_circuit(r: f64, theta1: f64, theta3: f64, m1: f64, m3: f64) -> CircuitSpec {
        let q = std::f64::consts::FRAC_PI_2;
        let b = std::f64::consts::FRAC_PI_4;
        CircuitSpec {
            prep: vec![
                (m("in"), InitialMode::Vacuum),
                (m("m2"), InitialMode::Squeezed { r, theta: 0.0 }),
                (
                    m("m3"),
                    InitialMode::Squeezed {
                        r,
                        theta: std::f64::consts::PI,
                    },
                ),
            ],
            gates: vec![
                GateOp::pair(Gate::BeamSplit(b), "m2", "m3").unwrap(),
                GateOp::single(Gate::Rotate(-q), "m3").unwrap(),
                GateOp::pair(Gate::BeamSplit(b), "m2", "in").unwrap(),
            ],
            measurements: vec![(m("m2"), theta1, m1), (m("in"), theta3, m3)],
        }
    }

    pub fn teleport_in_modes() -> Vec<ModeId> {
        vec![m("in")]
    }

    pub fn teleport_out_modes() -> Vec<ModeId> {
        vec![m("m3")]
    }

    /// Four-detector macronode circuit: fresh pairs (d,a) and (b,c) with the
    /// loop arms a,c rotated by −π/2; inputs A and C couple at B₃ = B(d,A)
    /// and B₄ = B(b,C); the second layer is B₅ = B(−π/4) on (d,b) and
    /// B₆ = B(−π/4) on (A,C); detectors (θ₁,θ₂,θ₃,θ₄) on wires (d,b,A,C).
    /// Inputs (A, C), outputs (a, c).
    pub fn two_mode_circuit(r: f64, thetas: [f64; 4], outcomes: [f64; 4]) -> CircuitSpec {
        let q = std::f64::consts::FRAC_PI_2;
        let b = std::f64::consts::FRAC_PI_4;
        CircuitSpec {
            prep: vec![
                (m("A"), InitialMode::Vacuum),
                (m("C"), InitialMode::Vacuum),
                (m("d"), InitialMode::Squeezed { r, theta: 0.0 }),
                (
                    m("a"),
                    InitialMode::Squeezed {
                        r,
                        theta: std::f64::consts::PI,
                    },
                ),
                (m("b"), InitialMode::Squeezed { r, theta: 0.0 }),
                (
                    m("c"),
                    InitialMode::Squeezed {
                        r,
                        theta: std::f64::consts::PI,
                    },
                ),
            ],
            gates: vec![
                GateOp::pair(Gate::BeamSplit(b), "d", "a").unwrap(),
                GateOp::single(Gate::Rotate(-q), "a").unwrap(),
                GateOp::pair(Gate::BeamSplit(b), "b", "c").unwrap(),
                GateOp::single(Gate::Rotate(-q), "c").unwrap(),
                GateOp::pair(Gate::BeamSplit(b), "d", "A").unwrap(),
                GateOp::pair(Gate::BeamSplit(b), "b", "C").unwrap(),
                GateOp::pair(Gate::BeamSplit(-b), "d", "b").unwrap(),
                GateOp::pair(Gate::BeamSplit(-b), "A", "C").unwrap(),
            ],
            measurements: vec![
                (m("d"), thetas[0], outcomes[0]),
                (m("b"), thetas[1], outcomes[1]),
                (m("A"), thetas[2], outcomes[2]),
                (m("C"), thetas[3], outcomes[3]),
            ],
        }
    }

    pub fn two_mode_in_modes() -> Vec<ModeId> {
        vec![m("A"), m("C")]
    }

    pub fn two_mode_out_modes() -> Vec<ModeId> {
        vec![m("a"), m("c")]
    }

    /// Truncated zero-momentum eigenstate |0_p⟩: c_{2n} = √((2n)!)/(2ⁿ n!),
    /// normalized on the cutoff.
    pub fn zero_momentum_state(d: usize) -> FockState {
        let mut v = Array1::<C64>::zeros(d);
        let lf = |k: usize| -> f64 { (1..=k).map(|x| (x as f64).ln()).sum() };
        let mut n = 0;
        while 2 * n < d {
            let log_mag = 0.5 * lf(2 * n) - (n as f64) * std::f64::consts::LN_2 - lf(n);
            v[2 * n] = C64::new(log_mag.exp(), 0.0);
            n += 1;
        }
        FockState::from_single(v)
    }

    /// Exact Fock-space induced operator of the box teleportation circuit
    /// (the non-Gaussian oracle). The EPR pair is the flat truncated
    /// two-mode squeezed state with weight λ = tanh r per photon; the box is
    /// rank-one on its wire, which lets the whole operator contract in
    /// O(d⁴).
    ///
    /// Wiring (resolved): B(m2, in); the m2 wire enters the box B(wire, e);
    /// the p̂(θ₁) detector sits on the e-side output with the orientation
    /// that reports −m₁ relative to the printed formula (the closed forms
    /// here already absorb that sign), x̂ = m_e on the wire-side output,
    /// x̂ = m₃ on the in wire; output on the rotated arm m3.
    pub fn box_teleport_operator(
        resource: &FockState,
        theta1: f64,
        m1: f64,
        me: f64,
        m3: f64,
        d: usize,
        lambda: f64,
    ) -> Result<Array2<C64>> {
        let res = resource.single_mode_amps()?;
        if res.len() != d {
            return Err(Error::ShapeMismatch(format!(
                "resource cutoff {} != circuit cutoff {d}",
                res.len()
            )));
        }
        let b = beamsplitter_matrix(std::f64::consts::FRAC_PI_4, d, d);

        let proj = |theta: f64, mv: f64| -> Array1<C64> {
            let phi = std::f64::consts::FRAC_PI_2 - theta;
            let psis = hermite_functions(mv, d - 1);
            Array1::from_iter((0..d).map(|n| C64::from_polar(psis[n], -phi * n as f64)))
        };
        let p_theta1 = proj(theta1, m1);
        let p_xe = proj(std::f64::consts::FRAC_PI_2, me);
        let p_x3 = proj(std::f64::consts::FRAC_PI_2, m3);

        // Box functional K[a'] = Σ p̂θ₁(e-side) x̂(wire-side) B[(w,e'),(a',e)] φ[e].
        let mut k_box = Array1::<C64>::zeros(d);
        for ap in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for w in 0..d {
                for ep in 0..d {
                    let weight = p_theta1[ep] * p_xe[w];
                    if weight == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for e in 0..d {
                        acc += weight * b[(w * d + ep, ap * d + e)] * res[e];
                    }
                }
            }
            k_box[ap] = acc;
        }

        // M[n_in, a] over the input coupler B(m2, in).
        let mut m3mat = Array2::<C64>::zeros((d, d));
        for n_in in 0..d {
            for a in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for ap in 0..d {
                    for w1 in 0..d {
                        acc += k_box[ap] * p_x3[w1] * b[(ap * d + w1, a * d + n_in)];
                    }
                }
                m3mat[(n_in, a)] = acc;
            }
        }

        // O = R(−π/2) · diag(λ^a) · M3ᵀ.
        let rot = gate_matrix(&Gate::Rotate(-std::f64::consts::FRAC_PI_2), d)?.matrix;
        let mut o = Array2::<C64>::zeros((d, d));
        for n_out in 0..d {
            for n_in in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..d {
                    acc += rot[(n_out, a)]
                        * C64::new(lambda.powi(a as i32), 0.0)
                        * m3mat[(n_in, a)];
                }
                o[(n_out, n_in)] = acc;
            }
        }
        Ok(o)
    }
}

/// Scale-free operator distance on the low Fock block (operators induced by
/// conditioning are defined up to a global constant).
pub fn operator_distance(a: &Array2<C64>, b: &Array2<C64>, block: usize) -> f64 {
    let asub = a.slice(ndarray::s![0..block, 0..block]);
    let bsub = b.slice(ndarray::s![0..block, 0..block]);
    let inner: C64 = bsub
        .iter()
        .zip(asub.iter())
        .map(|(x, y)| x.conj() * *y)
        .sum();
    let bn: f64 = bsub.iter().map(|z| z.norm_sqr()).sum();
    let c = inner / C64::new(bn, 0.0);
    let num: f64 = asub
        .iter()
        .zip(bsub.iter())
        .map(|(x, y)| (*x - c * *y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = asub.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{extract_implemented_affine, extract_implemented_symplectic};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_outcomes_mean_pure_gaussian() {
        let op = single_macronode(0.3, 1.2, 0.0, 0.0).unwrap();
        let (_, t) = op.to_affine().unwrap();
        assert!(t.norm() < 1e-15, "displacement must vanish at m = 0");
    }

    #[test]
    fn singular_angles_rejected() {
        let err = single_macronode(0.5, 0.5 + std::f64::consts::PI, 0.0, 0.0);
        assert!(matches!(err, Err(Error::SingularConfiguration { .. })));
    }

    #[test]
    fn theta_minus_quarter_pi_gives_double_rotation() {
        // θ₋ = π/4 ⇒ ln tan θ₋ = 0: pure R(θ₊)·R(θ₊).
        let tp = 0.4;
        let (t1, t3) = (tp + std::f64::consts::FRAC_PI_4, tp - std::f64::consts::FRAC_PI_4);
        let op = single_macronode(t1, t3, 0.0, 0.0).unwrap();
        let s = op.to_symplectic().unwrap();
        let (rot, _) = gate_symplectic(&Gate::Rotate(2.0 * tp)).unwrap();
        assert!((s - rot).norm() < 1e-12);
    }

    #[test]
    fn matches_circuit_oracle_at_reference_angles() {
        let (t1, t3) = (std::f64::consts::FRAC_PI_8, 3.0 * std::f64::consts::FRAC_PI_8);
        let circuit = oracle::teleport_circuit(10.0, t1, t3, 0.0, 0.0);
        let l = extract_implemented_symplectic(
            &circuit,
            &oracle::teleport_in_modes(),
            &oracle::teleport_out_modes(),
        )
        .unwrap();
        let s = single_macronode(t1, t3, 0.0, 0.0).unwrap().to_symplectic().unwrap();
        let dev = (l - s).abs().max();
        assert!(dev < 1e-6, "oracle deviation {dev}");
    }

    #[test]
    fn oracle_equivalence_random_angles_and_convergence() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let mut accepted = 0;
        while accepted < 25 {
            let t1: f64 = rng.gen_range(-1.5..1.5);
            let t3: f64 = rng.gen_range(-1.5..1.5);
            if (t1 - t3).sin().abs() < 0.05 {
                continue;
            }
            accepted += 1;
            let s = single_macronode(t1, t3, 0.0, 0.0).unwrap().to_symplectic().unwrap();
            let mut errs = vec![];
            for r in [10.0, 12.0] {
                let circuit = oracle::teleport_circuit(r, t1, t3, 0.0, 0.0);
                let l = extract_implemented_symplectic(
                    &circuit,
                    &oracle::teleport_in_modes(),
                    &oracle::teleport_out_modes(),
                )
                .unwrap();
                errs.push((l - &s).abs().max());
            }
            assert!(errs[0] < 1e-5, "r=10 error {} at ({t1},{t3})", errs[0]);
            assert!(errs[1] < errs[0], "no convergence at ({t1},{t3})");
        }
    }

    #[test]
    fn outcome_displacement_matches_circuit() {
        let (t1, t3) = (0.45, 1.55);
        let (m1, m3) = (0.83, -0.41);
        let base = oracle::teleport_circuit(10.0, t1, t3, 0.0, 0.0);
        let (_, t0) = extract_implemented_affine(
            &base,
            &oracle::teleport_in_modes(),
            &oracle::teleport_out_modes(),
        )
        .unwrap();
        let shifted = oracle::teleport_circuit(10.0, t1, t3, m1, m3);
        let (_, t) = extract_implemented_affine(
            &shifted,
            &oracle::teleport_in_modes(),
            &oracle::teleport_out_modes(),
        )
        .unwrap();
        let circ = t - t0;
        let formula = single_macronode(t1, t3, m1, m3).unwrap().outcome_displacement();
        assert!((circ - formula).norm() < 1e-6);
    }

    #[test]
    fn feedforward_cancellation_across_outcomes() {
        // Undoing the formula displacement leaves an outcome-independent map.
        let (t1, t3) = (0.3, -0.7);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let base = oracle::teleport_circuit(10.0, t1, t3, 0.0, 0.0);
        let (_, t0) = extract_implemented_affine(
            &base,
            &oracle::teleport_in_modes(),
            &oracle::teleport_out_modes(),
        )
        .unwrap();
        for _ in 0..20 {
            let m1: f64 = rng.gen_range(-1.0..1.0);
            let m3: f64 = rng.gen_range(-1.0..1.0);
            let c = oracle::teleport_circuit(10.0, t1, t3, m1, m3);
            let (_, t) = extract_implemented_affine(
                &c,
                &oracle::teleport_in_modes(),
                &oracle::teleport_out_modes(),
            )
            .unwrap();
            let d = single_macronode(t1, t3, m1, m3).unwrap().outcome_displacement();
            let corrected = t - d;
            assert!(
                (&corrected - &t0).norm() < 1e-6,
                "feedforward residue {}",
                (corrected - &t0).norm()
            );
        }
    }

    #[test]
    fn two_mode_same_angles_is_product_of_singles() {
        // θ₁=θ₂, θ₃=θ₄: the sandwich splitters cancel and a pair of the same
        // single-mode unitaries is implemented.
        let (ta, tb) = (0.7, -0.2);
        let g = two_mode_macronode([ta, ta, tb, tb], [0.0; 4]).unwrap();
        let s = g.to_symplectic().unwrap();
        let single = single_macronode(ta, tb, 0.0, 0.0).unwrap().to_symplectic().unwrap();
        let mut block = DMatrix::<f64>::zeros(4, 4);
        block.view_mut((0, 0), (2, 2)).copy_from(&single);
        block.view_mut((2, 2), (2, 2)).copy_from(&single);
        assert!((s - block).norm() < 1e-10);
    }

    #[test]
    fn two_mode_variable_beamsplitter_case() {
        // θ₃ = θ₁ − π/2, θ₄ = θ₂ − π/2 implements a variable beam splitter
        // with phases; verified against the four-detector circuit oracle.
        let (t1, t2) = (0.55, 0.15);
        let thetas = [
            t1,
            t2,
            t1 - std::f64::consts::FRAC_PI_2,
            t2 - std::f64::consts::FRAC_PI_2,
        ];
        let g = two_mode_macronode(thetas, [0.0; 4]).unwrap();
        let s = g.to_symplectic().unwrap();
        let circuit = oracle::two_mode_circuit(10.0, thetas, [0.0; 4]);
        let l = extract_implemented_symplectic(
            &circuit,
            &oracle::two_mode_in_modes(),
            &oracle::two_mode_out_modes(),
        )
        .unwrap();
        assert!((l - &s).abs().max() < 1e-6);
        // The map genuinely mixes the two modes.
        assert!(s[(0, 2)].abs() > 0.1);
    }

    #[test]
    fn two_mode_oracle_equivalence_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut accepted = 0;
        while accepted < 10 {
            let th: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.4..1.4)).collect();
            if (th[0] - th[2]).sin().abs() < 0.1 || (th[1] - th[3]).sin().abs() < 0.1 {
                continue;
            }
            accepted += 1;
            let thetas = [th[0], th[1], th[2], th[3]];
            let s = two_mode_macronode(thetas, [0.0; 4]).unwrap().to_symplectic().unwrap();
            let circuit = oracle::two_mode_circuit(10.0, thetas, [0.0; 4]);
            let l = extract_implemented_symplectic(
                &circuit,
                &oracle::two_mode_in_modes(),
                &oracle::two_mode_out_modes(),
            )
            .unwrap();
            let dev = (l - s).abs().max();
            assert!(dev < 1e-5, "two-mode oracle deviation {dev} at {thetas:?}");
        }
    }

    #[test]
    fn two_mode_outcome_displacement_matches_circuit() {
        let thetas = [0.35, -0.8, 1.3, 0.6];
        let outcomes = [0.7, -0.3, 0.45, 1.1];
        let base = oracle::two_mode_circuit(10.0, thetas, [0.0; 4]);
        let (_, t0) = extract_implemented_affine(
            &base,
            &oracle::two_mode_in_modes(),
            &oracle::two_mode_out_modes(),
        )
        .unwrap();
        let c = oracle::two_mode_circuit(10.0, thetas, outcomes);
        let (_, t) = extract_implemented_affine(
            &c,
            &oracle::two_mode_in_modes(),
            &oracle::two_mode_out_modes(),
        )
        .unwrap();
        let circ = t - t0;
        let formula = two_mode_macronode(thetas, outcomes).unwrap().outcome_displacement();
        assert!((circ - formula).norm() < 1e-6);
    }

    #[test]
    fn cubic_parameters_arithmetic() {
        // τ, κ at (γ=0.1, σ=1, m=(1,1,1)): τ = 4 + 0.4(1+√2); κ per formula.
        let s2 = std::f64::consts::SQRT_2;
        let (tau, kappa) = cubic_feedforward_params(0.1, 1.0, 1.0, 1.0, 1.0);
        assert_abs_diff_eq!(tau, 4.0 + 0.4 * (1.0 + s2), epsilon = 1e-12);
        let expect_kappa = 2.0 * s2 - 2.0 * (s2 + 1.0) - s2 * 0.1 * (1.0 + s2) * (1.0 + s2);
        assert_abs_diff_eq!(kappa, expect_kappa, epsilon = 1e-12);
    }

    #[test]
    fn cubic_at_zero_strength_is_gaussian_macronode() {
        // γ = 0, σ = 0, m = 0: the chain collapses to R(−π/2), which is the
        // Gaussian macronode at (θ₁, θ₃) = (0, π/2).
        let op = cubic_teleportation(0.0, 0.0, (0.0, 0.0, 0.0)).unwrap();
        let s = op.to_symplectic().unwrap();
        let gauss = single_macronode(0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0)
            .unwrap()
            .to_symplectic()
            .unwrap();
        assert!((&s - &gauss).norm() < 1e-10);
        let (rot, _) = gate_symplectic(&Gate::Rotate(-std::f64::consts::FRAC_PI_2)).unwrap();
        assert!((s - rot).norm() < 1e-12);
    }

    #[test]
    fn cubic_matches_fock_box_oracle() {
        // Direct simulation of the box circuit with an ideal (truncated)
        // cubic resource vs the closed form, at modest cutoff.
        let d = 36;
        let gamma = 0.05;
        let grid = PositionGrid::standard();
        let resource = {
            let z = oracle::zero_momentum_state(d);
            z.apply_gate(&Gate::Cubic(gamma), &[0]).unwrap()
        };
        for (theta1, m) in [(0.0, (0.0, 0.0, 0.0)), (0.2, (0.15, -0.25, 0.3))] {
            let o = oracle::box_teleport_operator(
                &resource,
                theta1,
                m.1,
                m.2,
                m.0,
                d,
                (8.0f64).tanh(),
            )
            .unwrap();
            let t = cubic_teleportation(gamma, theta1, m)
                .unwrap()
                .to_fock_matrix(d, &grid)
                .unwrap();
            let dist = operator_distance(&o, &t, 6);
            assert!(dist < 0.03, "cubic closed form vs box oracle: {dist}");
        }
    }

    #[test]
    fn general_resource_matches_fock_box_oracle_gaussian() {
        let d = 36;
        let grid = PositionGrid::standard();
        let resource = FockState::vacuum(vec![d])
            .apply_gate(&Gate::Squeeze { r: 0.4, theta: 0.0 }, &[0])
            .unwrap()
            .apply_gate(&Gate::Displace(C64::new(0.45, 0.0)), &[0])
            .unwrap();
        for (theta, m) in [
            (0.0, (0.0, 0.0, 0.0)),
            (0.25, (0.0, 0.0, 0.0)),
            (0.2, (0.15, -0.25, 0.3)),
        ] {
            let o = oracle::box_teleport_operator(
                &resource,
                theta,
                m.1,
                m.2,
                m.0,
                d,
                (8.0f64).tanh(),
            )
            .unwrap();
            let t = general_resource_teleportation(&resource, theta, m)
                .unwrap()
                .to_fock_matrix(d, &grid)
                .unwrap();
            let dist = operator_distance(&o, &t, 6);
            assert!(dist < 1e-4, "general chain vs box oracle: {dist}");
        }
    }

    #[test]
    fn general_resource_flat_wavefunction_reduces_to_gaussian_macronode() {
        // A resource with a nearly constant wavefunction (strongly
        // anti-squeezed in x, i.e. a zero-momentum approximant at r = 2)
        // makes the kernel ≈ identity: the operator reduces toward the
        // Gaussian teleportation chain. At θ = 0 that chain is exactly the
        // Gaussian macronode Â(0, π/2) = R(−π/2).
        let d = 40;
        let grid = PositionGrid::standard();
        let resource = FockState::vacuum(vec![d])
            .apply_gate(
                &Gate::Squeeze {
                    r: 2.0,
                    theta: std::f64::consts::PI,
                },
                &[0],
            )
            .unwrap();
        let op = general_resource_teleportation(&resource, 0.0, (0.0, 0.0, 0.0)).unwrap();
        let t = op.to_fock_matrix(d, &grid).unwrap();
        let gauss = single_macronode(0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0)
            .unwrap()
            .to_fock_matrix(d, &grid)
            .unwrap();
        let dist = operator_distance(&t, &gauss, 6);
        assert!(dist < 0.05, "flat-resource limit distance {dist}");
    }

    #[test]
    fn general_resource_consistent_with_cubic_first_order() {
        let d = 36;
        let gamma = 0.02;
        let grid = PositionGrid::standard();
        let resource = oracle::zero_momentum_state(d)
            .apply_gate(&Gate::Cubic(gamma), &[0])
            .unwrap();
        let m = (0.1, -0.2, 0.15);
        let theta = 0.1;
        let a = general_resource_teleportation(&resource, theta, m)
            .unwrap()
            .to_fock_matrix(d, &grid)
            .unwrap();
        let b = cubic_teleportation(gamma, theta, m)
            .unwrap()
            .to_fock_matrix(d, &grid)
            .unwrap();
        let dist = operator_distance(&a, &b, 6);
        assert!(dist < 0.05, "cubic consistency distance {dist}");
    }

    #[test]
    fn general_resource_structure_at_zero() {
        // m = 0, θ = 0: only the kernel, R(−π/2), and trivial shifts remain.
        let d = 20;
        let resource = FockState::vacuum(vec![d]);
        let op = general_resource_teleportation(&resource, 0.0, (0.0, 0.0, 0.0)).unwrap();
        assert!(op.outcome_displacement().norm() < 1e-15);
        let n_kernels = op
            .steps
            .iter()
            .filter(|s| matches!(s, InducedStep::Kernel { .. }))
            .count();
        assert_eq!(n_kernels, 1);
    }

    #[test]
    fn cubic_gamma_zero_matches_gaussian_macronode_symplectic() {
        // γ=0: the chain is R(−π/2)P(4σ), which lies in the macronode family
        // R(θ₊)S R(θ₊) at angles solving τ = −2 cot(2θ₊), tan θ₋ = −cot θ₊.
        let theta1 = 0.4f64;
        let sigma = theta1.tan();
        let tau = 4.0 * sigma;
        let op = cubic_teleportation(0.0, theta1, (0.0, 0.0, 0.0)).unwrap();
        let s = op.to_symplectic().unwrap();

        let tp = 0.5 * (-2.0 / tau).atan();
        let tm = (-1.0 / tp.tan()).atan();
        let (th, tl) = (tp + tm, tp - tm);
        let gauss = single_macronode(th, tl, 0.0, 0.0).unwrap().to_symplectic().unwrap();
        assert!(
            (s - gauss).norm() < 1e-10,
            "γ=0 cubic should lie in the Gaussian macronode family"
        );
    }
}

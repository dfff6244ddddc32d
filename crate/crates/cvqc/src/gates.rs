//! Symbolic gates. A [`GateOp`] names a gate and its target modes and can be
//! compiled to either backend: a symplectic matrix plus displacement for the
//! Gaussian backend, or a truncated matrix for the Fock backend.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Mode label. Gaussian states and schedules address modes by label, not index.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct ModeId(pub String);

impl ModeId {
    pub fn new(s: impl Into<String>) -> Self {
        ModeId(s.into())
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModeId {
    fn from(s: &str) -> Self {
        ModeId(s.to_string())
    }
}

/// Gate kinds.
///
/// Conventions (ħ = 1, x̂ = (â+â†)/√2, vacuum variance 1/2):
/// - `Rotate(θ)` = exp(iθ â†â); phase-space rotation by θ.
/// - `Squeeze{r, θ}` squeezes the quadrature at phase-space angle θ/2:
///   for θ = 0, Var(x) → e^{-2r}/2. Generator exp[r(â² − â†²)/2].
/// - `BeamSplit(θ)` = exp[θ(â₁†â₂ − â₁â₂†)]; θ = π/4 is the 50:50 splitter.
/// - `Displace(α)` = exp(αâ† − α*â); shifts (x, p) by (√2 Re α, √2 Im α).
/// - `XShift(s)` = e^{-i s p̂} shifts x by s; `ZShift(s)` = e^{i s x̂} shifts p by s.
/// - `Shear(τ)` = exp(iτ x̂²/2).
/// - `ControlledZ(g)` = exp(i g x̂₁x̂₂).
/// - `Cubic(γ)` = exp(iγ x̂³/3), the lowest-order non-Gaussian gate.
/// - `XPhase{k, λ}` = exp(iλ x̂^k), diagonal in position.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub enum Gate {
    Rotate(f64),
    Squeeze { r: f64, theta: f64 },
    BeamSplit(f64),
    Displace(C64),
    XShift(f64),
    ZShift(f64),
    Shear(f64),
    ControlledZ(f64),
    Cubic(f64),
    XPhase { order: u32, strength: f64 },
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::Rotate(_) => "rotate",
            Gate::Squeeze { .. } => "squeeze",
            Gate::BeamSplit(_) => "beamsplit",
            Gate::Displace(_) => "displace",
            Gate::XShift(_) => "xshift",
            Gate::ZShift(_) => "zshift",
            Gate::Shear(_) => "shear",
            Gate::ControlledZ(_) => "cz",
            Gate::Cubic(_) => "cubic",
            Gate::XPhase { .. } => "xphase",
        }
    }

    /// Number of target modes the gate acts on.
    pub fn arity(&self) -> usize {
        match self {
            Gate::BeamSplit(_) | Gate::ControlledZ(_) => 2,
            _ => 1,
        }
    }

    /// True if the gate maps Gaussian states to Gaussian states.
    pub fn is_gaussian(&self) -> bool {
        !matches!(self, Gate::Cubic(_) | Gate::XPhase { .. })
    }

    /// True if the gate is a function of position quadratures only.
    ///
    /// All such gates commute with each other, which is what makes a circuit
    /// built from them freely reorderable.
    pub fn is_position_diagonal(&self) -> bool {
        matches!(
            self,
            Gate::ZShift(_)
                | Gate::Shear(_)
                | Gate::ControlledZ(_)
                | Gate::Cubic(_)
                | Gate::XPhase { .. }
        )
    }

    pub fn parameters_finite(&self) -> bool {
        let fin = |v: f64| v.is_finite();
        match self {
            Gate::Rotate(t) => fin(*t),
            Gate::Squeeze { r, theta } => fin(*r) && fin(*theta),
            Gate::BeamSplit(t) => fin(*t),
            Gate::Displace(a) => fin(a.re) && fin(a.im),
            Gate::XShift(s) | Gate::ZShift(s) => fin(*s),
            Gate::Shear(t) => fin(*t),
            Gate::ControlledZ(g) => fin(*g),
            Gate::Cubic(g) => fin(*g),
            Gate::XPhase { strength, .. } => fin(*strength),
        }
    }
}

/// A gate bound to target modes.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct GateOp {
    pub gate: Gate,
    pub targets: Vec<ModeId>,
}

impl GateOp {
    pub fn new(gate: Gate, targets: Vec<ModeId>) -> Result<Self> {
        if !gate.parameters_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite parameter in gate `{}`",
                gate.name()
            )));
        }
        if targets.len() != gate.arity() {
            return Err(Error::GateArity {
                gate: gate.name(),
                expected: gate.arity(),
                got: targets.len(),
            });
        }
        Ok(GateOp { gate, targets })
    }

    pub fn single(gate: Gate, target: impl Into<ModeId>) -> Result<Self> {
        Self::new(gate, vec![target.into()])
    }

    pub fn pair(gate: Gate, a: impl Into<ModeId>, b: impl Into<ModeId>) -> Result<Self> {
        Self::new(gate, vec![a.into(), b.into()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_is_checked() {
        let err = GateOp::new(Gate::BeamSplit(0.3), vec![ModeId::new("a")]);
        assert!(matches!(err, Err(Error::GateArity { expected: 2, .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let err = GateOp::single(Gate::Rotate(f64::NAN), "a");
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn position_diagonal_kinds() {
        assert!(Gate::Cubic(0.1).is_position_diagonal());
        assert!(Gate::ControlledZ(1.0).is_position_diagonal());
        assert!(Gate::ZShift(1.0).is_position_diagonal());
        assert!(!Gate::XShift(1.0).is_position_diagonal());
        assert!(!Gate::Rotate(0.1).is_position_diagonal());
    }
}

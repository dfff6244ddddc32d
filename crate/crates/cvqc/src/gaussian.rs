//! Gaussian backend: states as mean vectors and covariance matrices over
//! labeled modes, symplectic gate action, conditional homodyne updates, and
//! the circuit oracle that extracts the symplectic map a conditioned circuit
//! implements.
//!
//! Conventions: ħ = 1, x̂ = (â+â†)/√2, p̂ = (â−â†)/(i√2), [x̂, p̂] = i, vacuum
//! variance 1/2. Quadratures are interleaved as (x₁, p₁, …, xₙ, pₙ).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{Gate, GateOp, ModeId};

/// Gaussian pure/mixed state over an ordered list of labeled modes.
#[derive(Clone, Debug)]
pub struct GaussianState {
    modes: Vec<ModeId>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Standard symplectic form Ω for n modes in interleaved ordering:
/// block-diagonal copies of [[0, 1], [-1, 0]].
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// 2×2 phase-space rotation matrix for `Rotate(θ)`.
pub fn rotation2(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

/// 2×2 squeeze matrix for `Squeeze{r, θ}`.
pub fn squeeze2(r: f64, theta: f64) -> DMatrix<f64> {
    let d = DMatrix::from_row_slice(2, 2, &[(-r).exp(), 0.0, 0.0, r.exp()]);
    rotation2(theta / 2.0) * d * rotation2(-theta / 2.0)
}

/// Symplectic matrix and displacement of a Gaussian gate on its own targets
/// (2k×2k for arity k). Errors on non-Gaussian kinds.
pub fn gate_symplectic(gate: &Gate) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let two = |m: DMatrix<f64>| (m, DVector::zeros(2));
    match *gate {
        Gate::Rotate(t) => Ok(two(rotation2(t))),
        Gate::Squeeze { r, theta } => Ok(two(squeeze2(r, theta))),
        Gate::Shear(tau) => Ok(two(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, tau, 1.0]))),
        Gate::Displace(a) => Ok((
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[
                std::f64::consts::SQRT_2 * a.re,
                std::f64::consts::SQRT_2 * a.im,
            ]),
        )),
        Gate::XShift(s) => Ok((
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[s, 0.0]),
        )),
        Gate::ZShift(s) => Ok((
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[0.0, s]),
        )),
        Gate::BeamSplit(t) => {
            let (c, s) = (t.cos(), t.sin());
            // x₁ → c x₁ + s x₂, x₂ → −s x₁ + c x₂ (p likewise).
            let m = DMatrix::from_row_slice(
                4,
                4,
                &[
                    c, 0.0, s, 0.0, //
                    0.0, c, 0.0, s, //
                    -s, 0.0, c, 0.0, //
                    0.0, -s, 0.0, c,
                ],
            );
            Ok((m, DVector::zeros(4)))
        }
        Gate::ControlledZ(g) => {
            // p₁ → p₁ + g x₂, p₂ → p₂ + g x₁.
            let mut m = DMatrix::identity(4, 4);
            m[(1, 2)] = g;
            m[(3, 0)] = g;
            Ok((m, DVector::zeros(4)))
        }
        Gate::Cubic(_) | Gate::XPhase { .. } => Err(Error::NonGaussianGate(gate.name())),
    }
}

impl GaussianState {
    /// Vacuum on the given modes: zero mean, covariance I/2.
    pub fn vacuum(modes: Vec<ModeId>) -> Self {
        let n = modes.len();
        GaussianState {
            modes,
            mean: DVector::zeros(2 * n),
            cov: DMatrix::identity(2 * n, 2 * n) * 0.5,
        }
    }

    pub fn from_parts(modes: Vec<ModeId>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = modes.len();
        if mean.len() != 2 * n || cov.nrows() != 2 * n || cov.ncols() != 2 * n {
            return Err(Error::ShapeMismatch(format!(
                "{} modes need mean length {} and cov {0}x{0}",
                n,
                2 * n
            )));
        }
        Ok(GaussianState { modes, mean, cov })
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mode_index(&self, mode: &ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.0.clone()))
    }

    /// Mean (x, p) of one mode.
    pub fn mode_mean(&self, mode: &ModeId) -> Result<(f64, f64)> {
        let k = self.mode_index(mode)?;
        Ok((self.mean[2 * k], self.mean[2 * k + 1]))
    }

    /// Tensor fresh vacuum modes onto the state.
    pub fn append_vacuum(&self, new_modes: Vec<ModeId>) -> Self {
        let n_old = self.n_modes();
        let n_new = new_modes.len();
        let n = n_old + n_new;
        let mut mean = DVector::zeros(2 * n);
        mean.rows_mut(0, 2 * n_old).copy_from(&self.mean);
        let mut cov = DMatrix::identity(2 * n, 2 * n) * 0.5;
        cov.view_mut((0, 0), (2 * n_old, 2 * n_old))
            .copy_from(&self.cov);
        let mut modes = self.modes.clone();
        modes.extend(new_modes);
        GaussianState { modes, mean, cov }
    }

    /// Tensor another Gaussian state onto this one.
    pub fn append_state(&self, other: &GaussianState) -> Self {
        let n_old = self.n_modes();
        let n_new = other.n_modes();
        let n = n_old + n_new;
        let mut mean = DVector::zeros(2 * n);
        mean.rows_mut(0, 2 * n_old).copy_from(&self.mean);
        mean.rows_mut(2 * n_old, 2 * n_new).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        cov.view_mut((0, 0), (2 * n_old, 2 * n_old))
            .copy_from(&self.cov);
        cov.view_mut((2 * n_old, 2 * n_old), (2 * n_new, 2 * n_new))
            .copy_from(&other.cov);
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        GaussianState { modes, mean, cov }
    }

    /// Apply a Gaussian gate: mean ← S·mean + d, cov ← S·cov·Sᵀ.
    pub fn apply_gate(&self, op: &GateOp) -> Result<Self> {
        let (s_local, d_local) = gate_symplectic(&op.gate)?;
        let idx: Vec<usize> = op
            .targets
            .iter()
            .map(|m| self.mode_index(m))
            .collect::<Result<_>>()?;

        let n = self.n_modes();
        let mut s = DMatrix::identity(2 * n, 2 * n);
        let mut d = DVector::zeros(2 * n);
        for (a, &ia) in idx.iter().enumerate() {
            d[2 * ia] += d_local[2 * a];
            d[2 * ia + 1] += d_local[2 * a + 1];
            for (b, &ib) in idx.iter().enumerate() {
                s[(2 * ia, 2 * ib)] = s_local[(2 * a, 2 * b)];
                s[(2 * ia, 2 * ib + 1)] = s_local[(2 * a, 2 * b + 1)];
                s[(2 * ia + 1, 2 * ib)] = s_local[(2 * a + 1, 2 * b)];
                s[(2 * ia + 1, 2 * ib + 1)] = s_local[(2 * a + 1, 2 * b + 1)];
            }
        }
        let mean = &s * &self.mean + d;
        let cov = &s * &self.cov * s.transpose();
        Ok(GaussianState {
            modes: self.modes.clone(),
            mean,
            cov,
        })
    }

    pub fn apply_all(&self, ops: &[GateOp]) -> Result<Self> {
        let mut st = self.clone();
        for op in ops {
            st = st.apply_gate(op)?;
        }
        Ok(st)
    }

    /// Shift one mode's mean by (dx, dp) without touching the covariance.
    pub fn displace_mode(&self, mode: &ModeId, dx: f64, dp: f64) -> Result<Self> {
        let k = self.mode_index(mode)?;
        let mut out = self.clone();
        out.mean[2 * k] += dx;
        out.mean[2 * k + 1] += dp;
        Ok(out)
    }

    /// Marginal state on a subset of modes (drop the rest).
    pub fn reduced(&self, keep: &[ModeId]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|m| self.mode_index(m))
            .collect::<Result<_>>()?;
        let k = idx.len();
        let mut mean = DVector::zeros(2 * k);
        let mut cov = DMatrix::zeros(2 * k, 2 * k);
        for (a, &ia) in idx.iter().enumerate() {
            mean[2 * a] = self.mean[2 * ia];
            mean[2 * a + 1] = self.mean[2 * ia + 1];
            for (b, &ib) in idx.iter().enumerate() {
                for u in 0..2 {
                    for v in 0..2 {
                        cov[(2 * a + u, 2 * b + v)] = self.cov[(2 * ia + u, 2 * ib + v)];
                    }
                }
            }
        }
        Ok(GaussianState {
            modes: keep.to_vec(),
            mean,
            cov,
        })
    }

    /// Marginal (mean, variance) of the quadrature p̂ cos θ + x̂ sin θ on a mode.
    pub fn quadrature_marginal(&self, mode: &ModeId, theta: f64) -> Result<(f64, f64)> {
        let k = self.mode_index(mode)?;
        let (ux, up) = (theta.sin(), theta.cos());
        let mu = ux * self.mean[2 * k] + up * self.mean[2 * k + 1];
        let var = ux * ux * self.cov[(2 * k, 2 * k)]
            + 2.0 * ux * up * self.cov[(2 * k, 2 * k + 1)]
            + up * up * self.cov[(2 * k + 1, 2 * k + 1)];
        Ok((mu, var))
    }

    /// Condition on a homodyne measurement of p̂ cos θ + x̂ sin θ = m on `mode`.
    ///
    /// Returns the post-measurement state on the remaining modes (the measured
    /// mode is removed) and the Gaussian probability density of the outcome.
    pub fn homodyne_condition(
        &self,
        mode: &ModeId,
        theta: f64,
        outcome: f64,
    ) -> Result<(Self, f64)> {
        let k = self.mode_index(mode)?;
        let (mu, var) = self.quadrature_marginal(mode, theta)?;
        if var <= 1e-14 {
            return Err(Error::SingularQuadrature {
                mode: mode.0.clone(),
                var,
            });
        }
        let (ux, up) = (theta.sin(), theta.cos());

        let n = self.n_modes();
        let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        // Cross covariance of the kept quadratures with the measured one.
        let mut c = DVector::zeros(2 * (n - 1));
        for (a, &ia) in keep.iter().enumerate() {
            for u in 0..2 {
                c[2 * a + u] =
                    ux * self.cov[(2 * ia + u, 2 * k)] + up * self.cov[(2 * ia + u, 2 * k + 1)];
            }
        }
        let gain = (outcome - mu) / var;
        let mut mean = DVector::zeros(2 * (n - 1));
        let mut cov = DMatrix::zeros(2 * (n - 1), 2 * (n - 1));
        for (a, &ia) in keep.iter().enumerate() {
            for u in 0..2 {
                mean[2 * a + u] = self.mean[2 * ia + u] + c[2 * a + u] * gain;
            }
            for (b, &ib) in keep.iter().enumerate() {
                for u in 0..2 {
                    for v in 0..2 {
                        cov[(2 * a + u, 2 * b + v)] =
                            self.cov[(2 * ia + u, 2 * ib + v)] - c[2 * a + u] * c[2 * b + v] / var;
                    }
                }
            }
        }
        let density =
            (-0.5 * (outcome - mu).powi(2) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let modes = keep.iter().map(|&i| self.modes[i].clone()).collect();
        Ok((GaussianState { modes, mean, cov }, density))
    }

    /// Sample a homodyne outcome from the exact Gaussian marginal, then
    /// condition on it. Deterministic for a fixed RNG stream.
    pub fn homodyne_sample<R: Rng + ?Sized>(
        &self,
        mode: &ModeId,
        theta: f64,
        rng: &mut R,
    ) -> Result<(f64, Self)> {
        let (mu, var) = self.quadrature_marginal(mode, theta)?;
        if var <= 1e-14 {
            return Err(Error::SingularQuadrature {
                mode: mode.0.clone(),
                var,
            });
        }
        let z: f64 = rng.sample(StandardNormal);
        let m = mu + var.sqrt() * z;
        let (state, _) = self.homodyne_condition(mode, theta, m)?;
        Ok((m, state))
    }

    /// det(2Σ); equals 1 for pure states.
    pub fn purity_det(&self) -> f64 {
        (self.cov.clone() * 2.0).determinant()
    }

    /// Check symmetry of Σ and the uncertainty relation Σ + (i/2)Ω ⪰ 0,
    /// the latter through the symplectic eigenvalues of Σ.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_modes();
        for i in 0..2 * n {
            for j in 0..2 * n {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        // Symplectic eigenvalues: the eigenvalues of ΩΣ come in pairs ±iν;
        // uncertainty requires every ν ≥ 1/2 − tolerance.
        let omega = symplectic_form(n);
        let m = &omega * &self.cov;
        for ev in m.complex_eigenvalues().iter() {
            let nu = ev.norm();
            if nu < 0.5 - 1e-9 {
                return Err(Error::Validation(format!(
                    "uncertainty violated: symplectic eigenvalue {nu:.12} < 1/2"
                )));
            }
        }
        Ok(())
    }
}

/// Initial condition of one mode in an oracle circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialMode {
    Vacuum,
    /// Squeezed vacuum, `Squeeze{r, theta}` applied to vacuum.
    Squeezed {
        r: f64,
        theta: f64,
    },
}

/// A Gaussian circuit with homodyne conditioning, used as the convention
/// oracle: its implemented input→output map is extracted numerically.
#[derive(Clone, Debug)]
pub struct CircuitSpec {
    /// All circuit modes with their initial states, in order.
    pub prep: Vec<(ModeId, InitialMode)>,
    /// Gates applied in order.
    pub gates: Vec<GateOp>,
    /// Homodyne measurements (applied after all gates, in order):
    /// (mode, angle θ of p̂cosθ + x̂sinθ, outcome).
    pub measurements: Vec<(ModeId, f64, f64)>,
}

impl CircuitSpec {
    fn build_state(&self) -> Result<GaussianState> {
        let modes: Vec<ModeId> = self.prep.iter().map(|(m, _)| m.clone()).collect();
        let mut st = GaussianState::vacuum(modes);
        for (m, init) in &self.prep {
            if let InitialMode::Squeezed { r, theta } = *init {
                st = st.apply_gate(&GateOp::single(Gate::Squeeze { r, theta }, m.clone())?)?;
            }
        }
        Ok(st)
    }

    /// Run the circuit with extra input displacements, conditioning every
    /// measurement on its listed outcome. Returns the conditioned state.
    pub fn run_conditioned(&self, input_shift: &[(ModeId, f64, f64)]) -> Result<GaussianState> {
        let mut st = self.build_state()?;
        for (m, dx, dp) in input_shift {
            st = st.displace_mode(m, *dx, *dp)?;
        }
        st = st.apply_all(&self.gates)?;
        for (m, theta, outcome) in &self.measurements {
            let (next, _) = st.homodyne_condition(m, *theta, *outcome)?;
            st = next;
        }
        Ok(st)
    }
}

/// Extract the affine map (L, t) implemented by a conditioned Gaussian
/// circuit: out_mean = L · in_mean + t, with all measurements fixed at their
/// listed outcomes.
///
/// Gaussian conditioning is exactly affine in the input means, so L is read
/// off from unit displacements of the input quadratures.
pub fn extract_implemented_affine(
    circuit: &CircuitSpec,
    in_modes: &[ModeId],
    out_modes: &[ModeId],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let base = circuit.run_conditioned(&[])?;
    let read = |st: &GaussianState| -> Result<DVector<f64>> {
        let mut v = DVector::zeros(2 * out_modes.len());
        for (a, m) in out_modes.iter().enumerate() {
            let (x, p) = st.mode_mean(m)?;
            v[2 * a] = x;
            v[2 * a + 1] = p;
        }
        Ok(v)
    };
    let t = read(&base)?;
    let mut l = DMatrix::zeros(2 * out_modes.len(), 2 * in_modes.len());
    for (b, m) in in_modes.iter().enumerate() {
        for (off, (dx, dp)) in [(0usize, (1.0, 0.0)), (1usize, (0.0, 1.0))] {
            let st = circuit.run_conditioned(&[(m.clone(), dx, dp)])?;
            let shifted = read(&st)?;
            let col = &shifted - &t;
            l.column_mut(2 * b + off).copy_from(&col);
        }
    }
    Ok((l, t))
}

/// The symplectic part of the implemented map (measurement outcomes fixed,
/// conventionally at zero for displacement-free extraction).
pub fn extract_implemented_symplectic(
    circuit: &CircuitSpec,
    in_modes: &[ModeId],
    out_modes: &[ModeId],
) -> Result<DMatrix<f64>> {
    let (l, _) = extract_implemented_affine(circuit, in_modes, out_modes)?;
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn m(s: &str) -> ModeId {
        ModeId::new(s)
    }

    #[test]
    fn rotate_leaves_vacuum_invariant() {
        let st = GaussianState::vacuum(vec![m("a")]);
        let out = st
            .apply_gate(&GateOp::single(Gate::Rotate(std::f64::consts::FRAC_PI_2), "a").unwrap())
            .unwrap();
        assert!((out.cov() - st.cov()).norm() < 1e-14);
        assert!(out.mean().norm() < 1e-14);
    }

    #[test]
    fn squeeze_variances_follow_convention() {
        let st = GaussianState::vacuum(vec![m("a")]);
        let out = st
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 0.5, theta: 0.0 }, "a").unwrap())
            .unwrap();
        assert_abs_diff_eq!(out.cov()[(0, 0)], (-1.0f64).exp() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cov()[(1, 1)], (1.0f64).exp() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn beamsplitter_makes_epr_correlations() {
        // x-squeezed ⊗ p-squeezed through a 50:50 splitter: the two-mode
        // squeezed state with Var(x₁−x₂) = Var(p₁+p₂) = e^{-2r}.
        let r = 0.9;
        let st = GaussianState::vacuum(vec![m("a"), m("b")]);
        let st = st
            .apply_gate(&GateOp::single(Gate::Squeeze { r, theta: 0.0 }, "a").unwrap())
            .unwrap();
        let st = st
            .apply_gate(
                &GateOp::single(
                    Gate::Squeeze {
                        r,
                        theta: std::f64::consts::PI,
                    },
                    "b",
                )
                .unwrap(),
            )
            .unwrap();
        let st = st
            .apply_gate(&GateOp::pair(Gate::BeamSplit(std::f64::consts::FRAC_PI_4), "a", "b").unwrap())
            .unwrap();
        let c = st.cov();
        let var_xminus = c[(0, 0)] + c[(2, 2)] - 2.0 * c[(0, 2)];
        let var_pplus = c[(1, 1)] + c[(3, 3)] + 2.0 * c[(1, 3)];
        assert_abs_diff_eq!(var_xminus, (-2.0 * r).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(var_pplus, (-2.0 * r).exp(), epsilon = 1e-12);
        st.check_invariants().unwrap();
        assert_abs_diff_eq!(st.purity_det(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn displacement_moves_mean() {
        let st = GaussianState::vacuum(vec![m("a")]);
        let alpha = C64::new(0.3, -0.4);
        let out = st
            .apply_gate(&GateOp::single(Gate::Displace(alpha), "a").unwrap())
            .unwrap();
        assert_abs_diff_eq!(out.mean()[0], std::f64::consts::SQRT_2 * 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(out.mean()[1], -std::f64::consts::SQRT_2 * 0.4, epsilon = 1e-14);
        // X and Z shifts agree with their displacement equivalents.
        let out2 = st
            .apply_gate(&GateOp::single(Gate::XShift(0.7), "a").unwrap())
            .unwrap();
        assert_abs_diff_eq!(out2.mean()[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(out2.mean()[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gates_are_symplectic_and_unitary_preserving() {
        let gates = [
            Gate::Rotate(0.37),
            Gate::Squeeze { r: 0.8, theta: 1.1 },
            Gate::Shear(0.45),
        ];
        for g in gates {
            let (s, _) = gate_symplectic(&g).unwrap();
            let omega = symplectic_form(1);
            let resid = (&s * &omega * s.transpose() - &omega).norm();
            assert!(resid < 1e-10, "{} not symplectic: {resid}", g.name());
        }
        for g in [Gate::BeamSplit(0.6), Gate::ControlledZ(1.3)] {
            let (s, _) = gate_symplectic(&g).unwrap();
            let omega = symplectic_form(2);
            let resid = (&s * &omega * s.transpose() - &omega).norm();
            assert!(resid < 1e-10, "{} not symplectic: {resid}", g.name());
        }
    }

    #[test]
    fn unknown_mode_is_reported_by_label() {
        let st = GaussianState::vacuum(vec![m("a")]);
        let err = st.apply_gate(&GateOp::single(Gate::Rotate(0.1), "zz").unwrap());
        match err {
            Err(Error::UnknownMode(label)) => assert_eq!(label, "zz"),
            other => panic!("expected UnknownMode, got {other:?}"),
        }
    }

    #[test]
    fn homodyne_on_product_leaves_partner_untouched() {
        let st = GaussianState::vacuum(vec![m("a"), m("b")]);
        // Measure x̂ on `a` (θ = π/2), outcome 0.
        let (out, density) = st
            .homodyne_condition(&m("a"), std::f64::consts::FRAC_PI_2, 0.0)
            .unwrap();
        assert_eq!(out.n_modes(), 1);
        assert!((out.cov()[(0, 0)] - 0.5).abs() < 1e-14);
        // Density of N(0, 1/2) at 0 is 1/√π.
        assert_abs_diff_eq!(density, 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn homodyne_tmss_steers_partner_mean() {
        // Measuring x₁ = m on a strongly squeezed pair pins x₂ ≈ m.
        let r = 10.0;
        let st = GaussianState::vacuum(vec![m("a"), m("b")]);
        let st = st
            .apply_gate(&GateOp::single(Gate::Squeeze { r, theta: 0.0 }, "a").unwrap())
            .unwrap();
        let st = st
            .apply_gate(
                &GateOp::single(
                    Gate::Squeeze {
                        r,
                        theta: std::f64::consts::PI,
                    },
                    "b",
                )
                .unwrap(),
            )
            .unwrap();
        let st = st
            .apply_gate(&GateOp::pair(Gate::BeamSplit(std::f64::consts::FRAC_PI_4), "a", "b").unwrap())
            .unwrap();
        let (out, _) = st
            .homodyne_condition(&m("a"), std::f64::consts::FRAC_PI_2, 1.0)
            .unwrap();
        let (x2, _) = out.mode_mean(&m("b")).unwrap();
        assert!((x2 - 1.0).abs() < 1e-6, "conditional mean {x2} should be ≈ 1");
    }

    #[test]
    fn sequential_p_then_x_outcome_independent_for_product() {
        let st = GaussianState::vacuum(vec![m("a"), m("b")]);
        let (s1, _) = st.homodyne_condition(&m("a"), 0.0, 0.4).unwrap();
        let (s2, _) = st.homodyne_condition(&m("a"), 0.0, -1.3).unwrap();
        assert!((s1.cov() - s2.cov()).norm() < 1e-14);
        assert!((s1.mean() - s2.mean()).norm() < 1e-14);
    }

    #[test]
    fn homodyne_sample_reproducible_and_calibrated() {
        let st = GaussianState::vacuum(vec![m("a")]);
        let mut rng1 = ChaCha12Rng::seed_from_u64(7);
        let mut rng2 = ChaCha12Rng::seed_from_u64(7);
        let (m1, _) = st
            .homodyne_sample(&m("a"), std::f64::consts::FRAC_PI_2, &mut rng1)
            .unwrap();
        let (m2, _) = st
            .homodyne_sample(&m("a"), std::f64::consts::FRAC_PI_2, &mut rng2)
            .unwrap();
        assert_eq!(m1, m2);

        // Sample variance of x̂ on vacuum ≈ 1/2 within 3σ for 10⁵ draws;
        // for an x-squeezed mode ≈ e^{-2}/2.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let nsamp = 100_000usize;
        let mut acc = 0.0;
        for _ in 0..nsamp {
            let (v, _) = st
                .homodyne_sample(&m("a"), std::f64::consts::FRAC_PI_2, &mut rng)
                .unwrap();
            acc += v * v;
        }
        let var = acc / nsamp as f64;
        let sigma_est = 0.5 * (2.0 / nsamp as f64).sqrt();
        assert!(
            (var - 0.5).abs() < 3.0 * sigma_est,
            "vacuum sample variance {var}"
        );

        let sq = st
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 1.0, theta: 0.0 }, "a").unwrap())
            .unwrap();
        let target = (-2.0f64).exp() / 2.0;
        let mut acc = 0.0;
        for _ in 0..nsamp {
            let (v, _) = sq
                .homodyne_sample(&m("a"), std::f64::consts::FRAC_PI_2, &mut rng)
                .unwrap();
            acc += v * v;
        }
        let var = acc / nsamp as f64;
        let sigma_est = target * (2.0 / nsamp as f64).sqrt();
        assert!(
            (var - target).abs() < 3.0 * sigma_est,
            "squeezed sample variance {var} vs {target}"
        );
    }

    #[test]
    fn homodyne_density_integrates_to_one() {
        let st = GaussianState::vacuum(vec![m("a"), m("b")]);
        let st = st
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 0.6, theta: 0.3 }, "a").unwrap())
            .unwrap();
        let grid = crate::math::linspace(-12.0, 12.0, 4801);
        let h = 24.0 / 4800.0;
        let dens: Vec<f64> = grid
            .iter()
            .map(|&x| st.homodyne_condition(&m("a"), 0.9, x).unwrap().1)
            .collect();
        let total = crate::math::trapezoid(&dens, h);
        assert!((total - 1.0).abs() < 1e-4, "density integral {total}");
    }

    #[test]
    fn oracle_self_consistency_bare_gate() {
        // The extracted map of a bare gate is that gate's symplectic matrix.
        let circuit = CircuitSpec {
            prep: vec![(m("a"), InitialMode::Vacuum)],
            gates: vec![GateOp::single(Gate::Squeeze { r: 0.32, theta: 0.77 }, "a").unwrap()],
            measurements: vec![],
        };
        let l = extract_implemented_symplectic(&circuit, &[m("a")], &[m("a")]).unwrap();
        let (s, _) = gate_symplectic(&Gate::Squeeze { r: 0.32, theta: 0.77 }).unwrap();
        assert!((l - s).norm() < 1e-12);
    }

    #[test]
    fn composition_stays_symplectic() {
        let gates = vec![
            GateOp::single(Gate::Rotate(0.3), "a").unwrap(),
            GateOp::single(Gate::Squeeze { r: 0.5, theta: 0.2 }, "b").unwrap(),
            GateOp::pair(Gate::BeamSplit(0.9), "a", "b").unwrap(),
            GateOp::single(Gate::Shear(0.8), "a").unwrap(),
            GateOp::pair(Gate::ControlledZ(0.7), "a", "b").unwrap(),
        ];
        let circuit = CircuitSpec {
            prep: vec![(m("a"), InitialMode::Vacuum), (m("b"), InitialMode::Vacuum)],
            gates,
            measurements: vec![],
        };
        let l = extract_implemented_symplectic(&circuit, &[m("a"), m("b")], &[m("a"), m("b")])
            .unwrap();
        let omega = symplectic_form(2);
        assert!((l.clone() * &omega * l.transpose() - &omega).norm() < 1e-9);
    }
}

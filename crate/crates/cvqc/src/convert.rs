//! Hand-off from the Gaussian backend to the Fock backend: exact Fock
//! amplitudes of a pure Gaussian state from its means and covariances.
//!
//! A pure Gaussian state satisfies (â − ᾱ)|ψ⟩ = Γ(â† − ᾱ*)|ψ⟩ for a complex
//! symmetric Γ, which turns ⟨n|â_i|ψ⟩ into a two-term recursion over photon
//! numbers. Γ and the effective displacement come from the quadrature
//! covariance blocks; the recursion then fills the amplitude tensor in order
//! of total photon number.

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::gaussian::GaussianState;

/// Hard mode budget for hand-offs: more modes than this cannot be
/// materialized at a useful cutoff.
pub const HANDOFF_MODE_BUDGET: usize = 4;

/// Leakage limit: if the truncated tensor misses more than this much
/// population, the hand-off aborts.
pub const HANDOFF_LEAKAGE_LIMIT: f64 = 1e-4;

/// Convert a pure Gaussian state to Fock amplitudes at a uniform cutoff.
///
/// Errors if the state is not pure to 1e-6 in det(2Σ), if the mode budget is
/// exceeded (reduce the live mode count), or if the truncated amplitudes
/// leak more than [`HANDOFF_LEAKAGE_LIMIT`] (increase the cutoff).
pub fn fock_from_gaussian(state: &GaussianState, cutoff: usize) -> Result<FockState> {
    let n = state.n_modes();
    if n == 0 {
        return Err(Error::ShapeMismatch("no modes to hand off".into()));
    }
    if n > HANDOFF_MODE_BUDGET || (n == HANDOFF_MODE_BUDGET && cutoff > 40) {
        return Err(Error::ModeBudget {
            modes: n,
            cutoff,
        });
    }
    let purity = state.purity_det();
    if (purity - 1.0).abs() > 1e-6 {
        return Err(Error::Validation(format!(
            "hand-off needs a pure state: det(2Σ) = {purity:.9}"
        )));
    }

    // Covariance blocks in the (x, p) split.
    let cov = state.cov();
    let mean = state.mean();
    let mut sxx = DMatrix::<f64>::zeros(n, n);
    let mut spp = DMatrix::<f64>::zeros(n, n);
    let mut sxp = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sxx[(i, j)] = cov[(2 * i, 2 * j)];
            spp[(i, j)] = cov[(2 * i + 1, 2 * j + 1)];
            sxp[(i, j)] = cov[(2 * i, 2 * j + 1)];
        }
    }
    let spx = sxp.transpose();

    // M = ⟨δâ δâᵀ⟩, K = ⟨δâ δâ†⟩ in the annihilation basis.
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut k = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = C64::new(
                0.5 * (sxx[(i, j)] - spp[(i, j)]),
                0.5 * (sxp[(i, j)] + spx[(i, j)]),
            );
            k[(i, j)] = C64::new(
                0.5 * (sxx[(i, j)] + spp[(i, j)]) + if i == j { 0.5 } else { 0.0 },
                0.5 * (spx[(i, j)] - sxp[(i, j)]),
            );
        }
    }
    // Γ = M · K^{−T}.
    let kt = k.transpose();
    let gamma = kt
        .lu()
        .solve(&m.transpose())
        .ok_or_else(|| Error::Validation("singular K matrix in hand-off".into()))?
        .transpose();

    let alpha: DVector<C64> = DVector::from_fn(n, |i, _| {
        C64::new(mean[2 * i], mean[2 * i + 1]) / std::f64::consts::SQRT_2
    });
    let dvec: DVector<C64> = {
        let conj = alpha.map(|z| z.conj());
        &alpha - &gamma * conj
    };

    // Fill amplitudes in order of total photon number:
    // √(n_i) c_n = d_i c_{n−e_i} + Σ_j Γ_{ij} √((n−e_i)_j) c_{n−e_i−e_j}.
    let cutoffs = vec![cutoff; n];
    let mut amps = ArrayD::<C64>::zeros(IxDyn(&cutoffs));
    amps[IxDyn(&vec![0usize; n])] = C64::new(1.0, 0.0);

    let mut level: Vec<Vec<usize>> = vec![vec![0; n]];
    for total in 1..=(n * (cutoff - 1)) {
        let mut next: Vec<Vec<usize>> = Vec::new();
        enumerate_level(n, cutoff, total, &mut vec![0; n], 0, total, &mut next);
        for idx in &next {
            let i = idx.iter().position(|&v| v > 0).expect("nonzero index");
            let mut base = idx.clone();
            base[i] -= 1;
            let mut val = dvec[i] * amps[IxDyn(&base)];
            for j in 0..n {
                if base[j] == 0 {
                    continue;
                }
                let mut lower = base.clone();
                lower[j] -= 1;
                val += gamma[(i, j)] * C64::new((base[j] as f64).sqrt(), 0.0)
                    * amps[IxDyn(&lower)];
            }
            amps[IxDyn(idx)] = val / C64::new((idx[i] as f64).sqrt(), 0.0);
        }
        level = next;
        if level.is_empty() {
            break;
        }
    }

    let norm_sqr: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if norm_sqr <= 1e-300 {
        return Err(Error::Validation("hand-off produced a null tensor".into()));
    }
    let st = FockState::from_amplitudes(cutoffs, amps)?;
    // Leakage diagnostic: population in the top two levels of any mode. The
    // amplitude tails of Gaussian states decay geometrically, so boundary
    // mass bounds the truncated remainder.
    let mut leakage = 0.0f64;
    for mode in 0..n {
        let mut shell = st.leakage(mode);
        if cutoff >= 2 {
            let slice = st.amplitudes().index_axis(ndarray::Axis(mode), cutoff - 2);
            shell += slice.iter().map(|z| z.norm_sqr()).sum::<f64>() / st.norm_sqr();
        }
        leakage = leakage.max(shell);
    }
    if leakage > HANDOFF_LEAKAGE_LIMIT {
        return Err(Error::LeakageTooLarge {
            leakage,
            limit: HANDOFF_LEAKAGE_LIMIT,
        });
    }
    Ok(st)
}

fn enumerate_level(
    n: usize,
    cutoff: usize,
    _total: usize,
    current: &mut Vec<usize>,
    pos: usize,
    remaining: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if pos == n {
        if remaining == 0 {
            out.push(current.clone());
        }
        return;
    }
    let max_here = remaining.min(cutoff - 1);
    for v in 0..=max_here {
        current[pos] = v;
        enumerate_level(n, cutoff, _total, current, pos + 1, remaining - v, out);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fidelity;
    use crate::gates::{Gate, GateOp, ModeId};
    use num_complex::Complex64 as C64;

    fn m(s: &str) -> ModeId {
        ModeId::new(s)
    }

    #[test]
    fn squeezed_state_amplitudes_match_gate_route() {
        let d = 40;
        let g = GaussianState::vacuum(vec![m("a")])
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 0.7, theta: 0.3 }, "a").unwrap())
            .unwrap();
        let handoff = fock_from_gaussian(&g, d).unwrap();
        let direct = FockState::vacuum(vec![d])
            .apply_gate(&Gate::Squeeze { r: 0.7, theta: 0.3 }, &[0])
            .unwrap();
        let f = fidelity(&handoff, &direct).unwrap();
        assert!(f > 1.0 - 1e-9, "squeezed hand-off fidelity {f}");
    }

    #[test]
    fn coherent_state_amplitudes_match() {
        let d = 35;
        let alpha = C64::new(0.8, -0.5);
        let g = GaussianState::vacuum(vec![m("a")])
            .apply_gate(&GateOp::single(Gate::Displace(alpha), "a").unwrap())
            .unwrap();
        let handoff = fock_from_gaussian(&g, d).unwrap();
        let direct = FockState::coherent(alpha, d);
        let f = fidelity(&handoff, &direct).unwrap();
        assert!(f > 1.0 - 1e-10, "coherent hand-off fidelity {f}");
    }

    #[test]
    fn tmss_two_mode_amplitudes_match() {
        let d = 25;
        let r = 0.68;
        let g = GaussianState::vacuum(vec![m("a"), m("b")])
            .apply_gate(&GateOp::single(Gate::Squeeze { r, theta: 0.0 }, "a").unwrap())
            .unwrap()
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
            .unwrap()
            .apply_gate(
                &GateOp::pair(Gate::BeamSplit(std::f64::consts::FRAC_PI_4), "a", "b").unwrap(),
            )
            .unwrap();
        let handoff = fock_from_gaussian(&g, d).unwrap();
        let direct = FockState::tmss(r, d);
        let f = fidelity(&handoff, &direct).unwrap();
        assert!(f > 1.0 - 1e-9, "TMSS hand-off fidelity {f}");
    }

    #[test]
    fn conditioned_state_handoff_matches_fock_projection() {
        // Measure x₁ = 0 on a two-mode squeezed pair in both backends.
        let d = 40;
        let r = 0.68;
        let g = GaussianState::vacuum(vec![m("a"), m("b")])
            .apply_gate(&GateOp::single(Gate::Squeeze { r, theta: 0.0 }, "a").unwrap())
            .unwrap()
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
            .unwrap()
            .apply_gate(
                &GateOp::pair(Gate::BeamSplit(std::f64::consts::FRAC_PI_4), "a", "b").unwrap(),
            )
            .unwrap();
        let (cond, _) = g
            .homodyne_condition(&m("a"), std::f64::consts::FRAC_PI_2, 0.0)
            .unwrap();
        let handoff = fock_from_gaussian(&cond, d).unwrap();

        let fock = FockState::tmss(r, d);
        let (proj, _) = fock
            .homodyne_project(0, std::f64::consts::FRAC_PI_2, 0.0)
            .unwrap();
        let f = fidelity(&handoff, &proj).unwrap();
        assert!(f > 0.999, "cross-backend conditioning fidelity {f}");
        // The remaining mode is x-squeezed: Var(x) < 1/2 < Var(p).
        let lad = crate::fock::ladder_matrices(d).unwrap();
        let x2 = crate::math::cmatmul(lad.x.view(), lad.x.view());
        let vx = handoff.expectation_one(x2.view(), 0).unwrap().re;
        assert!(vx < 0.5, "conditioned mode should be x-squeezed: {vx}");
    }

    #[test]
    fn impure_or_oversized_requests_rejected() {
        let g = GaussianState::vacuum(vec![m("a"), m("b")]);
        let reduced = g.reduced(&[m("a")]).unwrap();
        assert!(fock_from_gaussian(&reduced, 10).is_ok());

        // Tracing out half of an entangled pair leaves an impure state.
        let ent = g
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 1.0, theta: 0.0 }, "a").unwrap())
            .unwrap()
            .apply_gate(
                &GateOp::single(
                    Gate::Squeeze {
                        r: 1.0,
                        theta: std::f64::consts::PI,
                    },
                    "b",
                )
                .unwrap(),
            )
            .unwrap()
            .apply_gate(
                &GateOp::pair(Gate::BeamSplit(std::f64::consts::FRAC_PI_4), "a", "b").unwrap(),
            )
            .unwrap()
            .reduced(&[m("a")])
            .unwrap();
        assert!(matches!(
            fock_from_gaussian(&ent, 10),
            Err(Error::Validation(_))
        ));

        let five = GaussianState::vacuum(
            ["a", "b", "c", "d", "e"].iter().map(|s| m(s)).collect(),
        );
        assert!(matches!(
            fock_from_gaussian(&five, 8),
            Err(Error::ModeBudget { .. })
        ));
    }

    #[test]
    fn leakage_guard_trips_for_hot_states() {
        let g = GaussianState::vacuum(vec![m("a")])
            .apply_gate(&GateOp::single(Gate::Squeeze { r: 2.5, theta: 0.0 }, "a").unwrap())
            .unwrap();
        match fock_from_gaussian(&g, 10) {
            Err(Error::LeakageTooLarge { .. }) => {}
            other => panic!("expected leakage error, got {other:?}"),
        }
    }
}

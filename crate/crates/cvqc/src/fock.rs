//! Truncated Fock-space backend: multi-mode state tensors, gate matrices
//! (including the cubic gate and other position-diagonal non-Gaussian gates),
//! Wigner functions, homodyne and photon-number projections.
//!
//! Two-mode operators act on the flattened basis |n_a n_b⟩ ↦ n_a·d_b + n_b,
//! where (a, b) is the target order given at the call site.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, IxDyn};
use num_complex::Complex64 as C64;
use rand::Rng;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::math::{
    cmatmul, dagger, expm, hermite_functions, hermite_matrix, linspace, log_factorial,
    trapezoid_weights,
};

/// Ladder and quadrature matrices at cutoff `d`.
pub struct Ladder {
    pub a: Array2<C64>,
    pub adag: Array2<C64>,
    pub x: Array2<C64>,
    pub p: Array2<C64>,
}

/// Annihilation, creation and quadrature matrices: a|n⟩ = √n |n−1⟩,
/// x̂ = (a+a†)/√2, p̂ = (a−a†)/(i√2).
pub fn ladder_matrices(d: usize) -> Result<Ladder> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "cutoff {d} too small, need d ≥ 2"
        )));
    }
    let mut a = Array2::<C64>::zeros((d, d));
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let adag = dagger(&a);
    let inv_sqrt2 = C64::new(1.0 / std::f64::consts::SQRT_2, 0.0);
    let x = (&a + &adag).mapv(|z| z * inv_sqrt2);
    let p = (&a - &adag).mapv(|z| z * inv_sqrt2 * C64::new(0.0, -1.0));
    Ok(Ladder { a, adag, x, p })
}

/// A labeled operator on the truncated space.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub matrix: Array2<C64>,
    pub label: String,
}

impl FockOperator {
    pub fn new(matrix: Array2<C64>, label: impl Into<String>) -> Self {
        FockOperator {
            matrix,
            label: label.into(),
        }
    }

    /// Max |(U†U − I)| on the sub-block that excludes the top ⌈d/5⌉ levels
    /// of each mode factor. Truncation corrupts the highest levels of any
    /// exponentiated generator, so unitarity is only meaningful below them.
    pub fn unitarity_defect(&self, mode_dims: &[usize]) -> f64 {
        let utu = cmatmul(dagger(&self.matrix).view(), self.matrix.view());
        let keep: Vec<usize> = mode_dims.iter().map(|&d| d - d.div_ceil(5)).collect();
        let total: usize = mode_dims.iter().product();
        assert_eq!(total, self.matrix.nrows(), "mode dims mismatch");
        let in_block = |mut idx: usize| -> bool {
            for (k, &d) in mode_dims.iter().enumerate().rev() {
                let n = idx % d;
                idx /= d;
                if n >= keep[k] {
                    return false;
                }
            }
            true
        };
        let mut defect = 0.0f64;
        for i in 0..total {
            if !in_block(i) {
                continue;
            }
            for j in 0..total {
                if !in_block(j) {
                    continue;
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((utu[(i, j)] - C64::new(expect, 0.0)).norm());
            }
        }
        defect
    }
}

// ---------------------------------------------------------------------------
// Gate matrices
// ---------------------------------------------------------------------------

#[derive(PartialEq, Eq, Hash, Clone)]
struct GateKey {
    name: &'static str,
    bits: Vec<u64>,
    dims: (usize, usize),
}

fn cache() -> &'static Mutex<HashMap<GateKey, Arc<Array2<C64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<GateKey, Arc<Array2<C64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: GateKey, build: impl FnOnce() -> Array2<C64>) -> Arc<Array2<C64>> {
    if let Some(hit) = cache().lock().unwrap().get(&key) {
        return hit.clone();
    }
    let made = Arc::new(build());
    cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert(made.clone())
        .clone()
}

/// Analytic displacement matrix ⟨m|D(α)|n⟩ via associated Laguerre
/// polynomials; log-scaled so large Fock indices cannot overflow.
pub fn displacement_matrix(alpha: C64, d: usize) -> Array2<C64> {
    let na = alpha.norm_sqr();
    let mut out = Array2::<C64>::zeros((d, d));
    // Laguerre recurrence per diagonal offset k = m − n ≥ 0.
    for k in 0..d {
        // L_j^{(k)}(na) for j = 0..d.
        let mut lag = Vec::with_capacity(d);
        lag.push(1.0f64);
        if d > 1 {
            lag.push(1.0 + k as f64 - na);
        }
        for j in 1..d - 1 {
            let jf = j as f64;
            let next =
                ((2.0 * jf + 1.0 + k as f64 - na) * lag[j] - (jf + k as f64) * lag[j - 1]) / (jf + 1.0);
            lag.push(next);
        }
        for n in 0..d.saturating_sub(k) {
            let m = n + k;
            // √(n!/m!) α^k e^{-|α|²/2} L_n^{(k)}(|α|²)
            let log_mag = 0.5 * (log_factorial(n) - log_factorial(m)) - na / 2.0;
            let alpha_k = if k == 0 { C64::new(1.0, 0.0) } else { alpha.powu(k as u32) };
            let val = alpha_k * C64::new(log_mag.exp() * lag[n], 0.0);
            out[(m, n)] = val;
            if k > 0 {
                // ⟨n|D|m⟩ = (−α*)^k √(n!/m!) e^{-|α|²/2} L_n^{(k)}
                let alpha_ck = (-alpha.conj()).powu(k as u32);
                out[(n, m)] = alpha_ck * C64::new(log_mag.exp() * lag[n], 0.0);
            }
        }
    }
    out
}

fn log_binomial(n: usize, k: usize) -> f64 {
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// Analytic beam-splitter matrix for exp[θ(a₁†a₂ − a₁a₂†)] on the flattened
/// two-mode basis. Exact projection of the infinite-dimensional unitary onto
/// the truncated space (photon number is conserved, so no truncation error).
pub fn beamsplitter_matrix(theta: f64, d1: usize, d2: usize) -> Array2<C64> {
    let (c, s) = (theta.cos(), theta.sin());
    let dim = d1 * d2;
    let mut out = Array2::<C64>::zeros((dim, dim));
    // pow with 0^0 = 1 handled in log space.
    let pow_log = |base: f64, e: i64| -> Option<(f64, f64)> {
        // returns (sign, log magnitude) or None for a zero factor
        if e == 0 {
            return Some((1.0, 0.0));
        }
        if base == 0.0 {
            return None;
        }
        let sign = if base < 0.0 && e % 2 != 0 { -1.0 } else { 1.0 };
        Some((sign, e as f64 * base.abs().ln()))
    };
    for n1 in 0..d1 {
        for n2 in 0..d2 {
            let col = n1 * d2 + n2;
            let total = n1 + n2;
            for m1 in 0..d1.min(total + 1) {
                let m2 = total - m1;
                if m2 >= d2 {
                    continue;
                }
                let row = m1 * d2 + m2;
                let pre =
                    0.5 * (log_factorial(m1) + log_factorial(m2) - log_factorial(n1) - log_factorial(n2));
                let mut acc = 0.0f64;
                let r_lo = m1.saturating_sub(n2);
                let r_hi = m1.min(n1);
                for r in r_lo..=r_hi {
                    let j = m1 - r;
                    // cos^{r + n2 − j} (−1)^{n1−r} sin^{n1 − r + j}
                    let Some((sc, lc)) = pow_log(c, (r + n2 - j) as i64) else {
                        continue;
                    };
                    let Some((ss, ls)) = pow_log(s, (n1 - r + j) as i64) else {
                        continue;
                    };
                    let parity = if (n1 - r) % 2 == 0 { 1.0 } else { -1.0 };
                    let l = log_binomial(n1, r) + log_binomial(n2, j) + lc + ls + pre;
                    acc += parity * sc * ss * l.exp();
                }
                out[(row, col)] = C64::new(acc, 0.0);
            }
        }
    }
    out
}

/// Single-mode gate matrix at cutoff `d`. Errors on two-mode kinds.
pub fn gate_matrix(gate: &Gate, d: usize) -> Result<FockOperator> {
    if !gate.parameters_finite() {
        return Err(Error::InvalidParameter(format!(
            "non-finite parameter in `{}`",
            gate.name()
        )));
    }
    let key = |bits: Vec<u64>| GateKey {
        name: gate.name(),
        bits,
        dims: (d, 0),
    };
    let m: Arc<Array2<C64>> = match *gate {
        Gate::Rotate(t) => cached(key(vec![t.to_bits()]), || {
            Array2::from_diag(&Array1::from_iter(
                (0..d).map(|n| (C64::new(0.0, t * n as f64)).exp()),
            ))
        }),
        Gate::Squeeze { r, theta } => cached(key(vec![r.to_bits(), theta.to_bits()]), || {
            // exp[r(a² − a†²)/2] rotated to angle theta/2.
            let lad = ladder_matrices(d).expect("d checked");
            let a2 = cmatmul(lad.a.view(), lad.a.view());
            let adag2 = cmatmul(lad.adag.view(), lad.adag.view());
            let gen = (&a2 - &adag2).mapv(|z| z * C64::new(r / 2.0, 0.0));
            let sq = expm(&gen);
            if theta == 0.0 {
                sq
            } else {
                let rot = gate_matrix(&Gate::Rotate(theta / 2.0), d).unwrap().matrix;
                cmatmul(rot.view(), cmatmul(sq.view(), dagger(&rot).view()).view())
            }
        }),
        Gate::Displace(alpha) => cached(key(vec![alpha.re.to_bits(), alpha.im.to_bits()]), || {
            displacement_matrix(alpha, d)
        }),
        Gate::XShift(s) => {
            let alpha = C64::new(s / std::f64::consts::SQRT_2, 0.0);
            return Ok(FockOperator::new(
                gate_matrix(&Gate::Displace(alpha), d)?.matrix,
                format!("X({s})"),
            ));
        }
        Gate::ZShift(s) => {
            let alpha = C64::new(0.0, s / std::f64::consts::SQRT_2);
            return Ok(FockOperator::new(
                gate_matrix(&Gate::Displace(alpha), d)?.matrix,
                format!("Z({s})"),
            ));
        }
        Gate::Shear(tau) => cached(key(vec![tau.to_bits()]), || {
            let lad = ladder_matrices(d).expect("d checked");
            let x2 = cmatmul(lad.x.view(), lad.x.view());
            expm(&x2.mapv(|z| z * C64::new(0.0, tau / 2.0)))
        }),
        Gate::Cubic(gamma) => cached(key(vec![gamma.to_bits()]), || {
            // x̂³ couples levels ±3; exponentiate with padded cutoff 2d then
            // crop, so edge corruption stays above the working block.
            let dp = 2 * d;
            let lad = ladder_matrices(dp).expect("d checked");
            let x2 = cmatmul(lad.x.view(), lad.x.view());
            let x3 = cmatmul(x2.view(), lad.x.view());
            let big = expm(&x3.mapv(|z| z * C64::new(0.0, gamma / 3.0)));
            big.slice(ndarray::s![0..d, 0..d]).to_owned()
        }),
        Gate::XPhase { order, strength } => {
            cached(key(vec![order as u64, strength.to_bits()]), || {
                // Diagonal in position: build on the standard grid.
                mult_operator_from_grid(
                    |x| C64::new(0.0, strength * x.powi(order as i32)).exp(),
                    d,
                    &PositionGrid::standard(),
                )
            })
        }
        Gate::BeamSplit(_) | Gate::ControlledZ(_) => {
            return Err(Error::GateArity {
                gate: gate.name(),
                expected: 2,
                got: 1,
            })
        }
    };
    Ok(FockOperator::new((*m).clone(), format!("{gate:?}")))
}

/// Two-mode gate matrix on the flattened |n₁ n₂⟩ basis.
pub fn two_mode_gate_matrix(gate: &Gate, d1: usize, d2: usize) -> Result<FockOperator> {
    let key = |bits: Vec<u64>| GateKey {
        name: gate.name(),
        bits,
        dims: (d1, d2),
    };
    let m: Arc<Array2<C64>> = match *gate {
        Gate::BeamSplit(t) => cached(key(vec![t.to_bits()]), || beamsplitter_matrix(t, d1, d2)),
        Gate::ControlledZ(g) => cached(key(vec![g.to_bits()]), || {
            let la = ladder_matrices(d1).expect("d checked");
            let lb = ladder_matrices(d2).expect("d checked");
            let xx = ndarray::linalg::kron(&la.x, &lb.x);
            expm(&xx.mapv(|z| z * C64::new(0.0, g)))
        }),
        _ => {
            return Err(Error::GateArity {
                gate: gate.name(),
                expected: 1,
                got: 2,
            })
        }
    };
    Ok(FockOperator::new((*m).clone(), format!("{gate:?}")))
}

/// Position grid for multiplication operators and marginals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl PositionGrid {
    /// Default grid used for non-Gaussian kernels: 601 points over [−10, 10].
    pub fn standard() -> Self {
        PositionGrid {
            min: -10.0,
            max: 10.0,
            n: 601,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.n)
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n as f64 - 1.0)
    }
}

/// Fock matrix of the multiplication operator f(x̂), built by Hermite-function
/// quadrature on a position grid: O_{kl} = Σ_i ψ_k(x_i) f(x_i) ψ_l(x_i) w_i.
pub fn mult_operator_from_grid(
    f: impl Fn(f64) -> C64,
    d: usize,
    grid: &PositionGrid,
) -> Array2<C64> {
    let xs = grid.points();
    let w = trapezoid_weights(xs.len(), grid.spacing());
    let h = hermite_matrix(&xs, d - 1); // d × n
    let mut hre = Array2::<f64>::zeros((d, xs.len()));
    let mut him = Array2::<f64>::zeros((d, xs.len()));
    for (i, &x) in xs.iter().enumerate() {
        let fx = f(x) * w[i];
        for k in 0..d {
            hre[(k, i)] = h[(k, i)] * fx.re;
            him[(k, i)] = h[(k, i)] * fx.im;
        }
    }
    let ore = hre.dot(&h.t());
    let oim = him.dot(&h.t());
    let mut out = Array2::<C64>::zeros((d, d));
    for k in 0..d {
        for l in 0..d {
            out[(k, l)] = C64::new(ore[(k, l)], oim[(k, l)]);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// Multi-mode state tensor with per-mode cutoffs.
///
/// Amplitudes are kept normalized; `weight` accumulates the probability of
/// every conditioning step applied so far (1.0 for a fresh state), so chained
/// conditional probabilities compose multiplicatively.
#[derive(Clone, Debug)]
pub struct FockState {
    cutoffs: Vec<usize>,
    amps: ArrayD<C64>,
    weight: f64,
}

impl FockState {
    pub fn from_amplitudes(cutoffs: Vec<usize>, amps: ArrayD<C64>) -> Result<Self> {
        let shape: Vec<usize> = amps.shape().to_vec();
        if shape != cutoffs {
            return Err(Error::ShapeMismatch(format!(
                "amplitude shape {shape:?} does not match cutoffs {cutoffs:?}"
            )));
        }
        let mut st = FockState {
            cutoffs,
            amps,
            weight: 1.0,
        };
        let n = st.norm_sqr();
        if n <= 1e-300 {
            return Err(Error::ImpossibleOutcome("zero-norm amplitudes".into()));
        }
        st.amps.mapv_inplace(|z| z / C64::new(n.sqrt(), 0.0));
        Ok(st)
    }

    pub fn vacuum(cutoffs: Vec<usize>) -> Self {
        let mut amps = ArrayD::zeros(IxDyn(&cutoffs));
        amps[IxDyn(&vec![0; cutoffs.len()])] = C64::new(1.0, 0.0);
        FockState {
            cutoffs,
            amps,
            weight: 1.0,
        }
    }

    /// Product Fock basis state |n₁ … n_k⟩.
    pub fn basis(cutoffs: Vec<usize>, ns: &[usize]) -> Result<Self> {
        if ns.len() != cutoffs.len() || ns.iter().zip(&cutoffs).any(|(&n, &d)| n >= d) {
            return Err(Error::ShapeMismatch(format!(
                "basis occupation {ns:?} incompatible with cutoffs {cutoffs:?}"
            )));
        }
        let mut amps = ArrayD::zeros(IxDyn(&cutoffs));
        amps[IxDyn(ns)] = C64::new(1.0, 0.0);
        Ok(FockState {
            cutoffs,
            amps,
            weight: 1.0,
        })
    }

    /// Single-mode coherent state (truncated and renormalized).
    pub fn coherent(alpha: C64, d: usize) -> Self {
        let mut v = Array1::<C64>::zeros(d);
        for n in 0..d {
            let log_mag = -alpha.norm_sqr() / 2.0 - 0.5 * log_factorial(n);
            v[n] = alpha.powu(n as u32) * C64::new(log_mag.exp(), 0.0);
        }
        Self::from_single(v)
    }

    /// Single-mode state from an amplitude vector.
    pub fn from_single(v: Array1<C64>) -> Self {
        let d = v.len();
        FockState::from_amplitudes(vec![d], v.into_dyn()).expect("nonzero vector")
    }

    /// Two-mode squeezed vacuum: sech r Σ tanhⁿr |nn⟩, truncated and
    /// renormalized. At large r the truncated state approaches the flat
    /// maximally-entangled state on the retained levels.
    pub fn tmss(r: f64, d: usize) -> Self {
        let mut amps = ArrayD::zeros(IxDyn(&[d, d]));
        let lambda = r.tanh();
        for n in 0..d {
            amps[IxDyn(&[n, n])] = C64::new(lambda.powi(n as i32), 0.0);
        }
        FockState::from_amplitudes(vec![d, d], amps).expect("nonzero")
    }

    /// Tensor product with another state.
    pub fn product(&self, other: &FockState) -> FockState {
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.extend(other.cutoffs.iter());
        let mut amps = ArrayD::<C64>::zeros(IxDyn(&cutoffs));
        // Outer product over flattened views.
        let a: Vec<C64> = self.amps.iter().cloned().collect();
        let b: Vec<C64> = other.amps.iter().cloned().collect();
        for (i, slot) in amps.iter_mut().enumerate() {
            let ia = i / b.len();
            let ib = i % b.len();
            *slot = a[ia] * b[ib];
        }
        FockState {
            cutoffs,
            amps,
            weight: self.weight * other.weight,
        }
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn n_modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn amplitudes(&self) -> &ArrayD<C64> {
        &self.amps
    }

    /// Accumulated probability weight of all conditioning steps so far.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Population of the top Fock level of a mode (relative to the norm).
    pub fn leakage(&self, mode: usize) -> f64 {
        let top = self.cutoffs[mode] - 1;
        let slice = self.amps.index_axis(Axis(mode), top);
        slice.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.norm_sqr()
    }

    /// Max leakage over modes.
    pub fn max_leakage(&self) -> f64 {
        (0..self.n_modes())
            .map(|k| self.leakage(k))
            .fold(0.0, f64::max)
    }

    /// Single-mode amplitude vector (errors on multi-mode states).
    pub fn single_mode_amps(&self) -> Result<Array1<C64>> {
        if self.n_modes() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected a single mode, state has {}",
                self.n_modes()
            )));
        }
        Ok(Array1::from_iter(self.amps.iter().cloned()))
    }

    /// Apply a single-mode matrix to `mode`, renormalizing and folding the
    /// norm change into the weight (gates are unitary up to truncation, so
    /// the change is the truncation loss).
    pub fn apply_one(&self, m: ArrayView2<C64>, mode: usize) -> Result<FockState> {
        let d = self.cutoffs[mode];
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, mode cutoff {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        let out = apply_axis(&self.amps, m, mode);
        self.replaced(out)
    }

    /// Apply a two-mode matrix to the ordered mode pair (a, b).
    pub fn apply_two(&self, m: ArrayView2<C64>, a: usize, b: usize) -> Result<FockState> {
        if a == b {
            return Err(Error::InvalidParameter("two-mode gate needs distinct modes".into()));
        }
        let (da, db) = (self.cutoffs[a], self.cutoffs[b]);
        if m.nrows() != da * db {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, expected {}",
                m.nrows(),
                m.ncols(),
                da * db
            )));
        }
        let out = apply_axes2(&self.amps, m, a, b);
        self.replaced(out)
    }

    fn replaced(&self, amps: ArrayD<C64>) -> Result<FockState> {
        let mut st = FockState {
            cutoffs: self.cutoffs.clone(),
            amps,
            weight: self.weight,
        };
        let n = st.norm_sqr();
        if n <= 1e-300 {
            return Err(Error::ImpossibleOutcome("operator annihilated the state".into()));
        }
        st.amps.mapv_inplace(|z| z / C64::new(n.sqrt(), 0.0));
        st.weight *= n;
        Ok(st)
    }

    /// Apply a symbolic gate via its cached Fock matrix. Beam splitters take
    /// the block-diagonal path (photon-number conservation keeps both the
    /// memory and the work at O(d³)-scale instead of O(d⁴)).
    pub fn apply_gate(&self, gate: &Gate, modes: &[usize]) -> Result<FockState> {
        match gate {
            Gate::BeamSplit(theta) => self.apply_beamsplitter(*theta, modes[0], modes[1]),
            _ => match gate.arity() {
                1 => {
                    let op = gate_matrix(gate, self.cutoffs[modes[0]])?;
                    self.apply_one(op.matrix.view(), modes[0])
                }
                2 => {
                    let op = two_mode_gate_matrix(
                        gate,
                        self.cutoffs[modes[0]],
                        self.cutoffs[modes[1]],
                    )?;
                    self.apply_two(op.matrix.view(), modes[0], modes[1])
                }
                _ => unreachable!(),
            },
        }
    }

    /// Beam splitter on (a, b) applied block-by-block over the conserved
    /// total photon number.
    pub fn apply_beamsplitter(&self, theta: f64, a: usize, b: usize) -> Result<FockState> {
        if a == b {
            return Err(Error::InvalidParameter(
                "beam splitter needs distinct modes".into(),
            ));
        }
        let (da, db) = (self.cutoffs[a], self.cutoffs[b]);
        // Bring (a, b) to the front as a (da, db, rest) standard-layout block.
        let ndim = self.amps.ndim();
        let mut perm: Vec<usize> = (0..ndim).filter(|&i| i != a && i != b).collect();
        perm.insert(0, b);
        perm.insert(0, a);
        let fronted = self.amps.view().permuted_axes(perm.clone());
        let front_shape: Vec<usize> = fronted.shape().to_vec();
        let rest: usize = front_shape[2..].iter().product::<usize>().max(1);
        let buf = fronted
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((da * db, rest))
            .expect("contiguous reshape");
        let mut out = Array2::<C64>::zeros((da * db, rest));

        let (c, s) = (theta.cos(), theta.sin());
        let pow_log = |base: f64, e: i64| -> Option<(f64, f64)> {
            if e == 0 {
                return Some((1.0, 0.0));
            }
            if base == 0.0 {
                return None;
            }
            let sign = if base < 0.0 && e % 2 != 0 { -1.0 } else { 1.0 };
            Some((sign, e as f64 * base.abs().ln()))
        };
        let total_norm: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
        for total in 0..(da + db - 1) {
            // Index pairs with n_a + n_b = total inside the cutoffs.
            let lo = total.saturating_sub(db - 1);
            let hi = total.min(da - 1);
            if lo > hi {
                continue;
            }
            let idx: Vec<usize> = (lo..=hi).map(|na| na * db + (total - na)).collect();
            let k = idx.len();
            // Gather first; blocks with no amplitude support are skipped
            // (their coefficient sums lose all precision at large totals and
            // would only transform numerical zero anyway).
            let mut gathered = Array2::<C64>::zeros((k, rest));
            let mut block_norm = 0.0f64;
            for (row, &iflat) in idx.iter().enumerate() {
                gathered.row_mut(row).assign(&buf.row(iflat));
                block_norm += buf.row(iflat).iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
            if block_norm <= 1e-28 * total_norm {
                continue;
            }
            let mut block = Array2::<C64>::zeros((k, k));
            for (col, &jflat) in idx.iter().enumerate() {
                let n1 = jflat / db;
                let n2 = jflat % db;
                for (row, &iflat) in idx.iter().enumerate() {
                    let m1 = iflat / db;
                    let pre = 0.5
                        * (log_factorial(m1) + log_factorial(total - m1)
                            - log_factorial(n1)
                            - log_factorial(n2));
                    let r_lo = m1.saturating_sub(n2);
                    let r_hi = m1.min(n1);
                    // Factor out the largest log magnitude to keep the
                    // cancellation in a sane range.
                    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(r_hi - r_lo + 1);
                    let mut lmax = f64::NEG_INFINITY;
                    for r in r_lo..=r_hi {
                        let j = m1 - r;
                        let Some((sc, lc)) = pow_log(c, (r + n2 - j) as i64) else {
                            continue;
                        };
                        let Some((ss, ls)) = pow_log(s, (n1 - r + j) as i64) else {
                            continue;
                        };
                        let parity = if (n1 - r) % 2 == 0 { 1.0 } else { -1.0 };
                        let l = log_binomial(n1, r) + log_binomial(n2, j) + lc + ls + pre;
                        lmax = lmax.max(l);
                        terms.push((parity * sc * ss, l));
                    }
                    let mut acc = 0.0f64;
                    for (sign, l) in terms {
                        acc += sign * (l - lmax).exp();
                    }
                    block[(row, col)] = C64::new(acc * lmax.exp(), 0.0);
                }
            }
            let applied = cmatmul(block.view(), gathered.view());
            for (row, &iflat) in idx.iter().enumerate() {
                out.row_mut(iflat).assign(&applied.row(row));
            }
        }

        let outd = out
            .into_shape_with_order(IxDyn(&front_shape))
            .expect("reshape back");
        let mut inv = vec![0usize; ndim];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let amps = outd.permuted_axes(inv).as_standard_layout().into_owned();
        self.replaced(amps)
    }

    /// Expectation value of a single-mode operator on `mode`.
    pub fn expectation_one(&self, m: ArrayView2<C64>, mode: usize) -> Result<C64> {
        let applied = apply_axis(&self.amps, m, mode);
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.amps.iter().zip(applied.iter()) {
            acc += a.conj() * b;
        }
        Ok(acc / C64::new(self.norm_sqr(), 0.0))
    }

    /// Homodyne projection onto outcome `m` of p̂cosθ + x̂sinθ on `mode`.
    ///
    /// Contracts the mode against the rotated position-basis row vector
    /// ψ_n(m)e^{-i(π/2-θ)n}; returns the conditioned state (measured mode
    /// removed, renormalized, weight multiplied by the density) and the
    /// outcome density |⟨m|ψ⟩|².
    pub fn homodyne_project(&self, mode: usize, theta: f64, m: f64) -> Result<(FockState, f64)> {
        let d = self.cutoffs[mode];
        if m * m > 2.0 * (d as f64) {
            // Outcome beyond the grid validity of the truncated basis: the
            // top Hermite function turns over near |x| = √(2d).
            eprintln!(
                "warning: homodyne outcome {m:.3} is outside the reliable range |m| ≤ √(2d) = {:.3}",
                (2.0 * d as f64).sqrt()
            );
        }
        let phi = std::f64::consts::FRAC_PI_2 - theta;
        let psis = hermite_functions(m, d - 1);
        let v = Array1::from_iter(
            (0..d).map(|n| C64::from_polar(psis[n], -phi * n as f64)),
        );
        let contracted = contract_axis(&self.amps, &v, mode);
        let density: f64 = contracted.iter().map(|z| z.norm_sqr()).sum();
        if density < 1e-300 {
            return Err(Error::Underflow {
                context: format!("homodyne on mode {mode} at m = {m}"),
                density,
            });
        }
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.remove(mode);
        let mut amps = contracted;
        amps.mapv_inplace(|z| z / C64::new(density.sqrt(), 0.0));
        Ok((
            FockState {
                cutoffs,
                amps,
                weight: self.weight * density,
            },
            density,
        ))
    }

    /// Sample a homodyne outcome by inverse-CDF on a deterministic grid of
    /// 401 points spanning ±8 standard deviations of the measured quadrature.
    pub fn homodyne_sample<R: Rng + ?Sized>(
        &self,
        mode: usize,
        theta: f64,
        rng: &mut R,
    ) -> Result<(f64, FockState)> {
        let d = self.cutoffs[mode];
        let phi = std::f64::consts::FRAC_PI_2 - theta;
        // Quadrature mean and std via the rotated x matrix.
        let lad = ladder_matrices(d)?;
        let rot = Array2::from_diag(&Array1::from_iter(
            (0..d).map(|n| C64::from_polar(1.0, -phi * n as f64)),
        ));
        let q = cmatmul(dagger(&rot).view(), cmatmul(lad.x.view(), rot.view()).view());
        let mu = self.expectation_one(q.view(), mode)?.re;
        let q2 = cmatmul(q.view(), q.view());
        let var = self.expectation_one(q2.view(), mode)?.re - mu * mu;
        let sigma = var.max(1e-12).sqrt();

        let n_grid = 401usize;
        let xs: Vec<f64> = linspace(mu - 8.0 * sigma, mu + 8.0 * sigma, n_grid);
        let mut dens = Vec::with_capacity(n_grid);
        for &x in &xs {
            let psis = hermite_functions(x, d - 1);
            let v = Array1::from_iter((0..d).map(|n| C64::from_polar(psis[n], -phi * n as f64)));
            let c = contract_axis(&self.amps, &v, mode);
            dens.push(c.iter().map(|z| z.norm_sqr()).sum::<f64>());
        }
        // Inverse CDF on the trapezoid-integrated density.
        let h = xs[1] - xs[0];
        let mut cdf = vec![0.0f64; n_grid];
        for i in 1..n_grid {
            cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
        }
        let total = cdf[n_grid - 1];
        if total <= 1e-300 {
            return Err(Error::Underflow {
                context: format!("homodyne sampling on mode {mode}"),
                density: total,
            });
        }
        let u: f64 = rng.gen::<f64>() * total;
        let idx = cdf.partition_point(|&c| c < u).clamp(1, n_grid - 1);
        let frac = (u - cdf[idx - 1]) / (cdf[idx] - cdf[idx - 1]).max(1e-300);
        let m = xs[idx - 1] + frac * h;
        let (state, _) = self.homodyne_project(mode, theta, m)?;
        Ok((m, state))
    }

    /// Photon-number projection: select Fock layer κ of `mode`.
    pub fn pnr_project(&self, mode: usize, kappa: usize) -> Result<(FockState, f64)> {
        let d = self.cutoffs[mode];
        if kappa >= d {
            return Err(Error::InvalidParameter(format!(
                "PNR outcome {kappa} ≥ cutoff {d}"
            )));
        }
        let norm0 = self.norm_sqr();
        let slice = self.amps.index_axis(Axis(mode), kappa).to_owned();
        let prob: f64 = slice.iter().map(|z| z.norm_sqr()).sum::<f64>() / norm0;
        if prob <= 1e-300 {
            return Err(Error::ImpossibleOutcome(format!(
                "PNR outcome {kappa} has zero probability"
            )));
        }
        let mut cutoffs = self.cutoffs.clone();
        cutoffs.remove(mode);
        let mut amps = slice;
        let n = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amps.mapv_inplace(|z| z / C64::new(n, 0.0));
        Ok((
            FockState {
                cutoffs,
                amps,
                weight: self.weight * prob,
            },
            prob,
        ))
    }

    /// Joint photon-number distribution over all modes (normalized).
    pub fn number_distribution(&self) -> ArrayD<f64> {
        let n = self.norm_sqr();
        self.amps.mapv(|z| z.norm_sqr() / n)
    }

    /// Position-space marginal |ψ(x)|² of a single-mode state on a grid.
    pub fn position_marginal(&self, grid: &PositionGrid) -> Result<Vec<f64>> {
        let v = self.single_mode_amps()?;
        let d = v.len();
        Ok(grid
            .points()
            .iter()
            .map(|&x| {
                let psis = hermite_functions(x, d - 1);
                let amp: C64 = (0..d).map(|n| v[n] * psis[n]).sum();
                amp.norm_sqr()
            })
            .collect())
    }
}

/// |⟨a|b⟩|² for pure states with equal cutoffs (normalization enforced).
pub fn fidelity(a: &FockState, b: &FockState) -> Result<f64> {
    if a.cutoffs != b.cutoffs {
        return Err(Error::ShapeMismatch(format!(
            "cutoffs differ: {:?} vs {:?}",
            a.cutoffs, b.cutoffs
        )));
    }
    let mut ov = C64::new(0.0, 0.0);
    for (x, y) in a.amps.iter().zip(b.amps.iter()) {
        ov += x.conj() * y;
    }
    Ok(ov.norm_sqr() / (a.norm_sqr() * b.norm_sqr()))
}

// ---------------------------------------------------------------------------
// Wigner function
// ---------------------------------------------------------------------------

/// Rectangular phase-space grid for Wigner evaluation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WignerGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_points: usize,
}

impl WignerGrid {
    pub fn square(half_width: f64, n_points: usize) -> Self {
        WignerGrid {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
            n_points,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.n_points)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.n_points)
    }
}

/// Wigner function of a single-mode state, W[(ip, ix)] (p varies along rows).
///
/// Uses the position autocorrelation form
/// W(x,p) = (1/π) ∫ ψ(x+y) ψ*(x−y) e^{−2ipy} dy,
/// evaluated by trapezoid quadrature on a y-grid wide enough for the
/// truncated wavefunction's support; columns are evaluated in parallel.
pub fn wigner(state: &FockState, grid: &WignerGrid) -> Result<Array2<f64>> {
    use rayon::prelude::*;
    let v = state.single_mode_amps()?;
    let nrm = state.norm_sqr();
    let d = v.len();
    let xs = grid.xs();
    let ps = grid.ps();

    // Support of the truncated state is |x| ≲ √(2d); pad for displacement.
    let x_extent = xs.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let l = (2.0 * d as f64).sqrt() + 2.0 + x_extent;
    let p_extent = ps.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
    // Resolve both the state's oscillation and e^{−2ipy}.
    let max_freq = (2.0 * d as f64).sqrt() + 2.0 * p_extent;
    let n_y = ((2.0 * l * max_freq / std::f64::consts::PI) * 8.0) as usize + 201;
    let ys = linspace(-l, l, n_y);
    let hy = ys[1] - ys[0];

    let psi_at = |pt: f64| -> C64 {
        let psis = hermite_functions(pt, d - 1);
        (0..d).map(|n| v[n] * psis[n]).sum()
    };

    let cols: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            // g(y) = ψ(x+y) ψ*(x−y) with trapezoid weights folded in.
            let g: Vec<C64> = ys
                .iter()
                .enumerate()
                .map(|(k, &y)| {
                    let w = if k == 0 || k == n_y - 1 { hy / 2.0 } else { hy };
                    psi_at(x + y) * psi_at(x - y).conj() * C64::new(w, 0.0)
                })
                .collect();
            ps.iter()
                .map(|&p| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, &y) in ys.iter().enumerate() {
                        acc += g[k] * C64::from_polar(1.0, -2.0 * p * y);
                    }
                    acc.re / (std::f64::consts::PI * nrm)
                })
                .collect()
        })
        .collect();

    let mut out = Array2::zeros((ps.len(), xs.len()));
    for (ix, col) in cols.into_iter().enumerate() {
        for (ip, w) in col.into_iter().enumerate() {
            out[(ip, ix)] = w;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tensor helpers
// ---------------------------------------------------------------------------

fn apply_axis(amps: &ArrayD<C64>, m: ArrayView2<C64>, axis: usize) -> ArrayD<C64> {
    let ndim = amps.ndim();
    let mut perm: Vec<usize> = (0..ndim).collect();
    perm.remove(axis);
    perm.insert(0, axis);
    let fronted = amps.view().permuted_axes(perm.clone());
    let front_shape: Vec<usize> = fronted.shape().to_vec();
    let d = front_shape[0];
    let rest: usize = front_shape[1..].iter().product::<usize>().max(1);
    let a2 = fronted
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((d, rest))
        .expect("contiguous reshape");
    let out2 = cmatmul(m, a2.view());
    let out = out2
        .into_shape_with_order(IxDyn(&front_shape))
        .expect("reshape back");
    let mut inv = vec![0usize; ndim];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    out.permuted_axes(inv).as_standard_layout().into_owned()
}

fn apply_axes2(amps: &ArrayD<C64>, m: ArrayView2<C64>, a: usize, b: usize) -> ArrayD<C64> {
    let ndim = amps.ndim();
    let mut perm: Vec<usize> = (0..ndim).filter(|&i| i != a && i != b).collect();
    perm.insert(0, b);
    perm.insert(0, a);
    let fronted = amps.view().permuted_axes(perm.clone());
    let front_shape: Vec<usize> = fronted.shape().to_vec();
    let (da, db) = (front_shape[0], front_shape[1]);
    let rest: usize = front_shape[2..].iter().product::<usize>().max(1);
    let a2 = fronted
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((da * db, rest))
        .expect("contiguous reshape");
    let out2 = cmatmul(m, a2.view());
    let out = out2
        .into_shape_with_order(IxDyn(&front_shape))
        .expect("reshape back");
    let mut inv = vec![0usize; ndim];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    out.permuted_axes(inv).as_standard_layout().into_owned()
}

fn contract_axis(amps: &ArrayD<C64>, v: &Array1<C64>, axis: usize) -> ArrayD<C64> {
    let ndim = amps.ndim();
    let mut perm: Vec<usize> = (0..ndim).collect();
    perm.remove(axis);
    perm.insert(0, axis);
    let fronted = amps.view().permuted_axes(perm);
    let front_shape: Vec<usize> = fronted.shape().to_vec();
    let d = front_shape[0];
    let rest: usize = front_shape[1..].iter().product::<usize>().max(1);
    let a2 = fronted
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((d, rest))
        .expect("contiguous reshape");
    let mut out = Array1::<C64>::zeros(rest);
    for n in 0..d {
        let vn = v[n];
        for (o, z) in out.iter_mut().zip(a2.row(n).iter()) {
            *o += vn * *z;
        }
    }
    let rest_shape: Vec<usize> = front_shape[1..].to_vec();
    out.into_shape_with_order(IxDyn(&rest_shape))
        .expect("contracted reshape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::max_distance;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ladder_small_and_commutator() {
        let lad = ladder_matrices(2).unwrap();
        assert_eq!(lad.a[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(lad.a[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(lad.a[(1, 0)], C64::new(0.0, 0.0));

        let lad = ladder_matrices(30).unwrap();
        let comm = cmatmul(lad.x.view(), lad.p.view()) - cmatmul(lad.p.view(), lad.x.view());
        // [x, p] = i on all levels except the top one.
        for n in 0..28 {
            assert!((comm[(n, n)] - C64::new(0.0, 1.0)).norm() < 1e-12);
        }
        // ⟨n|x²|n⟩ = n + 1/2 below the edge.
        let x2 = cmatmul(lad.x.view(), lad.x.view());
        for n in 0..29 {
            assert_abs_diff_eq!(x2[(n, n)].re, n as f64 + 0.5, epsilon = 1e-12);
        }
        assert!(ladder_matrices(1).is_err());
    }

    #[test]
    fn hermitian_generators() {
        let lad = ladder_matrices(25).unwrap();
        let x3 = cmatmul(cmatmul(lad.x.view(), lad.x.view()).view(), lad.x.view());
        for m in [&lad.x, &lad.p, &x3] {
            let defect = max_distance(m, &dagger(m));
            assert!(defect < 1e-12);
        }
    }

    #[test]
    fn cubic_at_zero_is_identity() {
        let op = gate_matrix(&Gate::Cubic(0.0), 12).unwrap();
        let eye = Array2::<C64>::eye(12);
        assert!(max_distance(&op.matrix, &eye) < 1e-12);
    }

    #[test]
    fn beamsplitter_closed_form_matches_exponential() {
        let d = 12;
        let theta = std::f64::consts::FRAC_PI_4;
        let closed = beamsplitter_matrix(theta, d, d);
        let la = ladder_matrices(d).unwrap();
        let gen = ndarray::linalg::kron(&la.adag, &la.a) - ndarray::linalg::kron(&la.a, &la.adag);
        let exp = expm(&gen.mapv(|z| z * C64::new(theta, 0.0)));
        // Photon-number conservation makes the closed form exact; compare on
        // the block where the exponential is unaffected by truncation.
        let mut max_dev = 0.0f64;
        for n1 in 0..d {
            for n2 in 0..d {
                if n1 + n2 >= d {
                    continue;
                }
                for m1 in 0..d {
                    for m2 in 0..d {
                        if m1 + m2 >= d {
                            continue;
                        }
                        let dev = (closed[(m1 * d + m2, n1 * d + n2)]
                            - exp[(m1 * d + m2, n1 * d + n2)])
                            .norm();
                        max_dev = max_dev.max(dev);
                    }
                }
            }
        }
        assert!(max_dev < 1e-8, "closed vs exponential: {max_dev}");
        // Vacuum stays vacuum.
        assert_abs_diff_eq!(closed[(0, 0)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn displacement_closed_form_matches_exponential() {
        let d = 30;
        let alpha = C64::new(0.4, -0.3);
        let closed = displacement_matrix(alpha, d);
        let lad = ladder_matrices(d).unwrap();
        let gen = lad.adag.mapv(|z| z * alpha) - lad.a.mapv(|z| z * alpha.conj());
        let exp = expm(&gen);
        let mut max_dev = 0.0f64;
        for m in 0..20 {
            for n in 0..20 {
                max_dev = max_dev.max((closed[(m, n)] - exp[(m, n)]).norm());
            }
        }
        assert!(max_dev < 1e-8, "displacement closed vs exp: {max_dev}");
    }

    #[test]
    fn truncation_aware_unitarity() {
        // Gates built by exponentiating the truncated generator are unitary
        // by construction; the closed-form displacement loses unitarity only
        // above the excluded top block.
        let d = 30;
        for gate in [
            Gate::Squeeze { r: 0.5, theta: 0.4 },
            Gate::Shear(0.6),
            Gate::Rotate(1.1),
        ] {
            let op = gate_matrix(&gate, d).unwrap();
            let defect = op.unitarity_defect(&[d]);
            assert!(defect < 1e-6, "{}: unitarity defect {defect}", gate.name());
        }
        // A weak displacement spreads photon number by ~|α|√(2d); the top
        // fifth of a d = 40 space is deep enough to absorb it.
        let op = gate_matrix(&Gate::Displace(C64::new(0.12, 0.08)), 40).unwrap();
        let defect = op.unitarity_defect(&[40]);
        assert!(defect < 1e-6, "displace: unitarity defect {defect}");
        // The beam splitter conserves total photon number, so it is exactly
        // unitary on the block n₁+n₂ < d.
        let d2 = 12usize;
        let bs = two_mode_gate_matrix(&Gate::BeamSplit(0.7), d2, d2).unwrap();
        let utu = cmatmul(dagger(&bs.matrix).view(), bs.matrix.view());
        let mut defect = 0.0f64;
        for n1 in 0..d2 {
            for n2 in 0..d2 {
                if n1 + n2 >= d2 {
                    continue;
                }
                for m1 in 0..d2 {
                    for m2 in 0..d2 {
                        if m1 + m2 >= d2 {
                            continue;
                        }
                        let (i, j) = (m1 * d2 + m2, n1 * d2 + n2);
                        let expect = if i == j { 1.0 } else { 0.0 };
                        defect = defect.max((utu[(i, j)] - C64::new(expect, 0.0)).norm());
                    }
                }
            }
        }
        assert!(defect < 1e-10, "beamsplitter unitarity defect {defect}");
    }

    #[test]
    fn cubic_pad_crop_action_is_stable() {
        // The pad-cropped cubic matrix is not unitary near the edge; its
        // quality contract is that the action on well-contained states is
        // stable under cutoff doubling.
        let d = 30;
        let gamma = 0.08;
        let alpha = C64::new(0.3, 0.2);
        let small = FockState::coherent(alpha, d)
            .apply_gate(&Gate::Cubic(gamma), &[0])
            .unwrap();
        let big = FockState::coherent(alpha, 2 * d)
            .apply_gate(&Gate::Cubic(gamma), &[0])
            .unwrap();
        let mut v = Array1::<C64>::zeros(2 * d);
        for n in 0..d {
            v[n] = small.single_mode_amps().unwrap()[n];
        }
        let embedded = FockState::from_single(v);
        let f = fidelity(&embedded, &big).unwrap();
        assert!(f > 1.0 - 1e-6, "cubic doubling stability: fidelity {f}");
    }

    #[test]
    fn squeezed_vacuum_matches_gaussian_moments() {
        let d = 60;
        let r = 0.6;
        let st = FockState::vacuum(vec![d])
            .apply_gate(&Gate::Squeeze { r, theta: 0.0 }, &[0])
            .unwrap();
        let lad = ladder_matrices(d).unwrap();
        let x2 = cmatmul(lad.x.view(), lad.x.view());
        let p2 = cmatmul(lad.p.view(), lad.p.view());
        let vx = st.expectation_one(x2.view(), 0).unwrap().re;
        let vp = st.expectation_one(p2.view(), 0).unwrap().re;
        assert_abs_diff_eq!(vx, (-2.0 * r).exp() / 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(vp, (2.0 * r).exp() / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn tmss_construction_matches_gate_route() {
        let d = 25;
        let r = 0.68;
        let analytic = FockState::tmss(r, d);
        let gates = FockState::vacuum(vec![d, d])
            .apply_gate(&Gate::Squeeze { r, theta: 0.0 }, &[0])
            .unwrap()
            .apply_gate(
                &Gate::Squeeze {
                    r,
                    theta: std::f64::consts::PI,
                },
                &[1],
            )
            .unwrap()
            .apply_gate(&Gate::BeamSplit(std::f64::consts::FRAC_PI_4), &[0, 1])
            .unwrap();
        let f = fidelity(&analytic, &gates).unwrap();
        assert!(f > 0.999999, "TMSS gate construction fidelity {f}");
    }

    #[test]
    fn pnr_on_tmss_collapses_partner() {
        let st = FockState::tmss(0.8, 15);
        let (out, _p) = st.pnr_project(0, 3).unwrap();
        let v = out.single_mode_amps().unwrap();
        for n in 0..15 {
            if n == 3 {
                assert!((v[n].norm() - 1.0).abs() < 1e-12);
            } else {
                assert!(v[n].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pnr_coherent_poisson_and_parity_rule() {
        let alpha = C64::new(0.7, 0.2);
        let st = FockState::coherent(alpha, 40);
        let (_, p0) = st.pnr_project(0, 0).unwrap();
        assert_abs_diff_eq!(p0, (-alpha.norm_sqr()).exp(), epsilon = 1e-10);

        let sq = FockState::vacuum(vec![30])
            .apply_gate(&Gate::Squeeze { r: 0.7, theta: 0.0 }, &[0])
            .unwrap();
        let dist = sq.number_distribution();
        for n in (1..30).step_by(2) {
            assert!(dist[IxDyn(&[n])] < 1e-12, "odd level {n} populated");
        }
    }

    #[test]
    fn homodyne_vacuum_density() {
        let st = FockState::vacuum(vec![10]);
        // θ = 0 measures p̂; on vacuum the density at 0 is |ψ₀(0)|² = 1/√π.
        let (_, dens) = st
            .product(&FockState::vacuum(vec![2]))
            .homodyne_project(0, 0.0, 0.0)
            .unwrap();
        assert_abs_diff_eq!(dens, 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_basics() {
        let a = FockState::coherent(C64::new(0.3, 0.4), 25);
        assert_abs_diff_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        let zero = FockState::basis(vec![5], &[0]).unwrap();
        let one = FockState::basis(vec![5], &[1]).unwrap();
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-15);
        let bad = fidelity(&zero, &FockState::basis(vec![6], &[0]).unwrap());
        assert!(bad.is_err());
    }

    #[test]
    fn fidelity_of_truncated_coherent_expansion() {
        // fidelity(coherent α=1 at d=30, truncation at 10) = Σ_{n≤10} e^{-1}/n!
        let full = FockState::coherent(C64::new(1.0, 0.0), 30);
        let mut v = Array1::<C64>::zeros(30);
        for n in 0..=10 {
            v[n] = full.single_mode_amps().unwrap()[n];
        }
        let trunc = FockState::from_single(v);
        let f = fidelity(&full, &trunc).unwrap();
        let series: f64 = (0..=10)
            .map(|n| (-1.0f64).exp() / (1..=n).map(|k| k as f64).product::<f64>())
            .sum();
        assert_abs_diff_eq!(f, series, epsilon = 1e-9);
    }

    #[test]
    fn wigner_known_values() {
        let grid = WignerGrid::square(5.0, 101);
        let vac = FockState::vacuum(vec![20]);
        let w = wigner(&vac, &grid).unwrap();
        let mid = 50;
        assert_abs_diff_eq!(w[(mid, mid)], 1.0 / std::f64::consts::PI, epsilon = 1e-9);

        let one = FockState::basis(vec![20], &[1]).unwrap();
        let w1 = wigner(&one, &grid).unwrap();
        assert_abs_diff_eq!(w1[(mid, mid)], -1.0 / std::f64::consts::PI, epsilon = 1e-9);
    }

    #[test]
    fn wigner_normalization_and_coherent_center() {
        let grid = WignerGrid::square(6.0, 121);
        let alpha = C64::new(0.02, 0.84);
        let st = FockState::coherent(alpha, 30);
        let w = wigner(&st, &grid).unwrap();
        let h = 12.0 / 120.0;
        let total: f64 = w.iter().sum::<f64>() * h * h;
        assert!((total - 1.0).abs() < 1e-3, "wigner integral {total}");
        // Peak at (√2 Re α, √2 Im α).
        let mut best = (0usize, 0usize);
        let mut best_w = f64::MIN;
        for ip in 0..121 {
            for ix in 0..121 {
                if w[(ip, ix)] > best_w {
                    best_w = w[(ip, ix)];
                    best = (ip, ix);
                }
            }
        }
        let xs = grid.xs();
        let ps = grid.ps();
        assert!((xs[best.1] - std::f64::consts::SQRT_2 * alpha.re).abs() < 0.1);
        assert!((ps[best.0] - std::f64::consts::SQRT_2 * alpha.im).abs() < 0.1);
        // Multi-mode input is rejected.
        assert!(wigner(&FockState::vacuum(vec![4, 4]), &grid).is_err());
    }

    #[test]
    fn xphase_matches_cubic_route() {
        // exp(iλx̂³) built on the grid vs the padded exponential of x̂³.
        let d = 18;
        let lam = 0.04;
        let grid_op = gate_matrix(
            &Gate::XPhase {
                order: 3,
                strength: lam,
            },
            d,
        )
        .unwrap();
        let cubic = gate_matrix(&Gate::Cubic(3.0 * lam), d).unwrap();
        let mut dev = 0.0f64;
        for i in 0..12 {
            for j in 0..12 {
                dev = dev.max((grid_op.matrix[(i, j)] - cubic.matrix[(i, j)]).norm());
            }
        }
        assert!(dev < 1e-6, "grid vs exponential cubic: {dev}");
    }

    #[test]
    fn weight_composes_across_projections() {
        let st = FockState::tmss(0.68, 20);
        let (after, p1) = st.pnr_project(0, 2).unwrap();
        assert_abs_diff_eq!(after.weight(), p1, epsilon = 1e-15);
        // Norm stays 1 after conditioning.
        assert_abs_diff_eq!(after.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_doubling_stability_examples() {
        // Displaced squeezed state: means/variances stable under 2d.
        let alpha = C64::new(0.02, 0.84);
        for &d in &[30usize] {
            let build = |dd: usize| {
                FockState::vacuum(vec![dd])
                    .apply_gate(&Gate::Squeeze { r: 0.5, theta: 0.0 }, &[0])
                    .unwrap()
                    .apply_gate(&Gate::Displace(alpha), &[0])
                    .unwrap()
            };
            let a = build(d);
            let b = build(2 * d);
            let lad_a = ladder_matrices(d).unwrap();
            let lad_b = ladder_matrices(2 * d).unwrap();
            let xa = a.expectation_one(lad_a.x.view(), 0).unwrap().re;
            let xb = b.expectation_one(lad_b.x.view(), 0).unwrap().re;
            assert!((xa - xb).abs() / xb.abs().max(1.0) < 1e-6);
        }
    }
}

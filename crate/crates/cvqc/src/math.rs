//! Small numerical kernels: stable Hermite functions, log-factorials,
//! complex matrix products and exponentials, quadrature grids.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;

/// ln(n!) from a cached cumulative table (the hot loops of the beam-splitter
/// coefficients call this O(d⁴) times).
pub fn log_factorial(n: usize) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(4096);
        t.push(0.0);
        for k in 1..4096usize {
            t.push(t[k - 1] + (k as f64).ln());
        }
        t
    });
    if n < table.len() {
        table[n]
    } else {
        table[table.len() - 1]
            + (table.len()..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// Normalized Hermite functions ψ_0(x), …, ψ_nmax(x).
///
/// ψ_n(x) = (√π 2^n n!)^{-1/2} e^{-x²/2} H_n(x), the position wavefunction of
/// the n-th Fock state in the convention x̂ = (â + â†)/√2. The upward
/// recurrence on the normalized functions is stable and overflow-free.
pub fn hermite_functions(x: f64, nmax: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(nmax + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    psi.push(psi0);
    if nmax == 0 {
        return psi;
    }
    psi.push(std::f64::consts::SQRT_2 * x * psi0);
    for n in 1..nmax {
        let a = (2.0 / (n as f64 + 1.0)).sqrt();
        let b = (n as f64 / (n as f64 + 1.0)).sqrt();
        let next = a * x * psi[n] - b * psi[n - 1];
        psi.push(next);
    }
    psi
}

/// Matrix H with H[n, i] = ψ_n(x_i) for a grid of points.
pub fn hermite_matrix(grid: &[f64], nmax: usize) -> Array2<f64> {
    let mut h = Array2::zeros((nmax + 1, grid.len()));
    for (i, &x) in grid.iter().enumerate() {
        for (n, v) in hermite_functions(x, nmax).into_iter().enumerate() {
            h[(n, i)] = v;
        }
    }
    h
}

/// Uniform grid of `n` points covering [a, b] inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let h = (b - a) / (n as f64 - 1.0);
    (0..n).map(|i| a + h * i as f64).collect()
}

/// Trapezoid weights for a uniform grid of `n` points with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = h / 2.0;
    w[n - 1] = h / 2.0;
    w
}

/// Trapezoid integral of samples `y` on a uniform grid with spacing `h`.
pub fn trapezoid(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    h * (inner + (y[0] + y[y.len() - 1]) / 2.0)
}

/// Complex matrix product via four real products.
///
/// `matrixmultiply` only covers real scalars, so the complex product is
/// assembled from the real and imaginary parts; this keeps the large Fock-space
/// contractions off the naive fallback path.
pub fn cmatmul(a: ArrayView2<C64>, b: ArrayView2<C64>) -> Array2<C64> {
    let ar = a.mapv(|z| z.re);
    let ai = a.mapv(|z| z.im);
    let br = b.mapv(|z| z.re);
    let bi = b.mapv(|z| z.im);
    let rr = ar.dot(&br);
    let ii = ai.dot(&bi);
    let ri = ar.dot(&bi);
    let ir = ai.dot(&br);
    let re = &rr - &ii;
    let im = &ri + &ir;
    let mut out = Array2::<C64>::zeros((a.nrows(), b.ncols()));
    out.zip_mut_with(&re, |o: &mut C64, &r| o.re = r);
    out.zip_mut_with(&im, |o: &mut C64, &i| o.im = i);
    out
}

/// Matrix exponential of a complex square matrix (scaling and squaring with
/// the [13/13] Padé approximant).
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");

    // 1-norm (max column sum of absolute values).
    let norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);

    const THETA_13: f64 = 5.371920351148152;
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 2f64.powi(-s);
    let a = a.mapv(|z| z * scale);

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let eye = Array2::<C64>::eye(n);
    let a2 = cmatmul(a.view(), a.view());
    let a4 = cmatmul(a2.view(), a2.view());
    let a6 = cmatmul(a2.view(), a4.view());

    let w1 = a6.mapv(|z| z * B[13]) + a4.mapv(|z| z * B[11]) + a2.mapv(|z| z * B[9]);
    let w = cmatmul(a6.view(), w1.view())
        + a6.mapv(|z| z * B[7])
        + a4.mapv(|z| z * B[5])
        + a2.mapv(|z| z * B[3])
        + eye.mapv(|z| z * B[1]);
    let u = cmatmul(a.view(), w.view());

    let z1 = a6.mapv(|z| z * B[12]) + a4.mapv(|z| z * B[10]) + a2.mapv(|z| z * B[8]);
    let v = cmatmul(a6.view(), z1.view())
        + a6.mapv(|z| z * B[6])
        + a4.mapv(|z| z * B[4])
        + a2.mapv(|z| z * B[2])
        + eye.mapv(|z| z * B[0]);

    // (V - U) X = (V + U) via LU.
    let vm = ndarray_to_na(&(&v - &u));
    let vp = ndarray_to_na(&(&v + &u));
    let lu = vm.lu();
    let x = lu.solve(&vp).expect("expm: Padé denominator is singular");
    let mut r = na_to_ndarray(&x);

    for _ in 0..s {
        r = cmatmul(r.view(), r.view());
    }
    r
}

pub fn ndarray_to_na(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn na_to_ndarray(a: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Frobenius distance between two complex matrices.
pub fn frobenius_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Max-element distance between two complex matrices.
pub fn max_distance(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Sum over |v|² of a complex slice.
pub fn norm_sqr(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_orthonormal_on_grid() {
        let grid = linspace(-12.0, 12.0, 2401);
        let h = (24.0) / 2400.0;
        let m = hermite_matrix(&grid, 8);
        for i in 0..=8 {
            for j in 0..=8 {
                let prod: Vec<f64> = (0..grid.len()).map(|k| m[(i, k)] * m[(j, k)]).collect();
                let integral = trapezoid(&prod, h);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(integral, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hermite_vacuum_at_zero() {
        let psi = hermite_functions(0.0, 0);
        assert_abs_diff_eq!(psi[0], std::f64::consts::PI.powf(-0.25), epsilon = 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let mut a = Array2::<C64>::zeros((2, 2));
        a[(0, 0)] = C64::new(0.0, 1.0);
        a[(1, 1)] = C64::new(-0.5, 0.0);
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(0.0, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(-0.5, 0.0).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_rotation_block() {
        // exp of [[0, -θ], [θ, 0]] is a rotation by θ.
        let theta = 0.7;
        let mut a = Array2::<C64>::zeros((2, 2));
        a[(0, 1)] = C64::new(-theta, 0.0);
        a[(1, 0)] = C64::new(theta, 0.0);
        let e = expm(&a);
        assert_abs_diff_eq!(e[(0, 0)].re, theta.cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(e[(1, 0)].re, theta.sin(), epsilon = 1e-13);
    }

    #[test]
    fn expm_large_norm_scaling() {
        // Anti-Hermitian generator with norm well above the Padé threshold.
        let mut a = Array2::<C64>::zeros((3, 3));
        a[(0, 1)] = C64::new(0.0, 40.0);
        a[(1, 0)] = C64::new(0.0, 40.0);
        a[(2, 2)] = C64::new(0.0, 17.0);
        let e = expm(&a);
        // exp(i*40*σx) block: cos(40) I + i sin(40) σx.
        assert_abs_diff_eq!(e[(0, 0)].re, 40f64.cos(), epsilon = 1e-11);
        assert_abs_diff_eq!(e[(0, 1)].im, 40f64.sin(), epsilon = 1e-11);
        assert!((e[(2, 2)] - C64::new(0.0, 17.0).exp()).norm() < 1e-11);
    }

    #[test]
    fn cmatmul_matches_naive() {
        let a = Array2::from_shape_fn((3, 4), |(i, j)| C64::new(i as f64, j as f64 - 1.0));
        let b = Array2::from_shape_fn((4, 2), |(i, j)| C64::new(j as f64 + 0.5, i as f64));
        let fast = cmatmul(a.view(), b.view());
        let slow = a.dot(&b);
        assert!(max_distance(&fast, &slow) < 1e-12);
    }
}

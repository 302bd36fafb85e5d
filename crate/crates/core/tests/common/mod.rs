//! Independent reference computations: dense matrices, closed forms,
//! finite differences and scalar root finding. Nothing here calls the
//! FFT-based kernels under test.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nls_core::grid::{Field, Grid, GridSpec};
use nls_core::model::{sample_model, Model, NonlinearitySpec, PeriodicProfile, PotentialSpec, SampledModel};

pub fn grid1(l: f64, n: usize, period: f64) -> Grid {
    Grid::new(GridSpec::new(1, l, n, period)).unwrap()
}

pub fn kerr_model(period: f64) -> Model {
    Model::new(
        PotentialSpec::periodic(period, PeriodicProfile::constant(1.0)),
        NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::constant(1.0)).unwrap(),
    )
    .unwrap()
}

/// Kerr model with V ≡ 1 on [0, 40), period 1.25.
pub fn kerr(n: usize) -> (Grid, SampledModel) {
    let g = grid1(40.0, n, 1.25);
    let m = sample_model(&kerr_model(1.25), &g).unwrap();
    (g, m)
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// √2 sech(x − x₀), the V ≡ 1 cubic ground state.
pub fn soliton(g: &Grid, x0: f64) -> Field {
    Field::from_fn(g, |x| 2f64.sqrt() * sech(x[0] - x0)).unwrap()
}

/// Second-derivative matrix of the periodic trigonometric interpolant on n
/// equispaced points of [0, L), n even (closed form, Nyquist mode included).
pub fn spectral_d2(n: usize, l: f64) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    let scale = (2.0 * PI / l).powi(2);
    DMatrix::from_fn(n, n, |i, j| {
        let d = (i as i64 - j as i64).rem_euclid(n as i64) as usize;
        let v = if d == 0 {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let s = (d as f64 * h / 2.0).sin();
            let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
            -sign / (2.0 * s * s)
        };
        v * scale
    })
}

/// Same matrix assembled mode by mode: (1/n) Σ_m −k_m² cos(k_m (x_i − x_j)).
pub fn spectral_d2_by_modes(n: usize, l: f64) -> DMatrix<f64> {
    let h = l / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let dx = (i as f64 - j as f64) * h;
        let mut s = 0.0;
        for m in 0..n {
            let mm = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            let k = 2.0 * PI * mm / l;
            s -= k * k * (k * dx).cos();
        }
        s / n as f64
    })
}

/// Second-order centered difference matrix with periodic wrap.
pub fn fd_d2(n: usize, l: f64) -> DMatrix<f64> {
    let h = l / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let d = (i as i64 - j as i64).rem_euclid(n as i64);
        if d == 0 {
            -2.0 / (h * h)
        } else if d == 1 || d == n as i64 - 1 {
            1.0 / (h * h)
        } else {
            0.0
        }
    })
}

/// Bound on ‖(Δ_spec − Δ_fd)u‖ for a trigonometric polynomial with modes
/// |m| ≤ max_mode: the largest symbol gap times ‖u‖.
pub fn fd_truncation_bound(n: usize, l: f64, max_mode: usize, u_norm: f64) -> f64 {
    let h = l / n as f64;
    (0..=max_mode)
        .map(|m| {
            let k = 2.0 * PI * m as f64 / l;
            (k * k - 4.0 / (h * h) * (k * h / 2.0).sin().powi(2)).abs()
        })
        .fold(0.0, f64::max)
        * u_norm
}

/// −D2 + diag(V).
pub fn dense_operator(n: usize, l: f64, v: &[f64]) -> DMatrix<f64> {
    let mut a = -spectral_d2(n, l);
    for i in 0..n {
        a[(i, i)] += v[i];
    }
    a
}

pub fn dense_min_eigenvalue(a: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// uᵀ A v · h.
pub fn dense_form(a: &DMatrix<f64>, u: &[f64], v: &[f64], h: f64) -> f64 {
    let u = DVector::from_column_slice(u);
    let v = DVector::from_column_slice(v);
    u.dot(&(a * v)) * h
}

pub fn central_difference(f: impl Fn(f64) -> f64, eps: f64) -> f64 {
    (f(eps) - f(-eps)) / (2.0 * eps)
}

/// Root of a continuous `f` with f(a)·f(b) < 0.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    assert!(fa * f(b) < 0.0, "root not bracketed");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Rectangle-rule ∫ over the box, computed directly.
pub fn quad(u: &Field) -> f64 {
    u.values().iter().sum::<f64>() * u.grid().cell_volume()
}

//! Bottom of the spectrum of the discrete operator −Δ + V.
//!
//! The smallest eigenvalue is found by a locally optimal preconditioned
//! gradient iteration on the Rayleigh quotient: each step does a Rayleigh–Ritz
//! solve on span{x, T r, p}, where r is the eigen-residual, p the previous
//! search direction and T = (−Δ + V̄)⁻¹ is applied by spectral division.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::{apply_operator, Field, Grid};

pub const DEFAULT_EIG_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 5000;
pub const DEFAULT_MARGIN: f64 = 1e-6;
const START_SEED: u64 = 0x05ee_d5ec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    PreconditionedIteration,
    DenseOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda_min: f64,
    /// ‖(−Δ+V)φ − λφ‖₂ / ‖φ‖₂.
    pub eigen_residual: f64,
    pub iterations: usize,
    pub method: SpectrumMethod,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: DEFAULT_EIG_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: START_SEED,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Spectral (−Δ + σ)⁻¹.
fn shifted_inverse(grid: &Grid, r: &[f64], sigma: f64) -> Vec<f64> {
    let k2 = grid.k_squared();
    grid.apply_multiplier(r, |i| 1.0 / (k2[i] + sigma))
}

fn apply(vtot: &Field, x: &[f64]) -> Vec<f64> {
    let f = Field::from_raw(vtot.grid(), x.to_vec());
    apply_operator(&f, vtot)
        .expect("operator fields share a grid")
        .into_values()
}

/// Orthonormalizes `vecs` in place (two passes of modified Gram–Schmidt),
/// dropping vectors that become numerically dependent.
fn orthonormalize(vecs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for mut v in vecs {
        let n0 = norm(&v);
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let n1 = norm(&v);
        if n1 > 1e-10 * n0 {
            v.iter_mut().for_each(|vi| *vi /= n1);
            out.push(v);
        }
    }
    out
}

/// Smallest eigenpair of −Δ + V on the grid of `vtot`.
pub fn min_eigenpair(vtot: &Field, opts: &EigenOptions) -> Result<(SpectrumReport, Field)> {
    vtot.check_finite()?;
    let grid = vtot.grid();
    let len = grid.len();
    let vbar = vtot.values().iter().sum::<f64>() / len as f64;
    let sigma = if vbar > 1e-3 { vbar } else { 1.0 + vbar.abs() };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = shifted_inverse(grid, &start, sigma);
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut p: Option<Vec<f64>> = None;

    let mut best = (f64::INFINITY, f64::INFINITY, x.clone());
    for it in 0..=opts.max_iters {
        let ax = apply(vtot, &x);
        let lambda = dot(&x, &ax);
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
        let res = norm(&r);
        if res < best.1 {
            best = (lambda, res, x.clone());
        }
        if res <= opts.tol {
            let report = SpectrumReport {
                lambda_min: lambda,
                eigen_residual: res,
                iterations: it,
                method: SpectrumMethod::PreconditionedIteration,
            };
            return Ok((report, Field::from_raw(grid, x)));
        }
        if it == opts.max_iters {
            break;
        }

        let w = shifted_inverse(grid, &r, sigma);
        let mut basis = vec![x.clone(), w];
        if let Some(pp) = p.take() {
            basis.push(pp);
        }
        let basis = orthonormalize(basis);
        let images: Vec<Vec<f64>> = basis.iter().map(|b| apply(vtot, b)).collect();
        let k = basis.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(gram);
        let imin = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let c = eig.eigenvectors.column(imin);

        let mut xn = vec![0.0; len];
        let mut pn = vec![0.0; len];
        for (j, b) in basis.iter().enumerate() {
            let cj = c[j];
            xn.iter_mut().zip(b).for_each(|(v, bi)| *v += cj * bi);
            if j > 0 {
                pn.iter_mut().zip(b).for_each(|(v, bi)| *v += cj * bi);
            }
        }
        let nxn = norm(&xn);
        xn.iter_mut().for_each(|v| *v /= nxn);
        x = xn;
        if norm(&pn) > 0.0 {
            p = Some(pn);
        }
    }
    Err(NlsError::EigenNoConvergence {
        iterations: opts.max_iters,
        lambda: best.0,
        residual: best.1,
        best_iterate: best.2,
    })
}

/// Smallest eigenvalue of −Δ + V with a certified residual.
pub fn min_eigenvalue(vtot: &Field, tol: f64) -> Result<SpectrumReport> {
    let opts = EigenOptions {
        tol,
        ..EigenOptions::default()
    };
    min_eigenpair(vtot, &opts).map(|(r, _)| r)
}

/// Passes iff λ_min ≥ margin; otherwise the solver must not run.
pub fn assert_positive_spectrum(rep: &SpectrumReport, margin: f64) -> Result<()> {
    if rep.lambda_min >= margin {
        Ok(())
    } else {
        Err(NlsError::HypothesisViolation(format!(
            "inf σ(−Δ+V) > 0 not certified: lambda_min = {:.6e} < margin {:e}",
            rep.lambda_min, margin
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_h1v, inner_l2, GridSpec};
    use rand::SeedableRng;

    fn grid(l: f64, n: usize, period: f64) -> Grid {
        Grid::new(GridSpec::new(1, l, n, period)).unwrap()
    }

    #[test]
    fn constant_potential() {
        let g = grid(8.0, 64, 1.0);
        let (rep, phi) = min_eigenpair(&Field::constant(&g, 1.0), &EigenOptions::default()).unwrap();
        assert!((rep.lambda_min - 1.0).abs() < 1e-10);
        assert!(rep.eigen_residual <= DEFAULT_EIG_TOL);
        let mean = phi.values().iter().sum::<f64>() / phi.values().len() as f64;
        assert!(phi.values().iter().all(|v| (v - mean).abs() < 1e-8));
        assert!(assert_positive_spectrum(&rep, DEFAULT_MARGIN).is_ok());
    }

    #[test]
    fn negative_constant_is_refused() {
        let g = grid(8.0, 64, 1.0);
        let rep = min_eigenvalue(&Field::constant(&g, -2.0), DEFAULT_EIG_TOL).unwrap();
        assert!((rep.lambda_min + 2.0).abs() < 1e-10);
        assert!(matches!(
            assert_positive_spectrum(&rep, DEFAULT_MARGIN),
            Err(NlsError::HypothesisViolation(_))
        ));
    }

    #[test]
    fn rayleigh_quotients_bound_lambda_from_above() {
        let g = grid(8.0, 128, 1.0);
        let v = Field::from_fn(&g, |x| 1.0 + (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        let rep = min_eigenvalue(&v, DEFAULT_EIG_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let phi = Field::random_smooth(&g, &mut rng, 12);
            let rq = inner_h1v(&phi, &phi, &v).unwrap() / inner_l2(&phi, &phi).unwrap();
            assert!(rep.lambda_min <= rq + DEFAULT_EIG_TOL);
        }
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let g = grid(8.0, 128, 1.0);
        let v = Field::from_fn(&g, |x| 1.0 + (2.0 * std::f64::consts::PI * x[0]).cos()).unwrap();
        let opts = EigenOptions {
            max_iters: 1,
            tol: 1e-14,
            ..EigenOptions::default()
        };
        match min_eigenpair(&v, &opts) {
            Err(NlsError::EigenNoConvergence {
                best_iterate,
                residual,
                ..
            }) => {
                assert_eq!(best_iterate.len(), 128);
                assert!(residual.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

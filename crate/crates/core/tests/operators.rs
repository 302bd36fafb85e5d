mod common;

use common::*;
use nls_core::grid::*;
use nls_core::spectrum::{assert_positive_spectrum, min_eigenpair, min_eigenvalue, EigenOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[test]
fn closed_form_second_derivative_matches_mode_sum() {
    let a = spectral_d2(32, 5.0);
    let b = spectral_d2_by_modes(32, 5.0);
    assert!((a - b).abs().max() < 1e-9);
}

#[test]
fn laplacian_matches_dense_spectral_matrix() {
    let g = grid1(8.0, 64, 1.0);
    let d2 = spectral_d2(64, 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let u = Field::random_smooth(&g, &mut rng, 31);
        let lap = laplacian(&u).unwrap();
        let dense = &d2 * nalgebra::DVector::from_column_slice(u.values());
        let err = lap.values().iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * dense.amax().max(1.0), "{err}");
    }
}

#[test]
fn laplacian_against_finite_differences_within_truncation_bound() {
    let (n, l, modes) = (32, 8.0, 4);
    let g = grid1(l, n, 1.0);
    let fd = fd_d2(n, l);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let u = Field::random_smooth(&g, &mut rng, modes);
        let lap = laplacian(&u).unwrap();
        let fdu = &fd * nalgebra::DVector::from_column_slice(u.values());
        let diff: f64 = lap.values().iter().zip(fdu.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let unorm: f64 = u.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = fd_truncation_bound(n, l, modes, unorm);
        assert!(diff <= bound * (1.0 + 1e-9), "{diff} > {bound}");
        assert!(diff > 0.0);
    }
}

#[test]
fn sech_squared_integral() {
    let g = grid1(40.0, 1024, 1.25);
    let u = Field::from_fn(&g, |x| 2.0 * sech(x[0] - 20.0).powi(2)).unwrap();
    assert!((integrate(&u) - 4.0).abs() < 1e-10);
    assert!((quad(&u) - 4.0).abs() < 1e-10);
}

#[test]
fn h1v_form_matches_dense_operator() {
    let (n, l) = (32, 4.0);
    let g = grid1(l, n, 1.0);
    let v = Field::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let a = dense_operator(n, l, v.values());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let u = Field::random_smooth(&g, &mut rng, 15);
        let w = Field::random_smooth(&g, &mut rng, 15);
        let got = inner_h1v(&u, &w, &v).unwrap();
        let want = dense_form(&a, u.values(), w.values(), g.spacing(0));
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn l4_norm_of_soliton() {
    let (g, _) = kerr(1024);
    let u = soliton(&g, 20.0);
    let want = (16.0f64 / 3.0).powf(0.25);
    assert!((lp_norm(&u, 4.0).unwrap() - want).abs() < 1e-8);
}

#[test]
fn symmetric_two_bump_centroid_is_degenerate() {
    let (g, _) = kerr(1024);
    let u = soliton(&g, 10.0).zip_map(&soliton(&g, 30.0), |a, b| a + b).unwrap();
    let (_, res) = centroid_with_resultant(&u).unwrap();
    // direct circular mean of the weights
    let (mut c, mut s, mut tot) = (0.0, 0.0, 0.0);
    for (i, v) in u.values().iter().enumerate() {
        let th = 2.0 * PI * g.point(i)[0] / 40.0;
        c += v * v * th.cos();
        s += v * v * th.sin();
        tot += v * v;
    }
    let direct = (c * c + s * s).sqrt() / tot;
    assert!((res[0] - direct).abs() < 1e-12);
    assert!(direct < 1e-6);
    assert!(matches!(centroid(&u), Err(nls_core::NlsError::DegenerateCentroid { .. })));
}

#[test]
fn mathieu_bottom_of_spectrum_matches_dense_eigensolve() {
    let (n, l) = (256, 8.0);
    let g = grid1(l, n, 1.0);
    let v = Field::from_fn(&g, |x| 1.0 + (2.0 * PI * x[0]).cos()).unwrap();
    let dense = dense_min_eigenvalue(dense_operator(n, l, v.values()));
    let rep = min_eigenvalue(&v, 1e-8).unwrap();
    assert!((rep.lambda_min - dense).abs() <= 1e-8, "{} vs {dense}", rep.lambda_min);
    assert!(assert_positive_spectrum(&rep, 1e-6).is_ok());
}

#[test]
fn spectrum_shift_covariance() {
    let g = grid1(8.0, 256, 1.0);
    let v = Field::from_fn(&g, |x| 1.0 + (2.0 * PI * x[0]).cos()).unwrap();
    let base = min_eigenvalue(&v, 1e-8).unwrap().lambda_min;
    for c in [-0.5, 0.3, 2.0] {
        let shifted = min_eigenvalue(&v.map(|x| x + c), 1e-8).unwrap().lambda_min;
        assert!((shifted - base - c).abs() <= 2e-8);
    }
}

#[test]
fn attractive_defect_never_raises_the_bottom() {
    let g = grid1(16.0, 512, 1.0);
    let v = Field::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos()).unwrap();
    let base = min_eigenvalue(&v, 1e-8).unwrap().lambda_min;
    for d in [0.1, 0.5, 1.0] {
        let w = Field::from_fn(&g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos() - d * (-(x[0] - 8.5).powi(2) / 4.0).exp()).unwrap();
        assert!(min_eigenvalue(&w, 1e-8).unwrap().lambda_min <= base + 2e-8);
    }
}

#[test]
fn eigen_residual_is_certified() {
    let g = grid1(8.0, 128, 1.0);
    let v = Field::from_fn(&g, |x| 2.0 + (2.0 * PI * x[0]).sin()).unwrap();
    let (rep, phi) = min_eigenpair(&v, &EigenOptions::default()).unwrap();
    let aphi = apply_operator(&phi, &v).unwrap();
    let r: f64 = aphi.values().iter().zip(phi.values()).map(|(a, p)| (a - rep.lambda_min * p).powi(2)).sum::<f64>().sqrt();
    let pn: f64 = phi.values().iter().map(|p| p * p).sum::<f64>().sqrt();
    assert!(r / pn <= 1e-8);
}

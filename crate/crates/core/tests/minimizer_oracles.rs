mod common;

use common::*;
use nls_core::grid::{centroid, l2_norm, periodic_delta, shift_cells, Field, Grid};
use nls_core::minimizer::{solve_ground_state, sweep, Init, SolveReport, SolverOptions, StopReason, SweepParameter};
use nls_core::model::sample_model;
use nls_core::nehari::{energy, find_small_sphere, pde_residual, project};
use nls_core::presets;
use nls_core::{CertifyOptions, Problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn problem(preset: (nls_core::model::Model, nls_core::grid::GridSpec)) -> Problem {
    let g = Grid::new(preset.1).unwrap();
    Problem::certify(&preset.0, &g, &CertifyOptions::default()).unwrap()
}

fn solve(p: &Problem, init: Init, seed: u64) -> SolveReport {
    let opts = SolverOptions {
        init,
        seed,
        ..SolverOptions::default()
    };
    let r = solve_ground_state(p, &opts).unwrap();
    assert!(r.converged, "{:?} after {}", r.stop_reason, r.iterations);
    r
}

#[test]
fn kerr_minimizer_is_the_sech_soliton() {
    let p = problem(presets::kerr_soliton());
    let r = solve(&p, Init::default(), 0);
    assert!((r.c_estimate - 4.0 / 3.0).abs() <= 1e-8, "{}", r.c_estimate);
    let u = r.final_point.u.map(f64::abs);
    let x0 = centroid(&u).unwrap()[0];
    let l = p.grid().box_length(0);
    let exact = Field::from_fn(p.grid(), |x| 2f64.sqrt() * sech(periodic_delta(x[0], x0, l))).unwrap();
    let err = u.axpy(-1.0, &exact).unwrap().max_abs();
    assert!(err <= 1e-4, "{err:e}");
}

#[test]
fn random_starts_agree_on_the_mathieu_level() {
    let p = problem(presets::mathieu_kerr());
    let cs: Vec<f64> = (0..5)
        .map(|seed| solve(&p, Init::RandomGaussian { spread: 3.0 }, seed).c_estimate)
        .collect();
    let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((hi - lo) / lo <= 1e-8, "{cs:?}");
}

#[test]
fn level_grows_with_the_competing_term() {
    let (model, spec) = presets::dual_power(1.0);
    let g = Grid::new(spec).unwrap();
    let values = [0.0, 0.1, 0.2];
    let entries = sweep(
        &model,
        &g,
        SweepParameter::GammaAmplitude,
        &values,
        &CertifyOptions::default(),
        &SolverOptions::default(),
    )
    .unwrap();
    let cs: Vec<f64> = entries.iter().map(|e| e.c_estimate.unwrap()).collect();
    assert!(entries.iter().all(|e| e.converged));
    for w in cs.windows(2) {
        assert!(w[1] >= w[0] - 1e-10, "{cs:?}");
    }
    // pathwise: projecting the larger-Γ minimizer for the smaller Γ can only lower J
    for i in 1..values.len() {
        let u = &entries[i].report().unwrap().final_point.u;
        let lower = sample_model(&model.with_gamma_amplitude(values[i - 1]).unwrap(), &g).unwrap();
        let j = project(u, &lower).unwrap().energy.total;
        assert!(cs[i - 1] <= j + 1e-10 && j <= cs[i] + 1e-10, "{} {j} {}", cs[i - 1], cs[i]);
    }
}

#[test]
fn deeper_attractive_defect_lowers_the_level() {
    let (model, spec) = presets::mathieu_kerr();
    let g = Grid::new(spec).unwrap();
    let values = [0.0, 0.25, 0.5];
    let entries = sweep(
        &model,
        &g,
        SweepParameter::LocDepth,
        &values,
        &CertifyOptions::default(),
        &SolverOptions::default(),
    )
    .unwrap();
    let cs: Vec<f64> = entries.iter().map(|e| e.c_estimate.unwrap()).collect();
    assert!(cs.windows(2).all(|w| w[1] < w[0]), "{cs:?}");
    // the shallower minimizer is already a competitor for the deeper defect
    for i in 1..values.len() {
        let u = &entries[i - 1].report().unwrap().final_point.u;
        let deeper = sample_model(&model.with_loc_depth(values[i], &g), &g).unwrap();
        let j = project(u, &deeper).unwrap().energy.total;
        assert!(j < cs[i - 1] && cs[i] <= j + 1e-10);
    }
}

#[test]
fn descent_is_monotone_and_stays_above_the_floor() {
    for preset in [presets::kerr_soliton(), presets::dual_power(1.0)] {
        let p = problem(preset);
        let r = solve(&p, Init::default(), 0);
        let scale = r.final_summary.norm_sq.max(r.c_estimate.abs());
        for w in r.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 16.0 * f64::EPSILON * scale.max(w[0].abs()), "{} -> {}", w[0], w[1]);
        }
        let sphere = find_small_sphere(&p.sampled, &mut ChaCha8Rng::seed_from_u64(1), 100).unwrap();
        assert!(r.final_summary.norm_sq.sqrt() >= sphere.r_small);
        assert!(r.energy_history.iter().all(|&e| e >= sphere.energy_floor()));
    }
}

#[test]
fn converged_points_solve_the_equation() {
    for preset in [presets::kerr_soliton(), presets::dual_power(1.0)] {
        let p = problem(preset);
        let opts = SolverOptions::default();
        let r = solve(&p, Init::default(), 0);
        let u = &r.final_point.u;
        let rel = l2_norm(&pde_residual(u, &p.sampled).unwrap()) / l2_norm(u);
        assert!(rel <= 10.0 * opts.tol_grad, "{rel:e}");
        let e = energy(u, &p.sampled).unwrap();
        assert_eq!(e.total, r.c_estimate);
        assert!(r.final_summary.nehari_residual.abs() <= 1e-10 * r.final_summary.norm_sq);
    }
}

#[test]
fn translated_start_gives_translated_minimizer() {
    let p = problem(presets::kerr_soliton());
    let u0 = Init::default().build(p.grid(), 0).unwrap();
    let shift = [3 * p.grid().cells_per_period() as i64];
    let a = solve(&p, Init::Provided(u0.clone()), 0);
    let b = solve(&p, Init::Provided(shift_cells(&u0, &shift)), 0);
    let back = shift_cells(&a.final_point.u, &shift);
    let diff = back.axpy(-1.0, &b.final_point.u).unwrap().max_abs();
    assert!(diff <= 1e-8, "{diff:e}");
    assert!((a.c_estimate - b.c_estimate).abs() <= 1e-12);
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let p = problem(presets::dual_power(1.0));
    let a = solve(&p, Init::RandomGaussian { spread: 2.0 }, 7);
    let b = solve(&p, Init::RandomGaussian { spread: 2.0 }, 7);
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.energy_history, b.energy_history);
    assert_eq!(a.final_point.u.values(), b.final_point.u.values());
    assert_eq!(a.history_csv(), b.history_csv());
}

#[test]
fn iteration_cap_is_reported_not_hidden() {
    let p = problem(presets::mathieu_kerr());
    let opts = SolverOptions {
        max_iters: 5,
        ..SolverOptions::default()
    };
    let r = solve_ground_state(&p, &opts).unwrap();
    assert!(!r.converged);
    assert_eq!(r.stop_reason, StopReason::MaxIterations);
    assert_eq!(r.iterations, 5);
}

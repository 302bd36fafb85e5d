//! Ground states by projected Sobolev-gradient descent on J∘m̂.
//!
//! Each step moves against the H¹_V Riesz gradient, projects back onto the
//! Nehari manifold along the ray, and accepts by an Armijo test on the
//! projected energy. Because ‖(J∘m)'(v)‖ = ‖u‖‖J'(u)‖ at u = m(v), a small
//! Riesz-gradient norm certifies an approximate critical point of J.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::field_io::read_field;
use crate::grid::{centroid_with_resultant, periodic_delta, shift_cells, Field, Grid, DEGENERATE_RESULTANT};
use crate::model::Model;
use crate::nehari::{certify_with_gradient, energy, project_ray, NehariPoint};
use crate::problem::{CertifyOptions, Problem};

const STEP_FLOOR: f64 = 1e-16;
const ROUNDOFF_SLACK: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Gaussian bump; `width` defaults to two periods and `center` to the
    /// middle of the central period cell.
    Gaussian {
        #[serde(default)]
        width: Option<f64>,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Gaussian with center, width and amplitude drawn from the solver seed:
    /// center within ±`spread` periods of the default center, width in [1, 3]
    /// periods, amplitude in [0.5, 1.5].
    RandomGaussian { spread: f64 },
    File { path: PathBuf },
    #[serde(skip)]
    Provided(Field),
}

impl Default for Init {
    fn default() -> Self {
        Init::Gaussian {
            width: None,
            amplitude: 1.0,
            center: None,
        }
    }
}

fn unit() -> f64 {
    1.0
}

/// Center of the central period cell.
pub fn default_center(grid: &Grid) -> Vec<f64> {
    (0..grid.dim())
        .map(|a| 0.5 * grid.box_length(a) + 0.5 * grid.period())
        .collect()
}

fn gaussian(grid: &Grid, width: f64, amplitude: f64, center: &[f64]) -> Result<Field> {
    Field::from_fn(grid, |x| {
        let r2: f64 = x
            .iter()
            .zip(center)
            .enumerate()
            .map(|(a, (xi, ci))| periodic_delta(*xi, *ci, grid.box_length(a)).powi(2))
            .sum();
        amplitude * (-r2 / (width * width)).exp()
    })
}

impl Init {
    pub fn build(&self, grid: &Grid, seed: u64) -> Result<Field> {
        match self {
            Init::Gaussian {
                width,
                amplitude,
                center,
            } => {
                let width = width.unwrap_or(2.0 * grid.period());
                let center = center.clone().unwrap_or_else(|| default_center(grid));
                if center.len() != grid.dim() || !(width > 0.0) {
                    return Err(NlsError::InvalidArgument(
                        "gaussian init needs a positive width and one center per axis".into(),
                    ));
                }
                gaussian(grid, width, *amplitude, &center)
            }
            Init::RandomGaussian { spread } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = grid.period();
                let center: Vec<f64> = default_center(grid)
                    .into_iter()
                    .map(|c| c + rng.gen_range(-1.0..=1.0) * spread * p)
                    .collect();
                let width = rng.gen_range(1.0..3.0) * p;
                let amplitude = rng.gen_range(0.5..1.5);
                gaussian(grid, width, amplitude, &center)
            }
            Init::File { path } => read_field(path, grid),
            Init::Provided(u) => {
                if u.grid() != grid {
                    return Err(NlsError::GridMismatch);
                }
                Ok(u.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tol_grad: f64,
    pub tol_energy: f64,
    /// Consecutive steps with relative decrease below `tol_energy` (and no
    /// halving of the gradient norm) before the run is declared stalled.
    pub stall_window: usize,
    pub max_iters: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub recenter_every: usize,
    pub drift_frac: f64,
    pub init: Init,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_grad: 1e-8,
            tol_energy: 1e-12,
            stall_window: 100,
            max_iters: 20000,
            step0: 1.0,
            armijo_c: 1e-4,
            backtrack: 0.5,
            recenter_every: 50,
            drift_frac: 0.25,
            init: Init::default(),
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NlsError::InvalidArgument(m.to_string()));
        if !(self.tol_grad > 0.0 && self.tol_energy > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.step0 > 0.0 && self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("step0 must be positive and armijo_c in (0, 1)");
        }
        if !(self.drift_frac > 0.0) {
            return bad("drift_frac must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EnergyStall,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalSummary {
    pub t_applied: f64,
    pub energy: crate::nehari::EnergyBreakdown,
    pub nehari_residual: f64,
    pub norm_sq: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    /// Centroid of every iterate, in the frame of the initial field (undoing
    /// any re-centering shifts).
    pub centroid_track: Vec<Vec<f64>>,
    #[serde(skip)]
    pub final_point: NehariPoint,
    #[serde(rename = "final")]
    pub final_summary: FinalSummary,
    pub c_estimate: f64,
    #[serde(skip)]
    pub wall_time: Duration,
    pub drift_detected: bool,
    pub max_drift: f64,
    pub recenter_shifts: usize,
}

impl SolveReport {
    /// Energy and gradient-norm history as CSV (`iter,energy,grad_norm`).
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,energy,grad_norm\n");
        for (i, (e, g)) in self.energy_history.iter().zip(&self.grad_norm_history).enumerate() {
            s.push_str(&format!("{i},{e:.17e},{g:.17e}\n"));
        }
        s
    }
}

struct Tracker {
    grid: Grid,
    origin: Option<Vec<f64>>,
    /// Total applied shift per axis, physical units.
    shift: Vec<f64>,
    track: Vec<Vec<f64>>,
    max_drift: f64,
}

impl Tracker {
    fn new(grid: &Grid) -> Self {
        Tracker {
            grid: grid.clone(),
            origin: None,
            shift: vec![0.0; grid.dim()],
            track: Vec::new(),
            max_drift: 0.0,
        }
    }

    fn record(&mut self, u: &Field) {
        let Ok((pos, res)) = centroid_with_resultant(u) else {
            return;
        };
        let g = &self.grid;
        let frame: Vec<f64> = pos
            .iter()
            .enumerate()
            .map(|(a, p)| (p - self.shift[a]).rem_euclid(g.box_length(a)))
            .collect();
        if res.iter().all(|&r| r >= DEGENERATE_RESULTANT) {
            match &self.origin {
                None => self.origin = Some(frame.clone()),
                Some(o) => {
                    let d: f64 = frame
                        .iter()
                        .zip(o)
                        .enumerate()
                        .map(|(a, (f, oo))| periodic_delta(*f, *oo, g.box_length(a)).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    self.max_drift = self.max_drift.max(d);
                }
            }
        }
        self.track.push(frame);
    }
}

/// Lattice shift (in cells) bringing the centroid back to the box center,
/// or `None` while the centroid stays in the central half.
fn recenter_offset(u: &Field) -> Option<Vec<i64>> {
    let g = u.grid();
    let (pos, res) = centroid_with_resultant(u).ok()?;
    if res.iter().any(|&r| r < DEGENERATE_RESULTANT) {
        return None;
    }
    let mut outside = false;
    let mut offset = Vec::with_capacity(g.dim());
    for (a, p) in pos.iter().enumerate() {
        let l = g.box_length(a);
        let d = periodic_delta(0.5 * l, *p, l);
        outside |= d.abs() > 0.25 * l;
        let periods = (d / g.period()).round() as i64;
        offset.push(periods * g.cells_per_period() as i64);
    }
    (outside && offset.iter().any(|&o| o != 0)).then_some(offset)
}

/// Minimizes J over the Nehari manifold starting from `opts.init`.
pub fn solve_ground_state(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let m = &problem.sampled;
    let grid = &m.grid;
    let start = Instant::now();
    let u0 = opts.init.build(grid, opts.seed)?;
    if u0.is_zero() {
        return Err(NlsError::ZeroField);
    }
    let recenter = opts.recenter_every > 0 && m.model.potential.v_loc.is_zero();

    let (t0, w0) = project_ray(&u0, m)?;
    let (mut point, mut grad) = certify_with_gradient(w0, t0, m)?;
    let mut tracker = Tracker::new(grid);
    tracker.record(&point.u);
    let mut energy_history = vec![point.energy.total];
    let mut grad_norm_history = vec![point.grad_norm];
    let mut recenter_shifts = 0;
    let mut stall = 0usize;
    let mut stall_grad = point.grad_norm;

    let mut iterations = 0;
    let stop_reason = loop {
        if point.grad_norm <= opts.tol_grad {
            break StopReason::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIterations;
        }
        let j0 = point.energy.total;
        let g2 = point.grad_norm * point.grad_norm;
        let mut step = opts.step0;
        // Below this predicted decrease the energy cannot resolve the step;
        // such steps are judged by the certified gradient norm instead.
        let slack = ROUNDOFF_SLACK * j0.abs().max(point.norm_sq);
        let accepted = loop {
            if step < STEP_FLOOR {
                break None;
            }
            let trial = point.u.axpy(-step, &grad)?;
            if let Ok((t, w)) = project_ray(&trial, m) {
                if let Ok(e) = energy(&w, m) {
                    if e.total <= j0 - opts.armijo_c * step * g2 {
                        break Some(certify_with_gradient(w, t, m)?);
                    }
                    if opts.armijo_c * step * g2 < slack && e.total <= j0 + slack {
                        let (next, next_grad) = certify_with_gradient(w, t, m)?;
                        if next.grad_norm < point.grad_norm {
                            break Some((next, next_grad));
                        }
                    }
                }
            }
            step *= opts.backtrack;
        };
        let Some((next, next_grad)) = accepted else {
            break StopReason::LineSearchFailure;
        };
        point = next;
        grad = next_grad;
        iterations += 1;

        if recenter && iterations % opts.recenter_every == 0 {
            if let Some(offset) = recenter_offset(&point.u) {
                point.u = shift_cells(&point.u, &offset);
                grad = shift_cells(&grad, &offset);
                for (a, o) in offset.iter().enumerate() {
                    tracker.shift[a] += *o as f64 * grid.spacing(a);
                }
                recenter_shifts += 1;
            }
        }
        tracker.record(&point.u);

        let decrease = (j0 - point.energy.total) / point.energy.total.abs().max(f64::MIN_POSITIVE);
        energy_history.push(point.energy.total);
        grad_norm_history.push(point.grad_norm);
        if decrease < opts.tol_energy {
            stall += 1;
            if stall >= opts.stall_window {
                if point.grad_norm > 0.5 * stall_grad {
                    break StopReason::EnergyStall;
                }
                stall = 0;
                stall_grad = point.grad_norm;
            }
        } else {
            stall = 0;
            stall_grad = point.grad_norm;
        }
    };

    let l = grid.box_length(0);
    let report = SolveReport {
        converged: stop_reason == StopReason::GradientTolerance,
        stop_reason,
        iterations,
        energy_history,
        grad_norm_history,
        centroid_track: tracker.track,
        final_summary: FinalSummary {
            t_applied: point.t_applied,
            energy: point.energy,
            nehari_residual: point.nehari_residual,
            norm_sq: point.norm_sq,
            grad_norm: point.grad_norm,
        },
        c_estimate: point.energy.total,
        final_point: point,
        wall_time: start.elapsed(),
        drift_detected: tracker.max_drift > opts.drift_frac * l,
        max_drift: tracker.max_drift,
        recenter_shifts,
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    GammaAmplitude,
    /// Depth of the gaussian defect (positive is attractive).
    LocDepth,
}

impl SweepParameter {
    pub fn apply(&self, model: &Model, value: f64, grid: &Grid) -> Result<Model> {
        match self {
            SweepParameter::GammaAmplitude => model.with_gamma_amplitude(value),
            SweepParameter::LocDepth => Ok(model.with_loc_depth(value, grid)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    #[serde(skip)]
    pub outcome: std::result::Result<SolveReport, NlsError>,
    pub c_estimate: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

impl SweepEntry {
    fn new(value: f64, outcome: std::result::Result<SolveReport, NlsError>) -> Self {
        let (c_estimate, converged, iterations, error) = match &outcome {
            Ok(r) => (Some(r.c_estimate), r.converged, r.iterations, None),
            Err(e) => (None, false, 0, Some(e.to_string())),
        };
        SweepEntry {
            value,
            outcome,
            c_estimate,
            converged,
            iterations,
            error,
        }
    }

    pub fn report(&self) -> Option<&SolveReport> {
        self.outcome.as_ref().ok()
    }
}

/// Summary table of a sweep as CSV (`value,c_estimate,converged,iterations`).
pub fn sweep_summary_csv(entries: &[SweepEntry]) -> String {
    let mut s = String::from("value,c_estimate,converged,iterations\n");
    for e in entries {
        let c = e.c_estimate.map(|c| format!("{c:.17e}")).unwrap_or_else(|| "nan".into());
        s.push_str(&format!("{},{c},{},{}\n", e.value, e.converged, e.iterations));
    }
    s
}

fn solve_one(
    model: &Model,
    grid: &Grid,
    param: SweepParameter,
    value: f64,
    certify: &CertifyOptions,
    opts: &SolverOptions,
) -> std::result::Result<SolveReport, NlsError> {
    let variant = param.apply(model, value, grid)?;
    let problem = Problem::certify(&variant, grid, certify)?;
    solve_ground_state(&problem, opts)
}

/// Solves the family in order, warm-starting each value from the previous
/// successful minimizer. Failures are recorded and the sweep continues.
pub fn sweep(
    model: &Model,
    grid: &Grid,
    param: SweepParameter,
    values: &[f64],
    certify: &CertifyOptions,
    opts: &SolverOptions,
) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(NlsError::InvalidArgument("sweep needs at least one value".into()));
    }
    let mut entries = Vec::with_capacity(values.len());
    let mut warm: Option<Field> = None;
    for &value in values {
        let mut o = opts.clone();
        if let Some(u) = &warm {
            o.init = Init::Provided(u.clone());
        }
        let outcome = solve_one(model, grid, param, value, certify, &o);
        if let Ok(r) = &outcome {
            warm = Some(r.final_point.u.clone());
        }
        entries.push(SweepEntry::new(value, outcome));
    }
    Ok(entries)
}

/// Cold-started sweep entry, used when entries are solved independently.
pub fn sweep_entry_cold(
    model: &Model,
    grid: &Grid,
    param: SweepParameter,
    value: f64,
    certify: &CertifyOptions,
    opts: &SolverOptions,
) -> SweepEntry {
    SweepEntry::new(value, solve_one(model, grid, param, value, certify, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{NonlinearitySpec, PeriodicProfile, PotentialSpec};

    fn kerr_problem(n: usize) -> Problem {
        let g = Grid::new(GridSpec::new(1, 40.0, n, 1.25)).unwrap();
        let m = Model::new(
            PotentialSpec::periodic(1.25, PeriodicProfile::constant(1.0)),
            NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::constant(1.0)).unwrap(),
        )
        .unwrap();
        Problem::certify(&m, &g, &CertifyOptions::default()).unwrap()
    }

    #[test]
    fn options_are_validated() {
        for o in [
            SolverOptions {
                backtrack: 1.0,
                ..SolverOptions::default()
            },
            SolverOptions {
                tol_grad: 0.0,
                ..SolverOptions::default()
            },
        ] {
            assert!(o.validate().is_err());
        }
    }

    #[test]
    fn zero_init_is_rejected() {
        let p = kerr_problem(256);
        let opts = SolverOptions {
            init: Init::Provided(Field::zeros(p.grid())),
            ..SolverOptions::default()
        };
        assert_eq!(solve_ground_state(&p, &opts).unwrap_err(), NlsError::ZeroField);
    }

    #[test]
    fn exact_soliton_is_a_fixed_point() {
        let p = kerr_problem(1024);
        let u = Field::from_fn(p.grid(), |x| 2f64.sqrt() / (x[0] - 20.0).cosh()).unwrap();
        let opts = SolverOptions {
            init: Init::Provided(u),
            ..SolverOptions::default()
        };
        let r = solve_ground_state(&p, &opts).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert!(r.final_point.grad_norm <= opts.tol_grad);
    }

    #[test]
    fn default_init_is_two_cells_wide_and_centered_in_a_cell() {
        let g = Grid::new(GridSpec::new(1, 40.0, 256, 1.25)).unwrap();
        let u = Init::default().build(&g, 0).unwrap();
        let c = crate::grid::centroid(&u).unwrap();
        assert!((c[0] - 20.625).abs() < 1e-9);
        assert!((u.max_abs() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn singleton_sweep_matches_direct_solve() {
        let p = kerr_problem(512);
        let opts = SolverOptions::default();
        let direct = solve_ground_state(&p, &opts).unwrap();
        let entries = sweep(
            p.model(),
            p.grid(),
            SweepParameter::GammaAmplitude,
            &[0.0],
            &CertifyOptions::default(),
            &opts,
        )
        .unwrap();
        let r = entries[0].report().unwrap();
        assert_eq!(r.c_estimate, direct.c_estimate);
        assert_eq!(r.final_point.u, direct.final_point.u);
        assert!(sweep(p.model(), p.grid(), SweepParameter::GammaAmplitude, &[], &CertifyOptions::default(), &opts).is_err());
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let p = kerr_problem(256);
        // Γ on a power (q = 2) model is rejected; the next value still runs
        let entries = sweep(
            p.model(),
            p.grid(),
            SweepParameter::GammaAmplitude,
            &[0.3, 0.0],
            &CertifyOptions::default(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(entries[0].error.is_some());
        assert!(entries[1].converged);
    }
}

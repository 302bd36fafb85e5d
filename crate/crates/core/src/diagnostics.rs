//! Post-solve diagnostics: tail decay, energy comparison against the purely
//! periodic problem, translation curves, bump decomposition and residuals.

use serde::Serialize;

use crate::error::{NlsError, Result};
use crate::grid::{centroid, l2_norm, periodic_delta, shift_cells, Field, Grid};
use crate::minimizer::{solve_ground_state, SolveReport, SolverOptions};
use crate::model::{Model, SampledModel};
use crate::nehari::{energy, pde_residual, project_ray};
use crate::problem::{CertifyOptions, Problem};

/// Samples at or below this magnitude are treated as round-off.
pub const DECAY_FLOOR: f64 = 1e-13;
/// The fit window starts where the shell maximum has dropped below this
/// fraction of the peak.
pub const DECAY_START_FRAC: f64 = 1e-2;
const MIN_TAIL_SAMPLES: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Fits log max_{|x−x₀|∈shell} |u| ≈ log C − α r over the tail inside the
/// central half of the box, x₀ being the centroid.
pub fn decay_fit(u: &Field) -> Result<DecayFit> {
    let g = u.grid();
    let c = centroid(u)?;
    let h = (0..g.dim()).map(|a| g.spacing(a)).fold(f64::INFINITY, f64::min);
    let r_max = (0..g.dim())
        .map(|a| 0.25 * g.box_length(a))
        .fold(f64::INFINITY, f64::min);
    let bins = (r_max / h).floor() as usize + 1;
    let mut shells: Vec<Option<(f64, f64)>> = vec![None; bins];
    for (idx, &v) in u.values().iter().enumerate() {
        let x = g.point(idx);
        let r = (0..g.dim())
            .map(|a| periodic_delta(x[a], c[a], g.box_length(a)).powi(2))
            .sum::<f64>()
            .sqrt();
        if r > r_max {
            continue;
        }
        let b = (r / h) as usize;
        let a = v.abs();
        if shells[b].is_none_or(|(_, m)| a > m) {
            shells[b] = Some((r, a));
        }
    }
    let peak = u.max_abs();
    let mut pts = Vec::new();
    let mut started = false;
    for &(r, a) in shells.iter().flatten() {
        started |= a < DECAY_START_FRAC * peak;
        if started && a > DECAY_FLOOR {
            pts.push((r, a.ln()));
        }
    }
    if pts.len() < MIN_TAIL_SAMPLES {
        return Err(NlsError::DecayFit(format!(
            "{} tail samples above {DECAY_FLOOR:e} inside the central half",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(NlsError::DecayFit("tail window has zero width".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        alpha_hat: -slope,
        c_hat: (my - slope * mx).exp(),
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VlocSign {
    Negative,
    Zero,
    Positive,
    Mixed,
}

pub fn classify_vloc(vloc: &Field) -> VlocSign {
    let (lo, hi) = vloc
        .values()
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    match (lo < 0.0, hi > 0.0) {
        (false, false) => VlocSign::Zero,
        (true, false) => VlocSign::Negative,
        (false, true) => VlocSign::Positive,
        (true, true) => VlocSign::Mixed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub c: Option<f64>,
    pub c_per: Option<f64>,
    /// c_per − c.
    pub gap: Option<f64>,
    pub vloc_sign: VlocSign,
    /// Set when either solve failed or did not converge.
    pub partial: bool,
    pub messages: Vec<String>,
    #[serde(skip)]
    pub full: Option<SolveReport>,
    #[serde(skip)]
    pub periodic: Option<SolveReport>,
}

/// Solves with and without V_loc from the same initializer and compares.
pub fn compare_cper(model: &Model, grid: &Grid, certify: &CertifyOptions, opts: &SolverOptions) -> Result<ComparisonReport> {
    let sampled = crate::model::sample_model(model, grid)?;
    let vloc_sign = classify_vloc(&sampled.vloc);
    let mut messages = Vec::new();
    let mut run = |m: &Model, label: &str| -> Option<SolveReport> {
        let r = Problem::certify(m, grid, certify).and_then(|p| solve_ground_state(&p, opts));
        match r {
            Ok(r) => {
                if !r.converged {
                    messages.push(format!("{label} solve stopped: {:?}", r.stop_reason));
                }
                Some(r)
            }
            Err(e) => {
                messages.push(format!("{label} solve failed: {e}"));
                None
            }
        }
    };
    let full = run(model, "full");
    let periodic = run(&model.periodic_part(), "periodic");
    let c = full.as_ref().map(|r| r.c_estimate);
    let c_per = periodic.as_ref().map(|r| r.c_estimate);
    let partial = !messages.is_empty();
    Ok(ComparisonReport {
        c,
        c_per,
        gap: c.zip(c_per).map(|(c, cp)| cp - c),
        vloc_sign,
        partial,
        messages,
        full,
        periodic,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslatePoint {
    pub offset: Vec<i64>,
    /// Physical length of the offset.
    pub distance: f64,
    pub t_y: f64,
    pub j_value: f64,
}

/// Projects lattice translates of `u_per` onto the Nehari manifold of the
/// full model and records the resulting energies.
pub fn translate_energy_curve(u_per: &Field, m: &SampledModel, offsets: &[Vec<i64>]) -> Result<Vec<TranslatePoint>> {
    let g = u_per.grid();
    if g != &m.grid {
        return Err(NlsError::GridMismatch);
    }
    offsets
        .iter()
        .map(|off| {
            let uy = crate::grid::translate(u_per, off)?;
            let (t_y, w) = project_ray(&uy, m)?;
            let distance = off
                .iter()
                .enumerate()
                .map(|(a, o)| (*o as f64 * g.spacing(a)).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(TranslatePoint {
                offset: off.clone(),
                distance,
                t_y,
                j_value: energy(&w, m)?.total,
            })
        })
        .collect()
}

/// CSV rendering of a translation curve.
pub fn translate_curve_csv(curve: &[TranslatePoint], c_per: f64) -> String {
    let mut s = String::from("offset,distance,t_y,j_value,excess\n");
    for p in curve {
        let off: Vec<String> = p.offset.iter().map(|o| o.to_string()).collect();
        s.push_str(&format!(
            "{},{},{:.17e},{:.17e},{:.17e}\n",
            off.join(" "),
            p.distance,
            p.t_y,
            p.j_value,
            p.j_value - c_per
        ));
    }
    s
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub threshold_frac: f64,
    /// Minimum bump separation in period cells.
    pub sep_min: f64,
    /// Width of the cosine taper in period cells.
    pub taper: f64,
    /// Peaks below this absolute amplitude are treated as noise.
    pub amplitude_floor: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            threshold_frac: 0.02,
            sep_min: 4.0,
            taper: 2.0,
            amplitude_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Bump {
    pub center: Vec<f64>,
    #[serde(skip)]
    pub profile: Field,
    pub energy_per: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileDecomposition {
    pub bumps: Vec<Bump>,
    #[serde(skip)]
    pub remainder: Field,
    pub remainder_norm: f64,
    /// Largest ∫|remainder|² over a single period cell.
    pub lions: f64,
    pub ell: usize,
}

fn components(mask: &[bool], g: &Grid) -> Vec<Vec<usize>> {
    let n = g.n();
    let dim = g.dim();
    let mut label = vec![usize::MAX; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = Vec::new();
        let mut stack = vec![start];
        label[start] = id;
        while let Some(i) = stack.pop() {
            comp.push(i);
            let ix = g.unravel(i);
            for axis in 0..dim {
                for step in [1, n - 1] {
                    let mut jx = ix;
                    jx[axis] = (ix[axis] + step) % n;
                    let j = g.ravel(jx);
                    if mask[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

fn weighted_center(u: &Field, idx: &[usize]) -> Vec<f64> {
    let g = u.grid();
    (0..g.dim())
        .map(|a| {
            let l = g.box_length(a);
            let (mut c, mut s) = (0.0, 0.0);
            for &i in idx {
                let w = u.values()[i].powi(2);
                let th = 2.0 * std::f64::consts::PI * g.point(i)[a] / l;
                c += w * th.cos();
                s += w * th.sin();
            }
            (s.atan2(c) / (2.0 * std::f64::consts::PI) * l).rem_euclid(l)
        })
        .collect()
}

fn distance(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (0..g.dim())
        .map(|k| periodic_delta(a[k], b[k], g.box_length(k)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Largest ∫|v|² over the lattice of period cells.
pub fn lions_functional(v: &Field) -> f64 {
    let g = v.grid();
    let cpp = g.cells_per_period();
    let per_axis = g.n() / cpp;
    let mut sums = vec![0.0; per_axis.pow(g.dim() as u32)];
    for (i, x) in v.values().iter().enumerate() {
        let ix = g.unravel(i);
        let cell = (0..g.dim()).fold(0, |acc, a| acc * per_axis + ix[a] / cpp);
        sums[cell] += x * x;
    }
    sums.into_iter().fold(0.0, f64::max) * g.cell_volume()
}

/// Heuristic extraction of separated bumps with per-bump periodic energies.
/// `m` may carry a localized potential; energies use its periodic part.
pub fn bump_decomposition(u: &Field, m: &SampledModel, opts: &DecomposeOptions) -> Result<ProfileDecomposition> {
    if u.is_zero() {
        return Err(NlsError::ZeroField);
    }
    let g = u.grid();
    if g != &m.grid {
        return Err(NlsError::GridMismatch);
    }
    let per = m.periodic_part()?;
    let p = g.period();
    let peak = u.max_abs();
    let thr = opts.threshold_frac * peak;
    let mask: Vec<bool> = if peak < opts.amplitude_floor {
        vec![false; u.values().len()]
    } else {
        u.values().iter().map(|v| v.abs() > thr).collect()
    };

    // merge components whose centers are closer than sep_min
    let mut groups: Vec<Vec<usize>> = components(&mask, g);
    loop {
        let centers: Vec<Vec<f64>> = groups.iter().map(|c| weighted_center(u, c)).collect();
        let mut pair = None;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if distance(g, &centers[i], &centers[j]) < opts.sep_min * p {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        match pair {
            Some((i, j)) => {
                let b = groups.swap_remove(j);
                groups[i].extend(b);
            }
            None => break,
        }
    }

    let centers: Vec<Vec<f64>> = groups.iter().map(|c| weighted_center(u, c)).collect();
    let mut remainder = u.clone();
    let mut bumps = Vec::with_capacity(groups.len());
    for (k, comp) in groups.iter().enumerate() {
        let center = &centers[k];
        let radius = comp
            .iter()
            .map(|&i| distance(g, &g.point(i)[..g.dim()], center))
            .fold(0.0, f64::max);
        let taper = opts.taper * p;
        let mut plateau = radius + 2.0 * p;
        let nearest = centers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, c)| distance(g, c, center))
            .fold(f64::INFINITY, f64::min);
        if plateau + taper > 0.5 * nearest {
            plateau = (0.5 * nearest - taper).max(radius);
        }
        let window = |r: f64| {
            if r <= plateau {
                1.0
            } else if r >= plateau + taper {
                0.0
            } else {
                0.5 * (1.0 + (std::f64::consts::PI * (r - plateau) / taper).cos())
            }
        };
        let windowed: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * window(distance(g, &g.point(i)[..g.dim()], center)))
            .collect();
        let w = Field::new(g, windowed)?;
        remainder = remainder.axpy(-1.0, &w)?;
        // lattice shift bringing the bump next to the box center
        let offset: Vec<i64> = (0..g.dim())
            .map(|a| {
                let d = periodic_delta(0.5 * g.box_length(a), center[a], g.box_length(a));
                (d / p).round() as i64 * g.cells_per_period() as i64
            })
            .collect();
        let profile = shift_cells(&w, &offset);
        bumps.push(Bump {
            center: center.clone(),
            energy_per: energy(&profile, &per)?.total,
            mass: l2_norm(&profile),
            profile,
        });
    }
    bumps.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    Ok(ProfileDecomposition {
        ell: bumps.len(),
        bumps,
        remainder_norm: l2_norm(&remainder),
        lions: lions_functional(&remainder),
        remainder,
    })
}

/// ‖pde_residual‖₂ / max(‖u‖₂, 1e−30).
pub fn residual_check(u: &Field, m: &SampledModel) -> Result<f64> {
    let r = pde_residual(u, m)?;
    Ok(l2_norm(&r) / l2_norm(u).max(1e-30))
}

/// Centroid displacement over a track, for runs that were not recentered.
pub fn track_displacement(track: &[Vec<f64>], g: &Grid) -> f64 {
    match track.first() {
        Some(first) => track.iter().map(|p| distance(g, p, first)).fold(0.0, f64::max),
        None => 0.0,
    }
}

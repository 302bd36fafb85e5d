use anyhow::{bail, Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use nls_core::config::RunConfig;
use nls_core::diagnostics::{
    bump_decomposition, compare_cper, decay_fit, residual_check, translate_curve_csv, translate_energy_curve,
};
use nls_core::field_io::{encode, read_field};
use nls_core::grid::{Field, Grid, GridSpec};
use nls_core::manifest::RunDir;
use nls_core::minimizer::{
    default_center, solve_ground_state, sweep, sweep_entry_cold, sweep_summary_csv, Init, SolveReport, SolverOptions,
    SweepEntry,
};
use nls_core::model::{sample_model, validate_hypotheses, LocalizedPotential};
use nls_core::nehari::{certify, fiber_scan, project_ray};
use nls_core::problem::Problem;
use nls_core::spectrum::{assert_positive_spectrum, min_eigenvalue};
use nls_core::NlsError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Command, EXIT_NOT_CONVERGED, EXIT_REFUSED};

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub jobs: usize,
}

pub struct Outcome {
    pub exit_code: u8,
    pub status: String,
    pub hypotheses: Option<Value>,
    pub spectrum: Option<Value>,
}

impl Outcome {
    fn ok(status: impl Into<String>) -> Self {
        Outcome {
            exit_code: 0,
            status: status.into(),
            hypotheses: None,
            spectrum: None,
        }
    }

    pub fn failed(code: u8, status: String) -> Self {
        Outcome {
            exit_code: code,
            ..Outcome::ok(status)
        }
    }

    fn with_problem(mut self, p: &Problem) -> Self {
        self.hypotheses = serde_json::to_value(&p.hypotheses).ok();
        self.spectrum = serde_json::to_value(&p.spectrum).ok();
        self
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn dispatch(cmd: Command, ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    match cmd {
        Command::Validate => validate(ctx, out),
        Command::Spectrum => spectrum(ctx, out),
        Command::Solve => solve(ctx, out),
        Command::Sweep => run_sweep(ctx, out),
        Command::Fiber => fiber(ctx, out),
        Command::Decay => decay(ctx, out),
        Command::Compare => compare(ctx, out),
        Command::Nonexist => nonexist(ctx, out),
        Command::Decompose => decompose(ctx, out),
    }
}

fn write_solve(out: &mut RunDir, suffix: &str, r: &SolveReport) -> Result<()> {
    out.write_json(&format!("report{suffix}.json"), r)?;
    out.write(&format!("history{suffix}.csv"), r.history_csv().as_bytes())?;
    out.write(&format!("field{suffix}.bin"), &encode(&r.final_point.u))?;
    Ok(())
}

fn solve_status(r: &SolveReport) -> (u8, String) {
    let msg = format!(
        "{:?} after {} iterations, c_estimate = {:.12}, grad_norm = {:.3e}",
        r.stop_reason, r.iterations, r.c_estimate, r.final_point.grad_norm
    );
    (if r.converged { 0 } else { EXIT_NOT_CONVERGED }, msg)
}

fn validate(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let report = validate_hypotheses(&s.model, &s.grid, &s.certify.probes);
    out.write_json("hypotheses.json", &report)?;
    let sampled = sample_model(&s.model, &s.grid)?;
    let spec = min_eigenvalue(&sampled.vtot, s.certify.eig_tol)?;
    out.write_json("spectrum.json", &spec)?;
    let positive = assert_positive_spectrum(&spec, s.certify.margin);
    let mut o = Outcome::ok("all hypotheses hold");
    o.hypotheses = Some(to_value(&report));
    o.spectrum = Some(to_value(&spec));
    if !report.all_passed() {
        let names: Vec<String> = report.failures().iter().map(|c| format!("{:?}", c.name)).collect();
        o.exit_code = EXIT_REFUSED;
        o.status = format!("failed checks: {}", names.join(", "));
    } else if let Err(e) = positive {
        o.exit_code = EXIT_REFUSED;
        o.status = e.to_string();
    }
    Ok(o)
}

fn spectrum(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let sampled = sample_model(&s.model, &s.grid)?;
    let spec = min_eigenvalue(&sampled.vtot, s.certify.eig_tol)?;
    out.write_json("spectrum.json", &spec)?;
    let mut o = Outcome::ok(format!("lambda_min = {:.12}", spec.lambda_min));
    o.spectrum = Some(to_value(&spec));
    if let Err(e) = assert_positive_spectrum(&spec, s.certify.margin) {
        o.exit_code = EXIT_REFUSED;
        o.status = e.to_string();
    }
    Ok(o)
}

fn certified(ctx: &Context) -> Result<(Problem, SolverOptions)> {
    let s = ctx.cfg.setup()?;
    let p = Problem::certify(&s.model, &s.grid, &s.certify)?;
    Ok((p, s.solver))
}

fn solve(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let (p, opts) = certified(ctx)?;
    let r = solve_ground_state(&p, &opts)?;
    write_solve(out, "", &r)?;
    let (code, msg) = solve_status(&r);
    Ok(Outcome::failed(code, msg).with_problem(&p))
}

fn run_sweep(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let sw = ctx.cfg.sweep.as_ref().context("the sweep command needs a [sweep] section")?;
    let entries: Vec<SweepEntry> = if sw.warm_start {
        sweep(&s.model, &s.grid, sw.parameter, &sw.values, &s.certify, &s.solver)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(ctx.jobs).build()?;
        pool.install(|| {
            sw.values
                .par_iter()
                .map(|&v| sweep_entry_cold(&s.model, &s.grid, sw.parameter, v, &s.certify, &s.solver))
                .collect()
        })
    };
    for (i, e) in entries.iter().enumerate() {
        match e.report() {
            Some(r) => write_solve(out, &format!("_{i:03}"), r)?,
            None => out.write_json(&format!("report_{i:03}.json"), e)?,
        }
    }
    out.write("sweep_summary.csv", sweep_summary_csv(&entries).as_bytes())?;
    let refused = entries
        .iter()
        .any(|e| matches!(e.outcome, Err(ref err) if classify_core(err) == EXIT_REFUSED));
    let unconverged = entries.iter().filter(|e| !e.converged).count();
    let code = if refused {
        EXIT_REFUSED
    } else if unconverged > 0 {
        EXIT_NOT_CONVERGED
    } else {
        0
    };
    Ok(Outcome::failed(
        code,
        format!("{} of {} entries converged", entries.len() - unconverged, entries.len()),
    ))
}

fn classify_core(e: &NlsError) -> u8 {
    match e {
        NlsError::NoConvergence { .. } | NlsError::BracketFailure { .. } | NlsError::NonFinite(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_REFUSED,
    }
}

#[derive(Serialize)]
struct FiberRow {
    field: usize,
    sign_changes: usize,
    t_root: f64,
    nehari_residual_rel: f64,
}

fn fiber(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let (p, _) = certified(ctx)?;
    let f = &ctx.cfg.fiber;
    let m = &p.sampled;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let mut csv = String::from("field,sign_changes,t_root,nehari_residual_rel\n");
    let mut scans = String::from("field,t,psi,J\n");
    let mut rows = Vec::with_capacity(f.fields);
    for i in 0..f.fields {
        let u = Field::random_smooth(p.grid(), &mut rng, f.max_mode);
        let scan = fiber_scan(&u, m, f.t_lo, f.t_hi, f.points)?;
        for ((t, psi), phi) in scan.t_values.iter().zip(&scan.psi_values).zip(&scan.phi_values) {
            scans.push_str(&format!("{i},{t:.17e},{psi:.17e},{phi:.17e}\n"));
        }
        let (t, w) = project_ray(&u, m)?;
        let pt = certify(w, t, m)?;
        let row = FiberRow {
            field: i,
            sign_changes: scan.sign_changes,
            t_root: t,
            nehari_residual_rel: pt.nehari_residual.abs() / pt.norm_sq,
        };
        csv.push_str(&format!(
            "{},{},{:.17e},{:.17e}\n",
            row.field, row.sign_changes, row.t_root, row.nehari_residual_rel
        ));
        rows.push(row);
    }
    out.write("fiber.csv", csv.as_bytes())?;
    out.write("fiber_scans.csv", scans.as_bytes())?;
    let unique = rows.iter().all(|r| r.sign_changes == 1);
    out.write_json(
        "fiber_summary.json",
        &json!({ "fields": rows.len(), "all_unique": unique,
                 "max_residual_rel": rows.iter().map(|r| r.nehari_residual_rel).fold(0.0, f64::max) }),
    )?;
    let o = if unique {
        Outcome::ok(format!("{} fibers, one sign change each", rows.len()))
    } else {
        Outcome::failed(EXIT_REFUSED, "a fiber map changed sign more than once".into())
    };
    Ok(o.with_problem(&p))
}

fn decay(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let (p, opts) = certified(ctx)?;
    let r = solve_ground_state(&p, &opts)?;
    write_solve(out, "", &r)?;
    let fit = decay_fit(&r.final_point.u)?;
    let mut summary = json!({ "fit": fit, "residual": residual_check(&r.final_point.u, &p.sampled)? });
    let mut converged = r.converged;
    if ctx.cfg.decay.refine {
        let spec = p.grid().spec().clone();
        let fine = Grid::new(GridSpec { n: 2 * spec.n, ..spec })?;
        let pf = Problem::certify(p.model(), &fine, &ctx.cfg.setup()?.certify)?;
        let rf = solve_ground_state(&pf, &opts)?;
        write_solve(out, "_refined", &rf)?;
        let ff = decay_fit(&rf.final_point.u)?;
        summary["refined_fit"] = to_value(&ff);
        summary["alpha_rel_change"] = json!(((ff.alpha_hat - fit.alpha_hat) / fit.alpha_hat).abs());
        converged &= rf.converged;
    }
    out.write_json("decay.json", &summary)?;
    let msg = format!("alpha_hat = {:.6}, r^2 = {:.6}", fit.alpha_hat, fit.r_squared);
    Ok(Outcome::failed(if converged { 0 } else { EXIT_NOT_CONVERGED }, msg).with_problem(&p))
}

fn compare(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let rep = compare_cper(&s.model, &s.grid, &s.certify, &s.solver)?;
    if let Some(r) = &rep.full {
        write_solve(out, "_full", r)?;
    }
    if let Some(r) = &rep.periodic {
        write_solve(out, "_periodic", r)?;
    }
    out.write_json("comparison.json", &rep)?;
    let status = match rep.gap {
        Some(g) => format!("gap c_per − c = {g:.6e} ({:?} V_loc)", rep.vloc_sign),
        None => rep.messages.join("; "),
    };
    Ok(Outcome::failed(if rep.partial { EXIT_NOT_CONVERGED } else { 0 }, status))
}

fn nonexist(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let defect_center = match &s.model.potential.v_loc {
        LocalizedPotential::Gaussian { center, .. } => center.clone(),
        LocalizedPotential::Zero => bail!("the nonexist command needs a localized potential"),
        LocalizedPotential::Table { .. } => default_center(&s.grid),
    };
    let full = Problem::certify(&s.model, &s.grid, &s.certify)?;
    let per = Problem::certify(&s.model.periodic_part(), &s.grid, &s.certify)?;
    let rp = solve_ground_state(&per, &s.solver)?;
    write_solve(out, "_periodic", &rp)?;
    let c_per = rp.c_estimate;

    let g = &s.grid;
    let cpp = g.cells_per_period() as i64;
    let offsets: Vec<Vec<i64>> = if ctx.cfg.nonexist.offsets.is_empty() {
        let reach = (0.5 * g.box_length(0) / g.period()).floor() as i64;
        (0..reach).map(|k| {
            let mut o = vec![0; g.dim()];
            o[0] = k * cpp;
            o
        }).collect()
    } else {
        ctx.cfg.nonexist.offsets.iter().map(|o| o.iter().map(|k| k * cpp).collect()).collect()
    };
    let curve = translate_energy_curve(&rp.final_point.u, &full.sampled, &offsets)?;
    out.write("translate_curve.csv", translate_curve_csv(&curve, c_per).as_bytes())?;

    let mut center = defect_center;
    center[0] += ctx.cfg.nonexist.init_offset * g.period();
    let drift_opts = SolverOptions {
        max_iters: ctx.cfg.nonexist.drift_iters,
        recenter_every: 0,
        init: Init::Gaussian { width: None, amplitude: 1.0, center: Some(center) },
        ..s.solver.clone()
    };
    let rd = solve_ground_state(&full, &drift_opts)?;
    write_solve(out, "_drift", &rd)?;

    let above = curve.iter().all(|p| p.j_value > c_per);
    let monotone = curve.windows(2).all(|w| w[1].j_value <= w[0].j_value);
    let summary = json!({
        "c_per": c_per,
        "curve_above_c_per": above,
        "curve_nonincreasing": monotone,
        "last_excess": curve.last().map(|p| p.j_value - c_per),
        "max_t_y": curve.iter().map(|p| p.t_y).fold(0.0, f64::max),
        "drift_run": { "c_estimate": rd.c_estimate, "stop_reason": rd.stop_reason,
                       "iterations": rd.iterations, "max_drift": rd.max_drift,
                       "drift_detected": rd.drift_detected },
    });
    out.write_json("nonexist.json", &summary)?;
    let status = format!(
        "curve above c_per: {above}, nonincreasing: {monotone}, drift {:.3} (detected: {})",
        rd.max_drift, rd.drift_detected
    );
    Ok(Outcome::ok(status).with_problem(&full))
}

fn decompose(ctx: &Context, out: &mut RunDir) -> Result<Outcome> {
    let s = ctx.cfg.setup()?;
    let d = &ctx.cfg.decompose;
    let sampled = sample_model(&s.model, &s.grid)?;
    let u = match &d.field {
        Some(path) => read_field(path, &s.grid)?,
        None => {
            let p = Problem::certify(&s.model, &s.grid, &s.certify)?;
            let r = solve_ground_state(&p, &s.solver)?;
            write_solve(out, "", &r)?;
            r.final_point.u
        }
    };
    let dec = bump_decomposition(&u, &sampled, &d.options())?;
    out.write_json("decompose.json", &dec)?;
    for (k, b) in dec.bumps.iter().enumerate() {
        out.write(&format!("bump_{k:03}.bin"), &encode(&b.profile))?;
    }
    let total: f64 = dec.bumps.iter().map(|b| b.energy_per).sum();
    Ok(Outcome::ok(format!(
        "{} bumps, sum of J_per = {total:.10}, remainder {:.3e}",
        dec.ell, dec.remainder_norm
    )))
}

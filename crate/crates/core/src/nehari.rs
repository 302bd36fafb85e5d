//! Energy functional, its derivatives, and the Nehari manifold.
//!
//! ```text
//! J(u)     = ½‖u‖² − ∫F(x,u) + (1/q)∫Γ|u|^q,      ‖u‖² = ∫|∇u|² + V u²
//! J'(u)(v) = ⟨u,v⟩ − ∫f(x,u)v + ∫Γ|u|^{q−2}u v
//! ψ(t)     = J'(tu)(u)
//! N        = {u ≠ 0 : J'(u)(u) = 0}
//! ```
//!
//! Along every ray t ↦ tu the fiber map has a single positive critical point
//! t(u); the projection m̂(u) = t(u)·u lands on N.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::{apply_operator, inner_h1v, inner_l2, l2_norm, Field};
use crate::model::{abs_pow, SampledModel};

pub const NEHARI_TOL: f64 = 1e-10;
pub const NORM_FLOOR: f64 = 1e-6;
pub const LIN_TOL: f64 = 1e-10;

const BRACKET_START: f64 = 1.0 / (1u64 << 20) as f64;
const BRACKET_FLOOR: f64 = 1.0 / (1u64 << 60) as f64;
const BRACKET_CAP: f64 = (1u64 << 40) as f64;
const BISECTION_REL_WIDTH: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// ½‖u‖².
    pub quadratic: f64,
    /// ∫F(x,u).
    pub nonlinear_f: f64,
    /// (1/q)∫Γ|u|^q.
    pub gamma_term: f64,
    pub total: f64,
}

/// A point on the Nehari manifold together with its certificates.
#[derive(Debug, Clone)]
pub struct NehariPoint {
    pub u: Field,
    /// Scale applied to the input ray.
    pub t_applied: f64,
    pub energy: EnergyBreakdown,
    /// J'(u)(u).
    pub nehari_residual: f64,
    /// ‖u‖² in the H¹_V norm.
    pub norm_sq: f64,
    /// H¹_V norm of the Riesz gradient, i.e. the dual norm of J'(u).
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberScan {
    pub t_values: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub sign_changes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// ∫ h(K(x), Γ(x), u(x)) dx.
fn integrate_pointwise(m: &SampledModel, u: &Field, h: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let s: f64 = u
        .values()
        .iter()
        .zip(m.kcoef.values())
        .zip(m.gamma.values())
        .map(|((&uu, &k), &g)| h(k, g, uu))
        .sum();
    s * u.grid().cell_volume()
}

/// ∫Γ|u|^q.
fn gamma_moment(m: &SampledModel, u: &Field) -> f64 {
    if !m.nonlinearity().has_gamma() {
        return 0.0;
    }
    let q = m.q();
    integrate_pointwise(m, u, |_, g, uu| g * abs_pow(uu, q))
}

pub fn norm_sq(u: &Field, m: &SampledModel) -> Result<f64> {
    inner_h1v(u, u, &m.vtot)
}

pub fn energy(u: &Field, m: &SampledModel) -> Result<EnergyBreakdown> {
    u.same_grid(&m.vtot)?;
    u.check_finite()?;
    let nl = m.nonlinearity();
    let quadratic = 0.5 * norm_sq(u, m)?;
    let nonlinear_f = integrate_pointwise(m, u, |k, _, uu| nl.primitive(k, uu));
    let gamma_term = gamma_moment(m, u) / m.q();
    let total = quadratic - nonlinear_f + gamma_term;
    if !total.is_finite() {
        return Err(NlsError::NonFinite("energy"));
    }
    Ok(EnergyBreakdown {
        quadratic,
        nonlinear_f,
        gamma_term,
        total,
    })
}

/// f(x,u) − Γ|u|^{q−2}u.
pub fn nonlinear_rhs(u: &Field, m: &SampledModel) -> Result<Field> {
    u.same_grid(&m.kcoef)?;
    let nl = m.nonlinearity();
    let values = u
        .values()
        .iter()
        .zip(m.kcoef.values())
        .zip(m.gamma.values())
        .map(|((&uu, &k), &g)| nl.f(k, uu) - nl.gamma_term(g, uu))
        .collect();
    Field::new(u.grid(), values).map_err(|_| NlsError::NonFinite("nonlinearity"))
}

/// r = −Δu + Vu − f(x,u) + Γ|u|^{q−2}u, the L²-gradient of J.
pub fn pde_residual(u: &Field, m: &SampledModel) -> Result<Field> {
    u.check_finite()?;
    let lin = apply_operator(u, &m.vtot)?;
    let rhs = nonlinear_rhs(u, m)?;
    let r = lin.axpy(-1.0, &rhs)?;
    r.check_finite().map_err(|_| NlsError::NonFinite("pde residual"))?;
    Ok(r)
}

/// Solves (−Δ + V) x = b by conjugate gradients preconditioned with the
/// spectral inverse of −Δ + V̄.
pub fn solve_operator(b: &Field, m: &SampledModel, tol: f64) -> Result<(Field, LinearSolveStats)> {
    b.same_grid(&m.vtot)?;
    let grid = b.grid();
    let len = grid.len();
    let vbar = m.vtot.values().iter().sum::<f64>() / len as f64;
    if !(vbar > 0.0) {
        return Err(NlsError::HypothesisViolation(format!(
            "mean potential {vbar} is not positive; −Δ + V cannot be positive definite"
        )));
    }
    let k2 = grid.k_squared().to_vec();
    let precond = |r: &[f64]| grid.apply_multiplier(r, |i| 1.0 / (k2[i] + vbar));
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let apply = |x: &[f64]| {
        apply_operator(&Field::from_raw(grid, x.to_vec()), &m.vtot)
            .expect("same grid")
            .into_values()
    };

    let bn = dot(b.values(), b.values()).sqrt();
    if bn == 0.0 {
        return Ok((
            Field::zeros(grid),
            LinearSolveStats {
                iterations: 0,
                rel_residual: 0.0,
            },
        ));
    }
    let mut x = precond(b.values());
    let ax = apply(&x);
    let mut r: Vec<f64> = b.values().iter().zip(&ax).map(|(bi, a)| bi - a).collect();
    let mut rel = dot(&r, &r).sqrt() / bn;
    let max_iters = 10 * grid.n();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while rel > tol {
        if it >= max_iters {
            return Err(NlsError::NoConvergence {
                what: "preconditioned conjugate gradient",
                iterations: it,
                residual: rel,
            });
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(NlsError::HypothesisViolation(
                "operator −Δ + V is not positive definite".into(),
            ));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        it += 1;
        // periodically replace the recursive residual by the true one
        if it % 50 == 0 {
            let ax = apply(&x);
            r = b.values().iter().zip(&ax).map(|(bi, a)| bi - a).collect();
        }
        rel = dot(&r, &r).sqrt() / bn;
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok((
        Field::from_raw(grid, x),
        LinearSolveStats {
            iterations: it,
            rel_residual: rel,
        },
    ))
}

/// Riesz representative g of J'(u) in the H¹_V inner product:
/// (−Δ + V) g = pde_residual(u).
pub fn riesz_gradient(u: &Field, m: &SampledModel) -> Result<Field> {
    let r = pde_residual(u, m)?;
    Ok(solve_operator(&r, m, LIN_TOL)?.0)
}

/// Riesz gradient together with the L² residual it was computed from.
pub fn riesz_gradient_with_residual(u: &Field, m: &SampledModel) -> Result<(Field, Field)> {
    let r = pde_residual(u, m)?;
    let g = solve_operator(&r, m, LIN_TOL)?.0;
    Ok((g, r))
}

/// Scalars that make repeated ψ evaluations along one ray cheap.
struct Ray<'a> {
    u: &'a Field,
    m: &'a SampledModel,
    norm_sq: f64,
    gamma_moment: f64,
}

impl<'a> Ray<'a> {
    fn new(u: &'a Field, m: &'a SampledModel) -> Result<Self> {
        u.same_grid(&m.vtot)?;
        u.check_finite()?;
        if u.is_zero() {
            return Err(NlsError::ZeroField);
        }
        Ok(Ray {
            u,
            m,
            norm_sq: norm_sq(u, m)?,
            gamma_moment: gamma_moment(m, u),
        })
    }

    /// ψ(t) = t‖u‖² − ∫f(x,tu)u + t^{q−1}∫Γ|u|^q.
    fn psi(&self, t: f64) -> f64 {
        let nl = self.m.nonlinearity();
        let drive = integrate_pointwise(self.m, self.u, |k, _, uu| nl.f(k, t * uu) * uu);
        t * self.norm_sq - drive + t.powf(self.m.q() - 1.0) * self.gamma_moment
    }

    fn dpsi(&self, t: f64) -> f64 {
        let nl = self.m.nonlinearity();
        let drive = integrate_pointwise(self.m, self.u, |k, _, uu| nl.df(k, t * uu) * uu * uu);
        let q = self.m.q();
        self.norm_sq - drive + (q - 1.0) * t.powf(q - 2.0) * self.gamma_moment
    }

    /// J(tu).
    fn phi(&self, t: f64) -> f64 {
        let nl = self.m.nonlinearity();
        let q = self.m.q();
        let big_f = integrate_pointwise(self.m, self.u, |k, _, uu| nl.primitive(k, t * uu));
        0.5 * t * t * self.norm_sq - big_f + t.powf(q) / q * self.gamma_moment
    }

    /// The unique positive zero of ψ: geometric bracketing, bisection, and
    /// one Newton polish.
    fn root(&self) -> Result<f64> {
        let mut lo = BRACKET_START;
        while self.psi(lo) <= 0.0 {
            lo *= 0.5;
            if lo < BRACKET_FLOOR {
                return Err(NlsError::BracketFailure {
                    t_cap: lo,
                    psi_at_cap: self.psi(lo),
                });
            }
        }
        let mut hi = 1.0f64.max(lo * 2.0);
        let mut psi_hi = self.psi(hi);
        while psi_hi >= 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_CAP {
                return Err(NlsError::BracketFailure {
                    t_cap: BRACKET_CAP,
                    psi_at_cap: self.psi(BRACKET_CAP),
                });
            }
            psi_hi = self.psi(hi);
        }
        while hi - lo > BISECTION_REL_WIDTH * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.psi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let psi_t = self.psi(t);
        let d = self.dpsi(t);
        if d != 0.0 && d.is_finite() {
            let tn = t - psi_t / d;
            if tn >= lo && tn <= hi && self.psi(tn).abs() <= psi_t.abs() {
                return Ok(tn);
            }
        }
        Ok(t)
    }
}

/// ψ(t) = J'(tu)(u).
pub fn psi(t: f64, u: &Field, m: &SampledModel) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(NlsError::InvalidArgument(format!("fiber parameter must be positive, got {t}")));
    }
    Ok(Ray::new(u, m)?.psi(t))
}

/// The scale t(u) and the projected field t(u)·u, without certificates.
pub fn project_ray(u: &Field, m: &SampledModel) -> Result<(f64, Field)> {
    let ray = Ray::new(u, m)?;
    let t = ray.root()?;
    Ok((t, u.scaled(t)))
}

/// m̂(u) = t(u)·u with energy, Nehari residual and gradient norm.
pub fn project(u: &Field, m: &SampledModel) -> Result<NehariPoint> {
    let (t, w) = project_ray(u, m)?;
    certify(w, t, m)
}

/// Builds the certified [`NehariPoint`] for a field assumed to lie on N.
pub fn certify(w: Field, t_applied: f64, m: &SampledModel) -> Result<NehariPoint> {
    certify_with_gradient(w, t_applied, m).map(|(p, _)| p)
}

/// As [`certify`], also returning the Riesz gradient.
pub fn certify_with_gradient(w: Field, t_applied: f64, m: &SampledModel) -> Result<(NehariPoint, Field)> {
    let (g, r) = riesz_gradient_with_residual(&w, m)?;
    let energy = energy(&w, m)?;
    let norm_sq = 2.0 * energy.quadratic;
    let nehari_residual = inner_l2(&r, &w)?;
    let grad_norm = inner_l2(&g, &r)?.max(0.0).sqrt();
    if norm_sq.sqrt() < NORM_FLOOR {
        return Err(NlsError::InvalidField(format!(
            "Nehari point norm {:.3e} below floor {NORM_FLOOR:e}",
            norm_sq.sqrt()
        )));
    }
    if nehari_residual.abs() > NEHARI_TOL * norm_sq {
        return Err(NlsError::NoConvergence {
            what: "Nehari projection",
            iterations: 0,
            residual: nehari_residual / norm_sq,
        });
    }
    Ok((
        NehariPoint {
            u: w,
            t_applied,
            energy,
            nehari_residual,
            norm_sq,
            grad_norm,
        },
        g,
    ))
}

/// Samples ψ and J(t·u) on a logarithmic t-grid.
pub fn fiber_scan(u: &Field, m: &SampledModel, t_lo: f64, t_hi: f64, count: usize) -> Result<FiberScan> {
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) || count < 2 {
        return Err(NlsError::InvalidArgument(format!(
            "fiber scan needs 0 < t_lo < t_hi and at least two points (got [{t_lo}, {t_hi}], {count})"
        )));
    }
    let ray = Ray::new(u, m)?;
    let ratio = (t_hi / t_lo).ln();
    let t_values: Vec<f64> = (0..count)
        .map(|i| t_lo * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect();
    let psi_values: Vec<f64> = t_values.iter().map(|&t| ray.psi(t)).collect();
    let phi_values: Vec<f64> = t_values.iter().map(|&t| ray.phi(t)).collect();
    let signs: Vec<f64> = psi_values
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.signum())
        .collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    Ok(FiberScan {
        t_values,
        psi_values,
        phi_values,
        sign_changes,
    })
}

/// Outcome of the search for a sphere ‖u‖ = r on which J ≥ ¼‖u‖².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallSphere {
    pub r_small: f64,
    /// min over probes of J(u)/‖u‖² on the accepted sphere.
    pub min_ratio: f64,
    pub probes: usize,
}

impl SmallSphere {
    /// Lower bound ¼·r_small² for the energy on N.
    pub fn energy_floor(&self) -> f64 {
        0.25 * self.r_small * self.r_small
    }
}

/// Halves r from 1 until J(u) ≥ ¼‖u‖² holds on `probes` random fields with
/// ‖u‖ = r.
pub fn find_small_sphere<R: Rng>(m: &SampledModel, rng: &mut R, probes: usize) -> Result<SmallSphere> {
    let fields: Vec<Field> = (0..probes)
        .map(|_| Field::random_smooth(&m.grid, rng, 8))
        .collect();
    let norms = fields
        .iter()
        .map(|u| norm_sq(u, m).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let mut r = 1.0;
    for _ in 0..60 {
        let mut min_ratio = f64::INFINITY;
        for (u, &nu) in fields.iter().zip(&norms) {
            let v = u.scaled(r / nu);
            let j = energy(&v, m)?.total;
            min_ratio = min_ratio.min(j / (r * r));
        }
        if min_ratio >= 0.25 {
            return Ok(SmallSphere {
                r_small: r,
                min_ratio,
                probes,
            });
        }
        r *= 0.5;
    }
    Err(NlsError::HypothesisViolation(
        "no sphere with J ≥ ¼‖u‖² found down to r = 2^-60".into(),
    ))
}

/// ‖u‖_{L²}, re-exported here for reports.
pub fn mass(u: &Field) -> f64 {
    l2_norm(u)
}

/// ∫F(x,u) alone, used by diagnostics.
pub fn nonlinear_part(u: &Field, m: &SampledModel) -> f64 {
    let nl = m.nonlinearity();
    integrate_pointwise(m, u, |k, _, uu| nl.primitive(k, uu))
}

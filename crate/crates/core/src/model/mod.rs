//! Potentials, nonlinearities and their sampling onto a grid.
//!
//! The equation being solved is
//!
//! ```text
//! −Δu + (V_per + V_loc) u = f(x,u) − Γ(x)|u|^{q−2}u
//! ```
//!
//! with `V_per`, `Γ` and the coefficient `K` inside `f` all periodic with the
//! same lattice period, and `V_loc` vanishing towards the box boundary.

mod hypotheses;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::{Field, Grid};

pub use hypotheses::{
    adaptive_simpson, validate_hypotheses, CheckName, HypothesisCheck, HypothesisReport,
    ProbeConfig, Witness,
};

/// Default bound on |V_loc| over the boundary shell.
pub const LOC_DECAY_TOL: f64 = 1e-10;

/// A lattice-periodic coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeriodicProfile {
    Constant { value: f64 },
    /// `a + b·Σ_i cos(2π x_i / period)`.
    Cosine { a: f64, b: f64 },
    /// Samples over one period cell, `cells` per axis, row-major; evaluated by
    /// periodic (bi)linear interpolation.
    Table { cells: usize, values: Vec<f64> },
}

impl PeriodicProfile {
    pub fn constant(value: f64) -> Self {
        PeriodicProfile::Constant { value }
    }

    pub fn eval(&self, x: &[f64], period: f64) -> f64 {
        match self {
            PeriodicProfile::Constant { value } => *value,
            PeriodicProfile::Cosine { a, b } => {
                a + b * x.iter().map(|xi| (2.0 * PI * xi / period).cos()).sum::<f64>()
            }
            PeriodicProfile::Table { cells, values } => {
                let m = *cells;
                let locate = |xi: f64| {
                    let s = (xi / period).rem_euclid(1.0) * m as f64;
                    let i0 = (s.floor() as usize).min(m - 1);
                    (i0, (i0 + 1) % m, s - i0 as f64)
                };
                match x.len() {
                    1 => {
                        let (i0, i1, w) = locate(x[0]);
                        values[i0] * (1.0 - w) + values[i1] * w
                    }
                    _ => {
                        let (a0, a1, wa) = locate(x[0]);
                        let (b0, b1, wb) = locate(x[1]);
                        let v = |i: usize, j: usize| values[i * m + j];
                        (1.0 - wa) * ((1.0 - wb) * v(a0, b0) + wb * v(a0, b1))
                            + wa * ((1.0 - wb) * v(a1, b0) + wb * v(a1, b1))
                    }
                }
            }
        }
    }

    /// Checks finiteness and, when `dim` is known, the table size.
    fn validate(&self, dim: Option<usize>, what: &str) -> Result<()> {
        match self {
            PeriodicProfile::Constant { value } if !value.is_finite() => Err(
                NlsError::InvalidModel(format!("{what}: constant must be finite")),
            ),
            PeriodicProfile::Cosine { a, b } if !(a.is_finite() && b.is_finite()) => Err(
                NlsError::InvalidModel(format!("{what}: cosine parameters must be finite")),
            ),
            PeriodicProfile::Table { cells, values } => {
                let sizes_ok = match dim {
                    Some(d) => values.len() == cells.pow(d as u32),
                    None => values.len() == *cells || values.len() == cells * cells,
                };
                if *cells == 0 || !sizes_ok {
                    return Err(NlsError::InvalidModel(format!(
                        "{what}: table with {cells} cells per axis has {} values",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(NlsError::InvalidModel(format!(
                        "{what}: table has non-finite entries"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Lower bound over one cell, exact for constant and cosine profiles.
    pub fn infimum(&self, dim: usize) -> f64 {
        match self {
            PeriodicProfile::Constant { value } => *value,
            PeriodicProfile::Cosine { a, b } => a - b.abs() * dim as f64,
            PeriodicProfile::Table { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PeriodicProfile::Constant { value } => *value == 0.0,
            PeriodicProfile::Cosine { a, b } => *a == 0.0 && *b == 0.0,
            PeriodicProfile::Table { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            PeriodicProfile::Constant { .. } => true,
            PeriodicProfile::Cosine { b, .. } => *b == 0.0,
            PeriodicProfile::Table { values, .. } => values.iter().all(|&v| v == values[0]),
        }
    }
}

/// The localized part of the potential.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LocalizedPotential {
    #[default]
    Zero,
    /// `−depth·exp(−|x − center|²/width²)`; positive depth is attractive.
    Gaussian {
        depth: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// Full-grid samples, row-major.
    Table { values: Vec<f64> },
}

impl LocalizedPotential {
    pub fn is_zero(&self) -> bool {
        match self {
            LocalizedPotential::Zero => true,
            LocalizedPotential::Gaussian { depth, .. } => *depth == 0.0,
            LocalizedPotential::Table { values } => values.iter().all(|&v| v == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub period: f64,
    pub v_per: PeriodicProfile,
    #[serde(default)]
    pub v_loc: LocalizedPotential,
    #[serde(default = "default_loc_decay_tol")]
    pub loc_decay_tol: f64,
}

fn default_loc_decay_tol() -> f64 {
    LOC_DECAY_TOL
}

impl PotentialSpec {
    pub fn periodic(period: f64, v_per: PeriodicProfile) -> Self {
        PotentialSpec {
            period,
            v_per,
            v_loc: LocalizedPotential::Zero,
            loc_decay_tol: LOC_DECAY_TOL,
        }
    }

    pub fn with_loc(mut self, v_loc: LocalizedPotential) -> Self {
        self.v_loc = v_loc;
        self
    }
}

/// A user-supplied nonlinearity. `f` and its u-primitive `primitive` receive
/// the periodic coefficient value K(x) and u; x-dependence enters only via K.
pub trait ScalarNonlinearity: Send + Sync {
    fn f(&self, k: f64, u: f64) -> f64;
    fn primitive(&self, k: f64, u: f64) -> f64;
    fn name(&self) -> &str {
        "custom"
    }
}

/// A closure pair implementing [`ScalarNonlinearity`].
pub struct FnNonlinearity<F, P> {
    pub name: String,
    pub f: F,
    pub primitive: P,
}

impl<F, P> ScalarNonlinearity for FnNonlinearity<F, P>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
    P: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn f(&self, k: f64, u: f64) -> f64 {
        (self.f)(k, u)
    }
    fn primitive(&self, k: f64, u: f64) -> f64 {
        (self.primitive)(k, u)
    }
    fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Clone)]
pub enum NonlinearityKind {
    /// f = K|u|^{p−2}u with Γ ≡ 0.
    Power,
    /// f = K|u|^{p−2}u competing with −Γ|u|^{q−2}u.
    DualPower,
    Custom(Arc<dyn ScalarNonlinearity>),
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::Power => write!(f, "Power"),
            NonlinearityKind::DualPower => write!(f, "DualPower"),
            NonlinearityKind::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub p: f64,
    pub q: f64,
    pub k: PeriodicProfile,
    pub gamma_profile: PeriodicProfile,
    pub gamma_amplitude: f64,
}

/// |u|^e, with integer exponents taken through `powi`.
#[inline]
pub(crate) fn abs_pow(u: f64, e: f64) -> f64 {
    let a = u.abs();
    if e == e.trunc() && e.abs() < 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

impl NonlinearitySpec {
    /// Kerr-type `K|u|^{p−2}u`; `q` is the comparison exponent of the theory.
    pub fn power(p: f64, q: f64, k: PeriodicProfile) -> Result<Self> {
        let s = NonlinearitySpec {
            kind: NonlinearityKind::Power,
            p,
            q,
            k,
            gamma_profile: PeriodicProfile::constant(1.0),
            gamma_amplitude: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn dual_power(
        p: f64,
        q: f64,
        k: PeriodicProfile,
        gamma_profile: PeriodicProfile,
        gamma_amplitude: f64,
    ) -> Result<Self> {
        let s = NonlinearitySpec {
            kind: NonlinearityKind::DualPower,
            p,
            q,
            k,
            gamma_profile,
            gamma_amplitude,
        };
        s.validate()?;
        Ok(s)
    }

    /// Custom `(f, F)` pair. Consistency of F with f is verified by adaptive
    /// quadrature at u ∈ {±0.5, ±1, ±3} for a few coefficient values.
    pub fn custom(
        nl: Arc<dyn ScalarNonlinearity>,
        p: f64,
        q: f64,
        k: PeriodicProfile,
        gamma_profile: PeriodicProfile,
        gamma_amplitude: f64,
    ) -> Result<Self> {
        let s = NonlinearitySpec {
            kind: NonlinearityKind::Custom(nl.clone()),
            p,
            q,
            k,
            gamma_profile,
            gamma_amplitude,
        };
        s.validate()?;
        let ks = [s.k.infimum(1), s.k.eval(&[0.0], 1.0)];
        for &kv in &ks {
            let at_zero = nl.primitive(kv, 0.0);
            if at_zero.abs() > 1e-12 {
                return Err(NlsError::InvalidModel(format!(
                    "custom nonlinearity: F(x,0) = {at_zero:e}, expected 0"
                )));
            }
            for &u in &[-3.0, -1.0, -0.5, 0.5, 1.0, 3.0] {
                let quad = adaptive_simpson(&|s| nl.f(kv, s), 0.0, u, 1e-12);
                let prim = nl.primitive(kv, u);
                if (quad - prim).abs() > 1e-8 {
                    return Err(NlsError::InvalidModel(format!(
                        "custom nonlinearity: F({u}) = {prim} but ∫f = {quad}"
                    )));
                }
            }
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.p, self.q);
        if !(p.is_finite() && q.is_finite()) {
            return Err(NlsError::InvalidModel("p and q must be finite".into()));
        }
        if q < 2.0 {
            return Err(NlsError::InvalidModel(format!("q >= 2 violated: q = {q}")));
        }
        if !(q < p) {
            return Err(NlsError::InvalidModel(format!(
                "q < p violated: q = {q}, p = {p}"
            )));
        }
        self.k.validate(None, "K")?;
        self.gamma_profile.validate(None, "Γ")?;
        if !self.gamma_amplitude.is_finite() {
            return Err(NlsError::InvalidModel("gamma_amplitude must be finite".into()));
        }
        if q == 2.0 && self.has_gamma() {
            return Err(NlsError::InvalidModel(
                "q = 2 requires Γ ≡ 0 (a linear Γ term belongs in the potential V)".into(),
            ));
        }
        if matches!(self.kind, NonlinearityKind::Power) && self.gamma_amplitude != 0.0 {
            return Err(NlsError::InvalidModel(
                "power nonlinearity carries no Γ term; use dual_power".into(),
            ));
        }
        if !matches!(self.kind, NonlinearityKind::Custom(_)) && self.k.infimum(2) <= 0.0 {
            return Err(NlsError::InvalidModel("inf K > 0 violated".into()));
        }
        Ok(())
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma_amplitude != 0.0 && !self.gamma_profile.is_zero()
    }

    pub fn kind_name(&self) -> String {
        match &self.kind {
            NonlinearityKind::Power => "power".into(),
            NonlinearityKind::DualPower => "dual_power".into(),
            NonlinearityKind::Custom(c) => c.name().to_string(),
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::Custom(_))
    }

    pub fn k_at(&self, x: &[f64], period: f64) -> f64 {
        self.k.eval(x, period)
    }

    pub fn gamma_at(&self, x: &[f64], period: f64) -> f64 {
        self.gamma_amplitude * self.gamma_profile.eval(x, period)
    }

    /// f(x,u) given K(x).
    #[inline]
    pub fn f(&self, k: f64, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power | NonlinearityKind::DualPower => {
                k * abs_pow(u, self.p - 2.0) * u
            }
            NonlinearityKind::Custom(c) => c.f(k, u),
        }
    }

    /// F(x,u) given K(x).
    #[inline]
    pub fn primitive(&self, k: f64, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power | NonlinearityKind::DualPower => {
                k * abs_pow(u, self.p) / self.p
            }
            NonlinearityKind::Custom(c) => c.primitive(k, u),
        }
    }

    /// ∂f/∂u; central differences for custom kinds.
    #[inline]
    pub fn df(&self, k: f64, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power | NonlinearityKind::DualPower => {
                k * (self.p - 1.0) * abs_pow(u, self.p - 2.0)
            }
            NonlinearityKind::Custom(c) => {
                let h = 1e-6 * (1.0 + u.abs());
                (c.f(k, u + h) - c.f(k, u - h)) / (2.0 * h)
            }
        }
    }

    /// Γ|u|^{q−2}u given Γ(x).
    #[inline]
    pub fn gamma_term(&self, gamma: f64, u: f64) -> f64 {
        if gamma == 0.0 {
            0.0
        } else {
            gamma * abs_pow(u, self.q - 2.0) * u
        }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub potential: PotentialSpec,
    pub nonlinearity: NonlinearitySpec,
}

impl Model {
    pub fn new(potential: PotentialSpec, nonlinearity: NonlinearitySpec) -> Result<Self> {
        nonlinearity.validate()?;
        if !(potential.period.is_finite() && potential.period > 0.0) {
            return Err(NlsError::InvalidModel("period must be positive".into()));
        }
        Ok(Model {
            potential,
            nonlinearity,
        })
    }

    /// Same model with the localized potential removed.
    pub fn periodic_part(&self) -> Model {
        let mut m = self.clone();
        m.potential.v_loc = LocalizedPotential::Zero;
        m
    }

    pub fn with_gamma_amplitude(&self, amplitude: f64) -> Result<Model> {
        let mut m = self.clone();
        m.nonlinearity.gamma_amplitude = amplitude;
        m.nonlinearity.validate()?;
        Ok(m)
    }

    /// Replaces the depth of a gaussian defect (or installs one of width 2 at
    /// the center of the central period cell when the model had none).
    pub fn with_loc_depth(&self, depth: f64, grid: &Grid) -> Model {
        let mut m = self.clone();
        m.potential.v_loc = match &self.potential.v_loc {
            LocalizedPotential::Gaussian { width, center, .. } => LocalizedPotential::Gaussian {
                depth,
                width: *width,
                center: center.clone(),
            },
            _ => LocalizedPotential::Gaussian {
                depth,
                width: 2.0,
                center: (0..grid.dim())
                    .map(|a| 0.5 * grid.box_length(a) + 0.5 * grid.period())
                    .collect(),
            },
        };
        m
    }

    /// True when the problem is invariant under every grid shift, not only
    /// lattice ones.
    pub fn fully_translation_invariant(&self) -> bool {
        self.potential.v_loc.is_zero()
            && self.potential.v_per.is_constant()
            && self.nonlinearity.k.is_constant()
            && (self.nonlinearity.gamma_profile.is_constant() || !self.nonlinearity.has_gamma())
    }
}

/// A model sampled on a grid: the four coefficient fields plus V = V_per + V_loc.
#[derive(Debug, Clone)]
pub struct SampledModel {
    pub model: Model,
    pub grid: Grid,
    pub vper: Field,
    pub vloc: Field,
    pub gamma: Field,
    pub kcoef: Field,
    pub vtot: Field,
}

fn boundary_shell(grid: &Grid, idx: usize) -> bool {
    let ix = grid.unravel(idx);
    let width = grid.cells_per_period().max(1);
    let n = grid.n();
    (0..grid.dim()).any(|a| ix[a] < width || ix[a] >= n - width)
}

/// Samples V_per, V_loc, Γ and K on the grid and re-checks their invariants.
pub fn sample_model(model: &Model, grid: &Grid) -> Result<SampledModel> {
    let period = model.potential.period;
    if (grid.period() - period).abs() > 1e-12 * period {
        return Err(NlsError::InvalidModel(format!(
            "grid period {} does not match potential period {period}",
            grid.period()
        )));
    }
    let dim = grid.dim();
    model.potential.v_per.validate(Some(dim), "V_per")?;
    model.nonlinearity.k.validate(Some(dim), "K")?;
    model.nonlinearity.gamma_profile.validate(Some(dim), "Γ")?;

    let vper = Field::from_fn(grid, |x| model.potential.v_per.eval(x, period))?;
    let vloc = match &model.potential.v_loc {
        LocalizedPotential::Zero => Field::zeros(grid),
        LocalizedPotential::Gaussian {
            depth,
            width,
            center,
        } => {
            if center.len() != dim || !(*width > 0.0) {
                return Err(NlsError::InvalidModel(
                    "gaussian defect needs a positive width and a center per axis".into(),
                ));
            }
            Field::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                -depth * (-r2 / (width * width)).exp()
            })?
        }
        LocalizedPotential::Table { values } => Field::new(grid, values.clone())?,
    };
    let gamma = Field::from_fn(grid, |x| model.nonlinearity.gamma_at(x, period))?;
    let kcoef = Field::from_fn(grid, |x| model.nonlinearity.k_at(x, period))?;

    // periodicity of V_per, evaluated in closed form at x and x + period·e_i
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let x = grid.point(idx);
        let base = model.potential.v_per.eval(&x[..dim], period);
        for axis in 0..dim {
            let mut y = x;
            y[axis] += period;
            worst = worst.max((model.potential.v_per.eval(&y[..dim], period) - base).abs());
        }
    }
    if worst > 1e-12 {
        return Err(NlsError::InvalidModel(format!(
            "V_per is not periodic: shift discrepancy {worst:e}"
        )));
    }
    let shell_max = vloc
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| boundary_shell(grid, *i))
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if shell_max > model.potential.loc_decay_tol {
        return Err(NlsError::InvalidModel(format!(
            "V_loc does not vanish at the box edge: {shell_max:e} > {:e}",
            model.potential.loc_decay_tol
        )));
    }
    if let Some(v) = gamma.values().iter().find(|&&v| v < 0.0) {
        return Err(NlsError::InvalidModel(format!("Γ ≥ 0 violated: sample {v}")));
    }
    let vtot = vper.axpy(1.0, &vloc)?;
    Ok(SampledModel {
        model: model.clone(),
        grid: grid.clone(),
        vper,
        vloc,
        gamma,
        kcoef,
        vtot,
    })
}

/// Largest |V_loc| on the boundary shell (grid points within one period of the edge).
pub fn boundary_shell_max(vloc: &Field) -> f64 {
    let g = vloc.grid();
    vloc.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| boundary_shell(g, *i))
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
}

impl SampledModel {
    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.model.nonlinearity
    }

    pub fn periodic_part(&self) -> Result<SampledModel> {
        sample_model(&self.model.periodic_part(), &self.grid)
    }

    pub fn q(&self) -> f64 {
        self.model.nonlinearity.q
    }

    pub fn p(&self) -> f64 {
        self.model.nonlinearity.p
    }
}

/// Pointwise f(x, u(x)).
pub fn apply_f(nspec: &NonlinearitySpec, kcoef: &Field, u: &Field) -> Result<Field> {
    u.same_grid(kcoef)?;
    let out = u.zip_map(kcoef, |uu, k| nspec.f(k, uu))?;
    out.check_finite().map_err(|_| NlsError::NonFinite("f(x,u)"))?;
    Ok(out)
}

/// Pointwise F(x, u(x)).
#[allow(non_snake_case)]
pub fn apply_F(nspec: &NonlinearitySpec, kcoef: &Field, u: &Field) -> Result<Field> {
    u.same_grid(kcoef)?;
    let out = u.zip_map(kcoef, |uu, k| nspec.primitive(k, uu))?;
    out.check_finite().map_err(|_| NlsError::NonFinite("F(x,u)"))?;
    Ok(out)
}

//! Finite-probe checks of the structural hypotheses on V, Γ and f.
//!
//! Asymptotic statements ("o(|u|)", "→ ∞ uniformly") can only be sampled, so
//! each check uses a declared threshold on a declared probe set.

use serde::{Deserialize, Serialize};

use super::{boundary_shell_max, sample_model, Model, NonlinearitySpec};
use crate::grid::Grid;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeConfig {
    pub u_min: f64,
    pub u_max: f64,
    /// Logarithmic u-probes per decade.
    pub per_decade: usize,
    /// x-samples per period cell and axis.
    pub x_per_cell: usize,
    pub f2_tol: f64,
    pub f3_floor: f64,
    pub growth_eps: Vec<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            u_min: 1e-6,
            u_max: 1e3,
            per_decade: 40,
            x_per_cell: 64,
            f2_tol: 1e-3,
            f3_floor: 1e3,
            growth_eps: vec![0.1, 0.01],
        }
    }
}

impl ProbeConfig {
    /// Positive u-probes, increasing.
    pub fn u_probes(&self) -> Vec<f64> {
        let decades = (self.u_max / self.u_min).log10();
        let count = (decades * self.per_decade as f64).round() as usize;
        (0..=count)
            .map(|i| self.u_min * 10f64.powf(decades * i as f64 / count as f64))
            .collect()
    }

    fn x_probes(&self, dim: usize, period: f64) -> Vec<Vec<f64>> {
        let m = self.x_per_cell.max(1);
        let axis: Vec<f64> = (0..m).map(|i| period * i as f64 / m as f64).collect();
        match dim {
            1 => axis.iter().map(|&x| vec![x]).collect(),
            _ => {
                let mut out = Vec::with_capacity(m * m);
                for &a in &axis {
                    for &b in &axis {
                        out.push(vec![a, b]);
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckName {
    V,
    Gamma,
    F1,
    F2,
    F3,
    F4,
    #[serde(rename = "growth_bound")]
    GrowthBound,
}

/// A concrete point where a check failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: CheckName,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub spectral_floor: Option<f64>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: CheckName) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn pass(name: CheckName, detail: String) -> HypothesisCheck {
    HypothesisCheck {
        name,
        passed: true,
        detail,
        witness: None,
    }
}

fn fail(name: CheckName, detail: String, witness: Option<Witness>) -> HypothesisCheck {
    HypothesisCheck {
        name,
        passed: false,
        detail,
        witness,
    }
}

/// Adaptive Simpson quadrature of `f` over [a, b] (b < a allowed).
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Evaluates every hypothesis on the probe sets. Failures become report
/// entries carrying a witness; nothing here returns an error.
pub fn validate_hypotheses(model: &Model, grid: &Grid, probes: &ProbeConfig) -> HypothesisReport {
    let nl = &model.nonlinearity;
    let period = model.potential.period;
    let dim = grid.dim();
    let xs = probes.x_probes(dim, period);
    let us = probes.u_probes();
    let coeffs: Vec<(f64, f64)> = xs
        .iter()
        .map(|x| (nl.k_at(x, period), nl.gamma_at(x, period)))
        .collect();

    let checks = vec![
        check_v(model, grid),
        check_gamma(nl, &xs, &coeffs),
        check_f1(nl, dim, &xs, &coeffs, &us),
        check_f2(nl, probes, &xs, &coeffs),
        check_f3(nl, probes, &xs, &coeffs, &us),
        check_f4(nl, &xs, &coeffs, &us),
        check_growth(nl, probes, &xs, &coeffs, &us),
    ];
    HypothesisReport {
        checks,
        spectral_floor: None,
    }
}

fn check_v(model: &Model, grid: &Grid) -> HypothesisCheck {
    // isolate the potential from the nonlinear coefficients
    let mut only_v = model.clone();
    only_v.nonlinearity.gamma_amplitude = 0.0;
    only_v.nonlinearity.k = super::PeriodicProfile::constant(1.0);
    match sample_model(&only_v, grid) {
        Ok(s) => {
            let sup_per = s.vper.max_abs();
            let sup_loc = s.vloc.max_abs();
            pass(
                CheckName::V,
                format!(
                    "V_per periodic and bounded (sup {sup_per:.4}), V_loc bounded (sup {sup_loc:.4}) \
                     with boundary-shell max {:.2e}",
                    boundary_shell_max(&s.vloc)
                ),
            )
        }
        Err(e) => fail(CheckName::V, e.to_string(), None),
    }
}

fn check_gamma(nl: &NonlinearitySpec, xs: &[Vec<f64>], coeffs: &[(f64, f64)]) -> HypothesisCheck {
    if nl.q == 2.0 && nl.has_gamma() {
        return fail(
            CheckName::Gamma,
            "q = 2 requires Γ ≡ 0".into(),
            Some(Witness {
                x: xs[0].clone(),
                u: 0.0,
                t: None,
            }),
        );
    }
    for (x, &(_, g)) in xs.iter().zip(coeffs) {
        if !(g >= 0.0) || !g.is_finite() {
            return fail(
                CheckName::Gamma,
                format!("Γ(x) = {g} is not a finite nonnegative value"),
                Some(Witness {
                    x: x.clone(),
                    u: 0.0,
                    t: None,
                }),
            );
        }
    }
    let sup = coeffs.iter().fold(0.0f64, |m, c| m.max(c.1));
    pass(CheckName::Gamma, format!("Γ ≥ 0 on all x-probes, sup Γ = {sup:.4}"))
}

fn check_f1(
    nl: &NonlinearitySpec,
    dim: usize,
    xs: &[Vec<f64>],
    coeffs: &[(f64, f64)],
    us: &[f64],
) -> HypothesisCheck {
    let (p, q) = (nl.p, nl.q);
    if !(2.0 <= q && q < p) {
        return fail(CheckName::F1, format!("2 ≤ q < p violated (q = {q}, p = {p})"), None);
    }
    let note = if dim >= 3 {
        let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
        if p >= crit {
            return fail(CheckName::F1, format!("p = {p} is not below 2* = {crit}"), None);
        }
        format!("p < 2* = {crit}")
    } else {
        format!("2* = ∞ for N = {dim}, subcriticality check skipped")
    };
    let mut c: f64 = 0.0;
    for (x, &(k, _)) in xs.iter().zip(coeffs) {
        for &a in us {
            for u in [a, -a] {
                let v = nl.f(k, u);
                if !v.is_finite() {
                    return fail(
                        CheckName::F1,
                        format!("f(x,{u}) is not finite"),
                        Some(Witness {
                            x: x.clone(),
                            u,
                            t: None,
                        }),
                    );
                }
                c = c.max(v.abs() / (1.0 + u.abs().powf(p - 1.0)));
            }
        }
    }
    pass(
        CheckName::F1,
        format!("|f| ≤ c(1 + |u|^(p−1)) with fitted c = {c:.4e}; {note}"),
    )
}

fn check_f2(
    nl: &NonlinearitySpec,
    probes: &ProbeConfig,
    xs: &[Vec<f64>],
    coeffs: &[(f64, f64)],
) -> HypothesisCheck {
    let mut worst = (0.0f64, 0usize, 0.0);
    for (i, &(k, _)) in coeffs.iter().enumerate() {
        for u in [probes.u_min, -probes.u_min] {
            let r = nl.f(k, u).abs() / u.abs();
            if !(r <= worst.0) {
                worst = (r, i, u);
            }
        }
    }
    let detail = format!(
        "max |f(x,u)|/|u| at |u| = {:e} is {:.3e} (tolerance {:e})",
        probes.u_min, worst.0, probes.f2_tol
    );
    if worst.0 < probes.f2_tol {
        pass(CheckName::F2, detail)
    } else {
        fail(
            CheckName::F2,
            detail,
            Some(Witness {
                x: xs[worst.1].clone(),
                u: worst.2,
                t: None,
            }),
        )
    }
}

fn check_f3(
    nl: &NonlinearitySpec,
    probes: &ProbeConfig,
    xs: &[Vec<f64>],
    coeffs: &[(f64, f64)],
    us: &[f64],
) -> HypothesisCheck {
    let q = nl.q;
    let top: Vec<f64> = us
        .iter()
        .copied()
        .filter(|&u| u >= probes.u_max / 10.0 * (1.0 - 1e-12))
        .collect();
    let mut min_ratio = f64::INFINITY;
    for (x, &(k, _)) in xs.iter().zip(coeffs) {
        for sign in [1.0, -1.0] {
            let mut prev = f64::NEG_INFINITY;
            for &a in &top {
                let u = sign * a;
                let r = nl.primitive(k, u) / a.powf(q);
                if !(r > prev) {
                    return fail(
                        CheckName::F3,
                        format!("F(x,u)/|u|^q not increasing across the top decade at u = {u:e}"),
                        Some(Witness {
                            x: x.clone(),
                            u,
                            t: None,
                        }),
                    );
                }
                prev = r;
            }
            let u = sign * probes.u_max;
            let r = nl.primitive(k, u) / probes.u_max.powf(q);
            if !(r > probes.f3_floor) {
                return fail(
                    CheckName::F3,
                    format!(
                        "F(x,u)/|u|^q = {r:.3e} at u = {u:e} does not exceed {:e}",
                        probes.f3_floor
                    ),
                    Some(Witness {
                        x: x.clone(),
                        u,
                        t: None,
                    }),
                );
            }
            min_ratio = min_ratio.min(r);
        }
    }
    pass(
        CheckName::F3,
        format!(
            "F(x,u)/|u|^q ≥ {min_ratio:.3e} at |u| = {:e} and increasing over the top decade",
            probes.u_max
        ),
    )
}

fn check_f4(
    nl: &NonlinearitySpec,
    xs: &[Vec<f64>],
    coeffs: &[(f64, f64)],
    us: &[f64],
) -> HypothesisCheck {
    let q = nl.q;
    let ratio = |k: f64, u: f64| nl.f(k, u) / u.abs().powf(q - 1.0);
    // each branch is walked outward from the origin so the first failure is
    // the turning point nearest to u = 0
    let neg: Vec<f64> = us.iter().map(|&u| -u).collect();
    for (x, &(k, _)) in xs.iter().zip(coeffs) {
        for (branch, outward_sign) in [(us, 1.0), (&neg[..], -1.0)] {
            for w in branch.windows(2) {
                let (inner, outer) = (ratio(k, w[0]), ratio(k, w[1]));
                let increasing = if outward_sign > 0.0 {
                    outer > inner
                } else {
                    inner > outer
                };
                if !increasing {
                    return fail(
                        CheckName::F4,
                        format!(
                            "f(x,u)/|u|^(q−1) not strictly increasing between u = {:.6} and u = {:.6}",
                            w[0], w[1]
                        ),
                        Some(Witness {
                            x: x.clone(),
                            u: w[0],
                            t: None,
                        }),
                    );
                }
            }
        }
    }
    pass(
        CheckName::F4,
        format!(
            "f(x,u)/|u|^(q−1) strictly increasing across {} probe pairs per branch",
            us.len() - 1
        ),
    )
}

fn check_growth(
    nl: &NonlinearitySpec,
    probes: &ProbeConfig,
    xs: &[Vec<f64>],
    coeffs: &[(f64, f64)],
    us: &[f64],
) -> HypothesisCheck {
    let r_growth = nl.p;
    if !(r_growth > 2.0) {
        return fail(
            CheckName::GrowthBound,
            format!("growth exponent r = {r_growth} must exceed 2"),
            None,
        );
    }
    let mut parts = Vec::new();
    for &eps in &probes.growth_eps {
        let mut c_eps: f64 = 0.0;
        for (x, &(k, gamma)) in xs.iter().zip(coeffs) {
            for &a in us {
                for u in [a, -a] {
                    let g = nl.f(k, u) - nl.gamma_term(gamma, u);
                    if !g.is_finite() {
                        return fail(
                            CheckName::GrowthBound,
                            "g(x,u) is not finite".into(),
                            Some(Witness {
                                x: x.clone(),
                                u,
                                t: None,
                            }),
                        );
                    }
                    let excess = g.abs() - eps * a;
                    if excess > 0.0 {
                        c_eps = c_eps.max(excess / a.powf(r_growth - 1.0));
                    }
                }
            }
        }
        parts.push(format!("ε = {eps}: C_ε = {c_eps:.4e}"));
    }
    pass(
        CheckName::GrowthBound,
        format!(
            "|g(x,u)| ≤ ε|u| + C_ε|u|^(r−1) with r_growth = {r_growth} on probes; {}",
            parts.join(", ")
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::{FnNonlinearity, PeriodicProfile, PotentialSpec};
    use std::sync::Arc;

    fn grid() -> Grid {
        Grid::new(GridSpec::new(1, 16.0, 256, 1.0)).unwrap()
    }

    fn probes() -> ProbeConfig {
        ProbeConfig {
            x_per_cell: 8,
            ..ProbeConfig::default()
        }
    }

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|s| s.powi(5), 0.0, 2.0, 1e-12);
        assert!((v - 64.0 / 6.0).abs() < 1e-10);
        let v = adaptive_simpson(&|s| s.powi(3), 0.0, -1.0, 1e-12);
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn kerr_passes_everything() {
        let m = Model::new(
            PotentialSpec::periodic(1.0, PeriodicProfile::constant(1.0)),
            NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::constant(1.0)).unwrap(),
        )
        .unwrap();
        let r = validate_hypotheses(&m, &grid(), &probes());
        assert!(r.all_passed(), "{:#?}", r.failures());
        assert_eq!(r.checks.len(), 7);
    }

    #[test]
    fn f4_violator_witness_sits_at_the_turning_point() {
        // f/u = u² − 2u⁴ peaks where 2u − 8u³ = 0, i.e. u = 1/2
        let nl = Arc::new(FnNonlinearity {
            name: "violator".into(),
            f: |_k: f64, u: f64| u.powi(3) - 2.0 * u.powi(5),
            primitive: |_k: f64, u: f64| u.powi(4) / 4.0 - u.powi(6) / 3.0,
        });
        let spec = NonlinearitySpec::custom(
            nl,
            6.0,
            2.0,
            PeriodicProfile::constant(1.0),
            PeriodicProfile::constant(0.0),
            0.0,
        )
        .unwrap();
        let m = Model::new(
            PotentialSpec::periodic(1.0, PeriodicProfile::constant(1.0)),
            spec,
        )
        .unwrap();
        let pr = probes();
        let r = validate_hypotheses(&m, &grid(), &pr);
        let f4 = r.check(CheckName::F4).unwrap();
        assert!(!f4.passed);
        let w = f4.witness.as_ref().unwrap();
        let step = 10f64.powf(1.0 / pr.per_decade as f64);
        assert!(w.u <= 0.5 * step && w.u >= 0.5 / step, "{}", w.u);
    }

    #[test]
    fn negative_gamma_fails() {
        let nl = NonlinearitySpec {
            kind: crate::model::NonlinearityKind::DualPower,
            p: 8.0,
            q: 4.0,
            k: PeriodicProfile::constant(1.0),
            gamma_profile: PeriodicProfile::Cosine { a: 0.0, b: 1.0 },
            gamma_amplitude: 1.0,
        };
        let m = Model {
            potential: PotentialSpec::periodic(1.0, PeriodicProfile::constant(1.0)),
            nonlinearity: nl,
        };
        let r = validate_hypotheses(&m, &grid(), &probes());
        let g = r.check(CheckName::Gamma).unwrap();
        assert!(!g.passed);
        assert!(g.witness.is_some());
    }

    #[test]
    fn validation_is_deterministic() {
        let m = Model::new(
            PotentialSpec::periodic(1.0, PeriodicProfile::Cosine { a: 1.0, b: 0.5 }),
            NonlinearitySpec::power(4.0, 2.0, PeriodicProfile::Cosine { a: 1.0, b: 0.3 })
                .unwrap(),
        )
        .unwrap();
        let a = validate_hypotheses(&m, &grid(), &probes());
        let b = validate_hypotheses(&m, &grid(), &probes());
        assert_eq!(a, b);
        assert!(a.all_passed());
    }
}

//! Sectioned TOML run configuration.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/kerr"
//!
//! [grid]
//! dim = 1
//! box_length = 40.0
//! n = 1024
//!
//! [potential]
//! period = 1.25
//! v_per = { kind = "constant", value = 1.0 }
//!
//! [nonlinearity]
//! kind = "power"
//! p = 4.0
//! q = 2.0
//! ```
//!
//! Every other section is optional and falls back to defaults. Unknown keys
//! are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DecomposeOptions;
use crate::error::{NlsError, Result};
use crate::grid::{Grid, GridSpec};
use crate::minimizer::{SolverOptions, SweepParameter};
use crate::model::{Model, NonlinearitySpec, PeriodicProfile, PotentialSpec, ProbeConfig};
use crate::problem::CertifyOptions;
use crate::spectrum::{DEFAULT_EIG_TOL, DEFAULT_MARGIN};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub box_length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityChoice {
    Power,
    DualPower,
}

fn unit_profile() -> PeriodicProfile {
    PeriodicProfile::constant(1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub kind: NonlinearityChoice,
    pub p: f64,
    pub q: f64,
    #[serde(default = "unit_profile")]
    pub k: PeriodicProfile,
    #[serde(default = "unit_profile")]
    pub gamma: PeriodicProfile,
    #[serde(default)]
    pub gamma_amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub tol: f64,
    pub margin: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            tol: DEFAULT_EIG_TOL,
            margin: DEFAULT_MARGIN,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    /// Number of random fields to scan.
    pub fields: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Scan points per field, log-spaced.
    pub points: usize,
    /// Highest Fourier mode of the random fields.
    pub max_mode: usize,
}

impl Default for FiberSection {
    fn default() -> Self {
        FiberSection {
            fields: 100,
            t_lo: 2f64.powi(-20),
            t_hi: 2f64.powi(20),
            points: 401,
            max_mode: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonexistSection {
    /// Translation offsets, in period cells per axis.
    pub offsets: Vec<Vec<i64>>,
    /// Iteration budget of the unrecentered drift run.
    pub drift_iters: usize,
    /// Initial displacement of the drift-run bump from the defect, in periods.
    pub init_offset: f64,
}

impl Default for NonexistSection {
    fn default() -> Self {
        NonexistSection {
            offsets: Vec::new(),
            drift_iters: 20000,
            init_offset: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    pub threshold_frac: f64,
    pub sep_min: f64,
    pub taper: f64,
    pub amplitude_floor: f64,
    /// Field to decompose; when absent the ground state is computed first.
    pub field: Option<PathBuf>,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        let d = DecomposeOptions::default();
        DecomposeSection {
            threshold_frac: d.threshold_frac,
            sep_min: d.sep_min,
            taper: d.taper,
            amplitude_floor: d.amplitude_floor,
            field: None,
        }
    }
}

impl DecomposeSection {
    pub fn options(&self) -> DecomposeOptions {
        DecomposeOptions {
            threshold_frac: self.threshold_frac,
            sep_min: self.sep_min,
            taper: self.taper,
            amplitude_floor: self.amplitude_floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    /// Also solve on the 2n grid and report the relative change of alpha.
    pub refine: bool,
}

impl Default for DecaySection {
    fn default() -> Self {
        DecaySection { refine: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds the solver initializer and every random probe; overrides
    /// `solver.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub grid: GridSection,
    pub potential: PotentialSpec,
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub probes: Option<ProbeConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fiber: FiberSection,
    #[serde(default)]
    pub nonexist: NonexistSection,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub decay: DecaySection,
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub model: Model,
    pub grid: Grid,
    pub solver: SolverOptions,
    pub certify: CertifyOptions,
}

fn config_err(key: &str, e: impl std::fmt::Display) -> NlsError {
    NlsError::Config {
        key: key.to_string(),
        message: e.to_string(),
    }
}

/// Dotted key (`section.key`) of the line holding byte `pos`.
fn key_at(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
        if offset > pos {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, col)
}

/// Parses and validates a configuration. Syntax errors carry the offending
/// key and line; semantic errors name the violated rule.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (key, loc) = match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                (key_at(text, span.start), format!("line {l}, column {c}: "))
            }
            None => (String::new(), String::new()),
        };
        config_err(&key, format!("{loc}{}", e.message().trim()))
    })?;
    cfg.setup()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NlsError::Io(format!("{}: {e}", path.display())))?;
    Ok((parse_config(&text)?, text))
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(
            self.grid.dim,
            self.grid.box_length,
            self.grid.n,
            self.potential.period,
        )
    }

    pub fn nonlinearity_spec(&self) -> Result<NonlinearitySpec> {
        let n = &self.nonlinearity;
        let spec = match n.kind {
            NonlinearityChoice::Power if n.gamma_amplitude != 0.0 && n.q == 2.0 => {
                // report the reduction rule rather than the missing Γ slot
                NonlinearitySpec::dual_power(n.p, n.q, n.k.clone(), n.gamma.clone(), n.gamma_amplitude)
            }
            NonlinearityChoice::Power => NonlinearitySpec::power(n.p, n.q, n.k.clone()),
            NonlinearityChoice::DualPower => {
                NonlinearitySpec::dual_power(n.p, n.q, n.k.clone(), n.gamma.clone(), n.gamma_amplitude)
            }
        };
        spec.map_err(|e| config_err("nonlinearity", e))
    }

    pub fn setup(&self) -> Result<RunSetup> {
        let grid = Grid::new(self.grid_spec()).map_err(|e| config_err("grid", e))?;
        let nonlinearity = self.nonlinearity_spec()?;
        let model = Model::new(self.potential.clone(), nonlinearity).map_err(|e| config_err("potential", e))?;
        crate::model::sample_model(&model, &grid).map_err(|e| config_err("potential", e))?;
        let mut solver = self.solver.clone();
        solver.seed = self.seed;
        solver.validate().map_err(|e| config_err("solver", e))?;
        if !(self.spectrum.tol > 0.0) {
            return Err(config_err("spectrum.tol", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_err("sweep.values", "needs at least one value"));
            }
        }
        if !(self.fiber.t_lo > 0.0 && self.fiber.t_lo < self.fiber.t_hi && self.fiber.points >= 2) {
            return Err(config_err("fiber", "needs 0 < t_lo < t_hi and at least two points"));
        }
        if let Some(bad) = self.nonexist.offsets.iter().find(|o| o.len() != self.grid.dim) {
            return Err(config_err(
                "nonexist.offsets",
                format!("offset {bad:?} does not have {} components", self.grid.dim),
            ));
        }
        Ok(RunSetup {
            model,
            grid,
            solver,
            certify: CertifyOptions {
                probes: self.probes.clone().unwrap_or_default(),
                eig_tol: self.spectrum.tol,
                margin: self.spectrum.margin,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KERR: &str = r#"
seed = 3

[grid]
dim = 1
box_length = 40.0
n = 1024

[potential]
period = 1.25
v_per = { kind = "constant", value = 1.0 }

[nonlinearity]
kind = "power"
p = 4.0
q = 2.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(KERR).unwrap();
        let setup = cfg.setup().unwrap();
        assert_eq!(setup.solver.tol_grad, 1e-8);
        assert_eq!(setup.solver.seed, 3);
        assert_eq!(setup.grid.n(), 1024);
        assert!(cfg.sweep.is_none());
        assert_eq!(cfg.fiber.fields, 100);
    }

    #[test]
    fn unknown_key_is_addressed() {
        let text = KERR.replace("n = 1024", "n = 1024\nwidth = 3");
        match parse_config(&text).unwrap_err() {
            NlsError::Config { key, message } => {
                assert_eq!(key, "grid.width");
                assert!(message.contains("line"), "{message}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn gamma_with_q_two_cites_reduction_rule() {
        let text = KERR.replace("q = 2.0", "q = 2.0\ngamma_amplitude = 0.3");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("q = 2 requires Γ ≡ 0"), "{e}");
    }

    #[test]
    fn p_below_q_is_rejected() {
        let text = KERR.replace("p = 4.0", "p = 1.5");
        let e = parse_config(&text).unwrap_err();
        assert!(e.to_string().contains("q < p"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let e = parse_config("[grid\ndim = 1").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn grid_and_period_must_agree() {
        let text = KERR.replace("period = 1.25", "period = 1.0");
        match parse_config(&text).unwrap_err() {
            NlsError::Config { key, .. } => assert_eq!(key, "grid"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn sections_parse() {
        let text = format!(
            "{KERR}\n[solver]\ntol_grad = 1e-9\ninit = {{ kind = \"gaussian\", width = 3.0 }}\n\n\
             [sweep]\nparameter = \"loc_depth\"\nvalues = [0.0, 0.25]\n\n\
             [nonexist]\noffsets = [[0], [4]]\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.solver.tol_grad, 1e-9);
        assert_eq!(cfg.sweep.unwrap().parameter, SweepParameter::LocDepth);
        assert_eq!(cfg.nonexist.offsets, vec![vec![0], vec![4]]);
    }
}

//! A sampled model whose hypotheses and spectral floor have been checked.

use crate::error::{NlsError, Result};
use crate::grid::Grid;
use crate::model::{sample_model, validate_hypotheses, HypothesisReport, Model, ProbeConfig, SampledModel};
use crate::spectrum::{assert_positive_spectrum, min_eigenvalue, SpectrumReport, DEFAULT_EIG_TOL, DEFAULT_MARGIN};

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub probes: ProbeConfig,
    pub eig_tol: f64,
    pub margin: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            probes: ProbeConfig::default(),
            eig_tol: DEFAULT_EIG_TOL,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Everything the solver needs, produced only when every check passes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub sampled: SampledModel,
    pub hypotheses: HypothesisReport,
    pub spectrum: SpectrumReport,
}

impl Problem {
    pub fn certify(model: &Model, grid: &Grid, opts: &CertifyOptions) -> Result<Problem> {
        let mut hypotheses = validate_hypotheses(model, grid, &opts.probes);
        if !hypotheses.all_passed() {
            let names: Vec<String> = hypotheses
                .failures()
                .iter()
                .map(|c| format!("{:?}: {}", c.name, c.detail))
                .collect();
            return Err(NlsError::HypothesisViolation(names.join("; ")));
        }
        let sampled = sample_model(model, grid)?;
        let spectrum = min_eigenvalue(&sampled.vtot, opts.eig_tol)?;
        hypotheses.spectral_floor = Some(spectrum.lambda_min);
        assert_positive_spectrum(&spectrum, opts.margin)?;
        Ok(Problem {
            sampled,
            hypotheses,
            spectrum,
        })
    }

    pub fn model(&self) -> &Model {
        &self.sampled.model
    }

    pub fn grid(&self) -> &Grid {
        &self.sampled.grid
    }
}

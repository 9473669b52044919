//! Local stress updates over one time step `t_n → t_{n+1}`.
//!
//! All three integrators share the elastic predictor and the outer scalar
//! consistency solve; they differ in how the tensorial internal variables are
//! obtained for a given inelastic increment `ξ`.

use thiserror::Error;

use crate::material::{self, MaterialError, MaterialParams, MaterialState};
use crate::tensor::{SymTensor3, TensorError};

mod coupled;
mod pebm;
mod scalar;

pub use coupled::{coupled_step, CoupledOptions, CoupledScheme, Ebmsc, Em};
pub use pebm::{
    push_forward_estimate, push_forward_estimate_noninvariant, rough_xi_estimate, solve_ci_closed_form,
    solve_ci_identity_correction, solve_consistency, update_cki_explicit, z_perturbation_estimate, CiCorrection,
    y_naive, y_stable, CorrectorWorkspace, FrozenSubstructure, Pebm, PebmOptions, ShiftKind,
};
pub use scalar::{solve_scalar, ScalarSolution, ScalarTolerances};

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid step input: {0}")]
    InvalidInput(String),
    #[error("consistency residual does not change sign below xi = {xi_max}")]
    NoBracket { xi_max: f64 },
    #[error("scalar Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("coupled Newton diverged at xi = {xi} with {subincrements} subincrements")]
    InnerDivergence { xi: f64, subincrements: usize },
}

/// Everything a step needs.
#[derive(Clone, Copy, Debug)]
pub struct StepInput<'a> {
    pub c_n: SymTensor3,
    pub c_np1: SymTensor3,
    /// Time step in seconds.
    pub dt: f64,
    pub state_n: &'a MaterialState,
    pub params: &'a MaterialParams,
}

impl StepInput<'_> {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(StepError::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if self.state_n.cki.len() != self.params.n_channels() {
            return Err(StepError::InvalidInput(format!(
                "state has {} substructure tensors, material has {} channels",
                self.state_n.cki.len(),
                self.params.n_channels()
            )));
        }
        self.c_n.spd_eigen()?;
        self.c_np1.spd_eigen()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub state: MaterialState,
    pub xi: f64,
    /// Second Piola–Kirchhoff stress at `t_{n+1}`.
    pub pk2: SymTensor3,
    /// Scalar Newton iterations on the consistency condition, summed over
    /// relaxation passes.
    pub newton_iterations: usize,
    /// Newton iterations of the coupled tensor solve (baselines only).
    pub inner_iterations: usize,
    pub relaxation_passes: usize,
    /// Subdivisions of `[0, ξ]` used by the baselines; 1 without splitting.
    pub subincrements: usize,
    pub elastic: bool,
}

impl StepReport {
    fn elastic(input: &StepInput) -> Result<Self, StepError> {
        Ok(Self {
            state: input.state_n.clone(),
            xi: 0.0,
            pk2: material::pk2_stress(&input.c_np1, &input.state_n.ci, input.params)?,
            newton_iterations: 0,
            inner_iterations: 0,
            relaxation_passes: 0,
            subincrements: 0,
            elastic: true,
        })
    }
}

/// Trial overstress with all internal variables frozen at `t_n`.
pub fn trial_overstress(input: &StepInput) -> Result<f64, StepError> {
    Ok(material::overstress(&input.c_np1, input.state_n, 0.0, input.params)?)
}

/// Choice of integrator with its options.
#[derive(Clone, Debug, PartialEq)]
pub enum Integrator {
    Pebm(PebmOptions),
    Ebmsc(CoupledOptions),
    Em(CoupledOptions),
}

impl Integrator {
    pub fn pebm() -> Self {
        Self::Pebm(PebmOptions::default())
    }

    pub fn ebmsc() -> Self {
        Self::Ebmsc(CoupledOptions::default())
    }

    pub fn em() -> Self {
        Self::Em(CoupledOptions::default())
    }

    /// Parses `pebm`, `ebmsc` or `em` with default options.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "pebm" => Some(Self::pebm()),
            "ebmsc" => Some(Self::ebmsc()),
            "em" => Some(Self::em()),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Pebm(_) => "pebm",
            Self::Ebmsc(_) => "ebmsc",
            Self::Em(_) => "em",
        }
    }

    pub fn step(&self, input: &StepInput) -> Result<StepReport, StepError> {
        match self {
            Self::Pebm(opts) => Pebm::new(opts.clone()).step(input),
            Self::Ebmsc(opts) => coupled_step(input, CoupledScheme::Ebmsc, opts),
            Self::Em(opts) => coupled_step(input, CoupledScheme::Em, opts),
        }
    }

    /// The three standard integrators with default options.
    pub fn all() -> [Self; 3] {
        [Self::pebm(), Self::ebmsc(), Self::em()]
    }
}

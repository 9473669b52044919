//! Constitutive model: compressible neo-Hookean elasticity on the elastic
//! part of a multiplicative split, any number of Armstrong–Frederick
//! backstress channels built on a further split of the inelastic part, and
//! Voce-type isotropic hardening. Viscous flow follows a Perzyna-type
//! overstress law.
//!
//! All energies are stored premultiplied by the reference density, so the
//! density never appears on its own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{self, SymTensor3, Tensor3, TensorError};

/// Normalisation of the overstress inside the Macaulay bracket, in MPa.
/// Fixed; not a material parameter.
pub const F0: f64 = 1.0;

/// `sqrt(2/3)`.
pub const SQRT_2_3: f64 = 0.816_496_580_927_726;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
    #[error("failed to parse material card: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One Armstrong–Frederick backstress channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackstressChannel {
    /// Kinematic hardening modulus, MPa.
    pub c: f64,
    /// Dynamic recovery coefficient, 1/MPa.
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    /// Bulk-like modulus, MPa.
    pub k: f64,
    /// Shear modulus, MPa.
    pub mu: f64,
    pub channels: Vec<BackstressChannel>,
    /// Isotropic hardening modulus, MPa.
    pub gamma: f64,
    /// Saturation parameter of isotropic hardening.
    pub beta: f64,
    /// Initial yield stress, MPa.
    #[serde(rename = "K")]
    pub yield_stress: f64,
    /// Viscosity exponent.
    pub m: f64,
    /// Viscosity, s. Zero switches to rate-independent plasticity.
    pub eta: f64,
}

const AA5754O_CARD: &str = include_str!("../cards/aa5754o.json");
const CRMO4_CARD: &str = include_str!("../cards/42crmo4.json");

impl MaterialParams {
    /// Aluminium alloy 5754-O (rate-independent).
    pub fn aa5754o() -> Self {
        Self::from_json(AA5754O_CARD).expect("bundled card is valid")
    }

    /// 42CrMo4 steel, with its viscous parameters.
    pub fn crmo4() -> Self {
        Self::from_json(CRMO4_CARD).expect("bundled card is valid")
    }

    /// Looks up a bundled card by file name or material name.
    pub fn bundled(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().trim_end_matches(".json") {
            "aa5754o" | "aa5754-o" | "5754-o" => Some(Self::aa5754o()),
            "42crmo4" => Some(Self::crmo4()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MaterialError> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let bad = |what: &str| Err(MaterialError::InvalidParameter(what.to_string()));
        let finite = [self.k, self.mu, self.gamma, self.beta, self.yield_stress, self.m, self.eta];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.k > 0.0) {
            return bad("k must be positive");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.yield_stress > 0.0) {
            return bad("K must be positive");
        }
        if self.beta < 0.0 {
            return bad("beta must be non-negative");
        }
        if self.eta < 0.0 {
            return bad("eta must be non-negative");
        }
        if self.m < 1.0 {
            return bad("m must be at least 1");
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if !(ch.c >= 0.0) || !ch.c.is_finite() {
                return Err(MaterialError::InvalidParameter(format!("channel {i}: c must be non-negative")));
            }
            if !(ch.kappa >= 0.0) || !ch.kappa.is_finite() {
                return Err(MaterialError::InvalidParameter(format!("channel {i}: kappa must be non-negative")));
            }
        }
        Ok(())
    }

    /// Switches viscosity off (`eta = 0`, `m = 1`).
    pub fn rate_independent(mut self) -> Self {
        self.eta = 0.0;
        self.m = 1.0;
        self
    }

    /// Replaces isotropic hardening by a raised, constant yield stress.
    pub fn with_perfect_isotropy(mut self, yield_stress: f64) -> Self {
        self.gamma = 0.0;
        self.yield_stress = yield_stress;
        self
    }

    /// `c = Σ c_k`.
    pub fn total_c(&self) -> f64 {
        self.channels.iter().map(|ch| ch.c).sum()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

/// Internal variables at one time node.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialState {
    /// Inelastic right Cauchy–Green tensor.
    pub ci: SymTensor3,
    /// Substructure tensors, one per backstress channel.
    pub cki: Vec<SymTensor3>,
    /// Odqvist parameter (inelastic arc length).
    pub s: f64,
    /// Dissipative part of `s`.
    pub sd: f64,
}

impl MaterialState {
    /// Unloaded isotropic state.
    pub fn virgin(n_channels: usize) -> Self {
        Self {
            ci: SymTensor3::IDENTITY,
            cki: vec![SymTensor3::IDENTITY; n_channels],
            s: 0.0,
            sd: 0.0,
        }
    }

    /// Transforms every tensor by `M (·) Mᵀ`; with `M = F0⁻ᵀ` this is the
    /// reference change `F0⁻ᵀ (·) F0⁻¹`.
    pub fn congruence(&self, m: &Tensor3) -> Self {
        Self {
            ci: self.ci.congruence(m),
            cki: self.cki.iter().map(|t| t.congruence(m)).collect(),
            s: self.s,
            sd: self.sd,
        }
    }

    /// Worst `|det − 1|` over `Ci` and all `Cki`.
    pub fn max_det_defect(&self) -> f64 {
        std::iter::once(&self.ci)
            .chain(&self.cki)
            .map(|t| (t.det() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue relative to the largest, over all internal tensors.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        std::iter::once(&self.ci)
            .chain(&self.cki)
            .map(|t| {
                let (v, _) = t.eigen();
                v.min() / v.max()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the manifold and positivity constraints.
    pub fn validate(&self, det_tol: f64) -> Result<(), MaterialError> {
        if self.max_det_defect() > det_tol {
            return Err(MaterialError::InvalidParameter(format!(
                "internal tensor off the unimodular manifold by {:e}",
                self.max_det_defect()
            )));
        }
        for t in std::iter::once(&self.ci).chain(&self.cki) {
            t.spd_eigen()?;
        }
        Ok(())
    }
}

/// Stored energy `ρ_R ψ` in MPa.
pub fn free_energy(c: &SymTensor3, state: &MaterialState, params: &MaterialParams) -> Result<f64, MaterialError> {
    c.spd_eigen()?;
    let ci_inv = state.ci.inverse()?;
    let ce = c.dot(&ci_inv);
    let j2 = ce.determinant();
    let elastic_iso = 0.5 * params.mu * (tensor::unimodular(&ce)?.trace() - 3.0);
    let elastic_vol = params.k / 50.0 * (j2.powf(2.5) + j2.powf(-2.5) - 2.0);

    let mut kinematic = 0.0;
    for (ch, cki) in params.channels.iter().zip(&state.cki) {
        let m = state.ci.dot(&cki.inverse()?);
        kinematic += 0.25 * ch.c * (tensor::unimodular(&m)?.trace() - 3.0);
    }
    let r = state.s - state.sd;
    Ok(elastic_vol + elastic_iso + kinematic + 0.5 * params.gamma * r * r)
}

/// Second Piola–Kirchhoff stress `T̃` for `det Ci = 1`.
pub fn pk2_stress(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<SymTensor3, MaterialError> {
    c.spd_eigen()?;
    let det_c = c.det();
    let c_inv = c.inverse()?;
    let vol = params.k / 10.0 * (det_c.powf(2.5) - det_c.powf(-2.5));
    Ok(c_inv * vol + deviatoric_pk2(c, ci, params)?)
}

/// Isochoric part of `T̃`, `μ C⁻¹ (C̄ Ci⁻¹)ᴰ`.
pub fn deviatoric_pk2(c: &SymTensor3, ci: &SymTensor3, params: &MaterialParams) -> Result<SymTensor3, MaterialError> {
    let det_c = c.det();
    if !(det_c > 0.0) {
        return Err(TensorError::NonPositiveDeterminant(det_c).into());
    }
    let c_inv = c.inverse()?;
    let ci_inv = ci.inverse()?;
    let scale = det_c.powf(-1.0 / 3.0);
    let tr = scale * double_contraction(c, &ci_inv);
    Ok((ci_inv * scale - c_inv * (tr / 3.0)) * params.mu)
}

/// Partial backstress `X̃_k = (c_k/2) Ci⁻¹ (Ci Cki⁻¹)ᴰ`.
pub fn backstress(ci: &SymTensor3, cki: &SymTensor3, c_k: f64) -> Result<SymTensor3, MaterialError> {
    ci.spd_eigen()?;
    cki.spd_eigen()?;
    let ci_inv = ci.inverse()?;
    let cki_inv = cki.inverse()?;
    let tr = double_contraction(ci, &cki_inv);
    Ok((cki_inv - ci_inv * (tr / 3.0)) * (0.5 * c_k))
}

/// Total backstress, summed over channels.
pub fn total_backstress(state: &MaterialState, params: &MaterialParams) -> Result<SymTensor3, MaterialError> {
    let mut x = SymTensor3::ZERO;
    for (ch, cki) in params.channels.iter().zip(&state.cki) {
        x += backstress(&state.ci, cki, ch.c)?;
    }
    Ok(x)
}

/// Cauchy stress `(det F)⁻¹ F T̃ Fᵀ`.
pub fn cauchy_stress(f: &Tensor3, pk2: &SymTensor3) -> Result<SymTensor3, MaterialError> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(TensorError::NonPositiveDeterminant(j).into());
    }
    Ok(pk2.congruence(f) * (1.0 / j))
}

/// `A : B` for symmetric tensors, i.e. `tr(A B)`.
pub fn double_contraction(a: &SymTensor3, b: &SymTensor3) -> f64 {
    let x = a.components();
    let y = b.components();
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + 2.0 * (x[3] * y[3] + x[4] * y[4] + x[5] * y[5])
}

/// Norm of the driving force, `sqrt(tr[((C T̃ − Ci X̃)ᴰ)²])`, evaluated from
/// the full stress and backstress tensors.
///
/// The argument of the norm is similar to a symmetric tensor, so `tr(M²)`
/// is its squared Frobenius norm in a suitable basis and is non-negative.
pub fn driving_force_norm(c: &SymTensor3, state: &MaterialState, params: &MaterialParams) -> Result<f64, MaterialError> {
    let t = pk2_stress(c, &state.ci, params)?;
    driving_force_norm_from(c, &t, state, params)
}

/// Same as [`driving_force_norm`] for a given stress (full or deviatoric).
pub fn driving_force_norm_from(
    c: &SymTensor3,
    pk2: &SymTensor3,
    state: &MaterialState,
    params: &MaterialParams,
) -> Result<f64, MaterialError> {
    let x = total_backstress(state, params)?;
    let m = c.dot(pk2) - state.ci.dot(&x);
    Ok(tensor::trace_of_square(&tensor::dev(&m)).max(0.0).sqrt())
}

/// Reduced form of the driving-force norm used inside the integrators:
/// `C T̃ − Ci X̃ = vol·1 + μ (C̄ Ci⁻¹)ᴰ − Σ (c_k/2) (Ci Cki⁻¹)ᴰ`,
/// with `c_bar` the unimodular part of `C`.
pub fn driving_force_norm_reduced(
    c_bar: &SymTensor3,
    ci: &SymTensor3,
    cki: &[SymTensor3],
    params: &MaterialParams,
) -> Result<f64, TensorError> {
    let cki_inv: Vec<SymTensor3> = cki.iter().map(SymTensor3::inverse).collect::<Result<_, _>>()?;
    driving_force_norm_reduced_inv(c_bar, ci, &cki_inv, params)
}

/// [`driving_force_norm_reduced`] with the inverse substructure tensors given.
pub fn driving_force_norm_reduced_inv(
    c_bar: &SymTensor3,
    ci: &SymTensor3,
    cki_inv: &[SymTensor3],
    params: &MaterialParams,
) -> Result<f64, TensorError> {
    let ci_inv = ci.inverse()?;
    let mut m = c_bar.dot(&ci_inv) * params.mu;
    for (ch, k_inv) in params.channels.iter().zip(cki_inv) {
        if ch.c != 0.0 {
            m -= ci.dot(k_inv) * (0.5 * ch.c);
        }
    }
    Ok(tensor::trace_of_square(&tensor::dev(&m)).max(0.0).sqrt())
}

/// Isotropic hardening after an increment `xi`, with the backward-Euler
/// update of `s` and `s_d` folded in.
pub fn hardening_r(xi: f64, s: f64, sd: f64, params: &MaterialParams) -> f64 {
    let r_prev = params.gamma * (s - sd);
    (r_prev + SQRT_2_3 * params.gamma * xi) / (1.0 + SQRT_2_3 * params.beta * xi)
}

/// Updated `(s, s_d)` after an increment `xi`.
pub fn update_s_sd(xi: f64, s: f64, sd: f64, params: &MaterialParams) -> (f64, f64) {
    let s_new = s + SQRT_2_3 * xi;
    let sd_new = if params.gamma == 0.0 {
        sd
    } else {
        sd + params.beta / params.gamma * SQRT_2_3 * xi * hardening_r(xi, s, sd, params)
    };
    (s_new, sd_new)
}

/// Driving-force norm demanded by the flow rule for an increment `xi`:
/// `f0 (η ξ/Δt)^(1/m) + sqrt(2/3)(K + R(ξ))`.
pub fn f2(xi: f64, dt: f64, s: f64, sd: f64, params: &MaterialParams) -> f64 {
    let viscous = if params.eta == 0.0 || xi <= 0.0 {
        0.0
    } else {
        F0 * (params.eta * xi / dt).powf(1.0 / params.m)
    };
    viscous + SQRT_2_3 * (params.yield_stress + hardening_r(xi, s, sd, params))
}

/// `⟨x⟩^m`; zero for non-positive `x`, valid for non-integer `m`.
pub fn macaulay_pow(x: f64, m: f64) -> f64 {
    if x > 0.0 {
        (m * x.ln()).exp()
    } else {
        0.0
    }
}

/// Overstress `f̃ = 𝔉₁ − sqrt(2/3)(K + R(ξ))` with the current `C`.
pub fn overstress(c: &SymTensor3, state: &MaterialState, xi: f64, params: &MaterialParams) -> Result<f64, MaterialError> {
    let driving = driving_force_norm(c, state, params)?;
    Ok(driving - SQRT_2_3 * (params.yield_stress + hardening_r(xi, state.s, state.sd, params)))
}

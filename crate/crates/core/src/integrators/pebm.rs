//! Partitioned Euler Backward method.
//!
//! The corrector alternates between an explicit update of the substructure
//! tensors `Cki` for given `(Ci, ξ)` and a scalar solve for `ξ` in which `Ci`
//! follows in closed form from frozen `Cki`. Every tensor update ends with a
//! unimodular projection, so `det Ci = det Cki = 1` and positive definiteness
//! hold for any step size.

use nalgebra::{SMatrix, SVector};

use super::scalar::{solve_scalar, ScalarSolution, ScalarTolerances};
use super::{trial_overstress, StepError, StepInput, StepReport};
use crate::material::{self, MaterialParams, MaterialState, F0};
use crate::tensor::{self, SymTensor3, Tensor3, TensorError};

/// How the closed-form `Ci` update enforces incompressibility.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CiCorrection {
    /// Correction along `Ci` itself; keeps the weak invariance.
    #[default]
    Invariant,
    /// Correction along the identity, solved iteratively. Breaks the weak
    /// invariance; kept only as a negative control.
    Identity,
}

/// Initial estimate of `Ci` in substep 2.1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShiftKind {
    /// `F_sh = (unimodular(C_{n+1}⁻¹ C_n))^(1/2)`.
    #[default]
    Invariant,
    /// `F_sh = unimodular(C_{n+1})^(-1/2) unimodular(C_n)^(1/2)`; negative control.
    NonInvariant,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PebmOptions {
    /// Number of `Cki`/`ξ` relaxation passes, 1 to 10.
    pub relaxation_passes: usize,
    pub shift: ShiftKind,
    pub correction: CiCorrection,
}

impl Default for PebmOptions {
    fn default() -> Self {
        Self { relaxation_passes: 3, shift: ShiftKind::Invariant, correction: CiCorrection::Invariant }
    }
}

/// Quantities that depend only on the frozen substructure tensors and are
/// shared by every `ξ` tried within one relaxation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenSubstructure {
    pub cki_inv: Vec<SymTensor3>,
    /// `Σ (c_k/c) Cki⁻¹`; zero when `c = 0`.
    pub phi: SymTensor3,
    pub phi_half: SymTensor3,
    pub phi_inv_half: SymTensor3,
    /// `Σ c_k`.
    pub c: f64,
}

impl FrozenSubstructure {
    pub fn new(cki: &[SymTensor3], params: &MaterialParams) -> Result<Self, TensorError> {
        let cki_inv: Vec<SymTensor3> = cki.iter().map(SymTensor3::inverse).collect::<Result<_, _>>()?;
        let c = params.total_c();
        if c == 0.0 {
            let z = SymTensor3::ZERO;
            return Ok(Self { cki_inv, phi: z, phi_half: z, phi_inv_half: z, c });
        }
        let mut phi = SymTensor3::ZERO;
        for (ch, k_inv) in params.channels.iter().zip(&cki_inv) {
            if ch.c != 0.0 {
                phi += *k_inv * (ch.c / c);
            }
        }
        let (phi_half, phi_inv_half) = phi.sqrt_and_inv_sqrt()?;
        Ok(Self { cki_inv, phi, phi_half, phi_inv_half, c })
    }

    /// Closed-form `Ci` for a given `ξ` with `f2 = 𝔉₂(ξ)`.
    pub fn solve_ci(
        &self,
        ci_n: &SymTensor3,
        c_bar: &SymTensor3,
        xi: f64,
        f2: f64,
        params: &MaterialParams,
    ) -> Result<SymTensor3, TensorError> {
        if xi == 0.0 {
            return Ok(*ci_n);
        }
        if self.c == 0.0 {
            return (*ci_n + *c_bar * (2.0 * xi * params.mu / f2)).unimodular();
        }
        let ws = self.workspace(ci_n, c_bar, xi, f2, params);
        ws.y()?.sandwich(&self.phi_inv_half).unimodular()
    }

    /// Requires `c > 0`.
    pub fn workspace(
        &self,
        ci_n: &SymTensor3,
        c_bar: &SymTensor3,
        xi: f64,
        f2: f64,
        params: &MaterialParams,
    ) -> CorrectorWorkspace {
        let a = (*ci_n + *c_bar * (2.0 * xi * params.mu / f2)).sandwich(&self.phi_half);
        let xi_prime = self.c * xi / f2;
        let z0 = (a.det() / self.phi.det()).cbrt();
        let z = z0 - a.trace() / (3.0 * z0) * xi_prime;
        CorrectorWorkspace {
            phi: self.phi,
            phi_half: self.phi_half,
            phi_inv_half: self.phi_inv_half,
            a,
            z0,
            z,
            xi_prime,
            c: self.c,
        }
    }
}

/// Intermediate quantities of the closed-form `Ci` update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectorWorkspace {
    /// `Σ (c_k/c) Cki⁻¹`.
    pub phi: SymTensor3,
    pub phi_half: SymTensor3,
    pub phi_inv_half: SymTensor3,
    /// `Φ^(1/2) [ⁿCi + (2ξμ/𝔉₂) C̄] Φ^(1/2)`.
    pub a: SymTensor3,
    pub z0: f64,
    pub z: f64,
    /// `c ξ / 𝔉₂`.
    pub xi_prime: f64,
    /// `Σ c_k`.
    pub c: f64,
}

impl CorrectorWorkspace {
    /// Requires `c > 0`.
    pub fn new(
        ci_n: &SymTensor3,
        cki: &[SymTensor3],
        c_bar: &SymTensor3,
        xi: f64,
        f2: f64,
        params: &MaterialParams,
    ) -> Result<Self, TensorError> {
        Ok(FrozenSubstructure::new(cki, params)?.workspace(ci_n, c_bar, xi, f2, params))
    }

    /// `Y` from the round-off-stable form.
    pub fn y(&self) -> Result<SymTensor3, TensorError> {
        y_stable(&self.a, self.z, self.xi_prime)
    }
}

/// `z ≈ z0 − (tr A / 3 z0) ξ'` with `z0 = (det A / det Φ)^(1/3)`.
pub fn z_perturbation_estimate(a: &SymTensor3, phi: &SymTensor3, xi_prime: f64) -> f64 {
    let z0 = (a.det() / phi.det()).cbrt();
    z0 - a.trace() / (3.0 * z0) * xi_prime
}

/// Positive root of `z Y = A − ξ' Y²` written as
/// `Y = 2 A [(z² 1 + 4ξ' A)^(1/2) + z 1]⁻¹`. Well defined as `ξ' → 0`.
pub fn y_stable(a: &SymTensor3, z: f64, xi_prime: f64) -> Result<SymTensor3, TensorError> {
    let s = (SymTensor3::IDENTITY * (z * z) + *a * (4.0 * xi_prime)).sqrt_spd()?;
    let denom_inv = (s + SymTensor3::IDENTITY * z).inverse()?;
    Ok(SymTensor3::from_matrix(&(a.dot(&denom_inv) * 2.0)))
}

/// The same root written as `(2ξ')⁻¹ [−z 1 + (z² 1 + 4ξ' A)^(1/2)]`.
/// Loses digits by cancellation for small `ξ'`.
pub fn y_naive(a: &SymTensor3, z: f64, xi_prime: f64) -> Result<SymTensor3, TensorError> {
    let s = (SymTensor3::IDENTITY * (z * z) + *a * (4.0 * xi_prime)).sqrt_spd()?;
    Ok((s - SymTensor3::IDENTITY * z) * (1.0 / (2.0 * xi_prime)))
}

/// Closed-form `Ci` for frozen `Cki` and a given `ξ`, with `f2 = 𝔉₂(ξ)`.
pub fn solve_ci_closed_form(
    ci_n: &SymTensor3,
    cki: &[SymTensor3],
    c_bar: &SymTensor3,
    xi: f64,
    f2: f64,
    params: &MaterialParams,
) -> Result<SymTensor3, TensorError> {
    if xi == 0.0 {
        return Ok(*ci_n);
    }
    FrozenSubstructure::new(cki, params)?.solve_ci(ci_n, c_bar, xi, f2, params)
}

/// Variant of [`solve_ci_closed_form`] that corrects incompressibility with a
/// multiple of the identity. Solves the seven equations in `(Ci, ε)` by
/// Newton, started from the invariant solution.
pub fn solve_ci_identity_correction(
    ci_n: &SymTensor3,
    cki: &[SymTensor3],
    c_bar: &SymTensor3,
    xi: f64,
    f2: f64,
    params: &MaterialParams,
) -> Result<SymTensor3, StepError> {
    let start = solve_ci_closed_form(ci_n, cki, c_bar, xi, f2, params)?;
    if xi == 0.0 {
        return Ok(start);
    }
    let cki_inv: Vec<SymTensor3> = cki.iter().map(SymTensor3::inverse).collect::<Result<_, _>>()?;
    let k = 2.0 * xi / f2;

    let residual = |x: &SVector<f64, 7>| -> Result<SVector<f64, 7>, TensorError> {
        let ci = SymTensor3::from_components([x[0], x[1], x[2], x[3], x[4], x[5]]);
        let eps = x[6];
        let ci_inv = ci.inverse()?;
        let mut back = SymTensor3::ZERO;
        let mut tr_back = 0.0;
        for (ch, kinv) in params.channels.iter().zip(&cki_inv) {
            back += kinv.sandwich(&ci) * (0.5 * ch.c);
            tr_back += 0.5 * ch.c * material::double_contraction(&ci, kinv);
        }
        let beta_dt = -(k / 3.0) * (params.mu * material::double_contraction(c_bar, &ci_inv) - tr_back);
        let lhs = ci * (1.0 - beta_dt) - SymTensor3::IDENTITY * eps;
        let rhs = *ci_n + (*c_bar * params.mu - back) * k;
        let r = (lhs - rhs).components();
        Ok(SVector::<f64, 7>::from_column_slice(&[r[0], r[1], r[2], r[3], r[4], r[5], ci.det() - 1.0]))
    };

    let mut x = SVector::<f64, 7>::zeros();
    x.fixed_rows_mut::<6>(0).copy_from_slice(&start.components());
    for _ in 0..50 {
        let r = residual(&x)?;
        if r.amax() < 1e-14 {
            break;
        }
        let mut jac = SMatrix::<f64, 7, 7>::zeros();
        for j in 0..7 {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x;
            xp[j] += h;
            jac.set_column(j, &((residual(&xp)? - r) / h));
        }
        let dx = jac.lu().solve(&(-r)).ok_or(TensorError::Singular)?;
        x += dx;
        if dx.amax() < 1e-15 {
            break;
        }
    }
    let ci = SymTensor3::from_components([x[0], x[1], x[2], x[3], x[4], x[5]]);
    ci.spd_eigen()?;
    Ok(ci)
}

/// `unimodular(ⁿCki + ξ κ_k c_k Ci)`.
pub fn update_cki_explicit(
    cki_n: &SymTensor3,
    ci: &SymTensor3,
    xi: f64,
    c_k: f64,
    kappa_k: f64,
) -> Result<SymTensor3, TensorError> {
    if xi == 0.0 {
        return Ok(*cki_n);
    }
    (*cki_n + *ci * (xi * kappa_k * c_k)).unimodular()
}

/// Pushes `ⁿCi` forward by the shift that maps `unimodular(C_n)` onto
/// `unimodular(C_{n+1})`: `F_sh⁻ᵀ ⁿCi F_sh⁻¹` with
/// `F_sh = (unimodular(C_{n+1}⁻¹ C_n))^(1/2)`.
pub fn push_forward_estimate(ci_n: &SymTensor3, c_n: &SymTensor3, c_np1: &SymTensor3) -> Result<SymTensor3, TensorError> {
    let f_sh = tensor::principal_sqrt_of_spd_product(&c_np1.unimodular()?, &c_n.unimodular()?)?;
    shift(ci_n, &f_sh)
}

/// Push-forward with `F_sh = unimodular(C_{n+1})^(-1/2) unimodular(C_n)^(1/2)`,
/// which does not commute with changes of the reference configuration.
pub fn push_forward_estimate_noninvariant(
    ci_n: &SymTensor3,
    c_n: &SymTensor3,
    c_np1: &SymTensor3,
) -> Result<SymTensor3, TensorError> {
    let (_, np1_inv_half) = c_np1.unimodular()?.sqrt_and_inv_sqrt()?;
    let n_half = c_n.unimodular()?.sqrt_spd()?;
    let f_sh = np1_inv_half.dot(&n_half);
    shift(ci_n, &f_sh)
}

fn shift(ci_n: &SymTensor3, f_sh: &Tensor3) -> Result<SymTensor3, TensorError> {
    let inv_t = tensor::inverse(f_sh)?.transpose();
    ci_n.congruence(&inv_t).unimodular()
}

/// Rough `ξ` from `2μξ + f0 (ξη/Δt)^(1/m) = f_trial`.
pub fn rough_xi_estimate(f_trial: f64, dt: f64, params: &MaterialParams) -> f64 {
    if !(f_trial > 0.0) {
        return 0.0;
    }
    let upper = f_trial / (2.0 * params.mu);
    if params.eta == 0.0 {
        return upper;
    }
    let g = |xi: f64| 2.0 * params.mu * xi + F0 * (xi * params.eta / dt).powf(1.0 / params.m) - f_trial;
    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > 1e-13 * upper {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the consistency condition for `ξ` with frozen `Cki`.
///
/// The residual is `𝔉₁(Ci(ξ)) − 𝔉₂(ξ)`, which vanishes exactly where
/// `ξη = Δt ⟨f̃/f0⟩^m` holds for `ξ > 0`.
pub fn solve_consistency(
    cki_est: &[SymTensor3],
    input: &StepInput,
    xi_init: f64,
    f_trial: f64,
) -> Result<ScalarSolution, StepError> {
    let frozen = FrozenSubstructure::new(cki_est, input.params)?;
    Ok(solve_consistency_with(&frozen, cki_est, input, xi_init, f_trial, CiCorrection::Invariant)?.0)
}

fn ci_of_xi(
    frozen: &FrozenSubstructure,
    cki_est: &[SymTensor3],
    input: &StepInput,
    c_bar: &SymTensor3,
    xi: f64,
    correction: CiCorrection,
) -> Result<(SymTensor3, f64), StepError> {
    let st = input.state_n;
    let f2 = material::f2(xi, input.dt, st.s, st.sd, input.params);
    let ci = match correction {
        CiCorrection::Invariant => frozen.solve_ci(&st.ci, c_bar, xi, f2, input.params)?,
        CiCorrection::Identity => solve_ci_identity_correction(&st.ci, cki_est, c_bar, xi, f2, input.params)?,
    };
    Ok((ci, f2))
}

/// Also returns `Ci` at the solution.
fn solve_consistency_with(
    frozen: &FrozenSubstructure,
    cki_est: &[SymTensor3],
    input: &StepInput,
    xi_init: f64,
    f_trial: f64,
    correction: CiCorrection,
) -> Result<(ScalarSolution, SymTensor3), StepError> {
    let c_bar = input.c_np1.unimodular()?;
    let mut last: Option<(f64, SymTensor3)> = None;
    let residual = |xi: f64| -> Result<f64, StepError> {
        let (ci, f2) = ci_of_xi(frozen, cki_est, input, &c_bar, xi, correction)?;
        last = Some((xi, ci));
        Ok(material::driving_force_norm_reduced_inv(&c_bar, &ci, &frozen.cki_inv, input.params)? - f2)
    };
    let sol = solve_scalar(residual, xi_init, &ScalarTolerances::for_trial(f_trial))?;
    let ci = match last {
        Some((xi, ci)) if xi == sol.xi => ci,
        _ => ci_of_xi(frozen, cki_est, input, &c_bar, sol.xi, correction)?.0,
    };
    Ok((sol, ci))
}

/// Partitioned Euler Backward integrator.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pebm {
    pub opts: PebmOptions,
}

impl Pebm {
    pub fn new(opts: PebmOptions) -> Self {
        Self { opts }
    }

    pub fn step(&self, input: &StepInput) -> Result<StepReport, StepError> {
        input.validate()?;
        let passes = self.opts.relaxation_passes;
        if !(1..=10).contains(&passes) {
            return Err(StepError::InvalidInput(format!("relaxation passes must be 1..=10, got {passes}")));
        }
        let f_trial = trial_overstress(input)?;
        if f_trial <= 0.0 {
            return StepReport::elastic(input);
        }

        let params = input.params;
        let st = input.state_n;
        let mut ci_est = match self.opts.shift {
            ShiftKind::Invariant => push_forward_estimate(&st.ci, &input.c_n, &input.c_np1)?,
            ShiftKind::NonInvariant => push_forward_estimate_noninvariant(&st.ci, &input.c_n, &input.c_np1)?,
        };
        let mut xi_est = rough_xi_estimate(f_trial, input.dt, params);
        let mut cki_est = st.cki.clone();
        let mut iterations = 0;

        for _ in 0..passes {
            for ((est, prev), ch) in cki_est.iter_mut().zip(&st.cki).zip(&params.channels) {
                *est = update_cki_explicit(prev, &ci_est, xi_est, ch.c, ch.kappa)?;
            }
            let frozen = FrozenSubstructure::new(&cki_est, params)?;
            let (sol, ci) = solve_consistency_with(&frozen, &cki_est, input, xi_est, f_trial, self.opts.correction)?;
            iterations += sol.iterations;
            xi_est = sol.xi;
            ci_est = ci;
        }

        if xi_est == 0.0 {
            let mut report = StepReport::elastic(input)?;
            report.newton_iterations = iterations;
            report.relaxation_passes = passes;
            return Ok(report);
        }

        let (s, sd) = material::update_s_sd(xi_est, st.s, st.sd, params);
        let state = MaterialState { ci: ci_est, cki: cki_est, s, sd };
        let pk2 = material::pk2_stress(&input.c_np1, &state.ci, params)?;
        Ok(StepReport {
            state,
            xi: xi_est,
            pk2,
            newton_iterations: iterations,
            inner_iterations: 0,
            relaxation_passes: passes,
            subincrements: 1,
            elastic: false,
        })
    }
}

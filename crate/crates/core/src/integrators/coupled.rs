//! Baseline integrators that solve the coupled tensor system for `Ci` and all
//! `Cki` at once: Euler Backward with subsequent unimodular correction
//! (EBMSC) and the exponential map (EM).
//!
//! For a fixed `ξ` (a "ξ-step") the `6(1+N)` symmetric components are found
//! by Newton with a finite-difference Jacobian. The outer scalar consistency
//! solve is shared with PEBM. When the ξ-step diverges the interval `[0, ξ]`
//! is split into equal substeps.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};

use super::pebm::rough_xi_estimate;
use super::scalar::{solve_scalar, ScalarTolerances};
use super::{trial_overstress, StepError, StepInput, StepReport};
use crate::material::{self, double_contraction, MaterialParams, MaterialState};
use crate::tensor::{cost, matrix_exp, SymTensor3, Tensor3, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoupledScheme {
    /// `A = [1 − Δt f(A)]⁻¹ ⁿA`, then `unimodular(A)`.
    Ebmsc,
    /// `A = exp(Δt f(A)) ⁿA`.
    Em,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledOptions {
    /// Largest number of equal substeps of `[0, ξ]`.
    pub max_subincrements: usize,
    /// Convergence threshold on the max-norm of the tensor residual.
    pub inner_tolerance: f64,
    pub max_inner_iterations: usize,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        Self { max_subincrements: 256, inner_tolerance: 1e-11, max_inner_iterations: 40 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ebmsc {
    pub opts: CoupledOptions,
}

impl Ebmsc {
    pub fn step(&self, input: &StepInput) -> Result<StepReport, StepError> {
        coupled_step(input, CoupledScheme::Ebmsc, &self.opts)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Em {
    pub opts: CoupledOptions,
}

impl Em {
    pub fn step(&self, input: &StepInput) -> Result<StepReport, StepError> {
        coupled_step(input, CoupledScheme::Em, &self.opts)
    }
}

/// Fixed data of one ξ-step.
struct XiProblem<'a> {
    scheme: CoupledScheme,
    params: &'a MaterialParams,
    c_bar: SymTensor3,
    f2: f64,
}

#[derive(Default)]
struct Tally {
    inner_iterations: usize,
    subincrements: usize,
}

fn pack(tensors: &[SymTensor3]) -> DVector<f64> {
    DVector::from_iterator(tensors.len() * 6, tensors.iter().flat_map(|t| t.components()))
}

fn unpack(x: &DVector<f64>) -> Vec<SymTensor3> {
    x.as_slice()
        .chunks_exact(6)
        .map(|c| SymTensor3::from_components([c[0], c[1], c[2], c[3], c[4], c[5]]))
        .collect()
}

impl XiProblem<'_> {
    /// Residual for one substep of size `dxi` from `base`.
    fn residual(&self, x: &[SymTensor3], base: &[SymTensor3], dxi: f64) -> Result<DVector<f64>, TensorError> {
        let ci = x[0];
        let ci_inv = ci.inverse()?;
        let k = 2.0 * dxi / self.f2;
        let mut out = Vec::with_capacity(x.len() * 6);

        match self.scheme {
            CoupledScheme::Ebmsc => {
                // G(Ci) Ci and G(Cki) Cki written out in symmetric form.
                let mut g_ci = (self.c_bar - ci * (double_contraction(&self.c_bar, &ci_inv) / 3.0)) * self.params.mu;
                let mut rk = Vec::with_capacity(x.len() - 1);
                for ((ch, cki), cki_n) in self.params.channels.iter().zip(&x[1..]).zip(&base[1..]) {
                    let cki_inv = cki.inverse()?;
                    let tr = double_contraction(&ci, &cki_inv);
                    g_ci = g_ci - (cki_inv.sandwich(&ci) - ci * (tr / 3.0)) * (0.5 * ch.c);
                    let g_k = (ci - *cki * (tr / 3.0)) * (dxi * ch.kappa * ch.c);
                    rk.push(*cki - g_k - *cki_n);
                }
                out.extend((ci - g_ci * k - base[0]).components());
                for r in rk {
                    out.extend(r.components());
                }
            }
            CoupledScheme::Em => {
                let mut g_ci = crate::tensor::dev(&self.c_bar.dot(&ci_inv)) * self.params.mu;
                let mut rk = Vec::with_capacity(x.len() - 1);
                for ((ch, cki), cki_n) in self.params.channels.iter().zip(&x[1..]).zip(&base[1..]) {
                    let cki_inv = cki.inverse()?;
                    let m = crate::tensor::dev(&ci.dot(&cki_inv));
                    g_ci -= m * (0.5 * ch.c);
                    let g_k: Tensor3 = m * (dxi * ch.kappa * ch.c);
                    let moved = SymTensor3::from_matrix(&cki.dot_mat(&matrix_exp(&(-g_k)).transpose()));
                    rk.push(moved - *cki_n);
                }
                let moved = SymTensor3::from_matrix(&ci.dot_mat(&matrix_exp(&(-g_ci * k)).transpose()));
                out.extend((moved - base[0]).components());
                for r in rk {
                    out.extend(r.components());
                }
            }
        }
        Ok(DVector::from_vec(out))
    }

    /// Newton on one substep; `None` signals divergence.
    fn newton(
        &self,
        guess: &[SymTensor3],
        base: &[SymTensor3],
        dxi: f64,
        opts: &CoupledOptions,
        tally: &mut Tally,
    ) -> Result<Option<Vec<SymTensor3>>, StepError> {
        let n = guess.len() * 6;
        let mut x = pack(guess);
        let eval = |x: &DVector<f64>| -> Option<DVector<f64>> {
            let t = unpack(x);
            match self.residual(&t, base, dxi) {
                Ok(r) if r.iter().all(|v| v.is_finite()) => Some(r),
                _ => None,
            }
        };
        let Some(mut r) = eval(&x) else { return Ok(None) };
        let mut norm = r.amax();
        let mut growth = 0;
        let mut iterations = 0;
        let mut last_lu = None;

        while norm >= opts.inner_tolerance {
            if iterations >= opts.max_inner_iterations {
                tally.inner_iterations += iterations;
                return Ok(None);
            }
            let mut jac = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                let h = 1e-8 * x[j].abs().max(1.0);
                let mut xp = x.clone();
                xp[j] += h;
                let Some(rp) = eval(&xp) else {
                    tally.inner_iterations += iterations;
                    return Ok(None);
                };
                jac.set_column(j, &((rp - &r) / h));
            }
            cost::charge_dense_solve(n);
            let lu = jac.lu();
            let Some(dx) = lu.solve(&(-&r)) else {
                tally.inner_iterations += iterations;
                return Ok(None);
            };
            x += dx;
            iterations += 1;
            let Some(r_new) = eval(&x) else {
                tally.inner_iterations += iterations;
                return Ok(None);
            };
            let new_norm = r_new.amax();
            growth = if new_norm > norm { growth + 1 } else { 0 };
            if growth >= 3 || new_norm > 1e6 {
                tally.inner_iterations += iterations;
                return Ok(None);
            }
            r = r_new;
            norm = new_norm;
            last_lu = Some(lu);
        }
        // One polishing step with the last factorization.
        if let Some(lu) = last_lu {
            if let Some(dx) = lu.solve(&(-&r)) {
                cost::charge_dense_solve(n);
                let xp = &x + dx;
                if let Some(rp) = eval(&xp) {
                    if rp.amax() <= norm {
                        x = xp;
                    }
                }
            }
        }
        tally.inner_iterations += iterations;

        let mut out = unpack(&x);
        for t in out.iter_mut() {
            if t.spd_eigen().is_err() {
                return Ok(None);
            }
            if self.scheme == CoupledScheme::Ebmsc {
                *t = t.unimodular()?;
            }
        }
        Ok(Some(out))
    }

    /// Internal variables after an increment `xi`, splitting `[0, ξ]` on
    /// divergence.
    fn solve(
        &self,
        start: &[SymTensor3],
        warm: Option<&[SymTensor3]>,
        xi: f64,
        opts: &CoupledOptions,
        tally: &mut Tally,
    ) -> Result<Vec<SymTensor3>, StepError> {
        if xi == 0.0 {
            tally.subincrements = 1;
            return Ok(start.to_vec());
        }
        if let Some(w) = warm {
            if let Some(x) = self.newton(w, start, xi, opts, tally)? {
                tally.subincrements = 1;
                return Ok(x);
            }
        }
        let mut n_sub = 1;
        while n_sub <= opts.max_subincrements {
            let dxi = xi / n_sub as f64;
            let mut current = start.to_vec();
            let mut ok = true;
            for _ in 0..n_sub {
                match self.newton(&current, &current, dxi, opts, tally)? {
                    Some(next) => current = next,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                tally.subincrements = n_sub;
                return Ok(current);
            }
            n_sub *= 2;
        }
        Err(StepError::InnerDivergence { xi, subincrements: opts.max_subincrements })
    }
}

/// One EBMSC or EM step.
pub fn coupled_step(input: &StepInput, scheme: CoupledScheme, opts: &CoupledOptions) -> Result<StepReport, StepError> {
    input.validate()?;
    let f_trial = trial_overstress(input)?;
    if f_trial <= 0.0 {
        return StepReport::elastic(input);
    }
    let params = input.params;
    let st = input.state_n;
    let c_bar = input.c_np1.unimodular()?;
    let start: Vec<SymTensor3> = std::iter::once(st.ci).chain(st.cki.iter().copied()).collect();

    let tally = RefCell::new(Tally::default());
    let warm: RefCell<Option<Vec<SymTensor3>>> = RefCell::new(None);

    let evaluate = |xi: f64| -> Result<Vec<SymTensor3>, StepError> {
        let problem = XiProblem { scheme, params, c_bar, f2: material::f2(xi, input.dt, st.s, st.sd, params) };
        let guess = warm.borrow().clone();
        let x = problem.solve(&start, guess.as_deref(), xi, opts, &mut tally.borrow_mut())?;
        if xi > 0.0 {
            *warm.borrow_mut() = Some(x.clone());
        }
        Ok(x)
    };
    let residual = |xi: f64| -> Result<f64, StepError> {
        let x = evaluate(xi)?;
        let f2 = material::f2(xi, input.dt, st.s, st.sd, params);
        Ok(material::driving_force_norm_reduced(&c_bar, &x[0], &x[1..], params)? - f2)
    };

    let sol = solve_scalar(residual, rough_xi_estimate(f_trial, input.dt, params), &ScalarTolerances::for_trial(f_trial))?;
    if sol.xi == 0.0 {
        let mut report = StepReport::elastic(input)?;
        report.newton_iterations = sol.iterations;
        return Ok(report);
    }
    let x = evaluate(sol.xi)?;
    let tally = tally.into_inner();

    let (s, sd) = material::update_s_sd(sol.xi, st.s, st.sd, params);
    let state = MaterialState { ci: x[0], cki: x[1..].to_vec(), s, sd };
    let pk2 = material::pk2_stress(&input.c_np1, &state.ci, params)?;
    Ok(StepReport {
        state,
        xi: sol.xi,
        pk2,
        newton_iterations: sol.iterations,
        inner_iterations: tally.inner_iterations,
        relaxation_passes: 0,
        subincrements: tally.subincrements,
        elastic: false,
    })
}

//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pebm_core::experiments::{self, GridSpec, PRESTRAIN_STEPS};
use pebm_core::integrators::{solve_ci_closed_form, z_perturbation_estimate, PebmOptions, ShiftKind};
use pebm_core::loading::{self, PrestrainKind};
use pebm_core::material::BackstressChannel;
use pebm_core::tensor::matrix_exp;
use pebm_core::{Integrator, MaterialParams, MaterialState, StepInput, SymTensor3, Tensor3};

const DET_TOL: f64 = 1e-10;
const EIG_TOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-8;
const CONTROL_MIN: f64 = 1e-4;
const SLOPE_RANGE: (f64, f64) = (0.8, 1.25);
const RATIO_RANGE: (f64, f64) = (1.0 / 3.0, 3.0);
const CONVERGENCE_DTS: [f64; 4] = [10.0, 5.0, 2.5, 1.25];
const RESIDUAL_TOL: f64 = 1e-10;
const ZSCALE_RANGE: (f64, f64) = (4.0 * 0.7, 4.0 * 1.3);
const ROUNDOFF_MIN_RATIO: f64 = 100.0;
const MAX_PEBM_ITERATIONS: usize = 30;
const MIN_COST_RATIO: f64 = 10.0;
const AGREEMENT_FRACTION: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn cards() -> [MaterialParams; 2] {
    [MaterialParams::aa5754o(), MaterialParams::crmo4()]
}

fn random_unimodular_spd(rng: &mut impl Rng, amp: f64) -> SymTensor3 {
    let s = SymTensor3::from_components(std::array::from_fn(|_| rng.gen_range(-amp..amp)));
    SymTensor3::from_matrix(&matrix_exp(&s.to_matrix())).unimodular().unwrap()
}

/// Random walk of `F` with increments up to 10 % per component, kept until
/// 100 plastic steps have been committed. Returns committed states and the
/// largest `ξ`.
fn random_plastic_walk(params: &MaterialParams, integrator: &Integrator, seed: u64) -> Result<(Vec<MaterialState>, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Tensor3::identity();
    let mut state = MaterialState::virgin(params.n_channels());
    let mut committed = Vec::new();
    let mut xi_max = 0.0_f64;
    let mut attempts = 0;
    while committed.len() < 100 {
        attempts += 1;
        if attempts > 5000 {
            return Err(format!("only {} plastic steps in 5000 attempts", committed.len()));
        }
        let size = rng.gen_range(0.0..0.1);
        let h = Tensor3::from_fn(|_, _| rng.gen_range(-size..=size));
        let f_next = (Tensor3::identity() + h) * f;
        if f_next.determinant() <= 0.0 {
            continue;
        }
        let dt = 10f64.powf(rng.gen_range(-1.0..1.0));
        let c_n = SymTensor3::from_matrix(&(f.transpose() * f));
        let c_np1 = SymTensor3::from_matrix(&(f_next.transpose() * f_next));
        let input = StepInput { c_n, c_np1, dt, state_n: &state, params };
        let report = integrator.step(&input).map_err(|e| format!("step {attempts}: {e}"))?;
        f = f_next;
        state = report.state;
        if !report.elastic {
            xi_max = xi_max.max(report.xi);
            committed.push(state.clone());
        }
    }
    Ok((committed, xi_max))
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let mut det_worst = 0.0_f64;
    let mut eig_worst = f64::INFINITY;
    let mut xi_max = 0.0_f64;
    let mut errors = Vec::new();
    for (k, params) in cards().iter().enumerate() {
        for integrator in Integrator::all() {
            match random_plastic_walk(params, &integrator, 1000 + k as u64) {
                Ok((states, xm)) => {
                    xi_max = xi_max.max(xm);
                    for s in &states {
                        det_worst = det_worst.max(s.max_det_defect());
                        eig_worst = eig_worst.min(s.min_relative_eigenvalue());
                    }
                }
                Err(e) => errors.push(format!("{} {}: {e}", params.name, integrator.label())),
            }
        }
    }
    let ok = errors.is_empty();
    let c1 = Outcome {
        pass: ok && det_worst <= DET_TOL,
        detail: format!("max |det - 1| = {det_worst:e} (tol {DET_TOL:e}), max xi = {xi_max:.3}, failures {errors:?}"),
    };
    let c2 = Outcome {
        pass: ok && eig_worst > EIG_TOL,
        detail: format!("min relative eigenvalue = {eig_worst:e} (threshold {EIG_TOL:e})"),
    };
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let program = loading::keypoint_program();
    let params = MaterialParams::aa5754o();
    let seed = 20_240_601;
    let report = experiments::weak_invariance_audit(&program, &params, 300, 10, seed);
    // informational: the shift control with a single relaxation pass
    let nodes = program.sample(300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let single = PebmOptions { relaxation_passes: 1, shift: ShiftKind::NonInvariant, ..Default::default() };
    let single_pass_shift = (0..10)
        .map(|_| experiments::invariance_trial(&nodes, &params, single, &experiments::random_unimodular_f0(&mut rng)))
        .map(|t| t.stress_deviation)
        .fold(0.0, f64::max);
    let pass = report.max_stress_deviation <= INVARIANCE_TOL
        && report.identity_correction_deviation >= CONTROL_MIN
        && report.noninvariant_shift_deviation >= CONTROL_MIN;
    Outcome {
        pass,
        detail: format!(
            "max stress deviation {:e} (tol {INVARIANCE_TOL:e}), internal {:e}; controls: identity correction {:e}, \
             non-invariant shift {:e} (min {CONTROL_MIN:e}); shift control with one relaxation pass {:e}",
            report.max_stress_deviation,
            report.max_internal_deviation,
            report.identity_correction_deviation,
            report.noninvariant_shift_deviation,
            single_pass_shift
        ),
    }
}

struct Errors {
    max: Vec<f64>,
    last: Vec<f64>,
}

/// Max-over-t and final-time errors per material and integrator at the
/// convergence step sizes.
fn convergence_errors() -> Vec<(String, Vec<(String, Errors)>)> {
    let program = loading::keypoint_program();
    let materials = [MaterialParams::aa5754o(), MaterialParams::crmo4().rate_independent()];
    materials
        .iter()
        .map(|params| {
            let t0 = Instant::now();
            let reference = experiments::reference_trajectory(&program, params, experiments::reference_steps(&program));
            assert!(reference.is_complete(), "reference failed: {:?}", reference.failure);
            eprintln!("  reference for {} in {:.1?}", params.name, t0.elapsed());
            let series =
                experiments::convergence_study(&program, params, &reference, &CONVERGENCE_DTS, &Integrator::all());
            let per_integrator = Integrator::all()
                .iter()
                .map(|i| {
                    let mine: Vec<_> = series.iter().filter(|s| s.integrator == i.label()).collect();
                    let max = mine.iter().map(|s| s.max_error()).collect();
                    let last = mine.iter().map(|s| s.points.last().map_or(f64::NAN, |p| p.1)).collect();
                    (i.label().to_string(), Errors { max, last })
                })
                .collect();
            (params.name.clone(), per_integrator)
        })
        .collect()
}

fn criterion_4(errors: &[(String, Vec<(String, Errors)>)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (material, rows) in errors {
        for (label, errs) in rows {
            let slope = experiments::loglog_slope(&CONVERGENCE_DTS, &errs.max);
            pass &= slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1;
            let e: Vec<String> = errs.max.iter().map(|x| format!("{x:.3}")).collect();
            // informational: error at the final time, away from the path corners
            let slope_last = experiments::loglog_slope(&CONVERGENCE_DTS, &errs.last);
            parts.push(format!("{material}/{label} slope {slope:.3} [{}] (final-time slope {slope_last:.3})", e.join(", ")));
        }
    }
    Outcome { pass, detail: format!("required {SLOPE_RANGE:?}; {}", parts.join("; ")) }
}

fn criterion_5(errors: &[(String, Vec<(String, Errors)>)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (material, rows) in errors {
        let at = |label: &str| rows.iter().find(|r| r.0 == label).map(|r| r.1.max[0]).unwrap_or(f64::NAN);
        let ratio = at("pebm") / at("ebmsc");
        pass &= ratio >= RATIO_RANGE.0 && ratio <= RATIO_RANGE.1;
        parts.push(format!("{material} PEBM/EBMSC at dt=10: {ratio:.3}"));
    }
    Outcome { pass, detail: format!("required [1/3, 3]; {}", parts.join("; ")) }
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0_f64;
    let mut errors = Vec::new();
    for base in cards() {
        let params = experiments::isoerror_material(&base);
        for kind in [PrestrainKind::Tension, PrestrainKind::TensionShear] {
            for integrator in Integrator::all() {
                let pre = match experiments::prestrain(kind, &params, &integrator) {
                    Ok(p) => p,
                    Err(e) => {
                        errors.push(e);
                        pass = false;
                        continue;
                    }
                };
                for magnitude in [0.02, 0.04, 0.06] {
                    let (along, against) = experiments::loading_direction_offsets(kind, magnitude);
                    let e_along = experiments::isoerror_point(&pre, &params, &integrator, along);
                    let e_against = experiments::isoerror_point(&pre, &params, &integrator, against);
                    match (e_along, e_against) {
                        (Ok(a), Ok(b)) => {
                            worst = worst.max(a / b);
                            pass &= a < b;
                        }
                        (a, b) => {
                            pass = false;
                            errors.push(format!("{a:?} {b:?}"));
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass,
        detail: format!(
            "largest along/against error ratio {worst:.4} (must be < 1) over 2 materials x 2 prestrains x 3 \
             integrators x 3 magnitudes, {PRESTRAIN_STEPS} prestrain steps; failures {errors:?}"
        ),
    }
}

/// Positive root `z` of `det Y(z) = det Φ`, with `Y` evaluated on the
/// eigenvalues of `A` (it is an isotropic function of `A`).
fn z_oracle(a: &SymTensor3, phi: &SymTensor3, xi_prime: f64) -> f64 {
    let eig = SymmetricEigen::new(a.to_matrix()).eigenvalues;
    let target = phi.to_matrix().determinant().ln();
    let log_det_y = |z: f64| -> f64 {
        eig.iter().map(|&ai| (2.0 * ai / ((z * z + 4.0 * xi_prime * ai).sqrt() + z)).ln()).sum()
    };
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    while log_det_y(lo) <= target {
        lo *= 2.0;
    }
    while log_det_y(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if log_det_y(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p = MaterialParams::aa5754o();

    let mut exact_at_zero = true;
    for _ in 0..50 {
        let ci_n = random_unimodular_spd(&mut rng, 0.4);
        let cki = vec![random_unimodular_spd(&mut rng, 0.4), random_unimodular_spd(&mut rng, 0.4)];
        let c_bar = random_unimodular_spd(&mut rng, 0.4);
        exact_at_zero &= solve_ci_closed_form(&ci_n, &cki, &c_bar, 0.0, 120.0, &p).unwrap() == ci_n;
    }

    // No kinematic hardening: Ci (1 − β Δt) = ⁿCi + (2ξμ/𝔉₂) C̄ with det Ci = 1.
    let mut q = p.clone();
    q.channels = vec![BackstressChannel { c: 0.0, kappa: 0.0 }; 2];
    let mut c0_residual = 0.0_f64;
    for _ in 0..50 {
        let ci_n = random_unimodular_spd(&mut rng, 0.4);
        let c_bar = random_unimodular_spd(&mut rng, 0.4);
        let xi = rng.gen_range(0.0..0.2);
        let f2 = rng.gen_range(50.0..400.0);
        let ci = solve_ci_closed_form(&ci_n, &[SymTensor3::IDENTITY; 2], &c_bar, xi, f2, &q).unwrap();
        let rhs = (ci_n + c_bar * (2.0 * xi * q.mu / f2)).to_matrix();
        let cim = ci.to_matrix();
        let lambda = cim.dot(&rhs) / cim.dot(&cim);
        let r = (cim * lambda - rhs).norm() / rhs.norm();
        c0_residual = c0_residual.max(r).max((cim.determinant() - 1.0).abs());
    }

    let mut scale_worst: (f64, f64) = (f64::INFINITY, 0.0);
    for _ in 0..20 {
        let a = SymTensor3::from_matrix(&matrix_exp(&random_unimodular_spd(&mut rng, 0.5).to_matrix()))
            * rng.gen_range(0.5..2.0);
        let phi = random_unimodular_spd(&mut rng, 0.5) * rng.gen_range(0.5..2.0);
        let err: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&xp| (z_perturbation_estimate(&a, &phi, xp) - z_oracle(&a, &phi, xp)).abs())
            .collect();
        for w in err.windows(2) {
            let ratio = w[0] / w[1];
            scale_worst = (scale_worst.0.min(ratio), scale_worst.1.max(ratio));
        }
    }
    let pass = exact_at_zero
        && c0_residual <= RESIDUAL_TOL
        && scale_worst.0 >= ZSCALE_RANGE.0
        && scale_worst.1 <= ZSCALE_RANGE.1;
    Outcome {
        pass,
        detail: format!(
            "xi = 0 exact: {exact_at_zero}; c = 0 residual {c0_residual:e} (tol {RESIDUAL_TOL:e}); z-error ratio on \
             halving xi' in [{:.3}, {:.3}] (required [{:.1}, {:.1}])",
            scale_worst.0, scale_worst.1, ZSCALE_RANGE.0, ZSCALE_RANGE.1
        ),
    }
}

fn criterion_8() -> Outcome {
    let report = experiments::roundoff_study(&[1e-10], 50, 88);
    let row = &report.rows[0];
    Outcome {
        pass: row.min_ratio >= ROUNDOFF_MIN_RATIO,
        detail: format!(
            "xi' = 1e-10, 50 samples: min naive/stable deviation ratio {:.3e} (min {ROUNDOFF_MIN_RATIO}); stable {:e}, \
             naive {:e}",
            row.min_ratio, row.stable_deviation, row.naive_deviation
        ),
    }
}

fn criterion_9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for base in cards() {
        let params = experiments::isoerror_material(&base);
        for kind in [PrestrainKind::Tension, PrestrainKind::TensionShear] {
            let grids: Vec<_> = Integrator::all()
                .iter()
                .map(|i| experiments::iteration_count_map(kind, &params, &GridSpec::default(), i))
                .collect();
            let grids: Vec<_> = match grids.into_iter().collect::<Result<Vec<_>, _>>() {
                Ok(g) => g,
                Err(e) => {
                    pass = false;
                    parts.push(format!("{} {kind}: {e}", params.name));
                    continue;
                }
            };
            let pebm = &grids[0];
            let failures: Vec<usize> = grids.iter().map(|g| g.failure_count()).collect();
            let max_it = pebm.max_iterations();
            let mut min_ratio = f64::INFINITY;
            let mut below = 0;
            let mut plastic = 0;
            for (i, row) in pebm.cells.iter().enumerate() {
                for (j, cell) in row.iter().enumerate() {
                    for other in &grids[1..] {
                        let o = &other.cells[i][j];
                        if cell.xi > 0.0 && o.xi > 0.0 {
                            plastic += 1;
                            let r = o.matrix_ops as f64 / cell.matrix_ops as f64;
                            min_ratio = min_ratio.min(r);
                            below += usize::from(r < MIN_COST_RATIO);
                        }
                    }
                }
            }
            pass &= failures.iter().all(|&f| f == 0) && max_it <= MAX_PEBM_ITERATIONS && min_ratio >= MIN_COST_RATIO;
            parts.push(format!(
                "{} {kind}: failures pebm/ebmsc/em {failures:?}, pebm max iterations {max_it}, min cost ratio \
                 {min_ratio:.2}, {below} of {plastic} plastic cell comparisons below {MIN_COST_RATIO}",
                params.name
            ));
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_10() -> Outcome {
    let program = loading::shear_program(0.07, &[], 10.0).unwrap();
    let n = (program.duration / 0.01).round() as usize;
    let mut pass = true;
    let mut parts = Vec::new();
    for params in cards() {
        let runs: Vec<_> = Integrator::all().iter().map(|i| experiments::simulate(&program, &params, i, n)).collect();
        if runs.iter().any(|r| !r.is_complete()) {
            pass = false;
            parts.push(format!("{}: run failed", params.name));
            continue;
        }
        let peak = runs[0].peak_stress();
        let mut worst = 0.0_f64;
        for a in 0..3 {
            for b in a + 1..3 {
                for (p, q) in runs[a].points.iter().zip(&runs[b].points) {
                    worst = worst.max(experiments::stress_distance(&p.cauchy, &q.cauchy));
                }
            }
        }
        let plastic = runs[0].points.iter().filter(|p| !p.elastic).count();
        pass &= worst <= AGREEMENT_FRACTION * peak && plastic > 0;
        parts.push(format!(
            "{}: max discrepancy {worst:.4e} MPa = {:.3e} of peak {peak:.1} MPa, {plastic} plastic steps",
            params.name,
            worst / peak
        ));
    }
    Outcome { pass, detail: format!("limit {AGREEMENT_FRACTION}; {}", parts.join("; ")) }
}

fn report(n: usize, name: &str, outcome: &Outcome, elapsed: std::time::Duration) -> bool {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} [{tag}] {name} ({elapsed:.1?}): {}", outcome.detail);
    outcome.pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, std::time::Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn main() -> ExitCode {
    let mut all = true;

    let ((c1, c2), t) = timed(criteria_1_and_2);
    all &= report(1, "incompressibility of committed internal tensors", &c1, t);
    all &= report(2, "positive definiteness of committed internal tensors", &c2, t);

    let (c3, t) = timed(criterion_3);
    all &= report(3, "weak invariance with negative controls", &c3, t);

    let (errors, t) = timed(convergence_errors);
    all &= report(4, "first-order convergence on the key-point program", &criterion_4(&errors), t);
    all &= report(5, "PEBM and EBMSC accuracy at dt = 10 s", &criterion_5(&errors), t);

    let (c6, t) = timed(criterion_6);
    all &= report(6, "smaller error along the recent loading direction", &c6, t);

    let (c7, t) = timed(criterion_7);
    all &= report(7, "exactness anchors of the closed-form corrector", &c7, t);

    let (c8, t) = timed(criterion_8);
    all &= report(8, "round-off of naive versus stable root", &c8, t);

    let (c9, t) = timed(criterion_9);
    all &= report(9, "robustness and cost on the iteration grids", &c9, t);

    let (c10, t) = timed(criterion_10);
    all &= report(10, "cross-integrator agreement at dt = 0.01 s", &c10, t);

    if all {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: some criteria fail");
        ExitCode::FAILURE
    }
}

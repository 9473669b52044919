use nalgebra::{Rotation3, Vector3};

use pebm_core::experiments::{self, GridSpec};
use pebm_core::integrators::{self, PebmOptions};
use pebm_core::loading::{self, Node, PrestrainKind, TimeKind};
use pebm_core::{material, Integrator, MaterialParams, MaterialState, StepInput, SymTensor3, Tensor3};

fn uniaxial(e: f64) -> Tensor3 {
    let l = 1.0 + e;
    Tensor3::from_diagonal(&Vector3::new(l, l.powf(-0.5), l.powf(-0.5)))
}

fn node(t: f64, f: Tensor3) -> Node {
    Node { t, f, c: SymTensor3::from_matrix(&(f.transpose() * f)) }
}

/// Uniaxial stretch at which the virgin material reaches the yield surface.
fn yield_stretch(p: &MaterialParams) -> f64 {
    let st = MaterialState::virgin(p.n_channels());
    let f = |e: f64| {
        let input = StepInput { c_n: node(0.0, uniaxial(0.0)).c, c_np1: node(1.0, uniaxial(e)).c, dt: 1.0, state_n: &st, params: p };
        integrators::trial_overstress(&input).unwrap()
    };
    let (mut lo, mut hi) = (0.0, 0.1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// One step from `e0` to `e1` with the given integrator and its Cauchy
/// stress, together with the 300-substep EBMSC result.
fn step_and_oracle(p: &MaterialParams, integrator: &Integrator, e0: f64, e1: f64, dt: f64) -> (SymTensor3, SymTensor3, f64) {
    let st = MaterialState::virgin(p.n_channels());
    let pre = experiments::simulate_nodes(&[node(0.0, uniaxial(0.0)), node(dt, uniaxial(e0))], &st, p, &Integrator::ebmsc());
    let st0 = pre.last().state.clone();
    let (a, b) = (node(0.0, uniaxial(e0)), node(dt, uniaxial(e1)));
    let input = StepInput { c_n: a.c, c_np1: b.c, dt, state_n: &st0, params: p };
    let r = integrator.step(&input).unwrap();
    let sigma = material::cauchy_stress(&b.f, &r.pk2).unwrap();

    let program = loading::linear_program(a.f, b.f, dt, TimeKind::Physical);
    let fine = experiments::simulate_nodes(&program.sample(300), &st0, p, &Integrator::ebmsc());
    assert!(fine.is_complete());
    (sigma, fine.last().cauchy, r.xi)
}

#[test]
fn small_step_past_yield_has_second_order_local_error() {
    let p = MaterialParams::aa5754o();
    let ey = yield_stretch(&p);
    let rel = |integrator: &Integrator, de: f64| {
        let (sigma, exact, xi) = step_and_oracle(&p, integrator, ey, ey + de, 1.0);
        assert!(xi > 0.0);
        (sigma - exact).norm() / exact.norm()
    };
    for de in [1e-3, 1e-4, 1e-5] {
        let pebm = rel(&Integrator::pebm(), de);
        let ebmsc = rel(&Integrator::ebmsc(), de);
        assert!((pebm - ebmsc).abs() <= 0.01 * ebmsc, "{pebm:e} vs {ebmsc:e}");
    }
    let coarse = rel(&Integrator::pebm(), 1e-4);
    let fine = rel(&Integrator::pebm(), 1e-5);
    assert!(fine < 1e-5, "{fine:e}");
    assert!(coarse / fine > 50.0, "{coarse:e} / {fine:e}");
}

#[test]
fn large_step_error_is_bounded_by_ebmsc() {
    let p = MaterialParams::crmo4().rate_independent();
    let ey = yield_stretch(&p);
    let (s_pebm, exact, xi) = step_and_oracle(&p, &Integrator::pebm(), ey, ey + 0.1, 1.0);
    let (s_ebmsc, _, _) = step_and_oracle(&p, &Integrator::ebmsc(), ey, ey + 0.1, 1.0);
    assert!(xi > 0.05, "xi = {xi}");
    let e_pebm = (s_pebm - exact).norm();
    let e_ebmsc = (s_ebmsc - exact).norm();
    assert!(e_pebm <= 3.0 * e_ebmsc, "{e_pebm} vs {e_ebmsc}");
}

#[test]
fn identical_configurations_give_elastic_step() {
    let p = MaterialParams::aa5754o();
    let st = MaterialState::virgin(2);
    let c = SymTensor3::IDENTITY;
    for integrator in Integrator::all() {
        let r = integrator.step(&StepInput { c_n: c, c_np1: c, dt: 1.0, state_n: &st, params: &p }).unwrap();
        assert!(r.elastic);
        assert_eq!(r.state, st);
    }
}

#[test]
fn each_relaxation_pass_adds_iterations() {
    let p = MaterialParams::aa5754o();
    let ey = yield_stretch(&p);
    let st = MaterialState::virgin(2);
    let input = StepInput {
        c_n: node(0.0, uniaxial(0.0)).c,
        c_np1: node(1.0, uniaxial(ey + 0.02)).c,
        dt: 1.0,
        state_n: &st,
        params: &p,
    };
    let one = Integrator::Pebm(PebmOptions { relaxation_passes: 1, ..Default::default() }).step(&input).unwrap();
    let three = Integrator::pebm().step(&input).unwrap();
    assert!(three.newton_iterations >= one.newton_iterations);
    assert_eq!(three.relaxation_passes, 3);
}

#[test]
fn elastic_grid_cell_needs_no_iterations() {
    let p = experiments::isoerror_material(&MaterialParams::aa5754o());
    let grid = GridSpec { min: -0.002, max: 0.002, n: 3 };
    for integrator in Integrator::all() {
        let g = experiments::iteration_count_map(PrestrainKind::Tension, &p, &grid, &integrator).unwrap();
        // slight unloading in F11 stays inside the yield surface
        let c = &g.cells[0][1];
        assert_eq!(c.newton_iterations, 0, "{}", integrator.label());
        assert_eq!(g.failure_count(), 0);
    }
}

#[test]
fn isoerror_grid_is_deterministic_and_zero_at_endpoint() {
    let p = experiments::isoerror_material(&MaterialParams::crmo4());
    let grid = GridSpec { min: -0.02, max: 0.02, n: 3 };
    let a = experiments::isoerror_map(PrestrainKind::TensionShear, &p, &grid, &Integrator::pebm()).unwrap();
    let b = experiments::isoerror_map(PrestrainKind::TensionShear, &p, &grid, &Integrator::pebm()).unwrap();
    let bits = |g: &experiments::IsoErrorGrid| g.errors.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert!(a.errors[1][1] <= 1e-10, "{}", a.errors[1][1]);
    assert!(a.failures.is_empty());
}

#[test]
fn invariance_trial_trivial_transformations() {
    let p = MaterialParams::aa5754o();
    let nodes = loading::keypoint_program().sample(30);
    let id = experiments::invariance_trial(&nodes, &p, PebmOptions::default(), &Tensor3::identity());
    assert_eq!(id.stress_deviation, 0.0);
    assert_eq!(id.internal_deviation, 0.0);
    let q = Rotation3::from_euler_angles(0.4, -1.1, 2.0).into_inner();
    let rot = experiments::invariance_trial(&nodes, &p, PebmOptions::default(), &q);
    assert!(rot.stress_deviation <= 1e-10, "{}", rot.stress_deviation);
}

#[test]
fn audit_is_reproducible_for_fixed_seed() {
    let p = MaterialParams::aa5754o();
    let program = loading::keypoint_program();
    let a = experiments::weak_invariance_audit(&program, &p, 30, 2, 5);
    let b = experiments::weak_invariance_audit(&program, &p, 30, 2, 5);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.seed, 5);
}

#[test]
fn reference_self_convergence_bounds_its_error() {
    // short history so that the check stays cheap
    let p = MaterialParams::aa5754o();
    let program = loading::keypoint_program().with_duration(3.0).unwrap();
    let fine = experiments::reference_trajectory(&program, &p, 1200);
    let half = experiments::reference_trajectory(&program, &p, 600);
    let coarse = experiments::simulate(&program, &p, &Integrator::ebmsc(), 12);
    let self_err = experiments::error_series(&half, &fine).max_error();
    let err = experiments::error_series(&coarse, &fine).max_error();
    assert!(self_err < err, "{self_err} vs {err}");
}

#[test]
fn random_f0_is_unimodular() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let f0 = experiments::random_unimodular_f0(&mut rng);
        assert!((f0.determinant() - 1.0).abs() <= 1e-14);
    }
}

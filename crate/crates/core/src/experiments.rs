//! Drivers for accuracy, robustness and invariance studies.
//!
//! Independent tasks (grid cells, random trials, integrators) run on the
//! rayon pool and are collected in input order, so results do not depend on
//! scheduling.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::integrators::{
    z_perturbation_estimate, CiCorrection, Integrator, PebmOptions, ShiftKind, StepError, StepInput, StepReport,
};
use crate::integrators::{y_naive, y_stable};
use crate::loading::{self, DeformationProgram, Node, PrestrainKind};
use crate::material::{self, MaterialParams, MaterialState};
use crate::tensor::{cost, SymTensor3, Tensor3};

/// Step size of the reference solution for the key-point program, in s.
pub const REFERENCE_DT: f64 = 0.0025;
/// Substeps of the single-step oracle.
pub const ORACLE_SUBSTEPS: usize = 300;
/// Steps used to apply the iso-error prestrain.
pub const PRESTRAIN_STEPS: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub f: Tensor3,
    pub cauchy: SymTensor3,
    pub state: MaterialState,
    pub xi: f64,
    pub newton_iterations: usize,
    pub inner_iterations: usize,
    pub subincrements: usize,
    pub elastic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepFailure {
    /// Index of the failed step (the node it was heading to).
    pub step: usize,
    pub t: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub integrator: String,
    pub dt: f64,
    /// One point per node, starting with the initial state.
    pub points: Vec<TrajectoryPoint>,
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory holds the initial point")
    }

    pub fn peak_stress(&self) -> f64 {
        self.points.iter().map(|p| p.cauchy.norm()).fold(0.0, f64::max)
    }
}

fn point(node: &Node, state: MaterialState, pk2: &SymTensor3, report: Option<&StepReport>) -> Result<TrajectoryPoint, StepError> {
    Ok(TrajectoryPoint {
        t: node.t,
        f: node.f,
        cauchy: material::cauchy_stress(&node.f, pk2)?,
        state,
        xi: report.map_or(0.0, |r| r.xi),
        newton_iterations: report.map_or(0, |r| r.newton_iterations),
        inner_iterations: report.map_or(0, |r| r.inner_iterations),
        subincrements: report.map_or(0, |r| r.subincrements),
        elastic: report.map_or(true, |r| r.elastic),
    })
}

/// Integrates along given nodes from `state0`. A failing step ends the run
/// and is recorded; the points computed so far are kept.
pub fn simulate_nodes(
    nodes: &[Node],
    state0: &MaterialState,
    params: &MaterialParams,
    integrator: &Integrator,
) -> Trajectory {
    let dt = if nodes.len() > 1 { nodes[1].t - nodes[0].t } else { 0.0 };
    let mut traj = Trajectory { integrator: integrator.label().into(), dt, points: Vec::with_capacity(nodes.len()), failure: None };
    let pk2 = match material::pk2_stress(&nodes[0].c, &state0.ci, params) {
        Ok(t) => t,
        Err(e) => {
            traj.failure = Some(StepFailure { step: 0, t: nodes[0].t, message: e.to_string() });
            return traj;
        }
    };
    traj.points.push(point(&nodes[0], state0.clone(), &pk2, None).expect("initial node has det F > 0"));

    for (i, w) in nodes.windows(2).enumerate() {
        let prev = traj.points.last().expect("non-empty");
        let input = StepInput { c_n: w[0].c, c_np1: w[1].c, dt: w[1].t - w[0].t, state_n: &prev.state, params };
        let result = integrator.step(&input).and_then(|r| point(&w[1], r.state.clone(), &r.pk2, Some(&r)));
        match result {
            Ok(p) => traj.points.push(p),
            Err(e) => {
                traj.failure = Some(StepFailure { step: i + 1, t: w[1].t, message: e.to_string() });
                break;
            }
        }
    }
    traj
}

/// Integrates a program with `n_steps` uniform steps from the virgin state.
pub fn simulate(program: &DeformationProgram, params: &MaterialParams, integrator: &Integrator, n_steps: usize) -> Trajectory {
    simulate_nodes(&program.sample(n_steps), &MaterialState::virgin(params.n_channels()), params, integrator)
}

/// EBMSC solution with a very small step, used as the exact solution.
pub fn reference_trajectory(program: &DeformationProgram, params: &MaterialParams, n_steps: usize) -> Trajectory {
    simulate(program, params, &Integrator::ebmsc(), n_steps)
}

/// Number of steps that gives the reference step size on a program.
pub fn reference_steps(program: &DeformationProgram) -> usize {
    (program.duration / REFERENCE_DT).round() as usize
}

/// `‖T_num(t) − T_exact(t)‖` at the nodes of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorSeries {
    pub integrator: String,
    pub dt: f64,
    pub points: Vec<(f64, f64)>,
    pub failure: Option<String>,
}

impl ErrorSeries {
    pub fn max_error(&self) -> f64 {
        if self.failure.is_some() {
            return f64::NAN;
        }
        self.points.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Compares a run with a reference whose nodes refine the run's nodes.
pub fn error_series(run: &Trajectory, reference: &Trajectory) -> ErrorSeries {
    let n_run = run.points.len().saturating_sub(1).max(1);
    let n_ref = reference.points.len() - 1;
    let ratio = n_ref / n_run;
    assert_eq!(ratio * n_run, n_ref, "reference nodes must refine the run nodes");
    let points = run
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.t, (p.cauchy - reference.points[i * ratio].cauchy).norm()))
        .collect();
    ErrorSeries {
        integrator: run.integrator.clone(),
        dt: run.dt,
        points,
        failure: run.failure.as_ref().map(|f| f.message.clone()),
    }
}

/// Error curves for every integrator and step size, ordered integrator-major.
pub fn convergence_study(
    program: &DeformationProgram,
    params: &MaterialParams,
    reference: &Trajectory,
    dts: &[f64],
    integrators: &[Integrator],
) -> Vec<ErrorSeries> {
    let jobs: Vec<(&Integrator, f64)> = integrators.iter().flat_map(|i| dts.iter().map(move |&dt| (i, dt))).collect();
    jobs.par_iter()
        .map(|&(integrator, dt)| {
            let n = (program.duration / dt).round() as usize;
            error_series(&simulate(program, params, integrator, n), reference)
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Material used for iso-error studies: no viscosity, no isotropic hardening
/// and a raised yield stress in its place.
pub fn isoerror_material(base: &MaterialParams) -> MaterialParams {
    let k = isoerror_yield_stress(base).unwrap_or(base.yield_stress);
    base.clone().rate_independent().with_perfect_isotropy(k)
}

/// Raised yield stress for the bundled materials.
pub fn isoerror_yield_stress(base: &MaterialParams) -> Option<f64> {
    match base.name.as_str() {
        "AA5754-O" => Some(178.8),
        "42CrMo4" => Some(400.0),
        _ => None,
    }
}

/// Increments `ΔF11 × ΔF12` around the prestrain endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: -0.06, max: 0.06, n: 25 }
    }
}

impl GridSpec {
    pub fn offsets(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![0.5 * (self.min + self.max)];
        }
        (0..self.n).map(|i| self.min + (self.max - self.min) * i as f64 / (self.n - 1) as f64).collect()
    }
}

/// State after the prestrain, together with the endpoint node.
#[derive(Clone, Debug, PartialEq)]
pub struct Prestrained {
    pub kind: PrestrainKind,
    pub state: MaterialState,
    pub node: Node,
}

pub fn prestrain(kind: PrestrainKind, params: &MaterialParams, integrator: &Integrator) -> Result<Prestrained, String> {
    let program = loading::isoerror_prestrain(kind);
    let traj = simulate(&program, params, integrator, PRESTRAIN_STEPS);
    if let Some(f) = traj.failure {
        return Err(format!("prestrain failed at step {}: {}", f.step, f.message));
    }
    let last = traj.last();
    Ok(Prestrained { kind, state: last.state.clone(), node: program.node(program.duration) })
}

fn target_node(pre: &Prestrained, offset: (f64, f64)) -> (DeformationProgram, Node) {
    let end = pre.kind.endpoint();
    let target = (end.0 + offset.0, end.1 + offset.1);
    let segment = loading::tension_shear_segment(end, target);
    let node = segment.node(segment.duration);
    (segment, node)
}

/// Cauchy stress after the finely subdivided oracle step.
pub fn oracle_step(
    segment: &DeformationProgram,
    state: &MaterialState,
    params: &MaterialParams,
    substeps: usize,
) -> Result<SymTensor3, String> {
    let traj = simulate_nodes(&segment.sample(substeps), state, params, &Integrator::ebmsc());
    match traj.failure {
        Some(f) => Err(f.message),
        None => Ok(traj.last().cauchy),
    }
}

/// Single-step error at one increment from the prestrain endpoint.
pub fn isoerror_point(
    pre: &Prestrained,
    params: &MaterialParams,
    integrator: &Integrator,
    offset: (f64, f64),
) -> Result<f64, String> {
    let (segment, node) = target_node(pre, offset);
    let input = StepInput { c_n: pre.node.c, c_np1: node.c, dt: segment.duration, state_n: &pre.state, params };
    let report = integrator.step(&input).map_err(|e| e.to_string())?;
    let sigma = material::cauchy_stress(&node.f, &report.pk2).map_err(|e| e.to_string())?;
    let exact = oracle_step(&segment, &pre.state, params, ORACLE_SUBSTEPS)?;
    Ok((sigma - exact).norm())
}

fn cell_offsets(grid: &GridSpec) -> Vec<(usize, usize, f64, f64)> {
    let axis = grid.offsets();
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for (i, &d11) in axis.iter().enumerate() {
        for (j, &d12) in axis.iter().enumerate() {
            out.push((i, j, d11, d12));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoErrorGrid {
    pub kind: String,
    pub integrator: String,
    /// Absolute `F11` values of the rows.
    pub f11: Vec<f64>,
    /// Absolute `F12` values of the columns.
    pub f12: Vec<f64>,
    /// Error in MPa; NaN where the step or the oracle failed.
    pub errors: Vec<Vec<f64>>,
    pub failures: Vec<String>,
}

fn axes(kind: PrestrainKind, grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let end = kind.endpoint();
    let off = grid.offsets();
    (off.iter().map(|d| end.0 + d).collect(), off.iter().map(|d| end.1 + d).collect())
}

pub fn isoerror_map(
    kind: PrestrainKind,
    params: &MaterialParams,
    grid: &GridSpec,
    integrator: &Integrator,
) -> Result<IsoErrorGrid, String> {
    let pre = prestrain(kind, params, integrator)?;
    let cells = cell_offsets(grid);
    let values: Vec<Result<f64, String>> =
        cells.par_iter().map(|&(_, _, d11, d12)| isoerror_point(&pre, params, integrator, (d11, d12))).collect();
    let (f11, f12) = axes(kind, grid);
    let mut errors = vec![vec![f64::NAN; grid.n]; grid.n];
    let mut failures = Vec::new();
    for (&(i, j, _, _), v) in cells.iter().zip(values) {
        match v {
            Ok(e) => errors[i][j] = e,
            Err(msg) => failures.push(format!("F11={} F12={}: {msg}", f11[i], f12[j])),
        }
    }
    Ok(IsoErrorGrid { kind: kind.label().into(), integrator: integrator.label().into(), f11, f12, errors, failures })
}

/// Per-cell effort of one integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CellEffort {
    pub newton_iterations: usize,
    pub inner_iterations: usize,
    pub subincrements: usize,
    pub xi: f64,
    /// 3×3 matrix operations, dense solves converted to the same unit.
    pub matrix_ops: u64,
    pub failed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationGrid {
    pub kind: String,
    pub integrator: String,
    pub f11: Vec<f64>,
    pub f12: Vec<f64>,
    pub cells: Vec<Vec<CellEffort>>,
    pub failures: Vec<String>,
}

impl IterationGrid {
    pub fn max_iterations(&self) -> usize {
        self.cells.iter().flatten().map(|c| c.newton_iterations).max().unwrap_or(0)
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.failed).count()
    }
}

/// Newton iterations and matrix work of the final step, per grid cell.
pub fn iteration_count_map(
    kind: PrestrainKind,
    params: &MaterialParams,
    grid: &GridSpec,
    integrator: &Integrator,
) -> Result<IterationGrid, String> {
    let pre = prestrain(kind, params, integrator)?;
    let cells = cell_offsets(grid);
    let efforts: Vec<(CellEffort, Option<String>)> = cells
        .par_iter()
        .map(|&(_, _, d11, d12)| {
            let (segment, node) = target_node(&pre, (d11, d12));
            let input = StepInput { c_n: pre.node.c, c_np1: node.c, dt: segment.duration, state_n: &pre.state, params };
            let (result, ops) = cost::measure(|| integrator.step(&input));
            match result {
                Ok(r) => (
                    CellEffort {
                        newton_iterations: r.newton_iterations,
                        inner_iterations: r.inner_iterations,
                        subincrements: r.subincrements,
                        xi: r.xi,
                        matrix_ops: ops,
                        failed: false,
                    },
                    None,
                ),
                Err(e) => (CellEffort { matrix_ops: ops, failed: true, ..Default::default() }, Some(e.to_string())),
            }
        })
        .collect();
    let (f11, f12) = axes(kind, grid);
    let mut out = vec![vec![CellEffort::default(); grid.n]; grid.n];
    let mut failures = Vec::new();
    for (&(i, j, _, _), (effort, msg)) in cells.iter().zip(efforts) {
        out[i][j] = effort;
        if let Some(m) = msg {
            failures.push(format!("F11={} F12={}: {m}", f11[i], f12[j]));
        }
    }
    Ok(IterationGrid { kind: kind.label().into(), integrator: integrator.label().into(), f11, f12, cells: out, failures })
}

/// Random `F0` with `det F0 = 1`: identity plus uniform entries in
/// `[-1, 1]`, projected to unit determinant.
pub fn random_unimodular_f0(rng: &mut impl Rng) -> Tensor3 {
    loop {
        let f = Tensor3::identity() + Tensor3::from_fn(|_, _| rng.gen_range(-1.0..=1.0));
        let d = f.determinant();
        if d > 0.05 {
            return f / d.cbrt();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceTrial {
    pub f0: [[f64; 3]; 3],
    /// `max_t ‖ΔT‖ / max_t ‖T‖`.
    pub stress_deviation: f64,
    /// Largest relative mismatch of the congruence-transformed internal tensors.
    pub internal_deviation: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub seed: u64,
    pub n_steps: usize,
    pub program: String,
    pub material: String,
    pub trials: Vec<InvarianceTrial>,
    pub max_stress_deviation: f64,
    pub max_internal_deviation: f64,
    /// Same audit with the identity-direction incompressibility correction.
    pub identity_correction_deviation: f64,
    /// Same audit with the non-invariant push-forward.
    pub noninvariant_shift_deviation: f64,
}

fn matrix_rows(m: &Tensor3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Runs the original and the reference-changed problem side by side.
pub fn invariance_trial(
    nodes: &[Node],
    params: &MaterialParams,
    opts: PebmOptions,
    f0: &Tensor3,
) -> InvarianceTrial {
    let integrator = Integrator::Pebm(opts);
    let f0_inv = f0.try_inverse().expect("unimodular F0 is invertible");
    let m = f0_inv.transpose();
    let moved: Vec<Node> = nodes
        .iter()
        .map(|n| {
            let f = n.f * f0_inv;
            Node { t: n.t, f, c: n.c.congruence(&m) }
        })
        .collect();
    let virgin = MaterialState::virgin(params.n_channels());
    let base = simulate_nodes(nodes, &virgin, params, &integrator);
    let other = simulate_nodes(&moved, &virgin.congruence(&m), params, &integrator);
    let failure = base.failure.as_ref().or(other.failure.as_ref()).map(|f| f.message.clone());
    if failure.is_some() {
        return InvarianceTrial { f0: matrix_rows(f0), stress_deviation: f64::NAN, internal_deviation: f64::NAN, failure };
    }
    let peak = base.peak_stress().max(f64::MIN_POSITIVE);
    let mut stress = 0.0_f64;
    let mut internal = 0.0_f64;
    for (a, b) in base.points.iter().zip(&other.points) {
        stress = stress.max((a.cauchy - b.cauchy).norm());
        internal = internal.max(b.state.ci.rel_diff(&a.state.ci.congruence(&m)));
        for (ka, kb) in a.state.cki.iter().zip(&b.state.cki) {
            internal = internal.max(kb.rel_diff(&ka.congruence(&m)));
        }
    }
    InvarianceTrial { f0: matrix_rows(f0), stress_deviation: stress / peak, internal_deviation: internal, failure: None }
}

pub fn weak_invariance_audit(
    program: &DeformationProgram,
    params: &MaterialParams,
    n_steps: usize,
    n_f0: usize,
    seed: u64,
) -> AuditReport {
    let nodes = program.sample(n_steps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0s: Vec<Tensor3> = (0..n_f0).map(|_| random_unimodular_f0(&mut rng)).collect();
    let trials: Vec<InvarianceTrial> =
        f0s.par_iter().map(|f0| invariance_trial(&nodes, params, PebmOptions::default(), f0)).collect();

    let control = |opts: PebmOptions| {
        f0s.par_iter()
            .map(|f0| invariance_trial(&nodes, params, opts, f0).stress_deviation)
            .reduce(|| 0.0, nan_max)
    };
    let identity = control(PebmOptions { correction: CiCorrection::Identity, ..Default::default() });
    let shift = control(PebmOptions { shift: ShiftKind::NonInvariant, ..Default::default() });

    let max_stress = trials.iter().map(|t| t.stress_deviation).fold(0.0, nan_max);
    let max_internal = trials.iter().map(|t| t.internal_deviation).fold(0.0, nan_max);
    AuditReport {
        seed,
        n_steps,
        program: program.label.clone(),
        material: params.name.clone(),
        trials,
        max_stress_deviation: max_stress,
        max_internal_deviation: max_internal,
        identity_correction_deviation: identity,
        noninvariant_shift_deviation: shift,
    }
}

/// `max` that lets NaN win, so that failures are never hidden.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundoffRow {
    pub xi_prime: f64,
    /// Largest relative deviation of the stable form from the small-`ξ'` series.
    pub stable_deviation: f64,
    /// Same for the naive form.
    pub naive_deviation: f64,
    /// Smallest per-sample ratio naive/stable.
    pub min_ratio: f64,
    /// Largest relative difference between the two forms.
    pub forms_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundoffReport {
    pub seed: u64,
    pub n_samples: usize,
    pub rows: Vec<RoundoffRow>,
}

/// SPD tensor with unit determinant and condition number at most `max_cond`.
pub fn random_spd_bounded(rng: &mut impl Rng, max_cond: f64) -> SymTensor3 {
    let half = max_cond.ln() / 2.0;
    loop {
        let l1 = rng.gen_range(-half..half);
        let l2 = rng.gen_range(-half..half);
        let l = Vector3::new(l1.exp(), l2.exp(), (-l1 - l2).exp());
        if l.max() / l.min() > max_cond {
            continue;
        }
        let axis = nalgebra::Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let q = nalgebra::Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::PI)).into_inner();
        return SymTensor3::from_matrix(&(q * Tensor3::from_diagonal(&l) * q.transpose()));
    }
}

/// Three-term expansion of the positive root of `zY = A − ξ'Y²` in `ξ'`.
pub fn y_small_xi_series(a: &SymTensor3, z: f64, xi_prime: f64) -> SymTensor3 {
    let a2 = SymTensor3::from_matrix(&(a.to_matrix() * a.to_matrix()));
    let a3 = SymTensor3::from_matrix(&(a2.to_matrix() * a.to_matrix()));
    *a * (1.0 / z) - a2 * (xi_prime / z.powi(3)) + a3 * (2.0 * xi_prime * xi_prime / z.powi(5))
}

/// Compares the naive and the stable evaluation of `Y` with its small-`ξ'`
/// expansion on random SPD tensors.
pub fn roundoff_study(xi_primes: &[f64], n_samples: usize, seed: u64) -> RoundoffReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<SymTensor3> = (0..n_samples).map(|_| random_spd_bounded(&mut rng, 1e3)).collect();
    let rows = xi_primes
        .iter()
        .map(|&xp| {
            let mut row =
                RoundoffRow { xi_prime: xp, stable_deviation: 0.0, naive_deviation: 0.0, min_ratio: f64::INFINITY, forms_difference: 0.0 };
            for a in &samples {
                let z = z_perturbation_estimate(a, &SymTensor3::IDENTITY, xp);
                let exact = y_small_xi_series(a, z, xp);
                let stable = y_stable(a, z, xp).expect("SPD argument");
                let naive = y_naive(a, z, xp).expect("SPD argument");
                let ds = stable.rel_diff(&exact);
                let dn = naive.rel_diff(&exact);
                row.stable_deviation = row.stable_deviation.max(ds);
                row.naive_deviation = row.naive_deviation.max(dn);
                row.min_ratio = row.min_ratio.min(dn / ds.max(f64::EPSILON * 1e-3));
                row.forms_difference = row.forms_difference.max(stable.rel_diff(&naive));
            }
            row
        })
        .collect();
    RoundoffReport { seed, n_samples, rows }
}

/// Runs `f` on a pool with `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Frobenius distance of two Cauchy stresses.
pub fn stress_distance(a: &SymTensor3, b: &SymTensor3) -> f64 {
    (*a - *b).norm()
}

/// Magnitude-matched increments along and against the prestrain direction.
pub fn loading_direction_offsets(kind: PrestrainKind, magnitude: f64) -> ((f64, f64), (f64, f64)) {
    let (a, b) = kind.endpoint();
    let dir = (a - 1.0, b);
    let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
    let step = (magnitude * dir.0 / len, magnitude * dir.1 / len);
    (step, (-step.0, -step.1))
}

//! Deformation-gradient histories for material-point runs.

use std::fmt;

use nalgebra::Vector3;
use thiserror::Error;

use crate::tensor::{self, SymTensor3, Tensor3};

#[derive(Debug, Error, PartialEq)]
pub enum LoadingError {
    #[error("shear rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("reversal times must be sorted and non-negative")]
    UnsortedReversals,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("unknown program '{0}'")]
    Unknown(String),
}

/// Meaning of the time coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeKind {
    /// Seconds; viscous terms see the true `Δt`.
    Physical,
    /// Non-dimensional monotonic loading parameter of a rate-independent run.
    LoadParameter,
}

/// Prestrain scenarios along the isochoric tension/shear family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrestrainKind {
    /// 20% uniaxial tension.
    Tension,
    /// 10% tension combined with 10% shear.
    TensionShear,
}

impl PrestrainKind {
    /// `(F11, F12)` at the end of the prestrain.
    pub fn endpoint(self) -> (f64, f64) {
        match self {
            Self::Tension => (1.2, 0.0),
            Self::TensionShear => (1.1, 0.1),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Tension => "tension",
            Self::TensionShear => "tension_shear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tension" => Some(Self::Tension),
            "tension_shear" | "tension-shear" => Some(Self::TensionShear),
            _ => None,
        }
    }
}

impl fmt::Display for PrestrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `F = F11 e1⊗e1 + F11^(-1/2)(e2⊗e2 + e3⊗e3) + F12 e1⊗e2`; unimodular for
/// every `F11 > 0`.
pub fn tension_shear_f(f11: f64, f12: f64) -> Tensor3 {
    let lateral = 1.0 / f11.sqrt();
    let mut f = Tensor3::from_diagonal(&Vector3::new(f11, lateral, lateral));
    f[(0, 1)] = f12;
    f
}

#[derive(Clone, Debug, PartialEq)]
enum Path {
    /// Piecewise-linear `F'` through key points, then unimodular projection.
    KeyPoints { times: Vec<f64>, points: Vec<Tensor3> },
    /// `1 + γ(t) e1⊗e2` with `|γ̇| = rate`, switching sign at reversals.
    Shear { rate: f64, reversals: Vec<f64> },
    /// Straight line in `(F11, F12)` through the tension/shear family.
    TensionShear { start: (f64, f64), end: (f64, f64) },
    /// Straight line in `F`.
    Linear { from: Tensor3, to: Tensor3 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformationProgram {
    pub label: String,
    /// End time; the program starts at `t = 0`.
    pub duration: f64,
    pub time_kind: TimeKind,
    /// `det F ≡ 1` along the whole program.
    pub unimodular: bool,
    path: Path,
}

/// A sampled node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub t: f64,
    pub f: Tensor3,
    pub c: SymTensor3,
}

impl DeformationProgram {
    /// Deformation gradient at time `t`, clamped to `[0, duration]`.
    pub fn f_at(&self, t: f64) -> Tensor3 {
        let t = t.clamp(0.0, self.duration);
        match &self.path {
            Path::KeyPoints { times, points } => {
                let seg = times.windows(2).position(|w| t <= w[1]).unwrap_or(times.len() - 2);
                let (t0, t1) = (times[seg], times[seg + 1]);
                let w = (t - t0) / (t1 - t0);
                let f = points[seg] * (1.0 - w) + points[seg + 1] * w;
                tensor::unimodular(&f).expect("key-point interpolation keeps det F > 0")
            }
            Path::Shear { rate, reversals } => {
                let mut gamma = 0.0;
                let mut sign = 1.0;
                let mut last = 0.0;
                for &r in reversals.iter().take_while(|&&r| r < t) {
                    gamma += sign * rate * (r - last);
                    sign = -sign;
                    last = r;
                }
                gamma += sign * rate * (t - last);
                let mut f = Tensor3::identity();
                f[(0, 1)] = gamma;
                f
            }
            Path::TensionShear { start, end } => {
                let w = t / self.duration;
                tension_shear_f(start.0 + w * (end.0 - start.0), start.1 + w * (end.1 - start.1))
            }
            Path::Linear { from, to } => {
                let w = t / self.duration;
                from * (1.0 - w) + to * w
            }
        }
    }

    pub fn c_at(&self, t: f64) -> SymTensor3 {
        let f = self.f_at(t);
        SymTensor3::from_matrix(&(f.transpose() * f))
    }

    pub fn node(&self, t: f64) -> Node {
        let f = self.f_at(t);
        Node { t, f, c: SymTensor3::from_matrix(&(f.transpose() * f)) }
    }

    /// `n_steps + 1` uniformly spaced nodes from `0` to `duration`.
    pub fn sample(&self, n_steps: usize) -> Vec<Node> {
        let n = n_steps.max(1);
        (0..=n)
            .map(|i| {
                let t = if i == n { self.duration } else { self.duration * i as f64 / n as f64 };
                self.node(t)
            })
            .collect()
    }

    /// Same path on a rescaled time axis.
    pub fn with_duration(mut self, duration: f64) -> Result<Self, LoadingError> {
        if !(duration > 0.0) {
            return Err(LoadingError::NonPositiveDuration(duration));
        }
        if let Path::Shear { rate, reversals } = &mut self.path {
            let k = self.duration / duration;
            *rate *= k;
            reversals.iter_mut().for_each(|r| *r /= k);
        }
        if let Path::KeyPoints { times, .. } = &mut self.path {
            let k = duration / self.duration;
            times.iter_mut().for_each(|t| *t *= k);
        }
        self.duration = duration;
        Ok(self)
    }
}

/// Non-proportional program through four key points in 300 s with abrupt
/// path changes at 100 s and 200 s.
pub fn keypoint_program() -> DeformationProgram {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let f1 = Tensor3::identity();
    let f2 = Tensor3::from_diagonal(&Vector3::new(2.0, r, r));
    let mut f3 = Tensor3::identity();
    f3[(0, 1)] = 1.0;
    let f4 = Tensor3::from_diagonal(&Vector3::new(r, 2.0, r));
    DeformationProgram {
        label: "keypoint".into(),
        duration: 300.0,
        time_kind: TimeKind::Physical,
        unimodular: true,
        path: Path::KeyPoints { times: vec![0.0, 100.0, 200.0, 300.0], points: vec![f1, f2, f3, f4] },
    }
}

/// Simple shear at constant `|γ̇| = rate`, reversing at each listed time.
pub fn shear_program(rate: f64, reversal_times: &[f64], duration: f64) -> Result<DeformationProgram, LoadingError> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(LoadingError::NonPositiveRate(rate));
    }
    if !(duration > 0.0) {
        return Err(LoadingError::NonPositiveDuration(duration));
    }
    if reversal_times.iter().any(|t| !(*t >= 0.0)) || reversal_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(LoadingError::UnsortedReversals);
    }
    Ok(DeformationProgram {
        label: format!("shear(rate={rate})"),
        duration,
        time_kind: TimeKind::Physical,
        unimodular: true,
        path: Path::Shear { rate, reversals: reversal_times.to_vec() },
    })
}

/// Prestrain along the tension/shear family for `t ∈ [0, 1]`.
pub fn isoerror_prestrain(kind: PrestrainKind) -> DeformationProgram {
    DeformationProgram {
        label: format!("prestrain({kind})"),
        duration: 1.0,
        time_kind: TimeKind::LoadParameter,
        unimodular: true,
        path: Path::TensionShear { start: (1.0, 0.0), end: kind.endpoint() },
    }
}

/// Straight path in `(F11, F12)` from `start` to `end` over unit load
/// parameter.
pub fn tension_shear_segment(start: (f64, f64), end: (f64, f64)) -> DeformationProgram {
    DeformationProgram {
        label: format!("segment({:?}->{:?})", start, end),
        duration: 1.0,
        time_kind: TimeKind::LoadParameter,
        unimodular: true,
        path: Path::TensionShear { start, end },
    }
}

/// Straight path in `F` over `duration`. Not unimodular in general.
pub fn linear_program(from: Tensor3, to: Tensor3, duration: f64, time_kind: TimeKind) -> DeformationProgram {
    DeformationProgram {
        label: "linear".into(),
        duration,
        time_kind,
        unimodular: false,
        path: Path::Linear { from, to },
    }
}

//! Material-point laboratory for finite-strain viscoplasticity with a nested
//! multiplicative split (Armstrong–Frederick kinematic hardening on top of
//! Voce-type isotropic hardening).
//!
//! The crate provides three local stress-update algorithms over one time step:
//!
//! * [`integrators::Pebm`], a partitioned Euler Backward scheme that reduces
//!   the corrector to one scalar equation with closed-form tensor updates;
//! * [`integrators::Ebmsc`], Euler Backward with subsequent unimodular
//!   correction, solving the coupled tensor system by Newton;
//! * [`integrators::Em`], the exponential-map variant of the same.
//!
//! The [`experiments`] module drives them along deformation programs from
//! [`loading`] to measure accuracy, iteration counts and invariance.

pub mod experiments;
pub mod integrators;
pub mod loading;
pub mod material;
pub mod tensor;

pub use integrators::{Integrator, StepError, StepInput, StepReport};
pub use material::{MaterialParams, MaterialState};
pub use tensor::{SymTensor3, Tensor3};

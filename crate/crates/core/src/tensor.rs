//! Coordinate-free 3×3 tensor algebra.
//!
//! General second-rank tensors are plain `nalgebra` matrices ([`Tensor3`]).
//! Symmetric tensors get their own type, [`SymTensor3`], which stores the six
//! independent components so that symmetry holds by construction. Every
//! internal variable of the material model (`Ci`, `Cki`) and the right
//! Cauchy–Green tensor live in `SymTensor3`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

pub mod cost;

/// General (non-symmetric) second-rank tensor.
pub type Tensor3 = Matrix3<f64>;

/// Smallest admissible eigenvalue of an SPD tensor, relative to the largest.
pub const SPD_RELATIVE_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("determinant {0:e} is not positive")]
    NonPositiveDeterminant(f64),
    #[error("tensor is not positive definite (eigenvalues in [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("tensor is singular")]
    Singular,
}

/// Symmetric second-rank tensor in 3D.
///
/// Components are stored as `[xx, yy, zz, xy, yz, xz]`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct SymTensor3 {
    c: [f64; 6],
}

impl fmt::Debug for SymTensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        write!(
            f,
            "Sym[[{xx:.6e}, {xy:.6e}, {xz:.6e}], [_, {yy:.6e}, {yz:.6e}], [_, _, {zz:.6e}]]"
        )
    }
}

/// Index into the packed storage for the (i, j) entry.
const fn packed(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) | (1, 0) => 3,
        (1, 2) | (2, 1) => 4,
        _ => 5,
    }
}

impl SymTensor3 {
    pub const ZERO: Self = Self { c: [0.0; 6] };
    pub const IDENTITY: Self = Self { c: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0] };

    pub const fn new(xx: f64, yy: f64, zz: f64, xy: f64, yz: f64, xz: f64) -> Self {
        Self { c: [xx, yy, zz, xy, yz, xz] }
    }

    pub const fn from_components(c: [f64; 6]) -> Self {
        Self { c }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Symmetric part of a general tensor, `(A + Aᵀ)/2`.
    pub fn from_matrix(m: &Tensor3) -> Self {
        Self::new(
            m[(0, 0)],
            m[(1, 1)],
            m[(2, 2)],
            0.5 * (m[(0, 1)] + m[(1, 0)]),
            0.5 * (m[(1, 2)] + m[(2, 1)]),
            0.5 * (m[(0, 2)] + m[(2, 0)]),
        )
    }

    pub fn to_matrix(&self) -> Tensor3 {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    pub fn components(&self) -> [f64; 6] {
        self.c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[packed(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.c[0] + self.c[1] + self.c[2]
    }

    pub fn det(&self) -> f64 {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    pub fn dev(&self) -> Self {
        let p = self.trace() / 3.0;
        let mut c = self.c;
        c[0] -= p;
        c[1] -= p;
        c[2] -= p;
        Self { c }
    }

    /// `(det A)^(-1/3) A`.
    pub fn unimodular(&self) -> Result<Self, TensorError> {
        let d = self.det();
        if !(d > 0.0) {
            return Err(TensorError::NonPositiveDeterminant(d));
        }
        Ok(*self * d.powf(-1.0 / 3.0))
    }

    /// `sqrt(tr(A²))`; the Frobenius norm of a symmetric tensor.
    pub fn norm(&self) -> f64 {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        (xx * xx + yy * yy + zz * zz + 2.0 * (xy * xy + yz * yz + xz * xz)).sqrt()
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Closed-form inverse via the adjugate.
    pub fn inverse(&self) -> Result<Self, TensorError> {
        cost::charge(cost::INVERSE);
        let [xx, yy, zz, xy, yz, xz] = self.c;
        let a00 = yy * zz - yz * yz;
        let a01 = xz * yz - xy * zz;
        let a02 = xy * yz - xz * yy;
        let det = xx * a00 + xy * a01 + xz * a02;
        if det == 0.0 || !det.is_finite() {
            return Err(TensorError::Singular);
        }
        let a11 = xx * zz - xz * xz;
        let a12 = xy * xz - xx * yz;
        let a22 = xx * yy - xy * xy;
        let r = 1.0 / det;
        Ok(Self::new(a00 * r, a11 * r, a22 * r, a01 * r, a12 * r, a02 * r))
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors
    /// stored column-wise.
    pub fn eigen(&self) -> (Vector3<f64>, Matrix3<f64>) {
        cost::charge(cost::EIGEN);
        let eig = SymmetricEigen::new(self.to_matrix());
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Vector3::new(
            eig.eigenvalues[order[0]],
            eig.eigenvalues[order[1]],
            eig.eigenvalues[order[2]],
        );
        let vectors = Matrix3::from_columns(&[
            eig.eigenvectors.column(order[0]).into_owned(),
            eig.eigenvectors.column(order[1]).into_owned(),
            eig.eigenvectors.column(order[2]).into_owned(),
        ]);
        (values, vectors)
    }

    /// Eigenvalues of an SPD tensor, or an error when the smallest one is not
    /// above [`SPD_RELATIVE_THRESHOLD`] times the largest.
    pub fn spd_eigen(&self) -> Result<(Vector3<f64>, Matrix3<f64>), TensorError> {
        let (values, vectors) = self.eigen();
        check_spd(&values)?;
        Ok((values, vectors))
    }

    pub fn is_spd(&self) -> bool {
        self.c.iter().all(|v| v.is_finite()) && check_spd(&self.eigen().0).is_ok()
    }

    /// Applies a scalar function to the spectrum: `V diag(f(λ)) Vᵀ`.
    pub fn spectral_map(values: &Vector3<f64>, vectors: &Matrix3<f64>, f: impl Fn(f64) -> f64) -> Self {
        let mut c = [0.0; 6];
        for k in 0..3 {
            let fk = f(values[k]);
            let v = vectors.column(k);
            c[0] += fk * v[0] * v[0];
            c[1] += fk * v[1] * v[1];
            c[2] += fk * v[2] * v[2];
            c[3] += fk * v[0] * v[1];
            c[4] += fk * v[1] * v[2];
            c[5] += fk * v[0] * v[2];
        }
        Self { c }
    }

    /// Unique SPD square root.
    pub fn sqrt_spd(&self) -> Result<Self, TensorError> {
        let (values, vectors) = self.spd_eigen()?;
        Ok(Self::spectral_map(&values, &vectors, f64::sqrt))
    }

    /// `(A^(1/2), A^(-1/2))` from a single eigendecomposition.
    pub fn sqrt_and_inv_sqrt(&self) -> Result<(Self, Self), TensorError> {
        let (values, vectors) = self.spd_eigen()?;
        Ok((
            Self::spectral_map(&values, &vectors, f64::sqrt),
            Self::spectral_map(&values, &vectors, |x| 1.0 / x.sqrt()),
        ))
    }

    /// Product `self · other`, generally non-symmetric.
    pub fn dot(&self, other: &Self) -> Tensor3 {
        cost::charge(cost::PRODUCT);
        self.to_matrix() * other.to_matrix()
    }

    /// Product with a general tensor, `self · m`.
    pub fn dot_mat(&self, m: &Tensor3) -> Tensor3 {
        cost::charge(cost::PRODUCT);
        self.to_matrix() * m
    }

    /// `M · self · Mᵀ`, symmetric by construction.
    pub fn congruence(&self, m: &Tensor3) -> Self {
        cost::charge(2 * cost::PRODUCT);
        Self::from_matrix(&(m * self.to_matrix() * m.transpose()))
    }

    /// `S · self · S` for symmetric `S`.
    pub fn sandwich(&self, s: &Self) -> Self {
        cost::charge(2 * cost::PRODUCT);
        let sm = s.to_matrix();
        Self::from_matrix(&(sm * self.to_matrix() * sm))
    }

    /// Norm of the difference relative to the larger of the two norms.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let scale = self.norm().max(other.norm()).max(f64::MIN_POSITIVE);
        (*self - *other).norm() / scale
    }
}

fn check_spd(values: &Vector3<f64>) -> Result<(), TensorError> {
    let min = values.min();
    let max = values.max();
    if !(max > 0.0) || !(min > SPD_RELATIVE_THRESHOLD * max) || !min.is_finite() || !max.is_finite() {
        return Err(TensorError::NotPositiveDefinite { min, max });
    }
    Ok(())
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Neg for SymTensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        self.c.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

impl Mul<SymTensor3> for f64 {
    type Output = SymTensor3;
    fn mul(self, rhs: SymTensor3) -> SymTensor3 {
        rhs * self
    }
}

/// Deviatoric part `A − (tr A / 3) 1`.
pub fn dev(a: &Tensor3) -> Tensor3 {
    a - Tensor3::identity() * (a.trace() / 3.0)
}

/// `(det A)^(-1/3) A`.
pub fn unimodular(a: &Tensor3) -> Result<Tensor3, TensorError> {
    let d = a.determinant();
    if !(d > 0.0) {
        return Err(TensorError::NonPositiveDeterminant(d));
    }
    Ok(a * d.powf(-1.0 / 3.0))
}

/// `sqrt(tr(AᵀA))`.
pub fn frob_norm(a: &Tensor3) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `tr(A²)`. Unlike `tr(AᵀA)` this is invariant under similarity transforms.
pub fn trace_of_square(a: &Tensor3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[(i, j)] * a[(j, i)];
        }
    }
    s
}

pub fn inverse(a: &Tensor3) -> Result<Tensor3, TensorError> {
    cost::charge(cost::INVERSE);
    a.try_inverse().ok_or(TensorError::Singular)
}

/// Principal square root `(P⁻¹Q)^(1/2)` of the product of two SPD tensors,
/// computed as `P^(-1/2) · (P^(-1/2) Q P^(-1/2))^(1/2) · P^(1/2)`.
pub fn principal_sqrt_of_spd_product(p: &SymTensor3, q: &SymTensor3) -> Result<Tensor3, TensorError> {
    q.spd_eigen()?;
    let (p_half, p_inv_half) = p.sqrt_and_inv_sqrt()?;
    let inner = q.sandwich(&p_inv_half).sqrt_spd()?;
    cost::charge(2 * cost::PRODUCT);
    Ok(p_inv_half.to_matrix() * inner.to_matrix() * p_half.to_matrix())
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn matrix_exp(a: &Tensor3) -> Tensor3 {
    let norm = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * 3.0;
    if norm == 0.0 {
        return Tensor3::identity();
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);

    let mut term = Tensor3::identity();
    let mut sum = Tensor3::identity();
    for k in 1..40 {
        term = term * scaled / k as f64;
        cost::charge(cost::PRODUCT);
        sum += term;
        if frob_norm(&term) <= 1e-17 * frob_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum * sum;
        cost::charge(cost::PRODUCT);
    }
    sum
}

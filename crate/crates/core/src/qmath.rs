//! Dense complex linear algebra on the (charge two-level) ⊗ (truncated Fock)
//! space.
//!
//! Matrices are stored row-major. Every Hilbert space used here has dimension
//! `2 × N` with `N` at most a few dozen, so nothing is sparse.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when validating trace and Hermiticity of density matrices.
pub const DENSITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmathError {
    #[error("invalid dimension {0}: truncated Fock spaces need at least 2 levels")]
    InvalidDimension(usize),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("entry count {got} does not match {rows}x{cols}")]
    EntryCount { rows: usize, cols: usize, got: usize },
    #[error("density matrix trace is {0}, expected 1")]
    Trace(f64),
    #[error("density matrix is not Hermitian (max |rho - rho^dag| = {0:e})")]
    NotHermitian(f64),
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, QmathError> {
        if data.len() != rows * cols {
            return Err(QmathError::EntryCount { rows, cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row slices; handy for small literal operators.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let data = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), c, "ragged rows");
                row.iter().map(|&x| C64::new(x, 0.0))
            })
            .collect();
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Outer product `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, QmathError> {
        if self.cols != other.rows {
            return Err(QmathError::DimensionMismatch { left: self.shape(), right: other.shape() });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>, QmathError> {
        if self.cols != v.len() {
            return Err(QmathError::DimensionMismatch { left: self.shape(), right: (v.len(), 1) });
        }
        Ok((0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self, QmathError> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `max |M − M†|`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Bosonic annihilation operator truncated to `fock_dim` levels:
/// `a[n−1, n] = √n`.
pub fn annihilation_op(fock_dim: usize) -> Result<ComplexMatrix, QmathError> {
    if fock_dim < 2 {
        return Err(QmathError::InvalidDimension(fock_dim));
    }
    let mut a = ComplexMatrix::zeros(fock_dim, fock_dim);
    for n in 1..fock_dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn creation_op(fock_dim: usize) -> Result<ComplexMatrix, QmathError> {
    Ok(annihilation_op(fock_dim)?.adjoint())
}

pub fn number_op(fock_dim: usize) -> Result<ComplexMatrix, QmathError> {
    if fock_dim < 2 {
        return Err(QmathError::InvalidDimension(fock_dim));
    }
    Ok(ComplexMatrix::from_fn(fock_dim, fock_dim, |i, j| {
        if i == j { C64::new(i as f64, 0.0) } else { ZERO }
    }))
}

/// Charge lowering operator `|0⟩⟨a|` in the basis `{|0⟩, |a⟩}`.
pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
}

/// `|a⟩⟨0|`.
pub fn sigma_plus() -> ComplexMatrix {
    sigma_minus().adjoint()
}

/// `|a⟩⟨a| − |0⟩⟨0|`.
pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[-1.0, 0.0], &[0.0, 1.0]])
}

/// Kronecker (tensor) product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Fock amplitudes `e^{−|β|²/2} βⁿ/√n!` of a coherent state, truncated to
/// `fock_dim` levels (not renormalized).
pub fn coherent_amplitudes(beta: C64, fock_dim: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(fock_dim);
    let mut term = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 0..fock_dim {
        if n > 0 {
            term = term * beta / (n as f64).sqrt();
        }
        amps.push(term);
    }
    amps
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// The matrix `H = A + iB` is embedded as the real symmetric
/// `[[A, −B], [B, A]]`, whose spectrum is that of `H` with every eigenvalue
/// doubled, and diagonalized with cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues of non-square matrix");
    let n = m.rows();
    let dim = 2 * n;
    let mut s = vec![0.0f64; dim * dim];
    for i in 0..n {
        for j in 0..n {
            // Symmetrize so that small Hermiticity noise cannot stall the sweep.
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            s[i * dim + j] = z.re;
            s[(i + n) * dim + (j + n)] = z.re;
            s[i * dim + (j + n)] = -z.im;
            s[(i + n) * dim + j] = z.im;
        }
    }
    jacobi_symmetric(&mut s, dim);
    let mut all: Vec<f64> = (0..dim).map(|i| s[i * dim + i]).collect();
    all.sort_by(f64::total_cmp);
    all.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect()
}

fn jacobi_symmetric(a: &mut [f64], n: usize) {
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            return;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

/// Tensor-product space of the charge two-level system (outer index) and a
/// truncated resonator mode (inner index). Basis index of `|q⟩⊗|n⟩` is
/// `q·N + n`, with `q = 0` for `|0⟩ = (1,1)S` and `q = 1` for `|a⟩ = (0,2)S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertSpace {
    fock_dim: usize,
}

impl HilbertSpace {
    pub const CHARGE_DIM: usize = 2;

    pub fn new(fock_dim: usize) -> Result<Self, QmathError> {
        if fock_dim < 2 {
            return Err(QmathError::InvalidDimension(fock_dim));
        }
        Ok(Self { fock_dim })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn dim(&self) -> usize {
        Self::CHARGE_DIM * self.fock_dim
    }

    pub fn index(&self, charge: usize, photons: usize) -> usize {
        debug_assert!(charge < 2 && photons < self.fock_dim);
        charge * self.fock_dim + photons
    }

    /// Resonator annihilation operator `I₂ ⊗ c`.
    pub fn cavity_lowering(&self) -> ComplexMatrix {
        kron(&ComplexMatrix::identity(2), &annihilation_op(self.fock_dim).expect("validated dimension"))
    }

    /// Charge lowering operator `σ₋ ⊗ I_N`.
    pub fn charge_lowering(&self) -> ComplexMatrix {
        kron(&sigma_minus(), &ComplexMatrix::identity(self.fock_dim))
    }

    pub fn photon_number(&self) -> ComplexMatrix {
        kron(&ComplexMatrix::identity(2), &number_op(self.fock_dim).expect("validated dimension"))
    }

    /// Projector onto the excited charge state `|a⟩⟨a| ⊗ I_N`.
    pub fn excited_projector(&self) -> ComplexMatrix {
        kron(&(&sigma_plus() * &sigma_minus()), &ComplexMatrix::identity(self.fock_dim))
    }

    pub fn basis_vector(&self, charge: usize, photons: usize) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[self.index(charge, photons)] = ONE;
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates shape, unit trace and Hermiticity to [`DENSITY_TOLERANCE`].
    pub fn new(space: HilbertSpace, matrix: ComplexMatrix) -> Result<Self, QmathError> {
        let dim = space.dim();
        if matrix.shape() != (dim, dim) {
            return Err(QmathError::DimensionMismatch { left: (dim, dim), right: matrix.shape() });
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > DENSITY_TOLERANCE {
            return Err(QmathError::Trace(tr.re));
        }
        let herm = matrix.hermiticity_error();
        if herm > DENSITY_TOLERANCE {
            return Err(QmathError::NotHermitian(herm));
        }
        Ok(Self { space, matrix })
    }

    /// Wraps an integrator state without validation; the caller tracks drift.
    pub(crate) fn from_raw(space: HilbertSpace, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.shape(), (space.dim(), space.dim()));
        Self { space, matrix }
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized here.
    pub fn from_pure(space: HilbertSpace, psi: &[C64]) -> Result<Self, QmathError> {
        if psi.len() != space.dim() {
            return Err(QmathError::DimensionMismatch { left: (space.dim(), 1), right: (psi.len(), 1) });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let unit: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Self::new(space, ComplexMatrix::outer(&unit, &unit))
    }

    /// Charge state `q` with `n` resonator photons.
    pub fn basis_state(space: HilbertSpace, charge: usize, photons: usize) -> Self {
        let v = space.basis_vector(charge, photons);
        Self { space, matrix: ComplexMatrix::outer(&v, &v) }
    }

    /// `|0⟩ ⊗ |vacuum⟩`.
    pub fn ground(space: HilbertSpace) -> Self {
        Self::basis_state(space, 0, 0)
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.matrix.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    /// Population of the highest `levels` Fock states, summed over charge.
    pub fn fock_tail_population(&self, levels: usize) -> f64 {
        let n = self.space.fock_dim();
        let start = n.saturating_sub(levels);
        (0..2)
            .flat_map(|q| (start..n).map(move |k| (q, k)))
            .map(|(q, k)| {
                let i = self.space.index(q, k);
                self.matrix[(i, i)].re
            })
            .sum()
    }

    pub fn excited_population(&self) -> f64 {
        (0..self.space.fock_dim())
            .map(|k| {
                let i = self.space.index(1, k);
                self.matrix[(i, i)].re
            })
            .sum()
    }
}

/// `tr(ρ O)`.
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<C64, QmathError> {
    let m = rho.matrix();
    if op.shape() != m.shape() {
        return Err(QmathError::DimensionMismatch { left: m.shape(), right: op.shape() });
    }
    let n = m.rows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += m[(i, k)] * op[(k, i)];
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn annihilation_small_cases() {
        let a2 = annihilation_op(2).unwrap();
        assert_eq!(a2, ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]));
        let a3 = annihilation_op(3).unwrap();
        assert_eq!(a3[(0, 1)], ONE);
        assert!((a3[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
        let nonzero = a3.as_slice().iter().filter(|z| **z != ZERO).count();
        assert_eq!(nonzero, 2);
        assert_eq!(annihilation_op(1), Err(QmathError::InvalidDimension(1)));
        assert!(HilbertSpace::new(0).is_err());
    }

    #[test]
    fn canonical_commutator_below_top_level() {
        let n = 20;
        let a = annihilation_op(n).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j && i < n - 1 { ONE } else { ZERO };
                if i == n - 1 && j == n - 1 {
                    // Truncation: [a, a†] has −(N−1) in the corner.
                    assert!((comm[(i, j)].re + (n as f64 - 1.0)).abs() < 1e-12);
                } else {
                    assert!((comm[(i, j)] - expected).norm() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn sigma_identities() {
        let sm = sigma_minus();
        let zero_state = [ONE, ZERO];
        let excited = [ZERO, ONE];
        assert_eq!(sm.apply(&excited).unwrap(), zero_state.to_vec());
        assert_eq!(sm.apply(&zero_state).unwrap(), vec![ZERO, ZERO]);
        let proj = &sigma_plus() * &sm;
        assert_eq!(proj, ComplexMatrix::outer(&excited, &excited));
        assert_eq!(sigma_plus(), ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]));
    }

    #[test]
    fn kron_basics() {
        assert_eq!(kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)), ComplexMatrix::identity(6));
        let space = HilbertSpace::new(4).unwrap();
        let low = space.charge_lowering();
        for n in 0..4 {
            let out = low.apply(&space.basis_vector(1, n)).unwrap();
            assert_eq!(out, space.basis_vector(0, n));
        }
    }

    #[test]
    fn kron_trace_factorizes() {
        // Fixed "random" entries; the oracle is the product of hand-summed diagonals.
        let a = ComplexMatrix::from_vec(2, 2, vec![c(0.3, -1.2), c(2.0, 0.5), c(-0.7, 0.1), c(1.1, 0.9)]).unwrap();
        let b = ComplexMatrix::from_fn(3, 3, |i, j| c(0.2 * i as f64 - 0.5 * j as f64, 0.1 + (i * j) as f64));
        let tr_a = c(0.3 + 1.1, -1.2 + 0.9);
        let tr_b = c(0.0, 0.1) + c(-0.3, 1.1) + c(-0.6, 4.1);
        let got = kron(&a, &b).trace();
        assert!((got - tr_a * tr_b).norm() < 1e-12);
    }

    #[test]
    fn expectation_examples() {
        let space = HilbertSpace::new(5).unwrap();
        let one_photon = DensityMatrix::basis_state(space, 0, 1);
        let n = expectation(&one_photon, &space.photon_number()).unwrap();
        assert!((n - ONE).norm() < 1e-15);
        let vac = DensityMatrix::ground(space);
        assert_eq!(expectation(&vac, &space.cavity_lowering()).unwrap(), ZERO);
        assert!(matches!(
            expectation(&vac, &ComplexMatrix::identity(3)),
            Err(QmathError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn coherent_state_mean_field() {
        // Oracle: ⟨β|a|β⟩ = β; truncation at N=20 leaves ~0.3^40/20! of tail.
        let fock = 20;
        let beta = c(0.3, 0.0);
        let amps = coherent_amplitudes(beta, fock);
        let a = annihilation_op(fock).unwrap();
        let psi_norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        assert!((psi_norm - 1.0).abs() < 1e-12);
        let rho = ComplexMatrix::outer(&amps, &amps);
        let mean = (&rho * &a).trace();
        assert!((mean - beta).norm() < 1e-6);
    }

    #[test]
    fn density_matrix_validation() {
        let space = HilbertSpace::new(2).unwrap();
        let bad_trace = ComplexMatrix::identity(4);
        assert!(matches!(DensityMatrix::new(space, bad_trace), Err(QmathError::Trace(_))));
        let mut skew = ComplexMatrix::zeros(4, 4);
        skew[(0, 0)] = ONE;
        skew[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(space, skew), Err(QmathError::NotHermitian(_))));
        let mixed = ComplexMatrix::identity(4).scale(c(0.25, 0.0));
        let rho = DensityMatrix::new(space, mixed).unwrap();
        assert!((rho.min_eigenvalue() - 0.25).abs() < 1e-12);
        let id = expectation(&rho, &ComplexMatrix::identity(4)).unwrap();
        assert!((id - ONE).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_known_hermitian() {
        // [[2, i], [−i, 2]] has eigenvalues 1 and 3.
        let m = ComplexMatrix::from_vec(2, 2, vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]).unwrap();
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        // A pure state has spectrum {0, …, 0, 1}.
        let space = HilbertSpace::new(6).unwrap();
        let mut psi = coherent_amplitudes(c(0.4, 0.7), 6);
        psi.extend(coherent_amplitudes(c(-0.2, 0.1), 6));
        let rho = DensityMatrix::from_pure(space, &psi).unwrap();
        let ev = hermitian_eigenvalues(rho.matrix());
        assert!(ev[..11].iter().all(|x| x.abs() < 1e-12));
        assert!((ev[11] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fock_tail_and_excited_population() {
        let space = HilbertSpace::new(6).unwrap();
        let rho = DensityMatrix::basis_state(space, 1, 5);
        assert_eq!(rho.fock_tail_population(2), 1.0);
        assert_eq!(rho.excited_population(), 1.0);
        assert_eq!(DensityMatrix::ground(space).fock_tail_population(2), 0.0);
    }
}

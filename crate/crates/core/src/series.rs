//! Truncated Taylor/Laurent series with square-matrix coefficients.
//!
//! A [`MatrixSeries`] stores the coefficients of `t^k_min, ..., t^trunc`.
//! Every operation keeps only the powers that are fully determined by the
//! retained powers of its operands, so a coefficient that is present is exact
//! (up to floating-point rounding in `f64` mode).
//!
//! Coefficients are generic over [`Coeff`], implemented for `f64` and for
//! exact `BigRational`.

use std::fmt::Debug;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::SeriesError;

/// Largest pole order accepted by [`MatrixSeries::invert`].
pub const MAX_POLE_BOUND: usize = 3;

/// Scalar type usable as a series coefficient.
pub trait Coeff:
    nalgebra::Scalar
    + Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Signed
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
{
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Whether `self` counts as zero next to a quantity of size `scale`.
    fn negligible(&self, scale: &Self) -> bool;
}

impl Coeff for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-11 * scale.abs().max(f64::MIN_POSITIVE)
    }
}

impl Coeff for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}

/// Exact rational `num / den`.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Matrix-valued series `Σ_{k=k_min}^{trunc} coeffs[k-k_min] t^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSeries<S: Coeff = f64> {
    n: usize,
    k_min: i32,
    coeffs: Vec<DMatrix<S>>,
}

impl<S: Coeff> MatrixSeries<S> {
    /// Builds a series from its coefficients; `coeffs[i]` multiplies `t^(k_min+i)`.
    pub fn new(n: usize, k_min: i32, coeffs: Vec<DMatrix<S>>) -> Result<Self, SeriesError> {
        for c in &coeffs {
            if c.nrows() != n || c.ncols() != n {
                return Err(SeriesError::DimensionMismatch {
                    expected: n,
                    found: c.nrows().max(c.ncols()),
                });
            }
        }
        Ok(Self { n, k_min, coeffs })
    }

    /// The series `m · t^power`, exact through `power`.
    pub fn monomial(m: DMatrix<S>, power: i32) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "coefficient must be square");
        Self { n, k_min: power, coeffs: vec![m] }
    }

    /// `m · t^power`, padded with zero coefficients up to `trunc`.
    pub fn monomial_to(m: DMatrix<S>, power: i32, trunc: i32) -> Self {
        let n = m.nrows();
        let mut coeffs = vec![m];
        for _ in power..trunc {
            coeffs.push(DMatrix::zeros(n, n));
        }
        Self { n, k_min: power, coeffs }
    }

    /// Identity series `I` known through `trunc`.
    pub fn identity(n: usize, trunc: i32) -> Self {
        Self::monomial_to(DMatrix::identity(n, n), 0, trunc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    /// Highest retained power.
    pub fn trunc(&self) -> i32 {
        self.k_min + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[DMatrix<S>] {
        &self.coeffs
    }

    /// Coefficient of `t^k`; zero below `k_min`, `None` above `trunc`.
    pub fn coeff(&self, k: i32) -> Option<DMatrix<S>> {
        if k > self.trunc() {
            None
        } else if k < self.k_min {
            Some(DMatrix::zeros(self.n, self.n))
        } else {
            Some(self.coeffs[(k - self.k_min) as usize].clone())
        }
    }

    fn coeff_or_zero(&self, k: i32) -> DMatrix<S> {
        self.coeff(k).unwrap_or_else(|| DMatrix::zeros(self.n, self.n))
    }

    /// Drops all powers above `trunc`.
    pub fn truncate(&self, trunc: i32) -> Self {
        let keep = (trunc - self.k_min + 1).clamp(0, self.coeffs.len() as i32) as usize;
        Self { n: self.n, k_min: self.k_min, coeffs: self.coeffs[..keep].to_vec() }
    }

    /// Entrywise map of every coefficient.
    pub fn map_coeffs<F: Fn(&DMatrix<S>) -> DMatrix<S>>(&self, f: F) -> Self {
        let coeffs: Vec<_> = self.coeffs.iter().map(f).collect();
        let n = coeffs.first().map_or(self.n, |c| c.nrows());
        Self { n, k_min: self.k_min, coeffs }
    }

    /// Restriction of every coefficient to rows and columns `from..n`.
    pub fn lower_right_block(&self, from: usize) -> Self {
        let m = self.n - from;
        self.map_coeffs(|c| c.view((from, from), (m, m)).into_owned())
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map_coeffs(|c| c.map(|x| x * s.clone()))
    }

    fn check_dims(&self, other: &Self) -> Result<(), SeriesError> {
        if self.n != other.n {
            return Err(SeriesError::DimensionMismatch { expected: self.n, found: other.n });
        }
        Ok(())
    }

    /// Coefficientwise sum; retained through the smaller truncation.
    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_dims(other)?;
        let k_min = self.k_min.min(other.k_min);
        let trunc = self.trunc().min(other.trunc());
        let coeffs = (k_min..=trunc)
            .map(|k| self.coeff_or_zero(k) + other.coeff_or_zero(k))
            .collect();
        Ok(Self { n: self.n, k_min, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.scale(&(-S::one())))
    }

    /// Cauchy product, retained through `min(trunc_a + kmin_b, trunc_b + kmin_a)`.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_dims(other)?;
        let k_min = self.k_min + other.k_min;
        let trunc = (self.trunc() + other.k_min).min(other.trunc() + self.k_min);
        let coeffs = (k_min..=trunc)
            .map(|p| {
                let mut acc = DMatrix::zeros(self.n, self.n);
                for i in self.k_min..=self.trunc() {
                    let j = p - i;
                    if j < other.k_min || j > other.trunc() {
                        continue;
                    }
                    acc += &self.coeffs[(i - self.k_min) as usize]
                        * &other.coeffs[(j - other.k_min) as usize];
                }
                acc
            })
            .collect();
        Ok(Self { n: self.n, k_min, coeffs })
    }

    /// Termwise derivative `k c_k t^(k-1)`.
    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = S::from_i64((self.k_min + i as i32) as i64);
                c.map(|x| x * k.clone())
            })
            .collect();
        Self { n: self.n, k_min: self.k_min - 1, coeffs }
    }

    /// Inverse of a Taylor series whose inverse has a pole of order at most
    /// `pole_bound`.
    ///
    /// Writing `Y = t^p X`, the coefficients of `b(t) Y(t) = t^p I` give a
    /// block lower-triangular system in `Y_0..Y_K` (`K = trunc(b)`). Any
    /// solution agrees on `Y_0..Y_{K-p}`, so the result is retained through
    /// `K - 2p`.
    pub fn invert(&self, pole_bound: usize) -> Result<Self, SeriesError> {
        if pole_bound > MAX_POLE_BOUND {
            return Err(SeriesError::PoleBoundTooLarge(pole_bound));
        }
        if self.k_min < 0 {
            return Err(SeriesError::NotTaylor(self.k_min));
        }
        let p = pole_bound as i32;
        let kk = self.trunc();
        let n = self.n;
        if kk < 2 * p {
            return Err(SeriesError::InsufficientOrder { needed: 2 * p, have: kk });
        }
        let blocks = (kk + 1) as usize;
        let dim = blocks * n;
        let mut m = DMatrix::<S>::zeros(dim, dim);
        for row in 0..blocks {
            for col in 0..=row {
                let b = self.coeff_or_zero((row - col) as i32);
                m.view_mut((row * n, col * n), (n, n)).copy_from(&b);
            }
        }
        let mut rhs = DMatrix::<S>::zeros(dim, n);
        rhs.view_mut((pole_bound * n, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
        let y = solve_consistent(&m, &rhs).ok_or(SeriesError::SingularSeries(pole_bound))?;
        let keep = (kk - p + 1) as usize;
        let coeffs = (0..keep).map(|j| y.view((j * n, 0), (n, n)).into_owned()).collect();
        Ok(Self { n, k_min: -p, coeffs })
    }

    pub fn to_f64(&self) -> MatrixSeries<f64> {
        MatrixSeries {
            n: self.n,
            k_min: self.k_min,
            coeffs: self.coeffs.iter().map(|c| c.map(|x| x.to_f64())).collect(),
        }
    }
}

impl MatrixSeries<f64> {
    /// Largest entrywise difference over the commonly retained powers.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let lo = self.k_min.min(other.k_min);
        let hi = self.trunc().min(other.trunc());
        (lo..=hi)
            .map(|k| (self.coeff_or_zero(k) - other.coeff_or_zero(k)).amax())
            .fold(0.0, f64::max)
    }
}

/// Solves a square, possibly singular but consistent system `m x = rhs` by
/// Gauss-Jordan elimination with full pivoting; free unknowns are set to zero.
/// Returns `None` if the system is inconsistent.
fn solve_consistent<S: Coeff>(m: &DMatrix<S>, rhs: &DMatrix<S>) -> Option<DMatrix<S>> {
    let dim = m.nrows();
    let ncols = rhs.ncols();
    let mut a = m.clone();
    let mut b = rhs.clone();
    let scale = a.iter().fold(S::zero(), |acc, x| if x.abs() > acc { x.abs() } else { acc });
    let mut col_perm: Vec<usize> = (0..dim).collect();
    let mut rank = 0;
    while rank < dim {
        let mut best = (rank, rank);
        let mut best_val = S::zero();
        for i in rank..dim {
            for j in rank..dim {
                let v = a[(i, j)].abs();
                if v > best_val {
                    best_val = v;
                    best = (i, j);
                }
            }
        }
        if best_val.negligible(&scale) {
            break;
        }
        a.swap_rows(rank, best.0);
        b.swap_rows(rank, best.0);
        a.swap_columns(rank, best.1);
        col_perm.swap(rank, best.1);
        let piv = a[(rank, rank)].clone();
        for j in 0..dim {
            let v = a[(rank, j)].clone() / piv.clone();
            a[(rank, j)] = v;
        }
        for j in 0..ncols {
            let v = b[(rank, j)].clone() / piv.clone();
            b[(rank, j)] = v;
        }
        for i in 0..dim {
            if i == rank || a[(i, rank)].is_zero() {
                continue;
            }
            let f = a[(i, rank)].clone();
            for j in 0..dim {
                let v = a[(rank, j)].clone() * f.clone();
                a[(i, j)] -= v;
            }
            for j in 0..ncols {
                let v = b[(rank, j)].clone() * f.clone();
                b[(i, j)] -= v;
            }
        }
        rank += 1;
    }
    let bscale = b.iter().fold(S::one(), |acc, x| if x.abs() > acc { x.abs() } else { acc });
    for i in rank..dim {
        for j in 0..ncols {
            if !b[(i, j)].negligible(&bscale) {
                return None;
            }
        }
    }
    let mut x = DMatrix::<S>::zeros(dim, ncols);
    for (r, &c) in col_perm.iter().enumerate().take(rank) {
        for j in 0..ncols {
            x[(c, j)] = b[(r, j)].clone();
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    fn elem(n: usize, i: usize, j: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(i, j)] = 1.0;
        m
    }

    #[test]
    fn add_identity_twice() {
        let i = MatrixSeries::identity(2, 0);
        let s = i.add(&i).unwrap();
        assert_eq!(s.coeff(0).unwrap(), DMatrix::identity(2, 2) * 2.0);
    }

    #[test]
    fn add_cancels() {
        let nmat = mat(2, &[0.0, 1.0, 0.0, 0.0]);
        let a = MatrixSeries::monomial(nmat.clone(), 1);
        let b = MatrixSeries::monomial(-nmat, 1);
        let s = a.add(&b).unwrap();
        assert!(s.coeffs().iter().all(|c| c.amax() == 0.0));
    }

    #[test]
    fn add_takes_smaller_truncation() {
        let a = MatrixSeries::<f64>::identity(2, 5);
        let b = MatrixSeries::identity(2, 3);
        assert_eq!(a.add(&b).unwrap().trunc(), 3);
    }

    #[test]
    fn add_rejects_dimension_mismatch() {
        let a = MatrixSeries::<f64>::identity(2, 1);
        let b = MatrixSeries::identity(3, 1);
        assert!(matches!(a.add(&b), Err(SeriesError::DimensionMismatch { .. })));
    }

    #[test]
    fn mul_telescopes() {
        let a_m = mat(2, &[1.0, 2.0, 3.0, 4.0]);
        let id = DMatrix::identity(2, 2);
        let p = MatrixSeries::new(2, 0, vec![id.clone(), a_m.clone()]).unwrap();
        let q = MatrixSeries::new(2, 0, vec![id.clone(), -a_m.clone()]).unwrap();
        let r = p.mul(&q).unwrap();
        assert_eq!(r.trunc(), 1);
        // Extend operands so the t^2 term is retained.
        let p2 = MatrixSeries::new(2, 0, vec![id.clone(), a_m.clone(), DMatrix::zeros(2, 2)]).unwrap();
        let q2 = MatrixSeries::new(2, 0, vec![id.clone(), -a_m.clone(), DMatrix::zeros(2, 2)]).unwrap();
        let r2 = p2.mul(&q2).unwrap();
        assert_eq!(r2.coeff(0).unwrap(), id);
        assert_eq!(r2.coeff(1).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(r2.coeff(2).unwrap(), -(&a_m * &a_m));
    }

    #[test]
    fn mul_cancels_pole() {
        let a = MatrixSeries::monomial(DMatrix::<f64>::identity(3, 3), -1);
        let b = MatrixSeries::monomial(DMatrix::identity(3, 3), 1);
        let c = a.mul(&b).unwrap();
        assert_eq!(c.k_min(), 0);
        assert_eq!(c.coeff(0).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn mul_elementary_matrices() {
        let a = MatrixSeries::monomial(elem(3, 0, 1), 0);
        let b = MatrixSeries::monomial(elem(3, 1, 0), 0);
        assert_eq!(a.mul(&b).unwrap().coeff(0).unwrap(), elem(3, 0, 0));
    }

    #[test]
    fn invert_scalar_pole() {
        let z = DMatrix::<f64>::zeros(2, 2);
        let b = MatrixSeries::new(2, 0, vec![z.clone(), DMatrix::identity(2, 2), z]).unwrap();
        let x = b.invert(1).unwrap();
        assert_eq!(x.k_min(), -1);
        assert_eq!(x.coeff(-1).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn invert_neumann_series() {
        let nil = mat(3, &[0.0, 1.0, 2.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let id = DMatrix::identity(3, 3);
        let mut cs = vec![id.clone(), nil.clone()];
        cs.extend((0..4).map(|_| DMatrix::zeros(3, 3)));
        let b = MatrixSeries::new(3, 0, cs).unwrap();
        let x = b.invert(0).unwrap();
        assert_eq!(x.coeff(0).unwrap(), id);
        assert_eq!(x.coeff(1).unwrap(), -nil.clone());
        assert_eq!(x.coeff(2).unwrap(), &nil * &nil);
        assert_eq!(x.coeff(3).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn invert_rejects_excess_pole_bound() {
        let b = MatrixSeries::<f64>::identity(2, 10);
        assert!(matches!(b.invert(4), Err(SeriesError::PoleBoundTooLarge(4))));
    }

    #[test]
    fn invert_detects_insufficient_pole_bound() {
        let mut cs = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), DMatrix::identity(2, 2)];
        cs.extend((0..4).map(|_| DMatrix::zeros(2, 2)));
        let b = MatrixSeries::<f64>::new(2, 0, cs).unwrap();
        assert!(matches!(b.invert(1), Err(SeriesError::SingularSeries(1))));
        assert!(b.invert(2).is_ok());
    }

    #[test]
    fn derivative_examples() {
        let m = mat(2, &[1.0, 2.0, 3.0, 4.0]);
        let d = MatrixSeries::monomial(m.clone(), 2).derivative();
        assert_eq!((d.k_min(), d.coeff(1).unwrap()), (1, &m * 2.0));
        let d = MatrixSeries::monomial(m.clone(), -2).derivative();
        assert_eq!((d.k_min(), d.coeff(-3).unwrap()), (-3, &m * -2.0));
        let d = MatrixSeries::monomial(m, 0).derivative();
        assert_eq!(d.coeff(-1).unwrap().amax(), 0.0);
    }

    #[test]
    fn rational_inverse_is_exact() {
        let one = rational(1, 1);
        let half = rational(1, 2);
        let id = DMatrix::from_diagonal_element(2, 2, one.clone());
        let b1 = DMatrix::from_row_slice(2, 2, &[one.clone(), half.clone(), rational(0, 1), one.clone()]);
        let z = DMatrix::from_element(2, 2, rational(0, 1));
        let b = MatrixSeries::new(2, 0, vec![z.clone(), id.clone(), b1, z.clone(), z.clone(), z]).unwrap();
        let x = b.invert(1).unwrap();
        let prod = b.mul(&x).unwrap();
        for k in prod.k_min()..=prod.trunc() {
            let expect = if k == 0 { id.clone() } else { DMatrix::from_element(2, 2, rational(0, 1)) };
            assert_eq!(prod.coeff(k).unwrap(), expect);
        }
    }

    fn series_strategy(n: usize, k_min: i32, len: usize) -> impl Strategy<Value = MatrixSeries<f64>> {
        proptest::collection::vec(-2.0f64..2.0, n * n * len).prop_map(move |v| {
            let coeffs = v.chunks(n * n).map(|c| DMatrix::from_row_slice(n, n, c)).collect();
            MatrixSeries::new(n, k_min, coeffs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn mul_is_associative(a in series_strategy(2, -1, 4), b in series_strategy(2, 0, 4), c in series_strategy(2, 1, 4)) {
            let l = a.mul(&b).unwrap().mul(&c).unwrap();
            let r = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(l.trunc(), r.trunc());
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
        }

        #[test]
        fn mul_distributes(a in series_strategy(2, 0, 4), b in series_strategy(2, -1, 5), c in series_strategy(2, 0, 3)) {
            let l = a.mul(&b.add(&c).unwrap()).unwrap();
            let r = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
        }

        #[test]
        fn derivative_obeys_leibniz(a in series_strategy(3, -2, 5), b in series_strategy(3, 1, 5)) {
            let l = a.mul(&b).unwrap().derivative();
            let r = a.derivative().mul(&b).unwrap().add(&a.mul(&b.derivative()).unwrap()).unwrap();
            prop_assert!(l.max_abs_diff(&r) < 1e-11);
        }

        #[test]
        fn invert_is_right_inverse(b0 in series_strategy(3, 0, 10), p in 0usize..=3) {
            // Force a pole of order exactly p: multiply an invertible series by t^p.
            let id = DMatrix::<f64>::identity(3, 3) * 3.0;
            let mut cs = b0.coeffs().to_vec();
            cs[0] = &cs[0] * 0.25 + id;
            let inv = MatrixSeries::new(3, 0, cs).unwrap();
            let tp = MatrixSeries::monomial_to(DMatrix::identity(3, 3), p as i32, 30);
            let b = tp.mul(&inv).unwrap().truncate(9);
            let x = b.invert(p).unwrap();
            let prod = b.mul(&x).unwrap();
            prop_assert!(prod.trunc() >= 9 - 2 * p as i32);
            let ident = MatrixSeries::identity(3, prod.trunc());
            prop_assert!(prod.max_abs_diff(&ident) < 1e-12);
        }
    }
}

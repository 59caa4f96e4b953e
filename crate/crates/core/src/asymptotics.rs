//! Small-time expansion of the Hessian of the geodesic cost,
//! `Q(t) = I/t² + Q⁽⁰⁾ + t Q⁽¹⁾ + t² Q⁽²⁾ + O(t³)`, on the distribution.
//!
//! Two routes are provided. The series route solves the linear Cauchy
//! problem for the flow-pulled-back canonical frame,
//! `Ȧ = C₁A − C₂C`, `Ḃ = C₁B − C₂D`, `Ċ = RA − C₁ᵀC`, `Ḋ = RB − C₁ᵀD`
//! with `A(0) = D(0) = I`, `B(0) = C(0) = 0`, inverts `S = A⁻¹B` as a
//! Laurent series and reads `Q(t) = d/dt[S⁻¹]` on the lower-right `2d × 2d`
//! block. The closed route evaluates explicit polynomials in the curvature
//! blocks `R(0)`, `Ṙ(0)`, `R̈(0)`.
//!
//! All operators are written in the canonical basis `(f_1, ..., f_{2d})` of
//! the distribution, `f_1 = X_b`, `f_j = X_{c_j}`.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::canonical::{curvature_blocks, parallel_frame_from, MovingFrame};
use crate::error::{Error, SeriesError};
use crate::flow::{structural_matrices, ExtremalState};
use crate::series::{Coeff, MatrixSeries};
use crate::structure::ContactModel;

/// Taylor order of `A`, `B` in the series route; the lowest that determines `Q⁽²⁾`.
pub const DEFAULT_ORDER: usize = 9;
/// Spacing of the curvature samples used to fit `R(0)`, `Ṙ(0)`, `R̈(0)`.
pub const FIT_SPACING: f64 = 1e-2;
/// Number of curvature samples in the fit.
pub const FIT_SAMPLES: usize = 7;
/// Degree of the fitted polynomial.
pub const FIT_DEGREE: usize = 4;

fn factorial<S: Coeff>(k: usize) -> S {
    (1..=k as i64).fold(S::one(), |acc, v| acc * S::from_i64(v))
}

fn check_shape<S: Coeff>(m: &DMatrix<S>, n: usize) -> Result<(), SeriesError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(SeriesError::DimensionMismatch { expected: n, found: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// Taylor coefficients of `A(t)`, `B(t)` through `t^order`.
///
/// `r_taylor` lists the derivatives `[R(0), Ṙ(0), R̈(0), ...]` of the
/// canonical curvature in the ordering `(a, b, c...)`; missing higher
/// derivatives are taken to be zero.
pub fn cauchy_taylor<S: Coeff>(
    r_taylor: &[DMatrix<S>],
    d: usize,
    order: usize,
) -> Result<(MatrixSeries<S>, MatrixSeries<S>), SeriesError> {
    let n = 2 * d + 1;
    if r_taylor.is_empty() {
        return Err(SeriesError::InsufficientRData { needed: 1, have: 0 });
    }
    for r in r_taylor {
        check_shape(r, n)?;
    }
    let (c1f, c2f) = structural_matrices(d);
    let c1: DMatrix<S> = c1f.map(|v| S::from_i64(v as i64));
    let c2: DMatrix<S> = c2f.map(|v| S::from_i64(v as i64));
    let c1t = c1.transpose();
    let rk: Vec<DMatrix<S>> =
        r_taylor.iter().enumerate().map(|(k, r)| r.map(|v| v / factorial::<S>(k))).collect();

    let zero = DMatrix::<S>::zeros(n, n);
    let id = DMatrix::<S>::identity(n, n);
    let (mut a, mut b, mut c, mut dd) = (vec![id.clone()], vec![zero.clone()], vec![zero.clone()], vec![id]);
    for k in 0..order {
        let inv = S::one() / S::from_i64(k as i64 + 1);
        let mut ra = zero.clone();
        let mut rb = zero.clone();
        for (i, r) in rk.iter().enumerate().take(k + 1) {
            ra += r * &a[k - i];
            rb += r * &b[k - i];
        }
        let an = (&c1 * &a[k] - &c2 * &c[k]).map(|v| v * inv.clone());
        let bn = (&c1 * &b[k] - &c2 * &dd[k]).map(|v| v * inv.clone());
        let cn = (ra - &c1t * &c[k]).map(|v| v * inv.clone());
        let dn = (rb - &c1t * &dd[k]).map(|v| v * inv.clone());
        a.push(an);
        b.push(bn);
        c.push(cn);
        dd.push(dn);
    }
    Ok((MatrixSeries::new(n, 0, a)?, MatrixSeries::new(n, 0, b)?))
}

/// Laurent series of `S(t)⁻¹ = B(t)⁻¹A(t)`, with a pole of order 3.
pub fn laurent_s_inverse<S: Coeff>(a: &MatrixSeries<S>, b: &MatrixSeries<S>) -> Result<MatrixSeries<S>, SeriesError> {
    b.invert(3)?.mul(a)
}

fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

/// `I`, `Q⁽⁰⁾`, `Q⁽¹⁾`, `Q⁽²⁾` in the canonical basis of the distribution.
#[derive(Clone, Debug, Serialize)]
pub struct QExpansion {
    pub d: usize,
    #[serde(rename = "I", serialize_with = "serialize_matrix")]
    pub i: DMatrix<f64>,
    #[serde(rename = "Q0", serialize_with = "serialize_matrix")]
    pub q0: DMatrix<f64>,
    #[serde(rename = "Q1", serialize_with = "serialize_matrix")]
    pub q1: DMatrix<f64>,
    #[serde(rename = "Q2", serialize_with = "serialize_matrix")]
    pub q2: DMatrix<f64>,
    /// Largest entrywise difference between the series and closed routes,
    /// when both were evaluated.
    pub series_vs_closed_max_dev: Option<f64>,
    pub basis: &'static str,
}

/// Eigen-structure of `I`.
#[derive(Clone, Debug)]
pub struct SpectrumOfI {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvector of the largest eigenvalue.
    pub top_eigenvector: DVector<f64>,
    pub trace: f64,
}

impl QExpansion {
    fn new(d: usize, i: DMatrix<f64>, q0: DMatrix<f64>, q1: DMatrix<f64>, q2: DMatrix<f64>) -> Self {
        Self { d, i, q0, q1, q2, series_vs_closed_max_dev: None, basis: "canonical" }
    }

    /// `[Q⁽⁰⁾, Q⁽¹⁾, Q⁽²⁾]`.
    pub fn q(&self) -> [&DMatrix<f64>; 3] {
        [&self.q0, &self.q1, &self.q2]
    }

    /// Largest entrywise difference to `other` over `I` and all `Q⁽ⁱ⁾`.
    pub fn max_abs_diff(&self, other: &QExpansion) -> f64 {
        let mut m = (&self.i - &other.i).amax();
        for (a, b) in self.q().iter().zip(other.q()) {
            m = m.max((*a - b).amax());
        }
        m
    }

    /// Largest deviation from symmetry among `I` and the `Q⁽ⁱ⁾`.
    pub fn asymmetry(&self) -> f64 {
        [&self.i, &self.q0, &self.q1, &self.q2].iter().map(|m| (*m - m.transpose()).amax()).fold(0.0, f64::max)
    }

    pub fn spectrum_of_i(&self) -> SpectrumOfI {
        let sym = (&self.i + self.i.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let top = *idx.last().unwrap();
        SpectrumOfI {
            eigenvalues: idx.iter().map(|&k| eig.eigenvalues[k]).collect(),
            top_eigenvector: eig.eigenvectors.column(top).into_owned(),
            trace: self.i.trace(),
        }
    }
}

/// Series route with the default Taylor order.
pub fn q_operators_series(r_taylor: &[DMatrix<f64>], d: usize) -> Result<QExpansion, SeriesError> {
    q_operators_series_with_order(r_taylor, d, DEFAULT_ORDER)
}

/// Series route: `Q(t) = d/dt[S(t)⁻¹]` restricted to the distribution.
/// Needs `R(0)`, `Ṙ(0)`, `R̈(0)`; higher derivatives, if given, are used in
/// the recursion and do not affect the result.
pub fn q_operators_series_with_order(
    r_taylor: &[DMatrix<f64>],
    d: usize,
    order: usize,
) -> Result<QExpansion, SeriesError> {
    if r_taylor.len() < 3 {
        return Err(SeriesError::InsufficientRData { needed: 3, have: r_taylor.len() });
    }
    let (a, b) = cauchy_taylor(r_taylor, d, order)?;
    let q = laurent_s_inverse(&a, &b)?.derivative().lower_right_block(1);
    let coeff = |k: i32| q.coeff(k).ok_or(SeriesError::InsufficientOrder { needed: k, have: q.trunc() });
    Ok(QExpansion::new(d, coeff(-2)?, coeff(0)?, coeff(1)?, coeff(2)?))
}

/// Blocks `(aa, ac, bb, bc, cc)` of a matrix in the ordering `(a, b, c...)`;
/// `ac`, `bc` are row vectors.
fn blocks(r: &DMatrix<f64>) -> (f64, DMatrix<f64>, f64, DMatrix<f64>, DMatrix<f64>) {
    let m = r.nrows() - 2;
    (
        r[(0, 0)],
        r.view((0, 2), (1, m)).into_owned(),
        r[(1, 1)],
        r.view((1, 2), (1, m)).into_owned(),
        r.view((2, 2), (m, m)).into_owned(),
    )
}

fn assemble(bb: f64, bc: &DMatrix<f64>, cc: &DMatrix<f64>) -> DMatrix<f64> {
    let m = cc.nrows();
    let mut q = DMatrix::zeros(m + 1, m + 1);
    q[(0, 0)] = bb;
    q.view_mut((0, 1), (1, m)).copy_from(bc);
    q.view_mut((1, 0), (m, 1)).copy_from(&bc.transpose());
    q.view_mut((1, 1), (m, m)).copy_from(cc);
    q
}

/// Closed route from `R(0)`, `Ṙ(0)`, `R̈(0)`.
pub fn q_operators_closed(r0: &DMatrix<f64>, r1: &DMatrix<f64>, r2: &DMatrix<f64>) -> Result<QExpansion, SeriesError> {
    let n = r0.nrows();
    if n < 3 || n % 2 == 0 {
        return Err(SeriesError::DimensionMismatch { expected: 3, found: n });
    }
    check_shape(r0, n)?;
    check_shape(r1, n)?;
    check_shape(r2, n)?;
    let d = (n - 1) / 2;
    let (aa, ac, bb, bc, cc) = blocks(r0);
    let (_, ac1, bb1, bc1, cc1) = blocks(r1);
    let (_, _, bb2, bc2, cc2) = blocks(r2);
    let _ = aa;

    let q0 = assemble(2.0 / 15.0 * bb, &(&bc / 12.0), &(&cc / 3.0));
    let q1 = assemble(bb1 / 15.0, &(&ac / 10.0 - &bc1 / 30.0), &(&cc1 / 6.0));
    let bcbc = (&bc * bc.transpose())[(0, 0)];
    let q2_bb = (240.0 * r0[(0, 0)] + 44.0 * bb * bb + 65.0 * bcbc + 240.0 * bb2) / 35.0;
    let q2_bc = &bc * bb - (&bc * &cc) * 2.0 + &ac1 * 12.0 - &bc2 * 6.0;
    let q2_cc = (&cc * &cc) * 16.0 + bc.transpose() * &bc + &cc2 * 12.0;
    let q2 = assemble(q2_bb, &q2_bc, &q2_cc) / 240.0;

    let mut i = DMatrix::identity(2 * d, 2 * d);
    i[(0, 0)] = 4.0;
    Ok(QExpansion::new(d, i, q0, q1, q2))
}

/// `[R(0), Ṙ(0), R̈(0)]` along the frame's extremal from a least-squares
/// polynomial fit of the curvature sampled at `t = kδ`, `k = 0..6`.
pub fn curvature_taylor(frame: &MovingFrame) -> Result<[DMatrix<f64>; 3], Error> {
    let ts: Vec<f64> = (0..FIT_SAMPLES).map(|k| k as f64 * FIT_SPACING).collect();
    let samples = ts.iter().map(|&t| Ok(curvature_blocks(frame, t)?.assembled)).collect::<Result<Vec<_>, Error>>()?;
    Ok(fit_taylor(&samples, FIT_SPACING))
}

/// Fits a degree-4 polynomial in `s = t/δ` to equispaced samples and
/// returns the value and first two derivatives at `t = 0`.
fn fit_taylor(samples: &[DMatrix<f64>], delta: f64) -> [DMatrix<f64>; 3] {
    let k = samples.len();
    let v = DMatrix::from_fn(k, FIT_DEGREE + 1, |r, c| (r as f64).powi(c as i32));
    let pinv = v.pseudo_inverse(1e-14).expect("Vandermonde pseudo-inverse");
    let (nr, nc) = samples[0].shape();
    let mut out = [DMatrix::zeros(nr, nc), DMatrix::zeros(nr, nc), DMatrix::zeros(nr, nc)];
    for (j, s) in samples.iter().enumerate() {
        out[0] += s * pinv[(0, j)];
        out[1] += s * (pinv[(1, j)] / delta);
        out[2] += s * (2.0 * pinv[(2, j)] / (delta * delta));
    }
    out
}

/// Expansion for the unit covector `state`: curvature Taylor data from the
/// canonical frame, the series route, and its deviation from the closed route.
pub fn expansion_along_geodesic(model: &dyn ContactModel, state: &ExtremalState) -> Result<QExpansion, Error> {
    let r = taylor_along_geodesic(model, state)?;
    expansion_from_taylor(&r, model.d())
}

/// `[R(0), Ṙ(0), R̈(0)]` for the unit covector `state`.
pub fn taylor_along_geodesic(model: &dyn ContactModel, state: &ExtremalState) -> Result<[DMatrix<f64>; 3], Error> {
    let span = FIT_SPACING * (FIT_SAMPLES - 1) as f64;
    let frame = parallel_frame_from(model, state, span, None)?;
    curvature_taylor(&frame)
}

/// Series route on given Taylor data, cross-checked against the closed route.
pub fn expansion_from_taylor(r: &[DMatrix<f64>; 3], d: usize) -> Result<QExpansion, Error> {
    let mut q = q_operators_series(r, d)?;
    let closed = q_operators_closed(&r[0], &r[1], &r[2])?;
    q.series_vs_closed_max_dev = Some(q.max_abs_diff(&closed));
    Ok(q)
}

/// Curvature Taylor data of the rescaled covector `αλ`: blocks scale by
/// `α⁴` (aa), `α³` (ac), `α²` (bb, bc, cc), and the `k`-th derivative picks
/// up a further `α^k` from the time change.
pub fn rescale_taylor(r: &[DMatrix<f64>; 3], alpha: f64) -> [DMatrix<f64>; 3] {
    let n = r[0].nrows();
    let weight = |i: usize, j: usize| match (i, j) {
        (0, 0) => 4,
        (0, _) | (_, 0) => 3,
        _ => 2,
    };
    let mut out = r.clone();
    for (k, m) in out.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= alpha.powi(weight(i, j) + k as i32);
            }
        }
    }
    out
}

/// Result of [`homogeneity_check`].
#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub alpha: f64,
    /// `max |I_{αλ} − I_λ|`.
    pub i_deviation: f64,
    /// For `i = 0, 1, 2`: `max |Q⁽ⁱ⁾_{αλ} − α^{2+i} Q⁽ⁱ⁾_λ| / max(1, max |α^{2+i} Q⁽ⁱ⁾_λ|)`.
    pub q_relative_deviation: [f64; 3],
}

impl HomogeneityReport {
    pub fn max_deviation(&self) -> f64 {
        self.q_relative_deviation.iter().fold(self.i_deviation, |a, &b| a.max(b))
    }
}

/// Recomputes the expansion for `αλ` from rescaled curvature data and
/// compares it with the predicted scaling `I_{αλ} = I_λ`,
/// `Q⁽ⁱ⁾_{αλ} = α^{2+i} Q⁽ⁱ⁾_λ`.
pub fn homogeneity_check(model: &dyn ContactModel, state: &ExtremalState, alpha: f64) -> Result<HomogeneityReport, Error> {
    let r = taylor_along_geodesic(model, state)?;
    homogeneity_from_taylor(&r, model.d(), alpha)
}

/// [`homogeneity_check`] on given Taylor data.
pub fn homogeneity_from_taylor(r: &[DMatrix<f64>; 3], d: usize, alpha: f64) -> Result<HomogeneityReport, Error> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(crate::error::StructureError::InvalidParams(format!("alpha must be positive, got {alpha}")).into());
    }
    let base = q_operators_series(r, d)?;
    let scaled = q_operators_series(&rescale_taylor(r, alpha), d)?;
    let mut rel = [0.0; 3];
    for (i, (qb, qs)) in base.q().iter().zip(scaled.q()).enumerate() {
        let predicted = *qb * alpha.powi(2 + i as i32);
        rel[i] = (qs - &predicted).amax() / predicted.amax().max(1.0);
    }
    Ok(HomogeneityReport { alpha, i_deviation: (&scaled.i - &base.i).amax(), q_relative_deviation: rel })
}

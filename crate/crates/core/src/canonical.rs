//! Adapted parallel frames along normal extremals and the canonical
//! curvature blocks.
//!
//! Along a unit-speed extremal with tangent `T`, an adapted frame has
//! `X_{2d} = T`, `X_1 = −JT` and `X_2..X_{2d−1}` spanning the rest of the
//! distribution; it is transported by `∇_T X_j = ½(h₀ J X_j + a_j J T)` with
//! `a_j = g(h₀T − 2Q(T,T), X_j)`. Frames are stored as orthogonal matrices
//! whose columns are components in the model's reference frame.
//!
//! The canonical curvature is reported in the ordering `(a, b, c_2..c_{2d})`
//! with `X_a = X_0 − Σ_j a_j X_j`, `X_b = −JT`, `X_{c_j} = X_j`.
//!
//! Tangent vectors to `T*M` use the lifted reference frame of [`crate::flow`].
//! The derivative along the extremal of a field `E(t)` is the Lie derivative
//! `[H⃗, E]`, computed as the time derivative of `E` pulled back by the flow.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, FlowError, StructureError};
use crate::flow::{
    check_dims, dop853, geodesic_rhs, hamiltonian, lifted_symplectic_form, linearization, ExtremalState,
    GeodesicRecord, OdeOptions, OdeSolution,
};
use crate::structure::calculus::{apply_q, curvature_vec};
use crate::structure::{ContactModel, FrameCalculus};

/// `‖Q‖` above which `R^{aa}`, `R^{ac}` are computed numerically.
pub const Q_THRESHOLD: f64 = 1e-9;
/// Orthonormality drift that triggers a polar re-projection of the frame.
pub const REORTHONORMALIZE_DRIFT: f64 = 1e-10;
/// Step of the finite differences in [`numerical_aa_ac`].
pub const NUMERICAL_STEP: f64 = 1e-4;
/// Integrator tolerance for transported frames.
pub const FRAME_TOL: f64 = 1e-12;
/// Allowed deviation of `2H` from 1.
const UNIT_SPEED_TOL: f64 = 1e-6;

fn check_unit_speed(state: &ExtremalState) -> Result<(), FlowError> {
    let two_h = 2.0 * hamiltonian(state);
    if two_h == 0.0 {
        return Err(FlowError::TrivialCovector);
    }
    if (two_h - 1.0).abs() > UNIT_SPEED_TOL {
        return Err(FlowError::NotUnitSpeed(two_h));
    }
    Ok(())
}

fn tangent_of(h: &[f64]) -> DVector<f64> {
    let mut t = DVector::from_column_slice(h);
    t[0] = 0.0;
    t
}

fn unit(n: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[k] = 1.0;
    e
}

/// Flips `v` so that its first component of magnitude above `1e-12` is positive.
fn fix_sign(v: &mut DVector<f64>) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12) {
        if *x < 0.0 {
            *v *= -1.0;
        }
    }
}

/// Adapted frame at `state` built from the horizontal seed basis `seed`
/// (a `2d × 2d` matrix whose columns are candidate vectors in the components
/// of `X_1..X_{2d}`; the identity when `None`).
pub fn adapted_frame(
    model: &dyn ContactModel,
    state: &ExtremalState,
    seed: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>, Error> {
    check_dims(model, state)?;
    check_unit_speed(state)?;
    let fc = model.calculus(&state.x, 0)?;
    Ok(adapted_frame_at(&fc.j(), &state.h, seed))
}

fn adapted_frame_at(j: &DMatrix<f64>, h: &[f64], seed: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = h.len();
    let d = (n - 1) / 2;
    let mut t = tangent_of(h);
    t /= t.norm();
    let x1 = -(j * &t);
    let mut basis: Vec<DVector<f64>> = vec![t.clone(), x1.clone()];
    let mut mid = Vec::with_capacity(2 * d - 2);
    for k in 0..2 * d {
        if mid.len() == 2 * d - 2 {
            break;
        }
        let mut v = DVector::zeros(n);
        match seed {
            Some(s) => v.rows_mut(1, 2 * d).copy_from(&s.column(k)),
            None => v[k + 1] = 1.0,
        }
        let norm0 = v.norm();
        for b in &basis {
            let p = b.dot(&v);
            v -= b * p;
        }
        let nv = v.norm();
        if nv <= 1e-8 * norm0 {
            continue;
        }
        v /= nv;
        fix_sign(&mut v);
        basis.push(v.clone());
        mid.push(v);
    }
    let mut o = DMatrix::zeros(n, n);
    o[(0, 0)] = 1.0;
    o.set_column(1, &x1);
    for (k, v) in mid.iter().enumerate() {
        o.set_column(2 + k, v);
    }
    o.set_column(2 * d, &t);
    o
}

/// Local geometry at one point of the extremal in an adapted frame.
#[derive(Clone, Debug)]
pub struct FramePoint {
    pub state: ExtremalState,
    /// Columns `X_0..X_{2d}` in reference components.
    pub frame: DMatrix<f64>,
    /// `a_j` for `j = 0..2d` (`a_0 = 0`).
    pub a: DVector<f64>,
    pub h0: f64,
    fc: FrameCalculus,
    t: DVector<f64>,
    jt: DVector<f64>,
    q: Vec<f64>,
    qtt: DVector<f64>,
}

impl FramePoint {
    fn new(model: &dyn ContactModel, state: ExtremalState, mid: &[f64], order: usize) -> Result<Self, Error> {
        let fc = model.calculus(&state.x, order)?;
        let n = fc.jet().n;
        let d = (n - 1) / 2;
        let j = fc.j();
        let t = tangent_of(&state.h);
        let jt = &j * &t;
        let mut frame = DMatrix::zeros(n, n);
        frame[(0, 0)] = 1.0;
        frame.set_column(1, &(-&jt));
        frame.set_column(2 * d, &t);
        if d > 1 {
            frame.view_mut((0, 2), (n, 2 * d - 2)).copy_from_slice(mid);
        }
        let q = if order >= 1 { fc.q()? } else { vec![0.0; n * n * n] };
        let qtt = apply_q(&q, n, &t, &t);
        let h0 = state.h[0];
        let b = &t * h0 - &qtt * 2.0;
        let mut a = frame.transpose() * &b;
        a[0] = 0.0;
        Ok(Self { state, frame, a, h0, fc, t, jt, q, qtt })
    }

    pub fn n(&self) -> usize {
        self.frame.nrows()
    }

    pub fn d(&self) -> usize {
        (self.n() - 1) / 2
    }

    pub fn q_norm(&self) -> f64 {
        self.q.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Time derivative of the frame components along the extremal.
    pub fn frame_derivative(&self) -> DMatrix<f64> {
        let n = self.n();
        let d = self.d();
        let wt = self.fc.w_along(&self.t);
        let j = self.fc.j();
        let mut cov = DMatrix::zeros(n, n);
        cov.set_column(1, &(&self.t * self.h0 - &self.qtt));
        for k in 2..2 * d {
            let xk = self.frame.column(k).into_owned();
            cov.set_column(k, &((&j * &xk) * (0.5 * self.h0) + &self.jt * (0.5 * self.a[k])));
        }
        cov.set_column(2 * d, &(&self.jt * self.h0));
        cov - wt * &self.frame
    }

    /// `T`, `JT` and `Q(T, T)` in reference components.
    pub fn tangent(&self) -> (&DVector<f64>, &DVector<f64>, &DVector<f64>) {
        (&self.t, &self.jt, &self.qtt)
    }

    fn col(&self, k: usize) -> DVector<f64> {
        self.frame.column(k).into_owned()
    }

    fn tau(&self) -> DMatrix<f64> {
        self.fc.tau()
    }

    fn along(&self, f: impl Fn(usize) -> Result<DMatrix<f64>, StructureError>) -> Result<DMatrix<f64>, StructureError> {
        let n = self.n();
        let mut r = DMatrix::zeros(n, n);
        for i in 1..n {
            if self.t[i] != 0.0 {
                r += f(i)? * self.t[i];
            }
        }
        Ok(r)
    }

    /// `(∇_T Q)(T, T)`.
    fn cov_q_tt(&self) -> Result<DVector<f64>, StructureError> {
        let n = self.n();
        let mut out = DVector::zeros(n);
        if self.q_norm() == 0.0 && self.fc.jet().constant {
            return Ok(out);
        }
        for i in 1..n {
            if self.t[i] != 0.0 {
                out += apply_q(&self.fc.cov_q(i)?, n, &self.t, &self.t) * self.t[i];
            }
        }
        Ok(out)
    }

    fn curvature(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> Result<f64, StructureError> {
        let ops = self.fc.curvature_ops()?;
        Ok(curvature_vec(&ops, x, y, z, w))
    }

    /// Curvature blocks `R^{bb}`, `R^{bc}`, `R^{cc}` (valid for any `Q`).
    fn bb_bc_cc(&self) -> Result<(f64, DVector<f64>, DMatrix<f64>), StructureError> {
        let n = self.n();
        let d = self.d();
        let ops = self.fc.curvature_ops()?;
        let (t, jt, qtt) = (&self.t, &self.jt, &self.qtt);
        let tau_t = self.tau() * t;
        let h0 = self.h0;
        let rbb = curvature_vec(&ops, t, jt, jt, t) + 3.0 * qtt.norm_squared() - 3.0 * tau_t.dot(jt) + h0 * h0;
        let cqtt = self.cov_q_tt()?;
        let j = self.fc.j();
        let m = 2 * d - 1;
        let mut rbc = DVector::zeros(m);
        let tt = tau_t.dot(t);
        for k in 0..m {
            let xj = self.col(k + 2);
            let jxj = &j * &xj;
            rbc[k] = -curvature_vec(&ops, t, jt, &xj, t) + tau_t.dot(&xj) - tt * t.dot(&xj)
                + 3.0 * cqtt.dot(&xj)
                + 8.0 * h0 * qtt.dot(&jxj);
        }
        let mut rcc = DMatrix::zeros(m, m);
        for r in 0..m {
            let xi = self.col(r + 2);
            for s in 0..m {
                let xj = self.col(s + 2);
                let rr = 0.5 * (curvature_vec(&ops, t, &xi, &xj, t) + curvature_vec(&ops, t, &xj, &xi, t));
                let qq = 0.5 * (t.dot(&apply_q(&self.q, n, &xj, &xi)) + t.dot(&apply_q(&self.q, n, &xi, &xj)));
                let delta = if r == s { 1.0 } else { 0.0 };
                rcc[(r, s)] = rr + h0 * qq + 0.25 * h0 * h0 * delta - 0.25 * self.a[r + 2] * self.a[s + 2];
            }
        }
        Ok((rbb, rbc, rcc))
    }

    /// Closed forms for `R^{aa}`, `R^{ac}`, valid when `Q = 0`.
    fn aa_ac_closed(&self) -> Result<(f64, DVector<f64>), StructureError> {
        let d = self.d();
        let (t, jt) = (&self.t, &self.jt);
        let h0 = self.h0;
        let tau = self.tau();
        let tau_t = &tau * t;
        let cov_tau_t = self.along(|i| self.fc.cov_tau(i))?;
        let ct_t = &cov_tau_t * t;
        // Second derivative of τ along the curve: ∇²τ(T, T) + ∇_{∇_T T} τ.
        let mut dd = DMatrix::zeros(self.n(), self.n());
        for nu in 1..self.n() {
            if t[nu] == 0.0 {
                continue;
            }
            for mu in 1..self.n() {
                if t[mu] != 0.0 {
                    dd += self.fc.cov2_tau(nu, mu)? * (t[nu] * t[mu]);
                }
            }
        }
        for i in 1..self.n() {
            if jt[i] != 0.0 {
                dd += self.fc.cov_tau(i)? * (h0 * jt[i]);
            }
        }
        let c0 = self.fc.cov_tau(0)?;
        let tt = tau_t.dot(t);
        let raa = (&dd * t).dot(jt) - 5.0 * h0 * ct_t.dot(t) - 2.0 * tt * tt - 6.0 * h0 * h0 * tau_t.dot(jt)
            - 2.0 * tau_t.norm_squared()
            - (&c0 * t).dot(t);
        let j = self.fc.j();
        let e0 = unit(self.n(), 0);
        let m = 2 * d - 1;
        let mut rac = DVector::zeros(m);
        let proj = ct_t.dot(t) + 2.0 * h0 * tau_t.dot(jt);
        for k in 0..m {
            let xj = self.col(k + 2);
            rac[k] = self.curvature(t, &e0, &xj, t)? + ct_t.dot(&xj) + 2.0 * h0 * tau_t.dot(&(&j * &xj))
                - proj * t.dot(&xj);
        }
        Ok((raa, rac))
    }

    /// Lifted components of `E_a`, `E_b`, `E_{c_j}` (vertical fields).
    pub fn e_fields(&self) -> Vec<DVector<f64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n);
        let lift = |v: DVector<f64>| {
            let mut u = DVector::zeros(2 * n);
            u.rows_mut(n, n).copy_from(&v);
            u
        };
        out.push(lift(unit(n, 0)));
        out.push(lift(self.col(1)));
        for k in 2..n {
            out.push(lift(self.col(k) + unit(n, 0) * self.a[k]));
        }
        out
    }

    /// Lifted components of `F_b`.
    pub fn f_b(&self) -> DVector<f64> {
        let n = self.n();
        let x1 = self.col(1);
        let w1 = self.fc.w_along(&x1);
        let tau_t = self.tau() * &self.t;
        let mut u = DVector::zeros(2 * n);
        u.rows_mut(0, n).copy_from(&x1);
        let mut vert = &self.qtt - w1 * &self.t;
        vert[0] += 2.0 * tau_t.dot(&x1);
        u.rows_mut(n, n).copy_from(&vert);
        u
    }

    /// Lifted components of `F_a = X̃_a + Σ_i φ_i ∂_i + φ_0 ∂_0`, where the
    /// lifts of the adapted frame are taken for its extension that is
    /// constant in directions transverse to `T`.
    ///
    /// `φ = −∇_{X_0 + 2Q(T,T)} T + τT − g(τT, T) T − 4h₀ JQ(T,T) + 2(∇_T Q)(T,T)`;
    /// this agrees with `−Ḟ_b + R^{bb} E_b + Σ R^{bc}_j E_{c_j}` computed by
    /// differentiation along the flow.
    pub fn f_a(&self) -> Result<DVector<f64>, StructureError> {
        let n = self.n();
        let (t, jt, qtt) = (&self.t, &self.jt, &self.qtt);
        let h0 = self.h0;
        let j = self.fc.j();
        let tau = self.tau();
        let tau_t = &tau * t;
        let cqtt = self.cov_q_tt()?;
        let e0 = unit(n, 0);

        let v = &e0 + qtt * 2.0;
        let wv = self.fc.w_along(&v);
        let phi = -(wv * t) + &tau_t - t * tau_t.dot(t) - (&j * qtt) * (4.0 * h0) + &cqtt * 2.0;

        let cov_tau_t = self.along(|i| self.fc.cov_tau(i))?;
        let x1 = self.col(1);
        let mut cov_tau_x1 = DMatrix::zeros(n, n);
        for i in 1..n {
            if x1[i] != 0.0 {
                cov_tau_x1 += self.fc.cov_tau(i)? * x1[i];
            }
        }
        // d/dt Q(T, T) = (∇_T Q)(T, T) + Q(∇_T T, T) + Q(T, ∇_T T), ∇_T T = h₀JT.
        let dqtt = &cqtt + (apply_q(&self.q, n, jt, t) + apply_q(&self.q, n, t, jt)) * h0;
        let phi0 = 2.0 * (&cov_tau_t * t).dot(jt) - 4.0 * h0 * tau_t.dot(t) + (&cov_tau_x1 * t).dot(t)
            + 2.0 * self.curvature(t, jt, qtt, t)?
            + 2.0 * tau_t.dot(qtt)
            - 6.0 * dqtt.dot(qtt);

        let od = self.frame_derivative();
        let correction = &self.frame * (od.transpose() * DVector::from_column_slice(&self.state.h)) * h0;

        let b = t * h0 - qtt * 2.0;
        let mut u = DVector::zeros(2 * n);
        u.rows_mut(0, n).copy_from(&(&e0 - b));
        let mut vert = phi + correction;
        vert[0] += phi0;
        u.rows_mut(n, n).copy_from(&vert);
        Ok(u)
    }

    /// Symplectic form in lifted coordinates at this point.
    pub fn symplectic(&self) -> DMatrix<f64> {
        lifted_symplectic_form(self.fc.jet(), &self.state.h)
    }
}

/// Adapted frame transported along a unit-speed extremal.
#[derive(Clone, Debug)]
pub struct MovingFrame<'m> {
    model: &'m dyn ContactModel,
    pub d: usize,
    pub t_end: f64,
    pub seed: Option<DMatrix<f64>>,
    order: usize,
    solution: OdeSolution,
}

/// Derivative order of the structure functions used for curvature.
fn curvature_order(model: &dyn ContactModel) -> usize {
    model.max_jet_order().min(2)
}

fn frame_rhs(model: &dyn ContactModel, y: &[f64], dy: &mut [f64]) -> Result<(), Error> {
    let m = model.chart_dim();
    let n = model.n();
    let d = model.d();
    let base = m + n;
    geodesic_rhs(model, &y[..base], &mut dy[..base]);
    let k = n * (2 * d - 2);
    if k == 0 {
        return Ok(());
    }
    let state = ExtremalState::unpack(&y[..base], m);
    let p = FramePoint::new(model, state, &y[base..base + k], 1)?;
    let od = p.frame_derivative();
    dy[base..base + k].copy_from_slice(od.view((0, 2), (n, 2 * d - 2)).clone_owned().as_slice());
    Ok(())
}

fn nan_on_error(r: Result<(), Error>, dy: &mut [f64]) {
    if r.is_err() {
        dy.iter_mut().for_each(|v| *v = f64::NAN);
    }
}

/// Projects the transported block of `frame` back onto an orthonormal set
/// orthogonal to `X_0, X_1, X_{2d}` when it has drifted.
fn reorthonormalize(o: &mut DMatrix<f64>) {
    let n = o.nrows();
    let d = (n - 1) / 2;
    if d < 2 {
        return;
    }
    let k = 2 * d - 2;
    let mut mid = o.view((0, 2), (n, k)).clone_owned();
    let fixed = [unit(n, 0), o.column(1).into_owned(), o.column(2 * d).into_owned()];
    let drift = {
        let gram = o.transpose() * &*o;
        (gram - DMatrix::identity(n, n)).abs().max()
    };
    if drift <= REORTHONORMALIZE_DRIFT {
        return;
    }
    for c in 0..k {
        let mut v = mid.column(c).into_owned();
        for f in &fixed {
            let p = f.dot(&v);
            v -= f * p;
        }
        mid.set_column(c, &v);
    }
    let svd = mid.svd(true, true);
    let polar = svd.u.unwrap() * svd.v_t.unwrap();
    o.view_mut((0, 2), (n, k)).copy_from(&polar);
}

/// Transports the adapted frame along the extremal recorded in `geo`.
pub fn parallel_frame<'m>(model: &'m dyn ContactModel, geo: &GeodesicRecord) -> Result<MovingFrame<'m>, Error> {
    parallel_frame_from(model, &geo.initial, geo.t_end, None)
}

/// Transports the adapted frame built from `seed` (see [`adapted_frame`])
/// along the extremal from `state` over `[0, t_end]`.
pub fn parallel_frame_from<'m>(
    model: &'m dyn ContactModel,
    state: &ExtremalState,
    t_end: f64,
    seed: Option<&DMatrix<f64>>,
) -> Result<MovingFrame<'m>, Error> {
    let o = adapted_frame(model, state, seed)?;
    let n = model.n();
    let d = model.d();
    let mut y0 = state.pack();
    y0.extend(o.view((0, 2), (n, 2 * d - 2)).clone_owned().iter());
    let solution = dop853(
        |_, y, dy| nan_on_error(frame_rhs(model, y, dy), dy),
        0.0,
        &y0,
        t_end,
        &OdeOptions::with_tol(FRAME_TOL),
    )?;
    Ok(MovingFrame { model, d, t_end, seed: seed.cloned(), order: curvature_order(model), solution })
}

impl<'m> MovingFrame<'m> {
    pub fn model(&self) -> &'m dyn ContactModel {
        self.model
    }

    /// Times of the accepted integrator steps.
    pub fn sample_times(&self) -> &[f64] {
        &self.solution.ts
    }

    /// Frame and local geometry at time `t`.
    pub fn at(&self, t: f64) -> Result<FramePoint, Error> {
        let y = self.solution.eval(t)?;
        self.point_from(&y, self.order)
    }

    fn point_from(&self, y: &[f64], order: usize) -> Result<FramePoint, Error> {
        let m = self.model.chart_dim();
        let n = self.model.n();
        let base = m + n;
        let state = ExtremalState::unpack(&y[..base], m);
        let p = FramePoint::new(self.model, state.clone(), &y[base..], order)?;
        let mut frame = p.frame.clone();
        reorthonormalize(&mut frame);
        if frame != p.frame {
            let mid: Vec<f64> = frame.view((0, 2), (n, 2 * self.d - 2)).iter().copied().collect();
            return FramePoint::new(self.model, state, &mid, order);
        }
        Ok(p)
    }

    /// Frame points on a small symmetric stencil around `t`, each carrying
    /// the inverse of the linearized flow from `t`.
    pub fn local_patch(&self, t: f64, delta: f64) -> Result<LocalPatch, Error> {
        let model = self.model;
        let m = model.chart_dim();
        let n = model.n();
        let d = self.d;
        let k = n * (2 * d - 2);
        let base = m + n;
        let centre = self.at(t)?;
        let mut y0 = centre.state.pack();
        y0.extend(centre.frame.view((0, 2), (n, 2 * d - 2)).clone_owned().iter());
        let p_off = y0.len();
        y0.extend(DMatrix::<f64>::identity(2 * n, 2 * n).iter());
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let r = (|| -> Result<(), Error> {
                frame_rhs(model, &y[..base + k], &mut dy[..base + k])?;
                let jet = model.jet(&y[..m], 1)?;
                let nm = linearization(&jet, &y[m..base]);
                let p = DMatrix::from_column_slice(2 * n, 2 * n, &y[p_off..]);
                dy[p_off..].copy_from_slice((nm * p).as_slice());
                Ok(())
            })();
            nan_on_error(r, dy);
        };
        let opts = OdeOptions::fixed(delta);
        let fwd = dop853(rhs, 0.0, &y0, 2.0 * delta, &opts)?;
        let bwd = dop853(rhs, 0.0, &y0, -2.0 * delta, &opts)?;
        let mut points = Vec::with_capacity(5);
        let mut p_inv = Vec::with_capacity(5);
        for s in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let y = if s < 0.0 { bwd.eval(s * delta)? } else { fwd.eval(s * delta)? };
            let pm = DMatrix::from_column_slice(2 * n, 2 * n, &y[p_off..]);
            let inv = pm.try_inverse().ok_or_else(|| FlowError::IntegrationFailure {
                t: t + s * delta,
                reason: "singular linearized flow".into(),
            })?;
            points.push(self.point_from(&y[..p_off], self.order)?);
            p_inv.push(inv);
        }
        Ok(LocalPatch { t, delta, points, p_inv })
    }
}

/// Frame points at `t + kδ`, `k = −2..2`, with the flow pull-back to `t`.
#[derive(Clone, Debug)]
pub struct LocalPatch {
    pub t: f64,
    pub delta: f64,
    pub points: Vec<FramePoint>,
    p_inv: Vec<DMatrix<f64>>,
}

impl LocalPatch {
    pub fn centre(&self) -> &FramePoint {
        &self.points[2]
    }

    fn pulled<F>(&self, f: &F) -> Result<Vec<DVector<f64>>, Error>
    where
        F: Fn(&FramePoint) -> Result<DVector<f64>, Error>,
    {
        self.points.iter().zip(&self.p_inv).map(|(p, inv)| Ok(inv * f(p)?)).collect()
    }

    /// Derivative along the extremal at the centre of the lifted field `f`.
    pub fn derivative<F>(&self, f: F) -> Result<DVector<f64>, Error>
    where
        F: Fn(&FramePoint) -> Result<DVector<f64>, Error>,
    {
        let v = self.pulled(&f)?;
        Ok((&v[0] - &v[1] * 8.0 + &v[3] * 8.0 - &v[4]) / (12.0 * self.delta))
    }

    /// Second derivative along the extremal at the centre.
    pub fn second_derivative<F>(&self, f: F) -> Result<DVector<f64>, Error>
    where
        F: Fn(&FramePoint) -> Result<DVector<f64>, Error>,
    {
        let v = self.pulled(&f)?;
        Ok((-&v[0] + &v[1] * 16.0 - &v[2] * 30.0 + &v[3] * 16.0 - &v[4]) / (12.0 * self.delta * self.delta))
    }

    /// `σ(u, v)` at the centre.
    pub fn sigma(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * self.centre().symplectic() * v)[(0, 0)]
    }
}

/// How `R^{aa}`, `R^{ac}` were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AaAcMode {
    Closed,
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ricci {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Canonical curvature at one time, in the ordering `(a, b, c_2..c_{2d})`.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureBlocks {
    pub t: f64,
    #[serde(rename = "Raa")]
    pub raa: f64,
    #[serde(rename = "Rac")]
    pub rac: Vec<f64>,
    #[serde(rename = "Rbb")]
    pub rbb: f64,
    #[serde(rename = "Rbc")]
    pub rbc: Vec<f64>,
    #[serde(rename = "Rcc")]
    pub rcc: Vec<Vec<f64>>,
    pub ricci: Ricci,
    pub aa_ac_mode: AaAcMode,
    pub xa_convention: &'static str,
    #[serde(skip)]
    pub assembled: DMatrix<f64>,
}

impl CurvatureBlocks {
    /// Builds the blocks from their parts and assembles the full matrix.
    pub fn from_parts(
        t: f64,
        raa: f64,
        rac: &DVector<f64>,
        rbb: f64,
        rbc: &DVector<f64>,
        rcc: &DMatrix<f64>,
        mode: AaAcMode,
    ) -> Self {
        let m = rcc.nrows();
        let n = m + 2;
        let mut r = DMatrix::zeros(n, n);
        r[(0, 0)] = raa;
        r[(1, 1)] = rbb;
        for k in 0..m {
            r[(0, k + 2)] = rac[k];
            r[(k + 2, 0)] = rac[k];
            r[(1, k + 2)] = rbc[k];
            r[(k + 2, 1)] = rbc[k];
        }
        r.view_mut((2, 2), (m, m)).copy_from(rcc);
        let rows = |mat: &DMatrix<f64>| (0..mat.nrows()).map(|i| mat.row(i).iter().copied().collect()).collect();
        let mut blocks = Self {
            t,
            raa,
            rac: rac.iter().copied().collect(),
            rbb,
            rbc: rbc.iter().copied().collect(),
            rcc: rows(rcc),
            ricci: Ricci { a: 0.0, b: 0.0, c: 0.0 },
            aa_ac_mode: mode,
            xa_convention: "step7",
            assembled: r,
        };
        let (a, b, c) = ricci(&blocks);
        blocks.ricci = Ricci { a, b, c };
        blocks
    }
}

/// Canonical splitting at `state`: `(X_a, X_b, basis of S^c)` in reference
/// components, with `S^c = (JT)^⊥ ∩ D` spanned by `X_2..X_{2d}`.
pub fn canonical_splitting(
    model: &dyn ContactModel,
    state: &ExtremalState,
) -> Result<(DVector<f64>, DVector<f64>, Vec<DVector<f64>>), Error> {
    check_dims(model, state)?;
    check_unit_speed(state)?;
    let frame = {
        let fc = model.calculus(&state.x, 0)?;
        adapted_frame_at(&fc.j(), &state.h, None)
    };
    let n = model.n();
    let mid: Vec<f64> = frame.view((0, 2), (n, n - 3)).iter().copied().collect();
    let p = FramePoint::new(model, state.clone(), &mid, model.max_jet_order().min(1))?;
    let mut xa = unit(n, 0);
    for k in 1..n {
        xa -= p.col(k) * p.a[k];
    }
    let sc = (2..n).map(|k| p.col(k)).collect();
    Ok((xa, p.col(1), sc))
}

/// Canonical curvature at time `t` along the frame's extremal. `R^{aa}` and
/// `R^{ac}` use closed forms when `‖Q(γ(t))‖ ≤` [`Q_THRESHOLD`] and
/// [`numerical_aa_ac`] otherwise.
pub fn curvature_blocks(frame: &MovingFrame, t: f64) -> Result<CurvatureBlocks, Error> {
    let p = frame.at(t)?;
    let (rbb, rbc, rcc) = p.bb_bc_cc()?;
    let (raa, rac, mode) = if p.q_norm() <= Q_THRESHOLD {
        let (raa, rac) = p.aa_ac_closed()?;
        (raa, rac, AaAcMode::Closed)
    } else {
        let (raa, rac) = numerical_aa_ac(frame, t)?;
        (raa, rac, AaAcMode::Numerical)
    };
    Ok(CurvatureBlocks::from_parts(t, raa, &rac, rbb, &rbc, &rcc, mode))
}

/// `(R^{bb}, R^{bc}, R^{cc})` at time `t`, skipping the `a` blocks.
pub fn bc_blocks(frame: &MovingFrame, t: f64) -> Result<(f64, DVector<f64>, DMatrix<f64>), Error> {
    Ok(frame.at(t)?.bb_bc_cc()?)
}

/// `R^{aa} = σ(Ḟ_a, F_a)` and `R^{ac}_j = σ(Ḟ_a, F_{c_j})` with `F_a` from its
/// coefficient formula, `F_{c_j} = −Ė_{c_j}`, and the derivatives taken by
/// 4th-order central differences of pulled-back components.
pub fn numerical_aa_ac(frame: &MovingFrame, t: f64) -> Result<(f64, DVector<f64>), Error> {
    let patch = frame.local_patch(t, NUMERICAL_STEP)?;
    numerical_aa_ac_on(&patch)
}

/// [`numerical_aa_ac`] on a precomputed patch.
pub fn numerical_aa_ac_on(patch: &LocalPatch) -> Result<(f64, DVector<f64>), Error> {
    let fa_dot = patch.derivative(|p| Ok(p.f_a()?))?;
    let c = patch.centre();
    let fa = c.f_a()?;
    let raa = patch.sigma(&fa_dot, &fa);
    let m = c.n() - 2;
    let mut rac = DVector::zeros(m);
    for k in 0..m {
        let fc = -patch.derivative(|p| Ok(p.e_fields()[k + 2].clone()))?;
        rac[k] = patch.sigma(&fa_dot, &fc);
    }
    Ok((raa, rac))
}

/// `(Ric^a, Ric^b, Ric^c) = (R^{aa}, R^{bb}, tr R^{cc})`.
pub fn ricci(blocks: &CurvatureBlocks) -> (f64, f64, f64) {
    let trace = blocks.rcc.iter().enumerate().map(|(i, row)| row[i]).sum();
    (blocks.raa, blocks.rbb, trace)
}

#[cfg(test)]
mod tests;
